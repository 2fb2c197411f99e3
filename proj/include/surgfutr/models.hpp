#pragma once

#include <random>
#include <vector>

#include "surgfutr/actdyn.hpp"
#include "surgfutr/labels.hpp"
#include "surgfutr/otcluster.hpp"
#include "surgfutr/stategraph.hpp"
#include "surgfutr/synth.hpp"

namespace surgfutr {

struct ModelConfig {
  std::size_t n_tokens = 196;
  std::size_t feat_dim = 384;   // d
  std::size_t hidden = 256;     // d1
  std::size_t class_dim = 128;  // d2
  std::size_t n_classes = 10;   // N_c
  std::size_t clusters = 25;    // K
  double marginal_temperature = 1.0;
  double sinkhorn_lambda = 1.0;
  int sinkhorn_iterations = 3;
  GraphConfig graph;  // in_dim/hidden filled from the fields above
  ActDynConfig actdyn;
  double emd_blur = 0.01;
  int emd_iterations = 30;
  double smooth_l1_threshold = 1.0;
  std::size_t lite_rollout_steps = 2;

  GraphConfig graph_config() const {
    GraphConfig g = graph;
    g.in_dim = feat_dim;
    g.hidden = hidden;
    return g;
  }
};

struct LossWeights {
  double lambda1 = 1.0;  // L_SC
  double lambda2 = 1.0;  // L_CTR
  double lambda3 = 0.5;  // L_FCTR
  double lambda4 = 1.0;  // L_SE distill
  double lambda5 = 1.0;  // L_SC distill
  double lambda6 = 0.7;  // L_FUTR
  double tau2 = 0.3;
};

// Two-layer perceptron over token features; the desk-scale stand-in for a
// fine-tunable video backbone (token features in, token features out).
class TokenEncoder {
 public:
  TokenEncoder() = default;
  TokenEncoder(std::size_t dim, std::mt19937_64& rng, bool trainable = true);

  Tensor forward(const Tensor& tokens) const;  // N x d -> N x d
  void collect_params(const std::string& prefix, ParamMap& out) const;
  void adopt_params(const std::string& prefix, const ParamMap& in);

 private:
  Tensor w1_, b1_, w2_, b2_;
};

// phi2: flattened refined state -> per-class embeddings (N_c x d2);
// phi3: shared d2 -> N_s logits per class.
class StateDecoder {
 public:
  StateDecoder() = default;
  StateDecoder(std::size_t in_features, std::size_t n_classes, std::size_t class_dim,
               std::mt19937_64& rng);

  Tensor embeddings(const Tensor& refined) const;   // -> N_c x d2
  Tensor logits(const Tensor& embeddings) const;    // -> N_c x N_s
  void collect_params(const std::string& prefix, ParamMap& out) const;
  void adopt_params(const std::string& prefix, const ParamMap& in);

 private:
  std::size_t n_classes_ = 0, class_dim_ = 0;
  Tensor w2_, b2_, w3_, b3_;
};

// Shared encode -> attention marginals -> centroid seeds -> Sinkhorn -> state
// vector pipeline.
struct ClipState {
  Tensor encoded;  // N x d
  Tensor z;        // K x d
  std::vector<std::size_t> hard;
  Tensor m_r;
};

struct TeacherOutputs {
  Tensor logits;      // N_c x N_s
  Tensor embeddings;  // N_c x d2
  ClipState current, future;
  Tensor refined_avg;
  Tensor pooled_future;  // length d, target for L_FUTR
};

class TeacherModel {
 public:
  TeacherModel() = default;
  TeacherModel(const ModelConfig& cfg, std::uint64_t seed);

  TeacherOutputs forward(const TokenBatch& clip_current,
                         const TokenBatch& clip_future) const;
  ClipState encode_clip(const TokenBatch& clip) const;

  const ModelConfig& config() const { return cfg_; }
  ParamMap params() const;
  void adopt_params(const ParamMap& in);

 private:
  ModelConfig cfg_;
  TokenEncoder encoder_;
  StateGraphModule graph_;
  StateDecoder decoder_;
};

struct StudentOutputs {
  Tensor logits;
  Tensor embeddings;
  ClipState current;
  Tensor q_hat;                   // K x K predicted transitions
  Tensor predicted_future_state;  // K x d
  Tensor pooled_future_pred;      // length d
};

class StudentModel {
 public:
  StudentModel() = default;
  StudentModel(const ModelConfig& cfg, std::uint64_t seed);

  StudentOutputs forward(const TokenBatch& clip_current) const;

  const ModelConfig& config() const { return cfg_; }
  ParamMap params() const;
  void adopt_params(const ParamMap& in);

 private:
  ModelConfig cfg_;
  TokenEncoder encoder_;
  StateGraphModule graph_;
  StateDecoder decoder_;
  ActDynModule actdyn_;
  Tensor fp_w1_, fp_b1_, fp_w2_, fp_b2_;  // pooled future-feature predictor
};

struct LiteOutputs {
  Tensor logits;
  Tensor predicted_future;  // length d
  Tensor target_future;     // length d, from the EMA encoder (no grad)
};

// Main encoder + EMA target encoder + single-layer GRU rollout + state-change
// head on [F_t, F_hat].
class LiteModel {
 public:
  LiteModel() = default;
  LiteModel(const ModelConfig& cfg, std::uint64_t seed, double ema_momentum = 0.004);

  LiteOutputs forward(const TokenBatch& clip_current,
                      const TokenBatch& clip_future) const;
  void update_target_encoder();  // EMA step after each optimizer step

  const ModelConfig& config() const { return cfg_; }
  ParamMap params() const;  // trainable only; EMA params excluded
  ParamMap target_params() const;
  void adopt_params(const ParamMap& in);

 private:
  ModelConfig cfg_;
  double momentum_ = 0.004;
  TokenEncoder encoder_;
  TokenEncoder target_encoder_;  // not gradient-updated
  // GRU cell (update/reset/candidate gates).
  Tensor wz_, uz_, bz_, wr_, ur_, br_, wh_, uh_, bh_;
  Tensor head_w_, head_b_;  // 2d -> N_c * N_s
};

// ---- losses ----

// Per-class softmax cross-entropy over the four states, averaged over
// classes; optional per-state weights (normalized by their sum over classes).
Tensor loss_state_change(const Tensor& logits, const std::vector<StateChange>& targets,
                         const std::vector<double>* state_weights = nullptr);

// Sum of debiased entropic EMD between matching rows.
Tensor loss_ctr(const Tensor& q_hat, const Tensor& q_target, const Tensor& ground_cost,
                double blur, int iterations);

Tensor loss_smooth_l1_mean(const Tensor& pred, const Tensor& target, double threshold);
Tensor loss_distill_se(const Tensor& student_emb, const Tensor& teacher_emb);
Tensor loss_distill_sc(const Tensor& student_logits, const Tensor& teacher_logits,
                       double tau2);

struct LossComponents {
  Tensor sc, ctr, fctr, se, sc_distill, futr;
};

Tensor total_loss(const LossComponents& c, const LossWeights& w);

// Pairwise squared distances between rows, rescaled to unit mean; ground cost
// for the transition EMD loss. Falls back to unit off-diagonal cost when the
// rows coincide.
Tensor transition_ground_cost(const Tensor& z_future);

// Mean over token rows -> length-d vector.
Tensor pool_tokens(const Tensor& tokens);

}  // namespace surgfutr
