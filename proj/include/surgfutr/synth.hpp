#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "surgfutr/labels.hpp"

namespace surgfutr {

// Token features plus row-stochastic attention for one clip window; the
// synthetic stand-in for a video backbone's output.
struct TokenBatch {
  std::size_t n_tokens = 0;
  std::size_t dim = 0;
  std::vector<double> tokens;     // n_tokens x dim, row-major
  std::vector<double> attention;  // n_tokens x n_tokens, rows sum to 1

  double token(std::size_t i, std::size_t j) const { return tokens[i * dim + j]; }
  double attn(std::size_t i, std::size_t j) const { return attention[i * n_tokens + j]; }
};

struct DurationSpec {
  std::size_t mean_frames = 40;
  std::size_t jitter_frames = 10;  // uniform in [mean - jitter, mean + jitter]
};

struct WorkflowConfig {
  std::size_t phases = 4;
  std::size_t steps_per_phase = 3;
  std::size_t verbs = 10;
  DurationSpec step_duration;
  // allowed_next[p] lists phases reachable from p; empty list marks terminal.
  std::vector<std::vector<std::size_t>> allowed_next;
  // cooccurrence[v] is the probability verb v is active within a step that
  // lists it. Defaults to 0.9 for every verb when empty.
  std::vector<double> cooccurrence;
  double fps = 1.0;
  std::uint64_t seed = 0;

  // Rendering.
  std::size_t tokens_per_clip = 196;
  std::size_t feature_dim = 384;
  double noise_sigma = 0.25;
  double saliency_factor = 4.0;

  static WorkflowConfig defaults();
  void validate() const;
};

struct ProcedureBundle {
  WorkflowConfig cfg;
  LabelMatrix labels;                      // verbs only; the supervision source
  std::vector<std::size_t> phase_of_frame;
  std::vector<std::size_t> step_of_frame;  // global step id = phase*steps+step
  std::vector<double> prototypes;          // (verbs + 1) x feature_dim; last row is background
  std::uint64_t render_seed = 0;

  const double* prototype(std::size_t cls) const {
    return prototypes.data() + cls * cfg.feature_dim;
  }
  const double* background_prototype() const { return prototype(cfg.verbs); }
};

// Markov walk over the phase transition graph; each phase plays its steps in
// order with jittered durations; verbs toggle per step according to a fixed
// step->verb assignment and the co-occurrence rates. Deterministic given the
// config seed.
ProcedureBundle generate_workflow(const WorkflowConfig& cfg);

// Token features for one frame window. Each verb class owns a fixed
// contiguous token region; active regions render as prototype + noise,
// inactive ones as background + noise. Attention rows put saliency_factor
// more mass on active-region tokens, then normalize.
TokenBatch render_clip(const ProcedureBundle& bundle, const FrameWindow& window);

// Mean feature of the token region owned by class `cls`.
std::vector<double> region_mean(const TokenBatch& batch, std::size_t cls,
                                std::size_t n_classes);

// Token region [begin, end) owned by a class.
std::pair<std::size_t, std::size_t> class_region(std::size_t cls, std::size_t n_classes,
                                                 std::size_t n_tokens);

// Binary feature shard: one record per clip (window, n, d, tokens, attention).
void save_feature_shard(const std::string& path,
                        const std::vector<std::pair<FrameWindow, TokenBatch>>& clips);
std::vector<std::pair<FrameWindow, TokenBatch>> load_feature_shard(
    const std::string& path);

}  // namespace surgfutr
