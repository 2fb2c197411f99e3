#include "surgfutr/models.hpp"

#include <cmath>

namespace surgfutr {

namespace {

// Copies values from `in` into the live parameter handles in `own`, keeping
// graph wiring and grad flags intact.
void adopt_into(const ParamMap& own, const ParamMap& in) {
  if (own.size() != in.size()) throw TensorError("parameter count mismatch");
  for (const auto& [name, t] : own) {
    const auto it = in.find(name);
    if (it == in.end()) throw TensorError("missing parameter " + name);
    if (it->second.shape() != t.shape()) {
      throw TensorError("shape mismatch for parameter " + name);
    }
    const_cast<Tensor&>(t).data_mut() = it->second.data();
  }
}

Tensor linear_init(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                   bool requires_grad) {
  return Tensor::randn({rows, cols}, rng, 1.0 / std::sqrt(static_cast<double>(rows)),
                       requires_grad);
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  return matmul(x, w) + row_broadcast(b, x.rows());
}

Tensor tokens_tensor(const TokenBatch& clip) {
  return Tensor::from_data({clip.n_tokens, clip.dim}, clip.tokens);
}

Tensor row_of(const Tensor& m, std::size_t i) {
  return reshape(gather_rows(m, {i}), {m.cols()});
}

}  // namespace

// ---- TokenEncoder ----

TokenEncoder::TokenEncoder(std::size_t dim, std::mt19937_64& rng, bool trainable) {
  w1_ = linear_init(dim, dim, rng, trainable);
  b1_ = Tensor::zeros({dim}, trainable);
  w2_ = linear_init(dim, dim, rng, trainable);
  b2_ = Tensor::zeros({dim}, trainable);
}

Tensor TokenEncoder::forward(const Tensor& tokens) const {
  // Residual two-layer MLP: a freshly initialized encoder stays close to the
  // identity, which keeps the clustering stage stable early in training.
  const Tensor h = relu(linear(tokens, w1_, b1_));
  return tokens + linear(h, w2_, b2_);
}

void TokenEncoder::collect_params(const std::string& prefix, ParamMap& out) const {
  out.emplace(prefix + "w1", w1_);
  out.emplace(prefix + "b1", b1_);
  out.emplace(prefix + "w2", w2_);
  out.emplace(prefix + "b2", b2_);
}

void TokenEncoder::adopt_params(const std::string& prefix, const ParamMap& in) {
  ParamMap own;
  collect_params(prefix, own);
  ParamMap filtered;
  for (const auto& [name, t] : in) {
    if (name.rfind(prefix, 0) == 0) filtered.emplace(name, t);
  }
  adopt_into(own, filtered);
}

// ---- StateDecoder ----

StateDecoder::StateDecoder(std::size_t in_features, std::size_t n_classes,
                           std::size_t class_dim, std::mt19937_64& rng)
    : n_classes_(n_classes), class_dim_(class_dim) {
  w2_ = linear_init(in_features, n_classes * class_dim, rng, true);
  b2_ = Tensor::zeros({n_classes * class_dim}, true);
  w3_ = linear_init(class_dim, static_cast<std::size_t>(kNumStates), rng, true);
  b3_ = Tensor::zeros({static_cast<std::size_t>(kNumStates)}, true);
}

Tensor StateDecoder::embeddings(const Tensor& refined) const {
  const Tensor flat = reshape(refined, {1, refined.size()});
  return reshape(linear(flat, w2_, b2_), {n_classes_, class_dim_});
}

Tensor StateDecoder::logits(const Tensor& embeddings) const {
  return linear(embeddings, w3_, b3_);
}

void StateDecoder::collect_params(const std::string& prefix, ParamMap& out) const {
  out.emplace(prefix + "w2", w2_);
  out.emplace(prefix + "b2", b2_);
  out.emplace(prefix + "w3", w3_);
  out.emplace(prefix + "b3", b3_);
}

void StateDecoder::adopt_params(const std::string& prefix, const ParamMap& in) {
  ParamMap own;
  collect_params(prefix, own);
  ParamMap filtered;
  for (const auto& [name, t] : in) {
    if (name.rfind(prefix, 0) == 0) filtered.emplace(name, t);
  }
  adopt_into(own, filtered);
}

// ---- shared clip pipeline ----

namespace {

ClipState encode_clip_impl(const ModelConfig& cfg, const TokenEncoder& encoder,
                           const TokenBatch& clip) {
  if (clip.n_tokens != cfg.n_tokens || clip.dim != cfg.feat_dim) {
    throw TensorError("clip shape does not match model configuration");
  }
  ClipState out;
  out.encoded = encoder.forward(tokens_tensor(clip));
  out.m_r = attention_marginals(clip, cfg.marginal_temperature);
  const auto idx = select_centroid_indices(out.m_r, cfg.clusters);
  const Tensor seeds = gather_rows(out.encoded, idx);
  Marginals marginals;
  marginals.m_r = out.m_r;
  marginals.m_c = uniform_distribution(cfg.clusters);
  marginals.temperature = cfg.marginal_temperature;
  const Assignment a = sinkhorn_cluster(out.encoded, seeds, marginals,
                                        cfg.sinkhorn_lambda, cfg.sinkhorn_iterations);
  out.z = aggregate_state(out.encoded, a);
  out.hard = a.hard;
  return out;
}

}  // namespace

// ---- TeacherModel ----

TeacherModel::TeacherModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  std::mt19937_64 rng(seed);
  encoder_ = TokenEncoder(cfg.feat_dim, rng);
  graph_ = StateGraphModule(cfg.graph_config(), rng);
  decoder_ = StateDecoder(cfg.clusters * cfg.hidden, cfg.n_classes, cfg.class_dim, rng);
}

ClipState TeacherModel::encode_clip(const TokenBatch& clip) const {
  return encode_clip_impl(cfg_, encoder_, clip);
}

TeacherOutputs TeacherModel::forward(const TokenBatch& clip_current,
                                     const TokenBatch& clip_future) const {
  TeacherOutputs out;
  out.current = encode_clip(clip_current);
  out.future = encode_clip(clip_future);
  const Tensor refined_cur = graph_.forward(out.current.z);
  const Tensor refined_fut = graph_.forward(out.future.z);
  out.refined_avg = (refined_cur + refined_fut) * 0.5;
  out.embeddings = decoder_.embeddings(out.refined_avg);
  out.logits = decoder_.logits(out.embeddings);
  out.pooled_future = pool_tokens(out.future.encoded);
  return out;
}

ParamMap TeacherModel::params() const {
  ParamMap out;
  encoder_.collect_params("encoder.", out);
  graph_.collect_params("graph.", out);
  decoder_.collect_params("decoder.", out);
  return out;
}

void TeacherModel::adopt_params(const ParamMap& in) { adopt_into(params(), in); }

// ---- StudentModel ----

StudentModel::StudentModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  std::mt19937_64 rng(seed);
  encoder_ = TokenEncoder(cfg.feat_dim, rng);
  graph_ = StateGraphModule(cfg.graph_config(), rng);
  decoder_ = StateDecoder(cfg.clusters * cfg.hidden, cfg.n_classes, cfg.class_dim, rng);
  actdyn_ = ActDynModule(cfg.actdyn, cfg.feat_dim, cfg.hidden, rng);
  fp_w1_ = linear_init(cfg.feat_dim, cfg.feat_dim, rng, true);
  fp_b1_ = Tensor::zeros({cfg.feat_dim}, true);
  fp_w2_ = linear_init(cfg.feat_dim, cfg.feat_dim, rng, true);
  fp_b2_ = Tensor::zeros({cfg.feat_dim}, true);
}

StudentOutputs StudentModel::forward(const TokenBatch& clip_current) const {
  StudentOutputs out;
  out.current = encode_clip_impl(cfg_, encoder_, clip_current);
  out.q_hat = actdyn_.predict_transitions(out.current.z);
  out.predicted_future_state =
      propagate_centroids(out.current.z, out.q_hat, cfg_.actdyn.alpha);
  const Tensor averaged = (out.current.z + out.predicted_future_state) * 0.5;
  const Tensor refined = graph_.forward(averaged);
  out.embeddings = decoder_.embeddings(refined);
  out.logits = decoder_.logits(out.embeddings);
  const Tensor pooled = reshape(pool_tokens(out.current.encoded), {1, cfg_.feat_dim});
  const Tensor h = relu(linear(pooled, fp_w1_, fp_b1_));
  out.pooled_future_pred = reshape(linear(h, fp_w2_, fp_b2_), {cfg_.feat_dim});
  return out;
}

ParamMap StudentModel::params() const {
  ParamMap out;
  encoder_.collect_params("encoder.", out);
  graph_.collect_params("graph.", out);
  decoder_.collect_params("decoder.", out);
  actdyn_.collect_params("actdyn.", out);
  out.emplace("fp.w1", fp_w1_);
  out.emplace("fp.b1", fp_b1_);
  out.emplace("fp.w2", fp_w2_);
  out.emplace("fp.b2", fp_b2_);
  return out;
}

void StudentModel::adopt_params(const ParamMap& in) { adopt_into(params(), in); }

// ---- LiteModel ----

LiteModel::LiteModel(const ModelConfig& cfg, std::uint64_t seed, double ema_momentum)
    : cfg_(cfg), momentum_(ema_momentum) {
  std::mt19937_64 rng(seed);
  const std::size_t d = cfg.feat_dim;
  encoder_ = TokenEncoder(d, rng);
  target_encoder_ = TokenEncoder(d, rng, /*trainable=*/false);
  // The target starts as an exact copy of the main encoder.
  ParamMap main_params;
  encoder_.collect_params("encoder.", main_params);
  target_encoder_.adopt_params("encoder.", main_params);
  wz_ = linear_init(d, d, rng, true);
  uz_ = linear_init(d, d, rng, true);
  bz_ = Tensor::zeros({d}, true);
  wr_ = linear_init(d, d, rng, true);
  ur_ = linear_init(d, d, rng, true);
  br_ = Tensor::zeros({d}, true);
  wh_ = linear_init(d, d, rng, true);
  uh_ = linear_init(d, d, rng, true);
  bh_ = Tensor::zeros({d}, true);
  head_w_ = linear_init(2 * d, cfg.n_classes * static_cast<std::size_t>(kNumStates),
                        rng, true);
  head_b_ = Tensor::zeros({cfg.n_classes * static_cast<std::size_t>(kNumStates)}, true);
}

LiteOutputs LiteModel::forward(const TokenBatch& clip_current,
                               const TokenBatch& clip_future) const {
  const std::size_t d = cfg_.feat_dim;
  LiteOutputs out;
  const Tensor f_t =
      reshape(pool_tokens(encoder_.forward(tokens_tensor(clip_current))), {1, d});
  out.target_future =
      pool_tokens(target_encoder_.forward(tokens_tensor(clip_future)));

  // Single-layer GRU rolled forward with the pooled current feature as input
  // at every step.
  Tensor h = Tensor::zeros({1, d});
  for (std::size_t s = 0; s < cfg_.lite_rollout_steps; ++s) {
    const Tensor z = sigmoid(linear(f_t, wz_, bz_) + matmul(h, uz_));
    const Tensor r = sigmoid(linear(f_t, wr_, br_) + matmul(h, ur_));
    const Tensor cand = tanh_t(linear(f_t, wh_, bh_) + matmul(r * h, uh_));
    h = (Tensor::full({1, d}, 1.0) - z) * h + z * cand;
  }
  out.predicted_future = reshape(h, {d});

  const Tensor joint = concat({f_t, h}, 1);
  out.logits = reshape(linear(joint, head_w_, head_b_),
                       {cfg_.n_classes, static_cast<std::size_t>(kNumStates)});
  return out;
}

void LiteModel::update_target_encoder() {
  ParamMap main_params, target;
  encoder_.collect_params("encoder.", main_params);
  target_encoder_.collect_params("encoder.", target);
  ema_update(target, main_params, momentum_);
}

ParamMap LiteModel::params() const {
  ParamMap out;
  encoder_.collect_params("encoder.", out);
  out.emplace("gru.wz", wz_);
  out.emplace("gru.uz", uz_);
  out.emplace("gru.bz", bz_);
  out.emplace("gru.wr", wr_);
  out.emplace("gru.ur", ur_);
  out.emplace("gru.br", br_);
  out.emplace("gru.wh", wh_);
  out.emplace("gru.uh", uh_);
  out.emplace("gru.bh", bh_);
  out.emplace("head.w", head_w_);
  out.emplace("head.b", head_b_);
  return out;
}

ParamMap LiteModel::target_params() const {
  ParamMap out;
  target_encoder_.collect_params("target_encoder.", out);
  return out;
}

void LiteModel::adopt_params(const ParamMap& in) { adopt_into(params(), in); }

// ---- losses ----

Tensor loss_state_change(const Tensor& logits, const std::vector<StateChange>& targets,
                         const std::vector<double>* state_weights) {
  const std::size_t n_classes = logits.rows();
  const std::size_t n_states = logits.cols();
  if (targets.size() != n_classes) {
    throw TensorError("loss_state_change target count mismatch");
  }
  if (state_weights && state_weights->size() != n_states) {
    throw TensorError("loss_state_change weight count mismatch");
  }
  const Tensor log_probs = logits - col_broadcast(logsumexp(logits, 1), n_states);
  std::vector<double> pick(n_classes * n_states, 0.0);
  double weight_total = 0.0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    const std::size_t t = static_cast<std::size_t>(targets[c]);
    if (t >= n_states) throw TensorError("loss_state_change target out of range");
    const double w = state_weights ? (*state_weights)[t] : 1.0;
    pick[c * n_states + t] = w;
    weight_total += w;
  }
  if (weight_total <= 0.0) throw TensorError("loss_state_change degenerate weights");
  const Tensor mask = Tensor::from_data({n_classes, n_states}, std::move(pick));
  return -sum(mask * log_probs) * (1.0 / weight_total);
}

Tensor loss_ctr(const Tensor& q_hat, const Tensor& q_target, const Tensor& ground_cost,
                double blur, int iterations) {
  const std::size_t k = q_hat.rows();
  if (q_target.shape() != q_hat.shape()) throw TensorError("loss_ctr shape mismatch");
  Tensor total = Tensor::scalar(0.0);
  for (std::size_t i = 0; i < k; ++i) {
    total = total + entropic_emd(row_of(q_hat, i), row_of(q_target, i), ground_cost,
                                 blur, iterations);
  }
  return total * (1.0 / static_cast<double>(k));
}

Tensor loss_smooth_l1_mean(const Tensor& pred, const Tensor& target, double threshold) {
  return mean(smooth_l1(pred, target, threshold));
}

Tensor loss_distill_se(const Tensor& student_emb, const Tensor& teacher_emb) {
  return mean(abs(student_emb - teacher_emb));
}

Tensor loss_distill_sc(const Tensor& student_logits, const Tensor& teacher_logits,
                       double tau2) {
  if (tau2 <= 0.0) throw TensorError("tau2 must be positive");
  const double inv = 1.0 / tau2;
  return mean(abs(softmax(student_logits * inv, 1) - softmax(teacher_logits * inv, 1)));
}

Tensor total_loss(const LossComponents& c, const LossWeights& w) {
  Tensor total = Tensor::scalar(0.0);
  if (c.sc.defined()) total = total + w.lambda1 * c.sc;
  if (c.ctr.defined()) total = total + w.lambda2 * c.ctr;
  if (c.fctr.defined()) total = total + w.lambda3 * c.fctr;
  if (c.se.defined()) total = total + w.lambda4 * c.se;
  if (c.sc_distill.defined()) total = total + w.lambda5 * c.sc_distill;
  if (c.futr.defined()) total = total + w.lambda6 * c.futr;
  return total;
}

Tensor transition_ground_cost(const Tensor& z_future) {
  const std::size_t k = z_future.rows();
  const std::size_t d = z_future.cols();
  std::vector<double> cost(k * k, 0.0);
  double off_diag_total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      double sq = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = z_future.at(i, c) - z_future.at(j, c);
        sq += diff * diff;
      }
      cost[i * k + j] = sq;
      if (i != j) off_diag_total += sq;
    }
  }
  const double denom = static_cast<double>(k * k);
  const double mean_cost = (off_diag_total + 0.0) / denom;
  if (mean_cost <= 1e-12) {
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) cost[i * k + j] = (i == j) ? 0.0 : 1.0;
    }
  } else {
    for (double& c : cost) c /= mean_cost;
  }
  return Tensor::from_data({k, k}, std::move(cost));
}

Tensor pool_tokens(const Tensor& tokens) { return mean(tokens, 0); }

}  // namespace surgfutr
