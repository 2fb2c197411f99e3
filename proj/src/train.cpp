#include "surgfutr/train.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "surgfutr/checkpoint.hpp"
#include "surgfutr/metrics.hpp"

namespace surgfutr {

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a + 0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

Tensor detach(const Tensor& t) { return Tensor::from_data(t.shape(), t.data()); }

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(epoch) + 1));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

const std::vector<double>* maybe_weights(const TrainConfig& cfg,
                                         const std::vector<double>& weights) {
  return cfg.use_state_weights ? &weights : nullptr;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw TensorError("epochs must be non-negative");
  if (batch_teacher == 0 || batch_distill == 0) throw TensorError("batch must be positive");
  if (base_lr <= 0.0 || min_lr <= 0.0) throw TensorError("learning rates must be positive");
  if (epochs > 0 && warmup_epochs >= epochs) {
    throw TensorError("warmup must be shorter than the run");
  }
}

OptimizerConfig TrainConfig::optimizer_config() const {
  OptimizerConfig out;
  out.schedule.base_lr = base_lr;
  out.schedule.warmup_epochs = warmup_epochs;
  out.schedule.total_epochs = epochs;
  out.schedule.min_lr = min_lr;
  out.weight_decay = weight_decay;
  out.clip_norm = clip_norm;
  return out;
}

Dataset build_dataset(const std::vector<ProcedureBundle>& bundles,
                      const SamplerConfig& sampler) {
  Dataset out;
  for (const auto& bundle : bundles) {
    out.n_classes = bundle.labels.classes;
    for (const ClipPair& pair : generate_clip_pairs(bundle.labels, sampler)) {
      DatasetEntry e;
      e.pair = pair;
      e.current = render_clip(bundle, pair.current);
      e.future = render_clip(bundle, pair.future);
      out.entries.push_back(std::move(e));
    }
  }
  return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& data) {
  Dataset train, held;
  train.n_classes = held.n_classes = data.n_classes;
  for (std::size_t i = 0; i < data.entries.size(); ++i) {
    (i % 5 == 4 ? held : train).entries.push_back(data.entries[i]);
  }
  return {train, held};
}

std::vector<double> inverse_frequency_weights(const Dataset& data) {
  std::vector<double> counts(kNumStates, 0.0);
  double total = 0.0;
  for (const auto& e : data.entries) {
    for (StateChange s : e.pair.targets) {
      counts[static_cast<std::size_t>(s)] += 1.0;
      total += 1.0;
    }
  }
  std::vector<double> weights(kNumStates, 0.0);
  for (int s = 0; s < kNumStates; ++s) {
    if (counts[s] > 0.0) weights[s] = total / (kNumStates * counts[s]);
  }
  return weights;
}

TrainResult train_teacher(TeacherModel& model, const Dataset& data,
                          const TrainConfig& cfg, int start_epoch, AdamW* optimizer,
                          int end_epoch) {
  cfg.validate();
  if (end_epoch < 0) end_epoch = cfg.epochs;
  if (data.entries.empty()) throw TensorError("empty training dataset");
  TrainResult result;
  AdamW local(cfg.optimizer_config());
  AdamW& opt = optimizer ? *optimizer : local;
  ParamMap params = model.params();
  const std::vector<double> weights = inverse_frequency_weights(data);
  for (int epoch = start_epoch; epoch < end_epoch; ++epoch) {
    const auto order = epoch_order(data.entries.size(), cfg.seed, epoch);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_teacher) {
      const std::size_t n = std::min(cfg.batch_teacher, order.size() - b);
      Tensor batch_loss = Tensor::scalar(0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const DatasetEntry& e = data.entries[order[b + i]];
        const TeacherOutputs out = model.forward(e.current, e.future);
        batch_loss = batch_loss + loss_state_change(out.logits, e.pair.targets,
                                                    maybe_weights(cfg, weights));
      }
      batch_loss = batch_loss * (1.0 / static_cast<double>(n));
      epoch_loss += batch_loss.item();
      ++batches;
      backward(batch_loss);
      opt.step(params, epoch);
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(batches));
  }
  return result;
}

namespace {

// Frozen-teacher supervision for one clip pair, computed once up front.
struct TeacherTargets {
  Tensor q_target;       // K x K (Alg. 1)
  Tensor ground_cost;    // K x K
  Tensor z_future;       // K x d
  Tensor embeddings;     // N_c x d2
  Tensor logits;         // N_c x N_s
  Tensor pooled_future;  // d
};

TeacherTargets make_teacher_targets(const TeacherModel& teacher, const DatasetEntry& e) {
  const ModelConfig& mc = teacher.config();
  const TeacherOutputs out = teacher.forward(e.current, e.future);
  TeacherTargets t;
  t.z_future = detach(out.future.z);
  t.embeddings = detach(out.embeddings);
  t.logits = detach(out.logits);
  t.pooled_future = detach(out.pooled_future);
  t.ground_cost = transition_ground_cost(t.z_future);
  const std::vector<double> affinity =
      patch_affinity(out.current.encoded.data(), out.future.encoded.data(),
                     mc.n_tokens, mc.feat_dim);
  t.q_target = Tensor::from_data(
      {mc.clusters, mc.clusters},
      build_transition_matrix(out.current.hard, out.future.hard, affinity,
                              mc.n_tokens, mc.clusters, mc.actdyn.top_k));
  return t;
}

}  // namespace

TrainResult distill_student(StudentModel& student, const TeacherModel& teacher,
                            const Dataset& data, const TrainConfig& cfg,
                            const LossWeights& w, int start_epoch, AdamW* optimizer,
                            int end_epoch) {
  cfg.validate();
  if (end_epoch < 0) end_epoch = cfg.epochs;
  if (data.entries.empty()) throw TensorError("empty training dataset");
  const ModelConfig& mc = student.config();

  std::vector<TeacherTargets> targets;
  targets.reserve(data.entries.size());
  for (const auto& e : data.entries) targets.push_back(make_teacher_targets(teacher, e));

  TrainResult result;
  AdamW local(cfg.optimizer_config());
  AdamW& opt = optimizer ? *optimizer : local;
  ParamMap params = student.params();
  const std::vector<double> weights = inverse_frequency_weights(data);
  for (int epoch = start_epoch; epoch < end_epoch; ++epoch) {
    const auto order = epoch_order(data.entries.size(), cfg.seed, epoch);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_distill) {
      const std::size_t n = std::min(cfg.batch_distill, order.size() - b);
      Tensor batch_loss = Tensor::scalar(0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t idx = order[b + i];
        const DatasetEntry& e = data.entries[idx];
        const TeacherTargets& t = targets[idx];
        const StudentOutputs out = student.forward(e.current);
        LossComponents c;
        if (w.lambda1 != 0.0) {
          c.sc = loss_state_change(out.logits, e.pair.targets, maybe_weights(cfg, weights));
        }
        if (w.lambda2 != 0.0) {
          c.ctr = loss_ctr(out.q_hat, t.q_target, t.ground_cost, mc.emd_blur,
                           mc.emd_iterations);
        }
        if (w.lambda3 != 0.0) {
          c.fctr = loss_smooth_l1_mean(out.predicted_future_state, t.z_future,
                                       mc.smooth_l1_threshold);
        }
        if (w.lambda4 != 0.0) c.se = loss_distill_se(out.embeddings, t.embeddings);
        if (w.lambda5 != 0.0) c.sc_distill = loss_distill_sc(out.logits, t.logits, w.tau2);
        if (w.lambda6 != 0.0) {
          c.futr = loss_smooth_l1_mean(out.pooled_future_pred, t.pooled_future,
                                       mc.smooth_l1_threshold);
        }
        batch_loss = batch_loss + total_loss(c, w);
        if (epoch + 1 == end_epoch && b + cfg.batch_distill >= order.size() && i == 0) {
          result.last_batch_components.push_back(c);
        }
      }
      batch_loss = batch_loss * (1.0 / static_cast<double>(n));
      epoch_loss += batch_loss.item();
      ++batches;
      backward(batch_loss);
      opt.step(params, epoch);
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(batches));
  }
  return result;
}

TrainResult train_lite(LiteModel& model, const Dataset& data, const TrainConfig& cfg,
                       double futr_weight, int start_epoch, AdamW* optimizer,
                       int end_epoch) {
  cfg.validate();
  if (end_epoch < 0) end_epoch = cfg.epochs;
  if (data.entries.empty()) throw TensorError("empty training dataset");
  TrainResult result;
  AdamW local(cfg.optimizer_config());
  AdamW& opt = optimizer ? *optimizer : local;
  ParamMap params = model.params();
  const std::vector<double> weights = inverse_frequency_weights(data);
  const double thr = model.config().smooth_l1_threshold;
  for (int epoch = start_epoch; epoch < end_epoch; ++epoch) {
    const auto order = epoch_order(data.entries.size(), cfg.seed, epoch);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_teacher) {
      const std::size_t n = std::min(cfg.batch_teacher, order.size() - b);
      Tensor batch_loss = Tensor::scalar(0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const DatasetEntry& e = data.entries[order[b + i]];
        const LiteOutputs out = model.forward(e.current, e.future);
        const Tensor sc = loss_state_change(out.logits, e.pair.targets,
                                            maybe_weights(cfg, weights));
        const Tensor futr =
            loss_smooth_l1_mean(out.predicted_future, detach(out.target_future), thr);
        batch_loss = batch_loss + sc + futr_weight * futr;
      }
      batch_loss = batch_loss * (1.0 / static_cast<double>(n));
      epoch_loss += batch_loss.item();
      ++batches;
      backward(batch_loss);
      opt.step(params, epoch);
      model.update_target_encoder();
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(batches));
  }
  return result;
}

// ---- evaluation ----

std::string MetricReport::to_json() const {
  nlohmann::json j;
  j["task"] = task;
  j["variant"] = variant;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["metrics"] = metrics;
  return j.dump(2);
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kTeacher: return "teacher";
    case Variant::kStudent: return "student";
    case Variant::kLite: return "lite";
  }
  return "?";
}

MetricReport evaluate_state_change(const TeacherModel* teacher,
                                   const StudentModel* student, const LiteModel* lite,
                                   Variant variant, const Dataset& data) {
  std::vector<std::vector<double>> scores(kNumStates);
  std::vector<std::vector<int>> labels(kNumStates);
  std::vector<int> predicted, truth;
  for (const auto& e : data.entries) {
    Tensor logits;
    switch (variant) {
      case Variant::kTeacher:
        if (!teacher) throw TensorError("teacher model missing");
        logits = teacher->forward(e.current, e.future).logits;
        break;
      case Variant::kStudent:
        if (!student) throw TensorError("student model missing");
        logits = student->forward(e.current).logits;
        break;
      case Variant::kLite:
        if (!lite) throw TensorError("lite model missing");
        logits = lite->forward(e.current, e.future).logits;
        break;
    }
    const Tensor probs = softmax(logits, 1);
    for (std::size_t c = 0; c < e.pair.targets.size(); ++c) {
      const int target = static_cast<int>(e.pair.targets[c]);
      int argmax = 0;
      for (int s = 1; s < kNumStates; ++s) {
        if (probs.at(c, s) > probs.at(c, argmax)) argmax = s;
      }
      predicted.push_back(argmax);
      truth.push_back(target);
      for (int s = 0; s < kNumStates; ++s) {
        scores[s].push_back(probs.at(c, s));
        labels[s].push_back(target == s ? 1 : 0);
      }
    }
  }
  MetricReport report;
  report.task = "state_change";
  report.variant = variant_name(variant);
  double mean_ap = 0.0, mean_f1 = 0.0;
  for (int s = 0; s < kNumStates; ++s) {
    const std::string name = state_change_name(static_cast<StateChange>(s));
    const double ap = average_precision(scores[s], labels[s]);
    const double f1 = f1_for_state(predicted, truth, s);
    report.metrics["map_" + name] = ap;
    report.metrics["f1_" + name] = f1;
    if (s != static_cast<int>(StateChange::kBackground)) {
      mean_ap += ap / (kNumStates - 1);
      mean_f1 += f1 / (kNumStates - 1);
    }
  }
  report.metrics["mean_map"] = mean_ap;
  report.metrics["mean_f1"] = mean_f1;
  report.metrics["accuracy"] = accuracy(predicted, truth);
  return report;
}

double chance_mean_ap(const Dataset& data) {
  std::vector<double> counts(kNumStates, 0.0);
  double total = 0.0;
  for (const auto& e : data.entries) {
    for (StateChange s : e.pair.targets) {
      counts[static_cast<std::size_t>(s)] += 1.0;
      total += 1.0;
    }
  }
  double mean = 0.0;
  for (int s = 0; s < kNumStates; ++s) {
    if (s == static_cast<int>(StateChange::kBackground)) continue;
    mean += (total > 0.0 ? counts[s] / total : 0.0) / (kNumStates - 1);
  }
  return mean;
}

// ---- downstream tasks ----

void TaskSpec::validate() const {
  if (rsd_cap <= 0.0) throw TensorError("rsd cap must be positive");
  if (transition_minutes <= 0.0) throw TensorError("transition horizon must be positive");
  if (kind == TaskKind::kAnticipation && anticipation_offsets_s.empty()) {
    throw TensorError("anticipation needs at least one offset");
  }
  if (frames_per_minute <= 0.0) throw TensorError("frames_per_minute must be positive");
}

TaskKind task_kind_from_name(const std::string& name) {
  if (name == "rsd") return TaskKind::kRsd;
  if (name == "transition") return TaskKind::kTransition;
  if (name == "anticipation") return TaskKind::kAnticipation;
  throw TensorError("unknown task '" + name + "' (valid: rsd, transition, anticipation)");
}

const char* task_kind_name(TaskKind k) {
  switch (k) {
    case TaskKind::kRsd: return "rsd";
    case TaskKind::kTransition: return "transition";
    case TaskKind::kAnticipation: return "anticipation";
  }
  return "?";
}

TaskDataset build_task_labels(const ProcedureBundle& bundle, const TaskSpec& spec,
                              const SamplerConfig& sampler) {
  spec.validate();
  TaskDataset out;
  out.spec = spec;
  out.n_classes = bundle.labels.classes;
  const std::size_t frames = bundle.labels.frames;
  const std::size_t d = sampler.clip_duration;
  const auto window_at = [&](std::size_t t) { return FrameWindow{t - d - 1, t - 1}; };
  const auto anchor_ok = [&](std::size_t t) { return t >= d + 1 && t < frames; };

  if (spec.kind == TaskKind::kRsd) {
    for (std::size_t t = d + 1; t < frames; t += sampler.stride_present) {
      TaskSample s;
      s.clip = render_clip(bundle, window_at(t));
      s.regression_target = spec.rsd_cap *
                            static_cast<double>(frames - 1 - t) /
                            static_cast<double>(frames - 1);
      out.samples.push_back(std::move(s));
    }
    return out;
  }

  if (spec.kind == TaskKind::kTransition) {
    std::vector<std::size_t> boundaries;
    for (std::size_t t = 1; t < frames; ++t) {
      if (bundle.phase_of_frame[t] != bundle.phase_of_frame[t - 1]) boundaries.push_back(t);
    }
    for (std::size_t t = d + 1; t < frames; t += sampler.stride_present) {
      double minutes = spec.transition_minutes;  // no upcoming transition
      for (std::size_t b : boundaries) {
        if (b >= t) {
          minutes = std::min(spec.transition_minutes,
                             static_cast<double>(b - t) / spec.frames_per_minute);
          break;
        }
      }
      TaskSample s;
      s.clip = render_clip(bundle, window_at(t));
      s.regression_target = minutes;
      out.samples.push_back(std::move(s));
    }
    return out;
  }

  // Anticipation: one clip per (verb onset, offset), anchored strictly before
  // the event.
  const double frames_per_second = spec.frames_per_minute / 60.0;
  for (std::size_t c = 0; c < bundle.labels.classes; ++c) {
    for (std::size_t t = 1; t < frames; ++t) {
      if (!(bundle.labels.at(t, c) == 1 && bundle.labels.at(t - 1, c) == 0)) continue;
      for (double offset_s : spec.anticipation_offsets_s) {
        const auto offset =
            static_cast<std::size_t>(std::llround(offset_s * frames_per_second));
        if (offset > t) continue;
        const std::size_t anchor = t - offset;
        if (!anchor_ok(anchor)) continue;
        TaskSample s;
        s.clip = render_clip(bundle, window_at(anchor));
        s.class_target = c;
        out.samples.push_back(std::move(s));
      }
    }
  }
  return out;
}

TaskDataset build_task_labels(const std::vector<ProcedureBundle>& bundles,
                              const TaskSpec& spec, const SamplerConfig& sampler) {
  TaskDataset out;
  out.spec = spec;
  for (const auto& bundle : bundles) {
    TaskDataset one = build_task_labels(bundle, spec, sampler);
    out.n_classes = one.n_classes;
    for (auto& s : one.samples) out.samples.push_back(std::move(s));
  }
  return out;
}

namespace {

std::size_t holdout_modulus(double fraction) {
  if (fraction <= 0.0 || fraction >= 1.0) throw TensorError("bad holdout fraction");
  return std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(1.0 / fraction)));
}

// Teacher-style backbone (encoder + OT clustering + state graph) with a
// linear task head on the mean-pooled refined state. Pooling over centroids
// keeps the head invariant to centroid ordering, which varies per clip.
struct DownstreamModel {
  ModelConfig cfg;
  TokenEncoder encoder;
  StateGraphModule graph;
  Tensor head_w, head_b;

  DownstreamModel(const ModelConfig& mc, std::size_t out_dim, std::uint64_t seed)
      : cfg(mc) {
    std::mt19937_64 rng(seed);
    encoder = TokenEncoder(mc.feat_dim, rng);
    graph = StateGraphModule(mc.graph_config(), rng);
    const std::size_t in = mc.hidden;
    head_w = Tensor::randn({in, out_dim}, rng, 1.0 / std::sqrt(static_cast<double>(in)),
                           true);
    head_b = Tensor::zeros({out_dim}, true);
  }

  Tensor forward(const TokenBatch& clip) const {
    const Tensor tokens =
        Tensor::from_data({clip.n_tokens, clip.dim}, clip.tokens);
    const Tensor encoded = encoder.forward(tokens);
    const Tensor m_r = attention_marginals(clip, cfg.marginal_temperature);
    const auto idx = select_centroid_indices(m_r, cfg.clusters);
    Marginals marginals{m_r, uniform_distribution(cfg.clusters),
                        cfg.marginal_temperature};
    const Assignment a =
        sinkhorn_cluster(encoded, gather_rows(encoded, idx), marginals,
                         cfg.sinkhorn_lambda, cfg.sinkhorn_iterations);
    const Tensor refined = graph.forward(aggregate_state(encoded, a));
    const Tensor pooled = reshape(mean(refined, 0), {1, cfg.hidden});
    return matmul(pooled, head_w) + row_broadcast(head_b, 1);
  }

  ParamMap params() const {
    ParamMap out;
    encoder.collect_params("encoder.", out);
    graph.collect_params("graph.", out);
    out.emplace("head.w", head_w);
    out.emplace("head.b", head_b);
    return out;
  }

  void adopt_backbone(const ParamMap& init) {
    ParamMap enc, grf;
    for (const auto& [name, t] : init) {
      if (name.rfind("encoder.", 0) == 0) enc.emplace(name, t);
      if (name.rfind("graph.", 0) == 0) grf.emplace(name, t);
    }
    if (enc.empty() || grf.empty()) {
      throw TensorError("backbone checkpoint lacks encoder/graph parameters");
    }
    encoder.adopt_params("encoder.", enc);
    graph.adopt_params("graph.", grf);
  }
};

}  // namespace

FinetuneResult finetune_downstream(const ModelConfig& model_cfg,
                                   const ParamMap& backbone_init,
                                   const TaskDataset& task, const FinetuneConfig& cfg) {
  if (task.samples.empty()) throw TensorError("empty task dataset");
  const bool classify = task.spec.kind == TaskKind::kAnticipation;
  const std::size_t out_dim = classify ? task.n_classes : 1;
  DownstreamModel model(model_cfg, out_dim, cfg.seed);
  if (!backbone_init.empty()) model.adopt_backbone(backbone_init);

  const std::size_t modulus = holdout_modulus(cfg.holdout_fraction);
  std::vector<std::size_t> train_idx, held_idx;
  for (std::size_t i = 0; i < task.samples.size(); ++i) {
    (i % modulus == modulus - 1 ? held_idx : train_idx).push_back(i);
  }
  if (train_idx.empty() || held_idx.empty()) {
    throw TensorError("task dataset too small to split");
  }

  OptimizerConfig oc;
  oc.schedule.base_lr = cfg.lr;
  oc.schedule.warmup_epochs = 1;
  oc.schedule.total_epochs = cfg.epochs;
  oc.schedule.min_lr = cfg.lr * 0.01;
  AdamW opt(oc);
  ParamMap params = model.params();

  FinetuneResult result;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = train_idx;
    std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch) + 1));
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch) {
      const std::size_t n = std::min(cfg.batch, order.size() - b);
      Tensor batch_loss = Tensor::scalar(0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const TaskSample& s = task.samples[order[b + i]];
        const Tensor pred = model.forward(s.clip);
        if (classify) {
          const Tensor log_probs =
              pred - col_broadcast(logsumexp(pred, 1), pred.cols());
          std::vector<double> pick(pred.size(), 0.0);
          pick[s.class_target] = 1.0;
          batch_loss = batch_loss -
                       sum(Tensor::from_data(pred.shape(), std::move(pick)) * log_probs);
        } else {
          const Tensor target = Tensor::from_data({1, 1}, {s.regression_target});
          batch_loss = batch_loss +
                       loss_smooth_l1_mean(pred, target, model_cfg.smooth_l1_threshold);
        }
      }
      batch_loss = batch_loss * (1.0 / static_cast<double>(n));
      epoch_loss += batch_loss.item();
      ++batches;
      backward(batch_loss);
      opt.step(params, epoch);
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(batches));
  }

  MetricReport& report = result.report;
  report.task = task_kind_name(task.spec.kind);
  report.variant = backbone_init.empty() ? "random_init" : "pretrained";
  report.seed = cfg.seed;
  if (classify) {
    std::vector<int> predicted, truth;
    std::vector<std::vector<double>> scores(task.n_classes);
    std::vector<std::vector<int>> labels(task.n_classes);
    for (std::size_t i : held_idx) {
      const TaskSample& s = task.samples[i];
      const Tensor probs = softmax(model.forward(s.clip), 1);
      int argmax = 0;
      for (std::size_t c = 1; c < task.n_classes; ++c) {
        if (probs.at(0, c) > probs.at(0, argmax)) argmax = static_cast<int>(c);
      }
      predicted.push_back(argmax);
      truth.push_back(static_cast<int>(s.class_target));
      for (std::size_t c = 0; c < task.n_classes; ++c) {
        scores[c].push_back(probs.at(0, c));
        labels[c].push_back(s.class_target == c ? 1 : 0);
      }
    }
    double mean_ap = 0.0, mean_f1 = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < task.n_classes; ++c) {
      const bool has_positives =
          std::find(labels[c].begin(), labels[c].end(), 1) != labels[c].end();
      if (!has_positives) continue;
      ++present;
      mean_ap += average_precision(scores[c], labels[c]);
      mean_f1 += f1_for_state(predicted, truth, static_cast<int>(c));
    }
    report.metrics["accuracy"] = accuracy(predicted, truth);
    report.metrics["mean_map"] = present ? mean_ap / present : 0.0;
    report.metrics["mean_f1"] = present ? mean_f1 / present : 0.0;
  } else {
    std::vector<double> predicted, truth;
    for (std::size_t i : held_idx) {
      const TaskSample& s = task.samples[i];
      predicted.push_back(model.forward(s.clip).at(0, 0));
      truth.push_back(s.regression_target);
    }
    report.metrics["mae"] = mean_absolute_error(predicted, truth);
  }
  return result;
}

double constant_mean_baseline_mae(const TaskDataset& task, double holdout_fraction) {
  if (task.spec.kind == TaskKind::kAnticipation) {
    throw TensorError("constant-mean baseline is for regression tasks");
  }
  const std::size_t modulus = holdout_modulus(holdout_fraction);
  double train_sum = 0.0;
  std::size_t train_n = 0;
  std::vector<double> held;
  for (std::size_t i = 0; i < task.samples.size(); ++i) {
    if (i % modulus == modulus - 1) {
      held.push_back(task.samples[i].regression_target);
    } else {
      train_sum += task.samples[i].regression_target;
      ++train_n;
    }
  }
  if (train_n == 0 || held.empty()) throw TensorError("task dataset too small to split");
  const double mean = train_sum / static_cast<double>(train_n);
  double mae = 0.0;
  for (double t : held) mae += std::abs(t - mean);
  return mae / static_cast<double>(held.size());
}

void save_train_state(const std::string& path, const ParamMap& params, AdamW& opt,
                      int next_epoch, const ParamMap& extra) {
  ParamMap state;
  for (const auto& [name, t] : params) {
    state.emplace("param." + name, t);
    const auto mit = opt.first_moments().find(name);
    const auto vit = opt.second_moments().find(name);
    if (mit != opt.first_moments().end()) {
      state.emplace("opt.m." + name, Tensor::from_data(t.shape(), mit->second));
    }
    if (vit != opt.second_moments().end()) {
      state.emplace("opt.v." + name, Tensor::from_data(t.shape(), vit->second));
    }
  }
  for (const auto& [name, t] : extra) state.emplace("extra." + name, t);
  state.emplace("meta.progress",
                Tensor::from_data({2}, {static_cast<double>(next_epoch),
                                        static_cast<double>(opt.step_count())}));
  save_checkpoint(path, state);
}

int load_train_state(const std::string& path, const ParamMap& params, AdamW& opt,
                     const ParamMap& extra) {
  const ParamMap state = load_checkpoint(path, /*requires_grad=*/false);
  const auto copy_into = [&](const Tensor& dst, const std::string& key) {
    const auto it = state.find(key);
    if (it == state.end()) throw TensorError("train state missing " + key);
    if (it->second.shape() != dst.shape()) {
      throw TensorError("train state shape mismatch for " + key);
    }
    const_cast<Tensor&>(dst).data_mut() = it->second.data();
  };
  for (const auto& [name, t] : params) {
    copy_into(t, "param." + name);
    const auto mit = state.find("opt.m." + name);
    if (mit != state.end()) opt.first_moments()[name] = mit->second.data();
    const auto vit = state.find("opt.v." + name);
    if (vit != state.end()) opt.second_moments()[name] = vit->second.data();
  }
  for (const auto& [name, t] : extra) copy_into(t, "extra." + name);
  const auto meta = state.find("meta.progress");
  if (meta == state.end()) throw TensorError("train state missing meta.progress");
  opt.set_step_count(static_cast<long long>(meta->second.at(1)));
  return static_cast<int>(meta->second.at(0));
}

std::string loss_curve_csv(const std::vector<double>& curve) {
  std::ostringstream out;
  out << "epoch,loss\n" << std::setprecision(17);
  for (std::size_t i = 0; i < curve.size(); ++i) out << i << "," << curve[i] << "\n";
  return out.str();
}

}  // namespace surgfutr
