#include "surgfutr/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace surgfutr {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::vector<std::string>& allowed,
                    const std::string& section) {
  if (!j.is_object()) throw ConfigError("section '" + section + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown key '" + section + (section.empty() ? "" : ".") + key +
                        "'");
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
  }
}

}  // namespace

RunConfig RunConfig::defaults() {
  RunConfig c;
  c.workflow = WorkflowConfig::defaults();
  c.workflow.phases = 3;
  c.workflow.allowed_next.assign(c.workflow.phases, {});
  for (std::size_t p = 0; p + 1 < c.workflow.phases; ++p) {
    c.workflow.allowed_next[p] = {p + 1};
  }
  c.workflow.steps_per_phase = 3;
  c.workflow.verbs = 10;
  c.workflow.step_duration = {40, 10};
  c.workflow.tokens_per_clip = 64;
  c.workflow.feature_dim = 16;
  c.workflow.seed = c.seed;

  c.sampler.stability_window = 5;
  c.sampler.stride_present = 3;
  c.sampler.stride_absent = 25;
  c.sampler.clip_duration = 3;
  c.sampler.horizon = 3;

  c.model.n_tokens = c.workflow.tokens_per_clip;
  c.model.feat_dim = c.workflow.feature_dim;
  c.model.n_classes = c.workflow.verbs;
  c.model.hidden = 16;
  c.model.class_dim = 16;
  c.model.clusters = 6;
  c.model.graph.heads = 2;
  c.model.actdyn.heads = 2;
  c.model.actdyn.depth = 2;
  c.model.emd_blur = 0.2;
  c.model.emd_iterations = 10;

  c.train.epochs = 20;
  c.train.base_lr = 1e-3;
  c.train.warmup_epochs = 2;
  c.train.seed = c.seed;

  c.finetune.epochs = 10;
  c.finetune.seed = c.seed;
  return c;
}

std::string RunConfig::canonical_json() const {
  json j;
  j["seed"] = seed;
  j["output_dir"] = output_dir;
  j["procedures"] = procedures;
  j["workflow"] = {
      {"phases", workflow.phases},
      {"steps_per_phase", workflow.steps_per_phase},
      {"verbs", workflow.verbs},
      {"step_mean_frames", workflow.step_duration.mean_frames},
      {"step_jitter_frames", workflow.step_duration.jitter_frames},
      {"cooccurrence_rate", cooccurrence_rate},
      {"fps", workflow.fps},
      {"tokens_per_clip", workflow.tokens_per_clip},
      {"feature_dim", workflow.feature_dim},
      {"noise_sigma", workflow.noise_sigma},
      {"saliency_factor", workflow.saliency_factor},
  };
  j["sampler"] = {
      {"stability_window", sampler.stability_window},
      {"stride_present", sampler.stride_present},
      {"stride_absent", sampler.stride_absent},
      {"clip_duration", sampler.clip_duration},
      {"horizon", sampler.horizon},
  };
  j["model"] = {
      {"hidden", model.hidden},
      {"class_dim", model.class_dim},
      {"clusters", model.clusters},
      {"marginal_temperature", model.marginal_temperature},
      {"sinkhorn_lambda", model.sinkhorn_lambda},
      {"sinkhorn_iterations", model.sinkhorn_iterations},
      {"heads", model.graph.heads},
      {"tau1", model.graph.tau1},
      {"theta", model.graph.theta},
      {"leaky_slope", model.graph.leaky_slope},
      {"actdyn_depth", model.actdyn.depth},
      {"actdyn_top_k", model.actdyn.top_k},
      {"alpha", model.actdyn.alpha},
      {"emd_blur", model.emd_blur},
      {"emd_iterations", model.emd_iterations},
      {"smooth_l1_threshold", model.smooth_l1_threshold},
      {"lite_rollout_steps", model.lite_rollout_steps},
  };
  j["loss"] = {
      {"lambda1", loss.lambda1}, {"lambda2", loss.lambda2}, {"lambda3", loss.lambda3},
      {"lambda4", loss.lambda4}, {"lambda5", loss.lambda5}, {"lambda6", loss.lambda6},
      {"tau2", loss.tau2},
  };
  j["train"] = {
      {"epochs", train.epochs},
      {"batch_teacher", train.batch_teacher},
      {"batch_distill", train.batch_distill},
      {"base_lr", train.base_lr},
      {"warmup_epochs", train.warmup_epochs},
      {"min_lr", train.min_lr},
      {"weight_decay", train.weight_decay},
      {"clip_norm", train.clip_norm},
      {"use_state_weights", train.use_state_weights},
  };
  j["eval"] = {
      {"tasks", eval_tasks},
      {"rsd_cap", task.rsd_cap},
      {"transition_minutes", task.transition_minutes},
      {"anticipation_offsets_s", task.anticipation_offsets_s},
      {"frames_per_minute", task.frames_per_minute},
      {"finetune_epochs", finetune.epochs},
      {"finetune_batch", finetune.batch},
      {"finetune_lr", finetune.lr},
      {"holdout_fraction", finetune.holdout_fraction},
  };
  return j.dump();
}

std::string RunConfig::config_hash() const {
  const std::string text = canonical_json();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setfill('0') << std::setw(16) << h;
  return out.str();
}

std::string RunConfig::run_dir() const { return output_dir + "/" + config_hash(); }

std::string RunConfig::stage_dir(const std::string& stage) const {
  return run_dir() + "/" + stage;
}

void RunConfig::validate() const {
  try {
    workflow.validate();
    sampler.validate();
    if (train.epochs > 0) train.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (model.clusters == 0 || model.clusters > model.n_tokens) {
    throw ConfigError("clusters must be in [1, tokens_per_clip]");
  }
  if (model.hidden == 0 || model.class_dim == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (model.sinkhorn_iterations < 1) throw ConfigError("sinkhorn_iterations must be >= 1");
  if (model.emd_blur <= 0.0) throw ConfigError("emd_blur must be positive");
  if (loss.tau2 <= 0.0) throw ConfigError("tau2 must be positive");
  if (cooccurrence_rate <= 0.0 || cooccurrence_rate > 1.0) {
    throw ConfigError("cooccurrence_rate must be in (0, 1]");
  }
  for (const auto& t : eval_tasks) {
    try {
      task_kind_from_name(t);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
  if (finetune.holdout_fraction <= 0.0 || finetune.holdout_fraction >= 1.0) {
    throw ConfigError("holdout_fraction must be in (0, 1)");
  }
}

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(j, {"seed", "output_dir", "procedures", "workflow", "sampler", "model",
                     "loss", "train", "eval"},
                 "");

  RunConfig c = RunConfig::defaults();
  read(j, "seed", c.seed);
  read(j, "output_dir", c.output_dir);
  read(j, "procedures", c.procedures);

  if (j.contains("workflow")) {
    const json& w = j["workflow"];
    reject_unknown(w,
                   {"phases", "steps_per_phase", "verbs", "step_mean_frames",
                    "step_jitter_frames", "cooccurrence_rate", "fps", "tokens_per_clip",
                    "feature_dim", "noise_sigma", "saliency_factor"},
                   "workflow");
    read(w, "phases", c.workflow.phases);
    read(w, "steps_per_phase", c.workflow.steps_per_phase);
    read(w, "verbs", c.workflow.verbs);
    read(w, "step_mean_frames", c.workflow.step_duration.mean_frames);
    read(w, "step_jitter_frames", c.workflow.step_duration.jitter_frames);
    read(w, "cooccurrence_rate", c.cooccurrence_rate);
    read(w, "fps", c.workflow.fps);
    read(w, "tokens_per_clip", c.workflow.tokens_per_clip);
    read(w, "feature_dim", c.workflow.feature_dim);
    read(w, "noise_sigma", c.workflow.noise_sigma);
    read(w, "saliency_factor", c.workflow.saliency_factor);
    // Rebuild the phase graph for the configured phase count.
    WorkflowConfig chain = WorkflowConfig::defaults();
    chain.phases = c.workflow.phases;
    c.workflow.allowed_next.clear();
  }
  if (c.workflow.allowed_next.empty() || c.workflow.allowed_next.size() != c.workflow.phases) {
    c.workflow.allowed_next.assign(c.workflow.phases, {});
    for (std::size_t p = 0; p + 1 < c.workflow.phases; ++p) {
      c.workflow.allowed_next[p] = {p + 1};
    }
  }
  c.workflow.cooccurrence.assign(c.workflow.verbs, c.cooccurrence_rate);
  c.workflow.seed = c.seed;

  if (j.contains("sampler")) {
    const json& s = j["sampler"];
    reject_unknown(s,
                   {"stability_window", "stride_present", "stride_absent",
                    "clip_duration", "horizon"},
                   "sampler");
    read(s, "stability_window", c.sampler.stability_window);
    read(s, "stride_present", c.sampler.stride_present);
    read(s, "stride_absent", c.sampler.stride_absent);
    read(s, "clip_duration", c.sampler.clip_duration);
    read(s, "horizon", c.sampler.horizon);
  }

  if (j.contains("model")) {
    const json& m = j["model"];
    reject_unknown(m,
                   {"hidden", "class_dim", "clusters", "marginal_temperature",
                    "sinkhorn_lambda", "sinkhorn_iterations", "heads", "tau1", "theta",
                    "leaky_slope", "actdyn_depth", "actdyn_top_k", "alpha", "emd_blur",
                    "emd_iterations", "smooth_l1_threshold", "lite_rollout_steps"},
                   "model");
    read(m, "hidden", c.model.hidden);
    read(m, "class_dim", c.model.class_dim);
    read(m, "clusters", c.model.clusters);
    read(m, "marginal_temperature", c.model.marginal_temperature);
    read(m, "sinkhorn_lambda", c.model.sinkhorn_lambda);
    read(m, "sinkhorn_iterations", c.model.sinkhorn_iterations);
    read(m, "heads", c.model.graph.heads);
    read(m, "tau1", c.model.graph.tau1);
    read(m, "theta", c.model.graph.theta);
    read(m, "leaky_slope", c.model.graph.leaky_slope);
    read(m, "actdyn_depth", c.model.actdyn.depth);
    read(m, "actdyn_top_k", c.model.actdyn.top_k);
    read(m, "alpha", c.model.actdyn.alpha);
    read(m, "emd_blur", c.model.emd_blur);
    read(m, "emd_iterations", c.model.emd_iterations);
    read(m, "smooth_l1_threshold", c.model.smooth_l1_threshold);
    read(m, "lite_rollout_steps", c.model.lite_rollout_steps);
    c.model.actdyn.heads = c.model.graph.heads;
    c.model.actdyn.tau1 = c.model.graph.tau1;
    c.model.actdyn.theta = c.model.graph.theta;
  }
  c.model.n_tokens = c.workflow.tokens_per_clip;
  c.model.feat_dim = c.workflow.feature_dim;
  c.model.n_classes = c.workflow.verbs;

  if (j.contains("loss")) {
    const json& l = j["loss"];
    reject_unknown(l,
                   {"lambda1", "lambda2", "lambda3", "lambda4", "lambda5", "lambda6",
                    "tau2"},
                   "loss");
    read(l, "lambda1", c.loss.lambda1);
    read(l, "lambda2", c.loss.lambda2);
    read(l, "lambda3", c.loss.lambda3);
    read(l, "lambda4", c.loss.lambda4);
    read(l, "lambda5", c.loss.lambda5);
    read(l, "lambda6", c.loss.lambda6);
    read(l, "tau2", c.loss.tau2);
  }

  if (j.contains("train")) {
    const json& t = j["train"];
    reject_unknown(t,
                   {"epochs", "batch_teacher", "batch_distill", "base_lr",
                    "warmup_epochs", "min_lr", "weight_decay", "clip_norm",
                    "use_state_weights"},
                   "train");
    read(t, "epochs", c.train.epochs);
    read(t, "batch_teacher", c.train.batch_teacher);
    read(t, "batch_distill", c.train.batch_distill);
    read(t, "base_lr", c.train.base_lr);
    read(t, "warmup_epochs", c.train.warmup_epochs);
    read(t, "min_lr", c.train.min_lr);
    read(t, "weight_decay", c.train.weight_decay);
    read(t, "clip_norm", c.train.clip_norm);
    read(t, "use_state_weights", c.train.use_state_weights);
  }
  c.train.seed = c.seed;

  if (j.contains("eval")) {
    const json& e = j["eval"];
    reject_unknown(e,
                   {"tasks", "rsd_cap", "transition_minutes", "anticipation_offsets_s",
                    "frames_per_minute", "finetune_epochs", "finetune_batch",
                    "finetune_lr", "holdout_fraction"},
                   "eval");
    read(e, "tasks", c.eval_tasks);
    read(e, "rsd_cap", c.task.rsd_cap);
    read(e, "transition_minutes", c.task.transition_minutes);
    read(e, "anticipation_offsets_s", c.task.anticipation_offsets_s);
    read(e, "frames_per_minute", c.task.frames_per_minute);
    read(e, "finetune_epochs", c.finetune.epochs);
    read(e, "finetune_batch", c.finetune.batch);
    read(e, "finetune_lr", c.finetune.lr);
    read(e, "holdout_fraction", c.finetune.holdout_fraction);
  }
  c.finetune.seed = c.seed;

  c.validate();
  return c;
}

std::vector<ProcedureBundle> make_procedures(const RunConfig& cfg) {
  const auto mix = [](std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a + 0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
  };
  std::vector<ProcedureBundle> out;
  if (cfg.procedures == 0) return out;
  const ProcedureBundle reference = generate_workflow(cfg.workflow);
  for (std::size_t i = 0; i < cfg.procedures; ++i) {
    WorkflowConfig wf = cfg.workflow;
    wf.seed = mix(cfg.seed, i + 1);
    ProcedureBundle bundle = generate_workflow(wf);
    bundle.prototypes = reference.prototypes;
    bundle.labels.video_id = "proc" + std::to_string(i);
    out.push_back(std::move(bundle));
  }
  return out;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str());
}

std::string apply_override(const std::string& json_text, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override must look like section.key=value: " + assignment);
  }
  const std::string path = assignment.substr(0, eq);
  const std::string value_text = assignment.substr(eq + 1);
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  json value;
  try {
    value = json::parse(value_text);
  } catch (const json::exception&) {
    value = value_text;  // plain string
  }
  json* cursor = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty()) throw ConfigError("bad override path: " + path);
    if (dot == std::string::npos) {
      (*cursor)[key] = value;
      break;
    }
    cursor = &(*cursor)[key];
    start = dot + 1;
  }
  return j.dump();
}

}  // namespace surgfutr
