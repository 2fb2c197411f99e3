// Command-line pipeline: synthetic workflow generation, state-change clip
// sampling, teacher pretraining, student distillation, Lite training,
// evaluation, and cluster-map inspection.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "surgfutr/checkpoint.hpp"
#include "surgfutr/config.hpp"
#include "surgfutr/train.hpp"

namespace fs = std::filesystem;
using namespace surgfutr;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitPrecondition = 3;
constexpr int kExitDivergence = 4;

struct CliOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  int stop_after_epoch = -1;  // interrupt hook for resume testing
  bool resume = false;
  std::string inspect_checkpoint;
  std::size_t inspect_procedure = 0;
  std::size_t inspect_begin = 0;
  std::size_t inspect_end = 0;
  std::string inspect_out;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PreconditionError("cannot open file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

RunConfig resolve_config(const CliOptions& opt) {
  std::string text = opt.config_path.empty()
                         ? RunConfig::defaults().canonical_json()
                         : [&] {
                             std::ifstream in(opt.config_path, std::ios::binary);
                             if (!in) throw ConfigError("cannot open config file: " +
                                                        opt.config_path);
                             std::ostringstream t;
                             t << in.rdbuf();
                             return t.str();
                           }();
  for (const auto& assignment : opt.overrides) {
    text = apply_override(text, assignment);
  }
  return parse_run_config(text);
}

void ensure_dir(const std::string& dir) { fs::create_directories(dir); }

std::vector<double> read_curve(const std::string& path) {
  std::vector<double> curve;
  std::ifstream in(path);
  if (!in) return curve;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    curve.push_back(std::stod(line.substr(comma + 1)));
  }
  return curve;
}

void write_report(const RunConfig& cfg, const std::string& dir, MetricReport report) {
  report.config_hash = cfg.config_hash();
  report.seed = cfg.seed;
  const std::string name =
      "report_" + report.task + "_" + report.variant + ".json";
  atomic_write_file(dir + "/" + name, report.to_json() + "\n");
  std::cout << report.to_json() << "\n";
}

// ---- stages ----

int cmd_gen(const RunConfig& cfg) {
  const std::string dir = cfg.stage_dir("gen");
  ensure_dir(dir);
  const auto bundles = make_procedures(cfg);
  nlohmann::json manifest;
  manifest["config_hash"] = cfg.config_hash();
  manifest["files"] = nlohmann::json::array();
  const std::size_t d = cfg.sampler.clip_duration;
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    const std::string labels_path = dir + "/labels_" + std::to_string(i) + ".csv";
    save_label_csv(labels_path, bundles[i].labels);
    manifest["files"].push_back("labels_" + std::to_string(i) + ".csv");

    std::vector<std::pair<FrameWindow, TokenBatch>> clips;
    for (std::size_t t = d + 1; t < bundles[i].labels.frames;
         t += cfg.sampler.stride_present) {
      const FrameWindow w{t - d - 1, t - 1};
      clips.emplace_back(w, render_clip(bundles[i], w));
    }
    const std::string shard_path = dir + "/features_" + std::to_string(i) + ".bin";
    save_feature_shard(shard_path, clips);
    manifest["files"].push_back("features_" + std::to_string(i) + ".bin");
  }
  atomic_write_file(dir + "/manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << manifest["files"].size() << " files to " << dir << "\n";
  return 0;
}

int cmd_sample(const RunConfig& cfg) {
  const std::string dir = cfg.stage_dir("sample");
  ensure_dir(dir);
  const auto bundles = make_procedures(cfg);
  std::string jsonl;
  std::vector<std::size_t> counts(kNumStates, 0);
  for (const auto& bundle : bundles) {
    const auto pairs = generate_clip_pairs(bundle.labels, cfg.sampler);
    jsonl += clip_pairs_to_jsonl(pairs);
    for (const auto& pair : pairs) {
      for (StateChange s : pair.targets) ++counts[static_cast<std::size_t>(s)];
    }
  }
  atomic_write_file(dir + "/clip_pairs.jsonl", jsonl);
  const double mean =
      (counts[0] + counts[1] + counts[2]) / 3.0;  // background excluded
  std::cout << "category        count\n";
  std::cout << "continuity      " << counts[0] << "\n";
  std::cout << "discontinuity   " << counts[1] << "\n";
  std::cout << "onset           " << counts[2] << "\n";
  std::cout << "mean            " << std::setprecision(17) << mean << "\n";
  return 0;
}

// Shared epoch loop: runs one epoch at a time so state can be checkpointed
// after every epoch and an interrupted run resumes onto the same curve.
template <typename StepFn>
int run_stage(const RunConfig& cfg, const CliOptions& opt, const std::string& stage,
              const ParamMap& params, AdamW& optimizer, const ParamMap& extra,
              StepFn step_one_epoch, const std::string& final_ckpt) {
  const std::string dir = cfg.stage_dir(stage);
  ensure_dir(dir);
  const std::string state_path = dir + "/state.ckpt";
  const std::string curve_path = dir + "/loss_curve.csv";

  int start_epoch = 0;
  std::vector<double> curve;
  if (opt.resume && fs::exists(state_path)) {
    start_epoch = load_train_state(state_path, params, optimizer, extra);
    curve = read_curve(curve_path);
    curve.resize(static_cast<std::size_t>(start_epoch));
    std::cout << "resuming " << stage << " at epoch " << start_epoch << "\n";
  }

  for (int epoch = start_epoch; epoch < cfg.train.epochs; ++epoch) {
    curve.push_back(step_one_epoch(epoch));
    save_train_state(state_path, params, optimizer, epoch + 1, extra);
    atomic_write_file(curve_path, loss_curve_csv(curve));
    std::cout << stage << " epoch " << epoch << " loss " << std::setprecision(17)
              << curve.back() << "\n";
    if (opt.stop_after_epoch >= 0 && epoch + 1 > opt.stop_after_epoch) {
      std::cout << "stopping after epoch " << epoch << " as requested\n";
      return 0;
    }
  }
  save_checkpoint(dir + "/" + final_ckpt, params);
  atomic_write_file(curve_path, loss_curve_csv(curve));
  std::cout << "wrote " << dir << "/" << final_ckpt << "\n";
  return 0;
}

int cmd_pretrain(const RunConfig& cfg, const CliOptions& opt) {
  const Dataset data = build_dataset(make_procedures(cfg), cfg.sampler);
  if (data.entries.empty()) throw PreconditionError("no clip pairs sampled");
  TeacherModel model(cfg.model, cfg.seed);
  AdamW optimizer(cfg.train.optimizer_config());
  const ParamMap params = model.params();
  return run_stage(cfg, opt, "pretrain", params, optimizer, {},
                   [&](int epoch) {
                     return train_teacher(model, data, cfg.train, epoch, &optimizer,
                                          epoch + 1)
                         .loss_curve.back();
                   },
                   "teacher.ckpt");
}

int cmd_distill(const RunConfig& cfg, const CliOptions& opt) {
  const std::string teacher_path = cfg.stage_dir("pretrain") + "/teacher.ckpt";
  if (!fs::exists(teacher_path)) {
    throw PreconditionError("missing teacher checkpoint (run pretrain first): " +
                            teacher_path);
  }
  const Dataset data = build_dataset(make_procedures(cfg), cfg.sampler);
  if (data.entries.empty()) throw PreconditionError("no clip pairs sampled");
  TeacherModel teacher(cfg.model, cfg.seed);
  teacher.adopt_params(load_checkpoint(teacher_path));
  StudentModel student(cfg.model, cfg.seed + 1);
  AdamW optimizer(cfg.train.optimizer_config());
  const ParamMap params = student.params();
  return run_stage(cfg, opt, "distill", params, optimizer, {},
                   [&](int epoch) {
                     return distill_student(student, teacher, data, cfg.train, cfg.loss,
                                            epoch, &optimizer, epoch + 1)
                         .loss_curve.back();
                   },
                   "student.ckpt");
}

int cmd_lite(const RunConfig& cfg, const CliOptions& opt) {
  const Dataset data = build_dataset(make_procedures(cfg), cfg.sampler);
  if (data.entries.empty()) throw PreconditionError("no clip pairs sampled");
  LiteModel model(cfg.model, cfg.seed + 2);
  AdamW optimizer(cfg.train.optimizer_config());
  const ParamMap params = model.params();
  const ParamMap extra = model.target_params();
  return run_stage(cfg, opt, "lite", params, optimizer, extra,
                   [&](int epoch) {
                     return train_lite(model, data, cfg.train, cfg.loss.lambda6, epoch,
                                       &optimizer, epoch + 1)
                         .loss_curve.back();
                   },
                   "lite.ckpt");
}

int cmd_eval(const RunConfig& cfg) {
  const std::string dir = cfg.stage_dir("eval");
  ensure_dir(dir);
  const auto bundles = make_procedures(cfg);
  const Dataset data = build_dataset(bundles, cfg.sampler);
  const auto [train_split, held] = split_dataset(data);
  if (held.entries.empty()) throw PreconditionError("no held-out clip pairs");

  const std::string teacher_path = cfg.stage_dir("pretrain") + "/teacher.ckpt";
  const std::string student_path = cfg.stage_dir("distill") + "/student.ckpt";
  const std::string lite_path = cfg.stage_dir("lite") + "/lite.ckpt";
  bool any = false;

  ParamMap teacher_params;
  if (fs::exists(teacher_path)) {
    any = true;
    TeacherModel teacher(cfg.model, cfg.seed);
    teacher_params = load_checkpoint(teacher_path);
    teacher.adopt_params(teacher_params);
    write_report(cfg, dir,
                 evaluate_state_change(&teacher, nullptr, nullptr, Variant::kTeacher,
                                       held));
  }
  if (fs::exists(student_path)) {
    any = true;
    StudentModel student(cfg.model, cfg.seed + 1);
    student.adopt_params(load_checkpoint(student_path));
    write_report(cfg, dir,
                 evaluate_state_change(nullptr, &student, nullptr, Variant::kStudent,
                                       held));
  }
  if (fs::exists(lite_path)) {
    any = true;
    LiteModel lite(cfg.model, cfg.seed + 2);
    lite.adopt_params(load_checkpoint(lite_path));
    write_report(cfg, dir,
                 evaluate_state_change(nullptr, nullptr, &lite, Variant::kLite, held));
  }
  if (!any) {
    throw PreconditionError("no checkpoints found under " + cfg.run_dir() +
                            " (run pretrain/distill/lite first)");
  }

  for (const auto& task_name : cfg.eval_tasks) {
    TaskSpec spec = cfg.task;
    spec.kind = task_kind_from_name(task_name);
    const TaskDataset task = build_task_labels(bundles, spec, cfg.sampler);
    if (task.samples.empty()) throw PreconditionError("task produced no samples");
    if (!teacher_params.empty()) {
      FinetuneResult pre = finetune_downstream(cfg.model, teacher_params, task,
                                               cfg.finetune);
      write_report(cfg, dir, pre.report);
    }
    FinetuneResult rnd = finetune_downstream(cfg.model, {}, task, cfg.finetune);
    write_report(cfg, dir, rnd.report);
    if (spec.kind != TaskKind::kAnticipation) {
      MetricReport base;
      base.task = task_kind_name(spec.kind);
      base.variant = "constant_mean";
      base.metrics["mae"] =
          constant_mean_baseline_mae(task, cfg.finetune.holdout_fraction);
      write_report(cfg, dir, base);
    }
  }
  return 0;
}

int cmd_inspect(const RunConfig& cfg, const CliOptions& opt) {
  const auto bundles = make_procedures(cfg);
  if (opt.inspect_procedure >= bundles.size()) {
    throw PreconditionError("procedure index out of range");
  }
  TeacherModel teacher(cfg.model, cfg.seed);
  if (!opt.inspect_checkpoint.empty()) {
    if (!fs::exists(opt.inspect_checkpoint)) {
      throw PreconditionError("missing checkpoint: " + opt.inspect_checkpoint);
    }
    teacher.adopt_params(load_checkpoint(opt.inspect_checkpoint));
  }
  const FrameWindow window{opt.inspect_begin, opt.inspect_end};
  const TokenBatch clip = render_clip(bundles[opt.inspect_procedure], window);
  const ClipState state = teacher.encode_clip(clip);
  const auto centroid_tokens = select_centroid_indices(state.m_r, cfg.model.clusters);
  std::ostringstream out;
  for (std::size_t t = 0; t < clip.n_tokens; ++t) {
    nlohmann::json line;
    line["token"] = t;
    line["cluster"] = state.hard[t];
    line["centroid_token"] = centroid_tokens[state.hard[t]];
    out << line.dump() << "\n";
  }
  if (opt.inspect_out.empty()) {
    std::cout << out.str();
  } else {
    atomic_write_file(opt.inspect_out, out.str());
    std::cout << "wrote " << opt.inspect_out << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"State-change learning pipeline on synthetic workflow data"};
  app.require_subcommand(1);
  app.fallthrough();

  CliOptions opt;
  app.add_option("--config", opt.config_path, "JSON config file (defaults if omitted)");
  app.add_option("--set", opt.overrides, "Override, e.g. --set train.epochs=5");

  auto* gen = app.add_subcommand("gen", "Generate label CSVs and feature shards");
  auto* sample = app.add_subcommand("sample", "Sample state-change clip pairs");
  auto* pretrain = app.add_subcommand("pretrain", "Train the teacher");
  auto* distill = app.add_subcommand("distill", "Distill the student from the teacher");
  auto* lite = app.add_subcommand("lite", "Train the Lite future-feature model");
  auto* eval = app.add_subcommand("eval", "Evaluate checkpoints and downstream tasks");
  auto* inspect = app.add_subcommand("inspect", "Export token cluster map as JSONL");

  for (auto* stage : {pretrain, distill, lite}) {
    stage->add_option("--stop-after-epoch", opt.stop_after_epoch,
                      "Stop (successfully) after this epoch; resume with --resume");
    stage->add_flag("--resume", opt.resume, "Resume from the saved training state");
  }
  inspect->add_option("--checkpoint", opt.inspect_checkpoint, "Teacher checkpoint");
  inspect->add_option("--procedure", opt.inspect_procedure, "Procedure index");
  inspect->add_option("--begin", opt.inspect_begin, "Window begin frame")->required();
  inspect->add_option("--end", opt.inspect_end, "Window end frame")->required();
  inspect->add_option("--out", opt.inspect_out, "Output JSONL path (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    const RunConfig cfg = resolve_config(opt);
    if (gen->parsed()) return cmd_gen(cfg);
    if (sample->parsed()) return cmd_sample(cfg);
    if (pretrain->parsed()) return cmd_pretrain(cfg, opt);
    if (distill->parsed()) return cmd_distill(cfg, opt);
    if (lite->parsed()) return cmd_lite(cfg, opt);
    if (eval->parsed()) return cmd_eval(cfg);
    if (inspect->parsed()) return cmd_inspect(cfg, opt);
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const PreconditionError& e) {
    std::cerr << "precondition failure: " << e.what() << "\n";
    return kExitPrecondition;
  } catch (const TensorError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPrecondition;
  }
}
