#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "surgfutr/models.hpp"
#include "surgfutr/optim.hpp"

namespace surgfutr {

struct TrainConfig {
  int epochs = 40;
  std::size_t batch_teacher = 32;
  std::size_t batch_distill = 16;
  double base_lr = 1e-4;
  int warmup_epochs = 5;
  double min_lr = 1e-6;
  double weight_decay = 0.05;
  double clip_norm = 1.0;
  std::uint64_t seed = 0;
  bool use_state_weights = true;  // inverse-frequency weights in L_SC

  void validate() const;
  OptimizerConfig optimizer_config() const;
};

// One rendered (current, future) clip pair with its per-class targets.
struct DatasetEntry {
  ClipPair pair;
  TokenBatch current;
  TokenBatch future;
};

struct Dataset {
  std::vector<DatasetEntry> entries;
  std::size_t n_classes = 0;
};

// Samples clip pairs from every bundle and renders both windows.
Dataset build_dataset(const std::vector<ProcedureBundle>& bundles,
                      const SamplerConfig& sampler);

// Deterministic 80/20 split by entry index (every 5th entry held out).
std::pair<Dataset, Dataset> split_dataset(const Dataset& data);

// Inverse-frequency weights over the four states across all targets in the
// dataset; states never seen get weight 0.
std::vector<double> inverse_frequency_weights(const Dataset& data);

struct TrainResult {
  std::vector<double> loss_curve;  // mean total loss per epoch
  std::vector<LossComponents> last_batch_components;  // empty unless distilling
};

// Derives all shuffling from (seed, epoch) so resuming from a checkpoint at
// epoch e reproduces the uninterrupted run. start_epoch allows resumption.
TrainResult train_teacher(TeacherModel& model, const Dataset& data,
                          const TrainConfig& cfg, int start_epoch = 0,
                          AdamW* optimizer = nullptr, int end_epoch = -1);

// Teacher is frozen: its outputs are detached into constants and its
// parameters are never stepped.
TrainResult distill_student(StudentModel& student, const TeacherModel& teacher,
                            const Dataset& data, const TrainConfig& cfg,
                            const LossWeights& weights, int start_epoch = 0,
                            AdamW* optimizer = nullptr, int end_epoch = -1);

TrainResult train_lite(LiteModel& model, const Dataset& data, const TrainConfig& cfg,
                       double futr_weight = 0.7, int start_epoch = 0,
                       AdamW* optimizer = nullptr, int end_epoch = -1);

// ---- evaluation ----

struct MetricReport {
  std::string task;
  std::string variant;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::map<std::string, double> metrics;

  std::string to_json() const;
};

enum class Variant { kTeacher, kStudent, kLite };

const char* variant_name(Variant v);

// Per-state AP/F1 pooled over (entry, class) samples; means exclude
// background. Model selected by the variant tag.
MetricReport evaluate_state_change(const TeacherModel* teacher,
                                   const StudentModel* student, const LiteModel* lite,
                                   Variant variant, const Dataset& data);

// Chance level per state: its prevalence among (entry, class) samples; the
// mean excludes background.
double chance_mean_ap(const Dataset& data);

// ---- downstream tasks ----

enum class TaskKind { kRsd, kTransition, kAnticipation };

struct TaskSpec {
  TaskKind kind = TaskKind::kRsd;
  double rsd_cap = 20.0;              // SFP-I normalization cap
  double transition_minutes = 5.0;    // p, truncation horizon
  std::vector<double> anticipation_offsets_s = {1.0, 3.0, 5.0};
  double frames_per_minute = 60.0;    // synthetic minutes convention

  void validate() const;
};

TaskKind task_kind_from_name(const std::string& name);
const char* task_kind_name(TaskKind k);

// One downstream sample: a rendered current-clip window plus its target.
struct TaskSample {
  TokenBatch clip;
  double regression_target = 0.0;  // rsd / transition
  std::size_t class_target = 0;    // anticipation verb id
};

struct TaskDataset {
  TaskSpec spec;
  std::vector<TaskSample> samples;
  std::size_t n_classes = 0;  // anticipation only
};

// Builds per-clip targets from a bundle's timeline. Clip windows follow the
// sampler geometry (current window [t-d-1, t-1]).
TaskDataset build_task_labels(const ProcedureBundle& bundle, const TaskSpec& spec,
                              const SamplerConfig& sampler);
TaskDataset build_task_labels(const std::vector<ProcedureBundle>& bundles,
                              const TaskSpec& spec, const SamplerConfig& sampler);

// Backbone = teacher-style encoder + state graph; head = linear on the
// flattened refined state. init_from copies matching backbone parameters from
// a teacher checkpoint; empty map means random init.
struct FinetuneConfig {
  int epochs = 10;
  std::size_t batch = 16;
  double lr = 3e-4;
  std::uint64_t seed = 0;
  double holdout_fraction = 0.2;
};

struct FinetuneResult {
  MetricReport report;
  std::vector<double> loss_curve;
};

FinetuneResult finetune_downstream(const ModelConfig& model_cfg,
                                   const ParamMap& backbone_init,
                                   const TaskDataset& task, const FinetuneConfig& cfg);

// Analytic constant-mean reference: MAE of always predicting the mean of the
// training-split targets, measured on the held-out split.
double constant_mean_baseline_mae(const TaskDataset& task, double holdout_fraction);

// ---- artifact helpers ----

std::string loss_curve_csv(const std::vector<double>& curve);

// Full training state (parameters + optimizer moments + epoch/step progress)
// so an interrupted run resumes onto the identical curve. `extra` carries
// non-optimized tensors such as the Lite EMA target encoder.
void save_train_state(const std::string& path, const ParamMap& params, AdamW& opt,
                      int next_epoch, const ParamMap& extra = {});

// Copies state into the live params/extra handles and optimizer; returns the
// next epoch to run.
int load_train_state(const std::string& path, const ParamMap& params, AdamW& opt,
                     const ParamMap& extra = {});

}  // namespace surgfutr
