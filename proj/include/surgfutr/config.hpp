#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "surgfutr/labels.hpp"
#include "surgfutr/models.hpp"
#include "surgfutr/synth.hpp"
#include "surgfutr/train.hpp"

namespace surgfutr {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class PreconditionError : public std::runtime_error {
 public:
  explicit PreconditionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Single source of truth for a run: every module's parameters in one
// documented config file. Unknown keys are rejected; the canonical-JSON hash
// names the output directory and is embedded in all reports.
struct RunConfig {
  std::uint64_t seed = 7;
  std::string output_dir = "runs";
  std::size_t procedures = 48;
  double cooccurrence_rate = 0.9;

  WorkflowConfig workflow;   // seed filled from the run seed
  SamplerConfig sampler;
  ModelConfig model;         // n_tokens/feat_dim/n_classes filled from workflow
  LossWeights loss;
  TrainConfig train;

  // Evaluation.
  std::vector<std::string> eval_tasks = {"rsd"};
  TaskSpec task;             // kind set per evaluated task
  FinetuneConfig finetune;

  // Desk-scale defaults: small dimensions, separable synthetic data.
  static RunConfig defaults();

  std::string canonical_json() const;
  std::string config_hash() const;  // 16 hex chars, FNV-1a over canonical JSON
  std::string run_dir() const;      // output_dir/<config-hash>
  std::string stage_dir(const std::string& stage) const;

  void validate() const;
};

// Generates `procedures` bundles with per-procedure timelines and noise but a
// shared prototype set, so class appearance is consistent across procedures.
std::vector<ProcedureBundle> make_procedures(const RunConfig& cfg);

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

// Applies a dotted-path override such as "train.epochs=5" onto raw JSON text.
std::string apply_override(const std::string& json_text, const std::string& assignment);

}  // namespace surgfutr
