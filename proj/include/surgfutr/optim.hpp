#pragma once

#include <map>
#include <string>
#include <vector>

#include "surgfutr/tensor.hpp"

namespace surgfutr {

// Named trainable tensors, sorted by name for deterministic iteration.
using ParamMap = std::map<std::string, Tensor>;

struct ScheduleConfig {
  double base_lr = 1e-4;
  int warmup_epochs = 5;
  int total_epochs = 40;
  double min_lr = 1e-6;
};

// Linear warmup toward base_lr, then cosine decay reaching min_lr exactly at
// the final epoch.
double scheduled_lr(const ScheduleConfig& cfg, int epoch);

struct OptimizerConfig {
  ScheduleConfig schedule;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;
};

// Decoupled-weight-decay Adam over a ParamMap. Moments are keyed by parameter
// name so they survive checkpointing.
class AdamW {
 public:
  explicit AdamW(OptimizerConfig cfg) : cfg_(cfg) {}

  // Clips the global gradient norm, then applies one update at the learning
  // rate for `epoch`. Gradients are read from each parameter's grad buffer
  // and zeroed afterwards.
  void step(ParamMap& params, int epoch);

  long long step_count() const { return step_; }
  const OptimizerConfig& config() const { return cfg_; }

  // Moment state round-trip for checkpoint/resume.
  std::map<std::string, std::vector<double>>& first_moments() { return m_; }
  std::map<std::string, std::vector<double>>& second_moments() { return v_; }
  void set_step_count(long long s) { step_ = s; }

 private:
  OptimizerConfig cfg_;
  std::map<std::string, std::vector<double>> m_;
  std::map<std::string, std::vector<double>> v_;
  long long step_ = 0;
};

// target <- (1 - momentum) * target + momentum * main, per parameter.
void ema_update(ParamMap& target, const ParamMap& main, double momentum);

// Deep copy of every parameter's values into fresh leaf tensors.
ParamMap clone_params(const ParamMap& params, bool requires_grad);

}  // namespace surgfutr
