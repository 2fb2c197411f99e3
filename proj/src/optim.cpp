#include "surgfutr/optim.hpp"

#include <cmath>

namespace surgfutr {

double scheduled_lr(const ScheduleConfig& cfg, int epoch) {
  if (epoch < cfg.warmup_epochs) {
    return cfg.base_lr * static_cast<double>(epoch + 1) /
           static_cast<double>(cfg.warmup_epochs);
  }
  const int last = cfg.total_epochs - 1;
  if (epoch >= last) return cfg.min_lr;
  const double progress = static_cast<double>(epoch - cfg.warmup_epochs) /
                          static_cast<double>(last - cfg.warmup_epochs);
  const double pi = 3.14159265358979323846;
  return cfg.min_lr + 0.5 * (cfg.base_lr - cfg.min_lr) * (1.0 + std::cos(pi * progress));
}

void AdamW::step(ParamMap& params, int epoch) {
  double sq_norm = 0.0;
  for (auto& [name, p] : params) {
    for (double g : p.grad()) {
      if (!std::isfinite(g)) throw TensorError("non-finite gradient for " + name);
      sq_norm += g * g;
    }
  }
  const double norm = std::sqrt(sq_norm);
  const double scale = (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm)
                           ? cfg_.clip_norm / norm
                           : 1.0;
  ++step_;
  const double lr = scheduled_lr(cfg_.schedule, epoch);
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (auto& [name, p] : params) {
    auto& m = m_[name];
    auto& v = v_[name];
    if (m.size() != p.size()) m.assign(p.size(), 0.0);
    if (v.size() != p.size()) v.assign(p.size(), 0.0);
    auto& data = p.data_mut();
    const auto& grad = p.grad();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double g = grad[i] * scale;
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      data[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * data[i]);
    }
    p.zero_grad();
  }
}

void ema_update(ParamMap& target, const ParamMap& main, double momentum) {
  for (auto& [name, t] : target) {
    const auto it = main.find(name);
    if (it == main.end()) throw TensorError("ema_update: missing parameter " + name);
    auto& td = t.data_mut();
    const auto& md = it->second.data();
    for (std::size_t i = 0; i < td.size(); ++i) {
      td[i] = (1.0 - momentum) * td[i] + momentum * md[i];
    }
  }
}

ParamMap clone_params(const ParamMap& params, bool requires_grad) {
  ParamMap out;
  for (const auto& [name, t] : params) {
    out.emplace(name, Tensor::from_data(t.shape(), t.data(), requires_grad));
  }
  return out;
}

}  // namespace surgfutr
