#include "surgfutr/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "surgfutr/checkpoint.hpp"

namespace surgfutr {

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a + 0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2);
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  return x;
}

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("truncated feature shard");
  return v;
}

}  // namespace

WorkflowConfig WorkflowConfig::defaults() {
  WorkflowConfig cfg;
  cfg.allowed_next.assign(cfg.phases, {});
  for (std::size_t p = 0; p + 1 < cfg.phases; ++p) cfg.allowed_next[p] = {p + 1};
  cfg.cooccurrence.assign(cfg.verbs, 0.9);
  return cfg;
}

void WorkflowConfig::validate() const {
  if (phases == 0 || steps_per_phase == 0 || verbs == 0 || tokens_per_clip == 0 ||
      feature_dim == 0) {
    throw std::invalid_argument("workflow config counts must be positive");
  }
  if (step_duration.mean_frames < 1 ||
      step_duration.jitter_frames >= step_duration.mean_frames) {
    throw std::invalid_argument("step duration must stay >= 1 frame");
  }
  if (allowed_next.size() != phases) {
    throw std::invalid_argument("allowed_next must list every phase");
  }
  for (double r : cooccurrence) {
    if (r < 0.0 || r > 1.0) throw std::invalid_argument("co-occurrence rate outside [0,1]");
  }
  // Terminal phase (empty successor set) must be reachable from phase 0.
  std::vector<bool> seen(phases, false);
  std::vector<std::size_t> queue = {0};
  seen[0] = true;
  bool terminal_reachable = false;
  while (!queue.empty()) {
    const std::size_t p = queue.back();
    queue.pop_back();
    if (allowed_next[p].empty()) terminal_reachable = true;
    for (std::size_t q : allowed_next[p]) {
      if (q >= phases) throw std::invalid_argument("phase transition target out of range");
      if (!seen[q]) {
        seen[q] = true;
        queue.push_back(q);
      }
    }
  }
  if (!terminal_reachable) throw std::invalid_argument("unreachable terminal phase");
}

ProcedureBundle generate_workflow(const WorkflowConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);

  ProcedureBundle bundle;
  bundle.cfg = cfg;
  bundle.render_seed = cfg.seed;

  const std::size_t total_steps = cfg.phases * cfg.steps_per_phase;
  // Fixed step -> verb ownership: two verbs per global step.
  const auto step_verbs = [&](std::size_t g) {
    return std::array<std::size_t, 2>{g % cfg.verbs, (2 * g + 1) % cfg.verbs};
  };
  (void)total_steps;

  std::vector<std::uint8_t> rows;  // frames x verbs
  std::uniform_int_distribution<long long> jitter(
      -static_cast<long long>(cfg.step_duration.jitter_frames),
      static_cast<long long>(cfg.step_duration.jitter_frames));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::size_t phase = 0;
  std::size_t visits = 0;
  const std::size_t max_visits = cfg.phases * 8 + 8;
  while (true) {
    for (std::size_t s = 0; s < cfg.steps_per_phase; ++s) {
      const std::size_t g = phase * cfg.steps_per_phase + s;
      const auto dur_ll =
          static_cast<long long>(cfg.step_duration.mean_frames) + jitter(rng);
      const std::size_t dur = static_cast<std::size_t>(std::max(1LL, dur_ll));
      std::vector<std::uint8_t> active(cfg.verbs, 0);
      std::vector<std::pair<std::size_t, std::size_t>> spans(cfg.verbs, {0, 0});
      for (std::size_t v : step_verbs(g)) {
        const double rate = v < cfg.cooccurrence.size() ? cfg.cooccurrence[v] : 0.9;
        if (unit(rng) < rate) {
          // Active over a contiguous span covering at least half the step.
          const std::size_t slack = dur / 4;
          std::uniform_int_distribution<std::size_t> off(0, std::max<std::size_t>(slack, 0));
          const std::size_t a = slack ? off(rng) : 0;
          const std::size_t b = slack ? off(rng) : 0;
          active[v] = 1;
          spans[v] = {a, dur - b};
        }
      }
      for (std::size_t f = 0; f < dur; ++f) {
        for (std::size_t v = 0; v < cfg.verbs; ++v) {
          const bool on = active[v] && f >= spans[v].first && f < spans[v].second;
          rows.push_back(on ? 1 : 0);
        }
        bundle.phase_of_frame.push_back(phase);
        bundle.step_of_frame.push_back(g);
      }
    }
    ++visits;
    const auto& next = cfg.allowed_next[phase];
    if (next.empty() || visits >= max_visits) break;
    std::uniform_int_distribution<std::size_t> pick(0, next.size() - 1);
    phase = next[pick(rng)];
  }

  bundle.labels.video_id = "synthetic-" + std::to_string(cfg.seed);
  bundle.labels.classes = cfg.verbs;
  bundle.labels.frames = rows.size() / cfg.verbs;
  bundle.labels.values = std::move(rows);
  bundle.labels.fps = cfg.fps;
  for (std::size_t v = 0; v < cfg.verbs; ++v) {
    bundle.labels.class_names.push_back("verb" + std::to_string(v));
  }

  // Unit-norm class prototypes plus a background prototype, drawn from a
  // stream independent of the timeline RNG state.
  std::mt19937_64 proto_rng(mix_seed(cfg.seed, 0x70726f746fULL));
  std::normal_distribution<double> gauss(0.0, 1.0);
  bundle.prototypes.assign((cfg.verbs + 1) * cfg.feature_dim, 0.0);
  for (std::size_t c = 0; c <= cfg.verbs; ++c) {
    double norm2 = 0.0;
    for (std::size_t j = 0; j < cfg.feature_dim; ++j) {
      const double x = gauss(proto_rng);
      bundle.prototypes[c * cfg.feature_dim + j] = x;
      norm2 += x * x;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (std::size_t j = 0; j < cfg.feature_dim; ++j) {
      bundle.prototypes[c * cfg.feature_dim + j] *= inv;
    }
  }
  return bundle;
}

std::pair<std::size_t, std::size_t> class_region(std::size_t cls, std::size_t n_classes,
                                                 std::size_t n_tokens) {
  const std::size_t begin = cls * n_tokens / n_classes;
  const std::size_t end = (cls + 1) * n_tokens / n_classes;
  return {begin, end};
}

TokenBatch render_clip(const ProcedureBundle& bundle, const FrameWindow& window) {
  const auto& cfg = bundle.cfg;
  if (window.end >= bundle.labels.frames || window.begin > window.end) {
    throw std::out_of_range("render window out of bundle bounds");
  }
  std::vector<std::uint8_t> active(cfg.verbs, 0);
  for (std::size_t t = window.begin; t <= window.end; ++t) {
    for (std::size_t v = 0; v < cfg.verbs; ++v) {
      active[v] |= bundle.labels.at(t, v);
    }
  }

  const std::size_t n = cfg.tokens_per_clip;
  const std::size_t d = cfg.feature_dim;
  std::vector<std::size_t> owner(n, cfg.verbs);  // background by default
  std::vector<bool> salient(n, false);
  for (std::size_t v = 0; v < cfg.verbs; ++v) {
    const auto [b, e] = class_region(v, cfg.verbs, n);
    if (!active[v]) continue;
    for (std::size_t i = b; i < e; ++i) {
      owner[i] = v;
      salient[i] = true;
    }
  }

  std::mt19937_64 rng(mix_seed(bundle.render_seed, mix_seed(window.begin, window.end)));
  std::normal_distribution<double> gauss(0.0, 1.0);
  TokenBatch batch;
  batch.n_tokens = n;
  batch.dim = d;
  batch.tokens.resize(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const double* proto = bundle.prototype(owner[i]);
    for (std::size_t j = 0; j < d; ++j) {
      batch.tokens[i * d + j] = proto[j] + cfg.noise_sigma * gauss(rng);
    }
  }

  batch.attention.assign(n * n, 0.0);
  double row_total = 0.0;
  std::vector<double> weights(n);
  for (std::size_t j = 0; j < n; ++j) {
    weights[j] = salient[j] ? cfg.saliency_factor : 1.0;
    row_total += weights[j];
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      batch.attention[i * n + j] = weights[j] / row_total;
    }
  }
  return batch;
}

std::vector<double> region_mean(const TokenBatch& batch, std::size_t cls,
                                std::size_t n_classes) {
  const auto [b, e] = class_region(cls, n_classes, batch.n_tokens);
  std::vector<double> mean(batch.dim, 0.0);
  for (std::size_t i = b; i < e; ++i) {
    for (std::size_t j = 0; j < batch.dim; ++j) mean[j] += batch.token(i, j);
  }
  const double inv = 1.0 / static_cast<double>(e - b);
  for (auto& x : mean) x *= inv;
  return mean;
}

void save_feature_shard(const std::string& path,
                        const std::vector<std::pair<FrameWindow, TokenBatch>>& clips) {
  std::ostringstream os(std::ios::binary);
  os.write("SFSH", 4);
  write_pod<std::uint64_t>(os, clips.size());
  for (const auto& [window, batch] : clips) {
    write_pod<std::uint64_t>(os, window.begin);
    write_pod<std::uint64_t>(os, window.end);
    write_pod<std::uint64_t>(os, batch.n_tokens);
    write_pod<std::uint64_t>(os, batch.dim);
    os.write(reinterpret_cast<const char*>(batch.tokens.data()),
             static_cast<std::streamsize>(batch.tokens.size() * sizeof(double)));
    os.write(reinterpret_cast<const char*>(batch.attention.data()),
             static_cast<std::streamsize>(batch.attention.size() * sizeof(double)));
  }
  atomic_write_file(path, os.str());
}

std::vector<std::pair<FrameWindow, TokenBatch>> load_feature_shard(
    const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open feature shard: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "SFSH", 4) != 0)
    throw std::runtime_error("bad feature shard magic: " + path);
  const auto count = read_pod<std::uint64_t>(is);
  std::vector<std::pair<FrameWindow, TokenBatch>> clips(count);
  for (auto& [window, batch] : clips) {
    window.begin = static_cast<std::size_t>(read_pod<std::uint64_t>(is));
    window.end = static_cast<std::size_t>(read_pod<std::uint64_t>(is));
    batch.n_tokens = static_cast<std::size_t>(read_pod<std::uint64_t>(is));
    batch.dim = static_cast<std::size_t>(read_pod<std::uint64_t>(is));
    batch.tokens.resize(batch.n_tokens * batch.dim);
    batch.attention.resize(batch.n_tokens * batch.n_tokens);
    is.read(reinterpret_cast<char*>(batch.tokens.data()),
            static_cast<std::streamsize>(batch.tokens.size() * sizeof(double)));
    is.read(reinterpret_cast<char*>(batch.attention.data()),
            static_cast<std::streamsize>(batch.attention.size() * sizeof(double)));
    if (!is) throw std::runtime_error("truncated feature shard: " + path);
  }
  return clips;
}

}  // namespace surgfutr
