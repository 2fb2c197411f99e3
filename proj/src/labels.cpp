#include "surgfutr/labels.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "surgfutr/checkpoint.hpp"

namespace surgfutr {

namespace {

using nlohmann::json;

bool all_equal(const LabelMatrix& l, std::size_t begin, std::size_t end, std::size_t c,
               std::uint8_t v) {
  for (std::size_t t = begin; t <= end; ++t) {
    if (l.at(t, c) != v) return false;
  }
  return true;
}

}  // namespace

const char* state_change_name(StateChange s) {
  switch (s) {
    case StateChange::kContinuity: return "continuity";
    case StateChange::kDiscontinuity: return "discontinuity";
    case StateChange::kOnset: return "onset";
    case StateChange::kBackground: return "background";
  }
  return "?";
}

StateChange state_change_from_name(const std::string& name) {
  for (int s = 0; s < kNumStates; ++s) {
    if (name == state_change_name(static_cast<StateChange>(s)))
      return static_cast<StateChange>(s);
  }
  throw std::invalid_argument("unknown state-change name: " + name);
}

LabelMatrix LabelMatrix::time_reversed() const {
  LabelMatrix out = *this;
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t c = 0; c < classes; ++c) {
      out.at(t, c) = at(frames - 1 - t, c);
    }
  }
  return out;
}

void SamplerConfig::validate() const {
  if (stability_window == 0 || stride_present == 0 || stride_absent == 0 ||
      clip_duration == 0) {
    throw std::invalid_argument("sampler config fields must be strictly positive");
  }
}

std::vector<std::size_t> TransitionSet::all_sorted() const {
  std::vector<std::size_t> all;
  for (const auto& v : onsets) all.insert(all.end(), v.begin(), v.end());
  for (const auto& v : discontinuities) all.insert(all.end(), v.begin(), v.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  return all;
}

TransitionSet detect_transitions(const LabelMatrix& labels, const SamplerConfig& cfg) {
  cfg.validate();
  const std::size_t w = cfg.stability_window;
  struct Event {
    std::size_t t;
    std::size_t cls;
    bool is_onset;
  };
  std::vector<Event> events;
  if (labels.frames >= 2 * w) {
    for (std::size_t t = w; t + w <= labels.frames; ++t) {
      for (std::size_t c = 0; c < labels.classes; ++c) {
        const bool before_zero = all_equal(labels, t - w, t - 1, c, 0);
        const bool before_one = all_equal(labels, t - w, t - 1, c, 1);
        const bool after_one = all_equal(labels, t, t + w - 1, c, 1);
        const bool after_zero = all_equal(labels, t, t + w - 1, c, 0);
        if (before_zero && after_one) events.push_back({t, c, true});
        if (before_one && after_zero) events.push_back({t, c, false});
      }
    }
  }
  // Timestamp-level dedup: the later of two marks within w_f is dropped,
  // regardless of class or kind.
  std::vector<std::size_t> ts;
  for (const auto& e : events) ts.push_back(e.t);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  std::vector<std::size_t> kept;
  for (std::size_t t : ts) {
    if (kept.empty() || t - kept.back() > w) kept.push_back(t);
  }
  TransitionSet out;
  out.onsets.assign(labels.classes, {});
  out.discontinuities.assign(labels.classes, {});
  for (const auto& e : events) {
    if (!std::binary_search(kept.begin(), kept.end(), e.t)) continue;
    (e.is_onset ? out.onsets : out.discontinuities)[e.cls].push_back(e.t);
  }
  return out;
}

StableAnchors sample_stable(const LabelMatrix& labels, const SamplerConfig& cfg,
                            const TransitionSet& transitions) {
  cfg.validate();
  const std::size_t w = cfg.stability_window;
  const auto all_tr = transitions.all_sorted();
  const auto far_from_transitions = [&](std::size_t t) {
    for (std::size_t tr : all_tr) {
      const std::size_t gap = t > tr ? t - tr : tr - t;
      if (gap < w) return false;
    }
    return true;
  };

  StableAnchors out;
  const auto scan = [&](std::size_t stride, bool want_present,
                        std::vector<std::size_t>& dst) {
    for (std::size_t start = 0; start < labels.frames; start += stride) {
      const std::size_t stop = std::min(start + stride, labels.frames);
      for (std::size_t t = start; t < stop; ++t) {
        if (t < w || t + w >= labels.frames) continue;
        if (!far_from_transitions(t)) continue;
        bool ok = false;
        if (want_present) {
          for (std::size_t c = 0; c < labels.classes && !ok; ++c) {
            ok = all_equal(labels, t - w, t + w, c, 1);
          }
        } else {
          ok = true;
          for (std::size_t c = 0; c < labels.classes && ok; ++c) {
            ok = all_equal(labels, t - w, t + w, c, 0);
          }
        }
        if (ok) {
          dst.push_back(t);
          break;  // first qualifying timestamp per window
        }
      }
    }
  };
  scan(cfg.stride_present, true, out.continuity);
  scan(cfg.stride_absent, false, out.background);
  return out;
}

std::vector<ClipPair> generate_clip_pairs(const LabelMatrix& labels,
                                          const SamplerConfig& cfg) {
  cfg.validate();
  const auto transitions = detect_transitions(labels, cfg);
  const auto stable = sample_stable(labels, cfg, transitions);

  std::vector<std::size_t> anchors = transitions.all_sorted();
  anchors.insert(anchors.end(), stable.continuity.begin(), stable.continuity.end());
  anchors.insert(anchors.end(), stable.background.begin(), stable.background.end());
  std::sort(anchors.begin(), anchors.end());
  anchors.erase(std::unique(anchors.begin(), anchors.end()), anchors.end());

  std::vector<std::size_t> kept;
  for (std::size_t t : anchors) {
    if (kept.empty() || t - kept.back() > cfg.stability_window) kept.push_back(t);
  }

  const std::size_t d = cfg.clip_duration;
  std::vector<ClipPair> pairs;
  for (std::size_t t : kept) {
    if (t < d + 1) continue;                 // current window underflows
    if (t + d >= labels.frames) continue;    // future window overflows
    ClipPair p;
    p.video_id = labels.video_id;
    p.anchor = t;
    p.current = {t - d - 1, t - 1};
    p.future = {t, t + d};
    p.targets = derive_state_targets(labels, p);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

std::vector<StateChange> derive_state_targets(const LabelMatrix& labels,
                                              const ClipPair& pair) {
  if (pair.current.end >= labels.frames || pair.future.end >= labels.frames ||
      pair.current.begin > pair.current.end || pair.future.begin > pair.future.end) {
    throw std::invalid_argument("clip pair windows out of bounds");
  }
  std::vector<StateChange> targets(labels.classes);
  for (std::size_t c = 0; c < labels.classes; ++c) {
    const bool cur = !all_equal(labels, pair.current.begin, pair.current.end, c, 0);
    const bool fut = !all_equal(labels, pair.future.begin, pair.future.end, c, 0);
    if (cur && fut) targets[c] = StateChange::kContinuity;
    else if (cur && !fut) targets[c] = StateChange::kDiscontinuity;
    else if (!cur && fut) targets[c] = StateChange::kOnset;
    else targets[c] = StateChange::kBackground;
  }
  return targets;
}

LabelMatrix load_label_csv(const std::string& path, const std::string& video_id,
                           double fps) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open label CSV: " + path);
  LabelMatrix out;
  out.video_id = video_id;
  out.fps = fps;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty label CSV: " + path);
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.class_names.push_back(cell);
  }
  out.classes = out.class_names.size();
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      out.values.push_back(static_cast<std::uint8_t>(std::stoi(cell)));
      ++col;
    }
    if (col != out.classes) throw std::runtime_error("ragged label CSV row: " + path);
    ++out.frames;
  }
  return out;
}

void save_label_csv(const std::string& path, const LabelMatrix& labels) {
  std::ostringstream os;
  for (std::size_t c = 0; c < labels.classes; ++c) {
    if (c) os << ',';
    os << (c < labels.class_names.size() ? labels.class_names[c]
                                         : "class" + std::to_string(c));
  }
  os << '\n';
  for (std::size_t t = 0; t < labels.frames; ++t) {
    for (std::size_t c = 0; c < labels.classes; ++c) {
      if (c) os << ',';
      os << static_cast<int>(labels.at(t, c));
    }
    os << '\n';
  }
  atomic_write_file(path, os.str());
}

std::string clip_pairs_to_jsonl(const std::vector<ClipPair>& pairs) {
  std::ostringstream os;
  for (const auto& p : pairs) {
    json j;
    j["video_id"] = p.video_id;
    j["t"] = p.anchor;
    j["current"] = {p.current.begin, p.current.end};
    j["future"] = {p.future.begin, p.future.end};
    json targets = json::array();
    for (auto s : p.targets) targets.push_back(state_change_name(s));
    j["targets"] = std::move(targets);
    os << j.dump() << '\n';
  }
  return os.str();
}

std::vector<ClipPair> clip_pairs_from_jsonl(const std::string& text,
                                            std::size_t n_classes) {
  std::vector<ClipPair> pairs;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    ClipPair p;
    p.video_id = j.at("video_id").get<std::string>();
    p.anchor = j.at("t").get<std::size_t>();
    p.current = {j.at("current")[0].get<std::size_t>(), j.at("current")[1].get<std::size_t>()};
    p.future = {j.at("future")[0].get<std::size_t>(), j.at("future")[1].get<std::size_t>()};
    for (const auto& s : j.at("targets")) {
      p.targets.push_back(state_change_from_name(s.get<std::string>()));
    }
    if (p.targets.size() != n_classes) {
      throw std::runtime_error("clip pair target count does not match class count");
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace surgfutr
