#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace surgfutr {

// Four-way state-change category for one class across a (current, future)
// window pair.
enum class StateChange : std::uint8_t {
  kContinuity = 0,     // 1 -> 1
  kDiscontinuity = 1,  // 1 -> 0
  kOnset = 2,          // 0 -> 1
  kBackground = 3,     // 0 -> 0
};

inline constexpr int kNumStates = 4;

const char* state_change_name(StateChange s);
StateChange state_change_from_name(const std::string& name);

// Frame-wise binary multi-label annotations for one procedure.
struct LabelMatrix {
  std::string video_id;
  std::size_t frames = 0;
  std::size_t classes = 0;
  std::vector<std::uint8_t> values;  // frames x classes, row-major
  double fps = 1.0;
  std::vector<std::string> class_names;

  std::uint8_t at(std::size_t t, std::size_t c) const { return values[t * classes + c]; }
  std::uint8_t& at(std::size_t t, std::size_t c) { return values[t * classes + c]; }

  LabelMatrix time_reversed() const;
};

struct SamplerConfig {
  std::size_t stability_window = 25;  // w_f, frames
  std::size_t stride_present = 10;    // t_s
  std::size_t stride_absent = 100;    // t_b
  std::size_t clip_duration = 3;      // d, frames per window minus one (see windows)
  std::size_t horizon = 3;            // delta, frames between windows (informational)

  void validate() const;
};

struct FrameWindow {
  std::size_t begin = 0;  // inclusive
  std::size_t end = 0;    // inclusive
};

struct ClipPair {
  std::string video_id;
  std::size_t anchor = 0;  // t
  FrameWindow current;     // [t-d-1, t-1]
  FrameWindow future;      // [t, t+d]
  std::vector<StateChange> targets;  // per class, filled by derive_state_targets
};

// Onset/discontinuity timestamps per class, post global w_f-dedup.
struct TransitionSet {
  std::vector<std::vector<std::size_t>> onsets;           // per class
  std::vector<std::vector<std::size_t>> discontinuities;  // per class

  std::vector<std::size_t> all_sorted() const;
};

struct StableAnchors {
  std::vector<std::size_t> continuity;
  std::vector<std::size_t> background;
};

// t is an onset for class c iff the w_f frames before t are all 0 and the w_f
// frames from t on are all 1; discontinuity is the mirror. Marked timestamps
// within w_f of an earlier marked timestamp (any class, either kind) are
// dropped.
TransitionSet detect_transitions(const LabelMatrix& labels, const SamplerConfig& cfg);

// One continuity anchor per stride_present window (some class constant 1 over
// [t-w_f, t+w_f] and t more than w_f away from every transition) and one
// background anchor per stride_absent window (all classes 0 there). The
// first qualifying timestamp in each window wins.
StableAnchors sample_stable(const LabelMatrix& labels, const SamplerConfig& cfg,
                            const TransitionSet& transitions);

// Merged + deduplicated anchors expanded into window pairs; out-of-bounds
// anchors discarded; output sorted by anchor and tagged with state targets.
std::vector<ClipPair> generate_clip_pairs(const LabelMatrix& labels,
                                          const SamplerConfig& cfg);

// Presence is OR-pooled over each window; the (current, future) presence pair
// maps onto the four categories.
std::vector<StateChange> derive_state_targets(const LabelMatrix& labels,
                                              const ClipPair& pair);

// CSV: header row of class names, one row of 0/1 per frame.
LabelMatrix load_label_csv(const std::string& path, const std::string& video_id,
                           double fps);
void save_label_csv(const std::string& path, const LabelMatrix& labels);

// JSONL, one object per clip pair.
std::string clip_pairs_to_jsonl(const std::vector<ClipPair>& pairs);
std::vector<ClipPair> clip_pairs_from_jsonl(const std::string& text,
                                            std::size_t n_classes);

}  // namespace surgfutr
