#ifndef POSEBENCH_KEYFRAME_HPP
#define POSEBENCH_KEYFRAME_HPP

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "posebench/error.hpp"
#include "posebench/random.hpp"
#include "posebench/scene_synth.hpp"

namespace posebench {

enum class ScaleReducer { kMax, kMean };

inline std::string_view to_string(ScaleReducer r) { return r == ScaleReducer::kMean ? "mean" : "max"; }

inline ScaleReducer scale_reducer_from_string(std::string_view s) {
  if (s == "max") return ScaleReducer::kMax;
  if (s == "mean") return ScaleReducer::kMean;
  fail(ErrorCode::kInvalidParams, "unknown scale reducer '" + std::string(s) + "'");
}

struct MotionGateConfig {
  double t_dis = 2.0;    // px
  double t_scale = 1.3;  // ratio
  int window_len = 8;
  int probe_grid = 50;  // px, spacing of probe points sampled on the reference mask
  /// Compare against the previous raw frame instead of the last keyframe.
  bool strict_adjacent = false;
  ScaleReducer reducer = ScaleReducer::kMax;
  int max_scale_probes = 32;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(t_dis > 0.0)) fail(ErrorCode::kInvalidParams, "t_dis must be > 0");
    if (!(t_scale > 1.0)) fail(ErrorCode::kInvalidParams, "t_scale must be > 1");
    if (window_len < 2) fail(ErrorCode::kInvalidParams, "window_len must be >= 2");
    if (probe_grid < 1 || max_scale_probes < 2) fail(ErrorCode::kInvalidParams, "invalid probe settings");
  }
};

enum class GateReason { kFirst, kDisplacement, kScale };

struct GateDecision {
  int frame = 0;
  GateReason reason = GateReason::kFirst;
  double mean_displacement = 0.0;
  double scale_ratio = 1.0;
};

namespace detail {

struct MotionMeasure {
  double mean_displacement = 0.0;
  double scale_ratio = 1.0;  // >= 1; 1 when fewer than two shared probes
};

inline MotionMeasure measure_motion(const TrackSet& probes, int ref, int cur, const MotionGateConfig& cfg) {
  std::vector<std::size_t> shared;
  for (std::size_t i = 0; i < probes.num_points(); ++i)
    if (probes.visible(ref, i) && probes.visible(cur, i)) shared.push_back(i);
  MotionMeasure m;
  if (shared.empty()) return m;
  for (std::size_t i : shared) m.mean_displacement += (probes.position(cur, i) - probes.position(ref, i)).norm();
  m.mean_displacement /= static_cast<double>(shared.size());

  if (shared.size() > static_cast<std::size_t>(cfg.max_scale_probes)) {
    // Seeded per frame pair so the subset does not depend on call order.
    Rng rng(derive_seed(cfg.seed, (static_cast<std::uint64_t>(ref) << 32) | static_cast<std::uint32_t>(cur)));
    for (std::size_t j = 0; j < static_cast<std::size_t>(cfg.max_scale_probes); ++j)
      std::swap(shared[j], shared[j + rng.uniform_index(shared.size() - j)]);
    shared.resize(cfg.max_scale_probes);
    std::sort(shared.begin(), shared.end());
  }
  double acc = 0.0, worst = 1.0;
  int pairs = 0;
  for (std::size_t a = 0; a < shared.size(); ++a)
    for (std::size_t b = a + 1; b < shared.size(); ++b) {
      const double d_ref = (probes.position(ref, shared[a]) - probes.position(ref, shared[b])).norm();
      const double d_cur = (probes.position(cur, shared[a]) - probes.position(cur, shared[b])).norm();
      if (!(d_ref > 1e-9) || !(d_cur > 1e-9)) continue;
      const double r = std::max(d_cur / d_ref, d_ref / d_cur);
      worst = std::max(worst, r);
      acc += r;
      ++pairs;
    }
  if (pairs > 0) m.scale_ratio = cfg.reducer == ScaleReducer::kMax ? worst : acc / pairs;
  return m;
}

}  // namespace detail

/// Accept/reject decision for every accepted frame, in order. Frame 0 is
/// always accepted; a later frame is accepted when its probes moved more
/// than t_dis on average or some probe-pair distance changed by more than
/// t_scale, measured against the last keyframe (or the previous frame in
/// strict-adjacent mode).
inline std::vector<GateDecision> gate_frames_detailed(const TrackSet& probes, const MotionGateConfig& cfg = {}) {
  cfg.validate();
  std::vector<GateDecision> out;
  if (probes.num_frames < 1) return out;
  out.push_back({0, GateReason::kFirst, 0.0, 1.0});
  int last = 0;
  for (int t = 1; t < probes.num_frames; ++t) {
    const int ref = cfg.strict_adjacent ? t - 1 : last;
    const auto m = detail::measure_motion(probes, ref, t, cfg);
    if (m.mean_displacement > cfg.t_dis) {
      out.push_back({t, GateReason::kDisplacement, m.mean_displacement, m.scale_ratio});
      last = t;
    } else if (m.scale_ratio > cfg.t_scale) {
      out.push_back({t, GateReason::kScale, m.mean_displacement, m.scale_ratio});
      last = t;
    }
  }
  return out;
}

inline std::vector<int> gate_frames(const TrackSet& probes, const MotionGateConfig& cfg = {}) {
  std::vector<int> idx;
  for (const auto& d : gate_frames_detailed(probes, cfg)) idx.push_back(d.frame);
  return idx;
}

/// Consecutive disjoint windows of exactly window_len keyframes; the
/// remainder is dropped.
inline std::vector<std::vector<int>> chop_windows(const std::vector<int>& keyframes, int window_len = 8) {
  if (window_len < 1) fail(ErrorCode::kInvalidParams, "window_len must be >= 1");
  if (static_cast<int>(keyframes.size()) < window_len)
    fail(ErrorCode::kInsufficientFrames, "fewer keyframes than one window");
  std::vector<std::vector<int>> windows;
  for (std::size_t s = 0; s + window_len <= keyframes.size(); s += window_len)
    windows.emplace_back(keyframes.begin() + static_cast<std::ptrdiff_t>(s),
                         keyframes.begin() + static_cast<std::ptrdiff_t>(s + window_len));
  return windows;
}

}  // namespace posebench

#endif  // POSEBENCH_KEYFRAME_HPP
