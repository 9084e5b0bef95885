#ifndef POSEBENCH_METRICS_HPP
#define POSEBENCH_METRICS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "posebench/error.hpp"
#include "posebench/geometry.hpp"
#include "posebench/sfm/bundle_adjust.hpp"
#include "posebench/trajgen.hpp"

namespace posebench {

enum class Metric { kTErr, kRErr, kAte, kRpeTrans, kRpeRot };

inline constexpr std::array<Metric, 5> kAllMetrics{Metric::kTErr, Metric::kRErr, Metric::kAte, Metric::kRpeTrans,
                                                   Metric::kRpeRot};

inline std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::kTErr: return "t_err";
    case Metric::kRErr: return "r_err";
    case Metric::kAte: return "ate";
    case Metric::kRpeTrans: return "rpe_trans";
    case Metric::kRpeRot: return "rpe_rot";
  }
  return "?";
}

inline Metric metric_from_string(std::string_view s) {
  for (Metric m : kAllMetrics)
    if (to_string(m) == s) return m;
  fail(ErrorCode::kInvalidParams, "unknown metric '" + std::string(s) + "'");
}

using ThresholdTable = std::map<Metric, std::vector<double>>;

/// t_err %, r_err deg/m, ATE m, RPE m, RPE deg.
inline ThresholdTable default_thresholds() {
  return {{Metric::kTErr, {10, 20, 30}},
          {Metric::kRErr, {30, 40, 50}},
          {Metric::kAte, {0.01, 0.03, 0.05}},
          {Metric::kRpeTrans, {0.01, 0.015, 0.025}},
          {Metric::kRpeRot, {1, 2, 3}}};
}

enum class RpeAggregate { kRmse, kMean };

struct WindowScore {
  bool registered = false;
  double t_err = 0.0;
  double r_err = 0.0;
  double ate = 0.0;
  double rpe_trans = 0.0;
  double rpe_rot = 0.0;
  SimilarityTransform alignment;
  std::string failure;  // empty when registered

  std::optional<double> value(Metric m) const {
    if (!registered) return std::nullopt;
    switch (m) {
      case Metric::kTErr: return t_err;
      case Metric::kRErr: return r_err;
      case Metric::kAte: return ate;
      case Metric::kRpeTrans: return rpe_trans;
      case Metric::kRpeRot: return rpe_rot;
    }
    return std::nullopt;
  }
};

/// 7-DoF alignment of the predicted camera centers onto the ground truth.
/// Rotations follow the same similarity so relative motion is preserved up
/// to scale.
inline std::pair<Trajectory, SimilarityTransform> align_trajectory(const Trajectory& pred, const Trajectory& gt) {
  if (pred.size() != gt.size()) fail(ErrorCode::kShapeMismatch, "trajectory lengths differ");
  const auto src = pred.centers();
  const auto dst = gt.centers();
  const SimilarityTransform s = umeyama_align(src, dst);
  Trajectory out = pred;
  for (std::size_t i = 0; i < out.size(); ++i) {
    Pose& p = out.poses[i];
    p.rotation = p.rotation * s.rotation.transpose();
    p.translation = -p.rotation * s.apply(src[i]);
  }
  return {out, s};
}

inline double ate_rmse(const Trajectory& aligned, const Trajectory& gt) {
  if (aligned.size() != gt.size() || gt.size() == 0) fail(ErrorCode::kShapeMismatch, "trajectory lengths differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) acc += (aligned.poses[i].center() - gt.poses[i].center()).squaredNorm();
  return std::sqrt(acc / static_cast<double>(gt.size()));
}

/// Relative-motion error between frames i and j, in camera-to-world terms:
/// E = (Q_i^-1 Q_j)^-1 (P_i^-1 P_j), Q ground truth, P prediction.
inline Pose relative_error(const Trajectory& pred, const Trajectory& gt, std::size_t i, std::size_t j) {
  // With world-to-camera W = Q^-1, Q_i^-1 Q_j = W_i W_j^-1.
  const Pose dq = gt.poses[i] * gt.poses[j].inverse();
  const Pose dp = pred.poses[i] * pred.poses[j].inverse();
  return dq.inverse() * dp;
}

struct RpeResult {
  double trans = 0.0;  // m
  double rot = 0.0;    // deg
};

inline RpeResult rpe(const Trajectory& pred, const Trajectory& gt, RpeAggregate agg = RpeAggregate::kRmse) {
  if (pred.size() != gt.size()) fail(ErrorCode::kShapeMismatch, "trajectory lengths differ");
  if (gt.size() < 2) fail(ErrorCode::kInvalidParams, "need >= 2 poses");
  RpeResult r;
  const double n = static_cast<double>(gt.size() - 1);
  for (std::size_t i = 0; i + 1 < gt.size(); ++i) {
    const Pose e = relative_error(pred, gt, i, i + 1);
    const double t = e.translation.norm();
    const double a = rotation_angle_deg(e);
    r.trans += agg == RpeAggregate::kRmse ? t * t : t;
    r.rot += agg == RpeAggregate::kRmse ? a * a : a;
  }
  r.trans /= n;
  r.rot /= n;
  if (agg == RpeAggregate::kRmse) {
    r.trans = std::sqrt(r.trans);
    r.rot = std::sqrt(r.rot);
  }
  return r;
}

struct DriftResult {
  double t_err = 0.0;  // percent
  double r_err = 0.0;  // deg per meter
  int samples = 0;
};

inline constexpr double kMinPathLength = 1e-4;

/// KITTI-style drift over sub-sequences covering 10%..100% of the ground
/// truth path length, every start frame. Each sample is normalized by the
/// ground-truth length of its own sub-sequence.
inline DriftResult kitti_drift(const Trajectory& pred, const Trajectory& gt, double min_length = kMinPathLength) {
  if (pred.size() != gt.size()) fail(ErrorCode::kShapeMismatch, "trajectory lengths differ");
  const std::size_t n = gt.size();
  std::vector<double> cum(n, 0.0);
  for (std::size_t i = 1; i < n; ++i)
    cum[i] = cum[i - 1] + (gt.poses[i].center() - gt.poses[i - 1].center()).norm();
  const double total = n ? cum.back() : 0.0;
  if (!(total > min_length)) fail(ErrorCode::kPathTooShort, "ground-truth path too short for drift metrics");

  DriftResult d;
  for (int step = 1; step <= 10; ++step) {
    const double target = total * static_cast<double>(step) / 10.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto it = std::lower_bound(cum.begin() + static_cast<std::ptrdiff_t>(i), cum.end(), cum[i] + target);
      if (it == cum.end()) break;  // later starts cannot reach the length either
      const auto j = static_cast<std::size_t>(it - cum.begin());
      const double len = cum[j] - cum[i];
      const Pose e = relative_error(pred, gt, i, j);
      d.t_err += 100.0 * e.translation.norm() / len;
      d.r_err += rotation_angle_deg(e) / len;
      ++d.samples;
    }
  }
  d.t_err /= d.samples;
  d.r_err /= d.samples;
  return d;
}

/// Fraction of all windows that are registered and score <= tau.
inline double ap_at_threshold(const std::vector<std::optional<double>>& values, double tau) {
  if (values.empty()) fail(ErrorCode::kInvalidParams, "no windows to aggregate");
  std::size_t hits = 0;
  for (const auto& v : values)
    if (v && *v <= tau) ++hits;
  return static_cast<double>(hits) / static_cast<double>(values.size());
}

inline Trajectory trajectory_from(const sfm::Reconstruction& recon, const Trajectory& gt) {
  Trajectory t;
  t.poses = recon.poses;
  t.frame_indices = gt.frame_indices;
  return t;
}

inline WindowScore score_trajectory(const Trajectory& pred, const Trajectory& gt,
                                    RpeAggregate agg = RpeAggregate::kRmse) {
  WindowScore s;
  try {
    const auto [aligned, sim] = align_trajectory(pred, gt);
    s.alignment = sim;
    s.ate = ate_rmse(aligned, gt);
    const auto r = rpe(aligned, gt, agg);
    s.rpe_trans = r.trans;
    s.rpe_rot = r.rot;
    const auto d = kitti_drift(aligned, gt);
    s.t_err = d.t_err;
    s.r_err = d.r_err;
    s.registered = true;
  } catch (const Error& e) {
    s = WindowScore{};
    s.failure = std::string(error_code_name(e.code()));
  }
  return s;
}

/// Scores a reconstruction against ground truth. Unregistered frames, or a
/// ground truth that cannot support alignment, mark the window failed.
inline WindowScore evaluate_window(const sfm::Reconstruction& recon, const Trajectory& gt,
                                   RpeAggregate agg = RpeAggregate::kRmse) {
  if (static_cast<std::size_t>(recon.num_frames()) != gt.size())
    fail(ErrorCode::kShapeMismatch, "reconstruction and ground truth lengths differ");
  if (!recon.all_registered()) {
    WindowScore s;
    s.failure = "Unregistered";
    return s;
  }
  return score_trajectory(trajectory_from(recon, gt), gt, agg);
}

struct ApEntry {
  std::string method;
  Metric metric = Metric::kAte;
  double threshold = 0.0;
  double ap = 0.0;
  std::size_t num_windows = 0;
  std::size_t num_failures = 0;
};

inline std::vector<ApEntry> ap_table(const std::string& method, const std::vector<WindowScore>& scores,
                                     const ThresholdTable& thresholds) {
  std::vector<ApEntry> out;
  std::size_t failures = 0;
  for (const auto& s : scores) failures += s.registered ? 0 : 1;
  for (const auto& [metric, taus] : thresholds) {
    std::vector<std::optional<double>> values;
    for (const auto& s : scores) values.push_back(s.value(metric));
    for (double tau : taus) out.push_back({method, metric, tau, ap_at_threshold(values, tau), scores.size(), failures});
  }
  return out;
}

}  // namespace posebench

#endif  // POSEBENCH_METRICS_HPP
