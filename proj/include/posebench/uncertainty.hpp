#ifndef POSEBENCH_UNCERTAINTY_HPP
#define POSEBENCH_UNCERTAINTY_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "posebench/error.hpp"
#include "posebench/geometry.hpp"
#include "posebench/scene_synth.hpp"

namespace posebench {

/// Error discretization. Level k (1-based) covers
/// [thresholds[k-2], thresholds[k-1]) scaled by resolution_scale, with an
/// implicit lower bound of 0 for level 1; the last threshold is +inf.
struct UncertaintyConfig {
  std::vector<double> thresholds{1.0, 3.0, 5.0, 10.0, std::numeric_limits<double>::infinity()};
  double resolution_scale = 1.0;

  int n_levels() const { return static_cast<int>(thresholds.size()); }

  /// Scaled upper bound of level k (1-based).
  double upper(int k) const {
    const double l = thresholds[k - 1];
    return std::isinf(l) ? l : l * resolution_scale;
  }
  double lower(int k) const { return k == 1 ? 0.0 : upper(k - 1); }

  void validate() const {
    if (thresholds.empty()) fail(ErrorCode::kInvalidParams, "no thresholds");
    if (!(resolution_scale > 0)) fail(ErrorCode::kInvalidParams, "resolution_scale must be positive");
    if (!std::isinf(thresholds.back()) || thresholds.back() < 0)
      fail(ErrorCode::kInvalidParams, "last threshold must be +inf");
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
      if (!(thresholds[i] > (i == 0 ? 0.0 : thresholds[i - 1])))
        fail(ErrorCode::kInvalidParams, "thresholds must be positive and strictly increasing");
    }
  }
};

struct LossWeights {
  double w_keypoint = 1.0;
  double w_vis = 5.0;
  double w_uncert = 5.0;
  double gamma = 0.8;
  int m_iters = 4;
};

/// Level y in [1, n_L] with lower(y) <= e < upper(y).
inline int label_error(double e, const UncertaintyConfig& cfg = {}) {
  if (!std::isfinite(e) || e < 0.0) fail(ErrorCode::kInvalidError, "error must be finite and >= 0");
  const int n = cfg.n_levels();
  for (int k = 1; k < n; ++k)
    if (e < cfg.upper(k)) return k;
  return n;
}

/// Numerically stable softmax (max-shifted).
inline std::vector<double> softmax_probs(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double zmax = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp(logits[k] - zmax);
    sum += p[k];
  }
  for (double& v : p) v /= sum;
  return p;
}

/// 1-based index of the largest logit; ties go to the lower level.
inline int argmax_level(std::span<const double> logits) {
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin()) + 1;
}

/// Inverse label frequency weights, normalized so the present classes
/// average to 1. Absent classes get weight 0.
inline std::vector<double> inverse_frequency_weights(std::span<const int> labels, int n_levels) {
  std::vector<double> counts(n_levels, 0.0);
  for (int y : labels) {
    if (y < 1 || y > n_levels) fail(ErrorCode::kInvalidLabel, "label out of range");
    counts[y - 1] += 1.0;
  }
  std::vector<double> w(n_levels, 0.0);
  int present = 0;
  double sum = 0.0;
  for (int k = 0; k < n_levels; ++k)
    if (counts[k] > 0) {
      w[k] = 1.0 / counts[k];
      sum += w[k];
      ++present;
    }
  for (double& v : w) v *= present / sum;
  return w;
}

/// Cross-entropy sum_i weight(y_i) * -log p_{i, y_i}. `probs` is row-major,
/// one distribution of `n_levels` entries per point.
inline double uncertainty_loss(std::span<const double> probs, std::span<const int> labels,
                               int n_levels,
                               std::optional<std::span<const double>> class_weights = std::nullopt) {
  if (n_levels <= 0 || probs.size() != labels.size() * static_cast<std::size_t>(n_levels))
    fail(ErrorCode::kShapeMismatch, "probabilities do not match labels");
  if (class_weights && class_weights->size() != static_cast<std::size_t>(n_levels))
    fail(ErrorCode::kShapeMismatch, "one class weight per level required");
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 1 || y > n_levels) fail(ErrorCode::kInvalidLabel, "label out of range");
    const double w = class_weights ? (*class_weights)[y - 1] : 1.0;
    loss += w * -std::log(probs[i * n_levels + (y - 1)]);
  }
  return loss;
}

/// Discounted L1 over refinement iterates:
/// sum_m gamma^(M-m) * sum_points |P_hat^(m) - P|_1.
inline double keypoint_loss(const std::vector<std::vector<Vec2>>& iterates,
                            const std::vector<Vec2>& gt, double gamma, int m_iters) {
  if (static_cast<int>(iterates.size()) != m_iters)
    fail(ErrorCode::kShapeMismatch, "expected one estimate per iteration");
  double loss = 0.0;
  for (int m = 1; m <= m_iters; ++m) {
    const auto& est = iterates[m - 1];
    if (est.size() != gt.size()) fail(ErrorCode::kShapeMismatch, "iterate and ground truth sizes differ");
    double l1 = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i) l1 += (est[i] - gt[i]).lpNorm<1>();
    loss += std::pow(gamma, m_iters - m) * l1;
  }
  return loss;
}

inline double total_loss(double kp, double vis, double unc, const LossWeights& w = {}) {
  return w.w_keypoint * kp + w.w_vis * vis + w.w_uncert * unc;
}

enum class SelectionStrategy { kNone, kByLevel, kByRanking };

inline std::string_view to_string(SelectionStrategy s) {
  switch (s) {
    case SelectionStrategy::kNone: return "none";
    case SelectionStrategy::kByLevel: return "by_level";
    case SelectionStrategy::kByRanking: return "by_ranking";
  }
  return "?";
}

inline SelectionStrategy selection_strategy_from_string(std::string_view s) {
  if (s == "none") return SelectionStrategy::kNone;
  if (s == "by_level") return SelectionStrategy::kByLevel;
  if (s == "by_ranking") return SelectionStrategy::kByRanking;
  fail(ErrorCode::kInvalidParams, "unknown selection strategy '" + std::string(s) + "'");
}

/// Per-frame kept track indices (positions in tracks.point_ids), ascending.
using KeptSet = std::vector<std::vector<int>>;

inline constexpr int kMinRankingKeep = 4;

/// Keeps visible observations, then filters per view by predicted level:
/// by_level drops the top (least reliable) level, by_ranking keeps the
/// max(4, floor(R * N_valid)) lowest-level observations (ties by point id).
inline KeptSet select_keypoints(const TrackSet& tracks, SelectionStrategy strategy,
                                double keep_ratio = 0.95) {
  if (strategy != SelectionStrategy::kNone && !tracks.logits)
    fail(ErrorCode::kInvalidParams, "selection by uncertainty needs logits");
  KeptSet kept(tracks.num_frames);
  for (int t = 0; t < tracks.num_frames; ++t) {
    std::vector<std::pair<int, int>> valid;  // (level, track index)
    for (std::size_t i = 0; i < tracks.num_points(); ++i) {
      if (!tracks.visible(t, i)) continue;
      const int level = strategy == SelectionStrategy::kNone ? 1 : argmax_level(tracks.logit(t, i));
      valid.emplace_back(level, static_cast<int>(i));
    }
    auto& out = kept[t];
    switch (strategy) {
      case SelectionStrategy::kNone:
        for (const auto& v : valid) out.push_back(v.second);
        break;
      case SelectionStrategy::kByLevel:
        for (const auto& v : valid)
          if (v.first != tracks.num_levels) out.push_back(v.second);
        break;
      case SelectionStrategy::kByRanking: {
        std::stable_sort(valid.begin(), valid.end(), [&](const auto& a, const auto& b) {
          if (a.first != b.first) return a.first < b.first;
          return tracks.point_ids[a.second] < tracks.point_ids[b.second];
        });
        const auto n_valid = static_cast<int>(valid.size());
        const int keep = std::min(
            n_valid, std::max(kMinRankingKeep,
                              static_cast<int>(std::floor(keep_ratio * n_valid + 1e-9))));
        for (int j = 0; j < keep; ++j) out.push_back(valid[j].second);
        break;
      }
    }
    std::sort(out.begin(), out.end());
  }
  return kept;
}

}  // namespace posebench

#endif  // POSEBENCH_UNCERTAINTY_HPP
