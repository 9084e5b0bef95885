#ifndef POSEBENCH_TRACKER_SIM_HPP
#define POSEBENCH_TRACKER_SIM_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "posebench/error.hpp"
#include "posebench/random.hpp"
#include "posebench/scene_synth.hpp"
#include "posebench/uncertainty.hpp"

namespace posebench {

enum class NoiseKind {
  kLevelInterval,  // latent per-track level, uniform magnitude within the level interval
  kGaussian,       // i.i.d. N(0, sigma^2) per axis; level is the label of the realized error
};

inline std::string_view to_string(NoiseKind k) {
  return k == NoiseKind::kGaussian ? "gaussian" : "level_interval";
}

inline NoiseKind noise_kind_from_string(std::string_view s) {
  if (s == "gaussian") return NoiseKind::kGaussian;
  if (s == "level_interval") return NoiseKind::kLevelInterval;
  fail(ErrorCode::kInvalidParams, "unknown noise kind '" + std::string(s) + "'");
}

struct NoiseProfile {
  NoiseKind kind = NoiseKind::kLevelInterval;
  std::vector<double> level_weights{1.0, 0.0, 0.0, 0.0, 0.0};
  UncertaintyConfig levels;
  double top_level_cap = 30.0;  // px
  /// Per-level [lo, hi) magnitude ranges; derived from `levels` when empty.
  std::vector<std::pair<double, double>> ranges;
  double gaussian_sigma = 1.0;  // px, kGaussian only
  double visibility_flip_prob = 0.0;
  double logit_sharpness = 10.0;
  double confusion_prob = 0.0;
  std::uint64_t seed = 0;

  int n_levels() const { return levels.n_levels(); }

  std::pair<double, double> range(int k) const {
    if (!ranges.empty()) return ranges.at(k - 1);
    const double hi = levels.upper(k);
    return {levels.lower(k), std::isinf(hi) ? top_level_cap : std::min(hi, top_level_cap)};
  }

  void validate() const {
    levels.validate();
    if (static_cast<int>(level_weights.size()) != n_levels())
      fail(ErrorCode::kInvalidParams, "one weight per level required");
    double sum = 0.0;
    for (double w : level_weights) {
      if (w < 0.0) fail(ErrorCode::kInvalidParams, "level weights must be non-negative");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12) fail(ErrorCode::kInvalidParams, "level weights must sum to 1");
    if (!ranges.empty() && static_cast<int>(ranges.size()) != n_levels())
      fail(ErrorCode::kInvalidParams, "one range per level required");
    for (int k = 1; k <= n_levels(); ++k) {
      const auto [lo, hi] = range(k);
      if (lo < 0.0 || hi < lo) fail(ErrorCode::kInvalidParams, "invalid error range");
    }
    if (!(logit_sharpness >= 0.0)) fail(ErrorCode::kInvalidParams, "sharpness must be >= 0");
    if (visibility_flip_prob < 0 || visibility_flip_prob > 1 || confusion_prob < 0 || confusion_prob > 1)
      fail(ErrorCode::kInvalidParams, "probabilities must lie in [0, 1]");
    if (gaussian_sigma < 0) fail(ErrorCode::kInvalidParams, "sigma must be >= 0");
  }
};

/// Single-level profile: every track is level `k`.
inline NoiseProfile single_level_profile(int k, std::uint64_t seed = 0) {
  NoiseProfile p;
  p.level_weights.assign(p.n_levels(), 0.0);
  p.level_weights.at(k - 1) = 1.0;
  p.seed = seed;
  return p;
}

inline NoiseProfile gaussian_profile(double sigma, std::uint64_t seed = 0) {
  NoiseProfile p;
  p.kind = NoiseKind::kGaussian;
  p.gaussian_sigma = sigma;
  p.seed = seed;
  return p;
}

/// Corrupts ground-truth tracks with level-calibrated noise. Records the
/// level of every observation in `levels` and flips visibility with
/// visibility_flip_prob (invisible observations only become visible when
/// their position is finite).
inline TrackSet corrupt_tracks(const TrackSet& gt, const NoiseProfile& profile) {
  profile.validate();
  TrackSet out = gt;
  out.num_levels = profile.n_levels();
  out.levels = std::vector<int>(gt.positions.size(), 1);
  out.logits.reset();
  Rng rng(profile.seed);

  std::vector<double> cumulative(profile.level_weights.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < cumulative.size(); ++k) cumulative[k] = acc += profile.level_weights[k];

  for (std::size_t i = 0; i < gt.num_points(); ++i) {
    int level = profile.n_levels();
    const double u = rng.uniform01();
    for (std::size_t k = 0; k < cumulative.size(); ++k)
      if (u < cumulative[k] && profile.level_weights[k] > 0.0) {
        level = static_cast<int>(k) + 1;
        break;
      }
    if (profile.level_weights[level - 1] == 0.0) {
      // u landed in the rounding gap above the last cumulative value.
      for (int k = profile.n_levels(); k >= 1; --k)
        if (profile.level_weights[k - 1] > 0.0) { level = k; break; }
    }
    const auto [lo, hi] = profile.range(level);

    for (int t = 0; t < gt.num_frames; ++t) {
      const std::size_t j = gt.index(t, i);
      Vec2 delta;
      if (profile.kind == NoiseKind::kLevelInterval) {
        const double angle = rng.uniform(0.0, 2.0 * kPi);
        const double mag = hi > lo ? rng.uniform(lo, hi) : lo;
        delta = Vec2(mag * std::cos(angle), mag * std::sin(angle));
        (*out.levels)[j] = level;
      } else {
        delta = Vec2(rng.normal(0.0, profile.gaussian_sigma), rng.normal(0.0, profile.gaussian_sigma));
        (*out.levels)[j] = label_error(delta.norm(), profile.levels);
      }
      const bool flip = rng.bernoulli(profile.visibility_flip_prob);
      if (!gt.positions[j].allFinite()) continue;
      out.positions[j] = gt.positions[j] + delta;
      if (flip) out.visibility[j] = out.visibility[j] ? 0 : 1;
    }
  }
  return out;
}

/// Synthetic classifier output: `sharpness` at the true level and 0
/// elsewhere; with probability confusion_prob the peak moves to a uniformly
/// chosen other level. Returned row-major, n_levels entries per observation.
inline std::vector<double> emit_logits(std::span<const int> levels, int n_levels, double sharpness,
                                       double confusion_prob, std::uint64_t seed) {
  std::vector<double> logits(levels.size() * static_cast<std::size_t>(n_levels), 0.0);
  Rng rng(seed);
  for (std::size_t j = 0; j < levels.size(); ++j) {
    const int y = levels[j];
    if (y < 1 || y > n_levels) fail(ErrorCode::kInvalidLabel, "level out of range");
    int peak = y;
    if (n_levels > 1 && rng.bernoulli(confusion_prob)) {
      const int other = static_cast<int>(rng.uniform_index(n_levels - 1)) + 1;
      peak = other >= y ? other + 1 : other;
    }
    logits[j * n_levels + (peak - 1)] = sharpness;
  }
  return logits;
}

/// Fills tracks.logits from tracks.levels.
inline void attach_logits(TrackSet& tracks, double sharpness, double confusion_prob,
                          std::uint64_t seed) {
  if (!tracks.levels) fail(ErrorCode::kInvalidParams, "track set has no levels");
  tracks.logits = emit_logits(*tracks.levels, tracks.num_levels, sharpness, confusion_prob, seed);
}

}  // namespace posebench

#endif  // POSEBENCH_TRACKER_SIM_HPP
