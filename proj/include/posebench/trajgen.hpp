#ifndef POSEBENCH_TRAJGEN_HPP
#define POSEBENCH_TRAJGEN_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "posebench/error.hpp"
#include "posebench/geometry.hpp"
#include "posebench/random.hpp"

namespace posebench {

/// Time-ordered world-to-camera poses. The object frame is the world frame.
struct Trajectory {
  std::vector<Pose> poses;
  std::vector<std::int64_t> frame_indices;

  std::size_t size() const { return poses.size(); }

  std::vector<Vec3> centers() const {
    std::vector<Vec3> c;
    c.reserve(poses.size());
    for (const Pose& p : poses) c.push_back(p.center());
    return c;
  }

  /// Sub-trajectory at the given positions (not frame indices).
  Trajectory select(const std::vector<std::size_t>& positions) const {
    Trajectory out;
    for (std::size_t i : positions) {
      out.poses.push_back(poses.at(i));
      out.frame_indices.push_back(frame_indices.at(i));
    }
    return out;
  }

  void validate(double tol = 1e-9) const {
    if (poses.empty()) fail(ErrorCode::kInvalidParams, "empty trajectory");
    if (poses.size() != frame_indices.size())
      fail(ErrorCode::kInvalidParams, "pose and index counts differ");
    for (std::size_t i = 1; i < frame_indices.size(); ++i)
      if (frame_indices[i] <= frame_indices[i - 1])
        fail(ErrorCode::kInvalidParams, "frame indices must be strictly increasing");
    for (const Pose& p : poses)
      if (!p.is_valid(tol)) fail(ErrorCode::kInvalidPose, "pose rotation is not orthonormal");
  }
};

enum class TrajectoryMode { kRandomWalk, kCircling, kNoisyCircle, kImported };

inline std::string_view to_string(TrajectoryMode m) {
  switch (m) {
    case TrajectoryMode::kRandomWalk: return "random_walk";
    case TrajectoryMode::kCircling: return "circling";
    case TrajectoryMode::kNoisyCircle: return "noisy_circle";
    case TrajectoryMode::kImported: return "imported";
  }
  return "?";
}

inline TrajectoryMode trajectory_mode_from_string(std::string_view s) {
  if (s == "random_walk") return TrajectoryMode::kRandomWalk;
  if (s == "circling") return TrajectoryMode::kCircling;
  if (s == "noisy_circle") return TrajectoryMode::kNoisyCircle;
  if (s == "imported") return TrajectoryMode::kImported;
  fail(ErrorCode::kInvalidParams, "unknown trajectory mode '" + std::string(s) + "'");
}

struct TrajectoryParams {
  TrajectoryMode mode = TrajectoryMode::kCircling;
  int num_frames = 120;
  double step_sigma_t = 0.01;  // m
  double step_sigma_r = 2.0;   // deg
  double radius = 0.6;         // m
  std::pair<double, double> height_range{0.0, 0.4};
  double noise_sigma_t = 0.02;  // m
  double noise_sigma_r = 1.0;   // deg
  std::uint64_t seed = 0;

  void validate() const {
    if (num_frames < 2) fail(ErrorCode::kInvalidParams, "num_frames must be >= 2");
    if (step_sigma_t < 0 || step_sigma_r < 0 || noise_sigma_t < 0 || noise_sigma_r < 0)
      fail(ErrorCode::kInvalidParams, "sigmas must be non-negative");
    if (!(radius > 0)) fail(ErrorCode::kInvalidParams, "radius must be positive");
  }
};

namespace detail {

inline Trajectory indexed(std::vector<Pose> poses) {
  Trajectory t;
  t.frame_indices.resize(poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) t.frame_indices[i] = static_cast<std::int64_t>(i);
  t.poses = std::move(poses);
  return t;
}

inline Vec3 circle_center(const TrajectoryParams& p, int k) {
  const double theta = 2.0 * kPi * k / p.num_frames;
  const double s = static_cast<double>(k) / (p.num_frames - 1);
  const double h = p.height_range.first + (p.height_range.second - p.height_range.first) * s;
  return {p.radius * std::cos(theta), p.radius * std::sin(theta), h};
}

}  // namespace detail

/// Synthesizes one of the generated motion modes.
///
/// random_walk: the camera sits at (radius, 0, 0) looking at the origin. The
///   object starts at the origin and takes cumulative Gaussian steps: a
///   translation step with per-axis sigma step_sigma_t, and a rotation of
///   N(0, step_sigma_r) degrees about a uniformly random axis, composed on the
///   left (world frame) about the object's current position.
/// circling: the camera orbits the z axis at `radius` over one revolution,
///   height interpolated linearly over height_range, optical axis through the
///   origin.
/// noisy_circle: circling with Gaussian center noise (noise_sigma_t per axis)
///   and a Gaussian look-at perturbation (noise_sigma_r degrees per axis).
inline Trajectory generate_trajectory(const TrajectoryParams& params) {
  params.validate();
  Rng rng(params.seed);
  std::vector<Pose> poses;
  poses.reserve(params.num_frames);

  switch (params.mode) {
    case TrajectoryMode::kRandomWalk: {
      const Pose camera = look_at(Vec3(params.radius, 0.0, 0.0), Vec3::Zero());
      Pose object;  // object-to-world
      for (int k = 0; k < params.num_frames; ++k) {
        if (k > 0) {
          const Vec3 dt(rng.normal(0.0, params.step_sigma_t), rng.normal(0.0, params.step_sigma_t),
                        rng.normal(0.0, params.step_sigma_t));
          const Vec3 axis = rng.unit_vector();
          const double angle = deg2rad(rng.normal(0.0, params.step_sigma_r));
          object.rotation = exp_so3(axis * angle) * object.rotation;
          object.translation = object.translation + dt;
        }
        poses.push_back(camera * object);
      }
      break;
    }
    case TrajectoryMode::kCircling:
    case TrajectoryMode::kNoisyCircle: {
      const bool noisy = params.mode == TrajectoryMode::kNoisyCircle;
      for (int k = 0; k < params.num_frames; ++k) {
        Vec3 c = detail::circle_center(params, k);
        if (noisy) {
          const Vec3 dc(rng.normal(), rng.normal(), rng.normal());
          const Vec3 dr(rng.normal(), rng.normal(), rng.normal());
          if (params.noise_sigma_t > 0.0) c += params.noise_sigma_t * dc;
          Pose p = look_at(c, Vec3::Zero());
          if (params.noise_sigma_r > 0.0) {
            p.rotation = exp_so3(deg2rad(params.noise_sigma_r) * dr) * p.rotation;
            p.translation = -(p.rotation * c);
          }
          poses.push_back(p);
        } else {
          poses.push_back(look_at(c, Vec3::Zero()));
        }
      }
      break;
    }
    case TrajectoryMode::kImported:
      fail(ErrorCode::kInvalidParams, "imported trajectories are read with import_trajectory");
  }
  return detail::indexed(std::move(poses));
}

}  // namespace posebench

#endif  // POSEBENCH_TRAJGEN_HPP
