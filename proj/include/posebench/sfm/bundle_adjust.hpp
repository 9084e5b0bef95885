#ifndef POSEBENCH_SFM_BUNDLE_ADJUST_HPP
#define POSEBENCH_SFM_BUNDLE_ADJUST_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "posebench/error.hpp"
#include "posebench/geometry.hpp"

namespace posebench::sfm {

struct Observation {
  int point_id = 0;
  int frame = 0;
  Vec2 pixel;
  bool inlier = true;
};

/// Up-to-scale window reconstruction.
///
/// Gauge: `anchor_frame` is the identity pose and the translation of
/// `scale_frame` (the second camera of the initialization pair) has unit
/// norm. Frames with registered == 0 carry no meaningful pose.
struct Reconstruction {
  std::vector<Pose> poses;
  std::vector<std::uint8_t> registered;
  std::map<int, Point3> landmarks;
  std::vector<Observation> observations;
  double rmse = 0.0;  // px, over inlier observations
  int init_frame_a = 0;
  int init_frame_b = 1;
  int anchor_frame = 0;
  int scale_frame = 1;
  bool diverged = false;

  int num_frames() const { return static_cast<int>(poses.size()); }
  bool all_registered() const {
    return !registered.empty() &&
           std::all_of(registered.begin(), registered.end(), [](std::uint8_t r) { return r != 0; });
  }
  int num_registered() const {
    return static_cast<int>(std::count(registered.begin(), registered.end(), 1));
  }
};

struct BundleAdjustConfig {
  int max_iters = 100;
  double relative_decrease = 1e-10;
  double lambda_init = 1e-3;
  double lambda_max = 1e12;
  std::optional<double> huber_px;  // robust loss threshold, off by default
};

struct BundleAdjustSummary {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  int accepted_steps = 0;
  bool diverged = false;
};

namespace detail {

inline bool projectable(const Pose& p, const Point3& x, Vec2* px, const CameraIntrinsics& k) {
  const Vec3 xc = p.transform(x);
  if (!(xc.z() > kMinDepth)) return false;
  *px = Vec2(k.fx * xc.x() / xc.z() + k.cx, k.fy * xc.y() / xc.z() + k.cy);
  return true;
}

inline bool usable(const Reconstruction& r, const Observation& o) {
  return o.inlier && o.frame >= 0 && o.frame < r.num_frames() && r.registered[o.frame] &&
         r.landmarks.count(o.point_id) != 0;
}

inline double huber_weight(double err, const std::optional<double>& delta) {
  if (!delta || err <= *delta) return 1.0;
  return *delta / err;
}

/// Robustified cost. Infinite when any used point is behind its camera.
inline double cost(const Reconstruction& r, const CameraIntrinsics& k, const std::optional<double>& huber) {
  double c = 0.0;
  for (const auto& o : r.observations) {
    if (!usable(r, o)) continue;
    Vec2 px;
    if (!projectable(r.poses[o.frame], r.landmarks.at(o.point_id), &px, k))
      return std::numeric_limits<double>::infinity();
    const double e = (px - o.pixel).norm();
    if (!huber || e <= *huber) {
      c += e * e;
    } else {
      c += 2.0 * *huber * e - *huber * *huber;
    }
  }
  return c;
}

/// Orthonormal basis of the tangent plane of the unit sphere at t.
inline Eigen::Matrix<double, 3, 2> tangent_basis(const Vec3& t) {
  const Vec3 n = t.normalized();
  const Vec3 a = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 b1 = (a - a.dot(n) * n).normalized();
  Eigen::Matrix<double, 3, 2> b;
  b.col(0) = b1;
  b.col(1) = n.cross(b1);
  return b;
}

}  // namespace detail

/// Sum of squared pixel reprojection errors over inlier observations.
inline double reprojection_cost(const Reconstruction& r, const CameraIntrinsics& k) {
  return detail::cost(r, k, std::nullopt);
}

inline double reprojection_rmse(const Reconstruction& r, const CameraIntrinsics& k) {
  std::size_t n = 0;
  for (const auto& o : r.observations) n += detail::usable(r, o) ? 1 : 0;
  if (n == 0) return 0.0;
  return std::sqrt(reprojection_cost(r, k) / static_cast<double>(n));
}

/// Levenberg-Marquardt over all registered poses and landmarks, with the
/// anchor frame fixed and the scale frame's translation kept on the unit
/// sphere. The camera block is solved through the Schur complement of the
/// landmark blocks. Never returns a higher cost than it was given; when no
/// step can reduce a non-stationary cost the input comes back unchanged
/// with `diverged` set.
inline Reconstruction bundle_adjust(const Reconstruction& input, const CameraIntrinsics& k,
                                    const BundleAdjustConfig& cfg = {},
                                    BundleAdjustSummary* summary = nullptr) {
  Reconstruction rec = input;
  rec.diverged = false;
  const int nf = rec.num_frames();

  // Camera parameter layout.
  std::vector<int> cam_offset(nf, -1), cam_dim(nf, 0);
  int ncam = 0;
  for (int f = 0; f < nf; ++f) {
    if (!rec.registered[f] || f == rec.anchor_frame) continue;
    cam_offset[f] = ncam;
    cam_dim[f] = f == rec.scale_frame ? 5 : 6;
    ncam += cam_dim[f];
  }

  // Observations grouped by landmark.
  std::map<int, std::vector<int>> by_point;
  for (int i = 0; i < static_cast<int>(rec.observations.size()); ++i)
    if (detail::usable(rec, rec.observations[i])) by_point[rec.observations[i].point_id].push_back(i);

  BundleAdjustSummary sum;
  double cost = detail::cost(rec, k, cfg.huber_px);
  sum.initial_cost = cost;
  double lambda = cfg.lambda_init;
  bool stationary = false;
  double first_grad = 0.0;

  using Mat23 = Eigen::Matrix<double, 2, 3>;
  using MatC3 = Eigen::Matrix<double, Eigen::Dynamic, 3>;

  for (int it = 0; it < cfg.max_iters && std::isfinite(cost) && cost > 1e-28; ++it) {
    sum.iterations = it + 1;
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(ncam, ncam);
    Eigen::VectorXd gc = Eigen::VectorXd::Zero(ncam);
    struct PointBlock {
      int id;
      Mat3 v = Mat3::Zero();
      Vec3 g = Vec3::Zero();
      std::vector<std::pair<int, MatC3>> w;  // (frame, J_c^T J_p) rows = cam_dim
    };
    std::vector<PointBlock> blocks;
    blocks.reserve(by_point.size());
    std::vector<Eigen::Matrix<double, 3, 2>> bases(nf);
    for (int f = 0; f < nf; ++f)
      if (cam_dim[f] == 5) bases[f] = detail::tangent_basis(rec.poses[f].translation);

    double grad_max = 0.0;
    for (const auto& [pid, obs_idx] : by_point) {
      PointBlock pb;
      pb.id = pid;
      const Point3& x = rec.landmarks.at(pid);
      for (int oi : obs_idx) {
        const auto& o = rec.observations[oi];
        const Pose& p = rec.poses[o.frame];
        const Vec3 xc = p.transform(x);
        const double iz = 1.0 / xc.z();
        const Vec2 r(k.fx * xc.x() * iz + k.cx - o.pixel.x(), k.fy * xc.y() * iz + k.cy - o.pixel.y());
        const double w = detail::huber_weight(r.norm(), cfg.huber_px);
        Mat23 dp;
        dp << k.fx * iz, 0.0, -k.fx * xc.x() * iz * iz, 0.0, k.fy * iz, -k.fy * xc.y() * iz * iz;
        const Mat23 jp = dp * p.rotation;
        pb.v += w * jp.transpose() * jp;
        pb.g -= w * jp.transpose() * r;
        const int off = cam_offset[o.frame];
        if (off < 0) continue;
        const int d = cam_dim[o.frame];
        Eigen::Matrix<double, 2, Eigen::Dynamic> jc(2, d);
        jc.leftCols<3>() = -dp * skew(p.rotation * x);
        if (d == 6) {
          jc.rightCols<3>() = dp;
        } else {
          jc.rightCols<2>() = dp * bases[o.frame];
        }
        u.block(off, off, d, d) += w * jc.transpose() * jc;
        gc.segment(off, d) -= w * jc.transpose() * r;
        pb.w.emplace_back(o.frame, w * jc.transpose() * jp);
      }
      grad_max = std::max(grad_max, pb.g.cwiseAbs().maxCoeff());
      blocks.push_back(std::move(pb));
    }
    if (ncam > 0) grad_max = std::max(grad_max, gc.cwiseAbs().maxCoeff());
    if (it == 0) first_grad = grad_max;
    if (grad_max <= 1e-12 * std::max(1.0, std::sqrt(cost))) {
      stationary = true;
      break;
    }

    bool accepted = false;
    while (lambda <= cfg.lambda_max) {
      // Damped reduced camera system.
      Eigen::MatrixXd s = u;
      s.diagonal() += lambda * u.diagonal().cwiseMax(1e-9);
      Eigen::VectorXd rhs = gc;
      std::vector<Mat3> v_inv(blocks.size());
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        Mat3 v = blocks[b].v;
        v.diagonal() += lambda * blocks[b].v.diagonal().cwiseMax(1e-9);
        v_inv[b] = v.inverse();
        const auto& w = blocks[b].w;
        for (std::size_t i = 0; i < w.size(); ++i) {
          const int fi = w[i].first;
          const MatC3 wv = w[i].second * v_inv[b];
          rhs.segment(cam_offset[fi], cam_dim[fi]) -= wv * blocks[b].g;
          for (std::size_t j = 0; j < w.size(); ++j) {
            const int fj = w[j].first;
            s.block(cam_offset[fi], cam_offset[fj], cam_dim[fi], cam_dim[fj]) -=
                wv * w[j].second.transpose();
          }
        }
      }
      Eigen::VectorXd dc = Eigen::VectorXd::Zero(ncam);
      if (ncam > 0) dc = s.ldlt().solve(rhs);

      Reconstruction cand = rec;
      for (int f = 0; f < nf; ++f) {
        const int off = cam_offset[f];
        if (off < 0) continue;
        Pose& p = cand.poses[f];
        p.rotation = exp_so3(dc.segment<3>(off)) * p.rotation;
        if (cam_dim[f] == 6) {
          p.translation += dc.segment<3>(off + 3);
        } else {
          p.translation = (p.translation + bases[f] * dc.segment<2>(off + 3)).normalized();
        }
      }
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        Vec3 g = blocks[b].g;
        for (const auto& [f, w] : blocks[b].w) g -= w.transpose() * dc.segment(cam_offset[f], cam_dim[f]);
        cand.landmarks[blocks[b].id] += v_inv[b] * g;
      }
      const double c = dc.allFinite() ? detail::cost(cand, k, cfg.huber_px)
                                      : std::numeric_limits<double>::infinity();
      if (c < cost) {
        const double rel = (cost - c) / cost;
        rec = std::move(cand);
        cost = c;
        lambda = std::max(lambda * 0.1, 1e-15);
        accepted = true;
        ++sum.accepted_steps;
        if (rel < cfg.relative_decrease) it = cfg.max_iters;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) break;
  }

  // A step that cannot be made at a clearly non-stationary point means the
  // linearization is unusable; report instead of returning a guess.
  if (sum.accepted_steps == 0 && !stationary && std::isfinite(cost) && cost > 1e-28 &&
      sum.iterations > 0 && first_grad > 1e-6 * std::max(1.0, std::sqrt(cost))) {
    rec = input;
    rec.diverged = true;
    sum.diverged = true;
  }
  sum.final_cost = detail::cost(rec, k, cfg.huber_px);
  rec.rmse = reprojection_rmse(rec, k);
  if (summary) *summary = sum;
  return rec;
}

}  // namespace posebench::sfm

#endif  // POSEBENCH_SFM_BUNDLE_ADJUST_HPP
