#ifndef POSEBENCH_SFM_PNP_HPP
#define POSEBENCH_SFM_PNP_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/SVD>

#include "posebench/error.hpp"
#include "posebench/geometry.hpp"
#include "posebench/random.hpp"
#include "posebench/sfm/two_view.hpp"

namespace posebench::sfm {

struct PnpConfig {
  double reproj_px = 2.0;
  double confidence = 0.999;
  int min_iters = 16;
  int max_iters = 1000;
  double min_inlier_ratio = 0.3;
  int refine_iters = 30;
  std::uint64_t seed = 0;
};

struct PnpEstimate {
  Pose pose;
  std::vector<int> inliers;
};

inline constexpr int kPnpMinimalSample = 6;

/// Linear pose from >= 6 2D-3D matches given in normalized image
/// coordinates. Throws NoConsensus when the design matrix has more than a
/// one-dimensional null space (collinear or coplanar points).
inline Pose pnp_dlt(std::span<const Point3> points, std::span<const Vec2> xn) {
  const auto n = static_cast<Eigen::Index>(points.size());
  if (n < kPnpMinimalSample || points.size() != xn.size())
    fail(ErrorCode::kInsufficientPoints, "DLT pose needs >= 6 matches");
  Vec3 c = Vec3::Zero();
  for (const auto& p : points) c += p;
  c /= static_cast<double>(n);
  double d = 0.0;
  for (const auto& p : points) d += (p - c).norm();
  d /= static_cast<double>(n);
  if (!(d > 0.0)) fail(ErrorCode::kNoConsensus, "coincident 3D points");
  const double s3 = d / std::sqrt(3.0);

  Eigen::Matrix<double, Eigen::Dynamic, 12> a(2 * n, 12);
  a.setZero();
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3 xw = (points[i] - c) / s3;
    const Eigen::Vector4d h(xw.x(), xw.y(), xw.z(), 1.0);
    a.block<1, 4>(2 * i, 0) = h.transpose();
    a.block<1, 4>(2 * i, 8) = -xn[i].x() * h.transpose();
    a.block<1, 4>(2 * i + 1, 4) = h.transpose();
    a.block<1, 4>(2 * i + 1, 8) = -xn[i].y() * h.transpose();
  }
  Eigen::Matrix<double, 12, 1> sol;
  Eigen::Matrix<double, 12, 1> sv;
  if (a.rows() < 12) {
    fail(ErrorCode::kInsufficientPoints, "DLT pose needs >= 6 matches");
  } else {
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinV);
    sv = svd.singularValues();
    sol = svd.matrixV().col(11);
  }
  if (!(sv(10) > 1e-8 * sv(0))) fail(ErrorCode::kNoConsensus, "degenerate 3D configuration");

  Eigen::Matrix<double, 3, 4> p;
  p << sol(0), sol(1), sol(2), sol(3), sol(4), sol(5), sol(6), sol(7), sol(8), sol(9), sol(10), sol(11);
  Mat3 m = p.leftCols<3>();
  if (m.determinant() < 0.0) {
    p = -p;
    m = -m;
  }
  const Eigen::JacobiSVD<Mat3> msvd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double scale = msvd.singularValues().mean();
  if (!(scale > 0.0)) fail(ErrorCode::kNoConsensus, "degenerate DLT solution");
  Pose pose;
  pose.rotation = msvd.matrixU() * msvd.matrixV().transpose();
  pose.translation = s3 * p.col(3) / scale - pose.rotation * c;
  return pose;
}

inline double reprojection_error(const Pose& pose, const Point3& x, const Vec2& px,
                                 const CameraIntrinsics& k) {
  const Vec3 xc = pose.transform(x);
  if (!(xc.z() > kMinDepth)) return std::numeric_limits<double>::infinity();
  return (Vec2(k.fx * xc.x() / xc.z() + k.cx, k.fy * xc.y() / xc.z() + k.cy) - px).norm();
}

/// Levenberg-Marquardt on pixel reprojection error over the 6 pose
/// parameters (left-multiplied rotation increment, translation).
inline Pose refine_pose(const Pose& init, std::span<const Point3> points, std::span<const Vec2> pixels,
                        const CameraIntrinsics& k, int max_iters = 30) {
  using Mat6 = Eigen::Matrix<double, 6, 6>;
  using Vec6 = Eigen::Matrix<double, 6, 1>;
  auto cost_of = [&](const Pose& p) {
    double c = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const Vec3 xc = p.transform(points[i]);
      if (!(xc.z() > kMinDepth)) return std::numeric_limits<double>::infinity();
      c += (Vec2(k.fx * xc.x() / xc.z() + k.cx, k.fy * xc.y() / xc.z() + k.cy) - pixels[i]).squaredNorm();
    }
    return c;
  };
  Pose pose = init;
  double cost = cost_of(pose);
  double lambda = 1e-4;
  for (int it = 0; it < max_iters && cost > 0.0; ++it) {
    Mat6 h = Mat6::Zero();
    Vec6 g = Vec6::Zero();
    for (std::size_t i = 0; i < points.size(); ++i) {
      const Vec3 xc = pose.transform(points[i]);
      const double iz = 1.0 / xc.z();
      const Vec2 r(k.fx * xc.x() * iz + k.cx - pixels[i].x(), k.fy * xc.y() * iz + k.cy - pixels[i].y());
      Eigen::Matrix<double, 2, 3> dp;
      dp << k.fx * iz, 0.0, -k.fx * xc.x() * iz * iz, 0.0, k.fy * iz, -k.fy * xc.y() * iz * iz;
      Eigen::Matrix<double, 2, 6> j;
      j.leftCols<3>() = -dp * skew(pose.rotation * points[i]);
      j.rightCols<3>() = dp;
      h += j.transpose() * j;
      g -= j.transpose() * r;
    }
    bool improved = false;
    while (lambda < 1e12) {
      Mat6 ha = h;
      ha.diagonal() += lambda * h.diagonal().cwiseMax(1e-12);
      const Vec6 d = ha.ldlt().solve(g);
      Pose cand;
      cand.rotation = exp_so3(d.head<3>()) * pose.rotation;
      cand.translation = pose.translation + d.tail<3>();
      const double c = cost_of(cand);
      if (c < cost) {
        const double rel = (cost - c) / cost;
        pose = cand;
        cost = c;
        lambda = std::max(lambda * 0.1, 1e-12);
        improved = true;
        if (rel < 1e-14) return pose;
        break;
      }
      lambda *= 10.0;
    }
    if (!improved) break;
  }
  return pose;
}

/// RANSAC over minimal 6-point DLT samples, then DLT + LM on the consensus
/// set. Inliers have reprojection error below cfg.reproj_px.
inline PnpEstimate register_view_pnp(std::span<const Point3> points, std::span<const Vec2> pixels,
                                     const CameraIntrinsics& k, const PnpConfig& cfg = {}) {
  const int n = static_cast<int>(points.size());
  if (n < kPnpMinimalSample || points.size() != pixels.size())
    fail(ErrorCode::kInsufficientPoints, "pose registration needs >= 6 2D-3D matches");
  std::vector<Vec2> xn(n);
  for (int i = 0; i < n; ++i) xn[i] = k.normalize(pixels[i]);

  auto inliers_of = [&](const Pose& p) {
    std::vector<int> in;
    for (int i = 0; i < n; ++i)
      if (reprojection_error(p, points[i], pixels[i], k) < cfg.reproj_px) in.push_back(i);
    return in;
  };

  Rng rng(cfg.seed);
  PnpEstimate best;
  bool have = false;
  int iters = cfg.max_iters;
  std::vector<Point3> sp(kPnpMinimalSample);
  std::vector<Vec2> sx(kPnpMinimalSample);
  for (int it = 0; it < iters; ++it) {
    const auto s = sample_indices(rng, n, kPnpMinimalSample);
    for (int j = 0; j < kPnpMinimalSample; ++j) {
      sp[j] = points[s[j]];
      sx[j] = xn[s[j]];
    }
    Pose p;
    try {
      p = pnp_dlt(sp, sx);
    } catch (const Error&) {
      continue;
    }
    auto in = inliers_of(p);
    if (!have || in.size() > best.inliers.size()) {
      have = true;
      best.pose = p;
      best.inliers = std::move(in);
      iters = ransac_iterations(static_cast<double>(best.inliers.size()) / n, kPnpMinimalSample,
                                cfg.confidence, cfg.min_iters, cfg.max_iters);
    }
  }
  if (!have) fail(ErrorCode::kNoConsensus, "no non-degenerate minimal sample");

  for (int round = 0; round < 3 && static_cast<int>(best.inliers.size()) >= kPnpMinimalSample; ++round) {
    std::vector<Point3> ip;
    std::vector<Vec2> ix, ipx;
    for (int i : best.inliers) {
      ip.push_back(points[i]);
      ix.push_back(xn[i]);
      ipx.push_back(pixels[i]);
    }
    Pose p = best.pose;
    try {
      p = pnp_dlt(ip, ix);
    } catch (const Error&) {
    }
    // Keep whichever start reprojects better before refining.
    const auto score = [&](const Pose& q) {
      double c = 0.0;
      for (std::size_t i = 0; i < ip.size(); ++i) c += std::min(reprojection_error(q, ip[i], ipx[i], k), 1e6);
      return c;
    };
    if (score(best.pose) < score(p)) p = best.pose;
    p = refine_pose(p, ip, ipx, k, cfg.refine_iters);
    auto in = inliers_of(p);
    if (in.size() < best.inliers.size()) break;
    const bool same = in == best.inliers;
    best.pose = p;
    best.inliers = std::move(in);
    if (same) break;
  }
  if (static_cast<int>(best.inliers.size()) < kPnpMinimalSample ||
      static_cast<double>(best.inliers.size()) < cfg.min_inlier_ratio * n)
    fail(ErrorCode::kNoConsensus, "pose has too little support");
  return best;
}

}  // namespace posebench::sfm

#endif  // POSEBENCH_SFM_PNP_HPP
