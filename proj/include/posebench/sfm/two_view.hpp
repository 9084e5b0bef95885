#ifndef POSEBENCH_SFM_TWO_VIEW_HPP
#define POSEBENCH_SFM_TWO_VIEW_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "posebench/error.hpp"
#include "posebench/geometry.hpp"
#include "posebench/random.hpp"

namespace posebench::sfm {

/// One track observed in two frames of a window.
struct Correspondence {
  int point_id = 0;
  int track = 0;  // index into TrackSet::point_ids
  int frame_a = 0;
  int frame_b = 0;
  Vec2 pixel_a;
  Vec2 pixel_b;
};

struct RansacConfig {
  double sampson_px = 1.5;
  double confidence = 0.999;
  int min_iters = 16;
  int max_iters = 2000;
  int min_inliers = 12;
  double min_inlier_ratio = 0.3;
  std::uint64_t seed = 0;
};

struct EssentialEstimate {
  Mat3 essential;
  std::vector<int> inliers;  // indices into the input correspondences
};

namespace detail {

/// Similarity normalizing 2D points to centroid 0 and mean distance √2.
inline Mat3 hartley_normalization(std::span<const Vec2> pts) {
  Vec2 c = Vec2::Zero();
  for (const Vec2& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double d = 0.0;
  for (const Vec2& p : pts) d += (p - c).norm();
  d /= static_cast<double>(pts.size());
  const double s = d > 0.0 ? std::sqrt(2.0) / d : 1.0;
  Mat3 t;
  t << s, 0.0, -s * c.x(), 0.0, s, -s * c.y(), 0.0, 0.0, 1.0;
  return t;
}

inline Vec3 homogeneous(const Vec2& p) { return {p.x(), p.y(), 1.0}; }

/// Projects onto the essential manifold: singular values (1, 1, 0) scaled.
inline Mat3 project_to_essential(const Mat3& f) {
  const Eigen::JacobiSVD<Mat3> svd(f, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double s = 0.5 * (svd.singularValues()(0) + svd.singularValues()(1));
  return svd.matrixU() * Vec3(s, s, 0.0).asDiagonal() * svd.matrixV().transpose();
}

}  // namespace detail

/// Normalized 8-point algorithm on normalized image coordinates, with
/// x_b^T E x_a = 0. Needs >= 8 pairs.
inline Mat3 eight_point(std::span<const Vec2> xa, std::span<const Vec2> xb) {
  if (xa.size() < 8 || xa.size() != xb.size())
    fail(ErrorCode::kInsufficientPoints, "eight-point needs >= 8 pairs");
  const Mat3 ta = detail::hartley_normalization(xa);
  const Mat3 tb = detail::hartley_normalization(xb);
  Eigen::MatrixXd a(xa.size(), 9);
  for (std::size_t i = 0; i < xa.size(); ++i) {
    const Vec3 pa = ta * detail::homogeneous(xa[i]);
    const Vec3 pb = tb * detail::homogeneous(xb[i]);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) a(static_cast<Eigen::Index>(i), 3 * r + c) = pb(r) * pa(c);
  }
  Eigen::Matrix<double, 9, 1> e;
  if (xa.size() == 8) {
    // The ninth Householder direction of A^T is orthogonal to its row space.
    const Eigen::HouseholderQR<Eigen::Matrix<double, 9, 8>> qr(a.transpose());
    e = qr.householderQ() * Eigen::Matrix<double, 9, 1>::Unit(8);
  } else {
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    e = svd.matrixV().col(8);
  }
  Mat3 en;
  en << e(0), e(1), e(2), e(3), e(4), e(5), e(6), e(7), e(8);
  // The essential structure only holds after undoing the normalization.
  const Mat3 out = detail::project_to_essential(tb.transpose() * en * ta);
  return out / out.norm();
}

/// First-order geometric distance to the epipolar constraint, in
/// normalized image units.
inline double sampson_distance(const Mat3& e, const Vec2& xa, const Vec2& xb) {
  const Vec3 pa = detail::homogeneous(xa);
  const Vec3 pb = detail::homogeneous(xb);
  const Vec3 ea = e * pa;
  const Vec3 eb = e.transpose() * pb;
  const double r = pb.dot(ea);
  const double denom = ea.x() * ea.x() + ea.y() * ea.y() + eb.x() * eb.x() + eb.y() * eb.y();
  if (denom <= 0.0) return std::numeric_limits<double>::infinity();
  return std::abs(r) / std::sqrt(denom);
}

/// Sampson distance with the sign of the epipolar residual.
inline double signed_sampson(const Mat3& e, const Vec2& xa, const Vec2& xb) {
  const Vec3 pa = detail::homogeneous(xa);
  const Vec3 pb = detail::homogeneous(xb);
  const Vec3 ea = e * pa;
  const Vec3 eb = e.transpose() * pb;
  const double denom = ea.x() * ea.x() + ea.y() * ea.y() + eb.x() * eb.x() + eb.y() * eb.y();
  return denom > 0.0 ? pb.dot(ea) / std::sqrt(denom) : 0.0;
}

/// Levenberg-Marquardt on the essential manifold (rotation and unit
/// baseline) minimizing Sampson residuals. Near the affine limit of a small
/// object the linear solution fits a fundamental matrix far from any
/// essential one, and its SVD projection loses most of the support; this
/// pulls it back. Either rotation of the twisted pair spans the same E, so
/// one start suffices.
inline Mat3 refine_essential(const Mat3& e0, std::span<const Vec2> xa, std::span<const Vec2> xb, int iters = 10) {
  const Eigen::JacobiSVD<Mat3> svd(e0, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU(), v = svd.matrixV();
  if (u.determinant() < 0) u = -u;
  if (v.determinant() < 0) v = -v;
  Mat3 w;
  w << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const auto n = static_cast<Eigen::Index>(xa.size());

  auto residuals = [&](const Mat3& r, const Vec3& t, Eigen::VectorXd& out) {
    const Mat3 e = skew(t) * r;
    for (Eigen::Index i = 0; i < n; ++i) out(i) = signed_sampson(e, xa[i], xb[i]);
    return out.squaredNorm();
  };

  Mat3 r = u * w * v.transpose();
  Vec3 t = u.col(2);
  Eigen::VectorXd res(n), trial(n);
  Eigen::MatrixXd jac(n, 5);
  double cost = residuals(r, t, res);
  double lambda = 1e-3;
  for (int it = 0; it < iters; ++it) {
    // Tangent basis at t for the unit-sphere baseline.
    const Vec3 b1 = t.unitOrthogonal(), b2 = t.cross(b1);
    auto apply = [&](const Eigen::Matrix<double, 5, 1>& d, Mat3& r2, Vec3& t2) {
      r2 = exp_so3(d.head<3>()) * r;
      t2 = (t + d(3) * b1 + d(4) * b2).normalized();
    };
    constexpr double h = 1e-7;
    for (int k = 0; k < 5; ++k) {
      Eigen::Matrix<double, 5, 1> d = Eigen::Matrix<double, 5, 1>::Zero();
      d(k) = h;
      Mat3 r2;
      Vec3 t2;
      apply(d, r2, t2);
      residuals(r2, t2, trial);
      jac.col(k) = (trial - res) / h;
    }
    const Eigen::Matrix<double, 5, 5> jtj = jac.transpose() * jac;
    const Eigen::Matrix<double, 5, 1> jtr = jac.transpose() * res;
    bool improved = false;
    for (int tries = 0; tries < 6 && !improved; ++tries) {
      Eigen::Matrix<double, 5, 5> a = jtj;
      a.diagonal() *= 1.0 + lambda;
      const Eigen::Matrix<double, 5, 1> d = -a.ldlt().solve(jtr);
      Mat3 r2;
      Vec3 t2;
      apply(d, r2, t2);
      const double c2 = residuals(r2, t2, trial);
      if (c2 < cost) {
        r = r2;
        t = t2;
        res.swap(trial);
        if (cost - c2 <= 1e-12 * cost) it = iters;
        cost = c2;
        lambda = std::max(lambda * 0.1, 1e-9);
        improved = true;
      } else {
        lambda *= 10.0;
      }
    }
    if (!improved) break;
  }
  return skew(t) * r / std::sqrt(2.0);
}

inline int ransac_iterations(double inlier_ratio, int sample_size, double confidence, int min_iters,
                             int max_iters) {
  const double w = std::pow(inlier_ratio, sample_size);
  if (w >= 1.0 - 1e-15) return min_iters;
  if (w <= 0.0) return max_iters;
  const double n = std::log(1.0 - confidence) / std::log(1.0 - w);
  return std::clamp(static_cast<int>(std::ceil(n)), min_iters, max_iters);
}

/// Draws `k` distinct indices from [0, n).
inline std::vector<int> sample_indices(Rng& rng, int n, int k) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = 0; i < k; ++i) std::swap(idx[i], idx[i + static_cast<int>(rng.uniform_index(n - i))]);
  idx.resize(k);
  return idx;
}

/// Essential matrix by RANSAC over minimal 8-point samples, followed by
/// least-squares re-estimation on the consensus set until it stabilizes.
inline EssentialEstimate estimate_essential_ransac(std::span<const Correspondence> corrs,
                                                   const CameraIntrinsics& k,
                                                   const RansacConfig& cfg = {}) {
  const int n = static_cast<int>(corrs.size());
  if (n < 8) fail(ErrorCode::kInsufficientPoints, "essential estimation needs >= 8 correspondences");
  std::vector<Vec2> xa(n), xb(n);
  for (int i = 0; i < n; ++i) {
    xa[i] = k.normalize(corrs[i].pixel_a);
    xb[i] = k.normalize(corrs[i].pixel_b);
  }
  const double thresh = cfg.sampson_px / k.mean_focal();

  // MSAC: truncated squared residuals, so a hypothesis that barely admits
  // one extra outlier cannot beat the exact model on count alone.
  auto evaluate = [&](const Mat3& e, std::vector<int>& in, double t = 0.0) {
    if (t == 0.0) t = thresh;
    in.clear();
    double score = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = sampson_distance(e, xa[i], xb[i]);
      if (d < t) {
        in.push_back(i);
        score += d * d;
      } else {
        score += t * t;
      }
    }
    return score;
  };

  Rng rng(cfg.seed);
  EssentialEstimate best;
  double best_score = std::numeric_limits<double>::infinity();
  std::vector<int> in, wide;
  std::size_t polished_support = 0;

  // Local optimization of a new best: minimal samples of noisy points fit
  // poorly, so refit on the support at a loose threshold, then tighten.
  // Only runs when the support grew; score-only improvements are frequent
  // at low inlier ratios and rarely change the refit.
  auto polish = [&] {
    if (best.inliers.size() <= polished_support) return;
    std::vector<Vec2> ia, ib;
    Mat3 e = best.essential;
    for (double mult : {4.0, 2.0, 1.0, 1.0}) {
      evaluate(e, wide, mult * thresh);
      if (wide.size() < 8) break;
      ia.clear();
      ib.clear();
      for (int i : wide) {
        ia.push_back(xa[i]);
        ib.push_back(xb[i]);
      }
      e = eight_point(ia, ib);
      if (!e.allFinite()) break;
      e = refine_essential(e, ia, ib);
      const double score = evaluate(e, in);
      if (score < best_score) {
        best_score = score;
        best.essential = e;
        best.inliers = in;
      }
    }
    polished_support = std::max(polished_support, best.inliers.size());
  };

  int iters = cfg.max_iters;
  std::vector<Vec2> sa(8), sb(8);
  for (int it = 0; it < iters; ++it) {
    const auto s = sample_indices(rng, n, 8);
    for (int j = 0; j < 8; ++j) {
      sa[j] = xa[s[j]];
      sb[j] = xb[s[j]];
    }
    const Mat3 e8 = eight_point(sa, sb);
    if (!e8.allFinite()) continue;
    const Mat3 e = refine_essential(e8, sa, sb, 4);
    const double score = evaluate(e, in);
    if (score < best_score) {
      best_score = score;
      best.essential = e;
      best.inliers = in;
      polish();
      iters = ransac_iterations(static_cast<double>(best.inliers.size()) / n, 8, cfg.confidence,
                                cfg.min_iters, cfg.max_iters);
    }
  }
  if (static_cast<int>(best.inliers.size()) < cfg.min_inliers ||
      static_cast<double>(best.inliers.size()) < cfg.min_inlier_ratio * n)
    fail(ErrorCode::kNoConsensus, "essential matrix has too little support");
  return best;
}

struct RelativePoseEstimate {
  Pose pose;                          // frame-b camera from frame-a camera, |t| = 1
  std::vector<std::uint8_t> in_front;  // per input correspondence
  int support = 0;
};

/// Picks the decomposition of E with the most points in front of both
/// cameras.
inline RelativePoseEstimate recover_relative_pose_detailed(const Mat3& e,
                                                           std::span<const Correspondence> corrs,
                                                           const CameraIntrinsics& k) {
  if (corrs.empty()) fail(ErrorCode::kInsufficientPoints, "no inlier correspondences");
  const Eigen::JacobiSVD<Mat3> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  Mat3 v = svd.matrixV();
  if (u.determinant() < 0.0) u = -u;
  if (v.determinant() < 0.0) v = -v;
  Mat3 w;
  w << 0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0;
  const Mat3 r1 = u * w * v.transpose();
  const Mat3 r2 = u * w.transpose() * v.transpose();
  const Vec3 t = u.col(2).normalized();
  const std::array<Pose, 4> cands{Pose{r1, t}, Pose{r1, -t}, Pose{r2, t}, Pose{r2, -t}};

  RelativePoseEstimate best;
  best.support = -1;
  const Pose origin;
  for (const Pose& c : cands) {
    RelativePoseEstimate est;
    est.pose = c;
    est.in_front.assign(corrs.size(), 0);
    for (std::size_t i = 0; i < corrs.size(); ++i) {
      const Point3 x = triangulate_dlt_normalized(k.normalize(corrs[i].pixel_a),
                                                  k.normalize(corrs[i].pixel_b), origin, c);
      if (x.allFinite() && x.z() > kMinDepth && c.transform(x).z() > kMinDepth) {
        est.in_front[i] = 1;
        ++est.support;
      }
    }
    if (est.support > best.support) best = std::move(est);
  }
  if (2 * best.support <= static_cast<int>(corrs.size()))
    fail(ErrorCode::kCheiralityAmbiguous, "no decomposition has majority positive-depth support");
  return best;
}

inline Pose recover_relative_pose(const Mat3& e, std::span<const Correspondence> inliers,
                                  const CameraIntrinsics& k) {
  return recover_relative_pose_detailed(e, inliers, k).pose;
}

/// Least-squares homography x_b ~ H x_a (normalized DLT) on >= 4 pairs.
inline Mat3 fit_homography(std::span<const Vec2> xa, std::span<const Vec2> xb) {
  if (xa.size() < 4) fail(ErrorCode::kInsufficientPoints, "homography needs >= 4 pairs");
  const Mat3 ta = detail::hartley_normalization(xa);
  const Mat3 tb = detail::hartley_normalization(xb);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * static_cast<Eigen::Index>(xa.size()), 9);
  for (std::size_t i = 0; i < xa.size(); ++i) {
    const Vec3 p = ta * detail::homogeneous(xa[i]);
    const Vec3 q = tb * detail::homogeneous(xb[i]);
    const auto r = static_cast<Eigen::Index>(2 * i);
    a.block<1, 3>(r, 3) = -q.z() * p.transpose();
    a.block<1, 3>(r, 6) = q.y() * p.transpose();
    a.block<1, 3>(r + 1, 0) = q.z() * p.transpose();
    a.block<1, 3>(r + 1, 6) = -q.x() * p.transpose();
  }
  Eigen::Matrix<double, 9, 1> h;
  if (a.rows() < 9) {
    Eigen::Matrix<double, 9, 9> sq = Eigen::Matrix<double, 9, 9>::Zero();
    sq.topRows(a.rows()) = a;
    h = Eigen::JacobiSVD<Eigen::Matrix<double, 9, 9>>(sq, Eigen::ComputeFullV).matrixV().col(8);
  } else {
    h = Eigen::JacobiSVD<Eigen::MatrixXd>(a, Eigen::ComputeFullV).matrixV().col(8);
  }
  Mat3 hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  return tb.inverse() * hn * ta;
}

/// Fraction of correspondences a single homography explains within
/// `thresh_px`. Near 1 for planar scenes and for pure rotations, where the
/// essential matrix is not determined by the data.
inline double homography_inlier_ratio(std::span<const Correspondence> corrs,
                                      const CameraIntrinsics& k, double thresh_px) {
  if (corrs.size() < 4) return 1.0;
  std::vector<Vec2> xa, xb;
  for (const auto& c : corrs) {
    xa.push_back(k.normalize(c.pixel_a));
    xb.push_back(k.normalize(c.pixel_b));
  }
  const double thresh = thresh_px / k.mean_focal();
  auto count = [&](const Mat3& h, std::vector<int>* in) {
    int n = 0;
    for (std::size_t i = 0; i < xa.size(); ++i) {
      const Vec3 p = h * detail::homogeneous(xa[i]);
      if (std::abs(p.z()) < 1e-12) continue;
      if ((p.head<2>() / p.z() - xb[i]).norm() < thresh) {
        ++n;
        if (in) in->push_back(static_cast<int>(i));
      }
    }
    return n;
  };
  Mat3 h = fit_homography(xa, xb);
  std::vector<int> in;
  int best = count(h, &in);
  // One refit on the consensus so a few outliers do not mask a plane.
  if (in.size() >= 4 && in.size() < xa.size()) {
    std::vector<Vec2> ia, ib;
    for (int i : in) {
      ia.push_back(xa[i]);
      ib.push_back(xb[i]);
    }
    best = std::max(best, count(fit_homography(ia, ib), nullptr));
  }
  return static_cast<double>(best) / static_cast<double>(xa.size());
}

}  // namespace posebench::sfm

#endif  // POSEBENCH_SFM_TWO_VIEW_HPP
