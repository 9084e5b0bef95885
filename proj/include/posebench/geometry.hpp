#ifndef POSEBENCH_GEOMETRY_HPP
#define POSEBENCH_GEOMETRY_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "posebench/error.hpp"

namespace posebench {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Point3 = Eigen::Vector3d;

inline constexpr double kPi = std::numbers::pi;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

/// Rodrigues formula. `omega` is an axis-angle vector in radians.
inline Mat3 exp_so3(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 w = skew(omega);
  if (theta < 1e-8) {
    // Second-order series; exact for omega == 0.
    return Mat3::Identity() + w + 0.5 * w * w;
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Mat3::Identity() + a * w + b * w * w;
}

inline Vec3 log_so3(const Mat3& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

inline Mat3 axis_angle(const Vec3& axis, double angle_rad) {
  return exp_so3(axis.normalized() * angle_rad);
}

/// Closest rotation in the Frobenius sense.
inline Mat3 nearest_rotation(const Mat3& m) {
  const Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

/// Unit quaternion (w, x, y, z) with w >= 0.
inline std::array<double, 4> quaternion_from_rotation(const Mat3& r) {
  Eigen::Quaterniond q(r);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  return {q.w(), q.x(), q.y(), q.z()};
}

inline Mat3 rotation_from_quaternion(const std::array<double, 4>& wxyz) {
  Eigen::Quaterniond q(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
  q.normalize();
  return q.toRotationMatrix();
}

inline double orthonormality_error(const Mat3& r) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
}

/// Rigid transform mapping world (object) coordinates into camera
/// coordinates: X_cam = rotation * X_world + translation.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }

  Vec3 transform(const Vec3& x) const { return rotation * x + translation; }

  Pose inverse() const {
    const Mat3 rt = rotation.transpose();
    return {rt, -(rt * translation)};
  }

  /// Camera center in world coordinates.
  Vec3 center() const { return -(rotation.transpose() * translation); }

  /// (this * other)(x) == this(other(x)).
  Pose operator*(const Pose& other) const {
    return {rotation * other.rotation, rotation * other.translation + translation};
  }

  bool is_valid(double tol = 1e-9) const {
    return rotation.allFinite() && translation.allFinite() &&
           orthonormality_error(rotation) <= tol &&
           std::abs(rotation.determinant() - 1.0) <= tol;
  }

  bool operator==(const Pose& other) const {
    return rotation == other.rotation && translation == other.translation;
  }
};

/// Builds a world-to-camera pose for a camera at `center` with its optical
/// axis through `target`. Image y points away from `up`.
inline Pose look_at(const Vec3& center, const Vec3& target,
                    const Vec3& up = Vec3::UnitZ()) {
  const Vec3 forward = (target - center).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-12) right = forward.cross(Vec3::UnitX());
  right.normalize();
  const Vec3 down = forward.cross(right);
  Pose p;
  p.rotation.row(0) = right.transpose();
  p.rotation.row(1) = down.transpose();
  p.rotation.row(2) = forward.transpose();
  p.translation = -(p.rotation * center);
  return p;
}

/// Transform carrying frame-a camera coordinates to frame-b camera
/// coordinates, so that relative_pose(a, b) * a == b.
inline Pose relative_pose(const Pose& a, const Pose& b) { return b * a.inverse(); }

/// Geodesic rotation angle in degrees, in [0, 180].
inline double rotation_angle_deg(const Mat3& r) {
  // atan2 keeps full precision near 0 and 180 degrees, unlike acos.
  const Vec3 axis(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  return rad2deg(std::atan2(0.5 * axis.norm(), 0.5 * (r.trace() - 1.0)));
}

inline double rotation_angle_deg(const Pose& p) { return rotation_angle_deg(p.rotation); }

/// 7-DoF transform x -> scale * rotation * x + translation.
struct SimilarityTransform {
  double scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return scale * (rotation * x) + translation; }

  SimilarityTransform inverse() const {
    const Mat3 rt = rotation.transpose();
    return {1.0 / scale, rt, -(rt * translation) / scale};
  }
};

struct CameraIntrinsics {
  double fx = 500.0;
  double fy = 500.0;
  double cx = 256.0;
  double cy = 256.0;
  int width = 512;
  int height = 512;

  bool is_valid() const {
    return fx > 0.0 && fy > 0.0 && cx > 0.0 && cx < width && cy > 0.0 && cy < height;
  }

  void validate() const {
    if (!is_valid()) fail(ErrorCode::kInvalidParams, "camera intrinsics out of range");
  }

  bool contains(const Vec2& px) const {
    return px.x() >= 0.0 && px.y() >= 0.0 && px.x() < width && px.y() < height;
  }

  /// Pixel to normalized image coordinates.
  Vec2 normalize(const Vec2& px) const {
    return {(px.x() - cx) / fx, (px.y() - cy) / fy};
  }

  Vec2 denormalize(const Vec2& xn) const { return {fx * xn.x() + cx, fy * xn.y() + cy}; }

  Mat3 matrix() const {
    Mat3 k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }

  double mean_focal() const { return 0.5 * (fx + fy); }
};

struct Projection {
  Vec2 pixel;
  double depth;
};

inline constexpr double kMinDepth = 1e-9;

inline Projection project(const Point3& point, const Pose& pose, const CameraIntrinsics& k) {
  const Vec3 xc = pose.transform(point);
  if (!(xc.z() > kMinDepth)) fail(ErrorCode::kBehindCamera, "point is not in front of the camera");
  return {{k.fx * xc.x() / xc.z() + k.cx, k.fy * xc.y() / xc.z() + k.cy}, xc.z()};
}

/// Inverse of project(): world point seen at `pixel` with camera depth `depth`.
inline Point3 back_project(const Vec2& pixel, double depth, const Pose& pose,
                           const CameraIntrinsics& k) {
  const Vec2 xn = k.normalize(pixel);
  const Vec3 xc(xn.x() * depth, xn.y() * depth, depth);
  return pose.rotation.transpose() * (xc - pose.translation);
}

/// Angle in degrees between the viewing rays of `x` from two camera centers.
inline double triangulation_angle_deg(const Point3& x, const Vec3& center_a, const Vec3& center_b) {
  const Vec3 ra = x - center_a;
  const Vec3 rb = x - center_b;
  const double na = ra.norm();
  const double nb = rb.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return rad2deg(std::acos(std::clamp(ra.dot(rb) / (na * nb), -1.0, 1.0)));
}

inline constexpr double kMinTriangulationAngleDeg = 0.1;

/// Linear two-view triangulation from normalized observations, no checks.
inline Point3 triangulate_dlt_normalized(const Vec2& xa, const Vec2& xb, const Pose& pa,
                                         const Pose& pb) {
  Eigen::Matrix<double, 3, 4> ma, mb;
  ma << pa.rotation, pa.translation;
  mb << pb.rotation, pb.translation;
  Eigen::Matrix4d a;
  a.row(0) = xa.x() * ma.row(2) - ma.row(0);
  a.row(1) = xa.y() * ma.row(2) - ma.row(1);
  a.row(2) = xb.x() * mb.row(2) - mb.row(0);
  a.row(3) = xb.y() * mb.row(2) - mb.row(1);
  const Eigen::JacobiSVD<Eigen::Matrix4d> svd(a, Eigen::ComputeFullV);
  const Eigen::Vector4d h = svd.matrixV().col(3);
  return h.head<3>() / h(3);
}

/// DLT triangulation with ray-angle and cheirality checks.
inline Point3 triangulate_two_view(const Vec2& obs_a, const Vec2& obs_b, const Pose& pose_a,
                                   const Pose& pose_b, const CameraIntrinsics& k) {
  const Vec3 ca = pose_a.center();
  const Vec3 cb = pose_b.center();
  if ((ca - cb).norm() <= 1e-9) fail(ErrorCode::kDegenerateRay, "zero baseline");
  const Vec2 xa = k.normalize(obs_a);
  const Vec2 xb = k.normalize(obs_b);
  const Vec3 da = pose_a.rotation.transpose() * Vec3(xa.x(), xa.y(), 1.0);
  const Vec3 db = pose_b.rotation.transpose() * Vec3(xb.x(), xb.y(), 1.0);
  const double cos_angle = std::clamp(da.normalized().dot(db.normalized()), -1.0, 1.0);
  if (rad2deg(std::acos(cos_angle)) < kMinTriangulationAngleDeg)
    fail(ErrorCode::kDegenerateRay, "near-parallel viewing rays");
  const Point3 x = triangulate_dlt_normalized(xa, xb, pose_a, pose_b);
  if (!x.allFinite()) fail(ErrorCode::kDegenerateRay, "point at infinity");
  if (pose_a.transform(x).z() <= kMinDepth || pose_b.transform(x).z() <= kMinDepth)
    fail(ErrorCode::kBehindCamera, "triangulated point fails cheirality");
  return x;
}

/// Closed-form least-squares similarity (Umeyama): minimizes
/// sum |target_i - (s R source_i + t)|^2.
inline SimilarityTransform umeyama_align(std::span<const Point3> source,
                                         std::span<const Point3> target) {
  if (source.size() != target.size())
    fail(ErrorCode::kInvalidParams, "source and target sizes differ");
  if (source.size() < 3) fail(ErrorCode::kInvalidParams, "need at least 3 point pairs");
  const double n = static_cast<double>(source.size());

  Vec3 mu_s = Vec3::Zero(), mu_t = Vec3::Zero();
  for (std::size_t i = 0; i < source.size(); ++i) {
    mu_s += source[i];
    mu_t += target[i];
  }
  mu_s /= n;
  mu_t /= n;

  Mat3 sigma = Mat3::Zero();
  Mat3 source_cov = Mat3::Zero();
  double var_s = 0.0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const Vec3 ds = source[i] - mu_s;
    const Vec3 dt = target[i] - mu_t;
    sigma += dt * ds.transpose();
    source_cov += ds * ds.transpose();
    var_s += ds.squaredNorm();
  }
  sigma /= n;
  source_cov /= n;
  var_s /= n;

  const Eigen::JacobiSVD<Mat3> cov_svd(source_cov);
  const Vec3 sv = cov_svd.singularValues();
  if (!(sv(0) > 0.0) || sv(1) <= 1e-12 * sv(0))
    fail(ErrorCode::kDegenerateConfiguration, "source points are collinear or coincident");

  const Eigen::JacobiSVD<Mat3> svd(sigma, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 s_diag = Vec3::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) s_diag(2) = -1.0;

  SimilarityTransform out;
  out.rotation = svd.matrixU() * s_diag.asDiagonal() * svd.matrixV().transpose();
  out.scale = svd.singularValues().dot(s_diag) / var_s;
  out.translation = mu_t - out.scale * (out.rotation * mu_s);
  return out;
}

}  // namespace posebench

#endif  // POSEBENCH_GEOMETRY_HPP
