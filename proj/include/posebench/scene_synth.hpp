#ifndef POSEBENCH_SCENE_SYNTH_HPP
#define POSEBENCH_SCENE_SYNTH_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "posebench/error.hpp"
#include "posebench/geometry.hpp"
#include "posebench/random.hpp"
#include "posebench/trajgen.hpp"

namespace posebench {

// ---------------------------------------------------------------------------
// Object models
// ---------------------------------------------------------------------------

enum class ShapeKind { kSphere, kEllipsoid, kBoxCloud, kPlanar, kImported };

inline std::string_view to_string(ShapeKind s) {
  switch (s) {
    case ShapeKind::kSphere: return "sphere";
    case ShapeKind::kEllipsoid: return "ellipsoid";
    case ShapeKind::kBoxCloud: return "box_cloud";
    case ShapeKind::kPlanar: return "planar";
    case ShapeKind::kImported: return "imported";
  }
  return "?";
}

inline ShapeKind shape_kind_from_string(std::string_view s) {
  if (s == "sphere") return ShapeKind::kSphere;
  if (s == "ellipsoid") return ShapeKind::kEllipsoid;
  if (s == "box_cloud") return ShapeKind::kBoxCloud;
  if (s == "planar") return ShapeKind::kPlanar;
  if (s == "imported") return ShapeKind::kImported;
  fail(ErrorCode::kInvalidParams, "unknown shape kind '" + std::string(s) + "'");
}

/// Oriented point cloud in the object frame. Every point doubles as a
/// surfel (disk of radius surfel_radius) when depth buffers are rendered.
struct ObjectModel {
  std::vector<Point3> points;
  std::vector<Vec3> normals;
  ShapeKind shape_kind = ShapeKind::kImported;
  double surfel_radius = 0.0;

  std::size_t size() const { return points.size(); }

  void validate() const {
    if (points.size() < 8) fail(ErrorCode::kInvalidParams, "object model needs >= 8 points");
    if (normals.size() != points.size())
      fail(ErrorCode::kInvalidParams, "one normal per point required");
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!points[i].allFinite()) fail(ErrorCode::kInvalidParams, "non-finite point");
      if (std::abs(normals[i].norm() - 1.0) > 1e-9)
        fail(ErrorCode::kInvalidParams, "normals must be unit length");
    }
  }
};

/// Mean nearest-neighbour distance. Quadratic; models are small.
inline double mean_point_spacing(const std::vector<Point3>& pts) {
  if (pts.size() < 2) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < pts.size(); ++j)
      if (i != j) best = std::min(best, (pts[i] - pts[j]).squaredNorm());
    sum += std::sqrt(best);
  }
  return sum / static_cast<double>(pts.size());
}

/// Covers a hexagonal sampling (needs 0.58x spacing) with margin while
/// keeping the tangent disks from poking far out of curved surfaces, which
/// would hide grazing points.
inline void assign_surfel_radius(ObjectModel& m) {
  m.surfel_radius = 0.8 * mean_point_spacing(m.points);
}

/// Fibonacci-lattice sphere centered at the origin.
inline ObjectModel make_sphere(int n, double radius = 0.1) {
  ObjectModel m;
  m.shape_kind = ShapeKind::kSphere;
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    const Vec3 u(r * std::cos(phi), r * std::sin(phi), z);
    m.normals.push_back(u.normalized());
    m.points.push_back(radius * m.normals.back());
  }
  assign_surfel_radius(m);
  return m;
}

inline ObjectModel make_ellipsoid(int n, const Vec3& semi_axes) {
  ObjectModel m = make_sphere(n, 1.0);
  m.shape_kind = ShapeKind::kEllipsoid;
  for (std::size_t i = 0; i < m.points.size(); ++i) {
    const Vec3 u = m.points[i];
    m.points[i] = u.cwiseProduct(semi_axes);
    m.normals[i] = u.cwiseQuotient(semi_axes).normalized();
  }
  assign_surfel_radius(m);
  return m;
}

/// Points on the faces of an axis-aligned box, roughly uniform by area.
inline ObjectModel make_box_cloud(int n, const Vec3& half_extents, std::uint64_t seed) {
  ObjectModel m;
  m.shape_kind = ShapeKind::kBoxCloud;
  Rng rng(seed);
  const Vec3& h = half_extents;
  const std::array<double, 3> face_area{h.y() * h.z(), h.x() * h.z(), h.x() * h.y()};
  const double total = 2.0 * (face_area[0] + face_area[1] + face_area[2]);
  for (int i = 0; i < n; ++i) {
    double pick = rng.uniform01() * total;
    int axis = 0;
    while (axis < 2 && pick >= 2.0 * face_area[axis]) {
      pick -= 2.0 * face_area[axis];
      ++axis;
    }
    const double sign = pick < face_area[axis] ? 1.0 : -1.0;
    Vec3 p(rng.uniform(-h.x(), h.x()), rng.uniform(-h.y(), h.y()), rng.uniform(-h.z(), h.z()));
    p(axis) = sign * h(axis);
    Vec3 nrm = Vec3::Zero();
    nrm(axis) = sign;
    m.points.push_back(p);
    m.normals.push_back(nrm);
  }
  assign_surfel_radius(m);
  return m;
}

/// Square patch in the plane through the origin with the given normal.
inline ObjectModel make_planar(int n, double half_size, const Vec3& normal, std::uint64_t seed) {
  ObjectModel m;
  m.shape_kind = ShapeKind::kPlanar;
  Rng rng(seed);
  const Vec3 nz = normal.normalized();
  Vec3 ax = nz.cross(std::abs(nz.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY()).normalized();
  const Vec3 ay = nz.cross(ax);
  for (int i = 0; i < n; ++i) {
    m.points.push_back(rng.uniform(-half_size, half_size) * ax +
                       rng.uniform(-half_size, half_size) * ay);
    m.normals.push_back(nz);
  }
  assign_surfel_radius(m);
  return m;
}

// ---------------------------------------------------------------------------
// Tracks, masks, depth buffers
// ---------------------------------------------------------------------------

/// Per-keypoint, per-frame observations for one window. Frame-major storage:
/// element (t, i) lives at t * num_points + i.
struct TrackSet {
  int num_frames = 0;
  std::vector<int> point_ids;
  std::vector<Vec2> positions;
  std::vector<std::uint8_t> visibility;
  std::optional<std::vector<int>> levels;
  int num_levels = 0;
  std::optional<std::vector<double>> logits;  // (t * N + i) * num_levels + k

  TrackSet() = default;
  TrackSet(int frames, std::vector<int> ids)
      : num_frames(frames),
        point_ids(std::move(ids)),
        positions(static_cast<std::size_t>(frames) * point_ids.size(),
                  Vec2::Constant(std::numeric_limits<double>::quiet_NaN())),
        visibility(static_cast<std::size_t>(frames) * point_ids.size(), 0) {}

  std::size_t num_points() const { return point_ids.size(); }
  std::size_t index(int t, std::size_t i) const {
    return static_cast<std::size_t>(t) * point_ids.size() + i;
  }
  const Vec2& position(int t, std::size_t i) const { return positions[index(t, i)]; }
  Vec2& position(int t, std::size_t i) { return positions[index(t, i)]; }
  bool visible(int t, std::size_t i) const { return visibility[index(t, i)] != 0; }
  void set_visible(int t, std::size_t i, bool v) { visibility[index(t, i)] = v ? 1 : 0; }

  int level(int t, std::size_t i) const { return (*levels)[index(t, i)]; }
  std::span<const double> logit(int t, std::size_t i) const {
    return {logits->data() + index(t, i) * num_levels, static_cast<std::size_t>(num_levels)};
  }

  void validate() const {
    if (num_frames < 2) fail(ErrorCode::kInvalidParams, "track set needs >= 2 frames");
    const std::size_t n = static_cast<std::size_t>(num_frames) * point_ids.size();
    if (positions.size() != n || visibility.size() != n)
      fail(ErrorCode::kShapeMismatch, "track arrays do not match T x N");
    if (levels && levels->size() != n) fail(ErrorCode::kShapeMismatch, "levels shape");
    if (logits && logits->size() != n * static_cast<std::size_t>(num_levels))
      fail(ErrorCode::kShapeMismatch, "logits shape");
    for (std::size_t j = 0; j < n; ++j)
      if (visibility[j] && !positions[j].allFinite())
        fail(ErrorCode::kInvalidParams, "visible observation with non-finite position");
  }
};

struct Pixel {
  int x = 0;
  int y = 0;
  bool operator==(const Pixel&) const = default;
};

/// Binary object mask. Pixel (x, y) covers [x, x+1) x [y, y+1).
struct MaskRaster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> occupancy;
  std::vector<Pixel> boundary;

  MaskRaster() = default;
  MaskRaster(int w, int h)
      : width(w), height(h), occupancy(static_cast<std::size_t>(w) * h, 0) {}

  bool at(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height &&
           occupancy[static_cast<std::size_t>(y) * width + x] != 0;
  }
  void set(int x, int y, bool v) { occupancy[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }

  std::size_t area() const {
    return static_cast<std::size_t>(std::count(occupancy.begin(), occupancy.end(), 1));
  }
  bool empty() const { return area() == 0; }

  /// Occupied pixels with at least one unoccupied 4-neighbour, row-major.
  void compute_boundary() {
    boundary.clear();
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        if (at(x, y) && (!at(x - 1, y) || !at(x + 1, y) || !at(x, y - 1) || !at(x, y + 1)))
          boundary.push_back({x, y});
  }

  bool operator==(const MaskRaster&) const = default;
};

namespace detail {

inline MaskRaster dilate(const MaskRaster& m, int r) {
  MaskRaster out(m.width, m.height);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      bool any = false;
      for (int dy = -r; dy <= r && !any; ++dy)
        for (int dx = -r; dx <= r && !any; ++dx) any = m.at(x + dx, y + dy);
      out.set(x, y, any);
    }
  return out;
}

inline MaskRaster erode(const MaskRaster& m, int r) {
  MaskRaster out(m.width, m.height);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      bool all = true;
      for (int dy = -r; dy <= r && all; ++dy)
        for (int dx = -r; dx <= r && all; ++dx) {
          const int xx = x + dx, yy = y + dy;
          // Outside the image counts as occupied so closing does not eat borders.
          if (xx >= 0 && yy >= 0 && xx < m.width && yy < m.height) all = m.at(xx, yy);
        }
      out.set(x, y, all);
    }
  return out;
}

}  // namespace detail

/// Morphological closing with a square structuring element of side `size`.
inline MaskRaster close_mask(const MaskRaster& m, int size) {
  const int r = size / 2;
  if (r <= 0) return m;
  MaskRaster out = detail::erode(detail::dilate(m, r), r);
  out.compute_boundary();
  return out;
}

struct SurfaceHit {
  double depth;
  int owner;         // model point index of the surfel that supplied the depth
  double front = 0;  // nearest depth among all surfels covering the location
};

/// Per-frame surfel depth buffer.
///
/// `depth` is the rasterized nearest-depth image (+inf where empty). sample()
/// evaluates the buffer at a continuous pixel location: among the surfels
/// covering the location, those within `layer_tolerance` (relative) of the
/// nearest one form the front layer, and the front-layer surfel whose
/// projected center is closest supplies the depth, intersected exactly with
/// its tangent plane. A point sampled at its own projection therefore gets
/// its own exact depth whenever it is on the front surface. Back-facing
/// surfels are culled.
class DepthBuffer {
 public:
  DepthBuffer() = default;

  DepthBuffer(const ObjectModel& model, const Pose& pose, const CameraIntrinsics& k,
              double splat_radius_px, double layer_tolerance)
      : k_(k),
        width_(k.width),
        height_(k.height),
        splat_px_(splat_radius_px),
        layer_tol_(layer_tolerance),
        surfel_radius_(model.surfel_radius),
        depth_(static_cast<std::size_t>(k.width) * k.height,
               std::numeric_limits<double>::infinity()),
        owner_(depth_.size(), -1),
        rendered_(model.size(), 0) {
    bins_x_ = (width_ + kBin - 1) / kBin;
    bins_y_ = (height_ + kBin - 1) / kBin;
    bins_.assign(static_cast<std::size_t>(bins_x_) * bins_y_, {});
    const double fmax = std::max(k.fx, k.fy);
    for (std::size_t i = 0; i < model.size(); ++i) {
      Surfel s;
      s.id = static_cast<int>(i);
      s.center = pose.transform(model.points[i]);
      s.normal = pose.rotation * model.normals[i];
      if (!(s.center.z() > kMinDepth)) continue;
      if (s.normal.dot(s.center) >= 0.0) continue;  // back-facing
      s.pixel = {k.fx * s.center.x() / s.center.z() + k.cx, k.fy * s.center.y() / s.center.z() + k.cy};
      const double near_z = std::max(s.center.z() - surfel_radius_, 0.25 * s.center.z());
      s.footprint = std::max(splat_px_, fmax * surfel_radius_ / near_z) + 1.0;
      if (s.pixel.x() + s.footprint < 0 || s.pixel.y() + s.footprint < 0 ||
          s.pixel.x() - s.footprint >= width_ || s.pixel.y() - s.footprint >= height_)
        continue;
      const int idx = static_cast<int>(surfels_.size());
      surfels_.push_back(s);
      rendered_[i] = 1;
      const int bx0 = std::max(0, static_cast<int>(std::floor((s.pixel.x() - s.footprint) / kBin)));
      const int bx1 = std::min(bins_x_ - 1, static_cast<int>(std::floor((s.pixel.x() + s.footprint) / kBin)));
      const int by0 = std::max(0, static_cast<int>(std::floor((s.pixel.y() - s.footprint) / kBin)));
      const int by1 = std::min(bins_y_ - 1, static_cast<int>(std::floor((s.pixel.y() + s.footprint) / kBin)));
      for (int by = by0; by <= by1; ++by)
        for (int bx = bx0; bx <= bx1; ++bx) bins_[static_cast<std::size_t>(by) * bins_x_ + bx].push_back(idx);
    }
    // Front to back, so pixels already covered by nearer surfaces are
    // rejected with a single comparison.
    std::vector<int> order(surfels_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return surfels_[a].center.z() < surfels_[b].center.z() ||
             (surfels_[a].center.z() == surfels_[b].center.z() && a < b);
    });
    for (int idx : order) {
      const Surfel& s = surfels_[idx];
      const double z_near = s.center.z() - surfel_radius_;
      const int x0 = std::max(0, static_cast<int>(std::floor(s.pixel.x() - s.footprint)));
      const int x1 = std::min(width_ - 1, static_cast<int>(std::floor(s.pixel.x() + s.footprint)));
      const int y0 = std::max(0, static_cast<int>(std::floor(s.pixel.y() - s.footprint)));
      const int y1 = std::min(height_ - 1, static_cast<int>(std::floor(s.pixel.y() + s.footprint)));
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
          const std::size_t j = static_cast<std::size_t>(y) * width_ + x;
          if (depth_[j] < z_near) continue;
          const auto z = surfel_depth(s, Vec2(x + 0.5, y + 0.5));
          if (z && *z < depth_[j]) {
            depth_[j] = *z;
            owner_[j] = s.id;
          }
        }
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  const std::vector<double>& raster() const { return depth_; }
  double at(int x, int y) const { return depth_[static_cast<std::size_t>(y) * width_ + x]; }
  /// False for points whose surfel was culled (back-facing, behind the
  /// camera or off-screen).
  bool rendered(std::size_t point) const { return point < rendered_.size() && rendered_[point]; }

  std::optional<SurfaceHit> sample(const Vec2& px) const {
    if (!(px.x() >= 0.0 && px.y() >= 0.0 && px.x() < width_ && px.y() < height_)) return std::nullopt;
    const int bx = std::min(bins_x_ - 1, static_cast<int>(px.x()) / kBin);
    const int by = std::min(bins_y_ - 1, static_cast<int>(px.y()) / kBin);
    const auto& bin = bins_[static_cast<std::size_t>(by) * bins_x_ + bx];
    double z_min = std::numeric_limits<double>::infinity();
    thread_local std::vector<std::pair<int, double>> cand;
    cand.clear();
    for (int idx : bin) {
      const auto z = surfel_depth(surfels_[idx], px);
      if (!z) continue;
      cand.emplace_back(idx, *z);
      z_min = std::min(z_min, *z);
    }
    if (cand.empty()) return std::nullopt;
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    double best_z = 0.0;
    for (const auto& [idx, z] : cand) {
      if (z > z_min * (1.0 + layer_tol_)) continue;
      const double d2 = (surfels_[idx].pixel - px).squaredNorm();
      if (d2 < best_d2 || (d2 == best_d2 && surfels_[idx].id < surfels_[best].id)) {
        best = idx;
        best_d2 = d2;
        best_z = z;
      }
    }
    return SurfaceHit{best_z, surfels_[best].id, z_min};
  }

 private:
  static constexpr int kBin = 16;

  struct Surfel {
    int id = 0;
    Vec3 center;
    Vec3 normal;
    Vec2 pixel;
    double footprint = 0.0;
  };

  /// Depth of the ray through `px` where it meets the surfel's disk.
  std::optional<double> surfel_depth(const Surfel& s, const Vec2& px) const {
    const double pix_d2 = (px - s.pixel).squaredNorm();
    if (pix_d2 > s.footprint * s.footprint) return std::nullopt;
    const Vec3 ray((px.x() - k_.cx) / k_.fx, (px.y() - k_.cy) / k_.fy, 1.0);
    const double nd = s.normal.dot(ray);
    double offset = 0.0;
    if (std::abs(nd) > 1e-3 * ray.norm())
      offset = s.normal.dot(s.center - s.center.z() * ray) / nd;
    const double z = s.center.z() + offset;
    if (z > kMinDepth && (z * ray - s.center).squaredNorm() <= surfel_radius_ * surfel_radius_) return z;
    if (pix_d2 <= splat_px_ * splat_px_) {
      return std::clamp(z, s.center.z() - surfel_radius_, s.center.z() + surfel_radius_);
    }
    return std::nullopt;
  }

  CameraIntrinsics k_;
  int width_ = 0;
  int height_ = 0;
  double splat_px_ = 2.0;
  double layer_tol_ = 0.02;
  double surfel_radius_ = 0.0;
  std::vector<double> depth_;
  std::vector<int> owner_;
  std::vector<std::uint8_t> rendered_;
  std::vector<Surfel> surfels_;
  int bins_x_ = 0;
  int bins_y_ = 0;
  std::vector<std::vector<int>> bins_;
};

// ---------------------------------------------------------------------------
// Window synthesis and co-visibility
// ---------------------------------------------------------------------------

struct SynthOptions {
  double splat_radius_px = 2.0;
  int closing_size = 3;
  double tau_depth = 0.02;  // relative
  double tau_cycle = 1.5;   // px
  int reference_frame = 0;
};

/// Exact projections of every model point into every window frame.
struct WindowProjections {
  int num_frames = 0;
  std::size_t num_points = 0;
  std::vector<Vec2> pixels;      // frame-major, NaN when behind the camera
  std::vector<double> depths;    // camera depth, NaN when behind the camera
  std::size_t index(int t, std::size_t i) const { return static_cast<std::size_t>(t) * num_points + i; }
};

inline WindowProjections project_window(const ObjectModel& model, const Trajectory& traj,
                                        const CameraIntrinsics& k) {
  WindowProjections wp;
  wp.num_frames = static_cast<int>(traj.size());
  wp.num_points = model.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  wp.pixels.assign(static_cast<std::size_t>(wp.num_frames) * wp.num_points, Vec2(nan, nan));
  wp.depths.assign(wp.pixels.size(), nan);
  for (int t = 0; t < wp.num_frames; ++t)
    for (std::size_t i = 0; i < wp.num_points; ++i) {
      try {
        const Projection p = project(model.points[i], traj.poses[t], k);
        wp.pixels[wp.index(t, i)] = p.pixel;
        wp.depths[wp.index(t, i)] = p.depth;
      } catch (const Error&) {
        // Behind the camera: stays NaN and can never be visible.
      }
    }
  return wp;
}

/// Conditions (a) and (b) only: inside the image and consistent with the
/// depth buffer.
inline bool depth_consistent(const WindowProjections& wp, const DepthBuffer& buf,
                             const CameraIntrinsics& k, int t, std::size_t i, double tau_depth) {
  const Vec2& px = wp.pixels[wp.index(t, i)];
  if (!px.allFinite() || !k.contains(px) || !buf.rendered(i)) return false;
  const auto hit = buf.sample(px);
  if (!hit) return false;
  return std::abs(wp.depths[wp.index(t, i)] - hit->front) / hit->front < tau_depth;
}

/// Reference -> t -> reference reprojection error in pixels, using the depth
/// buffers of both frames. Infinite when a step leaves the surface.
inline double cycle_projection_error(const WindowProjections& wp,
                                     const std::vector<DepthBuffer>& buffers,
                                     const Trajectory& traj, const CameraIntrinsics& k,
                                     int reference, int t, std::size_t i) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const Vec2& p_ref = wp.pixels[wp.index(reference, i)];
  if (!p_ref.allFinite()) return kInf;
  const auto d_ref = buffers[reference].sample(p_ref);
  if (!d_ref) return kInf;
  try {
    const Point3 x = back_project(p_ref, d_ref->depth, traj.poses[reference], k);
    const Projection in_t = project(x, traj.poses[t], k);
    const auto d_t = buffers[t].sample(in_t.pixel);
    if (!d_t) return kInf;
    const Point3 x_back = back_project(in_t.pixel, d_t->depth, traj.poses[t], k);
    const Projection back = project(x_back, traj.poses[reference], k);
    return (back.pixel - p_ref).norm();
  } catch (const Error&) {
    return kInf;
  }
}

/// Visibility of each point in each frame: inside the image, depth
/// consistent, and cycle-consistent with the reference frame.
inline std::vector<std::uint8_t> compute_covisibility(const WindowProjections& wp,
                                                      const std::vector<DepthBuffer>& buffers,
                                                      const Trajectory& traj,
                                                      const CameraIntrinsics& k,
                                                      const SynthOptions& opt) {
  std::vector<std::uint8_t> vis(wp.pixels.size(), 0);
  for (std::size_t i = 0; i < wp.num_points; ++i) {
    if (!depth_consistent(wp, buffers[opt.reference_frame], k, opt.reference_frame, i, opt.tau_depth))
      continue;
    for (int t = 0; t < wp.num_frames; ++t) {
      if (!depth_consistent(wp, buffers[t], k, t, i, opt.tau_depth)) continue;
      const double e = cycle_projection_error(wp, buffers, traj, k, opt.reference_frame, t, i);
      if (e < opt.tau_cycle) vis[wp.index(t, i)] = 1;
    }
  }
  return vis;
}

struct SynthesizedWindow {
  TrackSet tracks;
  std::vector<MaskRaster> masks;
  std::vector<DepthBuffer> depth;
  WindowProjections projections;
};

inline MaskRaster mask_from_depth(const DepthBuffer& buf, int closing_size) {
  MaskRaster m(buf.width(), buf.height());
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) m.set(x, y, std::isfinite(buf.at(x, y)));
  return close_mask(m, closing_size);
}

/// Ground-truth tracks for every model point over the window. Track ids are
/// model point indices.
inline SynthesizedWindow synthesize_window(const ObjectModel& model, const Trajectory& traj,
                                           const CameraIntrinsics& k,
                                           const SynthOptions& opt = {}) {
  model.validate();
  k.validate();
  if (traj.size() < 2) fail(ErrorCode::kInvalidParams, "window needs >= 2 frames");
  if (opt.reference_frame < 0 || opt.reference_frame >= static_cast<int>(traj.size()))
    fail(ErrorCode::kInvalidParams, "reference frame out of range");

  SynthesizedWindow out;
  out.projections = project_window(model, traj, k);
  const WindowProjections& wp = out.projections;

  bool any_inside = false;
  for (std::size_t i = 0; i < wp.num_points && !any_inside; ++i) {
    const Vec2& px = wp.pixels[wp.index(opt.reference_frame, i)];
    any_inside = px.allFinite() && k.contains(px);
  }
  if (!any_inside) fail(ErrorCode::kEmptyMask, "no point projects into the reference frame");

  for (std::size_t t = 0; t < traj.size(); ++t) {
    out.depth.emplace_back(model, traj.poses[t], k, opt.splat_radius_px, opt.tau_depth);
    out.masks.push_back(mask_from_depth(out.depth.back(), opt.closing_size));
  }

  std::vector<int> ids(model.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  out.tracks = TrackSet(static_cast<int>(traj.size()), std::move(ids));
  out.tracks.positions = wp.pixels;
  out.tracks.visibility = compute_covisibility(wp, out.depth, traj, k, opt);
  return out;
}

/// Analytic visibility for convex models: the surface faces the camera.
inline bool front_facing(const Point3& x, const Vec3& normal, const Pose& pose) {
  return normal.dot(pose.center() - x) > 0.0;
}

/// Lifts mask pixels onto the rendered surface, giving new keypoints in the
/// object frame. Pixels that miss the surface are dropped.
inline ObjectModel lift_pixels(const std::vector<Vec2>& pixels, const DepthBuffer& buf,
                               const ObjectModel& source, const Pose& pose,
                               const CameraIntrinsics& k) {
  ObjectModel out;
  out.shape_kind = source.shape_kind;
  for (const Vec2& px : pixels) {
    const auto hit = buf.sample(px);
    if (!hit) continue;
    out.points.push_back(back_project(px, hit->depth, pose, k));
    out.normals.push_back(source.normals[hit->owner]);
  }
  out.surfel_radius = source.surfel_radius;
  return out;
}

// ---------------------------------------------------------------------------
// Occlusion disks
// ---------------------------------------------------------------------------

struct OcclusionDisk {
  Vec2 center;
  double radius = 0.0;
  std::vector<Vec2> polygon;  // perturbed 32-gon

  bool contains(const Vec2& p) const {
    bool inside = false;
    const std::size_t n = polygon.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const Vec2& a = polygon[i];
      const Vec2& b = polygon[j];
      if ((a.y() > p.y()) != (b.y() > p.y()) &&
          p.x() < (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x())
        inside = !inside;
    }
    return inside;
  }
};

struct OcclusionOptions {
  double min_ratio = 0.1;
  double max_ratio = 0.5;
  int polygon_vertices = 32;
  double radial_noise = 0.1;              // sigma as a fraction of the radius
  std::optional<double> forced_radius;    // px, overrides the random radius
};

/// √(occupied area): the mask size that occlusion radii scale with.
inline double mask_size(const MaskRaster& m) { return std::sqrt(static_cast<double>(m.area())); }

inline OcclusionDisk sample_occlusion_disk(const MaskRaster& mask, Rng& rng,
                                           const OcclusionOptions& opt = {}) {
  if (mask.boundary.empty()) fail(ErrorCode::kEmptyMask, "mask has no boundary");
  OcclusionDisk d;
  const Pixel& c = mask.boundary[rng.uniform_index(mask.boundary.size())];
  d.center = Vec2(c.x + 0.5, c.y + 0.5);
  d.radius = opt.forced_radius ? *opt.forced_radius
                               : rng.uniform(opt.min_ratio, opt.max_ratio) * mask_size(mask);
  for (int v = 0; v < opt.polygon_vertices; ++v) {
    const double a = 2.0 * kPi * v / opt.polygon_vertices;
    const double r = std::max(0.0, d.radius * (1.0 + opt.radial_noise * rng.normal()));
    d.polygon.emplace_back(d.center.x() + r * std::cos(a), d.center.y() + r * std::sin(a));
  }
  return d;
}

/// Draws `num_disks` occluders centered on the mask boundary of frame
/// `frame`, clears the covered mask pixels and hides covered observations.
inline std::pair<MaskRaster, TrackSet> apply_occlusion_disks(const MaskRaster& mask,
                                                             const TrackSet& tracks, int frame,
                                                             int num_disks, std::uint64_t seed,
                                                             const OcclusionOptions& opt = {}) {
  if (num_disks <= 0) return {mask, tracks};
  if (mask.empty()) fail(ErrorCode::kEmptyMask, "cannot occlude an empty mask");
  MaskRaster m = mask;
  if (m.boundary.empty()) m.compute_boundary();
  TrackSet out = tracks;
  Rng rng(seed);
  std::vector<OcclusionDisk> disks;
  for (int d = 0; d < num_disks; ++d) disks.push_back(sample_occlusion_disk(m, rng, opt));

  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      if (!m.at(x, y)) continue;
      const Vec2 p(x + 0.5, y + 0.5);
      for (const auto& d : disks)
        if (d.contains(p)) {
          m.set(x, y, false);
          break;
        }
    }
  m.compute_boundary();

  for (std::size_t i = 0; i < out.num_points(); ++i) {
    if (!out.visible(frame, i)) continue;
    for (const auto& d : disks)
      if (d.contains(out.position(frame, i))) {
        out.set_visible(frame, i, false);
        break;
      }
  }
  return {std::move(m), std::move(out)};
}

// ---------------------------------------------------------------------------
// Frame subsampling, grid sampling, crops
// ---------------------------------------------------------------------------

/// Uniformly random strictly increasing index list of length n from
/// [0, total) with consecutive gaps in [1, k_max].
inline std::vector<int> subsample_frames(int total, int n, int k_max, std::uint64_t seed) {
  if (n < 1 || k_max < 1) fail(ErrorCode::kInvalidParams, "n and k_max must be positive");
  if (total < n) fail(ErrorCode::kInsufficientFrames, "fewer frames than requested");
  // ways[r][i]: number of valid continuations with r more indices after i.
  std::vector<std::vector<double>> ways(n, std::vector<double>(total, 0.0));
  for (int i = 0; i < total; ++i) ways[0][i] = 1.0;
  for (int r = 1; r < n; ++r)
    for (int i = 0; i < total; ++i)
      for (int g = 1; g <= k_max && i + g < total; ++g) ways[r][i] += ways[r - 1][i + g];

  Rng rng(seed);
  auto pick = [&rng](const std::vector<std::pair<int, double>>& options) {
    double total_w = 0.0;
    for (const auto& o : options) total_w += o.second;
    double u = rng.uniform01() * total_w;
    for (const auto& o : options) {
      if (u < o.second) return o.first;
      u -= o.second;
    }
    return options.back().first;
  };

  std::vector<std::pair<int, double>> options;
  for (int i = 0; i < total; ++i)
    if (ways[n - 1][i] > 0) options.emplace_back(i, ways[n - 1][i]);
  std::vector<int> out{pick(options)};
  for (int r = n - 2; r >= 0; --r) {
    options.clear();
    for (int g = 1; g <= k_max && out.back() + g < total; ++g)
      if (ways[r][out.back() + g] > 0) options.emplace_back(out.back() + g, ways[r][out.back() + g]);
    out.push_back(pick(options));
  }
  return out;
}

/// Lattice samples (multiples of `grid` in x and y) on the mask. Sample
/// coordinates are pixel centers. At most `cap` are kept, chosen uniformly.
inline std::vector<Vec2> grid_sample_mask(const MaskRaster& mask, int grid, std::size_t cap,
                                          std::uint64_t seed) {
  if (grid < 1) fail(ErrorCode::kInvalidParams, "grid must be positive");
  std::vector<Vec2> pts;
  for (int y = 0; y < mask.height; y += grid)
    for (int x = 0; x < mask.width; x += grid)
      if (mask.at(x, y)) pts.emplace_back(x + 0.5, y + 0.5);
  if (pts.empty()) fail(ErrorCode::kEmptyMask, "mask has no lattice samples");
  if (pts.size() <= cap) return pts;
  std::vector<std::size_t> idx(pts.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  for (std::size_t i = 0; i < cap; ++i) {
    const std::size_t j = i + rng.uniform_index(idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  std::vector<Vec2> out;
  out.reserve(cap);
  for (std::size_t i : idx) out.push_back(pts[i]);
  return out;
}

/// Affine map from image pixels to crop pixels.
struct CropTransform {
  Eigen::Matrix<double, 2, 3> affine = Eigen::Matrix<double, 2, 3>::Identity();
  int out_width = 512;
  int out_height = 512;

  Vec2 apply(const Vec2& p) const { return affine.leftCols<2>() * p + affine.col(2); }

  CropTransform inverse() const {
    CropTransform inv = *this;
    const Eigen::Matrix2d a_inv = affine.leftCols<2>().inverse();
    inv.affine.leftCols<2>() = a_inv;
    inv.affine.col(2) = -(a_inv * affine.col(2));
    return inv;
  }

  double determinant() const { return affine.leftCols<2>().determinant(); }
};

/// Square crop around the mask bounding box, jittered by a uniform shift in
/// [-jitter_shift, jitter_shift] px per axis and a scale factor in
/// [1 - jitter_scale, 1 + jitter_scale].
inline CropTransform make_crop(const MaskRaster& mask, double jitter_shift, double jitter_scale,
                               std::uint64_t seed, int out_size = 512) {
  int x0 = mask.width, y0 = mask.height, x1 = -1, y1 = -1;
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      if (mask.at(x, y)) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
  if (x1 < 0) fail(ErrorCode::kEmptyMask, "cannot crop an empty mask");
  Rng rng(seed);
  const double shift_x = jitter_shift > 0 ? rng.uniform(-jitter_shift, jitter_shift) : 0.0;
  const double shift_y = jitter_shift > 0 ? rng.uniform(-jitter_shift, jitter_shift) : 0.0;
  const double scale = jitter_scale > 0 ? rng.uniform(1.0 - jitter_scale, 1.0 + jitter_scale) : 1.0;
  const Vec2 center(0.5 * (x0 + x1 + 1) + shift_x, 0.5 * (y0 + y1 + 1) + shift_y);
  const double side = std::max(x1 - x0 + 1, y1 - y0 + 1) * scale;
  const double s = out_size / side;
  CropTransform c;
  c.out_width = c.out_height = out_size;
  c.affine << s, 0.0, 0.5 * out_size - s * center.x(),
              0.0, s, 0.5 * out_size - s * center.y();
  return c;
}

}  // namespace posebench

#endif  // POSEBENCH_SCENE_SYNTH_HPP
