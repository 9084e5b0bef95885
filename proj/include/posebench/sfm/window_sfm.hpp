#ifndef POSEBENCH_SFM_WINDOW_SFM_HPP
#define POSEBENCH_SFM_WINDOW_SFM_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "posebench/error.hpp"
#include "posebench/geometry.hpp"
#include "posebench/random.hpp"
#include "posebench/scene_synth.hpp"
#include "posebench/sfm/bundle_adjust.hpp"
#include "posebench/sfm/pnp.hpp"
#include "posebench/sfm/two_view.hpp"
#include "posebench/uncertainty.hpp"

namespace posebench::sfm {

struct SfmConfig {
  RansacConfig ransac;
  PnpConfig pnp;
  BundleAdjustConfig ba;
  double min_median_angle_deg = 1.0;  // degeneracy gate on the initialization pair
  double planar_ratio = 0.95;          // homography/essential support ratio flagged degenerate
  double observation_px = 4.0;         // reprojection gate for landmark observations
  double min_landmark_angle_deg = 0.5;
  std::uint64_t seed = 0;
};

/// All C(T,2) frame pairs; a correspondence for every track visible and
/// kept in both frames. Ordered by (frame_a, frame_b, track).
inline std::vector<Correspondence> build_pairs(const TrackSet& tracks, const KeptSet& kept) {
  if (tracks.num_frames < 2) fail(ErrorCode::kInvalidParams, "need >= 2 frames");
  const int t_count = tracks.num_frames;
  std::vector<std::vector<std::uint8_t>> is_kept(t_count, std::vector<std::uint8_t>(tracks.num_points(), 0));
  for (int t = 0; t < t_count && t < static_cast<int>(kept.size()); ++t)
    for (int i : kept[t])
      if (tracks.visible(t, i)) is_kept[t][i] = 1;
  std::vector<Correspondence> out;
  for (int a = 0; a < t_count; ++a)
    for (int b = a + 1; b < t_count; ++b)
      for (std::size_t i = 0; i < tracks.num_points(); ++i)
        if (is_kept[a][i] && is_kept[b][i])
          out.push_back({tracks.point_ids[i], static_cast<int>(i), a, b, tracks.position(a, i),
                         tracks.position(b, i)});
  return out;
}

namespace detail {

struct PairCandidate {
  int a = 0, b = 0;
  Pose relative;
  std::vector<Correspondence> inliers;  // in front of both cameras
  double median_angle = 0.0;
  double score = 0.0;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t m = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m), v.end());
  return v[m];
}

/// Re-expresses the reconstruction with `anchor` at the identity and the
/// scale frame's translation at unit norm.
inline void regauge(Reconstruction& r, int anchor, int scale_frame) {
  const Pose a = r.poses[anchor];
  const Pose a_inv = a.inverse();
  for (int f = 0; f < r.num_frames(); ++f)
    if (r.registered[f]) r.poses[f] = r.poses[f] * a_inv;
  for (auto& entry : r.landmarks) entry.second = a.transform(entry.second);
  r.poses[anchor] = Pose::identity();
  const double s = 1.0 / r.poses[scale_frame].translation.norm();
  for (int f = 0; f < r.num_frames(); ++f)
    if (r.registered[f]) r.poses[f].translation *= s;
  for (auto& entry : r.landmarks) entry.second *= s;
  r.poses[scale_frame].translation.normalize();
  r.anchor_frame = anchor;
  r.scale_frame = scale_frame;
}

}  // namespace detail

/// Incremental reconstruction of one window:
///   1. every frame pair with >= 8 correspondences gets an essential matrix
///      and relative pose; pairs a homography explains (planar scene or pure
///      rotation) are discarded; the rest are scored by
///      inlier count x median triangulation angle;
///   2. the best pair is triangulated, failing with DegenerateGeometry when
///      its median triangulation angle is below the gate;
///   3. remaining frames are registered by PnP in order of 2D-3D match
///      count, new landmarks triangulated after each registration;
///   4. global bundle adjustment, outlier re-gating, and a final gauge fix
///      (frame 0 at the identity, unit init baseline).
/// Frames that cannot be registered are left flagged.
inline Reconstruction estimate_window_poses(const TrackSet& tracks, const KeptSet& kept,
                                            const CameraIntrinsics& k, const SfmConfig& cfg = {}) {
  const int t_count = tracks.num_frames;
  if (t_count < 2) fail(ErrorCode::kInvalidParams, "need >= 2 frames");
  const auto corrs = build_pairs(tracks, kept);

  // --- Initialization pair -------------------------------------------------
  std::map<std::pair<int, int>, std::vector<Correspondence>> by_pair;
  for (const auto& c : corrs) by_pair[{c.frame_a, c.frame_b}].push_back(c);

  std::optional<detail::PairCandidate> best;
  bool any_pair = false;
  bool any_degenerate = false;
  std::optional<Error> last_error;
  for (const auto& [key, pc] : by_pair) {
    if (pc.size() < 8) continue;
    any_pair = true;
    try {
      RansacConfig rc = cfg.ransac;
      rc.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(key.first * 64 + key.second));
      const auto est = estimate_essential_ransac(pc, k, rc);
      std::vector<Correspondence> in;
      for (int i : est.inliers) in.push_back(pc[i]);
      if (homography_inlier_ratio(in, k, cfg.ransac.sampson_px) >= cfg.planar_ratio) {
        any_degenerate = true;
        continue;
      }
      const auto rel = recover_relative_pose_detailed(est.essential, in, k);
      detail::PairCandidate cand;
      cand.a = key.first;
      cand.b = key.second;
      cand.relative = rel.pose;
      std::vector<double> angles;
      const Pose origin;
      for (std::size_t i = 0; i < in.size(); ++i) {
        if (!rel.in_front[i]) continue;
        const Point3 x = triangulate_dlt_normalized(k.normalize(in[i].pixel_a), k.normalize(in[i].pixel_b),
                                                    origin, rel.pose);
        angles.push_back(triangulation_angle_deg(x, Vec3::Zero(), rel.pose.center()));
        cand.inliers.push_back(in[i]);
      }
      cand.median_angle = detail::median(angles);
      cand.score = static_cast<double>(cand.inliers.size()) * cand.median_angle;
      if (!best || cand.score > best->score) best = std::move(cand);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kCheiralityAmbiguous) any_degenerate = true;
      last_error = e;
    }
  }
  if (!any_pair) fail(ErrorCode::kInsufficientPoints, "no frame pair shares 8 selected points");
  if (!best) {
    if (any_degenerate) fail(ErrorCode::kDegenerateGeometry, "every frame pair is planar or rotation-only");
    throw *last_error;
  }
  if (best->median_angle < cfg.min_median_angle_deg)
    fail(ErrorCode::kDegenerateGeometry, "initialization pair has too little parallax");

  Reconstruction rec;
  rec.poses.assign(t_count, Pose::identity());
  rec.registered.assign(t_count, 0);
  rec.init_frame_a = best->a;
  rec.init_frame_b = best->b;
  rec.anchor_frame = best->a;
  rec.scale_frame = best->b;
  rec.registered[best->a] = 1;
  rec.registered[best->b] = 1;
  rec.poses[best->b] = best->relative;

  // Observations of every kept, visible track.
  std::vector<std::vector<int>> obs_of_track(tracks.num_points());
  for (int t = 0; t < t_count && t < static_cast<int>(kept.size()); ++t)
    for (int i : kept[t])
      if (tracks.visible(t, i)) {
        obs_of_track[i].push_back(static_cast<int>(rec.observations.size()));
        rec.observations.push_back({tracks.point_ids[i], t, tracks.position(t, i), false});
      }

  auto gate_landmark = [&](int track) {
    // Marks observations of a landmark by reprojection error; drops the
    // landmark when fewer than two survive.
    const int id = tracks.point_ids[track];
    const Point3& x = rec.landmarks.at(id);
    int good = 0;
    for (int oi : obs_of_track[track]) {
      auto& o = rec.observations[oi];
      o.inlier = rec.registered[o.frame] &&
                 reprojection_error(rec.poses[o.frame], x, o.pixel, k) < cfg.observation_px;
      good += o.inlier ? 1 : 0;
    }
    if (good < 2) {
      rec.landmarks.erase(id);
      for (int oi : obs_of_track[track]) rec.observations[oi].inlier = false;
    }
  };

  auto triangulate_new = [&]() {
    for (std::size_t i = 0; i < tracks.num_points(); ++i) {
      const int id = tracks.point_ids[i];
      if (rec.landmarks.count(id)) continue;
      std::vector<int> regs;
      for (int oi : obs_of_track[i])
        if (rec.registered[rec.observations[oi].frame]) regs.push_back(oi);
      if (regs.size() < 2) continue;
      double best_angle = -1.0;
      std::optional<Point3> best_x;
      for (std::size_t p = 0; p < regs.size(); ++p)
        for (std::size_t q = p + 1; q < regs.size(); ++q) {
          const auto& oa = rec.observations[regs[p]];
          const auto& ob = rec.observations[regs[q]];
          try {
            const Point3 x = triangulate_two_view(oa.pixel, ob.pixel, rec.poses[oa.frame], rec.poses[ob.frame], k);
            const double ang = triangulation_angle_deg(x, rec.poses[oa.frame].center(), rec.poses[ob.frame].center());
            if (ang > best_angle) {
              best_angle = ang;
              best_x = x;
            }
          } catch (const Error&) {
          }
        }
      if (!best_x || best_angle < cfg.min_landmark_angle_deg) continue;
      rec.landmarks[id] = *best_x;
      gate_landmark(static_cast<int>(i));
    }
  };

  // Two-view landmarks from the init pair inliers.
  for (const auto& c : best->inliers) {
    try {
      rec.landmarks[c.point_id] =
          triangulate_two_view(c.pixel_a, c.pixel_b, rec.poses[best->a], rec.poses[best->b], k);
      gate_landmark(c.track);
    } catch (const Error&) {
    }
  }
  rec = bundle_adjust(rec, k, cfg.ba);

  // --- Incremental registration ---------------------------------------------
  std::set<int> failed;
  while (true) {
    int next = -1;
    std::size_t next_matches = 0;
    for (int t = 0; t < t_count; ++t) {
      if (rec.registered[t] || failed.count(t)) continue;
      std::size_t m = 0;
      for (int i : kept[t])
        if (tracks.visible(t, i) && rec.landmarks.count(tracks.point_ids[i])) ++m;
      if (m > next_matches) {
        next_matches = m;
        next = t;
      }
    }
    if (next < 0 || next_matches < static_cast<std::size_t>(kPnpMinimalSample)) break;

    std::vector<Point3> pts;
    std::vector<Vec2> px;
    for (int i : kept[next])
      if (tracks.visible(next, i) && rec.landmarks.count(tracks.point_ids[i])) {
        pts.push_back(rec.landmarks.at(tracks.point_ids[i]));
        px.push_back(tracks.position(next, i));
      }
    try {
      PnpConfig pc = cfg.pnp;
      pc.seed = derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(next));
      const auto est = register_view_pnp(pts, px, k, pc);
      rec.poses[next] = est.pose;
      rec.registered[next] = 1;
      failed.clear();
    } catch (const Error&) {
      failed.insert(next);
      continue;
    }
    for (std::size_t i = 0; i < tracks.num_points(); ++i)
      if (rec.landmarks.count(tracks.point_ids[i])) gate_landmark(static_cast<int>(i));
    triangulate_new();
    rec = bundle_adjust(rec, k, cfg.ba);
  }

  // --- Global refinement and gauge -----------------------------------------
  int anchor = 0;
  while (anchor < t_count && !rec.registered[anchor]) ++anchor;
  int scale_frame = rec.init_frame_b != anchor ? rec.init_frame_b : rec.init_frame_a;
  detail::regauge(rec, anchor, scale_frame);

  for (int round = 0; round < 3; ++round) {
    rec = bundle_adjust(rec, k, cfg.ba);
    const auto before = rec.landmarks.size();
    std::size_t before_in = 0;
    for (const auto& o : rec.observations) before_in += o.inlier ? 1 : 0;
    for (std::size_t i = 0; i < tracks.num_points(); ++i)
      if (rec.landmarks.count(tracks.point_ids[i])) gate_landmark(static_cast<int>(i));
    std::size_t after_in = 0;
    for (const auto& o : rec.observations) after_in += o.inlier ? 1 : 0;
    if (rec.landmarks.size() == before && after_in == before_in) break;
  }
  // Landmarks behind any inlier camera violate cheirality; drop them.
  for (std::size_t i = 0; i < tracks.num_points(); ++i) {
    const int id = tracks.point_ids[i];
    if (!rec.landmarks.count(id)) continue;
    for (int oi : obs_of_track[i]) {
      const auto& o = rec.observations[oi];
      if (o.inlier && !(rec.poses[o.frame].transform(rec.landmarks.at(id)).z() > kMinDepth)) {
        rec.landmarks.erase(id);
        for (int oj : obs_of_track[i]) rec.observations[oj].inlier = false;
        break;
      }
    }
  }
  rec.poses[rec.anchor_frame] = Pose::identity();
  rec.rmse = reprojection_rmse(rec, k);
  return rec;
}

}  // namespace posebench::sfm

#endif  // POSEBENCH_SFM_WINDOW_SFM_HPP
