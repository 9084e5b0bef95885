#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "scenes.hpp"

using namespace posebench;
using namespace posebench::sfm;

namespace {

const CameraIntrinsics kK;

TrackSet full_tracks(int frames, int n) {
  std::vector<int> ids(n);
  for (int i = 0; i < n; ++i) ids[i] = 10 * i;
  TrackSet t(frames, ids);
  for (int f = 0; f < frames; ++f)
    for (int i = 0; i < n; ++i) {
      t.position(f, i) = Vec2(f, i);
      t.set_visible(f, i, true);
    }
  return t;
}

struct Scene {
  Trajectory traj;
  ObjectModel model;
  TrackSet tracks;
};

Scene circling_scene(std::size_t first, double scale = 1.0, TrajectoryMode mode = TrajectoryMode::kCircling,
                     std::uint64_t seed = 0) {
  TrajectoryParams p;
  p.mode = mode;
  p.seed = seed;
  Scene s;
  s.traj = scenes::window_of(generate_trajectory(p), first);
  s.model = make_sphere(200);
  for (auto& pose : s.traj.poses) pose.translation *= scale;
  for (auto& x : s.model.points) x *= scale;
  assign_surfel_radius(s.model);
  s.tracks = synthesize_window(s.model, s.traj, kK).tracks;
  return s;
}

}  // namespace

TEST(Pairs, Counting) {
  auto t = full_tracks(8, 1);
  EXPECT_EQ(build_pairs(t, select_keypoints(t, SelectionStrategy::kNone)).size(), 28u);

  for (int f = 0; f < 8; ++f) t.set_visible(f, 0, f == 3);
  EXPECT_EQ(build_pairs(t, select_keypoints(t, SelectionStrategy::kNone)).size(), 0u);

  const auto t2 = full_tracks(2, 10);
  const auto pairs = build_pairs(t2, select_keypoints(t2, SelectionStrategy::kNone));
  ASSERT_EQ(pairs.size(), 10u);
  for (const auto& c : pairs) {
    EXPECT_LT(c.frame_a, c.frame_b);
    EXPECT_EQ(c.point_id, 10 * c.track);
  }
}

TEST(Pairs, OnlyKeptObservations) {
  const auto t = full_tracks(3, 4);
  KeptSet kept{{0, 1, 2, 3}, {0, 2}, {1, 2}};
  // (0,1): 0,2  (0,2): 1,2  (1,2): 2
  EXPECT_EQ(build_pairs(t, kept).size(), 5u);
}

TEST(WindowSfm, NoiselessCirclingWindow) {
  const auto s = circling_scene(5);
  const auto rec = estimate_window_poses(s.tracks, select_keypoints(s.tracks, SelectionStrategy::kNone), kK);
  ASSERT_TRUE(rec.all_registered());
  const auto score = evaluate_window(rec, s.traj);
  ASSERT_TRUE(score.registered);
  EXPECT_LT(score.ate, 1e-4);
  EXPECT_LT(score.rpe_rot, 1e-2);
  EXPECT_LT(score.t_err, 1e-2);
  EXPECT_LT(rec.rmse, 1e-6);
}

TEST(WindowSfm, GaugeAndCheirality) {
  for (std::size_t first : {0u, 30u, 77u}) {
    const auto s = circling_scene(first);
    const auto rec = estimate_window_poses(s.tracks, select_keypoints(s.tracks, SelectionStrategy::kNone), kK);
    EXPECT_TRUE(rec.poses[0] == Pose::identity());
    EXPECT_EQ(rec.anchor_frame, 0);
    EXPECT_NEAR(rec.poses[rec.scale_frame].translation.norm(), 1.0, 1e-12);
    for (const auto& o : rec.observations)
      if (o.inlier && rec.landmarks.count(o.point_id)) {
        EXPECT_GT(rec.poses[o.frame].transform(rec.landmarks.at(o.point_id)).z(), 0.0);
      }
  }
}

TEST(WindowSfm, RandomWalkWindow) {
  const auto s = circling_scene(0, 1.0, TrajectoryMode::kRandomWalk, 12);
  const auto rec = estimate_window_poses(s.tracks, select_keypoints(s.tracks, SelectionStrategy::kNone), kK);
  ASSERT_TRUE(rec.all_registered());
  const auto score = evaluate_window(rec, s.traj);
  EXPECT_LT(score.ate, 1e-4);
  EXPECT_LT(score.rpe_rot, 1e-2);
}

TEST(WindowSfm, ScaleAmbiguityBitwise) {
  const auto a = circling_scene(20, 1.0), b = circling_scene(20, 2.0);
  ASSERT_EQ(a.tracks.positions, b.tracks.positions);
  ASSERT_EQ(a.tracks.visibility, b.tracks.visibility);
  const auto kept = select_keypoints(a.tracks, SelectionStrategy::kNone);
  const auto ra = estimate_window_poses(a.tracks, kept, kK), rb = estimate_window_poses(b.tracks, kept, kK);
  for (int f = 0; f < 8; ++f) EXPECT_TRUE(ra.poses[f] == rb.poses[f]);
  EXPECT_EQ(ra.landmarks, rb.landmarks);
}

TEST(WindowSfm, Deterministic) {
  auto s = circling_scene(50);
  NoiseProfile p;
  p.level_weights = {0.9, 0, 0, 0, 0.1};
  p.seed = 4;
  const auto noisy = corrupt_tracks(s.tracks, p);
  const auto kept = select_keypoints(noisy, SelectionStrategy::kNone);
  const auto a = estimate_window_poses(noisy, kept, kK), b = estimate_window_poses(noisy, kept, kK);
  for (int f = 0; f < 8; ++f) EXPECT_TRUE(a.poses[f] == b.poses[f]);
  EXPECT_EQ(a.landmarks, b.landmarks);
  EXPECT_EQ(a.rmse, b.rmse);
}

TEST(WindowSfm, StaticWindowIsDegenerate) {
  Trajectory t;
  const Pose p = look_at(Vec3(0.6, 0, 0.1), Vec3::Zero());
  for (int i = 0; i < 8; ++i) {
    t.poses.push_back(p);
    t.frame_indices.push_back(i);
  }
  const auto tracks = synthesize_window(make_sphere(200), t, kK).tracks;
  try {
    estimate_window_poses(tracks, select_keypoints(tracks, SelectionStrategy::kNone), kK);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateGeometry);
  }
}

TEST(WindowSfm, CoplanarIsDegenerate) {
  TrajectoryParams tp;
  tp.height_range = {0.3, 0.5};
  const auto t = scenes::window_of(generate_trajectory(tp), 0);
  const auto tracks = synthesize_window(make_planar(200, 0.1, Vec3(0, 0, 1), 3), t, kK).tracks;
  try {
    estimate_window_poses(tracks, select_keypoints(tracks, SelectionStrategy::kNone), kK);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateGeometry);
  }
}

TEST(WindowSfm, FourPointsInsufficient) {
  auto s = circling_scene(0);
  int kept_points = 0;
  for (std::size_t i = 0; i < s.tracks.num_points(); ++i) {
    bool any = false;
    for (int f = 0; f < 8; ++f) any = any || s.tracks.visible(f, i);
    if (any && kept_points < 4) {
      ++kept_points;
      continue;
    }
    for (int f = 0; f < 8; ++f) s.tracks.set_visible(f, i, false);
  }
  try {
    estimate_window_poses(s.tracks, select_keypoints(s.tracks, SelectionStrategy::kNone), kK);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientPoints);
  }
}

TEST(WindowSfm, RobustToFewGrossOutliers) {
  auto s = circling_scene(64);
  NoiseProfile p;
  p.level_weights = {0.95, 0, 0, 0, 0.05};
  p.ranges = {{0, 0}, {1, 3}, {3, 5}, {5, 10}, {10, 30}};
  p.seed = 1;
  const auto noisy = corrupt_tracks(s.tracks, p);
  const auto rec = estimate_window_poses(noisy, select_keypoints(noisy, SelectionStrategy::kNone), kK);
  ASSERT_TRUE(rec.all_registered());
  EXPECT_LT(evaluate_window(rec, s.traj).rpe_rot, 0.05);
}
