#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "scenes.hpp"

using namespace posebench;
using namespace posebench::sfm;

namespace {

const CameraIntrinsics kK;

void expect_pose_near(const Pose& a, const Pose& b, double deg, double m) {
  EXPECT_LT(rotation_angle_deg(Mat3(a.rotation.transpose() * b.rotation)), deg);
  EXPECT_LT((a.translation - b.translation).norm(), m);
}

std::vector<Vec2> pixels_of(const std::vector<Point3>& pts, const Pose& p) {
  std::vector<Vec2> px;
  for (const auto& x : pts) px.push_back(project(x, p, kK).pixel);
  return px;
}

}  // namespace

TEST(Pnp, NoiselessFiftyPoints) {
  Rng rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    const auto pts = scenes::random_cloud(rng, 50, 0.5, Vec3(0, 0, 0));
    Pose truth = scenes::random_pose(rng, 30, 0.3);
    truth.translation += Vec3(0, 0, 4);
    PnpConfig cfg;
    cfg.seed = trial;
    const auto est = register_view_pnp(pts, pixels_of(pts, truth), kK, cfg);
    expect_pose_near(est.pose, truth, 1e-6, 1e-8);
    EXPECT_EQ(est.inliers.size(), 50u);
  }
}

TEST(Pnp, MinimalSixPoints) {
  Rng rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const auto pts = scenes::random_cloud(rng, 6, 0.5, Vec3(0, 0, 0));
    Pose truth = scenes::random_pose(rng, 30, 0.3);
    truth.translation += Vec3(0, 0, 4);
    const auto est = register_view_pnp(pts, pixels_of(pts, truth), kK);
    expect_pose_near(est.pose, truth, 1e-6, 1e-8);
  }
}

TEST(Pnp, DltExactOnNormalizedCoordinates) {
  Rng rng(3);
  const auto pts = scenes::random_cloud(rng, 12, 0.5, Vec3(0, 0, 0));
  Pose truth = scenes::random_pose(rng, 40, 0.3);
  truth.translation += Vec3(0, 0, 3);
  std::vector<Vec2> xn;
  for (const auto& x : pts) xn.push_back(kK.normalize(project(x, truth, kK).pixel));
  expect_pose_near(pnp_dlt(pts, xn), truth, 1e-6, 1e-8);
}

TEST(Pnp, CollinearIsNoConsensus) {
  std::vector<Point3> pts;
  for (int i = 0; i < 20; ++i) pts.emplace_back(0.05 * i - 0.5, 0.02 * i, 0.03 * i);
  Pose truth;
  truth.translation = Vec3(0, 0, 4);
  try {
    register_view_pnp(pts, pixels_of(pts, truth), kK);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoConsensus);
  }
}

TEST(Pnp, RejectsOutliers) {
  Rng rng(4);
  const auto pts = scenes::random_cloud(rng, 60, 0.5, Vec3(0, 0, 0));
  Pose truth = scenes::random_pose(rng, 20, 0.3);
  truth.translation += Vec3(0, 0, 4);
  auto px = pixels_of(pts, truth);
  for (int i = 0; i < 15; ++i) px[i] += Vec2(rng.uniform(20, 60), rng.uniform(-60, -20));
  const auto est = register_view_pnp(pts, px, kK);
  expect_pose_near(est.pose, truth, 1e-6, 1e-8);
  EXPECT_EQ(est.inliers.size(), 45u);
  EXPECT_EQ(est.inliers.front(), 15);
}

TEST(Pnp, TooFewMatches) {
  Rng rng(5);
  const auto pts = scenes::random_cloud(rng, 5, 0.5, Vec3(0, 0, 4));
  EXPECT_THROW(register_view_pnp(pts, pixels_of(pts, Pose{}), kK), Error);
}

TEST(Pnp, RefineConvergesFromPerturbation) {
  Rng rng(6);
  const auto pts = scenes::random_cloud(rng, 40, 0.5, Vec3(0, 0, 0));
  Pose truth;
  truth.translation = Vec3(0.1, -0.05, 4);
  Pose init = truth;
  init.rotation = axis_angle(Vec3(1, 2, 3), deg2rad(2)) * truth.rotation;
  init.translation += Vec3(0.02, 0.01, -0.03);
  const Pose refined = refine_pose(init, pts, pixels_of(pts, truth), kK);
  expect_pose_near(refined, truth, 1e-7, 1e-9);
}
