// Acceptance run: one PASS/FAIL line per criterion. Exit status 1 if any
// criterion fails, except those named with --known-red.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "posebench/posebench.hpp"

using namespace posebench;
using clk = std::chrono::steady_clock;

namespace {

const CameraIntrinsics kK;
std::vector<int> failed;

void report(int id, bool ok, const std::string& what, const std::string& detail) {
  std::printf("%s criterion %d: %s [%s]\n", ok ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) failed.push_back(id);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Sample {
  std::uint64_t seed = 0;
  int window = 0;
  Trajectory gt;
  SynthesizedWindow synth;
};

/// First `n` windows of the benchmark plan over consecutive seeds, at most
/// `per_seed` from each, synthesized and occluded as the pipeline does.
std::vector<Sample> collect_windows(BenchConfig cfg, std::size_t n, std::uint64_t first_seed, int per_seed) {
  std::vector<Sample> out;
  cfg.windowing.max_windows_per_seed = per_seed;
  for (std::uint64_t s = first_seed; out.size() < n; ++s) {
    cfg.seeds = {s};
    const SeedPlan plan = plan_seed(cfg, 0);
    for (std::size_t w = 0; w < plan.windows.size() && out.size() < n; ++w) {
      Sample smp;
      smp.seed = s;
      smp.window = static_cast<int>(w);
      smp.gt = plan.trajectory.select(std::vector<std::size_t>(plan.windows[w].begin(), plan.windows[w].end()));
      smp.synth = synthesize_window(plan.model, smp.gt, cfg.camera, cfg.synth);
      occlude_window(smp.synth, cfg.p_occlude, cfg.occlusion, cfg.synth.reference_frame,
                     window_seed(s, smp.window, stream::kOcclusion));
      out.push_back(std::move(smp));
    }
  }
  return out;
}

BenchConfig mixed_mode_config() {
  BenchConfig cfg;
  cfg.modes = {TrajectoryMode::kCircling, TrajectoryMode::kRandomWalk};
  return cfg;
}

/// Corrupt, attach logits, select, estimate, score. Solver errors become
/// unregistered scores.
WindowScore score_sample(const Sample& s, NoiseProfile noise, SelectionStrategy strategy, std::uint64_t noise_seed,
                         double keep_ratio = 0.95) {
  noise.seed = window_seed(noise_seed, s.window, stream::kNoise) ^ s.seed;
  TrackSet tracks = corrupt_tracks(s.synth.tracks, noise);
  attach_logits(tracks, noise.logit_sharpness, noise.confusion_prob, noise.seed + 1);
  try {
    sfm::SfmConfig sc;
    sc.seed = window_seed(s.seed, s.window, stream::kSfm);
    const auto rec = sfm::estimate_window_poses(tracks, select_keypoints(tracks, strategy, keep_ratio), kK, sc);
    return evaluate_window(rec, s.gt);
  } catch (const Error& e) {
    WindowScore f;
    f.failure = std::string(error_code_name(e.code()));
    return f;
  }
}

double ap_of(const std::vector<WindowScore>& scores, Metric m, double tau) {
  std::vector<std::optional<double>> v;
  for (const auto& s : scores) v.push_back(s.value(m));
  return ap_at_threshold(v, tau);
}

Pose random_pose(Rng& rng, double max_deg, double max_t) {
  return {axis_angle(rng.unit_vector(), deg2rad(rng.uniform(0, max_deg))),
          Vec3(rng.uniform(-max_t, max_t), rng.uniform(-max_t, max_t), rng.uniform(-max_t, max_t))};
}

// --- 1 -------------------------------------------------------------------------

void noiseless_end_to_end() {
  const BenchConfig cfg = mixed_mode_config();
  const auto t0 = clk::now();
  const auto samples = collect_windows(cfg, 100, 1000, 2);
  int registered = 0, accurate = 0;
  double worst_ate = 0, worst_rot = 0, worst_terr = 0;
  NoiseProfile clean = single_level_profile(1);
  clean.ranges = {{0, 0}, {0, 0}, {0, 0}, {0, 0}, {0, 0}};
  for (const auto& s : samples) {
    const auto sc = score_sample(s, clean, SelectionStrategy::kNone, 1);
    if (!sc.registered) continue;
    ++registered;
    worst_ate = std::max(worst_ate, sc.ate);
    worst_rot = std::max(worst_rot, sc.rpe_rot);
    worst_terr = std::max(worst_terr, sc.t_err);
    accurate += sc.ate < 1e-4 && sc.rpe_rot < 0.01 && sc.t_err < 0.01;
  }
  const double per_window = std::chrono::duration<double>(clk::now() - t0).count() / samples.size();
  report(1, registered >= 95 && accurate == registered && per_window < 1.0,
         "noiseless end-to-end registration and accuracy",
         fmt("%d/100 registered, %d accurate; worst ATE %.2e m, RPE-rot %.2e deg, t_err %.2e %%; %.3f s/window", registered,
             accurate, worst_ate, worst_rot, worst_terr, per_window));
}

// --- 2 -------------------------------------------------------------------------

void umeyama_exactness() {
  Rng rng(2);
  double worst_s = 0, worst_r = 0, worst_t = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    SimilarityTransform truth;
    truth.scale = std::exp(rng.uniform(-2, 2));
    truth.rotation = axis_angle(rng.unit_vector(), rng.uniform(0, kPi));
    truth.translation = Vec3(rng.normal(0, 5), rng.normal(0, 5), rng.normal(0, 5));
    std::vector<Point3> src(3 + rng.uniform_index(30)), dst;
    for (auto& p : src) p = Vec3(rng.normal(), rng.normal(), rng.normal());
    for (const auto& p : src) dst.push_back(truth.apply(p));
    const auto est = umeyama_align(src, dst);
    worst_s = std::max(worst_s, std::abs(est.scale / truth.scale - 1.0));
    worst_r = std::max(worst_r, deg2rad(rotation_angle_deg(Mat3(est.rotation.transpose() * truth.rotation))));
    worst_t = std::max(worst_t, (est.translation - truth.translation).norm());
  }
  report(2, worst_s < 1e-9 && worst_r < 1e-9 && worst_t < 1e-9, "Umeyama similarity recovery on 1000 trials",
         fmt("worst scale %.1e, rotation %.1e rad, translation %.1e m", worst_s, worst_r, worst_t));
}

// --- 3 -------------------------------------------------------------------------

void hand_values() {
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1e-300, std::abs(b)); };
  std::vector<std::string> bad;

  const std::vector<double> probs{0.7, 0.1, 0.1, 0.05, 0.05};
  const std::vector<int> label{1};
  if (rel(uncertainty_loss(probs, label, 5), -std::log(0.7)) > 1e-12) bad.push_back("CE");

  const std::vector<Vec2> gt{Vec2(3, 4)};
  std::vector<std::vector<Vec2>> iterates(4, std::vector<Vec2>{Vec2(4, 4)});
  if (rel(keypoint_loss(iterates, gt, 0.8, 4), 2.952) > 1e-12) bad.push_back("keypoint");
  if (rel(total_loss(1, 1, 1, LossWeights{1, 5, 5}), 11.0) > 1e-12) bad.push_back("total");

  const std::vector<std::pair<double, int>> table{{0.0, 1},  {0.999, 1}, {1.0, 2},  {2.999, 2}, {3.0, 3},
                                                  {4.999, 3}, {5.0, 4},  {9.999, 4}, {10.0, 5}, {1e9, 5}};
  for (const auto& [e, k] : table)
    if (label_error(e) != k) bad.push_back(fmt("label(%g)", e));

  TrajectoryParams tp;
  tp.num_frames = 8;
  const Trajectory gt_traj = generate_trajectory(tp);
  Trajectory pred = gt_traj;
  Pose c2w = gt_traj.poses[0].inverse();
  for (std::size_t i = 1; i < gt_traj.size(); ++i) {
    c2w = c2w * (gt_traj.poses[i - 1] * gt_traj.poses[i].inverse()) * Pose{Mat3::Identity(), Vec3(0.01, 0, 0)};
    pred.poses[i] = c2w.inverse();
  }
  if (rel(rpe(pred, gt_traj).trans, 0.01) > 1e-12) bad.push_back("RPE drift");

  const std::vector<std::optional<double>> v{0.005, 0.02, 0.04};
  if (rel(ap_at_threshold(v, 0.01), 1.0 / 3) > 1e-12 || rel(ap_at_threshold(v, 0.03), 2.0 / 3) > 1e-12 ||
      rel(ap_at_threshold(v, 0.05), 1.0) > 1e-12)
    bad.push_back("AP");

  std::string detail = "CE, keypoint, total, 10 label boundaries, RPE drift, AP counts";
  if (!bad.empty()) {
    detail = "mismatch:";
    for (const auto& b : bad) detail += " " + b;
  }
  report(3, bad.empty(), "hand-computed unit values", detail);
}

// --- 4 -------------------------------------------------------------------------

void metric_invariances() {
  Rng rng(4);
  double worst_ate = 0, worst_rpe = 0;
  bool ap_monotone = true;
  for (int trial = 0; trial < 1000; ++trial) {
    TrajectoryParams tp;
    tp.num_frames = 8;
    tp.mode = trial % 2 ? TrajectoryMode::kNoisyCircle : TrajectoryMode::kCircling;
    tp.seed = trial;
    const Trajectory gt = generate_trajectory(tp);
    Trajectory pred = gt;
    for (auto& p : pred.poses) {
      p.rotation = axis_angle(rng.unit_vector(), deg2rad(rng.uniform(0, 2))) * p.rotation;
      p.translation += Vec3(rng.normal(0, 0.01), rng.normal(0, 0.01), rng.normal(0, 0.01));
    }
    const double base_ate = ate_rmse(align_trajectory(pred, gt).first, gt);

    // Pre-applied similarity: world points map by x -> s R x + t.
    const double s = std::exp(rng.uniform(-1.5, 1.5));
    const Mat3 r = axis_angle(rng.unit_vector(), rng.uniform(0, kPi));
    const Vec3 t(rng.normal(0, 2), rng.normal(0, 2), rng.normal(0, 2));
    Trajectory moved = pred;
    for (auto& p : moved.poses) {
      const Vec3 c = s * (r * p.center()) + t;
      p.rotation = p.rotation * r.transpose();
      p.translation = -p.rotation * c;
    }
    worst_ate = std::max(worst_ate, std::abs(ate_rmse(align_trajectory(moved, gt).first, gt) - base_ate));

    const auto base_rpe = rpe(pred, gt);
    const Pose g = random_pose(rng, 180, 3);
    Trajectory composed = pred;
    for (auto& p : composed.poses) p = p * g;  // camera-to-world G * P
    const auto moved_rpe = rpe(composed, gt);
    worst_rpe = std::max({worst_rpe, std::abs(moved_rpe.trans - base_rpe.trans),
                          std::abs(deg2rad(moved_rpe.rot - base_rpe.rot))});

    std::vector<std::optional<double>> vals;
    for (int i = 0; i < 20; ++i)
      vals.push_back(rng.uniform(0, 1) < 0.2 ? std::nullopt : std::optional<double>(rng.uniform(0, 1)));
    double prev = 0;
    for (int i = 0; i <= 100; ++i) {
      const double ap = ap_at_threshold(vals, i / 100.0);
      ap_monotone = ap_monotone && ap >= prev;
      prev = ap;
    }
  }
  report(4, worst_ate <= 1e-9 && worst_rpe <= 1e-12 && ap_monotone, "metric invariances on 1000 trials each",
         fmt("ATE under Sim(3) %.1e, RPE under rigid composition %.1e, AP monotone %s", worst_ate, worst_rpe,
             ap_monotone ? "yes" : "no"));
}

// --- 5 -------------------------------------------------------------------------

void noise_monotonicity() {
  const auto samples = collect_windows(mixed_mode_config(), 200, 5000, 2);
  const std::vector<double> sigmas{0, 1, 2, 4};
  std::vector<double> ap;
  for (double sigma : sigmas) {
    std::vector<WindowScore> scores;
    for (std::uint64_t rep = 0; rep < 3; ++rep)
      for (const auto& s : samples)
        scores.push_back(score_sample(s, gaussian_profile(sigma), SelectionStrategy::kNone, 50 + rep));
    ap.push_back(ap_of(scores, Metric::kRpeRot, 2.0));
  }
  bool monotone = true;
  for (std::size_t i = 1; i < ap.size(); ++i) monotone = monotone && ap[i] <= ap[i - 1];
  report(5, monotone && ap.front() - ap.back() >= 0.1, "AP(RPE-rot@2deg) non-increasing in tracker noise",
         fmt("sigma 0/1/2/4 px -> AP %.3f / %.3f / %.3f / %.3f over 200 windows x 3 seeds", ap[0], ap[1], ap[2], ap[3]));
}

// --- 6 -------------------------------------------------------------------------

void selection_benefit() {
  const auto samples = collect_windows(mixed_mode_config(), 200, 9000, 2);
  NoiseProfile mixed;
  mixed.level_weights = {0.9, 0, 0, 0, 0.1};
  mixed.logit_sharpness = 10.0;
  mixed.confusion_prob = 0.0;
  std::vector<WindowScore> none, level, rank;
  for (const auto& s : samples) {
    none.push_back(score_sample(s, mixed, SelectionStrategy::kNone, 60));
    level.push_back(score_sample(s, mixed, SelectionStrategy::kByLevel, 60));
    rank.push_back(score_sample(s, mixed, SelectionStrategy::kByRanking, 60));
  }
  const double none_t = ap_of(none, Metric::kRpeTrans, 0.015), rank_t = ap_of(rank, Metric::kRpeTrans, 0.015);
  const double level_r = ap_of(level, Metric::kRpeRot, 2.0), rank_r = ap_of(rank, Metric::kRpeRot, 2.0);
  report(6, rank_t - none_t >= 0.02 && rank_r >= level_r, "by_ranking selection beats none and matches by_level",
         fmt("AP(RPE@0.015m) none %.3f, by_level %.3f, by_ranking %.3f; AP(RPE@2deg) none %.3f, by_level %.3f, "
             "by_ranking %.3f",
             none_t, ap_of(level, Metric::kRpeTrans, 0.015), rank_t, ap_of(none, Metric::kRpeRot, 2.0), level_r,
             rank_r));
}

// --- 7 -------------------------------------------------------------------------

void degeneracy_detection() {
  int degenerate = 0, silent_bad = 0, registered = 0;
  for (int c = 0; c < 100; ++c) {
    Rng rng(7000 + c);
    Trajectory gt;
    ObjectModel model;
    if (c % 2 == 0) {
      // Static camera in front of a convex object.
      const double az = rng.uniform(0, 2 * kPi);
      const Pose p = look_at(Vec3(0.6 * std::cos(az), 0.6 * std::sin(az), rng.uniform(0, 0.4)), Vec3::Zero());
      for (int i = 0; i < 8; ++i) {
        gt.poses.push_back(p);
        gt.frame_indices.push_back(i);
      }
      model = make_sphere(200);
    } else {
      // Circling above a planar point set.
      TrajectoryParams tp;
      tp.num_frames = 60;
      tp.height_range = {0.3, 0.5};
      tp.seed = c;
      const Trajectory full = generate_trajectory(tp);
      const std::size_t first = rng.uniform_index(full.size() - 8);
      std::vector<std::size_t> pos;
      for (std::size_t i = 0; i < 8; ++i) pos.push_back(first + i);
      gt = full.select(pos);
      model = make_planar(200, 0.1, Vec3(0, 0, 1), 7000 + c);
    }
    const auto tracks = synthesize_window(model, gt, kK).tracks;
    try {
      const auto rec = sfm::estimate_window_poses(tracks, select_keypoints(tracks, SelectionStrategy::kNone), kK);
      if (rec.all_registered()) {
        ++registered;
        Trajectory pred = gt;
        pred.poses = rec.poses;
        if (rpe(pred, gt).rot > 5.0) ++silent_bad;
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kDegenerateGeometry) ++degenerate;
    }
  }
  report(7, degenerate >= 95 && silent_bad == 0, "static and coplanar windows flagged DegenerateGeometry",
         fmt("%d/100 DegenerateGeometry, %d registered, %d registered with RPE-rot > 5 deg", degenerate, registered,
             silent_bad));
}

// --- 8 -------------------------------------------------------------------------

void keyframe_examples() {
  std::vector<Vec2> grid;
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) grid.emplace_back(100 + 50 * x, 100 + 50 * y);
  std::vector<Vec2> ring;
  for (int i = 0; i < 12; ++i) ring.emplace_back(std::cos(i * kPi / 6), std::sin(i * kPi / 6));

  auto build = [](int frames, const std::vector<Vec2>& base, const std::function<Vec2(int, const Vec2&)>& motion) {
    std::vector<int> ids(base.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
    TrackSet t(frames, ids);
    for (int f = 0; f < frames; ++f)
      for (std::size_t i = 0; i < base.size(); ++i) {
        t.position(f, i) = motion(f, base[i]);
        t.set_visible(f, i, true);
      }
    return t;
  };
  const auto still = gate_frames(build(10, grid, [](int, const Vec2& p) { return p; }));
  const auto slide = gate_frames(build(10, grid, [](int f, const Vec2& p) { return Vec2(p + Vec2(3.0 * f, 0)); }));
  const auto zoom_d = gate_frames_detailed(
      build(5, ring, [](int f, const Vec2& p) { return Vec2(Vec2(256, 256) + std::pow(1.4, f) * p); }));

  bool zoom_ok = zoom_d.size() == 5;
  for (std::size_t i = 1; i < zoom_d.size(); ++i) zoom_ok = zoom_ok && zoom_d[i].reason == GateReason::kScale;
  const std::vector<int> all10{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  report(8, still == std::vector<int>{0} && slide == all10 && zoom_ok, "keyframe gate examples",
         fmt("static -> %zu kept, 3 px/frame -> %zu/10, x1.4 zoom -> %zu/5 via scale", still.size(), slide.size(),
             zoom_d.size()));
}

// --- 9 -------------------------------------------------------------------------

void determinism_and_round_trips() {
  BenchConfig cfg = mixed_mode_config();
  cfg.trajectory.num_frames = 40;
  cfg.windowing.max_windows_per_seed = 2;
  cfg.seeds = {11, 12};
  cfg.noise.level_weights = {0.9, 0, 0, 0, 0.1};
  cfg.methods = {{"none", SelectionStrategy::kNone, 0.95}, {"by_ranking", SelectionStrategy::kByRanking, 0.95}};
  cfg.threads = 1;
  const auto a = run_benchmark(cfg);
  cfg.threads = 2;
  const auto b = run_benchmark(cfg);
  const bool same = report_to_json(a).dump() == report_to_json(b).dump() &&
                    io::ap_table_csv(a.table) == io::ap_table_csv(b.table) && plot_data_csv(a) == plot_data_csv(b);

  Rng rng(9);
  int lossless = 0;
  for (int i = 0; i < 100; ++i) {
    bool ok = true;
    Trajectory t;
    const int n = 2 + static_cast<int>(rng.uniform_index(20));
    for (int f = 0; f < n; ++f) {
      t.poses.push_back(random_pose(rng, 180, 5));
      t.frame_indices.push_back(3 * f + static_cast<std::int64_t>(rng.uniform_index(3)));
    }
    const auto t2 = io::trajectory_from_json(io::parse_json(io::trajectory_to_json(t).dump())).trajectory;
    for (int f = 0; f < n; ++f) ok = ok && t2.poses[f] == t.poses[f];
    ok = ok && t2.frame_indices == t.frame_indices;

    TrackSet ts(2 + static_cast<int>(rng.uniform_index(6)), std::vector<int>{4, 8, 15, 16, 23, 42});
    for (int f = 0; f < ts.num_frames; ++f)
      for (std::size_t p = 0; p < ts.num_points(); ++p) {
        ts.position(f, p) = Vec2(rng.uniform(-50, 600), rng.uniform(-50, 600));
        ts.set_visible(f, p, rng.bernoulli(0.8));
      }
    NoiseProfile np;
    np.level_weights = {0.2, 0.2, 0.2, 0.2, 0.2};
    np.seed = i;
    ts = corrupt_tracks(ts, np);
    attach_logits(ts, rng.uniform(1, 20), 0.1, i);
    const auto tj = io::trackset_to_json(ts);
    ok = ok && io::trackset_to_json(io::trackset_from_json(io::parse_json(tj.dump()))) == tj;

    const KeptSet kept = select_keypoints(ts, SelectionStrategy::kByRanking, rng.uniform(0.5, 1));
    ok = ok && io::kept_from_json(io::parse_json(io::kept_to_json(kept).dump())) == kept;

    WindowScore sc;
    sc.registered = rng.bernoulli(0.7);
    sc.ate = rng.uniform(0, 1);
    sc.rpe_rot = rng.uniform(0, 10);
    sc.t_err = rng.uniform(0, 100);
    sc.alignment.scale = rng.uniform(0.1, 10);
    sc.alignment.rotation = axis_angle(rng.unit_vector(), 1.0);
    if (!sc.registered) sc.failure = "NoConsensus";
    const auto sj = io::score_to_json(sc);
    ok = ok && io::score_to_json(io::score_from_json(io::parse_json(sj.dump()))) == sj;

    sfm::Reconstruction rec;
    for (int f = 0; f < 4; ++f) {
      rec.poses.push_back(random_pose(rng, 90, 2));
      rec.registered.push_back(rng.bernoulli(0.8));
    }
    rec.landmarks[static_cast<int>(rng.uniform_index(100))] = Vec3(rng.normal(), rng.normal(), rng.normal());
    rec.rmse = rng.uniform(0, 2);
    const auto rj = io::reconstruction_to_json(rec);
    ok = ok && io::reconstruction_to_json(io::reconstruction_from_json(io::parse_json(rj.dump()))) == rj;

    std::vector<ApEntry> rows{{"m", kAllMetrics[rng.uniform_index(5)], rng.uniform(0, 1), rng.uniform(0, 1), 7, 2}};
    const auto back = io::ap_table_from_csv(io::ap_table_csv(rows));
    ok = ok && back.size() == 1 && back[0].threshold == rows[0].threshold && back[0].ap == rows[0].ap &&
         back[0].metric == rows[0].metric;

    BenchConfig c;
    c.trajectory.radius = rng.uniform(0.3, 2);
    c.noise.logit_sharpness = rng.uniform(1, 20);
    c.seeds = {rng.next_u64(), rng.next_u64()};
    const auto cj = config_to_json(c);
    ok = ok && config_to_json(config_from_json(io::parse_json(cj.dump()))) == cj;

    lossless += ok;
  }
  report(9, same && lossless == 100, "byte-identical reruns and lossless file round-trips",
         fmt("reports identical across runs and thread counts: %s; %d/100 artifact sets round-trip", same ? "yes" : "no",
             lossless));
}

// --- 10 ------------------------------------------------------------------------

sfm::Reconstruction ba_scene(Rng& rng) {
  sfm::Reconstruction r;
  r.poses.push_back(Pose{});
  for (int f = 1; f < 8; ++f) {
    Pose p = random_pose(rng, 8, 0.4);
    if (f == 1) p.translation = p.translation.normalized();
    r.poses.push_back(p);
  }
  r.registered.assign(8, 1);
  for (int i = 0; i < 60; ++i) {
    const Vec3 x(rng.uniform(-1, 1), rng.uniform(-1, 1), 6 + rng.uniform(-1, 1));
    r.landmarks[i] = x;
    for (int f = 0; f < 8; ++f) r.observations.push_back({i, f, project(x, r.poses[f], kK).pixel, true});
  }
  r.init_frame_a = r.anchor_frame = 0;
  r.init_frame_b = r.scale_frame = 1;
  return r;
}

void perturb(sfm::Reconstruction& r, Rng& rng, double deg, double m) {
  for (int f = 1; f < r.num_frames(); ++f) {
    Pose& p = r.poses[f];
    p.rotation = axis_angle(rng.unit_vector(), deg2rad(rng.uniform(0, deg))) * p.rotation;
    p.translation += rng.unit_vector() * rng.uniform(0, m);
    if (f == r.scale_frame) p.translation.normalize();
  }
  for (auto& [id, x] : r.landmarks) x += rng.unit_vector() * rng.uniform(0, m);
}

void bundle_adjust_descent() {
  int descended = 0, converged = 0;
  for (int trial = 0; trial < 500; ++trial) {
    Rng rng(10000 + trial);
    auto r = ba_scene(rng);
    for (auto& o : r.observations) o.pixel += Vec2(rng.normal(0, 1), rng.normal(0, 1));
    perturb(r, rng, 5.0, 0.1);
    sfm::BundleAdjustSummary s;
    sfm::bundle_adjust(r, kK, {}, &s);
    descended += s.final_cost <= s.initial_cost;
  }
  for (int trial = 0; trial < 500; ++trial) {
    Rng rng(20000 + trial);
    auto r = ba_scene(rng);
    perturb(r, rng, 1.0, 0.01);
    converged += sfm::reprojection_rmse(sfm::bundle_adjust(r, kK), kK) < 1e-6;
  }
  report(10, descended == 500 && converged >= 495, "bundle adjustment descent and convergence",
         fmt("cost non-increasing in %d/500 noisy runs; noiseless RMSE < 1e-6 px in %d/500", descended, converged));
}

}  // namespace

int main(int argc, char** argv) {
  // `acceptance 3 7` runs only those criteria; `--known-red 6` keeps a
  // documented failure from setting the exit status.
  std::vector<bool> run(11, false), known_red(11, false);
  bool any_selected = false;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--known-red" && i + 1 < argc) {
      const int id = std::atoi(argv[++i]);
      if (id >= 1 && id <= 10) known_red[id] = true;
      continue;
    }
    const int id = std::atoi(arg.c_str());
    if (id >= 1 && id <= 10) run[id] = any_selected = true;
  }
  if (!any_selected) run.assign(11, true);

  const std::vector<std::function<void()>> criteria{
      noiseless_end_to_end, umeyama_exactness, hand_values,     metric_invariances,          noise_monotonicity,
      selection_benefit,    degeneracy_detection, keyframe_examples, determinism_and_round_trips, bundle_adjust_descent};
  for (int id = 1; id <= 10; ++id) {
    if (!run[id]) continue;
    try {
      criteria[id - 1]();
    } catch (const std::exception& e) {
      report(id, false, "aborted", e.what());
    }
  }
  int unexpected = 0;
  for (int id : failed) unexpected += known_red[id] ? 0 : 1;
  for (int id = 1; id <= 10; ++id)
    if (run[id] && known_red[id] && std::find(failed.begin(), failed.end(), id) == failed.end())
      std::printf("note: criterion %d is listed as known red but passed\n", id);
  std::printf("%zu of %d criteria failed (%d unexpected)\n", failed.size(),
              static_cast<int>(std::count(run.begin() + 1, run.end(), true)), unexpected);
  return unexpected == 0 ? 0 : 1;
}
