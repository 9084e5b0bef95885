#ifndef POSEBENCH_BENCH_HPP
#define POSEBENCH_BENCH_HPP

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "posebench/error.hpp"
#include "posebench/io.hpp"
#include "posebench/keyframe.hpp"
#include "posebench/metrics.hpp"
#include "posebench/random.hpp"
#include "posebench/scene_synth.hpp"
#include "posebench/sfm/window_sfm.hpp"
#include "posebench/tracker_sim.hpp"
#include "posebench/trajgen.hpp"
#include "posebench/uncertainty.hpp"

namespace posebench {

struct ObjectParams {
  ShapeKind shape = ShapeKind::kSphere;
  int num_points = 200;
  double size = 0.1;  // m, radius or half extent
};

inline ObjectModel make_object(const ObjectParams& p, std::uint64_t seed) {
  if (p.num_points < 8 || !(p.size > 0.0)) fail(ErrorCode::kInvalidParams, "object needs >= 8 points and size > 0");
  switch (p.shape) {
    case ShapeKind::kSphere: return make_sphere(p.num_points, p.size);
    case ShapeKind::kEllipsoid: return make_ellipsoid(p.num_points, p.size * Vec3(1.0, 0.8, 0.6));
    case ShapeKind::kBoxCloud: return make_box_cloud(p.num_points, p.size * Vec3(1.0, 0.8, 0.6), seed);
    case ShapeKind::kPlanar: return make_planar(p.num_points, p.size, Vec3::UnitZ(), seed);
    case ShapeKind::kImported: break;
  }
  fail(ErrorCode::kInvalidParams, "imported models are not generated");
}

struct WindowingParams {
  bool use_gate = true;  // motion gate before chopping; otherwise every frame is a keyframe
  MotionGateConfig gate;
  int max_windows_per_seed = 0;  // 0 keeps all
};

struct MethodSpec {
  std::string label;
  SelectionStrategy strategy = SelectionStrategy::kNone;
  double keep_ratio = 0.95;
};

struct BenchConfig {
  TrajectoryParams trajectory;
  /// When non-empty, seed s uses modes[s % modes.size()] instead of trajectory.mode.
  std::vector<TrajectoryMode> modes;
  ObjectParams object;
  CameraIntrinsics camera;
  WindowingParams windowing;
  SynthOptions synth;
  double p_occlude = 0.3;
  OcclusionOptions occlusion;
  NoiseProfile noise;
  std::vector<MethodSpec> methods{{"none", SelectionStrategy::kNone, 0.95}};
  sfm::SfmConfig sfm;
  ThresholdTable thresholds = default_thresholds();
  RpeAggregate rpe_aggregate = RpeAggregate::kRmse;
  std::vector<std::uint64_t> seeds{0};
  std::string out_dir = "posebench_out";
  int threads = 0;  // 0: POSEBENCH_THREADS or hardware concurrency

  void validate() const {
    try {
      trajectory.validate();
      if (trajectory.mode == TrajectoryMode::kImported && modes.empty())
        fail(ErrorCode::kInvalidParams, "imported trajectories cannot be benchmarked from a config");
      for (auto m : modes)
        if (m == TrajectoryMode::kImported) fail(ErrorCode::kInvalidParams, "imported mode in mode list");
      camera.validate();
      windowing.gate.validate();
      noise.validate();
      if (p_occlude < 0.0 || p_occlude > 1.0) fail(ErrorCode::kInvalidParams, "p_occlude must lie in [0, 1]");
      if (methods.empty()) fail(ErrorCode::kInvalidParams, "at least one method required");
      for (const auto& m : methods) {
        if (m.label.empty() || m.label.find(',') != std::string::npos)
          fail(ErrorCode::kInvalidParams, "method labels must be non-empty and comma free");
        if (!(m.keep_ratio > 0.0 && m.keep_ratio <= 1.0)) fail(ErrorCode::kInvalidParams, "keep_ratio in (0, 1]");
      }
      for (const auto& [metric, taus] : thresholds)
        for (std::size_t i = 0; i < taus.size(); ++i)
          if (!(taus[i] >= 0.0) || (i > 0 && taus[i] < taus[i - 1]))
            fail(ErrorCode::kInvalidParams, "thresholds must be non-negative and ascending");
      if (seeds.empty()) fail(ErrorCode::kInvalidParams, "at least one seed required");
      if (trajectory.num_frames < windowing.gate.window_len)
        fail(ErrorCode::kInvalidParams, "trajectory shorter than one window");
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kConfigError) throw;
      fail(ErrorCode::kConfigError, e.what());
    }
  }
};

struct WindowRecord {
  std::string method;
  std::uint64_t seed = 0;
  int window = 0;
  std::vector<std::int64_t> frames;
  WindowScore score;
};

struct BenchmarkReport {
  std::vector<WindowRecord> windows;  // sorted by (method order, seed order, window)
  std::vector<ApEntry> table;
  ThresholdTable thresholds;
};

// --- Pipeline stages -------------------------------------------------------------

/// Sparse probe tracks for the motion gate: every model point, visible where
/// it faces the camera inside the image.
inline TrackSet probe_tracks(const ObjectModel& model, const Trajectory& traj, const CameraIntrinsics& k) {
  std::vector<int> ids(model.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  TrackSet ts(static_cast<int>(traj.size()), ids);
  for (int t = 0; t < ts.num_frames; ++t)
    for (std::size_t i = 0; i < model.size(); ++i) {
      const Vec3 xc = traj.poses[t].transform(model.points[i]);
      if (!(xc.z() > kMinDepth)) continue;
      const Vec2 px(k.fx * xc.x() / xc.z() + k.cx, k.fy * xc.y() / xc.z() + k.cy);
      ts.position(t, i) = px;
      ts.set_visible(t, i, k.contains(px) && front_facing(model.points[i], model.normals[i], traj.poses[t]));
    }
  return ts;
}

namespace stream {
inline constexpr std::uint64_t kTrajectory = 1, kObject = 2, kGate = 3, kOcclusion = 4, kNoise = 5, kLogits = 6,
                               kSfm = 7, kWindow = 8;
}

inline std::uint64_t window_seed(std::uint64_t seed, int window, std::uint64_t stage) {
  return derive_seed(derive_seed(derive_seed(seed, stream::kWindow), static_cast<std::uint64_t>(window)), stage);
}

/// Hides observations behind random occluders in non-reference frames, each
/// frame independently with probability p_occlude.
inline void occlude_window(SynthesizedWindow& w, double p_occlude, const OcclusionOptions& opt, int reference,
                           std::uint64_t seed) {
  Rng rng(seed);
  for (int t = 0; t < w.tracks.num_frames; ++t) {
    const bool hit = rng.bernoulli(p_occlude);
    const std::uint64_t disk_seed = rng.next_u64();
    if (!hit || t == reference || w.masks[t].empty()) continue;
    auto [mask, tracks] = apply_occlusion_disks(w.masks[t], w.tracks, t, 1, disk_seed, opt);
    w.masks[t] = std::move(mask);
    w.tracks = std::move(tracks);
  }
}

struct SeedPlan {
  std::uint64_t seed = 0;
  Trajectory trajectory;
  ObjectModel model;
  std::vector<std::vector<int>> windows;  // frame positions in the trajectory
};

inline SeedPlan plan_seed(const BenchConfig& cfg, std::size_t seed_pos) {
  SeedPlan plan;
  plan.seed = cfg.seeds[seed_pos];
  TrajectoryParams tp = cfg.trajectory;
  if (!cfg.modes.empty()) tp.mode = cfg.modes[seed_pos % cfg.modes.size()];
  tp.seed = derive_seed(plan.seed, stream::kTrajectory);
  plan.trajectory = generate_trajectory(tp);
  plan.model = make_object(cfg.object, derive_seed(plan.seed, stream::kObject));

  std::vector<int> keyframes;
  if (cfg.windowing.use_gate) {
    MotionGateConfig g = cfg.windowing.gate;
    g.seed = derive_seed(plan.seed, stream::kGate);
    keyframes = gate_frames(probe_tracks(plan.model, plan.trajectory, cfg.camera), g);
  } else {
    for (std::size_t i = 0; i < plan.trajectory.size(); ++i) keyframes.push_back(static_cast<int>(i));
  }
  if (static_cast<int>(keyframes.size()) >= cfg.windowing.gate.window_len)
    plan.windows = chop_windows(keyframes, cfg.windowing.gate.window_len);
  if (cfg.windowing.max_windows_per_seed > 0 &&
      plan.windows.size() > static_cast<std::size_t>(cfg.windowing.max_windows_per_seed))
    plan.windows.resize(cfg.windowing.max_windows_per_seed);
  return plan;
}

/// Scores every method on one window. Failures of synthesis or the solver
/// become unregistered scores.
inline std::vector<WindowScore> run_window(const BenchConfig& cfg, const SeedPlan& plan, int window) {
  std::vector<std::size_t> pos(plan.windows[window].begin(), plan.windows[window].end());
  const Trajectory gt = plan.trajectory.select(pos);
  std::vector<WindowScore> scores(cfg.methods.size());
  auto fail_all = [&](const Error& e) {
    for (auto& s : scores) {
      s = WindowScore{};
      s.failure = std::string(error_code_name(e.code()));
    }
    return scores;
  };

  TrackSet tracks;
  try {
    SynthesizedWindow w = synthesize_window(plan.model, gt, cfg.camera, cfg.synth);
    occlude_window(w, cfg.p_occlude, cfg.occlusion, cfg.synth.reference_frame,
                   window_seed(plan.seed, window, stream::kOcclusion));
    NoiseProfile np = cfg.noise;
    np.seed = window_seed(plan.seed, window, stream::kNoise);
    tracks = corrupt_tracks(w.tracks, np);
    attach_logits(tracks, cfg.noise.logit_sharpness, cfg.noise.confusion_prob,
                  window_seed(plan.seed, window, stream::kLogits));
  } catch (const Error& e) {
    return fail_all(e);
  }

  for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
    const auto& method = cfg.methods[m];
    try {
      const KeptSet kept = select_keypoints(tracks, method.strategy, method.keep_ratio);
      sfm::SfmConfig sc = cfg.sfm;
      sc.seed = window_seed(plan.seed, window, stream::kSfm);
      const auto rec = sfm::estimate_window_poses(tracks, kept, cfg.camera, sc);
      scores[m] = evaluate_window(rec, gt, cfg.rpe_aggregate);
    } catch (const Error& e) {
      scores[m] = WindowScore{};
      scores[m].failure = std::string(error_code_name(e.code()));
    }
  }
  return scores;
}

inline int worker_count(int requested, std::size_t tasks) {
  int n = requested;
  if (n <= 0) {
    n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (const char* env = std::getenv("POSEBENCH_THREADS")) {
      const int cap = std::atoi(env);
      if (cap > 0) n = std::min(n, cap);
    }
  }
  return std::max(1, std::min<int>(n, static_cast<int>(std::max<std::size_t>(tasks, 1))));
}

/// Runs fn(i) for i in [0, n) on a pool; results land by index, so the
/// output does not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n && !failed; i = next++) {
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) first_error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline BenchmarkReport aggregate(std::vector<WindowRecord> records, const std::vector<MethodSpec>& methods,
                                 const ThresholdTable& thresholds) {
  BenchmarkReport rep;
  rep.thresholds = thresholds;
  for (const auto& m : methods) {
    std::vector<WindowScore> scores;
    for (const auto& r : records)
      if (r.method == m.label) scores.push_back(r.score);
    if (scores.empty()) continue;
    const auto rows = ap_table(m.label, scores, thresholds);
    rep.table.insert(rep.table.end(), rows.begin(), rows.end());
  }
  rep.windows = std::move(records);
  return rep;
}

inline BenchmarkReport run_benchmark(const BenchConfig& cfg) {
  cfg.validate();
  std::vector<SeedPlan> plans(cfg.seeds.size());
  const int workers = worker_count(cfg.threads, cfg.seeds.size());
  parallel_for(cfg.seeds.size(), workers, [&](std::size_t s) { plans[s] = plan_seed(cfg, s); });

  struct Task {
    std::size_t plan;
    int window;
  };
  std::vector<Task> tasks;
  for (std::size_t s = 0; s < plans.size(); ++s)
    for (std::size_t w = 0; w < plans[s].windows.size(); ++w) tasks.push_back({s, static_cast<int>(w)});
  std::vector<std::vector<WindowScore>> results(tasks.size());
  parallel_for(tasks.size(), worker_count(cfg.threads, tasks.size()), [&](std::size_t i) {
    results[i] = run_window(cfg, plans[tasks[i].plan], tasks[i].window);
  });

  std::vector<WindowRecord> records;
  for (std::size_t m = 0; m < cfg.methods.size(); ++m)
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      const SeedPlan& p = plans[tasks[i].plan];
      WindowRecord r;
      r.method = cfg.methods[m].label;
      r.seed = p.seed;
      r.window = tasks[i].window;
      for (int f : p.windows[tasks[i].window]) r.frames.push_back(p.trajectory.frame_indices[f]);
      r.score = results[i][m];
      records.push_back(std::move(r));
    }
  if (records.empty()) fail(ErrorCode::kConfigError, "configuration produced no windows");
  return aggregate(std::move(records), cfg.methods, cfg.thresholds);
}

// --- Configuration JSON ------------------------------------------------------------

namespace detail {

inline void check_keys(const io::Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) fail(ErrorCode::kConfigError, where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      fail(ErrorCode::kConfigError, "unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const io::Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline io::Json config_to_json(const BenchConfig& c) {
  using io::Json;
  Json modes = Json::array();
  for (auto m : c.modes) modes.push_back(std::string(to_string(m)));
  Json methods = Json::array();
  for (const auto& m : c.methods)
    methods.push_back({{"label", m.label}, {"strategy", std::string(to_string(m.strategy))}, {"keep_ratio", m.keep_ratio}});
  Json ranges = Json::array();
  for (const auto& [lo, hi] : c.noise.ranges) ranges.push_back({lo, hi});
  Json thresholds = Json::object();
  for (const auto& [metric, taus] : c.thresholds) thresholds[std::string(to_string(metric))] = taus;
  Json level_bounds = Json::array();
  for (double v : c.noise.levels.thresholds) level_bounds.push_back(std::isinf(v) ? Json("inf") : Json(v));
  return {
      {"trajectory",
       {{"mode", std::string(to_string(c.trajectory.mode))},
        {"modes", modes},
        {"num_frames", c.trajectory.num_frames},
        {"step_sigma_t", c.trajectory.step_sigma_t},
        {"step_sigma_r", c.trajectory.step_sigma_r},
        {"radius", c.trajectory.radius},
        {"height_range", {c.trajectory.height_range.first, c.trajectory.height_range.second}},
        {"noise_sigma_t", c.trajectory.noise_sigma_t},
        {"noise_sigma_r", c.trajectory.noise_sigma_r}}},
      {"object",
       {{"shape", std::string(to_string(c.object.shape))}, {"num_points", c.object.num_points}, {"size", c.object.size}}},
      {"camera",
       {{"fx", c.camera.fx},
        {"fy", c.camera.fy},
        {"cx", c.camera.cx},
        {"cy", c.camera.cy},
        {"width", c.camera.width},
        {"height", c.camera.height}}},
      {"windowing",
       {{"use_gate", c.windowing.use_gate},
        {"t_dis", c.windowing.gate.t_dis},
        {"t_scale", c.windowing.gate.t_scale},
        {"window_len", c.windowing.gate.window_len},
        {"strict_adjacent", c.windowing.gate.strict_adjacent},
        {"reducer", std::string(to_string(c.windowing.gate.reducer))},
        {"max_scale_probes", c.windowing.gate.max_scale_probes},
        {"max_windows_per_seed", c.windowing.max_windows_per_seed}}},
      {"synth",
       {{"tau_depth", c.synth.tau_depth},
        {"tau_cycle", c.synth.tau_cycle},
        {"splat_radius_px", c.synth.splat_radius_px},
        {"closing_size", c.synth.closing_size},
        {"p_occlude", c.p_occlude},
        {"occlusion_min_ratio", c.occlusion.min_ratio},
        {"occlusion_max_ratio", c.occlusion.max_ratio}}},
      {"noise",
       {{"kind", std::string(to_string(c.noise.kind))},
        {"level_weights", c.noise.level_weights},
        {"level_bounds", level_bounds},
        {"ranges", ranges},
        {"top_level_cap", c.noise.top_level_cap},
        {"gaussian_sigma", c.noise.gaussian_sigma},
        {"visibility_flip_prob", c.noise.visibility_flip_prob},
        {"logit_sharpness", c.noise.logit_sharpness},
        {"confusion_prob", c.noise.confusion_prob}}},
      {"methods", methods},
      {"sfm",
       {{"sampson_px", c.sfm.ransac.sampson_px},
        {"ransac_max_iters", c.sfm.ransac.max_iters},
        {"pnp_px", c.sfm.pnp.reproj_px},
        {"min_median_angle_deg", c.sfm.min_median_angle_deg},
        {"planar_ratio", c.sfm.planar_ratio},
        {"observation_px", c.sfm.observation_px},
        {"huber_px", c.sfm.ba.huber_px ? Json(*c.sfm.ba.huber_px) : Json(nullptr)}}},
      {"metrics",
       {{"rpe_aggregate", c.rpe_aggregate == RpeAggregate::kMean ? "mean" : "rmse"}, {"thresholds", thresholds}}},
      {"seeds", c.seeds},
      {"out", c.out_dir},
      {"threads", c.threads}};
}

inline BenchConfig config_from_json(const io::Json& j) {
  using detail::read;
  BenchConfig c;
  try {
    detail::check_keys(j, {"trajectory", "object", "camera", "windowing", "synth", "noise", "methods", "sfm", "metrics",
                           "seeds", "out", "threads"},
                       "config");
    if (j.contains("trajectory")) {
      const auto& t = j.at("trajectory");
      detail::check_keys(t, {"mode", "modes", "num_frames", "step_sigma_t", "step_sigma_r", "radius", "height_range",
                             "noise_sigma_t", "noise_sigma_r"},
                         "trajectory");
      if (t.contains("mode")) c.trajectory.mode = trajectory_mode_from_string(t.at("mode").get<std::string>());
      if (t.contains("modes"))
        for (const auto& m : t.at("modes")) c.modes.push_back(trajectory_mode_from_string(m.get<std::string>()));
      read(t, "num_frames", c.trajectory.num_frames);
      read(t, "step_sigma_t", c.trajectory.step_sigma_t);
      read(t, "step_sigma_r", c.trajectory.step_sigma_r);
      read(t, "radius", c.trajectory.radius);
      if (t.contains("height_range"))
        c.trajectory.height_range = {t.at("height_range").at(0).get<double>(), t.at("height_range").at(1).get<double>()};
      read(t, "noise_sigma_t", c.trajectory.noise_sigma_t);
      read(t, "noise_sigma_r", c.trajectory.noise_sigma_r);
    }
    if (j.contains("object")) {
      const auto& o = j.at("object");
      detail::check_keys(o, {"shape", "num_points", "size"}, "object");
      if (o.contains("shape")) c.object.shape = shape_kind_from_string(o.at("shape").get<std::string>());
      read(o, "num_points", c.object.num_points);
      read(o, "size", c.object.size);
    }
    if (j.contains("camera")) {
      const auto& k = j.at("camera");
      detail::check_keys(k, {"fx", "fy", "cx", "cy", "width", "height"}, "camera");
      read(k, "fx", c.camera.fx);
      read(k, "fy", c.camera.fy);
      read(k, "cx", c.camera.cx);
      read(k, "cy", c.camera.cy);
      read(k, "width", c.camera.width);
      read(k, "height", c.camera.height);
    }
    if (j.contains("windowing")) {
      const auto& w = j.at("windowing");
      detail::check_keys(w, {"use_gate", "t_dis", "t_scale", "window_len", "strict_adjacent", "reducer",
                             "max_scale_probes", "max_windows_per_seed"},
                         "windowing");
      read(w, "use_gate", c.windowing.use_gate);
      read(w, "t_dis", c.windowing.gate.t_dis);
      read(w, "t_scale", c.windowing.gate.t_scale);
      read(w, "window_len", c.windowing.gate.window_len);
      read(w, "strict_adjacent", c.windowing.gate.strict_adjacent);
      if (w.contains("reducer")) c.windowing.gate.reducer = scale_reducer_from_string(w.at("reducer").get<std::string>());
      read(w, "max_scale_probes", c.windowing.gate.max_scale_probes);
      read(w, "max_windows_per_seed", c.windowing.max_windows_per_seed);
    }
    if (j.contains("synth")) {
      const auto& s = j.at("synth");
      detail::check_keys(s, {"tau_depth", "tau_cycle", "splat_radius_px", "closing_size", "p_occlude",
                             "occlusion_min_ratio", "occlusion_max_ratio"},
                         "synth");
      read(s, "tau_depth", c.synth.tau_depth);
      read(s, "tau_cycle", c.synth.tau_cycle);
      read(s, "splat_radius_px", c.synth.splat_radius_px);
      read(s, "closing_size", c.synth.closing_size);
      read(s, "p_occlude", c.p_occlude);
      read(s, "occlusion_min_ratio", c.occlusion.min_ratio);
      read(s, "occlusion_max_ratio", c.occlusion.max_ratio);
    }
    if (j.contains("noise")) {
      const auto& n = j.at("noise");
      detail::check_keys(n, {"kind", "level_weights", "level_bounds", "ranges", "top_level_cap", "gaussian_sigma",
                             "visibility_flip_prob", "logit_sharpness", "confusion_prob"},
                         "noise");
      if (n.contains("kind")) c.noise.kind = noise_kind_from_string(n.at("kind").get<std::string>());
      if (n.contains("level_bounds")) {
        c.noise.levels.thresholds.clear();
        for (const auto& v : n.at("level_bounds"))
          c.noise.levels.thresholds.push_back(v.is_string() && v.get<std::string>() == "inf"
                                                  ? std::numeric_limits<double>::infinity()
                                                  : v.get<double>());
      }
      read(n, "level_weights", c.noise.level_weights);
      if (n.contains("ranges")) {
        c.noise.ranges.clear();
        for (const auto& r : n.at("ranges")) c.noise.ranges.emplace_back(r.at(0).get<double>(), r.at(1).get<double>());
      }
      read(n, "top_level_cap", c.noise.top_level_cap);
      read(n, "gaussian_sigma", c.noise.gaussian_sigma);
      read(n, "visibility_flip_prob", c.noise.visibility_flip_prob);
      read(n, "logit_sharpness", c.noise.logit_sharpness);
      read(n, "confusion_prob", c.noise.confusion_prob);
    }
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& m : j.at("methods")) {
        detail::check_keys(m, {"label", "strategy", "keep_ratio"}, "method");
        MethodSpec spec;
        spec.strategy = selection_strategy_from_string(m.at("strategy").get<std::string>());
        spec.label = m.value("label", std::string(to_string(spec.strategy)));
        read(m, "keep_ratio", spec.keep_ratio);
        c.methods.push_back(spec);
      }
    }
    if (j.contains("sfm")) {
      const auto& s = j.at("sfm");
      detail::check_keys(s, {"sampson_px", "ransac_max_iters", "pnp_px", "min_median_angle_deg", "planar_ratio",
                             "observation_px", "huber_px"},
                         "sfm");
      read(s, "sampson_px", c.sfm.ransac.sampson_px);
      read(s, "ransac_max_iters", c.sfm.ransac.max_iters);
      read(s, "pnp_px", c.sfm.pnp.reproj_px);
      read(s, "min_median_angle_deg", c.sfm.min_median_angle_deg);
      read(s, "planar_ratio", c.sfm.planar_ratio);
      read(s, "observation_px", c.sfm.observation_px);
      if (s.contains("huber_px") && !s.at("huber_px").is_null()) c.sfm.ba.huber_px = s.at("huber_px").get<double>();
    }
    if (j.contains("metrics")) {
      const auto& m = j.at("metrics");
      detail::check_keys(m, {"rpe_aggregate", "thresholds"}, "metrics");
      if (m.contains("rpe_aggregate")) {
        const auto a = m.at("rpe_aggregate").get<std::string>();
        if (a != "rmse" && a != "mean") fail(ErrorCode::kConfigError, "rpe_aggregate must be rmse or mean");
        c.rpe_aggregate = a == "mean" ? RpeAggregate::kMean : RpeAggregate::kRmse;
      }
      if (m.contains("thresholds")) {
        c.thresholds.clear();
        for (const auto& [name, taus] : m.at("thresholds").items())
          c.thresholds[metric_from_string(name)] = taus.get<std::vector<double>>();
      }
    }
    read(j, "seeds", c.seeds);
    read(j, "out", c.out_dir);
    read(j, "threads", c.threads);
  } catch (const io::Json::exception& e) {
    fail(ErrorCode::kConfigError, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfigError) throw;
    fail(ErrorCode::kConfigError, e.what());
  }
  c.validate();
  return c;
}

inline BenchConfig load_config(const std::filesystem::path& path) {
  const std::string text = io::read_text(path);
  io::Json j;
  try {
    j = io::Json::parse(text);
  } catch (const io::Json::exception& e) {
    fail(ErrorCode::kConfigError, e.what());
  }
  return config_from_json(j);
}

// --- Report files -------------------------------------------------------------------

inline io::Json report_to_json(const BenchmarkReport& rep) {
  using io::Json;
  Json windows = Json::array();
  for (const auto& r : rep.windows)
    windows.push_back({{"method", r.method},
                       {"seed", r.seed},
                       {"window", r.window},
                       {"frames", r.frames},
                       {"score", io::score_to_json(r.score)}});
  Json table = Json::array();
  for (const auto& e : rep.table)
    table.push_back({{"method", e.method},
                     {"metric", std::string(to_string(e.metric))},
                     {"threshold", e.threshold},
                     {"ap", e.ap},
                     {"num_windows", e.num_windows},
                     {"num_failures", e.num_failures}});
  Json thresholds = Json::object();
  for (const auto& [metric, taus] : rep.thresholds) thresholds[std::string(to_string(metric))] = taus;
  return {{"windows", windows}, {"ap_table", table}, {"thresholds", thresholds}};
}

inline BenchmarkReport report_from_json(const io::Json& j) {
  return io::detail::guarded([&] {
    BenchmarkReport rep;
    for (const auto& w : j.at("windows")) {
      WindowRecord r;
      r.method = w.at("method").get<std::string>();
      r.seed = w.at("seed").get<std::uint64_t>();
      r.window = w.at("window").get<int>();
      r.frames = w.at("frames").get<std::vector<std::int64_t>>();
      r.score = io::score_from_json(w.at("score"));
      rep.windows.push_back(std::move(r));
    }
    for (const auto& e : j.at("ap_table"))
      rep.table.push_back({e.at("method").get<std::string>(), metric_from_string(e.at("metric").get<std::string>()),
                           e.at("threshold").get<double>(), e.at("ap").get<double>(),
                           e.at("num_windows").get<std::size_t>(), e.at("num_failures").get<std::size_t>()});
    for (const auto& [name, taus] : j.at("thresholds").items())
      rep.thresholds[metric_from_string(name)] = taus.get<std::vector<double>>();
    return rep;
  });
}

/// Methods in first-appearance order, for re-aggregating a stored report.
inline std::vector<MethodSpec> methods_of(const BenchmarkReport& rep) {
  std::vector<MethodSpec> out;
  for (const auto& r : rep.windows)
    if (std::none_of(out.begin(), out.end(), [&](const MethodSpec& m) { return m.label == r.method; }))
      out.push_back({r.method, SelectionStrategy::kNone, 0.95});
  return out;
}

/// AP over a dense threshold sweep per method and metric, from zero to twice
/// the largest reporting threshold.
inline std::string plot_data_csv(const BenchmarkReport& rep, int steps = 50) {
  std::string out = "method,metric,threshold,ap\n";
  for (const auto& m : methods_of(rep)) {
    for (const auto& [metric, taus] : rep.thresholds) {
      if (taus.empty()) continue;
      std::vector<std::optional<double>> values;
      for (const auto& r : rep.windows)
        if (r.method == m.label) values.push_back(r.score.value(metric));
      const double top = 2.0 * taus.back();
      for (int i = 0; i <= steps; ++i) {
        const double tau = top * i / steps;
        out += m.label + "," + std::string(to_string(metric)) + "," + io::format_double(tau) + "," +
               io::format_double(ap_at_threshold(values, tau)) + "\n";
      }
    }
  }
  return out;
}

inline void write_report(const BenchmarkReport& rep, const std::filesystem::path& dir) {
  io::write_text(dir / "report.json", report_to_json(rep).dump(1) + "\n");
  io::write_text(dir / "ap_table.csv", io::ap_table_csv(rep.table));
  io::write_text(dir / "plot_data.csv", plot_data_csv(rep));
}

/// Full pipeline plus report files under cfg.out_dir.
inline BenchmarkReport run_pipeline(const BenchConfig& cfg) {
  BenchmarkReport rep = run_benchmark(cfg);
  write_report(rep, cfg.out_dir);
  io::write_text(std::filesystem::path(cfg.out_dir) / "config.json", config_to_json(cfg).dump(1) + "\n");
  return rep;
}

}  // namespace posebench

#endif  // POSEBENCH_BENCH_HPP
