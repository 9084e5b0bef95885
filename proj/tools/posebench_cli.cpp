// posebench: synthetic object pose benchmark driver.
//
//   posebench gen-traj --mode circling --num-frames 120 --seed 3 --out traj.json
//   posebench synth    --traj traj.json --frames 0,1,2,3,4,5,6,7 --out gt_tracks.json
//   posebench corrupt  --tracks gt_tracks.json --level-weights 0.9,0,0,0,0.1 --out tracks.json
//   posebench select   --tracks tracks.json --strategy by_ranking --out kept.json
//   posebench estimate --tracks tracks.json --kept kept.json --out recon.json
//   posebench evaluate --recon recon.json --gt traj.json --frames 0,1,2,3,4,5,6,7 --out score.json
//   posebench bench    --config configs/default.json --out results/
//   posebench report   --in results/report.json --out results/

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "posebench/posebench.hpp"

namespace pb = posebench;
namespace fs = std::filesystem;

namespace {

int exit_code(const pb::Error& e) {
  switch (e.code()) {
    case pb::ErrorCode::kConfigError:
    case pb::ErrorCode::kInvalidParams: return 2;
    case pb::ErrorCode::kIoError:
    case pb::ErrorCode::kParseError: return 3;
    default: return 1;
  }
}

void write_json(const std::string& path, const pb::io::Json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(1) << "\n";
    return;
  }
  pb::io::write_text(path, j.dump(1) + "\n");
}

pb::io::Json read_json(const std::string& path) { return pb::io::parse_json(pb::io::read_text(path)); }

std::vector<std::size_t> frame_positions(const std::vector<int>& frames, std::size_t n) {
  std::vector<std::size_t> pos;
  if (frames.empty()) {
    for (std::size_t i = 0; i < n; ++i) pos.push_back(i);
    return pos;
  }
  for (int f : frames) {
    if (f < 0 || static_cast<std::size_t>(f) >= n) pb::fail(pb::ErrorCode::kInvalidParams, "frame out of range");
    pos.push_back(static_cast<std::size_t>(f));
  }
  return pos;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic 6-DoF object pose benchmark"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out;

  // gen-traj
  auto* gen = app.add_subcommand("gen-traj", "Generate a trajectory");
  pb::TrajectoryParams tp;
  std::string mode = "circling";
  gen->add_option("--mode", mode, "random_walk | circling | noisy_circle");
  gen->add_option("--num-frames", tp.num_frames);
  gen->add_option("--radius", tp.radius);
  gen->add_option("--step-sigma-t", tp.step_sigma_t);
  gen->add_option("--step-sigma-r", tp.step_sigma_r);
  gen->add_option("--noise-sigma-t", tp.noise_sigma_t);
  gen->add_option("--noise-sigma-r", tp.noise_sigma_r);
  gen->add_option("--height-min", tp.height_range.first);
  gen->add_option("--height-max", tp.height_range.second);
  gen->add_option("--seed", seed);
  gen->add_option("--out", out, "output JSON (stdout when omitted)");

  // synth
  auto* synth = app.add_subcommand("synth", "Ground-truth tracks of a synthetic object over a trajectory");
  std::string traj_path;
  std::vector<int> frames;
  pb::ObjectParams object;
  std::string shape = "sphere";
  double p_occlude = 0.0;
  synth->add_option("--traj", traj_path)->required();
  synth->add_option("--frames", frames, "trajectory positions forming the window (default: all)")->delimiter(',');
  synth->add_option("--shape", shape, "sphere | ellipsoid | box_cloud | planar");
  synth->add_option("--num-points", object.num_points);
  synth->add_option("--size", object.size);
  synth->add_option("--p-occlude", p_occlude);
  synth->add_option("--seed", seed);
  synth->add_option("--out", out);

  // corrupt
  auto* corrupt = app.add_subcommand("corrupt", "Apply tracker noise and emit logits");
  std::string tracks_path;
  pb::NoiseProfile profile;
  std::string kind = "level_interval";
  corrupt->add_option("--tracks", tracks_path)->required();
  corrupt->add_option("--kind", kind, "level_interval | gaussian");
  corrupt->add_option("--level-weights", profile.level_weights)->delimiter(',');
  corrupt->add_option("--sigma", profile.gaussian_sigma, "gaussian sigma in px");
  corrupt->add_option("--top-level-cap", profile.top_level_cap);
  corrupt->add_option("--flip-prob", profile.visibility_flip_prob);
  corrupt->add_option("--sharpness", profile.logit_sharpness);
  corrupt->add_option("--confusion", profile.confusion_prob);
  corrupt->add_option("--seed", seed);
  corrupt->add_option("--out", out);

  // select
  auto* select = app.add_subcommand("select", "Choose keypoints per frame");
  std::string strategy = "none";
  double keep_ratio = 0.95;
  select->add_option("--tracks", tracks_path)->required();
  select->add_option("--strategy", strategy, "none | by_level | by_ranking");
  select->add_option("--keep-ratio", keep_ratio);
  select->add_option("--out", out);

  // estimate
  auto* estimate = app.add_subcommand("estimate", "Recover window poses");
  std::string kept_path;
  estimate->add_option("--tracks", tracks_path)->required();
  estimate->add_option("--kept", kept_path, "kept set JSON (default: every visible observation)");
  estimate->add_option("--seed", seed);
  estimate->add_option("--out", out);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score a reconstruction against ground truth");
  std::string recon_path, gt_path;
  evaluate->add_option("--recon", recon_path)->required();
  evaluate->add_option("--gt", gt_path, "ground-truth trajectory")->required();
  evaluate->add_option("--frames", frames, "trajectory positions of the window (default: all)")->delimiter(',');
  evaluate->add_option("--out", out);

  // bench
  auto* bench = app.add_subcommand("bench", "End-to-end benchmark");
  std::vector<std::uint64_t> seeds;
  int threads = 0;
  bench->add_option("--config", config_path, "JSON config");
  bench->add_option("--seed", seeds, "seed list, overrides the config")->delimiter(',');
  bench->add_option("--threads", threads);
  bench->add_option("--out", out, "output directory");

  // report
  auto* report = app.add_subcommand("report", "Re-aggregate a stored report");
  std::string in_path;
  report->add_option("--in", in_path)->required();
  report->add_option("--config", config_path, "config whose thresholds replace the stored ones");
  report->add_option("--out", out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      tp.mode = pb::trajectory_mode_from_string(mode);
      tp.seed = seed;
      write_json(out, pb::io::trajectory_to_json(pb::generate_trajectory(tp)));
    } else if (*synth) {
      object.shape = pb::shape_kind_from_string(shape);
      const auto traj = pb::io::import_trajectory(traj_path);
      const auto window = traj.select(frame_positions(frames, traj.size()));
      const auto model = pb::make_object(object, pb::derive_seed(seed, pb::stream::kObject));
      pb::SynthesizedWindow w = pb::synthesize_window(model, window, pb::CameraIntrinsics{});
      pb::occlude_window(w, p_occlude, {}, 0, pb::derive_seed(seed, pb::stream::kOcclusion));
      write_json(out, pb::io::trackset_to_json(w.tracks));
    } else if (*corrupt) {
      profile.kind = pb::noise_kind_from_string(kind);
      profile.seed = pb::derive_seed(seed, pb::stream::kNoise);
      auto tracks = pb::corrupt_tracks(pb::io::trackset_from_json(read_json(tracks_path)), profile);
      pb::attach_logits(tracks, profile.logit_sharpness, profile.confusion_prob,
                        pb::derive_seed(seed, pb::stream::kLogits));
      write_json(out, pb::io::trackset_to_json(tracks));
    } else if (*select) {
      const auto tracks = pb::io::trackset_from_json(read_json(tracks_path));
      write_json(out, pb::io::kept_to_json(
                          pb::select_keypoints(tracks, pb::selection_strategy_from_string(strategy), keep_ratio)));
    } else if (*estimate) {
      const auto tracks = pb::io::trackset_from_json(read_json(tracks_path));
      const pb::KeptSet kept = kept_path.empty() ? pb::select_keypoints(tracks, pb::SelectionStrategy::kNone)
                                                 : pb::io::kept_from_json(read_json(kept_path));
      pb::sfm::SfmConfig sc;
      sc.seed = seed;
      write_json(out, pb::io::reconstruction_to_json(
                          pb::sfm::estimate_window_poses(tracks, kept, pb::CameraIntrinsics{}, sc)));
    } else if (*evaluate) {
      const auto recon = pb::io::reconstruction_from_json(read_json(recon_path));
      const auto traj = pb::io::import_trajectory(gt_path);
      const auto gt = traj.select(frame_positions(frames, traj.size()));
      write_json(out, pb::io::score_to_json(pb::evaluate_window(recon, gt)));
    } else if (*bench) {
      pb::BenchConfig cfg = config_path.empty() ? pb::BenchConfig{} : pb::load_config(config_path);
      if (!seeds.empty()) cfg.seeds = seeds;
      if (threads > 0) cfg.threads = threads;
      if (!out.empty()) cfg.out_dir = out;
      const auto rep = pb::run_pipeline(cfg);
      std::cout << pb::io::ap_table_csv(rep.table);
    } else if (*report) {
      auto rep = pb::report_from_json(read_json(in_path));
      if (!config_path.empty()) rep.thresholds = pb::load_config(config_path).thresholds;
      std::vector<pb::WindowRecord> records = rep.windows;
      const auto methods = pb::methods_of(rep);
      rep = pb::aggregate(std::move(records), methods, rep.thresholds);
      pb::io::write_text(fs::path(out) / "ap_table.csv", pb::io::ap_table_csv(rep.table));
      pb::io::write_text(fs::path(out) / "plot_data.csv", pb::plot_data_csv(rep));
      std::cout << pb::io::ap_table_csv(rep.table);
    }
  } catch (const pb::Error& e) {
    std::cerr << "posebench: " << e.what() << "\n";
    return exit_code(e);
  }
  return 0;
}
