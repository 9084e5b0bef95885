#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "posebench/posebench.hpp"

using namespace posebench;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("posebench_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  /// Exit status of the CLI run inside the scratch directory.
  int run(const std::string& args) {
    const std::string cmd = "cd '" + dir_.string() + "' && '" POSEBENCH_CLI "' " + args + " > stdout.txt 2> stderr.txt";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  }

  std::string file(const std::string& name) const { return io::read_text(dir_ / name); }

  fs::path dir_;
};

const std::string kWindow = "0,1,2,3,4,5,6,7";

}  // namespace

TEST_F(Cli, StagewisePipeline) {
  ASSERT_EQ(run("gen-traj --mode circling --num-frames 40 --seed 3 --out traj.json"), 0);
  ASSERT_EQ(run("synth --traj traj.json --frames " + kWindow + " --seed 3 --out gt_tracks.json"), 0);
  ASSERT_EQ(run("corrupt --tracks gt_tracks.json --level-weights 0.9,0,0,0,0.1 --seed 3 --out tracks.json"), 0);
  ASSERT_EQ(run("select --tracks tracks.json --strategy by_ranking --out kept.json"), 0);
  ASSERT_EQ(run("estimate --tracks tracks.json --kept kept.json --out recon.json"), 0);
  ASSERT_EQ(run("evaluate --recon recon.json --gt traj.json --frames " + kWindow + " --out score.json"), 0);

  EXPECT_EQ(io::import_trajectory(dir_ / "traj.json").size(), 40u);
  const auto tracks = io::trackset_from_json(io::parse_json(file("tracks.json")));
  EXPECT_EQ(tracks.num_frames, 8);
  EXPECT_TRUE(tracks.levels.has_value());
  EXPECT_TRUE(tracks.logits.has_value());
  const auto score = io::score_from_json(io::parse_json(file("score.json")));
  ASSERT_TRUE(score.registered) << score.failure;
  EXPECT_LT(score.ate, 0.01);
}

TEST_F(Cli, GenTrajMatchesLibrary) {
  ASSERT_EQ(run("gen-traj --mode random_walk --num-frames 12 --seed 9 --out traj.json"), 0);
  TrajectoryParams p;
  p.mode = TrajectoryMode::kRandomWalk;
  p.num_frames = 12;
  p.seed = 9;
  EXPECT_EQ(io::parse_json(file("traj.json")), io::trajectory_to_json(generate_trajectory(p)));
}

TEST_F(Cli, BenchAndReport) {
  ASSERT_EQ(run("bench --config '" POSEBENCH_CONFIG_DIR "/smoke.json' --out results"), 0);
  for (const char* f : {"report.json", "ap_table.csv", "plot_data.csv", "config.json"})
    EXPECT_TRUE(fs::exists(dir_ / "results" / f)) << f;
  EXPECT_EQ(file("stdout.txt"), file("results/ap_table.csv"));
  const std::string first = file("results/report.json");

  ASSERT_EQ(run("bench --config '" POSEBENCH_CONFIG_DIR "/smoke.json' --out again"), 0);
  EXPECT_EQ(file("again/report.json"), first);

  ASSERT_EQ(run("report --in results/report.json --out reagg"), 0);
  EXPECT_EQ(file("reagg/ap_table.csv"), file("results/ap_table.csv"));
  EXPECT_EQ(file("reagg/plot_data.csv"), file("results/plot_data.csv"));
}

TEST_F(Cli, DefaultConfigLoads) {
  const auto c = load_config(POSEBENCH_CONFIG_DIR "/default.json");
  EXPECT_EQ(c.methods.size(), 3u);
  EXPECT_EQ(c.modes.size(), 3u);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("gen-traj --mode spiral"), 2);
  EXPECT_NE(file("stderr.txt").find("InvalidParams"), std::string::npos);
  EXPECT_EQ(run("evaluate --recon missing.json --gt missing.json"), 3);
  EXPECT_EQ(run("bench --config missing.json"), 3);
  io::write_text(dir_ / "bad.json", R"({"unknown": 1})");
  EXPECT_EQ(run("bench --config bad.json"), 2);
  io::write_text(dir_ / "broken.json", "{");
  EXPECT_EQ(run("select --tracks broken.json"), 3);
  EXPECT_NE(run("no-such-command"), 0);
}
