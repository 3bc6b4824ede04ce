#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "relkal/cli.hpp"

namespace relkal {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("relkal_cli_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    config_ = (dir_ / "small.json").string();
    std::ofstream(config_) << R"({"n_trajectories": 3, "duration": 2.0, "seed": 5})";
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string out(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
  std::string config_;
};

TEST(FormatNumber, TwelveSignificantDigits) {
  EXPECT_EQ(format_number(1.0), "1");
  EXPECT_EQ(format_number(0.1 + 0.2), "0.3");
  EXPECT_EQ(format_number(1234567.891234567), "1234567.89123");
  EXPECT_EQ(format_number(1.6112e-11), "1.6112e-11");
  EXPECT_EQ(format_number(-2.5), "-2.5");
}

TEST_F(CliTest, StudyWritesMetricsAndManifest) {
  ASSERT_EQ(run_command({"study", "--config", config_, "--out", out("res")}), 0);
  const auto rows = lines_of(slurp(dir_ / "res" / "metrics.csv"));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], "model,avg_max_error_m,avg_mean_error_m,gramian_det_min,gramian_det_max");
  EXPECT_EQ(split(rows[1])[0], "A");
  EXPECT_EQ(split(rows[2])[0], "B");
  EXPECT_EQ(split(rows[3])[0], "C");
  for (const char* f : {"errors.csv", "summary.json", "manifest.json"}) EXPECT_TRUE(fs::exists(dir_ / "res" / f)) << f;
  const auto manifest = nlohmann::json::parse(slurp(dir_ / "res" / "manifest.json"));
  EXPECT_EQ(manifest["seed"], 5);
  EXPECT_EQ(manifest["command"], "study");
  EXPECT_EQ(manifest["config"]["n_trajectories"], 3);
  EXPECT_TRUE(manifest.contains("wall_clock_s"));
  EXPECT_TRUE(manifest.contains("version"));
  EXPECT_EQ(manifest["outputs"].size(), 4u);
}

TEST_F(CliTest, ModelSubsetAndSeedFlags) {
  ASSERT_EQ(run_command({"study", "--config", config_, "--models", "C,A", "--seed", "11", "--out", out("res")}), 0);
  const auto rows = lines_of(slurp(dir_ / "res" / "metrics.csv"));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(split(rows[1])[0], "C");
  EXPECT_EQ(split(rows[2])[0], "A");
  EXPECT_EQ(nlohmann::json::parse(slurp(dir_ / "res" / "manifest.json"))["seed"], 11);
}

TEST_F(CliTest, UnknownModelNamesValidSet) {
  ::testing::internal::CaptureStderr();
  const int code = run_command({"track", "--model", "D", "--config", config_, "--out", out("t")});
  const std::string err = ::testing::internal::GetCapturedStderr();
  EXPECT_EQ(code, 2);
  EXPECT_NE(err.find("A, B, C"), std::string::npos) << err;
  EXPECT_FALSE(fs::exists(dir_ / "t"));
}

TEST_F(CliTest, EmptyModelSetWritesNothing) {
  ::testing::internal::CaptureStderr();
  const int code = run_command({"study", "--config", config_, "--models", "", "--out", out("res")});
  const std::string err = ::testing::internal::GetCapturedStderr();
  EXPECT_EQ(code, 2);
  EXPECT_NE(err.find("empty"), std::string::npos) << err;
  EXPECT_FALSE(fs::exists(dir_ / "res"));
  for (const auto& entry : fs::directory_iterator(dir_)) EXPECT_EQ(entry.path().filename(), "small.json");
}

TEST_F(CliTest, ArgumentAndConfigErrorsExitTwo) {
  ::testing::internal::CaptureStderr();
  EXPECT_EQ(run_command({"study", "--out", out("a"), "--config", out("missing.json")}), 2);
  EXPECT_EQ(run_command({"frobnicate"}), 2);
  EXPECT_EQ(run_command({"study"}), 2);
  EXPECT_EQ(run_command({"study", "--out", out("b"), "--seed", "abc"}), 2);
  std::ofstream(out("broken.json")) << "{ not json";
  EXPECT_EQ(run_command({"study", "--out", out("c"), "--config", out("broken.json")}), 2);
  std::ofstream(out("invalid.json")) << R"({"dt": 0})";
  EXPECT_EQ(run_command({"study", "--out", out("d"), "--config", out("invalid.json")}), 2);
  const std::string err = ::testing::internal::GetCapturedStderr();
  EXPECT_FALSE(err.empty());
}

TEST_F(CliTest, ExistingOutputNeedsOverwrite) {
  ASSERT_EQ(run_command({"study", "--config", config_, "--models", "A", "--out", out("res")}), 0);
  ::testing::internal::CaptureStderr();
  EXPECT_EQ(run_command({"study", "--config", config_, "--models", "B", "--out", out("res")}), 2);
  ::testing::internal::GetCapturedStderr();
  EXPECT_EQ(split(lines_of(slurp(dir_ / "res" / "metrics.csv"))[1])[0], "A");

  std::ofstream(dir_ / "res" / "stale.txt") << "left over";
  ASSERT_EQ(run_command({"study", "--config", config_, "--models", "B", "--out", out("res"), "--overwrite"}), 0);
  EXPECT_EQ(split(lines_of(slurp(dir_ / "res" / "metrics.csv"))[1])[0], "B");
  EXPECT_FALSE(fs::exists(dir_ / "res" / "stale.txt"));
  EXPECT_TRUE(fs::exists(dir_ / "res" / "manifest.json"));
  for (const auto& entry : fs::directory_iterator(dir_)) {
    EXPECT_EQ(entry.path().filename().string().find(".res."), std::string::npos) << entry.path();
  }
}

TEST_F(CliTest, RepeatedRunsAreByteIdentical) {
  ASSERT_EQ(run_command({"study", "--config", config_, "--out", out("r1")}), 0);
  ASSERT_EQ(run_command({"study", "--config", config_, "--out", out("r2")}), 0);
  for (const char* f : {"metrics.csv", "errors.csv", "summary.json"}) {
    EXPECT_EQ(slurp(dir_ / "r1" / f), slurp(dir_ / "r2" / f)) << f;
  }
  ASSERT_EQ(run_command({"track", "--config", config_, "--model", "C", "--traj", "2", "--out", out("t1")}), 0);
  ASSERT_EQ(run_command({"track", "--config", config_, "--model", "C", "--traj", "2", "--out", out("t2")}), 0);
  EXPECT_EQ(slurp(dir_ / "t1" / "trace_C.csv"), slurp(dir_ / "t2" / "trace_C.csv"));
}

TEST_F(CliTest, TraceSchema) {
  ASSERT_EQ(run_command({"track", "--config", config_, "--model", "A", "--out", out("t")}), 0);
  const auto rows = lines_of(slurp(dir_ / "t" / "trace_A.csv"));
  ASSERT_EQ(rows.size(), 51u);  // header + 50 updates over 2 s
  const auto header = split(rows[0]);
  ASSERT_EQ(header.size(), 1u + 6u + 36u + 1u);
  EXPECT_EQ(header[0], "t");
  EXPECT_EQ(header[1], "x_rel");
  EXPECT_EQ(header[2], "y_rel");
  EXPECT_EQ(header[7], "p00");
  EXPECT_EQ(header[8], "p01");
  EXPECT_EQ(header[42], "p55");
  EXPECT_EQ(header[43], "pos_error_m");
  EXPECT_EQ(split(rows[1]).size(), header.size());
  EXPECT_EQ(split(rows[1])[0], "0.04");
  ASSERT_EQ(run_command({"track", "--config", config_, "--model", "C", "--out", out("tc")}), 0);
  EXPECT_EQ(split(lines_of(slurp(dir_ / "tc" / "trace_C.csv"))[0])[3], "psi_rel");
}

TEST_F(CliTest, TrajectoryOutOfRange) {
  ::testing::internal::CaptureStderr();
  EXPECT_EQ(run_command({"track", "--config", config_, "--model", "A", "--traj", "3", "--out", out("t")}), 2);
  ::testing::internal::GetCapturedStderr();
}

TEST_F(CliTest, GenerateAndSimulate) {
  ASSERT_EQ(run_command({"generate", "--config", config_, "--out", out("g")}), 0);
  const auto traj = lines_of(slurp(dir_ / "g" / "trajectories.csv"));
  EXPECT_EQ(traj.size(), 1u + 3u * 51u);
  EXPECT_EQ(split(traj[0]).size(), 15u);
  EXPECT_FALSE(fs::exists(dir_ / "g" / "measurements.csv"));

  ASSERT_EQ(run_command({"simulate", "--config", config_, "--traj", "1", "--out", out("s")}), 0);
  const auto meas = lines_of(slurp(dir_ / "s" / "measurements.csv"));
  EXPECT_EQ(meas.size(), 52u);
  EXPECT_EQ(meas[0], "traj,step,t,psidot_meas,v_meas,a_meas,x_rel_meas,y_rel_meas");
  EXPECT_EQ(split(meas[1])[0], "1");
  EXPECT_TRUE(fs::exists(dir_ / "s" / "trajectories.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "s" / "manifest.json"));
}

TEST_F(CliTest, EvaluateReproducesMetricsFromErrors) {
  ASSERT_EQ(run_command({"study", "--config", config_, "--out", out("res")}), 0);
  ASSERT_EQ(run_command({"evaluate", "--errors", out("res/errors.csv"), "--out", out("ev")}), 0);
  const auto metrics = lines_of(slurp(dir_ / "res" / "metrics.csv"));
  const auto eval = lines_of(slurp(dir_ / "ev" / "evaluation.csv"));
  ASSERT_EQ(eval.size(), metrics.size());
  EXPECT_EQ(eval[0], "model,n_trajectories,avg_max_error_m,avg_mean_error_m");
  for (std::size_t i = 1; i < metrics.size(); ++i) {
    const auto m = split(metrics[i]);
    const auto e = split(eval[i]);
    EXPECT_EQ(m[0], e[0]);
    EXPECT_EQ(e[1], "3");
    for (int c = 0; c < 2; ++c) {
      const double want = std::stod(m[1 + c]), got = std::stod(e[2 + c]);
      EXPECT_NEAR(got, want, 1e-10 * std::abs(want)) << metrics[i] << " vs " << eval[i];
    }
  }
}

TEST_F(CliTest, EvaluateRejectsForeignFile) {
  ::testing::internal::CaptureStderr();
  EXPECT_EQ(run_command({"evaluate", "--errors", config_, "--out", out("ev")}), 2);
  ::testing::internal::GetCapturedStderr();
}

TEST_F(CliTest, GramianReportJson) {
  ::testing::internal::CaptureStdout();
  ASSERT_EQ(run_command({"gramian", "--model", "A", "--dt", "0.04"}), 0);
  const auto report = nlohmann::json::parse(::testing::internal::GetCapturedStdout());
  EXPECT_NEAR(report["det"].get<double>() / 1.6078e-11, 1.0, 0.01);
  EXPECT_TRUE(report["observable"].get<bool>());
  EXPECT_EQ(report["n_blocks"], 6);

  ::testing::internal::CaptureStdout();
  ASSERT_EQ(run_command({"gramian", "--model", "C", "--state", "30,2,0.1,0.1,0,0"}), 0);
  const auto still = nlohmann::json::parse(::testing::internal::GetCapturedStdout());
  EXPECT_FALSE(still["observable"].get<bool>());
}

TEST_F(CliTest, GramianArgumentErrors) {
  ::testing::internal::CaptureStderr();
  EXPECT_EQ(run_command({"gramian", "--model", "Q"}), 2);
  EXPECT_EQ(run_command({"gramian", "--model", "A", "--state", "1,2,3"}), 2);
  EXPECT_EQ(run_command({"gramian", "--model", "A", "--dt", "-1"}), 2);
  ::testing::internal::GetCapturedStderr();
}

TEST_F(CliTest, HelpAndVersionExitZero) {
  ::testing::internal::CaptureStdout();
  EXPECT_EQ(run_command({"--help"}), 0);
  EXPECT_EQ(run_command({"--version"}), 0);
  ::testing::internal::GetCapturedStdout();
}

}  // namespace
}  // namespace relkal
