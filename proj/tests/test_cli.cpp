#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "hybrid_avoid/cli.hpp"

namespace fs = std::filesystem;
using namespace hybrid_avoid;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json reference_doc() {
  return json::parse(read_file(std::string(HYBRID_AVOID_CONFIG_DIR) + "/reference_3d.json"));
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("hybrid_avoid_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  // Writes the reference config with outputs redirected into the temp dir.
  std::string write_config(json doc, const std::string& name = "config.json") {
    doc["outputs"]["trajectory_dir"] = (dir / "traj").string();
    doc["outputs"]["summary_path"] = (dir / "summary.json").string();
    const auto path = dir / name;
    std::ofstream(path) << doc.dump(2);
    return path.string();
  }

  int run(int (*cmd)(const cli::Options&, std::ostream&, std::ostream&), cli::Options opt) {
    out.str("");
    err.str("");
    return cmd(opt, out, err);
  }

  fs::path dir;
  std::ostringstream out;
  std::ostringstream err;
};

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(ParseDims, Forms) {
  EXPECT_EQ(cli::parse_dims("2..6"), (std::vector<int>{2, 3, 4, 5, 6}));
  EXPECT_EQ(cli::parse_dims("3"), std::vector<int>{3});
  EXPECT_EQ(cli::parse_dims("2,5"), (std::vector<int>{2, 5}));
  EXPECT_THROW(cli::parse_dims("6..2"), Error);
  EXPECT_THROW(cli::parse_dims("1..3"), Error);
  EXPECT_THROW(cli::parse_dims("x"), Error);
}

TEST_F(Cli, ValidateReference) {
  cli::Options opt;
  opt.config = write_config(reference_doc());
  EXPECT_EQ(run(cli::cmd_validate, opt), 0);
  const std::string text = out.str();
  EXPECT_NE(text.find("p_minus1 = [-0.347539"), std::string::npos) << text;
  EXPECT_NE(text.find("PASS mu"), std::string::npos);
  EXPECT_NE(text.find("mu_min = 0.387938"), std::string::npos);
}

TEST_F(Cli, ValidateRejectsSmallMu) {
  json doc = reference_doc();
  doc["params"]["mu"] = 0.3;
  cli::Options opt;
  opt.config = write_config(doc);
  EXPECT_EQ(run(cli::cmd_validate, opt), 1);
  EXPECT_NE(out.str().find("FAIL mu = 0.3 not in (0.38793843"), std::string::npos) << out.str();
}

TEST_F(Cli, ValidateMalformedFile) {
  const auto path = dir / "bad.json";
  std::ofstream(path) << "{ \"obstacle\": ";
  cli::Options opt;
  opt.config = path.string();
  EXPECT_EQ(run(cli::cmd_validate, opt), 2);
}

TEST_F(Cli, SimulateReference) {
  cli::Options opt;
  opt.config = write_config(reference_doc());
  ASSERT_EQ(run(cli::cmd_simulate, opt), 0) << err.str();
  const json summary = json::parse(read_file(dir / "summary.json"));
  ASSERT_EQ(summary["runs"].size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    const auto& r = summary["runs"][i];
    EXPECT_GE(r["min_dist"].get<double>(), 0.7);
    const int jumps = r["jumps"].get<int>();
    EXPECT_TRUE(jumps == 0 || jumps == 1 || jumps == 2) << jumps;
    EXPECT_TRUE(fs::exists(r["csv"].get<std::string>()));
  }
  EXPECT_TRUE(summary["params"]["certified"].get<bool>());
  EXPECT_TRUE(fs::exists(dir / "traj" / "pointcloud.csv"));
}

TEST_F(Cli, SimulateEmptyRuns) {
  json doc = reference_doc();
  doc["runs"] = json::array();
  cli::Options opt;
  opt.config = write_config(doc);
  EXPECT_EQ(run(cli::cmd_simulate, opt), 0);
  const json summary = json::parse(read_file(dir / "summary.json"));
  EXPECT_TRUE(summary["runs"].empty());
}

TEST_F(Cli, SimulateUnsafeStart) {
  json doc = reference_doc();
  doc["runs"] = json::array({json{{"x0", {1.1, 1.0, 1.0}}, {"m0", 0}}});
  cli::Options opt;
  opt.config = write_config(doc);
  EXPECT_EQ(run(cli::cmd_simulate, opt), 1);
  const json summary = json::parse(read_file(dir / "summary.json"));
  EXPECT_EQ(summary["runs"][0]["error"].get<std::string>(), "UnsafeStart");
}

TEST_F(Cli, SimulateInvalidParamsIsConfigError) {
  json doc = reference_doc();
  doc["params"]["psi_bar"] = 0.2;
  cli::Options opt;
  opt.config = write_config(doc);
  EXPECT_EQ(run(cli::cmd_simulate, opt), 2);
}

TEST_F(Cli, SimulateIsByteDeterministic) {
  cli::Options opt;
  opt.config = write_config(reference_doc());
  ASSERT_EQ(run(cli::cmd_simulate, opt), 0);
  const std::string first = read_file(dir / "traj" / "run_000.csv");
  const std::string cloud = read_file(dir / "traj" / "pointcloud.csv");
  opt.parallel = true;
  ASSERT_EQ(run(cli::cmd_simulate, opt), 0);
  EXPECT_EQ(read_file(dir / "traj" / "run_000.csv"), first);
  EXPECT_EQ(read_file(dir / "traj" / "pointcloud.csv"), cloud);
}

TEST_F(Cli, VerifyLemmasPass) {
  cli::Options opt;
  opt.config = write_config(reference_doc());
  opt.suite = "lemmas";
  opt.samples = 500;
  opt.seeds = 2;
  opt.report_path = (dir / "report.json").string();
  EXPECT_EQ(run(cli::cmd_verify, opt), 0) << out.str();
  const json rep = json::parse(read_file(dir / "report.json"));
  EXPECT_TRUE(rep["pass"].get<bool>());
  // 3 checks on the configured parameters + 5 per random configuration.
  EXPECT_EQ(rep["reports"].size(), 3u + 5u * 5u * 2u);
}

TEST_F(Cli, VerifyTamperedHysteresisFails) {
  json doc = reference_doc();
  doc["params"]["psi"] = 0.266;
  doc["params"]["psi_bar"] = 0.249;
  cli::Options opt;
  opt.config = write_config(doc);
  opt.suite = "lemmas";
  opt.samples = 1000;
  opt.dims = {3};
  opt.seeds = 1;
  EXPECT_EQ(run(cli::cmd_verify, opt), 2);  // rejected by validation
  opt.unchecked = true;
  EXPECT_EQ(run(cli::cmd_verify, opt), 1);
  EXPECT_NE(out.str().find("FAIL jump_cover_and_hysteresis"), std::string::npos) << out.str();
}

TEST_F(Cli, VerifyTrajectorySuite) {
  cli::Options opt;
  opt.config = write_config(reference_doc());
  opt.suite = "trajectory";
  EXPECT_EQ(run(cli::cmd_verify, opt), 0) << out.str();
  EXPECT_TRUE(fs::exists(dir / "verify_report.json"));
}

TEST_F(Cli, SampleSets) {
  cli::Options opt;
  opt.config = write_config(reference_doc());
  opt.sets = {"J0", "obstacle"};
  opt.samples = 200;
  opt.out_path = (dir / "cloud.csv").string();
  EXPECT_EQ(run(cli::cmd_sample_sets, opt), 0) << err.str();
  std::istringstream in(read_file(dir / "cloud.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "x_1,x_2,x_3,set_label");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 400);

  json doc = reference_doc();
  doc["params"]["eps_s"] = 0.7;
  opt.config = write_config(doc, "thin.json");
  opt.unchecked = true;
  opt.sets = {"J0"};
  EXPECT_EQ(run(cli::cmd_sample_sets, opt), 1);
}

TEST_F(Cli, BinaryExitCodes) {
  const std::string bin = HYBRID_AVOID_CLI;
  const std::string cfg = write_config(reference_doc());
  EXPECT_EQ(shell(bin + " validate " + cfg + " > /dev/null"), 0);
  EXPECT_EQ(shell(bin + " validate " + (dir / "missing.json").string() + " > /dev/null 2>&1"), 2);
  EXPECT_EQ(shell(bin + " frobnicate > /dev/null 2>&1"), 2);
  EXPECT_EQ(shell(bin + " verify " + cfg + " --suite nope > /dev/null 2>&1"), 2);
  EXPECT_EQ(shell(bin + " verify " + cfg + " --suite lemmas --dims 2 --seeds 1 --samples 200 --report " +
                  (dir / "r.json").string() + " > /dev/null"),
            0);
}

TEST_F(Cli, NavSeedEnvironmentSetsDefaultSeed) {
  const std::string bin = HYBRID_AVOID_CLI;
  const std::string cfg = write_config(reference_doc());
  const auto a = (dir / "a.csv").string();
  const auto b = (dir / "b.csv").string();
  const auto c = (dir / "c.csv").string();
  ASSERT_EQ(shell("NAV_SEED=17 " + bin + " sample-sets " + cfg + " --set J0 --samples 50 --out " + a + " > /dev/null"),
            0);
  ASSERT_EQ(shell(bin + " sample-sets " + cfg + " --set J0 --samples 50 --seed 17 --out " + b + " > /dev/null"), 0);
  ASSERT_EQ(shell(bin + " sample-sets " + cfg + " --set J0 --samples 50 --seed 18 --out " + c + " > /dev/null"), 0);
  EXPECT_EQ(read_file(a), read_file(b));
  EXPECT_NE(read_file(a), read_file(c));
}
