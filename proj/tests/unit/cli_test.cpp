#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "contrafair/serialization.hpp"

namespace contrafair {
namespace {

namespace fs = std::filesystem;

const fs::path kData = CONTRAFAIR_DATA_DIR;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("contrafair_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Exit status of the tool; stderr lands in err.txt.
  int run(const std::string& args) const {
    const std::string cmd = "env -u CONTRAFAIR_SEED \"" + std::string(CONTRAFAIR_CLI) + "\" " + args + " > \"" +
                            (dir_ / "out.txt").string() + "\" 2> \"" + (dir_ / "err.txt").string() + "\"";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string slurp(const fs::path& path) const {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
  std::string path(const std::string& name) const { return "\"" + (dir_ / name).string() + "\""; }
  std::string data(const std::string& rel) const { return "\"" + (kData / rel).string() + "\""; }

  fs::path dir_;
};

TEST_F(Cli, PassingAuditExitsZero) {
  EXPECT_EQ(run("audit --config " + data("job_location/audit.json") + " --out " + path("r.json")), 0)
      << slurp(dir_ / "err.txt");
  const Json report = read_json(dir_ / "r.json");
  EXPECT_EQ(report["summary"]["failed"], 0);
  EXPECT_TRUE(report["metadata"]["timestamp"].is_null());
}

TEST_F(Cli, FailingVerdictExitsTwo) {
  EXPECT_EQ(run("audit --config " + data("job_location/audit_biased.json") + " --format text --out " +
                path("r.txt")),
            2)
      << slurp(dir_ / "err.txt");
  EXPECT_NE(slurp(dir_ / "r.txt").find("FAIL i_contrast [full] P,Q"), std::string::npos);
}

TEST_F(Cli, OperationalErrorsExitOne) {
  std::ofstream(dir_ / "garbage.json") << "{ this is not json";
  EXPECT_EQ(run("audit --config " + path("garbage.json")), 1);
  EXPECT_NE(slurp(dir_ / "err.txt").find("ParseError"), std::string::npos) << slurp(dir_ / "err.txt");
  EXPECT_EQ(run("audit --config " + path("absent.json")), 1);
  EXPECT_EQ(run("audit"), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("--help"), 0);
}

TEST_F(Cli, SameSeedByteIdenticalReports) {
  const std::string config = "audit --config " + data("job_location/audit_biased.json") + " --seed 4 --out ";
  EXPECT_EQ(run(config + path("a.json")), 2);
  EXPECT_EQ(run(config + path("b.json")), 2);
  const std::string a = slurp(dir_ / "a.json");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(dir_ / "b.json"));
  EXPECT_EQ(read_json(dir_ / "a.json")["metadata"]["seed"], 4);
}

TEST_F(Cli, EnvironmentSeedBelowFlag) {
  const std::string cli = "\"" + std::string(CONTRAFAIR_CLI) + "\"";
  const std::string base = " audit --config " + data("job_location/audit.json");
  ASSERT_EQ(std::system(("CONTRAFAIR_SEED=31 " + cli + base + " --out " + path("env.json")).c_str()), 0);
  ASSERT_EQ(std::system(("CONTRAFAIR_SEED=31 " + cli + base + " --seed 32 --out " + path("flag.json")).c_str()), 0);
  EXPECT_EQ(read_json(dir_ / "env.json")["metadata"]["seed"], 31);
  EXPECT_EQ(read_json(dir_ / "flag.json")["metadata"]["seed"], 32);
}

TEST_F(Cli, SimulateFitTrainReport) {
  ASSERT_EQ(run("simulate --preset fix-a -n 400 --seed 3 --out " + path("pop.csv") + " --graph-out " +
                path("graph.json") + " --scm-out " + path("truth.json")),
            0)
      << slurp(dir_ / "err.txt");
  ASSERT_EQ(run("fit --graph " + path("graph.json") + " --data " + path("pop.csv") + " --out " + path("scm.json")), 0)
      << slurp(dir_ / "err.txt");
  const Json scm = read_json(dir_ / "scm.json");
  EXPECT_NEAR(scm["equations"]["X"]["weights"]["A=1"].get<double>(), 2.0, 0.2);

  std::ofstream(dir_ / "train.json") << R"({"family": "contrastive", "penalty_weight": 5, "epochs": 300,
                                             "outcome_threshold": 0.1, "decisions": ["deny", "grant"]})";
  ASSERT_EQ(run("train --graph " + path("graph.json") + " --data " + path("pop.csv") + " --config " +
                path("train.json") + " --seed 9 --out " + path("pred.json")),
            0)
      << slurp(dir_ / "err.txt");
  const Json pred = read_json(dir_ / "pred.json");
  EXPECT_EQ(pred["family"], "contrastive");
  EXPECT_EQ(pred["train_config"]["seed"], 9);

  ASSERT_EQ(run("audit --config " + data("job_location/audit.json") + " --out " + path("r.json")), 0);
  ASSERT_EQ(run("report " + path("r.json") + " --format text --out " + path("r.txt")), 0);
  EXPECT_NE(slurp(dir_ / "r.txt").find("checks,"), std::string::npos);
  ASSERT_EQ(run("report " + path("r.json") + " --format json --out " + path("again.json")), 0);
  EXPECT_EQ(slurp(dir_ / "again.json"), slurp(dir_ / "r.json"));
}

TEST_F(Cli, SimulateFromModelFileIsDeterministic) {
  ASSERT_EQ(run("simulate --preset law-school -n 50 --seed 2 --scm-out " + path("truth.json") + " --out " +
                path("a.csv")),
            0);
  ASSERT_EQ(run("simulate --graph " + path("truth.json") + " -n 50 --seed 2 --out " + path("b.csv")), 0)
      << slurp(dir_ / "err.txt");
  const std::string a = slurp(dir_ / "a.csv");
  EXPECT_EQ(a.substr(0, a.find('\n')), "id,race,sex,GPA,LSAT,FYA");
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 51);
}

}  // namespace
}  // namespace contrafair
