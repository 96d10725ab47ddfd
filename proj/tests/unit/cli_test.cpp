// Drives the built executable end to end.

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code{-1};
  std::string out;
};

Outcome invoke(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " \"" OJAPCA_CLI "\" " + args + " 2>/dev/null";
  Outcome r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (std::size_t got = std::fread(buf, 1, sizeof buf, pipe)) r.out.append(buf, got);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::path(::testing::TempDir()) /
           ("ojapca_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
    config_ = dir_ / "config.json";
    std::ofstream(config_) << R"({
      "model": {"spectrum": {"kind": "two_block", "top": 2, "tail": 1}},
      "p": 2, "d": 8, "stepsize": {"optimal": 2000}, "n_steps": 2000,
      "trials": 3, "base_seed": 5, "output": ")"
                           << (dir_ / "out").string() << R"("})";
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string common() const { return "--config \"" + config_.string() + "\" --quiet"; }

  fs::path dir_;
  fs::path config_;
};

TEST_F(Cli, SelftestPasses) { EXPECT_EQ(invoke("selftest --quiet").code, 0); }

TEST_F(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(invoke("").code, 1);
  EXPECT_EQ(invoke("frobnicate").code, 1);
  EXPECT_EQ(invoke("run --config /nonexistent/config.json").code, 1);
}

TEST_F(Cli, ConfigErrorsExitOne) {
  EXPECT_EQ(invoke("run " + common() + " --override trails=2").code, 1);
  EXPECT_EQ(invoke("run " + common() + " --override p=8").code, 1);
  EXPECT_EQ(invoke("sweep " + common()).code, 1);  // no budgets
}

TEST_F(Cli, BoundsReportsFailedHypothesisWithoutFailing) {
  const Outcome r = invoke("bounds " + common() + " --json --override eps=0.2");
  ASSERT_EQ(r.code, 0);
  const auto doc = nlohmann::json::parse(r.out);
  EXPECT_FALSE(doc["hypotheses"]["all_hold"].get<bool>());
  bool eps_condition_false = false;
  for (const auto& c : doc["hypotheses"]["conditions"])
    if (c["name"] == "eps_in_(0,1/7)") eps_condition_false = !c["holds"].get<bool>();
  EXPECT_TRUE(eps_condition_false);

  const Outcome text = invoke("bounds " + common() + " --override eps=0.2");
  EXPECT_EQ(text.code, 0);
  EXPECT_NE(text.out.find("false"), std::string::npos);
}

TEST_F(Cli, RunIsReproducible) {
  ASSERT_EQ(invoke("run " + common() + " --override trials=1").code, 0);
  const std::string first = slurp(dir_ / "out.csv");
  ASSERT_FALSE(first.empty());
  ASSERT_EQ(invoke("run " + common() + " --override trials=1 --threads 2").code, 0);
  EXPECT_EQ(slurp(dir_ / "out.csv"), first);
  const auto sidecar = nlohmann::json::parse(slurp(dir_ / "out.json"));
  EXPECT_EQ(sidecar["config"]["trials"], 1);
}

TEST_F(Cli, EnvironmentSeedSitsBelowOverrides) {
  ASSERT_EQ(invoke("run " + common(), "OJA_SEED=77").code, 0);
  const std::string env_seeded = slurp(dir_ / "out.csv");
  ASSERT_EQ(invoke("run " + common() + " --override base_seed=77").code, 0);
  EXPECT_EQ(slurp(dir_ / "out.csv"), env_seeded);
  ASSERT_EQ(invoke("run " + common() + " --override base_seed=5", "OJA_SEED=77").code, 0);
  const std::string overridden = slurp(dir_ / "out.csv");
  ASSERT_EQ(invoke("run " + common()).code, 0);
  EXPECT_EQ(slurp(dir_ / "out.csv"), overridden);
  EXPECT_NE(overridden, env_seeded);
}

TEST_F(Cli, SweepAndCompareWriteFiles) {
  ASSERT_EQ(invoke("sweep " + common() + " --override budgets=[200,800]").code, 0);
  EXPECT_TRUE(fs::exists(dir_ / "out_sweep.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "out_sweep.json"));
  ASSERT_EQ(invoke("compare " + common()).code, 0);
  const std::string csv = slurp(dir_ / "out_compare.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "n,online_mean_tan2,batch_mean_tan2,online_mean_sin2,batch_mean_sin2");
}

}  // namespace
