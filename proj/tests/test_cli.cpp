#include <gtest/gtest.h>

#include <sstream>

#include "agentmart/cli.hpp"
#include "agentmart/http_transport.hpp"
#include "agentmart/scenario.hpp"
#include "support.hpp"

using testing_support::read_file;
using testing_support::TempDir;
using testing_support::write_file;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "agentmart");
  std::ostringstream out, err;
  const int code = agentmart::cli(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run_cli({}).code, 1);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 1);
  EXPECT_EQ(run_cli({"run", "--n", "many"}).code, 1);
  EXPECT_EQ(run_cli({"--help"}).code, 0);
}

TEST(Cli, GenerateWritesScenarioFile) {
  TempDir dir;
  const auto r = run_cli({"generate", "--suite", "bb", "--category", "stapler", "--n", "4",
                          "--seed", "7", "--out", dir.path().string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto scenarios = agentmart::read_scenarios_jsonl(dir / "scenarios_BB_stapler_7.jsonl");
  EXPECT_EQ(scenarios.size(), 4u);
}

TEST(Cli, GenerateRejectsUnknownCategory) {
  TempDir dir;
  const auto r = run_cli({"generate", "--category", "spaceship", "--out", dir.path().string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("spaceship"), std::string::npos);
}

TEST(Cli, RunEstimateAnalyzeCompare) {
  TempDir dir;
  const std::string out = dir.path().string();
  auto r = run_cli({"run", "--category", "stapler", "--category", "toothpaste", "--n", "150",
                    "--seed", "3", "--out", out, "--run-id", "a"});
  ASSERT_EQ(r.code, 0) << r.err;
  r = run_cli({"run", "--category", "stapler", "--category", "toothpaste", "--n", "150",
               "--seed", "4", "--out", out, "--run-id", "b", "--preset", "gpt-4.1"});
  ASSERT_EQ(r.code, 0) << r.err;

  r = run_cli({"estimate", "--run", out + "/a", "--out", out + "/fit.json", "--heatmap",
               out + "/heat.csv", "--design-out", out + "/design.csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = nlohmann::json::parse(read_file(dir / "fit.json"));
  EXPECT_EQ(report["n_choice_sets"], 300);
  EXPECT_EQ(report["run"]["n_valid"], 300);
  EXPECT_EQ(report["n_obs"], 2400);
  EXPECT_TRUE(fs::exists(dir / "heat.csv"));

  r = run_cli({"estimate", "--design", out + "/design.csv", "--out", out + "/fit2.json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto again = nlohmann::json::parse(read_file(dir / "fit2.json"));
  EXPECT_NEAR(again["log_lik"].get<double>(), report["log_lik"].get<double>(), 1e-9);

  r = run_cli({"analyze", "--run", out + "/a"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "a" / "analysis" / "shares_stapler.csv"));
  EXPECT_TRUE(fs::exists(dir / "a" / "analysis" / "analysis.json"));

  r = run_cli({"compare", "--a", out + "/a", "--b", out + "/b"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out).size(), 2u);
}

TEST(Cli, EstimateNeedsExactlyOneSource) {
  EXPECT_EQ(run_cli({"estimate"}).code, 1);
  TempDir dir;
  EXPECT_EQ(run_cli({"estimate", "--run", (dir / "nothing").string()}).code, 1);
}

TEST(Cli, NetworkAgentWithoutLiveIsRefused) {
  TempDir dir;
  write_file(dir / "provider.json",
             R"({"provider_kind":"openai","model_name":"m","endpoint_url":"https://llm.invalid/v1"})");
  const auto before = agentmart::egress::attempts();
  const auto r = run_cli({"run", "--agent", "vlm", "--provider", (dir / "provider.json").string(),
                          "--category", "stapler", "--n", "1", "--out", dir.path().string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("live"), std::string::npos);
  EXPECT_EQ(agentmart::egress::attempts(), before);
}

TEST(Cli, SellerLoopOffline) {
  TempDir dir;
  const auto r = run_cli({"seller-loop", "--category", "stapler", "--n", "30", "--seed", "2",
                          "--out", dir.path().string(), "--run-id", "s", "--stub-title",
                          "Premium Stapler"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "s" / "ate.csv"));
  EXPECT_EQ(nlohmann::json::parse(r.out)["new_title"], "Premium Stapler");
}
