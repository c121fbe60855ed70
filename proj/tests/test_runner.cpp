#include <gtest/gtest.h>

#include <atomic>

#include "agentmart/choice_model.hpp"
#include "agentmart/error.hpp"
#include "agentmart/runner.hpp"
#include "support.hpp"

using namespace agentmart;
namespace fs = std::filesystem;
using testing_support::bundled_catalog;
using testing_support::read_file;
using testing_support::ScriptedTransport;
using testing_support::TempDir;

namespace {

RunConfig small_config(const fs::path& out) {
  RunConfig c;
  c.suite = Suite::BB;
  c.categories = {"stapler", "mousepad"};
  c.agent.kind = "synthetic";
  c.agent.preset = "claude-sonnet-4";
  c.n = 15;
  c.seed = 5;
  c.parallelism = 3;
  c.out = out;
  return c;
}

std::vector<std::string> choice_files(const RunLog& log) {
  std::vector<std::string> out;
  for (const auto& s : log.scenarios) {
    out.push_back(read_file(log.root / "scenarios" / s.scenario_id / "choice.json"));
  }
  return out;
}

class ThrowingAgent final : public BuyerAgent {
 public:
  const std::string& id() const noexcept override { return id_; }
  AgentDecision choose(const ChoiceRequest& req) const override {
    if (req.scenario.scenario_id.ends_with("1")) throw std::runtime_error("boom");
    return RuleAgent(Rule::LowestPrice).choose(req);
  }

 private:
  std::string id_ = "thrower";
};

class CountingAgent final : public BuyerAgent {
 public:
  const std::string& id() const noexcept override { return id_; }
  AgentDecision choose(const ChoiceRequest& req) const override {
    ++calls;
    return RuleAgent(Rule::HighestRating).choose(req);
  }
  mutable std::atomic<int> calls{0};

 private:
  std::string id_ = "rule_highest_rating";
};

}  // namespace

TEST(RunConfig, JsonRoundTrip) {
  RunConfig c = small_config("runs");
  c.suite = Suite::RS;
  c.variant = "price_discount:0.05";
  c.request_budget = 10;
  const auto j = nlohmann::json::parse(to_json(c).dump());
  const RunConfig back = run_config_from_json(j);
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(back.suite, Suite::RS);
  EXPECT_EQ(back.request_budget, 10u);
}

TEST(RunConfig, DefaultRunIds) {
  RunConfig c;
  c.seed = 7;
  EXPECT_EQ(c.effective_run_id(), "BB-seed7");
  c.run_id = "mine";
  EXPECT_EQ(c.effective_run_id(), "mine");
}

TEST(RunConfig, ValidationRejectsBadInputs) {
  EXPECT_THROW(run_config_from_json({{"suite", "nope"}}), ValidationError);
  EXPECT_THROW(run_config_from_json({{"n", 0}}), ValidationError);
  EXPECT_THROW(run_config_from_json({{"suite", "rs"}}), ValidationError);
  EXPECT_THROW(run_config_from_json(nlohmann::json::array()), ValidationError);
}

TEST(MakeAgent, KnownKindsAndPresets) {
  AgentConfig a;
  a.preset = "gpt-4.1";
  EXPECT_EQ(make_agent(a, 0, bundled_catalog())->id(), "synthetic-gpt-4.1");
  a.preset = "unknown-model";
  EXPECT_THROW(make_agent(a, 0, bundled_catalog()), ValidationError);
  AgentConfig r;
  r.kind = "rule_lowest_price";
  EXPECT_EQ(make_agent(r, 0, bundled_catalog())->id(), "rule_lowest_price");
  AgentConfig bad;
  bad.kind = "psychic";
  EXPECT_THROW(make_agent(bad, 0, bundled_catalog()), ValidationError);
  AgentConfig vlm;
  vlm.kind = "vlm";
  EXPECT_THROW(make_agent(vlm, 0, bundled_catalog()), ValidationError);
}

TEST(RunBatch, WritesTheRunLayout) {
  TempDir dir;
  const RunLog log = run_batch(small_config(dir.path()));
  EXPECT_EQ(log.run_id, "BB-seed5");
  EXPECT_TRUE(fs::exists(log.root / "config.json"));
  EXPECT_TRUE(fs::exists(log.root / "catalog.json"));
  EXPECT_TRUE(fs::exists(log.root / "summary.json"));
  ASSERT_EQ(log.scenarios.size(), 30u);
  for (const auto& s : log.scenarios) {
    const fs::path d = log.root / "scenarios" / s.scenario_id;
    for (const char* f : {"scenario.json", "page.html", "raw_response.json", "choice.json"}) {
      EXPECT_TRUE(fs::exists(d / f)) << d / f;
    }
  }
  EXPECT_EQ(log.summary["n_valid"], 30);
  EXPECT_EQ(log.records[0].raw_ref, "scenarios/" + log.scenarios[0].scenario_id + "/raw_response.json");
}

TEST(RunBatch, ByteIdenticalAcrossRunsAndThreadCounts) {
  TempDir a, b;
  RunConfig ca = small_config(a.path());
  RunConfig cb = small_config(b.path());
  cb.parallelism = 1;
  EXPECT_EQ(choice_files(run_batch(ca)), choice_files(run_batch(cb)));
}

TEST(RunBatch, ResumesWithoutRedoingFinishedScenarios) {
  TempDir dir;
  RunConfig c = small_config(dir.path());
  c.agent.kind = "rule_highest_rating";
  c.agent.preset.clear();
  CountingAgent agent;
  const RunLog first = run_batch(c, agent, bundled_catalog());
  EXPECT_EQ(agent.calls.load(), 30);
  fs::remove(first.root / "scenarios" / first.scenarios[4].scenario_id / "choice.json");
  fs::remove(first.root / "scenarios" / first.scenarios[9].scenario_id / "choice.json");
  const RunLog second = run_batch(c, agent, bundled_catalog());
  EXPECT_EQ(agent.calls.load(), 32);
  EXPECT_EQ(first.records, second.records);
}

TEST(RunBatch, RefusesToMixConfigsUnderOneRunId) {
  TempDir dir;
  RunConfig c = small_config(dir.path());
  c.run_id = "fixed";
  run_batch(c);
  c.seed = 6;
  EXPECT_THROW(run_batch(c), ValidationError);
  RunConfig same = small_config(dir.path());
  same.run_id = "fixed";
  same.parallelism = 1;
  EXPECT_NO_THROW(run_batch(same));
}

TEST(RunBatch, AgentExceptionsBecomeInvalidRecords) {
  TempDir dir;
  RunConfig c = small_config(dir.path());
  c.categories = {"stapler"};
  const ThrowingAgent agent;
  const RunLog log = run_batch(c, agent, bundled_catalog());
  std::size_t invalid = 0;
  for (const auto& r : log.records) {
    if (!r.valid) {
      ++invalid;
      EXPECT_NE(r.reason.find("boom"), std::string::npos);
    }
  }
  EXPECT_GT(invalid, 0u);
  EXPECT_EQ(log.summary["n_invalid"], invalid);
}

TEST(RunBatch, LiveGateBlocksNetworkAgents) {
  TempDir dir;
  RunConfig c = small_config(dir.path());
  ProviderConfig p;
  p.model_name = "m";
  p.endpoint_url = "https://llm.invalid/v1";
  const auto transport = std::make_shared<ScriptedTransport>();
  const VlmAgent agent("vlm", p, transport, nullptr, [](auto) {});
  const auto before = egress::attempts();
  EXPECT_THROW(run_batch(c, agent, bundled_catalog()), ValidationError);
  EXPECT_TRUE(transport->requests().empty());
  EXPECT_EQ(egress::attempts(), before);
  EXPECT_FALSE(fs::exists(dir.path() / c.effective_run_id()));
}

TEST(RunBatch, LiveRunUsesTheTransport) {
  TempDir dir;
  RunConfig c = small_config(dir.path());
  c.categories = {"stapler"};
  c.n = 2;
  c.live = true;
  ProviderConfig p;
  p.model_name = "m";
  p.endpoint_url = "https://llm.invalid/v1";
  // Replies without a tool call are retried up to max_attempts (3) times.
  const auto transport = std::make_shared<ScriptedTransport>();
  for (int i = 0; i < 6; ++i) {
    transport->push(200, R"({"choices":[{"message":{"content":"none"}}]})");
  }
  const VlmAgent agent("vlm", p, transport, nullptr, [](auto) {});
  const RunLog log = run_batch(c, agent, bundled_catalog());
  EXPECT_EQ(transport->requests().size(), 6u);
  EXPECT_EQ(log.summary["n_invalid"], 2);
  EXPECT_FALSE(egress::allowed());
}

TEST(RunLog, LoadRoundTripsAndFeedsTheEstimator) {
  TempDir dir;
  const RunLog written = run_batch(small_config(dir.path()));
  const RunLog loaded = RunLog::load(written.root);
  EXPECT_EQ(loaded.scenarios, written.scenarios);
  EXPECT_EQ(loaded.records, written.records);
  EXPECT_EQ(loaded.catalog().canonical_serialization(),
            bundled_catalog().canonical_serialization());
  const DesignData d = build_design(loaded.records, loaded.scenarios, loaded.catalog());
  EXPECT_EQ(d.rows.size(), 8u * loaded.summary["n_valid"].get<std::size_t>());
}

TEST(RunLog, LoadRejectsIncompleteTree) {
  TempDir dir;
  const RunLog written = run_batch(small_config(dir.path()));
  fs::remove(written.root / "scenarios" / written.scenarios[0].scenario_id / "choice.json");
  EXPECT_THROW(RunLog::load(written.root), ValidationError);
  EXPECT_THROW(RunLog::load(dir.path() / "missing"), ValidationError);
}

TEST(SellerPipeline, NullInterventionEndToEnd) {
  TempDir dir;
  RunConfig c;
  c.suite = Suite::SHUFFLE_ONLY;
  c.categories = {"stapler"};
  c.n = 60;
  c.seed = 3;
  c.out = dir.path();
  c.run_id = "seller";
  AgentConfig a;
  a.preset = "claude-sonnet-4";
  const auto buyer = make_agent(a, c.seed, bundled_catalog());
  const auto result = seller_pipeline(c, *buyer, StubSeller::unchanged(), bundled_catalog());
  EXPECT_EQ(result.new_title, result.original_title);
  EXPECT_GT(result.baseline.find(result.focal_product)->count, 0u);
  EXPECT_EQ(result.ate.n_pre, 60u);
  EXPECT_EQ(result.ate.n_post, 60u);
  EXPECT_TRUE(fs::exists(result.root / "ate.json"));
  EXPECT_TRUE(fs::exists(result.root / "seller" / "reply.json"));
  EXPECT_TRUE(fs::exists(result.root / "baseline" / "summary.json"));
  EXPECT_TRUE(fs::exists(result.root / "post" / "summary.json"));
  const RunLog post = RunLog::load(result.root / "post");
  const RunLog pre = RunLog::load(result.root / "baseline");
  for (std::size_t i = 0; i < pre.scenarios.size(); ++i) {
    EXPECT_EQ(pre.scenarios[i].permutation(), post.scenarios[i].permutation());
  }
}

TEST(SellerPipeline, SellerFailureStopsBeforePostRun) {
  TempDir dir;
  RunConfig c;
  c.suite = Suite::SHUFFLE_ONLY;
  c.categories = {"stapler"};
  c.n = 20;
  c.out = dir.path();
  c.run_id = "seller-fail";
  const RuleAgent buyer(Rule::LowestPrice);
  EXPECT_THROW(seller_pipeline(c, buyer, StubSeller("no tag"), bundled_catalog()), SellerError);
  EXPECT_TRUE(fs::exists(dir.path() / "seller-fail" / "seller" / "error.json"));
  EXPECT_FALSE(fs::exists(dir.path() / "seller-fail" / "post"));
}

TEST(SellerPipeline, NeedsShuffleSuiteAndOneCategory) {
  TempDir dir;
  RunConfig c;
  c.categories = {"stapler"};
  c.out = dir.path();
  const RuleAgent buyer(Rule::LowestPrice);
  EXPECT_THROW(seller_pipeline(c, buyer, StubSeller::unchanged(), bundled_catalog()),
               ValidationError);
  c.suite = Suite::SHUFFLE_ONLY;
  c.categories = {"stapler", "mousepad"};
  EXPECT_THROW(seller_pipeline(c, buyer, StubSeller::unchanged(), bundled_catalog()),
               ValidationError);
}
