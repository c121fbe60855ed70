#include <gtest/gtest.h>

#include <cmath>

#include "agentmart/agents.hpp"
#include "agentmart/error.hpp"
#include "agentmart/reference_estimates.hpp"
#include "agentmart/scenario_gen.hpp"
#include "support.hpp"

using namespace agentmart;
using namespace std::chrono_literals;
using testing_support::bundled_catalog;
using testing_support::RecordingSleeper;
using testing_support::ScriptedTransport;

namespace {

Scenario bb_scenario(std::uint64_t seed = 7) {
  return gen_bb_scenarios(bundled_catalog().assortment("stapler"), 1, PerturbSpec{}, seed)
      .front();
}

std::string openai_tool_reply(const std::string& product_id) {
  nlohmann::json args = {{"product_id", product_id}};
  nlohmann::json body = {
      {"choices",
       {{{"message",
          {{"content", "reasoning"},
           {"tool_calls",
            {{{"type", "function"},
              {"function", {{"name", "add_to_cart"}, {"arguments", args.dump()}}}}}}}}}}}};
  return body.dump();
}

std::string openai_text_reply() {
  return R"({"choices":[{"message":{"content":"I would buy the red one"}}]})";
}

ProviderConfig fake_provider(int attempts = 3) {
  ProviderConfig c;
  c.model_name = "fake";
  c.endpoint_url = "https://llm.invalid/v1/chat/completions";
  c.max_attempts = attempts;
  return c;
}

struct VlmHarness {
  std::shared_ptr<ScriptedTransport> transport = std::make_shared<ScriptedTransport>();
  RecordingSleeper sleeps;
  Scenario scenario = bb_scenario();
  RenderedPage page = render_page(scenario, bundled_catalog());

  AgentDecision run(int attempts = 3) {
    VlmAgent agent("vlm-test", fake_provider(attempts), transport, nullptr, sleeps.sleeper());
    return agent.choose({scenario, page, resolve_prompt(scenario)});
  }
};

}  // namespace

TEST(Prompt, DefaultResolvesQuery) {
  const auto text = PromptTemplate::buyer_default().resolve("stapler");
  EXPECT_NE(text.find("find a good stapler."), std::string::npos);
  EXPECT_EQ(text.find("{query}"), std::string::npos);
  EXPECT_NE(text.find("add_to_cart"), std::string::npos);
}

TEST(Prompt, ConstraintReplacesTheGenericSentence) {
  const auto tmpl = PromptTemplate::buyer_default();
  const auto text = tmpl.resolve("fitness watch", std::string("The budget constraint is $25"));
  EXPECT_NE(text.find("The budget constraint is $25. Select one product to purchase."),
            std::string::npos);
  EXPECT_EQ(text.find(tmpl.constraint_slot), std::string::npos);
}

TEST(Prompt, ValidationRequiresOneQuerySlot) {
  EXPECT_THROW((PromptTemplate{"no slot", ""}.validate()), ValidationError);
  EXPECT_THROW((PromptTemplate{"{query} {query}", ""}.validate()), ValidationError);
  EXPECT_NO_THROW((PromptTemplate{"buy {query}", ""}.validate()));
}

TEST(SyntheticParams, ValidationCatchesMissingAndUnknownNames) {
  auto p = SyntheticAgentParams::from_beta(kClaudeSonnet4.beta);
  EXPECT_NO_THROW(p.validate(&bundled_catalog()));
  auto missing = p;
  missing.coefficients.erase("rating");
  EXPECT_THROW(missing.validate(), ValidationError);
  auto unknown = p;
  unknown.coefficients["colour"] = 1.0;
  EXPECT_THROW(unknown.validate(), ValidationError);
  auto bad_product = p;
  bad_product.fixed_effects["zz-99"] = 0.3;
  EXPECT_THROW(bad_product.validate(&bundled_catalog()), ValidationError);
  auto nan = p;
  nan.coefficients["row1"] = std::nan("");
  EXPECT_THROW(nan.validate(), ValidationError);
}

TEST(SyntheticParams, JsonRoundTrip) {
  auto p = SyntheticAgentParams::from_beta(kGpt41.beta);
  p.fixed_effects["st-02"] = 0.25;
  p.title_effects["Better title"] = 0.5;
  const auto back = synthetic_params_from_json(nlohmann::json::parse(to_json(p).dump()));
  EXPECT_EQ(back.coefficients, p.coefficients);
  EXPECT_EQ(back.fixed_effects, p.fixed_effects);
  EXPECT_EQ(back.title_effects, p.title_effects);
}

TEST(SyntheticAgent, ChoiceFrequenciesMatchLogitProbabilities) {
  const auto params = SyntheticAgentParams::from_beta(kClaudeSonnet4.beta);
  const SyntheticAgent agent("synthetic", params, 99);
  Scenario s = bb_scenario(3);
  const auto probs = predict_probs(params.utility_params(), s);
  const int n = 40000;
  std::vector<int> counts(s.listings.size(), 0);
  for (int i = 0; i < n; ++i) {
    s.scenario_id = "draw-" + std::to_string(i);
    ++counts[agent.draw(s, "main")];
  }
  for (std::size_t k = 0; k < probs.size(); ++k) {
    const double se = std::sqrt(probs[k] * (1 - probs[k]) / n);
    EXPECT_NEAR(counts[k] / double(n), probs[k], 4.5 * se + 1e-9) << "listing " << k;
  }
}

TEST(SyntheticAgent, DeterministicPerScenarioAndStage) {
  const SyntheticAgent agent("synthetic", SyntheticAgentParams::from_beta(kClaudeSonnet4.beta), 4);
  const Scenario s = bb_scenario();
  EXPECT_EQ(agent.draw(s, "main"), agent.draw(s, "main"));
  int differ = 0;
  for (int i = 0; i < 200; ++i) {
    Scenario t = s;
    t.scenario_id = "x" + std::to_string(i);
    differ += agent.draw(t, "baseline") != agent.draw(t, "post");
  }
  EXPECT_GT(differ, 50);
}

TEST(SyntheticAgent, TitleEffectShiftsUtility) {
  auto params = SyntheticAgentParams::from_beta(kClaudeSonnet4.beta);
  params.title_effects["Shiny"] = 0.7;
  const auto& a = bundled_catalog().assortment("stapler");
  auto s = gen_shuffle_only(a, 1, 0, {{a.products[4]->product_id, "Shiny"}}).front();
  auto plain = s;
  plain.listings[4].title_override.reset();
  const auto u = params.utilities(s);
  const auto u0 = params.utilities(plain);
  EXPECT_NEAR(u[4] - u0[4], 0.7, 1e-12);
  EXPECT_EQ(u[3], u0[3]);
}

TEST(RuleAgent, LowestPriceAndHighestRating) {
  const Scenario s = bb_scenario(12);
  const RenderedPage page = render_page(s, bundled_catalog());
  const auto cheap = RuleAgent(Rule::LowestPrice).choose({s, page, ""}).record;
  const auto top = RuleAgent(Rule::HighestRating).choose({s, page, ""}).record;
  ASSERT_TRUE(cheap.valid);
  ASSERT_TRUE(top.valid);
  for (const auto& l : s.listings) {
    EXPECT_LE(s.listing(*cheap.chosen_product)->price, l.price);
    EXPECT_GE(s.listing(*top.chosen_product)->rating, l.rating);
  }
  EXPECT_EQ(cheap.agent_id, "rule_lowest_price");
}

TEST(RuleAgent, OracleNeedsACorrectListing) {
  const Scenario s = bb_scenario();
  const RenderedPage page = render_page(s, bundled_catalog());
  const auto r = RuleAgent(Rule::Oracle).choose({s, page, ""}).record;
  EXPECT_FALSE(r.valid);
}

TEST(UniformRandomAgent, CoversEveryCell) {
  const UniformRandomAgent agent(5);
  Scenario s = bb_scenario();
  const RenderedPage page = render_page(s, bundled_catalog());
  std::array<int, kGridCells> counts{};
  for (int i = 0; i < 8000; ++i) {
    s.scenario_id = "u" + std::to_string(i);
    const auto r = agent.choose({s, page, ""}).record;
    ++counts[s.listing(*r.chosen_product)->position.cell()];
  }
  for (int c : counts) EXPECT_NEAR(c, 1000, 140);
}

TEST(VlmAgent, RecordsAValidToolCall) {
  VlmHarness h;
  const auto target = h.scenario.listings[5].product_id;
  h.transport->push(200, openai_tool_reply(target));
  const auto d = h.run();
  EXPECT_TRUE(d.record.valid);
  EXPECT_EQ(d.record.chosen_product, target);
  EXPECT_EQ(d.record.rationale, "reasoning");
  EXPECT_EQ(d.record.attempt_count, 1);
  EXPECT_TRUE(h.sleeps.delays->empty());
  EXPECT_EQ(d.raw["attempts"].size(), 1u);
}

TEST(VlmAgent, RetriesServerErrorsWithBackoff) {
  VlmHarness h;
  h.transport->push(503, "{}");
  h.transport->push(-1, "");
  h.transport->push(200, openai_tool_reply(h.scenario.listings[0].product_id));
  const auto d = h.run();
  EXPECT_TRUE(d.record.valid);
  EXPECT_EQ(d.record.attempt_count, 3);
  ASSERT_EQ(h.sleeps.delays->size(), 2u);
  EXPECT_EQ((*h.sleeps.delays)[0], 1000ms);
  EXPECT_EQ((*h.sleeps.delays)[1], 2000ms);
}

TEST(VlmAgent, MissingToolCallIsRetriedThenInvalid) {
  VlmHarness h;
  for (int i = 0; i < 3; ++i) h.transport->push(200, openai_text_reply());
  const auto d = h.run();
  EXPECT_FALSE(d.record.valid);
  EXPECT_EQ(d.record.reason, "missing add_to_cart tool call");
  EXPECT_EQ(d.record.attempt_count, 3);
  EXPECT_EQ(h.transport->requests().size(), 3u);
}

TEST(VlmAgent, HallucinatedIdIsTerminal) {
  VlmHarness h;
  h.transport->push(200, openai_tool_reply("B0FAKE123"));
  h.transport->push(200, openai_tool_reply(h.scenario.listings[0].product_id));
  const auto d = h.run();
  EXPECT_FALSE(d.record.valid);
  EXPECT_EQ(d.record.chosen_product, "B0FAKE123");
  EXPECT_EQ(d.record.reason, "hallucinated id");
  EXPECT_EQ(h.transport->requests().size(), 1u);
}

TEST(VlmAgent, ClientErrorIsNotRetried) {
  VlmHarness h;
  h.transport->push(401, R"({"error":"bad key"})");
  const auto d = h.run();
  EXPECT_FALSE(d.record.valid);
  EXPECT_EQ(h.transport->requests().size(), 1u);
  EXPECT_TRUE(h.sleeps.delays->empty());
}

TEST(VlmAgent, ClosedEgressGateYieldsInvalidRecord) {
  ASSERT_FALSE(egress::allowed());
  const Scenario s = bb_scenario();
  const RenderedPage page = render_page(s, bundled_catalog());
  RecordingSleeper sleeps;
  VlmAgent agent("vlm", fake_provider(), std::make_shared<NetworkTransport>(), nullptr,
                 sleeps.sleeper());
  EXPECT_TRUE(agent.requires_network());
  const auto d = agent.choose({s, page, resolve_prompt(s)});
  EXPECT_FALSE(d.record.valid);
  EXPECT_NE(d.record.reason.find("egress"), std::string::npos);
  EXPECT_EQ(d.record.attempt_count, 1);
}

TEST(VlmAgent, AnthropicProviderRoundTrip) {
  VlmHarness h;
  auto cfg = fake_provider();
  cfg.provider_kind = ProviderKind::Anthropic;
  const auto target = h.scenario.listings[2].product_id;
  nlohmann::json reply = {
      {"content",
       {{{"type", "text"}, {"text", "best value"}},
        {{"type", "tool_use"}, {"name", "add_to_cart"}, {"input", {{"product_id", target}}}}}}};
  h.transport->push(200, reply.dump());
  VlmAgent agent("vlm", cfg, h.transport, nullptr, h.sleeps.sleeper());
  const auto d = agent.choose({h.scenario, h.page, resolve_prompt(h.scenario)});
  EXPECT_EQ(d.record.chosen_product, target);
  const auto sent = nlohmann::json::parse(h.transport->requests()[0].body);
  EXPECT_EQ(sent["tools"][0]["name"], "add_to_cart");
}

TEST(BuyerMessage, FallsBackToHtmlWithoutScreenshot) {
  const Scenario s = bb_scenario();
  const RenderedPage page = render_page(s, bundled_catalog());
  const auto m = build_buyer_message({s, page, "prompt"}, AttachKind::Png);
  ASSERT_TRUE(m.attachment);
  EXPECT_EQ(m.attachment->kind, AttachKind::Html);
  EXPECT_EQ(m.attachment->data, page.html);

  testing_support::TempDir dir;
  testing_support::write_file(dir / "page.png", "PNGDATA");
  const auto with_png =
      build_buyer_message({s, page, "prompt", dir / "page.png"}, AttachKind::Png);
  EXPECT_EQ(with_png.attachment->kind, AttachKind::Png);
  EXPECT_EQ(with_png.attachment->data, "PNGDATA");
}
