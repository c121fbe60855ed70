#include <gtest/gtest.h>

#include "agentmart/error.hpp"
#include "agentmart/scenario_gen.hpp"
#include "agentmart/seller.hpp"
#include "support.hpp"

using namespace agentmart;
using testing_support::bundled_catalog;
using testing_support::RecordingSleeper;
using testing_support::ScriptedTransport;

namespace {

struct SellerFixture {
  const Assortment assortment = bundled_catalog().assortment("stapler");
  std::vector<Scenario> scenarios = gen_shuffle_only(assortment, 4, 1);
  RenderedPage page = render_page(scenarios[0], bundled_catalog());
  ShareTable sales;

  SellerFixture() {
    std::vector<ChoiceRecord> r;
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
      r.push_back(make_choice(scenarios[i], "buyer", assortment.products[i % 2]->product_id));
    }
    sales = market_shares(r, scenarios);
  }

  SellerRequest request(std::size_t k) const {
    const Product& p = *assortment.products[k];
    return SellerRequest{page, p.product_id, p.title, p.features, sales};
  }
};

std::string openai_text(const std::string& text) {
  return nlohmann::json{{"choices", {{{"message", {{"content", text}}}}}}}.dump();
}

}  // namespace

TEST(FinalTitle, TakesTheLastTaggedLine) {
  EXPECT_EQ(parse_final_title("FINAL_TITLE: One\nmore thoughts\nFINAL_TITLE: Two"), "Two");
  EXPECT_EQ(parse_final_title("**FINAL_TITLE:** \"Quoted Title\""), "Quoted Title");
  EXPECT_EQ(parse_final_title("  `FINAL_TITLE: Code Title`  "), "Code Title");
  EXPECT_FALSE(parse_final_title("Here is my suggestion: a better title"));
  EXPECT_FALSE(parse_final_title("FINAL_TITLE:   "));
}

TEST(SalesData, OneLinePerProduct) {
  SellerFixture f;
  const std::string text = format_sales_data(f.sales, bundled_catalog());
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 8);
  EXPECT_NE(text.find(f.assortment.products[0]->title + ": 50.0% (2 of 4 purchases)"),
            std::string::npos);
}

TEST(SellerPrompt, SubstitutesInputsAndAsksForFinalTitle) {
  const auto p = seller_prompt("Acme Stapler", "20 sheet capacity", "sales lines");
  EXPECT_NE(p.find("My product is Acme Stapler."), std::string::npos);
  EXPECT_NE(p.find("20 sheet capacity"), std::string::npos);
  EXPECT_NE(p.find("sales lines"), std::string::npos);
  EXPECT_NE(p.find("FINAL_TITLE:"), std::string::npos);
}

TEST(SellerRecommend, ZeroShareFocalIsRejected) {
  SellerFixture f;
  const StubSeller stub("FINAL_TITLE: x");
  EXPECT_THROW(seller_recommend(stub, f.request(5), bundled_catalog()), ValidationError);
  const auto reply = seller_recommend(stub, f.request(1), bundled_catalog());
  EXPECT_EQ(reply.title, "x");
  EXPECT_TRUE(reply.raw.contains("prompt"));
}

TEST(StubSeller, UnchangedEchoesCurrentTitle) {
  SellerFixture f;
  const auto reply = seller_recommend(StubSeller::unchanged(), f.request(0), bundled_catalog());
  EXPECT_EQ(reply.title, f.assortment.products[0]->title);
}

TEST(StubSeller, MissingTagIsASellerError) {
  SellerFixture f;
  EXPECT_THROW(seller_recommend(StubSeller("no tag here"), f.request(0), bundled_catalog()),
               SellerError);
}

TEST(LlmSeller, RetriesUntilATitleArrives) {
  SellerFixture f;
  auto t = std::make_shared<ScriptedTransport>();
  t->push(200, openai_text("Let me think about it."));
  t->push(500, "{}");
  t->push(200, openai_text("Reasoning...\nFINAL_TITLE: Swingline Heavy Duty Stapler"));
  RecordingSleeper sleeps;
  ProviderConfig cfg;
  cfg.model_name = "m";
  cfg.endpoint_url = "https://llm.invalid/v1";
  const LlmSeller seller(cfg, t, nullptr, sleeps.sleeper());
  const auto reply = seller_recommend(seller, f.request(0), bundled_catalog());
  EXPECT_EQ(reply.title, "Swingline Heavy Duty Stapler");
  EXPECT_EQ(t->requests().size(), 3u);
  EXPECT_EQ(sleeps.delays->size(), 1u);
}

TEST(LlmSeller, GivesUpAfterMaxAttempts) {
  SellerFixture f;
  auto t = std::make_shared<ScriptedTransport>();
  for (int i = 0; i < 3; ++i) t->push(200, openai_text("no tag"));
  ProviderConfig cfg;
  cfg.model_name = "m";
  cfg.endpoint_url = "https://llm.invalid/v1";
  const LlmSeller seller(cfg, t, nullptr, RecordingSleeper{}.sleeper());
  EXPECT_THROW(seller_recommend(seller, f.request(0), bundled_catalog()), SellerError);
}
