#include <gtest/gtest.h>

#include "agentmart/error.hpp"
#include "agentmart/scenario.hpp"
#include "agentmart/scenario_gen.hpp"
#include "support.hpp"

using namespace agentmart;
using testing_support::bundled_catalog;

namespace {

Scenario sample() {
  return gen_bb_scenarios(bundled_catalog().assortment("stapler"), 1, PerturbSpec{}, 7)
      .front();
}

}  // namespace

TEST(GridPosition, CellRoundTrip) {
  for (int c = 0; c < kGridCells; ++c) {
    const auto p = GridPosition::from_cell(c);
    EXPECT_EQ(p.cell(), c);
    EXPECT_GE(p.row, 1);
    EXPECT_LE(p.column, kGridColumns);
  }
  EXPECT_EQ((GridPosition{2, 4}).cell(), 7);
}

TEST(Scenario, SuiteNamesRoundTrip) {
  for (Suite s : {Suite::BB, Suite::RS, Suite::INSTR, Suite::SHUFFLE_ONLY}) {
    EXPECT_EQ(suite_from_string(to_string(s)), s);
  }
  EXPECT_THROW(suite_from_string("XYZ"), ValidationError);
}

TEST(Scenario, JsonRoundTripIsLossless) {
  Scenario s = sample();
  s.correct_listing = s.listings[3].product_id;
  s.prompt_constraint = "The budget constraint is $25";
  s.listings[0].title_override = "A better stapler";
  EXPECT_EQ(scenario_from_json(to_json(s)), s);
}

TEST(Scenario, PermutationListsProductsByCell) {
  const Scenario s = sample();
  const auto perm = s.permutation();
  for (const auto& l : s.listings) EXPECT_EQ(perm[l.position.cell()], l.product_id);
  EXPECT_EQ(s.at_cell(0)->product_id, perm[0]);
}

TEST(Scenario, ValidateRejectsDuplicateCells) {
  Scenario s = sample();
  s.listings[1].position = s.listings[0].position;
  EXPECT_THROW(validate(s), ValidationError);
}

TEST(Scenario, ValidateRejectsTwoOverallPicks) {
  Scenario s = sample();
  for (auto& l : s.listings) {
    l.sponsored = false;
    l.scarcity_remaining.reset();
  }
  s.listings[0].overall_pick = true;
  s.listings[1].overall_pick = true;
  EXPECT_THROW(validate(s), ValidationError);
}

TEST(Scenario, ValidateRejectsStackedTags) {
  Scenario s = sample();
  for (auto& l : s.listings) {
    l.sponsored = false;
    l.overall_pick = false;
    l.scarcity_remaining.reset();
  }
  s.listings[2].sponsored = true;
  s.listings[2].scarcity_remaining = 3;
  EXPECT_THROW(validate(s), ValidationError);
}

TEST(Scenario, ValidateRejectsUnknownCorrectListing) {
  Scenario s = sample();
  s.correct_listing = "not-here";
  EXPECT_THROW(validate(s), ValidationError);
}

TEST(Scenario, JsonlFileRoundTrip) {
  testing_support::TempDir dir;
  const auto scenarios =
      gen_bb_scenarios(bundled_catalog().assortment("toothpaste"), 5, PerturbSpec{}, 1);
  const auto path = dir / scenario_file_name(Suite::BB, "toothpaste", 1);
  write_scenarios_jsonl(path, scenarios);
  EXPECT_EQ(read_scenarios_jsonl(path), scenarios);
  EXPECT_EQ(path.filename().string(), "scenarios_BB_toothpaste_1.jsonl");
}

TEST(Scenario, CategorySlug) {
  EXPECT_EQ(category_slug("iPhone 16 Pro cover"), "iphone-16-pro-cover");
  EXPECT_EQ(category_slug("  toilet paper "), "toilet-paper");
}
