#pragma once

// Deterministic generators for the experiment suites.
//
// Every generator is a pure function of its arguments: the same inputs
// always produce bit-identical scenario lists. Draws come from CounterRng
// streams keyed by (seed, suite, category, scenario index, draw label).

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "agentmart/catalog.hpp"
#include "agentmart/scenario.hpp"

namespace agentmart {

struct IntRange {
  int lo = 1;
  int hi = 1;
};

struct PerturbSpec {
  double price_sigma = 0.3;
  double rating_alpha_lo = -0.8;
  double rating_alpha_hi = 0.8;
  double reviews_sigma = 1.0;
  IntRange sponsored_count{1, 4};
  IntRange scarcity_count{1, 5};

  void validate() const;
};

// Rationality-suite variants. Exactly one listing is optimal in each.
enum class Spread { Low, High };

struct PriceDiscount {
  double alpha = 0.10;  // one of 0.01, 0.05, 0.10
};
struct PriceRandom {
  Spread spread = Spread::Low;
};
struct RatingBump {};
struct RatingRandom {
  Spread spread = Spread::Low;
};
using RationalityKind =
    std::variant<PriceDiscount, PriceRandom, RatingBump, RatingRandom>;

// "price_discount:0.05", "price_random:high", "rating_bump",
// "rating_random:low".
RationalityKind parse_rationality_kind(std::string_view text);
std::string to_string(const RationalityKind& kind);
bool is_price_kind(const RationalityKind& kind) noexcept;

struct BudgetTask {
  double limit = 0.0;
};
struct ColorTask {
  std::string color;
};
struct BrandTask {
  std::string brand;
};
using InstructionTask = std::variant<BudgetTask, ColorTask, BrandTask>;

// "budget:25", "color:pink", "brand:Otterbox".
InstructionTask parse_instruction_task(std::string_view text);
std::string to_string(const InstructionTask& task);
// Sentence substituted into the buyer prompt, e.g.
// "The budget constraint is $25".
std::string constraint_sentence(const InstructionTask& task);
// Products of the assortment meeting the task, in canonical order.
std::vector<std::string> task_satisfiers(const Assortment& assortment,
                                         const InstructionTask& task);

std::vector<Scenario> gen_bb_scenarios(const Assortment& assortment,
                                       std::size_t n, const PerturbSpec& spec,
                                       std::uint64_t seed);

// Base attributes, no tags, shuffled positions. The permutation depends only
// on (seed, category, index), so runs with different title overrides see
// identical shuffles.
std::vector<Scenario> gen_shuffle_only(
    const Assortment& assortment, std::size_t n, std::uint64_t seed,
    const std::map<std::string, std::string>& title_overrides = {});

std::vector<Scenario> gen_rationality_suite(const Assortment& assortment,
                                            const RationalityKind& kind,
                                            std::size_t n, std::uint64_t seed);

std::vector<Scenario> gen_instruction_suite(const Assortment& assortment,
                                            const InstructionTask& task,
                                            std::size_t n, std::uint64_t seed);

// Display-precision helpers shared with the storefront.
double round_cents(double amount) noexcept;
double round_tenth(double value) noexcept;
std::int64_t round_half_up(double value) noexcept;

}  // namespace agentmart
