#include "agentmart/scenario_gen.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "agentmart/error.hpp"
#include "agentmart/rng.hpp"

namespace agentmart {

double round_cents(double amount) noexcept {
  return std::round(amount * 100.0) / 100.0;
}

double round_tenth(double value) noexcept {
  return std::round(value * 10.0) / 10.0;
}

std::int64_t round_half_up(double value) noexcept {
  return static_cast<std::int64_t>(std::floor(value + 0.5));
}

void PerturbSpec::validate() const {
  if (!(price_sigma > 0.0) || !(reviews_sigma > 0.0)) {
    throw ValidationError("perturb spec: sigmas must be > 0");
  }
  if (!(rating_alpha_lo > -1.0) || rating_alpha_hi > 1.0 ||
      rating_alpha_lo > rating_alpha_hi) {
    throw ValidationError("perturb spec: alpha range must lie in (-1, 1]");
  }
  for (const IntRange& r : {sponsored_count, scarcity_count}) {
    if (r.lo < 1 || r.hi > 8 || r.lo > r.hi) {
      throw ValidationError("perturb spec: count ranges must lie in {1..8}");
    }
  }
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string format_amount(double amount) {
  if (std::abs(amount - std::round(amount)) < 1e-9) {
    return fmt::format("{}", static_cast<long long>(std::llround(amount)));
  }
  return fmt::format("{:.2f}", amount);
}

std::string make_id(Suite suite, std::string_view variant,
                    std::string_view category, std::uint64_t seed,
                    std::size_t index) {
  if (variant.empty()) {
    return fmt::format("{}-{}-{}-{:05d}", to_string(suite), category_slug(category),
                       seed, index);
  }
  return fmt::format("{}-{}-{}-{}-{:05d}", to_string(suite), variant,
                     category_slug(category), seed, index);
}

void check_assortment(const Assortment& a) {
  if (a.products.size() != kAssortmentSize) {
    throw ValidationError(fmt::format("assortment '{}' must have 8 products",
                                      a.category));
  }
}

// Listings at base attributes with a fresh position permutation.
Scenario base_scenario(const Assortment& a, Suite suite, std::string_view stream,
                       std::uint64_t seed, std::size_t index) {
  Scenario s;
  s.suite = suite;
  s.category = a.category;
  s.seed = seed;
  s.prompt_query = a.category;

  std::array<int, kGridCells> cells{};
  std::iota(cells.begin(), cells.end(), 0);
  auto rng = CounterRng::derive(seed, stream, a.category, index, "position");
  rng.shuffle(std::span<int>(cells));

  for (std::size_t k = 0; k < a.products.size(); ++k) {
    const Product& p = *a.products[k];
    ListingState l;
    l.product_id = p.product_id;
    l.position = GridPosition::from_cell(cells[k]);
    l.price = p.base_price;
    l.rating = p.base_rating;
    l.num_reviews = p.base_num_reviews;
    s.listings.push_back(std::move(l));
  }
  return s;
}

struct CommonAttributes {
  double price;
  double rating;
  std::int64_t num_reviews;
};

CommonAttributes common_attributes(const Assortment& a) {
  double price = 0.0;
  double rating = 0.0;
  double reviews = 0.0;
  for (const Product* p : a.products) {
    price += p->base_price;
    rating += p->base_rating;
    reviews += static_cast<double>(p->base_num_reviews);
  }
  const double n = static_cast<double>(a.products.size());
  return {round_cents(price / n), round_tenth(rating / n),
          std::max<std::int64_t>(1, round_half_up(reviews / n))};
}

std::string kind_variant(const RationalityKind& kind) {
  std::string s = to_string(kind);
  std::replace(s.begin(), s.end(), ':', '-');
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

}  // namespace

RationalityKind parse_rationality_kind(std::string_view text) {
  const auto colon = text.find(':');
  const std::string name(text.substr(0, colon));
  const std::string arg =
      colon == std::string_view::npos ? "" : std::string(text.substr(colon + 1));
  auto spread = [&]() {
    if (arg == "low") return Spread::Low;
    if (arg == "high") return Spread::High;
    throw ValidationError(fmt::format("invalid spread '{}' (low|high)", arg));
  };
  if (name == "price_discount") {
    double alpha = 0.0;
    try {
      alpha = std::stod(arg);
    } catch (const std::exception&) {
      throw ValidationError(fmt::format("invalid discount '{}'", arg));
    }
    constexpr std::array allowed{0.01, 0.05, 0.10};
    if (std::none_of(allowed.begin(), allowed.end(),
                     [&](double a) { return std::abs(a - alpha) < 1e-12; })) {
      throw ValidationError("price_discount alpha must be one of 0.01, 0.05, 0.10");
    }
    return PriceDiscount{alpha};
  }
  if (name == "price_random") return PriceRandom{spread()};
  if (name == "rating_bump") return RatingBump{};
  if (name == "rating_random") return RatingRandom{spread()};
  throw ValidationError(fmt::format("unknown rationality kind '{}'", text));
}

std::string to_string(const RationalityKind& kind) {
  auto spread = [](Spread s) { return s == Spread::Low ? "low" : "high"; };
  return std::visit(
      [&](const auto& k) -> std::string {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, PriceDiscount>) {
          return fmt::format("price_discount:{:.2f}", k.alpha);
        } else if constexpr (std::is_same_v<K, PriceRandom>) {
          return fmt::format("price_random:{}", spread(k.spread));
        } else if constexpr (std::is_same_v<K, RatingBump>) {
          return "rating_bump";
        } else {
          return fmt::format("rating_random:{}", spread(k.spread));
        }
      },
      kind);
}

bool is_price_kind(const RationalityKind& kind) noexcept {
  return std::holds_alternative<PriceDiscount>(kind) ||
         std::holds_alternative<PriceRandom>(kind);
}

InstructionTask parse_instruction_task(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos || colon + 1 == text.size()) {
    throw ValidationError(fmt::format("invalid instruction task '{}'", text));
  }
  const std::string name(text.substr(0, colon));
  const std::string arg(text.substr(colon + 1));
  if (name == "budget") {
    try {
      const double limit = std::stod(arg);
      if (!(limit > 0.0)) throw std::invalid_argument(arg);
      return BudgetTask{limit};
    } catch (const std::exception&) {
      throw ValidationError(fmt::format("invalid budget '{}'", arg));
    }
  }
  if (name == "color") return ColorTask{arg};
  if (name == "brand") return BrandTask{arg};
  throw ValidationError(fmt::format("unknown instruction task '{}'", text));
}

std::string to_string(const InstructionTask& task) {
  return std::visit(
      [](const auto& t) -> std::string {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, BudgetTask>) {
          return "budget:" + format_amount(t.limit);
        } else if constexpr (std::is_same_v<T, ColorTask>) {
          return "color:" + t.color;
        } else {
          return "brand:" + t.brand;
        }
      },
      task);
}

std::string constraint_sentence(const InstructionTask& task) {
  return std::visit(
      [](const auto& t) -> std::string {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, BudgetTask>) {
          return "The budget constraint is $" + format_amount(t.limit);
        } else if constexpr (std::is_same_v<T, ColorTask>) {
          return fmt::format("Choose the {} color product", t.color);
        } else {
          return fmt::format("Choose the {} brand", t.brand);
        }
      },
      task);
}

std::vector<std::string> task_satisfiers(const Assortment& assortment,
                                         const InstructionTask& task) {
  std::vector<std::string> out;
  for (const Product* p : assortment.products) {
    const bool ok = std::visit(
        [&](const auto& t) {
          using T = std::decay_t<decltype(t)>;
          if constexpr (std::is_same_v<T, BudgetTask>) {
            return p->base_price <= t.limit;
          } else if constexpr (std::is_same_v<T, ColorTask>) {
            return !p->color.empty() && lower(p->color) == lower(t.color);
          } else {
            return lower(p->brand) == lower(t.brand);
          }
        },
        task);
    if (ok) out.push_back(p->product_id);
  }
  return out;
}

std::vector<Scenario> gen_bb_scenarios(const Assortment& a, std::size_t n,
                                       const PerturbSpec& spec,
                                       std::uint64_t seed) {
  if (n < 1) throw ValidationError("n must be >= 1");
  check_assortment(a);
  spec.validate();
  const std::string_view stream = to_string(Suite::BB);

  std::vector<Scenario> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Scenario s = base_scenario(a, Suite::BB, stream, seed, i);
    s.scenario_id = make_id(Suite::BB, "", a.category, seed, i);
    auto& ls = s.listings;

    auto price_rng = CounterRng::derive(seed, stream, a.category, i, "price");
    auto rating_rng = CounterRng::derive(seed, stream, a.category, i, "rating");
    auto reviews_rng = CounterRng::derive(seed, stream, a.category, i, "reviews");
    for (auto& l : ls) {
      l.price = std::max(0.01, round_cents(l.price * price_rng.lognormal(0.0, spec.price_sigma)));
      const double alpha = rating_rng.uniform(spec.rating_alpha_lo, spec.rating_alpha_hi);
      l.rating = l.rating + alpha * (5.0 - l.rating);
      const double f = reviews_rng.lognormal(0.0, spec.reviews_sigma);
      l.num_reviews = std::max<std::int64_t>(
          1, round_half_up(static_cast<double>(l.num_reviews) * f));
    }

    std::array<std::size_t, kAssortmentSize> order{};
    std::iota(order.begin(), order.end(), 0);
    auto tag_rng = CounterRng::derive(seed, stream, a.category, i, "sponsored");
    const auto n_sponsored = static_cast<std::size_t>(
        tag_rng.uniform_int(spec.sponsored_count.lo, spec.sponsored_count.hi));
    tag_rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t k = 0; k < n_sponsored; ++k) ls[order[k]].sponsored = true;

    std::vector<std::size_t> free;
    for (std::size_t k = 0; k < ls.size(); ++k) {
      if (!ls[k].sponsored) free.push_back(k);
    }
    if (!free.empty()) {
      auto pick_rng = CounterRng::derive(seed, stream, a.category, i, "overall_pick");
      const auto j = static_cast<std::size_t>(
          pick_rng.uniform_int(0, static_cast<std::int64_t>(free.size()) - 1));
      ls[free[j]].overall_pick = true;
      free.erase(free.begin() + static_cast<std::ptrdiff_t>(j));
    }
    if (!free.empty()) {
      auto scarce_rng = CounterRng::derive(seed, stream, a.category, i, "scarcity");
      const auto j = static_cast<std::size_t>(
          scarce_rng.uniform_int(0, static_cast<std::int64_t>(free.size()) - 1));
      ls[free[j]].scarcity_remaining = static_cast<int>(
          scarce_rng.uniform_int(spec.scarcity_count.lo, spec.scarcity_count.hi));
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Scenario> gen_shuffle_only(
    const Assortment& a, std::size_t n, std::uint64_t seed,
    const std::map<std::string, std::string>& title_overrides) {
  if (n < 1) throw ValidationError("n must be >= 1");
  check_assortment(a);
  for (const auto& [id, title] : title_overrides) {
    if (std::none_of(a.products.begin(), a.products.end(),
                     [&](const Product* p) { return p->product_id == id; })) {
      throw ValidationError(fmt::format("title override for unknown product '{}'", id));
    }
  }
  const std::string_view stream = to_string(Suite::SHUFFLE_ONLY);
  std::vector<Scenario> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Scenario s = base_scenario(a, Suite::SHUFFLE_ONLY, stream, seed, i);
    s.scenario_id = make_id(Suite::SHUFFLE_ONLY, "", a.category, seed, i);
    for (auto& l : s.listings) {
      if (auto it = title_overrides.find(l.product_id); it != title_overrides.end()) {
        l.title_override = it->second;
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Scenario> gen_rationality_suite(const Assortment& a,
                                            const RationalityKind& kind,
                                            std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ValidationError("n must be >= 1");
  check_assortment(a);
  const std::string label = to_string(kind);
  const std::string stream = fmt::format("RS/{}", label);
  const std::string variant = kind_variant(kind);
  const CommonAttributes common = common_attributes(a);

  std::vector<Scenario> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Scenario s = base_scenario(a, Suite::RS, stream, seed, i);
    s.scenario_id = make_id(Suite::RS, variant, a.category, seed, i);
    auto& ls = s.listings;
    for (auto& l : ls) {
      l.price = common.price;
      l.rating = common.rating;
      l.num_reviews = common.num_reviews;
    }
    auto rng = CounterRng::derive(seed, stream, a.category, i, "attribute");
    const auto pick_one = [&] {
      return static_cast<std::size_t>(rng.uniform_int(0, kAssortmentSize - 1));
    };

    std::size_t best = 0;
    if (const auto* d = std::get_if<PriceDiscount>(&kind)) {
      best = pick_one();
      ls[best].price = round_cents(common.price * (1.0 - d->alpha));
      if (!(ls[best].price < common.price) || !(ls[best].price > 0.0)) {
        throw ValidationError(fmt::format(
            "discount {:.2f} on price {:.2f} does not produce a distinct price",
            d->alpha, common.price));
      }
    } else if (const auto* r = std::get_if<PriceRandom>(&kind)) {
      const double sigma = r->spread == Spread::Low ? 0.3 : 0.2 * common.price;
      std::set<double> used;
      for (auto& l : ls) {
        double v = 0.0;
        do {
          v = round_cents(rng.normal(common.price, sigma));
        } while (v <= 0.01 || used.contains(v));
        used.insert(v);
        l.price = v;
      }
      best = static_cast<std::size_t>(
          std::min_element(ls.begin(), ls.end(),
                           [](const auto& x, const auto& y) { return x.price < y.price; }) -
          ls.begin());
    } else if (std::holds_alternative<RatingBump>(kind)) {
      const double base = std::min(common.rating, 4.9);
      for (auto& l : ls) l.rating = base;
      best = pick_one();
      ls[best].rating = round_tenth(base + 0.1);
    } else {
      const auto& r = std::get<RatingRandom>(kind);
      // Ratings are drawn on the displayed one-decimal grid so the optimum is
      // unique at the precision the agent sees.
      const int lo = r.spread == Spread::Low ? 44 : 30;
      const int hi = r.spread == Spread::Low ? 47 : 45;
      for (;;) {
        for (auto& l : ls) l.rating = static_cast<double>(rng.uniform_int(lo, hi)) / 10.0;
        const double top =
            std::max_element(ls.begin(), ls.end(), [](const auto& x, const auto& y) {
              return x.rating < y.rating;
            })->rating;
        if (std::count_if(ls.begin(), ls.end(),
                          [&](const auto& l) { return l.rating == top; }) == 1) {
          break;
        }
      }
      best = static_cast<std::size_t>(
          std::max_element(ls.begin(), ls.end(),
                           [](const auto& x, const auto& y) { return x.rating < y.rating; }) -
          ls.begin());
    }
    s.correct_listing = ls[best].product_id;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Scenario> gen_instruction_suite(const Assortment& a,
                                            const InstructionTask& task,
                                            std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ValidationError("n must be >= 1");
  check_assortment(a);
  const auto satisfiers = task_satisfiers(a, task);
  if (satisfiers.empty()) {
    throw ValidationError(fmt::format("task '{}' has no satisfier in '{}'",
                                      to_string(task), a.category));
  }
  if (satisfiers.size() > 1) {
    throw ValidationError(fmt::format("task '{}' has multiple satisfiers in '{}'",
                                      to_string(task), a.category));
  }
  const std::string label = to_string(task);
  const std::string stream = fmt::format("INSTR/{}", label);
  std::string variant = label;
  for (char& c : variant) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.') c = '-';
  }
  std::vector<Scenario> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Scenario s = base_scenario(a, Suite::INSTR, stream, seed, i);
    s.scenario_id = make_id(Suite::INSTR, lower(variant), a.category, seed, i);
    s.prompt_constraint = constraint_sentence(task);
    s.correct_listing = satisfiers.front();
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace agentmart
