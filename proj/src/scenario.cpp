#include "agentmart/scenario.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>

#include <fmt/format.h>

#include "agentmart/error.hpp"

namespace agentmart {

std::string_view to_string(Suite suite) noexcept {
  switch (suite) {
    case Suite::BB: return "BB";
    case Suite::RS: return "RS";
    case Suite::INSTR: return "INSTR";
    case Suite::SHUFFLE_ONLY: return "SHUFFLE_ONLY";
  }
  return "?";
}

Suite suite_from_string(std::string_view text) {
  for (Suite s : {Suite::BB, Suite::RS, Suite::INSTR, Suite::SHUFFLE_ONLY}) {
    if (to_string(s) == text) return s;
  }
  throw ValidationError(fmt::format("unknown suite '{}'", text));
}

const ListingState* Scenario::listing(std::string_view product_id) const noexcept {
  for (const auto& l : listings) {
    if (l.product_id == product_id) return &l;
  }
  return nullptr;
}

const ListingState* Scenario::at_cell(int cell) const noexcept {
  for (const auto& l : listings) {
    if (l.position.cell() == cell) return &l;
  }
  return nullptr;
}

std::vector<std::string> Scenario::permutation() const {
  std::vector<std::string> out(listings.size());
  for (const auto& l : listings) {
    const int c = l.position.cell();
    if (c >= 0 && static_cast<std::size_t>(c) < out.size()) out[c] = l.product_id;
  }
  return out;
}

void validate(const Scenario& s) {
  auto fail = [&](std::string_view what) {
    throw ValidationError(fmt::format("scenario {}: {}", s.scenario_id, what));
  };
  if (s.listings.size() != static_cast<std::size_t>(kGridCells)) {
    fail("expected 8 listings");
  }
  std::array<bool, kGridCells> seen{};
  int picks = 0;
  for (const auto& l : s.listings) {
    const auto& p = l.position;
    if (p.row < 1 || p.row > kGridRows || p.column < 1 || p.column > kGridColumns) {
      fail("position outside the 2x4 grid");
    }
    if (seen[p.cell()]) fail("positions are not a permutation of grid cells");
    seen[p.cell()] = true;
    if (l.overall_pick) ++picks;
    if (l.sponsored && l.overall_pick) fail("listing is both sponsored and overall pick");
    if (l.scarcity_remaining && (l.sponsored || l.overall_pick)) {
      fail("scarcity tag on a listing with another tag");
    }
    if (!(l.price > 0.0)) fail("price must be > 0");
    if (l.rating < 1.0 || l.rating > 5.0) fail("rating out of [1,5]");
    if (l.num_reviews < 1) fail("num_reviews must be >= 1");
  }
  if (picks > 1) fail("more than one overall pick");
  if (s.correct_listing && !s.listing(*s.correct_listing)) {
    fail("correct_listing is not among the listings");
  }
}

nlohmann::ordered_json to_json(const Scenario& s) {
  nlohmann::ordered_json j;
  j["scenario_id"] = s.scenario_id;
  j["suite"] = to_string(s.suite);
  j["category"] = s.category;
  j["seed"] = s.seed;
  auto listings = nlohmann::ordered_json::array();
  for (const auto& l : s.listings) {
    nlohmann::ordered_json lj;
    lj["product_id"] = l.product_id;
    lj["position"] = {{"row", l.position.row}, {"column", l.position.column}};
    lj["price"] = l.price;
    lj["rating"] = l.rating;
    lj["num_reviews"] = l.num_reviews;
    lj["sponsored"] = l.sponsored;
    lj["overall_pick"] = l.overall_pick;
    lj["scarcity_remaining"] =
        l.scarcity_remaining ? nlohmann::ordered_json(*l.scarcity_remaining) : nullptr;
    lj["title_override"] =
        l.title_override ? nlohmann::ordered_json(*l.title_override) : nullptr;
    listings.push_back(std::move(lj));
  }
  j["listings"] = std::move(listings);
  j["correct_listing"] =
      s.correct_listing ? nlohmann::ordered_json(*s.correct_listing) : nullptr;
  j["prompt_query"] = s.prompt_query;
  j["prompt_constraint"] =
      s.prompt_constraint ? nlohmann::ordered_json(*s.prompt_constraint) : nullptr;
  return j;
}

namespace {

template <typename T>
std::optional<T> optional_field(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

}  // namespace

Scenario scenario_from_json(const nlohmann::json& j) {
  try {
    Scenario s;
    s.scenario_id = j.at("scenario_id").get<std::string>();
    s.suite = suite_from_string(j.at("suite").get<std::string>());
    s.category = j.at("category").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& lj : j.at("listings")) {
      ListingState l;
      l.product_id = lj.at("product_id").get<std::string>();
      l.position.row = lj.at("position").at("row").get<int>();
      l.position.column = lj.at("position").at("column").get<int>();
      l.price = lj.at("price").get<double>();
      l.rating = lj.at("rating").get<double>();
      l.num_reviews = lj.at("num_reviews").get<std::int64_t>();
      l.sponsored = lj.at("sponsored").get<bool>();
      l.overall_pick = lj.at("overall_pick").get<bool>();
      l.scarcity_remaining = optional_field<int>(lj, "scarcity_remaining");
      l.title_override = optional_field<std::string>(lj, "title_override");
      s.listings.push_back(std::move(l));
    }
    s.correct_listing = optional_field<std::string>(j, "correct_listing");
    s.prompt_query = j.at("prompt_query").get<std::string>();
    s.prompt_constraint = optional_field<std::string>(j, "prompt_constraint");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("malformed scenario: {}", e.what()));
  }
}

std::string category_slug(std::string_view category) {
  std::string out;
  for (char c : category) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!out.empty() && out.back() != '-') {
      out.push_back('-');
    }
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out;
}

std::string scenario_file_name(Suite suite, std::string_view category,
                               std::uint64_t seed) {
  return fmt::format("scenarios_{}_{}_{}.jsonl", to_string(suite),
                     category_slug(category), seed);
}

void write_scenarios_jsonl(const std::filesystem::path& path,
                           const std::vector<Scenario>& scenarios) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
  for (const auto& s : scenarios) out << to_json(s).dump() << '\n';
  if (!out) throw Error(fmt::format("write failed for '{}'", path.string()));
}

std::vector<Scenario> read_scenarios_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot open '{}'", path.string()));
  std::vector<Scenario> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(scenario_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
    }
  }
  return out;
}

}  // namespace agentmart
