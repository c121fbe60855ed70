#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace agentmart {

inline constexpr int kGridRows = 2;
inline constexpr int kGridColumns = 4;
inline constexpr int kGridCells = kGridRows * kGridColumns;

enum class Suite { BB, RS, INSTR, SHUFFLE_ONLY };

std::string_view to_string(Suite suite) noexcept;
Suite suite_from_string(std::string_view text);

// 1-based grid coordinates; row-major cell index 0..7.
struct GridPosition {
  int row = 1;
  int column = 1;

  constexpr int cell() const noexcept {
    return (row - 1) * kGridColumns + (column - 1);
  }
  static constexpr GridPosition from_cell(int cell) noexcept {
    return {cell / kGridColumns + 1, cell % kGridColumns + 1};
  }
  friend constexpr bool operator==(GridPosition, GridPosition) = default;
};

struct ListingState {
  std::string product_id;
  GridPosition position;
  double price = 0.0;
  double rating = 0.0;
  std::int64_t num_reviews = 1;
  bool sponsored = false;
  bool overall_pick = false;
  std::optional<int> scarcity_remaining;
  std::optional<std::string> title_override;

  friend bool operator==(const ListingState&, const ListingState&) = default;
};

// One rendered choice situation. Listings are kept in the assortment's
// canonical order; `position` says where each one is drawn.
struct Scenario {
  std::string scenario_id;
  Suite suite = Suite::BB;
  std::string category;
  std::uint64_t seed = 0;
  std::vector<ListingState> listings;
  std::optional<std::string> correct_listing;
  std::string prompt_query;
  std::optional<std::string> prompt_constraint;

  const ListingState* listing(std::string_view product_id) const noexcept;
  const ListingState* at_cell(int cell) const noexcept;
  // Product ids ordered by grid cell.
  std::vector<std::string> permutation() const;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

// Throws ValidationError naming the violated invariant.
void validate(const Scenario& scenario);

nlohmann::ordered_json to_json(const Scenario& scenario);
Scenario scenario_from_json(const nlohmann::json& j);

std::string category_slug(std::string_view category);
std::string scenario_file_name(Suite suite, std::string_view category,
                               std::uint64_t seed);

void write_scenarios_jsonl(const std::filesystem::path& path,
                           const std::vector<Scenario>& scenarios);
std::vector<Scenario> read_scenarios_jsonl(const std::filesystem::path& path);

}  // namespace agentmart
