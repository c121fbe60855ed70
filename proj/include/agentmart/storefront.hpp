#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "agentmart/catalog.hpp"
#include "agentmart/scenario.hpp"

namespace agentmart {

inline constexpr std::string_view kBadgeSponsored = "Sponsored";
inline constexpr std::string_view kBadgeOverallPick = "Overall Pick";

// Everything a non-visual agent needs to know about one grid cell, with
// numbers already formatted exactly as the HTML shows them.
struct ListingDescriptor {
  std::string product_id;
  GridPosition position;
  std::string title;
  std::string price_text;    // "$1,099.00"
  std::string rating_text;   // "4.3"
  std::string reviews_text;  // "31,247"
  std::vector<std::string> badges;
  std::string image_ref;

  friend bool operator==(const ListingDescriptor&, const ListingDescriptor&) = default;
};

struct RenderedPage {
  std::string scenario_id;
  std::string query;
  std::string html;
  std::vector<ListingDescriptor> structured;  // row-major cell order
};

std::string format_price(double amount);
std::string format_rating(double rating);
std::string format_count(std::int64_t count);
std::string scarcity_badge(int remaining);
std::string html_escape(std::string_view text);

// Deterministic: identical scenarios yield byte-identical HTML.
RenderedPage render_page(const Scenario& scenario, const Catalog& catalog);

// Landing page with the search form; `sid` pre-fills the scenario to load.
std::string render_landing(std::optional<std::string_view> sid = std::nullopt);

// Listing export served at /scenario/<id>/structured.
nlohmann::ordered_json structured_json(const Scenario& scenario,
                                       const RenderedPage& page);

}  // namespace agentmart
