#include "agentmart/storefront.hpp"

#include <cmath>

#include <fmt/format.h>

#include "agentmart/error.hpp"

namespace agentmart {

namespace {

constexpr std::string_view kStyle = R"css(
body { font-family: Arial, Helvetica, sans-serif; margin: 0; background: #eaeded; width: 1280px; }
.topbar { background: #131921; padding: 10px 16px; }
.topbar form { display: flex; gap: 8px; }
.topbar input[type=text] { width: 640px; height: 32px; font-size: 15px; }
.topbar button { height: 36px; background: #febd69; border: 0; padding: 0 16px; }
.results { padding: 16px; }
.grid-row { display: flex; gap: 16px; margin-bottom: 16px; }
.product-card { background: #fff; width: 296px; height: 430px; padding: 12px; box-sizing: border-box; position: relative; }
.product-image { width: 100%; height: 200px; object-fit: contain; background: #f7f7f7; }
.badges { height: 24px; margin: 6px 0; }
.badge { font-size: 12px; padding: 2px 6px; margin-right: 4px; border-radius: 2px; }
.badge-sponsored { color: #565959; border: 1px solid #d5d9d9; }
.badge-pick { color: #fff; background: #232f3e; }
.badge-scarcity { color: #b12704; }
.product-title { font-size: 14px; line-height: 20px; height: 80px; overflow: hidden; }
.product-rating { font-size: 13px; color: #007185; margin: 6px 0; }
.product-price { font-size: 22px; color: #0f1111; }
.product-id { font-size: 11px; color: #565959; position: absolute; bottom: 10px; }
)css";

std::string with_thousands(std::string digits) {
  std::string out;
  const std::size_t n = digits.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && (n - i) % 3 == 0) out.push_back(',');
    out.push_back(digits[i]);
  }
  return out;
}

std::vector<std::string> badges_of(const ListingState& l) {
  std::vector<std::string> badges;
  if (l.overall_pick) badges.emplace_back(kBadgeOverallPick);
  if (l.sponsored) badges.emplace_back(kBadgeSponsored);
  if (l.scarcity_remaining) badges.push_back(scarcity_badge(*l.scarcity_remaining));
  return badges;
}

std::string_view badge_class(std::string_view badge) {
  if (badge == kBadgeOverallPick) return "badge-pick";
  if (badge == kBadgeSponsored) return "badge-sponsored";
  return "badge-scarcity";
}

}  // namespace

std::string format_price(double amount) {
  const auto cents = static_cast<long long>(std::llround(amount * 100.0));
  return fmt::format("${}.{:02d}", with_thousands(std::to_string(cents / 100)),
                     cents % 100);
}

std::string format_rating(double rating) { return fmt::format("{:.1f}", rating); }

std::string format_count(std::int64_t count) {
  return with_thousands(std::to_string(count));
}

std::string scarcity_badge(int remaining) {
  return fmt::format("Only {} Remaining", remaining);
}

std::string html_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

RenderedPage render_page(const Scenario& scenario, const Catalog& catalog) {
  validate(scenario);
  RenderedPage page;
  page.scenario_id = scenario.scenario_id;
  page.query = scenario.prompt_query;

  for (int cell = 0; cell < kGridCells; ++cell) {
    const ListingState& l = *scenario.at_cell(cell);
    const Product& p = catalog.at(l.product_id);
    ListingDescriptor d;
    d.product_id = l.product_id;
    d.position = l.position;
    d.title = l.title_override.value_or(p.title);
    d.price_text = format_price(l.price);
    d.rating_text = format_rating(l.rating);
    d.reviews_text = format_count(l.num_reviews);
    d.badges = badges_of(l);
    d.image_ref = p.image_ref;
    page.structured.push_back(std::move(d));
  }

  std::string html;
  html += "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n";
  html += fmt::format("<title>{} - Search results</title>\n", html_escape(page.query));
  html += fmt::format("<style>{}</style>\n</head>\n<body>\n", kStyle);
  html += "<header class=\"topbar\">\n<form action=\"/search\" method=\"get\">\n";
  html += fmt::format("<input type=\"text\" name=\"q\" value=\"{}\">\n",
                      html_escape(page.query));
  html += fmt::format("<input type=\"hidden\" name=\"sid\" value=\"{}\">\n",
                      html_escape(page.scenario_id));
  html += "<button type=\"submit\">Search</button>\n</form>\n</header>\n";
  html += fmt::format("<main class=\"results\" data-scenario-id=\"{}\">\n",
                      html_escape(page.scenario_id));
  for (int row = 1; row <= kGridRows; ++row) {
    html += fmt::format("<div class=\"grid-row\" data-row=\"{}\">\n", row);
    for (int col = 1; col <= kGridColumns; ++col) {
      const auto& d = page.structured[static_cast<std::size_t>(
          GridPosition{row, col}.cell())];
      html += fmt::format(
          "<div class=\"product-card\" data-row=\"{}\" data-col=\"{}\" "
          "data-product-id=\"{}\">\n",
          row, col, html_escape(d.product_id));
      html += fmt::format("<img class=\"product-image\" src=\"/assets/{}\" alt=\"\">\n",
                          html_escape(d.image_ref));
      html += "<div class=\"badges\">";
      for (const auto& b : d.badges) {
        html += fmt::format("<span class=\"badge {}\">{}</span>", badge_class(b),
                            html_escape(b));
      }
      html += "</div>\n";
      html += fmt::format("<div class=\"product-title\">{}</div>\n", html_escape(d.title));
      html += fmt::format(
          "<div class=\"product-rating\"><span class=\"rating\">{}</span> out of 5 "
          "&middot; <span class=\"reviews\">{}</span> ratings</div>\n",
          d.rating_text, d.reviews_text);
      html += fmt::format("<div class=\"product-price\">{}</div>\n", d.price_text);
      html += fmt::format("<div class=\"product-id\">ID: {}</div>\n",
                          html_escape(d.product_id));
      html += "</div>\n";
    }
    html += "</div>\n";
  }
  html += "</main>\n</body>\n</html>\n";
  page.html = std::move(html);
  return page;
}

std::string render_landing(std::optional<std::string_view> sid) {
  std::string html;
  html += "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n";
  html += "<title>Shop</title>\n";
  html += fmt::format("<style>{}</style>\n</head>\n<body>\n", kStyle);
  html += "<header class=\"topbar\">\n<form action=\"/search\" method=\"get\">\n";
  html += "<input type=\"text\" name=\"q\" value=\"\" placeholder=\"Search\">\n";
  if (sid) {
    html += fmt::format("<input type=\"hidden\" name=\"sid\" value=\"{}\">\n",
                        html_escape(*sid));
  }
  html += "<button type=\"submit\">Search</button>\n</form>\n</header>\n";
  html += "</body>\n</html>\n";
  return html;
}

nlohmann::ordered_json structured_json(const Scenario& scenario,
                                       const RenderedPage& page) {
  nlohmann::ordered_json j;
  j["scenario_id"] = page.scenario_id;
  j["query"] = page.query;
  auto listings = nlohmann::ordered_json::array();
  for (const auto& d : page.structured) {
    const ListingState& l = *scenario.listing(d.product_id);
    nlohmann::ordered_json lj;
    lj["product_id"] = d.product_id;
    lj["position"] = {{"row", d.position.row}, {"column", d.position.column}};
    lj["price"] = l.price;
    lj["rating"] = l.rating;
    lj["num_reviews"] = l.num_reviews;
    lj["sponsored"] = l.sponsored;
    lj["overall_pick"] = l.overall_pick;
    lj["scarcity_remaining"] =
        l.scarcity_remaining ? nlohmann::ordered_json(*l.scarcity_remaining) : nullptr;
    lj["title_override"] =
        l.title_override ? nlohmann::ordered_json(*l.title_override) : nullptr;
    lj["title"] = d.title;
    lj["price_text"] = d.price_text;
    lj["rating_text"] = d.rating_text;
    lj["reviews_text"] = d.reviews_text;
    lj["badges"] = d.badges;
    lj["image_ref"] = d.image_ref;
    listings.push_back(std::move(lj));
  }
  j["listings"] = std::move(listings);
  return j;
}

}  // namespace agentmart
