#include "agentmart/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "agentmart/csv.hpp"
#include "agentmart/error.hpp"

#ifndef AGENTMART_DEFAULT_DATA_DIR
#define AGENTMART_DEFAULT_DATA_DIR "data"
#endif

namespace agentmart {

namespace {

const std::vector<std::string> kRequiredColumns = {
    "product_id", "category", "brand",       "title",
    "price",      "rating",   "num_reviews", "image_ref"};

double parse_double(const std::string& text, std::string_view field,
                    std::size_t row) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size() || !std::isfinite(v)) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(
        fmt::format("catalog row {}: field '{}' is not a number: '{}'", row,
                    field, text));
  }
}

std::int64_t parse_int(const std::string& text, std::string_view field,
                       std::size_t row) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(
        fmt::format("catalog row {}: field '{}' is not an integer: '{}'", row,
                    field, text));
  }
}

void validate_product(const Product& p, std::size_t row) {
  auto fail = [&](std::string_view field, std::string_view what) {
    throw ValidationError(
        fmt::format("catalog row {} ({}): field '{}': {}", row, p.product_id,
                    field, what));
  };
  if (p.product_id.empty()) fail("product_id", "empty");
  if (p.category.empty()) fail("category", "empty");
  if (p.title.empty()) fail("title", "empty");
  if (!(p.base_price > 0.0)) fail("price", "price must be > 0");
  if (p.base_rating < 1.0 || p.base_rating > 5.0) {
    fail("rating", "rating out of [1,5]");
  }
  if (p.base_num_reviews < 1) fail("num_reviews", "num_reviews must be >= 1");
}

}  // namespace

std::size_t Assortment::index_of(std::string_view product_id) const {
  for (std::size_t i = 0; i < products.size(); ++i) {
    if (products[i]->product_id == product_id) return i;
  }
  throw ValidationError(fmt::format("product '{}' not in assortment '{}'",
                                    product_id, category));
}

Catalog::Catalog(std::vector<Product> products) : products_(std::move(products)) {
  std::map<std::string, std::size_t, std::less<>> per_category;
  for (std::size_t i = 0; i < products_.size(); ++i) {
    const Product& p = products_[i];
    validate_product(p, i + 1);
    if (!by_id_.emplace(p.product_id, i).second) {
      throw ValidationError(fmt::format(
          "catalog row {}: field 'product_id': duplicate id '{}'", i + 1,
          p.product_id));
    }
    if (per_category[p.category]++ == 0) categories_.push_back(p.category);
  }
  for (const auto& category : categories_) {
    const std::size_t n = per_category[category];
    if (n != kAssortmentSize) {
      throw ValidationError(fmt::format(
          "category '{}' has {} products, expected {}", category, n,
          kAssortmentSize));
    }
  }
}

const Product* Catalog::find(std::string_view product_id) const noexcept {
  auto it = by_id_.find(product_id);
  return it == by_id_.end() ? nullptr : &products_[it->second];
}

const Product& Catalog::at(std::string_view product_id) const {
  if (const Product* p = find(product_id)) return *p;
  throw ValidationError(fmt::format("unknown product '{}'", product_id));
}

bool Catalog::has_category(std::string_view category) const noexcept {
  return std::find(categories_.begin(), categories_.end(), category) !=
         categories_.end();
}

Assortment Catalog::assortment(std::string_view category) const {
  if (!has_category(category)) {
    throw ValidationError(fmt::format("unknown category '{}'", category));
  }
  Assortment a{std::string(category), {}};
  for (const Product& p : products_) {
    if (p.category == category) a.products.push_back(&p);
  }
  return a;
}

nlohmann::ordered_json Catalog::to_json() const {
  auto arr = nlohmann::ordered_json::array();
  for (const Product& p : products_) {
    nlohmann::ordered_json j;
    j["product_id"] = p.product_id;
    j["category"] = p.category;
    j["brand"] = p.brand;
    j["title"] = p.title;
    j["price"] = p.base_price;
    j["rating"] = p.base_rating;
    j["num_reviews"] = p.base_num_reviews;
    j["image_ref"] = p.image_ref;
    if (!p.color.empty()) j["color"] = p.color;
    if (!p.features.empty()) j["features"] = p.features;
    arr.push_back(std::move(j));
  }
  return arr;
}

std::string Catalog::canonical_serialization() const { return to_json().dump(); }

Catalog parse_catalog_csv(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty()) throw ValidationError("catalog: empty file");
  const csv::Row& header = rows.front();
  std::map<std::string, std::size_t, std::less<>> column;
  for (std::size_t i = 0; i < header.size(); ++i) column[header[i]] = i;
  for (const auto& name : kRequiredColumns) {
    if (!column.contains(name)) {
      throw ValidationError(fmt::format("catalog: missing column '{}'", name));
    }
  }

  std::vector<Product> products;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const csv::Row& row = rows[r];
    if (row.size() != header.size()) {
      throw ValidationError(fmt::format(
          "catalog row {}: expected {} fields, got {}", r, header.size(),
          row.size()));
    }
    auto get = [&](std::string_view name) -> const std::string& {
      static const std::string empty;
      auto it = column.find(name);
      return it == column.end() ? empty : row[it->second];
    };
    Product p;
    p.product_id = get("product_id");
    p.category = get("category");
    p.brand = get("brand");
    p.title = get("title");
    p.base_price = parse_double(get("price"), "price", r);
    p.base_rating = parse_double(get("rating"), "rating", r);
    p.base_num_reviews = parse_int(get("num_reviews"), "num_reviews", r);
    p.image_ref = get("image_ref");
    p.color = get("color");
    p.features = get("features");
    products.push_back(std::move(p));
  }
  return Catalog(std::move(products));
}

Catalog parse_catalog_json(const nlohmann::json& doc) {
  if (!doc.is_array()) throw ValidationError("catalog: JSON root must be an array");
  std::vector<Product> products;
  std::size_t r = 0;
  for (const auto& j : doc) {
    ++r;
    try {
      Product p;
      p.product_id = j.at("product_id").get<std::string>();
      p.category = j.at("category").get<std::string>();
      p.brand = j.at("brand").get<std::string>();
      p.title = j.at("title").get<std::string>();
      p.base_price = j.at("price").get<double>();
      p.base_rating = j.at("rating").get<double>();
      p.base_num_reviews = j.at("num_reviews").get<std::int64_t>();
      p.image_ref = j.at("image_ref").get<std::string>();
      p.color = j.value("color", "");
      p.features = j.value("features", "");
      products.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(fmt::format("catalog row {}: {}", r, e.what()));
    }
  }
  return Catalog(std::move(products));
}

Catalog load_catalog(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot open catalog '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  if (path.extension() == ".json") {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(fmt::format("catalog: {}", e.what()));
    }
    return parse_catalog_json(doc);
  }
  return parse_catalog_csv(buf.str());
}

Assortment get_assortment(const Catalog& catalog, std::string_view category) {
  return catalog.assortment(category);
}

std::filesystem::path default_catalog_path() {
  if (const char* dir = std::getenv("AGENTMART_DATA_DIR")) {
    return std::filesystem::path(dir) / "catalog.csv";
  }
  return std::filesystem::path(AGENTMART_DEFAULT_DATA_DIR) / "catalog.csv";
}

}  // namespace agentmart
