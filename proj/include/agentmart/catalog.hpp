#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace agentmart {

inline constexpr std::size_t kAssortmentSize = 8;

struct Product {
  std::string product_id;
  std::string category;
  std::string brand;
  std::string title;
  double base_price = 0.0;
  double base_rating = 0.0;
  std::int64_t base_num_reviews = 0;
  std::string image_ref;
  // Optional metadata used by instruction tasks and the seller prompt.
  std::string color;
  std::string features;

  friend bool operator==(const Product&, const Product&) = default;
};

// The eight products of one category, in file order.
struct Assortment {
  std::string category;
  std::vector<const Product*> products;

  std::size_t index_of(std::string_view product_id) const;
};

// Immutable product universe. Safe to share across threads after load.
class Catalog {
 public:
  Catalog() = default;
  // Validates and indexes. Throws ValidationError on any invariant breach.
  explicit Catalog(std::vector<Product> products);

  const std::vector<Product>& products() const noexcept { return products_; }
  const std::vector<std::string>& categories() const noexcept {
    return categories_;
  }

  const Product* find(std::string_view product_id) const noexcept;
  const Product& at(std::string_view product_id) const;
  bool has_category(std::string_view category) const noexcept;

  // Throws ValidationError on unknown category.
  Assortment assortment(std::string_view category) const;

  // Stable serialization: products in file order, fixed key order.
  nlohmann::ordered_json to_json() const;
  std::string canonical_serialization() const;

 private:
  std::vector<Product> products_;
  std::vector<std::string> categories_;  // first-seen order
  std::map<std::string, std::size_t, std::less<>> by_id_;
};

// Reads the CSV format (header
// product_id,category,brand,title,price,rating,num_reviews,image_ref with
// optional color and features columns) or its JSON mirror, chosen by
// extension.
Catalog load_catalog(const std::filesystem::path& path);
Catalog parse_catalog_csv(std::string_view text);
Catalog parse_catalog_json(const nlohmann::json& doc);

Assortment get_assortment(const Catalog& catalog, std::string_view category);

// Path of the bundled default catalog, honoring AGENTMART_DATA_DIR.
std::filesystem::path default_catalog_path();

}  // namespace agentmart
