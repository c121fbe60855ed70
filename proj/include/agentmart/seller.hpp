#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

#include "agentmart/analysis.hpp"
#include "agentmart/catalog.hpp"
#include "agentmart/llm_client.hpp"
#include "agentmart/storefront.hpp"

namespace agentmart {

class SellerError : public Error {
 public:
  using Error::Error;
};

struct SellerRequest {
  const RenderedPage& page;
  std::string focal_product;
  std::string product_name;
  std::string features;
  const ShareTable& sales;
};

struct SellerReply {
  std::string title;
  nlohmann::json raw;
};

class SellerAgent {
 public:
  virtual ~SellerAgent() = default;
  virtual bool requires_network() const noexcept { return false; }
  // Throws SellerError when no usable title comes back.
  virtual SellerReply recommend(const SellerRequest& request, const std::string& prompt) const = 0;
};

// Sales table rendered as one "title: share% (count of n)" line per product.
std::string format_sales_data(const ShareTable& sales, const Catalog& catalog);

// The seller prompt with product name, features and sales data substituted,
// followed by the FINAL_TITLE reply-format instruction.
std::string seller_prompt(std::string_view product_name, std::string_view features,
                          std::string_view sales_data);

// Text of the last line of the form "FINAL_TITLE: <text>", trimmed.
std::optional<std::string> parse_final_title(std::string_view reply);

// Checks the focal product has positive share, then asks the seller.
SellerReply seller_recommend(const SellerAgent& seller, const SellerRequest& request,
                             const Catalog& catalog);

// Replies with fixed text; used for offline pipelines and parser checks.
class StubSeller final : public SellerAgent {
 public:
  explicit StubSeller(std::string reply) : reply_(std::move(reply)) {}
  // Returns "FINAL_TITLE: <focal's current title>", a null intervention.
  static StubSeller unchanged();
  SellerReply recommend(const SellerRequest& request, const std::string& prompt) const override;

 private:
  std::string reply_;
  bool echo_title_ = false;
};

class LlmSeller final : public SellerAgent {
 public:
  LlmSeller(ProviderConfig config, std::shared_ptr<HttpTransport> transport,
            std::shared_ptr<RequestBudget> budget = nullptr, Sleeper sleeper = real_sleeper(),
            BackoffPolicy backoff = {});
  bool requires_network() const noexcept override { return true; }
  SellerReply recommend(const SellerRequest& request, const std::string& prompt) const override;

 private:
  LlmClient client_;
  Sleeper sleeper_;
  BackoffPolicy backoff_;
};

}  // namespace agentmart
