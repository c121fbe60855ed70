#pragma once

// Buyer agents. Each one sees a rendered page plus the resolved prompt and
// declares exactly one purchase.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

#include "agentmart/catalog.hpp"
#include "agentmart/choice_model.hpp"
#include "agentmart/choice_record.hpp"
#include "agentmart/http_transport.hpp"
#include "agentmart/llm_client.hpp"
#include "agentmart/scenario.hpp"
#include "agentmart/storefront.hpp"

namespace agentmart {

struct PromptTemplate {
  std::string body;             // contains "{query}" exactly once
  std::string constraint_slot;  // substring of body replaced by task sentences

  // The generic buyer prompt; the slot is its "no particular requirements"
  // sentence.
  static PromptTemplate buyer_default();

  void validate() const;
  std::string resolve(std::string_view query,
                      const std::optional<std::string>& constraint = std::nullopt) const;
};

std::string resolve_prompt(const Scenario& scenario,
                           const PromptTemplate& tmpl = PromptTemplate::buyer_default());

struct ChoiceRequest {
  const Scenario& scenario;
  const RenderedPage& page;
  std::string prompt;
  std::optional<std::filesystem::path> screenshot;
  // Run stage ("baseline", "post", ...). Stochastic agents mix it into their
  // stream keys, so two stages of one experiment draw independent noise.
  std::string stage = "main";
};

struct AgentDecision {
  ChoiceRecord record;
  nlohmann::json raw;  // persisted verbatim as raw_response.json
};

class BuyerAgent {
 public:
  virtual ~BuyerAgent() = default;
  virtual const std::string& id() const noexcept = 0;
  virtual bool requires_network() const noexcept { return false; }
  // Agent-side failures come back as valid=false records, not exceptions.
  virtual AgentDecision choose(const ChoiceRequest& request) const = 0;
};

// ---------------------------------------------------------------------------

using NamedValues = std::map<std::string, double, std::less<>>;

struct SyntheticAgentParams {
  NamedValues coefficients;       // keyed by covariate name, all 10 required
  NamedValues fixed_effects;      // product_id -> theta
  NamedValues utility_overrides;  // product_id -> additive utility
  // Displayed title -> additive utility; applies when a listing shows that
  // title through title_override. Lets a description change carry a known
  // utility effect.
  std::map<std::string, double, std::less<>> title_effects;

  static SyntheticAgentParams from_beta(const CovariateVector& beta);

  // Throws ValidationError on a missing or unknown coefficient, a
  // non-finite value, or (with a catalog) an unknown product id.
  void validate(const Catalog* catalog = nullptr) const;
  UtilityParams utility_params() const;
  // Deterministic utility of each listing, in listing order.
  std::vector<double> utilities(const Scenario& scenario) const;
};

SyntheticAgentParams synthetic_params_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const SyntheticAgentParams& params);

// Utility maximizer with i.i.d. Gumbel(0, 1) noise. Noise for a scenario is
// keyed by (noise_seed, stage, scenario_id), so results do not depend on
// call order or thread count.
class SyntheticAgent final : public BuyerAgent {
 public:
  SyntheticAgent(std::string id, SyntheticAgentParams params, std::uint64_t noise_seed);

  const std::string& id() const noexcept override { return id_; }
  const SyntheticAgentParams& params() const noexcept { return params_; }
  AgentDecision choose(const ChoiceRequest& request) const override;

  // Index into scenario.listings of the simulated choice.
  std::size_t draw(const Scenario& scenario, std::string_view stage) const;

 private:
  std::string id_;
  SyntheticAgentParams params_;
  std::uint64_t noise_seed_;
};

enum class Rule { LowestPrice, HighestRating, Oracle };

// Deterministic rules. Ties go to the earliest grid cell.
class RuleAgent final : public BuyerAgent {
 public:
  explicit RuleAgent(Rule rule);
  const std::string& id() const noexcept override { return id_; }
  AgentDecision choose(const ChoiceRequest& request) const override;

 private:
  Rule rule_;
  std::string id_;
};

class UniformRandomAgent final : public BuyerAgent {
 public:
  explicit UniformRandomAgent(std::uint64_t seed, std::string id = "uniform_random");
  const std::string& id() const noexcept override { return id_; }
  AgentDecision choose(const ChoiceRequest& request) const override;

 private:
  std::uint64_t seed_;
  std::string id_;
};

// Remote vision-language model that must answer through add_to_cart.
class VlmAgent final : public BuyerAgent {
 public:
  VlmAgent(std::string id, ProviderConfig config, std::shared_ptr<HttpTransport> transport,
           std::shared_ptr<RequestBudget> budget = nullptr, Sleeper sleeper = real_sleeper(),
           BackoffPolicy backoff = {});

  const std::string& id() const noexcept override { return id_; }
  bool requires_network() const noexcept override { return true; }
  AgentDecision choose(const ChoiceRequest& request) const override;

 private:
  std::string id_;
  LlmClient client_;
  Sleeper sleeper_;
  BackoffPolicy backoff_;
};

// The abstract message a VLM agent sends for one decision.
AbstractMessage build_buyer_message(const ChoiceRequest& request, AttachKind attach);

}  // namespace agentmart
