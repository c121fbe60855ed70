#pragma once

// Batch orchestration and the on-disk run log.
//
// Layout of one run:
//
//   <out>/<run_id>/config.json
//   <out>/<run_id>/catalog.json
//   <out>/<run_id>/scenarios/<scenario_id>/{scenario.json, page.html,
//                                           page.png?, raw_response.json,
//                                           choice.json}
//   <out>/<run_id>/summary.json
//
// The seller pipeline nests two such trees (baseline/, post/) under one run
// id, next to seller/ and ate.json.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "agentmart/agents.hpp"
#include "agentmart/analysis.hpp"
#include "agentmart/catalog.hpp"
#include "agentmart/scenario.hpp"
#include "agentmart/scenario_gen.hpp"
#include "agentmart/seller.hpp"

namespace agentmart {

struct AgentConfig {
  // synthetic | rule_lowest_price | rule_highest_rating | rule_oracle |
  // uniform_random | vlm
  std::string kind = "synthetic";
  std::string id;      // defaults to the preset name or the kind
  std::string preset;  // synthetic: one of the reference model names
  nlohmann::json params = nlohmann::json::object();  // synthetic overrides
  std::optional<std::uint64_t> noise_seed;           // defaults to the run seed
  std::optional<ProviderConfig> provider;            // vlm only
};

AgentConfig agent_config_from_json(const nlohmann::json& j,
                                   const std::filesystem::path& base_dir = {});
nlohmann::ordered_json to_json(const AgentConfig& config);

struct AgentDeps {
  std::shared_ptr<HttpTransport> transport;
  std::shared_ptr<RequestBudget> budget;
  Sleeper sleeper;
};

std::unique_ptr<BuyerAgent> make_agent(const AgentConfig& config, std::uint64_t run_seed,
                                       const Catalog& catalog, AgentDeps deps = {});

// Accepts suite names in any case plus "shuffle" for SHUFFLE_ONLY.
Suite parse_suite_name(std::string_view text);

struct RunConfig {
  std::string run_id;  // empty: derived from suite and seed
  Suite suite = Suite::BB;
  std::string variant;  // RS kind or INSTR task, e.g. "price_discount:0.05"
  PerturbSpec perturb;
  std::vector<std::string> categories;  // empty: every catalog category
  AgentConfig agent;
  std::size_t n = 1;  // scenarios per category
  std::uint64_t seed = 0;
  std::size_t parallelism = 4;
  std::filesystem::path out = "runs";
  std::optional<std::string> capture_hook;  // "<cmd>" run as <cmd> <html> <png>
  bool live = false;
  std::optional<std::size_t> request_budget;
  std::filesystem::path catalog;  // empty: bundled catalog
  std::map<std::string, std::string> title_overrides;  // SHUFFLE_ONLY only

  void validate() const;
  std::string effective_run_id() const;
};

RunConfig run_config_from_json(const nlohmann::json& j,
                               const std::filesystem::path& base_dir = {});
nlohmann::ordered_json to_json(const RunConfig& config);
RunConfig load_run_config(const std::filesystem::path& path);

Catalog load_run_catalog(const RunConfig& config);

// Scenarios of every configured category, category by category.
std::vector<Scenario> generate_scenarios(const RunConfig& config, const Catalog& catalog);

struct RunLog {
  std::filesystem::path root;
  std::string run_id;
  nlohmann::json config;
  nlohmann::json summary;
  std::vector<Scenario> scenarios;
  std::vector<ChoiceRecord> records;  // aligned with scenarios

  // Throws ValidationError if the tree is incomplete or inconsistent.
  static RunLog load(const std::filesystem::path& root);
  Catalog catalog() const;
};

struct BatchOptions {
  std::string run_id;
  std::string stage = "main";
  std::size_t parallelism = 1;
  std::optional<std::string> capture_hook;
  PromptTemplate prompt = PromptTemplate::buyer_default();
};

// Runs every scenario once into `root`. Scenarios whose directory already
// holds a matching scenario.json and a parsable choice.json are skipped.
RunLog execute_batch(const std::filesystem::path& root, const std::vector<Scenario>& scenarios,
                     const BuyerAgent& agent, const Catalog& catalog,
                     const BatchOptions& options, const nlohmann::json& config_snapshot);

// Refuses to start when the agent needs the network and config.live is false.
RunLog run_batch(const RunConfig& config, const BuyerAgent& agent, const Catalog& catalog);
RunLog run_batch(const RunConfig& config);

struct SellerPipelineResult {
  std::string run_id;
  std::filesystem::path root;
  std::string category;
  ShareTable baseline;
  std::string focal_product;
  std::string original_title;
  std::string new_title;
  ShareTable post;
  AteResult ate;
};

nlohmann::ordered_json to_json(const SellerPipelineResult& result);

// Baseline shuffle-only run, seeded focal draw among positive-share
// products, one seller call, post run on the same shuffles with the new
// title, then the ATE. A seller failure aborts before the post run.
SellerPipelineResult seller_pipeline(const RunConfig& config, const BuyerAgent& buyer,
                                     const SellerAgent& seller, const Catalog& catalog);

}  // namespace agentmart
