#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "agentmart/scenario.hpp"

namespace agentmart {

// One agent decision. valid is true exactly when chosen_product names a
// listing of the scenario.
struct ChoiceRecord {
  std::string scenario_id;
  std::string agent_id;
  std::optional<std::string> chosen_product;
  std::string rationale;
  bool valid = false;
  std::string reason;  // why the record is invalid; empty when valid
  std::string raw_ref;
  std::int64_t latency_ms = 0;
  int attempt_count = 0;

  friend bool operator==(const ChoiceRecord&, const ChoiceRecord&) = default;
};

// Builds a record and enforces the validity invariant against the scenario.
ChoiceRecord make_choice(const Scenario& scenario, std::string agent_id,
                         std::optional<std::string> chosen,
                         std::string rationale = {});

ChoiceRecord invalid_choice(const Scenario& scenario, std::string agent_id,
                            std::string reason);

nlohmann::ordered_json to_json(const ChoiceRecord& record);
ChoiceRecord choice_from_json(const nlohmann::json& j);

}  // namespace agentmart
