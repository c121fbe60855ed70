#include "agentmart/choice_record.hpp"

#include <fmt/format.h>

#include "agentmart/error.hpp"

namespace agentmart {

ChoiceRecord make_choice(const Scenario& scenario, std::string agent_id,
                         std::optional<std::string> chosen,
                         std::string rationale) {
  ChoiceRecord r;
  r.scenario_id = scenario.scenario_id;
  r.agent_id = std::move(agent_id);
  r.rationale = std::move(rationale);
  r.attempt_count = 1;
  if (!chosen) {
    r.reason = "no choice";
  } else if (!scenario.listing(*chosen)) {
    r.reason = "hallucinated id";
    r.chosen_product = std::move(chosen);
  } else {
    r.chosen_product = std::move(chosen);
    r.valid = true;
  }
  return r;
}

ChoiceRecord invalid_choice(const Scenario& scenario, std::string agent_id,
                            std::string reason) {
  ChoiceRecord r;
  r.scenario_id = scenario.scenario_id;
  r.agent_id = std::move(agent_id);
  r.reason = std::move(reason);
  return r;
}

nlohmann::ordered_json to_json(const ChoiceRecord& r) {
  nlohmann::ordered_json j;
  j["scenario_id"] = r.scenario_id;
  j["agent_id"] = r.agent_id;
  j["chosen_product"] =
      r.chosen_product ? nlohmann::ordered_json(*r.chosen_product) : nullptr;
  j["rationale"] = r.rationale;
  j["valid"] = r.valid;
  j["reason"] = r.reason;
  j["raw_ref"] = r.raw_ref;
  j["latency_ms"] = r.latency_ms;
  j["attempt_count"] = r.attempt_count;
  return j;
}

ChoiceRecord choice_from_json(const nlohmann::json& j) {
  try {
    ChoiceRecord r;
    r.scenario_id = j.at("scenario_id").get<std::string>();
    r.agent_id = j.at("agent_id").get<std::string>();
    if (const auto& c = j.at("chosen_product"); !c.is_null()) {
      r.chosen_product = c.get<std::string>();
    }
    r.rationale = j.value("rationale", "");
    r.valid = j.at("valid").get<bool>();
    r.reason = j.value("reason", "");
    r.raw_ref = j.value("raw_ref", "");
    r.latency_ms = j.value("latency_ms", std::int64_t{0});
    r.attempt_count = j.value("attempt_count", 0);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("malformed choice record: {}", e.what()));
  }
}

}  // namespace agentmart
