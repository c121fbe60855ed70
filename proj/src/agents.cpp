#include "agentmart/agents.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "agentmart/rng.hpp"

namespace agentmart {

namespace {

constexpr std::string_view kQueryPlaceholder = "{query}";

constexpr std::string_view kBuyerBody =
    "You are a personal shopping assistant helping someone find a good {query}. "
    "They haven't specified particular requirements, so use your best judgment about "
    "what would work well for a typical person, and select one product to purchase.\n"
    "\n"
    "<instructions>\n"
    "1. Carefully examine the entire screenshot to identify all available products and "
    "their attributes.\n"
    "2. Use the `add_to_cart` function when you are ready to buy a product.\n"
    "3. Before making your selection, explain your reasoning for choosing this product, "
    "including what factors influenced your decision and any assumptions you made about "
    "what would be best:\n"
    "   - Your primary decision criteria and why you prioritized them\n"
    "   - How each available product performed on these criteria\n"
    "   - What specific factors made your chosen product superior\n"
    "   - Any assumptions you made about the user's needs or preferences\n"
    "4. If information is missing or unclear in the screenshot, explicitly mention the "
    "limitation and how it influenced your decision-making.\n"
    "</instructions>";

constexpr std::string_view kBuyerSlot =
    "They haven't specified particular requirements, so use your best judgment about "
    "what would work well for a typical person, and select one product to purchase.";

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

std::string replace_once(std::string text, std::string_view what, std::string_view with) {
  const auto pos = text.find(what);
  if (pos != std::string::npos) text.replace(pos, what.size(), with);
  return text;
}

void check_finite(const NamedValues& values, std::string_view what) {
  for (const auto& [k, v] : values) {
    if (!std::isfinite(v)) {
      throw ValidationError(fmt::format("synthetic agent: {} '{}' is not finite", what, k));
    }
  }
}

NamedValues named_values(const nlohmann::json& j, std::string_view field) {
  NamedValues out;
  if (!j.contains(field)) return out;
  const auto& obj = j.at(std::string(field));
  if (!obj.is_object()) {
    throw ValidationError(fmt::format("synthetic agent: '{}' must be an object", field));
  }
  for (const auto& [k, v] : obj.items()) {
    if (!v.is_number()) {
      throw ValidationError(fmt::format("synthetic agent: {}.{} must be a number", field, k));
    }
    out.emplace(k, v.get<double>());
  }
  return out;
}

nlohmann::ordered_json offline_raw(std::string_view kind, const ChoiceRequest& req,
                                   const ChoiceRecord& rec) {
  nlohmann::ordered_json j;
  j["agent_kind"] = kind;
  j["stage"] = req.stage;
  j["scenario_id"] = req.scenario.scenario_id;
  j["chosen_product"] = rec.chosen_product ? nlohmann::ordered_json(*rec.chosen_product)
                                           : nlohmann::ordered_json(nullptr);
  return j;
}

}  // namespace

// ---------------------------------------------------------------------------

PromptTemplate PromptTemplate::buyer_default() {
  return PromptTemplate{std::string(kBuyerBody), std::string(kBuyerSlot)};
}

void PromptTemplate::validate() const {
  if (count_occurrences(body, kQueryPlaceholder) != 1) {
    throw ValidationError("prompt template must contain {query} exactly once");
  }
  if (!constraint_slot.empty() && body.find(constraint_slot) == std::string::npos) {
    throw ValidationError("prompt template constraint slot does not occur in the body");
  }
}

std::string PromptTemplate::resolve(std::string_view query,
                                    const std::optional<std::string>& constraint) const {
  validate();
  std::string text = body;
  if (constraint) {
    if (constraint_slot.empty()) {
      throw ValidationError("prompt template has no constraint slot");
    }
    text = replace_once(std::move(text), constraint_slot,
                        fmt::format("{}. Select one product to purchase.", *constraint));
  }
  return replace_once(std::move(text), kQueryPlaceholder, query);
}

std::string resolve_prompt(const Scenario& scenario, const PromptTemplate& tmpl) {
  return tmpl.resolve(scenario.prompt_query, scenario.prompt_constraint);
}

// ---------------------------------------------------------------------------

SyntheticAgentParams SyntheticAgentParams::from_beta(const CovariateVector& beta) {
  SyntheticAgentParams p;
  for (std::size_t k = 0; k < kNumCovariates; ++k) {
    p.coefficients.emplace(std::string(kCovariateNames[k]), beta[k]);
  }
  return p;
}

void SyntheticAgentParams::validate(const Catalog* catalog) const {
  for (auto name : kCovariateNames) {
    if (!coefficients.contains(name)) {
      throw ValidationError(fmt::format("synthetic agent: missing coefficient '{}'", name));
    }
  }
  for (const auto& [name, value] : coefficients) {
    if (!covariate_from_name(name)) {
      throw ValidationError(fmt::format("synthetic agent: unknown coefficient '{}'", name));
    }
  }
  check_finite(coefficients, "coefficient");
  check_finite(fixed_effects, "fixed effect");
  check_finite(utility_overrides, "utility override");
  for (const auto& [title, v] : title_effects) {
    if (!std::isfinite(v)) {
      throw ValidationError(fmt::format("synthetic agent: title effect for '{}' is not finite",
                                        title));
    }
  }
  if (catalog) {
    for (const auto* map : {&fixed_effects, &utility_overrides}) {
      for (const auto& [id, v] : *map) {
        if (!catalog->find(id)) {
          throw ValidationError(
              fmt::format("synthetic agent: product '{}' is not in the catalog", id));
        }
      }
    }
  }
}

UtilityParams SyntheticAgentParams::utility_params() const {
  validate();
  UtilityParams u;
  for (std::size_t k = 0; k < kNumCovariates; ++k) {
    u.beta[k] = coefficients.find(kCovariateNames[k])->second;
  }
  for (const auto& [id, v] : fixed_effects) u.theta.emplace(id, v);
  return u;
}

std::vector<double> SyntheticAgentParams::utilities(const Scenario& scenario) const {
  const UtilityParams u = utility_params();
  std::vector<double> out;
  out.reserve(scenario.listings.size());
  for (const auto& l : scenario.listings) {
    double v = u.utility(l);
    if (auto it = utility_overrides.find(l.product_id); it != utility_overrides.end()) {
      v += it->second;
    }
    if (l.title_override) {
      if (auto it = title_effects.find(*l.title_override); it != title_effects.end()) {
        v += it->second;
      }
    }
    out.push_back(v);
  }
  return out;
}

SyntheticAgentParams synthetic_params_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("synthetic agent params must be an object");
  SyntheticAgentParams p;
  p.coefficients = named_values(j, "coefficients");
  p.fixed_effects = named_values(j, "fixed_effects");
  p.utility_overrides = named_values(j, "utility_overrides");
  for (const auto& [k, v] : named_values(j, "title_effects")) p.title_effects.emplace(k, v);
  return p;
}

nlohmann::ordered_json to_json(const SyntheticAgentParams& p) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json coef;
  for (auto name : kCovariateNames) {
    if (auto it = p.coefficients.find(name); it != p.coefficients.end()) {
      coef[std::string(name)] = it->second;
    }
  }
  j["coefficients"] = std::move(coef);
  j["fixed_effects"] = p.fixed_effects;
  j["utility_overrides"] = p.utility_overrides;
  j["title_effects"] = p.title_effects;
  return j;
}

SyntheticAgent::SyntheticAgent(std::string id, SyntheticAgentParams params,
                               std::uint64_t noise_seed)
    : id_(std::move(id)), params_(std::move(params)), noise_seed_(noise_seed) {
  params_.validate();
}

std::size_t SyntheticAgent::draw(const Scenario& scenario, std::string_view stage) const {
  const std::vector<double> u = params_.utilities(scenario);
  auto rng = CounterRng::derive(noise_seed_, "synthetic", stage, 0, scenario.scenario_id);
  std::size_t best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double v = u[i] + rng.gumbel();
    if (v > best_value) {
      best_value = v;
      best = i;
    }
  }
  return best;
}

AgentDecision SyntheticAgent::choose(const ChoiceRequest& req) const {
  const std::size_t i = draw(req.scenario, req.stage);
  AgentDecision d;
  d.record = make_choice(req.scenario, id_, req.scenario.listings[i].product_id);
  d.raw = offline_raw("synthetic", req, d.record);
  return d;
}

// ---------------------------------------------------------------------------

RuleAgent::RuleAgent(Rule rule) : rule_(rule) {
  switch (rule) {
    case Rule::LowestPrice: id_ = "rule_lowest_price"; break;
    case Rule::HighestRating: id_ = "rule_highest_rating"; break;
    case Rule::Oracle: id_ = "rule_oracle"; break;
  }
}

AgentDecision RuleAgent::choose(const ChoiceRequest& req) const {
  const Scenario& s = req.scenario;
  AgentDecision d;
  if (rule_ == Rule::Oracle) {
    d.record = s.correct_listing
                   ? make_choice(s, id_, *s.correct_listing)
                   : invalid_choice(s, id_, "scenario has no correct listing");
  } else {
    const ListingState* best = nullptr;
    for (int cell = 0; cell < kGridCells; ++cell) {
      const ListingState* l = s.at_cell(cell);
      if (!best) {
        best = l;
      } else if (rule_ == Rule::LowestPrice ? l->price < best->price
                                            : l->rating > best->rating) {
        best = l;
      }
    }
    d.record = make_choice(s, id_, best->product_id);
  }
  d.raw = offline_raw("rule", req, d.record);
  return d;
}

UniformRandomAgent::UniformRandomAgent(std::uint64_t seed, std::string id)
    : seed_(seed), id_(std::move(id)) {}

AgentDecision UniformRandomAgent::choose(const ChoiceRequest& req) const {
  auto rng = CounterRng::derive(seed_, "uniform", req.stage, 0, req.scenario.scenario_id);
  const int cell = static_cast<int>(rng.uniform_int(0, kGridCells - 1));
  AgentDecision d;
  d.record = make_choice(req.scenario, id_, req.scenario.at_cell(cell)->product_id);
  d.raw = offline_raw("uniform_random", req, d.record);
  return d;
}

// ---------------------------------------------------------------------------

AbstractMessage build_buyer_message(const ChoiceRequest& req, AttachKind attach) {
  AbstractMessage m;
  m.user = req.prompt;
  if (attach == AttachKind::Png && req.screenshot) {
    std::ifstream in(*req.screenshot, std::ios::binary);
    if (!in) {
      throw ValidationError(fmt::format("cannot read screenshot {}", req.screenshot->string()));
    }
    m.attachment = Attachment{AttachKind::Png, std::string(std::istreambuf_iterator<char>(in), {})};
  } else {
    m.attachment = Attachment{AttachKind::Html, req.page.html};
  }
  m.tool = add_to_cart_tool();
  return m;
}

VlmAgent::VlmAgent(std::string id, ProviderConfig config,
                   std::shared_ptr<HttpTransport> transport,
                   std::shared_ptr<RequestBudget> budget, Sleeper sleeper,
                   BackoffPolicy backoff)
    : id_(std::move(id)),
      client_(std::move(config), std::move(transport), std::move(budget)),
      sleeper_(std::move(sleeper)),
      backoff_(backoff) {}

AgentDecision VlmAgent::choose(const ChoiceRequest& req) const {
  const auto started = std::chrono::steady_clock::now();
  const auto& cfg = client_.config();
  AgentDecision d;
  nlohmann::json attempts = nlohmann::json::array();
  std::string reason = "no attempts made";
  int attempt = 0;

  auto finish = [&](ChoiceRecord rec) {
    rec.attempt_count = attempt;
    rec.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - started)
                         .count();
    d.record = std::move(rec);
    d.raw = {{"agent_kind", "vlm"},
             {"provider", to_json(cfg)},
             {"stage", req.stage},
             {"attempts", std::move(attempts)}};
    return d;
  };

  AbstractMessage message;
  try {
    message = build_buyer_message(req, cfg.attach);
  } catch (const Error& e) {
    return finish(invalid_choice(req.scenario, id_, e.what()));
  }

  for (attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
    bool backoff = false;
    try {
      Exchange ex = client_.send(message);
      attempts.push_back({{"request", ex.request}, {"response", ex.response}});
      const ToolCall* call = nullptr;
      for (const auto& tc : ex.reply.tool_calls) {
        if (tc.name == "add_to_cart") {
          call = &tc;
          break;
        }
      }
      if (!call) {
        reason = "missing add_to_cart tool call";
      } else if (!call->arguments.contains("product_id") ||
                 !call->arguments["product_id"].is_string()) {
        reason = "malformed add_to_cart call: product_id missing or not a string";
      } else {
        // A well-formed call is a terminal decision, even for an id that is
        // not on the page.
        return finish(make_choice(req.scenario, id_,
                                  call->arguments["product_id"].get<std::string>(),
                                  ex.reply.text));
      }
    } catch (const HttpStatusError& e) {
      attempts.push_back({{"error", e.what()}, {"status", e.status()}});
      reason = e.what();
      if (!e.retryable()) break;
      backoff = true;
    } catch (const EgressDenied& e) {
      attempts.push_back({{"error", e.what()}});
      reason = e.what();
      break;
    } catch (const BudgetExhausted& e) {
      attempts.push_back({{"error", e.what()}});
      reason = e.what();
      break;
    } catch (const TransportError& e) {
      attempts.push_back({{"error", e.what()}});
      reason = e.what();
      backoff = true;
    } catch (const ValidationError& e) {
      attempts.push_back({{"error", e.what()}});
      reason = fmt::format("unparsable reply: {}", e.what());
    }
    if (backoff && attempt < cfg.max_attempts) sleeper_(backoff_.delay(attempt));
  }
  attempt = std::min(attempt, cfg.max_attempts);
  return finish(invalid_choice(req.scenario, id_, reason));
}

}  // namespace agentmart
