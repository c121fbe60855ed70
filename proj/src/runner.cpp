#include "agentmart/runner.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "agentmart/http_transport.hpp"
#include "agentmart/reference_estimates.hpp"
#include "agentmart/rng.hpp"
#include "agentmart/storefront.hpp"

namespace agentmart {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot read {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const fs::path& path) {
  auto j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw ValidationError(fmt::format("{} is not valid JSON", path.string()));
  return j;
}

// Write-then-rename so a crash never leaves a half-written file behind.
void write_file(const fs::path& path, std::string_view content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(fmt::format("cannot write {}", tmp.string()));
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(fmt::format("short write to {}", tmp.string()));
  }
  fs::rename(tmp, path);
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  write_file(path, j.dump(2) + "\n");
}

std::string dir_name(std::string_view scenario_id) {
  std::string out(scenario_id);
  for (char& c : out) {
    const auto u = static_cast<unsigned char>(c);
    if (!std::isalnum(u) && c != '-' && c != '_' && c != '.') c = '_';
  }
  return out;
}

std::string shell_quote(std::string_view s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out.push_back(c);
    }
  }
  out += "'";
  return out;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

// Snapshot fields that may change between an interrupted run and its resume.
nlohmann::json comparable(nlohmann::json snapshot) {
  for (const char* k : {"parallelism", "live", "request_budget", "out", "capture_hook"}) {
    snapshot.erase(k);
  }
  return snapshot;
}

const ReferenceEstimates* find_preset(std::string_view name) {
  for (const auto* ref : kReferenceModels) {
    if (ref->model == name) return ref;
  }
  return nullptr;
}

struct TaskOutcome {
  ChoiceRecord record;
  bool resumed = false;
};

std::optional<ChoiceRecord> completed_record(const fs::path& dir, const Scenario& scenario) {
  const fs::path choice = dir / "choice.json";
  const fs::path scen = dir / "scenario.json";
  if (!fs::exists(choice) || !fs::exists(scen)) return std::nullopt;
  try {
    if (scenario_from_json(read_json(scen)) != scenario) return std::nullopt;
    ChoiceRecord r = choice_from_json(read_json(choice));
    if (r.scenario_id != scenario.scenario_id) return std::nullopt;
    return r;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

TaskOutcome run_one(const fs::path& root, const Scenario& scenario, const BuyerAgent& agent,
                    const Catalog& catalog, const BatchOptions& opt) {
  const std::string name = dir_name(scenario.scenario_id);
  const fs::path rel = fs::path("scenarios") / name;
  const fs::path dir = root / rel;
  if (auto done = completed_record(dir, scenario)) return {std::move(*done), true};

  fs::create_directories(dir);
  write_json(dir / "scenario.json", to_json(scenario));
  const RenderedPage page = render_page(scenario, catalog);
  write_file(dir / "page.html", page.html);

  std::optional<fs::path> png;
  if (opt.capture_hook) {
    const fs::path png_path = dir / "page.png";
    const std::string cmd = fmt::format("{} {} {}", *opt.capture_hook,
                                        shell_quote((dir / "page.html").string()),
                                        shell_quote(png_path.string()));
    if (std::system(cmd.c_str()) == 0 && fs::exists(png_path)) png = png_path;
  }

  ChoiceRequest req{scenario, page, resolve_prompt(scenario, opt.prompt), png, opt.stage};
  AgentDecision decision;
  try {
    decision = agent.choose(req);
  } catch (const std::exception& e) {
    decision.record = invalid_choice(scenario, agent.id(), fmt::format("agent error: {}", e.what()));
    decision.raw = {{"error", e.what()}};
  }
  decision.record.raw_ref = (rel / "raw_response.json").generic_string();
  write_json(dir / "raw_response.json", decision.raw);
  write_json(dir / "choice.json", to_json(decision.record));
  return {std::move(decision.record), false};
}

nlohmann::ordered_json make_summary(const std::string& run_id, const std::string& stage,
                                    const std::string& agent_id,
                                    const std::vector<Scenario>& scenarios,
                                    const std::vector<ChoiceRecord>& records) {
  nlohmann::ordered_json s;
  s["run_id"] = run_id;
  s["stage"] = stage;
  s["agent_id"] = agent_id;
  s["n_scenarios"] = scenarios.size();
  std::size_t valid = 0;
  std::map<std::string, std::size_t> reasons;
  std::map<std::string, std::array<std::size_t, 2>> per_category;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& cat = per_category[scenarios[i].category];
    if (records[i].valid) {
      ++valid;
      ++cat[0];
    } else {
      ++reasons[records[i].reason];
      ++cat[1];
    }
  }
  s["n_valid"] = valid;
  s["n_invalid"] = records.size() - valid;
  s["invalid_reasons"] = reasons;
  nlohmann::ordered_json cats = nlohmann::ordered_json::object();
  for (const auto& [name, counts] : per_category) {
    cats[name] = {{"n_valid", counts[0]}, {"n_invalid", counts[1]}};
  }
  s["categories"] = std::move(cats);
  auto ids = nlohmann::ordered_json::array();
  for (const auto& sc : scenarios) ids.push_back(sc.scenario_id);
  s["scenario_ids"] = std::move(ids);
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------

AgentConfig agent_config_from_json(const nlohmann::json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ValidationError("agent config must be a JSON object");
  AgentConfig a;
  try {
    a.kind = j.value("kind", std::string{"synthetic"});
    a.id = j.value("id", std::string{});
    a.preset = j.value("preset", std::string{});
    if (j.contains("params")) a.params = j.at("params");
    if (j.contains("noise_seed") && !j.at("noise_seed").is_null()) {
      a.noise_seed = j.at("noise_seed").get<std::uint64_t>();
    }
    if (j.contains("provider") && !j.at("provider").is_null()) {
      a.provider = provider_config_from_json(j.at("provider"));
    } else if (j.contains("provider_file")) {
      a.provider = load_provider_config(
          resolve(j.at("provider_file").get<std::string>(), base_dir));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("agent config: {}", e.what()));
  }
  return a;
}

nlohmann::ordered_json to_json(const AgentConfig& a) {
  nlohmann::ordered_json j;
  j["kind"] = a.kind;
  j["id"] = a.id;
  j["preset"] = a.preset;
  j["params"] = a.params;
  j["noise_seed"] = a.noise_seed ? nlohmann::ordered_json(*a.noise_seed) : nullptr;
  j["provider"] = a.provider ? to_json(*a.provider) : nlohmann::ordered_json(nullptr);
  return j;
}

std::unique_ptr<BuyerAgent> make_agent(const AgentConfig& config, std::uint64_t run_seed,
                                       const Catalog& catalog, AgentDeps deps) {
  const std::uint64_t seed = config.noise_seed.value_or(run_seed);
  if (config.kind == "synthetic") {
    SyntheticAgentParams params;
    if (!config.preset.empty()) {
      const auto* ref = find_preset(config.preset);
      if (!ref) {
        throw ValidationError(fmt::format("unknown synthetic preset '{}'", config.preset));
      }
      params = SyntheticAgentParams::from_beta(ref->beta);
    }
    const SyntheticAgentParams extra = synthetic_params_from_json(config.params);
    for (const auto& [k, v] : extra.coefficients) params.coefficients[k] = v;
    params.fixed_effects = extra.fixed_effects;
    params.utility_overrides = extra.utility_overrides;
    params.title_effects = extra.title_effects;
    params.validate(&catalog);
    std::string id = config.id.empty()
                         ? (config.preset.empty() ? "synthetic" : "synthetic-" + config.preset)
                         : config.id;
    return std::make_unique<SyntheticAgent>(std::move(id), std::move(params), seed);
  }
  if (config.kind == "rule_lowest_price") return std::make_unique<RuleAgent>(Rule::LowestPrice);
  if (config.kind == "rule_highest_rating") {
    return std::make_unique<RuleAgent>(Rule::HighestRating);
  }
  if (config.kind == "rule_oracle") return std::make_unique<RuleAgent>(Rule::Oracle);
  if (config.kind == "uniform_random") {
    return std::make_unique<UniformRandomAgent>(
        seed, config.id.empty() ? "uniform_random" : config.id);
  }
  if (config.kind == "vlm") {
    if (!config.provider) throw ValidationError("vlm agent needs a provider config");
    auto transport = deps.transport ? deps.transport : std::make_shared<NetworkTransport>();
    auto sleeper = deps.sleeper ? deps.sleeper : real_sleeper();
    std::string id = config.id.empty() ? config.provider->model_name : config.id;
    return std::make_unique<VlmAgent>(std::move(id), *config.provider, std::move(transport),
                                      deps.budget, std::move(sleeper));
  }
  throw ValidationError(fmt::format("unknown agent kind '{}'", config.kind));
}

// ---------------------------------------------------------------------------

Suite parse_suite_name(std::string_view text) {
  const std::string s = lower(text);
  if (s == "bb") return Suite::BB;
  if (s == "rs") return Suite::RS;
  if (s == "instr") return Suite::INSTR;
  if (s == "shuffle" || s == "shuffle_only" || s == "shuffle-only") return Suite::SHUFFLE_ONLY;
  throw ValidationError(fmt::format("unknown suite '{}' (expected bb, rs, instr or shuffle)", text));
}

void RunConfig::validate() const {
  if (n < 1) throw ValidationError("run config: n must be >= 1");
  if (parallelism < 1) throw ValidationError("run config: parallelism must be >= 1");
  perturb.validate();
  if (suite == Suite::RS) {
    if (variant.empty()) throw ValidationError("run config: RS suite needs a variant (kind)");
    parse_rationality_kind(variant);
  } else if (suite == Suite::INSTR) {
    if (variant.empty()) throw ValidationError("run config: INSTR suite needs a variant (task)");
    parse_instruction_task(variant);
  }
  if (!title_overrides.empty() && suite != Suite::SHUFFLE_ONLY) {
    throw ValidationError("run config: title_overrides apply to the shuffle suite only");
  }
  if (request_budget && *request_budget == 0) {
    throw ValidationError("run config: request_budget must be >= 1 when set");
  }
  const std::string id = effective_run_id();
  if (id.find('/') != std::string::npos || id == "." || id == "..") {
    throw ValidationError(fmt::format("run config: run_id '{}' is not a plain name", id));
  }
}

std::string RunConfig::effective_run_id() const {
  if (!run_id.empty()) return run_id;
  std::string id = std::string(to_string(suite));
  if (!variant.empty()) id += "-" + dir_name(variant);
  return fmt::format("{}-seed{}", id, seed);
}

RunConfig run_config_from_json(const nlohmann::json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ValidationError("run config must be a JSON object");
  RunConfig c;
  try {
    c.run_id = j.value("run_id", std::string{});
    if (j.contains("suite")) c.suite = parse_suite_name(j.at("suite").get<std::string>());
    c.variant = j.value("variant", std::string{});
    if (j.contains("perturb")) {
      const auto& p = j.at("perturb");
      c.perturb.price_sigma = p.value("price_sigma", c.perturb.price_sigma);
      c.perturb.reviews_sigma = p.value("reviews_sigma", c.perturb.reviews_sigma);
      if (p.contains("rating_alpha_range")) {
        c.perturb.rating_alpha_lo = p.at("rating_alpha_range").at(0).get<double>();
        c.perturb.rating_alpha_hi = p.at("rating_alpha_range").at(1).get<double>();
      }
      if (p.contains("sponsored_count_range")) {
        c.perturb.sponsored_count = {p.at("sponsored_count_range").at(0).get<int>(),
                                     p.at("sponsored_count_range").at(1).get<int>()};
      }
      if (p.contains("scarcity_count_range")) {
        c.perturb.scarcity_count = {p.at("scarcity_count_range").at(0).get<int>(),
                                    p.at("scarcity_count_range").at(1).get<int>()};
      }
    }
    c.categories = j.value("categories", std::vector<std::string>{});
    if (j.contains("agent")) c.agent = agent_config_from_json(j.at("agent"), base_dir);
    c.n = j.value("n", c.n);
    c.seed = j.value("seed", c.seed);
    c.parallelism = j.value("parallelism", c.parallelism);
    c.out = j.value("out", c.out.string());
    if (j.contains("capture_hook") && !j.at("capture_hook").is_null()) {
      c.capture_hook = j.at("capture_hook").get<std::string>();
    }
    c.live = j.value("live", false);
    if (j.contains("request_budget") && !j.at("request_budget").is_null()) {
      c.request_budget = j.at("request_budget").get<std::size_t>();
    }
    if (j.contains("catalog") && !j.at("catalog").get<std::string>().empty()) {
      c.catalog = resolve(j.at("catalog").get<std::string>(), base_dir);
    }
    c.title_overrides =
        j.value("title_overrides", std::map<std::string, std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("run config: {}", e.what()));
  }
  c.validate();
  return c;
}

nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["run_id"] = c.effective_run_id();
  j["suite"] = to_string(c.suite);
  j["variant"] = c.variant;
  j["perturb"] = {
      {"price_sigma", c.perturb.price_sigma},
      {"rating_alpha_range", {c.perturb.rating_alpha_lo, c.perturb.rating_alpha_hi}},
      {"reviews_sigma", c.perturb.reviews_sigma},
      {"sponsored_count_range", {c.perturb.sponsored_count.lo, c.perturb.sponsored_count.hi}},
      {"scarcity_count_range", {c.perturb.scarcity_count.lo, c.perturb.scarcity_count.hi}}};
  j["categories"] = c.categories;
  j["agent"] = to_json(c.agent);
  j["n"] = c.n;
  j["seed"] = c.seed;
  j["parallelism"] = c.parallelism;
  j["out"] = c.out.string();
  j["capture_hook"] = c.capture_hook ? nlohmann::ordered_json(*c.capture_hook) : nullptr;
  j["live"] = c.live;
  j["request_budget"] =
      c.request_budget ? nlohmann::ordered_json(*c.request_budget) : nullptr;
  j["catalog"] = c.catalog.string();
  j["title_overrides"] = c.title_overrides;
  return j;
}

RunConfig load_run_config(const fs::path& path) {
  return run_config_from_json(read_json(path), path.parent_path());
}

Catalog load_run_catalog(const RunConfig& config) {
  return load_catalog(config.catalog.empty() ? default_catalog_path() : config.catalog);
}

std::vector<Scenario> generate_scenarios(const RunConfig& config, const Catalog& catalog) {
  config.validate();
  const std::vector<std::string> categories =
      config.categories.empty() ? catalog.categories() : config.categories;
  std::vector<Scenario> out;
  for (const auto& category : categories) {
    const Assortment a = catalog.assortment(category);
    std::vector<Scenario> batch;
    switch (config.suite) {
      case Suite::BB:
        batch = gen_bb_scenarios(a, config.n, config.perturb, config.seed);
        break;
      case Suite::SHUFFLE_ONLY: {
        std::map<std::string, std::string> overrides;
        for (const auto& [id, title] : config.title_overrides) {
          if (catalog.at(id).category == category) overrides.emplace(id, title);
        }
        batch = gen_shuffle_only(a, config.n, config.seed, overrides);
        break;
      }
      case Suite::RS:
        batch = gen_rationality_suite(a, parse_rationality_kind(config.variant), config.n,
                                      config.seed);
        break;
      case Suite::INSTR:
        batch = gen_instruction_suite(a, parse_instruction_task(config.variant), config.n,
                                      config.seed);
        break;
    }
    std::move(batch.begin(), batch.end(), std::back_inserter(out));
  }
  return out;
}

// ---------------------------------------------------------------------------

RunLog RunLog::load(const fs::path& root) {
  RunLog log;
  log.root = root;
  if (!fs::exists(root / "summary.json")) {
    throw ValidationError(fmt::format("{} has no summary.json; the run is incomplete",
                                      root.string()));
  }
  log.config = read_json(root / "config.json");
  log.summary = read_json(root / "summary.json");
  log.run_id = log.summary.value("run_id", std::string{});
  try {
    for (const auto& id : log.summary.at("scenario_ids")) {
      const fs::path dir = root / "scenarios" / dir_name(id.get<std::string>());
      log.scenarios.push_back(scenario_from_json(read_json(dir / "scenario.json")));
      log.records.push_back(choice_from_json(read_json(dir / "choice.json")));
      if (log.records.back().scenario_id != log.scenarios.back().scenario_id) {
        throw ValidationError(fmt::format("{}: choice.json belongs to another scenario",
                                          dir.string()));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("{}: {}", root.string(), e.what()));
  }
  if (log.summary.value("n_scenarios", std::size_t{0}) != log.records.size()) {
    throw ValidationError(fmt::format("{}: summary count disagrees with the tree",
                                      root.string()));
  }
  return log;
}

Catalog RunLog::catalog() const { return parse_catalog_json(read_json(root / "catalog.json")); }

RunLog execute_batch(const fs::path& root, const std::vector<Scenario>& scenarios,
                     const BuyerAgent& agent, const Catalog& catalog,
                     const BatchOptions& options, const nlohmann::json& config_snapshot) {
  if (options.parallelism < 1) throw ValidationError("parallelism must be >= 1");
  options.prompt.validate();
  {
    std::set<std::string_view> seen;
    for (const auto& s : scenarios) {
      if (!seen.insert(s.scenario_id).second) {
        throw ValidationError(fmt::format("duplicate scenario id '{}'", s.scenario_id));
      }
    }
  }

  std::error_code ec;
  fs::create_directories(root / "scenarios", ec);
  if (ec) {
    throw Error(fmt::format("output root {} is not writable: {}", root.string(), ec.message()));
  }
  if (fs::exists(root / "config.json")) {
    const auto existing = read_json(root / "config.json");
    if (comparable(existing) != comparable(config_snapshot)) {
      throw ValidationError(fmt::format(
          "{} already holds a run with a different config; choose another run id",
          root.string()));
    }
  }
  write_json(root / "config.json", config_snapshot);
  write_json(root / "catalog.json", catalog.to_json());

  std::vector<ChoiceRecord> records(scenarios.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&] {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= scenarios.size()) return;
      try {
        records[i] = run_one(root, scenarios[i], agent, catalog, options).record;
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
      }
    }
  };

  const std::size_t n_workers = std::min(options.parallelism, std::max<std::size_t>(1, scenarios.size()));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);

  RunLog log;
  log.root = root;
  log.run_id = options.run_id;
  log.config = config_snapshot;
  log.summary = make_summary(options.run_id, options.stage, agent.id(), scenarios, records);
  write_json(root / "summary.json", log.summary);
  log.scenarios = scenarios;
  log.records = std::move(records);
  return log;
}

namespace {

void check_live_gate(const RunConfig& config, bool needs_network, std::string_view who) {
  if (needs_network && !config.live) {
    throw ValidationError(fmt::format(
        "{} needs network access but live=false; pass --live to allow outbound calls", who));
  }
}

}  // namespace

RunLog run_batch(const RunConfig& config, const BuyerAgent& agent, const Catalog& catalog) {
  config.validate();
  check_live_gate(config, agent.requires_network(), fmt::format("agent '{}'", agent.id()));
  const std::vector<Scenario> scenarios = generate_scenarios(config, catalog);
  BatchOptions opt;
  opt.run_id = config.effective_run_id();
  opt.parallelism = config.parallelism;
  opt.capture_hook = config.capture_hook;
  egress::Scope gate(config.live);
  return execute_batch(config.out / opt.run_id, scenarios, agent, catalog, opt,
                       nlohmann::json::parse(to_json(config).dump()));
}

RunLog run_batch(const RunConfig& config) {
  config.validate();
  const Catalog catalog = load_run_catalog(config);
  AgentDeps deps;
  deps.budget = std::make_shared<RequestBudget>(config.request_budget);
  const auto agent = make_agent(config.agent, config.seed, catalog, deps);
  return run_batch(config, *agent, catalog);
}

// ---------------------------------------------------------------------------

nlohmann::ordered_json to_json(const SellerPipelineResult& r) {
  nlohmann::ordered_json j;
  j["run_id"] = r.run_id;
  j["category"] = r.category;
  j["focal_product"] = r.focal_product;
  j["original_title"] = r.original_title;
  j["new_title"] = r.new_title;
  j["baseline"] = to_json(r.baseline);
  j["post"] = to_json(r.post);
  j["ate"] = to_json(r.ate);
  return j;
}

SellerPipelineResult seller_pipeline(const RunConfig& config, const BuyerAgent& buyer,
                                     const SellerAgent& seller, const Catalog& catalog) {
  config.validate();
  if (config.categories.size() != 1) {
    throw ValidationError("seller pipeline runs one category at a time");
  }
  if (config.suite != Suite::SHUFFLE_ONLY) {
    throw ValidationError("seller pipeline uses the shuffle suite");
  }
  check_live_gate(config, buyer.requires_network(), fmt::format("agent '{}'", buyer.id()));
  check_live_gate(config, seller.requires_network(), "the seller agent");
  egress::Scope gate(config.live);

  SellerPipelineResult result;
  result.run_id = config.effective_run_id();
  result.root = config.out / result.run_id;
  result.category = config.categories.front();
  const Assortment a = catalog.assortment(result.category);
  const auto snapshot = nlohmann::json::parse(to_json(config).dump());

  BatchOptions opt;
  opt.run_id = result.run_id;
  opt.parallelism = config.parallelism;
  opt.capture_hook = config.capture_hook;

  // (1) baseline
  const auto baseline_scenarios = gen_shuffle_only(a, config.n, config.seed);
  opt.stage = "baseline";
  const RunLog baseline =
      execute_batch(result.root / "baseline", baseline_scenarios, buyer, catalog, opt, snapshot);
  result.baseline = market_shares(baseline.records, baseline.scenarios);

  // (2) focal draw among positive-share products
  std::vector<std::string> candidates;
  for (const auto& p : result.baseline.products) {
    if (p.count > 0) candidates.push_back(p.product_id);
  }
  if (candidates.empty()) {
    throw Error("baseline run produced no valid choices; cannot pick a focal product");
  }
  auto rng = CounterRng::derive(config.seed, "SELLER", result.category, 0, "focal");
  result.focal_product = candidates[static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(candidates.size()) - 1))];
  const Product& focal = catalog.at(result.focal_product);
  result.original_title = focal.title;

  // (3) seller recommendation, reused on resume
  const fs::path seller_dir = result.root / "seller";
  fs::create_directories(seller_dir);
  const fs::path reply_path = seller_dir / "reply.json";
  std::optional<std::string> title;
  if (fs::exists(reply_path)) {
    const auto saved = read_json(reply_path);
    if (saved.value("focal_product", std::string{}) == result.focal_product) {
      title = saved.at("new_title").get<std::string>();
    }
  }
  if (!title) {
    const RenderedPage page = render_page(baseline_scenarios.front(), catalog);
    SellerRequest req{page, result.focal_product, focal.title,
                      focal.features.empty() ? focal.title : focal.features, result.baseline};
    try {
      SellerReply reply = seller_recommend(seller, req, catalog);
      write_json(seller_dir / "raw_response.json", reply.raw);
      title = reply.title;
    } catch (const std::exception& e) {
      write_json(seller_dir / "error.json",
                 {{"focal_product", result.focal_product}, {"error", e.what()}});
      throw;
    }
    write_json(reply_path, {{"focal_product", result.focal_product},
                            {"original_title", result.original_title},
                            {"new_title", *title}});
  }
  result.new_title = *title;

  // (4) post run on identical shuffles
  const auto post_scenarios =
      gen_shuffle_only(a, config.n, config.seed, {{result.focal_product, result.new_title}});
  opt.stage = "post";
  const RunLog post =
      execute_batch(result.root / "post", post_scenarios, buyer, catalog, opt, snapshot);
  result.post = market_shares(post.records, post.scenarios);

  // (5) effect
  result.ate = seller_ate(baseline.records, baseline.scenarios, post.records, post.scenarios,
                          result.focal_product);
  write_json(result.root / "ate.json", to_json(result.ate));
  write_json(result.root / "result.json", to_json(result));
  return result;
}

}  // namespace agentmart
