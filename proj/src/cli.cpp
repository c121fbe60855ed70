#include "agentmart/cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "CLI11.hpp"

#include "agentmart/analysis.hpp"
#include "agentmart/choice_model.hpp"
#include "agentmart/runner.hpp"
#include "agentmart/scenario_gen.hpp"
#include "agentmart/seller.hpp"
#include "agentmart/server.hpp"

namespace agentmart {

namespace fs = std::filesystem;

namespace {

std::atomic<bool> g_stop_requested{false};

extern "C" void on_stop_signal(int) { g_stop_requested.store(true); }

void write_output(const std::optional<std::string>& path, const nlohmann::ordered_json& j,
                  std::ostream& out) {
  if (!path) {
    out << j.dump(2) << "\n";
    return;
  }
  const fs::path p(*path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error(fmt::format("cannot write {}", p.string()));
  f << j.dump(2) << "\n";
  out << "wrote " << p.string() << "\n";
}

// Flag values that override a config file. Unset flags leave it alone.
struct RunFlags {
  std::optional<std::string> config;
  std::optional<std::string> suite;
  std::optional<std::string> variant;
  std::vector<std::string> categories;
  std::optional<std::size_t> n;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> parallelism;
  bool live = false;
  std::optional<std::string> out;
  std::optional<std::string> run_id;
  std::optional<std::string> agent;
  std::optional<std::string> preset;
  std::optional<std::uint64_t> noise_seed;
  std::optional<std::string> provider;
  std::optional<std::string> capture_hook;
  std::optional<std::size_t> budget;
  std::optional<std::string> catalog;
};

void add_run_flags(CLI::App* app, RunFlags& f, bool with_agent) {
  app->add_option("--config", f.config, "RunConfig JSON file");
  app->add_option("--suite", f.suite, "bb | rs | instr | shuffle");
  app->add_option("--kind,--variant", f.variant,
                  "RS kind (price_discount:0.05, price_random:low, rating_bump, "
                  "rating_random:high) or INSTR task (budget:25, color:pink, brand:X)");
  app->add_option("--category", f.categories, "category name; repeatable");
  app->add_option("--n", f.n, "scenarios per category");
  app->add_option("--seed", f.seed, "master seed");
  app->add_option("--catalog", f.catalog, "catalog CSV or JSON");
  app->add_option("--out", f.out, "output directory");
  if (!with_agent) return;
  app->add_option("--parallelism", f.parallelism, "maximum in-flight agent calls");
  app->add_flag("--live", f.live, "allow network calls to model providers");
  app->add_option("--run-id", f.run_id, "run identifier (directory name)");
  app->add_option("--agent", f.agent,
                  "synthetic | rule_lowest_price | rule_highest_rating | rule_oracle | "
                  "uniform_random | vlm");
  app->add_option("--preset", f.preset,
                  "synthetic coefficients: claude-sonnet-4 | gpt-4.1 | gemini-2.5-flash");
  app->add_option("--noise-seed", f.noise_seed, "seed of the agent's own randomness");
  app->add_option("--provider", f.provider, "provider config JSON for vlm agents");
  app->add_option("--capture-hook", f.capture_hook, "command run as <cmd> <html> <png>");
  app->add_option("--budget", f.budget, "maximum provider requests for the run");
}

RunConfig build_run_config(const RunFlags& f) {
  RunConfig c;
  if (f.config) {
    c = load_run_config(*f.config);
  } else {
    c.agent.kind = "synthetic";
    c.agent.preset = "claude-sonnet-4";
  }
  if (f.suite) c.suite = parse_suite_name(*f.suite);
  if (f.variant) c.variant = *f.variant;
  if (!f.categories.empty()) c.categories = f.categories;
  if (f.n) c.n = *f.n;
  if (f.seed) c.seed = *f.seed;
  if (f.parallelism) c.parallelism = *f.parallelism;
  if (f.live) c.live = true;
  if (f.out) c.out = *f.out;
  if (f.run_id) c.run_id = *f.run_id;
  if (f.agent) {
    if (*f.agent != c.agent.kind) c.agent = AgentConfig{};
    c.agent.kind = *f.agent;
  }
  if (f.preset) c.agent.preset = *f.preset;
  if (f.noise_seed) c.agent.noise_seed = *f.noise_seed;
  if (f.provider) c.agent.provider = load_provider_config(*f.provider);
  if (f.capture_hook) c.capture_hook = *f.capture_hook;
  if (f.budget) c.request_budget = *f.budget;
  if (f.catalog) c.catalog = *f.catalog;
  c.validate();
  return c;
}

std::string batch_file_name(const RunConfig& c, std::string_view category) {
  if (c.variant.empty()) return scenario_file_name(c.suite, category, c.seed);
  std::string variant = c.variant;
  for (char& ch : variant) {
    if (ch == ':') ch = '-';
  }
  return fmt::format("scenarios_{}-{}_{}_{}.jsonl", to_string(c.suite), variant,
                     category_slug(category), c.seed);
}

int cmd_generate(const RunFlags& f, std::ostream& out) {
  RunConfig c = build_run_config(f);
  const Catalog catalog = load_run_catalog(c);
  const fs::path dir = f.out ? fs::path(*f.out) : fs::path("scenarios");
  fs::create_directories(dir);
  const auto categories = c.categories.empty() ? catalog.categories() : c.categories;
  for (const auto& category : categories) {
    RunConfig one = c;
    one.categories = {category};
    const auto scenarios = generate_scenarios(one, catalog);
    const fs::path path = dir / batch_file_name(c, category);
    write_scenarios_jsonl(path, scenarios);
    out << fmt::format("wrote {} scenarios to {}\n", scenarios.size(), path.string());
  }
  return 0;
}

int cmd_serve(const std::vector<std::string>& files, const std::string& bind,
              const std::optional<std::string>& catalog_path, std::ostream& out) {
  auto catalog = std::make_shared<const Catalog>(
      load_catalog(catalog_path ? fs::path(*catalog_path) : default_catalog_path()));
  std::vector<Scenario> scenarios;
  for (const auto& f : files) {
    auto batch = read_scenarios_jsonl(f);
    std::move(batch.begin(), batch.end(), std::back_inserter(scenarios));
  }
  auto store = std::make_shared<const ScenarioStore>(catalog, std::move(scenarios));
  auto server = serve(store, parse_bind(bind));
  out << fmt::format("serving {} scenarios on {}\n", store->size(), server->base_url())
      << std::flush;
  g_stop_requested.store(false);
  std::signal(SIGINT, on_stop_signal);
  std::signal(SIGTERM, on_stop_signal);
  while (!g_stop_requested.load()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  server->stop();
  return 0;
}

int cmd_run(const RunFlags& f, std::ostream& out) {
  const RunConfig c = build_run_config(f);
  const RunLog log = run_batch(c);
  out << fmt::format("run {} written to {}\n", c.effective_run_id(), log.root.string());
  out << log.summary.dump(2) << "\n";
  return 0;
}

int cmd_estimate(const std::optional<std::string>& design_path,
                 const std::optional<std::string>& run_dir,
                 const std::optional<std::string>& out_path,
                 const std::optional<std::string>& design_out,
                 const std::optional<std::string>& heatmap_out, std::ostream& out) {
  if (design_path.has_value() == run_dir.has_value()) {
    throw ValidationError("estimate needs exactly one of --design or --run");
  }
  DesignData design;
  nlohmann::ordered_json run_counts;
  std::string run_id = "design";
  std::uint64_t seed = 0;
  if (design_path) {
    design = read_design_csv(*design_path);
  } else {
    const RunLog log = RunLog::load(*run_dir);
    design = build_design(log.records, log.scenarios, log.catalog());
    run_counts = {{"run_id", log.run_id},
                  {"n_valid", log.summary.value("n_valid", 0)},
                  {"n_invalid", log.summary.value("n_invalid", 0)}};
    run_id = log.run_id;
    seed = log.config.value("seed", std::uint64_t{0});
  }
  if (design_out) write_design_csv(*design_out, design);
  const LogitFit result = fit(to_choice_data(design));
  nlohmann::ordered_json report = fit_report(result, design);
  if (!run_counts.is_null()) report["run"] = run_counts;
  if (heatmap_out) {
    emit_plot_data(*heatmap_out, position_heatmap(to_utility_params(result, design).beta),
                   PlotHeader{run_id, seed});
  }
  write_output(out_path, report, out);
  return 0;
}

std::map<std::string, std::vector<std::size_t>> by_category(const RunLog& log) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < log.scenarios.size(); ++i) {
    groups[log.scenarios[i].category].push_back(i);
  }
  return groups;
}

template <typename T>
std::vector<T> pick(const std::vector<T>& items, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(items[i]);
  return out;
}

int cmd_analyze(const std::string& run_dir, const std::optional<std::string>& out_dir,
                std::ostream& out) {
  const RunLog log = RunLog::load(run_dir);
  const fs::path dir = out_dir ? fs::path(*out_dir) : fs::path(run_dir) / "analysis";
  const PlotHeader header{log.run_id, log.config.value("seed", std::uint64_t{0})};
  nlohmann::ordered_json report;
  report["run_id"] = log.run_id;
  auto categories = nlohmann::ordered_json::array();
  for (const auto& [category, idx] : by_category(log)) {
    const auto scenarios = pick(log.scenarios, idx);
    const auto records = pick(log.records, idx);
    nlohmann::ordered_json entry;
    const ShareTable shares = market_shares(records, scenarios);
    entry["shares"] = to_json(shares);
    emit_plot_data(dir / fmt::format("shares_{}.csv", category_slug(category)), shares, header);
    const bool graded = std::all_of(scenarios.begin(), scenarios.end(),
                                    [](const Scenario& s) { return s.correct_listing.has_value(); });
    if (graded) entry["failure_rate"] = to_json(failure_rate(records, scenarios));
    categories.push_back(std::move(entry));
  }
  report["categories"] = std::move(categories);
  write_output((dir / "analysis.json").string(), report, out);
  return 0;
}

int cmd_seller_loop(RunFlags f, const std::string& seller_kind,
                    const std::optional<std::string>& stub_title,
                    const std::optional<std::string>& seller_provider, std::ostream& out) {
  if (!f.suite) f.suite = "shuffle";
  if (!f.n && !f.config) f.n = 200;
  RunConfig c = build_run_config(f);
  if (c.categories.size() != 1) {
    throw ValidationError("seller-loop needs exactly one --category");
  }
  const Catalog catalog = load_run_catalog(c);
  AgentDeps deps;
  deps.budget = std::make_shared<RequestBudget>(c.request_budget);
  const auto buyer = make_agent(c.agent, c.seed, catalog, deps);
  std::unique_ptr<SellerAgent> seller;
  if (seller_kind == "stub") {
    seller = stub_title ? std::make_unique<StubSeller>("FINAL_TITLE: " + *stub_title)
                        : std::make_unique<StubSeller>(StubSeller::unchanged());
  } else if (seller_kind == "llm") {
    if (!seller_provider) throw ValidationError("--seller llm needs --seller-provider");
    seller = std::make_unique<LlmSeller>(load_provider_config(*seller_provider),
                                         std::make_shared<NetworkTransport>(), deps.budget);
  } else {
    throw ValidationError(fmt::format("unknown seller '{}' (expected stub or llm)", seller_kind));
  }
  const SellerPipelineResult r = seller_pipeline(c, *buyer, *seller, catalog);
  emit_plot_data(r.root / "ate.csv",
                 std::vector<AteRow>{{r.category, buyer->id(), r.ate.delta, r.ate.std_error}},
                 PlotHeader{r.run_id, c.seed});
  out << to_json(r).dump(2) << "\n";
  return 0;
}

int cmd_compare(const std::string& a_dir, const std::string& b_dir,
                const std::optional<std::string>& out_path, std::ostream& out) {
  const RunLog a = RunLog::load(a_dir);
  const RunLog b = RunLog::load(b_dir);
  const auto ga = by_category(a);
  const auto gb = by_category(b);
  nlohmann::ordered_json report = nlohmann::ordered_json::array();
  for (const auto& [category, idx_a] : ga) {
    auto it = gb.find(category);
    if (it == gb.end()) continue;
    const ShareTable sa = market_shares(pick(a.records, idx_a), pick(a.scenarios, idx_a));
    const ShareTable sb = market_shares(pick(b.records, it->second), pick(b.scenarios, it->second));
    report.push_back(to_json(compare_runs(sa, sb)));
  }
  if (report.empty()) throw ValidationError("the two runs share no category");
  write_output(out_path, report, out);
  return 0;
}

}  // namespace

int cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Agentic storefront experiments: generate, serve, run, estimate, analyze."};
  app.name(args.empty() ? "agentmart" : args.front());
  app.require_subcommand(1);

  RunFlags gen_flags, run_flags, seller_flags;
  auto* generate = app.add_subcommand("generate", "write scenario batch files");
  add_run_flags(generate, gen_flags, false);

  std::vector<std::string> serve_files;
  std::string bind = "127.0.0.1:8080";
  std::optional<std::string> serve_catalog;
  auto* serve_cmd = app.add_subcommand("serve", "serve scenarios as storefront pages");
  serve_cmd->add_option("--scenarios", serve_files, "scenario .jsonl files")->required();
  serve_cmd->add_option("--bind", bind, "host:port")->capture_default_str();
  serve_cmd->add_option("--catalog", serve_catalog, "catalog CSV or JSON");

  auto* run = app.add_subcommand("run", "execute a batch against one agent");
  add_run_flags(run, run_flags, true);

  std::optional<std::string> design, run_dir, est_out, design_out, heatmap_out;
  auto* estimate = app.add_subcommand("estimate", "fit the conditional logit");
  estimate->add_option("--design", design, "design CSV");
  estimate->add_option("--run", run_dir, "run directory");
  estimate->add_option("--out", est_out, "fit report JSON (default: stdout)");
  estimate->add_option("--design-out", design_out, "also write the design CSV");
  estimate->add_option("--heatmap", heatmap_out, "also write position heatmap CSV");

  std::string analyze_run;
  std::optional<std::string> analyze_out;
  auto* analyze = app.add_subcommand("analyze", "shares, failure rates and plot data");
  analyze->add_option("--run", analyze_run, "run directory")->required();
  analyze->add_option("--out", analyze_out, "output directory (default: <run>/analysis)");

  std::string seller_kind = "stub";
  std::optional<std::string> stub_title, seller_provider;
  auto* seller = app.add_subcommand("seller-loop", "seller description-change experiment");
  add_run_flags(seller, seller_flags, true);
  seller->add_option("--seller", seller_kind, "stub | llm")->capture_default_str();
  seller->add_option("--stub-title", stub_title, "title returned by the stub seller");
  seller->add_option("--seller-provider", seller_provider, "provider config for --seller llm");

  std::string cmp_a, cmp_b;
  std::optional<std::string> cmp_out;
  auto* compare = app.add_subcommand("compare", "compare market shares of two runs");
  compare->add_option("--a", cmp_a, "first run directory")->required();
  compare->add_option("--b", cmp_b, "second run directory")->required();
  compare->add_option("--out", cmp_out, "comparison JSON (default: stdout)");

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  for (const auto& a : args) argv.push_back(a.c_str());
  if (argv.empty()) argv.push_back("agentmart");
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (generate->parsed()) return cmd_generate(gen_flags, out);
    if (serve_cmd->parsed()) return cmd_serve(serve_files, bind, serve_catalog, out);
    if (run->parsed()) return cmd_run(run_flags, out);
    if (estimate->parsed()) {
      return cmd_estimate(design, run_dir, est_out, design_out, heatmap_out, out);
    }
    if (analyze->parsed()) return cmd_analyze(analyze_run, analyze_out, out);
    if (seller->parsed()) {
      return cmd_seller_loop(seller_flags, seller_kind, stub_title, seller_provider, out);
    }
    if (compare->parsed()) return cmd_compare(cmp_a, cmp_b, cmp_out, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "failed: " << e.what() << "\n";
    return 2;
  }
  err << app.help();
  return 1;
}

int cli(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  return cli(args, std::cout, std::cerr);
}

}  // namespace agentmart
