#include "agentmart/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "agentmart/csv.hpp"
#include "agentmart/error.hpp"

namespace agentmart {

namespace {

using ScenarioIndex = std::map<std::string_view, const Scenario*>;

ScenarioIndex index_scenarios(const std::vector<Scenario>& scenarios) {
  ScenarioIndex idx;
  for (const auto& s : scenarios) idx.emplace(s.scenario_id, &s);
  return idx;
}

const Scenario& scenario_of(const ScenarioIndex& idx, const ChoiceRecord& r) {
  auto it = idx.find(r.scenario_id);
  if (it == idx.end()) {
    throw ValidationError(
        fmt::format("record for scenario '{}' has no matching scenario", r.scenario_id));
  }
  return *it->second;
}

double binomial_se(double p, std::size_t n) {
  if (n == 0) return 0.0;
  return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

std::ofstream open_plot_file(const std::filesystem::path& path, const PlotHeader& header) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  out << "# run_id=" << header.run_id << " seed=" << header.seed << "\n";
  return out;
}

std::string num(double v) { return fmt::format("{:.10g}", v); }

nlohmann::ordered_json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

const ProductShare* ShareTable::find(std::string_view product_id) const noexcept {
  for (const auto& p : products) {
    if (p.product_id == product_id) return &p;
  }
  return nullptr;
}

std::string ShareTable::modal_product() const {
  const ProductShare* best = nullptr;
  for (const auto& p : products) {
    if (p.count > 0 && (best == nullptr || p.count > best->count)) best = &p;
  }
  return best ? best->product_id : std::string{};
}

ShareTable market_shares(const std::vector<ChoiceRecord>& records,
                         const std::vector<Scenario>& scenarios) {
  if (scenarios.empty()) throw ValidationError("market_shares: no scenarios");
  ShareTable t;
  t.category = scenarios.front().category;
  for (const auto& s : scenarios) {
    if (s.category != t.category) {
      throw ValidationError(fmt::format(
          "market_shares: records span categories '{}' and '{}'", t.category, s.category));
    }
  }
  for (const auto& l : scenarios.front().listings) {
    t.products.push_back(ProductShare{l.product_id, 0.0, 0.0, 0});
  }
  const auto idx = index_scenarios(scenarios);
  for (const auto& r : records) {
    scenario_of(idx, r);
    if (t.agent_id.empty()) t.agent_id = r.agent_id;
    if (!r.valid) {
      ++t.n_invalid;
      continue;
    }
    auto it = std::find_if(t.products.begin(), t.products.end(), [&](const ProductShare& p) {
      return p.product_id == *r.chosen_product;
    });
    if (it == t.products.end()) {
      throw ValidationError(fmt::format("chosen product '{}' is not in category '{}'",
                                        *r.chosen_product, t.category));
    }
    ++it->count;
    ++t.n_valid;
  }
  for (auto& p : t.products) {
    p.share = t.n_valid ? static_cast<double>(p.count) / static_cast<double>(t.n_valid) : 0.0;
    p.std_error = binomial_se(p.share, t.n_valid);
  }
  return t;
}

RateEstimate failure_rate(const std::vector<ChoiceRecord>& records,
                          const std::vector<Scenario>& scenarios) {
  const auto idx = index_scenarios(scenarios);
  RateEstimate r;
  for (const auto& rec : records) {
    const Scenario& s = scenario_of(idx, rec);
    if (!s.correct_listing) {
      throw ValidationError(fmt::format(
          "scenario '{}' has no correct_listing; failure rates need RS or INSTR scenarios",
          s.scenario_id));
    }
    ++r.n;
    if (!rec.valid || rec.chosen_product != s.correct_listing) ++r.failures;
  }
  if (r.n > 0) {
    r.rate = static_cast<double>(r.failures) / static_cast<double>(r.n);
    r.std_error = binomial_se(r.rate, r.n);
  }
  return r;
}

double two_sided_p(double z) noexcept { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

AteResult seller_ate(const std::vector<ChoiceRecord>& pre,
                     const std::vector<Scenario>& pre_scenarios,
                     const std::vector<ChoiceRecord>& post,
                     const std::vector<Scenario>& post_scenarios,
                     std::string_view focal_product) {
  if (pre_scenarios.size() != post_scenarios.size()) {
    throw ValidationError(fmt::format("unpaired runs: {} pre scenarios vs {} post scenarios",
                                      pre_scenarios.size(), post_scenarios.size()));
  }
  for (std::size_t i = 0; i < pre_scenarios.size(); ++i) {
    if (pre_scenarios[i].permutation() != post_scenarios[i].permutation()) {
      throw ValidationError(fmt::format(
          "unpaired runs: trial {} shows different product positions ('{}' vs '{}')", i,
          pre_scenarios[i].scenario_id, post_scenarios[i].scenario_id));
    }
  }
  const ShareTable a = market_shares(pre, pre_scenarios);
  const ShareTable b = market_shares(post, post_scenarios);
  const ProductShare* fa = a.find(focal_product);
  const ProductShare* fb = b.find(focal_product);
  if (!fa || !fb) {
    throw ValidationError(fmt::format("focal product '{}' is not in the assortment",
                                      focal_product));
  }
  AteResult r;
  r.focal_product = std::string(focal_product);
  r.pre_share = fa->share;
  r.post_share = fb->share;
  r.delta = r.post_share - r.pre_share;
  r.n_pre = a.n_valid;
  r.n_post = b.n_valid;
  const double var = (r.n_pre ? r.pre_share * (1 - r.pre_share) / r.n_pre : 0.0) +
                     (r.n_post ? r.post_share * (1 - r.post_share) / r.n_post : 0.0);
  r.std_error = std::sqrt(var);
  if (r.std_error > 0) {
    r.z_stat = r.delta / r.std_error;
    r.p_value = two_sided_p(r.z_stat);
  } else {
    r.z_stat = 0.0;
    r.p_value = r.delta == 0.0 ? 1.0 : 0.0;
  }
  return r;
}

RunComparison compare_runs(const ShareTable& a, const ShareTable& b) {
  if (a.category != b.category) {
    throw ValidationError(fmt::format("compare_runs: categories differ ('{}' vs '{}')",
                                      a.category, b.category));
  }
  if (a.products.size() != b.products.size()) {
    throw ValidationError("compare_runs: product sets differ");
  }
  RunComparison c;
  c.category = a.category;
  for (const auto& pa : a.products) {
    const ProductShare* pb = b.find(pa.product_id);
    if (!pb) {
      throw ValidationError(fmt::format("compare_runs: product '{}' missing from second run",
                                        pa.product_id));
    }
    ShareDelta d;
    d.product_id = pa.product_id;
    d.share_a = pa.share;
    d.share_b = pb->share;
    d.delta = pb->share - pa.share;
    d.std_error = std::sqrt(pa.std_error * pa.std_error + pb->std_error * pb->std_error);
    c.deltas.push_back(std::move(d));
  }
  c.modal_a = a.modal_product();
  c.modal_b = b.modal_product();
  c.modal_flip = c.modal_a != c.modal_b;
  return c;
}

MeanEstimate mean_with_se(std::span<const double> values) {
  MeanEstimate m;
  m.k = values.size();
  if (m.k == 0) throw ValidationError("mean_with_se: no values");
  m.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(m.k);
  if (m.k < 2) {
    m.std_error = std::numeric_limits<double>::quiet_NaN();
    return m;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - m.mean) * (v - m.mean);
  m.std_error = std::sqrt(ss / static_cast<double>(m.k - 1)) / std::sqrt(static_cast<double>(m.k));
  return m;
}

nlohmann::ordered_json to_json(const ShareTable& t) {
  nlohmann::ordered_json j;
  j["agent_id"] = t.agent_id;
  j["category"] = t.category;
  j["n_valid"] = t.n_valid;
  j["n_invalid"] = t.n_invalid;
  auto products = nlohmann::ordered_json::array();
  for (const auto& p : t.products) {
    products.push_back({{"product_id", p.product_id},
                        {"share", p.share},
                        {"std_error", p.std_error},
                        {"count", p.count}});
  }
  j["products"] = std::move(products);
  return j;
}

ShareTable share_table_from_json(const nlohmann::json& j) {
  try {
    ShareTable t;
    t.agent_id = j.at("agent_id").get<std::string>();
    t.category = j.at("category").get<std::string>();
    t.n_valid = j.at("n_valid").get<std::size_t>();
    t.n_invalid = j.at("n_invalid").get<std::size_t>();
    for (const auto& p : j.at("products")) {
      t.products.push_back(ProductShare{p.at("product_id").get<std::string>(),
                                        p.at("share").get<double>(),
                                        p.at("std_error").get<double>(),
                                        p.at("count").get<std::size_t>()});
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("share table: {}", e.what()));
  }
}

nlohmann::ordered_json to_json(const RateEstimate& r) {
  return {{"rate", r.rate}, {"std_error", r.std_error}, {"failures", r.failures}, {"n", r.n}};
}

nlohmann::ordered_json to_json(const AteResult& a) {
  nlohmann::ordered_json j;
  j["focal_product"] = a.focal_product;
  j["pre_share"] = a.pre_share;
  j["post_share"] = a.post_share;
  j["delta"] = a.delta;
  j["std_error"] = a.std_error;
  j["z_stat"] = a.z_stat;
  j["p_value"] = a.p_value;
  j["n_pre"] = a.n_pre;
  j["n_post"] = a.n_post;
  return j;
}

nlohmann::ordered_json to_json(const RunComparison& c) {
  nlohmann::ordered_json j;
  j["category"] = c.category;
  auto deltas = nlohmann::ordered_json::array();
  for (const auto& d : c.deltas) {
    deltas.push_back({{"product_id", d.product_id},
                      {"share_a", d.share_a},
                      {"share_b", d.share_b},
                      {"delta", d.delta},
                      {"std_error", finite_or_null(d.std_error)}});
  }
  j["deltas"] = std::move(deltas);
  j["modal_a"] = c.modal_a;
  j["modal_b"] = c.modal_b;
  j["modal_flip"] = c.modal_flip;
  return j;
}

void emit_plot_data(const std::filesystem::path& path, const ShareTable& t,
                    const PlotHeader& header) {
  auto out = open_plot_file(path, header);
  out << "product,share,se,n\n";
  for (const auto& p : t.products) {
    out << csv::join({p.product_id, num(p.share), num(p.std_error), std::to_string(t.n_valid)})
        << "\n";
  }
}

void emit_plot_data(const std::filesystem::path& path, const Heatmap& h,
                    const PlotHeader& header) {
  auto out = open_plot_file(path, header);
  out << "row,col,prob\n";
  for (int r = 0; r < kGridRows; ++r) {
    for (int c = 0; c < kGridColumns; ++c) {
      out << (r + 1) << "," << (c + 1) << "," << num(h[r][c]) << "\n";
    }
  }
}

void emit_plot_data(const std::filesystem::path& path, const std::vector<AteRow>& rows,
                    const PlotHeader& header) {
  auto out = open_plot_file(path, header);
  out << "category,model,delta,se\n";
  for (const auto& r : rows) {
    out << csv::join({r.category, r.model, num(r.delta), num(r.std_error)}) << "\n";
  }
}

}  // namespace agentmart
