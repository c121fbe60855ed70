#include "agentmart/choice_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

#include "agentmart/csv.hpp"

namespace agentmart {

std::optional<Covariate> covariate_from_name(std::string_view name) noexcept {
  for (std::size_t k = 0; k < kNumCovariates; ++k) {
    if (kCovariateNames[k] == name) return static_cast<Covariate>(k);
  }
  return std::nullopt;
}

CovariateVector listing_covariates(const ListingState& l) {
  CovariateVector x{};
  x[index(Covariate::Row1)] = l.position.row == 1 ? 1.0 : 0.0;
  x[index(Covariate::Col1)] = l.position.column == 1 ? 1.0 : 0.0;
  x[index(Covariate::Col2)] = l.position.column == 2 ? 1.0 : 0.0;
  x[index(Covariate::Col3)] = l.position.column == 3 ? 1.0 : 0.0;
  x[index(Covariate::Sponsored)] = l.sponsored ? 1.0 : 0.0;
  x[index(Covariate::OverallPick)] = l.overall_pick ? 1.0 : 0.0;
  x[index(Covariate::Scarcity)] = l.scarcity_remaining ? 1.0 : 0.0;
  x[index(Covariate::LnPrice)] = std::log(l.price);
  x[index(Covariate::Rating)] = l.rating;
  x[index(Covariate::LnReviews)] = std::log(static_cast<double>(l.num_reviews));
  return x;
}

double UtilityParams::utility(const ListingState& listing) const {
  const CovariateVector x = listing_covariates(listing);
  double u = 0.0;
  for (std::size_t k = 0; k < kNumCovariates; ++k) u += beta[k] * x[k];
  if (auto it = theta.find(listing.product_id); it != theta.end()) u += it->second;
  return u;
}

std::vector<double> softmax(std::span<const double> utilities) {
  std::vector<double> p(utilities.begin(), utilities.end());
  if (p.empty()) return p;
  const double top = *std::max_element(p.begin(), p.end());
  double total = 0.0;
  for (double& v : p) {
    v = std::exp(v - top);
    total += v;
  }
  for (double& v : p) v /= total;
  return p;
}

std::vector<double> predict_probs(const UtilityParams& params,
                                  const Scenario& scenario) {
  std::vector<double> u;
  u.reserve(scenario.listings.size());
  for (const auto& l : scenario.listings) u.push_back(params.utility(l));
  return softmax(u);
}

// ---------------------------------------------------------------------------

DesignData build_design(const std::vector<ChoiceRecord>& records,
                        const std::vector<Scenario>& scenarios,
                        const Catalog& catalog) {
  std::unordered_map<std::string_view, const Scenario*> by_id;
  for (const auto& s : scenarios) by_id.emplace(s.scenario_id, &s);

  struct Kept {
    const ChoiceRecord* record;
    const Scenario* scenario;
  };
  std::vector<Kept> kept;
  DesignData out;
  std::set<std::string, std::less<>> categories;
  for (const auto& r : records) {
    auto it = by_id.find(r.scenario_id);
    if (it == by_id.end()) {
      throw ValidationError(
          fmt::format("choice record references unknown scenario '{}'", r.scenario_id));
    }
    if (!r.valid || !r.chosen_product) {
      ++out.n_invalid;
      continue;
    }
    const Scenario& s = *it->second;
    const auto n_chosen = std::count_if(
        s.listings.begin(), s.listings.end(),
        [&](const ListingState& l) { return l.product_id == *r.chosen_product; });
    if (s.listings.size() != kAssortmentSize || n_chosen != 1) {
      ++out.n_dropped;
      continue;
    }
    kept.push_back({&r, &s});
    categories.insert(s.category);
  }

  std::unordered_map<std::string_view, int> slot;
  for (const auto& category : catalog.categories()) {
    if (!categories.contains(category)) continue;
    const Assortment a = catalog.assortment(category);
    for (std::size_t k = 1; k < a.products.size(); ++k) {
      slot.emplace(a.products[k]->product_id, static_cast<int>(out.fe_products.size()));
      out.fe_products.push_back(a.products[k]->product_id);
    }
  }

  std::unordered_map<std::string, int> id_uses;
  out.rows.reserve(kept.size() * kAssortmentSize);
  for (const auto& [record, scenario] : kept) {
    const int use = id_uses[scenario->scenario_id]++;
    const std::string set_id = use == 0 ? scenario->scenario_id
                                        : fmt::format("{}#{}", scenario->scenario_id, use);
    for (const auto& l : scenario->listings) {
      if (!catalog.find(l.product_id)) {
        throw ValidationError(fmt::format("scenario {} lists unknown product '{}'",
                                          scenario->scenario_id, l.product_id));
      }
      if (!(l.price > 0.0) || l.num_reviews < 1) {
        throw ValidationError(fmt::format(
            "scenario {}: listing {} needs price > 0 and reviews >= 1",
            scenario->scenario_id, l.product_id));
      }
      DesignRow row;
      row.choice_set_id = set_id;
      row.product_id = l.product_id;
      row.x = listing_covariates(l);
      auto it = slot.find(l.product_id);
      row.fe_index = it == slot.end() ? -1 : it->second;
      row.chosen = l.product_id == *record->chosen_product;
      out.rows.push_back(std::move(row));
    }
    ++out.n_choice_sets;
  }
  return out;
}

void write_design_csv(const std::filesystem::path& path, const DesignData& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
  out << fmt::format("# n_choice_sets={} n_invalid={} n_dropped={}\n",
                     data.n_choice_sets, data.n_invalid, data.n_dropped);
  csv::Row header = {"choice_set_id", "product_id"};
  for (auto name : kCovariateNames) header.emplace_back(name);
  header.emplace_back("fe_index");
  header.emplace_back("chosen");
  out << csv::join(header) << '\n';
  for (const auto& r : data.rows) {
    csv::Row row = {r.choice_set_id, r.product_id};
    for (double v : r.x) row.push_back(fmt::format("{:.17g}", v));
    row.push_back(std::to_string(r.fe_index));
    row.push_back(r.chosen ? "1" : "0");
    out << csv::join(row) << '\n';
  }
  if (!out) throw Error(fmt::format("write failed for '{}'", path.string()));
}

DesignData read_design_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot open design '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto rows = csv::parse(text);
  if (rows.empty()) throw ValidationError("design: empty file");
  const std::size_t width = 2 + kNumCovariates + 2;
  if (rows.front().size() != width || rows.front()[0] != "choice_set_id") {
    throw ValidationError("design: unexpected header");
  }

  DesignData data;
  // Recover tallies from the leading comment line when present.
  if (text.starts_with("#")) {
    std::istringstream meta(text.substr(1, text.find('\n')));
    std::string token;
    while (meta >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos) continue;
      const auto key = token.substr(0, eq);
      const auto value = std::stoull(token.substr(eq + 1));
      if (key == "n_invalid") data.n_invalid = value;
      if (key == "n_dropped") data.n_dropped = value;
    }
  }

  std::string last_set;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i];
    if (f.size() != width) {
      throw ValidationError(fmt::format("design row {}: expected {} fields", i, width));
    }
    DesignRow r;
    r.choice_set_id = f[0];
    r.product_id = f[1];
    try {
      for (std::size_t k = 0; k < kNumCovariates; ++k) r.x[k] = std::stod(f[2 + k]);
      r.fe_index = std::stoi(f[2 + kNumCovariates]);
    } catch (const std::exception&) {
      throw ValidationError(fmt::format("design row {}: malformed number", i));
    }
    r.chosen = f[3 + kNumCovariates] == "1";
    if (r.fe_index >= 0) {
      const auto slot = static_cast<std::size_t>(r.fe_index);
      if (data.fe_products.size() <= slot) data.fe_products.resize(slot + 1);
      if (!data.fe_products[slot].empty() && data.fe_products[slot] != r.product_id) {
        throw ValidationError(fmt::format("design row {}: fe_index {} reused", i, slot));
      }
      data.fe_products[slot] = r.product_id;
    }
    if (r.choice_set_id != last_set) {
      ++data.n_choice_sets;
      last_set = r.choice_set_id;
    }
    data.rows.push_back(std::move(r));
  }
  return data;
}

// ---------------------------------------------------------------------------

ChoiceData to_choice_data(const DesignData& design) {
  const std::size_t n_fe = design.fe_products.size();
  const std::size_t k = kNumCovariates + n_fe;
  ChoiceData data;
  for (auto name : kCovariateNames) data.names.emplace_back(name);
  for (const auto& p : design.fe_products) data.names.push_back("theta:" + p);
  data.x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(design.rows.size()),
                                 static_cast<Eigen::Index>(k));

  std::optional<std::size_t> chosen;
  auto close_set = [&](std::size_t end) {
    if (data.set_offsets.empty() || data.set_offsets.back() == end) return;
    if (!chosen) {
      throw ValidationError(fmt::format("choice set '{}' has no chosen row",
                                        data.set_ids.back()));
    }
    data.chosen.push_back(*chosen);
    chosen.reset();
  };

  for (std::size_t i = 0; i < design.rows.size(); ++i) {
    const DesignRow& r = design.rows[i];
    if (i == 0 || r.choice_set_id != design.rows[i - 1].choice_set_id) {
      close_set(i);
      data.set_offsets.push_back(i);
      data.set_ids.push_back(r.choice_set_id);
    }
    const auto row = static_cast<Eigen::Index>(i);
    for (std::size_t c = 0; c < kNumCovariates; ++c) {
      data.x(row, static_cast<Eigen::Index>(c)) = r.x[c];
    }
    if (r.fe_index >= 0) {
      if (static_cast<std::size_t>(r.fe_index) >= n_fe) {
        throw ValidationError(fmt::format("design row {}: fe_index out of range", i));
      }
      data.x(row, static_cast<Eigen::Index>(kNumCovariates + r.fe_index)) = 1.0;
    }
    if (r.chosen) {
      if (chosen) {
        throw ValidationError(fmt::format("choice set '{}' has more than one chosen row",
                                          r.choice_set_id));
      }
      chosen = i;
    }
  }
  close_set(design.rows.size());
  data.set_offsets.push_back(design.rows.size());
  return data;
}

namespace {

void check_finite(const ChoiceData& data) {
  if (data.x.allFinite()) return;
  for (Eigen::Index r = 0; r < data.x.rows(); ++r) {
    for (Eigen::Index c = 0; c < data.x.cols(); ++c) {
      if (!std::isfinite(data.x(r, c))) {
        throw ValidationError(fmt::format("non-finite covariate '{}' in design row {}",
                                          data.names[static_cast<std::size_t>(c)], r));
      }
    }
  }
}

}  // namespace

LikelihoodEval log_likelihood(const Eigen::VectorXd& params,
                              const ChoiceData& data, bool with_hessian) {
  const auto k = static_cast<Eigen::Index>(data.n_params());
  if (params.size() != k || data.x.cols() != k) {
    throw ValidationError(fmt::format("parameter vector has {} entries, design has {}",
                                      params.size(), data.x.cols()));
  }
  check_finite(data);

  LikelihoodEval out;
  out.gradient = Eigen::VectorXd::Zero(k);
  if (with_hessian) out.hessian = Eigen::MatrixXd::Zero(k, k);

  const Eigen::VectorXd utility = data.x * params;
  Eigen::VectorXd mean(k);
  for (std::size_t s = 0; s < data.n_sets(); ++s) {
    const auto begin = static_cast<Eigen::Index>(data.set_offsets[s]);
    const auto size = static_cast<Eigen::Index>(data.set_offsets[s + 1]) - begin;
    const auto u = utility.segment(begin, size);
    const double top = u.maxCoeff();
    const Eigen::VectorXd w = (u.array() - top).exp().matrix();
    const double total = w.sum();
    const Eigen::VectorXd p = w / total;
    const auto chosen = static_cast<Eigen::Index>(data.chosen[s]);

    out.value += utility(chosen) - (top + std::log(total));
    const auto block = data.x.middleRows(begin, size);
    mean.noalias() = block.transpose() * p;
    out.gradient += data.x.row(chosen).transpose() - mean;
    if (with_hessian) {
      const Eigen::MatrixXd centered = block.rowwise() - mean.transpose();
      out.hessian.noalias() -=
          centered.transpose() * p.asDiagonal() * centered;
    }
  }
  return out;
}

std::optional<std::size_t> LogitFit::find(std::string_view name) const noexcept {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  return std::nullopt;
}

double LogitFit::estimate(std::string_view name) const {
  if (auto i = find(name)) return params(static_cast<Eigen::Index>(*i));
  throw ValidationError(fmt::format("fit has no parameter '{}'", name));
}

double LogitFit::std_error(std::string_view name) const {
  if (auto i = find(name)) return std_errors(static_cast<Eigen::Index>(*i));
  throw ValidationError(fmt::format("fit has no parameter '{}'", name));
}

namespace {

// Every column must vary inside at least one choice set, otherwise its
// coefficient is not identified.
void check_identified(const ChoiceData& data) {
  for (Eigen::Index c = 0; c < data.x.cols(); ++c) {
    bool varies = false;
    for (std::size_t s = 0; s < data.n_sets() && !varies; ++s) {
      const auto begin = static_cast<Eigen::Index>(data.set_offsets[s]);
      const auto end = static_cast<Eigen::Index>(data.set_offsets[s + 1]);
      for (Eigen::Index r = begin + 1; r < end; ++r) {
        if (data.x(r, c) != data.x(begin, c)) {
          varies = true;
          break;
        }
      }
    }
    if (!varies) {
      const auto& name = data.names[static_cast<std::size_t>(c)];
      throw SeparationError(
          fmt::format("covariate '{}' is constant within every choice set", name),
          name);
    }
  }
}

struct NewtonStep {
  Eigen::VectorXd direction;
  bool ridge = false;
};

NewtonStep newton_direction(const Eigen::MatrixXd& info, const Eigen::VectorXd& grad,
                            double ridge) {
  Eigen::LLT<Eigen::MatrixXd> llt(info);
  if (llt.info() == Eigen::Success) return {llt.solve(grad), false};
  const auto k = info.rows();
  for (double lambda = ridge; lambda < 1e6; lambda *= 10.0) {
    llt.compute(info + lambda * Eigen::MatrixXd::Identity(k, k));
    if (llt.info() == Eigen::Success) return {llt.solve(grad), true};
  }
  throw Error("information matrix is not positive definite even with ridge");
}

}  // namespace

bool is_fixed_effect(std::string_view name) noexcept { return name.starts_with("theta:"); }

LogitFit fit(const ChoiceData& data, const FitOptions& opts) {
  if (data.n_sets() < 1) throw ValidationError("fit needs at least one choice set");
  check_finite(data);
  check_identified(data);

  const auto k = static_cast<Eigen::Index>(data.n_params());
  LogitFit out;
  out.names = data.names;
  out.n_obs = static_cast<std::size_t>(data.x.rows());
  out.n_choice_sets = data.n_sets();
  for (std::size_t s = 0; s < data.n_sets(); ++s) {
    out.null_log_lik -=
        std::log(static_cast<double>(data.set_offsets[s + 1] - data.set_offsets[s]));
  }

  Eigen::VectorXd params = Eigen::VectorXd::Zero(k);
  LikelihoodEval eval = log_likelihood(params, data);
  out.log_lik_path.push_back(eval.value);

  for (out.iterations = 0;; ++out.iterations) {
    out.gradient_norm = eval.gradient.norm();
    if (out.gradient_norm < opts.tol) {
      out.converged = true;
      break;
    }
    if (out.iterations >= opts.max_iter) break;

    const Eigen::MatrixXd info = -eval.hessian;
    const NewtonStep step = newton_direction(info, eval.gradient, opts.ridge_on_singular);
    out.ridge_used = out.ridge_used || step.ridge;

    // Near the optimum the log-likelihood gain falls below rounding error,
    // so a step that loses no more than that is still accepted.
    const double slack =
        64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(eval.value));
    double t = 1.0;
    LikelihoodEval trial;
    Eigen::VectorXd candidate;
    for (;;) {
      candidate = params + t * step.direction;
      trial = log_likelihood(candidate, data, false);
      if (trial.value >= eval.value - slack || t < 1e-12) break;
      t *= 0.5;
    }
    if (trial.value < eval.value - slack) break;  // no ascent possible; report below
    params = candidate;
    eval = log_likelihood(params, data);
    out.log_lik_path.push_back(eval.value);

    // A fixed effect of a product that is never (or always) chosen runs off
    // to infinity while the shared coefficients settle at their limit, so
    // only shared coefficients are fatal here.
    for (Eigen::Index j = 0; j < k; ++j) {
      const auto& name = data.names[static_cast<std::size_t>(j)];
      if (std::abs(params[j]) > opts.separation_bound && !is_fixed_effect(name)) {
        throw SeparationError(
            fmt::format("complete separation: coefficient '{}' diverges", name), name);
      }
    }
  }

  if (!out.converged) {
    throw ConvergenceError(
        fmt::format("Newton did not converge after {} iterations (gradient norm {:.3g})",
                    out.iterations, out.gradient_norm),
        out.gradient_norm);
  }

  out.params = params;
  for (Eigen::Index j = 0; j < k; ++j) {
    if (std::abs(params[j]) > opts.separation_bound) {
      out.diverged.push_back(data.names[static_cast<std::size_t>(j)]);
    }
  }
  out.log_lik = eval.value;
  out.pseudo_r2 = out.null_log_lik != 0.0 ? 1.0 - out.log_lik / out.null_log_lik : 0.0;

  const Eigen::MatrixXd info = -eval.hessian;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  const bool singular = ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
                        ldlt.vectorD().minCoeff() <= 0.0;
  if (singular) {
    out.ridge_used = true;
    ldlt.compute(info + opts.ridge_on_singular * Eigen::MatrixXd::Identity(k, k));
  }
  out.covariance = ldlt.solve(Eigen::MatrixXd::Identity(k, k));
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
  out.std_errors = out.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  return out;
}

UtilityParams to_utility_params(const LogitFit& fit, const DesignData& design) {
  UtilityParams p;
  for (std::size_t c = 0; c < kNumCovariates; ++c) {
    p.beta[c] = fit.estimate(kCovariateNames[c]);
  }
  for (const auto& product : design.fe_products) {
    p.theta[product] = fit.estimate("theta:" + product);
  }
  return p;
}

std::string significance_stars(double p_value) {
  if (p_value < 0.001) return "***";
  if (p_value < 0.01) return "**";
  if (p_value < 0.05) return "*";
  return "";
}

nlohmann::ordered_json fit_report(const LogitFit& fit, const DesignData& design) {
  auto entry = [&](std::size_t i) {
    const double est = fit.params(static_cast<Eigen::Index>(i));
    const double se = fit.std_errors(static_cast<Eigen::Index>(i));
    const double z = se > 0.0 ? est / se : std::numeric_limits<double>::infinity();
    const double p = std::erfc(std::abs(z) / std::sqrt(2.0));
    nlohmann::ordered_json j;
    j["estimate"] = est;
    j["std_error"] = se;
    j["z"] = z;
    j["p_value"] = p;
    j["stars"] = significance_stars(p);
    return j;
  };
  nlohmann::ordered_json report;
  auto coefficients = nlohmann::ordered_json::object();
  auto fixed = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    if (i < kNumCovariates) {
      coefficients[fit.names[i]] = entry(i);
    } else {
      fixed[design.fe_products.at(i - kNumCovariates)] = entry(i);
    }
  }
  report["coefficients"] = std::move(coefficients);
  report["fixed_effects"] = std::move(fixed);
  report["log_lik"] = fit.log_lik;
  report["null_log_lik"] = fit.null_log_lik;
  report["pseudo_r2"] = fit.pseudo_r2;
  report["n_obs"] = fit.n_obs;
  report["n_choice_sets"] = fit.n_choice_sets;
  report["n_invalid"] = design.n_invalid;
  report["n_dropped"] = design.n_dropped;
  report["converged"] = fit.converged;
  report["iterations"] = fit.iterations;
  report["gradient_norm"] = fit.gradient_norm;
  report["ridge_used"] = fit.ridge_used;
  report["diverged_fixed_effects"] = fit.diverged;
  return report;
}

// ---------------------------------------------------------------------------

double prob_shift(double baseline_p, double beta_z, double delta_z) {
  if (!(baseline_p >= 0.0 && baseline_p <= 1.0)) {
    throw ValidationError(fmt::format("baseline probability {} not in [0, 1]", baseline_p));
  }
  if (baseline_p == 0.0 || baseline_p == 1.0) return baseline_p;
  const double odds = baseline_p / (1.0 - baseline_p);
  const double scaled = std::exp(beta_z * delta_z) * odds;
  return scaled / (1.0 + scaled);
}

double price_equivalent(double beta_z, double delta_z, double beta_price) {
  if (beta_price == 0.0) throw ValidationError("beta_price must be non-zero");
  return std::exp(-beta_z * delta_z / beta_price);
}

Heatmap position_heatmap(const CovariateVector& beta) {
  std::array<double, kGridCells> u{};
  for (int cell = 0; cell < kGridCells; ++cell) {
    ListingState l;
    l.position = GridPosition::from_cell(cell);
    l.price = 1.0;
    l.rating = 1.0;
    const CovariateVector x = listing_covariates(l);
    for (auto c : {Covariate::Row1, Covariate::Col1, Covariate::Col2, Covariate::Col3}) {
      u[cell] += beta[index(c)] * x[index(c)];
    }
  }
  const auto p = softmax(u);
  Heatmap grid{};
  for (int cell = 0; cell < kGridCells; ++cell) {
    grid[cell / kGridColumns][cell % kGridColumns] = p[cell];
  }
  return grid;
}

}  // namespace agentmart
