#pragma once

// Conditional logit with product fixed effects.
//
//   U_ij = beta_pos' x_ij + sum_tag beta_tag 1{tag_ij}
//          + beta_price ln(price_ij) + beta_rating rating_ij
//          + beta_reviews ln(reviews_ij) + theta_j + eps_ij
//
// with eps_ij Type I extreme value, so P(j | i) = softmax_j(U_i.).
// Position dummies cover the top row and columns 1-3; the bottom row and
// column 4 are the omitted categories.

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "agentmart/catalog.hpp"
#include "agentmart/choice_record.hpp"
#include "agentmart/error.hpp"
#include "agentmart/scenario.hpp"

namespace agentmart {

enum class Covariate : std::size_t {
  Row1,
  Col1,
  Col2,
  Col3,
  Sponsored,
  OverallPick,
  Scarcity,
  LnPrice,
  Rating,
  LnReviews,
};

inline constexpr std::size_t kNumCovariates = 10;
inline constexpr std::array<std::string_view, kNumCovariates> kCovariateNames = {
    "row1",         "col1",     "col2",    "col3",   "sponsored",
    "overall_pick", "scarcity", "ln_price", "rating", "ln_reviews"};

using CovariateVector = std::array<double, kNumCovariates>;

constexpr std::size_t index(Covariate c) noexcept {
  return static_cast<std::size_t>(c);
}
std::optional<Covariate> covariate_from_name(std::string_view name) noexcept;

// Covariates of one listing as displayed. Used both when simulating
// choices and when building the estimation design.
CovariateVector listing_covariates(const ListingState& listing);

struct UtilityParams {
  CovariateVector beta{};
  // Missing products have theta = 0.
  std::map<std::string, double, std::less<>> theta;

  double coefficient(Covariate c) const noexcept { return beta[index(c)]; }
  double utility(const ListingState& listing) const;
};

// Choice probabilities in the scenario's listing order; sum to 1.
std::vector<double> predict_probs(const UtilityParams& params,
                                  const Scenario& scenario);
std::vector<double> softmax(std::span<const double> utilities);

// ---------------------------------------------------------------------------
// Design dataset

struct DesignRow {
  std::string choice_set_id;
  std::string product_id;
  CovariateVector x{};
  int fe_index = -1;  // -1: category reference product, theta pinned to 0
  bool chosen = false;
};

struct DesignData {
  std::vector<std::string> fe_products;  // slot -> product id
  std::vector<DesignRow> rows;           // consecutive rows per choice set
  std::size_t n_choice_sets = 0;
  std::size_t n_invalid = 0;  // records with valid=false, excluded
  std::size_t n_dropped = 0;  // malformed choice sets, excluded
};

// Emits 8 rows per valid record. Categories are pooled; the first product of
// each category in catalog order is the fixed-effect reference.
DesignData build_design(const std::vector<ChoiceRecord>& records,
                        const std::vector<Scenario>& scenarios,
                        const Catalog& catalog);

void write_design_csv(const std::filesystem::path& path, const DesignData& data);
DesignData read_design_csv(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Generic conditional-logit likelihood over variable-size choice sets.

struct ChoiceData {
  std::vector<std::string> names;        // one per parameter / column of x
  Eigen::MatrixXd x;                     // alternatives x parameters
  std::vector<std::size_t> set_offsets;  // n_sets + 1 row offsets
  std::vector<std::size_t> chosen;       // chosen row per set
  std::vector<std::string> set_ids;      // optional, for diagnostics

  std::size_t n_sets() const noexcept { return chosen.size(); }
  std::size_t n_params() const noexcept { return names.size(); }
};

// Columns: the 10 shared covariates, then one dummy per fixed-effect slot.
ChoiceData to_choice_data(const DesignData& design);

struct LikelihoodEval {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;  // empty unless requested
};

// Stable log-sum-exp; throws ValidationError naming the offending row on a
// non-finite covariate.
LikelihoodEval log_likelihood(const Eigen::VectorXd& params,
                              const ChoiceData& data, bool with_hessian = true);

struct FitOptions {
  double tol = 1e-8;  // on the Euclidean gradient norm
  int max_iter = 100;
  double ridge_on_singular = 1e-6;
  // Any |parameter| beyond this is treated as complete separation.
  double separation_bound = 20.0;
};

struct LogitFit {
  std::vector<std::string> names;
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance;
  Eigen::VectorXd std_errors;
  double log_lik = 0.0;
  double null_log_lik = 0.0;
  double pseudo_r2 = 0.0;
  std::size_t n_obs = 0;
  std::size_t n_choice_sets = 0;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
  bool ridge_used = false;
  std::vector<double> log_lik_path;  // accepted iterates
  // Fixed effects past the separation bound. Their estimates and standard
  // errors are meaningless; the shared coefficients are not affected.
  std::vector<std::string> diverged;

  std::optional<std::size_t> find(std::string_view name) const noexcept;
  double estimate(std::string_view name) const;
  double std_error(std::string_view name) const;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double gradient_norm)
      : Error(what), gradient_norm_(gradient_norm) {}
  double gradient_norm() const noexcept { return gradient_norm_; }

 private:
  double gradient_norm_;
};

class SeparationError : public ValidationError {
 public:
  SeparationError(const std::string& what, std::string covariate)
      : ValidationError(what), covariate_(std::move(covariate)) {}
  const std::string& covariate() const noexcept { return covariate_; }

 private:
  std::string covariate_;
};

// Newton-Raphson with step halving and a ridge fallback on singular
// information.
// Parameters named "theta:<product_id>" are product fixed effects.
bool is_fixed_effect(std::string_view name) noexcept;

LogitFit fit(const ChoiceData& data, const FitOptions& opts = {});

// Shared coefficients and fixed effects of a fit over a build_design dataset.
UtilityParams to_utility_params(const LogitFit& fit, const DesignData& design);

// Table-style report: estimates, SEs, two-sided normal p-values, stars at
// 0.05 / 0.01 / 0.001, fit diagnostics.
nlohmann::ordered_json fit_report(const LogitFit& fit, const DesignData& design);
std::string significance_stars(double p_value);

// ---------------------------------------------------------------------------
// Counterfactuals

// New selection probability after moving covariate z by delta_z: the odds
// p / (1 - p) scale by exp(beta_z * delta_z).
double prob_shift(double baseline_p, double beta_z, double delta_z);

// Multiplicative price change lambda that holds utility fixed when a feature
// worth beta_z * delta_z is added: lambda = exp(-beta_z * delta_z / beta_price).
double price_equivalent(double beta_z, double delta_z, double beta_price);

// Selection probability of one product placed in each cell of the grid,
// with every other attribute equal. [row][column], 0-based.
using Heatmap = std::array<std::array<double, kGridColumns>, kGridRows>;
Heatmap position_heatmap(const CovariateVector& beta);

}  // namespace agentmart
