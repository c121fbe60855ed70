#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "agentmart/choice_model.hpp"
#include "agentmart/choice_record.hpp"
#include "agentmart/scenario.hpp"

namespace agentmart {

struct ProductShare {
  std::string product_id;
  double share = 0.0;
  double std_error = 0.0;  // sqrt(share (1 - share) / n_valid)
  std::size_t count = 0;
};

// Selection shares over valid records of one category. Products appear in
// the assortment's canonical order, zero-count products included.
struct ShareTable {
  std::string agent_id;
  std::string category;
  std::vector<ProductShare> products;
  std::size_t n_valid = 0;
  std::size_t n_invalid = 0;

  const ProductShare* find(std::string_view product_id) const noexcept;
  // Highest count, first in canonical order on ties. Empty if n_valid == 0.
  std::string modal_product() const;
};

// Records are matched to scenarios by scenario_id. Throws ValidationError if
// the scenarios span more than one category or a record has no scenario.
ShareTable market_shares(const std::vector<ChoiceRecord>& records,
                         const std::vector<Scenario>& scenarios);

struct RateEstimate {
  double rate = 0.0;
  double std_error = 0.0;
  std::size_t failures = 0;
  std::size_t n = 0;
};

// Fraction of records not choosing correct_listing. Invalid records count
// as failures.
RateEstimate failure_rate(const std::vector<ChoiceRecord>& records,
                          const std::vector<Scenario>& scenarios);

struct AteResult {
  std::string focal_product;
  double pre_share = 0.0;
  double post_share = 0.0;
  double delta = 0.0;
  double std_error = 0.0;
  double z_stat = 0.0;
  double p_value = 1.0;
  std::size_t n_pre = 0;
  std::size_t n_post = 0;
};

// Two-proportion z-test on the focal product's share. Refuses with
// ValidationError("unpaired runs ...") unless the i-th pre and post
// scenarios show the same permutation for every i.
AteResult seller_ate(const std::vector<ChoiceRecord>& pre,
                     const std::vector<Scenario>& pre_scenarios,
                     const std::vector<ChoiceRecord>& post,
                     const std::vector<Scenario>& post_scenarios,
                     std::string_view focal_product);

struct ShareDelta {
  std::string product_id;
  double share_a = 0.0;
  double share_b = 0.0;
  double delta = 0.0;  // share_b - share_a
  double std_error = 0.0;
};

struct RunComparison {
  std::string category;
  std::vector<ShareDelta> deltas;
  std::string modal_a;
  std::string modal_b;
  bool modal_flip = false;
};

RunComparison compare_runs(const ShareTable& a, const ShareTable& b);

// Unweighted mean with the standard error of the mean (sample sd / sqrt k).
// std_error is NaN for fewer than two values.
struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t k = 0;
};
MeanEstimate mean_with_se(std::span<const double> values);

double two_sided_p(double z) noexcept;

nlohmann::ordered_json to_json(const ShareTable& table);
ShareTable share_table_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const RateEstimate& rate);
nlohmann::ordered_json to_json(const AteResult& ate);
nlohmann::ordered_json to_json(const RunComparison& cmp);

// Plot-ready CSV. Every file starts with "# run_id=<id> seed=<seed>".
struct PlotHeader {
  std::string run_id;
  std::uint64_t seed = 0;
};

struct AteRow {
  std::string category;
  std::string model;
  double delta = 0.0;
  double std_error = 0.0;
};

// product,share,se,n
void emit_plot_data(const std::filesystem::path& path, const ShareTable& table,
                    const PlotHeader& header);
// row,col,prob (1-based, row-major)
void emit_plot_data(const std::filesystem::path& path, const Heatmap& heatmap,
                    const PlotHeader& header);
// category,model,delta,se
void emit_plot_data(const std::filesystem::path& path, const std::vector<AteRow>& rows,
                    const PlotHeader& header);

}  // namespace agentmart
