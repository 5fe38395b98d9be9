#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "shopsim/money.hpp"
#include "shopsim/persona.hpp"
#include "shopsim/trajectory.hpp"

namespace shopsim {

// ---- grouping ----

// Dimensions: seller_backend, buyer_backend, product, category, orientation,
// price_condition, guidance_level, post_issue, repeat, seller_gender,
// buyer_gender, seller_persona, buyer_persona, and every trait id
// (assertiveness, price_consciousness, ...). Traits of an inherent persona
// resolve to "inherent". Throws DimensionError for any other name.
std::string dimension_value(const Trajectory& t, std::string_view dimension);
bool is_known_dimension(std::string_view dimension);

using GroupKey = std::vector<std::pair<std::string, std::string>>;  // dimension -> value
std::string group_label(const GroupKey& key);  // "buyer_gender=male,category=Fashion"

struct MetricsRow {
  GroupKey key;
  std::int64_t n_runs = 0;
  std::int64_t purchases = 0;
  std::int64_t refunds = 0;
  double conversion = 0.0;
  std::optional<double> refund_rate;   // refunded / purchased
  std::optional<double> avg_quantity;  // over purchases
  std::optional<double> avg_rating;    // product review, where present
  Money total_revenue;
};

// Completed runs only; failed ones are left out. Rows are sorted by key.
std::vector<MetricsRow> group_metrics(const std::vector<Trajectory>& trajectories,
                                      const std::vector<std::string>& dimensions);

// ---- tests ----

struct ProportionTest {
  double p_a = 0.0;
  double p_b = 0.0;
  double delta = 0.0;  // p_a - p_b
  double z = 0.0;
  double p_two_sided = 1.0;
  bool degenerate = false;  // pooled variance is zero
};

// Pooled two-proportion z-test. Throws AnalysisError for n < 1 or
// successes outside [0, n].
ProportionTest two_proportion_test(std::int64_t successes_a, std::int64_t n_a, std::int64_t successes_b,
                                   std::int64_t n_b);

struct TTest {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
  double t = 0.0;
  double p = 1.0;  // upper tail, H1: mean > 0
  bool degenerate = false;  // n < 2 or zero variance; t and p not computed
};

TTest paired_t_test_one_tailed(const std::vector<double>& deltas);

double normal_cdf(double x);
// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);
// P(T > t) for Student-t with df degrees of freedom.
double student_t_upper_tail(double t, double df);

// ---- demand and elasticity ----

struct ConditionCounts {
  std::int64_t purchases = 0;
  std::int64_t runs = 0;
};
using CountsByCondition = std::map<int, ConditionCounts>;  // keyed by percent

struct DemandPoint {
  PriceCondition condition;
  std::int64_t runs = 0;
  std::int64_t purchases = 0;
  double rate = 0.0;
};

struct DemandCurve {
  std::vector<DemandPoint> points;  // ascending price
  bool monotone = true;             // rate never rises with price
  std::vector<std::string> warnings;
};

DemandCurve demand_curve(const CountsByCondition& counts);
DemandCurve price_demand_curve(const std::vector<Trajectory>& trajectories);

struct ElasticityEstimate {
  std::string product_id;
  std::string group;
  std::optional<double> e_d;  // signed slope
  std::optional<double> intercept;
  int n_conditions = 0;
  bool valid = false;
};

// OLS of ln(rate) on ln(1 + delta); zero rates are dropped.
ElasticityEstimate estimate_elasticity_rates(const std::map<int, double>& rate_by_percent);
ElasticityEstimate estimate_elasticity(const std::map<int, std::int64_t>& purchases_by_percent,
                                       std::int64_t group_size);
ElasticityEstimate estimate_elasticity(const CountsByCondition& counts);

struct PairedProfiles {
  std::string product_id;
  CountsByCondition sensitive;    // trait value 0
  CountsByCondition indifferent;  // trait value 1
};

struct ProductGap {
  std::string product_id;
  double e_sensitive = 0.0;
  double e_indifferent = 0.0;
  double delta = 0.0;  // |e_sensitive| - |e_indifferent|
};

struct ElasticityGap {
  std::vector<ProductGap> products;  // jointly valid ones
  std::size_t skipped = 0;
  double mean_abs_sensitive = 0.0;
  double mean_abs_indifferent = 0.0;
  double mean_delta = 0.0;
  TTest test;
};

// Throws InsufficientDataError when no product is valid in both groups.
ElasticityGap elasticity_gap(const std::vector<PairedProfiles>& profiles);
// Groups by the buyer's value of `trait`; inherent buyers are ignored.
ElasticityGap elasticity_gap(const std::vector<Trajectory>& trajectories,
                             Trait trait = Trait::price_consciousness);

// ---- gender ----

struct GenderGapRow {
  std::string group;
  ConditionCounts male;
  ConditionCounts female;
  ProportionTest test;  // a = male, b = female
};

// Buyer-gender purchase rates per value of `dimension`.
std::vector<GenderGapRow> gender_gap(const std::vector<Trajectory>& trajectories,
                                     std::string_view dimension = "orientation");

// ---- heatmap ----

enum class HeatmapNormalization { grand_mean, row_mean, column_mean };

struct HeatmapMatrix {
  std::vector<std::string> sellers;  // rows
  std::vector<std::string> buyers;   // columns
  std::vector<std::vector<std::optional<double>>> raw;  // dollars; nullopt when the pair has no runs
  std::vector<std::vector<std::optional<double>>> normalized;
  double grand_mean = 0.0;
  HeatmapNormalization normalization = HeatmapNormalization::grand_mean;

  double normalized_sum() const;
};

// Fills `normalized` from `raw`. Absent cells stay absent and do not enter
// any mean.
void normalize_heatmap(HeatmapMatrix& m, HeatmapNormalization mode = HeatmapNormalization::grand_mean);
HeatmapMatrix revenue_heatmap(const std::vector<Trajectory>& trajectories,
                              HeatmapNormalization mode = HeatmapNormalization::grand_mean);
std::string heatmap_svg(const HeatmapMatrix& m);

// ---- guidance ablation ----

struct AblationTable {
  std::vector<int> levels;            // columns
  std::vector<std::string> backends;  // rows, seller backend
  std::map<std::pair<std::string, int>, Money> revenue;
  std::vector<double> average;  // per level, unweighted over backends that have the level
};

AblationTable strategy_ablation(const std::vector<Trajectory>& trajectories);

// ---- output ----

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string str() const;  // RFC 4180 quoting, "\n" line ends
};

std::string format_fixed(double v, int digits);

CsvTable metrics_csv(const std::vector<MetricsRow>& rows, const std::vector<std::string>& dimensions);
CsvTable demand_csv(const DemandCurve& c);
CsvTable elasticity_csv(const ElasticityGap& g);
CsvTable gender_csv(const std::vector<GenderGapRow>& rows);
CsvTable heatmap_csv(const HeatmapMatrix& m);
CsvTable ablation_csv(const AblationTable& t);

void to_json(nlohmann::json& j, const MetricsRow& r);
void to_json(nlohmann::json& j, const ProportionTest& r);
void to_json(nlohmann::json& j, const TTest& r);
void to_json(nlohmann::json& j, const DemandCurve& c);
void to_json(nlohmann::json& j, const ElasticityEstimate& e);
void to_json(nlohmann::json& j, const ElasticityGap& g);
void to_json(nlohmann::json& j, const GenderGapRow& r);
void to_json(nlohmann::json& j, const HeatmapMatrix& m);
void to_json(nlohmann::json& j, const AblationTable& t);

}  // namespace shopsim
