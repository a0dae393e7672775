#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ealearn {

struct CurvePoint {
  double queries = 0.0;
  double score = 0.0;
};

struct LearningCurve {
  std::string heuristic;
  std::uint64_t seed = 0;
  std::string dataset;
  std::vector<CurvePoint> points;
};

// Throws ValidationError unless queries strictly increase and scores are
// finite.
void validate(const LearningCurve& curve);

// Trapezoidal area under the curve prefixed with (0, first score) and with the
// last score carried forward to `total_queries`, divided by `total_queries`.
double auc(std::span<const CurvePoint> points, double total_queries);

struct WelchResult {
  double t = 0.0;
  double degrees_of_freedom = 0.0;
  double p_value = 1.0;  // two-sided
};

// Unequal-variance t-test. Each sample needs at least two values.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

struct AggregateRow {
  std::string heuristic;
  std::size_t runs = 0;
  double mean_auc = 0.0;
  double std_auc = 0.0;  // sample (n - 1) standard deviation
  std::optional<double> p_vs_random;
  bool significant = false;  // p < significance_level vs rnd
};

struct AggregateTable {
  std::vector<AggregateRow> rows;  // sorted by heuristic name
  // Set when the rnd group is missing and flags were omitted.
  std::string notice;
};

inline constexpr double kSignificanceLevel = 0.01;

// AUC samples grouped by heuristic name.
AggregateTable aggregate(const std::map<std::string, std::vector<double>>& auc_by_heuristic,
                         double significance_level = kSignificanceLevel);

void write_aggregate_csv(const AggregateTable& table,
                         const std::filesystem::path& path);
// Column-aligned plain text in the "mean ± std*" style.
std::string format_aggregate_text(const AggregateTable& table);

// Tidy long format: heuristic,seed,queries,score.
void write_curves_csv(std::span<const LearningCurve> curves,
                      const std::filesystem::path& path);

}  // namespace ealearn
