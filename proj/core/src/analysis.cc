#include "ealearn/analysis.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "ealearn/error.h"
#include "text_util.h"

namespace ealearn {
namespace {

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  return out;
}

}  // namespace

void validate(const LearningCurve& curve) {
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    const CurvePoint& p = curve.points[i];
    if (!std::isfinite(p.score) || !std::isfinite(p.queries)) {
      throw ValidationError("learning curve has a non-finite point");
    }
    if (i > 0 && !(p.queries > curve.points[i - 1].queries)) {
      throw ValidationError("learning curve queries must strictly increase");
    }
  }
}

double auc(std::span<const CurvePoint> points, double total_queries) {
  if (points.empty()) throw ValidationError("AUC of an empty curve");
  if (!(total_queries > 0.0) || total_queries < points.back().queries) {
    throw ValidationError(fmt::format(
        "total_queries {} must be positive and cover the last point at {}",
        total_queries, points.back().queries));
  }
  double area = 0.0;
  CurvePoint prev{0.0, points.front().score};
  for (const CurvePoint& p : points) {
    area += 0.5 * (p.score + prev.score) * (p.queries - prev.queries);
    prev = p;
  }
  area += prev.score * (total_queries - prev.queries);
  return area / total_queries;
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) {
    throw ValidationError("Welch's t-test needs at least two values per sample");
  }
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ma = mean_of(a);
  const double mb = mean_of(b);
  const double va = sample_variance(a, ma) / na;
  const double vb = sample_variance(b, mb) / nb;
  WelchResult r;
  const double se2 = va + vb;
  if (se2 == 0.0) {
    if (ma == mb) return r;
    r.t = ma > mb ? std::numeric_limits<double>::infinity()
                  : -std::numeric_limits<double>::infinity();
    r.degrees_of_freedom = na + nb - 2.0;
    r.p_value = 0.0;
    return r;
  }
  r.t = (ma - mb) / std::sqrt(se2);
  r.degrees_of_freedom =
      se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  const boost::math::students_t dist(r.degrees_of_freedom);
  r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t)));
  r.p_value = std::clamp(r.p_value, 0.0, 1.0);
  return r;
}

AggregateTable aggregate(
    const std::map<std::string, std::vector<double>>& auc_by_heuristic,
    double significance_level) {
  AggregateTable table;
  // "bald@0.2" is compared with "rnd@0.2"; plain labels with "rnd".
  auto reference_of = [](const std::string& label) {
    const auto at = label.find('@');
    return at == std::string::npos ? std::string("rnd")
                                   : "rnd" + label.substr(at);
  };
  std::vector<std::string> missing;
  for (const auto& [name, aucs] : auc_by_heuristic) {
    if (aucs.empty()) continue;
    AggregateRow row;
    row.heuristic = name;
    row.runs = aucs.size();
    row.mean_auc = mean_of(aucs);
    row.std_auc = std::sqrt(sample_variance(aucs, row.mean_auc));
    const std::string ref_name = reference_of(name);
    const auto ref = auc_by_heuristic.find(ref_name);
    const bool have_ref = ref != auc_by_heuristic.end() && ref->second.size() >= 2;
    if (!have_ref) {
      if (std::find(missing.begin(), missing.end(), ref_name) == missing.end()) {
        missing.push_back(ref_name);
      }
    } else if (name != ref_name && aucs.size() >= 2) {
      const WelchResult w = welch_t_test(aucs, ref->second);
      row.p_vs_random = w.p_value;
      row.significant = w.p_value < significance_level;
    }
    table.rows.push_back(row);
  }
  if (!missing.empty()) {
    std::string names;
    for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
    table.notice = "no reference group with at least two runs (" + names +
                   "); significance flags omitted for those rows";
  }
  return table;
}

void write_aggregate_csv(const AggregateTable& table,
                         const std::filesystem::path& path) {
  auto out = open_output(path);
  out << "heuristic,runs,mean_auc,std_auc,p_vs_rnd,significant\n";
  for (const AggregateRow& r : table.rows) {
    out << detail::csv_field(r.heuristic) << ',' << r.runs << ','
        << fmt::format("{:.6f},{:.6f},", r.mean_auc, r.std_auc)
        << (r.p_vs_random ? fmt::format("{:.6g}", *r.p_vs_random) : "") << ','
        << (r.p_vs_random ? (r.significant ? "1" : "0") : "") << '\n';
  }
}

std::string format_aggregate_text(const AggregateTable& table) {
  std::size_t width = 9;
  for (const AggregateRow& r : table.rows) width = std::max(width, r.heuristic.size());
  std::string out = fmt::format("{:<{}}  {:>4}  {:>20}  {:>10}\n", "heuristic",
                                width, "runs", "AUC (mean ± std)", "p vs rnd");
  for (const AggregateRow& r : table.rows) {
    const std::string cell = fmt::format("{:.4f} ± {:.4f}{}", r.mean_auc,
                                         r.std_auc, r.significant ? "*" : "");
    out += fmt::format("{:<{}}  {:>4}  {:>20}  {:>10}\n", r.heuristic, width,
                       r.runs, cell,
                       r.p_vs_random ? fmt::format("{:.3g}", *r.p_vs_random) : "-");
  }
  if (!table.notice.empty()) out += fmt::format("note: {}\n", table.notice);
  return out;
}

void write_curves_csv(std::span<const LearningCurve> curves,
                      const std::filesystem::path& path) {
  auto out = open_output(path);
  out << "heuristic,seed,queries,score\n";
  for (const LearningCurve& c : curves) {
    for (const CurvePoint& p : c.points) {
      out << detail::csv_field(c.heuristic) << ',' << c.seed << ','
          << fmt::format("{:.17g},{:.17g}", p.queries, p.score) << '\n';
    }
  }
}

}  // namespace ealearn
