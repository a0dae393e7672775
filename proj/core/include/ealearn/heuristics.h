#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ealearn/graph_metrics.h"
#include "ealearn/labels.h"
#include "ealearn/model.h"

namespace ealearn {

enum class RankingKind { kDegree, kBetweenness, kAvc };

std::optional<RankingKind> parse_ranking_kind(std::string_view heuristic);
std::string_view ranking_kind_name(RankingKind kind);

// Structural rankings computed once on the initial graphs.
struct StaticRankings {
  std::optional<NodeRanking> degree;
  std::optional<NodeRanking> betweenness;
  std::optional<NodeRanking> avc;

  // Throws ValidationError if the ranking was not computed.
  const NodeRanking& get(RankingKind kind) const;
};

StaticRankings compute_static_rankings(const KnowledgeGraphPair& pair,
                                       std::span<const RankingKind> kinds);

struct SelectorContext {
  const NodeSet* pool = nullptr;
  const LabelState* labels = nullptr;
  // Null until the model has been trained for the first time.
  const ModelSnapshot* snapshot = nullptr;
  const StaticRankings* rankings = nullptr;
  std::span<const PrexpRecord> history;
  std::size_t budget = 0;
  // Stream for the randomized selectors (rnd, esccn clustering, bald masks).
  std::uint64_t seed = 0;
};

// Uniform sample of min(b, |pool|) distinct pool nodes.
QueryBatch select_random(const SelectorContext& ctx, std::uint64_t seed);

// The first b ranking entries still in the pool. Throws ValidationError if a
// pool node is missing from the ranking.
QueryBatch select_static(const SelectorContext& ctx, const NodeRanking& ranking);

// Greedy k-center in representation space (L2). Centers start at both
// endpoints of every found alignment; each pick joins the centers. Falls back
// to the degree ranking without a snapshot or found alignment.
QueryBatch select_coreset(const SelectorContext& ctx);

// Seeded k-means++ followed by Lloyd iterations. Returns a cluster id per row.
// Deterministic given the seed; ties go to the lowest cluster id.
std::vector<int> kmeans(const Matrix& points, int clusters, int max_iterations,
                        std::uint64_t seed);

// Largest-remainder apportionment of `total` proportional to `weights`, with
// per-entry capacities; overflow from saturated entries is re-apportioned
// among the rest by the same rule. Remainder ties go to the lower index.
std::vector<std::size_t> apportion(std::size_t total,
                                   std::span<const double> weights,
                                   std::span<const std::size_t> capacity);

struct EsccnParams {
  int n_clusters = 10;
  RankingKind inner = RankingKind::kDegree;
  int max_iterations = 50;
};

// Clusters all node representations jointly, gives cluster c a share of the
// budget proportional to 1 / (1 + labeled nodes in c), and fills each share
// with the inner ranking restricted to the cluster.
QueryBatch select_esccn(const SelectorContext& ctx, const EsccnParams& params);

// H(mean distribution) - mean(H(distribution_t)) over the rows of a
// runs x classes matrix.
double bald_score(const Matrix& distributions);

// BALD scores of `nodes` from `runs` dropout passes at `temperature`.
std::vector<double> bald_scores(const ModelSnapshot& snapshot,
                                std::span<const NodeRef> nodes, int runs,
                                double temperature, std::uint64_t seed);

struct BaldParams {
  int runs = 25;
  double temperature = 0.5;
};

// Highest BALD score first. Throws ValidationError when runs < 2.
QueryBatch select_bald(const SelectorContext& ctx, const BaldParams& params);

struct GaussianFit {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 means a point mass
};

GaussianFit fit_gaussian(std::span<const double> samples);

// P_match(S <= x) - P_excl(S >= x). Point masses use step functions.
double prexp_score(double x, const GaussianFit& match,
                   const GaussianFit& exclusive);

struct PrexpParams {
  double threshold = 0.0;
  RankingKind fallback = RankingKind::kDegree;
  int min_samples_per_class = 5;
};

// Pool nodes scoring above the threshold, best first, then the fallback
// ranking over the remaining pool.
QueryBatch select_prexp(const SelectorContext& ctx, const PrexpParams& params);

using ParamMap = std::map<std::string, std::string>;

class Selector {
 public:
  virtual ~Selector() = default;
  virtual std::string_view name() const = 0;
  virtual QueryBatch select(const SelectorContext& ctx) const = 0;
  // Rankings that must be present in the context.
  virtual std::vector<RankingKind> rankings_needed() const = 0;
};

// The heuristic names accepted by make_selector.
const std::vector<std::string>& heuristic_names();

// Builds a selector from its name (rnd|deg|betw|avc|cs|esccn|bald|prexp) and
// a flat parameter map. Unknown names, unknown keys and unparsable values
// throw ValidationError.
std::unique_ptr<Selector> make_selector(std::string_view name,
                                        const ParamMap& params);

}  // namespace ealearn
