#include "ealearn/heuristics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "ealearn/error.h"
#include "text_util.h"

namespace ealearn {
namespace {

std::size_t batch_size(const SelectorContext& ctx) {
  return std::min(ctx.budget, ctx.pool->size());
}

// Row of `node` in the joint (left rows, then right rows) representation.
Eigen::Index joint_row(const ModelSnapshot& snap, NodeRef node) {
  return node.side == Side::kLeft
             ? static_cast<Eigen::Index>(node.index)
             : snap.representations(Side::kLeft).rows() +
                   static_cast<Eigen::Index>(node.index);
}

Matrix joint_representations(const ModelSnapshot& snap) {
  const Matrix& l = snap.representations(Side::kLeft);
  const Matrix& r = snap.representations(Side::kRight);
  Matrix joint(l.rows() + r.rows(), l.cols());
  joint.topRows(l.rows()) = l;
  joint.bottomRows(r.rows()) = r;
  return joint;
}

double squared_distance(const Matrix& m, Eigen::Index i, Eigen::Index j) {
  return (m.row(i) - m.row(j)).squaredNorm();
}

struct ScoredNode {
  NodeRef node;
  double score;
};

// Best score first, ties by NodeRef.
void sort_by_score(std::vector<ScoredNode>& v) {
  std::sort(v.begin(), v.end(), [](const ScoredNode& a, const ScoredNode& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.node < b.node;
  });
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

std::optional<RankingKind> parse_ranking_kind(std::string_view heuristic) {
  if (heuristic == "deg") return RankingKind::kDegree;
  if (heuristic == "betw") return RankingKind::kBetweenness;
  if (heuristic == "avc") return RankingKind::kAvc;
  return std::nullopt;
}

std::string_view ranking_kind_name(RankingKind kind) {
  switch (kind) {
    case RankingKind::kDegree:
      return "deg";
    case RankingKind::kBetweenness:
      return "betw";
    case RankingKind::kAvc:
      return "avc";
  }
  return "?";
}

const NodeRanking& StaticRankings::get(RankingKind kind) const {
  const std::optional<NodeRanking>* r = nullptr;
  switch (kind) {
    case RankingKind::kDegree:
      r = &degree;
      break;
    case RankingKind::kBetweenness:
      r = &betweenness;
      break;
    case RankingKind::kAvc:
      r = &avc;
      break;
  }
  if (r == nullptr || !r->has_value()) {
    throw ValidationError(fmt::format("static ranking '{}' was not computed",
                                      ranking_kind_name(kind)));
  }
  return **r;
}

StaticRankings compute_static_rankings(const KnowledgeGraphPair& pair,
                                       std::span<const RankingKind> kinds) {
  StaticRankings out;
  for (RankingKind k : kinds) {
    switch (k) {
      case RankingKind::kDegree:
        if (!out.degree) out.degree = degree_ranking(pair);
        break;
      case RankingKind::kBetweenness:
        if (!out.betweenness) out.betweenness = betweenness_ranking(pair);
        break;
      case RankingKind::kAvc:
        if (!out.avc) out.avc = avc_ranking(pair);
        break;
    }
  }
  return out;
}

QueryBatch select_random(const SelectorContext& ctx, std::uint64_t seed) {
  std::vector<NodeRef> pool = ctx.pool->to_vector();
  const std::size_t b = batch_size(ctx);
  Rng rng(seed);
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t j = i + uniform_index(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(b);
  return pool;
}

QueryBatch select_static(const SelectorContext& ctx,
                         const NodeRanking& ranking) {
  const NodeSet& pool = *ctx.pool;
  const std::size_t b = batch_size(ctx);
  QueryBatch out;
  out.reserve(b);
  std::size_t covered = 0;
  for (const RankedNode& r : ranking.entries()) {
    if (!pool.contains(r.node)) continue;
    ++covered;
    if (out.size() < b) out.push_back(r.node);
  }
  if (covered != pool.size()) {
    throw ValidationError(fmt::format(
        "ranking covers {} of {} pool nodes", covered, pool.size()));
  }
  return out;
}

QueryBatch select_coreset(const SelectorContext& ctx) {
  const LabelState& labels = *ctx.labels;
  if (ctx.snapshot == nullptr || labels.found_alignments.empty()) {
    return select_static(ctx, ctx.rankings->get(RankingKind::kDegree));
  }
  const ModelSnapshot& snap = *ctx.snapshot;
  const Matrix joint = joint_representations(snap);

  std::vector<Eigen::Index> centers;
  for (const AlignmentPair& p : labels.found_alignments) {
    centers.push_back(joint_row(snap, {Side::kLeft, p.left}));
    centers.push_back(joint_row(snap, {Side::kRight, p.right}));
  }
  std::sort(centers.begin(), centers.end());
  centers.erase(std::unique(centers.begin(), centers.end()), centers.end());

  std::vector<NodeRef> pool = ctx.pool->to_vector();
  std::vector<double> nearest(pool.size(),
                              std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const Eigen::Index row = joint_row(snap, pool[i]);
    for (Eigen::Index c : centers) {
      nearest[i] = std::min(nearest[i], squared_distance(joint, row, c));
    }
  }

  const std::size_t b = batch_size(ctx);
  std::vector<char> taken(pool.size(), 0);
  QueryBatch out;
  out.reserve(b);
  while (out.size() < b) {
    std::size_t best = pool.size();
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (taken[i]) continue;
      if (best == pool.size() || nearest[i] > nearest[best]) best = i;
    }
    taken[best] = 1;
    out.push_back(pool[best]);
    const Eigen::Index center = joint_row(snap, pool[best]);
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (taken[i]) continue;
      nearest[i] = std::min(
          nearest[i], squared_distance(joint, joint_row(snap, pool[i]), center));
    }
  }
  return out;
}

std::vector<int> kmeans(const Matrix& points, int clusters, int max_iterations,
                        std::uint64_t seed) {
  if (clusters < 1) throw ValidationError("n_clusters must be at least 1");
  const Eigen::Index n = points.rows();
  std::vector<int> assignment(static_cast<std::size_t>(n), 0);
  if (n == 0) return assignment;
  const int k = static_cast<int>(std::min<Eigen::Index>(clusters, n));
  Rng rng(seed);

  // k-means++ seeding.
  Matrix centroids(k, points.cols());
  std::vector<double> d2(static_cast<std::size_t>(n),
                         std::numeric_limits<double>::infinity());
  Eigen::Index first = static_cast<Eigen::Index>(uniform_index(rng, n));
  centroids.row(0) = points.row(first);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = (points.row(i) - centroids.row(c - 1)).squaredNorm();
      d2[i] = std::min(d2[i], d);
      total += d2[i];
    }
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double target = uniform_real(rng) * total;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        target -= d2[i];
        if (target < 0.0 && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    }
    centroids.row(c) = points.row(pick);
  }

  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = iter == 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (points.row(i) - centroids.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double d = (points.row(i) - centroids.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assignment[i] != best) {
        assignment[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    Matrix sums = Matrix::Zero(k, points.cols());
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assignment[i]) += points.row(i);
      ++counts[assignment[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centroids.row(c) = sums.row(c) / static_cast<double>(counts[c]);
      }
    }
  }
  return assignment;
}

std::vector<std::size_t> apportion(std::size_t total,
                                   std::span<const double> weights,
                                   std::span<const std::size_t> capacity) {
  const std::size_t n = weights.size();
  std::vector<std::size_t> alloc(n, 0);
  std::vector<char> open(n, 0);
  std::size_t total_capacity = 0;
  for (std::size_t i = 0; i < n; ++i) {
    open[i] = capacity[i] > 0 && weights[i] > 0.0;
    if (open[i]) total_capacity += capacity[i];
  }
  std::size_t remaining = std::min(total, total_capacity);
  while (remaining > 0) {
    double weight_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (open[i]) weight_sum += weights[i];
    }
    std::vector<std::size_t> share(n, 0);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t given = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!open[i]) continue;
      const double exact = static_cast<double>(remaining) * weights[i] / weight_sum;
      share[i] = static_cast<std::size_t>(std::floor(exact));
      given += share[i];
      remainders.emplace_back(exact - std::floor(exact), i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; given < remaining; ++r) {
      ++share[remainders[r % remainders.size()].second];
      ++given;
    }
    std::size_t overflow = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!open[i]) continue;
      const std::size_t spare = capacity[i] - alloc[i];
      const std::size_t use = std::min(spare, share[i]);
      alloc[i] += use;
      overflow += share[i] - use;
      if (alloc[i] == capacity[i]) open[i] = 0;
    }
    remaining = overflow;
  }
  return alloc;
}

QueryBatch select_esccn(const SelectorContext& ctx, const EsccnParams& params) {
  if (params.n_clusters < 1) {
    throw ValidationError("n_clusters must be at least 1");
  }
  const NodeRanking& inner = ctx.rankings->get(params.inner);
  if (ctx.snapshot == nullptr) return select_static(ctx, inner);

  const ModelSnapshot& snap = *ctx.snapshot;
  const Matrix joint = joint_representations(snap);
  const std::vector<int> cluster =
      kmeans(joint, params.n_clusters, params.max_iterations, ctx.seed);
  const int k = cluster.empty()
                    ? 1
                    : *std::max_element(cluster.begin(), cluster.end()) + 1;

  std::vector<std::size_t> labeled(k, 0);
  std::vector<std::size_t> in_pool(k, 0);
  for (Side s : {Side::kLeft, Side::kRight}) {
    const auto rows = snap.representations(s).rows();
    for (EntityId e = 0; e < rows; ++e) {
      const NodeRef node{s, e};
      const int c = cluster[joint_row(snap, node)];
      if (ctx.labels->labeled.contains(node)) ++labeled[c];
      if (ctx.pool->contains(node)) ++in_pool[c];
    }
  }
  std::vector<double> weight(k);
  for (int c = 0; c < k; ++c) weight[c] = 1.0 / (1.0 + static_cast<double>(labeled[c]));
  const std::vector<std::size_t> quota =
      apportion(batch_size(ctx), weight, in_pool);

  std::vector<QueryBatch> per_cluster(k);
  std::size_t covered = 0;
  for (const RankedNode& r : inner.entries()) {
    if (!ctx.pool->contains(r.node)) continue;
    ++covered;
    const int c = cluster[joint_row(snap, r.node)];
    if (per_cluster[c].size() < quota[c]) per_cluster[c].push_back(r.node);
  }
  if (covered != ctx.pool->size()) {
    throw ValidationError("inner ranking does not cover the pool");
  }
  QueryBatch out;
  for (const QueryBatch& b : per_cluster) out.insert(out.end(), b.begin(), b.end());
  return out;
}

double bald_score(const Matrix& distributions) {
  const Eigen::Index runs = distributions.rows();
  if (runs == 0) return 0.0;
  Eigen::RowVectorXd mean = distributions.colwise().mean();
  double mean_entropy = 0.0;
  for (Eigen::Index t = 0; t < runs; ++t) {
    const auto row = distributions.row(t);
    mean_entropy += entropy(std::span<const double>(row.data(), row.size()));
  }
  mean_entropy /= static_cast<double>(runs);
  return entropy(std::span<const double>(mean.data(), mean.size())) -
         mean_entropy;
}

std::vector<double> bald_scores(const ModelSnapshot& snapshot,
                                std::span<const NodeRef> nodes, int runs,
                                double temperature, std::uint64_t seed) {
  if (runs < 2) {
    throw ValidationError("BALD needs at least 2 dropout runs");
  }
  // Bounded memory: queries are processed in chunks, each with its own passes.
  constexpr std::size_t kChunk = 512;
  std::vector<double> scores(nodes.size(), 0.0);
  // Without dropout every pass is identical and the score is exactly zero.
  if (snapshot.config().dropout_rate == 0.0) return scores;
  Rng rng(seed);
  for (std::size_t begin = 0; begin < nodes.size(); begin += kChunk) {
    const std::size_t end = std::min(nodes.size(), begin + kChunk);
    const auto chunk = nodes.subspan(begin, end - begin);
    std::vector<std::vector<double>> mean(chunk.size());
    std::vector<double> mean_entropy(chunk.size(), 0.0);
    for_each_dropout_pass(
        snapshot, chunk, runs, temperature, rng,
        [&](int, std::size_t q, std::span<const double> probs) {
          if (mean[q].empty()) mean[q].assign(probs.size(), 0.0);
          for (std::size_t j = 0; j < probs.size(); ++j) mean[q][j] += probs[j];
          mean_entropy[q] += entropy(probs);
        });
    for (std::size_t q = 0; q < chunk.size(); ++q) {
      for (double& p : mean[q]) p /= runs;
      scores[begin + q] = entropy(mean[q]) - mean_entropy[q] / runs;
    }
  }
  return scores;
}

QueryBatch select_bald(const SelectorContext& ctx, const BaldParams& params) {
  if (params.runs < 2) {
    throw ValidationError("BALD needs at least 2 dropout runs");
  }
  if (ctx.snapshot == nullptr) {
    return select_static(ctx, ctx.rankings->get(RankingKind::kDegree));
  }
  const std::vector<NodeRef> pool = ctx.pool->to_vector();
  const std::vector<double> scores = bald_scores(
      *ctx.snapshot, pool, params.runs, params.temperature, ctx.seed);
  std::vector<ScoredNode> scored;
  scored.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) scored.push_back({pool[i], scores[i]});
  sort_by_score(scored);
  QueryBatch out;
  const std::size_t b = batch_size(ctx);
  for (std::size_t i = 0; i < b; ++i) out.push_back(scored[i].node);
  return out;
}

GaussianFit fit_gaussian(std::span<const double> samples) {
  GaussianFit fit;
  if (samples.empty()) return fit;
  const double n = static_cast<double>(samples.size());
  fit.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  if (samples.size() < 2) return fit;
  double ss = 0.0;
  for (double x : samples) ss += (x - fit.mean) * (x - fit.mean);
  fit.stddev = std::sqrt(ss / (n - 1.0));
  return fit;
}

double prexp_score(double x, const GaussianFit& match,
                   const GaussianFit& exclusive) {
  const double match_below =
      match.stddev > 0.0 ? normal_cdf((x - match.mean) / match.stddev)
                         : (x >= match.mean ? 1.0 : 0.0);
  const double exclusive_above =
      exclusive.stddev > 0.0
          ? normal_cdf((exclusive.mean - x) / exclusive.stddev)
          : (x <= exclusive.mean ? 1.0 : 0.0);
  return match_below - exclusive_above;
}

QueryBatch select_prexp(const SelectorContext& ctx, const PrexpParams& params) {
  const NodeRanking& fallback = ctx.rankings->get(params.fallback);
  std::vector<double> match_samples;
  std::vector<double> exclusive_samples;
  for (const PrexpRecord& r : ctx.history) {
    (r.had_match ? match_samples : exclusive_samples).push_back(r.s_max);
  }
  const auto min_samples = static_cast<std::size_t>(params.min_samples_per_class);
  const bool fitted = ctx.snapshot != nullptr &&
                      match_samples.size() >= min_samples &&
                      exclusive_samples.size() >= min_samples;
  const std::size_t b = batch_size(ctx);
  QueryBatch out;
  NodeSet residual = *ctx.pool;
  if (fitted) {
    const GaussianFit match = fit_gaussian(match_samples);
    const GaussianFit exclusive = fit_gaussian(exclusive_samples);
    std::vector<ScoredNode> scored;
    for (NodeRef node : ctx.pool->to_vector()) {
      const double s = prexp_score(ctx.snapshot->max_similarity(node), match,
                                   exclusive);
      if (s > params.threshold) scored.push_back({node, s});
    }
    sort_by_score(scored);
    for (std::size_t i = 0; i < scored.size() && out.size() < b; ++i) {
      out.push_back(scored[i].node);
      residual.erase(scored[i].node);
    }
  }
  if (out.size() < b) {
    SelectorContext rest = ctx;
    rest.pool = &residual;
    rest.budget = b - out.size();
    const QueryBatch tail = select_static(rest, fallback);
    out.insert(out.end(), tail.begin(), tail.end());
  }
  return out;
}

namespace {

class ParamReader {
 public:
  ParamReader(std::string_view heuristic, const ParamMap& params)
      : heuristic_(heuristic), params_(params) {}

  template <typename T>
  T number(const std::string& key, T fallback) {
    used_.push_back(key);
    auto it = params_.find(key);
    if (it == params_.end()) return fallback;
    return detail::parse_number<T>(it->second, key);
  }

  RankingKind ranking(const std::string& key, RankingKind fallback) {
    used_.push_back(key);
    auto it = params_.find(key);
    if (it == params_.end()) return fallback;
    auto kind = parse_ranking_kind(detail::trim(it->second));
    if (!kind) {
      throw ValidationError(fmt::format(
          "'{}' for {} must be a static heuristic (deg|betw|avc), got '{}'",
          key, heuristic_, it->second));
    }
    return *kind;
  }

  // Rejects keys that were never read.
  void finish() const {
    for (const auto& [key, value] : params_) {
      if (std::find(used_.begin(), used_.end(), key) == used_.end()) {
        throw ValidationError(fmt::format(
            "unknown parameter '{}' for heuristic '{}'", key, heuristic_));
      }
    }
  }

 private:
  std::string heuristic_;
  const ParamMap& params_;
  std::vector<std::string> used_;
};

class RandomSelector final : public Selector {
 public:
  std::string_view name() const override { return "rnd"; }
  QueryBatch select(const SelectorContext& ctx) const override {
    return select_random(ctx, ctx.seed);
  }
  std::vector<RankingKind> rankings_needed() const override { return {}; }
};

class StaticSelector final : public Selector {
 public:
  explicit StaticSelector(RankingKind kind) : kind_(kind) {}
  std::string_view name() const override { return ranking_kind_name(kind_); }
  QueryBatch select(const SelectorContext& ctx) const override {
    return select_static(ctx, ctx.rankings->get(kind_));
  }
  std::vector<RankingKind> rankings_needed() const override { return {kind_}; }

 private:
  RankingKind kind_;
};

class CoresetSelector final : public Selector {
 public:
  std::string_view name() const override { return "cs"; }
  QueryBatch select(const SelectorContext& ctx) const override {
    return select_coreset(ctx);
  }
  std::vector<RankingKind> rankings_needed() const override {
    return {RankingKind::kDegree};
  }
};

class EsccnSelector final : public Selector {
 public:
  explicit EsccnSelector(EsccnParams p) : params_(p) {}
  std::string_view name() const override { return "esccn"; }
  QueryBatch select(const SelectorContext& ctx) const override {
    return select_esccn(ctx, params_);
  }
  std::vector<RankingKind> rankings_needed() const override {
    return {params_.inner};
  }

 private:
  EsccnParams params_;
};

class BaldSelector final : public Selector {
 public:
  explicit BaldSelector(BaldParams p) : params_(p) {}
  std::string_view name() const override { return "bald"; }
  QueryBatch select(const SelectorContext& ctx) const override {
    return select_bald(ctx, params_);
  }
  std::vector<RankingKind> rankings_needed() const override {
    return {RankingKind::kDegree};
  }

 private:
  BaldParams params_;
};

class PrexpSelector final : public Selector {
 public:
  explicit PrexpSelector(PrexpParams p) : params_(p) {}
  std::string_view name() const override { return "prexp"; }
  QueryBatch select(const SelectorContext& ctx) const override {
    return select_prexp(ctx, params_);
  }
  std::vector<RankingKind> rankings_needed() const override {
    return {params_.fallback};
  }

 private:
  PrexpParams params_;
};

}  // namespace

const std::vector<std::string>& heuristic_names() {
  static const std::vector<std::string> names{"rnd", "deg",   "betw", "avc",
                                              "cs",  "esccn", "bald", "prexp"};
  return names;
}

std::unique_ptr<Selector> make_selector(std::string_view name,
                                        const ParamMap& params) {
  ParamReader reader(name, params);
  std::unique_ptr<Selector> out;
  if (name == "rnd") {
    out = std::make_unique<RandomSelector>();
  } else if (auto kind = parse_ranking_kind(name)) {
    out = std::make_unique<StaticSelector>(*kind);
  } else if (name == "cs") {
    out = std::make_unique<CoresetSelector>();
  } else if (name == "esccn") {
    EsccnParams p;
    p.n_clusters = reader.number<int>("n_clusters", p.n_clusters);
    p.inner = reader.ranking("inner", p.inner);
    p.max_iterations = reader.number<int>("max_iterations", p.max_iterations);
    if (p.n_clusters < 1) throw ValidationError("n_clusters must be at least 1");
    if (p.max_iterations < 1) throw ValidationError("max_iterations must be at least 1");
    out = std::make_unique<EsccnSelector>(p);
  } else if (name == "bald") {
    BaldParams p;
    p.runs = reader.number<int>("runs", p.runs);
    p.temperature = reader.number<double>("temperature", p.temperature);
    if (p.runs < 2) throw ValidationError("BALD needs at least 2 dropout runs");
    if (!(p.temperature > 0.0)) throw ValidationError("temperature must be positive");
    out = std::make_unique<BaldSelector>(p);
  } else if (name == "prexp") {
    PrexpParams p;
    p.threshold = reader.number<double>("threshold", p.threshold);
    p.fallback = reader.ranking("fallback", p.fallback);
    p.min_samples_per_class =
        reader.number<int>("min_samples", p.min_samples_per_class);
    if (p.min_samples_per_class < 1) {
      throw ValidationError("min_samples must be at least 1");
    }
    out = std::make_unique<PrexpSelector>(p);
  } else {
    throw ValidationError(fmt::format("unknown heuristic '{}'", name));
  }
  reader.finish();
  return out;
}

}  // namespace ealearn
