#include "ealearn/model.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "ealearn/error.h"

namespace ealearn {
namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEpsilon = 1e-8;

// Activations kept for back-propagation. hidden[0] is the (dropped-out) input,
// hidden[l] = tanh(A hidden[l-1]) for 0 < l < L.
struct SideTrace {
  std::vector<Matrix> hidden;
  Matrix dropout_scale;  // empty when no dropout was applied
  Matrix output;
};

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate,
                    Rng& rng) {
  Matrix mask(rows, cols);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      mask(i, j) = uniform_real(rng) < rate ? 0.0 : keep_scale;
    }
  }
  return mask;
}

SideTrace propagate(const Matrix& embeddings, const SparseMatrix& op,
                    int layers, double dropout_rate, Rng* rng) {
  SideTrace trace;
  if (rng != nullptr && dropout_rate > 0.0) {
    trace.dropout_scale =
        dropout_mask(embeddings.rows(), embeddings.cols(), dropout_rate, *rng);
    trace.hidden.push_back(embeddings.cwiseProduct(trace.dropout_scale));
  } else {
    trace.hidden.push_back(embeddings);
  }
  if (layers == 0) {
    trace.output = trace.hidden.back();
    return trace;
  }
  for (int l = 1; l < layers; ++l) {
    Matrix z = op * trace.hidden.back();
    trace.hidden.push_back(z.array().tanh().matrix());
  }
  trace.output = op * trace.hidden.back();
  return trace;
}

Matrix backpropagate(const SideTrace& trace, const SparseMatrix& op,
                     int layers, Matrix grad) {
  // The operator is symmetric, so A^T g = A g.
  for (int l = layers; l >= 1; --l) {
    grad = op * grad;
    if (l - 1 >= 1) {
      const Matrix& h = trace.hidden[static_cast<std::size_t>(l - 1)];
      grad = grad.cwiseProduct((1.0 - h.array().square()).matrix());
    }
  }
  if (trace.dropout_scale.size() != 0) {
    grad = grad.cwiseProduct(trace.dropout_scale);
  }
  return grad;
}

void check_finite(const Matrix& m, long epoch) {
  if (!m.allFinite()) {
    throw DivergenceError(
        fmt::format("non-finite representation after epoch {}", epoch), epoch);
  }
}

std::array<SideTrace, 2> trace_forward(const ModelConfig& config,
                                       const std::array<Matrix, 2>& embeddings,
                                       const MatchingGraph& graph,
                                       bool stochastic, Rng* rng) {
  if (stochastic && config.dropout_rate > 0.0 && rng == nullptr) {
    throw ValidationError("stochastic forward requires a random stream");
  }
  Rng* used = stochastic ? rng : nullptr;
  std::array<SideTrace, 2> traces;
  for (std::size_t s = 0; s < 2; ++s) {
    traces[s] = propagate(embeddings[s], graph.propagation[s],
                          config.num_layers, config.dropout_rate, used);
  }
  return traces;
}

double l1(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).cwiseAbs().sum();
}

// Adds `scale * sign(a_i - b_j)` to grad_a row i and subtracts it from
// grad_b row j.
void add_l1_gradient(const Matrix& a, Eigen::Index i, const Matrix& b,
                     Eigen::Index j, double scale, Matrix& grad_a,
                     Matrix& grad_b) {
  for (Eigen::Index k = 0; k < a.cols(); ++k) {
    const double diff = a(i, k) - b(j, k);
    const double sgn = (diff > 0.0) - (diff < 0.0);
    grad_a(i, k) += scale * sgn;
    grad_b(j, k) -= scale * sgn;
  }
}

struct DirectionRanks {
  double hits_at_1 = 0.0;
  double hits_at_10 = 0.0;
  double reciprocal = 0.0;
};

DirectionRanks rank_direction(const Matrix& query_reprs,
                              const Matrix& candidate_reprs,
                              const std::vector<EntityId>& candidates,
                              std::span<const AlignmentPair> pairs,
                              Side query_side) {
  DirectionRanks out;
  for (const AlignmentPair& p : pairs) {
    const EntityId q = p.endpoint(query_side);
    const EntityId truth = p.endpoint(opposite(query_side));
    const double true_score = -l1(query_reprs, q, candidate_reprs, truth);
    std::size_t greater = 0;
    std::size_t equal_others = 0;
    for (EntityId c : candidates) {
      if (c == truth) continue;
      const double s = -l1(query_reprs, q, candidate_reprs, c);
      if (s > true_score) {
        ++greater;
      } else if (s == true_score) {
        ++equal_others;
      }
    }
    const double optimistic = 1.0 + static_cast<double>(greater);
    const double pessimistic = optimistic + static_cast<double>(equal_others);
    const double rank = 0.5 * (optimistic + pessimistic);
    out.hits_at_1 += rank <= 1.0 ? 1.0 : 0.0;
    out.hits_at_10 += rank <= 10.0 ? 1.0 : 0.0;
    out.reciprocal += 1.0 / rank;
  }
  const double n = static_cast<double>(pairs.size());
  out.hits_at_1 /= n;
  out.hits_at_10 /= n;
  out.reciprocal /= n;
  return out;
}

}  // namespace

std::string_view optimizer_name(OptimizerKind kind) {
  return kind == OptimizerKind::kSgd ? "sgd" : "adam";
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  throw ValidationError(fmt::format("unknown optimizer '{}'", name));
}

void validate(const ModelConfig& c) {
  auto fail = [](std::string_view what) {
    throw ValidationError(fmt::format("invalid model config: {}", what));
  };
  if (c.embedding_dim <= 0) fail("embedding_dim must be positive");
  if (c.num_layers < 0) fail("num_layers must be non-negative");
  if (!(c.dropout_rate >= 0.0 && c.dropout_rate < 1.0)) {
    fail("dropout_rate must be in [0, 1)");
  }
  if (!(c.margin > 0.0)) fail("margin must be positive");
  if (c.negatives_per_positive <= 0) fail("negatives_per_positive must be positive");
  if (!(c.learning_rate > 0.0)) fail("learning_rate must be positive");
  if (c.max_epochs < 0) fail("max_epochs must be non-negative");
  if (c.eval_every <= 0) fail("eval_every must be positive");
  if (c.patience <= 0) fail("patience must be positive");
  if (!(c.softmax_temperature > 0.0)) fail("softmax_temperature must be positive");
}

SparseMatrix normalized_adjacency(const GraphView& view) {
  const Adjacency adj = view.adjacency();
  const auto n = static_cast<Eigen::Index>(adj.size());
  std::vector<double> inv_sqrt_degree(adj.size());
  for (std::size_t v = 0; v < adj.size(); ++v) {
    inv_sqrt_degree[v] = 1.0 / std::sqrt(static_cast<double>(adj[v].size() + 1));
  }
  std::vector<Eigen::Triplet<double>> entries;
  for (std::size_t v = 0; v < adj.size(); ++v) {
    const auto row = static_cast<Eigen::Index>(v);
    entries.emplace_back(row, row, inv_sqrt_degree[v] * inv_sqrt_degree[v]);
    for (EntityId u : adj[v]) {
      entries.emplace_back(row, static_cast<Eigen::Index>(u),
                           inv_sqrt_degree[v] * inv_sqrt_degree[u]);
    }
  }
  SparseMatrix op(n, n);
  op.setFromTriplets(entries.begin(), entries.end());
  op.makeCompressed();
  return op;
}

MatchingGraph::MatchingGraph(const GraphPairView& view)
    : propagation{normalized_adjacency(view.left),
                  normalized_adjacency(view.right)},
      candidates{view.left.active_entities(), view.right.active_entities()} {}

ModelState ModelState::initialize(const ModelConfig& config,
                                  std::size_t num_left, std::size_t num_right) {
  validate(config);
  ModelState state;
  state.config = config;
  Rng init(derive_seed(config.seed, {0x1417}));
  std::normal_distribution<double> normal(
      0.0, 1.0 / std::sqrt(static_cast<double>(config.embedding_dim)));
  const std::array<std::size_t, 2> rows{num_left, num_right};
  for (std::size_t s = 0; s < 2; ++s) {
    Matrix m(static_cast<Eigen::Index>(rows[s]), config.embedding_dim);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = normal(init);
    }
    state.embeddings[s] = std::move(m);
    state.adam_first[s] = Matrix::Zero(state.embeddings[s].rows(),
                                       state.embeddings[s].cols());
    state.adam_second[s] = state.adam_first[s];
  }
  state.rng.seed(derive_seed(config.seed, {0x7a1}));
  return state;
}

Representations forward(const ModelState& state, const MatchingGraph& graph,
                        bool stochastic, Rng* rng) {
  auto traces =
      trace_forward(state.config, state.embeddings, graph, stochastic, rng);
  Representations out{std::move(traces[0].output), std::move(traces[1].output)};
  check_finite(out[0], state.epoch);
  check_finite(out[1], state.epoch);
  return out;
}

LossResult margin_loss(const Representations& reprs,
                       std::span<const AlignmentPair> positives,
                       const std::array<std::vector<EntityId>, 2>& negative_pools,
                       int negatives_per_positive, double margin, Rng& rng) {
  if (negative_pools[0].empty() || negative_pools[1].empty()) {
    throw ValidationError("negative sampling pool is empty");
  }
  const Matrix& left = reprs[0];
  const Matrix& right = reprs[1];
  LossResult out;
  out.gradient[0] = Matrix::Zero(left.rows(), left.cols());
  out.gradient[1] = Matrix::Zero(right.rows(), right.cols());
  for (const AlignmentPair& p : positives) {
    const double d_pos = l1(left, p.left, right, p.right);
    for (int k = 0; k < negatives_per_positive; ++k) {
      AlignmentPair neg = p;
      if (k % 2 == 0) {
        neg.right = negative_pools[1][uniform_index(rng, negative_pools[1].size())];
      } else {
        neg.left = negative_pools[0][uniform_index(rng, negative_pools[0].size())];
      }
      const double d_neg = l1(left, neg.left, right, neg.right);
      const double term = margin + d_pos - d_neg;
      if (term <= 0.0) continue;
      out.loss += term;
      add_l1_gradient(left, p.left, right, p.right, 1.0, out.gradient[0],
                      out.gradient[1]);
      add_l1_gradient(left, neg.left, right, neg.right, -1.0, out.gradient[0],
                      out.gradient[1]);
    }
  }
  return out;
}

LossResult loss_and_gradient(const ModelState& state, const MatchingGraph& graph,
                             std::span<const AlignmentPair> positives,
                             bool stochastic, Rng& rng) {
  auto traces =
      trace_forward(state.config, state.embeddings, graph, stochastic, &rng);
  const Representations reprs{traces[0].output, traces[1].output};
  LossResult out = margin_loss(reprs, positives, graph.candidates,
                               state.config.negatives_per_positive,
                               state.config.margin, rng);
  for (std::size_t s = 0; s < 2; ++s) {
    out.gradient[s] = backpropagate(traces[s], graph.propagation[s],
                                    state.config.num_layers,
                                    std::move(out.gradient[s]));
  }
  return out;
}

RankingMetrics evaluate_ranking(const Representations& reprs,
                                const MatchingGraph& graph,
                                std::span<const AlignmentPair> pairs) {
  RankingMetrics m;
  if (pairs.empty()) return m;
  const DirectionRanks lr = rank_direction(reprs[0], reprs[1],
                                           graph.candidates[1], pairs,
                                           Side::kLeft);
  const DirectionRanks rl = rank_direction(reprs[1], reprs[0],
                                           graph.candidates[0], pairs,
                                           Side::kRight);
  m.hits_at_1 = 0.5 * (lr.hits_at_1 + rl.hits_at_1);
  m.hits_at_10 = 0.5 * (lr.hits_at_10 + rl.hits_at_10);
  m.mrr = 0.5 * (lr.reciprocal + rl.reciprocal);
  return m;
}

namespace {

void apply_update(ModelState& state, const std::array<Matrix, 2>& gradient) {
  const ModelConfig& c = state.config;
  if (c.optimizer == OptimizerKind::kSgd) {
    for (std::size_t s = 0; s < 2; ++s) {
      state.embeddings[s] -= c.learning_rate * gradient[s];
    }
    return;
  }
  ++state.adam_steps;
  const double t = static_cast<double>(state.adam_steps);
  const double correction1 = 1.0 - std::pow(kAdamBeta1, t);
  const double correction2 = 1.0 - std::pow(kAdamBeta2, t);
  for (std::size_t s = 0; s < 2; ++s) {
    state.adam_first[s] =
        kAdamBeta1 * state.adam_first[s] + (1.0 - kAdamBeta1) * gradient[s];
    state.adam_second[s] =
        kAdamBeta2 * state.adam_second[s] +
        (1.0 - kAdamBeta2) * gradient[s].cwiseProduct(gradient[s]);
    state.embeddings[s].array() -=
        c.learning_rate * (state.adam_first[s].array() / correction1) /
        ((state.adam_second[s].array() / correction2).sqrt() + kAdamEpsilon);
  }
}

double validation_mrr(const ModelState& state, const MatchingGraph& graph,
                      std::span<const AlignmentPair> validation) {
  return evaluate_ranking(forward(state, graph, false), graph, validation).mrr;
}

}  // namespace

TrainReport train_until_early_stop(ModelState& state, const MatchingGraph& graph,
                                   std::span<const AlignmentPair> positives,
                                   std::span<const AlignmentPair> validation) {
  TrainReport report;
  const ModelConfig& c = state.config;
  if (c.max_epochs == 0) return report;
  if (validation.empty()) {
    throw ValidationError("early stopping needs validation alignments");
  }
  const bool stochastic = c.dropout_rate > 0.0;

  report.initial_validation_mrr = validation_mrr(state, graph, validation);
  report.best_validation_mrr = report.initial_validation_mrr;
  std::array<Matrix, 2> best_embeddings = state.embeddings;
  std::array<Matrix, 2> best_first = state.adam_first;
  std::array<Matrix, 2> best_second = state.adam_second;
  long best_adam_steps = state.adam_steps;

  for (long epoch = 1; epoch <= c.max_epochs; ++epoch) {
    LossResult step =
        loss_and_gradient(state, graph, positives, stochastic, state.rng);
    if (!std::isfinite(step.loss)) {
      throw DivergenceError(
          fmt::format("non-finite loss at epoch {}", state.epoch + 1),
          state.epoch);
    }
    apply_update(state, step.gradient);
    ++state.epoch;
    report.epochs_run = epoch;
    report.last_loss = step.loss;

    if (epoch % c.eval_every != 0) continue;
    const double mrr = validation_mrr(state, graph, validation);
    if (mrr > report.best_validation_mrr) {
      report.best_validation_mrr = mrr;
      report.best_epoch = epoch;
      best_embeddings = state.embeddings;
      best_first = state.adam_first;
      best_second = state.adam_second;
      best_adam_steps = state.adam_steps;
    } else if (epoch - report.best_epoch >= c.patience) {
      report.stopped_early = true;
      break;
    }
  }
  state.embeddings = std::move(best_embeddings);
  state.adam_first = std::move(best_first);
  state.adam_second = std::move(best_second);
  state.adam_steps = best_adam_steps;
  return report;
}

ModelSnapshot::ModelSnapshot(const ModelState& state,
                             std::shared_ptr<const MatchingGraph> graph,
                             std::uint64_t replay_seed)
    : config_(state.config),
      embeddings_(state.embeddings),
      graph_(std::move(graph)),
      reprs_(forward(state, *graph_, false)),
      replay_seed_(replay_seed) {}

Representations ModelSnapshot::stochastic_representations(Rng& rng) const {
  auto traces = trace_forward(config_, embeddings_, *graph_, true, &rng);
  Representations out{std::move(traces[0].output), std::move(traces[1].output)};
  check_finite(out[0], -1);
  check_finite(out[1], -1);
  return out;
}

double ModelSnapshot::max_similarity(NodeRef node) const {
  const Matrix& q = representations(node.side);
  const Matrix& c = representations(opposite(node.side));
  double best = -std::numeric_limits<double>::infinity();
  for (EntityId e : candidates(opposite(node.side))) {
    best = std::max(best, -l1(q, node.index, c, e));
  }
  return best;
}

Matrix similarity_matrix(const Matrix& query_reprs,
                         std::span<const EntityId> queries,
                         const Matrix& candidate_reprs,
                         std::span<const EntityId> candidates) {
  if (candidates.empty()) throw ValidationError("empty candidate set");
  Matrix out(static_cast<Eigen::Index>(queries.size()),
             static_cast<Eigen::Index>(candidates.size()));
  for (std::size_t i = 0; i < queries.size(); ++i) {
    for (std::size_t j = 0; j < candidates.size(); ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          -l1(query_reprs, queries[i], candidate_reprs, candidates[j]);
    }
  }
  return out;
}

Matrix similarity_matrix(const ModelSnapshot& snapshot, Side query_side,
                         std::span<const EntityId> queries) {
  return similarity_matrix(snapshot.representations(query_side), queries,
                           snapshot.representations(opposite(query_side)),
                           snapshot.candidates(opposite(query_side)));
}

std::vector<double> softmax(std::span<const double> scores,
                            double temperature) {
  std::vector<double> out(scores.size());
  if (scores.empty()) return out;
  const double top = *std::max_element(scores.begin(), scores.end());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp((scores[i] - top) / temperature);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

bool for_each_dropout_pass(const ModelSnapshot& snapshot,
                           std::span<const NodeRef> queries, int runs,
                           double temperature, Rng& rng,
                           const DropoutVisitor& visit) {
  if (runs < 1) throw ValidationError("need at least one dropout run");
  std::vector<double> scores;
  for (int t = 0; t < runs; ++t) {
    const Representations reprs = snapshot.stochastic_representations(rng);
    for (std::size_t q = 0; q < queries.size(); ++q) {
      const NodeRef node = queries[q];
      const Matrix& own = reprs[side_index(node.side)];
      const Matrix& other = reprs[side_index(opposite(node.side))];
      const auto& cands = snapshot.candidates(opposite(node.side));
      if (cands.empty()) throw ValidationError("empty candidate set");
      scores.resize(cands.size());
      for (std::size_t j = 0; j < cands.size(); ++j) {
        scores[j] = -l1(own, node.index, other, cands[j]);
      }
      const std::vector<double> probs = softmax(scores, temperature);
      visit(t, q, probs);
    }
  }
  return snapshot.config().dropout_rate == 0.0 && runs > 1;
}

DropoutDistributions mc_dropout_distributions(const ModelSnapshot& snapshot,
                                              std::span<const NodeRef> queries,
                                              int runs, double temperature,
                                              Rng& rng) {
  DropoutDistributions out;
  out.per_query.resize(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const auto& cands = snapshot.candidates(opposite(queries[q].side));
    out.per_query[q].resize(runs, static_cast<Eigen::Index>(cands.size()));
  }
  out.degenerate = for_each_dropout_pass(
      snapshot, queries, runs, temperature, rng,
      [&out](int t, std::size_t q, std::span<const double> probs) {
        for (std::size_t j = 0; j < probs.size(); ++j) {
          out.per_query[q](t, static_cast<Eigen::Index>(j)) = probs[j];
        }
      });
  return out;
}

}  // namespace ealearn
