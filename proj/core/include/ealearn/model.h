#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "ealearn/knowledge_graph.h"
#include "ealearn/random.h"

namespace ealearn {

using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// One representation matrix per side (rows = entities).
using Representations = std::array<Matrix, 2>;

enum class OptimizerKind { kSgd, kAdam };

std::string_view optimizer_name(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

struct ModelConfig {
  int embedding_dim = 32;
  // Graph-convolution layers; tanh is applied between consecutive layers.
  int num_layers = 2;
  // Applied to the base embeddings before the first propagation.
  double dropout_rate = 0.0;
  double margin = 1.0;
  int negatives_per_positive = 5;
  double learning_rate = 0.01;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  int max_epochs = 4000;
  int eval_every = 20;
  // Counted in epochs, not evaluation checks.
  int patience = 200;
  double softmax_temperature = 0.5;
  std::uint64_t seed = 0;
};

// Throws ValidationError if a field is out of range.
void validate(const ModelConfig& config);

// D^-1/2 (A + I) D^-1/2 over the collapsed undirected adjacency of the view.
// Masked entities keep only their self loop.
SparseMatrix normalized_adjacency(const GraphView& view);

// The graph-dependent inputs of the matcher for one simulation step:
// propagation operators and the candidate entities (active, i.e. not a
// removed exclusive) of each side. Candidates double as negative pools.
struct MatchingGraph {
  std::array<SparseMatrix, 2> propagation;
  std::array<std::vector<EntityId>, 2> candidates;

  explicit MatchingGraph(const GraphPairView& view);

  const std::vector<EntityId>& candidates_of(Side s) const {
    return candidates[side_index(s)];
  }
};

// Trainable parameters plus everything needed to continue training exactly:
// optimizer moments, epoch counter and the training random stream.
struct ModelState {
  ModelConfig config;
  std::array<Matrix, 2> embeddings;
  std::array<Matrix, 2> adam_first;
  std::array<Matrix, 2> adam_second;
  long adam_steps = 0;
  long epoch = 0;
  Rng rng;

  // Base embeddings ~ N(0, 1/embedding_dim) from a stream derived from the
  // config seed.
  static ModelState initialize(const ModelConfig& config,
                               std::size_t num_left, std::size_t num_right);
};

// Representations of every entity. With `stochastic`, dropout masks are drawn
// from `rng` (left side first). Throws DivergenceError on non-finite output.
Representations forward(const ModelState& state, const MatchingGraph& graph,
                        bool stochastic, Rng* rng = nullptr);

struct LossResult {
  double loss = 0.0;
  // Same shapes as the inputs the gradient was taken against.
  std::array<Matrix, 2> gradient;
};

// sum over positives and k < K of [margin + d(pos) - d(neg_k)]_+ with L1
// distance d. Even k corrupt the right endpoint, odd k the left one, each
// drawn uniformly from that side's pool. Gradient is w.r.t. the
// representations. Throws ValidationError on an empty pool.
LossResult margin_loss(const Representations& reprs,
                       std::span<const AlignmentPair> positives,
                       const std::array<std::vector<EntityId>, 2>& negative_pools,
                       int negatives_per_positive, double margin, Rng& rng);

// Margin loss with the gradient back-propagated to the base embeddings.
// Dropout masks (if `stochastic`) then negatives are drawn from `rng`.
LossResult loss_and_gradient(const ModelState& state, const MatchingGraph& graph,
                             std::span<const AlignmentPair> positives,
                             bool stochastic, Rng& rng);

struct RankingMetrics {
  double hits_at_1 = 0.0;
  double hits_at_10 = 0.0;
  double mrr = 0.0;
};

// Ranks each pair's counterpart among the candidates of the other side by
// similarity (-L1). Ties use the realistic rank (mean of optimistic and
// pessimistic). Averaged per direction, then over both directions.
RankingMetrics evaluate_ranking(const Representations& reprs,
                                const MatchingGraph& graph,
                                std::span<const AlignmentPair> pairs);

struct TrainReport {
  long epochs_run = 0;
  long best_epoch = 0;  // relative to the start of this call
  double initial_validation_mrr = 0.0;
  double best_validation_mrr = 0.0;
  double last_loss = 0.0;
  bool stopped_early = false;
};

// Full-batch training from the current parameters (warm start). Validation MRR
// is measured before the first epoch and every eval_every epochs; training
// stops after `patience` epochs without strict improvement or at max_epochs.
// On return `state` holds the best-validation parameters and optimizer state;
// epoch counter and random stream keep advancing.
TrainReport train_until_early_stop(ModelState& state, const MatchingGraph& graph,
                                   std::span<const AlignmentPair> positives,
                                   std::span<const AlignmentPair> validation);

// Immutable, shareable view of a trained model for the query heuristics.
class ModelSnapshot {
 public:
  ModelSnapshot(const ModelState& state,
                std::shared_ptr<const MatchingGraph> graph,
                std::uint64_t replay_seed);

  const Representations& representations() const { return reprs_; }
  const Matrix& representations(Side s) const { return reprs_[side_index(s)]; }
  const std::vector<EntityId>& candidates(Side s) const {
    return graph_->candidates_of(s);
  }
  const MatchingGraph& graph() const { return *graph_; }
  const ModelConfig& config() const { return config_; }
  std::uint64_t replay_seed() const { return replay_seed_; }

  // A forward pass with fresh dropout masks drawn from `rng`.
  Representations stochastic_representations(Rng& rng) const;

  // Maximum similarity of `node` to the candidates of the other side.
  double max_similarity(NodeRef node) const;

 private:
  ModelConfig config_;
  std::array<Matrix, 2> embeddings_;
  std::shared_ptr<const MatchingGraph> graph_;
  Representations reprs_;
  std::uint64_t replay_seed_;
};

// Similarity (-L1 distance) of each query row against each candidate row.
// Throws ValidationError on an empty candidate set.
Matrix similarity_matrix(const Matrix& query_reprs,
                         std::span<const EntityId> queries,
                         const Matrix& candidate_reprs,
                         std::span<const EntityId> candidates);
Matrix similarity_matrix(const ModelSnapshot& snapshot, Side query_side,
                         std::span<const EntityId> queries);

// Numerically stable softmax of scores / temperature.
std::vector<double> softmax(std::span<const double> scores, double temperature);

struct DropoutDistributions {
  // per_query[q] is runs x |candidates of the other side|.
  std::vector<Matrix> per_query;
  // Set when dropout is disabled and runs > 1: every pass is identical.
  bool degenerate = false;
};

// Calls `visit(run, query_position, probabilities)` for each of `runs`
// stochastic passes and each query node.
using DropoutVisitor =
    std::function<void(int, std::size_t, std::span<const double>)>;
bool for_each_dropout_pass(const ModelSnapshot& snapshot,
                           std::span<const NodeRef> queries, int runs,
                           double temperature, Rng& rng,
                           const DropoutVisitor& visit);

DropoutDistributions mc_dropout_distributions(const ModelSnapshot& snapshot,
                                              std::span<const NodeRef> queries,
                                              int runs, double temperature,
                                              Rng& rng);

}  // namespace ealearn
