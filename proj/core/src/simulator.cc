#include "ealearn/simulator.h"

#include <algorithm>
#include <iterator>
#include <memory>

#include <fmt/format.h>

#include "ealearn/error.h"
#include "ealearn/random.h"

namespace ealearn {
namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kModelStream = 1;
constexpr std::uint64_t kSelectionStream = 2;
constexpr std::uint64_t kReplayStream = 3;

void insert_sorted(std::vector<EntityId>& v, EntityId e) {
  auto it = std::lower_bound(v.begin(), v.end(), e);
  if (it == v.end() || *it != e) v.insert(it, e);
}

}  // namespace

Oracle::Oracle(const KnowledgeGraphPair& graphs, const AlignmentSet& alignments)
    : train_(alignments.train),
      partition_(compute_partition(graphs, alignments)) {
  normalize(train_);
  const std::array<std::size_t, 2> n{graphs.left.num_entities(),
                                     graphs.right.num_entities()};
  for (Side s : {Side::kLeft, Side::kRight}) {
    const std::size_t i = side_index(s);
    exclusive_[i].assign(n[i], 0);
    for (EntityId e : partition_.exclusive(s)) exclusive_[i][e] = 1;
    incident_[i].resize(n[i]);
  }
  for (std::size_t k = 0; k < train_.size(); ++k) {
    incident_[0][train_[k].left].push_back(k);
    incident_[1][train_[k].right].push_back(k);
  }
}

bool Oracle::is_exclusive(NodeRef n) const {
  return exclusive_[side_index(n.side)].at(n.index) != 0;
}

const std::vector<std::size_t>& Oracle::train_pairs_of(NodeRef n) const {
  return incident_[side_index(n.side)].at(n.index);
}

LabelState init_pool(const NodePartition& partition,
                     const AlignmentSet& alignments, std::size_t num_left,
                     std::size_t num_right) {
  LabelState state;
  state.pool = NodeSet(num_left, num_right);
  state.labeled = NodeSet(num_left, num_right);
  for (const AlignmentPair& p : alignments.train) {
    state.pool.insert({Side::kLeft, p.left});
    state.pool.insert({Side::kRight, p.right});
  }
  for (Side s : {Side::kLeft, Side::kRight}) {
    for (EntityId e : partition.exclusive(s)) state.pool.insert({s, e});
  }
  if (state.pool.empty()) throw ValidationError("initial pool is empty");
  return state;
}

OracleResponse oracle_answer(const LabelState& state, const QueryBatch& query,
                             const Oracle& oracle) {
  OracleResponse response;
  for (NodeRef n : query) {
    if (!state.pool.contains(n)) {
      throw ValidationError(fmt::format("queried {} node {} is not in the pool",
                                        side_name(n.side), n.index));
    }
    if (oracle.is_exclusive(n)) {
      insert_sorted(response.exclusive[side_index(n.side)], n.index);
      continue;
    }
    for (std::size_t k : oracle.train_pairs_of(n)) {
      response.alignments.push_back(oracle.train()[k]);
    }
  }
  normalize(response.alignments);
  return response;
}

void apply_response(LabelState& state, const QueryBatch& query,
                    const OracleResponse& response) {
  auto label = [&state](NodeRef n) {
    state.pool.erase(n);
    state.labeled.insert(n);
  };
  for (const AlignmentPair& p : response.alignments) {
    label({Side::kLeft, p.left});
    label({Side::kRight, p.right});
  }
  for (Side s : {Side::kLeft, Side::kRight}) {
    for (EntityId e : response.exclusive[side_index(s)]) {
      label({s, e});
      insert_sorted(state.found_exclusive[side_index(s)], e);
    }
  }
  PairSet merged;
  std::set_union(state.found_alignments.begin(), state.found_alignments.end(),
                 response.alignments.begin(), response.alignments.end(),
                 std::back_inserter(merged));
  state.found_alignments = std::move(merged);

  for (NodeRef n : query) {
    const auto& excl = response.exclusive[side_index(n.side)];
    const bool exclusive = std::binary_search(excl.begin(), excl.end(), n.index);
    state.query_log.push_back({state.step + 1, n, !exclusive});
  }
  ++state.step;
}

void validate(const SimulationConfig& config) {
  if (config.budget < 1) throw ValidationError("budget must be at least 1");
  validate(config.model);
  make_selector(config.heuristic, config.heuristic_params);
}

SimulationResult run_simulation(const Dataset& dataset,
                                const SimulationConfig& config,
                                const StepObserver& observer) {
  validate(config);
  const KnowledgeGraphPair& graphs = dataset.graphs;
  const AlignmentSet& alignments = dataset.alignments;
  validate(alignments, graphs);
  if (alignments.validation.empty()) {
    throw ValidationError("validation alignments are required for early stopping");
  }

  const Oracle oracle(graphs, alignments);
  LabelState labels = init_pool(oracle.partition(), alignments,
                                graphs.left.num_entities(),
                                graphs.right.num_entities());
  const std::unique_ptr<Selector> selector =
      make_selector(config.heuristic, config.heuristic_params);
  const std::vector<RankingKind> needed = selector->rankings_needed();
  const StaticRankings rankings = compute_static_rankings(graphs, needed);

  ModelConfig model_config = config.model;
  model_config.seed = derive_seed(config.seed, {kModelStream});
  ModelState model = ModelState::initialize(
      model_config, graphs.left.num_entities(), graphs.right.num_entities());

  GraphPairView view(graphs);
  auto matching = std::make_shared<const MatchingGraph>(view);
  std::optional<ModelSnapshot> snapshot;
  std::vector<PrexpRecord> history;

  SimulationResult result;
  result.initial_pool = labels.pool.size();
  const std::size_t limit =
      config.query_budget == 0
          ? result.initial_pool
          : std::min(config.query_budget, result.initial_pool);
  std::size_t queries = 0;

  while (queries < limit && !labels.pool.empty()) {
    SelectorContext ctx;
    ctx.pool = &labels.pool;
    ctx.labels = &labels;
    ctx.snapshot = snapshot ? &*snapshot : nullptr;
    ctx.rankings = &rankings;
    ctx.history = history;
    ctx.budget = std::min(config.budget, limit - queries);
    ctx.seed = derive_seed(config.seed,
                           {kSelectionStream, static_cast<std::uint64_t>(labels.step)});
    const QueryBatch batch = selector->select(ctx);
    if (batch.empty()) break;

    std::vector<double> s_max;
    if (snapshot) {
      for (NodeRef n : batch) s_max.push_back(snapshot->max_similarity(n));
    }
    const OracleResponse response = oracle_answer(labels, batch, oracle);
    apply_response(labels, batch, response);
    queries += batch.size();
    if (snapshot) {
      for (std::size_t i = 0; i < batch.size(); ++i) {
        history.push_back({batch[i], s_max[i], !oracle.is_exclusive(batch[i])});
      }
    }

    const bool new_exclusives =
        !response.exclusive[0].empty() || !response.exclusive[1].empty();
    if (config.exclusive_removal && new_exclusives) {
      view.left = view.left.without(response.exclusive[0]);
      view.right = view.right.without(response.exclusive[1]);
      matching = std::make_shared<const MatchingGraph>(view);
    }

    StepRecord record;
    record.step = labels.step;
    record.queries = queries;
    record.found_alignments = labels.found_alignments.size();
    record.found_exclusives =
        labels.found_exclusive[0].size() + labels.found_exclusive[1].size();

    if (!labels.found_alignments.empty()) {
      const TrainReport report = train_until_early_stop(
          model, *matching, labels.found_alignments, alignments.validation);
      record.epochs = report.epochs_run;
      snapshot.emplace(model, matching,
                       derive_seed(config.seed, {kReplayStream,
                                                 static_cast<std::uint64_t>(labels.step)}));
    }
    const Representations reprs =
        snapshot ? snapshot->representations() : forward(model, *matching, false);
    record.test_h1 =
        alignments.test.empty()
            ? 0.0
            : evaluate_ranking(reprs, *matching, alignments.test).hits_at_1;
    record.validation_mrr =
        evaluate_ranking(reprs, *matching, alignments.validation).mrr;
    result.steps.push_back(record);
    if (observer) observer(record);
  }
  result.query_log = labels.query_log;
  result.total_queries = limit;
  return result;
}

}  // namespace ealearn
