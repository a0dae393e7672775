#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ealearn/heuristics.h"
#include "ealearn/knowledge_graph.h"
#include "ealearn/labels.h"
#include "ealearn/model.h"

namespace ealearn {

// A graph pair with its split alignments.
struct Dataset {
  KnowledgeGraphPair graphs;
  AlignmentSet alignments;
};

// Simulated annotator: answers node queries with every train alignment that
// touches a queried node, or flags the node as exclusive.
class Oracle {
 public:
  Oracle(const KnowledgeGraphPair& graphs, const AlignmentSet& alignments);

  const NodePartition& partition() const { return partition_; }
  const PairSet& train() const { return train_; }
  bool is_exclusive(NodeRef n) const;
  // Indices into train() of the pairs incident to `n`.
  const std::vector<std::size_t>& train_pairs_of(NodeRef n) const;

 private:
  PairSet train_;
  NodePartition partition_;
  std::array<std::vector<char>, 2> exclusive_;
  std::array<std::vector<std::vector<std::size_t>>, 2> incident_;
};

// P_0: endpoints of train alignments on both sides plus every exclusive node.
// Nodes aligned only through validation/test pairs are left out.
// Throws ValidationError when the pool would be empty.
LabelState init_pool(const NodePartition& partition,
                     const AlignmentSet& alignments,
                     std::size_t num_left, std::size_t num_right);

// Throws ValidationError if a queried node is not in the pool.
OracleResponse oracle_answer(const LabelState& state, const QueryBatch& query,
                             const Oracle& oracle);

// Removes every revealed endpoint and exclusive from the pool, extends the
// found sets, logs the query and advances the step counter.
void apply_response(LabelState& state, const QueryBatch& query,
                    const OracleResponse& response);

struct SimulationConfig {
  // Queries per step.
  std::size_t budget = 200;
  // Total queries over the run; 0 means until the pool is exhausted.
  std::size_t query_budget = 0;
  std::string heuristic = "rnd";
  ParamMap heuristic_params;
  ModelConfig model;
  std::uint64_t seed = 0;
  // Mask found exclusives out of message passing, negatives and candidates.
  bool exclusive_removal = true;
};

void validate(const SimulationConfig& config);

struct StepRecord {
  int step = 0;
  std::size_t queries = 0;  // cumulative
  std::size_t found_alignments = 0;
  std::size_t found_exclusives = 0;
  double test_h1 = 0.0;
  double validation_mrr = 0.0;
  long epochs = 0;  // training epochs spent in this step
};

struct SimulationResult {
  std::vector<StepRecord> steps;
  std::vector<QueryRecord> query_log;
  std::size_t initial_pool = 0;
  // min(query_budget, |P_0|): the x-range of the learning curve.
  std::size_t total_queries = 0;
};

// Called after each step; used for progress output.
using StepObserver = std::function<void(const StepRecord&)>;

// The pool-based loop: select, ask the oracle, update the pool, mask found
// exclusives, retrain warm-started on all found alignments, evaluate.
// Training is skipped until the first alignment is found.
SimulationResult run_simulation(const Dataset& dataset,
                                const SimulationConfig& config,
                                const StepObserver& observer = {});

}  // namespace ealearn
