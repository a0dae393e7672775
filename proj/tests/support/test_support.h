#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <tuple>
#include <vector>

#include "ealearn/graph_metrics.h"
#include "ealearn/heuristics.h"
#include "ealearn/knowledge_graph.h"
#include "ealearn/labels.h"
#include "ealearn/model.h"
#include "ealearn/random.h"
#include "ealearn/simulator.h"

namespace ealearn::testing {

using NamedTriple = std::tuple<std::string, std::string, std::string>;

KnowledgeGraph make_graph(const std::vector<NamedTriple>& triples);
// Edgeless graph with `n` entities named e0..e{n-1}.
KnowledgeGraph make_isolated(std::size_t n);
// Erdos-Renyi style graph: every unordered pair joined with probability p
// under a random relation; entities e0..e{n-1} exist even when isolated.
KnowledgeGraph random_graph(std::size_t n, double p, std::size_t relations,
                            Rng& rng);

EntityId id(const KnowledgeGraph& g, const std::string& name);

// E^L = {A, B, C}, E^R = {D, E, F}; train (A,E), (C,E); test (A,D), (C,F).
struct SixNode {
  Dataset dataset;
  EntityId A, B, C, D, E, F;
};
SixNode six_node_instance();

// Random graph pair with random train/validation/test alignments (1:n
// allowed) and some exclusives on each side.
Dataset random_dataset(Rng& rng, std::size_t max_nodes = 12);

// Snapshot whose representations equal the given rows (zero-layer model).
struct FixedSnapshot {
  KnowledgeGraphPair graphs;
  std::unique_ptr<ModelSnapshot> snapshot;
};
FixedSnapshot fixed_snapshot(const Matrix& left, const Matrix& right,
                             double dropout_rate = 0.0);

// Independent oracles.

// All-pairs shortest paths with path counts; each unordered pair once.
std::vector<double> brute_force_betweenness(const Adjacency& adjacency);
// Distinct-neighbor degree, sorted by (-degree, NodeRef).
std::vector<RankedNode> reference_degree_order(const KnowledgeGraphPair& pair);
// Quadratic step-through of the greedy vertex-cover weights.
std::vector<RankedNode> reference_avc_order(const KnowledgeGraphPair& pair);
// Greedy k-center by full recomputation of every distance at every pick.
QueryBatch brute_force_coreset(const Matrix& left, const Matrix& right,
                               const PairSet& found, const NodeSet& pool,
                               std::size_t budget);

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

std::string read_text(const std::filesystem::path& path);

}  // namespace ealearn::testing
