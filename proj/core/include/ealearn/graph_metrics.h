#pragma once

#include <filesystem>
#include <vector>

#include "ealearn/knowledge_graph.h"

namespace ealearn {

struct RankedNode {
  NodeRef node;
  double score = 0.0;
};

// Joint ranking over both graphs: descending score, ties broken by NodeRef
// order (left before right, index ascending). Every node appears once.
class NodeRanking {
 public:
  NodeRanking() = default;
  // Sorts `entries` into ranking order.
  explicit NodeRanking(std::vector<RankedNode> entries);
  // Keeps `entries` in the given order (used by greedy rankings whose order is
  // not a sort by score).
  static NodeRanking from_order(std::vector<RankedNode> entries);

  const std::vector<RankedNode>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  const RankedNode& operator[](std::size_t i) const { return entries_[i]; }

 private:
  std::vector<RankedNode> entries_;
};

// Collapsed undirected degree of every node of both graphs.
NodeRanking degree_ranking(const KnowledgeGraphPair& pair);

// Unnormalized undirected betweenness (Brandes), each unordered source/target
// pair counted once. The two sides are computed concurrently.
NodeRanking betweenness_ranking(const KnowledgeGraphPair& pair);

// Single-graph betweenness scores indexed by entity.
std::vector<double> betweenness(const Adjacency& adjacency);

// Greedy approximate-vertex-cover order: weights start at the collapsed
// degree; the max-weight node is taken and its unselected neighbors lose one.
// The recorded score is the weight at selection time.
NodeRanking avc_ranking(const KnowledgeGraphPair& pair);

// CSV with header side,node,score,rank (rank is 1-based).
void write_ranking_csv(const NodeRanking& ranking,
                       const KnowledgeGraphPair& pair,
                       const std::filesystem::path& path);

}  // namespace ealearn
