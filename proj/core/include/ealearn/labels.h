#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "ealearn/knowledge_graph.h"

namespace ealearn {

// Membership set over the nodes of both graphs; iteration is in NodeRef order.
class NodeSet {
 public:
  NodeSet() = default;
  NodeSet(std::size_t num_left, std::size_t num_right);

  bool contains(NodeRef n) const;
  // Return whether membership changed.
  bool insert(NodeRef n);
  bool erase(NodeRef n);

  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  std::size_t universe(Side s) const { return member_[side_index(s)].size(); }
  std::vector<NodeRef> to_vector() const;

  bool operator==(const NodeSet&) const = default;

 private:
  std::array<std::vector<char>, 2> member_;
  std::size_t size_ = 0;
};

// Nodes chosen by a heuristic, in selection order.
using QueryBatch = std::vector<NodeRef>;

struct OracleResponse {
  PairSet alignments;
  std::array<std::vector<EntityId>, 2> exclusive;
};

struct QueryRecord {
  int step = 0;
  NodeRef node;
  bool aligned = false;
};

// Historical maximum similarity of a node at the time it was queried.
struct PrexpRecord {
  NodeRef node;
  double s_max = 0.0;
  bool had_match = false;
};

struct LabelState {
  NodeSet pool;
  PairSet found_alignments;
  std::array<std::vector<EntityId>, 2> found_exclusive;
  // Every node removed from the pool so far.
  NodeSet labeled;
  int step = 0;
  std::vector<QueryRecord> query_log;

  const std::vector<EntityId>& exclusives(Side s) const {
    return found_exclusive[side_index(s)];
  }
};

}  // namespace ealearn
