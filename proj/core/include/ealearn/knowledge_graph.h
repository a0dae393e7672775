#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ealearn {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

enum class Side : std::uint8_t { kLeft = 0, kRight = 1 };

constexpr Side opposite(Side s) {
  return s == Side::kLeft ? Side::kRight : Side::kLeft;
}
constexpr std::size_t side_index(Side s) { return static_cast<std::size_t>(s); }
std::string_view side_name(Side s);
std::optional<Side> parse_side(std::string_view name);

// A node of one of the two graphs. The defaulted ordering (left before right,
// then index ascending) is the global tie-break used by every ranking.
struct NodeRef {
  Side side = Side::kLeft;
  EntityId index = 0;

  auto operator<=>(const NodeRef&) const = default;
};

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  auto operator<=>(const Triple&) const = default;
};

// String identifiers mapped to dense indices in first-appearance order.
class Vocabulary {
 public:
  // Returns the existing index of `name` or appends it.
  std::uint32_t intern(std::string_view name);
  std::optional<std::uint32_t> find(std::string_view name) const;
  const std::string& name(std::uint32_t id) const { return names_.at(id); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;
  // Throws ValidationError on out-of-range indices or duplicate triples.
  KnowledgeGraph(Vocabulary entities, Vocabulary relations,
                 std::vector<Triple> triples);

  const Vocabulary& entities() const { return entities_; }
  const Vocabulary& relations() const { return relations_; }
  const std::vector<Triple>& triples() const { return triples_; }
  std::size_t num_entities() const { return entities_.size(); }
  std::size_t num_relations() const { return relations_.size(); }

 private:
  Vocabulary entities_;
  Vocabulary relations_;
  std::vector<Triple> triples_;
};

struct KnowledgeGraphPair {
  KnowledgeGraph left;
  KnowledgeGraph right;

  const KnowledgeGraph& side(Side s) const {
    return s == Side::kLeft ? left : right;
  }
};

// Undirected simple-graph neighbor lists: parallel relations collapse to one
// edge, direction is dropped and self-loops are ignored. Lists are sorted.
using Adjacency = std::vector<std::vector<EntityId>>;

// A graph with some entities masked out. Masked entities keep their indices
// but lose every incident triple. The underlying graph must outlive the view.
class GraphView {
 public:
  GraphView() = default;
  explicit GraphView(const KnowledgeGraph& graph);

  const KnowledgeGraph& graph() const { return *graph_; }
  std::size_t num_entities() const { return active_.size(); }
  bool is_active(EntityId e) const { return active_[e] != 0; }
  std::size_t num_active() const { return num_active_; }

  // Active entity indices, ascending.
  std::vector<EntityId> active_entities() const;
  // Triples whose endpoints are both active, in the graph's triple order.
  std::vector<Triple> triples() const;
  Adjacency adjacency() const;

  // Returns a new view with `nodes` additionally masked.
  GraphView without(std::span<const EntityId> nodes) const;

 private:
  const KnowledgeGraph* graph_ = nullptr;
  std::vector<char> active_;
  std::size_t num_active_ = 0;
};

GraphView remove_nodes(const KnowledgeGraph& graph,
                       std::span<const EntityId> nodes);
GraphView remove_nodes(const GraphView& view, std::span<const EntityId> nodes);

struct GraphPairView {
  GraphView left;
  GraphView right;

  GraphPairView() = default;
  explicit GraphPairView(const KnowledgeGraphPair& pair)
      : left(pair.left), right(pair.right) {}

  const GraphView& side(Side s) const {
    return s == Side::kLeft ? left : right;
  }
  GraphView& side(Side s) { return s == Side::kLeft ? left : right; }
};

Adjacency undirected_adjacency(const KnowledgeGraph& graph);

struct AlignmentPair {
  EntityId left = 0;
  EntityId right = 0;

  EntityId endpoint(Side s) const { return s == Side::kLeft ? left : right; }
  auto operator<=>(const AlignmentPair&) const = default;
};

// Sorted, duplicate-free list of pairs.
using PairSet = std::vector<AlignmentPair>;

// Sorts and deduplicates in place.
void normalize(PairSet& pairs);

struct AlignmentSet {
  PairSet train;
  PairSet validation;
  PairSet test;

  // Union of the three partitions, sorted.
  PairSet all() const;
};

// Throws ValidationError if partitions overlap or an index is out of range.
void validate(const AlignmentSet& alignments, const KnowledgeGraphPair& pair);

struct NodePartition {
  std::vector<EntityId> aligned_left;
  std::vector<EntityId> aligned_right;
  std::vector<EntityId> exclusive_left;
  std::vector<EntityId> exclusive_right;

  const std::vector<EntityId>& aligned(Side s) const {
    return s == Side::kLeft ? aligned_left : aligned_right;
  }
  const std::vector<EntityId>& exclusive(Side s) const {
    return s == Side::kLeft ? exclusive_left : exclusive_right;
  }
};

// Aligned sets are the endpoints of train, validation and test pairs; every
// other entity is exclusive.
NodePartition compute_partition(const KnowledgeGraphPair& pair,
                                const AlignmentSet& alignments);

// Splits `pairs` into train/test by `train_fraction`, then carves
// `validation_fraction` of the train side off as validation.
AlignmentSet split_alignments(PairSet pairs, double train_fraction,
                              double validation_fraction, std::uint64_t seed);

// Official train/test split given: carves validation from the train side only,
// leaving test untouched.
AlignmentSet carve_validation(PairSet train, PairSet test,
                              double validation_fraction, std::uint64_t seed);

}  // namespace ealearn
