#include "ealearn/knowledge_graph.h"

#include <algorithm>
#include <cmath>
#include <iterator>

#include <fmt/format.h>

#include "ealearn/error.h"
#include "ealearn/random.h"

namespace ealearn {

ParseError::ParseError(const std::string& path, std::size_t line,
                       const std::string& what)
    : Error(line == 0 ? fmt::format("{}: {}", path, what)
                      : fmt::format("{}:{}: {}", path, line, what)),
      line_(line) {}

std::string_view side_name(Side s) {
  return s == Side::kLeft ? "left" : "right";
}

std::optional<Side> parse_side(std::string_view name) {
  if (name == "left") return Side::kLeft;
  if (name == "right") return Side::kRight;
  return std::nullopt;
}

std::uint32_t Vocabulary::intern(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it != index_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(names_.size());
  names_.emplace_back(name);
  index_.emplace(names_.back(), id);
  return id;
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

KnowledgeGraph::KnowledgeGraph(Vocabulary entities, Vocabulary relations,
                               std::vector<Triple> triples)
    : entities_(std::move(entities)),
      relations_(std::move(relations)),
      triples_(std::move(triples)) {
  const std::size_t n = entities_.size();
  for (const Triple& t : triples_) {
    if (t.head >= n || t.tail >= n || t.relation >= relations_.size()) {
      throw ValidationError(fmt::format(
          "triple ({}, {}, {}) references an index outside the vocabulary",
          t.head, t.relation, t.tail));
    }
  }
  std::vector<Triple> sorted = triples_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ValidationError("knowledge graph contains duplicate triples");
  }
}

Adjacency undirected_adjacency(const KnowledgeGraph& graph) {
  return GraphView(graph).adjacency();
}

GraphView::GraphView(const KnowledgeGraph& graph)
    : graph_(&graph),
      active_(graph.num_entities(), 1),
      num_active_(graph.num_entities()) {}

std::vector<EntityId> GraphView::active_entities() const {
  std::vector<EntityId> out;
  out.reserve(num_active_);
  for (EntityId e = 0; e < active_.size(); ++e) {
    if (active_[e]) out.push_back(e);
  }
  return out;
}

std::vector<Triple> GraphView::triples() const {
  std::vector<Triple> out;
  for (const Triple& t : graph_->triples()) {
    if (active_[t.head] && active_[t.tail]) out.push_back(t);
  }
  return out;
}

Adjacency GraphView::adjacency() const {
  Adjacency adj(active_.size());
  for (const Triple& t : graph_->triples()) {
    if (t.head == t.tail || !active_[t.head] || !active_[t.tail]) continue;
    adj[t.head].push_back(t.tail);
    adj[t.tail].push_back(t.head);
  }
  for (auto& nbrs : adj) {
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
  }
  return adj;
}

GraphView GraphView::without(std::span<const EntityId> nodes) const {
  GraphView out = *this;
  for (EntityId e : nodes) {
    if (e >= out.active_.size()) {
      throw ValidationError(fmt::format("cannot remove entity {}: graph has {}",
                                        e, out.active_.size()));
    }
    if (out.active_[e]) {
      out.active_[e] = 0;
      --out.num_active_;
    }
  }
  return out;
}

GraphView remove_nodes(const KnowledgeGraph& graph,
                       std::span<const EntityId> nodes) {
  return GraphView(graph).without(nodes);
}

GraphView remove_nodes(const GraphView& view, std::span<const EntityId> nodes) {
  return view.without(nodes);
}

void normalize(PairSet& pairs) {
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
}

PairSet AlignmentSet::all() const {
  PairSet out;
  out.reserve(train.size() + validation.size() + test.size());
  out.insert(out.end(), train.begin(), train.end());
  out.insert(out.end(), validation.begin(), validation.end());
  out.insert(out.end(), test.begin(), test.end());
  normalize(out);
  return out;
}

namespace {

bool overlaps(PairSet a, PairSet b) {
  normalize(a);
  normalize(b);
  PairSet common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(common));
  return !common.empty();
}

void check_indices(const PairSet& pairs, const KnowledgeGraphPair& pair,
                   std::string_view which) {
  for (const AlignmentPair& p : pairs) {
    if (p.left >= pair.left.num_entities() ||
        p.right >= pair.right.num_entities()) {
      throw ValidationError(fmt::format(
          "{} alignment ({}, {}) references an unknown entity", which, p.left,
          p.right));
    }
  }
}

std::vector<EntityId> endpoints(const PairSet& pairs, Side side) {
  std::vector<EntityId> out;
  out.reserve(pairs.size());
  for (const AlignmentPair& p : pairs) out.push_back(p.endpoint(side));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<EntityId> complement(const std::vector<EntityId>& sorted,
                                 std::size_t n) {
  std::vector<EntityId> out;
  auto it = sorted.begin();
  for (EntityId e = 0; e < n; ++e) {
    if (it != sorted.end() && *it == e) {
      ++it;
    } else {
      out.push_back(e);
    }
  }
  return out;
}

void shuffle(PairSet& pairs, std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t i = pairs.size(); i > 1; --i) {
    std::swap(pairs[i - 1], pairs[uniform_index(rng, i)]);
  }
}

// Moves round(fraction * |from|) randomly chosen pairs out of `from`.
PairSet carve(PairSet& from, double fraction, std::uint64_t seed,
              std::string_view what) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ValidationError(
        fmt::format("{} fraction must be in (0, 1), got {}", what, fraction));
  }
  normalize(from);
  shuffle(from, seed);
  const auto take = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(from.size())));
  if (take == 0 || take >= from.size()) {
    throw ValidationError(fmt::format(
        "{} split of {} pairs at fraction {} leaves a partition empty", what,
        from.size(), fraction));
  }
  PairSet carved(from.end() - static_cast<std::ptrdiff_t>(take), from.end());
  from.resize(from.size() - take);
  normalize(from);
  normalize(carved);
  return carved;
}

}  // namespace

void validate(const AlignmentSet& alignments, const KnowledgeGraphPair& pair) {
  check_indices(alignments.train, pair, "train");
  check_indices(alignments.validation, pair, "validation");
  check_indices(alignments.test, pair, "test");
  if (overlaps(alignments.train, alignments.validation) ||
      overlaps(alignments.train, alignments.test) ||
      overlaps(alignments.validation, alignments.test)) {
    throw ValidationError("train, validation and test alignments overlap");
  }
}

NodePartition compute_partition(const KnowledgeGraphPair& pair,
                                const AlignmentSet& alignments) {
  const PairSet all = alignments.all();
  check_indices(all, pair, "partition");
  NodePartition out;
  out.aligned_left = endpoints(all, Side::kLeft);
  out.aligned_right = endpoints(all, Side::kRight);
  out.exclusive_left = complement(out.aligned_left, pair.left.num_entities());
  out.exclusive_right =
      complement(out.aligned_right, pair.right.num_entities());
  return out;
}

AlignmentSet split_alignments(PairSet pairs, double train_fraction,
                              double validation_fraction, std::uint64_t seed) {
  if (pairs.empty()) throw ValidationError("cannot split an empty pair set");
  AlignmentSet out;
  out.test = carve(pairs, 1.0 - train_fraction, derive_seed(seed, {1}), "test");
  out.validation =
      carve(pairs, validation_fraction, derive_seed(seed, {2}), "validation");
  out.train = std::move(pairs);
  return out;
}

AlignmentSet carve_validation(PairSet train, PairSet test,
                              double validation_fraction, std::uint64_t seed) {
  if (train.empty()) throw ValidationError("cannot split an empty train set");
  AlignmentSet out;
  out.validation =
      carve(train, validation_fraction, derive_seed(seed, {2}), "validation");
  out.train = std::move(train);
  normalize(test);
  out.test = std::move(test);
  return out;
}

}  // namespace ealearn
