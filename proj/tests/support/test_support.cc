#include "test_support.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

namespace ealearn::testing {

KnowledgeGraph make_graph(const std::vector<NamedTriple>& triples) {
  Vocabulary entities;
  Vocabulary relations;
  std::vector<Triple> out;
  for (const auto& [h, r, t] : triples) {
    const EntityId head = entities.intern(h);
    const RelationId rel = relations.intern(r);
    const EntityId tail = entities.intern(t);
    out.push_back({head, rel, tail});
  }
  return KnowledgeGraph(std::move(entities), std::move(relations), std::move(out));
}

KnowledgeGraph make_isolated(std::size_t n) {
  Vocabulary entities;
  for (std::size_t i = 0; i < n; ++i) entities.intern("e" + std::to_string(i));
  Vocabulary relations;
  relations.intern("r");
  return KnowledgeGraph(std::move(entities), std::move(relations), {});
}

KnowledgeGraph random_graph(std::size_t n, double p, std::size_t relations,
                            Rng& rng) {
  Vocabulary ents;
  for (std::size_t i = 0; i < n; ++i) ents.intern("e" + std::to_string(i));
  Vocabulary rels;
  for (std::size_t r = 0; r < relations; ++r) rels.intern("r" + std::to_string(r));
  std::vector<Triple> triples;
  for (EntityId a = 0; a < n; ++a) {
    for (EntityId b = a + 1; b < n; ++b) {
      if (uniform_real(rng) >= p) continue;
      const auto r = static_cast<RelationId>(uniform_index(rng, relations));
      if (uniform_real(rng) < 0.5) {
        triples.push_back({a, r, b});
      } else {
        triples.push_back({b, r, a});
      }
      // Occasional parallel edge under another relation.
      if (relations > 1 && uniform_real(rng) < 0.1) {
        triples.push_back({a, static_cast<RelationId>((r + 1) % relations), b});
      }
    }
  }
  return KnowledgeGraph(std::move(ents), std::move(rels), std::move(triples));
}

EntityId id(const KnowledgeGraph& g, const std::string& name) {
  const auto found = g.entities().find(name);
  if (!found) throw std::runtime_error("no entity " + name);
  return *found;
}

SixNode six_node_instance() {
  SixNode f;
  f.dataset.graphs.left = make_graph({{"A", "r", "B"}, {"B", "r", "C"}});
  f.dataset.graphs.right = make_graph({{"D", "r", "E"}, {"E", "r", "F"}});
  const auto& l = f.dataset.graphs.left;
  const auto& r = f.dataset.graphs.right;
  f.A = id(l, "A");
  f.B = id(l, "B");
  f.C = id(l, "C");
  f.D = id(r, "D");
  f.E = id(r, "E");
  f.F = id(r, "F");
  f.dataset.alignments.train = {{f.A, f.E}, {f.C, f.E}};
  f.dataset.alignments.test = {{f.A, f.D}, {f.C, f.F}};
  normalize(f.dataset.alignments.train);
  normalize(f.dataset.alignments.test);
  return f;
}

Dataset random_dataset(Rng& rng, std::size_t max_nodes) {
  Dataset d;
  const std::size_t nl = 2 + uniform_index(rng, max_nodes - 1);
  const std::size_t nr = 2 + uniform_index(rng, max_nodes - 1);
  d.graphs.left = random_graph(nl, 0.3, 2, rng);
  d.graphs.right = random_graph(nr, 0.3, 2, rng);
  std::set<AlignmentPair> used;
  const std::size_t n_pairs = 1 + uniform_index(rng, std::min(nl, nr) + 2);
  for (std::size_t k = 0; k < n_pairs; ++k) {
    const AlignmentPair p{static_cast<EntityId>(uniform_index(rng, nl)),
                          static_cast<EntityId>(uniform_index(rng, nr))};
    if (!used.insert(p).second) continue;
    const double u = uniform_real(rng);
    if (u < 0.6) {
      d.alignments.train.push_back(p);
    } else if (u < 0.75) {
      d.alignments.validation.push_back(p);
    } else {
      d.alignments.test.push_back(p);
    }
  }
  normalize(d.alignments.train);
  normalize(d.alignments.validation);
  normalize(d.alignments.test);
  return d;
}

FixedSnapshot fixed_snapshot(const Matrix& left, const Matrix& right,
                             double dropout_rate) {
  FixedSnapshot out;
  out.graphs.left = make_isolated(static_cast<std::size_t>(left.rows()));
  out.graphs.right = make_isolated(static_cast<std::size_t>(right.rows()));
  ModelConfig config;
  config.embedding_dim = static_cast<int>(left.cols());
  config.num_layers = 0;
  config.dropout_rate = dropout_rate;
  ModelState state = ModelState::initialize(
      config, out.graphs.left.num_entities(), out.graphs.right.num_entities());
  state.embeddings[0] = left;
  state.embeddings[1] = right;
  auto matching =
      std::make_shared<const MatchingGraph>(GraphPairView(out.graphs));
  out.snapshot = std::make_unique<ModelSnapshot>(state, matching, 7);
  return out;
}

std::vector<double> brute_force_betweenness(const Adjacency& adj) {
  const std::size_t n = adj.size();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, kInf));
  for (std::size_t i = 0; i < n; ++i) {
    dist[i][i] = 0;
    for (EntityId j : adj[i]) dist[i][j] = 1;
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        dist[i][j] = std::min(dist[i][j], dist[i][k] + dist[k][j]);
      }
    }
  }
  // sigma[s][t]: number of shortest s-t paths, filled by increasing distance.
  std::vector<std::vector<double>> sigma(n, std::vector<double>(n, 0.0));
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return dist[s][a] < dist[s][b]; });
    sigma[s][s] = 1;
    for (std::size_t t : order) {
      if (t == s || dist[s][t] == kInf) continue;
      for (EntityId u : adj[t]) {
        if (dist[s][u] + 1 == dist[s][t]) sigma[s][t] += sigma[s][u];
      }
    }
  }
  std::vector<double> bc(n, 0.0);
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t t = s + 1; t < n; ++t) {
        if (s == v || t == v || dist[s][t] == kInf) continue;
        if (dist[s][v] + dist[v][t] == dist[s][t]) {
          bc[v] += sigma[s][v] * sigma[v][t] / sigma[s][t];
        }
      }
    }
  }
  return bc;
}

namespace {

std::vector<std::set<EntityId>> neighbor_sets(const KnowledgeGraph& g) {
  std::vector<std::set<EntityId>> nb(g.num_entities());
  for (const Triple& t : g.triples()) {
    if (t.head == t.tail) continue;
    nb[t.head].insert(t.tail);
    nb[t.tail].insert(t.head);
  }
  return nb;
}

}  // namespace

std::vector<RankedNode> reference_degree_order(const KnowledgeGraphPair& pair) {
  std::vector<RankedNode> out;
  for (Side s : {Side::kLeft, Side::kRight}) {
    const auto nb = neighbor_sets(pair.side(s));
    for (EntityId e = 0; e < nb.size(); ++e) {
      out.push_back({{s, e}, static_cast<double>(nb[e].size())});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const RankedNode& a, const RankedNode& b) {
    return a.score > b.score;
  });
  return out;
}

std::vector<RankedNode> reference_avc_order(const KnowledgeGraphPair& pair) {
  struct Entry {
    NodeRef node;
    double weight;
    bool taken = false;
  };
  std::vector<Entry> entries;
  std::array<std::vector<std::set<EntityId>>, 2> nb;
  for (Side s : {Side::kLeft, Side::kRight}) {
    nb[side_index(s)] = neighbor_sets(pair.side(s));
    for (EntityId e = 0; e < nb[side_index(s)].size(); ++e) {
      entries.push_back({{s, e}, static_cast<double>(nb[side_index(s)][e].size())});
    }
  }
  auto find = [&](NodeRef n) -> Entry& {
    for (Entry& x : entries) {
      if (x.node == n) return x;
    }
    throw std::logic_error("missing node");
  };
  std::vector<RankedNode> out;
  for (std::size_t step = 0; step < entries.size(); ++step) {
    Entry* best = nullptr;
    for (Entry& x : entries) {
      if (x.taken) continue;
      if (best == nullptr || x.weight > best->weight) best = &x;
    }
    best->taken = true;
    out.push_back({best->node, best->weight});
    for (EntityId m : nb[side_index(best->node.side)][best->node.index]) {
      Entry& y = find({best->node.side, m});
      if (!y.taken) y.weight -= 1;
    }
  }
  return out;
}

QueryBatch brute_force_coreset(const Matrix& left, const Matrix& right,
                               const PairSet& found, const NodeSet& pool,
                               std::size_t budget) {
  auto row = [&](NodeRef n) -> Eigen::RowVectorXd {
    return n.side == Side::kLeft ? left.row(n.index) : right.row(n.index);
  };
  std::vector<NodeRef> centers;
  for (const AlignmentPair& p : found) {
    centers.push_back({Side::kLeft, p.left});
    centers.push_back({Side::kRight, p.right});
  }
  QueryBatch out;
  const std::vector<NodeRef> candidates = pool.to_vector();
  while (out.size() < std::min(budget, candidates.size())) {
    double best_distance = -1.0;
    NodeRef best{};
    for (NodeRef c : candidates) {
      if (std::find(out.begin(), out.end(), c) != out.end()) continue;
      double nearest = std::numeric_limits<double>::infinity();
      for (NodeRef z : centers) nearest = std::min(nearest, (row(c) - row(z)).norm());
      if (nearest > best_distance) {
        best_distance = nearest;
        best = c;
      }
    }
    out.push_back(best);
    centers.push_back(best);
  }
  return out;
}

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("ealearn-test-" + std::to_string(::getpid()) + "-" +
           std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace ealearn::testing
