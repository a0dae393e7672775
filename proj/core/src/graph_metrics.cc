#include "ealearn/graph_metrics.h"

#include <algorithm>
#include <array>
#include <fstream>
#include <future>
#include <queue>
#include <set>

#include <fmt/format.h>

#include "ealearn/error.h"
#include "text_util.h"

namespace ealearn {
namespace {

bool ranks_before(const RankedNode& a, const RankedNode& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.node < b.node;
}

std::array<Adjacency, 2> both_adjacencies(const KnowledgeGraphPair& pair) {
  return {undirected_adjacency(pair.left), undirected_adjacency(pair.right)};
}

}  // namespace

NodeRanking::NodeRanking(std::vector<RankedNode> entries)
    : entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(), ranks_before);
}

NodeRanking NodeRanking::from_order(std::vector<RankedNode> entries) {
  NodeRanking r;
  r.entries_ = std::move(entries);
  return r;
}

NodeRanking degree_ranking(const KnowledgeGraphPair& pair) {
  const auto adj = both_adjacencies(pair);
  std::vector<RankedNode> entries;
  for (Side s : {Side::kLeft, Side::kRight}) {
    const Adjacency& a = adj[side_index(s)];
    for (EntityId e = 0; e < a.size(); ++e) {
      entries.push_back({{s, e}, static_cast<double>(a[e].size())});
    }
  }
  return NodeRanking(std::move(entries));
}

std::vector<double> betweenness(const Adjacency& adjacency) {
  const std::size_t n = adjacency.size();
  std::vector<double> centrality(n, 0.0);
  std::vector<double> sigma(n);
  std::vector<double> delta(n);
  std::vector<long> dist(n);
  std::vector<EntityId> order;
  order.reserve(n);
  std::queue<EntityId> frontier;

  for (EntityId source = 0; source < n; ++source) {
    std::fill(sigma.begin(), sigma.end(), 0.0);
    std::fill(delta.begin(), delta.end(), 0.0);
    std::fill(dist.begin(), dist.end(), -1);
    order.clear();
    sigma[source] = 1.0;
    dist[source] = 0;
    frontier.push(source);
    while (!frontier.empty()) {
      const EntityId v = frontier.front();
      frontier.pop();
      order.push_back(v);
      for (EntityId w : adjacency[v]) {
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          frontier.push(w);
        }
        if (dist[w] == dist[v] + 1) sigma[w] += sigma[v];
      }
    }
    // Predecessors are recovered from distances instead of stored lists.
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const EntityId w = *it;
      for (EntityId v : adjacency[w]) {
        if (dist[v] == dist[w] - 1) {
          delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
        }
      }
      if (w != source) centrality[w] += delta[w];
    }
  }
  // Every unordered pair was accumulated from both of its endpoints.
  for (double& c : centrality) c /= 2.0;
  return centrality;
}

NodeRanking betweenness_ranking(const KnowledgeGraphPair& pair) {
  auto right = std::async(std::launch::async, [&pair] {
    return betweenness(undirected_adjacency(pair.right));
  });
  const std::vector<double> left = betweenness(undirected_adjacency(pair.left));
  const std::vector<double> right_scores = right.get();

  std::vector<RankedNode> entries;
  entries.reserve(left.size() + right_scores.size());
  for (EntityId e = 0; e < left.size(); ++e) {
    entries.push_back({{Side::kLeft, e}, left[e]});
  }
  for (EntityId e = 0; e < right_scores.size(); ++e) {
    entries.push_back({{Side::kRight, e}, right_scores[e]});
  }
  return NodeRanking(std::move(entries));
}

NodeRanking avc_ranking(const KnowledgeGraphPair& pair) {
  const auto adj = both_adjacencies(pair);
  // Candidate set ordered by (weight desc, node asc); updates re-key entries.
  struct Key {
    long weight;
    NodeRef node;
    bool operator<(const Key& o) const {
      if (weight != o.weight) return weight > o.weight;
      return node < o.node;
    }
  };
  std::array<std::vector<long>, 2> weight;
  std::array<std::vector<char>, 2> selected;
  std::set<Key> candidates;
  for (Side s : {Side::kLeft, Side::kRight}) {
    const Adjacency& a = adj[side_index(s)];
    weight[side_index(s)].resize(a.size());
    selected[side_index(s)].assign(a.size(), 0);
    for (EntityId e = 0; e < a.size(); ++e) {
      weight[side_index(s)][e] = static_cast<long>(a[e].size());
      candidates.insert({weight[side_index(s)][e], {s, e}});
    }
  }

  std::vector<RankedNode> order;
  order.reserve(candidates.size());
  while (!candidates.empty()) {
    const Key top = *candidates.begin();
    candidates.erase(candidates.begin());
    const std::size_t s = side_index(top.node.side);
    selected[s][top.node.index] = 1;
    order.push_back({top.node, static_cast<double>(top.weight)});
    for (EntityId nb : adj[s][top.node.index]) {
      if (selected[s][nb]) continue;
      long& w = weight[s][nb];
      candidates.erase({w, {top.node.side, nb}});
      --w;
      candidates.insert({w, {top.node.side, nb}});
    }
  }
  return NodeRanking::from_order(std::move(order));
}

void write_ranking_csv(const NodeRanking& ranking,
                       const KnowledgeGraphPair& pair,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  out << "side,node,score,rank\n";
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    const RankedNode& r = ranking[i];
    const std::string& name = pair.side(r.node.side).entities().name(r.node.index);
    out << side_name(r.node.side) << ',' << detail::csv_field(name) << ','
        << fmt::format("{:.17g}", r.score) << ',' << (i + 1) << '\n';
  }
}

}  // namespace ealearn
