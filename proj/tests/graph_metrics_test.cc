#include "ealearn/graph_metrics.h"

#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "test_support.h"

namespace ealearn {
namespace {

using testing::id;
using testing::make_graph;

KnowledgeGraphPair left_only(KnowledgeGraph g) {
  return {std::move(g), testing::make_isolated(0)};
}

double score_of(const NodeRanking& r, NodeRef n) {
  for (const auto& e : r.entries()) {
    if (e.node == n) return e.score;
  }
  ADD_FAILURE() << "node missing";
  return -1;
}

void expect_same(const NodeRanking& r, const std::vector<RankedNode>& ref) {
  ASSERT_EQ(r.size(), ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    EXPECT_EQ(r[i].node, ref[i].node) << "position " << i;
    EXPECT_EQ(r[i].score, ref[i].score) << "position " << i;
  }
}

TEST(Degree, TriangleWithPendantStartsWithHub) {
  const auto pair = left_only(make_graph(
      {{"a", "r", "b"}, {"b", "r", "c"}, {"c", "r", "a"}, {"d", "r", "a"}}));
  const NodeRanking r = degree_ranking(pair);
  EXPECT_EQ(r[0].node, (NodeRef{Side::kLeft, id(pair.left, "a")}));
  EXPECT_EQ(r[0].score, 3.0);
}

TEST(Degree, ParallelRelationsCollapse) {
  const auto pair = left_only(make_graph({{"a", "r1", "b"}, {"a", "r2", "b"}}));
  EXPECT_EQ(score_of(degree_ranking(pair), {Side::kLeft, 0}), 1.0);
}

TEST(Degree, MatchesBruteForceRecount) {
  Rng rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    KnowledgeGraphPair pair{testing::random_graph(15, 0.2, 2, rng),
                            testing::random_graph(15, 0.2, 2, rng)};
    expect_same(degree_ranking(pair), testing::reference_degree_order(pair));
  }
}

TEST(Degree, InvariantUnderTriplePermutation) {
  Rng rng(2);
  const KnowledgeGraph g = testing::random_graph(25, 0.15, 3, rng);
  std::vector<Triple> shuffled = g.triples();
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const KnowledgeGraph h(g.entities(), g.relations(), shuffled);
  const NodeRanking a = degree_ranking(left_only(g));
  const NodeRanking b = degree_ranking(left_only(h));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].node, b[i].node);
}

TEST(Betweenness, Path) {
  const auto g = make_graph({{"a", "r", "b"}, {"b", "r", "c"}});
  const auto bc = betweenness(undirected_adjacency(g));
  EXPECT_DOUBLE_EQ(bc[id(g, "b")], 1.0);
  EXPECT_DOUBLE_EQ(bc[id(g, "a")], 0.0);
  EXPECT_DOUBLE_EQ(bc[id(g, "c")], 0.0);
}

TEST(Betweenness, StarCenterMediatesEveryLeafPair) {
  const auto g = make_graph({{"c", "r", "x"}, {"c", "r", "y"}, {"z", "r", "c"}});
  EXPECT_DOUBLE_EQ(betweenness(undirected_adjacency(g))[id(g, "c")], 3.0);
}

TEST(Betweenness, MatchesAllPairsOracle) {
  Rng rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 30);
    const auto g = testing::random_graph(n, 0.05 + 0.3 * uniform_real(rng), 2, rng);
    const Adjacency adj = undirected_adjacency(g);
    const auto fast = betweenness(adj);
    const auto slow = testing::brute_force_betweenness(adj);
    for (std::size_t v = 0; v < n; ++v) EXPECT_NEAR(fast[v], slow[v], 1e-9);
  }
}

TEST(Betweenness, TreeCountsPairsThroughNode) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 3 + uniform_index(rng, 20);
    std::vector<testing::NamedTriple> t;
    std::vector<std::size_t> parent(n, 0);
    for (std::size_t v = 1; v < n; ++v) {
      parent[v] = uniform_index(rng, v);
      t.push_back({"n" + std::to_string(v), "r", "n" + std::to_string(parent[v])});
    }
    const auto g = make_graph(t);
    const auto bc = betweenness(undirected_adjacency(g));
    // In a tree, v lies on the s-t path iff removing v separates s and t.
    for (std::size_t v = 0; v < n; ++v) {
      const EntityId ev = id(g, "n" + std::to_string(v));
      std::vector<std::size_t> comp_sizes;
      std::size_t below_total = 0;
      for (std::size_t c = 1; c < n; ++c) {
        if (parent[c] != v) continue;
        std::size_t size = 0;
        for (std::size_t u = 0; u < n; ++u) {
          std::size_t x = u;
          while (x != 0 && x != c) x = parent[x];
          if (x == c) ++size;
        }
        comp_sizes.push_back(size);
        below_total += size;
      }
      if (v != 0) comp_sizes.push_back(n - 1 - below_total);
      double pairs = 0;
      for (std::size_t i = 0; i < comp_sizes.size(); ++i) {
        for (std::size_t j = i + 1; j < comp_sizes.size(); ++j) {
          pairs += static_cast<double>(comp_sizes[i] * comp_sizes[j]);
        }
      }
      EXPECT_DOUBLE_EQ(bc[ev], pairs);
    }
  }
}

TEST(Betweenness, RankingCoversBothSides) {
  const KnowledgeGraphPair pair{make_graph({{"a", "r", "b"}, {"b", "r", "c"}}),
                                make_graph({{"x", "r", "y"}})};
  const NodeRanking r = betweenness_ranking(pair);
  ASSERT_EQ(r.size(), 5u);
  EXPECT_EQ(r[0].node, (NodeRef{Side::kLeft, id(pair.left, "b")}));
  // Zero-score ties follow NodeRef order.
  EXPECT_EQ(r[1].node, (NodeRef{Side::kLeft, 0}));
  EXPECT_EQ(r[4].node, (NodeRef{Side::kRight, 1}));
}

TEST(Avc, StarCenterThenLeavesAtZero) {
  const auto pair = left_only(make_graph({{"c", "r", "x"}, {"c", "r", "y"}, {"c", "r", "z"}}));
  const NodeRanking r = avc_ranking(pair);
  EXPECT_EQ(r[0].node, (NodeRef{Side::kLeft, id(pair.left, "c")}));
  EXPECT_EQ(r[0].score, 3.0);
  for (std::size_t i = 1; i < 4; ++i) {
    EXPECT_EQ(r[i].score, 0.0);
    EXPECT_EQ(r[i].node.index, i);
  }
}

TEST(Avc, EdgelessIsTieBreakOrder) {
  const KnowledgeGraphPair pair{testing::make_isolated(3), testing::make_isolated(2)};
  const NodeRanking r = avc_ranking(pair);
  std::vector<NodeRef> order;
  for (const auto& e : r.entries()) {
    order.push_back(e.node);
    EXPECT_EQ(e.score, 0.0);
  }
  EXPECT_TRUE(std::is_sorted(order.begin(), order.end()));
}

TEST(Avc, FourCycle) {
  const auto pair = left_only(
      make_graph({{"a", "r", "b"}, {"b", "r", "c"}, {"c", "r", "d"}, {"d", "r", "a"}}));
  const NodeRanking r = avc_ranking(pair);
  const auto& g = pair.left;
  EXPECT_EQ(r[0].node.index, id(g, "a"));
  EXPECT_EQ(r[0].score, 2.0);
  EXPECT_EQ(r[1].node.index, id(g, "c"));
  EXPECT_EQ(r[1].score, 2.0);
  EXPECT_EQ(r[2].node.index, id(g, "b"));
  EXPECT_EQ(r[2].score, 0.0);
  EXPECT_EQ(r[3].node.index, id(g, "d"));
  EXPECT_EQ(r[3].score, 0.0);
}

TEST(Avc, MatchesStepThroughReference) {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    KnowledgeGraphPair pair{testing::random_graph(12, 0.3, 2, rng),
                            testing::random_graph(9, 0.3, 2, rng)};
    expect_same(avc_ranking(pair), testing::reference_avc_order(pair));
  }
}

TEST(Rankings, EveryRankingIsAPermutation) {
  Rng rng(6);
  KnowledgeGraphPair pair{testing::random_graph(20, 0.2, 2, rng),
                          testing::random_graph(17, 0.2, 2, rng)};
  for (const NodeRanking& r :
       {degree_ranking(pair), betweenness_ranking(pair), avc_ranking(pair)}) {
    std::vector<NodeRef> nodes;
    for (const auto& e : r.entries()) nodes.push_back(e.node);
    std::sort(nodes.begin(), nodes.end());
    ASSERT_EQ(nodes.size(), 37u);
    EXPECT_TRUE(std::adjacent_find(nodes.begin(), nodes.end()) == nodes.end());
  }
}

TEST(Rankings, CsvExport) {
  const KnowledgeGraphPair pair{make_graph({{"a", "r", "b"}}), make_graph({{"x,1", "r", "y"}})};
  testing::TempDir dir;
  write_ranking_csv(degree_ranking(pair), pair, dir.path() / "deg.csv");
  const std::string text = testing::read_text(dir.path() / "deg.csv");
  EXPECT_EQ(text,
            "side,node,score,rank\n"
            "left,a,1,1\n"
            "left,b,1,2\n"
            "right,\"x,1\",1,3\n"
            "right,y,1,4\n");
}

}  // namespace
}  // namespace ealearn
