#include "ealearn/simulator.h"

#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "ealearn/error.h"
#include "ealearn/synthetic.h"
#include "test_support.h"

namespace ealearn {
namespace {

LabelState six_node_pool(const testing::SixNode& f, const Oracle& oracle) {
  return init_pool(oracle.partition(), f.dataset.alignments, 3, 3);
}

TEST(Pool, InitialPoolHoldsTrainEndpointsAndExclusives) {
  const auto f = testing::six_node_instance();
  const Oracle oracle(f.dataset.graphs, f.dataset.alignments);
  const LabelState s = six_node_pool(f, oracle);
  const std::vector<NodeRef> expected{
      {Side::kLeft, f.A}, {Side::kLeft, f.B}, {Side::kLeft, f.C}, {Side::kRight, f.E}};
  std::vector<NodeRef> sorted = expected;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(s.pool.to_vector(), sorted);
  EXPECT_FALSE(s.pool.contains({Side::kRight, f.D}));
  EXPECT_FALSE(s.pool.contains({Side::kRight, f.F}));
}

TEST(Oracle, AnswersWithEveryIncidentTrainPair) {
  const auto f = testing::six_node_instance();
  const Oracle oracle(f.dataset.graphs, f.dataset.alignments);
  const LabelState s = six_node_pool(f, oracle);
  const OracleResponse r = oracle_answer(s, {{Side::kRight, f.E}}, oracle);
  PairSet expected{{f.A, f.E}, {f.C, f.E}};
  normalize(expected);
  EXPECT_EQ(r.alignments, expected);
  EXPECT_TRUE(r.exclusive[0].empty());
  EXPECT_TRUE(r.exclusive[1].empty());
}

TEST(Oracle, ExclusiveQueryIsFlagged) {
  const auto f = testing::six_node_instance();
  const Oracle oracle(f.dataset.graphs, f.dataset.alignments);
  const LabelState s = six_node_pool(f, oracle);
  const OracleResponse r = oracle_answer(s, {{Side::kLeft, f.B}}, oracle);
  EXPECT_TRUE(r.alignments.empty());
  EXPECT_EQ(r.exclusive[0], std::vector<EntityId>{f.B});
}

TEST(Oracle, QueryOutsidePoolIsRejected) {
  const auto f = testing::six_node_instance();
  const Oracle oracle(f.dataset.graphs, f.dataset.alignments);
  const LabelState s = six_node_pool(f, oracle);
  EXPECT_THROW(oracle_answer(s, {{Side::kRight, f.D}}, oracle), ValidationError);
}

TEST(Apply, QueryingOneEndpointKeepsTheOtherPartnerInPool) {
  const auto f = testing::six_node_instance();
  const Oracle oracle(f.dataset.graphs, f.dataset.alignments);
  LabelState s = six_node_pool(f, oracle);
  const QueryBatch q{{Side::kLeft, f.A}};
  apply_response(s, q, oracle_answer(s, q, oracle));
  EXPECT_EQ(s.found_alignments, (PairSet{{f.A, f.E}}));
  EXPECT_FALSE(s.pool.contains({Side::kLeft, f.A}));
  EXPECT_FALSE(s.pool.contains({Side::kRight, f.E}));
  EXPECT_TRUE(s.pool.contains({Side::kLeft, f.C}));
  EXPECT_TRUE(s.pool.contains({Side::kLeft, f.B}));
  EXPECT_EQ(s.step, 1);
  ASSERT_EQ(s.query_log.size(), 1u);
  EXPECT_TRUE(s.query_log[0].aligned);
}

TEST(Apply, WholePoolInOneStepExhaustsIt) {
  const auto f = testing::six_node_instance();
  const Oracle oracle(f.dataset.graphs, f.dataset.alignments);
  LabelState s = six_node_pool(f, oracle);
  const QueryBatch q = s.pool.to_vector();
  apply_response(s, q, oracle_answer(s, q, oracle));
  EXPECT_TRUE(s.pool.empty());
  EXPECT_EQ(s.found_alignments.size(), 2u);
  EXPECT_EQ(s.exclusives(Side::kLeft), std::vector<EntityId>{f.B});
}

TEST(Apply, MatchesSetAlgebraOnRandomInstances) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const Dataset d = testing::random_dataset(rng);
    const Oracle oracle(d.graphs, d.alignments);
    LabelState s;
    try {
      s = init_pool(oracle.partition(), d.alignments, d.graphs.left.num_entities(),
                    d.graphs.right.num_entities());
    } catch (const ValidationError&) {
      continue;
    }
    const std::size_t initial = s.pool.size();
    while (!s.pool.empty()) {
      std::vector<NodeRef> pool = s.pool.to_vector();
      std::shuffle(pool.begin(), pool.end(), rng);
      const QueryBatch q(pool.begin(),
                         pool.begin() + static_cast<long>(1 + uniform_index(rng, pool.size())));
      std::set<NodeRef> expected_pool(pool.begin(), pool.end());
      std::set<AlignmentPair> revealed;
      for (NodeRef n : q) {
        if (oracle.is_exclusive(n)) {
          expected_pool.erase(n);
          continue;
        }
        for (const AlignmentPair& p : d.alignments.train) {
          if ((n.side == Side::kLeft && p.left == n.index) ||
              (n.side == Side::kRight && p.right == n.index)) {
            revealed.insert(p);
          }
        }
      }
      for (const AlignmentPair& p : revealed) {
        expected_pool.erase({Side::kLeft, p.left});
        expected_pool.erase({Side::kRight, p.right});
      }
      const std::size_t before = s.found_alignments.size();
      apply_response(s, q, oracle_answer(s, q, oracle));
      EXPECT_EQ(std::vector<NodeRef>(expected_pool.begin(), expected_pool.end()),
                s.pool.to_vector());
      EXPECT_GE(s.found_alignments.size(), before);
      EXPECT_EQ(s.pool.size() + s.labeled.size(), initial);
      for (const AlignmentPair& p : s.found_alignments) {
        EXPECT_TRUE(std::binary_search(d.alignments.train.begin(),
                                       d.alignments.train.end(), p));
      }
    }
  }
}

Dataset small_dataset(std::uint64_t seed = 3) {
  SyntheticParams p;
  p.n_core = 40;
  p.n_exclusive_left = 8;
  p.n_exclusive_right = 8;
  p.perturbation = 0.1;
  p.seed = seed;
  SyntheticDataset s = generate_synthetic_pair(p);
  Dataset d;
  d.graphs = std::move(s.graphs);
  d.alignments = split_alignments(s.ground_truth, 0.7, 0.2, seed);
  return d;
}

SimulationConfig small_config(const std::string& heuristic) {
  SimulationConfig c;
  c.heuristic = heuristic;
  c.budget = 10;
  c.model.embedding_dim = 8;
  c.model.max_epochs = 20;
  c.model.eval_every = 5;
  c.model.patience = 10;
  c.seed = 5;
  return c;
}

std::vector<NodeRef> queried(const SimulationResult& r) {
  std::vector<NodeRef> out;
  for (const QueryRecord& q : r.query_log) out.push_back(q.node);
  return out;
}

TEST(Simulation, StaticHeuristicQueriesIgnoreExclusiveRemoval) {
  const Dataset d = small_dataset();
  for (const char* h : {"deg", "betw", "avc"}) {
    SimulationConfig on = small_config(h);
    SimulationConfig off = on;
    off.exclusive_removal = false;
    EXPECT_EQ(queried(run_simulation(d, on)), queried(run_simulation(d, off))) << h;
  }
}

TEST(Simulation, InvariantsAcrossHeuristics) {
  const Dataset d = small_dataset();
  const Oracle oracle(d.graphs, d.alignments);
  for (const std::string& h : heuristic_names()) {
    SimulationConfig c = small_config(h);
    if (h == "bald") c.heuristic_params = {{"runs", "3"}};
    c.model.dropout_rate = 0.2;
    const SimulationResult r = run_simulation(d, c);
    ASSERT_FALSE(r.steps.empty()) << h;
    EXPECT_EQ(r.total_queries, r.initial_pool);
    std::set<NodeRef> seen;
    std::size_t exclusives = 0;
    for (const QueryRecord& q : r.query_log) {
      EXPECT_TRUE(seen.insert(q.node).second) << h << ": node queried twice";
      EXPECT_EQ(q.aligned, !oracle.is_exclusive(q.node));
      if (!q.aligned) ++exclusives;
    }
    for (std::size_t i = 0; i < r.steps.size(); ++i) {
      const StepRecord& s = r.steps[i];
      EXPECT_EQ(s.step, static_cast<int>(i + 1));
      EXPECT_LE(s.found_alignments, d.alignments.train.size());
      EXPECT_GE(s.test_h1, 0.0);
      EXPECT_LE(s.test_h1, 1.0);
      if (i > 0) {
        EXPECT_GE(s.found_alignments, r.steps[i - 1].found_alignments);
        EXPECT_GT(s.queries, r.steps[i - 1].queries);
      }
    }
    EXPECT_EQ(r.steps.back().found_exclusives, exclusives);
    EXPECT_EQ(r.steps.back().queries, r.query_log.size());
    EXPECT_LE(r.query_log.size(), r.initial_pool);
  }
}

TEST(Simulation, CurveLengthWithoutEarlyExhaustion) {
  // Query budget small enough that the pool cannot empty first.
  const Dataset d = small_dataset();
  SimulationConfig c = small_config("rnd");
  c.budget = 7;
  c.query_budget = 30;
  const SimulationResult r = run_simulation(d, c);
  EXPECT_EQ(r.steps.size(), 5u);  // ceil(30 / 7)
  EXPECT_EQ(r.steps.back().queries, 30u);
  EXPECT_EQ(r.total_queries, 30u);
}

TEST(Simulation, DeterministicForFixedSeed) {
  const Dataset d = small_dataset();
  const SimulationConfig c = small_config("cs");
  const SimulationResult a = run_simulation(d, c);
  const SimulationResult b = run_simulation(d, c);
  EXPECT_EQ(queried(a), queried(b));
  ASSERT_EQ(a.steps.size(), b.steps.size());
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    EXPECT_EQ(a.steps[i].test_h1, b.steps[i].test_h1);
  }
}

TEST(Simulation, RequiresValidationAlignments) {
  Dataset d = small_dataset();
  d.alignments.validation.clear();
  EXPECT_THROW(run_simulation(d, small_config("rnd")), ValidationError);
}

TEST(Simulation, RejectsBadConfig) {
  const Dataset d = small_dataset();
  SimulationConfig c = small_config("rnd");
  c.budget = 0;
  EXPECT_THROW(run_simulation(d, c), ValidationError);
  c = small_config("nope");
  EXPECT_THROW(run_simulation(d, c), ValidationError);
}

}  // namespace
}  // namespace ealearn
