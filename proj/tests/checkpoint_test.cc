#include "ealearn/checkpoint.h"

#include <gtest/gtest.h>

#include "ealearn/error.h"
#include "test_support.h"

namespace ealearn {
namespace {

struct Fixture {
  KnowledgeGraphPair pair;
  PairSet train;
  PairSet validation;
  ModelConfig config;

  Fixture() {
    Rng rng(1);
    pair = {testing::random_graph(20, 0.2, 2, rng), testing::random_graph(20, 0.2, 2, rng)};
    for (EntityId i = 0; i < 10; ++i) train.push_back({i, i});
    for (EntityId i = 10; i < 14; ++i) validation.push_back({i, i});
    config.embedding_dim = 8;
    config.optimizer = OptimizerKind::kAdam;
    config.dropout_rate = 0.1;
    config.max_epochs = 30;
    config.eval_every = 5;
    config.patience = 1000;
  }
};

TEST(Checkpoint, RoundTripIsExact) {
  Fixture f;
  const MatchingGraph g(GraphPairView{f.pair});
  ModelState s = ModelState::initialize(f.config, 20, 20);
  train_until_early_stop(s, g, f.train, f.validation);
  const ModelState back = deserialize_checkpoint(serialize_checkpoint(s));
  for (std::size_t side = 0; side < 2; ++side) {
    EXPECT_EQ(back.embeddings[side], s.embeddings[side]);
    EXPECT_EQ(back.adam_first[side], s.adam_first[side]);
    EXPECT_EQ(back.adam_second[side], s.adam_second[side]);
  }
  EXPECT_EQ(back.epoch, s.epoch);
  EXPECT_EQ(back.adam_steps, s.adam_steps);
  EXPECT_EQ(back.rng, s.rng);
  EXPECT_EQ(back.config.learning_rate, s.config.learning_rate);
  EXPECT_EQ(back.config.optimizer, s.config.optimizer);
}

TEST(Checkpoint, ResumedTrainingMatchesUninterrupted) {
  Fixture f;
  const MatchingGraph g(GraphPairView{f.pair});
  ModelState straight = ModelState::initialize(f.config, 20, 20);
  train_until_early_stop(straight, g, f.train, f.validation);
  ModelState resumed = straight;
  testing::TempDir dir;
  save_checkpoint(straight, dir.path() / "ckpt.json");
  resumed = load_checkpoint(dir.path() / "ckpt.json");
  const TrainReport a = train_until_early_stop(straight, g, f.train, f.validation);
  const TrainReport b = train_until_early_stop(resumed, g, f.train, f.validation);
  EXPECT_EQ(a.last_loss, b.last_loss);
  EXPECT_EQ(straight.embeddings[0], resumed.embeddings[0]);
}

TEST(Checkpoint, RejectsForeignOrCorruptBlobs) {
  EXPECT_THROW(deserialize_checkpoint("not json"), Error);
  EXPECT_THROW(deserialize_checkpoint(R"({"format":"other","version":1})"), Error);
  Fixture f;
  std::string blob = serialize_checkpoint(ModelState::initialize(f.config, 3, 3));
  blob.replace(blob.find("\"version\":1"), 11, "\"version\":9");
  EXPECT_THROW(deserialize_checkpoint(blob), Error);
  EXPECT_THROW(load_checkpoint("/nonexistent/ckpt.json"), Error);
}

}  // namespace
}  // namespace ealearn
