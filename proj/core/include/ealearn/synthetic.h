#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include "ealearn/knowledge_graph.h"

namespace ealearn {

struct SyntheticParams {
  std::size_t n_core = 300;
  std::size_t n_exclusive_left = 60;
  std::size_t n_exclusive_right = 60;
  std::size_t n_relations = 10;
  // Mean degree of the core graph.
  double edge_factor = 4.0;
  // Probability of dropping each core triple, independently per side.
  double perturbation = 0.1;
  std::uint64_t seed = 0;
};

struct SyntheticDataset {
  KnowledgeGraphPair graphs;
  // Identity on the core entities.
  PairSet ground_truth;
  std::size_t core_triples = 0;
  // Core triples absent from each side.
  std::array<std::size_t, 2> dropped{};
};

// Shared random core copied to both sides, perturbed independently per side,
// plus exclusive entities each wired to at least one core entity. Entity
// indices are shuffled per side so that index order carries no signal.
// Throws ValidationError on invalid parameters.
SyntheticDataset generate_synthetic_pair(const SyntheticParams& params);

}  // namespace ealearn
