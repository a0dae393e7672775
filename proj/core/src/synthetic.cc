#include "ealearn/synthetic.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "ealearn/error.h"
#include "ealearn/random.h"

namespace ealearn {
namespace {

void check(const SyntheticParams& p) {
  if (p.n_core < 2) {
    throw ValidationError("synthetic core needs at least 2 entities");
  }
  if (p.n_relations < 1) {
    throw ValidationError("synthetic graph needs at least one relation");
  }
  if (!(p.edge_factor > 0.0)) {
    throw ValidationError("edge_factor must be positive");
  }
  if (!(p.perturbation >= 0.0 && p.perturbation < 1.0)) {
    throw ValidationError("perturbation must be in [0, 1)");
  }
}

// Local triple over generator-level entity numbers: core entities are
// 0..n_core-1, exclusives follow.
struct RawTriple {
  std::size_t head;
  std::size_t relation;
  std::size_t tail;
  auto operator<=>(const RawTriple&) const = default;
};

// Random multi-relational core: a preferential-attachment spanning tree plus
// extra edges until the mean degree reaches edge_factor.
std::vector<RawTriple> build_core(const SyntheticParams& p, Rng& rng) {
  const std::size_t n = p.n_core;
  const auto target = std::max<std::size_t>(
      n - 1, static_cast<std::size_t>(
                 std::llround(p.edge_factor * static_cast<double>(n) / 2.0)));
  std::vector<RawTriple> triples;
  std::set<RawTriple> seen;
  std::vector<std::size_t> endpoints;  // degree-proportional sampling urn

  auto pick = [&](std::size_t bound) {
    if (!endpoints.empty() && uniform_real(rng) < 0.5) {
      std::size_t v;
      do {
        v = endpoints[uniform_index(rng, endpoints.size())];
      } while (v >= bound);
      return v;
    }
    return static_cast<std::size_t>(uniform_index(rng, bound));
  };
  auto add = [&](std::size_t a, std::size_t b) {
    const std::size_t r = uniform_index(rng, p.n_relations);
    RawTriple t = uniform_real(rng) < 0.5 ? RawTriple{a, r, b}
                                          : RawTriple{b, r, a};
    if (!seen.insert(t).second) return false;
    triples.push_back(t);
    endpoints.push_back(a);
    endpoints.push_back(b);
    return true;
  };

  for (std::size_t v = 1; v < n; ++v) {
    while (!add(v, pick(v))) {
    }
  }
  // Bounded retries: dense targets on tiny cores may saturate.
  std::size_t attempts = 0;
  const std::size_t max_attempts = 50 * target + 1000;
  while (triples.size() < target && attempts++ < max_attempts) {
    const std::size_t a = pick(n);
    const std::size_t b = pick(n);
    if (a != b) add(a, b);
  }
  return triples;
}

struct SideBuild {
  std::vector<std::string> names;  // generator number -> name
  std::vector<EntityId> index;     // generator number -> vocabulary index
  Vocabulary entities;
};

SideBuild name_entities(std::size_t n_core, std::size_t n_exclusive,
                        Rng& rng) {
  SideBuild b;
  const std::size_t total = n_core + n_exclusive;
  for (std::size_t i = 0; i < n_core; ++i) b.names.push_back(fmt::format("c{}", i));
  for (std::size_t i = 0; i < n_exclusive; ++i) b.names.push_back(fmt::format("x{}", i));
  std::vector<std::size_t> order(total);
  for (std::size_t i = 0; i < total; ++i) order[i] = i;
  for (std::size_t i = total; i > 1; --i) {
    std::swap(order[i - 1], order[uniform_index(rng, i)]);
  }
  b.index.resize(total);
  for (std::size_t g : order) b.index[g] = b.entities.intern(b.names[g]);
  return b;
}

}  // namespace

SyntheticDataset generate_synthetic_pair(const SyntheticParams& params) {
  check(params);
  Rng core_rng(derive_seed(params.seed, {0}));
  const std::vector<RawTriple> core = build_core(params, core_rng);

  Vocabulary relations;
  for (std::size_t r = 0; r < params.n_relations; ++r) {
    relations.intern(fmt::format("r{}", r));
  }

  SyntheticDataset out;
  out.core_triples = core.size();
  const std::array<std::size_t, 2> n_exclusive{params.n_exclusive_left,
                                               params.n_exclusive_right};
  std::array<SideBuild, 2> builds;
  std::array<std::vector<Triple>, 2> side_triples;

  for (std::size_t s = 0; s < 2; ++s) {
    Rng rng(derive_seed(params.seed, {1, s}));
    builds[s] = name_entities(params.n_core, n_exclusive[s], rng);
    const SideBuild& b = builds[s];

    std::vector<char> keep(core.size(), 1);
    for (std::size_t i = 0; i < core.size(); ++i) {
      if (uniform_real(rng) < params.perturbation) keep[i] = 0;
    }

    std::vector<RawTriple> raw;
    for (std::size_t i = 0; i < core.size(); ++i) {
      if (keep[i]) raw.push_back(core[i]);
    }
    out.dropped[s] = core.size() - raw.size();

    if (n_exclusive[s] > 0) {
      std::poisson_distribution<int> extra(
          std::max(0.0, params.edge_factor / 2.0 - 1.0) + 1e-12);
      std::set<RawTriple> seen(raw.begin(), raw.end());
      for (std::size_t x = 0; x < n_exclusive[s]; ++x) {
        const std::size_t g = params.n_core + x;
        const std::size_t k = 1 + static_cast<std::size_t>(extra(rng));
        std::size_t added = 0;
        for (std::size_t attempt = 0; added < k && attempt < 20 * k; ++attempt) {
          const std::size_t c = uniform_index(rng, params.n_core);
          const std::size_t r = uniform_index(rng, params.n_relations);
          RawTriple t = uniform_real(rng) < 0.5 ? RawTriple{g, r, c}
                                                : RawTriple{c, r, g};
          if (seen.insert(t).second) {
            raw.push_back(t);
            ++added;
          }
        }
      }
    }

    side_triples[s].reserve(raw.size());
    for (const RawTriple& t : raw) {
      side_triples[s].push_back({b.index[t.head],
                                 static_cast<RelationId>(t.relation),
                                 b.index[t.tail]});
    }
  }

  for (std::size_t c = 0; c < params.n_core; ++c) {
    out.ground_truth.push_back({builds[0].index[c], builds[1].index[c]});
  }
  normalize(out.ground_truth);
  out.graphs.left = KnowledgeGraph(std::move(builds[0].entities), relations,
                                   std::move(side_triples[0]));
  out.graphs.right = KnowledgeGraph(std::move(builds[1].entities),
                                    std::move(relations),
                                    std::move(side_triples[1]));
  return out;
}

}  // namespace ealearn
