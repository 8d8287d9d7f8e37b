#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "recurnas/cell.hpp"
#include "recurnas/generator.hpp"
#include "recurnas/rng.hpp"

using namespace recurnas;

TEST_CASE("generate is deterministic in the seed", "[generator]") {
  GenParams params;
  params.seed = 42;
  CellSpec a = generate(params);
  CellSpec b = generate(params);
  CHECK(a == b);

  params.seed = 43;
  CHECK_FALSE(generate(params) == a);
}

TEST_CASE("generated cells satisfy every constraint", "[generator]") {
  GenParams params;
  std::set<std::string> hashes;
  for (uint64_t seed = 0; seed < 200; ++seed) {
    params.seed = seed;
    params.n_hidden_slots = 1 + static_cast<int>(seed % 3);
    CellSpec spec = generate(params);
    auto report = validate(spec);
    INFO("seed " << seed << (report.ok ? "" : ": " + report.violations.front().message));
    REQUIRE(report.ok);
    CHECK(spec.nodes.size() <= static_cast<size_t>(kMaxNodes));
    CHECK(spec.new_hidden.size() <= static_cast<size_t>(params.n_hidden_slots));
    // Generator output is already minimal.
    CHECK(prune_redundant(spec) == spec);
    hashes.insert(canonical_hash(spec));
  }
  // Near-total diversity across seeds.
  CHECK(hashes.size() > 190);
}

TEST_CASE("generate honours max_nodes and op weights", "[generator]") {
  GenParams params;
  params.max_nodes = 8;
  for (uint64_t seed = 0; seed < 50; ++seed) {
    params.seed = seed;
    CHECK(generate(params).nodes.size() <= 8);
  }

  // Weights follow kComputationOps; a pair-capable op must stay in the mix or
  // no cell can join the input to a hidden state.
  GenParams gated;
  gated.op_weights = {0, 0, 0, 1, 1, 0, 0};  // sum and tanh only
  for (uint64_t seed = 0; seed < 50; ++seed) {
    gated.seed = seed;
    for (const Node& n : generate(gated).nodes)
      if (!is_source(n.op)) CHECK((n.op == Op::Sum || n.op == Op::Tanh));
  }
}

TEST_CASE("generate gives up after the retry cap", "[generator]") {
  // Blend is the only op but only two sources exist, so no attempt can place
  // a first node.
  GenParams impossible;
  impossible.op_weights = {0, 1, 0, 0, 0, 0, 0};
  impossible.n_hidden_slots = 1;
  CHECK_THROWS_AS(generate(impossible), Error);

  // With three sources the same weights admit cells.
  GenParams tight = impossible;
  tight.n_hidden_slots = 2;
  tight.seed = 5;
  CHECK(validate(generate(tight)).ok);
}

TEST_CASE("param checks reject bad configs", "[generator]") {
  GenParams params;
  params.max_nodes = 3;
  CHECK_THROWS_AS(params.check(), Error);

  params = GenParams{};
  params.n_hidden_slots = 0;
  CHECK_THROWS_AS(params.check(), Error);

  params = GenParams{};
  params.op_weights[2] = -1;
  CHECK_THROWS_AS(params.check(), Error);

  params = GenParams{};
  params.op_weights = {0, 0, 0, 0, 0, 0, 0};
  CHECK_THROWS_AS(params.check(), Error);
}

TEST_CASE("mutate yields valid neighbours", "[generator]") {
  CellSpec parent = build_lstm();
  const std::string parent_hash = canonical_hash(parent);

  int changed = 0, moved = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    MutationResult res = mutate(parent, rng);
    auto report = validate(res.spec);
    INFO("seed " << seed << (report.ok ? "" : ": " + report.violations.front().message));
    REQUIRE(report.ok);
    CHECK(res.spec.nodes.size() <= static_cast<size_t>(kMaxNodes));
    if (res.changed) {
      changed++;
      if (canonical_hash(res.spec) != parent_hash) moved++;
    }
  }
  CHECK(changed > 80);
  CHECK(moved > 60);

  Rng r1(9), r2(9);
  CHECK(mutate(parent, r1).spec == mutate(parent, r2).spec);
}

TEST_CASE("mutate walks stay inside the space", "[generator]") {
  GenParams params;
  params.seed = 11;
  CellSpec current = generate(params);
  Rng rng(11);
  for (int step = 0; step < 60; ++step) {
    MutationResult res = mutate(current, rng);
    REQUIRE(validate(res.spec).ok);
    current = std::move(res.spec);
  }
}
