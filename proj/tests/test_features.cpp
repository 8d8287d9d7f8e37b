#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "recurnas/cell.hpp"
#include "recurnas/error.hpp"
#include "recurnas/features.hpp"
#include "recurnas/ged.hpp"
#include "recurnas/generator.hpp"
#include "recurnas/rng.hpp"

using namespace recurnas;

namespace {

CellSpec renamed_shuffled(const CellSpec& spec, uint64_t seed) {
  CellSpec out = spec;
  for (auto& node : out.nodes) node.id = "z_" + node.id + "_q";
  for (auto& node : out.nodes)
    for (auto& input : node.inputs) input = "z_" + input + "_q";
  for (auto& [slot, id] : out.new_hidden) id = "z_" + id + "_q";
  Rng rng(seed);
  rng.shuffle(out.nodes);
  return out;
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Exact GED by exhaustive injective partial mappings, priced by the same
// cost function the greedy bound uses.
int exact_ged(const CellSpec& a, const CellSpec& b) {
  const int na = static_cast<int>(a.nodes.size());
  const int nb = static_cast<int>(b.nodes.size());
  std::vector<int> map_ab(static_cast<size_t>(na), -1);
  std::vector<bool> used(static_cast<size_t>(nb), false);
  int best = 1 << 30;
  auto rec = [&](auto&& self, int i) -> void {
    if (i == na) {
      best = std::min(best, detail::mapping_cost(a, b, map_ab));
      return;
    }
    map_ab[static_cast<size_t>(i)] = -1;
    self(self, i + 1);
    for (int j = 0; j < nb; ++j) {
      if (used[static_cast<size_t>(j)]) continue;
      used[static_cast<size_t>(j)] = true;
      map_ab[static_cast<size_t>(i)] = j;
      self(self, i + 1);
      map_ab[static_cast<size_t>(i)] = -1;
      used[static_cast<size_t>(j)] = false;
    }
  };
  rec(rec, 0);
  return best;
}

}  // namespace

TEST_CASE("wl features are deterministic and normalized", "[features]") {
  const CellSpec lstm = build_lstm();
  const auto a = wl_features(lstm, 10);
  const auto b = wl_features(lstm, 10);
  REQUIRE(a == b);
  REQUIRE(a.size() == 10);
  REQUIRE(norm(a) == Catch::Approx(1.0).margin(1e-12));

  const auto wide = wl_features(lstm, 50);
  REQUIRE(wide.size() == 50);
  REQUIRE(norm(wide) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("wl features are invariant under relabeling", "[features]") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    GenParams gp;
    gp.seed = 900 + seed;
    gp.n_hidden_slots = 1 + static_cast<int>(seed % 3);
    const CellSpec spec = generate(gp);
    REQUIRE(wl_features(spec, 10) == wl_features(renamed_shuffled(spec, seed), 10));
  }
}

TEST_CASE("wl features react to op changes", "[features]") {
  int changed = 0, total = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    GenParams gp;
    gp.seed = 1500 + seed;
    const CellSpec spec = generate(gp);
    const auto base = wl_features(spec, 10);
    // flip the first activation-like node's op
    CellSpec tweaked = spec;
    bool flipped = false;
    for (auto& node : tweaked.nodes) {
      if (node.op == Op::Tanh) {
        node.op = Op::Sigmoid;
        flipped = true;
        break;
      }
      if (node.op == Op::Sigmoid) {
        node.op = Op::Tanh;
        flipped = true;
        break;
      }
    }
    if (!flipped) continue;
    ++total;
    if (wl_features(tweaked, 10) != base) ++changed;
  }
  REQUIRE(total >= 50);
  REQUIRE(changed == total);  // every op flip moved the vector
}

TEST_CASE("lstm and gru embed differently", "[features]") {
  REQUIRE(wl_features(build_lstm(), 10) != wl_features(build_gru(), 10));
  const auto e = embed(build_lstm(), 10);
  REQUIRE(e.arch_hash == canonical_hash(build_lstm()));
  REQUIRE(e.vec == wl_features(build_lstm(), 10));
}

TEST_CASE("feature dimension is checked", "[features]") {
  REQUIRE_THROWS_AS(wl_features(build_rnn(), 1), Error);
  REQUIRE_THROWS_AS(wl_features(build_rnn(), 0), Error);
  REQUIRE_NOTHROW(wl_features(build_rnn(), 2));
}

TEST_CASE("ged of a graph with itself is zero", "[features]") {
  for (const CellSpec& spec : {build_rnn(), build_lstm(), build_gru()}) {
    REQUIRE(ged_upper_bound_cost(spec, spec) == 0);
    const auto bound = ged_upper_bound(spec, spec);
    REQUIRE(bound.upper_bound == 0);
    REQUIRE(bound.hash_a == bound.hash_b);
  }
  // relabeled copy is the same graph
  const CellSpec gru = build_gru();
  REQUIRE(ged_upper_bound_cost(gru, renamed_shuffled(gru, 3)) == 0);
}

TEST_CASE("ged bound is symmetric and dominates the exact distance", "[features]") {
  std::vector<CellSpec> small;
  uint64_t seed = 400;
  while (small.size() < 12) {
    GenParams gp;
    gp.seed = seed++;
    gp.max_nodes = 5;
    small.push_back(generate(gp));
  }
  int checked = 0;
  for (size_t i = 0; i < small.size(); ++i) {
    for (size_t j = i + 1; j < small.size(); ++j) {
      const int bound = ged_upper_bound_cost(small[i], small[j]);
      REQUIRE(bound == ged_upper_bound_cost(small[j], small[i]));
      REQUIRE(bound >= 0);
      REQUIRE(bound >= exact_ged(small[i], small[j]));
      ++checked;
    }
  }
  REQUIRE(checked >= 60);
}

TEST_CASE("ged counts a single op substitution as one edit", "[features]") {
  const CellSpec rnn = build_rnn();
  CellSpec other = rnn;
  for (auto& node : other.nodes)
    if (node.op == Op::Tanh) node.op = Op::Sigmoid;
  REQUIRE(ged_upper_bound_cost(rnn, other) == 1);
  REQUIRE(exact_ged(rnn, other) == 1);
}
