#pragma once

// Graph edit distance upper bounds under unit costs. A mapping is an
// injective partial assignment from the nodes of one graph to the other;
// its cost counts op substitutions, node insertions/deletions, and directed
// edge edits induced by the assignment. The greedy bound pairs nodes by
// Weisfeiler-Lehman color agreement; every greedy mapping lies in the space
// an exact search would enumerate, so the result can never undercut the
// true distance. Evaluating both directions and keeping the minimum makes
// the bound symmetric.

#include <algorithm>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "recurnas/cell.hpp"
#include "recurnas/error.hpp"
#include "recurnas/features.hpp"

namespace recurnas {

namespace detail {

inline std::vector<std::pair<int, int>> edge_list(const CellSpec& spec) {
  const auto idx = id_index(spec);
  std::vector<std::pair<int, int>> edges;
  for (size_t i = 0; i < spec.nodes.size(); ++i) {
    for (const auto& src : spec.nodes[i].inputs) {
      auto it = idx.find(src);
      if (it == idx.end()) continue;
      edges.emplace_back(it->second, static_cast<int>(i));
    }
  }
  return edges;
}

// Cost of one mapping. map_ab[i] is the b-node index assigned to a-node i,
// or -1 for deletion; b-nodes missing from the image count as insertions.
inline int mapping_cost(const CellSpec& a, const CellSpec& b, const std::vector<int>& map_ab) {
  if (map_ab.size() != a.nodes.size())
    throw Error(ErrorKind::Contract, "mapping_cost: mapping length must equal node count");

  int cost = 0;
  std::vector<bool> b_covered(b.nodes.size(), false);
  for (size_t i = 0; i < a.nodes.size(); ++i) {
    const int j = map_ab[i];
    if (j < 0) {
      cost += 1;  // delete a-node
      continue;
    }
    if (j >= static_cast<int>(b.nodes.size()) || b_covered[j])
      throw Error(ErrorKind::Contract, "mapping_cost: assignment must be injective into b");
    b_covered[j] = true;
    if (a.nodes[i].op != b.nodes[j].op) cost += 1;  // substitute
  }
  for (bool covered : b_covered)
    if (!covered) cost += 1;  // insert b-node

  const auto edges_a = edge_list(a);
  const auto edges_b = edge_list(b);
  std::map<std::pair<int, int>, int> remaining;
  for (const auto& e : edges_b) remaining[e] += 1;
  int kept = 0;
  for (const auto& [u, v] : edges_a) {
    if (map_ab[u] < 0 || map_ab[v] < 0) continue;
    auto it = remaining.find({map_ab[u], map_ab[v]});
    if (it != remaining.end() && it->second > 0) {
      it->second -= 1;
      ++kept;
    }
  }
  cost += static_cast<int>(edges_a.size()) + static_cast<int>(edges_b.size()) - 2 * kept;
  return cost;
}

// Greedy assignment: rank candidate pairs by how many WL iterations agree,
// then match highest-agreement pairs first. Ties resolve by node index so
// the result is deterministic.
inline int greedy_direction_cost(const CellSpec& a, const CellSpec& b) {
  const auto colors_a = wl_colors(a, kWlIterations);
  const auto colors_b = wl_colors(b, kWlIterations);
  const int na = static_cast<int>(a.nodes.size());
  const int nb = static_cast<int>(b.nodes.size());

  struct Cand {
    int score, i, j;
  };
  std::vector<Cand> cands;
  cands.reserve(static_cast<size_t>(na) * static_cast<size_t>(nb));
  for (int i = 0; i < na; ++i) {
    for (int j = 0; j < nb; ++j) {
      int score = 0;
      for (int it = 0; it <= kWlIterations; ++it)
        if (colors_a[i][it] == colors_b[j][it]) ++score;
      cands.push_back({score, i, j});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
    if (x.score != y.score) return x.score > y.score;
    if (x.i != y.i) return x.i < y.i;
    return x.j < y.j;
  });

  std::vector<int> map_ab(na, -1);
  std::vector<bool> used_b(nb, false);
  int matched = 0;
  for (const auto& c : cands) {
    if (matched == std::min(na, nb)) break;
    if (map_ab[c.i] >= 0 || used_b[c.j]) continue;
    map_ab[c.i] = c.j;
    used_b[c.j] = true;
    ++matched;
  }
  return mapping_cost(a, b, map_ab);
}

}  // namespace detail

inline int ged_upper_bound_cost(const CellSpec& a, const CellSpec& b) {
  if (validate(a).ok && validate(b).ok && canonical_hash(a) == canonical_hash(b)) return 0;
  // reverse direction: cost is symmetric in (deletions, insertions), so the
  // same pricing applies with roles swapped
  return std::min(detail::greedy_direction_cost(a, b), detail::greedy_direction_cost(b, a));
}

struct GedBound {
  std::string hash_a, hash_b;
  int upper_bound = 0;
};

inline GedBound ged_upper_bound(const CellSpec& a, const CellSpec& b) {
  GedBound out;
  out.hash_a = canonical_hash(a);
  out.hash_b = canonical_hash(b);
  out.upper_bound = out.hash_a == out.hash_b ? 0 : ged_upper_bound_cost(a, b);
  return out;
}

}  // namespace recurnas
