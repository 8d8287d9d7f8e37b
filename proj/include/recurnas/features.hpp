#pragma once

// Fixed-dimension graph features via Weisfeiler-Lehman relabeling plus
// signed feature hashing. Labels depend only on ops, slots, and wiring, so
// the vector is invariant under node renaming and list reordering. The
// refinement here is order-insensitive over neighbors; node identity (which
// distinguishes Blend argument roles) lives in canonical_hash, not here.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "recurnas/cell.hpp"
#include "recurnas/error.hpp"
#include "recurnas/rng.hpp"

namespace recurnas {

inline constexpr int kWlIterations = 3;

namespace detail {

// Per-node label sequences for iterations 0..iters. Works on any spec whose
// input ids resolve; validity is not required.
inline std::vector<std::vector<std::string>> wl_colors(const CellSpec& spec, int iters) {
  const auto idx = id_index(spec);
  const int n = static_cast<int>(spec.nodes.size());

  std::vector<std::vector<int>> in(n), out(n);
  for (int i = 0; i < n; ++i) {
    for (const auto& src : spec.nodes[i].inputs) {
      auto it = idx.find(src);
      if (it == idx.end()) continue;  // dangling ids contribute nothing
      in[i].push_back(it->second);
      out[it->second].push_back(i);
    }
  }

  std::vector<std::vector<std::string>> colors(n);
  for (int i = 0; i < n; ++i) {
    const Node& node = spec.nodes[i];
    std::string label = op_tag(node.op);
    if (node.op == Op::Hidden) label += ":" + std::to_string(node.slot);
    std::vector<int> target_slots;
    for (const auto& [slot, id] : spec.new_hidden)
      if (id == node.id) target_slots.push_back(slot);
    for (int slot : target_slots) label += "#" + std::to_string(slot);
    colors[i].push_back(std::move(label));
  }

  for (int iter = 1; iter <= iters; ++iter) {
    for (int i = 0; i < n; ++i) {
      std::vector<std::string> ins, outs;
      for (int j : in[i]) ins.push_back(colors[j][iter - 1]);
      for (int j : out[i]) outs.push_back(colors[j][iter - 1]);
      std::sort(ins.begin(), ins.end());
      std::sort(outs.begin(), outs.end());
      std::string sig = colors[i][iter - 1] + "|in";
      for (const auto& s : ins) sig += "," + s;
      sig += "|out";
      for (const auto& s : outs) sig += "," + s;
      colors[i].push_back(to_hex(fnv1a64(sig)));
    }
  }
  return colors;
}

}  // namespace detail

// Subtree-label counts from every iteration, hashed into dim buckets with a
// sign bit, then L2-normalized. Deterministic; dim >= 2.
inline std::vector<double> wl_features(const CellSpec& spec, int dim, int iters = kWlIterations) {
  if (dim < 2) throw Error(ErrorKind::Config, "feature dimension must be at least 2");
  if (iters < 0) throw Error(ErrorKind::Config, "iteration count must be non-negative");

  const auto colors = detail::wl_colors(spec, iters);
  std::map<std::string, int> counts;
  for (const auto& node_colors : colors)
    for (size_t it = 0; it < node_colors.size(); ++it)
      counts["i" + std::to_string(it) + ":" + node_colors[it]] += 1;

  std::vector<double> vec(dim, 0.0);
  for (const auto& [label, count] : counts) {
    const uint64_t h = fnv1a64(label);
    const int bucket = static_cast<int>(h % static_cast<uint64_t>(dim));
    const double sign = (h >> 63) ? -1.0 : 1.0;
    vec[bucket] += sign * static_cast<double>(count);
  }

  double norm = 0.0;
  for (double v : vec) norm += v * v;
  norm = std::sqrt(norm);
  if (norm > 0.0)
    for (double& v : vec) v /= norm;
  return vec;
}

struct GraphFeatures {
  std::string arch_hash;
  std::vector<double> vec;
};

// Valid specs only: the hash requires validity.
inline GraphFeatures embed(const CellSpec& spec, int dim, int iters = kWlIterations) {
  GraphFeatures f;
  f.arch_hash = canonical_hash(spec);
  f.vec = wl_features(spec, dim, iters);
  return f;
}

inline double l2_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error(ErrorKind::Contract, "l2_distance: dimension mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace recurnas
