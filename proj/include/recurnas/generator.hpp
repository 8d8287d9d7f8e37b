#pragma once

#include <array>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "recurnas/cell.hpp"
#include "recurnas/error.hpp"
#include "recurnas/rng.hpp"

namespace recurnas {

// Computation ops a generated node may take, in sampling order.
inline constexpr std::array<Op, 7> kComputationOps = {
    Op::Linear, Op::Blend, Op::Prod, Op::Sum, Op::Tanh, Op::Sigmoid, Op::LeakyRelu};

struct GenParams {
  int max_nodes = kMaxNodes;
  int n_hidden_slots = 1;
  std::array<double, 7> op_weights = {1, 1, 1, 1, 1, 1, 1};  // follows kComputationOps
  uint64_t seed = 0;

  void check() const {
    if (max_nodes < 4 || max_nodes > kMaxNodes)
      throw Error(ErrorKind::Config,
                  "max_nodes must be in 4.." + std::to_string(kMaxNodes));
    if (n_hidden_slots < 1 || n_hidden_slots > kMaxHiddenSlots)
      throw Error(ErrorKind::Config,
                  "n_hidden_slots must be in 1.." + std::to_string(kMaxHiddenSlots));
    double total = 0.0;
    for (double w : op_weights) {
      if (w < 0) throw Error(ErrorKind::Config, "op weights must be non-negative");
      total += w;
    }
    if (total <= 0) throw Error(ErrorKind::Config, "op weights must not all be zero");
  }
};

inline constexpr int kGenerateRetryCap = 100;
inline constexpr int kMutateRetryCap = 100;

// Sub-DAG induced by backward reachability from the new-hidden targets.
// Node order and ids are preserved; already-pruned specs come back unchanged.
inline CellSpec prune_redundant(const CellSpec& spec) {
  const auto idx = detail::id_index(spec);
  for (const auto& [slot, id] : spec.new_hidden)
    if (idx.find(id) == idx.end())
      throw Error(ErrorKind::Contract,
                  "new_hidden slot " + std::to_string(slot) + " points to missing node '" + id + "'");

  const auto mark = detail::reaches_new_hidden(spec);
  CellSpec out;
  out.new_hidden = spec.new_hidden;
  for (size_t i = 0; i < spec.nodes.size(); ++i)
    if (mark[i]) out.nodes.push_back(spec.nodes[i]);
  return out;
}

namespace detail {

inline bool has_direct_hidden_input(const CellSpec& spec,
                                    const std::unordered_map<std::string, int>& idx,
                                    const Node& node) {
  for (const auto& in : node.inputs) {
    auto it = idx.find(in);
    if (it != idx.end() && spec.nodes[it->second].op == Op::Hidden) return true;
  }
  return false;
}

// One generation attempt; the caller retries on a failed acceptance test.
inline bool generate_attempt(const GenParams& params, Rng& rng, CellSpec& out) {
  CellSpec spec;
  spec.nodes.push_back({"x", Op::Input, -1, {}});
  for (int s = 0; s < params.n_hidden_slots; ++s)
    spec.nodes.push_back({"h" + std::to_string(s), Op::Hidden, s, {}});

  std::vector<double> weights(params.op_weights.begin(), params.op_weights.end());
  int next_id = static_cast<int>(spec.nodes.size());

  while (static_cast<int>(spec.nodes.size()) < params.max_nodes) {
    int existing = static_cast<int>(spec.nodes.size());
    Op op;
    int arity;
    // Resample until the op's arity fits the nodes available so far.
    for (int tries = 0;; ++tries) {
      if (tries >= 64) return false;  // weights may exclude every fitting op
      op = kComputationOps[rng.weighted(weights)];
      arity = fixed_arity(op);
      if (op == Op::Linear)
        arity = 1 + rng.below_int(std::min(kMaxLinearFanIn, existing));
      if (arity <= existing) break;
    }

    Node node;
    node.id = "n" + std::to_string(next_id++);
    node.op = op;
    for (int j : rng.sample_distinct(existing, arity)) node.inputs.push_back(spec.nodes[j].id);
    spec.nodes.push_back(std::move(node));
  }

  // New hidden states: distinct computation nodes without direct hidden inputs.
  const auto idx = detail::id_index(spec);
  std::vector<int> eligible;
  for (size_t i = 0; i < spec.nodes.size(); ++i) {
    const Node& node = spec.nodes[i];
    if (is_source(node.op)) continue;
    if (has_direct_hidden_input(spec, idx, node)) continue;
    eligible.push_back(static_cast<int>(i));
  }
  if (static_cast<int>(eligible.size()) < params.n_hidden_slots) return false;
  std::vector<int> picks = rng.sample_distinct(static_cast<int>(eligible.size()),
                                               params.n_hidden_slots);
  for (int s = 0; s < params.n_hidden_slots; ++s)
    spec.new_hidden[s] = spec.nodes[eligible[picks[s]]].id;

  spec = prune_redundant(spec);

  // Accepted only if the input and every hidden state survived the prune.
  if (!validate(spec).ok) return false;
  out = std::move(spec);
  return true;
}

}  // namespace detail

inline CellSpec generate(const GenParams& params) {
  params.check();
  Rng rng(params.seed);
  for (int attempt = 1; attempt <= kGenerateRetryCap; ++attempt) {
    CellSpec spec;
    if (detail::generate_attempt(params, rng, spec)) return spec;
  }
  throw Error(ErrorKind::Generation,
              "no acceptable architecture after " + std::to_string(kGenerateRetryCap) +
                  " attempts (seed " + std::to_string(params.seed) + ")");
}

struct MutationResult {
  CellSpec spec;
  bool changed = false;
  int attempts = 0;
};

namespace detail {

// Nodes reachable from `from` by following consumer edges (descendants).
inline std::vector<bool> descendants(const CellSpec& spec, int from) {
  const auto idx = id_index(spec);
  const int n = static_cast<int>(spec.nodes.size());
  std::vector<std::vector<int>> out(n);
  for (int i = 0; i < n; ++i)
    for (const auto& in : spec.nodes[i].inputs) out[idx.at(in)].push_back(i);
  std::vector<bool> mark(n, false);
  std::vector<int> stack{from};
  mark[from] = true;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int w : out[v])
      if (!mark[w]) {
        mark[w] = true;
        stack.push_back(w);
      }
  }
  return mark;
}

inline bool mutate_rewire(const CellSpec& parent, Rng& rng, CellSpec& out) {
  std::vector<int> editable;
  for (size_t i = 0; i < parent.nodes.size(); ++i)
    if (!is_source(parent.nodes[i].op)) editable.push_back(static_cast<int>(i));
  if (editable.empty()) return false;
  int v = editable[rng.below_int(static_cast<int>(editable.size()))];
  int port = rng.below_int(static_cast<int>(parent.nodes[v].inputs.size()));

  const auto desc = descendants(parent, v);
  std::vector<int> candidates;
  for (size_t i = 0; i < parent.nodes.size(); ++i)
    if (!desc[i] && parent.nodes[i].id != parent.nodes[v].inputs[port])
      candidates.push_back(static_cast<int>(i));
  if (candidates.empty()) return false;

  out = parent;
  out.nodes[v].inputs[port] = parent.nodes[candidates[rng.below_int(static_cast<int>(candidates.size()))]].id;
  out = prune_redundant(out);
  return true;
}

inline bool mutate_replace_op(const CellSpec& parent, Rng& rng, CellSpec& out) {
  std::vector<int> editable;
  for (size_t i = 0; i < parent.nodes.size(); ++i)
    if (!is_source(parent.nodes[i].op)) editable.push_back(static_cast<int>(i));
  if (editable.empty()) return false;
  int v = editable[rng.below_int(static_cast<int>(editable.size()))];
  int arity = static_cast<int>(parent.nodes[v].inputs.size());

  std::vector<Op> options;
  for (Op op : kComputationOps) {
    if (op == parent.nodes[v].op) continue;
    int want = fixed_arity(op);
    bool fits = (op == Op::Linear) ? (arity >= 1 && arity <= kMaxLinearFanIn) : (want == arity);
    if (fits) options.push_back(op);
  }
  if (options.empty()) return false;

  out = parent;
  out.nodes[v].op = options[rng.below_int(static_cast<int>(options.size()))];
  return true;
}

inline bool mutate_add_node(const CellSpec& parent, Rng& rng, CellSpec& out) {
  if (static_cast<int>(parent.nodes.size()) >= kMaxNodes) return false;

  // Fresh id clear of anything already present.
  std::unordered_set<std::string> used;
  for (const auto& node : parent.nodes) used.insert(node.id);
  int counter = static_cast<int>(parent.nodes.size());
  std::string fresh = "n" + std::to_string(counter);
  while (used.count(fresh)) fresh = "n" + std::to_string(++counter);

  int existing = static_cast<int>(parent.nodes.size());
  Op op;
  int arity;
  while (true) {
    op = kComputationOps[rng.below_int(static_cast<int>(kComputationOps.size()))];
    arity = fixed_arity(op);
    if (op == Op::Linear) arity = 1 + rng.below_int(kMaxLinearFanIn);
    if (arity <= existing) break;
  }

  Node node;
  node.id = fresh;
  node.op = op;
  for (int j : rng.sample_distinct(existing, arity)) node.inputs.push_back(parent.nodes[j].id);

  CellSpec grown = parent;
  grown.nodes.push_back(node);

  // The new node is dead until a consumer picks it up; rewire one input port
  // of a node that is not among the new node's ancestors.
  std::unordered_set<std::string> ancestors;
  {
    const auto idx = id_index(grown);
    std::vector<int> stack{static_cast<int>(grown.nodes.size()) - 1};
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (const auto& in : grown.nodes[v].inputs)
        if (ancestors.insert(in).second) stack.push_back(idx.at(in));
    }
  }
  std::vector<std::pair<int, int>> ports;
  for (size_t i = 0; i + 1 < grown.nodes.size(); ++i) {
    const Node& consumer = grown.nodes[i];
    if (is_source(consumer.op) || ancestors.count(consumer.id)) continue;
    for (size_t port = 0; port < consumer.inputs.size(); ++port)
      ports.push_back({static_cast<int>(i), static_cast<int>(port)});
  }
  if (ports.empty()) return false;
  auto [ci, port] = ports[rng.below_int(static_cast<int>(ports.size()))];
  grown.nodes[ci].inputs[port] = fresh;

  out = prune_redundant(grown);
  return true;
}

inline bool mutate_delete_node(const CellSpec& parent, Rng& rng, CellSpec& out) {
  std::unordered_set<std::string> targets;
  for (const auto& [slot, id] : parent.new_hidden) targets.insert(id);

  std::vector<int> deletable;
  for (size_t i = 0; i < parent.nodes.size(); ++i)
    if (!is_source(parent.nodes[i].op) && !targets.count(parent.nodes[i].id))
      deletable.push_back(static_cast<int>(i));
  if (deletable.empty()) return false;
  int v = deletable[rng.below_int(static_cast<int>(deletable.size()))];
  const Node& victim = parent.nodes[v];

  CellSpec shrunk;
  shrunk.new_hidden = parent.new_hidden;
  for (size_t i = 0; i < parent.nodes.size(); ++i)
    if (static_cast<int>(i) != v) shrunk.nodes.push_back(parent.nodes[i]);

  // Splice consumers onto one of the victim's own inputs.
  for (auto& node : shrunk.nodes) {
    for (auto& in : node.inputs) {
      if (in != victim.id) continue;
      std::string substitute;
      for (const auto& cand : victim.inputs)
        if (cand != node.id) {
          substitute = cand;
          break;
        }
      if (substitute.empty()) return false;
      in = substitute;
    }
  }

  out = prune_redundant(shrunk);
  return true;
}

}  // namespace detail

// One structural edit, retried until the child validates. The paper leaves
// the evolution mutation operator unspecified; this is the artifact's own.
inline MutationResult mutate(const CellSpec& spec, Rng& rng) {
  if (!validate(spec).ok)
    throw Error(ErrorKind::Contract, "mutate requires a valid parent spec");

  MutationResult result;
  for (int attempt = 1; attempt <= kMutateRetryCap; ++attempt) {
    result.attempts = attempt;
    CellSpec child;
    bool built = false;
    switch (rng.below_int(4)) {
      case 0: built = detail::mutate_rewire(spec, rng, child); break;
      case 1: built = detail::mutate_replace_op(spec, rng, child); break;
      case 2: built = detail::mutate_add_node(spec, rng, child); break;
      case 3: built = detail::mutate_delete_node(spec, rng, child); break;
    }
    if (built && validate(child).ok) {
      result.spec = std::move(child);
      result.changed = true;
      return result;
    }
  }
  result.spec = spec;
  result.changed = false;
  return result;
}

}  // namespace recurnas
