#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "recurnas/error.hpp"
#include "recurnas/rng.hpp"

namespace recurnas {

inline constexpr int kMaxNodes = 24;
inline constexpr int kMaxHiddenSlots = 3;
inline constexpr int kMaxLinearFanIn = 3;
inline constexpr double kLeakyReluSlope = 0.01;

enum class Op {
  Input,      // token embedding entering the cell
  Hidden,     // previous hidden state, one slot per state
  Linear,     // W1 x1 + .. + Wn xn + b, n in 1..3
  Blend,      // z*x + (1-z)*y, elementwise, inputs ordered (z, x, y)
  Prod,       // elementwise product
  Sum,        // elementwise sum
  Tanh,
  Sigmoid,
  LeakyRelu,
};

inline bool is_source(Op op) { return op == Op::Input || op == Op::Hidden; }

inline bool is_activation(Op op) {
  return op == Op::Tanh || op == Op::Sigmoid || op == Op::LeakyRelu;
}

// Fixed arity, or -1 for Linear whose arity is its fan-in.
inline int fixed_arity(Op op) {
  switch (op) {
    case Op::Input:
    case Op::Hidden: return 0;
    case Op::Linear: return -1;
    case Op::Blend: return 3;
    case Op::Prod:
    case Op::Sum: return 2;
    case Op::Tanh:
    case Op::Sigmoid:
    case Op::LeakyRelu: return 1;
  }
  return -1;
}

inline const char* op_tag(Op op) {
  switch (op) {
    case Op::Input: return "input";
    case Op::Hidden: return "hidden";
    case Op::Linear: return "linear";
    case Op::Blend: return "blend";
    case Op::Prod: return "prod";
    case Op::Sum: return "sum";
    case Op::Tanh: return "tanh";
    case Op::Sigmoid: return "sigmoid";
    case Op::LeakyRelu: return "leaky_relu";
  }
  return "?";
}

inline bool op_from_tag(const std::string& tag, Op& out) {
  static const std::unordered_map<std::string, Op> table = {
      {"input", Op::Input},   {"hidden", Op::Hidden},   {"linear", Op::Linear},
      {"blend", Op::Blend},   {"prod", Op::Prod},       {"sum", Op::Sum},
      {"tanh", Op::Tanh},     {"sigmoid", Op::Sigmoid}, {"leaky_relu", Op::LeakyRelu},
  };
  auto it = table.find(tag);
  if (it == table.end()) return false;
  out = it->second;
  return true;
}

struct Node {
  std::string id;
  Op op = Op::Input;
  int slot = -1;                    // Hidden only
  std::vector<std::string> inputs;  // ordered; Blend is (z, x, y)
};

struct CellSpec {
  std::vector<Node> nodes;
  std::map<int, std::string> new_hidden;  // hidden slot -> node id

  bool operator==(const CellSpec& other) const {
    if (new_hidden != other.new_hidden || nodes.size() != other.nodes.size()) return false;
    for (size_t i = 0; i < nodes.size(); ++i) {
      const Node& a = nodes[i];
      const Node& b = other.nodes[i];
      if (a.id != b.id || a.op != b.op || a.slot != b.slot || a.inputs != b.inputs)
        return false;
    }
    return true;
  }

  int index_of(const std::string& id) const {
    for (size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].id == id) return static_cast<int>(i);
    return -1;
  }
};

struct Violation {
  std::string rule;
  std::string message;
};

struct ValidityReport {
  bool ok = true;
  std::vector<Violation> violations;

  void add(std::string rule, std::string message) {
    ok = false;
    violations.push_back({std::move(rule), std::move(message)});
  }
  bool has(const std::string& rule) const {
    for (const auto& v : violations)
      if (v.rule == rule) return true;
    return false;
  }
};

namespace detail {

inline std::unordered_map<std::string, int> id_index(const CellSpec& spec) {
  std::unordered_map<std::string, int> m;
  for (size_t i = 0; i < spec.nodes.size(); ++i) m.emplace(spec.nodes[i].id, static_cast<int>(i));
  return m;
}

// Kahn order over node indices, deterministic by node-list position.
// Empty result with n>0 means a cycle.
inline std::vector<int> topo_order(const CellSpec& spec) {
  const auto idx = id_index(spec);
  const int n = static_cast<int>(spec.nodes.size());
  std::vector<int> indeg(n, 0);
  std::vector<std::vector<int>> out(n);
  for (int i = 0; i < n; ++i) {
    for (const auto& in : spec.nodes[i].inputs) {
      auto it = idx.find(in);
      if (it == idx.end() || it->second == i) return {};  // caller reports
      out[it->second].push_back(i);
      indeg[i]++;
    }
  }
  std::vector<int> order;
  order.reserve(n);
  std::vector<int> ready;
  for (int i = n - 1; i >= 0; --i)
    if (indeg[i] == 0) ready.push_back(i);
  while (!ready.empty()) {
    int v = ready.back();
    ready.pop_back();
    order.push_back(v);
    for (int w : out[v])
      if (--indeg[w] == 0) ready.push_back(w);
  }
  if (static_cast<int>(order.size()) != n) return {};
  return order;
}

// Indices of nodes on a path into any new_hidden target (the targets included).
inline std::vector<bool> reaches_new_hidden(const CellSpec& spec) {
  const auto idx = id_index(spec);
  std::vector<bool> mark(spec.nodes.size(), false);
  std::vector<int> stack;
  for (const auto& [slot, id] : spec.new_hidden) {
    auto it = idx.find(id);
    if (it != idx.end() && !mark[it->second]) {
      mark[it->second] = true;
      stack.push_back(it->second);
    }
  }
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (const auto& in : spec.nodes[v].inputs) {
      auto it = idx.find(in);
      if (it != idx.end() && !mark[it->second]) {
        mark[it->second] = true;
        stack.push_back(it->second);
      }
    }
  }
  return mark;
}

}  // namespace detail

inline ValidityReport validate(const CellSpec& spec) {
  ValidityReport report;

  if (spec.nodes.empty()) {
    report.add("empty", "cell has no nodes");
    return report;
  }
  if (static_cast<int>(spec.nodes.size()) > kMaxNodes)
    report.add("max_nodes", "cell has " + std::to_string(spec.nodes.size()) +
                                " nodes, limit is " + std::to_string(kMaxNodes));

  std::unordered_set<std::string> seen;
  for (const auto& node : spec.nodes)
    if (!seen.insert(node.id).second)
      report.add("unique_ids", "duplicate node id '" + node.id + "'");

  const auto idx = detail::id_index(spec);

  int input_count = 0;
  std::set<int> hidden_slots;
  for (const auto& node : spec.nodes) {
    if (node.op == Op::Input) input_count++;
    if (node.op == Op::Hidden) {
      if (node.slot < 0 || node.slot >= kMaxHiddenSlots)
        report.add("hidden_slots", "node '" + node.id + "' has slot " +
                                       std::to_string(node.slot) + ", valid range is 0.." +
                                       std::to_string(kMaxHiddenSlots - 1));
      else if (!hidden_slots.insert(node.slot).second)
        report.add("hidden_slots", "slot " + std::to_string(node.slot) +
                                       " used by more than one hidden node");
    }

    int want = fixed_arity(node.op);
    int got = static_cast<int>(node.inputs.size());
    if (node.op == Op::Linear) {
      if (got < 1 || got > kMaxLinearFanIn)
        report.add("arity", "linear node '" + node.id + "' has fan-in " + std::to_string(got) +
                                ", allowed 1.." + std::to_string(kMaxLinearFanIn));
    } else if (got != want) {
      report.add("arity", "node '" + node.id + "' (" + op_tag(node.op) + ") has " +
                              std::to_string(got) + " inputs, expected " + std::to_string(want));
    }

    for (const auto& in : node.inputs) {
      if (in == node.id)
        report.add("self_loop", "node '" + node.id + "' lists itself as an input");
      else if (idx.find(in) == idx.end())
        report.add("dangling_input", "node '" + node.id + "' references unknown node '" + in + "'");
    }
  }

  if (input_count != 1)
    report.add("input_count",
               "cell has " + std::to_string(input_count) + " input nodes, expected exactly 1");

  if (spec.new_hidden.empty() || static_cast<int>(spec.new_hidden.size()) > kMaxHiddenSlots)
    report.add("new_hidden_count", "cell declares " + std::to_string(spec.new_hidden.size()) +
                                       " new hidden states, allowed 1.." +
                                       std::to_string(kMaxHiddenSlots));

  std::set<int> target_slots;
  std::set<std::string> target_ids;
  for (const auto& [slot, id] : spec.new_hidden) {
    target_slots.insert(slot);
    if (!target_ids.insert(id).second)
      report.add("slot_collision", "node '" + id + "' assigned to more than one hidden slot");
    auto it = idx.find(id);
    if (it == idx.end()) {
      report.add("new_hidden_target", "new_hidden slot " + std::to_string(slot) +
                                          " points to unknown node '" + id + "'");
      continue;
    }
    const Node& target = spec.nodes[it->second];
    if (is_source(target.op))
      report.add("source_target", "new_hidden slot " + std::to_string(slot) +
                                      " points to source node '" + id + "'");
    for (const auto& in : target.inputs) {
      auto jt = idx.find(in);
      if (jt != idx.end() && spec.nodes[jt->second].op == Op::Hidden)
        report.add("hidden_direct_edge", "hidden node '" + in +
                                             "' feeds new-hidden target '" + id + "' directly");
    }
  }
  if (target_slots != hidden_slots)
    report.add("new_hidden_slots",
               "new_hidden slots do not match the hidden slots used by the cell");

  // Structural rules below assume resolvable edges.
  if (report.has("dangling_input") || report.has("self_loop") || report.has("unique_ids"))
    return report;

  if (detail::topo_order(spec).empty()) {
    report.add("acyclic", "cell graph contains a cycle");
    return report;
  }

  const auto mark = detail::reaches_new_hidden(spec);
  for (size_t i = 0; i < spec.nodes.size(); ++i) {
    if (mark[i]) continue;
    const Node& node = spec.nodes[i];
    if (node.op == Op::Input)
      report.add("input_reachable", "input node '" + node.id + "' does not reach any new hidden state");
    else if (node.op == Op::Hidden)
      report.add("hidden_reachable",
                 "hidden node '" + node.id + "' does not reach any new hidden state");
    else
      report.add("redundant_node", "node '" + node.id + "' does not reach any new hidden state");
  }

  return report;
}

// ---------------------------------------------------------------------------
// Canonical hash.
//
// Node names and list order are incidental; identity is taken from a traversal
// that never looks at either: walk the new-hidden targets in slot order,
// expanding inputs in their stored order, numbering nodes at first visit.
// Every valid node is reachable this way, so the numbering is total.
// ---------------------------------------------------------------------------
inline std::string canonical_hash(const CellSpec& spec) {
  ValidityReport report = validate(spec);
  if (!report.ok)
    throw Error(ErrorKind::Contract,
                "canonical_hash requires a valid spec (first violation: " +
                    report.violations.front().rule + ")");

  const auto idx = detail::id_index(spec);
  std::unordered_map<int, int> canon;  // node index -> canonical id
  std::vector<int> visit_order;
  std::vector<int> stack;
  for (auto it = spec.new_hidden.begin(); it != spec.new_hidden.end(); ++it)
    stack.push_back(idx.at(it->second));
  std::reverse(stack.begin(), stack.end());
  // Explicit stack DFS, children expanded left-to-right.
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    if (canon.count(v)) continue;
    canon[v] = static_cast<int>(visit_order.size());
    visit_order.push_back(v);
    const auto& ins = spec.nodes[v].inputs;
    for (auto it = ins.rbegin(); it != ins.rend(); ++it) stack.push_back(idx.at(*it));
  }

  std::string text;
  text.reserve(spec.nodes.size() * 16);
  for (int v : visit_order) {
    const Node& node = spec.nodes[v];
    text += op_tag(node.op);
    if (node.op == Op::Hidden) {
      text += '#';
      text += std::to_string(node.slot);
    }
    text += '(';
    for (size_t k = 0; k < node.inputs.size(); ++k) {
      if (k) text += ',';
      text += std::to_string(canon.at(idx.at(node.inputs[k])));
    }
    text += ");";
  }
  text += '|';
  for (const auto& [slot, id] : spec.new_hidden) {
    text += std::to_string(slot);
    text += ':';
    text += std::to_string(canon.at(idx.at(id)));
    text += ';';
  }

  uint64_t lo = fnv1a64(text);
  uint64_t hi = fnv1a64(text, 0x84222325cbf29ce4ULL);
  return to_hex(hi) + to_hex(lo);
}

// ---------------------------------------------------------------------------
// Serialization. One JSON object, stable field order, strict on read:
//   {"nodes":[{"id":"i","op":"input"},{"id":"h0","op":"hidden","slot":0},
//             {"id":"n1","op":"linear","inputs":["i","h0"]},...],
//    "new_hidden":{"0":"n2"}}
// ---------------------------------------------------------------------------
inline std::string serialize(const CellSpec& spec) {
  nlohmann::ordered_json root;
  root["nodes"] = nlohmann::ordered_json::array();
  for (const auto& node : spec.nodes) {
    nlohmann::ordered_json jn;
    jn["id"] = node.id;
    jn["op"] = op_tag(node.op);
    if (node.op == Op::Hidden) jn["slot"] = node.slot;
    if (!is_source(node.op)) jn["inputs"] = node.inputs;
    root["nodes"].push_back(std::move(jn));
  }
  nlohmann::ordered_json nh = nlohmann::ordered_json::object();
  for (const auto& [slot, id] : spec.new_hidden) nh[std::to_string(slot)] = id;
  root["new_hidden"] = std::move(nh);
  return root.dump();
}

namespace detail {

[[noreturn]] inline void parse_fail(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::Parse, "architecture parse error at " + where + ": " + what);
}

inline int line_of_offset(const std::string& text, size_t byte) {
  int line = 1;
  for (size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') line++;
  return line;
}

}  // namespace detail

inline CellSpec deserialize(const std::string& text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::Parse,
                "architecture parse error at line " +
                    std::to_string(detail::line_of_offset(text, e.byte)) + ": " + e.what());
  }

  if (!root.is_object()) detail::parse_fail("$", "expected a JSON object");
  for (const auto& [key, _] : root.items())
    if (key != "nodes" && key != "new_hidden") detail::parse_fail("$", "unknown field '" + key + "'");
  if (!root.contains("nodes")) detail::parse_fail("$", "missing \"nodes\"");
  if (!root.contains("new_hidden")) detail::parse_fail("$", "missing \"new_hidden\"");
  if (!root["nodes"].is_array()) detail::parse_fail("nodes", "expected an array");
  if (!root["new_hidden"].is_object()) detail::parse_fail("new_hidden", "expected an object");

  CellSpec spec;
  int pos = 0;
  for (const auto& jn : root["nodes"]) {
    const std::string where = "nodes[" + std::to_string(pos++) + "]";
    if (!jn.is_object()) detail::parse_fail(where, "expected an object");
    if (!jn.contains("id") || !jn["id"].is_string())
      detail::parse_fail(where, "missing string field \"id\"");
    if (!jn.contains("op") || !jn["op"].is_string())
      detail::parse_fail(where, "missing string field \"op\"");

    Node node;
    node.id = jn["id"].get<std::string>();
    std::string tag = jn["op"].get<std::string>();
    if (!op_from_tag(tag, node.op)) detail::parse_fail(where + ".op", "unknown op '" + tag + "'");

    for (const auto& [key, _] : jn.items()) {
      bool known = key == "id" || key == "op" ||
                   (key == "slot" && node.op == Op::Hidden) ||
                   (key == "inputs" && !is_source(node.op));
      if (!known) detail::parse_fail(where, "unknown field '" + key + "' for op '" + tag + "'");
    }

    if (node.op == Op::Hidden) {
      if (!jn.contains("slot") || !jn["slot"].is_number_integer())
        detail::parse_fail(where, "hidden node needs integer field \"slot\"");
      node.slot = jn["slot"].get<int>();
    }
    if (!is_source(node.op)) {
      if (!jn.contains("inputs") || !jn["inputs"].is_array())
        detail::parse_fail(where, "op '" + tag + "' needs array field \"inputs\"");
      for (const auto& in : jn["inputs"]) {
        if (!in.is_string()) detail::parse_fail(where + ".inputs", "expected node-id strings");
        node.inputs.push_back(in.get<std::string>());
      }
    }
    spec.nodes.push_back(std::move(node));
  }

  for (const auto& [key, value] : root["new_hidden"].items()) {
    size_t used = 0;
    int slot;
    try {
      slot = std::stoi(key, &used);
    } catch (const std::exception&) {
      used = 0;
      slot = -1;
    }
    if (used != key.size()) detail::parse_fail("new_hidden", "slot key '" + key + "' is not an integer");
    if (!value.is_string()) detail::parse_fail("new_hidden." + key, "expected a node-id string");
    if (spec.new_hidden.count(slot)) detail::parse_fail("new_hidden", "duplicate slot " + key);
    spec.new_hidden[slot] = value.get<std::string>();
  }

  return spec;
}

// ---------------------------------------------------------------------------
// Hand-built baselines.
//
// GRU note: the search-space rule forbids a previous hidden state as a direct
// input of a new-hidden target, which the textbook GRU update violates
// (h' = z*h + (1-z)*c). The skip path here goes through the reset product
// r*h instead, so h' = z*c + (1-z)*(r*h); with r near 1 this recovers the
// standard cell while staying inside the space.
// ---------------------------------------------------------------------------
inline CellSpec build_rnn() {
  CellSpec spec;
  spec.nodes = {
      {"x", Op::Input, -1, {}},
      {"h", Op::Hidden, 0, {}},
      {"lin", Op::Linear, -1, {"x", "h"}},
      {"act", Op::Tanh, -1, {"lin"}},
  };
  spec.new_hidden[0] = "act";
  return spec;
}

inline CellSpec build_lstm() {
  CellSpec spec;
  spec.nodes = {
      {"x", Op::Input, -1, {}},
      {"h", Op::Hidden, 0, {}},
      {"c", Op::Hidden, 1, {}},
      {"lin_i", Op::Linear, -1, {"x", "h"}},
      {"lin_f", Op::Linear, -1, {"x", "h"}},
      {"lin_g", Op::Linear, -1, {"x", "h"}},
      {"lin_o", Op::Linear, -1, {"x", "h"}},
      {"gate_i", Op::Sigmoid, -1, {"lin_i"}},
      {"gate_f", Op::Sigmoid, -1, {"lin_f"}},
      {"cand", Op::Tanh, -1, {"lin_g"}},
      {"gate_o", Op::Sigmoid, -1, {"lin_o"}},
      {"keep", Op::Prod, -1, {"gate_f", "c"}},
      {"write", Op::Prod, -1, {"gate_i", "cand"}},
      {"c_new", Op::Sum, -1, {"keep", "write"}},
      {"c_act", Op::Tanh, -1, {"c_new"}},
      {"h_new", Op::Prod, -1, {"gate_o", "c_act"}},
  };
  spec.new_hidden[0] = "h_new";
  spec.new_hidden[1] = "c_new";
  return spec;
}

inline CellSpec build_gru() {
  CellSpec spec;
  spec.nodes = {
      {"x", Op::Input, -1, {}},
      {"h", Op::Hidden, 0, {}},
      {"lin_z", Op::Linear, -1, {"x", "h"}},
      {"lin_r", Op::Linear, -1, {"x", "h"}},
      {"gate_z", Op::Sigmoid, -1, {"lin_z"}},
      {"gate_r", Op::Sigmoid, -1, {"lin_r"}},
      {"reset_h", Op::Prod, -1, {"gate_r", "h"}},
      {"lin_c", Op::Linear, -1, {"x", "reset_h"}},
      {"cand", Op::Tanh, -1, {"lin_c"}},
      {"h_new", Op::Blend, -1, {"gate_z", "cand", "reset_h"}},
  };
  spec.new_hidden[0] = "h_new";
  return spec;
}

}  // namespace recurnas
