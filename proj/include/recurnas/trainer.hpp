#pragma once

#include <chrono>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "recurnas/autodiff.hpp"
#include "recurnas/cell.hpp"
#include "recurnas/corpus.hpp"
#include "recurnas/error.hpp"
#include "recurnas/rng.hpp"

namespace recurnas {

// Divergence: segment-mean train loss above kExplosionFactor * ln(vocab),
// any non-finite metric, or recurrent state magnitude above kStateCap during
// the first kStateCapEpochs epochs. Early state explosion reflects the
// cell's forward dynamics; later growth is trajectory drift, which the loss
// criterion already polices.
inline constexpr double kExplosionFactor = 3.0;
inline constexpr double kStateCap = 20.0;
inline constexpr int kStateCapEpochs = 3;
// Per-epoch multiplicative learning-rate decay.
inline constexpr double kLrDecay = 0.9;
// Synthetic wall-time cost model: seconds per (parameter * training token).
inline constexpr double kSyntheticSecondsPerParamToken = 1e-9;

struct TrainConfig {
  int emb_dim = 32;
  int nhid = 32;
  int n_layers = 2;
  int batch_size = 16;
  int bptt_len = 32;
  int epochs = 50;
  double lr = 0.5;
  double grad_clip = 0.25;
  double dropout = 0.1;    // on the last layer's output
  double dropouth = 0.25;  // between stacked layers
  double dropouti = 0.4;   // on the embedded input
  double dropoute = 0.0;   // whole embedding rows
  double wdrop = 0.1;      // DropConnect on recurrent linear weights
  bool tie_weights = false;
  uint64_t seed = 0;
  bool synthetic_time = false;

  bool operator==(const TrainConfig&) const = default;

  void check() const {
    if (emb_dim < 1 || nhid < 1 || n_layers < 1 || batch_size < 1 || bptt_len < 1 || epochs < 1)
      throw Error(ErrorKind::Config, "all model and schedule dimensions must be positive");
    for (double p : {dropout, dropouth, dropouti, dropoute, wdrop})
      if (p < 0.0 || p >= 1.0)
        throw Error(ErrorKind::Config, "dropout probabilities must lie in [0,1)");
    if (lr <= 0.0 || grad_clip <= 0.0)
      throw Error(ErrorKind::Config, "lr and grad_clip must be positive");
  }
};

struct EpochMetrics {
  int epoch = 0;
  double wall_time_s = 0.0;
  double train_log_ppl = 0.0;
  double val_log_ppl = 0.0;
  double test_log_ppl = 0.0;
};

struct TrainRecord {
  std::string arch_hash;
  uint64_t seed = 0;
  std::string status = "OK";  // "OK" | "DIVERGED"
  long long num_params = 0;
  std::vector<EpochMetrics> epochs;  // contiguous from 1; completed epochs only
  int fail_epoch = 0;                // DIVERGED: the epoch that blew up
  double fail_wall_time_s = 0.0;     // DIVERGED: cost accrued inside that epoch

  bool diverged() const { return status == "DIVERGED"; }
};

namespace detail {

struct BranchPlan {
  int w_param = -1;
  bool recurrent = false;  // direct input is a previous hidden state
};

struct NodePlan {
  Op op = Op::Input;
  int slot = -1;
  std::vector<int> in;  // indices into the plan's node order
  std::vector<BranchPlan> branches;  // linear only, parallel to `in`
  int b_param = -1;
};

struct CellPlan {
  std::vector<NodePlan> nodes;   // topological order
  std::vector<int> hidden_node;  // per slot (ascending): plan index of the Hidden source
  std::vector<int> target_node;  // per slot (ascending): plan index of the new state
  int output_node = -1;          // lowest slot's new state feeds the next layer
};

}  // namespace detail

struct Model {
  CellSpec spec;
  TrainConfig cfg;
  int vocab = 0;
  std::vector<Tensor> params;
  std::vector<detail::CellPlan> layers;
  int emb_param = -1;
  int dec_w_param = -1;  // -1 when tied to the embedding
  int dec_b_param = -1;
  int n_slots = 0;

  long long num_params() const {
    long long total = 0;
    for (const auto& p : params) total += static_cast<long long>(p.numel());
    return total;
  }
};

namespace detail {

// Inverted-scaling mask: kept entries carry 1/(1-p) so evaluation mode needs
// no rescaling. p = 0 yields all-ones.
inline Tensor locked_mask(Rng& rng, int rows, int cols, double p) {
  Tensor mask({rows, cols});
  if (p <= 0.0) {
    std::fill(mask.data.begin(), mask.data.end(), 1.0);
    return mask;
  }
  const double scale = 1.0 / (1.0 - p);
  for (double& v : mask.data) v = rng.bernoulli(1.0 - p) ? scale : 0.0;
  return mask;
}

}  // namespace detail

inline Model compile(const CellSpec& spec, const TrainConfig& cfg, int vocab, Rng& rng) {
  cfg.check();
  if (vocab < 2) throw Error(ErrorKind::Config, "vocabulary needs at least two symbols");
  auto report = validate(spec);
  if (!report.ok)
    throw Error(ErrorKind::Contract,
                "compile requires a valid cell (" + report.violations.front().rule + ")");
  if (cfg.tie_weights && cfg.emb_dim != cfg.nhid)
    throw Error(ErrorKind::Config, "tie_weights requires emb_dim == nhid");

  Model model;
  model.spec = spec;
  model.cfg = cfg;
  model.vocab = vocab;
  model.n_slots = static_cast<int>(spec.new_hidden.size());

  const auto order = detail::topo_order(spec);
  const auto idx = detail::id_index(spec);
  const double emb_range = 0.1;
  const double w_range = 1.0 / std::sqrt(static_cast<double>(cfg.nhid));

  auto add_param = [&](std::vector<int> shape, double range) {
    Tensor t(std::move(shape));
    if (range > 0.0)
      for (double& v : t.data) v = rng.uniform(-range, range);
    model.params.push_back(std::move(t));
    return static_cast<int>(model.params.size() - 1);
  };

  model.emb_param = add_param({vocab, cfg.emb_dim}, emb_range);

  for (int layer = 0; layer < cfg.n_layers; ++layer) {
    const int in_dim = layer == 0 ? cfg.emb_dim : cfg.nhid;
    detail::CellPlan plan;
    std::vector<int> plan_pos(spec.nodes.size(), -1);
    std::vector<int> dim;

    for (int node_idx : order) {
      const Node& node = spec.nodes[node_idx];
      detail::NodePlan np;
      np.op = node.op;
      np.slot = node.slot;
      for (const auto& in : node.inputs) np.in.push_back(plan_pos[idx.at(in)]);

      int d;
      switch (node.op) {
        case Op::Input:
          d = in_dim;
          break;
        case Op::Hidden:
          d = cfg.nhid;
          break;
        case Op::Linear:
          for (size_t b = 0; b < np.in.size(); ++b) {
            const Node& src = spec.nodes[idx.at(node.inputs[b])];
            detail::BranchPlan branch;
            branch.w_param = add_param({dim[np.in[b]], cfg.nhid}, w_range);
            branch.recurrent = src.op == Op::Hidden;
            np.branches.push_back(branch);
          }
          np.b_param = add_param({1, cfg.nhid}, 0.0);
          d = cfg.nhid;
          break;
        default: {
          d = dim[np.in.front()];
          for (int in_pos : np.in)
            if (dim[in_pos] != d)
              throw Error(ErrorKind::Shape,
                          "node '" + node.id + "' mixes widths " + std::to_string(dim[in_pos]) +
                              " and " + std::to_string(d) +
                              " (emb_dim must equal nhid for this cell)");
          break;
        }
      }

      plan_pos[node_idx] = static_cast<int>(plan.nodes.size());
      plan.nodes.push_back(std::move(np));
      dim.push_back(d);
    }

    for (const auto& [slot, id] : spec.new_hidden) {
      const int target_pos = plan_pos[idx.at(id)];
      if (dim[target_pos] != cfg.nhid)
        throw Error(ErrorKind::Shape, "new hidden state '" + id + "' has width " +
                                          std::to_string(dim[target_pos]) + ", expected " +
                                          std::to_string(cfg.nhid));
      plan.target_node.push_back(target_pos);
    }
    // Hidden sources per slot, ascending (validate guarantees slot sets match).
    std::map<int, int> hidden_by_slot;
    for (size_t i = 0; i < plan.nodes.size(); ++i)
      if (plan.nodes[i].op == Op::Hidden) hidden_by_slot[plan.nodes[i].slot] = static_cast<int>(i);
    for (const auto& [slot, pos] : hidden_by_slot) plan.hidden_node.push_back(pos);

    plan.output_node = plan.target_node.front();
    model.layers.push_back(std::move(plan));
  }

  if (!cfg.tie_weights) model.dec_w_param = add_param({vocab, cfg.nhid}, 0.0);
  model.dec_b_param = add_param({1, vocab}, 0.0);
  return model;
}

namespace detail {

struct SegMasks {
  Tensor input_mask;            // B x emb_dim
  Tensor output_mask;           // B x nhid
  std::vector<Tensor> between;  // per layer boundary, B x nhid
  Tensor emb_scale;             // vocab x 1
  std::map<int, Tensor> weight_masks;  // w_param index -> DropConnect mask
};

inline SegMasks sample_masks(const Model& model, Rng& rng) {
  const TrainConfig& cfg = model.cfg;
  SegMasks masks;
  if (cfg.dropoute > 0.0) masks.emb_scale = locked_mask(rng, model.vocab, 1, cfg.dropoute);
  if (cfg.dropouti > 0.0)
    masks.input_mask = locked_mask(rng, cfg.batch_size, cfg.emb_dim, cfg.dropouti);
  if (cfg.dropouth > 0.0)
    for (int l = 0; l + 1 < cfg.n_layers; ++l)
      masks.between.push_back(locked_mask(rng, cfg.batch_size, cfg.nhid, cfg.dropouth));
  if (cfg.dropout > 0.0)
    masks.output_mask = locked_mask(rng, cfg.batch_size, cfg.nhid, cfg.dropout);
  if (cfg.wdrop > 0.0)
    for (const auto& plan : model.layers)
      for (const auto& np : plan.nodes)
        for (const auto& branch : np.branches)
          if (branch.recurrent) {
            const Tensor& w = model.params[branch.w_param];
            masks.weight_masks[branch.w_param] =
                locked_mask(rng, w.rows(), w.cols(), cfg.wdrop);
          }
  return masks;
}

struct SegmentOutput {
  ValueId loss = -1;                        // mean nll per predicted token
  std::vector<std::vector<ValueId>> hidden;  // [layer][slot] new-state nodes
};

// One truncated-BPTT segment: steps [start, start+T) predict the next token.
inline SegmentOutput forward_segment(const Model& model, Tape& tape,
                                     const std::vector<int>& param_ids,
                                     const std::vector<std::vector<int>>& streams, size_t start,
                                     int T, const std::vector<std::vector<Tensor>>& hidden_in,
                                     const SegMasks& masks) {
  const int B = static_cast<int>(streams.size());

  ValueId emb_table = param_ids[model.emb_param];
  if (!masks.emb_scale.data.empty())
    emb_table = tape.row_scale(emb_table, tape.constant(masks.emb_scale));

  ValueId input_mask = -1, output_mask = -1;
  if (!masks.input_mask.data.empty()) input_mask = tape.constant(masks.input_mask);
  if (!masks.output_mask.data.empty()) output_mask = tape.constant(masks.output_mask);
  std::vector<ValueId> between;
  for (const Tensor& m : masks.between) between.push_back(tape.constant(m));

  // Weights with DropConnect applied, resolved once per segment.
  std::map<int, ValueId> weight_of;
  for (const auto& [w_param, mask] : masks.weight_masks)
    weight_of[w_param] = tape.prod(param_ids[w_param], tape.constant(mask));
  auto weight_id = [&](int w_param) {
    auto it = weight_of.find(w_param);
    return it == weight_of.end() ? param_ids[w_param] : it->second;
  };

  std::vector<std::vector<ValueId>> hidden(model.layers.size());
  for (size_t l = 0; l < model.layers.size(); ++l)
    for (const Tensor& h : hidden_in[l]) hidden[l].push_back(tape.constant(h));

  std::vector<ValueId> step_outputs;
  std::vector<int> flat_targets;
  std::vector<ValueId> values;
  for (int t = 0; t < T; ++t) {
    std::vector<int> ids(B);
    for (int b = 0; b < B; ++b) {
      ids[b] = streams[b][start + t];
      flat_targets.push_back(streams[b][start + t + 1]);
    }
    ValueId x = tape.embed(emb_table, std::move(ids));
    if (input_mask >= 0) x = tape.prod(x, input_mask);

    for (size_t l = 0; l < model.layers.size(); ++l) {
      const detail::CellPlan& plan = model.layers[l];
      values.assign(plan.nodes.size(), -1);
      for (size_t i = 0; i < plan.nodes.size(); ++i) {
        const detail::NodePlan& np = plan.nodes[i];
        switch (np.op) {
          case Op::Input:
            values[i] = x;
            break;
          case Op::Hidden: {
            int pos = 0;
            while (plan.hidden_node[pos] != static_cast<int>(i)) pos++;
            values[i] = hidden[l][pos];
            break;
          }
          case Op::Linear: {
            std::vector<ValueId> xs, ws;
            for (size_t b = 0; b < np.in.size(); ++b) {
              xs.push_back(values[np.in[b]]);
              ws.push_back(weight_id(np.branches[b].w_param));
            }
            values[i] = tape.linear(xs, ws, param_ids[np.b_param]);
            break;
          }
          case Op::Blend:
            values[i] = tape.blend(values[np.in[0]], values[np.in[1]], values[np.in[2]]);
            break;
          case Op::Prod:
            values[i] = tape.prod(values[np.in[0]], values[np.in[1]]);
            break;
          case Op::Sum:
            values[i] = tape.sum(values[np.in[0]], values[np.in[1]]);
            break;
          case Op::Tanh:
            values[i] = tape.tanh(values[np.in[0]]);
            break;
          case Op::Sigmoid:
            values[i] = tape.sigmoid(values[np.in[0]]);
            break;
          case Op::LeakyRelu:
            values[i] = tape.leaky_relu(values[np.in[0]]);
            break;
        }
      }
      for (size_t s = 0; s < plan.target_node.size(); ++s)
        hidden[l][s] = values[plan.target_node[s]];
      x = values[plan.output_node];
      if (l + 1 < model.layers.size() && !between.empty()) x = tape.prod(x, between[l]);
    }

    if (output_mask >= 0) x = tape.prod(x, output_mask);
    step_outputs.push_back(x);
  }

  ValueId stacked = tape.concat_rows(step_outputs);
  ValueId dec_w =
      model.dec_w_param >= 0 ? param_ids[model.dec_w_param] : param_ids[model.emb_param];
  ValueId logits = tape.matmul_nt(stacked, dec_w, param_ids[model.dec_b_param]);

  SegmentOutput out;
  out.loss = tape.softmax_xent(logits, std::move(flat_targets));
  out.hidden = std::move(hidden);
  return out;
}

inline std::vector<std::vector<Tensor>> zero_hidden(const Model& model) {
  std::vector<std::vector<Tensor>> hidden(model.layers.size());
  for (auto& layer : hidden)
    layer.assign(static_cast<size_t>(model.n_slots),
                 Tensor({model.cfg.batch_size, model.cfg.nhid}));
  return hidden;
}

inline std::vector<int> register_params(Tape& tape, const Model& model) {
  std::vector<int> ids;
  ids.reserve(model.params.size());
  for (const Tensor& p : model.params) ids.push_back(tape.param(p));
  return ids;
}

}  // namespace detail

// Evaluation-mode mean negative log-likelihood per token, in nats.
inline double log_ppl(const Model& model, const std::vector<int>& split_ids) {
  const TrainConfig& cfg = model.cfg;
  const auto streams = batchify(split_ids, cfg.batch_size);
  const size_t len = streams[0].size();
  if (len < 2) throw Error(ErrorKind::Contract, "split too small to evaluate");

  auto hidden = detail::zero_hidden(model);
  double weighted = 0.0;
  size_t steps = 0;
  for (size_t start = 0; start + 1 < len; start += cfg.bptt_len) {
    const int T = static_cast<int>(std::min<size_t>(cfg.bptt_len, len - 1 - start));
    Tape tape(false);
    auto param_ids = detail::register_params(tape, model);
    auto seg = detail::forward_segment(model, tape, param_ids, streams, start, T, hidden,
                                       detail::SegMasks{});
    weighted += tape.value(seg.loss).data[0] * T;
    steps += static_cast<size_t>(T);
    for (size_t l = 0; l < hidden.size(); ++l)
      for (size_t s = 0; s < hidden[l].size(); ++s)
        hidden[l][s] = tape.value(seg.hidden[l][s]);
  }
  return weighted / static_cast<double>(steps);
}

// Continues training from the model's current parameters. `rng` drives the
// dropout masks and must be the stream that initialized the model for
// reproducible records.
inline TrainRecord train_model(Model& model, const Corpus& corpus, Rng& rng) {
  const TrainConfig& cfg = model.cfg;
  TrainRecord record;
  record.arch_hash = canonical_hash(model.spec);
  record.seed = cfg.seed;
  record.num_params = model.num_params();

  const auto streams = batchify(corpus.train, cfg.batch_size);
  const size_t len = streams[0].size();
  if (len < static_cast<size_t>(cfg.bptt_len) + 1)
    throw Error(ErrorKind::Config, "train split shorter than one BPTT segment");

  const double threshold = kExplosionFactor * std::log(static_cast<double>(model.vocab));
  const double param_cost =
      kSyntheticSecondsPerParamToken * static_cast<double>(record.num_params);

  using clock = std::chrono::steady_clock;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(clock::now() - t0).count(); };
    auto hidden = detail::zero_hidden(model);
    long long tokens_done = 0;

    auto fail = [&](int at_epoch) {
      record.status = "DIVERGED";
      record.fail_epoch = at_epoch;
      record.fail_wall_time_s =
          cfg.synthetic_time ? param_cost * static_cast<double>(tokens_done) : elapsed();
      return record;
    };

    for (size_t start = 0; start + 1 < len; start += cfg.bptt_len) {
      const int T = static_cast<int>(std::min<size_t>(cfg.bptt_len, len - 1 - start));
      auto masks = detail::sample_masks(model, rng);
      Tape tape(false);
      auto param_ids = detail::register_params(tape, model);
      auto seg =
          detail::forward_segment(model, tape, param_ids, streams, start, T, hidden, masks);

      const double loss = tape.value(seg.loss).data[0];
      if (!std::isfinite(loss) || loss > threshold) return fail(epoch);

      auto grads = tape.backward(seg.loss);
      clip_global_norm(grads, cfg.grad_clip);
      for (size_t i = 0; i < model.params.size(); ++i)
        for (size_t j = 0; j < grads[i].data.size(); ++j)
          model.params[i].data[j] -= cfg.lr * grads[i].data[j];

      for (size_t l = 0; l < hidden.size(); ++l)
        for (size_t s = 0; s < hidden[l].size(); ++s)
          hidden[l][s] = tape.value(seg.hidden[l][s]);
      tokens_done += static_cast<long long>(cfg.batch_size) * T;
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_log_ppl = log_ppl(model, corpus.train);
    m.val_log_ppl = log_ppl(model, corpus.valid);
    m.test_log_ppl = log_ppl(model, corpus.test);
    if (!std::isfinite(m.train_log_ppl) || !std::isfinite(m.val_log_ppl) ||
        !std::isfinite(m.test_log_ppl))
      return fail(epoch);
    m.wall_time_s =
        cfg.synthetic_time ? param_cost * static_cast<double>(tokens_done) : elapsed();
    record.epochs.push_back(m);
  }
  return record;
}

inline TrainRecord train(const CellSpec& spec, const Corpus& corpus, const TrainConfig& cfg) {
  cfg.check();
  const std::string hash = canonical_hash(spec);
  Rng rng(mix_seed(cfg.seed, hash));
  Model model = compile(spec, cfg, corpus.vocab_size(), rng);
  return train_model(model, corpus, rng);
}

}  // namespace recurnas
