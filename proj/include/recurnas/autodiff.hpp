#pragma once

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "recurnas/cell.hpp"  // kLeakyReluSlope
#include "recurnas/error.hpp"
#include "recurnas/tensor.hpp"

namespace recurnas {

using ValueId = int;

// Reverse-mode tape over the op set a compiled cell needs. Recording is
// single-owner; replay order is creation order, which is topological by
// construction.
class Tape {
  enum class TapeOp {
    Leaf,
    Linear,     // xs..., then Ws..., then bias
    MatmulNT,   // x * W^T + b
    Blend,      // (z, x, y) -> z*x + (1-z)*y
    Prod,
    Sum,
    Tanh,
    Sigmoid,
    LeakyRelu,
    Embed,      // table rows gathered by token id
    RowScale,   // table rows scaled by a length-V vector
    SoftmaxXent,
    Scale,
    ConcatRows, // vertical stack of same-width blocks
  };

  struct Record {
    TapeOp op = TapeOp::Leaf;
    std::vector<ValueId> inputs;
    Tensor value;
    Tensor grad;             // allocated during backward
    bool needs_grad = false; // on a param-to-loss path
    int param_index = -1;    // registration order for params
    std::vector<int> ids;    // embed tokens / xent targets
    Tensor saved;            // xent probs
    double factor = 1.0;     // scale
  };

 public:
  explicit Tape(bool check_finite = true) : check_finite_(check_finite) {}

  size_t size() const { return records_.size(); }
  int param_count() const { return n_params_; }
  const Tensor& value(ValueId id) const { return records_.at(id).value; }

  ValueId constant(Tensor t) {
    check_input(t, "constant");
    return push_leaf(std::move(t), false);
  }

  // Parameters are copied onto the tape; gradient slots follow registration order.
  ValueId param(const Tensor& t) {
    check_input(t, "param");
    ValueId id = push_leaf(t, true);
    records_[id].param_index = n_params_++;
    return id;
  }

  // sum_i xs[i] * Ws[i] + bias
  ValueId linear(std::span<const ValueId> xs, std::span<const ValueId> Ws, ValueId bias) {
    if (xs.empty() || xs.size() != Ws.size())
      throw Error(ErrorKind::Contract, "linear needs one weight per input");
    const Tensor& b = records_.at(bias).value;
    int out_dim = static_cast<int>(b.numel());
    int batch = records_.at(xs[0]).value.rows();

    Record rec;
    rec.op = TapeOp::Linear;
    for (size_t i = 0; i < xs.size(); ++i) {
      const Tensor& x = records_.at(xs[i]).value;
      const Tensor& w = records_.at(Ws[i]).value;
      if (x.rows() != batch || x.cols() != w.rows() || w.cols() != out_dim)
        throw Error(ErrorKind::Shape, std::string("linear branch ") + std::to_string(i) +
                                          " mismatch: x" + x.shape_str() + " vs W" + w.shape_str());
      rec.inputs.push_back(xs[i]);
    }
    for (ValueId w : Ws) rec.inputs.push_back(w);
    rec.inputs.push_back(bias);

    rec.value = Tensor({batch, out_dim});
    auto out = as_matrix(rec.value);
    for (size_t i = 0; i < xs.size(); ++i)
      out.noalias() += as_matrix(records_[xs[i]].value) * as_matrix(records_[Ws[i]].value);
    out.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.data.data(), out_dim);
    return push(std::move(rec));
  }

  // x * W^T + b, for a decoder tied to the embedding table.
  ValueId matmul_nt(ValueId x, ValueId w, ValueId bias) {
    const Tensor& xv = records_.at(x).value;
    const Tensor& wv = records_.at(w).value;
    const Tensor& bv = records_.at(bias).value;
    if (xv.cols() != wv.cols())
      throw Error(ErrorKind::Shape,
                  "matmul_nt mismatch: x" + xv.shape_str() + " vs W" + wv.shape_str());
    if (static_cast<int>(bv.numel()) != wv.rows())
      throw Error(ErrorKind::Shape, "matmul_nt bias length " + bv.shape_str());

    Record rec;
    rec.op = TapeOp::MatmulNT;
    rec.inputs = {x, w, bias};
    rec.value = Tensor({xv.rows(), wv.rows()});
    auto out = as_matrix(rec.value);
    out.noalias() = as_matrix(xv) * as_matrix(wv).transpose();
    out.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bv.data.data(), bv.numel());
    return push(std::move(rec));
  }

  ValueId blend(ValueId z, ValueId x, ValueId y) {
    const Tensor& zv = records_.at(z).value;
    const Tensor& xv = records_.at(x).value;
    const Tensor& yv = records_.at(y).value;
    require_same(zv, xv, "blend");
    require_same(xv, yv, "blend");
    Record rec;
    rec.op = TapeOp::Blend;
    rec.inputs = {z, x, y};
    rec.value = Tensor(zv.shape);
    for (size_t i = 0; i < zv.numel(); ++i)
      rec.value.data[i] = zv.data[i] * xv.data[i] + (1.0 - zv.data[i]) * yv.data[i];
    return push(std::move(rec));
  }

  ValueId prod(ValueId a, ValueId b) { return binary(TapeOp::Prod, a, b); }
  ValueId sum(ValueId a, ValueId b) { return binary(TapeOp::Sum, a, b); }

  ValueId tanh(ValueId x) { return unary(TapeOp::Tanh, x); }
  ValueId sigmoid(ValueId x) { return unary(TapeOp::Sigmoid, x); }
  ValueId leaky_relu(ValueId x) { return unary(TapeOp::LeakyRelu, x); }

  ValueId embed(ValueId table, std::vector<int> token_ids) {
    const Tensor& tv = records_.at(table).value;
    int vocab = tv.rows();
    int dim = tv.cols();
    for (int id : token_ids)
      if (id < 0 || id >= vocab)
        throw Error(ErrorKind::Contract, "token id " + std::to_string(id) + " outside vocab " +
                                             std::to_string(vocab));
    Record rec;
    rec.op = TapeOp::Embed;
    rec.inputs = {table};
    rec.ids = std::move(token_ids);
    rec.value = Tensor({static_cast<int>(rec.ids.size()), dim});
    for (size_t b = 0; b < rec.ids.size(); ++b)
      std::copy_n(tv.data.begin() + static_cast<size_t>(rec.ids[b]) * dim, dim,
                  rec.value.data.begin() + b * dim);
    return push(std::move(rec));
  }

  // Row r of the table scaled by scales[r].
  ValueId row_scale(ValueId table, ValueId scales) {
    const Tensor& tv = records_.at(table).value;
    const Tensor& sv = records_.at(scales).value;
    if (static_cast<int>(sv.numel()) != tv.rows())
      throw Error(ErrorKind::Shape,
                  "row_scale needs one factor per row: " + tv.shape_str() + " vs " + sv.shape_str());
    Record rec;
    rec.op = TapeOp::RowScale;
    rec.inputs = {table, scales};
    rec.value = Tensor(tv.shape);
    int cols = tv.cols();
    for (int r = 0; r < tv.rows(); ++r)
      for (int c = 0; c < cols; ++c)
        rec.value.data[static_cast<size_t>(r) * cols + c] =
            tv.data[static_cast<size_t>(r) * cols + c] * sv.data[r];
    return push(std::move(rec));
  }

  ValueId concat_rows(std::span<const ValueId> parts) {
    if (parts.empty()) throw Error(ErrorKind::Contract, "concat_rows needs at least one block");
    int cols = records_.at(parts[0]).value.cols();
    int rows = 0;
    for (ValueId p : parts) {
      const Tensor& t = records_.at(p).value;
      if (t.cols() != cols)
        throw Error(ErrorKind::Shape, "concat_rows width mismatch: " + t.shape_str());
      rows += t.rows();
    }
    Record rec;
    rec.op = TapeOp::ConcatRows;
    rec.inputs.assign(parts.begin(), parts.end());
    rec.value = Tensor({rows, cols});
    double* dst = rec.value.data.data();
    for (ValueId p : parts) {
      const Tensor& t = records_[p].value;
      dst = std::copy(t.data.begin(), t.data.end(), dst);
    }
    return push(std::move(rec));
  }

  ValueId scale(ValueId x, double factor) {
    Record rec;
    rec.op = TapeOp::Scale;
    rec.inputs = {x};
    rec.factor = factor;
    rec.value = records_.at(x).value;
    for (double& v : rec.value.data) v *= factor;
    return push(std::move(rec));
  }

  // Mean cross-entropy over the batch, in nats. probs_out receives the
  // softmax rows when provided.
  ValueId softmax_xent(ValueId logits, std::vector<int> targets, Tensor* probs_out = nullptr) {
    const Tensor& lv = records_.at(logits).value;
    int batch = lv.rows();
    int vocab = lv.cols();
    if (static_cast<int>(targets.size()) != batch)
      throw Error(ErrorKind::Shape, "softmax_xent: " + std::to_string(targets.size()) +
                                        " targets for logits " + lv.shape_str());
    for (int t : targets)
      if (t < 0 || t >= vocab)
        throw Error(ErrorKind::Contract, "target id " + std::to_string(t) + " outside vocab");

    Record rec;
    rec.op = TapeOp::SoftmaxXent;
    rec.inputs = {logits};
    rec.ids = std::move(targets);
    rec.saved = Tensor({batch, vocab});
    double total = 0.0;
    for (int b = 0; b < batch; ++b) {
      const double* row = lv.data.data() + static_cast<size_t>(b) * vocab;
      double* prow = rec.saved.data.data() + static_cast<size_t>(b) * vocab;
      double mx = row[0];
      for (int v = 1; v < vocab; ++v) mx = std::max(mx, row[v]);
      double z = 0.0;
      for (int v = 0; v < vocab; ++v) {
        prow[v] = std::exp(row[v] - mx);
        z += prow[v];
      }
      for (int v = 0; v < vocab; ++v) prow[v] /= z;
      total += std::log(z) + mx - row[rec.ids[b]];
    }
    rec.value = Tensor({1}, {total / batch});
    if (probs_out) *probs_out = rec.saved;
    return push(std::move(rec));
  }

  // Reverse sweep from a scalar loss. Returns one gradient tensor per
  // registered parameter, in registration order; parameters the loss never
  // touched come back zero-filled.
  std::vector<Tensor> backward(ValueId loss) {
    Record& top = records_.at(loss);
    if (!top.value.is_scalar())
      throw Error(ErrorKind::Contract, "backward needs a scalar loss, got " + top.value.shape_str());

    for (auto& rec : records_)
      rec.grad = Tensor();  // drop any previous sweep
    top.grad = Tensor(top.value.shape);
    top.grad.data[0] = 1.0;

    for (int i = loss; i >= 0; --i) {
      Record& rec = records_[i];
      if (!rec.needs_grad || rec.grad.data.empty()) continue;
      propagate(rec);
    }

    std::vector<Tensor> grads(n_params_);
    for (const auto& rec : records_) {
      if (rec.param_index < 0) continue;
      grads[rec.param_index] = rec.grad.data.empty() ? Tensor(rec.value.shape) : rec.grad;
    }
    return grads;
  }

 private:
  void check_input(const Tensor& t, const char* what) const {
    if (check_finite_ && !t.all_finite())
      throw Error(ErrorKind::Numeric, std::string(what) + " received a non-finite tensor");
  }

  void require_same(const Tensor& a, const Tensor& b, const char* what) const {
    if (a.shape != b.shape)
      throw Error(ErrorKind::Shape,
                  std::string(what) + " shape mismatch: " + a.shape_str() + " vs " + b.shape_str());
  }

  ValueId push_leaf(Tensor t, bool needs) {
    Record rec;
    rec.op = TapeOp::Leaf;
    rec.value = std::move(t);
    rec.needs_grad = needs;
    records_.push_back(std::move(rec));
    return static_cast<ValueId>(records_.size() - 1);
  }

  ValueId push(Record rec) {
    for (ValueId in : rec.inputs)
      if (records_.at(in).needs_grad) {
        rec.needs_grad = true;
        break;
      }
    if (check_finite_ && !rec.value.all_finite())
      throw Error(ErrorKind::Numeric, "op produced a non-finite tensor");
    records_.push_back(std::move(rec));
    return static_cast<ValueId>(records_.size() - 1);
  }

  ValueId binary(TapeOp op, ValueId a, ValueId b) {
    const Tensor& av = records_.at(a).value;
    const Tensor& bv = records_.at(b).value;
    require_same(av, bv, op == TapeOp::Prod ? "prod" : "sum");
    Record rec;
    rec.op = op;
    rec.inputs = {a, b};
    rec.value = Tensor(av.shape);
    if (op == TapeOp::Prod)
      for (size_t i = 0; i < av.numel(); ++i) rec.value.data[i] = av.data[i] * bv.data[i];
    else
      for (size_t i = 0; i < av.numel(); ++i) rec.value.data[i] = av.data[i] + bv.data[i];
    return push(std::move(rec));
  }

  ValueId unary(TapeOp op, ValueId x) {
    const Tensor& xv = records_.at(x).value;
    Record rec;
    rec.op = op;
    rec.inputs = {x};
    rec.value = Tensor(xv.shape);
    switch (op) {
      case TapeOp::Tanh:
        for (size_t i = 0; i < xv.numel(); ++i) rec.value.data[i] = std::tanh(xv.data[i]);
        break;
      case TapeOp::Sigmoid:
        for (size_t i = 0; i < xv.numel(); ++i) rec.value.data[i] = 1.0 / (1.0 + std::exp(-xv.data[i]));
        break;
      case TapeOp::LeakyRelu:
        for (size_t i = 0; i < xv.numel(); ++i) {
          double v = xv.data[i];
          rec.value.data[i] = v > 0.0 ? v : kLeakyReluSlope * v;
        }
        break;
      default:
        throw Error(ErrorKind::Contract, "not a unary op");
    }
    return push(std::move(rec));
  }

  Tensor& grad_of(ValueId id) {
    Record& rec = records_[id];
    if (rec.grad.data.empty()) rec.grad = Tensor(rec.value.shape);
    return rec.grad;
  }

  bool wants(ValueId id) const { return records_[id].needs_grad; }

  void propagate(Record& rec) {
    const Tensor& g = rec.grad;
    switch (rec.op) {
      case TapeOp::Leaf:
        break;
      case TapeOp::Linear: {
        size_t branches = (rec.inputs.size() - 1) / 2;
        auto gm = as_matrix(rec.grad);
        for (size_t i = 0; i < branches; ++i) {
          ValueId x = rec.inputs[i];
          ValueId w = rec.inputs[branches + i];
          if (wants(x))
            as_matrix(grad_of(x)).noalias() += gm * as_matrix(records_[w].value).transpose();
          if (wants(w))
            as_matrix(grad_of(w)).noalias() += as_matrix(records_[x].value).transpose() * gm;
        }
        ValueId bias = rec.inputs.back();
        if (wants(bias)) {
          Tensor& bg = grad_of(bias);
          Eigen::Map<Eigen::RowVectorXd>(bg.data.data(), bg.numel()) += gm.colwise().sum();
        }
        break;
      }
      case TapeOp::MatmulNT: {
        auto gm = as_matrix(rec.grad);
        ValueId x = rec.inputs[0], w = rec.inputs[1], bias = rec.inputs[2];
        if (wants(x)) as_matrix(grad_of(x)).noalias() += gm * as_matrix(records_[w].value);
        if (wants(w))
          as_matrix(grad_of(w)).noalias() += gm.transpose() * as_matrix(records_[x].value);
        if (wants(bias)) {
          Tensor& bg = grad_of(bias);
          Eigen::Map<Eigen::RowVectorXd>(bg.data.data(), bg.numel()) += gm.colwise().sum();
        }
        break;
      }
      case TapeOp::Blend: {
        ValueId z = rec.inputs[0], x = rec.inputs[1], y = rec.inputs[2];
        const auto& zv = records_[z].value.data;
        const auto& xv = records_[x].value.data;
        const auto& yv = records_[y].value.data;
        if (wants(z)) {
          auto& zg = grad_of(z).data;
          for (size_t i = 0; i < g.numel(); ++i) zg[i] += g.data[i] * (xv[i] - yv[i]);
        }
        if (wants(x)) {
          auto& xg = grad_of(x).data;
          for (size_t i = 0; i < g.numel(); ++i) xg[i] += g.data[i] * zv[i];
        }
        if (wants(y)) {
          auto& yg = grad_of(y).data;
          for (size_t i = 0; i < g.numel(); ++i) yg[i] += g.data[i] * (1.0 - zv[i]);
        }
        break;
      }
      case TapeOp::Prod: {
        ValueId a = rec.inputs[0], b = rec.inputs[1];
        if (wants(a)) {
          auto& ag = grad_of(a).data;
          const auto& bv = records_[b].value.data;
          for (size_t i = 0; i < g.numel(); ++i) ag[i] += g.data[i] * bv[i];
        }
        if (wants(b)) {
          auto& bg = grad_of(b).data;
          const auto& av = records_[a].value.data;
          for (size_t i = 0; i < g.numel(); ++i) bg[i] += g.data[i] * av[i];
        }
        break;
      }
      case TapeOp::Sum:
        for (ValueId in : rec.inputs)
          if (wants(in)) {
            auto& ig = grad_of(in).data;
            for (size_t i = 0; i < g.numel(); ++i) ig[i] += g.data[i];
          }
        break;
      case TapeOp::Tanh: {
        ValueId x = rec.inputs[0];
        if (wants(x)) {
          auto& xg = grad_of(x).data;
          for (size_t i = 0; i < g.numel(); ++i) {
            double y = rec.value.data[i];
            xg[i] += g.data[i] * (1.0 - y * y);
          }
        }
        break;
      }
      case TapeOp::Sigmoid: {
        ValueId x = rec.inputs[0];
        if (wants(x)) {
          auto& xg = grad_of(x).data;
          for (size_t i = 0; i < g.numel(); ++i) {
            double y = rec.value.data[i];
            xg[i] += g.data[i] * y * (1.0 - y);
          }
        }
        break;
      }
      case TapeOp::LeakyRelu: {
        ValueId x = rec.inputs[0];
        if (wants(x)) {
          auto& xg = grad_of(x).data;
          const auto& xv = records_[x].value.data;
          for (size_t i = 0; i < g.numel(); ++i)
            xg[i] += g.data[i] * (xv[i] > 0.0 ? 1.0 : kLeakyReluSlope);
        }
        break;
      }
      case TapeOp::Embed: {
        ValueId table = rec.inputs[0];
        if (wants(table)) {
          Tensor& tg = grad_of(table);
          int dim = tg.cols();
          for (size_t b = 0; b < rec.ids.size(); ++b) {
            double* dst = tg.data.data() + static_cast<size_t>(rec.ids[b]) * dim;
            const double* src = g.data.data() + b * dim;
            for (int c = 0; c < dim; ++c) dst[c] += src[c];
          }
        }
        break;
      }
      case TapeOp::RowScale: {
        ValueId table = rec.inputs[0], scales = rec.inputs[1];
        const Tensor& tv = records_[table].value;
        const Tensor& sv = records_[scales].value;
        int cols = tv.cols();
        if (wants(table)) {
          auto& tg = grad_of(table).data;
          for (int r = 0; r < tv.rows(); ++r)
            for (int c = 0; c < cols; ++c)
              tg[static_cast<size_t>(r) * cols + c] +=
                  g.data[static_cast<size_t>(r) * cols + c] * sv.data[r];
        }
        if (wants(scales)) {
          auto& sg = grad_of(scales).data;
          for (int r = 0; r < tv.rows(); ++r) {
            double acc = 0.0;
            for (int c = 0; c < cols; ++c)
              acc += g.data[static_cast<size_t>(r) * cols + c] *
                     tv.data[static_cast<size_t>(r) * cols + c];
            sg[r] += acc;
          }
        }
        break;
      }
      case TapeOp::SoftmaxXent: {
        ValueId logits = rec.inputs[0];
        if (wants(logits)) {
          Tensor& lg = grad_of(logits);
          int batch = rec.saved.rows();
          int vocab = rec.saved.cols();
          double scale = g.data[0] / batch;
          for (int b = 0; b < batch; ++b) {
            const double* prow = rec.saved.data.data() + static_cast<size_t>(b) * vocab;
            double* grow = lg.data.data() + static_cast<size_t>(b) * vocab;
            for (int v = 0; v < vocab; ++v) grow[v] += scale * prow[v];
            grow[rec.ids[b]] -= scale;
          }
        }
        break;
      }
      case TapeOp::Scale: {
        ValueId x = rec.inputs[0];
        if (wants(x)) {
          auto& xg = grad_of(x).data;
          for (size_t i = 0; i < g.numel(); ++i) xg[i] += g.data[i] * rec.factor;
        }
        break;
      }
      case TapeOp::ConcatRows: {
        size_t offset = 0;
        for (ValueId in : rec.inputs) {
          size_t n = records_[in].value.numel();
          if (wants(in)) {
            auto& ig = grad_of(in).data;
            for (size_t i = 0; i < n; ++i) ig[i] += g.data[offset + i];
          }
          offset += n;
        }
        break;
      }
    }
  }

  std::vector<Record> records_;
  int n_params_ = 0;
  bool check_finite_;
};

// Scales gradients in place so the global L2 norm is at most max_norm.
// Returns the pre-clip norm.
inline double clip_global_norm(std::vector<Tensor>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (double v : g.data) sq += v * v;
  double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    double factor = max_norm / norm;
    for (auto& g : grads)
      for (double& v : g.data) v *= factor;
  }
  return norm;
}

}  // namespace recurnas
