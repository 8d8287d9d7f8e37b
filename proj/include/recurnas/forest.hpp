#pragma once

// Bagged ensemble of depth-limited CART regression trees. Splits minimize
// child sum-of-squares with deterministic tie-breaking (lowest feature,
// lowest threshold), so a fit is a pure function of the data and the
// supplied generator. max_features > 0 additionally subsamples the
// candidate features at every split, random-forest style. Prediction
// returns the ensemble mean plus the between-tree standard deviation as a
// disagreement measure.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include "recurnas/error.hpp"
#include "recurnas/rng.hpp"

namespace recurnas {

struct ForestParams {
  int n_trees = 24;
  int max_depth = 6;
  int min_leaf = 2;
  bool bootstrap = true;
  int max_features = 0;  // features tried per split; 0 = all

  void check() const {
    if (n_trees < 1 || max_depth < 0 || min_leaf < 1 || max_features < 0)
      throw Error(ErrorKind::Config, "forest parameters must be positive (depth may be 0)");
  }
};

class RegressionTree {
 public:
  void fit(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
           std::vector<int> indices, const ForestParams& p, Rng& rng) {
    nodes_.clear();
    grow(X, y, std::move(indices), 0, p, rng);
  }

  double predict(const std::vector<double>& x) const {
    int i = 0;
    for (;;) {
      const TNode& n = nodes_[static_cast<size_t>(i)];
      if (n.left < 0) return n.value;
      i = x[static_cast<size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
  }

 private:
  struct TNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1, right = -1;
    double value = 0.0;
  };
  std::vector<TNode> nodes_;

  int grow(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
           std::vector<int> idx, int depth, const ForestParams& p, Rng& rng) {
    const int me = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    double sum = 0.0;
    for (int i : idx) sum += y[static_cast<size_t>(i)];
    const double node_mean = sum / static_cast<double>(idx.size());
    nodes_[static_cast<size_t>(me)].value = node_mean;

    if (depth >= p.max_depth || static_cast<int>(idx.size()) < 2 * p.min_leaf) return me;

    const size_t n_feat = X[static_cast<size_t>(idx.front())].size();
    std::vector<int> candidates;
    if (p.max_features > 0 && p.max_features < static_cast<int>(n_feat)) {
      candidates = rng.sample_distinct(static_cast<int>(n_feat), p.max_features);
      std::sort(candidates.begin(), candidates.end());
    } else {
      candidates.resize(n_feat);
      std::iota(candidates.begin(), candidates.end(), 0);
    }
    int best_feat = -1;
    double best_thr = 0.0, best_sse = std::numeric_limits<double>::infinity();
    std::vector<int> order(idx);
    for (const int fi : candidates) {
      const auto f = static_cast<size_t>(fi);
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double va = X[static_cast<size_t>(a)][f], vb = X[static_cast<size_t>(b)][f];
        if (va != vb) return va < vb;
        return a < b;
      });
      // prefix sums let every cut point price both children in O(1)
      double left_sum = 0.0, left_sq = 0.0, total_sum = 0.0, total_sq = 0.0;
      for (int i : order) {
        const double v = y[static_cast<size_t>(i)];
        total_sum += v;
        total_sq += v * v;
      }
      const int n = static_cast<int>(order.size());
      for (int k = 0; k < n - 1; ++k) {
        const double v = y[static_cast<size_t>(order[static_cast<size_t>(k)])];
        left_sum += v;
        left_sq += v * v;
        const double xa = X[static_cast<size_t>(order[static_cast<size_t>(k)])][f];
        const double xb = X[static_cast<size_t>(order[static_cast<size_t>(k + 1)])][f];
        if (xa == xb) continue;
        const int nl = k + 1, nr = n - nl;
        if (nl < p.min_leaf || nr < p.min_leaf) continue;
        const double right_sum = total_sum - left_sum, right_sq = total_sq - left_sq;
        const double sse = (left_sq - left_sum * left_sum / nl) +
                           (right_sq - right_sum * right_sum / nr);
        const double thr = (xa + xb) / 2.0;
        if (sse + 1e-12 < best_sse) {
          best_sse = sse;
          best_feat = static_cast<int>(f);
          best_thr = thr;
        }
      }
    }
    if (best_feat < 0) return me;

    std::vector<int> left_idx, right_idx;
    for (int i : idx) {
      if (X[static_cast<size_t>(i)][static_cast<size_t>(best_feat)] <= best_thr)
        left_idx.push_back(i);
      else
        right_idx.push_back(i);
    }
    if (left_idx.empty() || right_idx.empty()) return me;

    const int l = grow(X, y, std::move(left_idx), depth + 1, p);
    const int r = grow(X, y, std::move(right_idx), depth + 1, p);
    nodes_[static_cast<size_t>(me)].feature = best_feat;
    nodes_[static_cast<size_t>(me)].threshold = best_thr;
    nodes_[static_cast<size_t>(me)].left = l;
    nodes_[static_cast<size_t>(me)].right = r;
    return me;
  }
};

class Forest {
 public:
  void fit(const std::vector<std::vector<double>>& X, const std::vector<double>& y, Rng& rng,
           const ForestParams& p = {}) {
    p.check();
    if (X.size() != y.size() || X.empty())
      throw Error(ErrorKind::Contract, "forest fit: X and y must be non-empty and aligned");
    const int n = static_cast<int>(X.size());
    trees_.assign(static_cast<size_t>(p.n_trees), RegressionTree{});
    for (auto& tree : trees_) {
      std::vector<int> idx(static_cast<size_t>(n));
      if (p.bootstrap) {
        for (int& i : idx) i = static_cast<int>(rng.below(static_cast<uint64_t>(n)));
      } else {
        std::iota(idx.begin(), idx.end(), 0);
      }
      tree.fit(X, y, std::move(idx), p, rng);
    }
  }

  bool fitted() const { return !trees_.empty(); }

  // (mean, std) over per-tree predictions; std is 0 for one tree.
  std::pair<double, double> predict(const std::vector<double>& x) const {
    if (trees_.empty()) throw Error(ErrorKind::Contract, "forest predict before fit");
    double sum = 0.0, sq = 0.0;
    for (const auto& tree : trees_) {
      const double v = tree.predict(x);
      sum += v;
      sq += v * v;
    }
    const double n = static_cast<double>(trees_.size());
    const double mean = sum / n;
    const double var = std::max(0.0, sq / n - mean * mean);
    return {mean, std::sqrt(var)};
  }

 private:
  std::vector<RegressionTree> trees_;
};

}  // namespace recurnas
