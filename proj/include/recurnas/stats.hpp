#pragma once

// Small statistics toolkit: rank transforms, correlation coefficients, ROC
// AUC, and the coefficient of determination. Degenerate inputs (zero
// variance) yield quiet NaN where a correlation is undefined; structural
// misuse (mismatched lengths, single-class AUC) throws.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "recurnas/error.hpp"

namespace recurnas {

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) throw Error(ErrorKind::Contract, "mean of empty vector");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Ranks 1..n with ties sharing the average of the ranks they occupy.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  const size_t n = v.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double shared = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size())
    throw Error(ErrorKind::Contract, "pearson: length mismatch");
  if (x.size() < 2) throw Error(ErrorKind::Contract, "pearson: need at least 2 points");
  const double mx = mean_of(x), my = mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

// Spearman rho = Pearson over average ranks.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size())
    throw Error(ErrorKind::Contract, "spearman: length mismatch");
  if (x.size() < 2) throw Error(ErrorKind::Contract, "spearman: need at least 2 points");
  return pearson(average_ranks(x), average_ranks(y));
}

// Rank-statistic AUC: probability a positive outranks a negative, ties
// counted half via average ranks. labels are 0/1; both classes required.
inline double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw Error(ErrorKind::Contract, "roc_auc: length mismatch");
  const auto ranks = average_ranks(scores);
  double rank_sum_pos = 0.0;
  size_t n_pos = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0) {
      rank_sum_pos += ranks[i];
      ++n_pos;
    }
  }
  const size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw Error(ErrorKind::Contract, "roc_auc: need both classes present");
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

// R^2 = 1 - SS_res / SS_tot; NaN when the targets are constant.
inline double r2_score(const std::vector<double>& y_true, const std::vector<double>& y_pred) {
  if (y_true.size() != y_pred.size())
    throw Error(ErrorKind::Contract, "r2_score: length mismatch");
  if (y_true.size() < 2) throw Error(ErrorKind::Contract, "r2_score: need at least 2 points");
  const double my = mean_of(y_true);
  double ss_res = 0.0, ss_tot = 0.0;
  for (size_t i = 0; i < y_true.size(); ++i) {
    ss_res += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
    ss_tot += (y_true[i] - my) * (y_true[i] - my);
  }
  if (ss_tot == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return 1.0 - ss_res / ss_tot;
}

}  // namespace recurnas
