#pragma once

// Analysis over built tables and trained models: held-out classification of
// flawed (diverged) architectures, log-perplexity regression, rank
// correlation between orderings, and intrinsic embedding evaluation against
// judged similarity pairs.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "recurnas/bench_table.hpp"
#include "recurnas/error.hpp"
#include "recurnas/forest.hpp"
#include "recurnas/rng.hpp"
#include "recurnas/stats.hpp"
#include "recurnas/tensor.hpp"

namespace recurnas {

namespace detail {

// Stratified 50/50 split: each class is shuffled and halved separately so
// both halves hold both classes whenever the input does.
inline void split_half_stratified(const std::vector<int>& labels, Rng& rng,
                                  std::vector<int>& train_idx, std::vector<int>& test_idx) {
  std::vector<int> pos, neg;
  for (size_t i = 0; i < labels.size(); ++i)
    (labels[i] != 0 ? pos : neg).push_back(static_cast<int>(i));
  for (auto* group : {&pos, &neg}) {
    rng.shuffle(*group);
    const size_t half = group->size() / 2;
    for (size_t i = 0; i < group->size(); ++i)
      (i < half ? train_idx : test_idx).push_back((*group)[i]);
  }
}

}  // namespace detail

struct ClassificationResult {
  double auc = 0.0;
  int n_train = 0, n_test = 0;
  int n_pos = 0, n_neg = 0;
};

// Tree-ensemble scores on a held-out half, summarized as ROC AUC.
// labels: 1 = flawed (diverged), 0 = trained fine.
inline ClassificationResult classify_flawed(const std::vector<std::vector<double>>& X,
                                            const std::vector<int>& labels, Rng& rng,
                                            const ForestParams& fp = {}) {
  if (X.size() != labels.size())
    throw Error(ErrorKind::Contract, "classify_flawed: features and labels must align");
  ClassificationResult res;
  for (int l : labels) (l != 0 ? res.n_pos : res.n_neg) += 1;
  if (res.n_pos == 0 || res.n_neg == 0)
    throw Error(ErrorKind::Contract, "classify_flawed: need both classes present");

  std::vector<int> train_idx, test_idx;
  detail::split_half_stratified(labels, rng, train_idx, test_idx);
  res.n_train = static_cast<int>(train_idx.size());
  res.n_test = static_cast<int>(test_idx.size());

  std::vector<std::vector<double>> x_train;
  std::vector<double> y_train;
  for (int i : train_idx) {
    x_train.push_back(X[static_cast<size_t>(i)]);
    y_train.push_back(static_cast<double>(labels[static_cast<size_t>(i)]));
  }
  Forest forest;
  forest.fit(x_train, y_train, rng, fp);

  std::vector<double> scores;
  std::vector<int> truth;
  for (int i : test_idx) {
    scores.push_back(forest.predict(X[static_cast<size_t>(i)]).first);
    truth.push_back(labels[static_cast<size_t>(i)]);
  }
  res.auc = roc_auc(scores, truth);
  return res;
}

struct RegressionResult {
  double r2 = 0.0;
  int n_train = 0, n_test = 0;
};

// Held-out R^2 of the tree ensemble on (features -> target), optionally
// restricted to targets at or below a threshold.
inline RegressionResult regress_logppl(const std::vector<std::vector<double>>& X,
                                       const std::vector<double>& y, Rng& rng,
                                       double threshold = std::numeric_limits<double>::infinity(),
                                       const ForestParams& fp = {}) {
  if (X.size() != y.size())
    throw Error(ErrorKind::Contract, "regress_logppl: features and targets must align");
  std::vector<int> keep;
  for (size_t i = 0; i < y.size(); ++i)
    if (y[i] <= threshold) keep.push_back(static_cast<int>(i));
  if (keep.size() < 4)
    throw Error(ErrorKind::Contract, "regress_logppl: need at least 4 samples under threshold");

  rng.shuffle(keep);
  const size_t half = keep.size() / 2;
  std::vector<std::vector<double>> x_train;
  std::vector<double> y_train;
  std::vector<int> test_idx;
  for (size_t i = 0; i < keep.size(); ++i) {
    if (i < half) {
      x_train.push_back(X[static_cast<size_t>(keep[i])]);
      y_train.push_back(y[static_cast<size_t>(keep[i])]);
    } else {
      test_idx.push_back(keep[i]);
    }
  }
  Forest forest;
  forest.fit(x_train, y_train, rng, fp);

  std::vector<double> y_true, y_pred;
  for (int i : test_idx) {
    y_true.push_back(y[static_cast<size_t>(i)]);
    y_pred.push_back(forest.predict(X[static_cast<size_t>(i)]).first);
  }
  RegressionResult res;
  res.n_train = static_cast<int>(x_train.size());
  res.n_test = static_cast<int>(test_idx.size());
  res.r2 = r2_score(y_true, y_pred);
  return res;
}

namespace detail {

// Mean validation log perplexity at a fixed epoch, averaged over the seeds
// that reached it; architectures with no seed reaching the epoch are absent.
inline std::map<std::string, double> val_at_epoch(const BenchTable& table, int epoch) {
  std::map<std::string, double> out;
  for (const auto& [hash, e] : table.entries()) {
    double sum = 0.0;
    int n = 0;
    for (const auto& [seed, rec] : e.records) {
      if (static_cast<int>(rec.epochs.size()) < epoch) continue;
      sum += rec.epochs[static_cast<size_t>(epoch - 1)].val_log_ppl;
      ++n;
    }
    if (n > 0) out.emplace(hash, sum / n);
  }
  return out;
}

// Mean validation log perplexity at each record's last completed epoch.
inline std::map<std::string, double> final_val(const BenchTable& table) {
  std::map<std::string, double> out;
  for (const auto& [hash, e] : table.entries()) {
    double sum = 0.0;
    int n = 0;
    for (const auto& [seed, rec] : e.records) {
      if (rec.epochs.empty()) continue;
      sum += rec.epochs.back().val_log_ppl;
      ++n;
    }
    if (n > 0) out.emplace(hash, sum / n);
  }
  return out;
}

inline double spearman_over_common(const std::map<std::string, double>& a,
                                   const std::map<std::string, double>& b) {
  std::vector<double> va, vb;
  for (const auto& [hash, value] : a) {
    auto it = b.find(hash);
    if (it == b.end()) continue;
    va.push_back(value);
    vb.push_back(it->second);
  }
  if (va.size() < 3)
    throw Error(ErrorKind::Contract, "rank correlation needs at least 3 shared architectures");
  return spearman(va, vb);
}

}  // namespace detail

// Spearman rho between validation rankings at an early epoch and at the
// final epoch of the same table.
inline double rank_correlation_epochs(const BenchTable& table, int early_epoch) {
  return detail::spearman_over_common(detail::val_at_epoch(table, early_epoch),
                                      detail::final_val(table));
}

// Spearman rho between the final-epoch rankings of two tables over their
// shared architectures.
inline double rank_correlation_tables(const BenchTable& a, const BenchTable& b) {
  return detail::spearman_over_common(detail::final_val(a), detail::final_val(b));
}

struct WordsimPair {
  std::string w1, w2;
  double score = 0.0;
};

// TSV rows `word1<TAB>word2<TAB>score`; blank lines and lines starting with
// '#' are skipped.
inline std::vector<WordsimPair> load_wordsim_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  std::vector<WordsimPair> pairs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    WordsimPair p;
    std::string score;
    if (!std::getline(ss, p.w1, '\t') || !std::getline(ss, p.w2, '\t') ||
        !std::getline(ss, score))
      throw Error(ErrorKind::Parse,
                  "line " + std::to_string(line_no) + ": expected word1<TAB>word2<TAB>score");
    try {
      size_t used = 0;
      p.score = std::stod(score, &used);
      if (used != score.size()) throw std::invalid_argument(score);
    } catch (const std::exception&) {
      throw Error(ErrorKind::Parse,
                  "line " + std::to_string(line_no) + ": score '" + score + "' is not a number");
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

struct WordsimResult {
  double spearman = std::numeric_limits<double>::quiet_NaN();
  double pearson = std::numeric_limits<double>::quiet_NaN();
  double coverage = 0.0;  // in-vocabulary fraction of pairs
  int n_pairs = 0;
  int n_used = 0;
  bool defined = false;  // false: too few pairs in vocabulary, or constant cosines
};

// Cosine similarity of embedding rows against judged scores. The model is
// character-level, so a token is in vocabulary only as a single character;
// files with out-of-vocabulary words lower coverage rather than erroring.
inline WordsimResult wordsim_eval(const Tensor& embedding, const std::string& vocab,
                                  const std::vector<WordsimPair>& pairs) {
  if (embedding.rows() != static_cast<int>(vocab.size()))
    throw Error(ErrorKind::Contract, "embedding rows must match vocabulary size");
  WordsimResult res;
  res.n_pairs = static_cast<int>(pairs.size());

  auto row_index = [&](const std::string& w) -> int {
    if (w.size() != 1) return -1;
    const auto pos = vocab.find(w[0]);
    return pos == std::string::npos ? -1 : static_cast<int>(pos);
  };
  auto cosine = [&](int a, int b) -> double {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int c = 0; c < embedding.cols(); ++c) {
      const double x = embedding.at(a, c), y = embedding.at(b, c);
      dot += x * y;
      na += x * x;
      nb += y * y;
    }
    if (na == 0.0 || nb == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return dot / std::sqrt(na * nb);
  };

  std::vector<double> cosines, judged;
  int in_vocab = 0;
  for (const auto& p : pairs) {
    const int a = row_index(p.w1), b = row_index(p.w2);
    if (a < 0 || b < 0) continue;
    ++in_vocab;
    const double c = cosine(a, b);
    if (!std::isfinite(c)) continue;
    cosines.push_back(c);
    judged.push_back(p.score);
  }
  res.coverage = pairs.empty() ? 0.0
                               : static_cast<double>(in_vocab) / static_cast<double>(pairs.size());
  res.n_used = static_cast<int>(cosines.size());
  if (res.n_used < 2) return res;

  const double sp = spearman(cosines, judged);
  const double pe = pearson(cosines, judged);
  if (std::isnan(sp) || std::isnan(pe)) return res;  // constant cosines or judgments
  res.spearman = sp;
  res.pearson = pe;
  res.defined = true;
  return res;
}

}  // namespace recurnas
