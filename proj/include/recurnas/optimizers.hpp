#pragma once

// Search algorithms over a benchmark table, driven exclusively through Env
// so charging and no-peeking rules hold for every method. Proposal steps in
// the adaptive methods rank unevaluated table members (the population is
// closed); evolution maps off-table mutation children to the
// feature-nearest unevaluated member. A run is a pure function of (table,
// parameters, seed). Every method starts a new evaluation only while the
// charged budget can still cover it, so charged time never exceeds the
// budget.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <deque>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "recurnas/env.hpp"
#include "recurnas/error.hpp"
#include "recurnas/features.hpp"
#include "recurnas/forest.hpp"
#include "recurnas/generator.hpp"
#include "recurnas/rng.hpp"

namespace recurnas {

// Surrogate target for evaluations that produced no metrics at all
// (divergence inside epoch 1); far above any realistic log perplexity here.
inline constexpr double kDivergedTarget = 20.0;

struct Evaluation {
  std::string arch_hash;
  int epochs_requested = 0;
  int epochs_completed = 0;
  double val = std::numeric_limits<double>::infinity();
  double test = std::numeric_limits<double>::infinity();
  std::string status;
};

struct OptimizerRun {
  std::string method;
  double budget_s = 0.0;
  uint64_t seed = 0;
  RegretTrace trace;      // canonical (non-increasing)
  RegretTrace trace_raw;  // every incumbent change
  std::vector<Evaluation> evaluations;
  double charged_s = 0.0;
  double final_regret = std::numeric_limits<double>::infinity();
  int fallback_count = 0;  // evolution: uniform draws after failed mutations
  std::vector<std::string> warnings;
};

namespace detail {

inline const Evaluation& run_evaluate(Env& env, OptimizerRun& run, const std::string& hash,
                                      int epochs) {
  const EnvTrainResult r = env.train_arch(hash, epochs);
  Evaluation ev;
  ev.arch_hash = hash;
  ev.epochs_requested = epochs;
  ev.epochs_completed = static_cast<int>(r.epochs.size());
  ev.status = r.status;
  if (!r.epochs.empty()) {
    ev.val = r.epochs.back().val_log_ppl;
    ev.test = r.epochs.back().test_log_ppl;
  }
  run.evaluations.push_back(std::move(ev));
  return run.evaluations.back();
}

inline bool affordable(Env& env, const std::string& hash, int epochs, double budget_s) {
  return env.simulated_time_s() + env.cost_s(hash, epochs) <= budget_s;
}

inline void finish_run(Env& env, OptimizerRun& run, double budget_s) {
  run.budget_s = budget_s;
  run.trace = env.regret_trace();
  run.trace_raw = env.regret_trace_raw();
  run.charged_s = env.simulated_time_s();
  if (!run.trace.points.empty()) run.final_regret = run.trace.points.back().regret;
}

inline const std::string& pick_nth(const std::set<std::string>& s, size_t idx) {
  auto it = s.begin();
  std::advance(it, static_cast<long>(idx));
  return *it;
}

inline const std::string& pick_uniform(const std::set<std::string>& s, Rng& rng) {
  return pick_nth(s, static_cast<size_t>(rng.below(s.size())));
}

inline std::map<std::string, std::vector<double>> table_features(const BenchTable& table,
                                                                 int dim) {
  std::map<std::string, std::vector<double>> feats;
  for (const auto& [hash, e] : table.entries()) feats.emplace(hash, wl_features(e.spec, dim));
  return feats;
}

inline double surrogate_target(const Evaluation& ev) {
  return ev.epochs_completed > 0 ? ev.val : kDivergedTarget;
}

}  // namespace detail

// Uniform sampling without replacement, each pick trained to
// fidelity_epochs (clipped to the horizon). Stops at the first pick the
// remaining budget cannot cover, or when the table is exhausted.
inline OptimizerRun random_search(Env& env, int fidelity_epochs, double budget_s, Rng& rng) {
  if (env.table().size() == 0) throw Error(ErrorKind::Contract, "table is empty");
  OptimizerRun run;
  run.method = "rs" + std::to_string(fidelity_epochs);
  const int fid = std::min(fidelity_epochs, env.table().horizon());
  std::vector<std::string> order = env.table().hashes();
  rng.shuffle(order);
  for (const auto& hash : order) {
    if (!detail::affordable(env, hash, fid, budget_s)) break;
    detail::run_evaluate(env, run, hash, fid);
  }
  if (run.evaluations.empty()) run.warnings.push_back("budget below one evaluation");
  detail::finish_run(env, run, budget_s);
  return run;
}

struct HbBracket {
  int s = 0;
  int n = 0;                       // configs entering the bracket
  std::vector<int> rung_epochs;    // fidelity per rung, last = R
  std::vector<int> rung_counts;    // configs per rung under the survivor rule
};

// Successive-halving schedule: bracket s starts n = ceil((s_max+1)/(s+1) *
// eta^s) configs at floor(R / eta^s) epochs; each rung keeps
// max(1, floor(n/eta)) and multiplies the fidelity by eta (capped at R).
inline std::vector<HbBracket> hyperband_schedule(int R, double eta) {
  if (R < 1) throw Error(ErrorKind::Config, "horizon must be at least 1");
  if (eta < 2.0) throw Error(ErrorKind::Config, "eta must be at least 2");
  int s_max = 0;
  double p = 1.0;
  while (p * eta <= static_cast<double>(R) + 1e-9) {
    p *= eta;
    ++s_max;
  }
  std::vector<HbBracket> brackets;
  for (int s = s_max; s >= 0; --s) {
    HbBracket b;
    b.s = s;
    double eta_s = 1.0;
    for (int i = 0; i < s; ++i) eta_s *= eta;
    b.n = static_cast<int>(
        std::ceil(static_cast<double>(s_max + 1) / static_cast<double>(s + 1) * eta_s - 1e-9));
    int count = b.n;
    for (int i = 0; i <= s; ++i) {
      double denom = 1.0;
      for (int k = 0; k < s - i; ++k) denom *= eta;
      b.rung_epochs.push_back(std::max(1, static_cast<int>(std::floor(R / denom + 1e-9))));
      b.rung_counts.push_back(count);
      count = std::max(1, static_cast<int>(std::floor(count / eta + 1e-9)));
    }
    brackets.push_back(std::move(b));
  }
  return brackets;
}

// Brackets loop from s_max down to 0 and repeat until the budget is spent.
// Promotion is by validation at the rung fidelity; env frontiers make rung
// extensions pay only for new epochs.
inline OptimizerRun hyperband(Env& env, double budget_s, double eta, Rng& rng) {
  if (env.table().size() == 0) throw Error(ErrorKind::Contract, "table is empty");
  OptimizerRun run;
  run.method = "hb";
  const int R = env.table().horizon();
  if (static_cast<double>(R) < eta) {
    run = random_search(env, R, budget_s, rng);
    run.method = "hb";
    run.warnings.push_back("horizon below eta; ran full-fidelity random search");
    return run;
  }
  const auto schedule = hyperband_schedule(R, eta);
  const std::vector<std::string> all = env.table().hashes();

  struct Member {
    std::string hash;
    double val = std::numeric_limits<double>::infinity();
  };
  for (;;) {
    const double time_before_pass = env.simulated_time_s();
    for (const auto& bracket : schedule) {
      const int n = std::min<int>(bracket.n, static_cast<int>(all.size()));
      std::vector<Member> members;
      for (int idx : rng.sample_distinct(static_cast<int>(all.size()), n))
        members.push_back({all[static_cast<size_t>(idx)], 0.0});
      for (size_t i = 0; i < bracket.rung_epochs.size(); ++i) {
        const int epochs = bracket.rung_epochs[i];
        for (auto& m : members) {
          if (!detail::affordable(env, m.hash, epochs, budget_s)) {
            detail::finish_run(env, run, budget_s);
            return run;
          }
          m.val = detail::run_evaluate(env, run, m.hash, epochs).val;
        }
        if (i + 1 < bracket.rung_epochs.size()) {
          std::sort(members.begin(), members.end(), [](const Member& a, const Member& b) {
            if (a.val != b.val) return a.val < b.val;
            return a.hash < b.hash;
          });
          members.resize(static_cast<size_t>(
              std::max(1, static_cast<int>(std::floor(members.size() / eta + 1e-9)))));
        }
      }
    }
    // a pass that charged nothing means every touched pair was already paid
    // for; further passes cannot make progress
    if (env.simulated_time_s() == time_before_pass) break;
  }
  detail::finish_run(env, run, budget_s);
  return run;
}

struct ReParams {
  int pop_size = 20;
  int sample_size = 5;
  int feat_dim = 10;
};

// Aging evolution at full fidelity: sample, mutate the sample's best,
// evaluate, append, drop the oldest. Children the table does not hold (or
// holds but this run already evaluated) map to the feature-nearest
// unevaluated member; a mutation that fails to change its parent falls back
// to a uniform unevaluated draw and is counted.
inline OptimizerRun regularized_evolution(Env& env, double budget_s, const ReParams& p,
                                          Rng& rng) {
  if (p.sample_size < 1 || p.pop_size < p.sample_size)
    throw Error(ErrorKind::Config, "population size must be at least the sample size");
  if (env.table().size() == 0) throw Error(ErrorKind::Contract, "table is empty");
  OptimizerRun run;
  run.method = "re";
  const int fid = env.table().horizon();
  const auto feats = detail::table_features(env.table(), p.feat_dim);

  std::set<std::string> unevaluated;
  for (const auto& [hash, e] : env.table().entries()) unevaluated.insert(hash);

  struct Member {
    std::string hash;
    double val = std::numeric_limits<double>::infinity();
  };
  std::deque<Member> pop;

  while (static_cast<int>(pop.size()) < p.pop_size && !unevaluated.empty()) {
    const std::string hash = detail::pick_uniform(unevaluated, rng);
    if (!detail::affordable(env, hash, fid, budget_s)) {
      detail::finish_run(env, run, budget_s);
      return run;
    }
    const Evaluation& ev = detail::run_evaluate(env, run, hash, fid);
    pop.push_back({hash, ev.val});
    unevaluated.erase(hash);
  }

  while (!unevaluated.empty()) {
    const auto picks = rng.sample_distinct(static_cast<int>(pop.size()), p.sample_size);
    const Member* parent = nullptr;
    for (int i : picks) {
      const Member& m = pop[static_cast<size_t>(i)];
      if (!parent || m.val < parent->val || (m.val == parent->val && m.hash < parent->hash))
        parent = &m;
    }

    std::string target;
    const MutationResult mr = mutate(env.table().entry(parent->hash).spec, rng);
    if (!mr.changed) {
      target = detail::pick_uniform(unevaluated, rng);
      ++run.fallback_count;
    } else {
      const std::string child_hash = canonical_hash(mr.spec);
      if (unevaluated.count(child_hash)) {
        target = child_hash;
      } else {
        const auto child_vec = wl_features(mr.spec, p.feat_dim);
        double best = std::numeric_limits<double>::infinity();
        for (const auto& hash : unevaluated) {
          const double d = l2_distance(child_vec, feats.at(hash));
          if (d < best || (d == best && hash < target)) {
            best = d;
            target = hash;
          }
        }
      }
    }

    if (!detail::affordable(env, target, fid, budget_s)) break;
    const Evaluation& ev = detail::run_evaluate(env, run, target, fid);
    pop.push_back({target, ev.val});
    unevaluated.erase(target);
    if (static_cast<int>(pop.size()) > p.pop_size) pop.pop_front();
  }
  detail::finish_run(env, run, budget_s);
  return run;
}

struct BoParams {
  int feat_dim = 10;
  int init_points = 5;
  double kappa = 1.0;
  ForestParams forest;
};

// Tree-ensemble surrogate with a lower-confidence-bound acquisition:
// mu - kappa * sigma over unevaluated members, sigma from ensemble
// disagreement. Random picks until init_points evaluations exist.
inline OptimizerRun bayes_opt(Env& env, double budget_s, const BoParams& p, Rng& rng) {
  if (env.table().size() == 0) throw Error(ErrorKind::Contract, "table is empty");
  OptimizerRun run;
  run.method = "bo" + std::to_string(p.feat_dim);
  const int fid = env.table().horizon();
  const auto feats = detail::table_features(env.table(), p.feat_dim);

  std::set<std::string> unevaluated;
  for (const auto& [hash, e] : env.table().entries()) unevaluated.insert(hash);
  std::vector<std::vector<double>> X;
  std::vector<double> y;

  while (!unevaluated.empty()) {
    std::string pick;
    if (static_cast<int>(X.size()) < p.init_points) {
      pick = detail::pick_uniform(unevaluated, rng);
    } else {
      Forest forest;
      forest.fit(X, y, rng, p.forest);
      double best_acq = std::numeric_limits<double>::infinity();
      for (const auto& hash : unevaluated) {
        const auto [mu, sigma] = forest.predict(feats.at(hash));
        const double acq = mu - p.kappa * sigma;
        if (acq < best_acq || (acq == best_acq && hash < pick)) {
          best_acq = acq;
          pick = hash;
        }
      }
    }
    if (!detail::affordable(env, pick, fid, budget_s)) break;
    const Evaluation& ev = detail::run_evaluate(env, run, pick, fid);
    X.push_back(feats.at(pick));
    y.push_back(detail::surrogate_target(ev));
    unevaluated.erase(pick);
  }
  detail::finish_run(env, run, budget_s);
  return run;
}

struct TpeParams {
  int feat_dim = 10;
  double gamma = 0.25;
  int pool_size = 24;
  int min_per_set = 2;
};

namespace detail {

// log of a Gaussian KDE with Silverman bandwidth; bandwidths depend only on
// spreads, so scores are invariant to feature translation.
inline double log_kde(double x, const std::vector<double>& data, double h) {
  double max_e = -std::numeric_limits<double>::infinity();
  std::vector<double> es;
  es.reserve(data.size());
  for (double d : data) {
    const double e = -(x - d) * (x - d) / (2.0 * h * h);
    es.push_back(e);
    max_e = std::max(max_e, e);
  }
  if (!std::isfinite(max_e)) return -1e300;  // degenerate bandwidth, bottom out instead of NaN
  double sum = 0.0;
  for (double e : es) sum += std::exp(e - max_e);
  return max_e + std::log(sum) -
         std::log(static_cast<double>(data.size()) * h * std::sqrt(2.0 * std::numbers::pi));
}

inline double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace detail

// Density-ratio method: observations split at the gamma-quantile of
// validation into good/bad sets, scored l(x)/g(x) with per-dimension KDEs
// over a random candidate pool. Too few observations per set means a
// uniform pick.
inline OptimizerRun tpe(Env& env, double budget_s, const TpeParams& p, Rng& rng) {
  if (p.gamma <= 0.0 || p.gamma > 1.0)
    throw Error(ErrorKind::Config, "gamma must lie in (0, 1]");
  if (env.table().size() == 0) throw Error(ErrorKind::Contract, "table is empty");
  OptimizerRun run;
  run.method = "tpe";
  const int fid = env.table().horizon();
  const auto feats = detail::table_features(env.table(), p.feat_dim);

  std::set<std::string> unevaluated;
  for (const auto& [hash, e] : env.table().entries()) unevaluated.insert(hash);

  struct Obs {
    std::string hash;
    double target;
  };
  std::vector<Obs> obs;

  while (!unevaluated.empty()) {
    std::string pick;
    const int n = static_cast<int>(obs.size());
    const int n_good = static_cast<int>(std::floor(p.gamma * n));
    if (n_good < p.min_per_set || n - n_good < p.min_per_set) {
      pick = detail::pick_uniform(unevaluated, rng);
    } else {
      std::vector<Obs> sorted = obs;
      std::sort(sorted.begin(), sorted.end(), [](const Obs& a, const Obs& b) {
        if (a.target != b.target) return a.target < b.target;
        return a.hash < b.hash;
      });
      const int dim = p.feat_dim;
      std::vector<std::vector<double>> good(static_cast<size_t>(dim)),
          bad(static_cast<size_t>(dim));
      for (int i = 0; i < n; ++i) {
        const auto& vec = feats.at(sorted[static_cast<size_t>(i)].hash);
        for (int d = 0; d < dim; ++d)
          (i < n_good ? good : bad)[static_cast<size_t>(d)].push_back(
              vec[static_cast<size_t>(d)]);
      }

      std::vector<double> h_good(static_cast<size_t>(dim)), h_bad(static_cast<size_t>(dim)),
          pooled(static_cast<size_t>(dim));
      for (int d = 0; d < dim; ++d) {
        std::vector<double> all = good[static_cast<size_t>(d)];
        all.insert(all.end(), bad[static_cast<size_t>(d)].begin(),
                   bad[static_cast<size_t>(d)].end());
        pooled[static_cast<size_t>(d)] = detail::sample_std(all);
        const double floor_h = 1e-3 * pooled[static_cast<size_t>(d)];
        h_good[static_cast<size_t>(d)] =
            std::max(1.06 * detail::sample_std(good[static_cast<size_t>(d)]) *
                         std::pow(static_cast<double>(n_good), -0.2),
                     floor_h);
        h_bad[static_cast<size_t>(d)] =
            std::max(1.06 * detail::sample_std(bad[static_cast<size_t>(d)]) *
                         std::pow(static_cast<double>(n - n_good), -0.2),
                     floor_h);
      }

      const int pool_n = std::min<int>(p.pool_size, static_cast<int>(unevaluated.size()));
      std::vector<std::string> pool;
      for (int idx : rng.sample_distinct(static_cast<int>(unevaluated.size()), pool_n))
        pool.push_back(detail::pick_nth(unevaluated, static_cast<size_t>(idx)));

      double best_score = -std::numeric_limits<double>::infinity();
      for (const auto& hash : pool) {
        const auto& vec = feats.at(hash);
        double score = 0.0;
        for (int d = 0; d < dim; ++d) {
          if (pooled[static_cast<size_t>(d)] < 1e-12) continue;  // constant dim carries no signal
          score += detail::log_kde(vec[static_cast<size_t>(d)], good[static_cast<size_t>(d)],
                                   h_good[static_cast<size_t>(d)]) -
                   detail::log_kde(vec[static_cast<size_t>(d)], bad[static_cast<size_t>(d)],
                                   h_bad[static_cast<size_t>(d)]);
        }
        if (score > best_score) {  // ties keep the earlier (randomly ordered) candidate
          best_score = score;
          pick = hash;
        }
      }
    }
    if (!detail::affordable(env, pick, fid, budget_s)) break;
    const Evaluation& ev = detail::run_evaluate(env, run, pick, fid);
    obs.push_back({pick, detail::surrogate_target(ev)});
    unevaluated.erase(pick);
  }
  detail::finish_run(env, run, budget_s);
  return run;
}

inline const std::vector<std::string>& all_methods() {
  static const std::vector<std::string> methods = {"rs10", "rs50", "hb",  "re",
                                                   "bo10", "bo50", "tpe"};
  return methods;
}

// One trial: fresh session and generator derived from (method, seed).
inline OptimizerRun run_method(const BenchTable& table, const std::string& method,
                               double budget_s, uint64_t seed) {
  Env env(table, mix_seed(seed, "env:" + method));
  Rng rng(mix_seed(seed, "opt:" + method));
  OptimizerRun run;
  if (method == "rs10") {
    run = random_search(env, 10, budget_s, rng);
  } else if (method == "rs50") {
    run = random_search(env, table.horizon(), budget_s, rng);
  } else if (method == "hb") {
    run = hyperband(env, budget_s, 3.0, rng);
  } else if (method == "re") {
    run = regularized_evolution(env, budget_s, ReParams{}, rng);
  } else if (method == "bo10" || method == "bo50") {
    BoParams p;
    p.feat_dim = method == "bo10" ? 10 : 50;
    run = bayes_opt(env, budget_s, p, rng);
  } else if (method == "tpe") {
    run = tpe(env, budget_s, TpeParams{}, rng);
  } else {
    throw Error(ErrorKind::Config, "unknown method '" + method + "'");
  }
  run.method = method;
  run.seed = seed;
  return run;
}

// Step-function value of a canonical trace at time t: the last point at or
// before t, the first point's value before that (a run's earliest
// incumbent back-fills the origin), infinity for an empty trace.
inline double trace_value_at(const RegretTrace& trace, double t) {
  if (trace.points.empty()) return std::numeric_limits<double>::infinity();
  double v = trace.points.front().regret;
  for (const auto& p : trace.points) {
    if (p.time_s > t) break;
    v = p.regret;
  }
  return v;
}

struct CompareResult {
  std::vector<std::string> methods;
  double budget_s = 0.0;
  int trials = 0;
  std::vector<double> grid;                                    // shared time axis
  std::map<std::string, std::vector<double>> mean_regret;      // per method, per grid point
  std::map<std::string, std::vector<double>> stderr_regret;    // sample stderr over trials
  std::map<std::string, std::vector<double>> final_regrets;    // per trial
  std::map<std::string, double> fraction_zero;                 // trials finishing at regret 0
  std::map<std::string, std::vector<OptimizerRun>> runs;
};

inline CompareResult compare(const BenchTable& table, const std::vector<std::string>& methods,
                             double budget_s, int trials, uint64_t seed0, int jobs = 1) {
  if (trials < 1) throw Error(ErrorKind::Config, "need at least one trial");
  if (methods.empty()) throw Error(ErrorKind::Config, "need at least one method");
  if (jobs < 1) jobs = 1;

  CompareResult result;
  result.methods = methods;
  result.budget_s = budget_s;
  result.trials = trials;

  struct Task {
    std::string method;
    int trial;
  };
  std::vector<Task> tasks;
  for (const auto& m : methods)
    for (int t = 0; t < trials; ++t) tasks.push_back({m, t});
  std::vector<OptimizerRun> outs(tasks.size());

  std::atomic<size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        const uint64_t seed = mix_seed(seed0, "trial:" + std::to_string(tasks[i].trial));
        outs[i] = run_method(table, tasks[i].method, budget_s, seed);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  if (jobs == 1 || tasks.size() <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const int n_workers = std::min<int>(jobs, static_cast<int>(tasks.size()));
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  for (size_t i = 0; i < tasks.size(); ++i)
    result.runs[tasks[i].method].push_back(std::move(outs[i]));

  const int grid_n = 200;
  for (int i = 0; i <= grid_n; ++i)
    result.grid.push_back(budget_s * static_cast<double>(i) / grid_n);

  for (const auto& m : methods) {
    const auto& runs = result.runs.at(m);
    auto& means = result.mean_regret[m];
    auto& errs = result.stderr_regret[m];
    for (double t : result.grid) {
      double sum = 0.0, sq = 0.0;
      for (const auto& run : runs) {
        const double v = trace_value_at(run.trace, t);
        sum += v;
        sq += v * v;
      }
      const double n = static_cast<double>(runs.size());
      const double mean = sum / n;
      means.push_back(mean);
      errs.push_back(n < 2.0 ? 0.0
                             : std::sqrt(std::max(0.0, (sq - n * mean * mean) / (n - 1.0)) / n));
    }
    int zeros = 0;
    for (const auto& run : runs) {
      result.final_regrets[m].push_back(run.final_regret);
      if (run.final_regret <= 1e-12) ++zeros;
    }
    result.fraction_zero[m] = static_cast<double>(zeros) / static_cast<double>(trials);
  }
  return result;
}

inline void write_mean_regret_csv(const CompareResult& result, std::ostream& out) {
  out << "time_s,method,mean,stderr\n";
  out.precision(17);
  for (size_t i = 0; i < result.grid.size(); ++i)
    for (const auto& m : result.methods)
      out << result.grid[i] << "," << m << "," << result.mean_regret.at(m)[i] << ","
          << result.stderr_regret.at(m)[i] << "\n";
}

inline void write_final_regret_cdf_csv(const CompareResult& result, std::ostream& out) {
  out << "method,final_regret,cdf\n";
  out.precision(17);
  for (const auto& m : result.methods) {
    std::vector<double> finals = result.final_regrets.at(m);
    std::sort(finals.begin(), finals.end());
    for (size_t i = 0; i < finals.size(); ++i)
      out << m << "," << finals[i] << ","
          << static_cast<double>(i + 1) / static_cast<double>(finals.size()) << "\n";
  }
}

}  // namespace recurnas
