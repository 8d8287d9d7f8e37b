#pragma once

// Simulation environment over a benchmark table. A session replays stored
// training runs as if live: requesting epochs charges simulated time only
// for epochs beyond the per-architecture frontier already paid for
// (checkpoint continuation), and metrics are observable only once paid for.
// The incumbent is the minimum-validation (architecture, epoch) observed so
// far, with ties broken by earlier epoch then lexicographic hash. The
// canonical regret trace records the min-so-far of incumbent test values,
// so it is non-increasing; the raw trace records every incumbent change.
// Multi-seed entries are pinned to one seed per architecture per session,
// drawn from the session generator on first touch.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "recurnas/bench_table.hpp"
#include "recurnas/error.hpp"
#include "recurnas/rng.hpp"

namespace recurnas {

struct TracePoint {
  double time_s = 0.0;
  double regret = 0.0;
};

struct RegretTrace {
  std::vector<TracePoint> points;  // times non-decreasing
};

inline void write_trace_csv(const RegretTrace& trace, std::ostream& out) {
  out << "time_s,regret\n";
  out.precision(17);
  for (const auto& p : trace.points) out << p.time_s << "," << p.regret << "\n";
}

struct Incumbent {
  std::string arch_hash;
  int epoch = 0;
  double val_log_ppl = std::numeric_limits<double>::infinity();
  double test_log_ppl = std::numeric_limits<double>::infinity();
};

struct EnvTrainResult {
  std::string status;                // "OK", or "DIVERGED" once the request crosses the failure
  std::vector<EpochMetrics> epochs;  // epochs 1..min(requested, completed)
  double charged_s = 0.0;
};

class Env {
 public:
  Env(const BenchTable& table, uint64_t session_seed)
      : table_(&table), rng_(mix_seed(session_seed, "env-session")), l_star_(table.l_star()) {}

  const BenchTable& table() const { return *table_; }
  double l_star() const { return l_star_; }
  double simulated_time_s() const { return time_; }

  int frontier(const std::string& hash) const {
    auto it = frontier_.find(hash);
    return it == frontier_.end() ? 0 : it->second;
  }

  // The session seed for this architecture, pinned on first use.
  uint64_t seed_for(const std::string& hash) {
    auto it = arch_seed_.find(hash);
    if (it != arch_seed_.end()) return it->second;
    const TableEntry& e = table_->entry(hash);
    std::vector<uint64_t> seeds;
    for (const auto& [seed, rec] : e.records) seeds.push_back(seed);
    const uint64_t chosen = seeds[rng_.below(seeds.size())];
    arch_seed_.emplace(hash, chosen);
    return chosen;
  }

  // Time a train_arch(hash, epochs) call would charge right now. Pins the
  // session seed but charges nothing.
  double cost_s(const std::string& hash, int epochs) {
    check_request(hash, epochs);
    return charge_for(hash, seed_for(hash), frontier(hash), epochs);
  }

  EnvTrainResult train_arch(const std::string& hash, int epochs) {
    check_request(hash, epochs);
    const uint64_t seed = seed_for(hash);
    const TrainRecord& rec = table_->record(hash, seed);
    const int prev = frontier(hash);

    EnvTrainResult res;
    res.charged_s = charge_for(hash, seed, prev, epochs);
    time_ += res.charged_s;
    if (epochs > prev) frontier_[hash] = epochs;

    const int completed = static_cast<int>(rec.epochs.size());
    const int reveal_to = std::min(epochs, completed);
    res.epochs.assign(rec.epochs.begin(), rec.epochs.begin() + reveal_to);
    res.status = rec.diverged() && epochs >= rec.fail_epoch ? "DIVERGED" : "OK";

    for (int e = prev + 1; e <= reveal_to; ++e) observe(hash, rec.epochs[static_cast<size_t>(e - 1)]);
    return res;
  }

  // Metrics for epochs already paid for in this session; the table is never
  // consulted past the session frontier even though it holds the data.
  const EpochMetrics& get_metrics(const std::string& hash, int epoch) {
    table_->entry(hash);
    if (epoch > frontier(hash))
      throw Error(ErrorKind::MustTrainFirst,
                  "epoch " + std::to_string(epoch) + " of " + hash +
                      " not trained in this session (frontier " +
                      std::to_string(frontier(hash)) + ")");
    return table_->query(hash, epoch, seed_for(hash));
  }

  const std::optional<Incumbent>& incumbent() const { return inc_; }

  // Test log perplexity at the current incumbent.
  double best_test() const {
    if (!inc_) throw Error(ErrorKind::Contract, "no epochs trained in this session");
    return inc_->test_log_ppl;
  }

  const RegretTrace& regret_trace() const { return trace_; }      // canonical, non-increasing
  const RegretTrace& regret_trace_raw() const { return trace_raw_; }

 private:
  void check_request(const std::string& hash, int epochs) const {
    table_->entry(hash);  // not-found check
    if (epochs < 1) throw Error(ErrorKind::Contract, "must request at least one epoch");
    if (epochs > table_->horizon())
      throw Error(ErrorKind::Frontier, "epoch " + std::to_string(epochs) +
                                           " beyond table horizon " +
                                           std::to_string(table_->horizon()));
  }

  // Newly charged time for extending (hash, seed) from epoch `prev` to
  // `req`: stored per-epoch costs up to completion, plus the partial cost of
  // the failing epoch the first time a request crosses it.
  double charge_for(const std::string& hash, uint64_t seed, int prev, int req) const {
    const TrainRecord& rec = table_->record(hash, seed);
    const int completed = static_cast<int>(rec.epochs.size());
    double charge = 0.0;
    for (int e = prev + 1; e <= std::min(req, completed); ++e)
      charge += rec.epochs[static_cast<size_t>(e - 1)].wall_time_s;
    if (rec.diverged() && prev < rec.fail_epoch && rec.fail_epoch <= req)
      charge += rec.fail_wall_time_s;
    return charge;
  }

  void observe(const std::string& hash, const EpochMetrics& m) {
    const bool better =
        !inc_ || m.val_log_ppl < inc_->val_log_ppl ||
        (m.val_log_ppl == inc_->val_log_ppl &&
         (m.epoch < inc_->epoch || (m.epoch == inc_->epoch && hash < inc_->arch_hash)));
    if (!better) return;
    inc_ = Incumbent{hash, m.epoch, m.val_log_ppl, m.test_log_ppl};
    trace_raw_.points.push_back({time_, m.test_log_ppl - l_star_});
    if (m.test_log_ppl < best_seen_test_) {
      best_seen_test_ = m.test_log_ppl;
      trace_.points.push_back({time_, best_seen_test_ - l_star_});
    }
  }

  const BenchTable* table_;
  Rng rng_;
  double time_ = 0.0;
  std::map<std::string, int> frontier_;
  std::map<std::string, uint64_t> arch_seed_;
  std::optional<Incumbent> inc_;
  double best_seen_test_ = std::numeric_limits<double>::infinity();
  RegretTrace trace_, trace_raw_;
  double l_star_ = 0.0;
};

}  // namespace recurnas
