#pragma once

// Tabular benchmark: training records for a cell population, keyed by
// canonical hash and training seed. Persistence is a single JSON-lines
// file: line 1 holds metadata (corpus fingerprint, training config,
// creation seeds), every further line one self-contained (architecture,
// seed) record. Lines are append-only, so builds resume by skipping pairs
// the file already holds.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"
#include "recurnas/cell.hpp"
#include "recurnas/corpus.hpp"
#include "recurnas/error.hpp"
#include "recurnas/trainer.hpp"

namespace recurnas {

using Json = nlohmann::json;

// cfg.seed is a per-record property, not part of the profile.
inline void to_json(Json& j, const TrainConfig& cfg) {
  j = Json{{"emb_dim", cfg.emb_dim},     {"nhid", cfg.nhid},
           {"n_layers", cfg.n_layers},   {"batch_size", cfg.batch_size},
           {"bptt_len", cfg.bptt_len},   {"epochs", cfg.epochs},
           {"lr", cfg.lr},               {"grad_clip", cfg.grad_clip},
           {"dropout", cfg.dropout},     {"dropouth", cfg.dropouth},
           {"dropouti", cfg.dropouti},   {"dropoute", cfg.dropoute},
           {"wdrop", cfg.wdrop},         {"tie_weights", cfg.tie_weights},
           {"synthetic_time", cfg.synthetic_time}};
}

inline void from_json(const Json& j, TrainConfig& cfg) {
  j.at("emb_dim").get_to(cfg.emb_dim);
  j.at("nhid").get_to(cfg.nhid);
  j.at("n_layers").get_to(cfg.n_layers);
  j.at("batch_size").get_to(cfg.batch_size);
  j.at("bptt_len").get_to(cfg.bptt_len);
  j.at("epochs").get_to(cfg.epochs);
  j.at("lr").get_to(cfg.lr);
  j.at("grad_clip").get_to(cfg.grad_clip);
  j.at("dropout").get_to(cfg.dropout);
  j.at("dropouth").get_to(cfg.dropouth);
  j.at("dropouti").get_to(cfg.dropouti);
  j.at("dropoute").get_to(cfg.dropoute);
  j.at("wdrop").get_to(cfg.wdrop);
  j.at("tie_weights").get_to(cfg.tie_weights);
  j.at("synthetic_time").get_to(cfg.synthetic_time);
  cfg.seed = 0;
}

inline void to_json(Json& j, const EpochMetrics& m) {
  j = Json::array({m.epoch, m.wall_time_s, m.train_log_ppl, m.val_log_ppl, m.test_log_ppl});
}

inline void from_json(const Json& j, EpochMetrics& m) {
  j.at(0).get_to(m.epoch);
  j.at(1).get_to(m.wall_time_s);
  j.at(2).get_to(m.train_log_ppl);
  j.at(3).get_to(m.val_log_ppl);
  j.at(4).get_to(m.test_log_ppl);
}

inline void to_json(Json& j, const TrainRecord& r) {
  j = Json{{"hash", r.arch_hash},
           {"seed", r.seed},
           {"status", r.status},
           {"num_params", r.num_params},
           {"epochs", r.epochs},
           {"fail_epoch", r.fail_epoch},
           {"fail_wall_time_s", r.fail_wall_time_s}};
}

inline void from_json(const Json& j, TrainRecord& r) {
  j.at("hash").get_to(r.arch_hash);
  j.at("seed").get_to(r.seed);
  j.at("status").get_to(r.status);
  j.at("num_params").get_to(r.num_params);
  j.at("epochs").get_to(r.epochs);
  j.at("fail_epoch").get_to(r.fail_epoch);
  j.at("fail_wall_time_s").get_to(r.fail_wall_time_s);
}

inline std::string corpus_fingerprint(const Corpus& corpus) {
  uint64_t h = fnv1a64(corpus.vocab);
  for (const auto* split : {&corpus.train, &corpus.valid, &corpus.test}) {
    const auto* bytes = reinterpret_cast<const char*>(split->data());
    h = fnv1a64(std::string_view(bytes, split->size() * sizeof(int)), h);
  }
  return to_hex(h);
}

struct TableMeta {
  std::string corpus_id;
  TrainConfig cfg;              // cfg.seed is always 0 here
  std::vector<uint64_t> seeds;  // ascending; reflects stored records after load
};

struct TableEntry {
  CellSpec spec;
  std::map<uint64_t, TrainRecord> records;
};

class BenchTable {
 public:
  TableMeta meta;
  std::vector<std::string> build_errors;  // per-record failures, build continues past them

  bool contains(const std::string& hash) const { return entries_.count(hash) > 0; }

  const std::map<std::string, TableEntry>& entries() const { return entries_; }

  size_t size() const { return entries_.size(); }

  std::vector<std::string> hashes() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [hash, entry] : entries_) out.push_back(hash);
    return out;
  }

  const TableEntry& entry(const std::string& hash) const {
    auto it = entries_.find(hash);
    if (it == entries_.end())
      throw Error(ErrorKind::NotFound, "architecture " + hash + " not in table");
    return it->second;
  }

  const TrainRecord& record(const std::string& hash, uint64_t seed) const {
    const TableEntry& e = entry(hash);
    auto it = e.records.find(seed);
    if (it == e.records.end())
      throw Error(ErrorKind::NotFound,
                  "architecture " + hash + " has no record for seed " + std::to_string(seed));
    return it->second;
  }

  bool has_record(const std::string& hash, uint64_t seed) const {
    auto it = entries_.find(hash);
    return it != entries_.end() && it->second.records.count(seed) > 0;
  }

  // Completed epochs for (hash, seed); 0 when training failed immediately.
  int completed_epochs(const std::string& hash, uint64_t seed) const {
    return static_cast<int>(record(hash, seed).epochs.size());
  }

  const EpochMetrics& query(const std::string& hash, int epoch, uint64_t seed) const {
    const TrainRecord& rec = record(hash, seed);
    if (epoch < 1)
      throw Error(ErrorKind::NotFound, "epoch " + std::to_string(epoch) + ": epochs start at 1");
    if (epoch > static_cast<int>(rec.epochs.size()))
      throw Error(ErrorKind::Frontier,
                  "epoch " + std::to_string(epoch) + " beyond frontier for " + hash + " seed " +
                      std::to_string(seed) + " (max available epoch " +
                      std::to_string(rec.epochs.size()) + ")");
    return rec.epochs[static_cast<size_t>(epoch - 1)];
  }

  int horizon() const { return meta.cfg.epochs; }

  // Benchmark optimum: minimum test log perplexity over every stored epoch
  // of every record, so any incumbent's regret is non-negative.
  double l_star() const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [hash, e] : entries_)
      for (const auto& [seed, rec] : e.records)
        for (const auto& m : rec.epochs) best = std::min(best, m.test_log_ppl);
    if (!std::isfinite(best))
      throw Error(ErrorKind::Contract, "table has no completed epochs");
    return best;
  }

  void insert(const CellSpec& spec, const TrainRecord& rec) {
    const std::string hash = canonical_hash(spec);
    if (hash != rec.arch_hash)
      throw Error(ErrorKind::Contract,
                  "record hash " + rec.arch_hash + " does not match spec hash " + hash);
    auto [it, created] = entries_.try_emplace(hash);
    if (created)
      it->second.spec = spec;
    if (!it->second.records.emplace(rec.seed, rec).second)
      throw Error(ErrorKind::Contract,
                  "duplicate record for " + hash + " seed " + std::to_string(rec.seed));
    if (std::find(meta.seeds.begin(), meta.seeds.end(), rec.seed) == meta.seeds.end()) {
      meta.seeds.push_back(rec.seed);
      std::sort(meta.seeds.begin(), meta.seeds.end());
    }
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << meta_line() << "\n";
    for (const auto& [hash, e] : entries_)
      for (const auto& [seed, rec] : e.records) out << record_line(e.spec, rec) << "\n";
    if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
  }

  static BenchTable load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
    BenchTable table;
    std::string line;
    int line_no = 0;
    bool have_meta = false;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      Json j;
      try {
        j = Json::parse(line);
      } catch (const std::exception& e) {
        throw Error(ErrorKind::Parse,
                    "line " + std::to_string(line_no) + ": " + std::string(e.what()));
      }
      try {
        if (!have_meta) {
          if (j.value("format", "") != std::string(kFormatTag))
            throw Error(ErrorKind::Parse, "not a benchmark table (missing format tag)");
          table.meta.corpus_id = j.at("corpus").get<std::string>();
          table.meta.cfg = j.at("config").get<TrainConfig>();
          table.meta.seeds = j.at("seeds").get<std::vector<uint64_t>>();
          have_meta = true;
          continue;
        }
        TrainRecord rec = j.get<TrainRecord>();
        CellSpec spec = deserialize(j.at("spec").get<std::string>());
        table.insert(spec, rec);  // re-checks the hash invariant
      } catch (const Error& e) {
        throw Error(e.kind(), "line " + std::to_string(line_no) + ": " + std::string(e.what()));
      } catch (const std::exception& e) {
        throw Error(ErrorKind::Parse,
                    "line " + std::to_string(line_no) + ": " + std::string(e.what()));
      }
    }
    if (!have_meta) throw Error(ErrorKind::Parse, "empty table file " + path.string());
    return table;
  }

  std::string meta_line() const {
    Json j{{"format", kFormatTag},
           {"version", 1},
           {"corpus", meta.corpus_id},
           {"config", meta.cfg},
           {"seeds", meta.seeds}};
    return j.dump();
  }

  static std::string record_line(const CellSpec& spec, const TrainRecord& rec) {
    Json j = rec;
    j["spec"] = serialize(spec);
    return j.dump();
  }

 private:
  static constexpr const char* kFormatTag = "recur-nas-table";
  std::map<std::string, TableEntry> entries_;
};

using BuildProgress = std::function<void(const TrainRecord&)>;

// Trains every (spec, seed) pair the table at `out` does not already hold.
// Workers train in parallel; one mutex serializes table inserts and the
// appended lines. Per-record failures go to build_errors, not exceptions.
inline BenchTable build_table(const std::vector<CellSpec>& population, const Corpus& corpus,
                              TrainConfig cfg, std::vector<uint64_t> seeds,
                              const std::filesystem::path& out, int jobs = 1,
                              const BuildProgress& progress = {}) {
  cfg.check();
  cfg.seed = 0;
  if (seeds.empty()) throw Error(ErrorKind::Config, "need at least one training seed");
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
  if (jobs < 1) jobs = 1;

  const std::string corpus_id = corpus_fingerprint(corpus);
  BenchTable table;
  const bool existing = std::filesystem::exists(out);
  if (existing) {
    table = BenchTable::load(out);
    if (table.meta.corpus_id != corpus_id)
      throw Error(ErrorKind::Config, "existing table was built on a different corpus");
    if (!(table.meta.cfg == cfg))
      throw Error(ErrorKind::Config, "existing table was built with a different training config");
    for (uint64_t s : seeds)
      if (std::find(table.meta.seeds.begin(), table.meta.seeds.end(), s) ==
          table.meta.seeds.end())
        table.meta.seeds.push_back(s);
    std::sort(table.meta.seeds.begin(), table.meta.seeds.end());
  } else {
    table.meta = TableMeta{corpus_id, cfg, seeds};
  }

  struct Task {
    const CellSpec* spec;
    std::string hash;
    uint64_t seed;
  };
  std::map<std::string, const CellSpec*> by_hash;
  for (const auto& spec : population) by_hash.try_emplace(canonical_hash(spec), &spec);
  std::vector<Task> tasks;
  for (const auto& [hash, spec] : by_hash)
    for (uint64_t seed : seeds)
      if (!table.has_record(hash, seed)) tasks.push_back({spec, hash, seed});

  std::ofstream appender;
  if (!out.empty()) {
    appender.open(out, existing ? std::ios::app : std::ios::out);
    if (!appender) throw Error(ErrorKind::Io, "cannot open " + out.string() + " for append");
    if (!existing) appender << table.meta_line() << "\n" << std::flush;
  }

  std::atomic<size_t> next{0};
  std::mutex write_mu;
  auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const Task& t = tasks[i];
      try {
        TrainConfig run_cfg = cfg;
        run_cfg.seed = t.seed;
        const TrainRecord rec = train(*t.spec, corpus, run_cfg);
        std::lock_guard<std::mutex> lock(write_mu);
        table.insert(*t.spec, rec);
        if (appender.is_open()) {
          appender << BenchTable::record_line(*t.spec, rec) << "\n" << std::flush;
          if (!appender)
            table.build_errors.push_back("write failed for " + t.hash + " seed " +
                                         std::to_string(t.seed));
        }
        if (progress) progress(rec);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(write_mu);
        table.build_errors.push_back("training " + t.hash + " seed " + std::to_string(t.seed) +
                                     " failed: " + e.what());
      }
    }
  };

  if (jobs == 1 || tasks.size() <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const int n_workers = std::min<int>(jobs, static_cast<int>(tasks.size()));
    pool.reserve(static_cast<size_t>(n_workers));
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return table;
}

}  // namespace recurnas
