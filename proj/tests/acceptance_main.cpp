// Acceptance harness: one pass/fail line per criterion, nonzero exit on any
// failure. Builds (or resumes) the benchmark table once and reuses it for
// the criteria that need trained data.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "recurnas/analytics.hpp"
#include "recurnas/bench_table.hpp"
#include "recurnas/cell.hpp"
#include "recurnas/corpus.hpp"
#include "recurnas/env.hpp"
#include "recurnas/error.hpp"
#include "recurnas/features.hpp"
#include "recurnas/ged.hpp"
#include "recurnas/generator.hpp"
#include "recurnas/optimizers.hpp"
#include "recurnas/rng.hpp"
#include "recurnas/stats.hpp"
#include "recurnas/trainer.hpp"
#include "table_fixtures.hpp"

namespace fs = std::filesystem;
using namespace recurnas;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int run_criterion(int n, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out.pass = false;
    out.detail = std::string("exception: ") + e.what();
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ostringstream line;
  line.precision(6);
  line << "criterion " << n << " " << (out.pass ? "PASS" : "FAIL") << ": " << out.detail << " ["
       << secs << " s]";
  std::cout << line.str() << std::endl;
  return out.pass ? 0 : 1;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean_of_vec(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// independent spearman: count-based average ranks, then a two-pass pearson
double rank_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (size_t i = 0; i < v.size(); ++i) {
      size_t less = 0, equal = 0;
      for (size_t j = 0; j < v.size(); ++j) {
        if (v[j] < v[i]) ++less;
        if (v[j] == v[i]) ++equal;
      }
      r[i] = static_cast<double>(less) + (static_cast<double>(equal) + 1.0) / 2.0;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= static_cast<double>(rx.size());
  my /= static_cast<double>(ry.size());
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

double pearson_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  long double mx = 0.0L, my = 0.0L;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<long double>(x.size());
  my /= static_cast<long double>(y.size());
  long double sxy = 0.0L, sxx = 0.0L, syy = 0.0L;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

// exact edit distance by exhausting injective partial node mappings, priced
// identically to the greedy bound
int exact_ged(const CellSpec& a, const CellSpec& b) {
  const int na = static_cast<int>(a.nodes.size());
  const int nb = static_cast<int>(b.nodes.size());
  std::vector<int> map_ab(static_cast<size_t>(na), -1);
  std::vector<bool> used(static_cast<size_t>(nb), false);
  int best = 1 << 30;
  auto rec = [&](auto&& self, int i) -> void {
    if (i == na) {
      best = std::min(best, recurnas::detail::mapping_cost(a, b, map_ab));
      return;
    }
    map_ab[static_cast<size_t>(i)] = -1;
    self(self, i + 1);
    for (int j = 0; j < nb; ++j) {
      if (used[static_cast<size_t>(j)]) continue;
      used[static_cast<size_t>(j)] = true;
      map_ab[static_cast<size_t>(i)] = j;
      self(self, i + 1);
      map_ab[static_cast<size_t>(i)] = -1;
      used[static_cast<size_t>(j)] = false;
    }
  };
  rec(rec, 0);
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  fs::path corpus_dir, table_path;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--corpus")
      corpus_dir = argv[i + 1];
    else if (flag == "--table")
      table_path = argv[i + 1];
  }
  if (corpus_dir.empty() || table_path.empty()) {
    std::cerr << "usage: recurnas_acceptance --corpus <dir> --table <jsonl path>\n";
    return 2;
  }

  Corpus corpus;
  try {
    corpus = load_corpus(corpus_dir);
  } catch (const std::exception& e) {
    std::cerr << "cannot load corpus: " << e.what() << "\n";
    return 2;
  }

  int failures = 0;

  // 1. reverse-mode gradients vs central finite differences
  failures += run_criterion(1, [&]() -> Outcome {
    TrainConfig cfg;
    cfg.emb_dim = 4;
    cfg.nhid = 4;
    cfg.n_layers = 2;
    cfg.batch_size = 2;
    cfg.bptt_len = 3;
    cfg.epochs = 1;
    cfg.synthetic_time = true;
    const int vocab = 5, T = 3;
    const double eps = 1e-5;
    double max_rel = 0.0;
    long checks = 0;

    for (int c = 0; c < 20; ++c) {
      GenParams gp;
      gp.seed = 5000 + static_cast<uint64_t>(c);
      gp.max_nodes = 10;
      gp.n_hidden_slots = 1 + c % 3;
      const CellSpec spec = generate(gp);
      Rng prng(mix_seed(77, canonical_hash(spec)));
      Model model = compile(spec, cfg, vocab, prng);

      Rng data_rng(900 + static_cast<uint64_t>(c));
      for (int input = 0; input < 5; ++input) {
        std::vector<std::vector<int>> streams(2, std::vector<int>(static_cast<size_t>(T + 1)));
        for (auto& row : streams)
          for (int& v : row) v = data_rng.below_int(vocab);
        const auto hidden = recurnas::detail::zero_hidden(model);

        auto loss_of = [&]() {
          Tape tape(false);
          const auto ids = recurnas::detail::register_params(tape, model);
          const auto seg = recurnas::detail::forward_segment(model, tape, ids, streams, 0, T,
                                                             hidden, recurnas::detail::SegMasks{});
          return tape.value(seg.loss).data[0];
        };

        Tape tape(false);
        const auto ids = recurnas::detail::register_params(tape, model);
        const auto seg = recurnas::detail::forward_segment(model, tape, ids, streams, 0, T, hidden,
                                                           recurnas::detail::SegMasks{});
        const auto grads = tape.backward(seg.loss);

        // flat coordinate space over all parameters, 100 sampled probes
        std::vector<std::pair<size_t, size_t>> coords;
        for (size_t p = 0; p < model.params.size(); ++p)
          for (size_t j = 0; j < model.params[p].data.size(); ++j) coords.emplace_back(p, j);
        data_rng.shuffle(coords);
        const size_t probes = std::min<size_t>(100, coords.size());
        for (size_t k = 0; k < probes; ++k) {
          const auto [p, j] = coords[k];
          double& w = model.params[p].data[j];
          const double keep = w;
          w = keep + eps;
          const double up = loss_of();
          w = keep - eps;
          const double dn = loss_of();
          w = keep;
          const double fd = (up - dn) / (2.0 * eps);
          const double ad = grads[p].data[j];
          max_rel = std::max(max_rel,
                             std::abs(ad - fd) / std::max({1.0, std::abs(ad), std::abs(fd)}));
          ++checks;
        }
      }
    }
    std::ostringstream d;
    d << "max rel err " << max_rel << " over " << checks << " probed coordinates";
    return {max_rel < 1e-4, d.str()};
  });

  // 2. generated architectures are universally valid and inside bounds
  failures += run_criterion(2, [&]() -> Outcome {
    int invalid = 0, over_nodes = 0, over_slots = 0, over_fanin = 0;
    for (int i = 0; i < 10000; ++i) {
      GenParams gp;
      gp.seed = 100000 + static_cast<uint64_t>(i);
      gp.n_hidden_slots = 1 + i % 3;
      const CellSpec spec = generate(gp);
      if (!validate(spec).ok) ++invalid;
      if (spec.nodes.size() > 24) ++over_nodes;
      std::set<int> slots;
      for (const auto& node : spec.nodes) {
        if (node.op == Op::Hidden) slots.insert(node.slot);
        if (node.op == Op::Linear && node.inputs.size() > 3) ++over_fanin;
      }
      if (slots.size() > 3) ++over_slots;
    }
    std::ostringstream d;
    d << "10000 generated: " << invalid << " invalid, " << over_nodes << " over 24 nodes, "
      << over_slots << " over 3 hidden slots, " << over_fanin << " linear fan-in over 3";
    return {invalid == 0 && over_nodes == 0 && over_slots == 0 && over_fanin == 0, d.str()};
  });

  // 3. benchmark table: divergence exists but is not the norm
  std::optional<BenchTable> table;
  std::vector<CellSpec> population;
  std::set<std::string> gen_hashes;
  failures += run_criterion(3, [&]() -> Outcome {
    population = fixtures::gen_specs(200, 2000);
    for (const auto& spec : population) gen_hashes.insert(canonical_hash(spec));

    std::vector<CellSpec> all = population;
    all.push_back(build_rnn());
    all.push_back(build_lstm());
    all.push_back(build_gru());

    int done = 0;
    auto progress = [&](const TrainRecord&) {
      if (++done % 25 == 0) std::cerr << "table: " << done << " records trained\n";
    };
    TrainConfig cfg;
    table = build_table(all, corpus, cfg, {0}, table_path, 1, progress);
    if (!table->build_errors.empty())
      return {false, "build error: " + table->build_errors.front()};

    int diverged = 0;
    for (const auto& hash : gen_hashes)
      if (table->record(hash, 0).diverged()) ++diverged;
    const double frac = static_cast<double>(diverged) / 200.0;
    std::ostringstream d;
    d << "diverged fraction " << frac << " (" << diverged << "/200)";
    return {frac > 0.0 && frac < 0.6, d.str()};
  });

  // 4. gated baselines beat the field
  failures += run_criterion(4, [&]() -> Outcome {
    if (!table) return {false, "table unavailable"};
    auto final_test = [&](const CellSpec& spec) {
      const TrainRecord& rec = table->record(canonical_hash(spec), 0);
      if (rec.diverged()) throw Error(ErrorKind::Contract, "baseline diverged");
      return rec.epochs.back().test_log_ppl;
    };
    const double lstm = final_test(build_lstm());
    const double gru = final_test(build_gru());
    const double rnn = final_test(build_rnn());

    std::vector<double> finals;
    for (const auto& hash : gen_hashes) {
      const TrainRecord& rec = table->record(hash, 0);
      if (!rec.diverged() && !rec.epochs.empty()) finals.push_back(rec.epochs.back().test_log_ppl);
    }
    const double med = median_of(finals);
    std::ostringstream d;
    d << "final test log-ppl lstm " << lstm << ", gru " << gru << ", rnn " << rnn
      << ", table median " << med << " over " << finals.size() << " completed";
    return {lstm < med && gru < med && lstm < rnn, d.str()};
  });

  // 5. environment contract on a closed-form table
  failures += run_criterion(5, [&]() -> Outcome {
    BenchTable synth = fixtures::make_table(10, 8, 0.5);
    Env env(synth, 99);
    const auto hashes = synth.hashes();

    bool gated = false;
    try {
      env.get_metrics(hashes[0], 1);
    } catch (const Error& e) {
      gated = e.kind() == ErrorKind::MustTrainFirst;
    }
    if (!gated) return {false, "metrics were readable before training"};

    const double first = env.train_arch(hashes[0], 5).charged_s;
    const double repeat = env.train_arch(hashes[0], 5).charged_s;
    const double extend = env.train_arch(hashes[0], 8).charged_s;
    if (first != 2.5 || repeat != 0.0 || extend != 1.5)
      return {false, "checkpoint charging broke: first " + std::to_string(first) + ", repeat " +
                         std::to_string(repeat) + ", extend " + std::to_string(extend)};

    double last_t = 0.0;
    for (auto it = hashes.rbegin(); it != hashes.rend(); ++it) {
      env.train_arch(*it, 8);
      if (env.simulated_time_s() < last_t) return {false, "simulated time went backwards"};
      last_t = env.simulated_time_s();
    }
    const auto& pts = env.regret_trace().points;
    for (size_t i = 0; i < pts.size(); ++i) {
      if (pts[i].regret < 0.0) return {false, "negative regret"};
      if (i > 0 && pts[i].regret > pts[i - 1].regret) return {false, "regret trace increased"};
    }
    if (pts.back().regret != 0.0 || env.incumbent()->arch_hash != hashes.front())
      return {false, "exhaustion did not reach the optimum exactly"};

    // replay on the real table: extension accounting holds there too
    if (table) {
      Env real(*table, 5);
      const std::string h = *gen_hashes.begin();
      real.train_arch(h, table->horizon());
      if (real.train_arch(h, table->horizon()).charged_s != 0.0)
        return {false, "real-table repeat training charged time"};
    }
    return {true, "checkpoint charging, metric gating, monotone time, regret 0 at optimum"};
  });

  // 6. low fidelity trades depth for breadth at exactly the cost ratio
  failures += run_criterion(6, [&]() -> Outcome {
    BenchTable synth = fixtures::make_table(60, 50, 0.25);
    Env deep_env(synth, 1);
    Rng deep_rng(1);
    const auto deep = random_search(deep_env, 50, 125.0, deep_rng);
    Env shallow_env(synth, 2);
    Rng shallow_rng(2);
    const auto shallow = random_search(shallow_env, 10, 125.0, shallow_rng);
    const double ratio = static_cast<double>(shallow.evaluations.size()) /
                         static_cast<double>(deep.evaluations.size());
    std::ostringstream d;
    d << "rs10 evaluated " << shallow.evaluations.size() << ", rs50 evaluated "
      << deep.evaluations.size() << " (ratio " << ratio << ", charged " << shallow.charged_s
      << " and " << deep.charged_s << " of 125)";
    return {ratio == 5.0 && deep.charged_s == 125.0 && shallow.charged_s == 125.0, d.str()};
  });

  // 7. optimizer comparison: adaptive methods hold their own
  failures += run_criterion(7, [&]() -> Outcome {
    if (!table) return {false, "table unavailable"};
    double total = 0.0;
    {
      Env probe(*table, 7);
      for (const auto& hash : table->hashes()) total += probe.cost_s(hash, table->horizon());
    }
    const double budget = 0.1 * total;
    const auto res = compare(*table, all_methods(), budget, 30, 424242, 1);

    {
      std::ofstream m(table_path.parent_path() / "acceptance_mean_regret.csv");
      write_mean_regret_csv(res, m);
      std::ofstream c(table_path.parent_path() / "acceptance_final_regret_cdf.csv");
      write_final_regret_cdf_csv(res, c);
    }

    for (const auto& method : res.methods) {
      const auto& mean = res.mean_regret.at(method);
      for (size_t i = 1; i < mean.size(); ++i)
        if (mean[i] > mean[i - 1] + 1e-12)
          return {false, "mean regret curve increased for " + method};
    }

    std::map<std::string, double> mean_final;
    for (const auto& method : res.methods)
      mean_final[method] = mean_of_vec(res.final_regrets.at(method));
    std::string best_adaptive;
    for (const std::string method : {"hb", "re", "bo10", "bo50", "tpe"})
      if (best_adaptive.empty() || mean_final[method] < mean_final[best_adaptive])
        best_adaptive = method;

    std::ostringstream d;
    d.precision(4);
    d << "budget " << budget << " s, mean final regret rs50 " << mean_final["rs50"] << ", best adaptive "
      << best_adaptive << " " << mean_final[best_adaptive] << "; fraction at regret 0:";
    for (const auto& method : res.methods)
      d << " " << method << "=" << res.fraction_zero.at(method);
    return {mean_final[best_adaptive] <= mean_final["rs50"], d.str()};
  });

  // 8. the edit-distance bound never undercuts the exact distance
  failures += run_criterion(8, [&]() -> Outcome {
    std::vector<CellSpec> pool;
    uint64_t seed = 42000;
    while (pool.size() < 30) {
      GenParams gp;
      gp.seed = seed++;
      gp.max_nodes = 5;
      pool.push_back(generate(gp));
    }
    Rng rng(8);
    int violations = 0;
    for (int k = 0; k < 100; ++k) {
      const CellSpec& a = pool[rng.below(pool.size())];
      const CellSpec& b = pool[rng.below(pool.size())];
      if (ged_upper_bound_cost(a, b) < exact_ged(a, b)) ++violations;
    }
    int identity_misses = 0;
    for (size_t i = 0; i < 10; ++i)
      if (ged_upper_bound_cost(pool[i], pool[i]) != 0) ++identity_misses;
    std::ostringstream d;
    d << violations << " bound violations over 100 pairs, " << identity_misses
      << " nonzero self-distances";
    return {violations == 0 && identity_misses == 0, d.str()};
  });

  // 9. structural features predict divergence well above chance
  failures += run_criterion(9, [&]() -> Outcome {
    if (!table) return {false, "table unavailable"};
    std::vector<std::vector<double>> X;
    std::vector<int> labels;
    for (const auto& hash : gen_hashes) {
      X.push_back(wl_features(table->entry(hash).spec, 50));
      labels.push_back(table->record(hash, 0).diverged() ? 1 : 0);
    }
    Rng rng(19);
    const auto res = classify_flawed(X, labels, rng);

    double shuffled_sum = 0.0;
    Rng shuffle_rng(37);
    for (int rep = 0; rep < 10; ++rep) {
      std::vector<int> shuffled = labels;
      shuffle_rng.shuffle(shuffled);
      Rng fit_rng(1000 + static_cast<uint64_t>(rep));
      shuffled_sum += classify_flawed(X, shuffled, fit_rng).auc;
    }
    const double shuffled_mean = shuffled_sum / 10.0;
    std::ostringstream d;
    d << "auc " << res.auc << " (" << res.n_pos << " flawed / " << res.n_neg
      << " fine), shuffled-label mean auc " << shuffled_mean;
    return {res.auc > 0.7 && shuffled_mean >= 0.4 && shuffled_mean <= 0.6, d.str()};
  });

  // 10. statistics against independent oracles; uniform model scores exactly V
  failures += run_criterion(10, [&]() -> Outcome {
    Rng rng(10);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const size_t n = 5 + rng.below(20);
      std::vector<double> x(n), y(n);
      for (size_t i = 0; i < n; ++i) {
        x[i] = static_cast<double>(rng.below_int(8));  // quantized: ties occur
        y[i] = static_cast<double>(rng.below_int(8));
      }
      if (x == std::vector<double>(n, x[0]) || y == std::vector<double>(n, y[0])) continue;
      worst = std::max(worst, std::abs(spearman(x, y) - rank_oracle(x, y)));
      worst = std::max(worst, std::abs(pearson(x, y) - pearson_oracle(x, y)));
    }
    if (worst > 1e-9) return {false, "correlation oracle gap " + std::to_string(worst)};

    TrainConfig cfg;
    cfg.emb_dim = 4;
    cfg.nhid = 4;
    cfg.n_layers = 1;
    cfg.batch_size = 2;
    cfg.bptt_len = 4;
    cfg.epochs = 1;
    const int vocab = 7;
    Rng data_rng(11);
    std::vector<int> ids(300);
    for (int& v : ids) v = data_rng.below_int(vocab);

    Rng init_rng(12);
    Model model = compile(build_rnn(), cfg, vocab, init_rng);
    for (auto& p : model.params) std::fill(p.data.begin(), p.data.end(), 0.0);
    const double ppl = std::exp(log_ppl(model, ids));
    const double uniform_rel = std::abs(ppl - vocab) / vocab;

    // constant-logit model: mean nll has a closed form over the target counts
    const int k = 2;
    const double bump = 1.5;
    model.params[static_cast<size_t>(model.dec_b_param)].data[static_cast<size_t>(k)] = bump;
    const auto rows = batchify(ids, cfg.batch_size);
    long hits = 0, total = 0;
    for (const auto& row : rows)
      for (size_t t = 1; t < row.size(); ++t) {
        hits += row[t] == k ? 1 : 0;
        ++total;
      }
    const double frac = static_cast<double>(hits) / static_cast<double>(total);
    const double expected = std::log(static_cast<double>(vocab - 1) + std::exp(bump)) - bump * frac;
    const double biased_rel = std::abs(log_ppl(model, ids) - expected) / expected;

    std::ostringstream d;
    d << "correlation oracle gap " << worst << ", uniform ppl " << ppl << " (rel err "
      << uniform_rel << "), constant-logit rel err " << biased_rel;
    return {uniform_rel < 1e-9 && biased_rel < 1e-9, d.str()};
  });

  std::cout << "acceptance: " << (10 - failures) << "/10 passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
