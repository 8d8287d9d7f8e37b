#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "recurnas/corpus.hpp"
#include "recurnas/trainer.hpp"

using namespace recurnas;

namespace {

// In-memory corpus over an explicit alphabet; repeated-structure text so a
// small model can actually learn it.
Corpus toy_corpus(int vocab, size_t train_len, size_t eval_len, uint64_t seed) {
  Corpus c;
  for (int i = 0; i < vocab; ++i) c.vocab.push_back(static_cast<char>('a' + i));
  Rng rng(seed);
  auto fill = [&](std::vector<int>& out, size_t n) {
    int state = 0;
    for (size_t i = 0; i < n; ++i) {
      // Mostly cyclic with occasional jumps: predictable but not trivial.
      state = rng.bernoulli(0.85) ? (state + 1) % vocab : rng.below_int(vocab);
      out.push_back(state);
    }
  };
  fill(c.train, train_len);
  fill(c.valid, eval_len);
  fill(c.test, eval_len);
  return c;
}

TrainConfig tiny_cfg() {
  TrainConfig cfg;
  cfg.emb_dim = 16;
  cfg.nhid = 16;
  cfg.n_layers = 2;
  cfg.batch_size = 4;
  cfg.bptt_len = 8;
  cfg.epochs = 3;
  cfg.synthetic_time = true;
  return cfg;
}

}  // namespace

TEST_CASE("corpus loads with a shared dense vocabulary", "[trainer]") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "recurnas_corpus_test";
  fs::create_directories(dir);
  std::ofstream(dir / "train.txt") << "abcabcabc";
  std::ofstream(dir / "valid.txt") << "cabd";
  std::ofstream(dir / "test.txt") << "dddc";

  Corpus c = load_corpus(dir);
  CHECK(c.vocab == "abcd");
  CHECK(c.vocab_size() == 4);
  CHECK(c.train == std::vector<int>{0, 1, 2, 0, 1, 2, 0, 1, 2});
  CHECK(c.valid == std::vector<int>{2, 0, 1, 3});
  CHECK(c.test == std::vector<int>{3, 3, 3, 2});
  CHECK(&c.split("valid") == &c.valid);
  CHECK_THROWS_AS(c.split("dev"), Error);
  CHECK_THROWS_AS(load_corpus(dir / "missing"), Error);
}

TEST_CASE("batchify forms contiguous rows and drops the tail", "[trainer]") {
  std::vector<int> ids = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  auto rows = batchify(ids, 3);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == std::vector<int>{0, 1, 2});
  CHECK(rows[1] == std::vector<int>{3, 4, 5});
  CHECK(rows[2] == std::vector<int>{6, 7, 8});
  CHECK_THROWS_AS(batchify(ids, 0), Error);
}

TEST_CASE("parameter count matches the closed form", "[trainer]") {
  TrainConfig cfg = tiny_cfg();
  const int V = 11, E = cfg.emb_dim, H = cfg.nhid;
  Rng rng(1);

  // LSTM: 4 two-branch linear nodes per layer.
  Model lstm = compile(build_lstm(), cfg, V, rng);
  long long expect = static_cast<long long>(V) * E;  // embedding
  expect += 4LL * (E * H + H * H + H);               // layer 0
  expect += 4LL * (H * H + H * H + H);               // layer 1
  expect += static_cast<long long>(V) * H + V;       // untied decoder
  CHECK(lstm.num_params() == expect);

  // GRU: three two-branch linear nodes, one of them fed by a computation node.
  Model gru = compile(build_gru(), cfg, V, rng);
  long long gexpect = static_cast<long long>(V) * E;
  gexpect += 2LL * (E * H + H * H + H) + (E * H + H * H + H);
  gexpect += 3LL * (H * H + H * H + H);
  gexpect += static_cast<long long>(V) * H + V;
  CHECK(gru.num_params() == gexpect);

  TrainConfig tied = cfg;
  tied.tie_weights = true;
  Model tied_model = compile(build_lstm(), tied, V, rng);
  CHECK(tied_model.num_params() == expect - static_cast<long long>(V) * H);

  tied.emb_dim = cfg.nhid + 1;
  CHECK_THROWS_AS(compile(build_lstm(), tied, V, rng), Error);
}

TEST_CASE("model keeps one state per declared hidden slot", "[trainer]") {
  TrainConfig cfg = tiny_cfg();
  Rng rng(2);
  CHECK(compile(build_rnn(), cfg, 8, rng).n_slots == 1);
  CHECK(compile(build_lstm(), cfg, 8, rng).n_slots == 2);
  CHECK(compile(build_gru(), cfg, 8, rng).n_slots == 1);
}

TEST_CASE("zero dropout gives all-ones masks", "[trainer]") {
  Rng rng(3);
  Tensor ones = detail::locked_mask(rng, 5, 7, 0.0);
  for (double v : ones.data) CHECK(v == 1.0);

  Tensor half = detail::locked_mask(rng, 40, 40, 0.5);
  double sum = 0.0;
  for (double v : half.data) {
    CHECK((v == 0.0 || v == 2.0));
    sum += v;
  }
  CHECK(sum / half.numel() == Catch::Approx(1.0).margin(0.15));
}

TEST_CASE("untrained model scores exactly the uniform baseline", "[trainer]") {
  // Decoder starts at zero, so logits are uniform regardless of the cell.
  Corpus c = toy_corpus(10, 400, 120, 7);
  TrainConfig cfg = tiny_cfg();
  Rng rng(mix_seed(cfg.seed, "init"));
  Model model = compile(build_gru(), cfg, c.vocab_size(), rng);

  double lp = log_ppl(model, c.test);
  CHECK(lp == Catch::Approx(std::log(10.0)).epsilon(1e-12));
  CHECK(std::exp(lp) == Catch::Approx(10.0).epsilon(1e-9));

  // Evaluation is dropout-free and repeatable.
  CHECK(log_ppl(model, c.valid) == log_ppl(model, c.valid));
}

TEST_CASE("log perplexity matches a direct sum-of-logs oracle", "[trainer]") {
  // Single-layer RNN evaluated by hand: h' = tanh(x W_x + h W_h + b),
  // logits = h' W_dec^T + b_dec, summing -log softmax over every prediction.
  Corpus c = toy_corpus(6, 50, 50, 9);
  TrainConfig cfg = tiny_cfg();
  cfg.n_layers = 1;
  cfg.batch_size = 2;
  cfg.bptt_len = 7;  // ragged final segment
  Rng rng(4);
  Model model = compile(build_rnn(), cfg, c.vocab_size(), rng);
  // Make the forward nontrivial.
  for (double& v : model.params[model.dec_w_param].data) v = rng.uniform(-0.5, 0.5);

  const Tensor& emb = model.params[model.emb_param];
  const Tensor& wx = model.params[1];
  const Tensor& wh = model.params[2];
  const Tensor& b = model.params[3];
  const Tensor& dw = model.params[model.dec_w_param];
  const Tensor& db = model.params[model.dec_b_param];
  const int H = cfg.nhid, E = cfg.emb_dim, V = c.vocab_size();

  auto rows = batchify(c.test, cfg.batch_size);
  const size_t L = rows[0].size();
  double total = 0.0;
  size_t count = 0;
  for (const auto& row : rows) {
    std::vector<double> h(H, 0.0);
    for (size_t t = 0; t + 1 < L; ++t) {
      std::vector<double> hn(H, 0.0);
      for (int j = 0; j < H; ++j) {
        double acc = b.data[j];
        for (int e = 0; e < E; ++e) acc += emb.at(row[t], e) * wx.at(e, j);
        for (int k = 0; k < H; ++k) acc += h[k] * wh.at(k, j);
        hn[j] = std::tanh(acc);
      }
      h = hn;
      double z = 0.0;
      std::vector<double> logits(V);
      for (int v = 0; v < V; ++v) {
        double acc = db.data[v];
        for (int j = 0; j < H; ++j) acc += h[j] * dw.at(v, j);
        logits[v] = acc;
      }
      for (int v = 0; v < V; ++v) z += std::exp(logits[v]);
      total += std::log(z) - logits[row[t + 1]];
      count++;
    }
  }
  // The oracle resets state per row; the trainer carries state across
  // segments within a row, so both walk each row start-to-end identically.
  CHECK(log_ppl(model, c.test) == Catch::Approx(total / count).epsilon(1e-9));
}

TEST_CASE("training reduces validation perplexity and is deterministic", "[trainer]") {
  Corpus c = toy_corpus(8, 2000, 400, 11);
  TrainConfig cfg = tiny_cfg();
  cfg.epochs = 5;
  cfg.lr = 1.0;

  TrainRecord a = train(build_lstm(), c, cfg);
  REQUIRE(a.status == "OK");
  REQUIRE(a.epochs.size() == 5);
  for (size_t i = 0; i < a.epochs.size(); ++i) CHECK(a.epochs[i].epoch == static_cast<int>(i + 1));
  CHECK(a.epochs.back().val_log_ppl < a.epochs.front().val_log_ppl);

  TrainRecord b = train(build_lstm(), c, cfg);
  REQUIRE(b.epochs.size() == a.epochs.size());
  for (size_t i = 0; i < a.epochs.size(); ++i) {
    CHECK(a.epochs[i].val_log_ppl == b.epochs[i].val_log_ppl);
    CHECK(a.epochs[i].train_log_ppl == b.epochs[i].train_log_ppl);
    CHECK(a.epochs[i].test_log_ppl == b.epochs[i].test_log_ppl);
    CHECK(a.epochs[i].wall_time_s == b.epochs[i].wall_time_s);
  }

  TrainConfig other = cfg;
  other.seed = 99;
  TrainRecord d = train(build_lstm(), c, other);
  REQUIRE(d.status == "OK");
  CHECK(d.epochs[0].val_log_ppl != a.epochs[0].val_log_ppl);
}

TEST_CASE("unstable linear recurrence diverges", "[trainer]") {
  // h' = W2 (W1 h + b1) + W2x x + b2 with W2 W1 = 2.25 I: spectral radius
  // 2.25, no activation anywhere on the loop.
  CellSpec spec;
  spec.nodes.push_back({"x", Op::Input, -1, {}});
  spec.nodes.push_back({"h", Op::Hidden, 0, {}});
  spec.nodes.push_back({"pre", Op::Linear, -1, {"h"}});
  spec.nodes.push_back({"next", Op::Linear, -1, {"x", "pre"}});
  spec.new_hidden[0] = "next";
  REQUIRE(validate(spec).ok);

  Corpus c = toy_corpus(8, 2000, 400, 13);
  TrainConfig cfg = tiny_cfg();
  cfg.epochs = 4;
  Rng rng(mix_seed(cfg.seed, canonical_hash(spec)));
  Model model = compile(spec, cfg, c.vocab_size(), rng);
  // params: emb, W1(pre), b1, W2x, W2(pre->next), b2, dec...
  for (int p = 1; p < static_cast<int>(model.params.size()); ++p) {
    Tensor& t = model.params[p];
    if (t.rows() == cfg.nhid && t.cols() == cfg.nhid) {
      std::fill(t.data.begin(), t.data.end(), 0.0);
      for (int i = 0; i < cfg.nhid; ++i) t.at(i, i) = 1.5;
    }
  }
  TrainRecord rec = train_model(model, c, rng);
  CHECK(rec.status == "DIVERGED");
  CHECK(rec.fail_epoch >= 1);
  CHECK(rec.epochs.size() == static_cast<size_t>(rec.fail_epoch - 1));
}

TEST_CASE("too-small corpora are rejected", "[trainer]") {
  Corpus c = toy_corpus(6, 20, 30, 15);  // 20/4 = 5 < bptt+1
  TrainConfig cfg = tiny_cfg();
  CHECK_THROWS_AS(train(build_rnn(), c, cfg), Error);
}
