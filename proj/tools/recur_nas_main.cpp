// recur-nas: one executable for the whole workbench. Subcommands cover the
// pipeline (generate, train, build-table, run-nas, report) and the analytics
// one-offs (ged, embed, wordsim, rankcorr). Data goes to files or stdout,
// diagnostics to stderr. Exit codes: 0 success, 1 domain error, 2 usage.
//
// Option precedence: command-line flags > environment (RECUR_NAS_SEED) >
// --config file (key=value lines) > built-in defaults.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

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
#include "recurnas/trainer.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::json;
using namespace recurnas;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string iso8601_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

CellSpec load_spec_file(const fs::path& path) { return deserialize(read_file(path)); }

// every .json in the directory, sorted by filename for a stable order
std::vector<fs::path> spec_files_in(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json" &&
        entry.path().filename().string().find(".manifest.") == std::string::npos)
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  return files;
}

// One manifest per invocation, a sibling of the primary output: X becomes
// X.manifest.json (trailing slashes stripped so directory outputs get a
// sibling too, never a file inside the artifact).
struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  Json config = Json::object();
  std::vector<uint64_t> seeds;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string started;
};

fs::path manifest_path_for(const fs::path& artifact) {
  std::string s = artifact.lexically_normal().string();
  while (s.size() > 1 && s.back() == fs::path::preferred_separator) s.pop_back();
  return fs::path(s + ".manifest.json");
}

void write_manifest(const fs::path& artifact, const Manifest& m) {
  Json j{{"tool", "recur-nas"},   {"version", kVersion},   {"command", m.command},
         {"argv", m.argv},        {"config", m.config},    {"seeds", m.seeds},
         {"inputs", m.inputs},    {"outputs", m.outputs},  {"started", m.started},
         {"finished", iso8601_now()}};
  const fs::path path = manifest_path_for(artifact);
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

void add_train_flags(CLI::App* cmd, TrainConfig& cfg) {
  cmd->add_option("--emb-dim", cfg.emb_dim, "embedding width");
  cmd->add_option("--nhid", cfg.nhid, "hidden width");
  cmd->add_option("--layers", cfg.n_layers, "stacked recurrent layers");
  cmd->add_option("--batch-size", cfg.batch_size, "sequences per batch");
  cmd->add_option("--bptt", cfg.bptt_len, "truncated backprop length");
  cmd->add_option("--epochs", cfg.epochs, "training epochs");
  cmd->add_option("--lr", cfg.lr, "SGD learning rate");
  cmd->add_option("--grad-clip", cfg.grad_clip, "global gradient norm cap");
  cmd->add_option("--dropout", cfg.dropout, "output dropout");
  cmd->add_option("--dropouth", cfg.dropouth, "between-layer dropout");
  cmd->add_option("--dropouti", cfg.dropouti, "input dropout");
  cmd->add_option("--dropoute", cfg.dropoute, "embedding-row dropout");
  cmd->add_option("--wdrop", cfg.wdrop, "DropConnect on recurrent weights");
  cmd->add_flag("--tie-weights,!--no-tie-weights", cfg.tie_weights,
                "share embedding and decoder weights");
  cmd->add_flag("--synthetic-time,!--real-time", cfg.synthetic_time,
                "deterministic wall-clock model instead of measured time");
}

Json train_config_json(const TrainConfig& cfg) {
  Json j;
  to_json(j, cfg);
  return j;
}

Json trace_json(const RegretTrace& trace) {
  Json arr = Json::array();
  for (const auto& p : trace.points) arr.push_back(Json::array({p.time_s, p.regret}));
  return arr;
}

RegretTrace trace_from_json(const Json& arr) {
  RegretTrace t;
  for (const auto& p : arr) t.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return t;
}

std::vector<std::string> parse_methods(const std::string& raw) {
  if (raw == "all") return all_methods();
  std::vector<std::string> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  const auto& known = all_methods();
  for (const auto& m : out)
    if (std::find(known.begin(), known.end(), m) == known.end())
      throw Error(ErrorKind::Config, "unknown method '" + m + "'");
  if (out.empty()) throw Error(ErrorKind::Config, "no methods requested");
  return out;
}

int default_jobs() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

std::string trimmed(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// key=value config file, one option per line, '#' comments. A value applies
// only when neither a flag nor the environment set the option, so precedence
// is flags > environment > config file > defaults. Required path options
// must still come from the command line.
void apply_config_file(CLI::App* cmd) {
  CLI::Option* cfg_opt = cmd->get_option_no_throw("--config");
  if (cfg_opt == nullptr || cfg_opt->count() == 0) return;
  const fs::path path = cfg_opt->as<std::string>();
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open config " + path.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = path.string() + " line " + std::to_string(line_no);
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string l = trimmed(line);
    if (l.empty()) continue;
    if (l.front() == '[')
      throw Error(ErrorKind::Config, where + ": sections are not supported");
    const auto eq = l.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::Config, where + ": expected key=value");
    const std::string key = trimmed(l.substr(0, eq));
    std::string value = trimmed(l.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    if (key.empty()) throw Error(ErrorKind::Config, where + ": empty key");
    CLI::Option* opt = cmd->get_option_no_throw("--" + key);
    if (opt == nullptr || opt == cfg_opt)
      throw Error(ErrorKind::Config,
                  where + ": unknown option '" + key + "' for " + cmd->get_name());
    if (opt->count() > 0) continue;
    try {
      opt->add_result(value);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw Error(ErrorKind::Config, where + ": " + e.what());
    }
  }
}

// ---------------------------------------------------------------------------
// subcommand bodies; domain failures throw Error
// ---------------------------------------------------------------------------

struct GenerateArgs {
  int count = 5;
  uint64_t seed = 0;
  int max_nodes = kMaxNodes;
  int slots = 1;
  fs::path out;
};

void run_generate(const GenerateArgs& a, Manifest m) {
  fs::create_directories(a.out);
  GenParams gp;
  gp.max_nodes = a.max_nodes;
  gp.n_hidden_slots = a.slots;
  gp.seed = a.seed;
  std::set<std::string> seen;
  int written = 0;
  while (written < a.count) {
    const CellSpec spec = generate(gp);
    ++gp.seed;
    const std::string hash = canonical_hash(spec);
    if (!seen.insert(hash).second) continue;
    const fs::path path = a.out / (hash + ".json");
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << serialize(spec) << "\n";
    std::cout << hash << "\n";
    ++written;
  }
  m.config = Json{{"count", a.count}, {"max_nodes", a.max_nodes}, {"slots", a.slots}};
  m.seeds = {a.seed};
  m.outputs = {a.out.string()};
  write_manifest(a.out, m);
}

struct TrainArgs {
  fs::path spec, corpus, out;
  uint64_t seed = 0;
  TrainConfig cfg;
};

void run_train(const TrainArgs& a, Manifest m) {
  const CellSpec spec = load_spec_file(a.spec);
  const Corpus corpus = load_corpus(a.corpus);
  TrainConfig cfg = a.cfg;
  cfg.seed = a.seed;
  const TrainRecord rec = train(spec, corpus, cfg);
  Json j;
  to_json(j, rec);
  if (a.out.empty()) {
    std::cout << j.dump() << "\n";
  } else {
    std::ofstream out(a.out);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + a.out.string());
    out << j.dump() << "\n";
    m.config = train_config_json(cfg);
    m.seeds = {a.seed};
    m.inputs = {a.spec.string(), a.corpus.string()};
    m.outputs = {a.out.string()};
    write_manifest(a.out, m);
  }
}

struct BuildTableArgs {
  fs::path specs, corpus, out;
  std::vector<uint64_t> seeds{0};
  int jobs = default_jobs();
  bool baselines = false;
  TrainConfig cfg;
};

void run_build_table(const BuildTableArgs& a, Manifest m) {
  std::vector<CellSpec> population;
  for (const auto& file : spec_files_in(a.specs)) population.push_back(load_spec_file(file));
  if (a.baselines) {
    population.push_back(build_rnn());
    population.push_back(build_lstm());
    population.push_back(build_gru());
  }
  if (population.empty()) throw Error(ErrorKind::Config, "no architectures in " + a.specs.string());
  const Corpus corpus = load_corpus(a.corpus);

  int done = 0;
  auto progress = [&](const TrainRecord& rec) {
    ++done;
    std::cerr << "[" << done << "] " << rec.arch_hash << " seed " << rec.seed << " " << rec.status
              << "\n";
  };
  const BenchTable table =
      build_table(population, corpus, a.cfg, a.seeds, a.out, a.jobs, progress);

  m.config = train_config_json(a.cfg);
  m.config["jobs"] = a.jobs;
  m.seeds = a.seeds;
  m.inputs = {a.specs.string(), a.corpus.string()};
  m.outputs = {a.out.string()};
  write_manifest(a.out, m);

  if (!table.build_errors.empty()) {
    for (const auto& err : table.build_errors) std::cerr << "build error: " << err << "\n";
    throw Error(ErrorKind::Contract, std::to_string(table.build_errors.size()) +
                                         " architectures failed to train");
  }
  std::cout << "table " << a.out.string() << ": " << table.size() << " architectures, "
            << a.seeds.size() << " seed(s), horizon " << table.horizon() << "\n";
}

struct RunNasArgs {
  fs::path table, out;
  std::string methods = "all";
  double budget = 0.0;
  int trials = 30;
  uint64_t seed0 = 0;
  int jobs = default_jobs();
};

void run_run_nas(const RunNasArgs& a, Manifest m) {
  const std::vector<std::string> methods = parse_methods(a.methods);
  if (a.budget <= 0.0) throw Error(ErrorKind::Config, "budget must be positive");
  const BenchTable table = BenchTable::load(a.table);
  const CompareResult res = compare(table, methods, a.budget, a.trials, a.seed0, a.jobs);

  fs::create_directories(a.out);
  {
    std::ofstream mean(a.out / "mean_regret.csv");
    write_mean_regret_csv(res, mean);
    std::ofstream cdf(a.out / "final_regret_cdf.csv");
    write_final_regret_cdf_csv(res, cdf);
  }
  for (const auto& method : res.methods) {
    std::ofstream runs(a.out / (method + ".runs.jsonl"));
    for (const auto& run : res.runs.at(method)) {
      Json j{{"method", run.method},
             {"seed", run.seed},
             {"budget_s", run.budget_s},
             {"charged_s", run.charged_s},
             {"final_regret", run.final_regret},
             {"n_evaluations", run.evaluations.size()},
             {"fallbacks", run.fallback_count},
             {"warnings", run.warnings},
             {"trace", trace_json(run.trace)},
             {"trace_raw", trace_json(run.trace_raw)}};
      runs << j.dump() << "\n";
    }
  }

  for (const auto& method : res.methods) {
    double mean_final = 0.0;
    for (double r : res.final_regrets.at(method)) mean_final += r;
    mean_final /= static_cast<double>(a.trials);
    std::cout << method << " mean final regret " << mean_final << ", fraction at zero "
              << res.fraction_zero.at(method) << "\n";
  }

  m.config = Json{{"methods", methods}, {"budget_s", a.budget}, {"trials", a.trials},
                  {"jobs", a.jobs}};
  m.seeds = {a.seed0};
  m.inputs = {a.table.string()};
  m.outputs = {a.out.string()};
  write_manifest(a.out, m);
}

struct ReportArgs {
  fs::path runs, out;
};

void run_report(const ReportArgs& a, Manifest m) {
  if (!fs::is_directory(a.runs))
    throw Error(ErrorKind::Io, a.runs.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(a.runs)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > 11 &&
        name.substr(name.size() - 11) == ".runs.jsonl")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw Error(ErrorKind::Io, "no .runs.jsonl files in " + a.runs.string());

  struct Run {
    RegretTrace trace;
    double final_regret = 0.0;
  };
  std::map<std::string, std::vector<Run>> by_method;
  double budget = 0.0;
  for (const auto& file : files) {
    std::ifstream in(file);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      Json j;
      try {
        j = Json::parse(line);
      } catch (const Json::parse_error& e) {
        throw Error(ErrorKind::Parse,
                    file.string() + " line " + std::to_string(line_no) + ": " + e.what());
      }
      Run run;
      run.trace = trace_from_json(j.at("trace"));
      // JSON has no infinity; a starved run's regret serializes as null
      run.final_regret = j.at("final_regret").is_null()
                             ? std::numeric_limits<double>::infinity()
                             : j.at("final_regret").get<double>();
      budget = std::max(budget, j.at("budget_s").get<double>());
      by_method[j.at("method").get<std::string>()].push_back(std::move(run));
    }
  }

  const fs::path out_dir = a.out.empty() ? a.runs : a.out;
  fs::create_directories(out_dir);

  const int grid_n = 201;
  {
    std::ofstream csv(out_dir / "mean_regret.csv");
    csv.precision(17);
    csv << "time_s,method,mean,stderr\n";
    for (const auto& [method, runs] : by_method) {
      const double n = static_cast<double>(runs.size());
      for (int g = 0; g < grid_n; ++g) {
        const double t = budget * static_cast<double>(g) / static_cast<double>(grid_n - 1);
        double mean = 0.0;
        for (const auto& run : runs) mean += trace_value_at(run.trace, t);
        mean /= n;
        double var = 0.0;
        for (const auto& run : runs) {
          const double d = trace_value_at(run.trace, t) - mean;
          var += d * d;
        }
        const double se = runs.size() > 1 && std::isfinite(var)
                              ? std::sqrt(var / (n - 1.0)) / std::sqrt(n)
                              : 0.0;
        csv << t << "," << method << "," << mean << "," << se << "\n";
      }
    }
  }
  {
    std::ofstream csv(out_dir / "final_regret_cdf.csv");
    csv.precision(17);
    csv << "method,final_regret,cdf\n";
    for (const auto& [method, runs] : by_method) {
      std::vector<double> finals;
      for (const auto& run : runs) finals.push_back(run.final_regret);
      std::sort(finals.begin(), finals.end());
      for (size_t i = 0; i < finals.size(); ++i)
        csv << method << "," << finals[i] << ","
            << static_cast<double>(i + 1) / static_cast<double>(finals.size()) << "\n";
    }
  }

  for (const auto& [method, runs] : by_method) {
    double mean_final = 0.0;
    int zero = 0;
    for (const auto& run : runs) {
      mean_final += run.final_regret;
      if (run.final_regret <= 1e-12) ++zero;
    }
    mean_final /= static_cast<double>(runs.size());
    std::cout << method << ": " << runs.size() << " runs, mean final regret " << mean_final
              << ", fraction at zero "
              << static_cast<double>(zero) / static_cast<double>(runs.size()) << "\n";
  }

  m.inputs = {a.runs.string()};
  m.outputs = {out_dir.string()};
  write_manifest(out_dir, m);
}

struct GedArgs {
  fs::path a, b;
};

void run_ged(const GedArgs& args) {
  const CellSpec a = load_spec_file(args.a);
  const CellSpec b = load_spec_file(args.b);
  const GedBound bound = ged_upper_bound(a, b);
  const Json j{{"hash_a", bound.hash_a}, {"hash_b", bound.hash_b},
               {"upper_bound", bound.upper_bound}};
  std::cout << j.dump() << "\n";
}

struct EmbedArgs {
  fs::path specs, out;
  int dim = 50;
};

void run_embed(const EmbedArgs& a, Manifest m) {
  const auto files = spec_files_in(a.specs);
  if (files.empty()) throw Error(ErrorKind::Config, "no architectures in " + a.specs.string());
  std::ostringstream csv;
  csv.precision(17);
  csv << "hash";
  for (int i = 0; i < a.dim; ++i) csv << ",f" << i;
  csv << "\n";
  for (const auto& file : files) {
    const CellSpec spec = load_spec_file(file);
    const auto vec = wl_features(spec, a.dim);
    csv << canonical_hash(spec);
    for (double v : vec) csv << "," << v;
    csv << "\n";
  }
  if (a.out.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream out(a.out);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + a.out.string());
    out << csv.str();
    m.config = Json{{"dim", a.dim}};
    m.inputs = {a.specs.string()};
    m.outputs = {a.out.string()};
    write_manifest(a.out, m);
  }
}

struct WordsimArgs {
  fs::path corpus, pairs, spec, out;
  uint64_t seed = 0;
  TrainConfig cfg;
};

void run_wordsim(const WordsimArgs& a, Manifest m) {
  const Corpus corpus = load_corpus(a.corpus);
  const auto pairs = load_wordsim_tsv(a.pairs);
  const CellSpec spec = a.spec.empty() ? build_lstm() : load_spec_file(a.spec);
  TrainConfig cfg = a.cfg;
  cfg.seed = a.seed;
  cfg.check();
  Rng rng(mix_seed(cfg.seed, canonical_hash(spec)));
  Model model = compile(spec, cfg, corpus.vocab_size(), rng);
  const TrainRecord rec = train_model(model, corpus, rng);
  const WordsimResult res =
      wordsim_eval(model.params[static_cast<size_t>(model.emb_param)], corpus.vocab, pairs);

  const Json j{{"arch_hash", rec.arch_hash}, {"train_status", rec.status},
               {"spearman", res.spearman},   {"pearson", res.pearson},
               {"coverage", res.coverage},   {"n_pairs", res.n_pairs},
               {"n_used", res.n_used},       {"defined", res.defined}};
  if (a.out.empty()) {
    std::cout << j.dump() << "\n";
  } else {
    std::ofstream out(a.out);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + a.out.string());
    out << j.dump() << "\n";
    m.config = train_config_json(cfg);
    m.seeds = {a.seed};
    m.inputs = {a.corpus.string(), a.pairs.string()};
    m.outputs = {a.out.string()};
    write_manifest(a.out, m);
  }
}

struct RankcorrArgs {
  fs::path table, other;
  int early_epoch = 0;
};

void run_rankcorr(const RankcorrArgs& a) {
  const BenchTable table = BenchTable::load(a.table);
  Json j;
  if (!a.other.empty()) {
    const BenchTable other = BenchTable::load(a.other);
    j = Json{{"mode", "tables"}, {"spearman", rank_correlation_tables(table, other)}};
  } else {
    j = Json{{"mode", "epochs"},
             {"early_epoch", a.early_epoch},
             {"spearman", rank_correlation_epochs(table, a.early_epoch)}};
  }
  std::cout << j.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"recurrent-cell architecture search workbench"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* gen_cmd = app.add_subcommand("generate", "sample random architectures into a directory");
  gen_cmd->add_option("--count", gen.count, "architectures to emit")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed, "generator seed")->envname("RECUR_NAS_SEED");
  gen_cmd->add_option("--max-nodes", gen.max_nodes, "node budget per cell");
  gen_cmd->add_option("--slots", gen.slots, "hidden state slots");
  gen_cmd->add_option("--out", gen.out, "output directory")->required();
  gen_cmd->add_option("--config", "key=value option file; flags win over file values");

  TrainArgs tr;
  auto* tr_cmd = app.add_subcommand("train", "train one architecture on a corpus");
  tr_cmd->add_option("--spec", tr.spec, "architecture JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  tr_cmd->add_option("--corpus", tr.corpus, "corpus directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  tr_cmd->add_option("--seed", tr.seed, "training seed")->envname("RECUR_NAS_SEED");
  tr_cmd->add_option("--out", tr.out, "record file (default: stdout)");
  add_train_flags(tr_cmd, tr.cfg);
  tr_cmd->add_option("--config", "key=value option file; flags win over file values");

  BuildTableArgs bt;
  auto* bt_cmd = app.add_subcommand("build-table", "train a population across seeds into a table");
  bt_cmd->add_option("--specs", bt.specs, "directory of architecture JSON files")
      ->required()
      ->check(CLI::ExistingDirectory);
  bt_cmd->add_option("--corpus", bt.corpus, "corpus directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  bt_cmd->add_option("--out", bt.out, "table file; reruns resume it")->required();
  bt_cmd->add_option("--seeds", bt.seeds, "training seeds")->delimiter(',');
  bt_cmd->add_option("--jobs", bt.jobs, "parallel trainers")->check(CLI::PositiveNumber);
  bt_cmd->add_flag("--baselines", bt.baselines, "include the stock rnn, lstm, gru cells");
  add_train_flags(bt_cmd, bt.cfg);
  bt_cmd->add_option("--config", "key=value option file; flags win over file values");

  RunNasArgs rn;
  auto* rn_cmd = app.add_subcommand("run-nas", "run search methods against a table");
  rn_cmd->add_option("--table", rn.table, "benchmark table")->required()->check(CLI::ExistingFile);
  rn_cmd->add_option("--methods", rn.methods, "'all' or comma list (rs10,rs50,hb,re,bo10,bo50,tpe)");
  rn_cmd->add_option("--budget", rn.budget, "simulated seconds per trial")->required();
  rn_cmd->add_option("--trials", rn.trials, "independent trials per method")
      ->check(CLI::PositiveNumber);
  rn_cmd->add_option("--seed0", rn.seed0, "base seed; trial t uses a derived stream")
      ->envname("RECUR_NAS_SEED");
  rn_cmd->add_option("--jobs", rn.jobs, "parallel trials")->check(CLI::PositiveNumber);
  rn_cmd->add_option("--out", rn.out, "output directory")->required();
  rn_cmd->add_option("--config", "key=value option file; flags win over file values");

  ReportArgs rp;
  auto* rp_cmd = app.add_subcommand("report", "re-aggregate saved runs into CSV summaries");
  rp_cmd->add_option("--runs", rp.runs, "directory of .runs.jsonl files")->required();
  rp_cmd->add_option("--out", rp.out, "output directory (default: the runs directory)");

  GedArgs gd;
  auto* gd_cmd = app.add_subcommand("ged", "edit-distance upper bound between two architectures");
  gd_cmd->add_option("a", gd.a, "first architecture JSON")->required()->check(CLI::ExistingFile);
  gd_cmd->add_option("b", gd.b, "second architecture JSON")->required()->check(CLI::ExistingFile);

  EmbedArgs em;
  auto* em_cmd = app.add_subcommand("embed", "structural feature vectors for a population");
  em_cmd->add_option("--specs", em.specs, "directory of architecture JSON files")
      ->required()
      ->check(CLI::ExistingDirectory);
  em_cmd->add_option("--dim", em.dim, "feature dimension")->check(CLI::PositiveNumber);
  em_cmd->add_option("--out", em.out, "CSV file (default: stdout)");

  WordsimArgs ws;
  auto* ws_cmd = app.add_subcommand("wordsim", "train a model, score its embedding on judged pairs");
  ws_cmd->add_option("--corpus", ws.corpus, "corpus directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  ws_cmd->add_option("--pairs", ws.pairs, "TSV of word1<TAB>word2<TAB>score")
      ->required()
      ->check(CLI::ExistingFile);
  ws_cmd->add_option("--spec", ws.spec, "architecture JSON (default: the stock lstm)")
      ->check(CLI::ExistingFile);
  ws_cmd->add_option("--seed", ws.seed, "training seed")->envname("RECUR_NAS_SEED");
  ws_cmd->add_option("--out", ws.out, "result file (default: stdout)");
  add_train_flags(ws_cmd, ws.cfg);
  ws_cmd->add_option("--config", "key=value option file; flags win over file values");

  RankcorrArgs rc;
  auto* rc_cmd = app.add_subcommand("rankcorr", "rank agreement within or across tables");
  rc_cmd->add_option("--table", rc.table, "benchmark table")->required()->check(CLI::ExistingFile);
  auto* rc_epoch = rc_cmd->add_option("--early-epoch", rc.early_epoch,
                                      "correlate this epoch's ranking with the final one");
  auto* rc_other =
      rc_cmd->add_option("--other", rc.other, "second table: correlate final rankings across");
  rc_epoch->excludes(rc_other);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  Manifest m;
  m.argv.assign(argv, argv + argc);
  m.started = iso8601_now();

  try {
    for (CLI::App* sub : app.get_subcommands()) apply_config_file(sub);
    if (gen_cmd->parsed()) {
      m.command = "generate";
      run_generate(gen, std::move(m));
    } else if (tr_cmd->parsed()) {
      m.command = "train";
      run_train(tr, std::move(m));
    } else if (bt_cmd->parsed()) {
      m.command = "build-table";
      run_build_table(bt, std::move(m));
    } else if (rn_cmd->parsed()) {
      m.command = "run-nas";
      run_run_nas(rn, std::move(m));
    } else if (rp_cmd->parsed()) {
      m.command = "report";
      run_report(rp, std::move(m));
    } else if (gd_cmd->parsed()) {
      run_ged(gd);
    } else if (em_cmd->parsed()) {
      m.command = "embed";
      run_embed(em, std::move(m));
    } else if (ws_cmd->parsed()) {
      m.command = "wordsim";
      run_wordsim(ws, std::move(m));
    } else if (rc_cmd->parsed()) {
      run_rankcorr(rc);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
