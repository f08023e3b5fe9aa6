#include "cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "eicl/corpus.hpp"
#include "eicl/decision.hpp"
#include "eicl/error.hpp"
#include "eicl/eval.hpp"
#include "eicl/hash.hpp"
#include "eicl/llmclient.hpp"
#include "eicl/probe.hpp"
#include "eicl/retrieval.hpp"
#include "eicl/synthetic.hpp"
#include "eicl/tensor_file.hpp"

namespace eicl::cli {
namespace {

namespace fs = std::filesystem;

// Bad flag combinations detected after parsing; reported like parse errors.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 7;
  bool verbose = false;
};

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

// <root>/<timestamp>-<config hash> unless an explicit directory was given.
fs::path resolve_run_dir(const std::string& explicit_dir, const std::string& root, const std::string& config_text) {
  fs::path dir = explicit_dir.empty() ? fs::path(root) / (utc_timestamp() + "-" + fnv1a64_hex(config_text))
                                      : fs::path(explicit_dir);
  fs::create_directories(dir);
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << std::setprecision(17);
  return out;
}

std::string fixed4(double v) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(4) << v;
  return ss.str();
}

// ---------------------------------------------------------------------------
// ingest / align / retrieve

struct IngestArgs {
  std::string input;
  std::string split = "train";
  std::vector<std::string> labels;
  std::string output;
};

int do_ingest(const IngestArgs& a, std::ostream& out) {
  std::optional<LabelList> expected;
  if (!a.labels.empty()) expected = a.labels;
  const Corpus c = ingest_jsonl(fs::path(a.input), parse_split(a.split), expected);
  if (!a.output.empty()) write_jsonl(fs::path(a.output), c);
  out << "ingested " << c.size() << " records, " << c.label_set().size() << " labels, d_emo=" << c.d_emo() << '\n';
  return kExitOk;
}

struct AlignArgs {
  std::string input;
  std::string split = "train";
  std::vector<std::string> aux_labels;
  bool no_renormalize = false;
  std::string output;
};

int do_align(const AlignArgs& a, std::ostream& out) {
  const Corpus c = ingest_jsonl(fs::path(a.input), parse_split(a.split));
  const Corpus aligned = align_labels(c, a.aux_labels, AlignOptions{!a.no_renormalize});
  write_jsonl(fs::path(a.output), aligned);
  out << "aligned " << aligned.size() << " of " << c.size() << " records to " << aligned.label_set().size()
      << " shared labels\n";
  return kExitOk;
}

struct RetrieveArgs {
  std::string train;
  std::string test;
  std::size_t k1 = 5;
  std::string field = "emotion";
  std::string output;
};

int do_retrieve(const RetrieveArgs& a, std::ostream& out) {
  if (a.field != "emotion" && a.field != "semantic") throw UsageError("--field must be emotion or semantic");
  const Corpus train = ingest_jsonl(fs::path(a.train), Split::kTrain);
  const Corpus test = ingest_jsonl(fs::path(a.test), Split::kTest);
  const auto field = a.field == "emotion" ? RetrievalField::kEmotion : RetrievalField::kSemantic;
  std::ofstream file;
  std::ostream* sink = &out;
  if (!a.output.empty()) {
    file = open_out(a.output);
    sink = &file;
  }
  for (const auto& q : test.records()) {
    nlohmann::ordered_json j;
    j["query"] = q.id;
    j["neighbors"] = nlohmann::ordered_json::array();
    for (const auto& n : top_k_similar(q, train, a.k1, field)) {
      j["neighbors"].push_back({{"id", n.record_id}, {"score", n.score}, {"rank", n.rank}});
    }
    *sink << j.dump() << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// run / ablate

struct RunArgs {
  std::string mode = "eicl";
  std::string train;
  std::string test;
  std::vector<std::string> labels;
  std::size_t k1 = 5;
  std::size_t k2 = 3;
  std::size_t k3 = 3;
  double alpha = 0.2;
  bool no_eer = false;
  bool no_dsl = false;
  bool no_te = false;
  std::string rule = "normalized";
  std::string provider = "replay";
  std::string transcript;
  std::string record_transcript;
  std::string endpoint;
  std::string model;
  std::string api_key_env = "OPENAI_API_KEY";
  std::optional<double> temperature;
  int max_attempts = 4;
  std::string bank;
  std::string perception;
  double sim_temperature = 0.0;
  double example_gain = 1.0;
  double fit_margin = 0.0;
  std::size_t max_concurrency = 4;
  std::string templates;
  std::string run_dir;
  std::string runs_root = "runs";
  std::vector<std::string> grid;  // ablate only

  CLI::Option* k3_opt = nullptr;
};

void add_run_options(CLI::App& sub, RunArgs& a) {
  sub.add_option("--mode", a.mode, "zshot | icl | eicl")->check(CLI::IsMember({"zshot", "icl", "eicl"}));
  sub.add_option("--train", a.train, "training corpus (JSONL)");
  sub.add_option("--test", a.test, "test corpus (JSONL), required");
  sub.add_option("--labels", a.labels, "label set, comma separated (default: train gold labels)")->delimiter(',');
  sub.add_option("--k1", a.k1, "retrieved examples per query")->check(CLI::PositiveNumber);
  sub.add_option("--k2", a.k2, "predictions kept per soft label")->check(CLI::PositiveNumber);
  a.k3_opt = sub.add_option("--k3", a.k3, "primary candidates (eicl only)")->check(CLI::PositiveNumber);
  sub.add_option("--alpha", a.alpha, "soft-label strength in [0,1]")->check(CLI::Range(0.0, 1.0));
  sub.add_flag("--no-eer", a.no_eer, "retrieve by semantic instead of emotion vectors");
  sub.add_flag("--no-dsl", a.no_dsl, "hard gold labels instead of soft labels");
  sub.add_flag("--no-te", a.no_te, "single candidate list, no exclusion stage");
  sub.add_option("--soft-label-rule", a.rule, "normalized | literal")->check(CLI::IsMember({"normalized", "literal"}));
  sub.add_option("--provider", a.provider, "http | replay | prototype_sim")
      ->check(CLI::IsMember({"http", "replay", "prototype_sim"}));
  sub.add_option("--transcript", a.transcript, "replay transcript (JSONL)");
  sub.add_option("--record-transcript", a.record_transcript, "write every exchange to this transcript");
  sub.add_option("--endpoint", a.endpoint, "chat-completion URL (http)");
  sub.add_option("--model", a.model, "model name (http)");
  sub.add_option("--api-key-env", a.api_key_env, "environment variable holding the API key (http)");
  sub.add_option("--temperature", a.temperature, "sampling temperature (http)");
  sub.add_option("--max-attempts", a.max_attempts, "attempts per request (http)")->check(CLI::PositiveNumber);
  sub.add_option("--bank", a.bank, "prototype bank tensor (prototype_sim)");
  sub.add_option("--perception", a.perception, "per-text readings tensor (prototype_sim)");
  sub.add_option("--sim-temperature", a.sim_temperature, "decision temperature (prototype_sim)")
      ->check(CLI::NonNegativeNumber);
  sub.add_option("--example-gain", a.example_gain, "example influence (prototype_sim)");
  sub.add_option("--fit-margin", a.fit_margin, "secondary-stage margin (prototype_sim)");
  sub.add_option("--max-concurrency", a.max_concurrency, "in-flight requests")->check(CLI::PositiveNumber);
  sub.add_option("--templates", a.templates, "directory with zshot/icl/eicl/eicl_single .txt overrides");
  sub.add_option("--run-dir", a.run_dir, "output directory (default: <runs-root>/<timestamp>-<config hash>)");
  sub.add_option("--runs-root", a.runs_root, "parent of generated run directories");
}

RunConfig make_run_config(const RunArgs& a, const Globals& g) {
  RunConfig cfg;
  cfg.mode = parse_mode(a.mode);
  if (cfg.mode != PromptMode::kEicl) {
    if (a.k3_opt->count() > 0) throw UsageError("k3 only valid for eicl");
    if (a.no_eer || a.no_dsl || a.no_te) throw UsageError("--no-eer/--no-dsl/--no-te only valid for eicl");
  }
  if (a.test.empty()) throw UsageError("--test is required");
  if (cfg.mode != PromptMode::kZeroShot && a.train.empty()) throw UsageError("--train is required for icl and eicl");
  cfg.k1 = a.k1;
  cfg.k2 = a.k2;
  cfg.k3 = a.k3;
  cfg.alpha = a.alpha;
  cfg.no_eer = a.no_eer;
  cfg.no_dsl = a.no_dsl;
  cfg.no_te = a.no_te;
  cfg.soft_label_rule = a.rule == "literal" ? SoftLabelRule::kLiteral : SoftLabelRule::kNormalized;
  cfg.seed = g.seed;
  cfg.train_path = a.train;
  cfg.test_path = a.test;

  ProviderConfig& p = cfg.provider;
  p.kind = parse_provider_kind(a.provider);
  p.max_concurrency = a.max_concurrency;
  p.retry.max_attempts = a.max_attempts;
  switch (p.kind) {
    case ProviderKind::kHttp:
      if (a.endpoint.empty() || a.model.empty()) throw UsageError("http provider needs --endpoint and --model");
      p.http.endpoint = a.endpoint;
      p.http.model = a.model;
      p.http.api_key_env = a.api_key_env;
      p.http.temperature = a.temperature;
      break;
    case ProviderKind::kReplay:
      if (a.transcript.empty()) throw UsageError("replay provider needs --transcript");
      p.transcript_path = a.transcript;
      break;
    case ProviderKind::kPrototypeSim:
      if (a.bank.empty() || a.perception.empty()) throw UsageError("prototype_sim provider needs --bank and --perception");
      p.sim.bank_path = a.bank;
      p.sim.perception_path = a.perception;
      p.sim.temperature = a.sim_temperature;
      p.sim.example_gain = a.example_gain;
      p.sim.fit_margin = a.fit_margin;
      break;
  }
  return cfg;
}

struct LoadedCorpora {
  Corpus train;
  Corpus test;
};

LoadedCorpora load_corpora(const RunArgs& a) {
  std::optional<LabelList> labels;
  if (!a.labels.empty()) labels = a.labels;
  if (a.train.empty()) {
    Corpus test = ingest_jsonl(fs::path(a.test), Split::kTest, labels);
    Corpus train(Split::kTrain, {}, test.label_set(), test.d_emo());
    return {std::move(train), std::move(test)};
  }
  Corpus train = ingest_jsonl(fs::path(a.train), Split::kTrain, labels);
  Corpus test = ingest_jsonl(fs::path(a.test), Split::kTest, train.label_set());
  return {std::move(train), std::move(test)};
}

RunOptions make_run_options(const RunArgs& a) {
  RunOptions opts;
  if (!a.templates.empty()) opts.templates = load_templates(a.templates);
  return opts;
}

int do_run(const RunArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = make_run_config(a, g);
  cfg.validate();
  const auto corpora = load_corpora(a);
  const RunOptions opts = make_run_options(a);
  auto provider = make_provider(cfg.provider);
  std::optional<RecordingProvider> recorder;
  LlmProvider* active = provider.get();
  if (!a.record_transcript.empty()) active = &recorder.emplace(*provider);
  if (g.verbose) err << "running " << mode_name(cfg.mode) << " on " << corpora.test.size() << " queries via "
                     << active->describe() << '\n';

  const RunReport report = run_experiment(cfg, corpora.train, corpora.test, *active, opts);
  const fs::path dir = resolve_run_dir(a.run_dir, a.runs_root, report.config.dump());
  write_report(dir / "report.jsonl", report);
  {
    auto csv = open_out(dir / "per_label.csv");
    write_per_label_csv(csv, report.metrics);
  }
  if (recorder) write_transcript(a.record_transcript, recorder->entries());
  out << "accuracy=" << fixed4(report.metrics.accuracy) << " macro_f1=" << fixed4(report.metrics.macro_f1)
      << " n=" << report.metrics.total << " unparsed=" << report.metrics.unparsed << " report="
      << (dir / "report.jsonl").string() << '\n';
  return kExitOk;
}

ParameterGrid parse_grid(const std::vector<std::string>& specs) {
  ParameterGrid grid;
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
      throw UsageError("grid axis '" + spec + "' must look like name=v1,v2,...");
    }
    GridAxis axis{spec.substr(0, eq), {}};
    std::stringstream ss(spec.substr(eq + 1));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        std::size_t used = 0;
        axis.values.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw UsageError("grid value '" + tok + "' is not a number");
      }
    }
    grid.push_back(std::move(axis));
  }
  return grid;
}

int do_ablate(const RunArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  const RunConfig base = make_run_config(a, g);
  const ParameterGrid grid = parse_grid(a.grid);
  if (grid.empty()) throw UsageError("ablate needs at least one --grid axis");
  for (const auto& axis : grid) {
    const bool eicl_only = axis.name == "k3" || axis.name == "no_eer" || axis.name == "no_dsl" || axis.name == "no_te";
    if (eicl_only && base.mode != PromptMode::kEicl) throw UsageError(axis.name + " only valid for eicl");
  }
  const auto corpora = load_corpora(a);
  const RunOptions opts = make_run_options(a);
  auto provider = make_provider(base.provider);
  std::optional<RecordingProvider> recorder;
  LlmProvider* active = provider.get();
  if (!a.record_transcript.empty()) active = &recorder.emplace(*provider);
  if (g.verbose) err << "sweeping " << enumerate_grid(grid).size() << " grid points\n";

  const auto points = run_ablation_suite(base, grid, corpora.train, corpora.test, *active, opts);
  nlohmann::ordered_json key = config_to_json(base);
  for (const auto& axis : grid) key["grid"][axis.name] = axis.values;
  const fs::path dir = resolve_run_dir(a.run_dir, a.runs_root, key.dump());
  fs::create_directories(dir / "points");
  for (std::size_t i = 0; i < points.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "point-%03zu.jsonl", i);
    write_report(dir / "points" / name, points[i].report);
  }
  {
    auto csv = open_out(dir / "summary.csv");
    write_summary_csv(csv, grid, points);
  }
  if (recorder) write_transcript(a.record_transcript, recorder->entries());
  write_summary_csv(out, grid, points);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// probe-pairs / synth / probe-analyze

struct PairsArgs {
  std::string input;
  std::vector<std::string> labels;
  std::size_t m = 50;
  std::string output;
};

int do_probe_pairs(const PairsArgs& a, const Globals& g, std::ostream& out) {
  const Corpus c = ingest_jsonl(fs::path(a.input), Split::kTrain);
  const LabelList labels = a.labels.empty() ? c.label_set() : LabelList(a.labels);
  auto file = open_out(a.output);
  std::size_t total = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (const auto& p : build_prompt_pairs(c, labels[i], a.m, g.seed + i)) {
      file << pair_to_json(p).dump() << '\n';
      ++total;
    }
  }
  out << "wrote " << total << " prompt pairs for " << labels.size() << " labels to " << a.output << '\n';
  return kExitOk;
}

struct SynthArgs {
  std::size_t labels = 10;
  std::size_t layers = 4;
  std::size_t dim = 64;
  std::size_t per_label = 50;
  double sigma = 0.1;
  double drift = kDefaultLayerDrift;
  std::size_t queries = 500;
  std::optional<double> query_sigma;
  double temperature = 0.2;
  std::size_t test_size = 400;
  std::size_t train_per_label = 40;
  std::string run_dir;
  std::string runs_root = "runs";
};

void write_benchmark(const fs::path& dir, const SynthArgs& a, const Globals& g) {
  BenchmarkParams p;
  p.num_labels = a.labels;
  p.llm_dim = std::max(p.llm_dim, a.labels);
  p.emo_dim = std::max(p.emo_dim, a.labels);
  p.sem_dim = std::max(p.sem_dim, a.labels);
  p.test_size = a.test_size;
  p.train_per_label = a.train_per_label;
  p.seed = g.seed;
  const SynthBenchmark b = synth_benchmark(p);
  fs::create_directories(dir);
  write_jsonl(dir / "train.jsonl", b.train);
  write_jsonl(dir / "test.jsonl", b.test);
  write_bank(dir / "bank.evec", b.bank);
  std::vector<std::string> names;
  std::vector<float> values;
  for (const auto& r : b.train.records()) names.push_back(r.text);
  for (const auto& r : b.test.records()) names.push_back(r.text);
  for (const auto& name : names) {
    for (double v : b.perception.at(name)) values.push_back(static_cast<float>(v));
  }
  write_tensor(dir / "perception.evec", {names.size(), b.bank.dim()}, values, names);

  const fs::path abs = fs::absolute(dir);
  std::ostringstream body;
  body << "train = \"" << (abs / "train.jsonl").string() << "\"\n"
       << "test = \"" << (abs / "test.jsonl").string() << "\"\n"
       << "provider = \"prototype_sim\"\n"
       << "bank = \"" << (abs / "bank.evec").string() << "\"\n"
       << "perception = \"" << (abs / "perception.evec").string() << "\"\n"
       << "sim-temperature = " << b.sim.temperature << "\n"
       << "example-gain = " << b.sim.example_gain << "\n"
       << "fit-margin = " << b.sim.fit_margin << "\n";
  // Same settings for both verbs: `eicl run --config` and `eicl ablate --config`.
  auto cfg = open_out(dir / "run.toml");
  cfg << "# eicl run --config " << (abs / "run.toml").string() << "\n"
      << "[run]\n" << body.str() << "\n[ablate]\n" << body.str();
}

int do_synth(const SynthArgs& a, const Globals& g, std::ostream& out) {
  const SynthProbeWorld w = synth_generate(a.labels, a.layers, a.dim, a.per_label, a.sigma, g.seed, a.drift);
  nlohmann::ordered_json key{{"labels", a.labels}, {"layers", a.layers},       {"dim", a.dim},
                             {"per_label", a.per_label}, {"sigma", a.sigma}, {"seed", g.seed}};
  const fs::path dir = resolve_run_dir(a.run_dir, a.runs_root, key.dump());

  fs::create_directories(dir / "traces");
  {
    auto pairs = open_out(dir / "pairs.jsonl");
    for (std::size_t c = 0; c < w.labels.size(); ++c) {
      const Label& negative = w.labels[(c + 1) % w.labels.size()];
      for (const auto& t : w.traces[c]) {
        PromptPair p{t.pair_id, w.labels[c], negative, render_probe_prompt(w.labels[c], "synthetic dialogue " + t.pair_id),
                     render_probe_prompt(negative, "synthetic dialogue " + t.pair_id)};
        pairs << pair_to_json(p).dump() << '\n';
        write_trace(dir / "traces" / (t.pair_id + ".evec"), t);
      }
    }
  }
  write_bank(dir / "bank.evec", w.bank);
  {
    std::vector<float> values;
    for (const auto& m : w.directions) {
      for (double v : m.data()) values.push_back(static_cast<float>(v));
    }
    write_tensor(dir / "directions.evec", {w.labels.size(), a.layers, a.dim}, values, w.labels);
  }

  const auto queries = synth_probe_queries(w, a.queries, a.query_sigma.value_or(a.sigma), g.seed + 1);
  {
    std::vector<std::string> ids;
    std::vector<float> values;
    auto decisions = open_out(dir / "decisions.jsonl");
    for (const auto& q : queries) {
      ids.push_back(q.id);
      for (double v : q.trace.data()) values.push_back(static_cast<float>(v));
      const auto d = synth_probe_decision(q.trace, w.bank, a.temperature);
      nlohmann::ordered_json j;
      j["id"] = q.id;
      j["gold"] = q.gold;
      j["predicted"] = d.label;
      for (std::size_t c = 0; c < w.labels.size(); ++c) j["probabilities"][w.labels[c]] = d.probabilities[c];
      decisions << j.dump() << '\n';
    }
    write_tensor(dir / "queries.evec", {queries.size(), a.layers, a.dim}, values, ids);
  }
  write_benchmark(dir / "benchmark", a, g);
  out << "synthetic world in " << dir.string() << '\n';
  return kExitOk;
}

struct AnalyzeArgs {
  std::string input_dir;
  std::string pairs;
  std::string traces;
  std::string queries;
  std::string decisions;
  std::string output_dir;
  std::string scaling = "affine";
};

std::vector<PromptPair> read_pairs(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<PromptPair> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(pair_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<ProbeQuery> read_probe_queries(const fs::path& queries_path, const fs::path& decisions_path,
                                           const LabelList& labels) {
  const Tensor t = read_tensor(queries_path);
  if (t.shape.size() != 3 || !t.names || t.names->size() != t.shape[0]) {
    throw ValidationError(queries_path.string() + ": query tensor must be [n, L, d] with one id per query");
  }
  const std::size_t layers = t.shape[1];
  const std::size_t d = t.shape[2];
  std::map<std::string, std::vector<double>> probs;
  std::ifstream in(decisions_path);
  if (!in) throw Error("cannot open " + decisions_path.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line);
    const auto& p = j.at("probabilities");
    if (p.size() != labels.size()) throw ValidationError("inconsistent label sets between decisions and representations");
    std::vector<double> row;
    for (const auto& l : labels) {
      if (!p.contains(l)) throw ValidationError("inconsistent label sets: decision lacks '" + l + "'");
      row.push_back(p.at(l).get<double>());
    }
    probs.emplace(j.at("id").get<std::string>(), std::move(row));
  }
  std::vector<ProbeQuery> out;
  for (std::size_t i = 0; i < t.shape[0]; ++i) {
    auto it = probs.find((*t.names)[i]);
    if (it == probs.end()) throw ValidationError("no decision for query '" + (*t.names)[i] + "'");
    const std::span<const float> slice(t.values.data() + i * layers * d, layers * d);
    out.push_back({Matrix::from<float>(layers, d, slice), it->second});
  }
  return out;
}

int do_probe_analyze(const AnalyzeArgs& a, std::ostream& out) {
  const fs::path base(a.input_dir);
  auto pick = [&](const std::string& given, const char* name) -> fs::path {
    if (!given.empty()) return given;
    if (a.input_dir.empty()) throw UsageError(std::string("--") + name + " or --input-dir is required");
    return base / (std::string(name) == "pairs" ? "pairs.jsonl" : name);
  };
  const fs::path pairs_path = pick(a.pairs, "pairs");
  const fs::path traces_dir = pick(a.traces, "traces");
  const fs::path out_dir = !a.output_dir.empty() ? fs::path(a.output_dir)
                           : !a.input_dir.empty() ? base / "analysis"
                                                  : throw UsageError("--output-dir or --input-dir is required");
  fs::create_directories(out_dir);

  const auto pairs = read_pairs(pairs_path);
  LabelList labels;
  std::map<Label, std::vector<HiddenTrace>> by_label;
  for (const auto& p : pairs) {
    if (!by_label.count(p.target_label)) labels.push_back(p.target_label);
    by_label[p.target_label].push_back(read_trace(traces_dir / (p.sample_id + ".evec")));
  }
  if (labels.empty()) throw ValidationError(pairs_path.string() + " holds no prompt pairs");
  std::vector<CategoryRepresentation> reps;
  for (const auto& l : labels) reps.push_back(extract_category_representation(l, by_label[l]));
  write_representations(out_dir / "representations.evec", reps);

  const auto scaling = a.scaling == "minmax" ? SimilarityScaling::kMinMax : SimilarityScaling::kAffine;
  const Matrix sim = category_similarity_matrix(reps, scaling);
  {
    auto csv = open_out(out_dir / "heatmap.csv");
    csv << "label";
    for (const auto& l : labels) csv << ',' << l;
    csv << '\n';
    for (std::size_t i = 0; i < labels.size(); ++i) {
      csv << labels[i];
      for (std::size_t j = 0; j < labels.size(); ++j) csv << ',' << sim(i, j);
      csv << '\n';
    }
  }
  out << "representations for " << labels.size() << " labels in " << out_dir.string() << '\n';

  const bool have_queries = !a.queries.empty() || (!a.input_dir.empty() && fs::exists(base / "queries.evec"));
  if (!have_queries) return kExitOk;
  const fs::path queries_path = a.queries.empty() ? base / "queries.evec" : fs::path(a.queries);
  const fs::path decisions_path = a.decisions.empty() ? base / "decisions.jsonl" : fs::path(a.decisions);
  const auto queries = read_probe_queries(queries_path, decisions_path, labels);
  const auto curve = rank_probability_curve(queries, reps);
  {
    auto csv = open_out(out_dir / "rank_probability.csv");
    csv << "rank,mean_probability\n";
    for (std::size_t r = 0; r < curve.mean_probability.size(); ++r) csv << r + 1 << ',' << curve.mean_probability[r] << '\n';
  }
  {
    auto js = open_out(out_dir / "rank_probability.json");
    js << nlohmann::ordered_json{{"queries", queries.size()},
                                 {"spearman", curve.spearman},
                                 {"mean_probability", curve.mean_probability}}
              .dump(2)
       << '\n';
  }
  out << "rank-probability curve over " << queries.size() << " queries, spearman=" << fixed4(curve.spearman) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
  std::string report;
  std::string per_label;
};

int do_report(const ReportArgs& a, std::ostream& out, std::ostream& err) {
  const RunReport r = read_report(a.report);
  const Metrics m = compute_metrics(r.predictions(), r.labels);
  if (m.accuracy != r.metrics.accuracy || m.macro_f1 != r.metrics.macro_f1 || m.total != r.metrics.total) {
    err << "report metrics do not match its per-query records\n";
    return kExitDomainError;
  }
  if (!a.per_label.empty()) {
    auto csv = open_out(a.per_label);
    write_per_label_csv(csv, m);
  }
  out << "mode=" << r.config.value("mode", std::string{"?"}) << " accuracy=" << fixed4(m.accuracy)
      << " macro_f1=" << fixed4(m.macro_f1) << " n=" << m.total << " unparsed=" << m.unparsed << '\n';
  for (const auto& lm : m.per_label) {
    out << "  " << std::left << std::setw(16) << lm.label << " support=" << lm.support
        << " accuracy=" << fixed4(lm.recall) << " f1=" << fixed4(lm.f1) << '\n';
  }
  return kExitOk;
}

}  // namespace

int execute(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Emotion-aware in-context learning toolkit", args.empty() ? "eicl" : args.front()};
  app.require_subcommand(1, 1);
  app.fallthrough();
  app.set_config("--config", "", "TOML configuration; command-line flags win");
  Globals g;
  app.add_option("--seed", g.seed, "global random seed");
  app.add_flag("-v,--verbose", g.verbose, "progress on stderr");

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "validate a corpus and optionally rewrite it");
  ingest_cmd->add_option("--input", ingest.input, "corpus JSONL")->required();
  ingest_cmd->add_option("--split", ingest.split, "train | test")->check(CLI::IsMember({"train", "test"}));
  ingest_cmd->add_option("--labels", ingest.labels, "expected label set, comma separated")->delimiter(',');
  ingest_cmd->add_option("--output", ingest.output, "normalised JSONL output");

  AlignArgs align;
  auto* align_cmd = app.add_subcommand("align", "restrict a corpus to labels shared with an auxiliary model");
  align_cmd->add_option("--input", align.input, "corpus JSONL")->required();
  align_cmd->add_option("--split", align.split, "train | test")->check(CLI::IsMember({"train", "test"}));
  align_cmd->add_option("--aux-labels", align.aux_labels, "auxiliary label set, comma separated")
      ->required()
      ->delimiter(',');
  align_cmd->add_flag("--no-renormalize", align.no_renormalize, "keep probability rows as they are");
  align_cmd->add_option("--output", align.output, "aligned JSONL output")->required();

  RetrieveArgs retrieve;
  auto* retrieve_cmd = app.add_subcommand("retrieve", "list the nearest training examples of each test query");
  retrieve_cmd->add_option("--train", retrieve.train, "training corpus")->required();
  retrieve_cmd->add_option("--test", retrieve.test, "query corpus")->required();
  retrieve_cmd->add_option("--k1", retrieve.k1, "neighbours per query")->check(CLI::PositiveNumber);
  retrieve_cmd->add_option("--field", retrieve.field, "emotion | semantic");
  retrieve_cmd->add_option("--output", retrieve.output, "JSONL output (default stdout)");

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "run one experiment and write a report");
  add_run_options(*run_cmd, run);

  RunArgs ablate;
  auto* ablate_cmd = app.add_subcommand("ablate", "sweep a parameter grid");
  add_run_options(*ablate_cmd, ablate);
  ablate_cmd->add_option("--grid", ablate.grid, "axis=v1,v2,... (alpha, k1, k2, k3, no_eer, no_dsl, no_te)")
      ->required();

  PairsArgs pairs;
  auto* pairs_cmd = app.add_subcommand("probe-pairs", "build positive/negative probe prompts");
  pairs_cmd->add_option("--input", pairs.input, "corpus JSONL")->required();
  pairs_cmd->add_option("--labels", pairs.labels, "labels to probe (default: all)")->delimiter(',');
  pairs_cmd->add_option("-m,--per-label", pairs.m, "pairs per label")->check(CLI::PositiveNumber);
  pairs_cmd->add_option("--output", pairs.output, "pairs JSONL")->required();

  AnalyzeArgs analyze;
  auto* analyze_cmd = app.add_subcommand("probe-analyze", "extract representations, heatmap and rank curve");
  analyze_cmd->add_option("--input-dir", analyze.input_dir, "directory laid out like synth output");
  analyze_cmd->add_option("--pairs", analyze.pairs, "pairs JSONL");
  analyze_cmd->add_option("--traces", analyze.traces, "directory of <pair id>.evec traces");
  analyze_cmd->add_option("--queries", analyze.queries, "query traces tensor [n, L, d]");
  analyze_cmd->add_option("--decisions", analyze.decisions, "decision probabilities JSONL");
  analyze_cmd->add_option("--output-dir", analyze.output_dir, "analysis output directory");
  analyze_cmd->add_option("--scaling", analyze.scaling, "affine | minmax")
      ->check(CLI::IsMember({"affine", "minmax"}));

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic probe world and benchmark");
  synth_cmd->add_option("--labels", synth.labels, "number of labels")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--layers", synth.layers, "layers per trace")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--dim", synth.dim, "hidden size")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--per-label", synth.per_label, "traces per label")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--sigma", synth.sigma, "trace noise")->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--drift", synth.drift, "per-layer direction drift")->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--queries", synth.queries, "probe queries")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--query-sigma", synth.query_sigma, "query noise (default: --sigma)");
  synth_cmd->add_option("--temperature", synth.temperature, "decision temperature")->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--test-size", synth.test_size, "benchmark test queries")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--train-per-label", synth.train_per_label, "benchmark training records per label")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--run-dir", synth.run_dir, "output directory");
  synth_cmd->add_option("--runs-root", synth.runs_root, "parent of generated run directories");

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "verify and summarise a run report");
  report_cmd->add_option("--report", report.report, "report JSONL")->required();
  report_cmd->add_option("--per-label", report.per_label, "write the per-emotion table here");

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  if (args.empty()) argv.push_back("eicl");
  for (const auto& a : args) argv.push_back(a.c_str());

  auto usage = [&](const std::string& message) {
    err << "error: " << message << "\n\n" << app.help("", CLI::AppFormatMode::Normal);
    return kExitUsageError;
  };

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    return usage(e.what());
  }

  try {
    if (*ingest_cmd) return do_ingest(ingest, out);
    if (*align_cmd) return do_align(align, out);
    if (*retrieve_cmd) return do_retrieve(retrieve, out);
    if (*run_cmd) return do_run(run, g, out, err);
    if (*ablate_cmd) return do_ablate(ablate, g, out, err);
    if (*pairs_cmd) return do_probe_pairs(pairs, g, out);
    if (*analyze_cmd) return do_probe_analyze(analyze, out);
    if (*synth_cmd) return do_synth(synth, g, out);
    if (*report_cmd) return do_report(report, out, err);
  } catch (const UsageError& e) {
    return usage(e.what());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomainError;
  }
  return usage("no command given");
}

}  // namespace eicl::cli
