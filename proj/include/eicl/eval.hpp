#pragma once

// Metrics, the Z-shot / ICL / EICL experiment runner, ablation sweeps, and
// run report serialisation.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "eicl/corpus.hpp"
#include "eicl/decision.hpp"
#include "eicl/error.hpp"
#include "eicl/hash.hpp"
#include "eicl/llmclient.hpp"
#include "eicl/retrieval.hpp"
#include "eicl/softlabel.hpp"

namespace eicl {

// ---------------------------------------------------------------------------
// Metrics

struct LabelMetrics {
  Label label;
  std::size_t support = 0;    // gold count
  std::size_t predicted = 0;  // prediction count
  std::size_t true_positive = 0;
  double precision = 0.0;
  double recall = 0.0;  // per-emotion accuracy
  double f1 = 0.0;
};

struct Metrics {
  std::size_t total = 0;
  std::size_t correct = 0;
  std::size_t unparsed = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<LabelMetrics> per_label;  // label-set order
};

struct Prediction {
  Label gold;
  std::optional<Label> predicted;  // nullopt: unparsed or provider failure
};

// Unparsed predictions are wrong and count towards no label. Macro-F1
// averages over every label in `labels`, predicted or not.
inline Metrics compute_metrics(const std::vector<Prediction>& records, const LabelList& labels) {
  if (records.empty()) throw ArgumentError("cannot compute metrics over an empty record list");
  if (labels.empty()) throw ArgumentError("label set is empty");
  std::map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < labels.size(); ++i) index.emplace(labels[i], i);

  Metrics m;
  m.per_label.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) m.per_label[i].label = labels[i];
  for (const auto& r : records) {
    auto g = index.find(r.gold);
    if (g == index.end()) throw ArgumentError("gold label '" + r.gold + "' is not in the label set");
    ++m.total;
    ++m.per_label[g->second].support;
    if (!r.predicted) {
      ++m.unparsed;
      continue;
    }
    auto p = index.find(*r.predicted);
    if (p != index.end()) ++m.per_label[p->second].predicted;
    if (*r.predicted == r.gold) {
      ++m.correct;
      ++m.per_label[g->second].true_positive;
    }
  }
  double f1_sum = 0.0;
  for (auto& lm : m.per_label) {
    lm.precision = lm.predicted ? static_cast<double>(lm.true_positive) / static_cast<double>(lm.predicted) : 0.0;
    lm.recall = lm.support ? static_cast<double>(lm.true_positive) / static_cast<double>(lm.support) : 0.0;
    const double pr = lm.precision + lm.recall;
    lm.f1 = pr > 0.0 ? 2.0 * lm.precision * lm.recall / pr : 0.0;
    f1_sum += lm.f1;
  }
  m.accuracy = static_cast<double>(m.correct) / static_cast<double>(m.total);
  m.macro_f1 = f1_sum / static_cast<double>(labels.size());
  return m;
}

// ---------------------------------------------------------------------------
// Run configuration

struct RunConfig {
  PromptMode mode = PromptMode::kEicl;
  std::size_t k1 = 5;
  std::size_t k2 = 3;
  std::size_t k3 = 3;
  double alpha = 0.2;
  bool no_eer = false;  // semantic instead of emotion retrieval
  bool no_dsl = false;  // hard instead of soft labels
  bool no_te = false;   // every label primary
  SoftLabelRule soft_label_rule = SoftLabelRule::kNormalized;
  ProviderConfig provider;
  std::uint64_t seed = 7;
  std::string train_path;
  std::string test_path;

  void validate() const {
    if (k1 < 1) throw ArgumentError("k1 must be at least 1");
    if (k2 < 1) throw ArgumentError("k2 must be at least 1");
    if (k3 < 1) throw ArgumentError("k3 must be at least 1");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ArgumentError("alpha must lie in [0,1]");
    if (mode != PromptMode::kEicl && (no_eer || no_dsl || no_te)) {
      throw ArgumentError("ablation flags only apply to eicl runs");
    }
  }

  [[nodiscard]] RetrievalField retrieval_field() const {
    if (mode == PromptMode::kIcl) return RetrievalField::kSemantic;
    return no_eer ? RetrievalField::kSemantic : RetrievalField::kEmotion;
  }
  [[nodiscard]] LabelMode label_mode() const {
    if (mode == PromptMode::kIcl) return LabelMode::kHard;
    return no_dsl ? LabelMode::kHard : LabelMode::kSoft;
  }
  [[nodiscard]] std::size_t effective_k3(std::size_t num_labels) const { return no_te ? num_labels : k3; }
};

inline nlohmann::ordered_json config_to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["mode"] = mode_name(c.mode);
  j["k1"] = c.k1;
  j["k2"] = c.k2;
  j["k3"] = c.k3;
  j["alpha"] = c.alpha;
  j["no_eer"] = c.no_eer;
  j["no_dsl"] = c.no_dsl;
  j["no_te"] = c.no_te;
  j["soft_label_rule"] = c.soft_label_rule == SoftLabelRule::kNormalized ? "normalized" : "literal";
  j["seed"] = c.seed;
  j["train"] = c.train_path;
  j["test"] = c.test_path;
  nlohmann::ordered_json p;
  p["kind"] = provider_kind_name(c.provider.kind);
  p["max_concurrency"] = c.provider.max_concurrency;
  switch (c.provider.kind) {
    case ProviderKind::kHttp:
      p["endpoint"] = c.provider.http.endpoint;
      p["model"] = c.provider.http.model;
      p["api_key_env"] = c.provider.http.api_key_env;
      p["temperature"] = c.provider.http.temperature ? nlohmann::ordered_json(*c.provider.http.temperature)
                                                     : nlohmann::ordered_json(nullptr);
      p["max_attempts"] = c.provider.retry.max_attempts;
      break;
    case ProviderKind::kReplay:
      p["transcript"] = c.provider.transcript_path.string();
      break;
    case ProviderKind::kPrototypeSim:
      p["bank"] = c.provider.sim.bank_path.string();
      p["perception"] = c.provider.sim.perception_path.string();
      p["temperature"] = c.provider.sim.temperature;
      p["example_gain"] = c.provider.sim.example_gain;
      p["fit_margin"] = c.provider.sim.fit_margin;
      break;
  }
  j["provider"] = std::move(p);
  return j;
}

// ---------------------------------------------------------------------------
// Reports

inline constexpr std::string_view kProviderErrorStatus = "provider_error";

struct QueryRecord {
  std::string id;
  Label gold;
  std::optional<Label> predicted;
  std::string status;  // parse status name, or provider_error
  std::string prompt_hash;
  std::string detail;

  bool operator==(const QueryRecord&) const = default;
};

struct RunReport {
  nlohmann::ordered_json config;
  std::string template_hash;
  LabelList labels;
  std::vector<QueryRecord> records;  // sorted by id
  Metrics metrics;
  double wall_clock_seconds = 0.0;

  [[nodiscard]] std::vector<Prediction> predictions() const {
    std::vector<Prediction> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back({r.gold, r.predicted});
    return out;
  }
};

inline void write_report(std::ostream& out, const RunReport& r, bool include_wall_clock = true) {
  nlohmann::ordered_json head;
  head["type"] = "config";
  head["config"] = r.config;
  head["template_hash"] = r.template_hash;
  head["labels"] = r.labels;
  out << head.dump() << '\n';
  for (const auto& q : r.records) {
    nlohmann::ordered_json j;
    j["type"] = "query";
    j["id"] = q.id;
    j["gold"] = q.gold;
    j["predicted"] = q.predicted ? nlohmann::ordered_json(*q.predicted) : nlohmann::ordered_json(nullptr);
    j["status"] = q.status;
    j["prompt_hash"] = q.prompt_hash;
    if (!q.detail.empty()) j["detail"] = q.detail;
    out << j.dump() << '\n';
  }
  for (const auto& lm : r.metrics.per_label) {
    nlohmann::ordered_json j;
    j["type"] = "label";
    j["label"] = lm.label;
    j["support"] = lm.support;
    j["predicted"] = lm.predicted;
    j["true_positive"] = lm.true_positive;
    j["precision"] = lm.precision;
    j["recall"] = lm.recall;
    j["f1"] = lm.f1;
    out << j.dump() << '\n';
  }
  nlohmann::ordered_json s;
  s["type"] = "summary";
  s["total"] = r.metrics.total;
  s["correct"] = r.metrics.correct;
  s["unparsed"] = r.metrics.unparsed;
  s["accuracy"] = r.metrics.accuracy;
  s["macro_f1"] = r.metrics.macro_f1;
  if (include_wall_clock) s["wall_clock_seconds"] = r.wall_clock_seconds;
  out << s.dump() << '\n';
}

inline std::string report_to_string(const RunReport& r, bool include_wall_clock = true) {
  std::ostringstream ss;
  write_report(ss, r, include_wall_clock);
  return ss.str();
}

inline void write_report(const std::filesystem::path& path, const RunReport& r) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_report(out, r);
}

inline RunReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open report " + path.string());
  RunReport r;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::ordered_json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (type == "config") {
        r.config = j.at("config");
        r.template_hash = j.value("template_hash", std::string{});
        r.labels = j.at("labels").get<LabelList>();
      } else if (type == "query") {
        QueryRecord q;
        q.id = j.at("id").get<std::string>();
        q.gold = j.at("gold").get<std::string>();
        if (!j.at("predicted").is_null()) q.predicted = j["predicted"].get<std::string>();
        q.status = j.at("status").get<std::string>();
        q.prompt_hash = j.value("prompt_hash", std::string{});
        q.detail = j.value("detail", std::string{});
        r.records.push_back(std::move(q));
      } else if (type == "label") {
        LabelMetrics lm;
        lm.label = j.at("label").get<std::string>();
        lm.support = j.at("support").get<std::size_t>();
        lm.predicted = j.at("predicted").get<std::size_t>();
        lm.true_positive = j.at("true_positive").get<std::size_t>();
        lm.precision = j.at("precision").get<double>();
        lm.recall = j.at("recall").get<double>();
        lm.f1 = j.at("f1").get<double>();
        r.metrics.per_label.push_back(std::move(lm));
      } else if (type == "summary") {
        r.metrics.total = j.at("total").get<std::size_t>();
        r.metrics.correct = j.at("correct").get<std::size_t>();
        r.metrics.unparsed = j.at("unparsed").get<std::size_t>();
        r.metrics.accuracy = j.at("accuracy").get<double>();
        r.metrics.macro_f1 = j.at("macro_f1").get<double>();
        r.wall_clock_seconds = j.value("wall_clock_seconds", 0.0);
      } else {
        throw ValidationError("unknown record type '" + type + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path.string() + ": malformed report line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return r;
}

// Per-emotion table: label, support, predicted, precision, recall (accuracy), f1.
inline void write_per_label_csv(std::ostream& out, const Metrics& m) {
  out << "label,support,predicted,precision,accuracy,f1\n";
  for (const auto& lm : m.per_label) {
    out << lm.label << ',' << lm.support << ',' << lm.predicted << ',' << lm.precision << ',' << lm.recall << ','
        << lm.f1 << '\n';
  }
}

// ---------------------------------------------------------------------------
// Experiment runner

struct RunOptions {
  PromptTemplates templates;
  ParseOptions parse;
};

// Builds the prompt a given query receives under `cfg`.
inline PromptBundle prepare_prompt(const RunConfig& cfg, const SampleRecord& query, const Corpus& train,
                                   const LabelList& labels, const PromptTemplates& templates) {
  if (cfg.mode == PromptMode::kZeroShot) return build_prompt(query, labels, {}, std::nullopt, cfg.mode, templates);
  const auto neighbors = top_k_similar(query, train, cfg.k1, cfg.retrieval_field());
  const auto blocks = assemble_examples(neighbors, train, cfg.alpha, cfg.k2, cfg.label_mode(), cfg.soft_label_rule);
  std::optional<CandidateSplit> split;
  if (cfg.mode == PromptMode::kEicl) split = split_candidates(query, labels, cfg.effective_k3(labels.size()));
  return build_prompt(query, labels, blocks, split, cfg.mode, templates);
}

inline RunReport run_experiment(const RunConfig& cfg, const Corpus& train, const Corpus& test, LlmProvider& provider,
                                const RunOptions& opts = {}) {
  cfg.validate();
  if (train.label_set() != test.label_set()) {
    throw ArgumentError("train and test corpora are not aligned to the same label set");
  }
  if (test.empty()) throw ArgumentError("test corpus is empty");
  const LabelList& labels = test.label_set();
  const auto started = std::chrono::steady_clock::now();

  std::vector<QueryRecord> records(test.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= test.size()) return;
      const auto& q = test[i];
      QueryRecord rec;
      rec.id = q.id;
      rec.gold = q.gold_label;
      try {
        const PromptBundle prompt = prepare_prompt(cfg, q, train, labels, opts.templates);
        rec.prompt_hash = prompt.hash();
        std::string response;
        try {
          response = provider.complete(prompt);
        } catch (const ProviderError& e) {
          rec.status = kProviderErrorStatus;
          rec.detail = e.what();
          records[i] = std::move(rec);
          continue;
        }
        const auto parsed = try_parse_emotion_response(response, labels, opts.parse);
        rec.status = parse_status_name(parsed.status);
        rec.predicted = parsed.label;
        rec.detail = parsed.detail;
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next.store(test.size());
        return;
      }
      records[i] = std::move(rec);
    }
  };

  const std::size_t workers =
      std::max<std::size_t>(1, std::min({cfg.provider.max_concurrency, provider.max_concurrency(), test.size()}));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

  RunReport report;
  report.config = config_to_json(cfg);
  report.template_hash = opts.templates.fingerprint();
  report.labels = labels;
  report.records = std::move(records);
  report.metrics = compute_metrics(report.predictions(), labels);
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

// ---------------------------------------------------------------------------
// Ablation and hyperparameter sweeps

struct GridAxis {
  std::string name;  // alpha, k1, k2, k3, no_eer, no_dsl, no_te
  std::vector<double> values;
};

using ParameterGrid = std::vector<GridAxis>;

inline void apply_grid_value(RunConfig& cfg, const std::string& name, double v) {
  auto as_count = [&](const char* what) {
    if (v < 1.0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
      throw ArgumentError(std::string(what) + " grid values must be positive integers");
    }
    return static_cast<std::size_t>(v);
  };
  if (name == "alpha") {
    cfg.alpha = v;
  } else if (name == "k1") {
    cfg.k1 = as_count("k1");
  } else if (name == "k2") {
    cfg.k2 = as_count("k2");
  } else if (name == "k3") {
    cfg.k3 = as_count("k3");
  } else if (name == "no_eer") {
    cfg.no_eer = v != 0.0;
  } else if (name == "no_dsl") {
    cfg.no_dsl = v != 0.0;
  } else if (name == "no_te") {
    cfg.no_te = v != 0.0;
  } else {
    throw ArgumentError("unknown grid axis '" + name + "'");
  }
}

struct GridPoint {
  std::vector<double> coordinates;  // one per axis
  RunReport report;
};

// Cartesian product, first axis varying slowest.
inline std::vector<std::vector<double>> enumerate_grid(const ParameterGrid& grid) {
  if (grid.empty()) throw ArgumentError("parameter grid is empty");
  for (const auto& a : grid) {
    if (a.values.empty()) throw ArgumentError("grid axis '" + a.name + "' has no values");
  }
  std::vector<std::vector<double>> points{{}};
  for (const auto& axis : grid) {
    std::vector<std::vector<double>> next;
    for (const auto& p : points) {
      for (double v : axis.values) {
        auto q = p;
        q.push_back(v);
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  return points;
}

inline std::vector<GridPoint> run_ablation_suite(const RunConfig& base, const ParameterGrid& grid, const Corpus& train,
                                                 const Corpus& test, LlmProvider& provider,
                                                 const RunOptions& opts = {}) {
  std::vector<GridPoint> out;
  for (auto& coords : enumerate_grid(grid)) {
    RunConfig cfg = base;
    for (std::size_t a = 0; a < grid.size(); ++a) apply_grid_value(cfg, grid[a].name, coords[a]);
    out.push_back({std::move(coords), run_experiment(cfg, train, test, provider, opts)});
  }
  return out;
}

inline void write_summary_csv(std::ostream& out, const ParameterGrid& grid, const std::vector<GridPoint>& points) {
  for (const auto& a : grid) out << a.name << ',';
  out << "accuracy,macro_f1,total,unparsed\n";
  for (const auto& p : points) {
    for (double c : p.coordinates) out << c << ',';
    out << p.report.metrics.accuracy << ',' << p.report.metrics.macro_f1 << ',' << p.report.metrics.total << ','
        << p.report.metrics.unparsed << '\n';
  }
}

}  // namespace eicl
