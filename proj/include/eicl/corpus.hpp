#pragma once

// Sample records, corpus validation, JSONL ingestion, and label-space
// alignment against an auxiliary model's label set.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "eicl/error.hpp"

namespace eicl {

using Label = std::string;
using LabelList = std::vector<Label>;

inline constexpr double kProbabilitySumTolerance = 1e-6;

// An ordered (label, probability) list. Order is the producer's order and is
// only used for deterministic iteration; lookups are by label.
class LabelDistribution {
 public:
  using Entry = std::pair<Label, double>;

  LabelDistribution() = default;
  LabelDistribution(std::initializer_list<Entry> entries) : entries_(entries) {}
  explicit LabelDistribution(std::vector<Entry> entries) : entries_(std::move(entries)) {}

  [[nodiscard]] const std::vector<Entry>& entries() const noexcept { return entries_; }
  [[nodiscard]] bool empty() const noexcept { return entries_.empty(); }
  [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }

  [[nodiscard]] std::optional<double> find(std::string_view label) const {
    for (const auto& [l, p] : entries_) {
      if (l == label) return p;
    }
    return std::nullopt;
  }

  // Missing labels have probability zero.
  [[nodiscard]] double prob(std::string_view label) const { return find(label).value_or(0.0); }

  [[nodiscard]] double sum() const {
    double s = 0.0;
    for (const auto& e : entries_) s += e.second;
    return s;
  }

  bool operator==(const LabelDistribution&) const = default;

 private:
  std::vector<Entry> entries_;
};

struct SampleRecord {
  std::string id;
  std::string text;
  Label gold_label;
  LabelDistribution emotion_probs;
  std::vector<float> emotion_vector;
  std::optional<std::vector<float>> semantic_vector;

  bool operator==(const SampleRecord&) const = default;
};

enum class Split { kTrain, kTest };

inline std::string_view split_name(Split s) { return s == Split::kTrain ? "train" : "test"; }

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "test") return Split::kTest;
  throw ArgumentError("unknown split '" + std::string(s) + "' (expected train|test)");
}

// Throws ValidationError describing the first violated invariant. `where` is
// appended to messages (e.g. ", line 7").
inline void validate_record(const SampleRecord& r, std::size_t d_emo, const std::unordered_set<Label>* labels,
                            std::string_view where = {}) {
  const std::string at(where);
  if (r.id.empty()) throw ValidationError("empty id" + at);
  if (r.emotion_probs.empty()) throw ValidationError("empty emotion_probs" + at);
  std::unordered_set<std::string_view> seen;
  for (const auto& [label, p] : r.emotion_probs.entries()) {
    if (!seen.insert(label).second) throw ValidationError("duplicate probability label '" + label + "'" + at);
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
      throw ValidationError("probability out of [0,1] for '" + label + "'" + at);
    }
  }
  const double sum = r.emotion_probs.sum();
  if (std::abs(sum - 1.0) > kProbabilitySumTolerance) {
    throw ValidationError("probability sum violation" + at + " (sum=" + std::to_string(sum) + ")");
  }
  if (r.emotion_vector.size() != d_emo) {
    throw ValidationError("vector length mismatch" + at + ": emotion_vector has " +
                          std::to_string(r.emotion_vector.size()) + " entries, d_emo=" + std::to_string(d_emo));
  }
  for (float v : r.emotion_vector) {
    if (!std::isfinite(v)) throw ValidationError("non-finite emotion_vector entry" + at);
  }
  if (r.semantic_vector) {
    for (float v : *r.semantic_vector) {
      if (!std::isfinite(v)) throw ValidationError("non-finite semantic_vector entry" + at);
    }
  }
  if (labels != nullptr && !labels->contains(r.gold_label)) {
    throw ValidationError("unknown gold_label '" + r.gold_label + "'" + at);
  }
}

// Immutable validated collection of records sharing a label set and d_emo.
class Corpus {
 public:
  Corpus(Split split, std::vector<SampleRecord> records, LabelList label_set, std::size_t d_emo)
      : split_(split), records_(std::move(records)), label_set_(std::move(label_set)), d_emo_(d_emo) {
    if (d_emo_ == 0) throw ValidationError("d_emo must be positive");
    std::unordered_set<Label> labels;
    for (const auto& l : label_set_) {
      if (!labels.insert(l).second) throw ValidationError("duplicate label '" + l + "' in label set");
    }
    index_.reserve(records_.size());
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const auto& r = records_[i];
      validate_record(r, d_emo_, &labels, ", record " + std::to_string(i + 1));
      if (!index_.emplace(r.id, i).second) throw ValidationError("duplicate id '" + r.id + "'");
    }
  }

  [[nodiscard]] Split split() const noexcept { return split_; }
  [[nodiscard]] const std::vector<SampleRecord>& records() const noexcept { return records_; }
  [[nodiscard]] const LabelList& label_set() const noexcept { return label_set_; }
  [[nodiscard]] std::size_t d_emo() const noexcept { return d_emo_; }
  [[nodiscard]] std::size_t size() const noexcept { return records_.size(); }
  [[nodiscard]] bool empty() const noexcept { return records_.empty(); }
  [[nodiscard]] const SampleRecord& operator[](std::size_t i) const { return records_[i]; }

  // Position of `id` in file order.
  [[nodiscard]] std::optional<std::size_t> position(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  [[nodiscard]] const SampleRecord* find(std::string_view id) const {
    auto pos = position(id);
    return pos ? &records_[*pos] : nullptr;
  }

  // Index of `label` in label_set, or label_set.size() when absent.
  [[nodiscard]] std::size_t label_index(std::string_view label) const {
    auto it = std::find(label_set_.begin(), label_set_.end(), label);
    return static_cast<std::size_t>(it - label_set_.begin());
  }

 private:
  Split split_;
  std::vector<SampleRecord> records_;
  LabelList label_set_;
  std::size_t d_emo_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// JSONL record format

namespace detail {

template <class Json>
std::vector<float> json_to_floats(const Json& j, const char* field) {
  if (!j.is_array()) throw ValidationError(std::string(field) + " must be an array");
  std::vector<float> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw ValidationError(std::string(field) + " must contain numbers");
    out.push_back(v.template get<float>());
  }
  return out;
}

}  // namespace detail

inline SampleRecord record_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_object()) throw ValidationError("record is not an object");
  SampleRecord r;
  try {
    r.id = j.at("id").get<std::string>();
    r.text = j.at("text").get<std::string>();
    r.gold_label = j.at("gold_label").get<std::string>();
    const auto& probs = j.at("emotion_probs");
    if (!probs.is_object()) throw ValidationError("emotion_probs must be an object");
    std::vector<LabelDistribution::Entry> entries;
    entries.reserve(probs.size());
    for (const auto& [label, p] : probs.items()) {
      if (!p.is_number()) throw ValidationError("emotion_probs values must be numbers");
      entries.emplace_back(label, p.get<double>());
    }
    r.emotion_probs = LabelDistribution(std::move(entries));
    r.emotion_vector = detail::json_to_floats(j.at("emotion_vector"), "emotion_vector");
    if (j.contains("semantic_vector") && !j["semantic_vector"].is_null()) {
      r.semantic_vector = detail::json_to_floats(j["semantic_vector"], "semantic_vector");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed record: ") + e.what());
  }
  return r;
}

inline nlohmann::ordered_json record_to_json(const SampleRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["text"] = r.text;
  j["gold_label"] = r.gold_label;
  nlohmann::ordered_json probs = nlohmann::ordered_json::object();
  for (const auto& [label, p] : r.emotion_probs.entries()) probs[label] = p;
  j["emotion_probs"] = std::move(probs);
  j["emotion_vector"] = r.emotion_vector;
  if (r.semantic_vector) j["semantic_vector"] = *r.semantic_vector;
  return j;
}

// Reads one record per non-blank line. Without `expected_labels` the label set
// is the distinct gold labels in order of first appearance.
inline Corpus ingest_jsonl(std::istream& in, Split split, const std::optional<LabelList>& expected_labels = {}) {
  std::vector<SampleRecord> records;
  std::unordered_set<std::string> ids;
  std::unordered_set<Label> expected;
  if (expected_labels) expected.insert(expected_labels->begin(), expected_labels->end());
  LabelList discovered;
  std::unordered_set<Label> discovered_set;
  std::optional<std::size_t> d_emo;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = ", line " + std::to_string(line_no);
    SampleRecord r;
    try {
      r = record_from_json(nlohmann::ordered_json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError("malformed line" + where + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(e.what() + where);
    }
    if (!d_emo) {
      if (r.emotion_vector.empty()) throw ValidationError("empty emotion_vector" + where);
      d_emo = r.emotion_vector.size();
    }
    validate_record(r, *d_emo, expected_labels ? &expected : nullptr, where);
    if (!ids.insert(r.id).second) throw ValidationError("duplicate id '" + r.id + "'" + where);
    if (discovered_set.insert(r.gold_label).second) discovered.push_back(r.gold_label);
    records.push_back(std::move(r));
  }
  if (!d_emo) throw ValidationError("corpus contains no records");
  return Corpus(split, std::move(records), expected_labels ? *expected_labels : discovered, *d_emo);
}

inline Corpus ingest_jsonl(const std::filesystem::path& path, Split split,
                           const std::optional<LabelList>& expected_labels = {}) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return ingest_jsonl(in, split, expected_labels);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

inline void write_jsonl(std::ostream& out, const Corpus& corpus) {
  for (const auto& r : corpus.records()) out << record_to_json(r).dump() << '\n';
}

inline void write_jsonl(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_jsonl(out, corpus);
}

// ---------------------------------------------------------------------------
// Label-space alignment

struct AlignOptions {
  // Restrict each record's distribution to the shared labels and rescale it to
  // sum to 1. A record with no mass on the shared labels becomes uniform over
  // them. When false, distributions are left exactly as ingested.
  bool renormalize = true;
};

inline Corpus align_labels(const Corpus& corpus, const LabelList& aux_labels, AlignOptions opts = {}) {
  if (aux_labels.empty()) throw ArgumentError("auxiliary label list is empty");
  const std::unordered_set<Label> aux(aux_labels.begin(), aux_labels.end());
  LabelList shared;
  for (const auto& l : corpus.label_set()) {
    if (aux.contains(l)) shared.push_back(l);
  }
  if (shared.empty()) throw ValidationError("label alignment produced an empty intersection");

  std::vector<SampleRecord> kept;
  const std::unordered_set<Label> shared_set(shared.begin(), shared.end());
  for (const auto& r : corpus.records()) {
    if (!shared_set.contains(r.gold_label)) continue;
    SampleRecord out = r;
    if (opts.renormalize) {
      std::vector<LabelDistribution::Entry> entries;
      entries.reserve(shared.size());
      double mass = 0.0;
      for (const auto& l : shared) {
        if (auto p = r.emotion_probs.find(l)) {
          entries.emplace_back(l, *p);
          mass += *p;
        }
      }
      if (mass > 0.0) {
        for (auto& e : entries) e.second /= mass;
      } else {
        entries.clear();
        for (const auto& l : shared) entries.emplace_back(l, 1.0 / static_cast<double>(shared.size()));
      }
      out.emotion_probs = LabelDistribution(std::move(entries));
    }
    kept.push_back(std::move(out));
  }
  return Corpus(corpus.split(), std::move(kept), std::move(shared), corpus.d_emo());
}

}  // namespace eicl
