#pragma once

// Candidate division, prompt construction for the three prompting modes, and
// parsing of "Emotion: <label>" responses.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "eicl/corpus.hpp"
#include "eicl/error.hpp"
#include "eicl/hash.hpp"
#include "eicl/softlabel.hpp"

namespace eicl {

struct CandidateSplit {
  LabelList primary;
  LabelList secondary;
  std::size_t k3 = 1;

  bool operator==(const CandidateSplit&) const = default;
};

// Top-k3 labels of the query's auxiliary distribution (restricted to
// `labels`, ties in `labels` order) become primary; the rest keep `labels`
// order as secondary.
inline CandidateSplit split_candidates(const SampleRecord& query, const LabelList& labels, std::size_t k3) {
  if (k3 < 1) throw ArgumentError("k3 must be at least 1");
  std::vector<std::size_t> order(labels.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<double> p(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) p[i] = query.emotion_probs.prob(labels[i]);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });

  const std::size_t n_primary = std::min(k3, labels.size());
  std::vector<bool> is_primary(labels.size(), false);
  for (std::size_t i = 0; i < n_primary; ++i) is_primary[order[i]] = true;

  CandidateSplit out;
  out.k3 = k3;
  for (std::size_t i = 0; i < n_primary; ++i) out.primary.push_back(labels[order[i]]);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!is_primary[i]) out.secondary.push_back(labels[i]);
  }
  return out;
}

enum class PromptMode { kZeroShot, kIcl, kEicl };

inline std::string_view mode_name(PromptMode m) {
  switch (m) {
    case PromptMode::kZeroShot: return "zshot";
    case PromptMode::kIcl: return "icl";
    case PromptMode::kEicl: return "eicl";
  }
  return "?";
}

inline PromptMode parse_mode(std::string_view s) {
  if (s == "zshot") return PromptMode::kZeroShot;
  if (s == "icl") return PromptMode::kIcl;
  if (s == "eicl") return PromptMode::kEicl;
  throw ArgumentError("unknown mode '" + std::string(s) + "' (expected zshot|icl|eicl)");
}

inline constexpr std::string_view kOutputFormatLine = "Output Format: 'Emotion: [the inferred emotion]'";

// Prompt wording, one template per shape. Placeholders: {{query}},
// {{examples}}, {{primary_labels}}, {{secondary_labels}}, {{all_labels}}.
struct PromptTemplates {
  std::string zshot =
      "Infer the emotion expressed in the dialogue. Choose exactly one emotion from the candidates.\n"
      "Candidate emotions: {{all_labels}}\n"
      "Dialogue Context: {{query}}\n"
      "Output Format: 'Emotion: [the inferred emotion]'\n";
  std::string icl =
      "Infer the emotion expressed in the dialogue. Choose exactly one emotion from the candidates.\n"
      "Here are some labeled examples:\n"
      "\n"
      "{{examples}}\n"
      "Candidate emotions: {{all_labels}}\n"
      "Dialogue Context: {{query}}\n"
      "Output Format: 'Emotion: [the inferred emotion]'\n";
  std::string eicl =
      "Infer the emotion expressed in the dialogue. Choose exactly one emotion.\n"
      "Here are some labeled examples. Each example lists its emotions with their weights:\n"
      "\n"
      "{{examples}}\n"
      "First consider only the primary candidate emotions: {{primary_labels}}\n"
      "Only if none of the primary candidates fits, consider the secondary candidate emotions: "
      "{{secondary_labels}}\n"
      "Dialogue Context: {{query}}\n"
      "Output Format: 'Emotion: [the inferred emotion]'\n";
  // Used for eicl when every label is primary (no exclusion stage).
  std::string eicl_single =
      "Infer the emotion expressed in the dialogue. Choose exactly one emotion.\n"
      "Here are some labeled examples. Each example lists its emotions with their weights:\n"
      "\n"
      "{{examples}}\n"
      "Candidate emotions: {{all_labels}}\n"
      "Dialogue Context: {{query}}\n"
      "Output Format: 'Emotion: [the inferred emotion]'\n";
  // When false the secondary list is summarised instead of enumerated.
  bool enumerate_secondary = true;

  [[nodiscard]] std::string fingerprint() const {
    Fnv1a64 h;
    for (const auto* t : {&zshot, &icl, &eicl, &eicl_single}) h.update(*t).update_byte(0);
    h.update_byte(enumerate_secondary ? 1 : 0);
    return to_hex(h.digest());
  }
};

// Overrides built-in wording with any of zshot.txt, icl.txt, eicl.txt,
// eicl_single.txt found in `dir`.
inline PromptTemplates load_templates(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error("template directory not found: " + dir.string());
  PromptTemplates t;
  auto load = [&](const char* name, std::string& slot) {
    const auto path = dir / name;
    if (!std::filesystem::exists(path)) return;
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    slot = ss.str();
  };
  load("zshot.txt", t.zshot);
  load("icl.txt", t.icl);
  load("eicl.txt", t.eicl);
  load("eicl_single.txt", t.eicl_single);
  return t;
}

struct PromptBundle {
  PromptMode mode = PromptMode::kZeroShot;
  std::string text;
  LabelList expected_labels;
  std::optional<CandidateSplit> split;
  // Structured inputs the text was rendered from.
  std::string query_text;
  std::vector<ExampleBlock> examples;

  // Replay key: FNV-1a over mode name, a NUL byte, then the prompt text.
  [[nodiscard]] std::string hash() const {
    return to_hex(Fnv1a64{}.update(mode_name(mode)).update_byte(0).update(text).digest());
  }
};

inline std::string join_labels(const LabelList& labels) {
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) out += ", ";
    out += labels[i];
  }
  return out;
}

inline std::string render_examples(const std::vector<ExampleBlock>& examples) {
  std::string out;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (i) out += "\n";
    out += "Example " + std::to_string(i + 1) + ":\n";
    out += "Dialogue Context: " + examples[i].text + "\n";
    out += "Emotion: " + examples[i].label_string + "\n";
  }
  return out;
}

namespace detail {

// Single pass over the template, so placeholder-like text inside substituted
// values is never expanded. Unknown placeholders are left verbatim.
inline std::string render_template(std::string_view tmpl,
                                   const std::vector<std::pair<std::string_view, std::string>>& values) {
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) break;
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    out.append(tmpl.substr(pos, open - pos));
    const auto key = tmpl.substr(open + 2, close - open - 2);
    auto it = std::find_if(values.begin(), values.end(), [&](const auto& kv) { return kv.first == key; });
    if (it != values.end()) {
      out.append(it->second);
    } else {
      out.append(tmpl.substr(open, close + 2 - open));
    }
    pos = close + 2;
  }
  out.append(tmpl.substr(std::min(pos, tmpl.size())));
  return out;
}

}  // namespace detail

inline PromptBundle build_prompt(const SampleRecord& query, const LabelList& labels,
                                 const std::vector<ExampleBlock>& examples,
                                 const std::optional<CandidateSplit>& split, PromptMode mode,
                                 const PromptTemplates& templates = {}) {
  if (labels.empty()) throw ArgumentError("label set is empty");
  const std::string* tmpl = nullptr;
  switch (mode) {
    case PromptMode::kZeroShot:
      if (!examples.empty()) throw ArgumentError("zshot prompts take no examples");
      if (split) throw ArgumentError("zshot prompts take no candidate split");
      tmpl = &templates.zshot;
      break;
    case PromptMode::kIcl:
      if (examples.empty()) throw ArgumentError("icl prompts need at least one example");
      if (split) throw ArgumentError("candidate split only valid for eicl");
      tmpl = &templates.icl;
      break;
    case PromptMode::kEicl:
      if (examples.empty()) throw ArgumentError("eicl prompts need at least one example");
      if (!split) throw ArgumentError("eicl prompts need a candidate split");
      tmpl = split->secondary.empty() ? &templates.eicl_single : &templates.eicl;
      break;
  }

  std::vector<std::pair<std::string_view, std::string>> values{
      {"query", query.text},
      {"examples", render_examples(examples)},
      {"all_labels", join_labels(labels)},
  };
  if (split) {
    values.emplace_back("primary_labels", join_labels(split->primary));
    values.emplace_back("secondary_labels", templates.enumerate_secondary ? join_labels(split->secondary)
                                                                          : std::string("all remaining emotions"));
  }
  std::string text = detail::render_template(*tmpl, values);

  PromptBundle b;
  b.mode = mode;
  b.text = std::move(text);
  b.expected_labels = labels;
  b.split = split;
  b.query_text = query.text;
  b.examples = examples;
  return b;
}

// ---------------------------------------------------------------------------
// Response parsing

enum class ParseStatus { kOk, kNoEmotionLine, kUnknownLabel, kAmbiguousLabel };

inline std::string_view parse_status_name(ParseStatus s) {
  switch (s) {
    case ParseStatus::kOk: return "ok";
    case ParseStatus::kNoEmotionLine: return "no_emotion_line";
    case ParseStatus::kUnknownLabel: return "unknown_label";
    case ParseStatus::kAmbiguousLabel: return "ambiguous_label";
  }
  return "?";
}

inline ParseStatus parse_status_from_name(std::string_view s) {
  for (auto st : {ParseStatus::kOk, ParseStatus::kNoEmotionLine, ParseStatus::kUnknownLabel,
                  ParseStatus::kAmbiguousLabel}) {
    if (parse_status_name(st) == s) return st;
  }
  throw ValidationError("unknown parse status '" + std::string(s) + "'");
}

struct ParseOutcome {
  ParseStatus status = ParseStatus::kNoEmotionLine;
  std::optional<Label> label;
  std::string detail;
};

class ResponseParseError : public Error {
 public:
  ResponseParseError(ParseStatus status, const std::string& what) : Error(what), status_(status) {}
  [[nodiscard]] ParseStatus status() const noexcept { return status_; }

 private:
  ParseStatus status_;
};

struct ParseOptions {
  // Accept text before the marker on the same line ("Sure! Emotion: sad").
  bool allow_prefix_chatter = true;
  // Fall back to unique substring matching when no label matches exactly.
  bool allow_substring = true;
};

// Lowercase, punctuation stripped (hyphen and underscore kept), whitespace
// collapsed and trimmed.
inline std::string normalize_label_text(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (std::ispunct(c) && c != '-' && c != '_') {
      pending_space = pending_space || !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

namespace detail {

inline bool contains_word(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return false;
  std::size_t pos = 0;
  while ((pos = haystack.find(needle, pos)) != std::string_view::npos) {
    const bool left = pos == 0 || haystack[pos - 1] == ' ';
    const std::size_t end = pos + needle.size();
    const bool right = end == haystack.size() || haystack[end] == ' ';
    if (left && right) return true;
    ++pos;
  }
  return false;
}

}  // namespace detail

inline ParseOutcome try_parse_emotion_response(std::string_view raw, const LabelList& labels,
                                               const ParseOptions& opts = {}) {
  static const std::regex kLoose(R"((?:^|[^A-Za-z])emotion\s*:\s*(.*)$)", std::regex::icase);
  static const std::regex kStrict(R"(^\s*emotion\s*:\s*(.*)$)", std::regex::icase);
  const std::regex& pattern = opts.allow_prefix_chatter ? kLoose : kStrict;

  std::optional<std::string> found;
  std::istringstream lines{std::string(raw)};
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::smatch m;
    if (std::regex_search(line, m, pattern)) {
      found = m[1].str();
      break;
    }
  }
  if (!found) return {ParseStatus::kNoEmotionLine, std::nullopt, "no 'Emotion:' line in response"};

  const std::string x = normalize_label_text(*found);
  if (x.empty()) return {ParseStatus::kUnknownLabel, std::nullopt, "empty emotion value"};

  for (const auto& l : labels) {
    if (normalize_label_text(l) == x) return {ParseStatus::kOk, l, {}};
  }
  if (opts.allow_substring) {
    std::vector<Label> hits;
    for (const auto& l : labels) {
      const std::string nl = normalize_label_text(l);
      if (detail::contains_word(x, nl) || (x.size() >= 3 && nl.find(x) != std::string::npos)) hits.push_back(l);
    }
    if (hits.size() == 1) return {ParseStatus::kOk, hits.front(), {}};
    if (hits.size() > 1) {
      return {ParseStatus::kAmbiguousLabel, std::nullopt, "'" + x + "' matches " + join_labels(hits)};
    }
  }
  return {ParseStatus::kUnknownLabel, std::nullopt, "'" + x + "' is not a candidate label"};
}

inline Label parse_emotion_response(std::string_view raw, const LabelList& labels, const ParseOptions& opts = {}) {
  auto r = try_parse_emotion_response(raw, labels, opts);
  if (r.status != ParseStatus::kOk) {
    const char* kind = r.status == ParseStatus::kNoEmotionLine    ? "NoEmotionLine"
                       : r.status == ParseStatus::kUnknownLabel ? "UnknownLabel"
                                                                : "AmbiguousLabel";
    throw ResponseParseError(r.status, std::string(kind) + ": " + r.detail);
  }
  return *r.label;
}

}  // namespace eicl
