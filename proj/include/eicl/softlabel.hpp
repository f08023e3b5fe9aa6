#pragma once

// Dynamic soft labels: mix a record's gold label with the auxiliary model's
// top-k2 predictions, then render retrieved neighbours as prompt examples.

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "eicl/corpus.hpp"
#include "eicl/error.hpp"
#include "eicl/retrieval.hpp"

namespace eicl {

enum class SoftLabelRule {
  // Gold weight is 1 minus the weights given to the other retained labels, so
  // the result always sums to 1.
  kNormalized,
  // Gold weight subtracts alpha times the whole top-k2 mass, including the
  // gold label's own probability when it is among the top-k2. Does not sum to
  // 1 in that case; kept for comparison runs only.
  kLiteral,
};

struct SoftLabel {
  std::vector<LabelDistribution::Entry> entries;  // descending weight, gold first on ties
  double alpha = 0.0;
  std::size_t k2 = 1;

  [[nodiscard]] double weight(std::string_view label) const {
    for (const auto& [l, w] : entries) {
      if (l == label) return w;
    }
    return 0.0;
  }
};

// Labels of `probs` ordered by descending probability; ties follow
// `label_order`, then the distribution's own order for unlisted labels.
inline std::vector<LabelDistribution::Entry> rank_predictions(const LabelDistribution& probs,
                                                              const LabelList& label_order) {
  std::vector<std::size_t> idx(probs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto order_of = [&](const Label& l) {
    auto it = std::find(label_order.begin(), label_order.end(), l);
    return static_cast<std::size_t>(it - label_order.begin());
  };
  const auto& e = probs.entries();
  std::vector<std::size_t> rank_key(probs.size());
  for (std::size_t i = 0; i < e.size(); ++i) rank_key[i] = order_of(e[i].first);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (e[a].second != e[b].second) return e[a].second > e[b].second;
    return rank_key[a] < rank_key[b];
  });
  std::vector<LabelDistribution::Entry> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(e[i]);
  return out;
}

inline SoftLabel soft_label_distribution(const SampleRecord& record, double alpha, std::size_t k2,
                                         const LabelList& label_order = {},
                                         SoftLabelRule rule = SoftLabelRule::kNormalized) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ArgumentError("alpha must lie in [0,1]");
  if (k2 < 1) throw ArgumentError("k2 must be at least 1");
  if (record.emotion_probs.empty()) throw ArgumentError("record '" + record.id + "' has an empty probability map");

  auto ranked = rank_predictions(record.emotion_probs, label_order);
  if (ranked.size() > k2) ranked.resize(k2);

  SoftLabel out;
  out.alpha = alpha;
  out.k2 = k2;

  double others = 0.0;
  double top_mass = 0.0;
  std::vector<LabelDistribution::Entry> predicted;
  for (const auto& [label, p] : ranked) {
    top_mass += p;
    if (label == record.gold_label) continue;
    const double w = alpha * p;
    others += w;
    if (w > 0.0) predicted.emplace_back(label, w);
  }
  const double gold = rule == SoftLabelRule::kNormalized ? 1.0 - others : 1.0 - alpha * top_mass;

  out.entries.emplace_back(record.gold_label, gold);
  // Stable sort keeps top-k2 order among equal predicted weights; gold sorts
  // first on ties because it is inserted first.
  out.entries.insert(out.entries.end(), predicted.begin(), predicted.end());
  std::stable_sort(out.entries.begin(), out.entries.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

enum class LabelMode { kSoft, kHard };

struct ExampleBlock {
  std::string source_id;
  std::string text;
  std::string label_string;
  std::vector<LabelDistribution::Entry> labels;  // what label_string renders
};

// "<label> (<weight>)" items joined by ", ", weights to two decimals.
inline std::string render_soft_label(const std::vector<LabelDistribution::Entry>& entries) {
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i) out += ", ";
    std::snprintf(buf, sizeof buf, "%.2f", entries[i].second);
    out += entries[i].first;
    out += " (";
    out += buf;
    out += ')';
  }
  return out;
}

inline std::vector<ExampleBlock> assemble_examples(const std::vector<ScoredNeighbor>& neighbors, const Corpus& train,
                                                   double alpha, std::size_t k2, LabelMode mode,
                                                   SoftLabelRule rule = SoftLabelRule::kNormalized) {
  std::vector<ExampleBlock> blocks;
  blocks.reserve(neighbors.size());
  for (const auto& n : neighbors) {
    const SampleRecord* r = train.find(n.record_id);
    if (r == nullptr) throw ArgumentError("dangling neighbour id '" + n.record_id + "'");
    ExampleBlock b{r->id, r->text, {}, {}};
    if (mode == LabelMode::kHard) {
      b.labels = {{r->gold_label, 1.0}};
      b.label_string = r->gold_label;
    } else {
      b.labels = soft_label_distribution(*r, alpha, k2, train.label_set(), rule).entries;
      b.label_string = render_soft_label(b.labels);
    }
    blocks.push_back(std::move(b));
  }
  return blocks;
}

}  // namespace eicl
