#pragma once

// Similarity-matching decision model: a query representation is scored
// against one prototype vector per label and the best allowed label wins.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "eicl/corpus.hpp"
#include "eicl/error.hpp"
#include "eicl/matrix.hpp"
#include "eicl/tensor_file.hpp"

namespace eicl {

struct PrototypeBank {
  LabelList labels;
  Matrix vectors;  // |labels| x d
  std::vector<double> bias;

  [[nodiscard]] std::size_t dim() const noexcept { return vectors.cols(); }

  [[nodiscard]] std::size_t index_of(std::string_view label) const {
    auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) throw ArgumentError("label '" + std::string(label) + "' not in prototype bank");
    return static_cast<std::size_t>(it - labels.begin());
  }

  void validate() const {
    if (labels.empty()) throw ValidationError("prototype bank has no labels");
    if (vectors.rows() != labels.size() || bias.size() != labels.size()) {
      throw ValidationError("prototype bank shape does not match its label count");
    }
    std::unordered_set<std::string_view> seen;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (!seen.insert(labels[i]).second) throw ValidationError("duplicate bank label '" + labels[i] + "'");
      double n = 0.0;
      for (double v : vectors.row(i)) {
        if (!std::isfinite(v)) throw ValidationError("non-finite prototype for '" + labels[i] + "'");
        n += v * v;
      }
      if (n == 0.0) throw ValidationError("zero prototype for '" + labels[i] + "'");
      if (!std::isfinite(bias[i])) throw ValidationError("non-finite bias for '" + labels[i] + "'");
    }
  }
};

// On disk: one tensor [|C|, d+1], names = labels, column 0 the bias and
// columns 1..d the prototype.
inline void write_bank(const std::filesystem::path& path, const PrototypeBank& bank) {
  bank.validate();
  const std::size_t d = bank.dim();
  std::vector<float> values;
  values.reserve(bank.labels.size() * (d + 1));
  for (std::size_t i = 0; i < bank.labels.size(); ++i) {
    values.push_back(static_cast<float>(bank.bias[i]));
    for (double v : bank.vectors.row(i)) values.push_back(static_cast<float>(v));
  }
  const std::vector<std::size_t> shape{bank.labels.size(), d + 1};
  write_tensor(path, shape, values, bank.labels);
}

inline PrototypeBank read_bank(const std::filesystem::path& path) {
  const Tensor t = read_tensor(path);
  if (t.shape.size() != 2 || t.shape[1] < 2) throw ValidationError(path.string() + ": bank tensor must be [labels, d+1]");
  if (!t.names || t.names->size() != t.shape[0]) throw ValidationError(path.string() + ": bank tensor needs label names");
  PrototypeBank bank;
  bank.labels = *t.names;
  const std::size_t d = t.shape[1] - 1;
  bank.vectors = Matrix(t.shape[0], d);
  bank.bias.resize(t.shape[0]);
  for (std::size_t i = 0; i < t.shape[0]; ++i) {
    bank.bias[i] = t.values[i * (d + 1)];
    for (std::size_t j = 0; j < d; ++j) bank.vectors(i, j) = t.values[i * (d + 1) + 1 + j];
  }
  bank.validate();
  return bank;
}

struct PrototypeDecision {
  Label label;
  std::vector<double> scores;         // dot + bias for every bank label
  std::vector<double> probabilities;  // bank order; exactly 0 outside `allowed`
};

// score(c) = <query, prototype_c> + bias_c; softmax(score / temperature) over
// the allowed labels. temperature == 0 gives a one-hot argmax.
inline PrototypeDecision prototype_decision(std::span<const double> query, const PrototypeBank& bank,
                                            const LabelList& allowed, double temperature) {
  if (allowed.empty()) throw ArgumentError("allowed label set is empty");
  if (query.size() != bank.dim()) {
    throw ArgumentError("query dimension " + std::to_string(query.size()) + " does not match bank dimension " +
                        std::to_string(bank.dim()));
  }
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) throw ArgumentError("temperature must be >= 0");

  const std::size_t n = bank.labels.size();
  PrototypeDecision out;
  out.scores.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.scores[i] = dot(query, bank.vectors.row(i)) + bank.bias[i];
    if (!std::isfinite(out.scores[i])) throw ArgumentError("non-finite score for '" + bank.labels[i] + "'");
  }

  std::vector<bool> mask(n, false);
  for (const auto& l : allowed) mask[bank.index_of(l)] = true;

  std::size_t best = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (mask[i] && (best == n || out.scores[i] > out.scores[best])) best = i;
  }
  out.label = bank.labels[best];
  out.probabilities.assign(n, 0.0);
  if (temperature == 0.0) {
    out.probabilities[best] = 1.0;
    return out;
  }
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    out.probabilities[i] = std::exp((out.scores[i] - out.scores[best]) / temperature);
    z += out.probabilities[i];
  }
  for (auto& p : out.probabilities) p /= z;
  return out;
}

}  // namespace eicl
