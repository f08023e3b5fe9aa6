#pragma once

#include <random>
#include <string>
#include <vector>

#include "eicl/corpus.hpp"

inline eicl::SampleRecord make_record(std::string id, std::string gold, eicl::LabelDistribution probs,
                                      std::vector<float> emo, std::optional<std::vector<float>> sem = std::nullopt) {
  eicl::SampleRecord r;
  r.text = "text of " + id;
  r.id = std::move(id);
  r.gold_label = std::move(gold);
  r.emotion_probs = std::move(probs);
  r.emotion_vector = std::move(emo);
  r.semantic_vector = std::move(sem);
  return r;
}

// Random simplex point over `labels`.
inline eicl::LabelDistribution random_distribution(const eicl::LabelList& labels, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> w(labels.size());
  double z = 0.0;
  for (auto& x : w) z += x = e(rng);
  std::vector<eicl::LabelDistribution::Entry> entries;
  for (std::size_t i = 0; i < labels.size(); ++i) entries.emplace_back(labels[i], w[i] / z);
  return eicl::LabelDistribution(std::move(entries));
}

inline std::vector<float> random_vector(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<float> g(0.0F, 1.0F);
  std::vector<float> v(d);
  for (auto& x : v) x = g(rng);
  return v;
}

inline eicl::LabelList numbered_labels(std::size_t n) {
  eicl::LabelList out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("l" + std::to_string(i));
  return out;
}
