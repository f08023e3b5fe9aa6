#pragma once

// Desk-scale synthetic worlds: probe queries with known decision
// probabilities, and a labelled benchmark with an auxiliary emotion model and
// a miscalibrated similarity-matching LLM stand-in.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "eicl/corpus.hpp"
#include "eicl/error.hpp"
#include "eicl/llmclient.hpp"
#include "eicl/matrix.hpp"
#include "eicl/probe.hpp"
#include "eicl/prototype.hpp"

namespace eicl {

namespace detail {

inline std::string numbered(std::string_view prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05zu", i);
  return std::string(prefix) + buf;
}

inline std::vector<double> softmax(const std::vector<double>& x, double sharpness) {
  double top = x.front();
  for (double v : x) top = std::max(top, v);
  std::vector<double> out(x.size());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) z += out[i] = std::exp(sharpness * (x[i] - top));
  for (auto& v : out) v /= z;
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Probe queries

struct SynthProbeQuery {
  std::string id;
  Label gold;
  Matrix trace;  // L x d
};

// Query hidden state at layer l: a * g_{c,l} + noise, c uniform, a ~ U[0.5, 1.5].
inline std::vector<SynthProbeQuery> synth_probe_queries(const SynthProbeWorld& world, std::size_t count, double sigma,
                                                        std::uint64_t seed) {
  if (world.labels.empty()) throw ArgumentError("synthetic world has no labels");
  if (!(sigma >= 0.0)) throw ArgumentError("sigma must be non-negative");
  const std::size_t layers = world.directions.front().rows();
  const std::size_t d = world.directions.front().cols();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, world.labels.size() - 1);
  std::uniform_real_distribution<double> amp_dist(0.5, 1.5);
  std::vector<SynthProbeQuery> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t c = pick(rng);
    const double amp = amp_dist(rng);
    SynthProbeQuery q{detail::numbered("query-", i), world.labels[c], Matrix(layers, d)};
    for (std::size_t l = 0; l < layers; ++l) {
      auto row = q.trace.row(l);
      const auto g = world.directions[c].row(l);
      for (std::size_t k = 0; k < d; ++k) row[k] = amp * g[k];
      add_noise(row, sigma, rng);
    }
    out.push_back(std::move(q));
  }
  return out;
}

// The decision a similarity-matching model makes from the layer-mean reading.
inline PrototypeDecision synth_probe_decision(const Matrix& trace, const PrototypeBank& bank, double temperature) {
  std::vector<double> mean(trace.cols(), 0.0);
  for (std::size_t l = 0; l < trace.rows(); ++l) {
    const auto row = trace.row(l);
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += row[k] / static_cast<double>(trace.rows());
  }
  return prototype_decision(mean, bank, bank.labels, temperature);
}

// ---------------------------------------------------------------------------
// Labelled benchmark
//
// Every sample has a latent affect vector u over the labels: a spike on its
// emotion, some of the paired "confusable" emotion, and isotropic noise.
//   auxiliary model: reads u with each emotion partly blurred into its pair,
//                    probs = softmax(sharpness * reading), vector = A reading
//   semantic vector: topic direction + semantic_affect * B u + nuisance
//   LLM reading:     sum_c (u_c + llm noise) * P_c, bank biases favour a few labels
// A fraction of training golds are replaced by a random other label.

struct BenchmarkParams {
  std::size_t num_labels = 10;
  std::size_t llm_dim = 64;
  std::size_t emo_dim = 32;
  std::size_t sem_dim = 32;
  std::size_t train_per_label = 40;
  std::size_t test_size = 400;
  double latent_noise = 0.35;
  double pair_mix = 0.6;  // upper bound of the paired-emotion share
  double aux_noise = 0.3;
  double aux_pair_blur = 0.4;  // how far the auxiliary model mixes each emotion with its pair
  double aux_sharpness = 4.0;
  double llm_noise = 0.45;
  double label_noise = 0.2;
  std::size_t topics = 8;
  double semantic_affect = 0.35;
  double semantic_noise = 0.6;  // per-sample nuisance in the semantic vector
  std::size_t attractors = 2;
  double attractor_bias = 0.45;
  double example_gain = 1.0;
  double fit_margin = 0.6;
  double temperature = 0.0;
  std::uint64_t seed = 7;

  void validate() const {
    if (num_labels < 2) throw ArgumentError("benchmark needs at least two labels");
    if (llm_dim < num_labels || emo_dim < num_labels || sem_dim < num_labels) {
      throw ArgumentError("benchmark dimensions must be at least the number of labels");
    }
    if (train_per_label == 0 || test_size == 0 || topics == 0) throw ArgumentError("benchmark sizes must be positive");
    if (attractors > num_labels) throw ArgumentError("more attractors than labels");
    if (!(label_noise >= 0.0 && label_noise <= 1.0)) throw ArgumentError("label_noise must lie in [0,1]");
  }
};

struct SynthBenchmark {
  Corpus train;
  Corpus test;
  PrototypeBank bank;
  std::unordered_map<std::string, std::vector<double>> perception;
  PrototypeSimSettings sim;  // paths left empty

  [[nodiscard]] PrototypeSimProvider provider() const { return PrototypeSimProvider(bank, perception, sim); }
};

// Emotions are paired (0,1), (2,3), ...; an odd last label pairs with itself.
inline std::size_t paired_label(std::size_t c, std::size_t n) {
  const std::size_t p = c ^ 1U;
  return p < n ? p : c;
}

inline SynthBenchmark synth_benchmark(const BenchmarkParams& params) {
  params.validate();
  const std::size_t n = params.num_labels;
  std::mt19937_64 rng(params.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const LabelList labels = synthetic_labels(n);
  const Matrix prototypes = random_orthonormal_rows(n, params.llm_dim, rng);
  const Matrix aux_basis = random_orthonormal_rows(n, params.emo_dim, rng);
  const Matrix sem_basis = random_orthonormal_rows(n, params.sem_dim, rng);
  Matrix topic_dirs(params.topics, params.sem_dim);
  for (auto& v : topic_dirs.data()) v = gauss(rng);
  for (std::size_t t = 0; t < params.topics; ++t) normalize_in_place(topic_dirs.row(t));

  SynthBenchmark out{Corpus(Split::kTrain, {}, labels, params.emo_dim), Corpus(Split::kTest, {}, labels, params.emo_dim),
                     PrototypeBank{labels, prototypes, std::vector<double>(n, 0.0)}, {}, {}};
  // Attractors: the labels the model over-predicts.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t a = 0; a < params.attractors; ++a) out.bank.bias[order[a]] = params.attractor_bias;
  out.sim.temperature = params.temperature;
  out.sim.example_gain = params.example_gain;
  out.sim.fit_margin = params.fit_margin;

  auto make = [&](std::string id, std::string text, std::size_t gold) {
    std::vector<double> u(n);
    for (auto& x : u) x = params.latent_noise * gauss(rng);
    u[gold] += 1.0;
    const std::size_t mate = paired_label(gold, n);
    if (mate != gold) u[mate] += params.pair_mix * unit(rng);

    std::vector<double> aux(n);
    for (std::size_t c = 0; c < n; ++c) {
      aux[c] = u[c] + params.aux_pair_blur * (u[paired_label(c, n)] - u[c]) + params.aux_noise * gauss(rng);
    }
    const auto probs = detail::softmax(aux, params.aux_sharpness);

    SampleRecord r;
    r.id = std::move(id);
    r.text = std::move(text);
    r.gold_label = labels[gold];
    std::vector<LabelDistribution::Entry> entries;
    for (std::size_t c = 0; c < n; ++c) entries.emplace_back(labels[c], probs[c]);
    r.emotion_probs = LabelDistribution(std::move(entries));
    r.emotion_vector.assign(params.emo_dim, 0.0F);
    for (std::size_t c = 0; c < n; ++c) {
      for (std::size_t k = 0; k < params.emo_dim; ++k) r.emotion_vector[k] += static_cast<float>(aux[c] * aux_basis(c, k));
    }
    std::vector<float> sem(params.sem_dim);
    const auto topic = topic_dirs.row(std::uniform_int_distribution<std::size_t>(0, params.topics - 1)(rng));
    for (std::size_t k = 0; k < params.sem_dim; ++k) {
      double v = topic[k] + params.semantic_noise * gauss(rng) / std::sqrt(static_cast<double>(params.sem_dim));
      for (std::size_t c = 0; c < n; ++c) v += params.semantic_affect * u[c] * sem_basis(c, k);
      sem[k] = static_cast<float>(v);
    }
    r.semantic_vector = std::move(sem);

    std::vector<double> h(params.llm_dim, 0.0);
    for (std::size_t c = 0; c < n; ++c) {
      const double w = u[c] + params.llm_noise * gauss(rng);
      for (std::size_t k = 0; k < params.llm_dim; ++k) h[k] += w * prototypes(c, k);
    }
    out.perception.emplace(r.text, std::move(h));
    return r;
  };

  std::vector<SampleRecord> train;
  for (std::size_t i = 0; i < n * params.train_per_label; ++i) {
    const std::size_t gold = i % n;
    auto r = make(detail::numbered("train-", i), "train utterance " + std::to_string(i), gold);
    if (unit(rng) < params.label_noise) {
      r.gold_label = labels[(gold + 1 + std::uniform_int_distribution<std::size_t>(0, n - 2)(rng)) % n];
    }
    train.push_back(std::move(r));
  }
  std::vector<SampleRecord> test;
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  for (std::size_t i = 0; i < params.test_size; ++i) {
    test.push_back(make(detail::numbered("test-", i), "test utterance " + std::to_string(i), pick(rng)));
  }
  out.train = Corpus(Split::kTrain, std::move(train), labels, params.emo_dim);
  out.test = Corpus(Split::kTest, std::move(test), labels, params.emo_dim);
  return out;
}

}  // namespace eicl
