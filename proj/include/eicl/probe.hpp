#pragma once

// Prototype probing: prompt pairs that differ only in the emotion slot,
// hidden-state differencing, first-principal-component category directions,
// category similarity heatmaps, and similarity-vs-probability curves.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "eicl/corpus.hpp"
#include "eicl/decision.hpp"
#include "eicl/error.hpp"
#include "eicl/matrix.hpp"
#include "eicl/prototype.hpp"
#include "eicl/tensor_file.hpp"

namespace eicl {

// The generation step whose hidden state is captured: the ':' emitted right
// after "Emotion" in the model's answer.
inline constexpr std::string_view kCriticalTimestepTag = "emotion-colon";

// ---------------------------------------------------------------------------
// Prompt pairs

struct PromptPair {
  std::string sample_id;
  Label target_label;
  Label negative_label;
  std::string positive_text;
  std::string negative_text;

  bool operator==(const PromptPair&) const = default;
};

inline std::string render_probe_prompt(std::string_view emotion, std::string_view text) {
  std::string out = "From the perspective of the emotion ";
  out += emotion;
  out += ", infer the dialogue.\nDialogue Context: ";
  out += text;
  out += "\n";
  out += kOutputFormatLine;
  return out;
}

// M samples of gold `label`, each paired with a negative label drawn uniformly
// from the rest of the corpus label set.
inline std::vector<PromptPair> build_prompt_pairs(const Corpus& corpus, const Label& label, std::size_t m,
                                                  std::uint64_t seed) {
  if (m < 1) throw ArgumentError("M must be at least 1");
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus[i].gold_label == label) pool.push_back(i);
  }
  if (pool.size() < m) {
    throw ArgumentError("insufficient samples for '" + label + "': need " + std::to_string(m) + ", have " +
                        std::to_string(pool.size()));
  }
  LabelList others;
  for (const auto& l : corpus.label_set()) {
    if (l != label) others.push_back(l);
  }
  if (others.empty()) throw ArgumentError("label set has no negative label for '" + label + "'");

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> chosen;
  chosen.reserve(m);
  std::sample(pool.begin(), pool.end(), std::back_inserter(chosen), static_cast<std::ptrdiff_t>(m), rng);
  std::uniform_int_distribution<std::size_t> pick(0, others.size() - 1);

  std::vector<PromptPair> pairs;
  pairs.reserve(m);
  for (auto idx : chosen) {
    const auto& r = corpus[idx];
    const Label& neg = others[pick(rng)];
    pairs.push_back({r.id, label, neg, render_probe_prompt(label, r.text), render_probe_prompt(neg, r.text)});
  }
  return pairs;
}

inline nlohmann::ordered_json pair_to_json(const PromptPair& p) {
  return {{"sample_id", p.sample_id},
          {"label", p.target_label},
          {"negative_label", p.negative_label},
          {"positive_text", p.positive_text},
          {"negative_text", p.negative_text}};
}

inline PromptPair pair_from_json(const nlohmann::json& j) {
  try {
    return {j.at("sample_id").get<std::string>(), j.at("label").get<std::string>(),
            j.value("negative_label", std::string{}), j.at("positive_text").get<std::string>(),
            j.at("negative_text").get<std::string>()};
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed prompt pair: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Hidden traces

struct HiddenTrace {
  std::string pair_id;
  std::size_t layers = 0;
  std::size_t dim = 0;
  std::vector<float> positive;  // layers x dim
  std::vector<float> negative;  // layers x dim
  std::string timestep_tag{kCriticalTimestepTag};

  [[nodiscard]] std::span<const float> positive_layer(std::size_t l) const { return {positive.data() + l * dim, dim}; }
  [[nodiscard]] std::span<const float> negative_layer(std::size_t l) const { return {negative.data() + l * dim, dim}; }

  void validate() const {
    if (layers == 0 || dim == 0) throw ValidationError("trace '" + pair_id + "' has an empty shape");
    if (positive.size() != layers * dim || negative.size() != layers * dim) {
      throw ValidationError("trace '" + pair_id + "' does not match shape [" + std::to_string(layers) + ", " +
                            std::to_string(dim) + "]");
    }
    for (std::size_t i = 0; i < positive.size(); ++i) {
      if (!std::isfinite(positive[i]) || !std::isfinite(negative[i])) {
        throw ValidationError("trace '" + pair_id + "' has non-finite values");
      }
    }
  }
};

// Trace files are tensors [2, L, d] (positive then negative) whose names are
// "pair_id=<id>" and "timestep=<tag>".
inline void write_trace(const std::filesystem::path& path, const HiddenTrace& t) {
  t.validate();
  std::vector<float> values(t.positive);
  values.insert(values.end(), t.negative.begin(), t.negative.end());
  const std::vector<std::size_t> shape{2, t.layers, t.dim};
  write_tensor(path, shape, values, std::vector<std::string>{"pair_id=" + t.pair_id, "timestep=" + t.timestep_tag});
}

inline HiddenTrace trace_from_tensor(const Tensor& tensor) {
  if (tensor.shape.size() != 3 || tensor.shape[0] != 2) throw ValidationError("trace tensor must have shape [2, L, d]");
  HiddenTrace t;
  t.layers = tensor.shape[1];
  t.dim = tensor.shape[2];
  const std::size_t half = t.layers * t.dim;
  t.positive.assign(tensor.values.begin(), tensor.values.begin() + static_cast<std::ptrdiff_t>(half));
  t.negative.assign(tensor.values.begin() + static_cast<std::ptrdiff_t>(half), tensor.values.end());
  t.timestep_tag.clear();
  if (tensor.names) {
    for (const auto& n : *tensor.names) {
      if (n.starts_with("pair_id=")) t.pair_id = n.substr(8);
      if (n.starts_with("timestep=")) t.timestep_tag = n.substr(9);
    }
  }
  t.validate();
  return t;
}

inline HiddenTrace read_trace(const std::filesystem::path& path) {
  HiddenTrace t = trace_from_tensor(read_tensor(path));
  if (t.pair_id.empty()) t.pair_id = path.stem().string();
  return t;
}

// ---------------------------------------------------------------------------
// First principal component

struct PcaOptions {
  std::size_t max_iterations = 200000;
  double tolerance = 1e-15;
  // Each squaring raises the eigenvalue ratio to the power two before power
  // iteration starts.
  int squarings = 4;
};

namespace detail {

inline Matrix multiply_symmetric(const Matrix& a, const Matrix& b) {
  const std::size_t n = a.rows();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

inline double trace_of(const Matrix& a) {
  double t = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) t += a(i, i);
  return t;
}

// Dominant eigenvector of a symmetric positive semi-definite matrix.
inline std::vector<double> dominant_eigenvector(const Matrix& s, const PcaOptions& opts) {
  const std::size_t n = s.rows();
  Matrix work = s;
  for (int k = 0; k < opts.squarings; ++k) {
    const double t = trace_of(work);
    if (!(t > 0.0)) break;
    for (auto& x : work.data()) x /= t;
    work = multiply_symmetric(work, work);
  }

  // Start from the column with the largest diagonal entry, nudged so it is not
  // orthogonal to the answer by construction.
  std::size_t j = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (work(i, i) > work(j, j)) j = i;
  }
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = work(i, j) + 1e-3 * work(j, j) / static_cast<double>(i + 1);
  normalize_in_place(v);

  auto iterate = [n](const Matrix& m, std::vector<double>& vec, std::size_t max_iter, double tol) {
    std::vector<double> next(n);
    for (std::size_t it = 0; it < max_iter; ++it) {
      for (std::size_t r = 0; r < n; ++r) next[r] = dot(m.row(r), vec);
      normalize_in_place(next);
      double diff = 0.0;
      for (std::size_t r = 0; r < n; ++r) diff = std::max(diff, std::abs(next[r] - vec[r]));
      vec.swap(next);
      if (diff < tol) return;
    }
  };
  iterate(work, v, opts.max_iterations, opts.tolerance);
  // Polish against the unsquared matrix.
  iterate(s, v, 64, opts.tolerance);
  return v;
}

}  // namespace detail

// Unit direction of maximum variance of the mean-centred rows, oriented so its
// dot product with the row mean is non-negative.
inline std::vector<double> pca_first_component(const Matrix& rows, const PcaOptions& opts = {}) {
  const std::size_t n = rows.rows();
  const std::size_t d = rows.cols();
  if (n < 2) throw ArgumentError("PCA needs at least two rows");
  if (d == 0) throw ArgumentError("PCA needs at least one column");

  std::vector<double> mean(d, 0.0);
  double raw_energy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double v = rows(i, j);
      if (!std::isfinite(v)) throw ArgumentError("PCA input has non-finite entries");
      mean[j] += v;
      raw_energy += v * v;
    }
  }
  for (auto& m : mean) m /= static_cast<double>(n);

  Matrix centred(n, d);
  double energy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      centred(i, j) = rows(i, j) - mean[j];
      energy += centred(i, j) * centred(i, j);
    }
  }
  if (energy <= 1e-24 * raw_energy || energy == 0.0) throw ArgumentError("rank-zero PCA input: all rows identical");

  std::vector<double> component(d, 0.0);
  if (n <= d) {
    // Eigenvector u of the n x n Gram matrix maps to X^T u.
    Matrix gram(n, n);
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a; b < n; ++b) {
        gram(a, b) = gram(b, a) = dot(centred.row(a), centred.row(b));
      }
    }
    const auto u = detail::dominant_eigenvector(gram, opts);
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t j = 0; j < d; ++j) component[j] += u[a] * centred(a, j);
    }
  } else {
    Matrix cov(d, d);
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = centred.row(i);
      for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = a; b < d; ++b) cov(a, b) += r[a] * r[b];
      }
    }
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < a; ++b) cov(a, b) = cov(b, a);
    }
    component = detail::dominant_eigenvector(cov, opts);
  }
  normalize_in_place(component);

  double orient = dot(component, mean);
  if (orient == 0.0) {
    // Mean carries no sign information; make the largest coordinate positive.
    std::size_t big = 0;
    for (std::size_t j = 1; j < d; ++j) {
      if (std::abs(component[j]) > std::abs(component[big])) big = j;
    }
    orient = component[big];
  }
  if (orient < 0.0) {
    for (auto& c : component) c = -c;
  }
  return component;
}

// ---------------------------------------------------------------------------
// Category representations

struct CategoryRepresentation {
  Label label;
  Matrix per_layer;                // L x d, unit rows
  std::vector<double> layer_mean;  // mean of the per-layer rows
  std::size_t sample_count = 0;

  [[nodiscard]] std::size_t layers() const noexcept { return per_layer.rows(); }
  [[nodiscard]] std::size_t dim() const noexcept { return per_layer.cols(); }
};

// Rows of S^l: positive minus negative hidden state at layer l, per trace.
inline Matrix layer_differences(const std::vector<HiddenTrace>& traces, std::size_t layer) {
  const std::size_t d = traces.front().dim;
  Matrix diffs(traces.size(), d);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto pos = traces[i].positive_layer(layer);
    const auto neg = traces[i].negative_layer(layer);
    for (std::size_t j = 0; j < d; ++j) diffs(i, j) = static_cast<double>(pos[j]) - static_cast<double>(neg[j]);
  }
  return diffs;
}

inline CategoryRepresentation extract_category_representation(const Label& label,
                                                              const std::vector<HiddenTrace>& traces,
                                                              const PcaOptions& opts = {}) {
  if (traces.size() < 2) throw ArgumentError("'" + label + "' needs at least two traces");
  const std::size_t layers = traces.front().layers;
  const std::size_t d = traces.front().dim;
  const std::string& tag = traces.front().timestep_tag;
  for (const auto& t : traces) {
    t.validate();
    if (t.layers != layers || t.dim != d) {
      throw ArgumentError("shape mismatch: trace '" + t.pair_id + "' is [" + std::to_string(t.layers) + ", " +
                          std::to_string(t.dim) + "], expected [" + std::to_string(layers) + ", " +
                          std::to_string(d) + "]");
    }
    if (t.timestep_tag != tag) {
      throw ArgumentError("trace '" + t.pair_id + "' was captured at timestep '" + t.timestep_tag + "', expected '" +
                          tag + "'");
    }
  }

  CategoryRepresentation rep;
  rep.label = label;
  rep.sample_count = traces.size();
  rep.per_layer = Matrix(layers, d);
  rep.layer_mean.assign(d, 0.0);
  for (std::size_t l = 0; l < layers; ++l) {
    std::vector<double> h;
    try {
      h = pca_first_component(layer_differences(traces, l), opts);
    } catch (const ArgumentError& e) {
      throw ArgumentError("'" + label + "' layer " + std::to_string(l) + ": " + e.what());
    }
    std::copy(h.begin(), h.end(), rep.per_layer.row(l).begin());
    for (std::size_t j = 0; j < d; ++j) rep.layer_mean[j] += h[j] / static_cast<double>(layers);
  }
  return rep;
}

// Representations on disk: tensor [|C|, L, d] of per-layer rows, names = labels.
inline void write_representations(const std::filesystem::path& path, const std::vector<CategoryRepresentation>& reps) {
  if (reps.empty()) throw ArgumentError("no representations to write");
  const std::size_t layers = reps.front().layers();
  const std::size_t d = reps.front().dim();
  std::vector<float> values;
  LabelList names;
  for (const auto& r : reps) {
    if (r.layers() != layers || r.dim() != d) throw ArgumentError("representations disagree in shape");
    for (double v : r.per_layer.data()) values.push_back(static_cast<float>(v));
    names.push_back(r.label);
  }
  const std::vector<std::size_t> shape{reps.size(), layers, d};
  write_tensor(path, shape, values, names);
}

enum class SimilarityScaling {
  kAffine,  // (cos + 1) / 2
  kMinMax,  // (cos - min) / (max - min) over the whole matrix
};

inline Matrix category_similarity_matrix(const std::vector<CategoryRepresentation>& reps,
                                         SimilarityScaling scaling = SimilarityScaling::kAffine) {
  const std::size_t n = reps.size();
  if (n == 0) return {};
  const std::size_t d = reps.front().layer_mean.size();
  for (const auto& r : reps) {
    if (r.layer_mean.size() != d) throw ArgumentError("representations disagree in dimension");
  }
  Matrix cos(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    cos(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double ni = norm2(reps[i].layer_mean);
      const double nj = norm2(reps[j].layer_mean);
      double c = (ni > 0.0 && nj > 0.0) ? dot(reps[i].layer_mean, reps[j].layer_mean) / (ni * nj) : 0.0;
      c = std::clamp(c, -1.0, 1.0);
      cos(i, j) = cos(j, i) = c;
    }
  }
  if (scaling == SimilarityScaling::kAffine) {
    for (auto& v : cos.data()) v = (v + 1.0) / 2.0;
    return cos;
  }
  const auto [lo, hi] = std::minmax_element(cos.data().begin(), cos.data().end());
  const double min = *lo;
  const double span = *hi - *lo;
  for (auto& v : cos.data()) v = span > 0.0 ? (v - min) / span : 1.0;
  return cos;
}

// o_h = (1/L) sum_l <query_l, H^l>.
inline double probe_score(const Matrix& query_trace, const CategoryRepresentation& rep) {
  if (query_trace.rows() != rep.layers() || query_trace.cols() != rep.dim()) {
    throw ArgumentError("shape mismatch between query trace and representation '" + rep.label + "'");
  }
  double s = 0.0;
  for (std::size_t l = 0; l < rep.layers(); ++l) s += dot(query_trace.row(l), rep.per_layer.row(l));
  return s / static_cast<double>(rep.layers());
}

struct ProbeQuery {
  Matrix trace;                       // L x d hidden state at the critical step
  std::vector<double> probabilities;  // decision distribution, same order as reps
};

struct RankProbabilityCurve {
  std::vector<double> mean_probability;  // index r-1 holds rank r
  double spearman = 0.0;
};

// Spearman correlation between rank position (1..n) and `curve`. Equal curve
// values are ranked in position order, so any non-increasing curve scores -1.
inline double rank_position_spearman(const std::vector<double>& curve) {
  const std::size_t n = curve.size();
  if (n < 2) return 0.0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return curve[a] > curve[b]; });
  // value_rank[i] = 1 for the largest value, so a decreasing curve has
  // value_rank == position and the correlation with the values is negative.
  std::vector<double> value_rank(n);
  for (std::size_t r = 0; r < n; ++r) value_rank[order[r]] = static_cast<double>(r + 1);
  double d2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double diff = static_cast<double>(i + 1) - value_rank[i];
    d2 += diff * diff;
  }
  const double nn = static_cast<double>(n);
  const double rho_rank = 1.0 - 6.0 * d2 / (nn * (nn * nn - 1.0));
  // Ranking values in descending order flips the sign relative to the values.
  return -rho_rank;
}

inline RankProbabilityCurve rank_probability_curve(const std::vector<ProbeQuery>& queries,
                                                   const std::vector<CategoryRepresentation>& reps) {
  if (reps.empty()) throw ArgumentError("no category representations");
  if (queries.empty()) throw ArgumentError("no probe queries");
  const std::size_t n = reps.size();
  RankProbabilityCurve out;
  out.mean_probability.assign(n, 0.0);
  std::vector<double> scores(n);
  std::vector<std::size_t> order(n);
  for (const auto& q : queries) {
    if (q.probabilities.size() != n) {
      throw ArgumentError("inconsistent label sets: probability vector has " + std::to_string(q.probabilities.size()) +
                          " entries for " + std::to_string(n) + " categories");
    }
    double mass = 0.0;
    for (double p : q.probabilities) mass += p;
    if (std::abs(mass - 1.0) > kProbabilitySumTolerance) throw ArgumentError("decision probabilities must sum to 1");
    for (std::size_t c = 0; c < n; ++c) scores[c] = probe_score(q.trace, reps[c]);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    for (std::size_t r = 0; r < n; ++r) out.mean_probability[r] += q.probabilities[order[r]];
  }
  for (auto& p : out.mean_probability) p /= static_cast<double>(queries.size());
  out.spearman = rank_position_spearman(out.mean_probability);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic hidden states

struct SynthProbeWorld {
  LabelList labels;
  std::vector<Matrix> directions;                // per label, L x d unit rows
  std::vector<std::vector<HiddenTrace>> traces;  // per label, M traces
  PrototypeBank bank;
  double sigma = 0.0;
};

// Label names for synthetic worlds; falls back to numbered labels past the end.
inline LabelList synthetic_labels(std::size_t n) {
  static const char* kNames[] = {
      "afraid",    "angry",       "annoyed",    "anticipating", "anxious",     "apprehensive", "ashamed",
      "caring",    "confident",   "content",    "devastated",   "disappointed", "disgusted",   "embarrassed",
      "excited",   "faithful",    "furious",    "grateful",     "guilty",      "hopeful",      "impressed",
      "jealous",   "joyful",      "lonely",     "nostalgic",    "prepared",    "proud",        "sad",
      "sentimental", "surprised", "terrified",  "trusting"};
  LabelList out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < std::size(kNames)) {
      out.emplace_back(kNames[i]);
    } else {
      out.push_back("emotion-" + std::to_string(i));
    }
  }
  return out;
}

// Per-coordinate Gaussian noise scaled so its expected norm is about
// `sigma` (relative to the unit planted directions).
inline void add_noise(std::span<double> v, double sigma, std::mt19937_64& rng) {
  if (sigma == 0.0) return;
  std::normal_distribution<double> g(0.0, sigma / std::sqrt(static_cast<double>(v.size())));
  for (auto& x : v) x += g(rng);
}

inline Matrix random_orthonormal_rows(std::size_t rows, std::size_t d, std::mt19937_64& rng) {
  if (d < rows) throw ArgumentError("cannot plant " + std::to_string(rows) + " orthogonal directions in dimension " +
                                    std::to_string(d));
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(rows, d);
  for (std::size_t i = 0; i < rows; ++i) {
    auto r = m.row(i);
    for (auto& x : r) x = g(rng);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < i; ++k) {
        const double proj = dot(r, m.row(k));
        const auto rk = m.row(k);
        for (std::size_t j = 0; j < d; ++j) r[j] -= proj * rk[j];
      }
    }
    normalize_in_place(r);
  }
  return m;
}

inline constexpr double kDefaultLayerDrift = 0.3;

// Planted per-label, per-layer unit directions g_{c,l}: a label-specific base
// direction (orthonormal across labels) nudged by `layer_drift` towards a
// fresh random direction in every layer, so directions are near-orthogonal
// across labels and correlated across layers. M traces per label and a
// prototype bank of layer means.
//   positive = context + a * g + noise,  negative = context + noise,
// with a ~ U[0.5, 1.5] per trace and the context shared by both halves.
inline SynthProbeWorld synth_generate(std::size_t num_labels, std::size_t layers, std::size_t d, std::size_t m,
                                      double sigma, std::uint64_t seed, double layer_drift = kDefaultLayerDrift) {
  if (num_labels == 0 || layers == 0 || d == 0 || m == 0) throw ArgumentError("synthetic parameters must be positive");
  if (!(sigma >= 0.0)) throw ArgumentError("sigma must be non-negative");
  if (!(layer_drift >= 0.0)) throw ArgumentError("layer drift must be non-negative");
  if (d < num_labels) {
    throw ArgumentError("d (" + std::to_string(d) + ") < number of labels (" + std::to_string(num_labels) +
                        "): cannot plant near-orthogonal directions");
  }
  std::mt19937_64 rng(seed);
  SynthProbeWorld w;
  w.sigma = sigma;
  w.labels = synthetic_labels(num_labels);
  w.directions.assign(num_labels, Matrix(layers, d));
  const Matrix base = random_orthonormal_rows(num_labels, d, rng);
  for (std::size_t l = 0; l < layers; ++l) {
    const Matrix drift = random_orthonormal_rows(num_labels, d, rng);
    for (std::size_t c = 0; c < num_labels; ++c) {
      auto row = w.directions[c].row(l);
      for (std::size_t k = 0; k < d; ++k) row[k] = base(c, k) + layer_drift * drift(c, k);
      normalize_in_place(row);
    }
  }

  std::normal_distribution<double> ctx_dist(0.0, 1.0);
  std::uniform_real_distribution<double> amp_dist(0.5, 1.5);
  w.traces.resize(num_labels);
  std::vector<double> ctx(d), pos(d), neg(d);
  for (std::size_t c = 0; c < num_labels; ++c) {
    for (std::size_t j = 0; j < m; ++j) {
      HiddenTrace t;
      t.pair_id = w.labels[c] + "-" + std::to_string(j);
      t.layers = layers;
      t.dim = d;
      t.positive.resize(layers * d);
      t.negative.resize(layers * d);
      const double amp = amp_dist(rng);
      for (std::size_t l = 0; l < layers; ++l) {
        for (auto& x : ctx) x = ctx_dist(rng);
        const auto g = w.directions[c].row(l);
        for (std::size_t k = 0; k < d; ++k) {
          pos[k] = ctx[k] + amp * g[k];
          neg[k] = ctx[k];
        }
        add_noise(pos, sigma, rng);
        add_noise(neg, sigma, rng);
        for (std::size_t k = 0; k < d; ++k) {
          t.positive[l * d + k] = static_cast<float>(pos[k]);
          t.negative[l * d + k] = static_cast<float>(neg[k]);
        }
      }
      w.traces[c].push_back(std::move(t));
    }
  }

  w.bank.labels = w.labels;
  w.bank.vectors = Matrix(num_labels, d);
  w.bank.bias.assign(num_labels, 0.0);
  for (std::size_t c = 0; c < num_labels; ++c) {
    for (std::size_t l = 0; l < layers; ++l) {
      for (std::size_t k = 0; k < d; ++k) w.bank.vectors(c, k) += w.directions[c](l, k) / static_cast<double>(layers);
    }
  }
  return w;
}

}  // namespace eicl
