#pragma once

// Exact cosine top-k retrieval over a training corpus.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "eicl/corpus.hpp"
#include "eicl/error.hpp"

namespace eicl {

struct ScoredNeighbor {
  std::string record_id;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based

  bool operator==(const ScoredNeighbor&) const = default;
};

enum class RetrievalField { kEmotion, kSemantic };

inline std::string_view field_name(RetrievalField f) {
  return f == RetrievalField::kEmotion ? "emotion" : "semantic";
}

template <class T>
double dot(std::span<const T> u, std::span<const T> v) {
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += static_cast<double>(u[i]) * static_cast<double>(v[i]);
  return acc;
}

template <class T>
double norm(std::span<const T> u) {
  return std::sqrt(dot(u, u));
}

template <class T>
double cosine_similarity(std::span<const T> u, std::span<const T> v) {
  if (u.size() != v.size()) {
    throw ArgumentError("length mismatch: " + std::to_string(u.size()) + " vs " + std::to_string(v.size()));
  }
  const double nu = norm(u);
  const double nv = norm(v);
  if (nu == 0.0 || nv == 0.0) throw ArgumentError("zero-norm vector");
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

inline double cosine_similarity(const std::vector<float>& u, const std::vector<float>& v) {
  return cosine_similarity(std::span<const float>(u), std::span<const float>(v));
}

inline double cosine_similarity(const std::vector<double>& u, const std::vector<double>& v) {
  return cosine_similarity(std::span<const double>(u), std::span<const double>(v));
}

namespace detail {

inline const std::vector<float>& retrieval_vector(const SampleRecord& r, RetrievalField field) {
  if (field == RetrievalField::kEmotion) return r.emotion_vector;
  if (!r.semantic_vector) throw ArgumentError("record '" + r.id + "' has no semantic_vector");
  return *r.semantic_vector;
}

}  // namespace detail

// The k1 train records most cosine-similar to `query`, best first. Equal
// scores keep corpus order. Zero-norm train vectors score -inf and therefore
// only appear when fewer than k1 usable records exist.
inline std::vector<ScoredNeighbor> top_k_similar(const SampleRecord& query, const Corpus& train, std::size_t k1,
                                                 RetrievalField field = RetrievalField::kEmotion) {
  if (k1 < 1) throw ArgumentError("k1 must be at least 1");
  if (train.empty()) throw ArgumentError("train corpus is empty");

  const auto& q = detail::retrieval_vector(query, field);
  const double qn = norm(std::span<const float>(q));
  if (qn == 0.0) throw ArgumentError("query '" + query.id + "' has a zero-norm " + std::string(field_name(field)) + " vector");

  struct Scored {
    double score;
    std::size_t pos;
  };
  std::vector<Scored> scored;
  scored.reserve(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto& v = detail::retrieval_vector(train[i], field);
    if (v.size() != q.size()) {
      throw ArgumentError("length mismatch between query '" + query.id + "' and '" + train[i].id + "'");
    }
    const double vn = norm(std::span<const float>(v));
    double s = -std::numeric_limits<double>::infinity();
    if (vn > 0.0) s = std::clamp(dot(std::span<const float>(q), std::span<const float>(v)) / (qn * vn), -1.0, 1.0);
    scored.push_back({s, i});
  }

  const std::size_t k = std::min(k1, scored.size());
  auto better = [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.pos < b.pos;
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(), better);

  std::vector<ScoredNeighbor> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    out.push_back({train[scored[i].pos].id, scored[i].score, i + 1});
  }
  return out;
}

}  // namespace eicl
