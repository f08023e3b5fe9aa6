#include <gtest/gtest.h>

#include <numeric>

#include "eicl/retrieval.hpp"
#include "fixtures.hpp"
#include "retrieval_oracle.hpp"

using namespace eicl;

TEST(Cosine, IdenticalVectors) {
  EXPECT_DOUBLE_EQ(cosine_similarity(std::vector<float>{1, 2, 3}, std::vector<float>{1, 2, 3}), 1.0);
}

TEST(Cosine, Orthogonal) { EXPECT_DOUBLE_EQ(cosine_similarity(std::vector<float>{1, 0}, std::vector<float>{0, 1}), 0.0); }

TEST(Cosine, FortyFiveDegrees) {
  EXPECT_NEAR(cosine_similarity(std::vector<float>{1, 1}, std::vector<float>{1, 0}), 0.70710678118654752, 1e-7);
}

TEST(Cosine, Errors) {
  EXPECT_THROW(cosine_similarity(std::vector<float>{1, 0}, std::vector<float>{1, 0, 0}), ArgumentError);
  EXPECT_THROW(cosine_similarity(std::vector<float>{0, 0}, std::vector<float>{1, 0}), ArgumentError);
}

TEST(Cosine, StaysInRange) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 1000; ++i) {
    const auto u = random_vector(7, rng);
    const double c = cosine_similarity(u, u);
    EXPECT_LE(c, 1.0);
    EXPECT_GE(cosine_similarity(u, random_vector(7, rng)), -1.0);
  }
}

TEST(TopK, FiveNeighboursByDefaultSize) {
  std::mt19937_64 rng(1);
  const auto labels = numbered_labels(3);
  std::vector<SampleRecord> train;
  for (int i = 0; i < 12; ++i) {
    train.push_back(make_record("t" + std::to_string(i), labels[i % 3], random_distribution(labels, rng),
                                random_vector(6, rng)));
  }
  const Corpus c(Split::kTrain, train, labels, 6);
  const auto q = make_record("q", "l0", random_distribution(labels, rng), random_vector(6, rng));
  const auto n = top_k_similar(q, c, 5);
  ASSERT_EQ(n.size(), 5U);
  for (std::size_t i = 0; i < n.size(); ++i) EXPECT_EQ(n[i].rank, i + 1);
}

TEST(TopK, SelfSimilarityRanksFirst) {
  std::mt19937_64 rng(2);
  const auto labels = numbered_labels(2);
  std::vector<SampleRecord> train;
  for (int i = 0; i < 30; ++i) {
    train.push_back(make_record("t" + std::to_string(i), "l0", random_distribution(labels, rng), random_vector(16, rng)));
  }
  const Corpus c(Split::kTrain, train, labels, 16);
  auto q = train[17];
  q.id = "query";
  const auto n = top_k_similar(q, c, 3);
  EXPECT_EQ(n[0].record_id, "t17");
  EXPECT_DOUBLE_EQ(n[0].score, 1.0);
}

TEST(TopK, TiesKeepCorpusOrder) {
  const LabelList labels{"a"};
  std::vector<SampleRecord> train;
  for (int i = 0; i < 6; ++i) train.push_back(make_record("t" + std::to_string(i), "a", {{"a", 1.0}}, {1, 1}));
  const Corpus c(Split::kTrain, train, labels, 2);
  const auto q = make_record("q", "a", {{"a", 1.0}}, {2, 2});
  const auto n = top_k_similar(q, c, 4);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(n[i].record_id, "t" + std::to_string(i));
}

TEST(TopK, SemanticFieldAndMissingVector) {
  const LabelList labels{"a"};
  const Corpus c(Split::kTrain,
                 {make_record("x", "a", {{"a", 1.0}}, {1, 0}, std::vector<float>{0, 1}),
                  make_record("y", "a", {{"a", 1.0}}, {0, 1}, std::vector<float>{1, 0})},
                 labels, 2);
  const auto q = make_record("q", "a", {{"a", 1.0}}, {1, 0}, std::vector<float>{1, 0});
  EXPECT_EQ(top_k_similar(q, c, 1, RetrievalField::kEmotion)[0].record_id, "x");
  EXPECT_EQ(top_k_similar(q, c, 1, RetrievalField::kSemantic)[0].record_id, "y");
  const auto bare = make_record("b", "a", {{"a", 1.0}}, {1, 0});
  EXPECT_THROW(top_k_similar(bare, c, 1, RetrievalField::kSemantic), ArgumentError);
}

TEST(TopK, ZeroNormQueryRejected) {
  const Corpus c(Split::kTrain, {make_record("x", "a", {{"a", 1.0}}, {1, 0})}, LabelList{"a"}, 2);
  EXPECT_THROW(top_k_similar(make_record("q", "a", {{"a", 1.0}}, {0, 0}), c, 1), ArgumentError);
}

TEST(TopK, KLargerThanCorpusReturnsAll) {
  const Corpus c(Split::kTrain, {make_record("x", "a", {{"a", 1.0}}, {1, 0}), make_record("y", "a", {{"a", 1.0}}, {0, 1})},
                 LabelList{"a"}, 2);
  EXPECT_EQ(top_k_similar(make_record("q", "a", {{"a", 1.0}}, {1, 1}), c, 10).size(), 2U);
}

TEST(TopK, MatchesBruteForceOnRandomCorpus) {
  std::mt19937_64 rng(200);
  const auto labels = numbered_labels(4);
  std::vector<SampleRecord> train;
  for (int i = 0; i < 200; ++i) {
    train.push_back(make_record("t" + std::to_string(i), labels[i % 4], random_distribution(labels, rng),
                                random_vector(24, rng)));
  }
  const Corpus c(Split::kTrain, train, labels, 24);
  for (int trial = 0; trial < 20; ++trial) {
    const auto q = make_record("q", "l0", random_distribution(labels, rng), random_vector(24, rng));
    const auto got = top_k_similar(q, c, 10);
    const auto want = brute_force_top_k(q.emotion_vector, c, 10);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i].record_id, want[i]);
  }
}
