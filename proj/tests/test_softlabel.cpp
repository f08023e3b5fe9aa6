#include <gtest/gtest.h>

#include "eicl/softlabel.hpp"
#include "fixtures.hpp"

using namespace eicl;

namespace {

using Entries = std::vector<LabelDistribution::Entry>;

void expect_entries(const Entries& got, const Entries& want) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_EQ(got[i].first, want[i].first) << "entry " << i;
    EXPECT_NEAR(got[i].second, want[i].second, 1e-12) << "entry " << i;
  }
}

}  // namespace

TEST(SoftLabel, AlphaZeroIsHardLabel) {
  const auto r = make_record("1", "sad", {{"joyful", 0.5}, {"sad", 0.3}, {"angry", 0.2}}, {1});
  expect_entries(soft_label_distribution(r, 0.0, 3).entries, {{"sad", 1.0}});
}

TEST(SoftLabel, GoldInsideTopK) {
  const auto r = make_record("1", "sad", {{"joyful", 0.5}, {"sad", 0.3}, {"angry", 0.2}}, {1});
  expect_entries(soft_label_distribution(r, 0.2, 2).entries, {{"sad", 0.9}, {"joyful", 0.1}});
}

TEST(SoftLabel, GoldOutsideTopK) {
  const auto r = make_record("1", "proud", {{"joyful", 0.6}, {"sad", 0.4}, {"proud", 0.0}}, {1});
  expect_entries(soft_label_distribution(r, 0.2, 2).entries, {{"proud", 0.8}, {"joyful", 0.12}, {"sad", 0.08}});
}

TEST(SoftLabel, LiteralRuleSubtractsWholeTopMass) {
  const auto r = make_record("1", "sad", {{"joyful", 0.5}, {"sad", 0.3}, {"angry", 0.2}}, {1});
  const auto s = soft_label_distribution(r, 0.2, 2, {}, SoftLabelRule::kLiteral);
  EXPECT_NEAR(s.weight("sad"), 1.0 - 0.2 * 0.8, 1e-12);
  EXPECT_NEAR(s.weight("joyful"), 0.1, 1e-12);
}

TEST(SoftLabel, ArgumentChecks) {
  const auto r = make_record("1", "sad", {{"sad", 1.0}}, {1});
  EXPECT_THROW(soft_label_distribution(r, -0.1, 1), ArgumentError);
  EXPECT_THROW(soft_label_distribution(r, 1.5, 1), ArgumentError);
  EXPECT_THROW(soft_label_distribution(r, 0.2, 0), ArgumentError);
  auto empty = r;
  empty.emotion_probs = {};
  EXPECT_THROW(soft_label_distribution(empty, 0.2, 1), ArgumentError);
}

TEST(SoftLabel, TiesBrokenByLabelOrder) {
  const auto r = make_record("1", "g", {{"b", 0.4}, {"a", 0.4}, {"g", 0.2}}, {1});
  const auto s = soft_label_distribution(r, 0.5, 1, LabelList{"a", "b", "g"});
  expect_entries(s.entries, {{"g", 0.8}, {"a", 0.2}});
}

TEST(SoftLabel, RandomisedInvariants) {
  std::mt19937_64 rng(11);
  const auto labels = numbered_labels(9);
  std::uniform_real_distribution<double> alpha_dist(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> k2_dist(1, 12);
  for (int i = 0; i < 2000; ++i) {
    const auto r = make_record("r", labels[i % 9], random_distribution(labels, rng), {1});
    const double a = alpha_dist(rng);
    const std::size_t k2 = k2_dist(rng);
    const auto s = soft_label_distribution(r, a, k2);
    double sum = 0.0;
    for (const auto& [l, w] : s.entries) {
      EXPECT_GE(w, 0.0);
      sum += w;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
    EXPECT_GT(s.weight(r.gold_label), 0.0);
    for (std::size_t j = 1; j < s.entries.size(); ++j) EXPECT_GE(s.entries[j - 1].second, s.entries[j].second);
    EXPECT_GE(s.weight(r.gold_label) + 1e-15, soft_label_distribution(r, std::min(1.0, a + 0.1), k2).weight(r.gold_label));
  }
}

TEST(Render, TwoDecimals) {
  EXPECT_EQ(render_soft_label({{"sad", 0.9}, {"joyful", 0.1}}), "sad (0.90), joyful (0.10)");
  EXPECT_EQ(render_soft_label({{"proud", 0.8}, {"joyful", 0.12}, {"sad", 0.08}}), "proud (0.80), joyful (0.12), sad (0.08)");
}

TEST(Assemble, HardAndSoftModes) {
  const Corpus train(Split::kTrain,
                     {make_record("n1", "sad", {{"joyful", 0.5}, {"sad", 0.3}, {"angry", 0.2}}, {1}),
                      make_record("n2", "joyful", {{"joyful", 1.0}}, {1})},
                     LabelList{"sad", "joyful", "angry"}, 1);
  const std::vector<ScoredNeighbor> neighbors{{"n1", 0.9, 1}, {"n2", 0.8, 2}};
  const auto hard = assemble_examples(neighbors, train, 0.2, 2, LabelMode::kHard);
  EXPECT_EQ(hard[0].label_string, "sad");
  const auto soft = assemble_examples(neighbors, train, 0.2, 2, LabelMode::kSoft);
  EXPECT_EQ(soft[0].label_string, "sad (0.90), joyful (0.10)");
  EXPECT_EQ(soft[1].label_string, "joyful (1.00)");
  EXPECT_EQ(soft[0].text, "text of n1");
}

TEST(Assemble, PreservesRankOrder) {
  std::vector<SampleRecord> records;
  std::vector<ScoredNeighbor> neighbors;
  for (int i = 0; i < 5; ++i) {
    records.push_back(make_record("n" + std::to_string(i), "a", {{"a", 1.0}}, {1}));
  }
  for (int i = 4; i >= 0; --i) neighbors.push_back({"n" + std::to_string(i), 0.1 * i, neighbors.size() + 1});
  const Corpus train(Split::kTrain, records, LabelList{"a"}, 1);
  const auto blocks = assemble_examples(neighbors, train, 0.2, 2, LabelMode::kSoft);
  ASSERT_EQ(blocks.size(), 5U);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(blocks[i].source_id, neighbors[i].record_id);
}

TEST(Assemble, DanglingIdIsError) {
  const Corpus train(Split::kTrain, {make_record("n1", "a", {{"a", 1.0}}, {1})}, LabelList{"a"}, 1);
  EXPECT_THROW(assemble_examples({{"ghost", 1.0, 1}}, train, 0.2, 2, LabelMode::kSoft), ArgumentError);
}
