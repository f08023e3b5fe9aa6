#include <gtest/gtest.h>

#include <set>

#include "eicl/decision.hpp"
#include "fixtures.hpp"
#include "golden_prompt.hpp"
#include "temp_dir.hpp"

using namespace eicl;

TEST(Split, ArgmaxForKOne) {
  const auto q = make_record("q", "a", {{"a", 0.5}, {"b", 0.3}, {"c", 0.2}}, {1});
  const auto s = split_candidates(q, {"a", "b", "c"}, 1);
  EXPECT_EQ(s.primary, (LabelList{"a"}));
  EXPECT_EQ(s.secondary, (LabelList{"b", "c"}));
}

TEST(Split, KEqualsAllLabels) {
  const auto q = make_record("q", "a", {{"a", 0.2}, {"b", 0.3}, {"c", 0.5}}, {1});
  const auto s = split_candidates(q, {"a", "b", "c"}, 3);
  EXPECT_EQ(s.primary.size(), 3U);
  EXPECT_TRUE(s.secondary.empty());
  EXPECT_EQ(split_candidates(q, {"a", "b", "c"}, 7).primary.size(), 3U);
}

TEST(Split, KZeroRejected) {
  const auto q = make_record("q", "a", {{"a", 1.0}}, {1});
  EXPECT_THROW(split_candidates(q, {"a"}, 0), ArgumentError);
}

TEST(Split, LabelsMissingFromDistributionCountAsZero) {
  const auto q = make_record("q", "a", {{"b", 1.0}}, {1});
  const auto s = split_candidates(q, {"a", "b", "c"}, 2);
  EXPECT_EQ(s.primary, (LabelList{"b", "a"}));
  EXPECT_EQ(s.secondary, (LabelList{"c"}));
}

TEST(Split, PartitionPropertyAgainstBruteForce) {
  std::mt19937_64 rng(19);
  const auto labels = numbered_labels(19);
  for (int trial = 0; trial < 500; ++trial) {
    const auto q = make_record("q", "l0", random_distribution(labels, rng), {1});
    const std::size_t k3 = 1 + static_cast<std::size_t>(trial) % labels.size();
    const auto s = split_candidates(q, labels, k3);
    ASSERT_EQ(s.primary.size(), std::min(k3, labels.size()));
    std::set<Label> p(s.primary.begin(), s.primary.end());
    std::set<Label> sec(s.secondary.begin(), s.secondary.end());
    for (const auto& l : p) EXPECT_FALSE(sec.count(l));
    std::set<Label> all = p;
    all.insert(sec.begin(), sec.end());
    EXPECT_EQ(all, std::set<Label>(labels.begin(), labels.end()));
    // Brute force: sort all (prob, label index) pairs.
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t i = 0; i < labels.size(); ++i) ranked.emplace_back(-q.emotion_probs.prob(labels[i]), i);
    std::sort(ranked.begin(), ranked.end());
    for (std::size_t i = 0; i < s.primary.size(); ++i) EXPECT_EQ(s.primary[i], labels[ranked[i].second]);
  }
}

TEST(Prompt, ZeroShotShape) {
  SampleRecord q = make_record("q", "sad", {{"sad", 1.0}}, {1});
  q.text = "I lost my keys";
  const auto b = build_prompt(q, {"sad", "joyful"}, {}, std::nullopt, PromptMode::kZeroShot);
  EXPECT_EQ(b.text.find("Example"), std::string::npos);
  EXPECT_NE(b.text.find("I lost my keys"), std::string::npos);
  std::string trimmed = b.text;
  while (!trimmed.empty() && trimmed.back() == '\n') trimmed.pop_back();
  EXPECT_TRUE(trimmed.ends_with(kOutputFormatLine));
}

TEST(Prompt, Deterministic) {
  const auto q = make_record("q", "sad", {{"sad", 1.0}}, {1});
  const std::vector<ExampleBlock> ex{{"n1", "hello", "sad (1.00)", {{"sad", 1.0}}}};
  const CandidateSplit split{{"sad"}, {"joyful"}, 1};
  const auto a = build_prompt(q, {"sad", "joyful"}, ex, split, PromptMode::kEicl);
  const auto b = build_prompt(q, {"sad", "joyful"}, ex, split, PromptMode::kEicl);
  EXPECT_EQ(a.text, b.text);
  EXPECT_EQ(a.hash(), b.hash());
}

TEST(Prompt, EiclGoldenFile) {
  const auto b = golden_eicl_prompt();
  const std::string want = read_text(std::filesystem::path(EICL_SOURCE_DIR) / "tests/golden/eicl_prompt.txt");
  EXPECT_EQ(b.text, want);
  ASSERT_TRUE(b.split.has_value());
  EXPECT_EQ(b.split->primary.size(), 4U);
  EXPECT_EQ(b.split->secondary.size(), 15U);
  for (int i = 1; i <= 5; ++i) EXPECT_NE(b.text.find("Example " + std::to_string(i) + ":"), std::string::npos);
  EXPECT_EQ(b.text.find("Example 6:"), std::string::npos);
}

TEST(Prompt, EiclWithoutSecondaryUsesSingleList) {
  const auto q = make_record("q", "a", {{"a", 0.7}, {"b", 0.3}}, {1});
  const std::vector<ExampleBlock> ex{{"n", "t", "a (1.00)", {{"a", 1.0}}}};
  const auto b = build_prompt(q, {"a", "b"}, ex, split_candidates(q, {"a", "b"}, 2), PromptMode::kEicl);
  EXPECT_EQ(b.text.find("secondary"), std::string::npos);
  EXPECT_NE(b.text.find("Candidate emotions: a, b"), std::string::npos);
}

TEST(Prompt, ModeArgumentChecks) {
  const auto q = make_record("q", "a", {{"a", 1.0}}, {1});
  const std::vector<ExampleBlock> ex{{"n", "t", "a", {{"a", 1.0}}}};
  const CandidateSplit split{{"a"}, {}, 1};
  EXPECT_THROW(build_prompt(q, {"a"}, ex, std::nullopt, PromptMode::kZeroShot), ArgumentError);
  EXPECT_THROW(build_prompt(q, {"a"}, {}, std::nullopt, PromptMode::kIcl), ArgumentError);
  EXPECT_THROW(build_prompt(q, {"a"}, ex, split, PromptMode::kIcl), ArgumentError);
  EXPECT_THROW(build_prompt(q, {"a"}, ex, std::nullopt, PromptMode::kEicl), ArgumentError);
  EXPECT_THROW(build_prompt(q, {}, {}, std::nullopt, PromptMode::kZeroShot), ArgumentError);
}

TEST(Prompt, PlaceholdersInsideValuesAreNotExpanded) {
  SampleRecord q = make_record("q", "a", {{"a", 1.0}}, {1});
  q.text = "literal {{all_labels}} here";
  const auto b = build_prompt(q, {"a", "b"}, {}, std::nullopt, PromptMode::kZeroShot);
  EXPECT_NE(b.text.find("literal {{all_labels}} here"), std::string::npos);
}

TEST(Prompt, ShippedTemplateFilesMatchBuiltIns) {
  const PromptTemplates builtin;
  const auto loaded = load_templates(std::filesystem::path(EICL_SOURCE_DIR) / "templates");
  EXPECT_EQ(loaded.fingerprint(), builtin.fingerprint());
}

TEST(Prompt, TemplateOverrideChangesFingerprint) {
  TempDir dir;
  write_text(dir / "zshot.txt", "Classify: {{query}} among {{all_labels}}\n");
  const auto t = load_templates(dir.path());
  EXPECT_NE(t.fingerprint(), PromptTemplates{}.fingerprint());
  const auto q = make_record("q", "a", {{"a", 1.0}}, {1});
  EXPECT_EQ(build_prompt(q, {"a", "b"}, {}, std::nullopt, PromptMode::kZeroShot, t).text,
            "Classify: text of q among a, b\n");
}

TEST(Parse, ExactFormat) { EXPECT_EQ(parse_emotion_response("Emotion: sad", {"sad", "joyful"}), "sad"); }

TEST(Parse, ChatterCaseAndPunctuation) {
  EXPECT_EQ(parse_emotion_response("Sure! Emotion:  Joyful.", {"sad", "joyful"}), "joyful");
}

TEST(Parse, MissingMarker) {
  try {
    parse_emotion_response("I think it's happiness", {"sad", "joyful"});
    FAIL();
  } catch (const ResponseParseError& e) {
    EXPECT_EQ(e.status(), ParseStatus::kNoEmotionLine);
    EXPECT_NE(std::string(e.what()).find("NoEmotionLine"), std::string::npos);
  }
}

TEST(Parse, UnknownAndAmbiguous) {
  EXPECT_EQ(try_parse_emotion_response("Emotion: bored", {"sad", "joyful"}).status, ParseStatus::kUnknownLabel);
  EXPECT_EQ(try_parse_emotion_response("Emotion: sad or joyful", {"sad", "joyful"}).status,
            ParseStatus::kAmbiguousLabel);
}

TEST(Parse, SubstringFallback) {
  EXPECT_EQ(parse_emotion_response("Emotion: very sad indeed", {"sad", "joyful"}), "sad");
  EXPECT_EQ(parse_emotion_response("Emotion: [apprehensive]", {"apprehensive", "sad"}), "apprehensive");
  ParseOptions strict;
  strict.allow_substring = false;
  EXPECT_EQ(try_parse_emotion_response("Emotion: very sad", {"sad"}, strict).status, ParseStatus::kUnknownLabel);
}

TEST(Parse, MultilineTakesFirstMarker) {
  EXPECT_EQ(parse_emotion_response("Reasoning first.\nEmotion: proud\nEmotion: sad", {"sad", "proud"}), "proud");
}

TEST(Parse, StatusNamesRoundTrip) {
  for (auto s : {ParseStatus::kOk, ParseStatus::kNoEmotionLine, ParseStatus::kUnknownLabel, ParseStatus::kAmbiguousLabel}) {
    EXPECT_EQ(parse_status_from_name(parse_status_name(s)), s);
  }
}
