#pragma once

#include "eicl/decision.hpp"
#include "eicl/probe.hpp"

// Fixed eicl prompt: 19 labels, 5 soft-labelled examples, 4 primary and 15
// secondary candidates.
inline eicl::PromptBundle golden_eicl_prompt() {
  using namespace eicl;
  const LabelList labels = synthetic_labels(19);
  std::vector<LabelDistribution::Entry> probs;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    probs.emplace_back(labels[i], i < 4 ? 0.2 - 0.02 * static_cast<double>(i) : 0.0);
  }
  double rest = 1.0;
  for (const auto& [l, p] : probs) rest -= p;
  probs.back().second += rest;  // the last label takes 0.32 and ranks first
  SampleRecord q;
  q.id = "q";
  q.text = "My dog finally came home after three days.";
  q.gold_label = labels[0];
  q.emotion_probs = LabelDistribution(probs);
  q.emotion_vector = {1.0F};

  const std::vector<ExampleBlock> examples{
      {"e1", "I got the job I interviewed for!", "excited (0.86), proud (0.14)", {}},
      {"e2", "The storm knocked out our power all night.", "afraid (0.90), anxious (0.10)", {}},
      {"e3", "My best friend moved across the country.", "lonely (1.00)", {}},
      {"e4", "Someone left a note thanking me for helping.", "grateful (0.82), joyful (0.12), proud (0.06)", {}},
      {"e5", "I finished the marathon in under four hours.", "proud (0.95), joyful (0.05)", {}},
  };
  return build_prompt(q, labels, examples, split_candidates(q, labels, 4), PromptMode::kEicl);
}
