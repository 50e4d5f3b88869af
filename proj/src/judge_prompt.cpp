#include "traceopt/judge.hpp"

namespace traceopt::judge {

namespace {

// Keyed output formats here are load-bearing: parse_*_payload and every
// backend must agree on them byte for byte.
constexpr std::string_view kPromptTemplate =
    R"(You are an expert in evaluating spatial reasoning of responses to a question about an image and its depth map.

Question: {question}
Ground truth: {ground_truth}

Evaluate the response below on four tasks.

Task 1: Evaluate the description section for visual consistency with the image.
Score four components, each in [0, 1]:
- existence: are the mentioned objects actually present?
- attribute_accuracy: are stated attributes (color, size, material) correct?
- completeness: are the objects required by the question all covered?
- appropriateness: does the description stay relevant to the question?
Output format: {"task1_score": <sum>, "task1_breakdown": {"existence": <v>, "attribute_accuracy": <v>, "completeness": <v>, "appropriateness": <v>}}

Task 2: Extract every spatial claim from the description section and score each claim with a triple [correctness, uncertainty, relationship]:
- correctness: 1 if the claim holds in the scene, else 0.
- uncertainty: 1.0 for an assertive claim, down to 0.8 when hedged (e.g. "approximately", "possibly").
- relationship: 1.0 when the claim involves the objects the question asks about, 0.8 otherwise.
Output format: {"task2_claim_score": [[c, u, w], ...], "task2_claims": ["<claim text>", ...]}

Task 3: Extract and score spatial claims from the reasoning section the same way.
Output format: {"task3_claim_score": [[c, u, w], ...], "task3_claims": ["<claim text>", ...]}

Task 4: Evaluate the logical consistency of the reasoning section.
Score four components, each in [0, 1]:
- factual_consistency: do the steps agree with the scene and the description?
- logical_coherence: does each step follow from the previous ones?
- rule_application: are geometric and arithmetic rules applied correctly?
- conclusion_validity: is the final answer consistent with the steps and the ground truth?
Output format: {"task4_score": <sum>, "task4_breakdown": {"factual_consistency": <v>, "logical_coherence": <v>, "rule_application": <v>, "conclusion_validity": <v>}}

Respond with one JSON object per task and nothing else.
)";

void replace_all(std::string& text, std::string_view needle, std::string_view value) {
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    text.replace(pos, needle.size(), value);
    pos += value.size();
  }
}

}  // namespace

std::string build_judge_prompt(const std::string& question,
                               const std::string& ground_truth) {
  std::string prompt(kPromptTemplate);
  replace_all(prompt, "{question}", question);
  replace_all(prompt, "{ground_truth}", ground_truth.empty() ? "(not provided)"
                                                             : ground_truth);
  return prompt;
}

}  // namespace traceopt::judge
