#pragma once

/// @file
/// Desk-scale evaluation and the DPO-vs-segment-weighted comparison: success
/// metrics over predictions, a synthetic preference corpus whose reasoning
/// signal dominates its (adversarial) description signal, a two-arm trainer
/// comparison from identical initialization, and the alpha/lambda ablation
/// grid.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "traceopt/fdpo.hpp"
#include "traceopt/pair.hpp"

namespace traceopt::experiment {

class NonPositiveTruth : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// True iff |pred - truth| / truth <= 0.25. Both in meters.
bool eval_quantitative(double pred_m, double truth_m);

/// Exact match after lowercasing, trimming, and whitespace collapsing.
bool eval_qualitative(std::string_view pred, std::string_view truth);

/// One prediction to grade; JSONL record
/// {task_id, kind: "quantitative"|"qualitative", prediction, truth}.
struct EvalRecord {
  std::string task_id;
  std::string kind;
  std::string prediction;
  std::string truth;
};

EvalRecord eval_record_from_json(const nlohmann::json& j);

struct EvalSummary {
  int quantitative_total = 0;
  int quantitative_hits = 0;
  int qualitative_total = 0;
  int qualitative_hits = 0;
};

/// Grades every record; quantitative values are parsed as lengths.
EvalSummary evaluate_records(const std::vector<EvalRecord>& records);
nlohmann::json summary_to_json(const EvalSummary& summary);

struct SyntheticCorpusConfig {
  int num_pairs = 500;
  std::uint64_t seed = 7;
  /// Stored differentials; reasoning dominates description by construction.
  double delta_reason_mean = 3.0;
  double delta_reason_sd = 0.5;
  double delta_desc_mean = 0.3;
  double delta_desc_sd = 0.2;
  /// Must match the policy the corpus will be trained on.
  int vocab_size = 16;
  /// Words per description sentence; reasoning carries a comparable count so
  /// the two segments' gradients have similar magnitude.
  int sentence_words = 12;
};

/// Pairs whose reasoning segments are separable (positive and negative draw
/// from disjoint word pools) while their description segments carry the
/// opposite signal. Equal-weight training lets the description gradient
/// cancel the reasoning gradient; weighting by the stored differentials
/// suppresses it.
std::vector<PreferencePair> synthetic_corpus(const SyntheticCorpusConfig& config);

struct ArmReport {
  std::string name;
  double alpha = 0.0;
  double lambda = 0.0;
  double acc_desc = 0.0;    ///< held-out pairwise accuracy after training
  double acc_reason = 0.0;
  double final_loss = 0.0;  ///< last recorded training loss
  std::vector<fdpo::StepMetrics> metrics;
};

struct SweepCell {
  double alpha = 0.0;
  double lambda = 0.0;
  double acc_desc = 0.0;
  double acc_reason = 0.0;
  double final_loss = 0.0;
};

struct ExperimentReport {
  ArmReport dpo;       ///< alpha forced to 0
  ArmReport weighted;  ///< the configured alpha/lambda
  std::vector<SweepCell> sweep;
};

/// Trains both arms from the same seed (hence identical initialization and
/// data split) and, when grids are given, one extra arm per (alpha, lambda)
/// cell.
ExperimentReport run_experiment(const std::vector<PreferencePair>& dataset,
                                const fdpo::FdpoConfig& config,
                                const fdpo::BigramPolicyConfig& policy_config = {},
                                const std::vector<double>& sweep_alphas = {},
                                const std::vector<double>& sweep_lambdas = {});

nlohmann::json report_to_json(const ExperimentReport& report);

/// Aligned-column text table: two arms plus any sweep cells.
std::string report_table(const ExperimentReport& report);

}  // namespace traceopt::experiment
