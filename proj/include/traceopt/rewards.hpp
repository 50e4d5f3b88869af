/// @file rewards.hpp
/// @brief Aggregates judge outputs into the four scalar rewards and the two
/// composite segment scores.
///
/// Reward scales: each of the four component rewards lives in [0, 4]; the
/// per-segment composites in [0, 8]:
///
///   score_desc   = r_vc + r_sp_desc
///   score_reason = r_lc + r_sp_reason

#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "traceopt/common.hpp"
#include "traceopt/longcot.hpp"

namespace traceopt::judge {
class JudgeBackend;
}

namespace traceopt::rewards {

class OutOfRangeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Visual-consistency rubric components, each in [0, 1].
struct VcSubscores {
  double existence = 0.0;
  double attribute_accuracy = 0.0;
  double completeness = 0.0;
  double appropriateness = 0.0;
};

/// One spatial statement with its correctness and weighting.
/// correctness r in [0, 1]; uncertainty weight W_u in [0.8, 1.0];
/// context weight W_c in {0.8, 1.0}.
struct SpatialClaim {
  std::string text;
  double correctness = 0.0;
  double uncertainty_weight = 1.0;
  double context_weight = 1.0;
  Segment segment = Segment::desc;
};

/// Logical-coherence rubric components, each in [0, 1].
struct LcSubscores {
  double factual_consistency = 0.0;
  double logical_coherence = 0.0;
  double rule_application = 0.0;
  double conclusion_validity = 0.0;
};

struct SegmentScores {
  double r_vc = 0.0;
  double r_sp_desc = 0.0;
  double r_sp_reason = 0.0;
  double r_lc = 0.0;
  double score_desc = 0.0;    ///< r_vc + r_sp_desc
  double score_reason = 0.0;  ///< r_lc + r_sp_reason
  bool desc_claims_empty = false;
  bool reason_claims_empty = false;
};

void validate(const VcSubscores& s);
void validate(const SpatialClaim& c);
void validate(const LcSubscores& s);
void validate(const SegmentScores& s);

/// Sum of the four visual-consistency components; range [0, 4].
double aggregate_vc(const VcSubscores& s);

/// Weighted mean correctness over the claims of `segment`, scaled to [0, 4]:
/// 4 * (1/n) * sum_i W_u(i) * W_c(i) * r(i). Claims belonging to the other
/// segment are rejected. An empty claim list scores 0.0 and sets *no_claims.
double aggregate_spatial(const std::vector<SpatialClaim>& claims, Segment segment,
                         bool* no_claims = nullptr);

/// Sum of the four logical-coherence components; range [0, 4].
double aggregate_lc(const LcSubscores& s);

SegmentScores compose_scores(double r_vc, double r_sp_desc, double r_sp_reason,
                             double r_lc);

/// A response with its rewards and the raw judge payloads that produced them.
struct ScoredResponse {
  std::string task_id;
  std::string response_text;
  SegmentScores scores;
  nlohmann::json judge_payloads;  ///< keyed by rubric name
};

/// Runs the four rubric calls against `judge` and aggregates. Judge failures
/// propagate; out-of-range judge values surface with the raw payload attached.
ScoredResponse score_response(const TaskInstance& task,
                              const longcot::LongCoTResponse& resp,
                              judge::JudgeBackend& judge);

nlohmann::json scores_to_json(const SegmentScores& s);
SegmentScores scores_from_json(const nlohmann::json& j);

nlohmann::json scored_response_to_json(const ScoredResponse& r);
ScoredResponse scored_response_from_json(const nlohmann::json& j);

}  // namespace traceopt::rewards
