#include "traceopt/rewards.hpp"

#include <cmath>
#include <string>

#include "traceopt/judge.hpp"

namespace traceopt::rewards {

namespace {

void check_unit_interval(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw OutOfRangeError(std::string("OutOfRange: ") + name + " = " +
                          std::to_string(v) + ", expected [0,1]");
  }
}

}  // namespace

void validate(const VcSubscores& s) {
  check_unit_interval(s.existence, "existence");
  check_unit_interval(s.attribute_accuracy, "attribute_accuracy");
  check_unit_interval(s.completeness, "completeness");
  check_unit_interval(s.appropriateness, "appropriateness");
}

void validate(const SpatialClaim& c) {
  check_unit_interval(c.correctness, "correctness");
  if (!(c.uncertainty_weight >= 0.8 && c.uncertainty_weight <= 1.0)) {
    throw OutOfRangeError("OutOfRange: uncertainty_weight = " +
                          std::to_string(c.uncertainty_weight) + ", expected [0.8,1.0]");
  }
  if (c.context_weight != 0.8 && c.context_weight != 1.0) {
    throw OutOfRangeError("OutOfRange: context_weight = " +
                          std::to_string(c.context_weight) + ", expected 0.8 or 1.0");
  }
}

void validate(const LcSubscores& s) {
  check_unit_interval(s.factual_consistency, "factual_consistency");
  check_unit_interval(s.logical_coherence, "logical_coherence");
  check_unit_interval(s.rule_application, "rule_application");
  check_unit_interval(s.conclusion_validity, "conclusion_validity");
}

void validate(const SegmentScores& s) {
  auto check4 = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 4.0)) {
      throw OutOfRangeError(std::string("OutOfRange: ") + name + " = " +
                            std::to_string(v) + ", expected [0,4]");
    }
  };
  check4(s.r_vc, "r_vc");
  check4(s.r_sp_desc, "r_sp_desc");
  check4(s.r_sp_reason, "r_sp_reason");
  check4(s.r_lc, "r_lc");
  if (s.score_desc != s.r_vc + s.r_sp_desc ||
      s.score_reason != s.r_lc + s.r_sp_reason) {
    throw OutOfRangeError("composite scores do not match their components");
  }
}

double aggregate_vc(const VcSubscores& s) {
  validate(s);
  return s.existence + s.attribute_accuracy + s.completeness + s.appropriateness;
}

double aggregate_spatial(const std::vector<SpatialClaim>& claims, Segment segment,
                         bool* no_claims) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& c : claims) {
    validate(c);
    if (c.segment != segment) {
      throw OutOfRangeError("claim belongs to the other segment; filter before aggregating");
    }
    sum += c.uncertainty_weight * c.context_weight * c.correctness;
    ++n;
  }
  if (no_claims) *no_claims = (n == 0);
  if (n == 0) return 0.0;
  return 4.0 * sum / static_cast<double>(n);
}

double aggregate_lc(const LcSubscores& s) {
  validate(s);
  return s.factual_consistency + s.logical_coherence + s.rule_application +
         s.conclusion_validity;
}

SegmentScores compose_scores(double r_vc, double r_sp_desc, double r_sp_reason,
                             double r_lc) {
  SegmentScores s;
  s.r_vc = r_vc;
  s.r_sp_desc = r_sp_desc;
  s.r_sp_reason = r_sp_reason;
  s.r_lc = r_lc;
  s.score_desc = r_vc + r_sp_desc;
  s.score_reason = r_lc + r_sp_reason;
  validate(s);
  return s;
}

ScoredResponse score_response(const TaskInstance& task,
                              const longcot::LongCoTResponse& resp,
                              judge::JudgeBackend& judge_backend) {
  longcot::validate(resp);
  using judge::Rubric;

  auto vc = judge::judge_description(
      judge_backend, judge::make_request(task, resp.desc_segment, Rubric::description));
  auto sp_desc = judge::judge_spatial_claims(
      judge_backend, judge::make_request(task, resp.desc_segment, Rubric::spatial_desc));
  auto sp_reason = judge::judge_spatial_claims(
      judge_backend,
      judge::make_request(task, resp.reason_segment, Rubric::spatial_reason));
  auto lc = judge::judge_reasoning(
      judge_backend, judge::make_request(task, resp.reason_segment, Rubric::reasoning));

  ScoredResponse out;
  out.task_id = task.task_id;
  out.response_text = resp.raw_text.empty() ? longcot::render_longcot(resp)
                                            : resp.raw_text;
  bool desc_empty = false;
  bool reason_empty = false;
  double r_vc = aggregate_vc(vc.value);
  double r_sp_d = aggregate_spatial(sp_desc.value, Segment::desc, &desc_empty);
  double r_sp_r = aggregate_spatial(sp_reason.value, Segment::reason, &reason_empty);
  double r_lc = aggregate_lc(lc.value);
  out.scores = compose_scores(r_vc, r_sp_d, r_sp_r, r_lc);
  out.scores.desc_claims_empty = desc_empty;
  out.scores.reason_claims_empty = reason_empty;
  out.judge_payloads = nlohmann::json{{"description", vc.payload},
                                      {"spatial_desc", sp_desc.payload},
                                      {"spatial_reason", sp_reason.payload},
                                      {"reasoning", lc.payload}};
  return out;
}

nlohmann::json scores_to_json(const SegmentScores& s) {
  return nlohmann::json{{"r_vc", s.r_vc},
                        {"r_sp_desc", s.r_sp_desc},
                        {"r_sp_reason", s.r_sp_reason},
                        {"r_lc", s.r_lc},
                        {"score_desc", s.score_desc},
                        {"score_reason", s.score_reason}};
}

SegmentScores scores_from_json(const nlohmann::json& j) {
  SegmentScores s;
  s.r_vc = j.at("r_vc").get<double>();
  s.r_sp_desc = j.at("r_sp_desc").get<double>();
  s.r_sp_reason = j.at("r_sp_reason").get<double>();
  s.r_lc = j.at("r_lc").get<double>();
  s.score_desc = j.at("score_desc").get<double>();
  s.score_reason = j.at("score_reason").get<double>();
  validate(s);
  return s;
}

nlohmann::json scored_response_to_json(const ScoredResponse& r) {
  nlohmann::json j = scores_to_json(r.scores);
  j["task_id"] = r.task_id;
  j["response_text"] = r.response_text;
  j["judge_payloads"] = r.judge_payloads;
  return j;
}

ScoredResponse scored_response_from_json(const nlohmann::json& j) {
  ScoredResponse r;
  r.task_id = j.at("task_id").get<std::string>();
  r.response_text = j.at("response_text").get<std::string>();
  r.scores = scores_from_json(j);
  if (j.contains("judge_payloads")) r.judge_payloads = j.at("judge_payloads");
  return r;
}

}  // namespace traceopt::rewards
