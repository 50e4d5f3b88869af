/// @file
/// Reward aggregation tests: worked fixtures, range enforcement, and the
/// monotonicity property.

#include "traceopt/rewards.hpp"

#include <gtest/gtest.h>

#include <random>

#include "traceopt/judge.hpp"
#include "test_support.hpp"

namespace {

using namespace traceopt;
using namespace traceopt::rewards;

TEST(AggregateVc, WorkedExample) {
  EXPECT_NEAR(aggregate_vc({0.9, 0.7, 0.5, 1.0}), 3.1, 1e-12);
}

TEST(AggregateVc, PerfectComponentsScoreFour) {
  EXPECT_DOUBLE_EQ(aggregate_vc({1.0, 1.0, 1.0, 1.0}), 4.0);
}

TEST(AggregateVc, RejectsOutOfRangeComponents) {
  EXPECT_THROW(aggregate_vc({1.2, 0.0, 0.0, 0.0}), OutOfRangeError);
  EXPECT_THROW(aggregate_vc({0.5, -0.1, 0.0, 0.0}), OutOfRangeError);
}

SpatialClaim claim(double correctness, double w_u, double w_c,
                   Segment segment = Segment::desc) {
  SpatialClaim c;
  c.text = "claim";
  c.correctness = correctness;
  c.uncertainty_weight = w_u;
  c.context_weight = w_c;
  c.segment = segment;
  return c;
}

TEST(AggregateSpatial, TwoClaimFixture) {
  const std::vector<SpatialClaim> claims = {claim(1.0, 1.0, 1.0),
                                            claim(1.0, 0.8, 0.8)};
  EXPECT_NEAR(aggregate_spatial(claims, Segment::desc), 3.28, 1e-12);
}

TEST(AggregateSpatial, PerfectClaimsScoreFour) {
  const std::vector<SpatialClaim> claims = {claim(1.0, 1.0, 1.0),
                                            claim(1.0, 1.0, 1.0)};
  EXPECT_DOUBLE_EQ(aggregate_spatial(claims, Segment::desc), 4.0);
}

TEST(AggregateSpatial, EmptyClaimListScoresZeroAndReportsIt) {
  bool no_claims = false;
  EXPECT_DOUBLE_EQ(aggregate_spatial({}, Segment::desc, &no_claims), 0.0);
  EXPECT_TRUE(no_claims);
}

TEST(AggregateSpatial, RejectsClaimsFromTheOtherSegment) {
  const std::vector<SpatialClaim> claims = {claim(1.0, 1.0, 1.0, Segment::reason)};
  EXPECT_THROW(aggregate_spatial(claims, Segment::desc), ValidationError);
}

TEST(AggregateSpatial, RejectsOutOfRangeWeights) {
  EXPECT_THROW(aggregate_spatial({claim(1.0, 0.5, 1.0)}, Segment::desc),
               OutOfRangeError);
  EXPECT_THROW(aggregate_spatial({claim(1.0, 1.0, 0.9)}, Segment::desc),
               OutOfRangeError);
  EXPECT_THROW(aggregate_spatial({claim(1.5, 1.0, 1.0)}, Segment::desc),
               OutOfRangeError);
}

TEST(AggregateLc, SumsComponentsAndChecksRange) {
  EXPECT_DOUBLE_EQ(aggregate_lc({1.0, 1.0, 1.0, 1.0}), 4.0);
  EXPECT_NEAR(aggregate_lc({0.9, 0.8, 0.7, 0.6}), 3.0, 1e-12);
  EXPECT_THROW(aggregate_lc({1.1, 0.0, 0.0, 0.0}), OutOfRangeError);
}

TEST(Monotonicity, RaisingAnyInputNeverLowersTheAggregate) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> which(0, 3);
  for (int trial = 0; trial < 10000; ++trial) {
    VcSubscores vc{unit(rng), unit(rng), unit(rng), unit(rng)};
    const double before = aggregate_vc(vc);
    VcSubscores raised = vc;
    double* fields[] = {&raised.existence, &raised.attribute_accuracy,
                        &raised.completeness, &raised.appropriateness};
    double& target = *fields[which(rng)];
    target = target + (1.0 - target) * unit(rng);
    EXPECT_GE(aggregate_vc(raised), before - 1e-12);

    // Raising one claim's correctness never lowers the spatial reward.
    std::vector<SpatialClaim> claims;
    const int n = 1 + which(rng);
    for (int i = 0; i < n; ++i) {
      claims.push_back(claim(unit(rng), 0.8 + 0.2 * unit(rng),
                             which(rng) % 2 == 0 ? 1.0 : 0.8));
    }
    const double sp_before = aggregate_spatial(claims, Segment::desc);
    auto& c = claims[static_cast<std::size_t>(which(rng)) % claims.size()];
    c.correctness = c.correctness + (1.0 - c.correctness) * unit(rng);
    EXPECT_GE(aggregate_spatial(claims, Segment::desc), sp_before - 1e-12);
  }
}

TEST(ComposeScores, BuildsComposites) {
  const SegmentScores s = compose_scores(3.1, 3.28, 2.0, 1.5);
  EXPECT_NEAR(s.score_desc, 6.38, 1e-12);
  EXPECT_DOUBLE_EQ(s.score_reason, 3.5);
}

TEST(ComposeScores, PerfectRewardsHitTheCompositeCeiling) {
  const SegmentScores s = compose_scores(4.0, 4.0, 4.0, 4.0);
  EXPECT_DOUBLE_EQ(s.score_desc, 8.0);
  EXPECT_DOUBLE_EQ(s.score_reason, 8.0);
}

TEST(ComposeScores, RejectsComponentsOutsideTheirRanges) {
  EXPECT_THROW(compose_scores(4.5, 0.0, 0.0, 0.0), ValidationError);
  EXPECT_THROW(compose_scores(0.0, 0.0, 0.0, -0.5), ValidationError);
}

TEST(ScoresJson, RoundTrips) {
  const SegmentScores s = compose_scores(3.1, 3.28, 2.0, 1.5);
  const SegmentScores back = scores_from_json(scores_to_json(s));
  EXPECT_DOUBLE_EQ(back.r_vc, s.r_vc);
  EXPECT_DOUBLE_EQ(back.score_desc, s.score_desc);
  EXPECT_DOUBLE_EQ(back.score_reason, s.score_reason);
}

/// Emits fixed wire payloads for every rubric.
class StubJudge : public judge::JudgeBackend {
 public:
  nlohmann::json evaluate(const judge::JudgeRequest& req) override {
    switch (req.rubric) {
      case judge::Rubric::description:
        return {{"task1_score", 3.1},
                {"task1_breakdown",
                 {{"existence", 0.9},
                  {"attribute_accuracy", 0.7},
                  {"completeness", 0.5},
                  {"appropriateness", 1.0}}}};
      case judge::Rubric::spatial_desc:
        return {{"task2_claim_score", {{1.0, 1.0, 1.0}, {1.0, 0.8, 0.8}}}};
      case judge::Rubric::spatial_reason:
        return {{"task3_claim_score", {{1.0, 1.0, 1.0}}}};
      case judge::Rubric::reasoning:
        return {{"task4_score", 3.0},
                {"task4_breakdown",
                 {{"factual_consistency", 1.0},
                  {"logical_coherence", 0.5},
                  {"rule_application", 0.5},
                  {"conclusion_validity", 1.0}}}};
      case judge::Rubric::node:
        return nlohmann::json::array();
    }
    return {};
  }
};

TEST(ScoreResponse, AggregatesAllFourRubrics) {
  StubJudge stub;
  const TaskInstance task = testsupport::make_task("counter-1");
  const auto resp = testsupport::make_response("white");
  const ScoredResponse scored = score_response(task, resp, stub);
  EXPECT_NEAR(scored.scores.score_desc, 6.38, 1e-12);
  EXPECT_NEAR(scored.scores.r_sp_reason, 4.0, 1e-12);
  EXPECT_NEAR(scored.scores.r_lc, 3.0, 1e-12);
  EXPECT_NEAR(scored.scores.score_reason, 7.0, 1e-12);
  EXPECT_EQ(scored.task_id, "counter-1");
  EXPECT_TRUE(scored.judge_payloads.contains("description"));
  EXPECT_TRUE(scored.judge_payloads.contains("spatial_desc"));
  EXPECT_TRUE(scored.judge_payloads.contains("spatial_reason"));
  EXPECT_TRUE(scored.judge_payloads.contains("reasoning"));
}

TEST(ScoreResponse, SurfacesOutOfRangePayloadsWithTheRawPayload) {
  class BadJudge : public StubJudge {
    nlohmann::json evaluate(const judge::JudgeRequest& req) override {
      if (req.rubric == judge::Rubric::description) {
        return {{"task1_score", 5.0},
                {"task1_breakdown",
                 {{"existence", 2.0},
                  {"attribute_accuracy", 1.0},
                  {"completeness", 1.0},
                  {"appropriateness", 1.0}}}};
      }
      return StubJudge::evaluate(req);
    }
  };
  BadJudge bad;
  const TaskInstance task = testsupport::make_task("counter-2");
  const auto resp = testsupport::make_response("white");
  try {
    score_response(task, resp, bad);
    FAIL() << "expected OutOfRangeError";
  } catch (const OutOfRangeError& e) {
    EXPECT_NE(std::string(e.what()).find("payload"), std::string::npos);
  }
}

}  // namespace
