/// @file
/// Preference-pair construction: pooling eight candidates from four sources,
/// argmax/argmin selection against a sort oracle, conclusion perturbation
/// with band and verdict-flip guarantees, and the pairs JSONL round trip.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "traceopt/judge.hpp"
#include "traceopt/pairgen.hpp"

namespace {

using traceopt::ExternalError;
using traceopt::PreferencePair;
using traceopt::TaskInstance;
using traceopt::ValidationError;
using traceopt::longcot::LongCoTResponse;
using traceopt::pairgen::CandidateGenerator;
using traceopt::pairgen::CandidateRecord;
using traceopt::pairgen::CandidateSource;
using traceopt::pairgen::GeneratorFailure;
using traceopt::pairgen::MalformedCandidate;
using traceopt::pairgen::NoConclusionValue;
using traceopt::pairgen::PerturbConfig;
using traceopt::pairgen::SchemaViolation;
using traceopt::pairgen::ScriptedCandidateGenerator;
using traceopt::pairgen::UnscoredCandidate;

class FixedGenerator : public CandidateGenerator {
 public:
  FixedGenerator(CandidateSource source, std::vector<std::string> variants)
      : source_(source), variants_(std::move(variants)) {}
  CandidateSource source() const override { return source_; }
  std::vector<std::string> generate(const TaskInstance&) override {
    return variants_;
  }

 private:
  CandidateSource source_;
  std::vector<std::string> variants_;
};

class FailingGenerator : public CandidateGenerator {
 public:
  explicit FailingGenerator(CandidateSource source) : source_(source) {}
  CandidateSource source() const override { return source_; }
  std::vector<std::string> generate(const TaskInstance&) override {
    throw std::runtime_error("candidate host unreachable");
  }

 private:
  CandidateSource source_;
};

FixedGenerator healthy(CandidateSource source, const std::string& tag) {
  return FixedGenerator(source, {testsupport::make_document(tag + "-one"),
                                 testsupport::make_document(tag + "-two")});
}

traceopt::rewards::SegmentScores half_step_scores(std::mt19937_64& rng) {
  // Multiples of 0.5 keep totals exact in binary and make ties common.
  std::uniform_int_distribution<int> half(0, 8);
  return traceopt::rewards::compose_scores(half(rng) * 0.5, half(rng) * 0.5,
                                           half(rng) * 0.5, half(rng) * 0.5);
}

TEST(CandidateSourceNames, RoundTripAndRejectUnknowns) {
  using traceopt::pairgen::source_from_string;
  using traceopt::pairgen::to_string;
  for (CandidateSource s :
       {CandidateSource::m3cts, CandidateSource::external_a,
        CandidateSource::external_b, CandidateSource::sft_model}) {
    EXPECT_EQ(source_from_string(to_string(s)), s);
  }
  EXPECT_THROW(source_from_string("oracle"), ValidationError);
}

TEST(CandidateJson, RoundTripsWithAndWithoutScores) {
  CandidateRecord record;
  record.task_id = "cand-1";
  record.source = CandidateSource::external_b;
  record.variant = 2;
  record.response = testsupport::make_response("teal");
  record.scores = traceopt::rewards::compose_scores(3.0, 2.5, 1.5, 4.0);

  const CandidateRecord back =
      traceopt::pairgen::candidate_from_json(traceopt::pairgen::candidate_to_json(record));
  EXPECT_EQ(back.task_id, record.task_id);
  EXPECT_EQ(back.source, record.source);
  EXPECT_EQ(back.variant, record.variant);
  EXPECT_EQ(back.response, record.response);
  ASSERT_TRUE(back.scores.has_value());
  EXPECT_DOUBLE_EQ(back.scores->score_desc, 5.5);
  EXPECT_DOUBLE_EQ(back.scores->score_reason, 5.5);

  record.scores.reset();
  EXPECT_FALSE(traceopt::pairgen::candidate_from_json(
                   traceopt::pairgen::candidate_to_json(record))
                   .scores.has_value());

  nlohmann::json bad = traceopt::pairgen::candidate_to_json(record);
  bad["variant"] = 3;
  EXPECT_THROW(traceopt::pairgen::candidate_from_json(bad), ValidationError);
}

TEST(ScriptedCandidates, ReplayVariantsPerTask) {
  const auto dir = testsupport::scratch_dir("pairgen_scripted");
  const auto path = testsupport::write_file(
      dir / "m3cts.jsonl",
      nlohmann::json{{"task_id", "pool-1"},
                     {"variants", {testsupport::make_document("left"),
                                   testsupport::make_document("right")}}}
              .dump() +
          "\n");
  ScriptedCandidateGenerator generator(CandidateSource::m3cts, path);
  EXPECT_EQ(generator.source(), CandidateSource::m3cts);
  EXPECT_EQ(generator.generate(testsupport::make_task("pool-1")).size(), 2u);
  EXPECT_THROW(generator.generate(testsupport::make_task("pool-9")), ExternalError);

  const auto missing = testsupport::write_file(
      dir / "missing.jsonl", nlohmann::json{{"task_id", "pool-1"}}.dump() + "\n");
  try {
    ScriptedCandidateGenerator bad(CandidateSource::m3cts, missing);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find(":1"), std::string::npos);
  }

  const auto duplicate = testsupport::write_file(
      dir / "duplicate.jsonl",
      nlohmann::json{{"task_id", "pool-1"}, {"variants", {"a", "b"}}}.dump() +
          "\n" +
          nlohmann::json{{"task_id", "pool-1"}, {"variants", {"c", "d"}}}.dump() +
          "\n");
  EXPECT_THROW(ScriptedCandidateGenerator(CandidateSource::m3cts, duplicate),
               ValidationError);
}

TEST(BuildPool, OrdersEightRecordsBySourceThenVariant) {
  FixedGenerator m3 = healthy(CandidateSource::m3cts, "search");
  FixedGenerator ext_a = healthy(CandidateSource::external_a, "alpha");
  FixedGenerator ext_b = healthy(CandidateSource::external_b, "beta");
  FixedGenerator sft = healthy(CandidateSource::sft_model, "tuned");

  // Input order must not matter.
  const auto pool = traceopt::pairgen::build_pool(
      testsupport::make_task("pool-1"), {&sft, &ext_b, &m3, &ext_a});
  ASSERT_EQ(pool.size(), 8u);
  const CandidateSource expected_sources[] = {
      CandidateSource::m3cts,      CandidateSource::m3cts,
      CandidateSource::external_a, CandidateSource::external_a,
      CandidateSource::external_b, CandidateSource::external_b,
      CandidateSource::sft_model,  CandidateSource::sft_model};
  for (std::size_t i = 0; i < pool.size(); ++i) {
    EXPECT_EQ(pool[i].source, expected_sources[i]) << "slot " << i;
    EXPECT_EQ(pool[i].variant, static_cast<int>(i % 2) + 1) << "slot " << i;
    EXPECT_EQ(pool[i].task_id, "pool-1");
    EXPECT_FALSE(pool[i].scores.has_value());
  }
  EXPECT_NE(pool[0].response.description.find("search-one"), std::string::npos);
  EXPECT_NE(pool[3].response.description.find("alpha-two"), std::string::npos);
}

TEST(BuildPool, ValidatesSourcesAndSurfacesFailures) {
  FixedGenerator m3 = healthy(CandidateSource::m3cts, "search");
  FixedGenerator ext_a = healthy(CandidateSource::external_a, "alpha");
  FixedGenerator ext_b = healthy(CandidateSource::external_b, "beta");
  FixedGenerator sft = healthy(CandidateSource::sft_model, "tuned");
  const TaskInstance task = testsupport::make_task("pool-2");

  EXPECT_THROW(traceopt::pairgen::build_pool(task, {&m3, &ext_a, &ext_b}),
               ValidationError);
  FixedGenerator m3_again = healthy(CandidateSource::m3cts, "twin");
  EXPECT_THROW(
      traceopt::pairgen::build_pool(task, {&m3, &m3_again, &ext_a, &ext_b}),
      ValidationError);

  FailingGenerator down(CandidateSource::external_a);
  try {
    traceopt::pairgen::build_pool(task, {&m3, &down, &ext_b, &sft});
    FAIL() << "expected GeneratorFailure";
  } catch (const GeneratorFailure& e) {
    EXPECT_NE(std::string(e.what()).find("external_a"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("unreachable"), std::string::npos);
  }

  FixedGenerator short_handed(CandidateSource::external_a,
                              {testsupport::make_document("solo")});
  EXPECT_THROW(
      traceopt::pairgen::build_pool(task, {&m3, &short_handed, &ext_b, &sft}),
      GeneratorFailure);

  FixedGenerator garbled(
      CandidateSource::external_a,
      {testsupport::make_document("fine"), "no headings whatsoever"});
  try {
    traceopt::pairgen::build_pool(task, {&m3, &garbled, &ext_b, &sft});
    FAIL() << "expected MalformedCandidate";
  } catch (const MalformedCandidate& e) {
    EXPECT_NE(std::string(e.what()).find("external_a"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("variant 2"), std::string::npos);
  }
}

TEST(ScorePool, AttachesTheSameScoresAsDirectScoring) {
  FixedGenerator m3 = healthy(CandidateSource::m3cts, "search");
  FixedGenerator ext_a = healthy(CandidateSource::external_a, "alpha");
  FixedGenerator ext_b = healthy(CandidateSource::external_b, "beta");
  FixedGenerator sft = healthy(CandidateSource::sft_model, "tuned");
  const TaskInstance task = testsupport::make_task("pool-3");

  auto pool = traceopt::pairgen::build_pool(task, {&m3, &ext_a, &ext_b, &sft});
  traceopt::judge::MockJudge judge(traceopt::judge::scene_from_json(
      nlohmann::json{{"scene_id", "s1"},
                     {"objects", {"box", "crate"}},
                     {"relations", {{"box|left_of|crate", true}}}}));
  traceopt::pairgen::score_pool(pool, task, judge);

  for (const CandidateRecord& record : pool) {
    ASSERT_TRUE(record.scores.has_value());
    const auto direct =
        traceopt::rewards::score_response(task, record.response, judge).scores;
    EXPECT_DOUBLE_EQ(record.scores->score_desc, direct.score_desc);
    EXPECT_DOUBLE_EQ(record.scores->score_reason, direct.score_reason);
    EXPECT_DOUBLE_EQ(record.scores->r_vc, direct.r_vc);
    EXPECT_DOUBLE_EQ(record.scores->r_lc, direct.r_lc);
  }
}

TEST(SelectPair, MatchesASortOracleOnRandomizedPools) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<CandidateRecord> pool;
    std::vector<double> totals;
    for (int i = 0; i < 8; ++i) {
      CandidateRecord record;
      record.task_id = "oracle-task";
      record.source = static_cast<CandidateSource>(i / 2);
      record.variant = (i % 2) + 1;
      record.response = testsupport::make_response("flavor" + std::to_string(i));
      record.scores = half_step_scores(rng);
      totals.push_back(record.scores->score_desc + record.scores->score_reason);
      pool.push_back(std::move(record));
    }

    // Oracle: stable sort by total; the first descending entry is the
    // positive, the first ascending entry the negative.
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0u);
    auto descending = order;
    std::stable_sort(descending.begin(), descending.end(),
                     [&](std::size_t a, std::size_t b) { return totals[a] > totals[b]; });
    auto ascending = order;
    std::stable_sort(ascending.begin(), ascending.end(),
                     [&](std::size_t a, std::size_t b) { return totals[a] < totals[b]; });
    std::size_t best = descending.front();
    std::size_t worst = ascending.front();
    const bool degenerate = totals[best] == totals[worst];
    if (best == worst) worst = best == 0 ? 1 : 0;

    const PreferencePair pair = traceopt::pairgen::select_pair(
        testsupport::make_task("oracle-task"), pool, "pair-" + std::to_string(trial));
    ASSERT_TRUE(pair.positive == pool[best].response) << "trial " << trial;
    ASSERT_TRUE(pair.negative == pool[worst].response) << "trial " << trial;
    ASSERT_DOUBLE_EQ(pair.delta_desc, pool[best].scores->score_desc -
                                          pool[worst].scores->score_desc);
    ASSERT_DOUBLE_EQ(pair.delta_reason, pool[best].scores->score_reason -
                                            pool[worst].scores->score_reason);
    EXPECT_EQ(pair.origin, "selected");
    const bool flagged =
        std::find(pair.flags.begin(), pair.flags.end(), "degenerate") !=
        pair.flags.end();
    ASSERT_EQ(flagged, degenerate) << "trial " << trial;
  }
}

TEST(SelectPair, RequiresACompletedPool) {
  std::mt19937_64 rng(3);
  std::vector<CandidateRecord> pool;
  for (int i = 0; i < 8; ++i) {
    CandidateRecord record;
    record.task_id = "t";
    record.source = static_cast<CandidateSource>(i / 2);
    record.variant = (i % 2) + 1;
    record.response = testsupport::make_response("f" + std::to_string(i));
    record.scores = half_step_scores(rng);
    pool.push_back(std::move(record));
  }
  const TaskInstance task = testsupport::make_task("t");

  std::vector<CandidateRecord> seven(pool.begin(), pool.end() - 1);
  EXPECT_THROW(traceopt::pairgen::select_pair(task, seven, "p"), ValidationError);

  pool[5].scores.reset();
  EXPECT_THROW(traceopt::pairgen::select_pair(task, pool, "p"), UnscoredCandidate);
}

TEST(PerturbConclusion, TouchesOnlyTheFinalConclusionValue) {
  const LongCoTResponse positive = testsupport::make_response(
      "amber", "the shelf spans 1.0 meters and the gap measures 2.50 meters.");
  std::mt19937_64 rng(17);

  for (int trial = 0; trial < 1000; ++trial) {
    const LongCoTResponse negative =
        traceopt::pairgen::perturb_conclusion(positive, rng);

    // Everything before the conclusion is byte-identical.
    const std::string before = traceopt::longcot::render_longcot(positive);
    const std::string after = traceopt::longcot::render_longcot(negative);
    const auto cut = before.find("### In Conclusion");
    ASSERT_NE(cut, std::string::npos);
    ASSERT_EQ(before.substr(0, cut), after.substr(0, cut)) << "trial " << trial;
    ASSERT_NE(before.substr(cut), after.substr(cut)) << "trial " << trial;

    const auto values = traceopt::longcot::extract_conclusion_values(negative);
    ASSERT_EQ(values.size(), 2u);
    ASSERT_DOUBLE_EQ(values[0].raw_value, 1.0) << "earlier values stay put";
    const double raw = values[1].raw_value;
    ASSERT_NE(raw, 2.50) << "trial " << trial;
    const double shift = std::abs(raw / 2.50 - 1.0);
    // Rounding to two decimals widens the band by at most 0.005 / 2.5.
    ASSERT_GE(shift, 0.10 - 0.002 - 1e-12) << "trial " << trial << " raw " << raw;
    ASSERT_LE(shift, 0.30 + 0.002 + 1e-12) << "trial " << trial << " raw " << raw;

    // Two decimals in, two decimals out.
    const std::string rendered = negative.conclusion;
    const auto pos = rendered.find("measures ") + 9;
    const auto dot = rendered.find('.', pos);
    ASSERT_NE(dot, std::string::npos);
    EXPECT_TRUE(std::isdigit(static_cast<unsigned char>(rendered[dot + 1])));
    EXPECT_TRUE(std::isdigit(static_cast<unsigned char>(rendered[dot + 2])));
    EXPECT_FALSE(std::isdigit(static_cast<unsigned char>(rendered[dot + 3])));
  }
}

TEST(PerturbConclusion, FlipsTheVerdictWhenTheAnswerWasCorrect) {
  const LongCoTResponse positive =
      testsupport::make_response("coral", "the gap measures 2.0 meters.");
  PerturbConfig config;
  config.ground_truth_m = 2.0;
  std::mt19937_64 rng(29);

  for (int trial = 0; trial < 1000; ++trial) {
    const LongCoTResponse negative =
        traceopt::pairgen::perturb_conclusion(positive, rng, config);
    const auto values = traceopt::longcot::extract_conclusion_values(negative);
    ASSERT_EQ(values.size(), 1u);
    // Correct within 25% before, incorrect after.
    ASSERT_FALSE(std::abs(values[0].value_meters - 2.0) <= 0.5)
        << "trial " << trial << " value " << values[0].value_meters;
  }

  // An already-wrong answer only needs to change, not to stay wrong.
  const LongCoTResponse wrong =
      testsupport::make_response("coral", "the gap measures 9.0 meters.");
  const LongCoTResponse perturbed =
      traceopt::pairgen::perturb_conclusion(wrong, rng, config);
  EXPECT_NE(traceopt::longcot::extract_conclusion_values(perturbed)[0].raw_value,
            9.0);
}

TEST(PerturbConclusion, FallsBackToADeterministicSweep) {
  const LongCoTResponse positive =
      testsupport::make_response("slate", "the gap measures 2.0 meters.");
  PerturbConfig config;
  config.ground_truth_m = 2.0;
  config.max_attempts = 0;  // force the grid path

  // Largest shift first, low side first: 2.0 * 0.7 = 1.4.
  std::mt19937_64 rng_a(1);
  std::mt19937_64 rng_b(999);
  const auto from_a = traceopt::pairgen::perturb_conclusion(positive, rng_a, config);
  const auto from_b = traceopt::pairgen::perturb_conclusion(positive, rng_b, config);
  EXPECT_EQ(from_a.conclusion, from_b.conclusion);
  EXPECT_NE(from_a.conclusion.find("1.4 meters"), std::string::npos);
}

TEST(PerturbConclusion, RejectsImpossibleOrInvalidRequests) {
  std::mt19937_64 rng(5);

  // Integer 1 cannot move: every factor in the band rounds back to 1.
  const LongCoTResponse stuck =
      testsupport::make_response("stone", "the gap measures 1 meters.");
  EXPECT_THROW(traceopt::pairgen::perturb_conclusion(stuck, rng), ValidationError);

  const LongCoTResponse numberless =
      testsupport::make_response("mist", "the distance eludes measurement.");
  EXPECT_THROW(traceopt::pairgen::perturb_conclusion(numberless, rng),
               NoConclusionValue);

  const LongCoTResponse fine = testsupport::make_response("fine");
  const auto with_band = [&](double lo, double hi) {
    PerturbConfig config;
    config.min_shift = lo;
    config.max_shift = hi;
    return traceopt::pairgen::perturb_conclusion(fine, rng, config);
  };
  EXPECT_THROW(with_band(0.0, 0.3), ValidationError);
  EXPECT_THROW(with_band(0.4, 0.2), ValidationError);
  EXPECT_THROW(with_band(0.5, 1.0), ValidationError);
}

TEST(MakePerturbedPair, PenalizesTheConclusionRewardWithAFloor) {
  const TaskInstance task = testsupport::make_task("perturb-1");
  const LongCoTResponse positive =
      testsupport::make_response("olive", "the gap measures 4.0 meters.");
  std::mt19937_64 rng(41);

  auto scores_p = traceopt::rewards::compose_scores(3.5, 3.0, 2.5, 4.0);
  scores_p.desc_claims_empty = true;
  PreferencePair pair = traceopt::pairgen::make_perturbed_pair(
      task, positive, scores_p, rng, PerturbConfig{}, "neg-1");

  EXPECT_EQ(pair.pair_id, "neg-1");
  EXPECT_EQ(pair.origin, "perturbed");
  EXPECT_TRUE(pair.positive == positive);
  EXPECT_FALSE(pair.negative == positive);
  EXPECT_DOUBLE_EQ(pair.delta_desc, 0.0);
  EXPECT_DOUBLE_EQ(pair.delta_reason, 1.0);  // r_lc 4.0 -> 3.0
  EXPECT_DOUBLE_EQ(pair.scores_l.r_lc, 3.0);
  EXPECT_TRUE(pair.scores_l.desc_claims_empty);

  // The penalty cannot push r_lc below zero.
  const auto shallow = traceopt::rewards::compose_scores(3.5, 3.0, 2.5, 0.4);
  PerturbConfig heavy;
  heavy.conclusion_penalty = 1.0;
  pair = traceopt::pairgen::make_perturbed_pair(task, positive, shallow, rng,
                                                heavy, "neg-2");
  EXPECT_DOUBLE_EQ(pair.scores_l.r_lc, 0.0);
  EXPECT_DOUBLE_EQ(pair.delta_reason, 0.4);
}

TEST(MakePerturbedPair, ReadsTheGroundTruthFromTheTask) {
  TaskInstance task = testsupport::make_task("perturb-2");
  task.ground_truth = "2.0 meters";
  const LongCoTResponse positive =
      testsupport::make_response("lilac", "the gap measures 2.0 meters.");
  const auto scores_p = traceopt::rewards::compose_scores(3.0, 3.0, 3.0, 3.0);

  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 50; ++trial) {
    const PreferencePair pair = traceopt::pairgen::make_perturbed_pair(
        task, positive, scores_p, rng, PerturbConfig{}, "neg");
    const auto values =
        traceopt::longcot::extract_conclusion_values(pair.negative);
    ASSERT_EQ(values.size(), 1u);
    ASSERT_FALSE(std::abs(values[0].value_meters - 2.0) <= 0.5)
        << "trial " << trial;
  }
}

TEST(PairsIo, RoundTripsThroughJsonl) {
  const std::vector<PreferencePair> pairs = {
      testsupport::make_pair("p-1", 1.0, 2.0),
      testsupport::make_pair("p-2", 0.5, 0.25, "green", "amber")};

  const auto dir = testsupport::scratch_dir("pairgen_io");
  const auto path = dir / "pairs.jsonl";
  traceopt::pairgen::write_pairs(path, pairs);
  const auto back = traceopt::pairgen::read_pairs(path);

  ASSERT_EQ(back.size(), pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    EXPECT_EQ(traceopt::pair_to_json(back[i]), traceopt::pair_to_json(pairs[i]));
    EXPECT_NEAR(back[i].delta_desc,
                back[i].scores_p.score_desc - back[i].scores_l.score_desc, 1e-9);
    EXPECT_NEAR(back[i].delta_reason,
                back[i].scores_p.score_reason - back[i].scores_l.score_reason,
                1e-9);
  }
}

TEST(PairsIo, ReportsTheOffendingLine) {
  const auto dir = testsupport::scratch_dir("pairgen_io_bad");
  nlohmann::json good = traceopt::pair_to_json(testsupport::make_pair("p-1", 1.0, 1.0));
  nlohmann::json bad = good;
  bad.erase("positive_text");
  const auto path = testsupport::write_file(
      dir / "pairs.jsonl", good.dump() + "\n" + bad.dump() + "\n");

  try {
    traceopt::pairgen::read_pairs(path);
    FAIL() << "expected SchemaViolation";
  } catch (const SchemaViolation& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("pairs.jsonl"), std::string::npos);
  }
}

}  // namespace
