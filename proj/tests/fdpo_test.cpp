/// @file
/// Segment-weighted preference objective: closed-form weight and beta checks
/// against a long-double oracle, the exact whole-response reduction at
/// alpha = 0, analytic gradients versus central finite differences, and the
/// seeded training loop.

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "traceopt/fdpo.hpp"
#include "traceopt/pair.hpp"
#include "traceopt/policy.hpp"

namespace {

using traceopt::PreferencePair;
using traceopt::Segment;
using traceopt::ValidationError;
using traceopt::fdpo::BigramPolicy;
using traceopt::fdpo::BigramPolicyConfig;
using traceopt::fdpo::FdpoConfig;
using traceopt::fdpo::NonPositiveLambda;
using traceopt::fdpo::VocabularyMismatch;
using traceopt::fdpo::WeightSumViolation;
using testsupport::make_pair;

// Independent oracle: sigmoid evaluated in extended precision, stable on
// both tails.
long double sigmoidl(long double t) {
  if (t >= 0.0L) return 1.0L / (1.0L + std::exp(-t));
  const long double e = std::exp(t);
  return e / (1.0L + e);
}

// Oracle for the two-way softmax over (lambda * delta_desc, lambda *
// delta_reason): each weight is a sigmoid of the signed gap.
std::pair<double, double> oracle_weights(double delta_desc, double delta_reason,
                                         double lambda) {
  const long double x = static_cast<long double>(lambda) *
                        (static_cast<long double>(delta_reason) -
                         static_cast<long double>(delta_desc));
  return {static_cast<double>(sigmoidl(-x)), static_cast<double>(sigmoidl(x))};
}

BigramPolicyConfig small_policy_config() {
  BigramPolicyConfig config;
  config.vocab_size = 6;
  config.num_contexts = 2;
  config.init_scale = 0.2;
  return config;
}

// Random but valid pair: composite scores stay inside [0, 8] as long as the
// differentials stay inside (-7.8, 7.8).
PreferencePair random_pair(std::mt19937_64& rng, const std::string& pair_id) {
  std::uniform_real_distribution<double> delta(-3.5, 3.5);
  static const char* kFlavors[] = {"red", "blue", "green", "tall", "narrow"};
  std::uniform_int_distribution<int> flavor(0, 4);
  int pos = flavor(rng);
  int neg = (pos + 1 + flavor(rng)) % 5;
  return make_pair(pair_id, delta(rng), delta(rng), kFlavors[pos], kFlavors[neg]);
}

TEST(SegmentWeights, MatchesTheFrozenWorkedExample) {
  const auto [w_desc, w_reason] = traceopt::fdpo::segment_weights(1.0, 3.0, 0.6);
  EXPECT_NEAR(w_desc, 0.231475, 1e-6);
  EXPECT_NEAR(w_reason, 0.768525, 1e-6);

  const auto [od, og] = oracle_weights(1.0, 3.0, 0.6);
  EXPECT_NEAR(w_desc, od, 1e-15);
  EXPECT_NEAR(w_reason, og, 1e-15);
}

TEST(SegmentWeights, AgreesWithTheLongDoubleOracleOnRandomInputs) {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> delta(-8.0, 8.0);
  std::uniform_real_distribution<double> lambda(0.01, 10.0);
  for (int i = 0; i < 10000; ++i) {
    const double dd = delta(rng);
    const double dr = delta(rng);
    const double lam = lambda(rng);
    const auto [w_desc, w_reason] = traceopt::fdpo::segment_weights(dd, dr, lam);
    const auto [od, og] = oracle_weights(dd, dr, lam);
    ASSERT_NEAR(w_desc, od, 1e-15) << "dd=" << dd << " dr=" << dr << " l=" << lam;
    ASSERT_NEAR(w_reason, og, 1e-15);
    ASSERT_GT(w_desc, 0.0);
    ASSERT_GT(w_reason, 0.0);
    ASSERT_NEAR(w_desc + w_reason, 1.0, 1e-12);
  }
}

TEST(SegmentWeights, StaysNormalizedUnderExtremeGaps) {
  // |lambda * gap| up to 700 must not overflow; the small side underflows
  // gracefully toward 0 while the sum stays put.
  for (double gap : {-700.0, -100.0, -36.0, 36.0, 100.0, 700.0}) {
    const auto [w_desc, w_reason] = traceopt::fdpo::segment_weights(0.0, gap, 1.0);
    ASSERT_GE(w_desc, 0.0);
    ASSERT_GE(w_reason, 0.0);
    ASSERT_NEAR(w_desc + w_reason, 1.0, 1e-12) << "gap=" << gap;
    if (gap > 0) {
      ASSERT_GT(w_reason, 0.5);
    } else {
      ASSERT_GT(w_desc, 0.5);
    }
  }
}

TEST(SegmentWeights, RejectsBadLambdaAndNonFiniteGaps) {
  EXPECT_THROW(traceopt::fdpo::segment_weights(1.0, 2.0, 0.0), NonPositiveLambda);
  EXPECT_THROW(traceopt::fdpo::segment_weights(1.0, 2.0, -0.5), NonPositiveLambda);
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_THROW(traceopt::fdpo::segment_weights(inf, 2.0, 1.0), ValidationError);
  EXPECT_THROW(traceopt::fdpo::segment_weights(1.0, std::nan(""), 1.0),
               ValidationError);
}

TEST(SegmentBetas, MatchesTheFrozenWorkedExample) {
  // 0.1 * (1 + 0.3 * (2 * 0.231475 - 1)) = 0.0838885 by hand.
  const auto [beta_desc, beta_reason] =
      traceopt::fdpo::segment_betas(0.1, 0.3, 0.231475, 0.768525);
  EXPECT_NEAR(beta_desc, 0.0838885, 1e-7);
  EXPECT_NEAR(beta_reason, 0.1161115, 1e-7);
}

TEST(SegmentBetas, SaturatesAtTheConfiguredAmplitude) {
  const auto [beta_desc, beta_reason] =
      traceopt::fdpo::segment_betas(0.1, 0.3, 0.0, 1.0);
  EXPECT_NEAR(beta_desc, 0.07, 1e-15);
  EXPECT_NEAR(beta_reason, 0.13, 1e-15);
}

TEST(SegmentBetas, ConservesTwiceBetaOnRandomInputs) {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> ubeta(0.01, 5.0);
  std::uniform_real_distribution<double> ualpha(0.0, 1.0);
  std::uniform_real_distribution<double> uweight(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const double beta = ubeta(rng);
    const double alpha = ualpha(rng);
    const double w_desc = uweight(rng);
    const double w_reason = 1.0 - w_desc;
    const auto [beta_desc, beta_reason] =
        traceopt::fdpo::segment_betas(beta, alpha, w_desc, w_reason);
    // Conservation is algebraic; the budget below is a few ulps of rounding.
    ASSERT_NEAR(beta_desc + beta_reason, 2.0 * beta, 1e-14 * beta);
    ASSERT_GE(beta_desc, beta * (1.0 - alpha) - 1e-12);
    ASSERT_LE(beta_desc, beta * (1.0 + alpha) + 1e-12);
    ASSERT_GE(beta_reason, beta * (1.0 - alpha) - 1e-12);
    ASSERT_LE(beta_reason, beta * (1.0 + alpha) + 1e-12);
  }
}

TEST(SegmentBetas, RejectsWeightsThatDoNotPartitionTheMass) {
  EXPECT_THROW(traceopt::fdpo::segment_betas(0.1, 0.3, 0.5, 0.6),
               WeightSumViolation);
  EXPECT_THROW(traceopt::fdpo::segment_betas(0.0, 0.3, 0.5, 0.5), ValidationError);
  EXPECT_THROW(traceopt::fdpo::segment_betas(0.1, 1.5, 0.5, 0.5), ValidationError);
}

TEST(PreferenceDifferentials, SubtractsCompositeScoresPerSegment) {
  const PreferencePair pair = make_pair("pd-1", 1.25, -2.5);
  const auto [delta_desc, delta_reason] =
      traceopt::fdpo::preference_differentials(pair.scores_p, pair.scores_l);
  EXPECT_NEAR(delta_desc, pair.delta_desc, 1e-12);
  EXPECT_NEAR(delta_reason, pair.delta_reason, 1e-12);

  const auto [flipped_desc, flipped_reason] =
      traceopt::fdpo::preference_differentials(pair.scores_l, pair.scores_p);
  EXPECT_NEAR(flipped_desc, -delta_desc, 1e-12);
  EXPECT_NEAR(flipped_reason, -delta_reason, 1e-12);
}

TEST(SegmentMargin, MatchesDirectLogProbAlgebra) {
  const PreferencePair pair = make_pair("margin-1", 1.0, 2.0);
  BigramPolicy policy(small_policy_config(), 11);
  const auto reference = policy.clone();
  EXPECT_NEAR(
      traceopt::fdpo::segment_margin(policy, *reference, pair, Segment::desc), 0.0,
      1e-15);

  std::vector<double> params = policy.parameters();
  std::mt19937_64 rng(12);
  std::normal_distribution<double> noise(0.0, 0.3);
  for (double& p : params) p += noise(rng);
  policy.set_parameters(params);

  for (Segment segment : {Segment::desc, Segment::reason}) {
    const double expected =
        (policy.segment_logprob(pair, segment, true) -
         reference->segment_logprob(pair, segment, true)) -
        (policy.segment_logprob(pair, segment, false) -
         reference->segment_logprob(pair, segment, false));
    EXPECT_NEAR(
        traceopt::fdpo::segment_margin(policy, *reference, pair, segment),
        expected, 1e-12);
  }
}

TEST(SegmentMargin, RejectsIncomparableVocabularies) {
  const PreferencePair pair = make_pair("margin-2", 1.0, 2.0);
  BigramPolicy policy(small_policy_config(), 3);
  BigramPolicyConfig other = small_policy_config();
  other.vocab_size = 8;
  BigramPolicy reference(other, 3);
  EXPECT_THROW(
      traceopt::fdpo::segment_margin(policy, reference, pair, Segment::desc),
      VocabularyMismatch);
}

TEST(FdpoLoss, IsLogTwoWhenPolicyEqualsReference) {
  std::mt19937_64 rng(31);
  std::vector<PreferencePair> batch;
  for (int i = 0; i < 3; ++i) {
    batch.push_back(random_pair(rng, "logtwo-" + std::to_string(i)));
  }
  BigramPolicy policy(small_policy_config(), 7);
  const auto reference = policy.clone();

  const auto result = traceopt::fdpo::fdpo_loss(batch, policy, *reference, {});
  EXPECT_NEAR(result.loss, std::log(2.0), 1e-12);
  EXPECT_EQ(result.gradient.size(), policy.parameter_count());
}

TEST(FdpoLoss, MatchesAScalarOracleOnImportedLogProbs) {
  // One pair with hand-picked log-probs; every quantity below is then a
  // short long-double computation.
  const auto dir = testsupport::scratch_dir("fdpo_oracle");
  testsupport::write_file(
      dir / "table.jsonl",
      R"({"pair_id":"ora-1","segment":"desc","side":"positive","logp_policy":-1.5,"logp_reference":-1.0})"
      "\n"
      R"({"pair_id":"ora-1","segment":"desc","side":"negative","logp_policy":-2.0,"logp_reference":-2.5})"
      "\n"
      R"({"pair_id":"ora-1","segment":"reason","side":"positive","logp_policy":-0.5,"logp_reference":-0.75})"
      "\n"
      R"({"pair_id":"ora-1","segment":"reason","side":"negative","logp_policy":-3.0,"logp_reference":-1.25})"
      "\n");
  const auto [policy, reference] = traceopt::fdpo::load_external_policies(dir / "table.jsonl");

  PreferencePair pair = make_pair("ora-1", 1.0, 3.0);
  FdpoConfig config;  // beta 0.1, alpha 0.3, lambda 0.6

  // Margins: desc (-1.5 + 1.0) - (-2.0 + 2.5) = -1.0;
  //          reason (-0.5 + 0.75) - (-3.0 + 1.25) = 2.0.
  const double margin_desc =
      traceopt::fdpo::segment_margin(*policy, *reference, pair, Segment::desc);
  const double margin_reason =
      traceopt::fdpo::segment_margin(*policy, *reference, pair, Segment::reason);
  EXPECT_NEAR(margin_desc, -1.0, 1e-12);
  EXPECT_NEAR(margin_reason, 2.0, 1e-12);

  const auto [w_desc, w_reason] =
      traceopt::fdpo::segment_weights(pair.delta_desc, pair.delta_reason, 0.6);
  const auto [beta_desc, beta_reason] =
      traceopt::fdpo::segment_betas(0.1, 0.3, w_desc, w_reason);
  const long double z = static_cast<long double>(beta_desc) * margin_desc +
                        static_cast<long double>(beta_reason) * margin_reason;
  const double expected = static_cast<double>(std::log(1.0L + std::exp(-z)));

  const auto result =
      traceopt::fdpo::fdpo_loss({pair}, *policy, *reference, config);
  EXPECT_NEAR(result.loss, expected, 1e-12);
  EXPECT_TRUE(result.gradient.empty());
}

TEST(FdpoLoss, ReducesToTheIndependentDpoBaselineAtAlphaZero) {
  std::mt19937_64 rng(404);
  std::vector<PreferencePair> pool;
  for (int i = 0; i < 8; ++i) {
    pool.push_back(random_pair(rng, "red-" + std::to_string(i)));
  }
  BigramPolicy policy(small_policy_config(), 17);
  const auto reference = policy.clone();
  std::uniform_real_distribution<double> ubeta(0.01, 2.0);
  std::uniform_real_distribution<double> ulambda(0.1, 5.0);
  std::uniform_int_distribution<int> usize(1, 4);
  std::uniform_int_distribution<std::size_t> upick(0, pool.size() - 1);
  std::normal_distribution<double> noise(0.0, 0.05);

  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<PreferencePair> batch;
    const int n = usize(rng);
    for (int k = 0; k < n; ++k) batch.push_back(pool[upick(rng)]);

    std::vector<double> params = policy.parameters();
    for (double& p : params) p += noise(rng);
    policy.set_parameters(params);

    FdpoConfig config;
    config.alpha = 0.0;
    config.beta = ubeta(rng);
    config.lambda = ulambda(rng);

    const double weighted =
        traceopt::fdpo::fdpo_loss(batch, policy, *reference, config).loss;
    const double baseline =
        traceopt::fdpo::dpo_loss(batch, policy, *reference, config.beta);
    worst = std::max(worst, std::abs(weighted - baseline));
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(FdpoLoss, GradientMatchesCentralFiniteDifferences) {
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> ubeta(0.05, 0.5);
  std::uniform_real_distribution<double> ualpha(0.0, 1.0);
  std::uniform_real_distribution<double> ulambda(0.2, 3.0);
  std::uniform_int_distribution<int> usize(1, 3);

  const double step = 1e-4;
  double worst_rel = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<PreferencePair> batch;
    const int n = usize(rng);
    for (int k = 0; k < n; ++k) {
      batch.push_back(
          random_pair(rng, "fd-" + std::to_string(trial) + "-" + std::to_string(k)));
    }
    BigramPolicy policy(small_policy_config(), 1000 + trial);
    const auto reference = policy.clone();
    // Move off the symmetric point so margins and the sigmoid are generic.
    std::vector<double> params = policy.parameters();
    std::normal_distribution<double> noise(0.0, 0.2);
    for (double& p : params) p += noise(rng);
    policy.set_parameters(params);

    FdpoConfig config;
    config.beta = ubeta(rng);
    config.alpha = ualpha(rng);
    config.lambda = ulambda(rng);

    const auto analytic =
        traceopt::fdpo::fdpo_loss(batch, policy, *reference, config);
    ASSERT_EQ(analytic.gradient.size(), params.size());

    // Per-instance vector comparison: the error of each component is read
    // against the largest finite-difference component, so zero-gradient
    // entries do not amplify finite-difference roundoff into false alarms.
    double max_diff = 0.0;
    double max_fd = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto probe = [&](double delta) {
        std::vector<double> nudged = params;
        nudged[i] += delta;
        policy.set_parameters(nudged);
        return traceopt::fdpo::fdpo_loss(batch, policy, *reference, config).loss;
      };
      const double fd = (probe(step) - probe(-step)) / (2.0 * step);
      max_diff = std::max(max_diff, std::abs(analytic.gradient[i] - fd));
      max_fd = std::max(max_fd, std::abs(fd));
    }
    policy.set_parameters(params);
    worst_rel = std::max(worst_rel, max_diff / std::max(1e-9, max_fd));
  }
  EXPECT_LT(worst_rel, 1e-5);
}

TEST(FdpoLoss, RefusesEmptyBatches) {
  BigramPolicy policy(small_policy_config(), 1);
  const auto reference = policy.clone();
  EXPECT_THROW(traceopt::fdpo::fdpo_loss({}, policy, *reference, {}),
               ValidationError);
  EXPECT_THROW(traceopt::fdpo::dpo_loss({}, policy, *reference, 0.1),
               ValidationError);
}

TEST(PairwiseAccuracy, CountsPositiveMarginsPerSegment) {
  // Margins by construction: ora-1 desc -1, reason +2; ora-2 both +0.5.
  const auto dir = testsupport::scratch_dir("fdpo_acc");
  testsupport::write_file(
      dir / "table.jsonl",
      R"({"pair_id":"ora-1","segment":"desc","side":"positive","logp_policy":-1.5,"logp_reference":-1.0})"
      "\n"
      R"({"pair_id":"ora-1","segment":"desc","side":"negative","logp_policy":-2.0,"logp_reference":-2.5})"
      "\n"
      R"({"pair_id":"ora-1","segment":"reason","side":"positive","logp_policy":-0.5,"logp_reference":-0.75})"
      "\n"
      R"({"pair_id":"ora-1","segment":"reason","side":"negative","logp_policy":-3.0,"logp_reference":-1.25})"
      "\n"
      R"({"pair_id":"ora-2","segment":"desc","side":"positive","logp_policy":-0.5,"logp_reference":-1.0})"
      "\n"
      R"({"pair_id":"ora-2","segment":"desc","side":"negative","logp_policy":-1.0,"logp_reference":-1.0})"
      "\n"
      R"({"pair_id":"ora-2","segment":"reason","side":"positive","logp_policy":-0.5,"logp_reference":-1.0})"
      "\n"
      R"({"pair_id":"ora-2","segment":"reason","side":"negative","logp_policy":-1.0,"logp_reference":-1.0})"
      "\n");
  const auto [policy, reference] =
      traceopt::fdpo::load_external_policies(dir / "table.jsonl");

  const std::vector<PreferencePair> pairs = {make_pair("ora-1", 1.0, 3.0),
                                             make_pair("ora-2", 0.5, 0.5)};
  const auto [acc_desc, acc_reason] =
      traceopt::fdpo::pairwise_accuracy(pairs, *policy, *reference);
  EXPECT_NEAR(acc_desc, 0.5, 1e-12);
  EXPECT_NEAR(acc_reason, 1.0, 1e-12);

  EXPECT_THROW(traceopt::fdpo::pairwise_accuracy({}, *policy, *reference),
               ValidationError);
}

TEST(MetricsJson, CarriesStepLossAndAccuracies) {
  const traceopt::fdpo::StepMetrics metrics{7, 0.625, 0.5, 0.75};
  const nlohmann::json j = traceopt::fdpo::metrics_to_json(metrics);
  EXPECT_EQ(j.at("step").get<int>(), 7);
  EXPECT_DOUBLE_EQ(j.at("loss").get<double>(), 0.625);
  EXPECT_DOUBLE_EQ(j.at("acc_desc").get<double>(), 0.5);
  EXPECT_DOUBLE_EQ(j.at("acc_reason").get<double>(), 0.75);
}

TEST(ConfigValidation, RejectsOutOfDomainSettings) {
  const auto check = [](auto mutate) {
    FdpoConfig config;
    mutate(config);
    EXPECT_THROW(traceopt::fdpo::validate(config), ValidationError);
  };
  check([](FdpoConfig& c) { c.beta = 0.0; });
  check([](FdpoConfig& c) { c.alpha = -0.1; });
  check([](FdpoConfig& c) { c.alpha = 1.1; });
  check([](FdpoConfig& c) { c.learning_rate = 0.0; });
  check([](FdpoConfig& c) { c.steps = -1; });
  check([](FdpoConfig& c) { c.batch_size = -2; });
  check([](FdpoConfig& c) { c.holdout_fraction = 1.0; });
  check([](FdpoConfig& c) { c.holdout_fraction = -0.1; });

  FdpoConfig config;
  config.lambda = 0.0;
  EXPECT_THROW(traceopt::fdpo::validate(config), NonPositiveLambda);
}

std::vector<PreferencePair> training_dataset(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<PreferencePair> dataset;
  for (int i = 0; i < count; ++i) {
    dataset.push_back(random_pair(rng, "train-" + std::to_string(i)));
  }
  return dataset;
}

TEST(Train, IsDeterministicForAFixedSeed) {
  const auto dataset = training_dataset(12, 61);
  FdpoConfig config;
  config.steps = 5;
  config.seed = 99;
  BigramPolicyConfig policy_config = small_policy_config();

  const auto first = traceopt::fdpo::train(dataset, config, policy_config);
  const auto second = traceopt::fdpo::train(dataset, config, policy_config);

  ASSERT_EQ(first.metrics.size(), 5u);
  ASSERT_EQ(second.metrics.size(), 5u);
  for (std::size_t i = 0; i < first.metrics.size(); ++i) {
    EXPECT_EQ(first.metrics[i].step, static_cast<int>(i) + 1);
    EXPECT_EQ(first.metrics[i].loss, second.metrics[i].loss);
    EXPECT_EQ(first.metrics[i].acc_desc, second.metrics[i].acc_desc);
    EXPECT_EQ(first.metrics[i].acc_reason, second.metrics[i].acc_reason);
  }
  EXPECT_EQ(first.policy->parameters(), second.policy->parameters());
  EXPECT_EQ(first.holdout, second.holdout);
  EXPECT_EQ(first.holdout.size(), 2u);  // floor(0.2 * 12)
}

TEST(Train, SharesInitializationAcrossObjectivesAndFreezesTheReference) {
  const auto dataset = training_dataset(10, 62);
  FdpoConfig config;
  config.steps = 3;
  config.seed = 8;
  config.learning_rate = 0.5;
  BigramPolicyConfig policy_config = small_policy_config();

  const auto weighted = traceopt::fdpo::train(dataset, config, policy_config, true);
  const auto baseline = traceopt::fdpo::train(dataset, config, policy_config, false);

  // Same seed, same init, same split; only the objective differs.
  EXPECT_EQ(weighted.reference->parameters(), baseline.reference->parameters());
  EXPECT_EQ(weighted.holdout, baseline.holdout);
  EXPECT_NE(weighted.policy->parameters(), weighted.reference->parameters());
}

TEST(Train, ReportsPreUpdateLossAndDescendsOnDuplicatedPairs) {
  // Identical pairs and a single context make every batch equivalent, so the
  // first metric row must be the symmetric-start loss log(2) even with
  // mini-batches, and descent must show up within a few steps.
  std::vector<PreferencePair> dataset;
  for (int i = 0; i < 3; ++i) {
    dataset.push_back(make_pair("dup-" + std::to_string(i), 1.0, 2.0));
  }
  FdpoConfig config;
  config.steps = 4;
  config.seed = 5;
  config.batch_size = 1;
  config.holdout_fraction = 0.0;
  config.learning_rate = 0.5;
  BigramPolicyConfig policy_config = small_policy_config();
  policy_config.num_contexts = 1;

  const auto result = traceopt::fdpo::train(dataset, config, policy_config);
  ASSERT_EQ(result.metrics.size(), 4u);
  EXPECT_NEAR(result.metrics.front().loss, std::log(2.0), 1e-12);
  EXPECT_LT(result.metrics.back().loss, result.metrics.front().loss);
  EXPECT_TRUE(result.holdout.empty());
}

TEST(Train, SurfacesNonFiniteLossWithTheStep) {
  const std::vector<PreferencePair> dataset = {make_pair("blowup-0", 1.0, 2.0)};
  FdpoConfig config;
  config.steps = 4;
  config.seed = 1;
  config.beta = 5.0;
  config.holdout_fraction = 0.0;
  config.learning_rate = 1e308;  // overflows a logit to +-inf in one update
  try {
    traceopt::fdpo::train(dataset, config, small_policy_config());
    FAIL() << "expected NonFiniteLoss";
  } catch (const traceopt::fdpo::NonFiniteLoss& e) {
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
  }
}

TEST(Train, RejectsEmptyDatasets) {
  EXPECT_THROW(traceopt::fdpo::train({}, {}, small_policy_config()),
               ValidationError);
}

}  // namespace
