#include "traceopt/fdpo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace traceopt::fdpo {

namespace {

// log(1 + e^t) without overflow on either side.
double softplus(double t) {
  if (t > 0.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

// 1 / (1 + e^t) = sigmoid(-t), stable for all t.
double sigmoid_neg(double t) {
  if (t >= 0.0) {
    double e = std::exp(-t);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(t));
}

void check_comparable(const PolicyModel& policy, const PolicyModel& reference) {
  if (policy.vocabulary_signature() != reference.vocabulary_signature()) {
    throw VocabularyMismatch("policy and reference are not comparable: '" +
                             policy.vocabulary_signature() + "' vs '" +
                             reference.vocabulary_signature() + "'");
  }
}

}  // namespace

void validate(const FdpoConfig& config) {
  if (!(config.beta > 0.0)) {
    throw ValidationError("beta must be positive");
  }
  if (config.alpha < 0.0 || config.alpha > 1.0) {
    throw ValidationError("alpha must lie in [0, 1]");
  }
  if (!(config.lambda > 0.0)) {
    throw NonPositiveLambda("lambda must be positive");
  }
  if (!(config.learning_rate > 0.0)) {
    throw ValidationError("learning_rate must be positive");
  }
  if (config.steps < 0) {
    throw ValidationError("steps must be non-negative");
  }
  if (config.batch_size < 0) {
    throw ValidationError("batch_size must be non-negative (0 = full batch)");
  }
  if (config.holdout_fraction < 0.0 || config.holdout_fraction >= 1.0) {
    throw ValidationError("holdout_fraction must lie in [0, 1)");
  }
}

std::pair<double, double> preference_differentials(
    const rewards::SegmentScores& scores_p,
    const rewards::SegmentScores& scores_l) {
  rewards::validate(scores_p);
  rewards::validate(scores_l);
  return {scores_p.score_desc - scores_l.score_desc,
          scores_p.score_reason - scores_l.score_reason};
}

std::pair<double, double> segment_weights(double delta_desc, double delta_reason,
                                          double lambda) {
  if (!(lambda > 0.0)) {
    throw NonPositiveLambda("lambda must be positive, got " +
                            std::to_string(lambda));
  }
  if (!std::isfinite(delta_desc) || !std::isfinite(delta_reason)) {
    throw ValidationError("differentials must be finite");
  }
  // Softmax over two logits reduces to a sigmoid of the gap; evaluating both
  // sides as sigmoids keeps each weight in (0, 1) without forming e^{±x}.
  double x = lambda * (delta_reason - delta_desc);
  double w_reason = sigmoid_neg(-x);
  double w_desc = sigmoid_neg(x);
  return {w_desc, w_reason};
}

std::pair<double, double> segment_betas(double beta, double alpha, double w_desc,
                                        double w_reason) {
  if (!(beta > 0.0)) throw ValidationError("beta must be positive");
  if (alpha < 0.0 || alpha > 1.0) throw ValidationError("alpha must lie in [0, 1]");
  if (std::abs(w_desc + w_reason - 1.0) > 1e-9) {
    throw WeightSumViolation("segment weights must sum to 1, got " +
                             std::to_string(w_desc + w_reason));
  }
  double beta_desc = beta * (1.0 + alpha * (2.0 * w_desc - 1.0));
  double beta_reason = beta * (1.0 + alpha * (2.0 * w_reason - 1.0));
  return {beta_desc, beta_reason};
}

double segment_margin(const PolicyModel& policy, const PolicyModel& reference,
                      const PreferencePair& pair, Segment segment) {
  check_comparable(policy, reference);
  double pos = policy.segment_logprob(pair, segment, true) -
               reference.segment_logprob(pair, segment, true);
  double neg = policy.segment_logprob(pair, segment, false) -
               reference.segment_logprob(pair, segment, false);
  return pos - neg;
}

LossResult fdpo_loss(const std::vector<PreferencePair>& batch,
                     const PolicyModel& policy, const PolicyModel& reference,
                     const FdpoConfig& config) {
  if (batch.empty()) throw ValidationError("loss needs a non-empty batch");
  validate(config);
  check_comparable(policy, reference);

  LossResult result;
  result.gradient.assign(policy.parameter_count(), 0.0);
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  for (const PreferencePair& pair : batch) {
    auto [w_desc, w_reason] =
        segment_weights(pair.delta_desc, pair.delta_reason, config.lambda);
    auto [beta_desc, beta_reason] =
        segment_betas(config.beta, config.alpha, w_desc, w_reason);

    double margin_desc = segment_margin(policy, reference, pair, Segment::desc);
    double margin_reason = segment_margin(policy, reference, pair, Segment::reason);
    double z = beta_desc * margin_desc + beta_reason * margin_reason;
    result.loss += softplus(-z) * inv_batch;

    if (!result.gradient.empty()) {
      // d/dtheta of -log sigmoid(z) is -sigmoid(-z) * dz/dtheta.
      double c = -sigmoid_neg(z) * inv_batch;
      policy.accumulate_segment_grad(pair, Segment::desc, true, c * beta_desc,
                                     result.gradient);
      policy.accumulate_segment_grad(pair, Segment::desc, false, -c * beta_desc,
                                     result.gradient);
      policy.accumulate_segment_grad(pair, Segment::reason, true, c * beta_reason,
                                     result.gradient);
      policy.accumulate_segment_grad(pair, Segment::reason, false, -c * beta_reason,
                                     result.gradient);
    }
  }
  return result;
}

double dpo_loss(const std::vector<PreferencePair>& batch, const PolicyModel& policy,
                const PolicyModel& reference, double beta) {
  if (batch.empty()) throw ValidationError("loss needs a non-empty batch");
  if (!(beta > 0.0)) throw ValidationError("beta must be positive");
  check_comparable(policy, reference);
  double loss = 0.0;
  for (const PreferencePair& pair : batch) {
    // Whole-response log-likelihood is the sum over both segments.
    auto whole = [&](const PolicyModel& model, bool positive) {
      return model.segment_logprob(pair, Segment::desc, positive) +
             model.segment_logprob(pair, Segment::reason, positive);
    };
    double margin = (whole(policy, true) - whole(reference, true)) -
                    (whole(policy, false) - whole(reference, false));
    loss += softplus(-beta * margin);
  }
  return loss / static_cast<double>(batch.size());
}

nlohmann::json metrics_to_json(const StepMetrics& m) {
  return {{"step", m.step},
          {"loss", m.loss},
          {"acc_desc", m.acc_desc},
          {"acc_reason", m.acc_reason}};
}

std::pair<double, double> pairwise_accuracy(const std::vector<PreferencePair>& pairs,
                                            const PolicyModel& policy,
                                            const PolicyModel& reference) {
  if (pairs.empty()) throw ValidationError("accuracy needs at least one pair");
  int hits_desc = 0;
  int hits_reason = 0;
  for (const PreferencePair& pair : pairs) {
    if (segment_margin(policy, reference, pair, Segment::desc) > 0.0) ++hits_desc;
    if (segment_margin(policy, reference, pair, Segment::reason) > 0.0) {
      ++hits_reason;
    }
  }
  double n = static_cast<double>(pairs.size());
  return {hits_desc / n, hits_reason / n};
}

TrainResult train(const std::vector<PreferencePair>& dataset,
                  const FdpoConfig& config, const BigramPolicyConfig& policy_config,
                  bool use_fdpo) {
  validate(config);
  if (dataset.empty()) throw ValidationError("training needs a non-empty dataset");

  std::mt19937_64 rng(config.seed);
  auto policy = std::make_unique<BigramPolicy>(policy_config, rng());

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  auto holdout_count = static_cast<std::size_t>(
      config.holdout_fraction * static_cast<double>(dataset.size()));
  TrainResult result;
  result.holdout.assign(order.begin(), order.begin() + holdout_count);

  std::vector<PreferencePair> train_pairs;
  std::vector<PreferencePair> holdout_pairs;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < holdout_count ? holdout_pairs : train_pairs).push_back(dataset[order[i]]);
  }
  if (train_pairs.empty()) {
    throw ValidationError("holdout fraction leaves no training pairs");
  }

  result.reference = policy->clone();

  // The DPO baseline is the alpha = 0 special case; running it through the
  // same code path keeps init, split, and schedule identical.
  FdpoConfig loss_config = config;
  if (!use_fdpo) loss_config.alpha = 0.0;

  const std::vector<PreferencePair>& eval_pairs =
      holdout_pairs.empty() ? train_pairs : holdout_pairs;

  for (int step = 1; step <= config.steps; ++step) {
    const std::vector<PreferencePair>* batch = &train_pairs;
    std::vector<PreferencePair> slice;
    if (config.batch_size > 0 &&
        static_cast<std::size_t>(config.batch_size) < train_pairs.size()) {
      std::size_t start = (static_cast<std::size_t>(step - 1) * config.batch_size) %
                          train_pairs.size();
      for (int k = 0; k < config.batch_size; ++k) {
        slice.push_back(train_pairs[(start + k) % train_pairs.size()]);
      }
      batch = &slice;
    }

    LossResult lr = fdpo_loss(*batch, *policy, *result.reference, loss_config);
    if (!std::isfinite(lr.loss)) {
      throw NonFiniteLoss("non-finite loss at step " + std::to_string(step));
    }

    auto [acc_desc, acc_reason] =
        pairwise_accuracy(eval_pairs, *policy, *result.reference);
    result.metrics.push_back({step, lr.loss, acc_desc, acc_reason});

    policy->apply_gradient(lr.gradient, config.learning_rate);
  }

  result.policy = std::move(policy);
  return result;
}

}  // namespace traceopt::fdpo
