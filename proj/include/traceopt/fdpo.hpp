#pragma once

/// @file
/// Segment-weighted preference optimization. Each pair carries composite
/// score differentials for its description and reasoning segments; a two-way
/// softmax turns those differentials into segment weights, the weights scale
/// the preference temperature per segment, and the loss is the standard
/// sigmoid preference objective over the weighted sum of segment margins.
/// With alpha = 0 the weighting collapses and the objective equals DPO on
/// the whole response.

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "json.hpp"
#include "traceopt/pair.hpp"
#include "traceopt/policy.hpp"

namespace traceopt::fdpo {

class NonPositiveLambda : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class WeightSumViolation : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Numeric failure during training; message carries the offending step.
class NonFiniteLoss : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

struct FdpoConfig {
  double beta = 0.1;    ///< preference temperature
  double alpha = 0.3;   ///< maximum relative scaling amplitude, in [0, 1]
  double lambda = 0.6;  ///< weight sensitivity to the differential gap
  double learning_rate = 0.05;
  int steps = 500;
  std::uint64_t seed = 0;
  int batch_size = 0;            ///< 0 = full batch
  double holdout_fraction = 0.2; ///< held out for pairwise accuracy
};

void validate(const FdpoConfig& config);

/// (delta_desc, delta_reason): signed composite-score differences, positive
/// side minus negative side.
std::pair<double, double> preference_differentials(
    const rewards::SegmentScores& scores_p, const rewards::SegmentScores& scores_l);

/// Two-way softmax over (lambda * delta); returns (w_desc, w_reason) with
/// w_desc + w_reason = 1. Evaluated in stable sigmoid form so |lambda*delta|
/// up to 700 keeps the sum within 1e-12.
std::pair<double, double> segment_weights(double delta_desc, double delta_reason,
                                          double lambda);

/// beta_s = beta * (1 + alpha * (2*w_s - 1)); conserves beta_d + beta_r = 2b.
std::pair<double, double> segment_betas(double beta, double alpha, double w_desc,
                                        double w_reason);

/// Log-likelihood-ratio margin of the positive side over the negative side
/// for one segment: [log pi(p) - log ref(p)] - [log pi(n) - log ref(n)].
double segment_margin(const PolicyModel& policy, const PolicyModel& reference,
                      const PreferencePair& pair, Segment segment);

struct LossResult {
  double loss = 0.0;
  /// Exact analytic gradient w.r.t. policy parameters; empty when the
  /// policy has no trainable parameters.
  std::vector<double> gradient;
};

/// Mean over the batch of -log sigmoid(beta_d * F_d + beta_r * F_r), with
/// per-pair betas derived from that pair's stored differentials.
LossResult fdpo_loss(const std::vector<PreferencePair>& batch,
                     const PolicyModel& policy, const PolicyModel& reference,
                     const FdpoConfig& config);

/// Independent baseline: -log sigmoid(beta * F_whole) where F_whole is the
/// whole-response margin (sum of both segment margins). Kept free of the
/// weighting code so the alpha = 0 reduction is a genuine cross-check.
double dpo_loss(const std::vector<PreferencePair>& batch, const PolicyModel& policy,
                const PolicyModel& reference, double beta);

struct StepMetrics {
  int step = 0;
  double loss = 0.0;
  double acc_desc = 0.0;
  double acc_reason = 0.0;
};

nlohmann::json metrics_to_json(const StepMetrics& m);

/// Fraction of pairs whose segment margin is positive, per segment.
std::pair<double, double> pairwise_accuracy(const std::vector<PreferencePair>& pairs,
                                            const PolicyModel& policy,
                                            const PolicyModel& reference);

struct TrainResult {
  std::unique_ptr<PolicyModel> policy;
  std::unique_ptr<PolicyModel> reference;  ///< frozen copy of the init
  std::vector<StepMetrics> metrics;        ///< one row per step, pre-update
  std::vector<std::size_t> holdout;        ///< dataset indices held out
};

/// Seeded full-batch (or round-robin mini-batch) gradient descent from a
/// fresh bigram policy. use_fdpo = false trains the DPO baseline instead;
/// everything else (init, split, schedule) stays identical.
TrainResult train(const std::vector<PreferencePair>& dataset,
                  const FdpoConfig& config,
                  const BigramPolicyConfig& policy_config = {},
                  bool use_fdpo = true);

}  // namespace traceopt::fdpo
