#pragma once

/// @file
/// Toy policies for exercising the preference objective end to end. The
/// tabular bigram policy has closed-form log-probabilities and gradients;
/// the external table policy imports per-segment log-probs produced by a
/// real language model so the trainer stays framework-free.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "traceopt/common.hpp"
#include "traceopt/pair.hpp"

namespace traceopt::fdpo {

class EmptySegment : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class VocabularyMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Deterministic word -> bucket tokenizer: lowercased [a-z0-9]+ runs hashed
/// into a fixed vocabulary. Not a natural-language tokenizer; it only has to
/// be stable and total.
class HashTokenizer {
 public:
  explicit HashTokenizer(int vocab_size);

  std::vector<int> tokenize(std::string_view text) const;
  int vocab_size() const { return vocab_size_; }

 private:
  int vocab_size_;
};

/// Policy contract the trainer sees: per-segment log-likelihoods of either
/// side of a pair, plus a flat parameter vector with exact gradients.
/// Implementations with no trainable parameters report parameter_count 0.
class PolicyModel {
 public:
  virtual ~PolicyModel() = default;

  /// log prob of one segment of one side of the pair; finite and <= 0.
  virtual double segment_logprob(const PreferencePair& pair, Segment segment,
                                 bool positive) const = 0;

  /// Two policies are comparable only when their signatures match.
  virtual std::string vocabulary_signature() const = 0;

  virtual std::size_t parameter_count() const = 0;
  virtual const std::vector<double>& parameters() const = 0;
  virtual void set_parameters(std::vector<double> params) = 0;

  /// params -= learning_rate * grad; grad.size() == parameter_count().
  virtual void apply_gradient(const std::vector<double>& grad,
                              double learning_rate) = 0;

  /// Adds coeff * d(segment_logprob)/d(params) into grad.
  virtual void accumulate_segment_grad(const PreferencePair& pair, Segment segment,
                                       bool positive, double coeff,
                                       std::vector<double>& grad) const = 0;

  virtual std::unique_ptr<PolicyModel> clone() const = 0;
};

struct BigramPolicyConfig {
  int vocab_size = 16;
  int num_contexts = 4;
  double init_scale = 0.1;  ///< stddev of the seeded normal logit init
};

/// Tabular autoregressive bigram model. Parameters are unnormalized logits
/// L[context][prev][next] with prev ranging over vocab + BOS; the segment
/// log-likelihood is the sum of per-transition log-softmax terms, so both
/// the likelihood and its gradient are exact.
class BigramPolicy : public PolicyModel {
 public:
  BigramPolicy(BigramPolicyConfig config, std::uint64_t seed);

  int context_for(const std::string& task_id) const;
  const HashTokenizer& tokenizer() const { return tokenizer_; }
  int bos() const { return config_.vocab_size; }

  /// Sum over transitions of log softmax(L[context][prev])[next].
  double sequence_logprob(int context, const std::vector<int>& tokens) const;
  void accumulate_sequence_grad(int context, const std::vector<int>& tokens,
                                double coeff, std::vector<double>& grad) const;

  double segment_logprob(const PreferencePair& pair, Segment segment,
                         bool positive) const override;
  std::string vocabulary_signature() const override;
  std::size_t parameter_count() const override { return logits_.size(); }
  const std::vector<double>& parameters() const override { return logits_; }
  void set_parameters(std::vector<double> params) override;
  void apply_gradient(const std::vector<double>& grad,
                      double learning_rate) override;
  void accumulate_segment_grad(const PreferencePair& pair, Segment segment,
                               bool positive, double coeff,
                               std::vector<double>& grad) const override;
  std::unique_ptr<PolicyModel> clone() const override;

  const BigramPolicyConfig& config() const { return config_; }

  nlohmann::json to_json() const;
  static BigramPolicy from_json(const nlohmann::json& j);

 private:
  std::size_t row_index(int context, int prev) const;
  void refresh_cache() const;
  std::vector<int> segment_tokens(const PreferencePair& pair, Segment segment,
                                  bool positive) const;

  BigramPolicyConfig config_;
  HashTokenizer tokenizer_;
  std::vector<double> logits_;
  /// Per-row log-normalizers and softmax probabilities, rebuilt lazily
  /// after parameter changes.
  mutable std::vector<double> row_lse_;
  mutable std::vector<double> row_prob_;
  mutable bool cache_dirty_ = true;
};

/// Log-probs imported from a JSONL file of
/// {pair_id, segment, side, logp_policy, logp_reference}. One table backs
/// two read-only policies: the policy view and the reference view.
struct ExternalLogProbTable {
  struct Entry {
    double logp_policy;
    double logp_reference;
  };
  std::map<std::string, Entry> entries;  ///< key: pair_id|segment|side
  std::string signature;                 ///< content hash; views must agree

  static std::string key(const std::string& pair_id, Segment segment, bool positive);
  static ExternalLogProbTable load(const std::filesystem::path& path);
};

class ExternalLogProbPolicy : public PolicyModel {
 public:
  ExternalLogProbPolicy(std::shared_ptr<const ExternalLogProbTable> table,
                        bool reference_view);

  double segment_logprob(const PreferencePair& pair, Segment segment,
                         bool positive) const override;
  std::string vocabulary_signature() const override;
  std::size_t parameter_count() const override { return 0; }
  const std::vector<double>& parameters() const override;
  void set_parameters(std::vector<double> params) override;
  void apply_gradient(const std::vector<double>& grad,
                      double learning_rate) override;
  void accumulate_segment_grad(const PreferencePair& pair, Segment segment,
                               bool positive, double coeff,
                               std::vector<double>& grad) const override;
  std::unique_ptr<PolicyModel> clone() const override;

 private:
  std::shared_ptr<const ExternalLogProbTable> table_;
  bool reference_view_;
};

/// Loads the table once and returns the (policy, reference) views.
std::pair<std::unique_ptr<PolicyModel>, std::unique_ptr<PolicyModel>>
load_external_policies(const std::filesystem::path& path);

}  // namespace traceopt::fdpo
