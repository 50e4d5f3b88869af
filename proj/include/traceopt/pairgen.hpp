#pragma once

/// @file
/// Preference-dataset construction: pool eight candidate responses per task
/// (four sources, two variants each), pick the best and worst by total
/// composite score, and manufacture hard negatives by perturbing only the
/// numeric conclusion of a good response.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "traceopt/judge.hpp"
#include "traceopt/pair.hpp"

namespace traceopt::pairgen {

class GeneratorFailure : public ExternalError {
 public:
  using ExternalError::ExternalError;
};

class MalformedCandidate : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class UnscoredCandidate : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NoConclusionValue : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class SchemaViolation : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

enum class CandidateSource { m3cts, external_a, external_b, sft_model };

std::string_view to_string(CandidateSource source);
CandidateSource source_from_string(std::string_view s);

struct CandidateRecord {
  std::string task_id;
  CandidateSource source = CandidateSource::m3cts;
  int variant = 1;  ///< 1 or 2
  longcot::LongCoTResponse response;
  std::optional<rewards::SegmentScores> scores;
};

nlohmann::json candidate_to_json(const CandidateRecord& record);
CandidateRecord candidate_from_json(const nlohmann::json& j);

/// Source adapter: two response variants per task.
class CandidateGenerator {
 public:
  virtual ~CandidateGenerator() = default;
  virtual CandidateSource source() const = 0;
  /// Exactly two response texts for the task; throw on unavailability.
  virtual std::vector<std::string> generate(const TaskInstance& task) = 0;
};

/// Replays variants from a JSONL fixture of {task_id, variants: [t1, t2]}.
/// The search CLI emits its top paths in this format, so a finished search
/// can feed a pool directly.
class ScriptedCandidateGenerator : public CandidateGenerator {
 public:
  ScriptedCandidateGenerator(CandidateSource source,
                             const std::filesystem::path& fixture);

  CandidateSource source() const override { return source_; }
  std::vector<std::string> generate(const TaskInstance& task) override;

 private:
  CandidateSource source_;
  std::map<std::string, std::vector<std::string>> variants_;
};

/// Eight unscored records: two variants from each of four distinct sources,
/// ordered by (source, variant).
std::vector<CandidateRecord> build_pool(
    const TaskInstance& task,
    const std::vector<CandidateGenerator*>& generators);

/// Scores every record in place with the judge-backed composite scores.
void score_pool(std::vector<CandidateRecord>& pool, const TaskInstance& task,
                judge::JudgeBackend& judge);

/// Positive = argmax, negative = argmin of score_desc + score_reason, ties
/// by pool order. An all-equal pool selects the first two records and flags
/// the pair "degenerate".
PreferencePair select_pair(const TaskInstance& task,
                           const std::vector<CandidateRecord>& pool,
                           const std::string& pair_id);

struct PerturbConfig {
  double min_shift = 0.10;  ///< multiplicative band, lower edge
  double max_shift = 0.30;  ///< multiplicative band, upper edge
  /// When set and the original conclusion is within 25% of this value, the
  /// perturbed value must fall outside that band (the verdict flips).
  std::optional<double> ground_truth_m;
  int max_attempts = 64;              ///< rejection samples before grid fallback
  double conclusion_penalty = 1.0;    ///< subtracted from the negative's R_lc
};

/// Replaces the final numeric value of the conclusion with one shifted by a
/// factor in [1-max, 1-min] or [1+min, 1+max], rounded to the input's
/// decimal precision and guaranteed different. Everything before the
/// conclusion is untouched.
longcot::LongCoTResponse perturb_conclusion(const longcot::LongCoTResponse& positive,
                                            std::mt19937_64& rng,
                                            const PerturbConfig& config = {});

/// Wraps perturb_conclusion into a pair: the negative inherits the
/// positive's scores with the conclusion penalty applied to R_lc.
PreferencePair make_perturbed_pair(const TaskInstance& task,
                                   const longcot::LongCoTResponse& positive,
                                   const rewards::SegmentScores& scores_p,
                                   std::mt19937_64& rng,
                                   const PerturbConfig& config,
                                   const std::string& pair_id);

/// JSONL round trip; read_pairs reports the offending line on bad records.
void write_pairs(const std::filesystem::path& path,
                 const std::vector<PreferencePair>& pairs);
std::vector<PreferencePair> read_pairs(const std::filesystem::path& path);

}  // namespace traceopt::pairgen
