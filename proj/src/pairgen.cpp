#include "traceopt/pairgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <tuple>

namespace traceopt::pairgen {

std::string_view to_string(CandidateSource source) {
  switch (source) {
    case CandidateSource::m3cts: return "m3cts";
    case CandidateSource::external_a: return "external_a";
    case CandidateSource::external_b: return "external_b";
    case CandidateSource::sft_model: return "sft_model";
  }
  return "m3cts";
}

CandidateSource source_from_string(std::string_view s) {
  if (s == "m3cts") return CandidateSource::m3cts;
  if (s == "external_a") return CandidateSource::external_a;
  if (s == "external_b") return CandidateSource::external_b;
  if (s == "sft_model") return CandidateSource::sft_model;
  throw ValidationError("unknown candidate source: " + std::string(s));
}

nlohmann::json candidate_to_json(const CandidateRecord& record) {
  nlohmann::json j = {{"task_id", record.task_id},
                      {"source", std::string(to_string(record.source))},
                      {"variant", record.variant},
                      {"text", longcot::render_longcot(record.response)}};
  if (record.scores) j["scores"] = rewards::scores_to_json(*record.scores);
  return j;
}

CandidateRecord candidate_from_json(const nlohmann::json& j) {
  CandidateRecord record;
  record.task_id = j.at("task_id").get<std::string>();
  record.source = source_from_string(j.at("source").get<std::string>());
  record.variant = j.at("variant").get<int>();
  if (record.variant != 1 && record.variant != 2) {
    throw ValidationError("candidate variant must be 1 or 2");
  }
  record.response = longcot::parse_longcot(j.at("text").get<std::string>());
  if (j.contains("scores")) {
    record.scores = rewards::scores_from_json(j.at("scores"));
  }
  return record;
}

ScriptedCandidateGenerator::ScriptedCandidateGenerator(
    CandidateSource source, const std::filesystem::path& fixture)
    : source_(source) {
  for_each_jsonl(fixture, [this, &fixture](std::size_t line,
                                           const nlohmann::json& record) {
    if (!record.contains("task_id") || !record.contains("variants")) {
      throw ValidationError(fixture.string() + ":" + std::to_string(line) +
                            ": scripted candidates need task_id and variants");
    }
    auto [it, inserted] = variants_.emplace(
        record.at("task_id").get<std::string>(),
        record.at("variants").get<std::vector<std::string>>());
    if (!inserted) {
      throw ValidationError(fixture.string() + ":" + std::to_string(line) +
                            ": duplicate task_id " + it->first);
    }
  });
}

std::vector<std::string> ScriptedCandidateGenerator::generate(
    const TaskInstance& task) {
  auto it = variants_.find(task.task_id);
  if (it == variants_.end()) {
    throw ExternalError("no scripted candidates for task '" + task.task_id +
                        "' from source " + std::string(to_string(source_)));
  }
  return it->second;
}

std::vector<CandidateRecord> build_pool(
    const TaskInstance& task, const std::vector<CandidateGenerator*>& generators) {
  if (generators.size() != 4) {
    throw ValidationError("a pool needs exactly 4 candidate sources, got " +
                          std::to_string(generators.size()));
  }
  std::set<CandidateSource> seen;
  for (CandidateGenerator* g : generators) {
    if (!seen.insert(g->source()).second) {
      throw ValidationError("duplicate candidate source: " +
                            std::string(to_string(g->source())));
    }
  }

  // Stable pool order: enum order over sources, then variant.
  std::vector<CandidateGenerator*> ordered = generators;
  std::sort(ordered.begin(), ordered.end(),
            [](CandidateGenerator* a, CandidateGenerator* b) {
              return static_cast<int>(a->source()) < static_cast<int>(b->source());
            });

  std::vector<CandidateRecord> pool;
  pool.reserve(8);
  for (CandidateGenerator* generator : ordered) {
    std::string source_name(to_string(generator->source()));
    std::vector<std::string> texts;
    try {
      texts = generator->generate(task);
    } catch (const std::exception& e) {
      throw GeneratorFailure("source " + source_name + " failed for task '" +
                             task.task_id + "': " + e.what());
    }
    if (texts.size() != 2) {
      throw GeneratorFailure("source " + source_name + " produced " +
                             std::to_string(texts.size()) +
                             " variants for task '" + task.task_id +
                             "', expected 2");
    }
    for (int variant = 1; variant <= 2; ++variant) {
      CandidateRecord record;
      record.task_id = task.task_id;
      record.source = generator->source();
      record.variant = variant;
      try {
        record.response = longcot::parse_longcot(texts[variant - 1]);
      } catch (const ValidationError& e) {
        throw MalformedCandidate("source " + source_name + " variant " +
                                 std::to_string(variant) + ": " + e.what());
      }
      pool.push_back(std::move(record));
    }
  }
  return pool;
}

void score_pool(std::vector<CandidateRecord>& pool, const TaskInstance& task,
                judge::JudgeBackend& judge) {
  for (CandidateRecord& record : pool) {
    record.scores = rewards::score_response(task, record.response, judge).scores;
  }
}

PreferencePair select_pair(const TaskInstance& task,
                           const std::vector<CandidateRecord>& pool,
                           const std::string& pair_id) {
  if (pool.size() != 8) {
    throw ValidationError("selection expects a completed pool of 8 candidates, got " +
                          std::to_string(pool.size()));
  }
  std::vector<double> totals;
  totals.reserve(pool.size());
  for (const CandidateRecord& record : pool) {
    if (!record.scores) {
      throw UnscoredCandidate("candidate " + std::string(to_string(record.source)) +
                              " variant " + std::to_string(record.variant) +
                              " has no scores");
    }
    totals.push_back(record.scores->score_desc + record.scores->score_reason);
  }

  std::size_t best = 0;
  std::size_t worst = 0;
  for (std::size_t i = 1; i < pool.size(); ++i) {
    if (totals[i] > totals[best]) best = i;
    if (totals[i] < totals[worst]) worst = i;
  }
  bool degenerate = totals[best] == totals[worst];
  if (best == worst) worst = best == 0 ? 1 : 0;

  PreferencePair pair;
  pair.pair_id = pair_id;
  pair.task = task;
  pair.positive = pool[best].response;
  pair.negative = pool[worst].response;
  pair.scores_p = *pool[best].scores;
  pair.scores_l = *pool[worst].scores;
  pair.delta_desc = pair.scores_p.score_desc - pair.scores_l.score_desc;
  pair.delta_reason = pair.scores_p.score_reason - pair.scores_l.score_reason;
  pair.origin = "selected";
  if (degenerate) pair.flags.push_back("degenerate");
  validate(pair);
  return pair;
}

namespace {

std::string format_decimals(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  return buf;
}

double unit_factor(const longcot::ConclusionValue& v) {
  // raw_value * factor = value_meters; safe even for raw 0 via unit lookup.
  if (v.raw_value != 0.0) return v.value_meters / v.raw_value;
  return 1.0;
}

bool within_band(double value_m, double truth_m) {
  return std::abs(value_m - truth_m) <= 0.25 * std::abs(truth_m);
}

}  // namespace

longcot::LongCoTResponse perturb_conclusion(const longcot::LongCoTResponse& positive,
                                            std::mt19937_64& rng,
                                            const PerturbConfig& config) {
  if (!(config.min_shift > 0.0) || !(config.max_shift >= config.min_shift) ||
      config.max_shift >= 1.0) {
    throw ValidationError("perturbation band must satisfy 0 < min <= max < 1");
  }
  auto values = longcot::extract_conclusion_values(positive);
  if (values.empty()) {
    throw NoConclusionValue("conclusion carries no numeric length to perturb");
  }
  // The final value is the answer by convention.
  const longcot::ConclusionValue target = values.back();

  bool must_flip = config.ground_truth_m &&
                   within_band(target.value_meters, *config.ground_truth_m);

  auto admissible = [&](double raw) {
    if (raw == target.raw_value) return false;
    if (must_flip &&
        within_band(raw * unit_factor(target), *config.ground_truth_m)) {
      return false;
    }
    return true;
  };
  auto rounded = [&](double factor) {
    return std::stod(format_decimals(target.raw_value * factor, target.decimals));
  };

  std::optional<double> chosen;
  std::uniform_real_distribution<double> magnitude(config.min_shift,
                                                   config.max_shift);
  std::bernoulli_distribution negate(0.5);
  for (int attempt = 0; attempt < config.max_attempts && !chosen; ++attempt) {
    double m = magnitude(rng);
    double factor = negate(rng) ? 1.0 - m : 1.0 + m;
    double raw = rounded(factor);
    if (admissible(raw)) chosen = raw;
  }
  if (!chosen) {
    // Deterministic sweep of the band at 1% resolution, preferring larger
    // shifts so rounding cannot collapse the change.
    for (double m = config.max_shift; m >= config.min_shift - 1e-12; m -= 0.01) {
      for (double factor : {1.0 - m, 1.0 + m}) {
        double raw = rounded(factor);
        if (admissible(raw)) {
          chosen = raw;
          break;
        }
      }
      if (chosen) break;
    }
  }
  if (!chosen) {
    throw ValidationError("no admissible perturbation in the configured band");
  }

  longcot::LongCoTResponse negative = positive;
  negative.conclusion =
      positive.conclusion.substr(0, target.begin) +
      format_decimals(*chosen, target.decimals) +
      positive.conclusion.substr(target.end);
  // Refresh the cached segments, then re-render and re-parse so every
  // derived field is recomputed from the edited sections.
  std::tie(negative.desc_segment, negative.reason_segment) =
      longcot::segment(negative);
  return longcot::parse_longcot(longcot::render_longcot(negative));
}

PreferencePair make_perturbed_pair(const TaskInstance& task,
                                   const longcot::LongCoTResponse& positive,
                                   const rewards::SegmentScores& scores_p,
                                   std::mt19937_64& rng,
                                   const PerturbConfig& config,
                                   const std::string& pair_id) {
  PerturbConfig effective = config;
  if (!effective.ground_truth_m && task.ground_truth) {
    effective.ground_truth_m = longcot::parse_length(*task.ground_truth);
  }

  PreferencePair pair;
  pair.pair_id = pair_id;
  pair.task = task;
  pair.positive = positive;
  pair.negative = perturb_conclusion(positive, rng, effective);
  pair.scores_p = scores_p;

  double r_lc = std::max(0.0, scores_p.r_lc - effective.conclusion_penalty);
  pair.scores_l = rewards::compose_scores(scores_p.r_vc, scores_p.r_sp_desc,
                                          scores_p.r_sp_reason, r_lc);
  pair.scores_l.desc_claims_empty = scores_p.desc_claims_empty;
  pair.scores_l.reason_claims_empty = scores_p.reason_claims_empty;
  pair.delta_desc = pair.scores_p.score_desc - pair.scores_l.score_desc;
  pair.delta_reason = pair.scores_p.score_reason - pair.scores_l.score_reason;
  pair.origin = "perturbed";
  validate(pair);
  return pair;
}

void write_pairs(const std::filesystem::path& path,
                 const std::vector<PreferencePair>& pairs) {
  std::vector<nlohmann::json> rows;
  rows.reserve(pairs.size());
  for (const PreferencePair& pair : pairs) {
    validate(pair);
    rows.push_back(pair_to_json(pair));
  }
  write_jsonl(path, rows);
}

std::vector<PreferencePair> read_pairs(const std::filesystem::path& path) {
  std::vector<PreferencePair> pairs;
  for_each_jsonl(path, [&pairs, &path](std::size_t line, const nlohmann::json& j) {
    try {
      pairs.push_back(pair_from_json(j));
    } catch (const ValidationError& e) {
      throw SchemaViolation(path.string() + ":" + std::to_string(line) + ": " +
                            e.what());
    }
  });
  return pairs;
}

}  // namespace traceopt::pairgen
