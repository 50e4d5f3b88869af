/// @file
/// Evaluation metrics, the synthetic separable corpus, and the two-arm
/// trainer comparison.

#include "traceopt/experiment.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "traceopt/longcot.hpp"

namespace traceopt::experiment {

namespace {

std::vector<std::string> keyword_tokens(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char raw : text) {
    const unsigned char c = static_cast<unsigned char>(raw);
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

}  // namespace

bool eval_quantitative(double pred_m, double truth_m) {
  if (!std::isfinite(truth_m) || truth_m <= 0.0) {
    throw NonPositiveTruth("quantitative ground truth must be a positive length, got " +
                           std::to_string(truth_m));
  }
  if (!std::isfinite(pred_m)) return false;
  return std::abs(pred_m - truth_m) / truth_m <= 0.25;
}

bool eval_qualitative(std::string_view pred, std::string_view truth) {
  return keyword_tokens(pred) == keyword_tokens(truth);
}

EvalRecord eval_record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("eval record must be a JSON object");
  EvalRecord r;
  for (const char* key : {"task_id", "kind", "prediction", "truth"}) {
    if (!j.contains(key) || !j.at(key).is_string()) {
      throw ValidationError(std::string("eval record is missing string field '") + key + "'");
    }
  }
  r.task_id = j.at("task_id").get<std::string>();
  r.kind = j.at("kind").get<std::string>();
  r.prediction = j.at("prediction").get<std::string>();
  r.truth = j.at("truth").get<std::string>();
  if (r.kind != "quantitative" && r.kind != "qualitative") {
    throw ValidationError("eval record " + r.task_id + ": unknown kind '" + r.kind +
                          "' (expected quantitative or qualitative)");
  }
  return r;
}

EvalSummary evaluate_records(const std::vector<EvalRecord>& records) {
  EvalSummary s;
  for (const EvalRecord& r : records) {
    if (r.kind == "quantitative") {
      auto truth = longcot::parse_length(r.truth);
      if (!truth) {
        throw ValidationError("eval record " + r.task_id +
                              ": truth is not a parseable length: '" + r.truth + "'");
      }
      ++s.quantitative_total;
      auto pred = longcot::parse_length(r.prediction);
      // An unparseable prediction is a miss, not a data error.
      if (pred && eval_quantitative(*pred, *truth)) ++s.quantitative_hits;
    } else if (r.kind == "qualitative") {
      ++s.qualitative_total;
      if (eval_qualitative(r.prediction, r.truth)) ++s.qualitative_hits;
    } else {
      throw ValidationError("eval record " + r.task_id + ": unknown kind '" + r.kind + "'");
    }
  }
  return s;
}

nlohmann::json summary_to_json(const EvalSummary& s) {
  auto rate = [](int hits, int total) {
    return total == 0 ? 0.0 : static_cast<double>(hits) / total;
  };
  return nlohmann::json{
      {"quantitative",
       {{"total", s.quantitative_total},
        {"hits", s.quantitative_hits},
        {"rate", rate(s.quantitative_hits, s.quantitative_total)}}},
      {"qualitative",
       {{"total", s.qualitative_total},
        {"hits", s.qualitative_hits},
        {"rate", rate(s.qualitative_hits, s.qualitative_total)}}}};
}

std::vector<PreferencePair> synthetic_corpus(const SyntheticCorpusConfig& config) {
  if (config.num_pairs < 1) {
    throw ValidationError("synthetic corpus needs num_pairs >= 1, got " +
                          std::to_string(config.num_pairs));
  }
  if (config.vocab_size < 4 || config.vocab_size > 64) {
    throw ValidationError("synthetic corpus needs vocab_size in [4, 64], got " +
                          std::to_string(config.vocab_size));
  }
  if (config.sentence_words < 2) {
    throw ValidationError("synthetic corpus needs sentence_words >= 2, got " +
                          std::to_string(config.sentence_words));
  }
  if (config.delta_reason_sd < 0.0 || config.delta_desc_sd < 0.0) {
    throw ValidationError("synthetic corpus differential spreads must be >= 0");
  }

  // One concrete word per tokenizer bucket, found by trial hashing. The
  // candidate strings are single lowercase alnum runs, so each is one token.
  const fdpo::HashTokenizer tokenizer(config.vocab_size);
  std::vector<std::string> word_for_bucket(config.vocab_size);
  int filled = 0;
  for (int trial = 0; filled < config.vocab_size; ++trial) {
    if (trial > 1000000) {
      throw ValidationError("synthetic corpus could not cover every token bucket");
    }
    std::string candidate = "w" + std::to_string(trial);
    const int bucket = tokenizer.tokenize(candidate)[0];
    if (word_for_bucket[bucket].empty()) {
      word_for_bucket[bucket] = std::move(candidate);
      ++filled;
    }
  }

  // Disjoint word pools: positives reason in pool A, negatives in pool B.
  // Descriptions swap pools so the description gradient opposes the
  // reasoning gradient through the shared transition rows.
  const int half = config.vocab_size / 2;
  std::vector<std::string> pool_a(word_for_bucket.begin(), word_for_bucket.begin() + half);
  std::vector<std::string> pool_b(word_for_bucket.begin() + half, word_for_bucket.end());

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> reason_delta(config.delta_reason_mean,
                                                config.delta_reason_sd);
  std::normal_distribution<double> desc_delta(config.delta_desc_mean, config.delta_desc_sd);

  auto sentence = [&rng](const std::vector<std::string>& pool, int words) {
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::string out;
    for (int i = 0; i < words; ++i) {
      if (i > 0) out.push_back(' ');
      out += pool[pick(rng)];
    }
    return out;
  };

  auto half_scores = [](double delta) {
    // Split a differential symmetrically around the scale midpoint; each
    // composite lands in (0, 8) because |delta| is clamped below 7.
    const double clamped = std::clamp(delta, -6.5, 6.5);
    return std::pair<double, double>{4.0 + clamped / 2.0, 4.0 - clamped / 2.0};
  };

  std::vector<PreferencePair> pairs;
  pairs.reserve(static_cast<std::size_t>(config.num_pairs));
  for (int i = 0; i < config.num_pairs; ++i) {
    const double d_reason = std::max(0.05, reason_delta(rng));
    const double d_desc = desc_delta(rng);
    const auto [reason_p, reason_l] = half_scores(d_reason);
    const auto [desc_p, desc_l] = half_scores(d_desc);

    const int step_words = std::max(1, config.sentence_words / 2);
    const int concl_words = std::max(1, config.sentence_words - step_words);
    auto document = [&](const std::vector<std::string>& desc_pool,
                        const std::vector<std::string>& reason_pool) {
      std::string text = "### Description\n";
      text += sentence(desc_pool, config.sentence_words);
      text += "\n\n### Step 1\n";
      text += sentence(reason_pool, step_words);
      text += "\n\n### In Conclusion\n";
      text += sentence(reason_pool, concl_words);
      text += "\n";
      return longcot::parse_longcot(text);
    };

    PreferencePair pair;
    char id[32];
    std::snprintf(id, sizeof(id), "syn-%04d", i);
    pair.pair_id = id;
    pair.task.task_id = pair.pair_id;
    pair.task.question = "which arrangement is described?";
    pair.task.image_ref = "synthetic://" + std::to_string(i);
    pair.positive = document(pool_b, pool_a);
    pair.negative = document(pool_a, pool_b);
    pair.scores_p =
        rewards::compose_scores(desc_p / 2.0, desc_p / 2.0, reason_p / 2.0, reason_p / 2.0);
    pair.scores_l =
        rewards::compose_scores(desc_l / 2.0, desc_l / 2.0, reason_l / 2.0, reason_l / 2.0);
    pair.delta_desc = pair.scores_p.score_desc - pair.scores_l.score_desc;
    pair.delta_reason = pair.scores_p.score_reason - pair.scores_l.score_reason;
    validate(pair);
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

namespace {

ArmReport run_arm(const std::vector<PreferencePair>& dataset, const fdpo::FdpoConfig& config,
                  const fdpo::BigramPolicyConfig& policy_config, bool use_fdpo,
                  std::string name) {
  fdpo::TrainResult result = fdpo::train(dataset, config, policy_config, use_fdpo);
  std::vector<PreferencePair> eval_pairs;
  if (result.holdout.empty()) {
    eval_pairs = dataset;
  } else {
    eval_pairs.reserve(result.holdout.size());
    for (std::size_t idx : result.holdout) eval_pairs.push_back(dataset[idx]);
  }
  ArmReport report;
  report.name = std::move(name);
  report.alpha = config.alpha;
  report.lambda = config.lambda;
  auto [acc_desc, acc_reason] =
      fdpo::pairwise_accuracy(eval_pairs, *result.policy, *result.reference);
  report.acc_desc = acc_desc;
  report.acc_reason = acc_reason;
  report.final_loss = result.metrics.empty() ? 0.0 : result.metrics.back().loss;
  report.metrics = std::move(result.metrics);
  return report;
}

nlohmann::json arm_to_json(const ArmReport& arm) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& m : arm.metrics) steps.push_back(fdpo::metrics_to_json(m));
  return nlohmann::json{{"name", arm.name},
                        {"alpha", arm.alpha},
                        {"lambda", arm.lambda},
                        {"acc_desc", arm.acc_desc},
                        {"acc_reason", arm.acc_reason},
                        {"final_loss", arm.final_loss},
                        {"metrics", std::move(steps)}};
}

}  // namespace

ExperimentReport run_experiment(const std::vector<PreferencePair>& dataset,
                                const fdpo::FdpoConfig& config,
                                const fdpo::BigramPolicyConfig& policy_config,
                                const std::vector<double>& sweep_alphas,
                                const std::vector<double>& sweep_lambdas) {
  fdpo::validate(config);
  ExperimentReport report;

  fdpo::FdpoConfig dpo_config = config;
  dpo_config.alpha = 0.0;
  report.dpo = run_arm(dataset, dpo_config, policy_config, /*use_fdpo=*/false, "dpo");
  report.weighted = run_arm(dataset, config, policy_config, /*use_fdpo=*/true, "fdpo");

  for (double alpha : sweep_alphas) {
    for (double lambda : sweep_lambdas) {
      fdpo::FdpoConfig cell_config = config;
      cell_config.alpha = alpha;
      cell_config.lambda = lambda;
      fdpo::validate(cell_config);
      ArmReport arm = run_arm(dataset, cell_config, policy_config, /*use_fdpo=*/true,
                              "sweep");
      SweepCell cell;
      cell.alpha = alpha;
      cell.lambda = lambda;
      cell.acc_desc = arm.acc_desc;
      cell.acc_reason = arm.acc_reason;
      cell.final_loss = arm.final_loss;
      report.sweep.push_back(cell);
    }
  }
  return report;
}

nlohmann::json report_to_json(const ExperimentReport& report) {
  nlohmann::json sweep = nlohmann::json::array();
  for (const SweepCell& cell : report.sweep) {
    sweep.push_back(nlohmann::json{{"alpha", cell.alpha},
                                   {"lambda", cell.lambda},
                                   {"acc_desc", cell.acc_desc},
                                   {"acc_reason", cell.acc_reason},
                                   {"final_loss", cell.final_loss}});
  }
  nlohmann::json j;
  j["dpo"] = arm_to_json(report.dpo);
  j["fdpo"] = arm_to_json(report.weighted);
  j["sweep"] = std::move(sweep);
  return j;
}

std::string report_table(const ExperimentReport& report) {
  struct Row {
    std::string name;
    std::string alpha;
    std::string lambda;
    std::string acc_desc;
    std::string acc_reason;
    std::string final_loss;
  };
  std::vector<Row> rows;
  rows.push_back({"arm", "alpha", "lambda", "acc_desc", "acc_reason", "final_loss"});
  auto arm_row = [&](const ArmReport& arm) {
    rows.push_back({arm.name, fixed(arm.alpha, 2), fixed(arm.lambda, 2),
                    fixed(arm.acc_desc, 4), fixed(arm.acc_reason, 4),
                    fixed(arm.final_loss, 6)});
  };
  arm_row(report.dpo);
  arm_row(report.weighted);
  for (const SweepCell& cell : report.sweep) {
    rows.push_back({"sweep", fixed(cell.alpha, 2), fixed(cell.lambda, 2),
                    fixed(cell.acc_desc, 4), fixed(cell.acc_reason, 4),
                    fixed(cell.final_loss, 6)});
  }

  std::array<std::size_t, 6> width{};
  for (const Row& r : rows) {
    width[0] = std::max(width[0], r.name.size());
    width[1] = std::max(width[1], r.alpha.size());
    width[2] = std::max(width[2], r.lambda.size());
    width[3] = std::max(width[3], r.acc_desc.size());
    width[4] = std::max(width[4], r.acc_reason.size());
    width[5] = std::max(width[5], r.final_loss.size());
  }
  std::ostringstream out;
  for (const Row& r : rows) {
    const std::array<const std::string*, 6> cells{&r.name,     &r.alpha,      &r.lambda,
                                                  &r.acc_desc, &r.acc_reason, &r.final_loss};
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c > 0) out << "  ";
      out << *cells[c];
      if (c + 1 < cells.size()) {
        out << std::string(width[c] - cells[c]->size(), ' ');
      }
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace traceopt::experiment
