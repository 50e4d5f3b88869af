/// @file
/// Command-line front end. Each subcommand is a thin wrapper over one module
/// operation, reading and writing JSONL so the stages compose:
/// parse -> score -> pairs -> train -> eval, with search feeding pairs.
///
/// Exit codes: 0 success, 1 input or validation error, 2 external-service
/// failure.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "traceopt/experiment.hpp"
#include "traceopt/fdpo.hpp"
#include "traceopt/judge.hpp"
#include "traceopt/longcot.hpp"
#include "traceopt/mcts.hpp"
#include "traceopt/pairgen.hpp"

namespace {

using namespace traceopt;

// ---------------------------------------------------------------------------
// Shared plumbing

struct JudgeFlags {
  std::string kind = "mock";
  std::string fixture;
  std::string endpoint;
  std::string api_key;
  std::string record;
  int max_retries = 3;
  int timeout_seconds = 30;
};

void add_judge_flags(CLI::App* cmd, JudgeFlags& flags) {
  cmd->add_option("--judge", flags.kind, "Judge backend")
      ->check(CLI::IsMember({"mock", "replay", "remote"}))
      ->capture_default_str();
  cmd->add_option("--judge-file", flags.fixture,
                  "Scene file (mock) or replay store (replay)");
  cmd->add_option("--endpoint", flags.endpoint,
                  "Remote judge URL; falls back to JUDGE_ENDPOINT");
  cmd->add_option("--api-key", flags.api_key,
                  "Remote judge key; falls back to JUDGE_API_KEY");
  cmd->add_option("--record", flags.record,
                  "Append every judge response to this replay store");
  cmd->add_option("--max-retries", flags.max_retries,
                  "Total remote attempts before giving up")
      ->capture_default_str();
  cmd->add_option("--timeout-seconds", flags.timeout_seconds,
                  "Remote request timeout")
      ->capture_default_str();
}

struct JudgeHandle {
  std::unique_ptr<judge::JudgeBackend> backend;
  std::unique_ptr<judge::JudgeBackend> recorder;

  judge::JudgeBackend& active() { return recorder ? *recorder : *backend; }
};

JudgeHandle open_judge(const JudgeFlags& flags) {
  if (flags.kind != "remote" && flags.fixture.empty()) {
    throw ValidationError("--judge " + flags.kind + " requires --judge-file");
  }
  judge::RemoteJudgeConfig remote;
  remote.endpoint = flags.endpoint;
  remote.api_key = flags.api_key;
  remote.max_retries = flags.max_retries;
  remote.timeout_seconds = flags.timeout_seconds;
  JudgeHandle handle;
  handle.backend = judge::make_judge(flags.kind, flags.fixture, remote);
  if (!flags.record.empty()) {
    handle.recorder =
        std::make_unique<judge::RecordingJudge>(*handle.backend, flags.record);
  }
  return handle;
}

/// JSONL of {task_id, text, ...}; extra keys (candidate source, variant) are
/// preserved by parse and score so one stage's output feeds the next.
std::vector<nlohmann::json> read_documents(const std::filesystem::path& path) {
  std::vector<nlohmann::json> docs;
  for_each_jsonl(path, [&](std::size_t line, const nlohmann::json& j) {
    if (!j.contains("task_id") || !j.at("task_id").is_string() ||
        !j.contains("text") || !j.at("text").is_string()) {
      throw ValidationError(path.string() + ":" + std::to_string(line) +
                            ": record needs string fields task_id and text");
    }
    docs.push_back(j);
  });
  return docs;
}

std::map<std::string, TaskInstance> read_tasks(const std::filesystem::path& path) {
  std::map<std::string, TaskInstance> tasks;
  for_each_jsonl(path, [&](std::size_t line, const nlohmann::json& j) {
    TaskInstance task = task_from_json(j);
    if (!tasks.emplace(task.task_id, task).second) {
      throw ValidationError(path.string() + ":" + std::to_string(line) +
                            ": duplicate task_id " + task.task_id);
    }
  });
  return tasks;
}

const TaskInstance& require_task(const std::map<std::string, TaskInstance>& tasks,
                                 const std::string& task_id) {
  auto it = tasks.find(task_id);
  if (it == tasks.end()) {
    throw ValidationError("task " + task_id + " is not in the tasks file");
  }
  return it->second;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// parse

struct ParseArgs {
  std::string input;
  std::string output;
  bool lenient = false;
};

void run_parse(const ParseArgs& args) {
  std::vector<nlohmann::json> out;
  for (nlohmann::json record : read_documents(args.input)) {
    const auto task_id = record.at("task_id").get<std::string>();
    longcot::LongCoTResponse resp;
    try {
      resp = longcot::parse_longcot(record.at("text").get<std::string>(),
                                    {.lenient = args.lenient});
    } catch (const longcot::ParseError& e) {
      throw ValidationError("task " + task_id + ": " + e.what());
    }
    record["text"] = longcot::render_longcot(resp);
    out.push_back(std::move(record));
  }
  write_jsonl(args.output, out);
  std::cout << "parsed " << out.size() << " document(s) -> " << args.output << "\n";
}

// ---------------------------------------------------------------------------
// score

struct ScoreArgs {
  std::string input;
  std::string tasks;
  std::string output;
  JudgeFlags judge;
};

void run_score(const ScoreArgs& args) {
  const auto tasks = read_tasks(args.tasks);
  JudgeHandle judge_handle = open_judge(args.judge);
  std::vector<nlohmann::json> out;
  for (nlohmann::json record : read_documents(args.input)) {
    const auto task_id = record.at("task_id").get<std::string>();
    const TaskInstance& task = require_task(tasks, task_id);
    longcot::LongCoTResponse resp;
    try {
      resp = longcot::parse_longcot(record.at("text").get<std::string>());
    } catch (const longcot::ParseError& e) {
      throw ValidationError("task " + task_id + ": " + e.what());
    }
    rewards::ScoredResponse scored =
        rewards::score_response(task, resp, judge_handle.active());
    record["scores"] = rewards::scores_to_json(scored.scores);
    record["judge_payloads"] = scored.judge_payloads;
    out.push_back(std::move(record));
  }
  write_jsonl(args.output, out);
  std::cout << "scored " << out.size() << " response(s) -> " << args.output << "\n";
}

// ---------------------------------------------------------------------------
// pairs

struct PairsArgs {
  std::string candidates;
  std::string tasks;
  std::string output;
  JudgeFlags judge;
  bool perturb = false;
  double min_shift = 0.10;
  double max_shift = 0.30;
  int max_attempts = 64;
  double conclusion_penalty = 1.0;
  std::uint64_t seed = 0;
};

void run_pairs(const PairsArgs& args) {
  const auto tasks = read_tasks(args.tasks);

  // Group candidate records per task, then restore pool order.
  std::map<std::string, std::vector<pairgen::CandidateRecord>> pools;
  for_each_jsonl(args.candidates, [&](std::size_t line, const nlohmann::json& j) {
    pairgen::CandidateRecord record;
    try {
      record = pairgen::candidate_from_json(j);
    } catch (const ValidationError& e) {
      throw ValidationError(args.candidates + ":" + std::to_string(line) + ": " +
                            e.what());
    }
    pools[record.task_id].push_back(std::move(record));
  });

  std::optional<JudgeHandle> judge_handle;
  std::mt19937_64 rng(args.seed);
  std::vector<PreferencePair> result;
  for (auto& [task_id, pool] : pools) {
    const TaskInstance& task = require_task(tasks, task_id);
    std::stable_sort(pool.begin(), pool.end(),
                     [](const pairgen::CandidateRecord& a,
                        const pairgen::CandidateRecord& b) {
                       if (a.source != b.source) return a.source < b.source;
                       return a.variant < b.variant;
                     });
    const bool unscored = std::any_of(
        pool.begin(), pool.end(),
        [](const pairgen::CandidateRecord& r) { return !r.scores.has_value(); });
    if (unscored) {
      if (!judge_handle) judge_handle = open_judge(args.judge);
      pairgen::score_pool(pool, task, judge_handle->active());
    }
    PreferencePair selected =
        pairgen::select_pair(task, pool, task_id + "-selected");
    if (args.perturb) {
      pairgen::PerturbConfig config;
      config.min_shift = args.min_shift;
      config.max_shift = args.max_shift;
      config.max_attempts = args.max_attempts;
      config.conclusion_penalty = args.conclusion_penalty;
      result.push_back(pairgen::make_perturbed_pair(task, selected.positive,
                                                    selected.scores_p, rng, config,
                                                    task_id + "-perturbed"));
    }
    result.push_back(std::move(selected));
  }
  std::sort(result.begin(), result.end(),
            [](const PreferencePair& a, const PreferencePair& b) {
              return a.pair_id < b.pair_id;
            });
  pairgen::write_pairs(args.output, result);
  std::cout << "wrote " << result.size() << " pair(s) -> " << args.output << "\n";
}

// ---------------------------------------------------------------------------
// search

struct SearchArgs {
  std::string tasks;
  std::string task_id;
  std::vector<std::string> expanders;  ///< id=path
  JudgeFlags judge;
  std::string output_tree;
  std::string output_paths;
  std::string output_candidates;
  mcts::SearchConfig config;
};

void run_search(const SearchArgs& args) {
  const auto tasks = read_tasks(args.tasks);
  const TaskInstance& task = require_task(tasks, args.task_id);

  std::vector<std::unique_ptr<mcts::ScriptedExpander>> owned;
  std::vector<mcts::Expander*> expanders;
  for (const std::string& spec_str : args.expanders) {
    const auto eq = spec_str.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec_str.size()) {
      throw ValidationError("--expander expects id=path, got '" + spec_str + "'");
    }
    owned.push_back(std::make_unique<mcts::ScriptedExpander>(
        spec_str.substr(0, eq), spec_str.substr(eq + 1)));
    expanders.push_back(owned.back().get());
  }

  JudgeHandle judge_handle = open_judge(args.judge);
  mcts::SearchResult result =
      mcts::search(task, expanders, judge_handle.active(), args.config);

  if (!args.output_tree.empty()) {
    mcts::dump_tree(result.tree, args.output_tree);
  }
  if (!args.output_paths.empty()) {
    std::vector<nlohmann::json> rows;
    for (std::size_t rank = 0; rank < result.paths.size(); ++rank) {
      const mcts::HarvestedPath& p = result.paths[rank];
      rows.push_back({{"task_id", task.task_id},
                      {"rank", rank + 1},
                      {"mean_reward", p.mean_reward},
                      {"text", longcot::render_longcot(p.response)}});
    }
    write_jsonl(args.output_paths, rows);
  }
  if (!args.output_candidates.empty()) {
    if (result.paths.size() < 2) {
      throw ValidationError("task " + task.task_id + " produced " +
                            std::to_string(result.paths.size()) +
                            " complete path(s); --output-candidates needs 2");
    }
    write_jsonl(args.output_candidates,
                {nlohmann::json{
                    {"task_id", task.task_id},
                    {"variants",
                     {longcot::render_longcot(result.paths[0].response),
                      longcot::render_longcot(result.paths[1].response)}}}});
  }
  std::cout << "searched " << task.task_id << ": " << result.tree.nodes.size()
            << " node(s), " << result.paths.size() << " complete path(s)\n";
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string pairs;
  std::string external;
  std::string output_policy;
  std::string output_metrics;
  std::string objective = "fdpo";
  fdpo::FdpoConfig config;
  fdpo::BigramPolicyConfig policy;
};

void print_arm_summary(const std::string& name, double loss, double acc_desc,
                       double acc_reason) {
  std::printf("%-6s  final_loss %-10.6f  acc_desc %-6.4f  acc_reason %-6.4f\n",
              name.c_str(), loss, acc_desc, acc_reason);
}

void run_train(const TrainArgs& args) {
  const std::vector<PreferencePair> dataset = pairgen::read_pairs(args.pairs);

  if (!args.external.empty()) {
    // Imported log-prob tables are read-only; this mode only reports the
    // loss and accuracy they induce.
    auto [policy, reference] = fdpo::load_external_policies(args.external);
    fdpo::LossResult loss = fdpo::fdpo_loss(dataset, *policy, *reference, args.config);
    auto [acc_desc, acc_reason] =
        fdpo::pairwise_accuracy(dataset, *policy, *reference);
    if (!args.output_metrics.empty()) {
      fdpo::StepMetrics row{0, loss.loss, acc_desc, acc_reason};
      write_jsonl(args.output_metrics, {fdpo::metrics_to_json(row)});
    }
    print_arm_summary("extern", loss.loss, acc_desc, acc_reason);
    return;
  }

  const bool use_fdpo = args.objective == "fdpo";
  fdpo::TrainResult result = fdpo::train(dataset, args.config, args.policy, use_fdpo);

  if (!args.output_metrics.empty()) {
    std::vector<nlohmann::json> rows;
    rows.reserve(result.metrics.size());
    for (const auto& m : result.metrics) rows.push_back(fdpo::metrics_to_json(m));
    write_jsonl(args.output_metrics, rows);
  }
  if (!args.output_policy.empty()) {
    auto* bigram = dynamic_cast<fdpo::BigramPolicy*>(result.policy.get());
    if (bigram == nullptr) {
      throw ValidationError("trained policy is not serializable");
    }
    write_text_file(args.output_policy, bigram->to_json().dump() + "\n");
  }

  std::vector<PreferencePair> eval_pairs;
  if (result.holdout.empty()) {
    eval_pairs = dataset;
  } else {
    for (std::size_t idx : result.holdout) eval_pairs.push_back(dataset[idx]);
  }
  auto [acc_desc, acc_reason] =
      fdpo::pairwise_accuracy(eval_pairs, *result.policy, *result.reference);
  const double final_loss =
      result.metrics.empty() ? 0.0 : result.metrics.back().loss;
  print_arm_summary(args.objective, final_loss, acc_desc, acc_reason);
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string records;
  std::string pairs;
  std::string tasks;
  std::string output;
};

void run_eval(const EvalArgs& args) {
  std::vector<experiment::EvalRecord> records;
  if (!args.records.empty()) {
    for_each_jsonl(args.records, [&](std::size_t line, const nlohmann::json& j) {
      try {
        records.push_back(experiment::eval_record_from_json(j));
      } catch (const ValidationError& e) {
        throw ValidationError(args.records + ":" + std::to_string(line) + ": " +
                              e.what());
      }
    });
  } else {
    if (args.pairs.empty() || args.tasks.empty()) {
      throw ValidationError("eval needs either --records or --pairs with --tasks");
    }
    const auto tasks = read_tasks(args.tasks);
    for (const PreferencePair& pair : pairgen::read_pairs(args.pairs)) {
      const TaskInstance& task = require_task(tasks, pair.task.task_id);
      if (!task.ground_truth.has_value()) continue;  // nothing to grade against
      experiment::EvalRecord record;
      record.task_id = pair.pair_id;
      record.truth = *task.ground_truth;
      if (longcot::parse_length(record.truth).has_value()) {
        record.kind = "quantitative";
        auto values = longcot::extract_conclusion_values(pair.positive);
        record.prediction =
            values.empty() ? pair.positive.conclusion
                           : format_number(values.back().value_meters);
      } else {
        record.kind = "qualitative";
        record.prediction = pair.positive.conclusion;
      }
      records.push_back(std::move(record));
    }
  }

  const experiment::EvalSummary summary = experiment::evaluate_records(records);
  if (!args.output.empty()) {
    write_text_file(args.output, experiment::summary_to_json(summary).dump() + "\n");
  }
  auto rate = [](int hits, int total) {
    return total == 0 ? 0.0 : static_cast<double>(hits) / total;
  };
  std::printf("%-13s %6s %6s %8s\n", "kind", "total", "hits", "rate");
  std::printf("%-13s %6d %6d %8.4f\n", "quantitative", summary.quantitative_total,
              summary.quantitative_hits,
              rate(summary.quantitative_hits, summary.quantitative_total));
  std::printf("%-13s %6d %6d %8.4f\n", "qualitative", summary.qualitative_total,
              summary.qualitative_hits,
              rate(summary.qualitative_hits, summary.qualitative_total));
}

// ---------------------------------------------------------------------------
// sweep

struct SweepArgs {
  std::string pairs;
  int synthetic = 0;
  std::uint64_t corpus_seed = 7;
  std::string output;
  std::vector<double> alphas = {0.1, 0.2, 0.3, 0.4};
  std::vector<double> lambdas = {0.2, 0.4, 0.6, 0.8};
  fdpo::FdpoConfig config;
  fdpo::BigramPolicyConfig policy;
};

void run_sweep(const SweepArgs& args) {
  std::vector<PreferencePair> dataset;
  if (args.synthetic > 0) {
    experiment::SyntheticCorpusConfig corpus;
    corpus.num_pairs = args.synthetic;
    corpus.seed = args.corpus_seed;
    corpus.vocab_size = args.policy.vocab_size;
    dataset = experiment::synthetic_corpus(corpus);
  } else if (!args.pairs.empty()) {
    dataset = pairgen::read_pairs(args.pairs);
  } else {
    throw ValidationError("sweep needs --pairs or --synthetic N");
  }

  const experiment::ExperimentReport report = experiment::run_experiment(
      dataset, args.config, args.policy, args.alphas, args.lambdas);
  if (!args.output.empty()) {
    write_text_file(args.output, experiment::report_to_json(report).dump() + "\n");
  }
  std::cout << experiment::report_table(report);
}

// ---------------------------------------------------------------------------

void add_fdpo_flags(CLI::App* cmd, fdpo::FdpoConfig& config,
                    fdpo::BigramPolicyConfig& policy, bool require_seed) {
  cmd->add_option("--beta", config.beta, "Preference temperature")
      ->capture_default_str();
  cmd->add_option("--alpha", config.alpha, "Segment scaling amplitude")
      ->capture_default_str();
  cmd->add_option("--lambda", config.lambda, "Weight sensitivity")
      ->capture_default_str();
  cmd->add_option("--learning-rate", config.learning_rate, "Step size")
      ->capture_default_str();
  cmd->add_option("--steps", config.steps, "Training steps")->capture_default_str();
  cmd->add_option("--batch-size", config.batch_size, "0 = full batch")
      ->capture_default_str();
  cmd->add_option("--holdout-fraction", config.holdout_fraction,
                  "Fraction of pairs held out for accuracy")
      ->capture_default_str();
  auto* seed = cmd->add_option("--seed", config.seed,
                               "Seed for the policy init and the data split");
  if (require_seed) {
    seed->required();
  } else {
    seed->capture_default_str();
  }
  cmd->add_option("--vocab-size", policy.vocab_size, "Bigram vocabulary size")
      ->capture_default_str();
  cmd->add_option("--num-contexts", policy.num_contexts, "Bigram context count")
      ->capture_default_str();
  cmd->add_option("--init-scale", policy.init_scale, "Logit init stddev")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial-reasoning preference data and training toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "Config file with one [section] per subcommand; flags override");
  // A misspelled key in a config file should fail loudly, not be skipped.
  app.allow_config_extras(false);

  ParseArgs parse_args;
  auto* parse_cmd =
      app.add_subcommand("parse", "Validate and canonicalize reasoning traces");
  parse_cmd->add_option("--input,-i", parse_args.input, "JSONL of {task_id, text}")
      ->required()
      ->check(CLI::ExistingFile);
  parse_cmd->add_option("--output,-o", parse_args.output, "Canonicalized JSONL")
      ->required();
  parse_cmd->add_flag("--lenient", parse_args.lenient,
                      "Fold marker-section bodies instead of rejecting them");
  parse_cmd->callback([&] { run_parse(parse_args); });

  ScoreArgs score_args;
  auto* score_cmd = app.add_subcommand("score", "Score responses with a judge");
  score_cmd->add_option("--input,-i", score_args.input, "JSONL of {task_id, text}")
      ->required()
      ->check(CLI::ExistingFile);
  score_cmd->add_option("--tasks", score_args.tasks, "JSONL of task instances")
      ->required()
      ->check(CLI::ExistingFile);
  score_cmd->add_option("--output,-o", score_args.output, "Scored JSONL")->required();
  add_judge_flags(score_cmd, score_args.judge);
  score_cmd->callback([&] { run_score(score_args); });

  PairsArgs pairs_args;
  auto* pairs_cmd =
      app.add_subcommand("pairs", "Build preference pairs from candidate pools");
  pairs_cmd
      ->add_option("--candidates", pairs_args.candidates,
                   "JSONL of candidate records (8 per task)")
      ->required()
      ->check(CLI::ExistingFile);
  pairs_cmd->add_option("--tasks", pairs_args.tasks, "JSONL of task instances")
      ->required()
      ->check(CLI::ExistingFile);
  pairs_cmd->add_option("--output,-o", pairs_args.output, "Pair JSONL")->required();
  pairs_cmd->add_flag("--perturb", pairs_args.perturb,
                      "Also emit a conclusion-perturbed hard negative per task");
  pairs_cmd->add_option("--min-shift", pairs_args.min_shift, "Perturbation band, lower")
      ->capture_default_str();
  pairs_cmd->add_option("--max-shift", pairs_args.max_shift, "Perturbation band, upper")
      ->capture_default_str();
  pairs_cmd
      ->add_option("--max-attempts", pairs_args.max_attempts,
                   "Rejection samples before the deterministic fallback")
      ->capture_default_str();
  pairs_cmd
      ->add_option("--conclusion-penalty", pairs_args.conclusion_penalty,
                   "Reasoning-score penalty on perturbed negatives")
      ->capture_default_str();
  pairs_cmd->add_option("--seed", pairs_args.seed, "Perturbation seed")
      ->capture_default_str();
  add_judge_flags(pairs_cmd, pairs_args.judge);
  pairs_cmd->callback([&] { run_pairs(pairs_args); });

  SearchArgs search_args;
  auto* search_cmd =
      app.add_subcommand("search", "Multi-expander tree search over one task");
  search_cmd->add_option("--tasks", search_args.tasks, "JSONL of task instances")
      ->required()
      ->check(CLI::ExistingFile);
  search_cmd->add_option("--task-id", search_args.task_id, "Task to search")
      ->required();
  search_cmd
      ->add_option("--expander", search_args.expanders,
                   "id=path of a scripted candidate fixture; repeatable")
      ->required();
  search_cmd->add_option("--output-tree", search_args.output_tree,
                         "Write the final tree as JSONL");
  search_cmd->add_option("--output-paths", search_args.output_paths,
                         "Write ranked complete paths as JSONL");
  search_cmd->add_option("--output-candidates", search_args.output_candidates,
                         "Write the top two paths in candidate-fixture format");
  search_cmd
      ->add_option("--exploration", search_args.config.exploration,
                   "UCB exploration weight")
      ->capture_default_str();
  search_cmd->add_option("--max-depth", search_args.config.max_depth, "Depth cap")
      ->capture_default_str();
  search_cmd
      ->add_option("--expansions-per-model", search_args.config.expansions_per_model,
                   "Candidates requested per expander")
      ->capture_default_str();
  search_cmd
      ->add_option("--max-iterations", search_args.config.max_iterations,
                   "Search iteration budget")
      ->capture_default_str();
  search_cmd->add_option("--seed", search_args.config.seed, "Expansion seed")
      ->required();
  search_cmd
      ->add_option("--models", search_args.config.models,
                   "Judge personas averaged during simulation")
      ->delimiter(',')
      ->capture_default_str();
  search_cmd->add_flag("--continue-on-expander-failure",
                       search_args.config.continue_on_expander_failure,
                       "Skip expanders that fail instead of aborting");
  add_judge_flags(search_cmd, search_args.judge);
  search_cmd->callback([&] { run_search(search_args); });

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Optimize a policy on a pair dataset");
  train_cmd->add_option("--pairs", train_args.pairs, "Pair JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd
      ->add_option("--external", train_args.external,
                   "Imported log-prob table; reports loss and accuracy only")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--objective", train_args.objective,
                        "fdpo (segment-weighted) or dpo (whole response)")
      ->check(CLI::IsMember({"fdpo", "dpo"}))
      ->capture_default_str();
  train_cmd->add_option("--output-policy", train_args.output_policy,
                        "Write the trained policy as JSON");
  train_cmd->add_option("--output-metrics", train_args.output_metrics,
                        "Write per-step metrics as JSONL");
  add_fdpo_flags(train_cmd, train_args.config, train_args.policy,
                 /*require_seed=*/true);
  train_cmd->callback([&] { run_train(train_args); });

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Grade predictions against truths");
  eval_cmd->add_option("--records", eval_args.records,
                       "JSONL of {task_id, kind, prediction, truth}")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--pairs", eval_args.pairs,
                       "Pair JSONL; grades positive conclusions")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--tasks", eval_args.tasks, "JSONL of task instances")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--output,-o", eval_args.output, "Write the summary as JSON");
  eval_cmd->callback([&] { run_eval(eval_args); });

  SweepArgs sweep_args;
  auto* sweep_cmd =
      app.add_subcommand("sweep", "Baseline-vs-weighted comparison and ablation grid");
  sweep_cmd->add_option("--pairs", sweep_args.pairs, "Pair JSONL")
      ->check(CLI::ExistingFile);
  sweep_cmd->add_option("--synthetic", sweep_args.synthetic,
                        "Generate a synthetic corpus of this many pairs instead");
  sweep_cmd->add_option("--corpus-seed", sweep_args.corpus_seed,
                        "Seed for the synthetic corpus")
      ->capture_default_str();
  sweep_cmd->add_option("--alphas", sweep_args.alphas, "Grid of alpha values")
      ->delimiter(',')
      ->capture_default_str();
  sweep_cmd->add_option("--lambdas", sweep_args.lambdas, "Grid of lambda values")
      ->delimiter(',')
      ->capture_default_str();
  sweep_cmd->add_option("--output,-o", sweep_args.output, "Write the report as JSON");
  add_fdpo_flags(sweep_cmd, sweep_args.config, sweep_args.policy,
                 /*require_seed=*/false);
  sweep_cmd->callback([&] { run_sweep(sweep_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const traceopt::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.error_class() == ErrorClass::validation ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
