#include "traceopt/policy.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>

namespace traceopt::fdpo {

HashTokenizer::HashTokenizer(int vocab_size) : vocab_size_(vocab_size) {
  if (vocab_size < 2 || vocab_size > 64) {
    throw ValidationError("tokenizer vocab_size must be in [2, 64], got " +
                          std::to_string(vocab_size));
  }
}

std::vector<int> HashTokenizer::tokenize(std::string_view text) const {
  std::vector<int> tokens;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) {
      tokens.push_back(static_cast<int>(fnv1a64(word) % vocab_size_));
      word.clear();
    }
  };
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

BigramPolicy::BigramPolicy(BigramPolicyConfig config, std::uint64_t seed)
    : config_(config), tokenizer_(config.vocab_size) {
  if (config_.num_contexts < 1) {
    throw ValidationError("num_contexts must be positive");
  }
  std::size_t rows =
      static_cast<std::size_t>(config_.num_contexts) * (config_.vocab_size + 1);
  logits_.resize(rows * config_.vocab_size);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> init(0.0, config_.init_scale);
  for (double& l : logits_) l = init(rng);
}

int BigramPolicy::context_for(const std::string& task_id) const {
  return static_cast<int>(fnv1a64(task_id) % config_.num_contexts);
}

std::size_t BigramPolicy::row_index(int context, int prev) const {
  return (static_cast<std::size_t>(context) * (config_.vocab_size + 1) + prev);
}

void BigramPolicy::refresh_cache() const {
  if (!cache_dirty_) return;
  std::size_t rows = logits_.size() / config_.vocab_size;
  row_lse_.resize(rows);
  row_prob_.resize(logits_.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = logits_.data() + r * config_.vocab_size;
    double m = row[0];
    for (int j = 1; j < config_.vocab_size; ++j) m = std::max(m, row[j]);
    double sum = 0.0;
    for (int j = 0; j < config_.vocab_size; ++j) sum += std::exp(row[j] - m);
    row_lse_[r] = m + std::log(sum);
    double* probs = row_prob_.data() + r * config_.vocab_size;
    for (int j = 0; j < config_.vocab_size; ++j) {
      probs[j] = std::exp(row[j] - row_lse_[r]);
    }
  }
  cache_dirty_ = false;
}

double BigramPolicy::sequence_logprob(int context,
                                      const std::vector<int>& tokens) const {
  if (tokens.empty()) throw EmptySegment("sequence has no tokens");
  refresh_cache();
  double logp = 0.0;
  int prev = bos();
  for (int tok : tokens) {
    if (tok < 0 || tok >= config_.vocab_size) {
      throw ValidationError("token id out of range: " + std::to_string(tok));
    }
    std::size_t r = row_index(context, prev);
    logp += logits_[r * config_.vocab_size + tok] - row_lse_[r];
    prev = tok;
  }
  return logp;
}

void BigramPolicy::accumulate_sequence_grad(int context,
                                            const std::vector<int>& tokens,
                                            double coeff,
                                            std::vector<double>& grad) const {
  if (tokens.empty()) throw EmptySegment("sequence has no tokens");
  if (grad.size() != logits_.size()) {
    throw ValidationError("gradient buffer size mismatch");
  }
  refresh_cache();
  int prev = bos();
  for (int tok : tokens) {
    std::size_t r = row_index(context, prev);
    double* grow = grad.data() + r * config_.vocab_size;
    const double* probs = row_prob_.data() + r * config_.vocab_size;
    grow[tok] += coeff;
    // d logp / d L[r][j] = 1[j == tok] - softmax(L[r])[j]
    for (int j = 0; j < config_.vocab_size; ++j) {
      grow[j] -= coeff * probs[j];
    }
    prev = tok;
  }
}

std::vector<int> BigramPolicy::segment_tokens(const PreferencePair& pair,
                                              Segment segment,
                                              bool positive) const {
  const longcot::LongCoTResponse& side = positive ? pair.positive : pair.negative;
  const std::string& text =
      segment == Segment::desc ? side.desc_segment : side.reason_segment;
  std::vector<int> tokens = tokenizer_.tokenize(text);
  if (tokens.empty()) {
    throw EmptySegment("pair " + pair.pair_id + ": empty " +
                       std::string(segment == Segment::desc ? "desc" : "reason") +
                       " segment");
  }
  return tokens;
}

double BigramPolicy::segment_logprob(const PreferencePair& pair, Segment segment,
                                     bool positive) const {
  return sequence_logprob(context_for(pair.task.task_id),
                          segment_tokens(pair, segment, positive));
}

std::string BigramPolicy::vocabulary_signature() const {
  return "bigram:v" + std::to_string(config_.vocab_size) + ":c" +
         std::to_string(config_.num_contexts);
}

void BigramPolicy::set_parameters(std::vector<double> params) {
  if (params.size() != logits_.size()) {
    throw ValidationError("parameter vector size mismatch: expected " +
                          std::to_string(logits_.size()) + ", got " +
                          std::to_string(params.size()));
  }
  logits_ = std::move(params);
  cache_dirty_ = true;
}

void BigramPolicy::apply_gradient(const std::vector<double>& grad,
                                  double learning_rate) {
  if (grad.size() != logits_.size()) {
    throw ValidationError("gradient size mismatch");
  }
  for (std::size_t i = 0; i < logits_.size(); ++i) {
    logits_[i] -= learning_rate * grad[i];
  }
  cache_dirty_ = true;
}

void BigramPolicy::accumulate_segment_grad(const PreferencePair& pair,
                                           Segment segment, bool positive,
                                           double coeff,
                                           std::vector<double>& grad) const {
  accumulate_sequence_grad(context_for(pair.task.task_id),
                           segment_tokens(pair, segment, positive), coeff, grad);
}

std::unique_ptr<PolicyModel> BigramPolicy::clone() const {
  return std::make_unique<BigramPolicy>(*this);
}

nlohmann::json BigramPolicy::to_json() const {
  return {{"kind", "bigram"},
          {"vocab_size", config_.vocab_size},
          {"num_contexts", config_.num_contexts},
          {"init_scale", config_.init_scale},
          {"logits", logits_}};
}

BigramPolicy BigramPolicy::from_json(const nlohmann::json& j) {
  if (j.value("kind", std::string{}) != "bigram") {
    throw ValidationError("policy file is not a bigram policy");
  }
  BigramPolicyConfig cfg;
  cfg.vocab_size = j.at("vocab_size").get<int>();
  cfg.num_contexts = j.at("num_contexts").get<int>();
  cfg.init_scale = j.value("init_scale", 0.1);
  BigramPolicy policy(cfg, 0);
  policy.set_parameters(j.at("logits").get<std::vector<double>>());
  return policy;
}

std::string ExternalLogProbTable::key(const std::string& pair_id, Segment segment,
                                      bool positive) {
  std::string k = pair_id;
  k += '|';
  k += segment == Segment::desc ? "desc" : "reason";
  k += '|';
  k += positive ? "positive" : "negative";
  return k;
}

ExternalLogProbTable ExternalLogProbTable::load(const std::filesystem::path& path) {
  ExternalLogProbTable table;
  for_each_jsonl(path, [&table](std::size_t line, const nlohmann::json& record) {
    for (const char* field :
         {"pair_id", "segment", "side", "logp_policy", "logp_reference"}) {
      if (!record.contains(field)) {
        throw ValidationError("log-prob record at line " + std::to_string(line) +
                              " is missing '" + field + "'");
      }
    }
    std::string seg = record.at("segment").get<std::string>();
    if (seg != "desc" && seg != "reason") {
      throw ValidationError("log-prob record at line " + std::to_string(line) +
                            ": segment must be 'desc' or 'reason'");
    }
    std::string side = record.at("side").get<std::string>();
    if (side != "positive" && side != "negative") {
      throw ValidationError("log-prob record at line " + std::to_string(line) +
                            ": side must be 'positive' or 'negative'");
    }
    Entry entry{record.at("logp_policy").get<double>(),
                record.at("logp_reference").get<double>()};
    for (double v : {entry.logp_policy, entry.logp_reference}) {
      if (!std::isfinite(v) || v > 0.0) {
        throw ValidationError("log-prob record at line " + std::to_string(line) +
                              ": log-probabilities must be finite and <= 0");
      }
    }
    std::string k = key(record.at("pair_id").get<std::string>(),
                        seg == "desc" ? Segment::desc : Segment::reason,
                        side == "positive");
    if (!table.entries.emplace(std::move(k), entry).second) {
      throw ValidationError("log-prob record at line " + std::to_string(line) +
                            " duplicates an earlier (pair, segment, side) key");
    }
  });
  std::string digest;
  for (const auto& [k, e] : table.entries) {
    digest += k;
    digest += ';';
  }
  table.signature = "external:" + fnv1a64_hex(digest);
  return table;
}

ExternalLogProbPolicy::ExternalLogProbPolicy(
    std::shared_ptr<const ExternalLogProbTable> table, bool reference_view)
    : table_(std::move(table)), reference_view_(reference_view) {
  if (!table_) throw ValidationError("external policy needs a table");
}

double ExternalLogProbPolicy::segment_logprob(const PreferencePair& pair,
                                              Segment segment,
                                              bool positive) const {
  std::string k = ExternalLogProbTable::key(pair.pair_id, segment, positive);
  auto it = table_->entries.find(k);
  if (it == table_->entries.end()) {
    throw ValidationError("external log-prob table has no entry for " + k);
  }
  return reference_view_ ? it->second.logp_reference : it->second.logp_policy;
}

std::string ExternalLogProbPolicy::vocabulary_signature() const {
  return table_->signature;
}

const std::vector<double>& ExternalLogProbPolicy::parameters() const {
  static const std::vector<double> kEmpty;
  return kEmpty;
}

void ExternalLogProbPolicy::set_parameters(std::vector<double> params) {
  if (!params.empty()) {
    throw ValidationError("external log-prob policies have no parameters");
  }
}

void ExternalLogProbPolicy::apply_gradient(const std::vector<double>& grad,
                                           double /*learning_rate*/) {
  if (!grad.empty()) {
    throw ValidationError("external log-prob policies cannot be trained");
  }
}

void ExternalLogProbPolicy::accumulate_segment_grad(const PreferencePair&, Segment,
                                                    bool, double,
                                                    std::vector<double>&) const {
  // No parameters: the gradient contribution is identically zero.
}

std::unique_ptr<PolicyModel> ExternalLogProbPolicy::clone() const {
  return std::make_unique<ExternalLogProbPolicy>(table_, reference_view_);
}

std::pair<std::unique_ptr<PolicyModel>, std::unique_ptr<PolicyModel>>
load_external_policies(const std::filesystem::path& path) {
  auto table = std::make_shared<const ExternalLogProbTable>(
      ExternalLogProbTable::load(path));
  return {std::make_unique<ExternalLogProbPolicy>(table, false),
          std::make_unique<ExternalLogProbPolicy>(table, true)};
}

}  // namespace traceopt::fdpo
