#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <optional>

#include "traceopt/judge.hpp"
#include "traceopt/longcot.hpp"

namespace traceopt::judge {

namespace {

std::string to_lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

// Word-boundary substring search; `phrase` may span several words.
bool contains_phrase(const std::string& text, const std::string& phrase) {
  if (phrase.empty()) return false;
  std::size_t pos = 0;
  while ((pos = text.find(phrase, pos)) != std::string::npos) {
    bool left_ok = pos == 0 || !word_char(text[pos - 1]);
    std::size_t end = pos + phrase.size();
    bool right_ok = end >= text.size() || !word_char(text[end]);
    if (left_ok && right_ok) return true;
    pos += 1;
  }
  return false;
}

std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> out;
  std::string current;
  for (char c : text) {
    if (c == '.' || c == '!' || c == '?' || c == '\n' || c == ';') {
      if (!current.empty()) out.push_back(current);
      current.clear();
    } else {
      current += c;
    }
  }
  if (!current.empty()) out.push_back(current);
  return out;
}

struct RelationSynonym {
  std::string phrase;
  std::string relation;
};

// Longest phrases first so "to the left of" wins over "left of".
const std::vector<RelationSynonym>& relation_lexicon() {
  static const std::vector<RelationSynonym> lexicon = [] {
    std::vector<RelationSynonym> lex = {
        {"to the left of", "left_of"},  {"to the right of", "right_of"},
        {"left of", "left_of"},         {"right of", "right_of"},
        {"on top of", "above"},         {"in front of", "front_of"},
        {"higher than", "above"},       {"lower than", "below"},
        {"above", "above"},             {"over", "above"},
        {"below", "below"},             {"under", "below"},
        {"beneath", "below"},           {"behind", "behind"},
        {"taller than", "taller"},      {"shorter than", "shorter"},
        {"wider than", "wider"},        {"narrower than", "narrower"},
        {"larger than", "larger"},      {"bigger than", "larger"},
        {"smaller than", "smaller"},    {"closer to", "closer"},
        {"closer than", "closer"},      {"farther from", "farther"},
        {"farther than", "farther"},    {"further from", "farther"},
        {"next to", "adjacent"},        {"adjacent to", "adjacent"},
    };
    std::stable_sort(lex.begin(), lex.end(),
                     [](const RelationSynonym& a, const RelationSynonym& b) {
                       return a.phrase.size() > b.phrase.size();
                     });
    return lex;
  }();
  return lexicon;
}

std::optional<std::string> find_relation(const std::string& sentence) {
  for (const auto& syn : relation_lexicon()) {
    if (contains_phrase(sentence, syn.phrase)) return syn.relation;
  }
  return std::nullopt;
}

// Hedging lexicon; the strongest hedge present wins.
double uncertainty_weight_for(const std::string& sentence) {
  double w = 1.0;
  for (const char* q : {"perhaps", "maybe"}) {
    if (contains_phrase(sentence, q)) w = std::min(w, 0.85);
  }
  for (const char* q : {"approximately", "roughly", "possibly"}) {
    if (contains_phrase(sentence, q)) w = std::min(w, 0.9);
  }
  return w;
}

struct Mention {
  std::string object;
  std::size_t pos;
};

std::vector<Mention> find_mentions(const std::string& sentence,
                                   const std::vector<std::string>& objects) {
  std::vector<Mention> mentions;
  for (const auto& obj : objects) {
    std::size_t pos = 0;
    while ((pos = sentence.find(obj, pos)) != std::string::npos) {
      bool left_ok = pos == 0 || !word_char(sentence[pos - 1]);
      std::size_t end = pos + obj.size();
      bool right_ok = end >= sentence.size() || !word_char(sentence[end]);
      if (left_ok && right_ok) {
        mentions.push_back({obj, pos});
        break;
      }
      pos += 1;
    }
  }
  std::sort(mentions.begin(), mentions.end(),
            [](const Mention& a, const Mention& b) { return a.pos < b.pos; });
  return mentions;
}

std::string relation_key(const std::string& subject, const std::string& relation,
                         const std::string& object) {
  return subject + "|" + relation + "|" + object;
}

struct ArithmeticCheck {
  bool any = false;
  bool all_correct = true;
};

// Verifies inline equations of the form "A <op> B = C" where the terms may
// carry length units ("75cm + 20cm = 95cm"). Unitless terms are compared raw.
ArithmeticCheck check_arithmetic(const std::string& text) {
  ArithmeticCheck result;
  struct Term {
    double value;
    std::size_t begin;
    std::size_t end;
  };
  std::vector<Term> terms;
  for (const auto& v : longcot::extract_length_values(text)) {
    terms.push_back({v.value_meters, v.begin, v.end});
  }
  if (terms.empty()) {
    // Unit-free fallback so "3 + 4 = 7" is still checked.
    std::size_t i = 0;
    while (i < text.size()) {
      if (std::isdigit(static_cast<unsigned char>(text[i])) &&
          (i == 0 || !word_char(text[i - 1]))) {
        std::size_t j = i;
        while (j < text.size() &&
               (std::isdigit(static_cast<unsigned char>(text[j])) || text[j] == '.')) {
          ++j;
        }
        terms.push_back({std::stod(text.substr(i, j - i)), i, j});
        i = j;
      } else {
        ++i;
      }
    }
  }
  auto operator_between = [&text](std::size_t a_end, std::size_t b_begin, char& op) {
    std::size_t k = a_end;
    // The extracted span covers the numeric literal only; step over one unit
    // suffix ("cm", "meters") before looking for the operator.
    while (k < b_begin && text[k] == ' ') ++k;
    while (k < b_begin && std::isalpha(static_cast<unsigned char>(text[k]))) ++k;
    for (; k < b_begin && k < text.size(); ++k) {
      char c = text[k];
      if (c == '+' || c == '-' || c == '*' || c == '/' || c == '=') {
        op = c;
        return true;
      }
      // Any further word between two terms breaks the equation.
      if (word_char(c)) return false;
    }
    return false;
  };
  for (std::size_t i = 0; i + 2 < terms.size(); ++i) {
    char op1 = 0;
    char op2 = 0;
    if (!operator_between(terms[i].end, terms[i + 1].begin, op1)) continue;
    if (!operator_between(terms[i + 1].end, terms[i + 2].begin, op2)) continue;
    if (op2 != '=' || op1 == '=') continue;
    double lhs = 0.0;
    switch (op1) {
      case '+': lhs = terms[i].value + terms[i + 1].value; break;
      case '-': lhs = terms[i].value - terms[i + 1].value; break;
      case '*': lhs = terms[i].value * terms[i + 1].value; break;
      case '/':
        lhs = terms[i + 1].value == 0.0 ? std::numeric_limits<double>::infinity()
                                        : terms[i].value / terms[i + 1].value;
        break;
      default: continue;
    }
    result.any = true;
    double rhs = terms[i + 2].value;
    if (std::abs(lhs - rhs) > 1e-9 * std::max(1.0, std::abs(rhs)) + 1e-9) {
      result.all_correct = false;
    }
  }
  return result;
}

struct ScoredClaim {
  std::string text;
  double correctness = 0.0;
  double uncertainty = 1.0;
  double relationship = 0.8;
};

std::vector<ScoredClaim> extract_claims(const MockScene& scene,
                                        const std::string& low_text) {
  std::vector<ScoredClaim> claims;
  for (const auto& sentence : split_sentences(low_text)) {
    auto relation = find_relation(sentence);
    if (!relation) continue;
    auto mentions = find_mentions(sentence, scene.objects);
    std::string subject = mentions.empty() ? std::string{} : mentions[0].object;
    std::string object = mentions.size() > 1 ? mentions[1].object : std::string{};

    std::string key = relation_key(subject, *relation, object);
    double correctness = 0.0;
    if (auto it = scene.relations.find(key); it != scene.relations.end()) {
      correctness = it->second ? 1.0 : 0.0;
    }

    bool asked = false;
    for (const auto& a : scene.asked_relations) {
      if (a == key || a == *relation) {
        asked = true;
        break;
      }
    }

    ScoredClaim claim;
    claim.text = sentence;
    claim.correctness = correctness;
    claim.uncertainty = uncertainty_weight_for(sentence);
    claim.relationship = asked ? 1.0 : 0.8;
    claims.push_back(std::move(claim));
  }
  return claims;
}

nlohmann::json evaluate_description(const MockScene& scene, const std::string& text) {
  std::string low = to_lower(text);
  int known = 0;
  int distractors = 0;
  for (const auto& obj : scene.objects) {
    if (contains_phrase(low, obj)) ++known;
  }
  for (const auto& obj : scene.distractor_objects) {
    if (contains_phrase(low, obj)) ++distractors;
  }
  double existence =
      (known + distractors) == 0 ? 1.0
                                 : static_cast<double>(known) / (known + distractors);

  const auto& required =
      scene.required_objects.empty() ? scene.objects : scene.required_objects;
  double completeness = 1.0;
  if (!required.empty()) {
    int covered = 0;
    for (const auto& obj : required) {
      if (contains_phrase(low, obj)) ++covered;
    }
    completeness = static_cast<double>(covered) / required.size();
  }

  int attr_found = 0;
  int attr_correct = 0;
  for (const auto& [phrase, ok] : scene.attributes) {
    if (contains_phrase(low, phrase)) {
      ++attr_found;
      if (ok) ++attr_correct;
    }
  }
  double attribute_accuracy =
      attr_found == 0 ? 1.0 : static_cast<double>(attr_correct) / attr_found;

  double appropriateness = low.empty() ? 0.0 : 1.0;

  nlohmann::json breakdown = {{"existence", existence},
                              {"attribute_accuracy", attribute_accuracy},
                              {"completeness", completeness},
                              {"appropriateness", appropriateness}};
  double total = existence + attribute_accuracy + completeness + appropriateness;
  return {{"task1_score", total}, {"task1_breakdown", breakdown}};
}

nlohmann::json evaluate_spatial(const MockScene& scene, const std::string& text,
                                Segment segment) {
  auto claims = extract_claims(scene, to_lower(text));
  nlohmann::json scores = nlohmann::json::array();
  nlohmann::json texts = nlohmann::json::array();
  for (const auto& c : claims) {
    scores.push_back({c.correctness, c.uncertainty, c.relationship});
    texts.push_back(c.text);
  }
  const char* score_key =
      segment == Segment::desc ? "task2_claim_score" : "task3_claim_score";
  const char* text_key = segment == Segment::desc ? "task2_claims" : "task3_claims";
  return {{score_key, scores}, {text_key, texts}};
}

nlohmann::json evaluate_reasoning(const MockScene& scene, const std::string& text) {
  std::string low = to_lower(text);
  auto claims = extract_claims(scene, low);
  double factual = 1.0;
  if (!claims.empty()) {
    double sum = 0.0;
    for (const auto& c : claims) sum += c.correctness;
    factual = sum / claims.size();
  }

  ArithmeticCheck arith = check_arithmetic(low);
  double coherence = arith.any && !arith.all_correct ? 0.5 : 1.0;

  double rule = 1.0;
  for (const auto& penalty : scene.heuristic_penalties) {
    if (contains_phrase(low, penalty)) {
      rule = 0.5;
      break;
    }
  }

  double conclusion = 1.0;
  if (arith.any && !arith.all_correct) conclusion = 0.0;
  if (scene.expected_conclusion_m) {
    auto values = longcot::extract_length_values(low);
    if (values.empty()) {
      conclusion = 0.0;
    } else {
      double last = values.back().value_meters;
      double truth = *scene.expected_conclusion_m;
      if (std::abs(last - truth) > 0.25 * std::abs(truth)) conclusion = 0.0;
    }
  }

  nlohmann::json breakdown = {{"factual_consistency", factual},
                              {"logical_coherence", coherence},
                              {"rule_application", rule},
                              {"conclusion_validity", conclusion}};
  double total = factual + coherence + rule + conclusion;
  return {{"task4_score", total}, {"task4_breakdown", breakdown}};
}

nlohmann::json evaluate_node(const MockScene& scene, const std::string& text,
                             const std::string& model_id) {
  std::string low = to_lower(text);
  for (const auto& rule : scene.node_rules) {
    if (low.find(rule.state_substring) == std::string::npos) continue;
    auto it = rule.indicators.find(model_id);
    if (it == rule.indicators.end()) it = rule.indicators.find("");
    if (it != rule.indicators.end()) {
      return {{"visual", it->second[0]},
              {"spatial", it->second[1]},
              {"logical", it->second[2]},
              {"model", model_id}};
    }
  }

  int visual = 0;
  for (const auto& obj : scene.distractor_objects) {
    if (contains_phrase(low, obj)) visual = -1;
  }
  if (visual == 0) {
    for (const auto& obj : scene.objects) {
      if (contains_phrase(low, obj)) {
        visual = 1;
        break;
      }
    }
  }

  auto claims = extract_claims(scene, low);
  int spatial = 0;
  if (!claims.empty()) {
    spatial = 1;
    for (const auto& c : claims) {
      if (c.correctness < 1.0) spatial = -1;
    }
  }

  int logical = 0;
  ArithmeticCheck arith = check_arithmetic(low);
  if (arith.any) logical = arith.all_correct ? 1 : -1;
  for (const auto& penalty : scene.heuristic_penalties) {
    if (contains_phrase(low, penalty)) logical = -1;
  }
  if (scene.expected_conclusion_m && logical >= 0) {
    bool is_conclusion = false;
    try {
      is_conclusion =
          longcot::parse_section(text).kind == longcot::SectionKind::conclusion;
    } catch (const ValidationError&) {
      // Bare text without a heading is not a conclusion candidate.
    }
    if (is_conclusion) {
      auto values = longcot::extract_length_values(low);
      if (!values.empty()) {
        double truth = *scene.expected_conclusion_m;
        logical = std::abs(values.back().value_meters - truth) <= 0.25 * std::abs(truth)
                      ? 1
                      : -1;
      }
    }
  }

  return {{"visual", visual},
          {"spatial", spatial},
          {"logical", logical},
          {"model", model_id}};
}

}  // namespace

MockScene scene_from_json(const nlohmann::json& j) {
  MockScene scene;
  scene.scene_id = j.value("scene_id", std::string{});
  scene.objects = j.value("objects", std::vector<std::string>{});
  scene.required_objects = j.value("required_objects", std::vector<std::string>{});
  scene.distractor_objects = j.value("distractor_objects", std::vector<std::string>{});
  if (j.contains("attributes")) {
    for (const auto& [phrase, ok] : j.at("attributes").items()) {
      scene.attributes[to_lower(phrase)] = ok.get<bool>();
    }
  }
  if (j.contains("relations")) {
    for (const auto& [key, ok] : j.at("relations").items()) {
      scene.relations[to_lower(key)] = ok.get<bool>();
    }
  }
  scene.asked_relations = j.value("asked_relations", std::vector<std::string>{});
  for (auto& r : scene.asked_relations) r = to_lower(r);
  scene.heuristic_penalties =
      j.value("heuristic_penalties", std::vector<std::string>{});
  for (auto& p : scene.heuristic_penalties) p = to_lower(p);
  if (j.contains("expected_conclusion_m")) {
    scene.expected_conclusion_m = j.at("expected_conclusion_m").get<double>();
  }
  if (j.contains("node_rules")) {
    for (const auto& rule : j.at("node_rules")) {
      MockScene::NodeRule nr;
      nr.state_substring = to_lower(rule.at("state_substring").get<std::string>());
      for (const auto& [model, triple] : rule.at("indicators").items()) {
        auto arr = triple.get<std::vector<int>>();
        if (arr.size() != 3) {
          throw ValidationError(
              "node_rules indicators must be [visual, spatial, logical] triples");
        }
        nr.indicators[model] = {arr[0], arr[1], arr[2]};
      }
      scene.node_rules.push_back(std::move(nr));
    }
  }
  for (auto& obj : scene.objects) obj = to_lower(obj);
  for (auto& obj : scene.required_objects) obj = to_lower(obj);
  for (auto& obj : scene.distractor_objects) obj = to_lower(obj);
  return scene;
}

MockJudge::MockJudge(MockScene scene) { scenes_.emplace("", std::move(scene)); }

MockJudge::MockJudge(std::map<std::string, MockScene> scenes)
    : scenes_(std::move(scenes)) {
  if (scenes_.empty()) {
    throw ValidationError("mock judge requires at least one scene");
  }
}

const MockScene& MockJudge::scene_for(const std::string& task_id) const {
  auto it = scenes_.find(task_id);
  if (it != scenes_.end()) return it->second;
  it = scenes_.find("");
  if (it != scenes_.end()) return it->second;
  // No per-task scene and no default: deterministic failure beats a guess.
  throw ValidationError("mock judge has no scene for task '" + task_id +
                        "' and no default scene");
}

nlohmann::json MockJudge::evaluate(const JudgeRequest& req) {
  const MockScene& scene = scene_for(req.task_id);
  switch (req.rubric) {
    case Rubric::description:
      return evaluate_description(scene, req.payload_text);
    case Rubric::spatial_desc:
      return evaluate_spatial(scene, req.payload_text, Segment::desc);
    case Rubric::spatial_reason:
      return evaluate_spatial(scene, req.payload_text, Segment::reason);
    case Rubric::reasoning:
      return evaluate_reasoning(scene, req.payload_text);
    case Rubric::node:
      return evaluate_node(scene, req.payload_text, req.model_id);
  }
  throw ValidationError("unhandled rubric");
}

std::unique_ptr<MockJudge> mock_judge_from_file(const std::filesystem::path& path) {
  nlohmann::json doc = nlohmann::json::parse(read_text_file(path));
  if (doc.contains("scenes")) {
    std::map<std::string, MockScene> scenes;
    for (const auto& [task_id, scene_json] : doc.at("scenes").items()) {
      scenes.emplace(task_id, scene_from_json(scene_json));
    }
    if (doc.contains("default")) {
      scenes.emplace("", scene_from_json(doc.at("default")));
    }
    return std::make_unique<MockJudge>(std::move(scenes));
  }
  return std::make_unique<MockJudge>(scene_from_json(doc));
}

}  // namespace traceopt::judge
