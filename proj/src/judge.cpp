#include "traceopt/judge.hpp"

#include <string>

namespace traceopt::judge {

std::string_view to_string(Rubric r) {
  switch (r) {
    case Rubric::description: return "description";
    case Rubric::spatial_desc: return "spatial_desc";
    case Rubric::spatial_reason: return "spatial_reason";
    case Rubric::reasoning: return "reasoning";
    case Rubric::node: return "node";
  }
  return "description";
}

Rubric rubric_from_string(std::string_view s) {
  if (s == "description") return Rubric::description;
  if (s == "spatial_desc") return Rubric::spatial_desc;
  if (s == "spatial_reason") return Rubric::spatial_reason;
  if (s == "reasoning") return Rubric::reasoning;
  if (s == "node") return Rubric::node;
  throw ValidationError("unknown rubric: " + std::string(s));
}

JudgeRequest make_request(const TaskInstance& task, std::string payload_text,
                          Rubric rubric, std::string model_id) {
  JudgeRequest req;
  req.task_id = task.task_id;
  req.image_ref = task.image_ref;
  req.depth_ref = task.depth_ref;
  req.question = task.question;
  req.ground_truth = task.ground_truth.value_or("");
  req.payload_text = std::move(payload_text);
  req.rubric = rubric;
  req.model_id = std::move(model_id);
  return req;
}

std::string payload_hash(const JudgeRequest& req) {
  std::string key;
  key += to_string(req.rubric);
  key += '\x1f';
  key += req.payload_text;
  key += '\x1f';
  key += req.model_id;
  return fnv1a64_hex(key);
}

namespace {

double require_number(const nlohmann::json& payload, const nlohmann::json& node,
                      const char* what) {
  if (!node.is_number()) {
    throw JudgeMalformedOutput(std::string("non-numeric ") + what, payload);
  }
  return node.get<double>();
}

double breakdown_component(const nlohmann::json& payload, const nlohmann::json& bd,
                           const char* key) {
  if (!bd.contains(key)) {
    throw JudgeMalformedOutput(std::string("breakdown missing '") + key + "'", payload);
  }
  return require_number(payload, bd.at(key), key);
}

void check_score_matches(const nlohmann::json& payload, double stated, double sum,
                         const char* key) {
  if (std::abs(stated - sum) > 1e-6) {
    throw JudgeMalformedOutput(std::string(key) + " does not equal its breakdown sum",
                               payload);
  }
}

}  // namespace

rewards::VcSubscores parse_vc_payload(const nlohmann::json& payload) {
  if (!payload.contains("task1_score") || !payload.contains("task1_breakdown")) {
    throw JudgeMalformedOutput("expected task1_score and task1_breakdown", payload);
  }
  const auto& bd = payload.at("task1_breakdown");
  rewards::VcSubscores s;
  s.existence = breakdown_component(payload, bd, "existence");
  s.attribute_accuracy = breakdown_component(payload, bd, "attribute_accuracy");
  s.completeness = breakdown_component(payload, bd, "completeness");
  s.appropriateness = breakdown_component(payload, bd, "appropriateness");
  double stated = require_number(payload, payload.at("task1_score"), "task1_score");
  check_score_matches(payload, stated,
                      s.existence + s.attribute_accuracy + s.completeness +
                          s.appropriateness,
                      "task1_score");
  try {
    rewards::validate(s);
  } catch (const rewards::OutOfRangeError& e) {
    throw rewards::OutOfRangeError(std::string(e.what()) +
                                   "; payload: " + payload.dump());
  }
  return s;
}

std::vector<rewards::SpatialClaim> parse_spatial_payload(const nlohmann::json& payload,
                                                         Segment segment) {
  const char* score_key =
      segment == Segment::desc ? "task2_claim_score" : "task3_claim_score";
  const char* text_key = segment == Segment::desc ? "task2_claims" : "task3_claims";
  if (!payload.contains(score_key)) {
    throw JudgeMalformedOutput(std::string("expected ") + score_key, payload);
  }
  const auto& entries = payload.at(score_key);
  if (!entries.is_array()) {
    throw JudgeMalformedOutput(std::string(score_key) + " must be an array", payload);
  }
  std::vector<std::string> texts;
  if (payload.contains(text_key) && payload.at(text_key).is_array()) {
    texts = payload.at(text_key).get<std::vector<std::string>>();
  }
  std::vector<rewards::SpatialClaim> claims;
  claims.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (!e.is_array() || e.size() != 3) {
      throw JudgeMalformedOutput(
          std::string(score_key) + " entries must be [correctness, uncertainty, "
                                   "relationship] triples",
          payload);
    }
    rewards::SpatialClaim c;
    c.correctness = require_number(payload, e[0], "correctness score");
    c.uncertainty_weight = require_number(payload, e[1], "uncertainty score");
    c.context_weight = require_number(payload, e[2], "relationship score");
    c.segment = segment;
    if (i < texts.size()) c.text = texts[i];
    try {
      rewards::validate(c);
    } catch (const rewards::OutOfRangeError& err) {
      throw rewards::OutOfRangeError(std::string(err.what()) +
                                     "; payload: " + payload.dump());
    }
    claims.push_back(std::move(c));
  }
  return claims;
}

rewards::LcSubscores parse_lc_payload(const nlohmann::json& payload) {
  if (!payload.contains("task4_score") || !payload.contains("task4_breakdown")) {
    throw JudgeMalformedOutput("expected task4_score and task4_breakdown", payload);
  }
  const auto& bd = payload.at("task4_breakdown");
  rewards::LcSubscores s;
  s.factual_consistency = breakdown_component(payload, bd, "factual_consistency");
  s.logical_coherence = breakdown_component(payload, bd, "logical_coherence");
  s.rule_application = breakdown_component(payload, bd, "rule_application");
  s.conclusion_validity = breakdown_component(payload, bd, "conclusion_validity");
  double stated = require_number(payload, payload.at("task4_score"), "task4_score");
  check_score_matches(payload, stated,
                      s.factual_consistency + s.logical_coherence +
                          s.rule_application + s.conclusion_validity,
                      "task4_score");
  try {
    rewards::validate(s);
  } catch (const rewards::OutOfRangeError& e) {
    throw rewards::OutOfRangeError(std::string(e.what()) +
                                   "; payload: " + payload.dump());
  }
  return s;
}

NodeIndicators parse_node_payload(const nlohmann::json& payload) {
  NodeIndicators ind;
  auto component = [&payload](const char* key) {
    if (!payload.contains(key)) {
      throw JudgeMalformedOutput(std::string("expected indicator '") + key + "'",
                                 payload);
    }
    const auto& node = payload.at(key);
    if (!node.is_number_integer()) {
      throw JudgeMalformedOutput(std::string("indicator '") + key +
                                     "' must be an integer",
                                 payload);
    }
    int v = node.get<int>();
    if (v < -1 || v > 1) {
      throw JudgeMalformedOutput(std::string("indicator '") + key +
                                     "' must be -1, 0, or +1",
                                 payload);
    }
    return v;
  };
  ind.visual = component("visual");
  ind.spatial = component("spatial");
  ind.logical = component("logical");
  if (payload.contains("model")) ind.model_id = payload.at("model").get<std::string>();
  return ind;
}

Judged<rewards::VcSubscores> judge_description(JudgeBackend& judge,
                                               const JudgeRequest& req) {
  if (req.rubric != Rubric::description) {
    throw ValidationError("judge_description requires the description rubric");
  }
  nlohmann::json payload = judge.evaluate(req);
  return {parse_vc_payload(payload), std::move(payload)};
}

Judged<std::vector<rewards::SpatialClaim>> judge_spatial_claims(
    JudgeBackend& judge, const JudgeRequest& req) {
  if (req.rubric != Rubric::spatial_desc && req.rubric != Rubric::spatial_reason) {
    throw ValidationError("judge_spatial_claims requires a spatial rubric");
  }
  Segment seg = req.rubric == Rubric::spatial_desc ? Segment::desc : Segment::reason;
  nlohmann::json payload = judge.evaluate(req);
  return {parse_spatial_payload(payload, seg), std::move(payload)};
}

Judged<rewards::LcSubscores> judge_reasoning(JudgeBackend& judge,
                                             const JudgeRequest& req) {
  if (req.rubric != Rubric::reasoning) {
    throw ValidationError("judge_reasoning requires the reasoning rubric");
  }
  nlohmann::json payload = judge.evaluate(req);
  return {parse_lc_payload(payload), std::move(payload)};
}

Judged<std::vector<NodeIndicators>> judge_node(JudgeBackend& judge,
                                               const JudgeRequest& req,
                                               const std::vector<std::string>& models) {
  if (req.rubric != Rubric::node) {
    throw ValidationError("judge_node requires the node rubric");
  }
  if (models.empty()) {
    throw ValidationError("judge_node requires at least one evaluation model");
  }
  Judged<std::vector<NodeIndicators>> out;
  out.payload = nlohmann::json::array();
  for (const auto& model : models) {
    JudgeRequest per_model = req;
    per_model.model_id = model;
    nlohmann::json payload = judge.evaluate(per_model);
    NodeIndicators ind = parse_node_payload(payload);
    ind.model_id = model;
    out.value.push_back(ind);
    out.payload.push_back(std::move(payload));
  }
  return out;
}

std::unique_ptr<JudgeBackend> make_judge(const std::string& kind,
                                         const std::filesystem::path& fixture,
                                         const RemoteJudgeConfig& remote) {
  if (kind == "mock") return mock_judge_from_file(fixture);
  if (kind == "replay") return std::make_unique<ReplayJudge>(fixture);
  if (kind == "remote") return std::make_unique<RemoteJudge>(remote);
  throw ValidationError("unknown judge backend: " + kind +
                        " (expected mock, replay, or remote)");
}

}  // namespace traceopt::judge
