/// @file judge.hpp
/// @brief Pluggable evaluation oracle: deterministic mock, fixture replay,
/// recording wrapper, and remote HTTP backend.
///
/// A backend answers one rubric call at a time with a raw JSON payload in the
/// keyed wire format ("task1_score", "task2_claim_score", ...). Typed
/// wrappers validate each payload against its rubric schema before anything
/// leaves the module; malformed output never surfaces as a score.

#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "traceopt/common.hpp"
#include "traceopt/rewards.hpp"

namespace traceopt::judge {

enum class Rubric { description, spatial_desc, spatial_reason, reasoning, node };

std::string_view to_string(Rubric r);
Rubric rubric_from_string(std::string_view s);

struct JudgeRequest {
  std::string task_id;
  std::string image_ref;
  std::string depth_ref;
  std::string question;
  std::string ground_truth;  ///< may be empty
  std::string payload_text;  ///< the text under evaluation
  Rubric rubric = Rubric::description;
  std::string model_id;      ///< which evaluator persona/model (node rubric)
};

JudgeRequest make_request(const TaskInstance& task, std::string payload_text,
                          Rubric rubric, std::string model_id = "");

/// Three-way indicator triple from one evaluation model.
struct NodeIndicators {
  int visual = 0;
  int spatial = 0;
  int logical = 0;
  std::string model_id;
};

class JudgeUnavailable : public ExternalError {
 public:
  using ExternalError::ExternalError;
};

class JudgeTimeout : public ExternalError {
 public:
  using ExternalError::ExternalError;
};

class JudgeMalformedOutput : public ValidationError {
 public:
  JudgeMalformedOutput(const std::string& msg, nlohmann::json payload)
      : ValidationError(msg + "; payload: " + payload.dump()),
        payload_(std::move(payload)) {}

  const nlohmann::json& payload() const { return payload_; }

 private:
  nlohmann::json payload_;
};

class JudgeBackend {
 public:
  virtual ~JudgeBackend() = default;

  /// Answers one rubric call with the raw keyed payload.
  virtual nlohmann::json evaluate(const JudgeRequest& req) = 0;
};

/// Stable key identifying one judged item in the replay store. The hash
/// covers the evaluated text and, for node calls, the model id.
std::string payload_hash(const JudgeRequest& req);

// ---------------------------------------------------------------------------
// Typed rubric wrappers (schema validation happens here)

template <typename T>
struct Judged {
  T value;
  nlohmann::json payload;
};

Judged<rewards::VcSubscores> judge_description(JudgeBackend& judge,
                                               const JudgeRequest& req);
Judged<std::vector<rewards::SpatialClaim>> judge_spatial_claims(
    JudgeBackend& judge, const JudgeRequest& req);
Judged<rewards::LcSubscores> judge_reasoning(JudgeBackend& judge,
                                             const JudgeRequest& req);
/// One indicator triple per configured model; a failed model fails the call.
Judged<std::vector<NodeIndicators>> judge_node(JudgeBackend& judge,
                                               const JudgeRequest& req,
                                               const std::vector<std::string>& models);

// Schema validators, exposed for reuse by backends and tests.
rewards::VcSubscores parse_vc_payload(const nlohmann::json& payload);
std::vector<rewards::SpatialClaim> parse_spatial_payload(const nlohmann::json& payload,
                                                         Segment segment);
rewards::LcSubscores parse_lc_payload(const nlohmann::json& payload);
NodeIndicators parse_node_payload(const nlohmann::json& payload);

/// The four-task rubric prompt sent to remote judges, with the question and
/// ground truth substituted in.
std::string build_judge_prompt(const std::string& question,
                               const std::string& ground_truth);

// ---------------------------------------------------------------------------
// Mock backend: a rule table per fixture scene

/// Deterministic stand-in for a multimodal judge. All judgments derive from
/// the scene fixture: an object lexicon for existence/completeness checks, a
/// relation table for spatial correctness, qualifier words for uncertainty
/// weights, and optional per-model rules forcing node indicators.
struct MockScene {
  std::string scene_id;
  std::vector<std::string> objects;            ///< objects present in the scene
  std::vector<std::string> required_objects;   ///< completeness denominator
  std::vector<std::string> distractor_objects; ///< mentioned-but-absent traps
  /// attribute phrase -> correct? e.g. "white island" -> true
  std::map<std::string, bool> attributes;
  /// "subject|relation|object" -> true for relations that hold
  std::map<std::string, bool> relations;
  /// relation keys explicitly asked by the question (context weight 1.0)
  std::vector<std::string> asked_relations;
  /// phrases that mark an unjustified shortcut (rule-application penalty)
  std::vector<std::string> heuristic_penalties;
  /// expected conclusion value in meters, for conclusion-validity checks
  std::optional<double> expected_conclusion_m;
  /// forced node indicators: state-text substring -> model id -> [v, s, l]
  struct NodeRule {
    std::string state_substring;
    std::map<std::string, std::array<int, 3>> indicators;
  };
  std::vector<NodeRule> node_rules;
};

MockScene scene_from_json(const nlohmann::json& j);

class MockJudge : public JudgeBackend {
 public:
  explicit MockJudge(MockScene scene);

  /// Scene registry keyed by task id; the "" entry is the default scene.
  explicit MockJudge(std::map<std::string, MockScene> scenes);

  nlohmann::json evaluate(const JudgeRequest& req) override;

 private:
  const MockScene& scene_for(const std::string& task_id) const;

  std::map<std::string, MockScene> scenes_;
};

/// Loads a scene registry file: {"scenes": {task_id: scene,...}, "default": scene}
std::unique_ptr<MockJudge> mock_judge_from_file(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Replay / recording backends

/// Replays recorded payloads keyed by (task_id, rubric, payload_hash).
class ReplayJudge : public JudgeBackend {
 public:
  ReplayJudge() = default;
  explicit ReplayJudge(const std::filesystem::path& fixture_dir_or_file);

  void add_record(const std::string& task_id, Rubric rubric,
                  const std::string& payload_hash, nlohmann::json response);

  nlohmann::json evaluate(const JudgeRequest& req) override;

  std::size_t size() const { return records_.size(); }

 private:
  std::map<std::string, nlohmann::json> records_;
};

/// Wraps another backend and appends every (request, response) to a JSONL
/// file that ReplayJudge can load.
class RecordingJudge : public JudgeBackend {
 public:
  RecordingJudge(JudgeBackend& inner, std::filesystem::path out_path);
  ~RecordingJudge();

  nlohmann::json evaluate(const JudgeRequest& req) override;

 private:
  JudgeBackend& inner_;
  std::filesystem::path out_path_;
  std::vector<nlohmann::json> records_;
};

// ---------------------------------------------------------------------------
// Remote backend

struct RemoteJudgeConfig {
  std::string endpoint;   ///< http://host:port/path; JUDGE_ENDPOINT if empty
  std::string api_key;    ///< JUDGE_API_KEY if empty
  int max_retries = 3;
  int timeout_seconds = 30;
  double backoff_initial_seconds = 0.2;  ///< doubles on every retry
};

/// POSTs {prompt, question, ground_truth, image_ref, depth_ref, rubric,
/// payload_text, model} to the endpoint and expects the raw rubric payload
/// back. Requests are idempotent; transport failures retry with exponential
/// backoff before surfacing JudgeUnavailable.
class RemoteJudge : public JudgeBackend {
 public:
  explicit RemoteJudge(RemoteJudgeConfig config);

  nlohmann::json evaluate(const JudgeRequest& req) override;

 private:
  RemoteJudgeConfig config_;
};

/// Factory for --judge {mock,replay,remote}; `fixture` names the scene file
/// (mock) or the replay store (replay).
std::unique_ptr<JudgeBackend> make_judge(const std::string& kind,
                                         const std::filesystem::path& fixture,
                                         const RemoteJudgeConfig& remote = {});

}  // namespace traceopt::judge
