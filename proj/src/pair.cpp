#include "traceopt/pair.hpp"

#include <cmath>

namespace traceopt {

void validate(const PreferencePair& pair) {
  if (pair.pair_id.empty()) throw ValidationError("pair_id must be non-empty");
  if (pair.origin != "selected" && pair.origin != "perturbed") {
    throw ValidationError("pair " + pair.pair_id + ": origin must be 'selected' or "
                          "'perturbed', got '" + pair.origin + "'");
  }
  rewards::validate(pair.scores_p);
  rewards::validate(pair.scores_l);
  if (!std::isfinite(pair.delta_desc) || !std::isfinite(pair.delta_reason)) {
    throw ValidationError("pair " + pair.pair_id + ": non-finite differential");
  }
  double want_desc = pair.scores_p.score_desc - pair.scores_l.score_desc;
  double want_reason = pair.scores_p.score_reason - pair.scores_l.score_reason;
  if (std::abs(pair.delta_desc - want_desc) > 1e-9 ||
      std::abs(pair.delta_reason - want_reason) > 1e-9) {
    throw ValidationError("pair " + pair.pair_id +
                          ": stored differentials do not match the score records");
  }
}

nlohmann::json pair_to_json(const PreferencePair& pair) {
  return {{"pair_id", pair.pair_id},
          {"task_id", pair.task.task_id},
          {"question", pair.task.question},
          {"image_ref", pair.task.image_ref},
          {"depth_ref", pair.task.depth_ref},
          {"positive_text", longcot::render_longcot(pair.positive)},
          {"negative_text", longcot::render_longcot(pair.negative)},
          {"scores_p", rewards::scores_to_json(pair.scores_p)},
          {"scores_l", rewards::scores_to_json(pair.scores_l)},
          {"delta_desc", pair.delta_desc},
          {"delta_reason", pair.delta_reason},
          {"origin", pair.origin},
          {"flags", pair.flags}};
}

PreferencePair pair_from_json(const nlohmann::json& j) {
  for (const char* key :
       {"pair_id", "task_id", "question", "positive_text", "negative_text",
        "scores_p", "scores_l", "delta_desc", "delta_reason", "origin"}) {
    if (!j.contains(key)) {
      throw ValidationError(std::string("pair record is missing '") + key + "'");
    }
  }
  PreferencePair pair;
  pair.pair_id = j.at("pair_id").get<std::string>();
  pair.task.task_id = j.at("task_id").get<std::string>();
  pair.task.question = j.at("question").get<std::string>();
  pair.task.image_ref = j.value("image_ref", std::string{});
  pair.task.depth_ref = j.value("depth_ref", std::string{});
  pair.positive = longcot::parse_longcot(j.at("positive_text").get<std::string>());
  pair.negative = longcot::parse_longcot(j.at("negative_text").get<std::string>());
  pair.scores_p = rewards::scores_from_json(j.at("scores_p"));
  pair.scores_l = rewards::scores_from_json(j.at("scores_l"));
  pair.delta_desc = j.at("delta_desc").get<double>();
  pair.delta_reason = j.at("delta_reason").get<double>();
  pair.origin = j.at("origin").get<std::string>();
  pair.flags = j.value("flags", std::vector<std::string>{});
  validate(pair);
  return pair;
}

}  // namespace traceopt
