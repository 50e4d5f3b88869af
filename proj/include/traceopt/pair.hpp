#pragma once

/// @file
/// Preference pair: two scored responses to the same task, ordered by
/// composite score. The unit of training data for the segment-weighted
/// objective and the unit of output for pair construction.

#include <string>
#include <vector>

#include "json.hpp"
#include "traceopt/common.hpp"
#include "traceopt/longcot.hpp"
#include "traceopt/rewards.hpp"

namespace traceopt {

struct PreferencePair {
  std::string pair_id;
  TaskInstance task;
  longcot::LongCoTResponse positive;
  longcot::LongCoTResponse negative;
  rewards::SegmentScores scores_p;
  rewards::SegmentScores scores_l;
  double delta_desc = 0.0;   ///< scores_p.score_desc - scores_l.score_desc
  double delta_reason = 0.0; ///< scores_p.score_reason - scores_l.score_reason
  std::string origin = "selected";  ///< "selected" or "perturbed"
  std::vector<std::string> flags;
};

/// Checks the delta invariants and origin domain; throws ValidationError.
void validate(const PreferencePair& pair);

/// Flat JSONL record: {pair_id, task_id, question, image_ref, depth_ref,
/// positive_text, negative_text, scores_p, scores_l, delta_desc,
/// delta_reason, origin, flags}.
nlohmann::json pair_to_json(const PreferencePair& pair);
PreferencePair pair_from_json(const nlohmann::json& j);

}  // namespace traceopt
