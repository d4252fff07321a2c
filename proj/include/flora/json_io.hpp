#pragma once

// JSON forms of the core types, as printed by the command-line tool.

#include <json.hpp>

#include "flora/grammar.hpp"
#include "flora/pipeline.hpp"
#include "flora/types.hpp"

namespace flora {

// [x_min, y_min, x_max, y_max]
nlohmann::json box_to_json(const Box& b);
Box box_from_json(const nlohmann::json& j);  // throws UsageError; checks the unit square

nlohmann::json to_json(const Candidate& c);  // {"id", "box", "confidence"}
Candidate candidate_from_json(const nlohmann::json& j);

// {"type": "car", "location": ["left"], "visual": "black", "relation": null}
nlohmann::json to_json(const ParsedSemantics& p);

// {"no_answer", "parsed", "responses", "ranked": [{"rank", "id", "box",
//  "confidence", "log_score", "factors": {"type": p or null, ...}}], "trace"}
// top_k < 0 keeps every ranked entry.
nlohmann::json to_json(const Answer& a, int top_k = -1);

}  // namespace flora
