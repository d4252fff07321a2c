#include "flora/json_io.hpp"

namespace flora {

using nlohmann::json;

json box_to_json(const Box& b) { return {b.min().x(), b.min().y(), b.max().x(), b.max().y()}; }

Box box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw UsageError("a box is an array of 4 numbers");
  for (const auto& v : j)
    if (!v.is_number()) throw UsageError("a box is an array of 4 numbers");
  Box b = make_box(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
  if (!is_valid_box(b)) throw UsageError("box " + j.dump() + " is not inside the unit square");
  return b;
}

json to_json(const Candidate& c) {
  return {{"id", c.id}, {"box", box_to_json(c.box)}, {"confidence", c.detector_confidence}};
}

Candidate candidate_from_json(const json& j) {
  if (!j.is_object() || !j.contains("id") || !j.contains("box"))
    throw UsageError("a candidate needs an id and a box");
  Candidate c{j.at("id").get<int>(), box_from_json(j.at("box")), j.value("confidence", 1.0)};
  if (!is_valid_candidate(c)) throw UsageError("candidate confidence outside [0,1]");
  return c;
}

json to_json(const ParsedSemantics& p) {
  auto opt = [](const std::optional<std::string>& s) -> json { return s ? json(*s) : json(nullptr); };
  return {{"type", opt(p.o_type)},
          {"location", p.o_location ? json(*p.o_location) : json(nullptr)},
          {"visual", opt(p.o_visual)},
          {"relation", opt(p.o_relation)}};
}

json to_json(const Answer& a, int top_k) {
  json ranked = json::array();
  int rank = 0;
  for (const auto& r : a.ranked) {
    if (top_k >= 0 && rank >= top_k) break;
    json factors;
    for (FieldKind k : kAllFieldKinds)
      factors[std::string(field_name(k))] =
          r.factors.skipped.test(index_of(k)) ? json(nullptr) : json(r.factors[k]);
    ranked.push_back({{"rank", ++rank},
                      {"id", r.candidate.id},
                      {"box", box_to_json(r.candidate.box)},
                      {"confidence", r.candidate.detector_confidence},
                      {"log_score", r.log_score},
                      {"factors", std::move(factors)}});
  }
  json responses;
  for (FieldKind k : kAllFieldKinds) responses[std::string(field_name(k))] = a.responses[k];
  json trace = json::array();
  for (const auto& t : a.trace)
    trace.push_back({{"stage", t.stage}, {"request", t.request}, {"response", t.response}});
  return {{"no_answer", a.no_answer},
          {"parsed", to_json(a.parsed)},
          {"responses", std::move(responses)},
          {"ranked", std::move(ranked)},
          {"trace", std::move(trace)}};
}

}  // namespace flora
