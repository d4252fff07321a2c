#pragma once

#include <memory>
#include <string>

#include "flora/backends.hpp"

namespace flora {

struct HttpEndpoint {
  std::string url;  // http://host[:port][/prefix]
  int timeout_ms = 30000;
  std::string bearer_token;  // sent as "Authorization: Bearer ..." when non-empty
};

struct LlmEndpoint : HttpEndpoint {
  std::string model = "default";
};

// Chat-completions style LLM client: POST {prefix}/v1/chat/completions with
// system + user messages; the first choice's message content is returned.
std::shared_ptr<LlmBackend> make_http_llm(LlmEndpoint endpoint);

// POST {prefix}/detect {"image","prompt","max"} -> {"boxes":[[x0,y0,x1,y1]...],"scores":[...]}
std::shared_ptr<DetectorBackend> make_http_detector(HttpEndpoint endpoint);

// POST {prefix}/score {"image","box","texts"} -> {"scores":[...]}
std::shared_ptr<RegionScorerBackend> make_http_scorer(HttpEndpoint endpoint);

}  // namespace flora
