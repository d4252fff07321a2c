#include "flora/http_backends.hpp"

#include <cmath>

#include <httplib.h>
#include <json.hpp>

namespace flora {

namespace {

using nlohmann::json;

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix without trailing slash
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos || url.compare(0, scheme_end, "http") != 0)
    throw UsageError("backend url must start with http:// (got '" + url + "')");
  auto path_start = url.find('/', scheme_end + 3);
  SplitUrl out{url.substr(0, path_start), path_start == std::string::npos ? "" : url.substr(path_start)};
  while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  return out;
}

// POSTs a JSON body; retries once on transport failure or 5xx.
json post_json(const HttpEndpoint& ep, const std::string& path, const json& body,
               const std::string& stage, const std::string& diagnostic) {
  auto url = split_url(ep.url);
  httplib::Client client(url.origin);
  auto timeout = std::chrono::milliseconds(ep.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  if (!ep.bearer_token.empty()) client.set_bearer_token_auth(ep.bearer_token);

  const std::string payload = body.dump();
  std::string failure;
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto res = client.Post(url.prefix + path, payload, "application/json");
    if (!res) {
      failure = "transport failure (" + httplib::to_string(res.error()) + ") contacting " + ep.url;
      continue;
    }
    if (res->status >= 500) {
      failure = "server error " + std::to_string(res->status) + " from " + ep.url;
      continue;
    }
    if (res->status != 200)
      throw BackendError(BackendError::Kind::Protocol, stage,
                         "HTTP " + std::to_string(res->status) + " from " + ep.url, diagnostic);
    try {
      return json::parse(res->body);
    } catch (const json::exception& e) {
      throw BackendError(BackendError::Kind::Protocol, stage,
                         std::string("reply is not JSON: ") + e.what(), diagnostic);
    }
  }
  throw BackendError(BackendError::Kind::Transport, stage, failure, diagnostic);
}

class HttpLlm final : public LlmBackend {
 public:
  explicit HttpLlm(LlmEndpoint ep) : ep_(std::move(ep)) { split_url(ep_.url); }

  std::string complete(std::string_view system, std::string_view user) override {
    if (user.empty()) throw UsageError("LLM user prompt must be non-empty");
    json body = {{"model", ep_.model},
                 {"temperature", 0},
                 {"stream", false},
                 {"messages",
                  json::array({{{"role", "system"}, {"content", system}},
                               {{"role", "user"}, {"content", user}}})}};
    auto reply = post_json(ep_, "/v1/chat/completions", body, "llm", std::string(user));
    try {
      const auto& choice = reply.at("choices").at(0);
      if (choice.contains("message")) return choice.at("message").at("content").get<std::string>();
      return choice.at("text").get<std::string>();
    } catch (const json::exception& e) {
      throw BackendError(BackendError::Kind::Protocol, "llm",
                         std::string("no textual completion in reply: ") + e.what(),
                         std::string(user));
    }
  }

 private:
  LlmEndpoint ep_;
};

class HttpDetector final : public DetectorBackend {
 public:
  explicit HttpDetector(HttpEndpoint ep) : ep_(std::move(ep)) { split_url(ep_.url); }

  std::vector<Candidate> detect(const ImageRef& image, std::string_view prompt,
                                int max_candidates) override {
    if (prompt.empty()) throw UsageError("detector prompt must be non-empty");
    if (max_candidates < 1) throw UsageError("max_candidates must be >= 1");
    json body = {{"image", image.uri}, {"prompt", prompt}, {"max", max_candidates}};
    auto reply = post_json(ep_, "/detect", body, "detector", std::string(prompt));

    std::vector<Candidate> out;
    try {
      const auto& boxes = reply.at("boxes");
      const auto& scores = reply.at("scores");
      if (boxes.size() != scores.size())
        throw BackendError(BackendError::Kind::Protocol, "detector",
                           "boxes/scores length mismatch", std::string(prompt));
      for (std::size_t i = 0; i < boxes.size(); ++i) {
        auto b = boxes.at(i).get<std::vector<double>>();
        if (b.size() != 4)
          throw BackendError(BackendError::Kind::Protocol, "detector", "box needs 4 coordinates",
                             std::string(prompt));
        out.push_back({static_cast<int>(i), make_box(b[0], b[1], b[2], b[3]),
                       scores.at(i).get<double>()});
      }
    } catch (const json::exception& e) {
      throw BackendError(BackendError::Kind::Protocol, "detector",
                         std::string("malformed reply: ") + e.what(), std::string(prompt));
    }
    return finalize_detections(std::move(out), max_candidates, "detector");
  }

 private:
  HttpEndpoint ep_;
};

class HttpScorer final : public RegionScorerBackend {
 public:
  explicit HttpScorer(HttpEndpoint ep) : ep_(std::move(ep)) { split_url(ep_.url); }

  std::vector<double> score(const ImageRef& image, const Box& box,
                            std::span<const std::string> texts) override {
    json body = {{"image", image.uri},
                 {"box", {box.min().x(), box.min().y(), box.max().x(), box.max().y()}},
                 {"texts", std::vector<std::string>(texts.begin(), texts.end())}};
    std::string diagnostic = texts.empty() ? std::string() : texts.front();
    auto reply = post_json(ep_, "/score", body, "scorer", diagnostic);
    std::vector<double> scores;
    try {
      scores = reply.at("scores").get<std::vector<double>>();
    } catch (const json::exception& e) {
      throw BackendError(BackendError::Kind::Protocol, "scorer",
                         std::string("malformed reply: ") + e.what(), diagnostic);
    }
    if (scores.size() != texts.size())
      throw BackendError(BackendError::Kind::Protocol, "scorer",
                         "expected " + std::to_string(texts.size()) + " scores, got " +
                             std::to_string(scores.size()),
                         diagnostic);
    for (double s : scores)
      if (!std::isfinite(s))
        throw BackendError(BackendError::Kind::Protocol, "scorer", "non-finite score", diagnostic);
    return scores;
  }

 private:
  HttpEndpoint ep_;
};

}  // namespace

std::shared_ptr<LlmBackend> make_http_llm(LlmEndpoint endpoint) {
  return std::make_shared<HttpLlm>(std::move(endpoint));
}

std::shared_ptr<DetectorBackend> make_http_detector(HttpEndpoint endpoint) {
  return std::make_shared<HttpDetector>(std::move(endpoint));
}

std::shared_ptr<RegionScorerBackend> make_http_scorer(HttpEndpoint endpoint) {
  return std::make_shared<HttpScorer>(std::move(endpoint));
}

}  // namespace flora
