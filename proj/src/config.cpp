#include "flora/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "flora/scripted_backends.hpp"
#include "text_util.hpp"

namespace flora {

namespace {

double to_double(std::string_view key, std::string_view v) {
  const std::string s(v);
  char* end = nullptr;
  double d = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(d))
    throw UsageError(std::string(key) + ": '" + s + "' is not a number");
  return d;
}

int to_int(std::string_view key, std::string_view v) {
  int out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw UsageError(std::string(key) + ": '" + std::string(v) + "' is not an integer");
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  const auto s = text::to_lower(v);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw UsageError(std::string(key) + ": '" + std::string(v) + "' is not a boolean");
}

int positive(std::string_view key, int v) {
  if (v < 1) throw UsageError(std::string(key) + " must be >= 1");
  return v;
}

}  // namespace

const std::vector<std::string>& RunConfig::known_keys() {
  static const std::vector<std::string> keys{
      "llm.url",           "llm.model",          "llm.token",        "llm.timeout_ms",
      "detector.url",      "detector.timeout_ms", "detector.threshold", "scorer.url",
      "scorer.timeout_ms", "max_candidates",     "sigma.kind",       "ensemble.weight",
      "softmax.temperature", "fusion.epsilon",   "eval.parallelism", "eval.strict",
      "mock.file",         "grammar.dict",       "grammar.word_cap", "prompts.templates"};
  return keys;
}

void RunConfig::set(std::string_view key, std::string_view raw) {
  const std::string value(text::trim(raw));
  const EngineConfig before = engine;
  if (key == "llm.url") llm.url = value;
  else if (key == "llm.model") llm.model = value;
  else if (key == "llm.token") llm.bearer_token = value;
  else if (key == "llm.timeout_ms") llm.timeout_ms = positive(key, to_int(key, value));
  else if (key == "detector.url") detector.url = value;
  else if (key == "detector.timeout_ms") detector.timeout_ms = positive(key, to_int(key, value));
  else if (key == "detector.threshold") engine.detector_threshold = to_double(key, value);
  else if (key == "scorer.url") scorer.url = value;
  else if (key == "scorer.timeout_ms") scorer.timeout_ms = positive(key, to_int(key, value));
  else if (key == "max_candidates") engine.max_candidates = to_int(key, value);
  else if (key == "sigma.kind") {
    auto k = sigma_from_name(value);
    if (!k) throw UsageError("sigma.kind must be linear, squared, cubic or exponential");
    engine.sigma = *k;
  } else if (key == "ensemble.weight") engine.ensemble_weight = to_double(key, value);
  else if (key == "softmax.temperature") engine.softmax_temperature = to_double(key, value);
  else if (key == "fusion.epsilon") engine.epsilon = to_double(key, value);
  else if (key == "eval.parallelism") eval.parallelism = positive(key, to_int(key, value));
  else if (key == "eval.strict") eval.strict = to_bool(key, value);
  else if (key == "mock.file") mock_file = value;
  else if (key == "grammar.dict") dict_file = value;
  else if (key == "grammar.word_cap") engine.filter.word_cap = positive(key, to_int(key, value));
  else if (key == "prompts.templates") templates_file = value;
  else throw UsageError("unknown config key '" + std::string(key) + "'");
  try {
    engine.validate();
  } catch (const UsageError&) {
    engine = before;
    throw;
  }
}

void RunConfig::apply(std::string_view text, std::string_view origin) {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string_view::npos)
      throw UsageError(std::string(origin) + ":" + std::to_string(lineno) + ": expected key = value");
    try {
      set(text::trim(t.substr(0, eq)), t.substr(eq + 1));
    } catch (const UsageError& e) {
      throw UsageError(std::string(origin) + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void RunConfig::apply_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply(ss.str(), path.string());
}

EngineConfig RunConfig::resolved_engine() const {
  EngineConfig out = engine;
  if (!dict_file.empty())
    out.dict = std::make_shared<const SpatialTermDict>(SpatialTermDict::load(dict_file));
  if (!templates_file.empty())
    out.templates = std::make_shared<const PromptTemplates>(PromptTemplates::load(templates_file));
  out.validate();
  return out;
}

BackendSet RunConfig::make_backends(bool need_detector) const {
  if (!mock_file.empty())
    return make_scripted_backends(std::make_shared<const MockScript>(MockScript::load(mock_file)));
  if (llm.url.empty()) throw UsageError("no LLM configured: set llm.url or mock.file");
  if (scorer.url.empty()) throw UsageError("no region scorer configured: set scorer.url or mock.file");
  BackendSet set{make_http_llm(llm), nullptr, make_http_scorer(scorer)};
  if (!detector.url.empty()) set.detector = make_http_detector(detector);
  else if (need_detector) throw UsageError("no detector configured: set detector.url or mock.file");
  return set;
}

std::optional<std::filesystem::path> config_path_from_env() {
  const char* v = std::getenv("FLORA_CONFIG");
  if (!v || !*v) return std::nullopt;
  return std::filesystem::path(v);
}

}  // namespace flora
