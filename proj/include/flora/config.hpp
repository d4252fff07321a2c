#pragma once

// Run configuration: a plain-text file of dotted `key = value` lines. Blank
// lines and lines starting with '#' are ignored; unknown keys are rejected.
//
//   llm.url  llm.model  llm.token  llm.timeout_ms
//   detector.url  detector.timeout_ms  detector.threshold
//   scorer.url  scorer.timeout_ms
//   max_candidates  sigma.kind  ensemble.weight  softmax.temperature  fusion.epsilon
//   eval.parallelism  eval.strict
//   mock.file  grammar.dict  grammar.word_cap  prompts.templates

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flora/eval.hpp"
#include "flora/http_backends.hpp"
#include "flora/pipeline.hpp"

namespace flora {

struct RunConfig {
  LlmEndpoint llm;
  HttpEndpoint detector;
  HttpEndpoint scorer;
  EngineConfig engine;
  EvalOptions eval;
  std::filesystem::path mock_file;
  std::filesystem::path dict_file;
  std::filesystem::path templates_file;

  static const std::vector<std::string>& known_keys();

  // Applies one key; throws UsageError for unknown keys or out-of-range values.
  void set(std::string_view key, std::string_view value);
  // Applies every line of a config file's text.
  void apply(std::string_view text, std::string_view origin = "config");
  void apply_file(const std::filesystem::path& path);

  // Loads dictionary and template files into the engine config and validates it.
  EngineConfig resolved_engine() const;

  // Scripted backends when mock.file is set, HTTP backends otherwise. Throws
  // UsageError when a needed endpoint is missing.
  BackendSet make_backends(bool need_detector = true) const;
};

// The FLORA_CONFIG environment variable, if set and non-empty.
std::optional<std::filesystem::path> config_path_from_env();

}  // namespace flora
