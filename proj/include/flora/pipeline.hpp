#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "flora/backends.hpp"
#include "flora/fusion.hpp"
#include "flora/grammar.hpp"
#include "flora/interpreters.hpp"
#include "flora/prompting.hpp"

namespace flora {

struct EngineConfig {
  SigmaKind sigma = SigmaKind::Squared;
  double ensemble_weight = 0.05;
  double softmax_temperature = 1.0;
  double epsilon = kDefaultEpsilon;
  int max_candidates = 10;
  double detector_threshold = 0.0;
  FilterOptions filter;
  std::shared_ptr<const SpatialTermDict> dict;         // null: builtin
  std::shared_ptr<const PromptTemplates> templates;    // null: builtin

  const SpatialTermDict& spatial_dict() const { return dict ? *dict : SpatialTermDict::builtin(); }
  const PromptTemplates& prompt_templates() const {
    return templates ? *templates : PromptTemplates::builtin();
  }
  void validate() const;  // throws UsageError
};

enum class QueryMode { Detection, Association };

struct Query {
  ImageRef image;
  std::string phrase;
  QueryMode mode = QueryMode::Detection;
  // Required (non-empty) in association mode, empty in detection mode.
  std::vector<Candidate> given_candidates;
};

struct RankedCandidate {
  Candidate candidate;
  double log_score = 0.0;
  FactorScores factors;
};

struct Answer {
  std::vector<RankedCandidate> ranked;  // fusion rank order
  StructuredDescription responses;
  ParsedSemantics parsed;
  TraceLog trace;
  bool no_answer = false;

  const RankedCandidate* best() const { return ranked.empty() ? nullptr : &ranked.front(); }
};

// Runs prompting, parsing, interpretation and fusion for one query. Immutable
// after construction; safe to share across threads subject to the backends'
// own contracts (single-flight handles are serialized here).
class Engine {
 public:
  Engine(BackendSet backends, EngineConfig config);

  Answer infer(const Query& q) const;

  const EngineConfig& config() const { return config_; }
  const BackendSet& backends() const { return backends_; }

 private:
  BackendSet backends_;
  EngineConfig config_;
};

Answer infer(const Query& q, const BackendSet& backends, const EngineConfig& config);

}  // namespace flora
