#include "flora/pipeline.hpp"

#include <future>
#include <set>

namespace flora {

void EngineConfig::validate() const {
  if (ensemble_weight < 0.0 || ensemble_weight > 1.0)
    throw UsageError("ensemble.weight must lie in [0,1]");
  if (!(softmax_temperature > 0.0)) throw UsageError("softmax.temperature must be positive");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw UsageError("fusion.epsilon must lie in (0,1)");
  if (max_candidates < 1) throw UsageError("max_candidates must be >= 1");
  if (detector_threshold < 0.0 || detector_threshold > 1.0)
    throw UsageError("detector.threshold must lie in [0,1]");
}

namespace {

void validate_query(const Query& q) {
  if (q.phrase.find_first_not_of(" \t\r\n") == std::string::npos)
    throw UsageError("referring phrase must be non-empty");
  if (q.image.width_px <= 0 || q.image.height_px <= 0)
    throw UsageError("image dimensions must be positive");
  if (q.mode == QueryMode::Detection && !q.given_candidates.empty())
    throw UsageError("detection queries must not carry given candidates");
  if (q.mode == QueryMode::Association) {
    if (q.given_candidates.empty())
      throw UsageError("association queries need at least one given candidate");
    std::set<int> ids;
    for (const auto& c : q.given_candidates) {
      if (!is_valid_box(c.box)) throw UsageError("given candidate box outside the unit square");
      if (!ids.insert(c.id).second)
        throw UsageError("duplicate given candidate id " + std::to_string(c.id));
    }
  }
}

// Rethrows backend failures with the pipeline stage prepended.
template <typename F>
auto staged(const std::string& stage, F&& f) {
  try {
    return f();
  } catch (const BackendError& e) {
    throw BackendError(e.kind(), stage + "/" + e.stage(), e.message(), e.request());
  }
}

}  // namespace

Engine::Engine(BackendSet backends, EngineConfig config)
    : backends_(serialize_single_flight(std::move(backends))), config_(std::move(config)) {
  config_.validate();
  if (!backends_.llm) throw UsageError("an LLM backend is required");
  if (!backends_.scorer) throw UsageError("a region scorer backend is required");
}

Answer Engine::infer(const Query& q) const {
  validate_query(q);
  const bool association = q.mode == QueryMode::Association;
  if (!association && !backends_.detector)
    throw UsageError("detection queries need a detector backend");

  Answer answer;
  const PromptBundle prompts = build_prompt_bundle(q.phrase, config_.prompt_templates());

  // Fixed order keeps traces reproducible; association mode asks no type.
  auto ask = [&](FieldKind kind, std::string& slot) {
    const auto& prompt = prompts[kind];
    slot = staged("llm." + std::string(field_name(kind)),
                  [&] { return backends_.llm->complete(prompts.system, prompt); });
    answer.trace.push_back({"llm." + std::string(field_name(kind)), prompt, slot});
  };
  if (!association) ask(FieldKind::ObjectType, answer.responses.s_type);
  ask(FieldKind::SpatialLocation, answer.responses.s_location);
  ask(FieldKind::VisualPattern, answer.responses.s_visual);
  ask(FieldKind::ObjectRelation, answer.responses.s_relation);

  answer.parsed = parse_structured(answer.responses, config_.spatial_dict(), config_.filter);
  const ParsedSemantics& parsed = answer.parsed;

  std::vector<Candidate> candidates;
  std::vector<FactorScores> factors;
  if (association) {
    candidates = q.given_candidates;
    for (const auto& c : candidates) factors.push_back({c.id, Eigen::Array4d::Ones(), {}});
  } else {
    // Without a parsed type the whole phrase is the detection prompt.
    const std::string detect_prompt = parsed.o_type.value_or(q.phrase);
    TypeOptions opts{config_.max_candidates, config_.detector_threshold};
    auto typed = staged("type", [&] {
      return interpret_type(detect_prompt, q.image, *backends_.detector, opts, &answer.trace);
    });
    for (auto& [c, p] : typed) {
      FactorScores f{c.id, Eigen::Array4d::Ones(), {}};
      f.set(FieldKind::ObjectType, std::max(p, config_.epsilon));
      factors.push_back(f);
      candidates.push_back(c);
    }
  }
  if (candidates.empty()) {
    answer.no_answer = true;
    return answer;
  }
  if (association)
    for (auto& f : factors) f.skip(FieldKind::ObjectType);

  if (parsed.o_location) {
    for (std::size_t i = 0; i < candidates.size(); ++i)
      factors[i].set(FieldKind::SpatialLocation,
                     location_relevance<double>(*parsed.o_location, geometry_of(candidates[i].box),
                                                config_.sigma, config_.spatial_dict(),
                                                config_.epsilon));
  } else {
    for (auto& f : factors) f.skip(FieldKind::SpatialLocation);
  }

  TextFactorOptions text_opts{config_.ensemble_weight, config_.softmax_temperature,
                              config_.epsilon, config_.max_candidates, 0.5};
  DetectorBackend* ensemble = association ? nullptr : backends_.detector.get();
  auto text_factor = [&](FieldKind kind, TraceLog& log) -> std::optional<TextFactor> {
    const auto& component = parsed.text(kind);
    if (!component) return std::nullopt;
    const auto scoring = kind == FieldKind::VisualPattern ? ScoringKind::Visual : ScoringKind::Relation;
    return staged(std::string(field_name(kind)), [&] {
      return interpret_text_factor(parsed.o_type, *component, scoring, candidates, q.image,
                                   *backends_.scorer, ensemble, text_opts, &log);
    });
  };

  TraceLog visual_log, relation_log;
  auto relation_future = std::async(std::launch::async, [&] {
    return text_factor(FieldKind::ObjectRelation, relation_log);
  });
  std::optional<TextFactor> visual;
  try {
    visual = text_factor(FieldKind::VisualPattern, visual_log);
  } catch (...) {
    relation_future.wait();
    throw;
  }
  std::optional<TextFactor> relation = relation_future.get();
  answer.trace.insert(answer.trace.end(), visual_log.begin(), visual_log.end());
  answer.trace.insert(answer.trace.end(), relation_log.begin(), relation_log.end());

  auto apply = [&](FieldKind kind, const std::optional<TextFactor>& tf) {
    for (auto& f : factors) {
      if (!tf) {
        f.skip(kind);
        continue;
      }
      auto it = tf->p.find(f.candidate_id);
      if (it == tf->p.end())
        f.skip(kind);
      else
        f.set(kind, it->second);
    }
  };
  apply(FieldKind::VisualPattern, visual);
  apply(FieldKind::ObjectRelation, relation);

  const auto posteriors = fuse(factors);
  for (const auto& post : posteriors) {
    std::size_t i = 0;
    while (candidates[i].id != post.candidate_id) ++i;
    answer.ranked.push_back({candidates[i], post.log_score, factors[i]});
  }
  return answer;
}

Answer infer(const Query& q, const BackendSet& backends, const EngineConfig& config) {
  return Engine(backends, config).infer(q);
}

}  // namespace flora
