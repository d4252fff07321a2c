#pragma once

// Abstract synthetic scenes with known ground truth, and exact oracle
// backends derived from them. No pixels are involved: an ImageRef whose uri
// is "scene://<seed>" stands for the scene.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "flora/backends.hpp"
#include "flora/grammar.hpp"
#include "flora/pipeline.hpp"
#include "flora/scripted_backends.hpp"

namespace flora::synth {

const std::vector<std::string>& object_types();
const std::vector<std::string>& colors();
const std::vector<std::string>& relations();
const std::vector<std::string>& spatial_terms();

enum class Redundancy {
  Any3of4,  // every distractor differs from the target in >= 2 attributes
  Minimal,  // every distractor differs in >= 1 attribute
};

std::string_view redundancy_name(Redundancy r);
std::optional<Redundancy> redundancy_from_name(std::string_view name);

struct SceneObject {
  int id = 0;
  std::string type;
  Box box;
  std::string color;
  std::string relation;
  double confidence = 0.0;
};

struct Mentions {
  bool location = true;
  bool color = true;
  bool relation = true;
};

struct SceneSpec {
  std::uint64_t seed = 0;
  std::vector<SceneObject> objects;
  int target_id = 0;
  std::string phrase;
  std::string location_term;  // canonical term describing the target
  Mentions mentions;
  Redundancy redundancy = Redundancy::Any3of4;

  const SceneObject& object(int id) const;
  const SceneObject& target() const { return object(target_id); }
  ImageRef image() const;
};

struct SceneOptions {
  int n_objects = 3;
  Redundancy redundancy = Redundancy::Any3of4;
  Mentions mentions;
};

// Object count used when none is requested: cycles through 2..10 with the seed.
inline int default_object_count(std::uint64_t seed) { return 2 + static_cast<int>(seed % 9); }

// Deterministic in (seed, options). Throws UsageError for n outside 2..10.
SceneSpec generate_scene(std::uint64_t seed, const SceneOptions& options);
SceneSpec generate_scene(std::uint64_t seed, int n_objects, Redundancy redundancy);

// Relative margin separating "same location" from "different location":
// a distractor shares the target's location iff its relevance (squared sigma)
// exceeds the target's divided by this factor.
inline constexpr double kLocationMargin = 1.5;

// Location relevance of a box for a term under squared sigma, computed
// directly from the box (independent of the interpreter code).
double oracle_location_relevance(const std::string& term, const Box& box);

// Attribute-by-attribute agreement with the target; location agreement uses
// kLocationMargin.
struct AttributeMatch {
  bool type, location, color, relation;
  int differences() const { return !type + !location + !color + !relation; }
};
AttributeMatch compare_to_target(const SceneSpec& scene, const SceneObject& obj);

// Prompt semantics shared by the oracle detector and scorer: an object
// matches when every type/color/relation word the prompt mentions is the
// object's own value, and at least one such word is mentioned.
struct PromptMentions {
  std::set<std::string> types, colors, relations;
  bool any() const { return !types.empty() || !colors.empty() || !relations.empty(); }
};
PromptMentions mentions_in(std::string_view prompt);
bool object_matches(const SceneObject& obj, const PromptMentions& m);

// A valid spatial term on an axis the scene keeps nearly constant, used to
// simulate a hallucinated location.
std::string wrong_location_term(const SceneSpec& scene);

enum class LlmCorruption { None, MissingHash, Verbose, WrongLocation, InvalidLocation, AllNone };

struct OracleOptions {
  LlmCorruption llm = LlmCorruption::None;
  std::set<FieldKind> corrupted_fields;  // fields the LLM corruption applies to
  // Replace one factor's evidence with a uniform reply.
  std::optional<FieldKind> uniform_factor;
};

// LLM replies follow the phrase template; the detector returns the objects a
// prompt matches with their scene confidences; the scorer returns 1.0 for a
// matching boxed object and 0.0 otherwise.
BackendSet oracle_backends(const SceneSpec& scene, const OracleOptions& options = {});

// The raw reply the oracle LLM gives for one field.
std::string oracle_llm_reply(const SceneSpec& scene, FieldKind kind, const OracleOptions& options = {});

// Ranking recomputed by direct formula evaluation and plain products,
// mirroring what the pipeline should produce on the oracle backends.
std::vector<int> brute_force_answer(const SceneSpec& scene, const ParsedSemantics& parsed,
                                    const EngineConfig& config,
                                    QueryMode mode = QueryMode::Detection,
                                    const OracleOptions& options = {});

nlohmann::json to_json(const SceneSpec& scene);
SceneSpec scene_from_json(const nlohmann::json& j);

// The query a scene poses: its phrase on its image, with every object given
// as a candidate in association mode.
Query make_query(const SceneSpec& scene, QueryMode mode = QueryMode::Detection);

// Runs each scene through the pipeline on oracle backends and captures all
// backend traffic as a replayable script.
MockScript record_oracle_script(const std::vector<SceneSpec>& scenes, const EngineConfig& config,
                                QueryMode mode = QueryMode::Detection,
                                const OracleOptions& options = {});

}  // namespace flora::synth
