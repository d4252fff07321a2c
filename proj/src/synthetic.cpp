#include "flora/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "flora/prompting.hpp"
#include "text_util.hpp"

namespace flora::synth {

namespace {

using nlohmann::json;

constexpr std::string_view kUriScheme = "scene://";
constexpr int kImageWidth = 640;
constexpr int kImageHeight = 480;
constexpr int kMaxObjects = 10;
constexpr int kSceneAttempts = 4000;
constexpr int kPlacementAttempts = 300;
// Strict margin keeping the target the unique extremum of its term.
constexpr double kExtremalSlack = 0.98;
constexpr double kUniformReply = 0.5;

// Uniform draws from raw 64-bit output so scenes are identical across
// standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(eng_() % n); }

 private:
  std::mt19937_64 eng_;
};

enum class Layout { Horizontal, Vertical, Size, Middle };

Layout layout_of(const std::string& term) {
  if (term == "left" || term == "right" || term == "center") return Layout::Horizontal;
  if (term == "top" || term == "bottom") return Layout::Vertical;
  if (term == "middle") return Layout::Middle;
  return Layout::Size;
}

std::string location_phrase(const std::string& term) {
  if (term == "left" || term == "right") return "on the " + term;
  if (term == "top" || term == "bottom") return "at the " + term;
  if (term == "center" || term == "middle") return "in the " + term;
  if (term == "close") return "close to the camera";
  if (term == "near") return "near the camera";
  return "far away";
}

double direct_sigma(double v, SigmaKind kind) {
  switch (kind) {
    case SigmaKind::Linear: return v;
    case SigmaKind::Squared: return v * v;
    case SigmaKind::Cubic: return v * v * v;
    case SigmaKind::Exponential: return (std::exp(v) - 1.0) / (std::exp(1.0) - 1.0);
  }
  return v;
}

double direct_relevance(const std::string& term, const Box& b, SigmaKind kind) {
  const double x0 = b.min().x(), y0 = b.min().y(), x1 = b.max().x(), y1 = b.max().y();
  const double h = 0.5 * (x0 + x1);
  const double v = 0.5 * (y0 + y1);
  const double size = std::sqrt((x1 - x0) * (y1 - y0));
  auto tri = [](double c) { return std::clamp(1.0 - 2.0 * std::fabs(c - 0.5), 0.0, 1.0); };
  if (term == "left") return direct_sigma(1.0 - h, kind);
  if (term == "right") return direct_sigma(h, kind);
  if (term == "top") return direct_sigma(1.0 - v, kind);
  if (term == "bottom") return direct_sigma(v, kind);
  if (term == "center") return direct_sigma(tri(h), kind);
  if (term == "middle") return direct_sigma(tri(h), kind) * direct_sigma(tri(v), kind);
  if (term == "close" || term == "near") return direct_sigma(size, kind);
  if (term == "far") return direct_sigma(1.0 - size, kind);
  throw UsageError("unknown spatial term '" + term + "'");
}

Box centered_box(double h, double v, double w, double hgt) {
  return make_box(h - w / 2, v - hgt / 2, h + w / 2, v + hgt / 2);
}

enum class Role { Target, SameLocation, OtherLocation };

// One candidate box for `role`. Off-axis coordinates stay inside narrow bands
// so that a spatial term on another axis barely separates objects.
Box sample_box(Layout layout, const std::string& term, Role role, Rng& rng) {
  const bool target = role == Role::Target;
  switch (layout) {
    case Layout::Horizontal: {
      double w = rng.uniform(0.03, 0.06), hgt = rng.uniform(0.2, 0.6);
      double v = rng.uniform(0.45, 0.55);
      double h = !target ? rng.uniform(w / 2, 1 - w / 2)
                 : term == "left" ? rng.uniform(0.05, 0.10)
                 : term == "right" ? rng.uniform(0.90, 0.95)
                                   : rng.uniform(0.48, 0.52);
      return centered_box(h, v, w, hgt);
    }
    case Layout::Vertical: {
      double w = rng.uniform(0.2, 0.6), hgt = rng.uniform(0.03, 0.06);
      double h = rng.uniform(0.45, 0.55);
      double v = !target ? rng.uniform(hgt / 2, 1 - hgt / 2)
                 : term == "top" ? rng.uniform(0.05, 0.10)
                                 : rng.uniform(0.90, 0.95);
      return centered_box(h, v, w, hgt);
    }
    case Layout::Size: {
      double size = !target ? rng.uniform(0.04, 0.24)
                    : term == "far" ? rng.uniform(0.05, 0.06)
                                    : rng.uniform(0.20, 0.22);
      double w = rng.uniform(0.03, 0.07);
      double hgt = size * size / w;
      double v = rng.uniform(0.45, 0.55);
      double h = rng.uniform(w / 2, 1 - w / 2);
      return centered_box(h, v, w, hgt);
    }
    case Layout::Middle: {
      double size = rng.uniform(0.09, 0.11);
      double aspect = std::sqrt(rng.uniform(0.8, 1.25));
      double h = target ? rng.uniform(0.49, 0.51) : rng.uniform(0.06, 0.94);
      double v = target ? rng.uniform(0.49, 0.51) : rng.uniform(0.06, 0.94);
      return centered_box(h, v, size * aspect, size / aspect);
    }
  }
  return make_box(0.0, 0.0, 1.0, 1.0);
}

bool overlaps_any(const Box& b, const std::vector<Box>& placed) {
  return std::any_of(placed.begin(), placed.end(), [&](const Box& o) { return iou(b, o) > 0.0; });
}

std::string pick_other(const std::vector<std::string>& vocab, const std::string& not_this, Rng& rng) {
  std::vector<std::string> others;
  for (const auto& v : vocab)
    if (v != not_this) others.push_back(v);
  return others[rng.index(others.size())];
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::vector<std::string> prompt_tokens(std::string_view prompt) {
  std::string cleaned;
  for (char c : prompt) {
    auto u = static_cast<unsigned char>(c);
    cleaned.push_back(std::isalnum(u) ? static_cast<char>(std::tolower(u)) : ' ');
  }
  return text::split_words(cleaned);
}

const SceneObject* object_at(const SceneSpec& scene, const Box& box) {
  for (const auto& o : scene.objects)
    if ((o.box.min() - box.min()).cwiseAbs().maxCoeff() <= 1e-9 &&
        (o.box.max() - box.max()).cwiseAbs().maxCoeff() <= 1e-9)
      return &o;
  return nullptr;
}

bool uniform_for(const OracleOptions& options, const PromptMentions& m) {
  if (!options.uniform_factor) return false;
  switch (*options.uniform_factor) {
    case FieldKind::ObjectType: return !m.types.empty() && m.colors.empty() && m.relations.empty();
    case FieldKind::VisualPattern: return !m.colors.empty();
    case FieldKind::ObjectRelation: return !m.relations.empty();
    case FieldKind::SpatialLocation: return false;
  }
  return false;
}

// (object, confidence) pairs the oracle detector reports for a prompt, in
// descending confidence, truncated to max_candidates.
std::vector<std::pair<const SceneObject*, double>> oracle_detections(const SceneSpec& scene,
                                                                     std::string_view prompt,
                                                                     int max_candidates,
                                                                     const OracleOptions& options) {
  const auto m = mentions_in(prompt);
  const bool uniform = uniform_for(options, m);
  std::vector<std::pair<const SceneObject*, double>> out;
  for (const auto& o : scene.objects) {
    if (uniform)
      out.emplace_back(&o, kUniformReply);
    else if (object_matches(o, m))
      out.emplace_back(&o, o.confidence);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (out.size() > static_cast<std::size_t>(max_candidates))
    out.resize(static_cast<std::size_t>(max_candidates));
  return out;
}

double oracle_similarity(const SceneSpec& scene, const Box& box, std::string_view text,
                         const OracleOptions& options) {
  const auto m = mentions_in(text);
  if (uniform_for(options, m) && options.uniform_factor != FieldKind::ObjectType) return kUniformReply;
  const SceneObject* o = object_at(scene, box);
  return o && object_matches(*o, m) ? 1.0 : 0.0;
}

// ---------------------------------------------------------------------------
// Oracle backends

// The phrase quoted by a builtin instance prompt.
std::optional<std::string> phrase_in(std::string_view prompt) {
  constexpr std::string_view lead = "The description of an object in an image is '";
  if (!prompt.starts_with(lead)) return std::nullopt;
  prompt.remove_prefix(lead.size());
  auto end = prompt.rfind("'. ");
  if (end == std::string_view::npos) return std::nullopt;
  return std::string(prompt.substr(0, end));
}

std::string vocabulary_reply(const std::string& phrase, FieldKind kind) {
  const auto m = mentions_in(phrase);
  switch (kind) {
    case FieldKind::ObjectType:
      return m.types.empty() ? "# None" : "# " + capitalize(*m.types.begin());
    case FieldKind::SpatialLocation: {
      const auto tokens = prompt_tokens(phrase);
      for (const auto& term : spatial_terms())
        if (std::find(tokens.begin(), tokens.end(), term) != tokens.end()) return "#" + term;
      return "# None";
    }
    case FieldKind::VisualPattern: return m.colors.empty() ? "# None" : "#" + *m.colors.begin();
    case FieldKind::ObjectRelation: return m.relations.empty() ? "# None" : "#" + *m.relations.begin();
  }
  return "# None";
}

class OracleLlm final : public LlmBackend {
 public:
  OracleLlm(SceneSpec scene, OracleOptions options)
      : scene_(std::move(scene)), options_(std::move(options)),
        bundle_(build_prompt_bundle(scene_.phrase)) {}

  std::string complete(std::string_view, std::string_view user) override {
    for (FieldKind k : kAllFieldKinds)
      if (bundle_[k] == user) return oracle_llm_reply(scene_, k, options_);
    // Another phrase about the same scene: answer from its vocabulary words.
    if (auto phrase = phrase_in(user)) {
      const auto other = build_prompt_bundle(*phrase);
      for (FieldKind k : kAllFieldKinds)
        if (other[k] == user) return vocabulary_reply(*phrase, k);
    }
    throw BackendError(BackendError::Kind::MissingScript, "llm",
                       "oracle has no reply for this prompt", std::string(user));
  }

 private:
  SceneSpec scene_;
  OracleOptions options_;
  PromptBundle bundle_;
};

class OracleDetector final : public DetectorBackend {
 public:
  OracleDetector(SceneSpec scene, OracleOptions options)
      : scene_(std::move(scene)), options_(std::move(options)) {}

  std::vector<Candidate> detect(const ImageRef& image, std::string_view prompt,
                                int max_candidates) override {
    if (image.uri != scene_.image().uri)
      throw BackendError(BackendError::Kind::MissingScript, "detector",
                         "oracle does not know image " + image.uri, std::string(prompt));
    std::vector<Candidate> out;
    for (const auto& [o, conf] : oracle_detections(scene_, prompt, kMaxObjects, options_))
      out.push_back({o->id, o->box, conf});
    return finalize_detections(std::move(out), max_candidates, "detector");
  }

 private:
  SceneSpec scene_;
  OracleOptions options_;
};

class OracleScorer final : public RegionScorerBackend {
 public:
  OracleScorer(SceneSpec scene, OracleOptions options)
      : scene_(std::move(scene)), options_(std::move(options)) {}

  std::vector<double> score(const ImageRef& image, const Box& box,
                            std::span<const std::string> texts) override {
    if (image.uri != scene_.image().uri)
      throw BackendError(BackendError::Kind::MissingScript, "scorer",
                         "oracle does not know image " + image.uri);
    std::vector<double> out;
    for (const auto& t : texts) out.push_back(oracle_similarity(scene_, box, t, options_));
    return out;
  }

 private:
  SceneSpec scene_;
  OracleOptions options_;
};

}  // namespace

// ---------------------------------------------------------------------------

const std::vector<std::string>& object_types() {
  static const std::vector<std::string> v{"person", "car", "dog", "chair", "bus", "bottle"};
  return v;
}
const std::vector<std::string>& colors() {
  static const std::vector<std::string> v{"black", "white", "red", "blue", "green", "yellow"};
  return v;
}
const std::vector<std::string>& relations() {
  static const std::vector<std::string> v{"next to a tree", "under an umbrella", "holding a bag",
                                          "beside a fence"};
  return v;
}
const std::vector<std::string>& spatial_terms() {
  static const std::vector<std::string> v{"left",   "right",  "top",  "bottom", "center",
                                          "middle", "close",  "near", "far"};
  return v;
}

std::string_view redundancy_name(Redundancy r) {
  return r == Redundancy::Any3of4 ? "any3of4" : "minimal";
}

std::optional<Redundancy> redundancy_from_name(std::string_view name) {
  if (name == "any3of4") return Redundancy::Any3of4;
  if (name == "minimal") return Redundancy::Minimal;
  return std::nullopt;
}

const SceneObject& SceneSpec::object(int id) const {
  for (const auto& o : objects)
    if (o.id == id) return o;
  throw UsageError("scene has no object " + std::to_string(id));
}

ImageRef SceneSpec::image() const {
  return {std::string(kUriScheme) + std::to_string(seed), kImageWidth, kImageHeight};
}

double oracle_location_relevance(const std::string& term, const Box& box) {
  return direct_relevance(term, box, SigmaKind::Squared);
}

AttributeMatch compare_to_target(const SceneSpec& scene, const SceneObject& obj) {
  const auto& t = scene.target();
  const double rt = oracle_location_relevance(scene.location_term, t.box);
  const double ro = oracle_location_relevance(scene.location_term, obj.box);
  return {obj.type == t.type, ro > rt / kLocationMargin, obj.color == t.color,
          obj.relation == t.relation};
}

PromptMentions mentions_in(std::string_view prompt) {
  PromptMentions m;
  const auto tokens = prompt_tokens(prompt);
  const std::string padded = " " + text::join(tokens, " ") + " ";
  for (const auto& tok : tokens) {
    if (std::find(object_types().begin(), object_types().end(), tok) != object_types().end())
      m.types.insert(tok);
    if (std::find(colors().begin(), colors().end(), tok) != colors().end()) m.colors.insert(tok);
  }
  for (const auto& r : relations())
    if (padded.find(" " + r + " ") != std::string::npos) m.relations.insert(r);
  return m;
}

bool object_matches(const SceneObject& obj, const PromptMentions& m) {
  if (!m.any()) return false;
  auto agrees = [](const std::set<std::string>& said, const std::string& value) {
    return said.empty() || (said.size() == 1 && *said.begin() == value);
  };
  return agrees(m.types, obj.type) && agrees(m.colors, obj.color) &&
         agrees(m.relations, obj.relation);
}

std::string wrong_location_term(const SceneSpec& scene) {
  static const std::vector<std::string> vertical{"top", "bottom"};
  static const std::vector<std::string> horizontal{"left", "right", "center"};
  static const std::vector<std::string> size{"close", "near", "far"};
  const auto& pool = [&]() -> const std::vector<std::string>& {
    switch (layout_of(scene.location_term)) {
      case Layout::Horizontal:
      case Layout::Size: return vertical;
      case Layout::Vertical: return horizontal;
      case Layout::Middle: return size;
    }
    return vertical;
  }();
  return pool[scene.seed % pool.size()];
}

SceneSpec generate_scene(std::uint64_t seed, int n_objects, Redundancy redundancy) {
  return generate_scene(seed, SceneOptions{n_objects, redundancy, {}});
}

SceneSpec generate_scene(std::uint64_t seed, const SceneOptions& options) {
  if (options.n_objects < 2 || options.n_objects > kMaxObjects)
    throw UsageError("scenes need between 2 and 10 objects");
  Rng rng(seed);
  const int min_differences = options.redundancy == Redundancy::Any3of4 ? 2 : 1;

  for (int attempt = 0; attempt < kSceneAttempts; ++attempt) {
    SceneSpec scene;
    scene.seed = seed;
    scene.redundancy = options.redundancy;
    scene.mentions = options.mentions;
    scene.location_term = spatial_terms()[rng.index(spatial_terms().size())];
    const Layout layout = layout_of(scene.location_term);

    SceneObject target;
    target.type = object_types()[rng.index(object_types().size())];
    target.color = colors()[rng.index(colors().size())];
    target.relation = relations()[rng.index(relations().size())];
    target.confidence = rng.uniform(0.85, 0.95);

    Box target_box = sample_box(layout, scene.location_term, Role::Target, rng);
    if (!is_valid_box(target_box)) continue;
    target.box = target_box;
    const double target_rel = oracle_location_relevance(scene.location_term, target_box);

    std::vector<SceneObject> objects{target};
    std::vector<Box> placed{target_box};
    bool ok = true;
    for (int j = 1; j < options.n_objects && ok; ++j) {
      // Which attributes this distractor changes: type, location, color, relation.
      std::array<int, 4> dims{0, 1, 2, 3};
      for (std::size_t i = dims.size() - 1; i > 0; --i) std::swap(dims[i], dims[rng.index(i + 1)]);
      const auto count = static_cast<std::size_t>(min_differences) +
                         rng.index(static_cast<std::size_t>(5 - min_differences));
      std::array<bool, 4> differ{};
      for (std::size_t i = 0; i < count; ++i) differ[static_cast<std::size_t>(dims[i])] = true;

      SceneObject d;
      d.type = differ[0] ? pick_other(object_types(), target.type, rng) : target.type;
      d.color = differ[2] ? pick_other(colors(), target.color, rng) : target.color;
      d.relation = differ[3] ? pick_other(relations(), target.relation, rng) : target.relation;
      d.confidence = rng.uniform(0.85, 0.95);

      const Role role = differ[1] ? Role::OtherLocation : Role::SameLocation;
      ok = false;
      for (int tries = 0; tries < kPlacementAttempts; ++tries) {
        Box b = sample_box(layout, scene.location_term, role, rng);
        if (!is_valid_box(b) || overlaps_any(b, placed)) continue;
        const double rel = oracle_location_relevance(scene.location_term, b);
        const bool same = rel > target_rel / kLocationMargin && rel < kExtremalSlack * target_rel;
        const bool other = rel <= target_rel / kLocationMargin;
        if ((role == Role::SameLocation && same) || (role == Role::OtherLocation && other)) {
          d.box = b;
          placed.push_back(b);
          objects.push_back(d);
          ok = true;
          break;
        }
      }
    }
    if (!ok) continue;

    // Shuffle so the target's id carries no information.
    for (std::size_t i = objects.size() - 1; i > 0; --i) std::swap(objects[i], objects[rng.index(i + 1)]);
    for (std::size_t i = 0; i < objects.size(); ++i) {
      objects[i].id = static_cast<int>(i);
      if (objects[i].box.min() == target_box.min() && objects[i].box.max() == target_box.max())
        scene.target_id = static_cast<int>(i);
    }
    scene.objects = std::move(objects);

    std::vector<std::string> words;
    if (scene.mentions.color) words.push_back(target.color);
    words.push_back(target.type);
    if (scene.mentions.location) words.push_back(location_phrase(scene.location_term));
    if (scene.mentions.relation) words.push_back(target.relation);
    scene.phrase = text::join(words, " ");

    int exact = 0;
    bool redundant_enough = true;
    for (const auto& o : scene.objects) {
      const int diff = compare_to_target(scene, o).differences();
      if (diff == 0) ++exact;
      else if (diff < min_differences) redundant_enough = false;
    }
    if (exact == 1 && redundant_enough) return scene;
  }
  throw UsageError("could not satisfy scene constraints for seed " + std::to_string(seed));
}

// ---------------------------------------------------------------------------

std::string oracle_llm_reply(const SceneSpec& scene, FieldKind kind, const OracleOptions& options) {
  const auto& t = scene.target();
  const bool location_hidden = options.uniform_factor == FieldKind::SpatialLocation;
  std::string body;
  switch (kind) {
    case FieldKind::ObjectType: body = capitalize(t.type); break;
    case FieldKind::SpatialLocation:
      body = scene.mentions.location && !location_hidden ? scene.location_term : "None";
      break;
    case FieldKind::VisualPattern: body = scene.mentions.color ? t.color : "None"; break;
    case FieldKind::ObjectRelation: body = scene.mentions.relation ? t.relation : "None"; break;
  }
  std::string reply = "# " + body;
  if (!options.corrupted_fields.contains(kind)) return reply;

  switch (options.llm) {
    case LlmCorruption::None: break;
    case LlmCorruption::MissingHash: reply = body; break;
    case LlmCorruption::Verbose:
      reply = "#" + body + ". It is what the description points at, and it stands out in the image.";
      break;
    case LlmCorruption::WrongLocation:
      if (kind == FieldKind::SpatialLocation) reply = "#" + wrong_location_term(scene);
      break;
    case LlmCorruption::InvalidLocation:
      if (kind == FieldKind::SpatialLocation) reply = "#somewhere over there";
      break;
    case LlmCorruption::AllNone: reply = "# None"; break;
  }
  return reply;
}

BackendSet oracle_backends(const SceneSpec& scene, const OracleOptions& options) {
  return {std::make_shared<OracleLlm>(scene, options), std::make_shared<OracleDetector>(scene, options),
          std::make_shared<OracleScorer>(scene, options)};
}

std::vector<int> brute_force_answer(const SceneSpec& scene, const ParsedSemantics& parsed,
                                    const EngineConfig& config, QueryMode mode,
                                    const OracleOptions& options) {
  struct Row {
    const SceneObject* obj;
    double p_type;
    double product;
  };
  const double eps = config.epsilon;
  const bool detection = mode == QueryMode::Detection;

  std::vector<Row> rows;
  if (detection) {
    const std::string prompt = parsed.o_type.value_or(scene.phrase);
    for (const auto& [o, conf] : oracle_detections(scene, prompt, config.max_candidates, options))
      if (conf >= config.detector_threshold) rows.push_back({o, std::max(conf, eps), 0.0});
  } else {
    for (const auto& o : scene.objects) rows.push_back({&o, 1.0, 0.0});
  }
  if (rows.empty()) return {};

  std::vector<double> p_loc(rows.size(), 1.0), p_vis(rows.size(), 1.0), p_rel(rows.size(), 1.0);
  if (parsed.o_location)
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double r = 1.0;
      for (const auto& term : *parsed.o_location) r *= direct_relevance(term, rows[i].obj->box, config.sigma);
      p_loc[i] = std::max(r, eps);
    }

  auto text_factor = [&](const std::string& component, bool visual, std::vector<double>& out) {
    std::string prompt = component;
    if (parsed.o_type)
      prompt = visual ? "a " + component + " " + *parsed.o_type : "a " + *parsed.o_type + " " + component;
    std::vector<double> raw;
    for (const auto& r : rows) raw.push_back(oracle_similarity(scene, r.obj->box, prompt, options));
    const double top = *std::max_element(raw.begin(), raw.end());
    double z = 0.0;
    for (double& s : raw) z += (s = std::exp((s - top) / config.softmax_temperature));
    std::vector<std::pair<const SceneObject*, double>> dets;
    if (detection && config.ensemble_weight > 0.0)
      dets = oracle_detections(scene, prompt, config.max_candidates, options);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double det = 0.0;
      for (const auto& [o, conf] : dets)
        if (o == rows[i].obj) det = conf;
      double p = raw[i] / z;
      if (detection && config.ensemble_weight > 0.0)
        p = (1.0 - config.ensemble_weight) * p + config.ensemble_weight * det;
      out[i] = std::clamp(p, eps, 1.0);
    }
  };
  if (parsed.o_visual) text_factor(*parsed.o_visual, true, p_vis);
  if (parsed.o_relation) text_factor(*parsed.o_relation, false, p_rel);

  for (std::size_t i = 0; i < rows.size(); ++i)
    rows[i].product = rows[i].p_type * p_loc[i] * p_vis[i] * p_rel[i];
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.product != b.product) return a.product > b.product;
    if (a.p_type != b.p_type) return a.p_type > b.p_type;
    return a.obj->id < b.obj->id;
  });
  std::vector<int> ids;
  for (const auto& r : rows) ids.push_back(r.obj->id);
  return ids;
}

// ---------------------------------------------------------------------------

json to_json(const SceneSpec& scene) {
  json objects = json::array();
  for (const auto& o : scene.objects)
    objects.push_back({{"id", o.id},
                       {"type", o.type},
                       {"box", {o.box.min().x(), o.box.min().y(), o.box.max().x(), o.box.max().y()}},
                       {"color", o.color},
                       {"relation", o.relation},
                       {"confidence", o.confidence}});
  const auto img = scene.image();
  return {{"seed", scene.seed},
          {"image", {{"uri", img.uri}, {"width", img.width_px}, {"height", img.height_px}}},
          {"redundancy", redundancy_name(scene.redundancy)},
          {"location_term", scene.location_term},
          {"mentions",
           {{"location", scene.mentions.location},
            {"color", scene.mentions.color},
            {"relation", scene.mentions.relation}}},
          {"phrase", scene.phrase},
          {"target_id", scene.target_id},
          {"objects", std::move(objects)}};
}

SceneSpec scene_from_json(const json& j) {
  SceneSpec s;
  try {
    s.seed = j.at("seed").get<std::uint64_t>();
    auto red = redundancy_from_name(j.value("redundancy", "any3of4"));
    if (!red) throw UsageError("unknown redundancy in scene file");
    s.redundancy = *red;
    s.location_term = j.at("location_term").get<std::string>();
    if (j.contains("mentions")) {
      const auto& m = j.at("mentions");
      s.mentions = {m.value("location", true), m.value("color", true), m.value("relation", true)};
    }
    s.phrase = j.at("phrase").get<std::string>();
    s.target_id = j.at("target_id").get<int>();
    for (const auto& o : j.at("objects")) {
      auto b = o.at("box").get<std::vector<double>>();
      if (b.size() != 4) throw UsageError("scene box needs 4 coordinates");
      s.objects.push_back({o.at("id").get<int>(), o.at("type").get<std::string>(),
                           make_box(b[0], b[1], b[2], b[3]), o.at("color").get<std::string>(),
                           o.at("relation").get<std::string>(), o.at("confidence").get<double>()});
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("malformed scene: ") + e.what());
  }
  for (const auto& o : s.objects)
    if (!is_valid_box(o.box)) throw UsageError("scene object box outside the unit square");
  s.target();  // validates target_id
  return s;
}

Query make_query(const SceneSpec& scene, QueryMode mode) {
  Query q{scene.image(), scene.phrase, mode, {}};
  if (mode == QueryMode::Association)
    for (const auto& o : scene.objects) q.given_candidates.push_back({o.id, o.box, o.confidence});
  return q;
}

MockScript record_oracle_script(const std::vector<SceneSpec>& scenes, const EngineConfig& config,
                                QueryMode mode, const OracleOptions& options) {
  MockScript script;
  for (const auto& scene : scenes) {
    Recorder recorder(oracle_backends(scene, options));
    Engine(recorder.backends(), config).infer(make_query(scene, mode));
    script.merge(recorder.script());
  }
  return script;
}

}  // namespace flora::synth
