#include "flora/scripted_backends.hpp"

#include <cmath>
#include <fstream>

namespace flora {

namespace {

using nlohmann::json;

constexpr double kBoxTolerance = 1e-9;

bool same_box(const Box& a, const Box& b) {
  return (a.min() - b.min()).cwiseAbs().maxCoeff() <= kBoxTolerance &&
         (a.max() - b.max()).cwiseAbs().maxCoeff() <= kBoxTolerance;
}

json box_json(const Box& b) { return {b.min().x(), b.min().y(), b.max().x(), b.max().y()}; }

Box box_from_json(const json& j) {
  auto v = j.get<std::vector<double>>();
  if (v.size() != 4) throw UsageError("mock script box needs 4 coordinates");
  return make_box(v[0], v[1], v[2], v[3]);
}

std::string describe_box(const Box& b) { return box_json(b).dump(); }

}  // namespace

void MockScript::set_llm(const std::string& prompt, const std::string& reply) { llm_[prompt] = reply; }

void MockScript::set_detections(const std::string& uri, const std::string& prompt,
                                std::vector<Detection> d) {
  detector_[uri][prompt] = std::move(d);
}

MockScript::RegionScores* MockScript::find_region(const std::string& uri, const Box& box) {
  auto it = scorer_.find(uri);
  if (it == scorer_.end()) return nullptr;
  for (auto& r : it->second)
    if (same_box(r.box, box)) return &r;
  return nullptr;
}

const MockScript::RegionScores* MockScript::find_region(const std::string& uri,
                                                        const Box& box) const {
  return const_cast<MockScript*>(this)->find_region(uri, box);
}

void MockScript::set_score(const std::string& uri, const Box& box, const std::string& text,
                           double score) {
  auto* region = find_region(uri, box);
  if (!region) {
    scorer_[uri].push_back({box, {}});
    region = &scorer_[uri].back();
  }
  region->scores[text] = score;
}

void MockScript::merge(const MockScript& other) {
  for (const auto& [p, r] : other.llm_) llm_[p] = r;
  for (const auto& [uri, prompts] : other.detector_)
    for (const auto& [p, d] : prompts) detector_[uri][p] = d;
  for (const auto& [uri, regions] : other.scorer_)
    for (const auto& r : regions)
      for (const auto& [t, s] : r.scores) set_score(uri, r.box, t, s);
}

const std::string* MockScript::llm_reply(const std::string& prompt) const {
  auto it = llm_.find(prompt);
  return it == llm_.end() ? nullptr : &it->second;
}

const std::vector<MockScript::Detection>* MockScript::detections(const std::string& uri,
                                                                 const std::string& prompt) const {
  auto it = detector_.find(uri);
  if (it == detector_.end()) return nullptr;
  auto jt = it->second.find(prompt);
  return jt == it->second.end() ? nullptr : &jt->second;
}

const double* MockScript::score(const std::string& uri, const Box& box,
                                const std::string& text) const {
  const auto* region = find_region(uri, box);
  if (!region) return nullptr;
  auto it = region->scores.find(text);
  return it == region->scores.end() ? nullptr : &it->second;
}

json MockScript::to_json() const {
  json j = {{"llm", json::object()}, {"detector", json::object()}, {"scorer", json::object()}};
  for (const auto& [p, r] : llm_) j["llm"][p] = r;
  for (const auto& [uri, prompts] : detector_)
    for (const auto& [p, dets] : prompts) {
      json arr = json::array();
      for (const auto& d : dets) arr.push_back({{"id", d.id}, {"box", box_json(d.box)}, {"score", d.score}});
      j["detector"][uri][p] = std::move(arr);
    }
  for (const auto& [uri, regions] : scorer_) {
    json arr = json::array();
    for (const auto& r : regions) arr.push_back({{"box", box_json(r.box)}, {"scores", r.scores}});
    j["scorer"][uri] = std::move(arr);
  }
  return j;
}

MockScript MockScript::from_json(const json& j) {
  MockScript s;
  try {
    if (j.contains("llm"))
      for (const auto& [p, r] : j.at("llm").items()) s.llm_[p] = r.get<std::string>();
    if (j.contains("detector"))
      for (const auto& [uri, prompts] : j.at("detector").items())
        for (const auto& [p, dets] : prompts.items()) {
          std::vector<Detection> list;
          int next_id = 0;
          for (const auto& d : dets) {
            int id = d.contains("id") ? d.at("id").get<int>() : next_id;
            next_id = id + 1;
            list.push_back({id, box_from_json(d.at("box")), d.at("score").get<double>()});
          }
          s.detector_[uri][p] = std::move(list);
        }
    if (j.contains("scorer"))
      for (const auto& [uri, regions] : j.at("scorer").items())
        for (const auto& r : regions) {
          auto box = box_from_json(r.at("box"));
          for (const auto& [t, v] : r.at("scores").items()) s.set_score(uri, box, t, v.get<double>());
        }
  } catch (const json::exception& e) {
    throw UsageError(std::string("malformed mock script: ") + e.what());
  }
  return s;
}

MockScript MockScript::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read mock script " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw UsageError("mock script " + path.string() + " is not JSON: " + e.what());
  }
}

void MockScript::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json().dump(1) << '\n';
}

// ---------------------------------------------------------------------------

namespace {

class ScriptedLlm final : public LlmBackend {
 public:
  explicit ScriptedLlm(std::shared_ptr<const MockScript> s) : script_(std::move(s)) {}
  std::string complete(std::string_view, std::string_view user) override {
    const auto* reply = script_->llm_reply(std::string(user));
    if (!reply)
      throw BackendError(BackendError::Kind::MissingScript, "llm", "no scripted reply for prompt",
                         std::string(user));
    return *reply;
  }

 private:
  std::shared_ptr<const MockScript> script_;
};

class ScriptedDetector final : public DetectorBackend {
 public:
  explicit ScriptedDetector(std::shared_ptr<const MockScript> s) : script_(std::move(s)) {}
  std::vector<Candidate> detect(const ImageRef& image, std::string_view prompt,
                                int max_candidates) override {
    const auto* dets = script_->detections(image.uri, std::string(prompt));
    if (!dets)
      throw BackendError(BackendError::Kind::MissingScript, "detector",
                         "no scripted detections for " + image.uri, std::string(prompt));
    std::vector<Candidate> out;
    for (const auto& d : *dets) out.push_back({d.id, d.box, d.score});
    return finalize_detections(std::move(out), max_candidates, "detector");
  }

 private:
  std::shared_ptr<const MockScript> script_;
};

class ScriptedScorer final : public RegionScorerBackend {
 public:
  explicit ScriptedScorer(std::shared_ptr<const MockScript> s) : script_(std::move(s)) {}
  std::vector<double> score(const ImageRef& image, const Box& box,
                            std::span<const std::string> texts) override {
    std::vector<double> out;
    for (const auto& t : texts) {
      const double* s = script_->score(image.uri, box, t);
      if (!s)
        throw BackendError(BackendError::Kind::MissingScript, "scorer",
                           "no scripted score for box " + describe_box(box) + " in " + image.uri, t);
      out.push_back(*s);
    }
    return out;
  }

 private:
  std::shared_ptr<const MockScript> script_;
};

}  // namespace

BackendSet make_scripted_backends(std::shared_ptr<const MockScript> script) {
  return {std::make_shared<ScriptedLlm>(script), std::make_shared<ScriptedDetector>(script),
          std::make_shared<ScriptedScorer>(script)};
}

// ---------------------------------------------------------------------------

namespace {

template <typename State>
class RecordingLlm final : public LlmBackend {
 public:
  RecordingLlm(std::shared_ptr<LlmBackend> inner, std::shared_ptr<State> st)
      : inner_(std::move(inner)), state_(std::move(st)) {}
  std::string complete(std::string_view system, std::string_view user) override {
    auto reply = inner_->complete(system, user);
    std::lock_guard lock(state_->mu);
    state_->script.set_llm(std::string(user), reply);
    return reply;
  }
  bool single_flight() const override { return inner_->single_flight(); }

 private:
  std::shared_ptr<LlmBackend> inner_;
  std::shared_ptr<State> state_;
};

template <typename State>
class RecordingDetector final : public DetectorBackend {
 public:
  RecordingDetector(std::shared_ptr<DetectorBackend> inner, std::shared_ptr<State> st)
      : inner_(std::move(inner)), state_(std::move(st)) {}
  std::vector<Candidate> detect(const ImageRef& image, std::string_view prompt,
                                int max_candidates) override {
    auto out = inner_->detect(image, prompt, max_candidates);
    std::vector<MockScript::Detection> dets;
    for (const auto& c : out) dets.push_back({c.id, c.box, c.detector_confidence});
    std::lock_guard lock(state_->mu);
    state_->script.set_detections(image.uri, std::string(prompt), std::move(dets));
    return out;
  }
  bool single_flight() const override { return inner_->single_flight(); }

 private:
  std::shared_ptr<DetectorBackend> inner_;
  std::shared_ptr<State> state_;
};

template <typename State>
class RecordingScorer final : public RegionScorerBackend {
 public:
  RecordingScorer(std::shared_ptr<RegionScorerBackend> inner, std::shared_ptr<State> st)
      : inner_(std::move(inner)), state_(std::move(st)) {}
  std::vector<double> score(const ImageRef& image, const Box& box,
                            std::span<const std::string> texts) override {
    auto out = inner_->score(image, box, texts);
    std::lock_guard lock(state_->mu);
    for (std::size_t i = 0; i < texts.size() && i < out.size(); ++i)
      state_->script.set_score(image.uri, box, texts[i], out[i]);
    return out;
  }
  bool single_flight() const override { return inner_->single_flight(); }

 private:
  std::shared_ptr<RegionScorerBackend> inner_;
  std::shared_ptr<State> state_;
};

}  // namespace

Recorder::Recorder(BackendSet inner) : state_(std::make_shared<State>()) {
  if (inner.llm) wrapped_.llm = std::make_shared<RecordingLlm<State>>(inner.llm, state_);
  if (inner.detector)
    wrapped_.detector = std::make_shared<RecordingDetector<State>>(inner.detector, state_);
  if (inner.scorer) wrapped_.scorer = std::make_shared<RecordingScorer<State>>(inner.scorer, state_);
}

MockScript Recorder::script() const {
  std::lock_guard lock(state_->mu);
  return state_->script;
}

}  // namespace flora
