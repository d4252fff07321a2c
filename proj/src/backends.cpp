#include "flora/backends.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>

namespace flora {

double RegionScorerBackend::score_region(const ImageRef& image, const Box& box,
                                         const std::string& prompt) {
  std::vector<std::string> texts{prompt};
  auto scores = score(image, box, texts);
  if (scores.size() != 1)
    throw BackendError(BackendError::Kind::Protocol, "scorer",
                       "expected 1 score, got " + std::to_string(scores.size()), prompt);
  return scores.front();
}

namespace {

class SerializedLlm final : public LlmBackend {
 public:
  explicit SerializedLlm(std::shared_ptr<LlmBackend> inner) : inner_(std::move(inner)) {}
  std::string complete(std::string_view system, std::string_view user) override {
    std::lock_guard lock(mu_);
    return inner_->complete(system, user);
  }

 private:
  std::shared_ptr<LlmBackend> inner_;
  std::mutex mu_;
};

class SerializedDetector final : public DetectorBackend {
 public:
  explicit SerializedDetector(std::shared_ptr<DetectorBackend> inner) : inner_(std::move(inner)) {}
  std::vector<Candidate> detect(const ImageRef& image, std::string_view prompt,
                                int max_candidates) override {
    std::lock_guard lock(mu_);
    return inner_->detect(image, prompt, max_candidates);
  }

 private:
  std::shared_ptr<DetectorBackend> inner_;
  std::mutex mu_;
};

class SerializedScorer final : public RegionScorerBackend {
 public:
  explicit SerializedScorer(std::shared_ptr<RegionScorerBackend> inner) : inner_(std::move(inner)) {}
  std::vector<double> score(const ImageRef& image, const Box& box,
                            std::span<const std::string> texts) override {
    std::lock_guard lock(mu_);
    return inner_->score(image, box, texts);
  }

 private:
  std::shared_ptr<RegionScorerBackend> inner_;
  std::mutex mu_;
};

}  // namespace

BackendSet serialize_single_flight(BackendSet set) {
  if (set.llm && set.llm->single_flight()) set.llm = std::make_shared<SerializedLlm>(set.llm);
  if (set.detector && set.detector->single_flight())
    set.detector = std::make_shared<SerializedDetector>(set.detector);
  if (set.scorer && set.scorer->single_flight())
    set.scorer = std::make_shared<SerializedScorer>(set.scorer);
  return set;
}

double clamp_confidence(double score, const std::string& stage) {
  if (!std::isfinite(score))
    throw BackendError(BackendError::Kind::Protocol, stage, "non-finite detection score");
  if (score < 0.0 || score > 1.0) {
    std::clog << "warning: " << stage << ": detection score " << score
              << " outside [0,1], clamped\n";
    return std::clamp(score, 0.0, 1.0);
  }
  return score;
}

std::vector<Candidate> finalize_detections(std::vector<Candidate> detections, int max_candidates,
                                           const std::string& stage) {
  if (max_candidates < 1) throw UsageError("max_candidates must be >= 1");
  for (auto& d : detections) {
    if (!is_valid_box(d.box))
      throw BackendError(BackendError::Kind::Protocol, stage,
                         "malformed box in reply (need 0 <= min < max <= 1)");
    d.detector_confidence = clamp_confidence(d.detector_confidence, stage);
  }
  std::stable_sort(detections.begin(), detections.end(), [](const auto& a, const auto& b) {
    return a.detector_confidence > b.detector_confidence;
  });
  if (detections.size() > static_cast<std::size_t>(max_candidates))
    detections.resize(static_cast<std::size_t>(max_candidates));

  std::set<int> seen;
  bool unique = true;
  for (const auto& d : detections) unique = seen.insert(d.id).second && unique;
  if (!unique)
    for (std::size_t i = 0; i < detections.size(); ++i) detections[i].id = static_cast<int>(i);
  return detections;
}

}  // namespace flora
