#pragma once

#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "flora/types.hpp"

namespace flora {

// Any failure reported by (or while talking to) a model backend.
class BackendError : public std::runtime_error {
 public:
  enum class Kind { Transport, Protocol, MissingScript };

  BackendError(Kind kind, std::string stage, const std::string& message, std::string request = {})
      : std::runtime_error(stage + ": " + message),
        kind_(kind),
        stage_(std::move(stage)),
        message_(message),
        request_(std::move(request)) {}

  Kind kind() const { return kind_; }
  const std::string& stage() const { return stage_; }
  const std::string& message() const { return message_; }
  // The prompt (or request body) that triggered the failure, for diagnostics.
  const std::string& request() const { return request_; }

 private:
  Kind kind_;
  std::string stage_;
  std::string message_;
  std::string request_;
};

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual std::string complete(std::string_view system, std::string_view user) = 0;
  // True when the handle cannot take concurrent calls.
  virtual bool single_flight() const { return false; }
};

class DetectorBackend {
 public:
  virtual ~DetectorBackend() = default;
  // Sorted by descending confidence, at most max_candidates, ids unique.
  virtual std::vector<Candidate> detect(const ImageRef& image, std::string_view prompt,
                                        int max_candidates) = 0;
  virtual bool single_flight() const { return false; }
};

class RegionScorerBackend {
 public:
  virtual ~RegionScorerBackend() = default;
  // One raw similarity per text; higher is more compatible.
  virtual std::vector<double> score(const ImageRef& image, const Box& box,
                                    std::span<const std::string> texts) = 0;
  virtual bool single_flight() const { return false; }

  double score_region(const ImageRef& image, const Box& box, const std::string& prompt);
};

struct BackendSet {
  std::shared_ptr<LlmBackend> llm;
  std::shared_ptr<DetectorBackend> detector;  // may be null for association-only runs
  std::shared_ptr<RegionScorerBackend> scorer;
};

// Wraps every single-flight handle so calls through it are serialized.
BackendSet serialize_single_flight(BackendSet set);

// Shared reply checks applied at the client boundary.
// Sorts by confidence (stable), truncates, and reassigns ids when duplicated.
// Throws BackendError(Protocol) for boxes violating the normalized-box contract.
std::vector<Candidate> finalize_detections(std::vector<Candidate> detections, int max_candidates,
                                           const std::string& stage);

// Clamps to [0,1], warning on stderr when a value had to move.
double clamp_confidence(double score, const std::string& stage);

}  // namespace flora
