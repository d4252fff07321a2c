#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "flora/backends.hpp"

namespace flora {

// Deterministic replay data for all three backends.
//
// JSON layout:
//   {
//     "llm":      { "<exact user prompt>": "<reply>", ... },
//     "detector": { "<image uri>": { "<prompt>": [ {"id": 0, "box": [x0,y0,x1,y1], "score": s}, ... ] } },
//     "scorer":   { "<image uri>": [ {"box": [x0,y0,x1,y1], "scores": { "<text>": s, ... } }, ... ] }
//   }
class MockScript {
 public:
  struct Detection {
    int id;
    Box box;
    double score;
  };
  struct RegionScores {
    Box box;
    std::map<std::string, double> scores;
  };

  static MockScript from_json(const nlohmann::json& j);
  static MockScript load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  void save(const std::filesystem::path& path) const;

  void set_llm(const std::string& prompt, const std::string& reply);
  void set_detections(const std::string& uri, const std::string& prompt, std::vector<Detection> d);
  void set_score(const std::string& uri, const Box& box, const std::string& text, double score);
  // Folds another script in; later entries win.
  void merge(const MockScript& other);

  const std::string* llm_reply(const std::string& prompt) const;
  const std::vector<Detection>* detections(const std::string& uri, const std::string& prompt) const;
  const double* score(const std::string& uri, const Box& box, const std::string& text) const;

  bool empty() const { return llm_.empty() && detector_.empty() && scorer_.empty(); }

 private:
  RegionScores* find_region(const std::string& uri, const Box& box);
  const RegionScores* find_region(const std::string& uri, const Box& box) const;

  std::map<std::string, std::string> llm_;
  std::map<std::string, std::map<std::string, std::vector<Detection>>> detector_;
  std::map<std::string, std::vector<RegionScores>> scorer_;
};

// Backends answering from a script; unknown requests raise MissingScript errors.
BackendSet make_scripted_backends(std::shared_ptr<const MockScript> script);

// Wraps live backends and records every successful call into a script.
class Recorder {
 public:
  explicit Recorder(BackendSet inner);

  const BackendSet& backends() const { return wrapped_; }
  MockScript script() const;

 private:
  struct State {
    std::mutex mu;
    MockScript script;
  };
  std::shared_ptr<State> state_;
  BackendSet wrapped_;
};

}  // namespace flora
