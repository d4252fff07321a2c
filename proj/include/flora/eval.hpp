#pragma once

// Evaluation records, the detection precision metrics and association
// accuracy, and a batch runner over the pipeline.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "flora/pipeline.hpp"

namespace flora {

// One line of the evaluation JSONL:
//   {"record_id": "...", "image": {"uri": "...", "width": W, "height": H},
//    "phrase": "...", "gt_box": [x0, y0, x1, y1]}
// or, for association records,
//   {..., "gt_candidate_id": 3, "candidates": [{"id": 3, "box": [...], "confidence": c}, ...]}
struct EvalRecord {
  std::string record_id;
  ImageRef image;
  std::string phrase;
  std::optional<Box> gt_box;
  std::optional<int> gt_candidate_id;
  std::vector<Candidate> candidates;

  QueryMode mode() const { return gt_box ? QueryMode::Detection : QueryMode::Association; }
  Query query() const;
};

EvalRecord record_from_json(const nlohmann::json& j);  // throws UsageError
nlohmann::json to_json(const EvalRecord& r);

std::vector<EvalRecord> read_records(std::istream& in);
std::vector<EvalRecord> load_records(const std::filesystem::path& path);
void write_records(std::ostream& out, std::span<const EvalRecord> records);

// Fraction of records where any of the first k boxes has IoU strictly above
// threshold with the record's gt box. answers[i] is the ranked box list for
// records[i]; an empty list is a miss.
double precision_at_k(std::span<const std::vector<Box>> answers, std::span<const Box> gt_boxes,
                      int k, double threshold = 0.5);

struct RecordResult {
  std::string record_id;
  QueryMode mode = QueryMode::Detection;
  std::vector<Box> ranked_boxes;  // detection: top boxes in rank order
  std::optional<int> chosen_id;   // association: rank-1 candidate
  double best_iou = 0.0;          // over the top 10
  bool hit_at_1 = false;
  std::string error;              // non-empty when the record failed
};

struct Metrics {
  std::size_t n = 0;
  std::map<int, double> p_at;  // keys 1, 5, 10; empty without detection records
  std::optional<double> assoc_accuracy;
  std::vector<RecordResult> per_record;  // in dataset order
};

inline constexpr std::array<int, 3> kPrecisionRanks = {1, 5, 10};

// Aggregates per-record results; independent of record order.
Metrics aggregate(std::span<const EvalRecord> records, std::vector<RecordResult> results);

struct EvalOptions {
  int parallelism = 1;
  bool strict = false;  // rethrow the first record failure instead of counting a miss
};

Metrics run_eval(std::span<const EvalRecord> records, const Engine& engine,
                 const EvalOptions& options = {});

nlohmann::json summary_json(const Metrics& m);
nlohmann::json to_json(const RecordResult& r);

// Writes summary.json and records.jsonl into dir (created if missing).
void write_report(const Metrics& m, const std::filesystem::path& dir);

}  // namespace flora
