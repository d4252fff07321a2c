#include "flora/eval.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "flora/json_io.hpp"

namespace flora {

using nlohmann::json;

namespace {

constexpr double kHitThreshold = 0.5;
constexpr int kBestIouDepth = 10;

bool hit_within(const std::vector<Box>& ranked, const Box& gt, int k, double threshold) {
  const auto n = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(std::max(k, 0)));
  for (std::size_t i = 0; i < n; ++i)
    if (iou(ranked[i], gt) > threshold) return true;
  return false;
}

RecordResult evaluate_one(const EvalRecord& r, const Engine& engine) {
  RecordResult out;
  out.record_id = r.record_id;
  out.mode = r.mode();
  const Answer a = engine.infer(r.query());
  if (out.mode == QueryMode::Detection) {
    for (const auto& rc : a.ranked) out.ranked_boxes.push_back(rc.candidate.box);
    const auto depth = std::min<std::size_t>(out.ranked_boxes.size(), kBestIouDepth);
    for (std::size_t i = 0; i < depth; ++i)
      out.best_iou = std::max(out.best_iou, iou(out.ranked_boxes[i], *r.gt_box));
    out.hit_at_1 = hit_within(out.ranked_boxes, *r.gt_box, 1, kHitThreshold);
  } else {
    if (const auto* best = a.best()) out.chosen_id = best->candidate.id;
    out.hit_at_1 = out.chosen_id == r.gt_candidate_id;
  }
  return out;
}

}  // namespace

Query EvalRecord::query() const {
  Query q{image, phrase, mode(), {}};
  if (q.mode == QueryMode::Association) q.given_candidates = candidates;
  return q;
}

EvalRecord record_from_json(const json& j) {
  if (!j.is_object()) throw UsageError("an evaluation record must be a JSON object");
  EvalRecord r;
  try {
    r.record_id = j.at("record_id").is_string() ? j.at("record_id").get<std::string>()
                                                : j.at("record_id").dump();
    const auto& img = j.at("image");
    r.image = {img.at("uri").get<std::string>(), img.value("width", 1), img.value("height", 1)};
    r.phrase = j.at("phrase").get<std::string>();
    if (j.contains("gt_box")) r.gt_box = box_from_json(j.at("gt_box"));
    if (j.contains("gt_candidate_id")) r.gt_candidate_id = j.at("gt_candidate_id").get<int>();
    if (j.contains("candidates"))
      for (const auto& c : j.at("candidates")) r.candidates.push_back(candidate_from_json(c));
  } catch (const json::exception& e) {
    throw UsageError(std::string("malformed evaluation record: ") + e.what());
  }
  if (r.gt_box.has_value() == r.gt_candidate_id.has_value())
    throw UsageError("record " + r.record_id + " needs exactly one of gt_box and gt_candidate_id");
  if (r.gt_candidate_id) {
    if (r.candidates.empty())
      throw UsageError("association record " + r.record_id + " lists no candidates");
    if (std::none_of(r.candidates.begin(), r.candidates.end(),
                     [&](const Candidate& c) { return c.id == *r.gt_candidate_id; }))
      throw UsageError("record " + r.record_id + ": gt_candidate_id is not among the candidates");
  } else if (!r.candidates.empty()) {
    throw UsageError("detection record " + r.record_id + " must not list candidates");
  }
  return r;
}

json to_json(const EvalRecord& r) {
  json j{{"record_id", r.record_id},
         {"image", {{"uri", r.image.uri}, {"width", r.image.width_px}, {"height", r.image.height_px}}},
         {"phrase", r.phrase}};
  if (r.gt_box) j["gt_box"] = box_to_json(*r.gt_box);
  if (r.gt_candidate_id) {
    j["gt_candidate_id"] = *r.gt_candidate_id;
    json cs = json::array();
    for (const auto& c : r.candidates) cs.push_back(to_json(c));
    j["candidates"] = std::move(cs);
  }
  return j;
}

std::vector<EvalRecord> read_records(std::istream& in) {
  std::vector<EvalRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw UsageError("line " + std::to_string(lineno) + " is not valid JSON");
    out.push_back(record_from_json(j));
  }
  return out;
}

std::vector<EvalRecord> load_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_records(in);
}

void write_records(std::ostream& out, std::span<const EvalRecord> records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

double precision_at_k(std::span<const std::vector<Box>> answers, std::span<const Box> gt_boxes,
                      int k, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw UsageError("IoU threshold must lie in (0,1)");
  if (k < 1) throw UsageError("precision rank k must be >= 1");
  if (answers.size() != gt_boxes.size()) throw UsageError("one answer list per record is required");
  if (gt_boxes.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gt_boxes.size(); ++i)
    hits += hit_within(answers[i], gt_boxes[i], k, threshold);
  return static_cast<double>(hits) / static_cast<double>(gt_boxes.size());
}

Metrics aggregate(std::span<const EvalRecord> records, std::vector<RecordResult> results) {
  if (records.size() != results.size()) throw UsageError("one result per record is required");
  Metrics m;
  m.n = records.size();
  std::vector<std::vector<Box>> answers;
  std::vector<Box> gts;
  std::size_t assoc_n = 0, assoc_hits = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].mode() == QueryMode::Detection) {
      answers.push_back(results[i].ranked_boxes);
      gts.push_back(*records[i].gt_box);
    } else {
      ++assoc_n;
      assoc_hits += results[i].hit_at_1;
    }
  }
  if (!gts.empty())
    for (int k : kPrecisionRanks) m.p_at[k] = precision_at_k(answers, gts, k, kHitThreshold);
  if (assoc_n > 0) m.assoc_accuracy = static_cast<double>(assoc_hits) / static_cast<double>(assoc_n);
  m.per_record = std::move(results);
  return m;
}

Metrics run_eval(std::span<const EvalRecord> records, const Engine& engine,
                 const EvalOptions& options) {
  if (records.empty()) throw UsageError("the evaluation dataset is empty");
  if (options.parallelism < 1) throw UsageError("eval.parallelism must be >= 1");

  std::vector<RecordResult> results(records.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr first_error;
  std::mutex error_mu;

  auto worker = [&] {
    while (!abort) {
      const std::size_t i = next++;
      if (i >= records.size()) return;
      try {
        results[i] = evaluate_one(records[i], engine);
      } catch (const std::exception& e) {
        if (options.strict) {
          std::lock_guard lock(error_mu);
          if (!first_error) first_error = std::current_exception();
          abort = true;
          return;
        }
        results[i] = RecordResult{records[i].record_id, records[i].mode(), {}, {}, 0.0, false, e.what()};
      }
    }
  };

  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(options.parallelism), records.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);
  return aggregate(records, std::move(results));
}

json summary_json(const Metrics& m) {
  auto p = [&](int k) -> json {
    auto it = m.p_at.find(k);
    return it == m.p_at.end() ? json(nullptr) : json(it->second);
  };
  return {{"n", m.n},
          {"p_at_1", p(1)},
          {"p_at_5", p(5)},
          {"p_at_10", p(10)},
          {"assoc_accuracy", m.assoc_accuracy ? json(*m.assoc_accuracy) : json(nullptr)}};
}

json to_json(const RecordResult& r) {
  json j{{"record_id", r.record_id},
         {"mode", r.mode == QueryMode::Detection ? "detection" : "association"},
         {"best_iou", r.best_iou},
         {"hit_at_1", r.hit_at_1},
         {"error", r.error.empty() ? json(nullptr) : json(r.error)}};
  if (r.mode == QueryMode::Association)
    j["chosen_id"] = r.chosen_id ? json(*r.chosen_id) : json(nullptr);
  return j;
}

void write_report(const Metrics& m, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream summary(dir / "summary.json");
  std::ofstream records(dir / "records.jsonl");
  if (!summary || !records) throw std::runtime_error("cannot write report into " + dir.string());
  summary << summary_json(m).dump(2) << '\n';
  for (const auto& r : m.per_record) records << to_json(r).dump() << '\n';
  if (!summary || !records) throw std::runtime_error("failed writing report into " + dir.string());
}

}  // namespace flora
