#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "flora/eval.hpp"
#include "flora/json_io.hpp"
#include "flora/synthetic.hpp"

namespace flora {
namespace {

nlohmann::json load_fixture() {
  std::ifstream in(std::filesystem::path(FLORA_TEST_DATA) / "metrics_fixture.json");
  return nlohmann::json::parse(in);
}

Box random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
  if (a == b) b = std::min(1.0, a + 0.01);
  if (c == d) d = std::min(1.0, c + 0.01);
  return make_box(std::min(a, b), std::min(c, d), std::max(a, b), std::max(c, d));
}

TEST(PrecisionAtK, MatchesHandComputedFixture) {
  const auto fx = load_fixture();
  std::vector<std::vector<Box>> answers;
  std::vector<Box> gts;
  for (const auto& r : fx.at("records")) {
    gts.push_back(box_from_json(r.at("gt_box")));
    std::vector<Box> ranked;
    for (const auto& b : r.at("ranked")) ranked.push_back(box_from_json(b));
    answers.push_back(std::move(ranked));
  }
  for (int k : kPrecisionRanks)
    EXPECT_NEAR(precision_at_k(answers, gts, k), fx.at("expected").at("p_at_" + std::to_string(k)).get<double>(),
                1e-12)
        << k;
}

TEST(PrecisionAtK, ThresholdIsStrict) {
  // Same height, overlapping half of the union's width: IoU exactly 0.5.
  const Box gt = make_box(0.0, 0.0, 0.4, 1.0);
  const Box half = make_box(0.0, 0.0, 0.2, 1.0);
  const std::vector<std::vector<Box>> answers{{half}};
  const std::vector<Box> gts{gt};
  EXPECT_DOUBLE_EQ(iou(gt, half), 0.5);
  EXPECT_EQ(precision_at_k(answers, gts, 1), 0.0);
  EXPECT_EQ(precision_at_k(answers, gts, 1, 0.49), 1.0);
  EXPECT_THROW(precision_at_k(answers, gts, 0), UsageError);
  EXPECT_THROW(precision_at_k(answers, gts, 1, 1.0), UsageError);
}

TEST(IouProperty, SymmetricBoundedAndOneOnSelf) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    const Box a = random_box(rng), b = random_box(rng);
    EXPECT_DOUBLE_EQ(iou(a, b), iou(b, a));
    EXPECT_GE(iou(a, b), 0.0);
    EXPECT_LE(iou(a, b), 1.0);
    EXPECT_NEAR(iou(a, a), 1.0, 1e-12);
  }
}

TEST(PrecisionProperty, MonotoneInKAndOrderIndependent) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 100; ++t) {
    const int n = 1 + static_cast<int>(rng() % 20);
    std::vector<std::vector<Box>> answers(n);
    std::vector<Box> gts;
    for (int i = 0; i < n; ++i) {
      gts.push_back(random_box(rng));
      const int m = static_cast<int>(rng() % 12);
      for (int j = 0; j < m; ++j) answers[i].push_back(rng() % 3 == 0 ? gts.back() : random_box(rng));
    }
    double prev = 0.0;
    for (int k = 1; k <= 12; ++k) {
      const double p = precision_at_k(answers, gts, k);
      EXPECT_GE(p, prev);
      prev = p;
    }
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<Box>> a2;
    std::vector<Box> g2;
    for (int i : perm) {
      a2.push_back(answers[i]);
      g2.push_back(gts[i]);
    }
    for (int k : kPrecisionRanks) EXPECT_NEAR(precision_at_k(a2, g2, k), precision_at_k(answers, gts, k), 1e-12);
  }
}

TEST(EvalRecord, JsonRoundTripAndValidation) {
  const auto line =
      R"({"record_id":"a","image":{"uri":"x","width":10,"height":20},"phrase":"p","gt_box":[0.1,0.1,0.5,0.5]})";
  std::istringstream in(std::string(line) + "\n\n" + line + "\n");
  const auto rs = read_records(in);
  ASSERT_EQ(rs.size(), 2u);
  EXPECT_EQ(rs[0].mode(), QueryMode::Detection);
  EXPECT_EQ(to_json(record_from_json(to_json(rs[0]))), to_json(rs[0]));

  const auto bad = [](const char* text) { return record_from_json(nlohmann::json::parse(text)); };
  EXPECT_THROW(bad(R"({"record_id":"a","image":{"uri":"x"},"phrase":"p"})"), UsageError);
  EXPECT_THROW(bad(R"({"record_id":"a","image":{"uri":"x"},"phrase":"p","gt_box":[0.5,0.1,0.2,0.5]})"), UsageError);
  EXPECT_THROW(bad(R"({"record_id":"a","phrase":"p","gt_box":[0.1,0.1,0.5,0.5]})"), UsageError);
  EXPECT_THROW(bad(R"({"record_id":"a","image":{"uri":"x"},"phrase":"p","gt_candidate_id":3,
                       "candidates":[{"id":1,"box":[0.1,0.1,0.2,0.2],"confidence":0.5}]})"),
               UsageError);
  EXPECT_THROW(bad(R"({"record_id":"a","image":{"uri":"x"},"phrase":"p","gt_box":[0.1,0.1,0.5,0.5],
                       "candidates":[{"id":1,"box":[0.1,0.1,0.2,0.2],"confidence":0.5}]})"),
               UsageError);
  std::istringstream garbage("{not json\n");
  EXPECT_THROW(read_records(garbage), UsageError);
}

struct OracleSet {
  std::vector<synth::SceneSpec> scenes;
  std::vector<EvalRecord> records;
  std::shared_ptr<MockScript> script;
};

OracleSet oracle_set(int count, QueryMode mode) {
  OracleSet s;
  for (int i = 0; i < count; ++i) {
    const auto seed = static_cast<std::uint64_t>(100 + i);
    s.scenes.push_back(synth::generate_scene(seed, synth::default_object_count(seed), synth::Redundancy::Minimal));
    const auto& sc = s.scenes.back();
    EvalRecord r;
    r.record_id = "scene_" + std::to_string(seed);
    r.image = sc.image();
    r.phrase = sc.phrase;
    if (mode == QueryMode::Association) {
      r.gt_candidate_id = sc.target_id;
      r.candidates = synth::make_query(sc, mode).given_candidates;
    } else {
      r.gt_box = sc.target().box;
    }
    s.records.push_back(std::move(r));
  }
  s.script = std::make_shared<MockScript>(synth::record_oracle_script(s.scenes, EngineConfig{}, mode));
  return s;
}

TEST(RunEval, OracleScriptsScorePerfectly) {
  const auto det = oracle_set(30, QueryMode::Detection);
  const Engine engine(make_scripted_backends(det.script), EngineConfig{});
  for (int par : {1, 3}) {
    const auto m = run_eval(det.records, engine, {par, true});
    EXPECT_EQ(m.n, 30u);
    for (int k : kPrecisionRanks) EXPECT_EQ(m.p_at.at(k), 1.0);
    EXPECT_FALSE(m.assoc_accuracy);
    for (std::size_t i = 0; i < m.per_record.size(); ++i) {
      EXPECT_EQ(m.per_record[i].record_id, det.records[i].record_id);
      EXPECT_TRUE(m.per_record[i].hit_at_1);
      EXPECT_NEAR(m.per_record[i].best_iou, 1.0, 1e-12);
    }
  }

  const auto assoc = oracle_set(20, QueryMode::Association);
  const Engine engine2(make_scripted_backends(assoc.script), EngineConfig{});
  const auto m = run_eval(assoc.records, engine2, {2, true});
  EXPECT_TRUE(m.p_at.empty());
  ASSERT_TRUE(m.assoc_accuracy);
  EXPECT_EQ(*m.assoc_accuracy, 1.0);
}

TEST(RunEval, FailuresCountAsMissesUnlessStrict) {
  auto set = oracle_set(5, QueryMode::Detection);
  EvalRecord unknown = set.records[0];
  unknown.record_id = "unknown";
  unknown.image.uri = "scene://999999";
  set.records.push_back(unknown);
  const Engine engine(make_scripted_backends(set.script), EngineConfig{});

  const auto m = run_eval(set.records, engine);
  EXPECT_NEAR(m.p_at.at(1), 5.0 / 6.0, 1e-12);
  EXPECT_FALSE(m.per_record.back().error.empty());
  EXPECT_FALSE(m.per_record.back().hit_at_1);
  EXPECT_THROW(run_eval(set.records, engine, {2, true}), BackendError);
  EXPECT_THROW(run_eval(set.records, engine, {0, false}), UsageError);
}

TEST(Aggregate, IndependentOfRecordOrder) {
  const auto set = oracle_set(12, QueryMode::Detection);
  const Engine engine(make_scripted_backends(set.script), EngineConfig{});
  auto results = run_eval(set.records, engine).per_record;
  results[3].ranked_boxes.clear();
  results[3].hit_at_1 = false;
  const auto base = aggregate(set.records, results);

  std::vector<std::size_t> perm(results.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(3);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<EvalRecord> records;
  std::vector<RecordResult> shuffled;
  for (auto i : perm) {
    records.push_back(set.records[i]);
    shuffled.push_back(results[i]);
  }
  EXPECT_EQ(summary_json(base), summary_json(aggregate(records, shuffled)));
  EXPECT_NEAR(base.p_at.at(1), 11.0 / 12.0, 1e-12);
}

TEST(WriteReport, WritesSummaryAndRecords) {
  const auto set = oracle_set(4, QueryMode::Detection);
  const Engine engine(make_scripted_backends(set.script), EngineConfig{});
  const auto m = run_eval(set.records, engine);
  const auto dir = std::filesystem::temp_directory_path() / "flora_eval_report_test";
  std::filesystem::remove_all(dir);
  write_report(m, dir);
  std::ifstream summary(dir / "summary.json");
  const auto s = nlohmann::json::parse(summary);
  EXPECT_EQ(s.at("n"), 4);
  EXPECT_EQ(s.at("p_at_1"), 1.0);
  std::ifstream recs(dir / "records.jsonl");
  int lines = 0;
  for (std::string line; std::getline(recs, line);) {
    EXPECT_TRUE(nlohmann::json::parse(line).contains("record_id"));
    ++lines;
  }
  EXPECT_EQ(lines, 4);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace flora
