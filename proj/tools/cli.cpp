#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "flora/config.hpp"
#include "flora/eval.hpp"
#include "flora/json_io.hpp"
#include "flora/scripted_backends.hpp"
#include "flora/synthetic.hpp"

namespace flora::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Options shared by every command that talks to backends.
struct Common {
  std::string config_file;
  std::string mock_file;
  std::string llm_url;
  std::string detector_url;
  std::string scorer_url;
  std::vector<std::string> overrides;  // key=value

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "config file (default: $FLORA_CONFIG)");
    cmd->add_option("--mock", mock_file, "replay backend traffic from a mock script");
    cmd->add_option("--llm-url", llm_url, "LLM service URL");
    cmd->add_option("--detector-url", detector_url, "detector service URL");
    cmd->add_option("--scorer-url", scorer_url, "region scorer service URL");
    cmd->add_option("--set", overrides, "override a config key (key=value)");
  }

  // File values first, then flags.
  RunConfig resolve() const {
    RunConfig rc;
    if (!config_file.empty()) rc.apply_file(config_file);
    else if (auto env = config_path_from_env()) rc.apply_file(*env);
    for (const auto& kv : overrides) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
      rc.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!mock_file.empty()) rc.mock_file = mock_file;
    if (!llm_url.empty()) rc.llm.url = llm_url;
    if (!detector_url.empty()) rc.detector.url = detector_url;
    if (!scorer_url.empty()) rc.scorer.url = scorer_url;
    return rc;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f || !(f << text)) throw std::runtime_error("cannot write " + path.string());
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw UsageError(path.string() + " is not valid JSON");
  return j;
}

// ---------------------------------------------------------------------------

struct ParseCmd {
  Common common;
  std::string phrase;
  std::string mock_llm;
  bool association = false;

  void add_to(CLI::App& app) {
    auto* cmd = app.add_subcommand("parse", "prompt the LLM for a phrase and print the parsed semantics");
    cmd->add_option("phrase", phrase, "referring phrase")->required();
    cmd->add_option("--mock-llm", mock_llm, "mock script providing LLM replies");
    cmd->add_flag("--association", association, "skip the object-type prompt");
    common.add_to(cmd);
  }

  int run(std::ostream& out) {
    RunConfig rc = common.resolve();
    if (!mock_llm.empty()) rc.mock_file = mock_llm;
    const EngineConfig engine = rc.resolved_engine();

    std::shared_ptr<LlmBackend> llm;
    if (!rc.mock_file.empty())
      llm = make_scripted_backends(std::make_shared<const MockScript>(MockScript::load(rc.mock_file))).llm;
    else if (!rc.llm.url.empty())
      llm = make_http_llm(rc.llm);
    else
      throw UsageError("parse needs --mock-llm, --mock or --llm-url");

    const PromptBundle bundle = build_prompt_bundle(phrase, engine.prompt_templates());
    StructuredDescription responses;
    json prompts = json::array();
    for (FieldKind k : kAllFieldKinds) {
      if (association && k == FieldKind::ObjectType) continue;
      std::string reply;
      try {
        reply = llm->complete(bundle.system, bundle[k]);
      } catch (const BackendError& e) {
        throw BackendError(e.kind(), "llm." + std::string(field_name(k)) + "/" + e.stage(),
                           e.message(), e.request());
      }
      prompts.push_back({{"field", field_name(k)}, {"prompt", bundle[k]}, {"response", reply}});
      switch (k) {
        case FieldKind::ObjectType: responses.s_type = reply; break;
        case FieldKind::SpatialLocation: responses.s_location = reply; break;
        case FieldKind::VisualPattern: responses.s_visual = reply; break;
        case FieldKind::ObjectRelation: responses.s_relation = reply; break;
      }
    }
    const auto parsed = parse_structured(responses, engine.spatial_dict(), engine.filter);
    out << json{{"prompts", prompts}, {"parsed", to_json(parsed)}}.dump(2) << '\n';
    return kOk;
  }
};

// ---------------------------------------------------------------------------

struct InferCmd {
  Common common;
  std::string phrase;
  std::string image_uri;
  int width = 1;
  int height = 1;
  std::string scene_file;
  std::string candidates_file;
  bool association = false;
  int top_k = -1;
  bool no_trace = false;

  void add_to(CLI::App& app) {
    auto* cmd = app.add_subcommand("infer", "rank candidates for one referring phrase");
    cmd->add_option("phrase", phrase, "referring phrase (default: the scene's own phrase)");
    cmd->add_option("--image", image_uri, "image reference passed to the backends");
    cmd->add_option("--width", width, "image width in pixels")->check(CLI::PositiveNumber);
    cmd->add_option("--height", height, "image height in pixels")->check(CLI::PositiveNumber);
    cmd->add_option("--scene", scene_file, "synthetic scene file; answers come from its oracle backends");
    cmd->add_option("--candidates", candidates_file,
                    "JSON array of given candidates (association mode)");
    cmd->add_flag("--association", association, "rank given candidates instead of detecting");
    cmd->add_option("--top-k", top_k, "print at most this many ranked entries")
        ->check(CLI::NonNegativeNumber);
    cmd->add_flag("--no-trace", no_trace, "omit the backend trace");
    common.add_to(cmd);
  }

  int run(std::ostream& out) {
    const RunConfig rc = common.resolve();
    const EngineConfig engine = rc.resolved_engine();

    Query q;
    BackendSet backends;
    q.mode = association || !candidates_file.empty() ? QueryMode::Association : QueryMode::Detection;
    if (!scene_file.empty()) {
      const auto scene = synth::scene_from_json(read_json_file(scene_file));
      q = synth::make_query(scene, q.mode);
      backends = synth::oracle_backends(scene);
    } else {
      if (image_uri.empty()) throw UsageError("infer needs --image or --scene");
      q.image = {image_uri, width, height};
      backends = rc.make_backends(q.mode == QueryMode::Detection);
    }
    if (!phrase.empty()) q.phrase = phrase;
    if (!candidates_file.empty()) {
      q.given_candidates.clear();
      const json arr = read_json_file(candidates_file);
      if (!arr.is_array()) throw UsageError("--candidates expects a JSON array");
      for (const auto& c : arr) q.given_candidates.push_back(candidate_from_json(c));
    }

    const Answer answer = Engine(backends, engine).infer(q);
    json j = to_json(answer, top_k);
    if (no_trace) j.erase("trace");
    out << j.dump(2) << '\n';
    return answer.no_answer ? kNoAnswer : kOk;
  }
};

// ---------------------------------------------------------------------------

struct EvalCmd {
  Common common;
  std::string dataset;
  std::string out_dir;
  int parallelism = 0;
  bool strict = false;

  void add_to(CLI::App& app) {
    auto* cmd = app.add_subcommand("eval", "run a JSONL dataset and report the metrics");
    cmd->add_option("dataset", dataset, "JSONL evaluation records")->required();
    cmd->add_option("--out", out_dir, "directory for summary.json and records.jsonl");
    cmd->add_option("--parallelism", parallelism, "concurrent records")->check(CLI::PositiveNumber);
    cmd->add_flag("--strict", strict, "abort on the first failing record");
    common.add_to(cmd);
  }

  int run(std::ostream& out) {
    RunConfig rc = common.resolve();
    if (parallelism > 0) rc.eval.parallelism = parallelism;
    if (strict) rc.eval.strict = true;

    const auto records = load_records(dataset);
    if (records.empty()) throw UsageError("dataset " + dataset + " has no records");
    const bool any_detection = std::any_of(records.begin(), records.end(), [](const EvalRecord& r) {
      return r.mode() == QueryMode::Detection;
    });
    const Engine engine(rc.make_backends(any_detection), rc.resolved_engine());
    const Metrics m = run_eval(records, engine, rc.eval);
    if (!out_dir.empty()) write_report(m, out_dir);
    out << summary_json(m).dump(2) << '\n';
    return kOk;
  }
};

// ---------------------------------------------------------------------------

struct SynthCmd {
  Common common;
  std::uint64_t seed = 0;
  int count = 1;
  std::string mode = "any3of4";
  int objects = 0;
  std::string out_dir;
  bool association = false;

  void add_to(CLI::App& app) {
    auto* cmd = app.add_subcommand("synth", "write synthetic scenes, records and a mock script");
    cmd->add_option("--seed", seed, "seed of the first scene; scene i uses seed + i");
    cmd->add_option("--count", count, "number of scenes")->check(CLI::PositiveNumber);
    cmd->add_option("--mode", mode, "redundancy: any3of4 or minimal")
        ->check(CLI::IsMember({"any3of4", "minimal"}));
    cmd->add_option("--objects", objects, "objects per scene (default cycles 2..10)")
        ->check(CLI::Range(2, 10));
    cmd->add_option("--out", out_dir, "output directory")->required();
    cmd->add_flag("--association", association, "emit association records with given candidates");
    common.add_to(cmd);
  }

  int run(std::ostream& out) {
    const RunConfig rc = common.resolve();
    const EngineConfig engine = rc.resolved_engine();
    const auto redundancy = *synth::redundancy_from_name(mode);
    const QueryMode qmode = association ? QueryMode::Association : QueryMode::Detection;

    const fs::path dir(out_dir);
    fs::create_directories(dir / "scenes");
    std::vector<synth::SceneSpec> scenes;
    std::ostringstream records;
    for (int i = 0; i < count; ++i) {
      const std::uint64_t s = seed + static_cast<std::uint64_t>(i);
      const int n = objects > 0 ? objects : synth::default_object_count(s);
      scenes.push_back(synth::generate_scene(s, n, redundancy));
      const auto& scene = scenes.back();

      std::ostringstream name;
      name << "scene_" << std::setw(4) << std::setfill('0') << i << ".json";
      write_text(dir / "scenes" / name.str(), synth::to_json(scene).dump(2) + "\n");

      EvalRecord r;
      r.record_id = "scene-" + std::to_string(s);
      r.image = scene.image();
      r.phrase = scene.phrase;
      if (association) {
        r.gt_candidate_id = scene.target_id;
        r.candidates = synth::make_query(scene, QueryMode::Association).given_candidates;
      } else {
        r.gt_box = scene.target().box;
      }
      records << to_json(r).dump() << '\n';
    }
    write_text(dir / "records.jsonl", records.str());
    write_text(dir / "mock.json", synth::record_oracle_script(scenes, engine, qmode).to_json().dump(1) + "\n");
    out << json{{"scenes", count}, {"records", (dir / "records.jsonl").string()},
                {"mock", (dir / "mock.json").string()}}.dump(2)
        << '\n';
    return kOk;
  }
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"flora: referring-object inference with grammar-regulated LLM output"};
  app.require_subcommand(1);
  ParseCmd parse;
  InferCmd infer;
  EvalCmd eval;
  SynthCmd synth;
  parse.add_to(app);
  infer.add_to(app);
  eval.add_to(app);
  synth.add_to(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  try {
    if (app.got_subcommand("parse")) return parse.run(out);
    if (app.got_subcommand("infer")) return infer.run(out);
    if (app.got_subcommand("eval")) return eval.run(out);
    return synth.run(out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const BackendError& e) {
    err << "backend error at " << e.what() << '\n';
    return kBackendFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kBackendFailure;
  }
}

}  // namespace flora::cli
