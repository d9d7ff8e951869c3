// geogen: synthesize geometry QA data, chase problems, verify and search steps.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "geogen/qa.hpp"
#include "geogen/verifier.hpp"

namespace fs = std::filesystem;
using namespace geogen;

namespace {

struct Options {
  std::string registry;  // empty: built-in core registry
  std::uint64_t seed = 0;
  std::size_t diagrams = 100;
  int targets_per_image = 1;
  int cap = 400;
  std::string out = "out";
  std::string transcribe = "off";  // off | mock | script:<path> | http
  std::string mode = "strict";
  int width = 4;
  int workers = 1;
  int max_iterations = 32;
  bool png = false;

  // Gateway, used by transcribe=http, --generator http and --translator http.
  std::string endpoint = GatewayConfig{}.endpoint;
  std::string model = GatewayConfig{}.model;
  std::string token_env = GatewayConfig{}.token_env;
  double timeout = GatewayConfig{}.timeout_seconds;
  int max_attempts = GatewayConfig{}.max_attempts;
  std::string audit_log;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << content)) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

// One fact per line; blank lines and '#' comments skipped.
std::vector<std::string> read_lines(const std::string& path) {
  std::vector<std::string> out;
  std::istringstream in(read_file(path));
  for (std::string line; std::getline(in, line);) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line.erase(0, line.find_first_not_of(" \t\r"));
    line.erase(line.find_last_not_of(" \t\r") + 1);
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

std::vector<Fact> read_facts(const std::string& path, const Registry& registry) {
  std::vector<Fact> out;
  for (const auto& line : read_lines(path)) out.push_back(parse_fact(line, registry));
  return out;
}

GatewayConfig gateway_config(const Options& o) {
  GatewayConfig c;
  c.endpoint = o.endpoint;
  c.model = o.model;
  c.token_env = o.token_env;
  c.timeout_seconds = o.timeout;
  c.max_attempts = o.max_attempts;
  c.audit_path = o.audit_log;
  return c;
}

// "mock" echoes, "script:<path>" replays, "http" calls the endpoint.
std::unique_ptr<Gateway> make_gateway(const std::string& choice, const Options& o) {
  if (choice.empty() || choice == "off") return nullptr;
  GatewayConfig c = gateway_config(o);
  if (choice == "mock") {
    c.token_env.clear();
    return std::make_unique<Gateway>(c, std::make_shared<EchoBackend>());
  }
  if (choice.rfind("script:", 0) == 0) {
    c.token_env.clear();
    return std::make_unique<Gateway>(c, std::make_shared<ScriptedBackend>(Script::load(choice.substr(7))));
  }
  if (choice == "http") return std::make_unique<Gateway>(c, std::make_shared<HttpBackend>());
  throw Error(ErrorCode::InvalidArgument, "gateway must be off, mock, script:<path> or http, got '" + choice + "'");
}

Registry load(const Options& o) { return o.registry.empty() ? core_registry() : load_registry_file(o.registry); }

void check_counts(const Options& o) {
  if (o.cap < 1) throw Error(ErrorCode::InvalidArgument, "--cap must be at least 1");
  if (o.targets_per_image < 1) throw Error(ErrorCode::InvalidArgument, "--targets-per-image must be at least 1");
  if (o.workers < 1) throw Error(ErrorCode::InvalidArgument, "--workers must be at least 1");
}

PipelineConfig pipeline_config(const Options& o, bool transcribe) {
  PipelineConfig cfg;
  cfg.filter.min_count = 1;
  cfg.filter.max_count = o.targets_per_image;
  cfg.cap = o.cap;
  cfg.transcribe = transcribe;
  cfg.write_png = o.png;
  return cfg;
}

void print(const nlohmann::json& j) { std::cout << j.dump() << "\n"; }

// ------------------------------------------------------------------ synth

int cmd_synth(const Options& o) {
  check_counts(o);
  Registry registry = load(o);
  TemplateSet templates(registry);
  auto gateway = make_gateway(o.transcribe, o);
  auto cfg = pipeline_config(o, gateway != nullptr);
  auto results = run_synth(registry, templates, cfg, o.seed, o.diagrams, o.workers, gateway.get());

  std::vector<QAPair> pairs;
  std::map<std::string, int> status;
  int fallbacks = 0;
  std::string seeds;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    ++status[std::string(to_string(r.status))];
    fallbacks += r.transcription_fallbacks;
    pairs.insert(pairs.end(), r.pairs.begin(), r.pairs.end());
    nlohmann::json line{{"index", i}, {"seed", r.seed}, {"status", to_string(r.status)}, {"pairs", r.pairs.size()}};
    if (!r.message.empty()) line["message"] = r.message;
    seeds += line.dump() + "\n";
  }
  pairs = dedup_and_cap(std::move(pairs), o.cap);

  std::set<std::string> used;
  for (const auto& p : pairs) used.insert(p.image_ref);
  std::map<std::string, std::string> images;
  for (const auto& r : results) {
    if (!r.diagram) continue;
    std::string ref = "images/s" + std::to_string(r.seed) + ".svg";
    if (!used.count(ref)) continue;
    images[ref] = r.svg;
    images["images/s" + std::to_string(r.seed) + ".json"] = diagram_to_json(*r.diagram).dump(2) + "\n";
  }

  auto unsat = status.find("unsatisfied");
  std::size_t unsatisfied = unsat == status.end() ? 0 : static_cast<std::size_t>(unsat->second);
  nlohmann::json extra{{"master_seed", o.seed},
                       {"diagrams", o.diagrams},
                       {"targets_per_image", o.targets_per_image},
                       {"cap", o.cap},
                       {"seed_status", status},
                       {"plotter_yield", o.diagrams ? double(o.diagrams - unsatisfied) / double(o.diagrams) : 1.0},
                       {"transcription", o.transcribe},
                       {"transcription_fallbacks", fallbacks}};
  auto summary = export_dataset(pairs, o.out, images, extra);
  write_file(fs::path(o.out) / "seeds.jsonl", seeds);

  int pngs = 0;
  if (o.png && png_supported()) {
    for (const auto& r : results) {
      if (r.diagram && used.count("images/s" + std::to_string(r.seed) + ".svg")) {
        pngs += render_png(*r.diagram, (fs::path(o.out) / "images" / ("s" + std::to_string(r.seed) + ".png")).string());
      }
    }
  }
  print({{"command", "synth"}, {"records", summary.records}, {"diagrams", o.diagrams}, {"seed_status", status},
         {"png", pngs}, {"out", o.out}});
  return 0;
}

// ----------------------------------------------------------------- expand

int cmd_expand(const Options& o, const std::vector<std::string>& files) {
  check_counts(o);
  Registry registry = load(o);
  TemplateSet templates(registry);
  auto gateway = make_gateway(o.transcribe, o);
  auto cfg = pipeline_config(o, gateway != nullptr);
  std::vector<QAPair> pairs;
  std::map<std::string, int> status;
  for (std::size_t i = 0; i < files.size(); ++i) {
    std::string image_ref = "images/" + fs::path(files[i]).stem().string() + ".png";
    auto r = process_annotation(registry, templates, cfg, read_lines(files[i]), i, image_ref, gateway.get());
    ++status[std::string(to_string(r.status))];
    pairs.insert(pairs.end(), r.pairs.begin(), r.pairs.end());
  }
  pairs = dedup_and_cap(std::move(pairs), o.cap);
  auto summary = export_dataset(pairs, o.out, {}, {{"problems", files.size()}, {"seed_status", status}});
  print({{"command", "expand"}, {"records", summary.records}, {"problems", files.size()}, {"out", o.out}});
  return 0;
}

// ------------------------------------------------------------------ solve

// Full path for QA targets; bare derivation steps for any other fact.
nlohmann::json explain(const DeductionGraph& graph, int node, const Registry& registry) {
  try {
    return path_to_json(build_path(graph, node, registry));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InvalidArgument) throw;
  }
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : linearize(traceback(graph, graph.state().fact(node).key()), registry)) {
    steps.push_back(step_to_json(s));
  }
  return {{"target", graph.state().fact(node).key()}, {"steps", steps}};
}

int cmd_solve(const Options& o, const std::string& problem, const std::string& target) {
  Registry registry = load(o);
  State initial;
  for (const auto& f : read_facts(problem, registry)) initial.insert(f, 0);
  auto graph = forward_chase(initial, registry);
  nlohmann::json paths = nlohmann::json::array();
  if (!target.empty()) {
    auto id = graph.find(parse_fact(target, registry).key());
    if (!id) throw Error(ErrorCode::UnknownTarget, "target not derived: " + target);
    paths.push_back(explain(graph, *id, registry));
  } else {
    for (const auto& t : score_targets(graph, registry)) paths.push_back(explain(graph, t.node, registry));
  }
  print({{"command", "solve"}, {"facts", graph.node_count()}, {"layers", graph.layer_count()}, {"paths", paths}});
  return 0;
}

// ----------------------------------------------------------------- verify

// Givens of a recorded solution: conditions no earlier step concluded.
std::vector<Fact> recorded_givens(const nlohmann::json& formal, const Registry& registry) {
  std::vector<Fact> givens;
  std::set<std::string> seen;
  for (const auto& step : formal) {
    for (const auto& c : step.at("conditions")) {
      auto key = c.get<std::string>();
      if (seen.insert(key).second) givens.push_back(parse_fact(key, registry));
    }
    seen.insert(step.at("conclusion").get<std::string>());
  }
  return givens;
}

struct StepVerdict {
  std::string text;
  VerifyResult result;
};

std::vector<StepVerdict> verify_steps(const std::vector<Fact>& givens, const std::vector<std::string>& steps,
                                      const std::optional<Diagram>& diagram, VerifyMode mode, Translator& translator,
                                      const Registry& registry) {
  State state;
  for (const auto& g : givens) state.insert(g, 0);
  State figure = diagram ? diagram->initial_state(registry) : state;
  std::vector<StepVerdict> out;
  for (const auto& text : steps) {
    VerifyResult r{false, mode, VerifyCode::TranslationFailed, {}};
    try {
      auto t = translate_step(text, translator);
      if (mode == VerifyMode::Strict) {
        r = verify_strict(state, t, registry);
      } else {
        r = diagram ? verify_fast(*diagram, t) : verify_fast(figure, t);
      }
      if (r.valid) {
        try {
          state.insert(t.conclusion, 1);
        } catch (const Error&) {
        }
      }
    } catch (const Error& e) {
      r.message = e.what();
    }
    out.push_back({text, r});
  }
  return out;
}

std::optional<Diagram> load_diagram(const std::string& path, const Registry& registry) {
  if (path.empty() || !fs::exists(path)) return std::nullopt;
  return diagram_from_json(nlohmann::json::parse(read_file(path)), registry);
}

int cmd_verify(const Options& o, const std::string& problem, const std::string& steps_path,
               const std::string& diagram_path, const std::string& qa_path, const std::string& only_id) {
  Registry registry = load(o);
  TemplateSet templates(registry);
  RuleTranslator translator(templates);
  VerifyMode mode = verify_mode_from_string(o.mode);
  std::size_t checked = 0, valid = 0;
  auto emit = [&](const nlohmann::json& head, const std::vector<StepVerdict>& verdicts) {
    for (std::size_t i = 0; i < verdicts.size(); ++i) {
      auto line = head;
      line["step"] = i;
      line["text"] = verdicts[i].text;
      line.update(to_json(verdicts[i].result));
      print(line);
      ++checked;
      valid += verdicts[i].result.valid;
    }
  };
  if (!qa_path.empty()) {
    std::istringstream in(read_file(qa_path));
    for (std::string line; std::getline(in, line);) {
      if (line.empty()) continue;
      auto rec = nlohmann::json::parse(line);
      if (!only_id.empty() && rec.at("id") != only_id) continue;
      auto givens = recorded_givens(rec.at("solution_formal"), registry);
      // The diagram sidecar sits next to the SVG.
      auto sidecar = (fs::path(qa_path).parent_path() / rec.at("image").get<std::string>()).replace_extension(".json");
      auto diagram = load_diagram(sidecar.string(), registry);
      emit({{"id", rec.at("id")}},
           verify_steps(givens, rec.at("solution_nl").get<std::vector<std::string>>(), diagram, mode, translator, registry));
    }
  } else {
    if (problem.empty() || steps_path.empty()) {
      throw Error(ErrorCode::InvalidArgument, "verify needs --qa, or --problem with --steps");
    }
    emit(nlohmann::json::object(), verify_steps(read_facts(problem, registry), read_lines(steps_path),
                                                load_diagram(diagram_path, registry), mode, translator, registry));
  }
  std::cerr << nlohmann::json{{"checked", checked}, {"valid", valid}}.dump() << "\n";
  return 0;
}

// ----------------------------------------------------------------- search

int cmd_search(const Options& o, const std::string& problem, const std::string& generator_choice,
               const std::string& translator_choice, const std::string& diagram_path, const std::string& prompt) {
  Registry registry = load(o);
  TemplateSet templates(registry);
  SearchProblem p{prompt, read_facts(problem, registry), load_diagram(diagram_path, registry)};

  std::unique_ptr<Gateway> generator_gateway;
  std::unique_ptr<StepGenerator> generator;
  if (generator_choice.rfind("script:", 0) == 0) {
    generator = std::make_unique<ScriptedGenerator>(Script::load(generator_choice.substr(7)));
  } else if (generator_choice == "http") {
    generator_gateway = make_gateway("http", o);
    generator = std::make_unique<GatewayGenerator>(*generator_gateway);
  } else {
    throw Error(ErrorCode::InvalidArgument, "--generator must be script:<path> or http");
  }
  std::unique_ptr<Gateway> translator_gateway;
  std::unique_ptr<Translator> translator;
  if (translator_choice == "rule") {
    translator = std::make_unique<RuleTranslator>(templates);
  } else if (translator_choice == "http") {
    translator_gateway = make_gateway("http", o);
    translator = std::make_unique<GatewayTranslator>(*translator_gateway, registry);
  } else {
    throw Error(ErrorCode::InvalidArgument, "--translator must be rule or http");
  }
  SearchConfig cfg{o.width, o.max_iterations, verify_mode_from_string(o.mode), o.seed};
  auto history = tree_search(p, *generator, *translator, registry, cfg);
  std::cout << history.to_json().dump(2) << "\n";
  return 0;
}

// ------------------------------------------------------------------ stats

int cmd_stats(const std::string& dir) {
  auto manifest = nlohmann::json::parse(read_file((fs::path(dir) / "manifest.json").string()));
  nlohmann::json out{{"command", "stats"}};
  for (const char* key : {"records", "step_histogram", "signatures", "distinct_signatures", "variants", "sources",
                          "seed_status", "plotter_yield"}) {
    if (manifest.contains(key)) out[key] = manifest[key];
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

void fail_json(std::string_view code, const std::string& message) {
  std::cerr << nlohmann::json{{"error", {{"code", code}, {"message", message}}}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geometry problem synthesis, deduction and step verification"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML-style config file; command-line flags take precedence");

  Options o;
  app.add_option("--registry", o.registry, "Registry definition file (default: built-in core registry)");
  app.add_option("--seed", o.seed, "Master seed");
  app.add_option("--diagrams", o.diagrams, "Diagrams to synthesize");
  app.add_option("--targets-per-image", o.targets_per_image, "Targets drawn per diagram");
  app.add_option("--cap", o.cap, "Maximum records per theorem-sequence signature");
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--transcribe", o.transcribe, "Transcription gateway: off, mock, script:<path> or http");
  app.add_option("--mode", o.mode, "Verification mode: strict or fast");
  app.add_option("--width", o.width, "Candidates per search iteration (K)");
  app.add_option("--workers", o.workers, "Worker threads");
  app.add_option("--max-iterations", o.max_iterations, "Search iteration limit");
  app.add_flag("--png", o.png, "Also write PNG images");
  app.add_option("--endpoint", o.endpoint, "Chat-completion endpoint URL");
  app.add_option("--model", o.model, "Model name sent to the endpoint");
  app.add_option("--token-env", o.token_env, "Environment variable holding the API token");
  app.add_option("--timeout", o.timeout, "Request timeout in seconds");
  app.add_option("--max-attempts", o.max_attempts, "Attempts per request");
  app.add_option("--audit-log", o.audit_log, "JSONL audit log of gateway calls");

  auto* synth = app.add_subcommand("synth", "Synthesize diagrams and QA pairs");

  std::vector<std::string> annotation_files;
  auto* expand = app.add_subcommand("expand", "QA pairs from formal-annotation files");
  expand->add_option("files", annotation_files, "Annotation files, one fact per line")->required()->check(CLI::ExistingFile);

  std::string problem, target;
  auto* solve = app.add_subcommand("solve", "Forward-chase a problem and dump reasoning paths");
  solve->add_option("problem", problem, "Problem file, one fact per line")->required()->check(CLI::ExistingFile);
  solve->add_option("--target", target, "Fact to explain (default: every eligible target)");

  std::string steps, diagram, qa, id;
  auto* verify = app.add_subcommand("verify", "Verify natural-language steps");
  verify->add_option("--problem", problem, "Problem file with the givens")->check(CLI::ExistingFile);
  verify->add_option("--steps", steps, "Steps file, one sentence per line")->check(CLI::ExistingFile);
  verify->add_option("--diagram", diagram, "Diagram JSON sidecar for fast mode")->check(CLI::ExistingFile);
  verify->add_option("--qa", qa, "QA JSONL file; verifies each record's own solution")->check(CLI::ExistingFile);
  verify->add_option("--id", id, "Only the record with this id");

  std::string generator = "", translator = "rule", prompt = "Solve the problem step by step.";
  auto* search = app.add_subcommand("search", "Step-level tree search with symbolic verification");
  search->add_option("problem", problem, "Problem file with the givens")->required()->check(CLI::ExistingFile);
  search->add_option("--generator", generator, "script:<path> or http")->required();
  search->add_option("--translator", translator, "rule or http");
  search->add_option("--diagram", diagram, "Diagram JSON sidecar for fast mode")->check(CLI::ExistingFile);
  search->add_option("--prompt", prompt, "Problem statement passed to the generator");

  std::string stats_dir;
  auto* stats = app.add_subcommand("stats", "Summarize an exported dataset");
  stats->add_option("dir", stats_dir, "Dataset directory (default: --out)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    fail_json("InvalidArgument", e.what());
    return 2;
  }

  try {
    if (*synth) return cmd_synth(o);
    if (*expand) return cmd_expand(o, annotation_files);
    if (*solve) return cmd_solve(o, problem, target);
    if (*verify) return cmd_verify(o, problem, steps, diagram, qa, id);
    if (*search) return cmd_search(o, problem, generator, translator, diagram, prompt);
    if (*stats) return cmd_stats(stats_dir.empty() ? o.out : stats_dir);
  } catch (const Error& e) {
    fail_json(to_string(e.code()), e.what());
    return 1;
  } catch (const std::exception& e) {
    fail_json("InternalError", e.what());
    return 1;
  }
  return 1;
}
