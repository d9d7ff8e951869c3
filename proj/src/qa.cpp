#include "geogen/qa.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <regex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

namespace geogen {

nlohmann::json qa_to_json(const QAPair& p) {
  nlohmann::json formal = nlohmann::json::array();
  for (const auto& s : p.solution_formal) formal.push_back(step_to_json(s));
  nlohmann::json j = {{"id", p.id},
                      {"image", p.image_ref},
                      {"question", p.question},
                      {"solution_nl", p.solution_nl},
                      {"solution_formal", formal},
                      {"answer", p.answer},
                      {"meta", {{"signature", p.signature}, {"depth", p.depth}, {"source", p.source}, {"seed", p.seed}}}};
  if (p.figure_description) j["figure_description"] = *p.figure_description;
  return j;
}

// -------------------------------------------------------------- drafts

namespace {

std::string measure_phrase(const MeasureSymbol& s) {
  std::string name = format_expr(Expr::symbol(s), ExprSyntax::Natural);
  switch (s.kind()) {
    case MeasureKind::LengthOfLine: return "the length of " + name;
    case MeasureKind::MeasureOfAngle: return "the measure of " + name;
    case MeasureKind::AreaOfPolygon: return "the area of polygon " + s.entity().text();
    case MeasureKind::PerimeterOfPolygon: return "the perimeter of polygon " + s.entity().text();
  }
  return name;
}

std::string capitalized(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

}  // namespace

Drafts templatize(const ReasoningPath& path, const TemplateSet& templates) {
  Drafts d;
  if (path.kind == TargetKind::Numeric) {
    d.target_phrase = measure_phrase(path.target.equation().as_assignment()->first);
  } else {
    d.target_phrase = templates.fact_phrase(path.target);
  }
  for (const auto& s : path.steps) d.steps.push_back(templates.step_sentence(triple_of(s)));
  return d;
}

// ---------------------------------------------------------- transcription

CompletionRequest transcription_request(const std::vector<std::string>& drafts) {
  CompletionRequest r;
  r.system =
      "You rewrite machine-generated geometry solution steps into fluent English. "
      "Keep every point name, fact and number unchanged. Reply with exactly one numbered line per input line, "
      "in the same order, and nothing else.";
  r.exemplar_user =
      "1. Since ABC is a triangle, D is the midpoint of AB, E is the midpoint of AC and DE is drawn, by the "
      "definition of a midsegment, DE is a midsegment of triangle ABC.\n"
      "2. Substituting BC = 8 into DE = BC/2, we get DE = 4.";
  r.exemplar_assistant =
      "1. D and E are the midpoints of AB and AC, so DE is a midsegment of triangle ABC.\n"
      "2. Since DE is half of BC and BC = 8, DE = 4.";
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    if (i) r.user += '\n';
    r.user += std::to_string(i + 1) + ". " + drafts[i];
  }
  return r;
}

std::vector<std::string> transcribe(const std::vector<std::string>& drafts, Gateway* gateway) {
  if (!gateway || drafts.empty()) return drafts;
  auto reply = gateway->complete(transcription_request(drafts));
  static const std::regex numbered(R"(^\s*(\d+)[.)]\s*(.*\S)\s*$)");
  std::vector<std::string> out;
  std::istringstream in(reply.text);
  for (std::string line; std::getline(in, line);) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::smatch m;
    if (!std::regex_match(line, m, numbered) || std::stoul(m[1].str()) != out.size() + 1) {
      throw Error(ErrorCode::GatewayError, "transcription line " + std::to_string(out.size() + 1) + " is malformed");
    }
    out.push_back(m[2].str());
  }
  if (out.size() != drafts.size()) {
    throw Error(ErrorCode::GatewayError, "transcription returned " + std::to_string(out.size()) + " steps for " +
                                             std::to_string(drafts.size()));
  }
  return out;
}

// -------------------------------------------------------------- questions

std::vector<QAPair> make_questions(const ReasoningPath& path, const Drafts& drafts,
                                   const std::vector<std::string>& solution_nl, const QuestionContext& context,
                                   const TemplateSet& templates, const QuestionModes& modes) {
  if (solution_nl.size() != path.steps.size()) {
    throw Error(ErrorCode::InvalidArgument, "solution text and formal steps differ in length");
  }
  std::vector<std::string> relations, values;
  for (const auto& f : context.figure) {
    if (f.is_literal()) {
      if (f.literal().name() != "Line") relations.push_back(templates.fact_phrase(f));
    } else if (f.equation().as_assignment()) {
      values.push_back(templates.fact_phrase(f));
    }
  }
  std::optional<std::string> description;
  if (!relations.empty()) description = "In the figure, " + TemplateSet::join_list(relations) + ".";
  auto ask = [&](const std::string& verb, const std::string& object) {
    std::string q = description ? *description + " " : "";
    if (!values.empty()) return q + "Given " + TemplateSet::join_list(values) + ", " + verb + " " + object + ".";
    return q + capitalized(verb) + " " + object + ".";
  };

  std::vector<QAPair> out;
  auto emit = [&](char variant, std::string question, bool with_description) {
    QAPair p;
    p.id = "s" + std::to_string(context.seed) + "-t" + std::to_string(context.target_index) + "-" + variant;
    p.image_ref = context.image_ref;
    p.question = std::move(question);
    if (with_description) p.figure_description = description;
    p.solution_nl = solution_nl;
    p.solution_formal = path.steps;
    p.answer = path.answer;
    p.signature = path.signature();
    p.depth = path.depth;
    p.source = context.source;
    p.seed = context.seed;
    out.push_back(std::move(p));
  };
  if (path.kind == TargetKind::Numeric) {
    if (modes.described) emit('a', ask("find", drafts.target_phrase), true);
    if (modes.target_only) emit('b', "As shown in the figure, find " + drafts.target_phrase + ".", false);
  } else if (modes.proof) {
    emit('c', ask("prove that", drafts.target_phrase), true);
  }
  return out;
}

// ------------------------------------------------------------ dedup / cap

std::vector<QAPair> dedup_and_cap(std::vector<QAPair> pairs, int cap) {
  if (cap < 1) throw Error(ErrorCode::InvalidArgument, "cap must be >= 1");
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const QAPair& a, const QAPair& b) { return std::tie(a.seed, a.id) < std::tie(b.seed, b.id); });
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  std::map<std::string, int> per_signature;
  std::vector<QAPair> out;
  for (auto& p : pairs) {
    if (!seen.insert({p.question, p.answer, p.image_ref}).second) continue;
    if (++per_signature[p.signature] > cap) continue;
    out.push_back(std::move(p));
  }
  return out;
}

// ----------------------------------------------------------------- export

nlohmann::json dataset_manifest(const std::vector<QAPair>& pairs) {
  std::map<std::string, int> signatures, sources, variants;
  std::map<std::size_t, int> steps;
  std::set<std::string> images;
  for (const auto& p : pairs) {
    ++signatures[p.signature];
    ++sources[p.source];
    ++variants[p.id.substr(p.id.rfind('-') + 1)];
    ++steps[p.solution_formal.size()];
    images.insert(p.image_ref);
  }
  nlohmann::json histogram = nlohmann::json::array();
  for (const auto& [n, c] : steps) histogram.push_back({{"steps", n}, {"count", c}});
  return {{"records", pairs.size()},   {"images", images.size()}, {"signatures", signatures},
          {"step_histogram", histogram}, {"sources", sources},      {"variants", variants},
          {"distinct_signatures", signatures.size()}, {"transcription_prompt", kTranscriptionPromptVersion}};
}

namespace {

namespace fs = std::filesystem;

// Writes through a temporary file so readers never see a partial file.
void write_file(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorCode::IoError, "write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot rename " + tmp.string() + ": " + ec.message());
}

}  // namespace

ExportSummary export_dataset(const std::vector<QAPair>& pairs, const std::string& out_dir,
                             const std::map<std::string, std::string>& images, const nlohmann::json& extra) {
  fs::path root(out_dir);
  std::error_code ec;
  fs::create_directories(root / "images", ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + (root / "images").string() + ": " + ec.message());
  std::string jsonl;
  for (const auto& p : pairs) jsonl += qa_to_json(p).dump() + "\n";
  ExportSummary summary;
  summary.records = pairs.size();
  summary.jsonl_path = (root / "qa.jsonl").string();
  summary.manifest_path = (root / "manifest.json").string();
  for (const auto& [ref, content] : images) write_file(root / ref, content);
  write_file(summary.jsonl_path, jsonl);
  auto manifest = dataset_manifest(pairs);
  manifest.update(extra);
  write_file(summary.manifest_path, manifest.dump(2) + "\n");
  return summary;
}

// --------------------------------------------------------------- pipeline

std::string_view to_string(SeedStatus status) {
  switch (status) {
    case SeedStatus::Ok: return "ok";
    case SeedStatus::Unsatisfied: return "unsatisfied";
    case SeedStatus::ChaseLimit: return "chase_limit";
    case SeedStatus::NoTarget: return "no_target";
  }
  return "?";
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + (index + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

// Targets, paths and questions over a chased graph.
void questions_from_graph(SeedResult& r, const DeductionGraph& graph, const State& initial, const Registry& registry,
                          const TemplateSet& templates, const PipelineConfig& config, Rng& rng,
                          const std::string& image_ref, const std::string& source, Gateway* gateway) {
  std::vector<int> targets;
  try {
    targets = select_targets(graph, registry, config.filter, rng);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoEligibleTarget) throw;
    r.status = SeedStatus::NoTarget;
    r.message = e.what();
    return;
  }
  QuestionContext ctx;
  ctx.image_ref = image_ref;
  ctx.seed = r.seed;
  ctx.source = source;
  for (std::size_t i = 0; i < initial.size(); ++i) ctx.figure.push_back(initial.fact(static_cast<int>(i)));
  for (std::size_t k = 0; k < targets.size(); ++k) {
    auto path = build_path(graph, targets[k], registry);
    auto drafts = templatize(path, templates);
    std::vector<std::string> nl = drafts.steps;
    if (config.transcribe && gateway) {
      try {
        nl = transcribe(drafts.steps, gateway);
      } catch (const Error&) {
        ++r.transcription_fallbacks;
      }
    }
    ctx.target_index = static_cast<int>(k);
    auto pairs = make_questions(path, drafts, nl, ctx, templates, config.modes);
    r.pairs.insert(r.pairs.end(), pairs.begin(), pairs.end());
    r.paths.push_back(std::move(path));
  }
}

std::string annotation_text(const MeasureSymbol& s, const ExactValue& v) {
  std::string t = v.str();
  if (auto q = v.as_rational(); q && !q->is_integer()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v.to_double());
    t = buf;
  }
  return s.kind() == MeasureKind::MeasureOfAngle ? t + "\xC2\xB0" : t;
}

}  // namespace

SeedResult process_seed(const Registry& registry, const TemplateSet& templates, const PipelineConfig& config,
                        std::uint64_t seed, Gateway* gateway) {
  SeedResult r;
  r.seed = seed;
  try {
    Diagram d = synthesize_diagram(registry, config.synth, seed);
    State state = d.initial_state(registry);
    Rng rng(derive_seed(seed, 0));
    for (const auto& eq : add_numeric_givens(state, d, registry, config.givens, rng, config.limits)) {
      auto [symbol, value] = *eq.as_assignment();
      d.annotations.push_back({symbol, annotation_text(symbol, value)});
    }
    auto graph = forward_chase(state, registry, config.limits);
    r.svg = render_svg(d);
    r.diagram = std::move(d);
    questions_from_graph(r, graph, state, registry, templates, config, rng, "images/s" + std::to_string(seed) + ".svg",
                         "synth", gateway);
  } catch (const ChaseLimitExceeded& e) {
    r.status = SeedStatus::ChaseLimit;
    r.message = e.what();
    r.pairs.clear();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::UnsatisfiedAfterRetries) throw;
    r.status = SeedStatus::Unsatisfied;
    r.message = e.what();
  }
  return r;
}

SeedResult process_annotation(const Registry& registry, const TemplateSet& templates, const PipelineConfig& config,
                              const std::vector<std::string>& facts, std::uint64_t seed, const std::string& image_ref,
                              Gateway* gateway) {
  SeedResult r;
  r.seed = seed;
  State state;
  for (const auto& f : facts) state.insert(parse_fact(f, registry));
  try {
    auto graph = forward_chase(state, registry, config.limits);
    Rng rng(derive_seed(seed, 0));
    questions_from_graph(r, graph, state, registry, templates, config, rng, image_ref, "expand", gateway);
  } catch (const ChaseLimitExceeded& e) {
    r.status = SeedStatus::ChaseLimit;
    r.message = e.what();
    r.pairs.clear();
  }
  return r;
}

std::vector<SeedResult> run_synth(const Registry& registry, const TemplateSet& templates,
                                  const PipelineConfig& config, std::uint64_t master_seed, std::size_t count,
                                  int workers, Gateway* gateway) {
  std::vector<SeedResult> results(count);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        results[i] = process_seed(registry, templates, config, derive_seed(master_seed, i), gateway);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < std::max(workers, 1); ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return results;
}

}  // namespace geogen
