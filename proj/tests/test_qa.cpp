#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "geogen/qa.hpp"
#include "oracles.hpp"

using namespace geogen;

namespace {

const Registry& reg() { return core_registry(); }
const TemplateSet& templates() {
  static TemplateSet t(reg());
  return t;
}

DeductionGraph midsegment_graph() {
  return forward_chase(oracle::make_state({"Triangle(ABC)", "Line(AB)", "Line(BC)", "Line(CA)", "IsMidpointOfLine(D,AB)",
                                           "IsMidpointOfLine(E,AC)", "Line(DE)", "LengthOfLine(BC)=8"},
                                          reg()),
                       reg());
}

ReasoningPath path_to(const DeductionGraph& g, const std::string& fact) {
  return build_path(g, *g.find(parse_fact(fact, reg()).key()), reg());
}

QuestionContext context_for(const DeductionGraph& g) {
  QuestionContext ctx;
  ctx.image_ref = "images/s1.svg";
  ctx.seed = 1;
  for (int id : g.nodes_at_layer(0)) ctx.figure.push_back(g.state().fact(id));
  return ctx;
}

std::string read(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

QAPair record(std::uint64_t seed, const std::string& id, const std::string& signature, const std::string& q) {
  QAPair p;
  p.seed = seed;
  p.id = id;
  p.signature = signature;
  p.question = q;
  p.answer = "1";
  p.image_ref = "images/s" + std::to_string(seed) + ".svg";
  return p;
}

// Rewrites every numbered line, keeping the numbering.
Script rewriting_script(std::size_t lines) {
  Script s;
  std::string text;
  for (std::size_t i = 0; i < lines; ++i) text += (i ? "\n" : "") + std::to_string(i + 1) + ". Rewritten step.";
  s.calls.push_back({text});
  return s;
}

GatewayConfig offline() {
  GatewayConfig c;
  c.token_env.clear();
  return c;
}

}  // namespace

TEST_CASE("templates cover the registry and render fixed sentences") {
  auto g = midsegment_graph();
  auto path = path_to(g, "LengthOfLine(DE)=4");
  auto drafts = templatize(path, templates());
  REQUIRE(drafts.steps.size() == 3);
  CHECK(drafts.steps[0] ==
        "Since ABC is a triangle, D is the midpoint of AB, E is the midpoint of AC and DE is drawn, by the definition "
        "of a midsegment, DE is a midsegment of triangle ABC.");
  CHECK(drafts.steps[1] ==
        "Since DE is a midsegment of triangle ABC, D is the midpoint of AB and E is the midpoint of AC, by the "
        "midsegment theorem, DE = BC/2.");
  CHECK(drafts.steps[2] == "Substituting BC = 8 into DE = BC/2, we get DE = 4.");
  CHECK(drafts.target_phrase == "the length of DE");

  ReasoningPath foreign = path;
  foreign.steps[0].theorem_id = 99;
  CHECK_THROWS_AS(templatize(foreign, templates()), Error);
  try {
    templatize(foreign, templates());
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingTemplate);
  }
}

TEST_CASE("every predicate phrase inverts exactly") {
  Rng rng(5);
  for (const auto& [name, def] : reg().predicates()) {
    if (def->kind == PredicateKind::Measure) continue;
    // Distinct points per slot, so canonicalization never fails.
    std::vector<std::string> args;
    std::size_t next = 0;
    for (const auto& slot : def->slots) {
      std::size_t n = slot.vars.empty() ? 3 : slot.vars.size();
      std::vector<PointRef> pts;
      for (std::size_t i = 0; i < n; ++i) pts.push_back(point_name(next++ + (i % 2 ? 27 : 0)));
      args.push_back(join_points(pts));
    }
    std::string text = name + "(";
    for (std::size_t i = 0; i < args.size(); ++i) text += (i ? "," : "") + args[i];
    Fact f(parse_literal(text + ")", reg()));
    CHECK(templates().parse_fact_phrase(templates().fact_phrase(f)) == f);
  }
  for (const char* eq : {"LengthOfLine(AB)=5", "MeasureOfAngle(ABC)+MeasureOfAngle(BCA)=180",
                         "AreaOfPolygon(ABCD)=LengthOfLine(AB)^2", "LengthOfLine(A1B)=sqrt(2)*3/4"}) {
    Fact f(parse_equation(eq));
    CHECK(templates().parse_fact_phrase(templates().fact_phrase(f)) == f);
  }
  CHECK_THROWS_AS(templates().parse_fact_phrase("the moon is cheese"), Error);
}

TEST_CASE("step sentences invert on random paths") {
  int checked = 0;
  for (std::uint64_t seed = 1; seed <= 150; ++seed) {
    auto g = forward_chase(oracle::make_state(oracle::random_initial_state(seed), reg()), reg());
    TargetFilter f;
    f.max_count = 3;
    Rng rng(seed);
    std::vector<int> targets;
    try {
      targets = select_targets(g, reg(), f, rng);
    } catch (const Error&) {
      continue;
    }
    for (int t : targets) {
      for (const auto& step : build_path(g, t, reg()).steps) {
        auto triple = triple_of(step);
        auto sentence = templates().step_sentence(triple);
        CHECK_MESSAGE(templates().parse_step_sentence(sentence) == triple, sentence);
        ++checked;
      }
    }
  }
  CHECK(checked > 300);
  CHECK_THROWS_AS(templates().parse_step_sentence("Because reasons."), Error);
}

TEST_CASE("list joining") {
  CHECK(TemplateSet::join_list({}).empty());
  CHECK(TemplateSet::join_list({"a"}) == "a");
  CHECK(TemplateSet::join_list({"a", "b", "c"}) == "a, b and c");
  CHECK(TemplateSet::split_list("a, b and c") == std::vector<std::string>{"a", "b", "c"});
  CHECK(TemplateSet::split_list("a") == std::vector<std::string>{"a"});
}

TEST_CASE("transcription") {
  std::vector<std::string> drafts = {"Since X, by T, Y.", "Solving A = 2, we get A = 2."};
  CHECK(transcribe(drafts, nullptr) == drafts);

  Gateway echo(offline(), std::make_shared<EchoBackend>());
  CHECK(transcribe(drafts, &echo) == drafts);

  Gateway scripted(offline(), std::make_shared<ScriptedBackend>(rewriting_script(2)));
  auto polished = transcribe(drafts, &scripted);
  CHECK(polished.size() == drafts.size());
  CHECK(polished != drafts);
  CHECK(polished[0] == "Rewritten step.");

  Gateway wrong(offline(), std::make_shared<ScriptedBackend>(rewriting_script(3)));
  CHECK_THROWS_AS(transcribe(drafts, &wrong), Error);
  try {
    Gateway short_reply(offline(), std::make_shared<ScriptedBackend>(rewriting_script(1)));
    transcribe(drafts, &short_reply);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::GatewayError);
  }
  auto request = transcription_request(drafts);
  CHECK(request.user == "1. Since X, by T, Y.\n2. Solving A = 2, we get A = 2.");
  CHECK_FALSE(request.exemplar_user.empty());
}

TEST_CASE("question variants") {
  auto g = midsegment_graph();
  auto ctx = context_for(g);

  SUBCASE("numeric target, described and target-only") {
    auto path = path_to(g, "LengthOfLine(DE)=4");
    auto drafts = templatize(path, templates());
    QuestionModes modes{true, true, false};
    auto pairs = make_questions(path, drafts, drafts.steps, ctx, templates(), modes);
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].id == "s1-t0-a");
    CHECK(pairs[1].id == "s1-t0-b");
    CHECK(pairs[0].question ==
          "In the figure, ABC is a triangle, D is the midpoint of AB and E is the midpoint of AC. Given BC = 8, find "
          "the length of DE.");
    CHECK(pairs[1].question == "As shown in the figure, find the length of DE.");
    CHECK(pairs[0].figure_description.has_value());
    CHECK_FALSE(pairs[1].figure_description.has_value());
    auto a = qa_to_json(pairs[0]), b = qa_to_json(pairs[1]);
    for (auto* j : {&a, &b}) {
      j->erase("question");
      j->erase("id");
      j->erase("figure_description");
    }
    CHECK(a == b);
    CHECK(pairs[0].answer == "4");
    CHECK(pairs[0].signature == "10-11-0");
    CHECK(pairs[0].solution_nl.size() == pairs[0].solution_formal.size());
    CHECK(make_questions(path, drafts, drafts.steps, ctx, templates(), QuestionModes{false, false, true}).empty());
  }
  SUBCASE("relation target, proof style") {
    auto path = path_to(g, "IsMidsegmentOfTriangle(DE,ABC)");
    auto drafts = templatize(path, templates());
    auto pairs = make_questions(path, drafts, drafts.steps, ctx, templates(), QuestionModes{false, false, true});
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].id == "s1-t0-c");
    CHECK(pairs[0].answer == "IsMidsegmentOfTriangle(DE,ABC)");
    CHECK(pairs[0].question.find("prove that DE is a midsegment of triangle ABC.") != std::string::npos);
  }
  SUBCASE("no modes") {
    auto path = path_to(g, "LengthOfLine(DE)=4");
    auto drafts = templatize(path, templates());
    CHECK(make_questions(path, drafts, drafts.steps, ctx, templates(), QuestionModes{false, false, false}).empty());
  }
  SUBCASE("length mismatch") {
    auto path = path_to(g, "LengthOfLine(DE)=4");
    auto drafts = templatize(path, templates());
    CHECK_THROWS_AS(make_questions(path, drafts, {"one"}, ctx, templates(), QuestionModes{}), Error);
  }
}

TEST_CASE("dedup and cap") {
  SUBCASE("cap per signature") {
    std::vector<QAPair> pairs;
    for (int i = 0; i < 500; ++i) pairs.push_back(record(static_cast<std::uint64_t>(500 - i), "x", "1-2", "q" + std::to_string(i)));
    auto kept = dedup_and_cap(pairs, 400);
    CHECK(kept.size() == 400);
    // The earliest seeds survive.
    CHECK(kept.front().seed == 1);
    CHECK(kept.back().seed == 400);
  }
  SUBCASE("unique signatures unchanged") {
    std::vector<QAPair> pairs;
    for (int i = 0; i < 50; ++i) pairs.push_back(record(static_cast<std::uint64_t>(i), "x", std::to_string(i), "q"));
    CHECK(dedup_and_cap(pairs, 1).size() == 50);
  }
  SUBCASE("identical records") {
    auto p = record(3, "s3-t0-a", "7", "same");
    auto kept = dedup_and_cap({p, p}, 400);
    CHECK(kept.size() == 1);
  }
  SUBCASE("bad cap") { CHECK_THROWS_AS(dedup_and_cap({}, 0), Error); }
}

TEST_CASE("export") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "geogen_export_test";
  fs::remove_all(dir);
  auto g = midsegment_graph();
  auto path = path_to(g, "LengthOfLine(DE)=4");
  auto drafts = templatize(path, templates());
  std::vector<QAPair> pairs;
  for (int k = 0; k < 5; ++k) {
    auto ctx = context_for(g);
    ctx.target_index = k;
    auto more = make_questions(path, drafts, drafts.steps, ctx, templates(), QuestionModes{});
    pairs.insert(pairs.end(), more.begin(), more.end());
  }
  REQUIRE(pairs.size() == 10);
  auto summary = export_dataset(pairs, dir.string(), {{"images/s1.svg", "<svg/>"}});
  CHECK(summary.records == 10);
  std::string first = read(summary.jsonl_path);
  CHECK(std::count(first.begin(), first.end(), '\n') == 10);
  auto manifest = nlohmann::json::parse(read(summary.manifest_path));
  CHECK(manifest["records"] == 10);
  int total = 0;
  for (const auto& h : manifest["step_histogram"]) total += h["count"].get<int>();
  CHECK(total == 10);
  CHECK(fs::exists(dir / "images" / "s1.svg"));
  export_dataset(pairs, dir.string(), {{"images/s1.svg", "<svg/>"}});
  CHECK(read(summary.jsonl_path) == first);
  for (const auto& line : {first.substr(0, first.find('\n'))}) {
    auto j = nlohmann::json::parse(line);
    CHECK(j["solution_nl"].size() == j["solution_formal"].size());
    CHECK(j["meta"]["signature"] == "10-11-0");
  }
  fs::remove_all(dir);
  CHECK_THROWS_AS(export_dataset(pairs, "/proc/geogen-cannot-write"), Error);
}

TEST_CASE("pipeline is deterministic across worker counts") {
  PipelineConfig cfg;
  cfg.filter.max_count = 3;
  auto one = run_synth(reg(), templates(), cfg, 11, 24, 1, nullptr);
  auto three = run_synth(reg(), templates(), cfg, 11, 24, 3, nullptr);
  REQUIRE(one.size() == three.size());
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].seed == derive_seed(11, i));
    CHECK(one[i].svg == three[i].svg);
    REQUIRE(one[i].pairs.size() == three[i].pairs.size());
    for (std::size_t k = 0; k < one[i].pairs.size(); ++k) {
      CHECK(qa_to_json(one[i].pairs[k]) == qa_to_json(three[i].pairs[k]));
      CHECK(one[i].pairs[k].solution_nl.size() == one[i].pairs[k].solution_formal.size());
    }
    pairs += one[i].pairs.size();
  }
  CHECK(pairs > 24);
}

TEST_CASE("numeric givens are drawn on the image") {
  PipelineConfig cfg;
  auto r = process_seed(reg(), templates(), cfg, derive_seed(3, 0), nullptr);
  REQUIRE(r.status == SeedStatus::Ok);
  REQUIRE(r.diagram.has_value());
  CHECK(!r.diagram->annotations.empty());
  for (const auto& a : r.diagram->annotations) CHECK(r.svg.find(">" + a.text + "<") != std::string::npos);
}

TEST_CASE("expand from a formal annotation") {
  PipelineConfig cfg;
  auto r = process_annotation(reg(), templates(), cfg,
                              {"RightTriangle(ABC)", "Triangle(ABC)", "Line(AB)", "Line(BC)", "Line(CA)",
                               "LengthOfLine(AB)=3", "LengthOfLine(BC)=4"},
                              5, "images/problem5.png", nullptr);
  REQUIRE(r.status == SeedStatus::Ok);
  REQUIRE(!r.pairs.empty());
  for (const auto& p : r.pairs) {
    CHECK(p.source == "expand");
    CHECK(p.image_ref == "images/problem5.png");
  }
}
