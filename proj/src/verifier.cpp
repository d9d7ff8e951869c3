#include "geogen/verifier.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace geogen {

// ------------------------------------------------------------ translation

namespace {

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split(const std::string& text, const std::string& sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (auto pos = text.find(sep); pos != std::string::npos; pos = text.find(sep, start)) {
    out.push_back(text.substr(start, pos - start));
    start = pos + sep.size();
  }
  out.push_back(text.substr(start));
  return out;
}

[[noreturn]] void untranslatable(const std::string& text, const std::string& why) {
  throw Error(ErrorCode::TranslationFailed, why + ": \"" + text + "\"");
}

}  // namespace

std::string triple_to_text(const StepTriple& triple) { return triple.text(); }

StepTriple triple_from_text(const std::string& raw, const Registry& registry) {
  std::string text = trim(raw);
  auto parts = split(text, "|");
  if (parts.size() != 3) untranslatable(raw, "expected 'conditions | theorem | conclusion'");
  StepTriple t;
  std::string theorem = trim(parts[1]);
  if (!theorem.empty() && std::all_of(theorem.begin(), theorem.end(), [](unsigned char c) { return std::isdigit(c); })) {
    // Unknown ids survive translation; verification reports them.
    try {
      t.theorem_id = std::stoi(theorem);
    } catch (const std::exception&) {
      untranslatable(raw, "theorem id out of range");
    }
  } else if (theorem == kAlgebraTheoremName) {
    t.theorem_id = kAlgebraTheoremId;
  } else if (const auto* th = registry.find_theorem_by_name(theorem)) {
    t.theorem_id = th->id;
  } else {
    untranslatable(raw, "unknown theorem '" + theorem + "'");
  }
  try {
    for (const auto& c : split(parts[0], ";")) {
      std::string item = trim(c);
      if (!item.empty()) t.conditions.push_back(parse_fact(item, registry));
    }
    t.conclusion = parse_fact(trim(parts[2]), registry);
  } catch (const Error& e) {
    untranslatable(raw, e.what());
  }
  return t;
}

StepTriple RuleTranslator::translate(const std::string& nl_step) { return templates_->parse_step_sentence(nl_step); }

CompletionRequest GatewayTranslator::request(const std::string& nl_step) {
  CompletionRequest r;
  r.id = "translate";
  r.system =
      "Translate one geometry reasoning step into a formal triple. Reply with a single line: the conditions "
      "separated by '; ', then ' | ', the theorem name, then ' | ', the conclusion. Use predicate syntax such as "
      "IsMidpointOfLine(D,AB) and measures such as LengthOfLine(DE)=LengthOfLine(BC)/2. Algebra steps cite "
      "the theorem solve_equations.";
  r.exemplar_user =
      "Since ABC is a triangle, D is the midpoint of AB, E is the midpoint of AC and DE is drawn, by the "
      "definition of a midsegment, DE is a midsegment of triangle ABC.";
  r.exemplar_assistant =
      "Triangle(ABC); IsMidpointOfLine(D,AB); IsMidpointOfLine(E,AC); Line(DE) | midsegment_recognition | "
      "IsMidsegmentOfTriangle(DE,ABC)";
  r.user = nl_step;
  return r;
}

StepTriple GatewayTranslator::translate(const std::string& nl_step) {
  std::string reply;
  try {
    reply = gateway_->complete(request(nl_step)).text;
  } catch (const Error& e) {
    throw Error(ErrorCode::TranslationFailed, std::string("gateway: ") + e.what());
  }
  return triple_from_text(reply.substr(0, reply.find('\n')), *registry_);
}

StepTriple translate_step(const std::string& nl_step, Translator& translator) { return translator.translate(nl_step); }

// ----------------------------------------------------------- verification

std::string_view to_string(VerifyMode mode) { return mode == VerifyMode::Strict ? "strict" : "fast"; }

VerifyMode verify_mode_from_string(std::string_view text) {
  if (text == "strict") return VerifyMode::Strict;
  if (text == "fast") return VerifyMode::Fast;
  throw Error(ErrorCode::InvalidArgument, "mode must be strict or fast, got '" + std::string(text) + "'");
}

std::string_view to_string(VerifyCode code) {
  switch (code) {
    case VerifyCode::Ok: return "Ok";
    case VerifyCode::MissingCondition: return "MissingCondition";
    case VerifyCode::UnknownTheorem: return "UnknownTheorem";
    case VerifyCode::BindingFailure: return "BindingFailure";
    case VerifyCode::ConclusionMismatch: return "ConclusionMismatch";
    case VerifyCode::MissingEntity: return "MissingEntity";
    case VerifyCode::TranslationFailed: return "TranslationFailed";
  }
  return "?";
}

nlohmann::json to_json(const VerifyResult& r) {
  nlohmann::json j{{"valid", r.valid}, {"mode", to_string(r.mode)}};
  if (!r.valid) j["reason"] = {{"code", to_string(r.code)}, {"message", r.message}};
  return j;
}

namespace {

VerifyResult pass(VerifyMode mode) { return {true, mode, VerifyCode::Ok, {}}; }
VerifyResult fail(VerifyMode mode, VerifyCode code, std::string message) {
  return {false, mode, code, std::move(message)};
}

}  // namespace

VerifyResult verify_strict(const State& state, const StepTriple& triple, const Registry& registry) {
  constexpr auto M = VerifyMode::Strict;
  for (const auto& c : triple.conditions) {
    if (!state.contains(c)) return fail(M, VerifyCode::MissingCondition, "condition not established: " + c.key());
  }
  const TheoremDef* theorem = nullptr;
  if (triple.theorem_id != kAlgebraTheoremId) {
    theorem = registry.find_theorem(triple.theorem_id);
    if (!theorem) return fail(M, VerifyCode::UnknownTheorem, "no theorem " + std::to_string(triple.theorem_id));
  }
  State local;
  try {
    for (const auto& c : triple.conditions) local.insert(c, 0);
  } catch (const Error& e) {
    return fail(M, VerifyCode::BindingFailure, e.what());
  }

  if (!theorem) {
    std::vector<Equation> equations;
    for (const auto& c : triple.conditions) {
      if (!c.is_equation()) return fail(M, VerifyCode::BindingFailure, "solver step cites a literal: " + c.key());
      equations.push_back(c.equation());
    }
    if (equations.empty()) return fail(M, VerifyCode::BindingFailure, "solver step without equations");
    try {
      for (const auto& s : solve_equations(equations, {}).steps) {
        if (Fact(s.result()) == triple.conclusion) return pass(M);
      }
    } catch (const Error& e) {
      return fail(M, VerifyCode::BindingFailure, e.what());
    }
    return fail(M, VerifyCode::ConclusionMismatch, "equations do not yield " + triple.conclusion.key());
  }

  auto matches = find_matches(local, *theorem, registry);
  if (matches.empty()) {
    return fail(M, VerifyCode::BindingFailure, "conditions satisfy no binding of " + theorem->name);
  }
  for (const auto& m : matches) {
    if (std::find(m.conclusions.begin(), m.conclusions.end(), triple.conclusion) != m.conclusions.end()) {
      return pass(M);
    }
  }
  return fail(M, VerifyCode::ConclusionMismatch, theorem->name + " does not conclude " + triple.conclusion.key());
}

namespace {

// Entity checks shared by both fast-mode overloads.
template <typename HasPoint, typename Covers>
VerifyResult check_entities(const StepTriple& triple, HasPoint has_point, Covers covers) {
  constexpr auto M = VerifyMode::Fast;
  for (const auto& e : referenced_entities(triple.conclusion)) {
    for (const auto& p : e.points()) {
      if (!has_point(p)) return fail(M, VerifyCode::MissingEntity, "point " + p);
    }
    auto missing_segment = [&](const PointRef& a, const PointRef& b) -> std::optional<VerifyResult> {
      auto s = Entity::make(EntityKind::Segment, {a, b});
      if (covers(s)) return std::nullopt;
      return fail(M, VerifyCode::MissingEntity, "segment " + s.text());
    };
    std::optional<VerifyResult> bad;
    switch (e.kind()) {
      case EntityKind::Point:
      case EntityKind::Circle: break;
      case EntityKind::Segment: bad = missing_segment(e.points()[0], e.points()[1]); break;
      case EntityKind::Angle:
        bad = missing_segment(e.vertex(), e.points()[0]);
        if (!bad) bad = missing_segment(e.vertex(), e.points()[2]);
        break;
      case EntityKind::Polygon:
        for (const auto& side : e.polygon_sides()) {
          if (!bad) bad = missing_segment(side.points()[0], side.points()[1]);
        }
        break;
    }
    if (bad) return *bad;
  }
  return pass(M);
}

}  // namespace

VerifyResult verify_fast(const Diagram& diagram, const StepTriple& triple) {
  return check_entities(
      triple, [&](const PointRef& p) { return diagram.has_point(p); },
      [&](const Entity& s) { return diagram.covers_segment(s); });
}

VerifyResult verify_fast(const State& state, const StepTriple& triple) {
  auto points = state.points();
  // Point sets of drawn lines: Line literals grown by points placed on them,
  // plus the sides of entity polygons.
  std::map<std::string, std::set<PointRef>> lines;
  for (int id : state.literals_of("Line")) {
    const auto& seg = state.fact(id).literal().args()[0];
    lines[seg.text()].insert(seg.points().begin(), seg.points().end());
  }
  for (std::size_t id = 0; id < state.size(); ++id) {
    const Fact& f = state.fact(static_cast<int>(id));
    if (!f.is_literal()) continue;
    const Literal& lit = f.literal();
    if (lit.predicate().kind == PredicateKind::Entity) {
      for (const auto& a : lit.args()) {
        if (a.kind() != EntityKind::Polygon) continue;
        for (const auto& side : a.polygon_sides()) lines[side.text()].insert(side.points().begin(), side.points().end());
      }
    }
  }
  for (const char* on : {"PointOnLine", "IsMidpointOfLine"}) {
    for (int id : state.literals_of(on)) {
      const auto& args = state.fact(id).literal().args();
      auto it = lines.find(args[1].text());
      if (it != lines.end()) it->second.insert(args[0].points()[0]);
    }
  }
  return check_entities(
      triple, [&](const PointRef& p) { return points.count(p) > 0; },
      [&](const Entity& s) {
        return std::any_of(lines.begin(), lines.end(), [&](const auto& l) {
          return l.second.count(s.points()[0]) && l.second.count(s.points()[1]);
        });
      });
}

// ------------------------------------------------------------ tree search

std::vector<std::string> ScriptedGenerator::generate(const std::string&, const std::vector<std::string>&, int k) {
  if (next_ >= script_.calls.size()) return {std::string(kTerminalMarker)};
  const auto& entry = script_.calls[next_++];
  auto n = std::min(entry.size(), static_cast<std::size_t>(std::max(k, 0)));
  return {entry.begin(), entry.begin() + static_cast<std::ptrdiff_t>(n)};
}

CompletionRequest GatewayGenerator::request(const std::string& prompt, const std::vector<std::string>& accepted,
                                            int k) {
  CompletionRequest r;
  r.id = "generate";
  r.system =
      "You solve geometry problems one step at a time. Propose up to " + std::to_string(k) +
      " distinct candidates for the next step, one per line, each a single sentence. Reply with " +
      std::string(kTerminalMarker) + " alone once the solution is complete.";
  r.exemplar_user = "Problem: In triangle ABC, D is the midpoint of AB and E is the midpoint of AC. BC = 8. Find DE.\n"
                    "Steps so far: none";
  r.exemplar_assistant =
      "Since ABC is a triangle, D is the midpoint of AB, E is the midpoint of AC and DE is drawn, by the "
      "definition of a midsegment, DE is a midsegment of triangle ABC.";
  r.user = "Problem: " + prompt + "\nSteps so far:";
  if (accepted.empty()) r.user += " none";
  for (std::size_t i = 0; i < accepted.size(); ++i) r.user += "\n" + std::to_string(i + 1) + ". " + accepted[i];
  return r;
}

std::vector<std::string> GatewayGenerator::generate(const std::string& prompt, const std::vector<std::string>& accepted,
                                                    int k) {
  std::string reply;
  try {
    reply = gateway_->complete(request(prompt, accepted, k)).text;
  } catch (const Error& e) {
    throw Error(ErrorCode::GeneratorError, e.what());
  }
  std::vector<std::string> out;
  for (auto& line : split(reply, "\n")) {
    line = trim(line);
    if (line.empty()) continue;
    if (static_cast<int>(out.size()) == k) break;
    out.push_back(line);
  }
  return out;
}

void SearchConfig::validate() const {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "K must be at least 1");
  if (max_iterations < 1) throw Error(ErrorCode::InvalidArgument, "max_iterations must be at least 1");
}

std::string_view to_string(Termination cause) {
  switch (cause) {
    case Termination::Terminal: return "terminal";
    case Termination::NoValidCandidates: return "no_valid_candidates";
    case Termination::MaxIterations: return "max_iterations";
    case Termination::GeneratorError: return "generator_error";
  }
  return "?";
}

nlohmann::json History::to_json() const {
  nlohmann::json j;
  j["termination"] = to_string(termination);
  if (!error.empty()) j["error"] = error;
  j["accepted"] = nlohmann::json::array();
  for (const auto& a : accepted) {
    j["accepted"].push_back({{"text", a.text}, {"triple", triple_to_text(a.triple)}, {"verdict", geogen::to_json(a.verdict)}});
  }
  j["iterations"] = nlohmann::json::array();
  for (std::size_t i = 0; i < iterations.size(); ++i) {
    nlohmann::json it{{"index", i}, {"selected", selected[i]}, {"candidates", nlohmann::json::array()}};
    for (const auto& c : iterations[i]) {
      it["candidates"].push_back({{"text", c.text},
                                  {"triple", c.triple ? nlohmann::json(triple_to_text(*c.triple)) : nlohmann::json()},
                                  {"verdict", geogen::to_json(c.verdict)}});
    }
    j["iterations"].push_back(std::move(it));
  }
  return j;
}

History tree_search(const SearchProblem& problem, StepGenerator& generator, Translator& translator,
                    const Registry& registry, const SearchConfig& config) {
  config.validate();
  State state;
  for (const auto& g : problem.givens) state.insert(g, 0);
  Rng rng(config.seed);
  History h;
  std::vector<std::string> accepted_text;

  for (int iteration = 0; iteration < config.max_iterations; ++iteration) {
    std::vector<std::string> candidates;
    try {
      candidates = generator.generate(problem.prompt, accepted_text, config.k);
    } catch (const Error& e) {
      h.termination = Termination::GeneratorError;
      h.error = e.what();
      return h;
    }
    if (candidates.empty() || candidates.front() == kTerminalMarker) {
      h.termination = Termination::Terminal;
      return h;
    }
    if (static_cast<int>(candidates.size()) > config.k) candidates.resize(static_cast<std::size_t>(config.k));

    std::vector<CandidateLog> log;
    std::vector<int> valid;
    for (const auto& text : candidates) {
      CandidateLog c{text, std::nullopt, {}};
      try {
        c.triple = translate_step(text, translator);
        if (config.mode == VerifyMode::Strict) {
          c.verdict = verify_strict(state, *c.triple, registry);
        } else {
          c.verdict = problem.diagram ? verify_fast(*problem.diagram, *c.triple) : verify_fast(state, *c.triple);
        }
      } catch (const Error& e) {
        c.verdict = fail(config.mode, VerifyCode::TranslationFailed, e.what());
      }
      if (c.verdict.valid) valid.push_back(static_cast<int>(log.size()));
      log.push_back(std::move(c));
    }
    if (valid.empty()) {
      h.iterations.push_back(std::move(log));
      h.selected.push_back(-1);
      h.termination = Termination::NoValidCandidates;
      return h;
    }
    std::uniform_int_distribution<std::size_t> pick(0, valid.size() - 1);
    int chosen = valid[pick(rng)];
    const auto& c = log[static_cast<std::size_t>(chosen)];
    try {
      state.insert(c.triple->conclusion, iteration + 1);
    } catch (const Error&) {
      // Fast mode admits values the state contradicts; keep the first one.
    }
    h.accepted.push_back({c.text, *c.triple, c.verdict});
    accepted_text.push_back(c.text);
    h.iterations.push_back(std::move(log));
    h.selected.push_back(chosen);
  }
  h.termination = Termination::MaxIterations;
  return h;
}

}  // namespace geogen
