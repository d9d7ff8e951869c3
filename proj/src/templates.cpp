#include "geogen/templates.hpp"

#include <algorithm>

namespace geogen {

std::string StepTriple::text() const {
  std::string out;
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    if (i) out += "; ";
    out += conditions[i].key();
  }
  return out + " | " + std::to_string(theorem_id) + " | " + conclusion.key();
}

StepTriple triple_of(const ReasoningStep& step) { return {step.conditions, step.theorem_id, step.conclusion}; }

namespace {

constexpr std::string_view kEntityPattern = "((?:[A-Z][0-9]*)+)";

bool contains(std::string_view text, std::string_view part) { return text.find(part) != std::string_view::npos; }

void check_phrase_rules(const std::string& what, const std::string& text) {
  for (std::string_view bad : {", ", " and ", "=", ".", ";"}) {
    if (contains(text, bad)) {
      throw Error(ErrorCode::SyntaxError, what + " template '" + text + "' contains '" + std::string(bad) + "'");
    }
  }
  if (text.rfind("by ", 0) == 0) throw Error(ErrorCode::SyntaxError, what + " template starts with 'by '");
}

std::string regex_escape(std::string_view text) {
  static const std::string special = R"(\^$.|?*+()[]{})";
  std::string out;
  for (char c : text) {
    if (special.find(c) != std::string::npos) out += '\\';
    out += c;
  }
  return out;
}

// Replaces {i} with the i-th argument.
std::string fill(const std::string& tmpl, const std::vector<std::string>& args) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl[i] == '{') {
      auto close = tmpl.find('}', i);
      out += args.at(static_cast<std::size_t>(std::stoi(tmpl.substr(i + 1, close - i - 1))));
      i = close;
    } else {
      out += tmpl[i];
    }
  }
  return out;
}

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }

[[noreturn]] void untranslatable(const std::string& text, const std::string& why) {
  throw Error(ErrorCode::TranslationFailed, why + ": \"" + text + "\"");
}

}  // namespace

TemplateSet::TemplateSet(const Registry& registry) : registry_(&registry) {
  for (const auto& [name, def] : registry.predicates()) {
    if (def->kind == PredicateKind::Measure) continue;  // rendered through natural syntax
    if (def->text.empty()) throw Error(ErrorCode::MissingTemplate, "predicate " + name + " has no text");
    check_phrase_rules("predicate " + name, def->text);
    std::string re = "^";
    std::vector<int> seen(def->arity(), 0);
    const std::string& t = def->text;
    std::size_t last = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i] != '{') continue;
      auto close = t.find('}', i);
      if (close == std::string::npos) throw Error(ErrorCode::SyntaxError, "unclosed placeholder in " + name);
      auto slot = static_cast<std::size_t>(std::stoi(t.substr(i + 1, close - i - 1)));
      if (slot >= def->arity()) throw Error(ErrorCode::SyntaxError, "placeholder out of range in " + name);
      ++seen[slot];
      re += regex_escape(t.substr(last, i - last));
      re += "(?:";
      re += kEntityPattern;
      re += ")";
      last = close + 1;
      i = close;
    }
    re += regex_escape(t.substr(last)) + "$";
    if (std::any_of(seen.begin(), seen.end(), [](int n) { return n != 1; })) {
      throw Error(ErrorCode::SyntaxError, "template of " + name + " must use every slot exactly once");
    }
    patterns_.push_back({def.get(), std::regex(re)});
  }
  for (const auto& [id, th] : registry.theorems()) {
    if (th->text.empty()) throw Error(ErrorCode::MissingTemplate, "theorem " + th->name + " has no text");
    if (contains(th->text, ", ") || contains(th->text, ".")) {
      throw Error(ErrorCode::SyntaxError, "theorem text '" + th->text + "' contains ', ' or '.'");
    }
    if (!theorem_by_text_.emplace(th->text, id).second) {
      throw Error(ErrorCode::DuplicateName, "theorem text '" + th->text + "' is not unique");
    }
    theorems_[id] = th->text;
  }
}

std::string TemplateSet::fact_phrase(const Fact& fact) const {
  if (fact.is_equation()) return fact.equation().text(ExprSyntax::Natural);
  const Literal& lit = fact.literal();
  std::vector<std::string> args;
  for (const auto& a : lit.args()) args.push_back(a.text());
  return fill(lit.predicate().text, args);
}

Fact TemplateSet::parse_fact_phrase(const std::string& phrase) const {
  std::vector<Fact> found;
  std::smatch m;
  for (const auto& p : patterns_) {
    if (!std::regex_match(phrase, m, p.regex)) continue;
    // Capture groups follow placeholder order; map them back to slots.
    std::vector<std::string> args(p.predicate->arity());
    const std::string& t = p.predicate->text;
    std::size_t group = 1;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i] != '{') continue;
      auto close = t.find('}', i);
      args[static_cast<std::size_t>(std::stoi(t.substr(i + 1, close - i - 1)))] = m[group++].str();
      i = close;
    }
    std::string text = p.predicate->name + "(";
    for (std::size_t i = 0; i < args.size(); ++i) text += (i ? "," : "") + args[i];
    try {
      found.emplace_back(parse_literal(text + ")", *registry_));
    } catch (const Error&) {
    }
  }
  if (found.size() > 1) untranslatable(phrase, "ambiguous phrase");
  if (found.size() == 1) return found.front();
  if (contains(phrase, "=")) {
    try {
      return Fact(parse_equation(phrase, ExprSyntax::Natural));
    } catch (const Error&) {
    }
  }
  untranslatable(phrase, "no template matches");
}

std::string TemplateSet::join_list(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += i + 1 == items.size() ? " and " : ", ";
    out += items[i];
  }
  return out;
}

std::vector<std::string> TemplateSet::split_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (auto pos = text.find(", "); pos != std::string::npos; pos = text.find(", ", start)) {
    out.push_back(text.substr(start, pos - start));
    start = pos + 2;
  }
  std::string tail = text.substr(start);
  auto pos = tail.rfind(" and ");
  if (pos != std::string::npos) {
    out.push_back(tail.substr(0, pos));
    out.push_back(tail.substr(pos + 5));
  } else {
    out.push_back(tail);
  }
  return out;
}

std::string TemplateSet::step_sentence(const StepTriple& step) const {
  auto phrases = [&](const std::vector<Fact>& facts) {
    std::vector<std::string> out;
    for (const auto& f : facts) out.push_back(fact_phrase(f));
    return join_list(out);
  };
  std::string conclusion = fact_phrase(step.conclusion);
  if (step.theorem_id != kAlgebraTheoremId) {
    auto it = theorems_.find(step.theorem_id);
    if (it == theorems_.end()) {
      throw Error(ErrorCode::MissingTemplate, "no template for theorem " + std::to_string(step.theorem_id));
    }
    return "Since " + phrases(step.conditions) + ", by " + it->second + ", " + conclusion + ".";
  }
  std::vector<Fact> equations, substituted;
  for (const auto& c : step.conditions) {
    bool assignment = c.is_equation() && c.equation().as_assignment();
    if (!c.is_equation()) throw Error(ErrorCode::MissingTemplate, "solver step cites a literal: " + c.key());
    (assignment ? substituted : equations).push_back(c);
  }
  // Equations precede substitutions in the condition list.
  if (equations.empty() ||
      !std::equal(equations.begin(), equations.end(), step.conditions.begin())) {
    throw Error(ErrorCode::MissingTemplate, "solver step conditions out of template order");
  }
  std::string head;
  if (substituted.empty()) {
    head = (equations.size() == 1 ? "Solving " : "Combining ") + phrases(equations);
  } else if (equations.size() == 1) {
    head = "Substituting " + phrases(substituted) + " into " + phrases(equations);
  } else {
    head = "Substituting " + phrases(substituted) + " and combining " + phrases(equations);
  }
  return head + ", we get " + conclusion + ".";
}

StepTriple TemplateSet::parse_step_sentence(const std::string& raw) const {
  std::string s = raw;
  while (!s.empty() && (s.back() == ' ' || s.back() == '\n' || s.back() == '\r')) s.pop_back();
  while (!s.empty() && s.front() == ' ') s.erase(s.begin());
  if (s.empty() || s.back() != '.') untranslatable(raw, "missing final period");
  s.pop_back();
  auto facts = [&](const std::string& list) {
    std::vector<Fact> out;
    for (const auto& item : split_list(list)) out.push_back(parse_fact_phrase(item));
    return out;
  };
  StepTriple t;
  if (starts_with(s, "Since ")) {
    auto by = s.find(", by ");
    if (by == std::string::npos) untranslatable(raw, "no theorem clause");
    auto after = s.find(", ", by + 5);
    if (after == std::string::npos) untranslatable(raw, "no conclusion");
    auto it = theorem_by_text_.find(s.substr(by + 5, after - by - 5));
    if (it == theorem_by_text_.end()) untranslatable(raw, "unknown theorem");
    t.conditions = facts(s.substr(6, by - 6));
    t.theorem_id = it->second;
    t.conclusion = parse_fact_phrase(s.substr(after + 2));
    return t;
  }
  auto get = s.find(", we get ");
  if (get == std::string::npos) untranslatable(raw, "no recognizable step form");
  std::string head = s.substr(0, get);
  t.theorem_id = kAlgebraTheoremId;
  t.conclusion = parse_fact_phrase(s.substr(get + 9));
  std::vector<Fact> equations, substituted;
  if (starts_with(head, "Solving ")) {
    equations = facts(head.substr(8));
  } else if (starts_with(head, "Combining ")) {
    equations = facts(head.substr(10));
  } else if (starts_with(head, "Substituting ")) {
    std::string rest = head.substr(13);
    auto into = rest.find(" into ");
    auto combining = rest.find(" and combining ");
    if (into != std::string::npos) {
      substituted = facts(rest.substr(0, into));
      equations = facts(rest.substr(into + 6));
    } else if (combining != std::string::npos) {
      substituted = facts(rest.substr(0, combining));
      equations = facts(rest.substr(combining + 15));
    } else {
      untranslatable(raw, "substitution without target equation");
    }
  } else {
    untranslatable(raw, "no recognizable step form");
  }
  t.conditions = equations;
  t.conditions.insert(t.conditions.end(), substituted.begin(), substituted.end());
  return t;
}

}  // namespace geogen
