#include "geogen/registry.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "geogen/error.hpp"
#include "geogen/expr.hpp"

#ifndef GEOGEN_DATA_DIR
#define GEOGEN_DATA_DIR "data"
#endif

namespace geogen {

std::string_view to_string(PredicateKind kind) {
  switch (kind) {
    case PredicateKind::Entity: return "entity";
    case PredicateKind::Relation: return "relation";
    case PredicateKind::Measure: return "measure";
  }
  return "?";
}

std::string LiteralPattern::text() const {
  std::string out = predicate + "(";
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) out += ',';
    for (const auto& v : args[i].vars) out += "?" + v;
  }
  return out + ")";
}

std::vector<Var> PredicateDef::vars() const {
  std::set<Var> all;
  for (const auto& s : slots) all.insert(s.vars.begin(), s.vars.end());
  return {all.begin(), all.end()};
}

std::vector<Var> TheoremDef::vars() const {
  std::vector<Var> out;
  for (const auto& p : premises) {
    for (const auto& a : p.args) {
      for (const auto& v : a.vars) {
        if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
      }
    }
  }
  return out;
}

std::optional<std::size_t> constraint_primitive_arity(std::string_view primitive) {
  static const std::map<std::string, std::size_t, std::less<>> kArity = {
      {"midpoint", 3},   // m, a, b
      {"parallel", 4},   // ab || cd
      {"perp", 4},       // ab _|_ cd
      {"eqlen", 4},      // |ab| = |cd|
      {"collinear", 3},  // a, b, c on one line
      {"between", 3},    // p strictly inside segment ab (inequality)
      {"bisectfoot", 4}, // d on ac with ad:dc = ba:bc, args d, b, a, c
      {"offline", 3},    // p at least min_separation away from line ab (inequality)
  };
  auto it = kArity.find(primitive);
  if (it == kArity.end()) return std::nullopt;
  return it->second;
}

std::string substitute_vars(std::string_view pattern, const std::function<std::string(const Var&)>& resolve) {
  std::string out;
  std::size_t i = 0;
  while (i < pattern.size()) {
    if (pattern[i] != '?') {
      out += pattern[i++];
      continue;
    }
    std::size_t j = i + 1;
    while (j < pattern.size() && (std::islower(static_cast<unsigned char>(pattern[j])) ||
                                  std::isdigit(static_cast<unsigned char>(pattern[j])) || pattern[j] == '_')) {
      ++j;
    }
    out += resolve(std::string(pattern.substr(i + 1, j - i - 1)));
    i = j;
  }
  return out;
}

// ---------------------------------------------------------------------------

const PredicateDef* Registry::find_predicate(std::string_view name) const {
  auto it = predicates_.find(name);
  return it == predicates_.end() ? nullptr : it->second.get();
}

const PredicateDef& Registry::predicate(std::string_view name) const {
  const auto* p = find_predicate(name);
  if (!p) throw Error(ErrorCode::UnknownPredicate, "unknown predicate '" + std::string(name) + "'");
  return *p;
}

std::shared_ptr<const PredicateDef> Registry::predicate_ptr(std::string_view name) const {
  auto it = predicates_.find(name);
  if (it == predicates_.end()) {
    throw Error(ErrorCode::UnknownPredicate, "unknown predicate '" + std::string(name) + "'");
  }
  return it->second;
}

const TheoremDef* Registry::find_theorem(int id) const {
  auto it = theorems_.find(id);
  return it == theorems_.end() ? nullptr : it->second.get();
}

const TheoremDef* Registry::find_theorem_by_name(std::string_view name) const {
  for (const auto& [id, t] : theorems_) {
    if (t->name == name) return t.get();
  }
  return nullptr;
}

std::vector<const PredicateDef*> Registry::predicates_of_kind(PredicateKind kind) const {
  std::vector<const PredicateDef*> out;
  for (const auto& [name, p] : predicates_) {
    if (p->kind == kind) out.push_back(p.get());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Registry file parsing

namespace {


[[noreturn]] void syntax_error(int line, const std::string& message) {
  throw Error(ErrorCode::SyntaxError, "line " + std::to_string(line) + ": " + message);
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// Splits on `sep` outside parentheses, brackets and quotes.
std::vector<std::string> split_top(std::string_view s, char sep) {
  std::vector<std::string> parts;
  int depth = 0;
  bool quoted = false;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == '"') quoted = !quoted;
    if (quoted) continue;
    if (c == '(' || c == '[') ++depth;
    if (c == ')' || c == ']') --depth;
    if (c == sep && depth == 0) {
      parts.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  parts.push_back(trim(s.substr(start)));
  if (parts.size() == 1 && parts[0].empty()) parts.clear();
  return parts;
}

std::vector<Var> parse_var_run(std::string_view text, int line) {
  std::vector<Var> vars;
  std::size_t i = 0;
  std::string t = trim(text);
  while (i < t.size()) {
    if (t[i] != '?') syntax_error(line, "expected '?var' in '" + t + "'");
    std::size_t j = i + 1;
    while (j < t.size() &&
           (std::islower(static_cast<unsigned char>(t[j])) || std::isdigit(static_cast<unsigned char>(t[j])) || t[j] == '_')) {
      ++j;
    }
    if (j == i + 1) syntax_error(line, "empty variable name in '" + t + "'");
    vars.push_back(t.substr(i + 1, j - i - 1));
    i = j;
  }
  return vars;
}

// Attributes are key=value with value one of [..], ".." or a bare token.
std::map<std::string, std::string> parse_attributes(std::string_view s, int line) {
  std::map<std::string, std::string> attrs;
  std::size_t i = 0;
  auto skip = [&] {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  };
  for (;;) {
    skip();
    if (i >= s.size()) break;
    std::size_t k = i;
    while (i < s.size() && s[i] != '=' && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::string key(s.substr(k, i - k));
    if (i >= s.size() || s[i] != '=') syntax_error(line, "expected '=' after '" + key + "'");
    ++i;
    std::string value;
    if (i < s.size() && s[i] == '[') {
      int depth = 0;
      std::size_t start = i + 1;
      for (; i < s.size(); ++i) {
        if (s[i] == '[') ++depth;
        if (s[i] == ']' && --depth == 0) break;
      }
      if (i >= s.size()) syntax_error(line, "unterminated '[' in attribute '" + key + "'");
      value = std::string(s.substr(start, i - start));
      ++i;
    } else if (i < s.size() && s[i] == '"') {
      std::size_t start = ++i;
      while (i < s.size() && s[i] != '"') ++i;
      if (i >= s.size()) syntax_error(line, "unterminated string in attribute '" + key + "'");
      value = std::string(s.substr(start, i - start));
      ++i;
    } else {
      std::size_t start = i;
      while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
      value = std::string(s.substr(start, i - start));
    }
    if (attrs.count(key)) syntax_error(line, "duplicate attribute '" + key + "'");
    attrs[key] = value;
  }
  return attrs;
}

struct RawPattern {
  std::string name;
  std::vector<std::string> args;
};

RawPattern split_call(std::string_view text, int line) {
  std::string t = trim(text);
  auto open = t.find('(');
  if (open == std::string::npos || t.back() != ')') syntax_error(line, "expected Name(...) in '" + t + "'");
  RawPattern raw;
  raw.name = trim(t.substr(0, open));
  raw.args = split_top(std::string_view(t).substr(open + 1, t.size() - open - 2), ',');
  return raw;
}

struct PendingPattern {
  RawPattern raw;
  int line;
};

struct Draft {
  std::map<std::string, std::shared_ptr<PredicateDef>> predicates;
  std::map<int, std::shared_ptr<TheoremDef>> theorems;
};

LiteralPattern resolve_pattern(const RawPattern& raw, int line,
                               const std::map<std::string, std::shared_ptr<PredicateDef>>& predicates) {
  auto it = predicates.find(raw.name);
  if (it == predicates.end()) {
    throw Error(ErrorCode::DanglingReference,
                "line " + std::to_string(line) + ": unknown predicate '" + raw.name + "'");
  }
  const PredicateDef& def = *it->second;
  if (raw.args.size() != def.arity()) {
    throw Error(ErrorCode::ArityMismatch, "line " + std::to_string(line) + ": " + raw.name + " takes " +
                                              std::to_string(def.arity()) + " arguments");
  }
  LiteralPattern p;
  p.predicate = raw.name;
  for (std::size_t i = 0; i < raw.args.size(); ++i) {
    EntityPattern ep;
    ep.kind = def.slots[i].kind;
    ep.vars = parse_var_run(raw.args[i], line);
    std::size_t want = fixed_point_count(ep.kind);
    if ((want != 0 && ep.vars.size() != want) || (want == 0 && ep.vars.size() < 3)) {
      throw Error(ErrorCode::MalformedEntity, "line " + std::to_string(line) + ": argument " +
                                                  std::to_string(i + 1) + " of " + raw.name + " has wrong point count");
    }
    p.args.push_back(std::move(ep));
  }
  return p;
}

void require_declared(const std::vector<Var>& used, const std::set<Var>& declared, int line, const std::string& where) {
  for (const auto& v : used) {
    if (!declared.count(v)) syntax_error(line, where + " uses undeclared variable '?" + v + "'");
  }
}

std::string dummy_point(std::size_t i) {
  std::string name(1, static_cast<char>('A' + i % 26));
  if (i >= 26) name += std::to_string(i / 26);
  return name;
}

// Validates an equation pattern and returns the variables it uses.
std::vector<Var> check_equation_pattern(const std::string& pattern, int line, const Draft& draft) {
  std::vector<Var> used;
  std::string concrete = substitute_vars(pattern, [&](const Var& v) {
    auto it = std::find(used.begin(), used.end(), v);
    std::size_t idx = static_cast<std::size_t>(it - used.begin());
    if (it == used.end()) used.push_back(v);
    return dummy_point(idx);
  });
  Equation eq;
  try {
    eq = parse_equation(concrete);
  } catch (const Error& e) {
    syntax_error(line, "bad equation '" + pattern + "': " + e.what());
  }
  for (const auto& s : eq.symbols()) {
    if (!draft.predicates.count(std::string(to_string(s.kind())))) {
      throw Error(ErrorCode::DanglingReference, "line " + std::to_string(line) + ": measure '" +
                                                    std::string(to_string(s.kind())) + "' is not a registered predicate");
    }
  }
  return used;
}

}  // namespace

Registry load_registry(std::string_view definition_text) {
  Draft draft;
  // Patterns are resolved after all predicates are known.
  struct PredPending {
    std::shared_ptr<PredicateDef> def;
    std::vector<PendingPattern> constructs;
    std::vector<PendingPattern> requires_;
    int line;
  };
  struct TheoremPending {
    std::shared_ptr<TheoremDef> def;
    std::vector<PendingPattern> premises;
    std::vector<PendingPattern> conclusions;
    int line;
  };
  std::vector<PredPending> pred_pending;
  std::vector<TheoremPending> thm_pending;

  std::istringstream in{std::string(definition_text)};
  std::string raw_line;
  int line_no = 0;
  while (std::getline(in, raw_line)) {
    ++line_no;
    // Strip comments outside quotes.
    bool quoted = false;
    for (std::size_t i = 0; i < raw_line.size(); ++i) {
      if (raw_line[i] == '"') quoted = !quoted;
      if (raw_line[i] == '#' && !quoted) {
        raw_line.resize(i);
        break;
      }
    }
    std::string line = trim(raw_line);
    if (line.empty()) continue;

    if (line.rfind("predicate ", 0) == 0) {
      std::string rest = trim(std::string_view(line).substr(10));
      auto open = rest.find('(');
      if (open == std::string::npos) syntax_error(line_no, "expected '(' after predicate name");
      int depth = 0;
      std::size_t close = std::string::npos;
      for (std::size_t i = open; i < rest.size(); ++i) {
        if (rest[i] == '(') ++depth;
        if (rest[i] == ')' && --depth == 0) {
          close = i;
          break;
        }
      }
      if (close == std::string::npos) syntax_error(line_no, "unbalanced parentheses");
      auto def = std::make_shared<PredicateDef>();
      def->name = trim(std::string_view(rest).substr(0, open));
      if (def->name.empty() || !std::isupper(static_cast<unsigned char>(def->name[0]))) {
        syntax_error(line_no, "predicate names start with an uppercase letter");
      }
      std::set<Var> declared;
      for (const auto& slot_text : split_top(std::string_view(rest).substr(open + 1, close - open - 1), ',')) {
        SlotDef slot;
        auto colon = slot_text.find(':');
        std::string kind_name = trim(std::string_view(slot_text).substr(0, colon));
        try {
          slot.kind = entity_kind_from_string(kind_name);
        } catch (const Error&) {
          syntax_error(line_no, "unknown slot kind '" + kind_name + "'");
        }
        if (colon != std::string::npos) {
          slot.vars = parse_var_run(std::string_view(slot_text).substr(colon + 1), line_no);
          std::size_t want = fixed_point_count(slot.kind);
          if ((want != 0 && slot.vars.size() != want) || (want == 0 && slot.vars.size() < 3)) {
            syntax_error(line_no, "slot '" + slot_text + "' has the wrong number of points");
          }
          // Slots may share variables; a slot may not repeat one.
          std::set<Var> in_slot(slot.vars.begin(), slot.vars.end());
          if (in_slot.size() != slot.vars.size()) syntax_error(line_no, "slot '" + slot_text + "' repeats a variable");
          declared.insert(in_slot.begin(), in_slot.end());
        }
        def->slots.push_back(std::move(slot));
      }
      auto attrs = parse_attributes(std::string_view(rest).substr(close + 1), line_no);
      PredPending pending{def, {}, {}, line_no};
      for (const auto& [key, value] : attrs) {
        if (key == "kind") {
          if (value == "entity") def->kind = PredicateKind::Entity;
          else if (value == "relation") def->kind = PredicateKind::Relation;
          else if (value == "measure") def->kind = PredicateKind::Measure;
          else syntax_error(line_no, "unknown kind '" + value + "'");
        } else if (key == "flags") {
          for (const auto& f : split_top(value, ',')) {
            if (f == "reflect") def->reflect = true;
            else if (f == "symmetric") def->symmetric = true;
            else syntax_error(line_no, "unknown flag '" + f + "'");
          }
        } else if (key == "sample") {
          if (value != "yes" && value != "no") syntax_error(line_no, "sample must be yes or no");
          def->sample = value == "yes";
        } else if (key == "constraints") {
          for (const auto& c : split_top(value, ',')) {
            auto call = split_call(c, line_no);
            auto arity = constraint_primitive_arity(call.name);
            if (!arity) syntax_error(line_no, "unknown constraint primitive '" + call.name + "'");
            ConstraintTemplate ct;
            ct.primitive = call.name;
            for (const auto& a : call.args) {
              auto vs = parse_var_run(a, line_no);
              ct.points.insert(ct.points.end(), vs.begin(), vs.end());
            }
            if (ct.points.size() != *arity) {
              syntax_error(line_no, call.name + " takes " + std::to_string(*arity) + " points");
            }
            require_declared(ct.points, declared, line_no, "constraint " + call.name);
            def->constraints.push_back(std::move(ct));
          }
        } else if (key == "constructs") {
          for (const auto& c : split_top(value, ',')) pending.constructs.push_back({split_call(c, line_no), line_no});
        } else if (key == "plot") {
          PlotSpec plot;
          for (const auto& item : split_top(value, ';')) {
            if (item.rfind("fresh ", 0) == 0) {
              for (const auto& v : split_top(std::string_view(item).substr(6), ',')) {
                auto vs = parse_var_run(v, line_no);
                plot.fresh.insert(plot.fresh.end(), vs.begin(), vs.end());
              }
            } else if (item.rfind("point ", 0) == 0) {
              for (const auto& v : split_top(std::string_view(item).substr(6), ',')) {
                auto vs = parse_var_run(v, line_no);
                plot.any_point.insert(plot.any_point.end(), vs.begin(), vs.end());
              }
            } else {
              for (const auto& c : split_top(item, ',')) pending.requires_.push_back({split_call(c, line_no), line_no});
            }
          }
          require_declared(plot.fresh, declared, line_no, "plot");
          require_declared(plot.any_point, declared, line_no, "plot");
          def->plot = std::move(plot);
        } else if (key == "text") {
          def->text = value;
        } else {
          syntax_error(line_no, "unknown predicate attribute '" + key + "'");
        }
      }
      if (def->symmetric && (def->slots.size() != 2 || def->slots[0].kind != def->slots[1].kind)) {
        syntax_error(line_no, "symmetric predicates need two slots of the same kind");
      }
      if (draft.predicates.count(def->name)) {
        throw Error(ErrorCode::DuplicateName, "line " + std::to_string(line_no) + ": predicate '" + def->name + "' defined twice");
      }
      draft.predicates[def->name] = def;
      pred_pending.push_back(std::move(pending));
    } else if (line.rfind("theorem ", 0) == 0) {
      std::string rest = trim(std::string_view(line).substr(8));
      auto colon = rest.find(':');
      if (colon == std::string::npos) syntax_error(line_no, "expected ':' after theorem name");
      std::istringstream head(rest.substr(0, colon));
      auto def = std::make_shared<TheoremDef>();
      std::string id_text;
      head >> id_text >> def->name;
      std::string extra;
      if (id_text.empty() || def->name.empty() || (head >> extra)) syntax_error(line_no, "expected 'theorem <id> <name>:'");
      char* end = nullptr;
      long id = std::strtol(id_text.c_str(), &end, 10);
      if (*end != '\0' || id <= 0) syntax_error(line_no, "theorem ids are positive integers");
      def->id = static_cast<int>(id);
      auto attrs = parse_attributes(std::string_view(rest).substr(colon + 1), line_no);
      TheoremPending pending{def, {}, {}, line_no};
      auto split_sections = [&](const std::string& value, std::vector<PendingPattern>& lits,
                                std::vector<std::string>& eqs) {
        auto sections = split_top(value, ';');
        if (sections.size() > 2) syntax_error(line_no, "at most one ';' separates literals from equations");
        if (!sections.empty()) {
          for (const auto& c : split_top(sections[0], ',')) lits.push_back({split_call(c, line_no), line_no});
        }
        if (sections.size() == 2) {
          for (const auto& e : split_top(sections[1], ',')) eqs.push_back(e);
        }
      };
      for (const auto& [key, value] : attrs) {
        if (key == "premises") split_sections(value, pending.premises, def->algebraic_premises);
        else if (key == "conclusions") split_sections(value, pending.conclusions, def->conclusion_equations);
        else if (key == "text") def->text = value;
        else syntax_error(line_no, "unknown theorem attribute '" + key + "'");
      }
      if (draft.theorems.count(def->id)) {
        throw Error(ErrorCode::DuplicateName, "line " + std::to_string(line_no) + ": theorem id " + std::to_string(def->id) + " used twice");
      }
      for (const auto& [tid, t] : draft.theorems) {
        if (t->name == def->name) {
          throw Error(ErrorCode::DuplicateName, "line " + std::to_string(line_no) + ": theorem name '" + def->name + "' used twice");
        }
      }
      draft.theorems[def->id] = def;
      thm_pending.push_back(std::move(pending));
    } else {
      syntax_error(line_no, "expected 'predicate' or 'theorem'");
    }
  }

  for (auto& p : pred_pending) {
    std::set<Var> declared;
    for (const auto& s : p.def->slots) declared.insert(s.vars.begin(), s.vars.end());
    for (const auto& c : p.constructs) {
      auto lp = resolve_pattern(c.raw, c.line, draft.predicates);
      for (const auto& a : lp.args) require_declared(a.vars, declared, c.line, "constructs");
      p.def->constructs.push_back(std::move(lp));
    }
    for (const auto& c : p.requires_) {
      auto lp = resolve_pattern(c.raw, c.line, draft.predicates);
      for (const auto& a : lp.args) require_declared(a.vars, declared, c.line, "plot");
      p.def->plot->requires_.push_back(std::move(lp));
    }
  }
  for (auto& t : thm_pending) {
    for (const auto& c : t.premises) t.def->premises.push_back(resolve_pattern(c.raw, c.line, draft.predicates));
    for (const auto& c : t.conclusions) t.def->conclusions.push_back(resolve_pattern(c.raw, c.line, draft.predicates));
    auto vars = t.def->vars();
    std::set<Var> bound(vars.begin(), vars.end());
    for (const auto& e : t.def->algebraic_premises) {
      require_declared(check_equation_pattern(e, t.line, draft), bound, t.line, "algebraic premise");
    }
    for (const auto& c : t.def->conclusions) {
      for (const auto& a : c.args) require_declared(a.vars, bound, t.line, "conclusion");
    }
    for (const auto& e : t.def->conclusion_equations) {
      require_declared(check_equation_pattern(e, t.line, draft), bound, t.line, "conclusion equation");
    }
  }

  Registry registry;
  for (auto& [name, def] : draft.predicates) registry.predicates_.emplace(name, def);
  for (auto& [id, def] : draft.theorems) registry.theorems_.emplace(id, def);
  return registry;
}

Registry load_registry_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open registry file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_registry(ss.str());
}

std::string default_registry_path() {
  if (const char* env = std::getenv("GEOGEN_REGISTRY")) return env;
  return std::string(GEOGEN_DATA_DIR) + "/core.registry";
}

const Registry& core_registry() {
  static const Registry registry = load_registry_file(default_registry_path());
  return registry;
}

LiteralPattern parse_literal_pattern(std::string_view text, const Registry& registry) {
  auto raw = split_call(text, 0);
  std::map<std::string, std::shared_ptr<PredicateDef>> view;
  for (const auto& [name, p] : registry.predicates()) view[name] = std::const_pointer_cast<PredicateDef>(p);
  return resolve_pattern(raw, 0, view);
}

}  // namespace geogen
