#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "geogen/entity.hpp"

namespace geogen {

// Pattern variables are written "?name" in the registry file.
using Var = std::string;

struct EntityPattern {
  EntityKind kind = EntityKind::Point;
  std::vector<Var> vars;
};

struct LiteralPattern {
  std::string predicate;
  std::vector<EntityPattern> args;

  // "IsMidpointOfLine(?m,?a?b)"
  std::string text() const;
};

// A coordinate constraint primitive applied to pattern points, e.g.
// midpoint(?m,?a?b). Arguments are flattened into one point list.
struct ConstraintTemplate {
  std::string primitive;
  std::vector<Var> points;
};

// How the diagram sampler attaches a relation predicate: which variables
// become new points, which literal patterns must already hold, and which
// variables bind to arbitrary existing points.
struct PlotSpec {
  std::vector<Var> fresh;
  std::vector<LiteralPattern> requires_;
  std::vector<Var> any_point;
};

enum class PredicateKind { Entity, Relation, Measure };

std::string_view to_string(PredicateKind kind);

struct SlotDef {
  EntityKind kind = EntityKind::Point;
  std::vector<Var> vars;  // empty when the predicate declares no pattern
};

struct PredicateDef {
  std::string name;
  PredicateKind kind = PredicateKind::Relation;
  std::vector<SlotDef> slots;
  // Polygon slots also match their mirror image.
  bool reflect = false;
  // Two-argument predicates whose arguments are unordered.
  bool symmetric = false;
  // Eligible for diagram sampling.
  bool sample = true;
  std::vector<ConstraintTemplate> constraints;
  std::vector<LiteralPattern> constructs;
  std::optional<PlotSpec> plot;
  // Sentence template with {0}, {1}, ... slot placeholders.
  std::string text;

  std::size_t arity() const { return slots.size(); }
  // Slot variables in alphabetical order.
  std::vector<Var> vars() const;
};

struct TheoremDef {
  int id = 0;
  std::string name;
  std::vector<LiteralPattern> premises;
  // Equations over pattern variables, e.g. "MeasureOfAngle(?a?b?c)=90".
  std::vector<std::string> algebraic_premises;
  std::vector<LiteralPattern> conclusions;
  std::vector<std::string> conclusion_equations;
  std::string text;

  // Variables in order of first appearance in the premises.
  std::vector<Var> vars() const;
};

// Pseudo-theorem id used for steps produced by the equation solver.
inline constexpr int kAlgebraTheoremId = 0;
inline constexpr std::string_view kAlgebraTheoremName = "solve_equations";

// Immutable after load. Cheap to copy: definitions are shared.
class Registry {
 public:
  Registry() = default;

  const PredicateDef* find_predicate(std::string_view name) const;
  const PredicateDef& predicate(std::string_view name) const;  // throws UnknownPredicate
  std::shared_ptr<const PredicateDef> predicate_ptr(std::string_view name) const;
  const TheoremDef* find_theorem(int id) const;
  const TheoremDef* find_theorem_by_name(std::string_view name) const;

  const std::map<std::string, std::shared_ptr<const PredicateDef>, std::less<>>& predicates() const {
    return predicates_;
  }
  const std::map<int, std::shared_ptr<const TheoremDef>>& theorems() const { return theorems_; }

  std::vector<const PredicateDef*> predicates_of_kind(PredicateKind kind) const;

 private:
  friend Registry load_registry(std::string_view definition_text);

  std::map<std::string, std::shared_ptr<const PredicateDef>, std::less<>> predicates_;
  std::map<int, std::shared_ptr<const TheoremDef>> theorems_;
};

// Parses the line-oriented registry format (see docs/registry-format.md).
// Throws SyntaxError (with line number), DanglingReference, DuplicateName.
Registry load_registry(std::string_view definition_text);
Registry load_registry_file(const std::string& path);

// Path of the registry shipped with the project.
std::string default_registry_path();
const Registry& core_registry();

// Parses "Name(?a,?b?c)" given the predicate's slot kinds. Exposed for tests.
LiteralPattern parse_literal_pattern(std::string_view text, const Registry& registry);

}  // namespace geogen

namespace geogen {

// Replaces every "?var" in `pattern` with resolve(var).
std::string substitute_vars(std::string_view pattern, const std::function<std::string(const Var&)>& resolve);

// Coordinate constraint primitives understood by the plotter, with the
// number of points each takes.
std::optional<std::size_t> constraint_primitive_arity(std::string_view primitive);

}  // namespace geogen
