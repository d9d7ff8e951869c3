#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "geogen/entity.hpp"
#include "geogen/expr.hpp"
#include "geogen/registry.hpp"

namespace geogen {

// An instantiated predicate. Arguments are canonical; equality and
// ordering follow the canonical text.
class Literal {
 public:
  Literal() = default;
  // Canonicalizes args (polygon reflection, symmetric argument order).
  // Throws ArityMismatch / SlotKindMismatch.
  Literal(std::shared_ptr<const PredicateDef> predicate, std::vector<Entity> args);

  const PredicateDef& predicate() const { return *predicate_; }
  const std::string& name() const { return predicate_->name; }
  const std::vector<Entity>& args() const { return args_; }
  const std::string& text() const { return text_; }

  friend bool operator==(const Literal& a, const Literal& b) { return a.text_ == b.text_; }
  friend auto operator<=>(const Literal& a, const Literal& b) { return a.text_ <=> b.text_; }

 private:
  std::shared_ptr<const PredicateDef> predicate_;
  std::vector<Entity> args_;
  std::string text_;
};

// Throws UnknownPredicate, ArityMismatch, MalformedEntity, SlotKindMismatch.
Literal parse_literal(std::string_view text, const Registry& registry);
std::string format_literal(const Literal& literal);

// A fact in a deduction state: a literal or an equation over measures.
class Fact {
 public:
  Fact() = default;
  Fact(Literal literal);    // NOLINT implicit
  Fact(Equation equation);  // NOLINT implicit

  bool is_literal() const { return std::holds_alternative<Literal>(value_); }
  bool is_equation() const { return !is_literal(); }
  const Literal& literal() const { return std::get<Literal>(value_); }
  const Equation& equation() const { return std::get<Equation>(value_); }

  // Canonical text: literal text or "lhs=rhs".
  const std::string& key() const { return key_; }

  friend bool operator==(const Fact& a, const Fact& b) { return a.key_ == b.key_; }
  friend auto operator<=>(const Fact& a, const Fact& b) { return a.key_ <=> b.key_; }

 private:
  std::variant<Literal, Equation> value_;
  std::string key_;
};

// Literal if the text parses as one, else an equation.
Fact parse_fact(std::string_view text, const Registry& registry);

// Entities named by a fact (literal args, or the entities of measure symbols).
std::vector<Entity> referenced_entities(const Fact& fact);

}  // namespace geogen
