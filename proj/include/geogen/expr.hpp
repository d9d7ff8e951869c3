#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "geogen/entity.hpp"
#include "geogen/exact_value.hpp"
#include "geogen/rational.hpp"

namespace geogen {

enum class MeasureKind { LengthOfLine, MeasureOfAngle, AreaOfPolygon, PerimeterOfPolygon };

std::string_view to_string(MeasureKind kind);
std::optional<MeasureKind> measure_kind_from_string(std::string_view name);
EntityKind measure_entity_kind(MeasureKind kind);

// A numeric quantity attached to a canonical entity. Lengths are in
// abstract length units, angles in degrees. Polygon measures ignore
// orientation.
class MeasureSymbol {
 public:
  MeasureSymbol() = default;
  MeasureSymbol(MeasureKind kind, const Entity& entity);

  MeasureKind kind() const { return kind_; }
  const Entity& entity() const { return entity_; }

  // "LengthOfLine(AB)"
  std::string text() const;

  friend bool operator==(const MeasureSymbol&, const MeasureSymbol&) = default;
  friend auto operator<=>(const MeasureSymbol&, const MeasureSymbol&) = default;

 private:
  MeasureKind kind_ = MeasureKind::LengthOfLine;
  Entity entity_;
};

enum class ExprOp { Const, Symbol, Add, Sub, Mul, Div, Pow, Sqrt, Neg };

struct ExprNode;

// Immutable expression tree. Construction goes through the factory
// functions below, which fold rational constants, so structural equality
// is equality after constant folding.
class Expr {
 public:
  Expr();  // constant 0

  static Expr constant(Rational value);
  static Expr symbol(MeasureSymbol symbol);
  static Expr add(Expr a, Expr b);
  static Expr sub(Expr a, Expr b);
  static Expr mul(Expr a, Expr b);
  static Expr div(Expr a, Expr b);
  static Expr pow(Expr base, Expr exponent);
  static Expr sqrt(Expr a);
  static Expr neg(Expr a);

  ExprOp op() const;
  const Rational& value() const;           // Const
  const MeasureSymbol& measure() const;    // Symbol
  const Expr& lhs() const;                 // binary ops, or the operand of unary ops
  const Expr& rhs() const;

  bool is_constant() const { return op() == ExprOp::Const; }
  bool has_symbols() const;
  void collect_symbols(std::set<MeasureSymbol>& out) const;

  // Exact evaluation. nullopt if a symbol is unknown or the result leaves
  // ExactValue (e.g. sqrt of an irrational). Throws DivisionByZero.
  std::optional<ExactValue> evaluate(
      const std::function<std::optional<ExactValue>(const MeasureSymbol&)>& lookup) const;

  // Replace symbols via callback (returning nullopt keeps the symbol).
  Expr substitute(const std::function<std::optional<Expr>(const MeasureSymbol&)>& f) const;

  friend bool operator==(const Expr& a, const Expr& b);
  friend bool operator!=(const Expr& a, const Expr& b) { return !(a == b); }

 private:
  explicit Expr(std::shared_ptr<const ExprNode> node) : node_(std::move(node)) {}
  std::shared_ptr<const ExprNode> node_;
};

struct ExprNode {
  ExprOp op = ExprOp::Const;
  Rational value;
  MeasureSymbol measure;
  std::vector<Expr> children;
};

// Sorts the operands of sums and products and gathers their constants, so
// that commuted forms of one expression compare equal. Idempotent.
Expr normalize_expr(const Expr& e);

// Expression built from an exact value: "5*sqrt(2)", "3+2*sqrt(2)".
Expr value_expr(const ExactValue& value);

enum class ExprSyntax {
  Formal,   // LengthOfLine(AB), MeasureOfAngle(ABC), AreaOfPolygon(ABC), PerimeterOfPolygon(ABC)
  Natural,  // AB, ∠ABC, Area(ABC), Perimeter(ABC)
};

std::string format_expr(const Expr& e, ExprSyntax syntax = ExprSyntax::Formal);

// Standard precedence: unary minus binds tighter than * and /, ^ is right
// associative and binds tightest. Integer and decimal constants are exact.
// Throws SyntaxError.
Expr parse_expression(std::string_view text, ExprSyntax syntax = ExprSyntax::Formal);

// lhs = rhs with both sides normalized. Canonical orientation: a symbol-free side goes right,
// otherwise the lexicographically smaller rendering is kept.
class Equation {
 public:
  Equation() = default;
  Equation(Expr lhs, Expr rhs);

  const Expr& lhs() const { return lhs_; }
  const Expr& rhs() const { return rhs_; }

  std::string text(ExprSyntax syntax = ExprSyntax::Formal) const;

  // symbol = constant, with the constant's exact value.
  std::optional<std::pair<MeasureSymbol, ExactValue>> as_assignment() const;

  std::set<MeasureSymbol> symbols() const;

  friend bool operator==(const Equation& a, const Equation& b) {
    return a.lhs_ == b.lhs_ && a.rhs_ == b.rhs_;
  }

 private:
  Expr lhs_;
  Expr rhs_;
};

// "lhs=rhs"; throws SyntaxError when there is not exactly one '='.
Equation parse_equation(std::string_view text, ExprSyntax syntax = ExprSyntax::Formal);

}  // namespace geogen
