#include "geogen/expr.hpp"

#include <cctype>
#include <cmath>

#include "geogen/error.hpp"

namespace geogen {

std::string_view to_string(MeasureKind kind) {
  switch (kind) {
    case MeasureKind::LengthOfLine: return "LengthOfLine";
    case MeasureKind::MeasureOfAngle: return "MeasureOfAngle";
    case MeasureKind::AreaOfPolygon: return "AreaOfPolygon";
    case MeasureKind::PerimeterOfPolygon: return "PerimeterOfPolygon";
  }
  return "?";
}

std::optional<MeasureKind> measure_kind_from_string(std::string_view name) {
  for (auto k : {MeasureKind::LengthOfLine, MeasureKind::MeasureOfAngle, MeasureKind::AreaOfPolygon,
                 MeasureKind::PerimeterOfPolygon}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

EntityKind measure_entity_kind(MeasureKind kind) {
  switch (kind) {
    case MeasureKind::LengthOfLine: return EntityKind::Segment;
    case MeasureKind::MeasureOfAngle: return EntityKind::Angle;
    default: return EntityKind::Polygon;
  }
}

MeasureSymbol::MeasureSymbol(MeasureKind kind, const Entity& entity) : kind_(kind) {
  if (entity.kind() != measure_entity_kind(kind)) {
    throw Error(ErrorCode::SlotKindMismatch,
                std::string(to_string(kind)) + " does not take a " + std::string(to_string(entity.kind())));
  }
  // Area and perimeter do not depend on orientation.
  entity_ = kind == MeasureKind::AreaOfPolygon || kind == MeasureKind::PerimeterOfPolygon
                ? Entity::make(entity.kind(), entity.points(), true)
                : entity;
}

std::string MeasureSymbol::text() const {
  return std::string(to_string(kind_)) + "(" + entity_.text() + ")";
}

// ---------------------------------------------------------------------------
// Construction with constant folding

namespace {

std::shared_ptr<const ExprNode> make_node(ExprOp op, std::vector<Expr> children) {
  auto n = std::make_shared<ExprNode>();
  n->op = op;
  n->children = std::move(children);
  return n;
}

std::optional<Rational> rational_sqrt(const Rational& r) {
  if (r.sign() < 0) return std::nullopt;
  auto isqrt = [](std::int64_t v) -> std::optional<std::int64_t> {
    auto s = static_cast<std::int64_t>(std::llround(std::sqrt(static_cast<double>(v))));
    for (std::int64_t c = std::max<std::int64_t>(0, s - 1); c <= s + 1; ++c) {
      if (c * c == v) return c;
    }
    return std::nullopt;
  };
  auto n = isqrt(r.num());
  auto d = isqrt(r.den());
  if (!n || !d) return std::nullopt;
  return Rational(*n, *d);
}

std::optional<Rational> rational_pow(const Rational& base, const Rational& exponent) {
  if (!exponent.is_integer()) return std::nullopt;
  std::int64_t e = exponent.num();
  if (e < -32 || e > 32) return std::nullopt;
  if (e < 0 && base.is_zero()) return std::nullopt;
  Rational result(1);
  for (std::int64_t i = 0; i < (e < 0 ? -e : e); ++i) result *= base;
  return e < 0 ? Rational(1) / result : result;
}

}  // namespace

Expr::Expr() : Expr(constant(Rational(0))) {}

Expr Expr::constant(Rational value) {
  auto n = std::make_shared<ExprNode>();
  n->op = ExprOp::Const;
  n->value = value;
  return Expr(std::move(n));
}

Expr Expr::symbol(MeasureSymbol symbol) {
  auto n = std::make_shared<ExprNode>();
  n->op = ExprOp::Symbol;
  n->measure = std::move(symbol);
  return Expr(std::move(n));
}

Expr Expr::add(Expr a, Expr b) {
  if (a.is_constant() && b.is_constant()) return constant(a.value() + b.value());
  return Expr(make_node(ExprOp::Add, {std::move(a), std::move(b)}));
}

Expr Expr::sub(Expr a, Expr b) {
  if (a.is_constant() && b.is_constant()) return constant(a.value() - b.value());
  return Expr(make_node(ExprOp::Sub, {std::move(a), std::move(b)}));
}

Expr Expr::mul(Expr a, Expr b) {
  if (a.is_constant() && b.is_constant()) return constant(a.value() * b.value());
  return Expr(make_node(ExprOp::Mul, {std::move(a), std::move(b)}));
}

Expr Expr::div(Expr a, Expr b) {
  if (a.is_constant() && b.is_constant() && !b.value().is_zero()) return constant(a.value() / b.value());
  return Expr(make_node(ExprOp::Div, {std::move(a), std::move(b)}));
}

Expr Expr::pow(Expr base, Expr exponent) {
  if (base.is_constant() && exponent.is_constant()) {
    if (auto r = rational_pow(base.value(), exponent.value())) return constant(*r);
  }
  return Expr(make_node(ExprOp::Pow, {std::move(base), std::move(exponent)}));
}

Expr Expr::sqrt(Expr a) {
  if (a.is_constant()) {
    if (auto r = rational_sqrt(a.value())) return constant(*r);
  }
  return Expr(make_node(ExprOp::Sqrt, {std::move(a)}));
}

Expr Expr::neg(Expr a) {
  if (a.is_constant()) return constant(-a.value());
  return Expr(make_node(ExprOp::Neg, {std::move(a)}));
}

ExprOp Expr::op() const { return node_->op; }
const Rational& Expr::value() const { return node_->value; }
const MeasureSymbol& Expr::measure() const { return node_->measure; }
const Expr& Expr::lhs() const { return node_->children.at(0); }
const Expr& Expr::rhs() const { return node_->children.at(1); }

bool Expr::has_symbols() const {
  if (op() == ExprOp::Symbol) return true;
  for (const auto& c : node_->children) {
    if (c.has_symbols()) return true;
  }
  return false;
}

void Expr::collect_symbols(std::set<MeasureSymbol>& out) const {
  if (op() == ExprOp::Symbol) out.insert(measure());
  for (const auto& c : node_->children) c.collect_symbols(out);
}

std::optional<ExactValue> Expr::evaluate(
    const std::function<std::optional<ExactValue>(const MeasureSymbol&)>& lookup) const {
  switch (op()) {
    case ExprOp::Const: return ExactValue(value());
    case ExprOp::Symbol: return lookup(measure());
    case ExprOp::Neg: {
      auto a = lhs().evaluate(lookup);
      if (!a) return std::nullopt;
      return -*a;
    }
    case ExprOp::Sqrt: {
      auto a = lhs().evaluate(lookup);
      if (!a) return std::nullopt;
      return a->sqrt();
    }
    default: break;
  }
  auto a = lhs().evaluate(lookup);
  auto b = rhs().evaluate(lookup);
  if (!a || !b) return std::nullopt;
  switch (op()) {
    case ExprOp::Add: return *a + *b;
    case ExprOp::Sub: return *a - *b;
    case ExprOp::Mul: return *a * *b;
    case ExprOp::Div:
      if (b->is_zero()) throw Error(ErrorCode::DivisionByZero, "division by zero in " + format_expr(*this));
      return a->divided_by(*b);
    case ExprOp::Pow: {
      auto e = b->as_rational();
      if (!e || !e->is_integer() || e->num() < 0 || e->num() > 16) return std::nullopt;
      ExactValue r(1);
      for (std::int64_t i = 0; i < e->num(); ++i) r *= *a;
      return r;
    }
    default: return std::nullopt;
  }
}

Expr Expr::substitute(const std::function<std::optional<Expr>(const MeasureSymbol&)>& f) const {
  switch (op()) {
    case ExprOp::Const: return *this;
    case ExprOp::Symbol: {
      auto r = f(measure());
      return r ? *r : *this;
    }
    case ExprOp::Neg: return neg(lhs().substitute(f));
    case ExprOp::Sqrt: return sqrt(lhs().substitute(f));
    case ExprOp::Add: return add(lhs().substitute(f), rhs().substitute(f));
    case ExprOp::Sub: return sub(lhs().substitute(f), rhs().substitute(f));
    case ExprOp::Mul: return mul(lhs().substitute(f), rhs().substitute(f));
    case ExprOp::Div: return div(lhs().substitute(f), rhs().substitute(f));
    case ExprOp::Pow: return pow(lhs().substitute(f), rhs().substitute(f));
  }
  return *this;
}

bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  if (a.op() != b.op()) return false;
  switch (a.op()) {
    case ExprOp::Const: return a.value() == b.value();
    case ExprOp::Symbol: return a.measure() == b.measure();
    default: break;
  }
  const auto& ca = a.node_->children;
  const auto& cb = b.node_->children;
  if (ca.size() != cb.size()) return false;
  for (std::size_t i = 0; i < ca.size(); ++i) {
    if (!(ca[i] == cb[i])) return false;
  }
  return true;
}

Expr value_expr(const ExactValue& value) {
  if (value.is_zero()) return Expr::constant(Rational(0));
  std::optional<Expr> out;
  for (const auto& [rad, q] : value.terms()) {
    Rational mag = q.sign() < 0 ? -q : q;
    bool first = !out.has_value();
    Rational coef = first ? q : mag;
    Expr term = Expr::constant(coef);
    if (rad != 1) {
      Expr root = Expr::sqrt(Expr::constant(Rational(rad)));
      term = coef == Rational(1) ? root : Expr::mul(Expr::constant(coef), root);
    }
    if (first) out = term;
    else out = q.sign() < 0 ? Expr::sub(*out, term) : Expr::add(*out, term);
  }
  return *out;
}

// ---------------------------------------------------------------------------
// Formatting

namespace {

int precedence(const Expr& e) {
  switch (e.op()) {
    case ExprOp::Const:
      if (!e.value().is_integer()) return 2;
      return e.value().sign() < 0 ? 3 : 5;
    case ExprOp::Symbol:
    case ExprOp::Sqrt: return 5;
    case ExprOp::Add:
    case ExprOp::Sub: return 1;
    case ExprOp::Mul:
    case ExprOp::Div: return 2;
    case ExprOp::Neg: return 3;
    case ExprOp::Pow: return 4;
  }
  return 5;
}

std::string symbol_text(const MeasureSymbol& s, ExprSyntax syntax) {
  if (syntax == ExprSyntax::Formal) return s.text();
  switch (s.kind()) {
    case MeasureKind::LengthOfLine: return s.entity().text();
    case MeasureKind::MeasureOfAngle: return "\xE2\x88\xA0" + s.entity().text();
    case MeasureKind::AreaOfPolygon: return "Area(" + s.entity().text() + ")";
    case MeasureKind::PerimeterOfPolygon: return "Perimeter(" + s.entity().text() + ")";
  }
  return s.text();
}

void emit(const Expr& e, ExprSyntax syntax, int min_level, std::string& out) {
  bool paren = precedence(e) < min_level;
  if (paren) out += '(';
  const bool spaced = syntax == ExprSyntax::Natural;
  auto binary = [&](const char* op, int left, int right, bool space) {
    emit(e.lhs(), syntax, left, out);
    if (space) out += ' ';
    out += op;
    if (space) out += ' ';
    emit(e.rhs(), syntax, right, out);
  };
  switch (e.op()) {
    case ExprOp::Const: out += e.value().str(); break;
    case ExprOp::Symbol: out += symbol_text(e.measure(), syntax); break;
    case ExprOp::Sqrt:
      out += "sqrt(";
      emit(e.lhs(), syntax, 0, out);
      out += ')';
      break;
    case ExprOp::Neg:
      out += '-';
      emit(e.lhs(), syntax, 3, out);
      break;
    case ExprOp::Add: binary("+", 1, 2, spaced); break;
    case ExprOp::Sub: binary("-", 1, 2, spaced); break;
    case ExprOp::Mul: binary("*", 2, 3, false); break;
    case ExprOp::Div: binary("/", 2, 3, false); break;
    case ExprOp::Pow: binary("^", 5, 4, false); break;
  }
  if (paren) out += ')';
}

}  // namespace

std::string format_expr(const Expr& e, ExprSyntax syntax) {
  std::string out;
  emit(e, syntax, 0, out);
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

constexpr std::string_view kAngleSign = "\xE2\x88\xA0";

class ExprParser {
 public:
  ExprParser(std::string_view text, ExprSyntax syntax) : text_(text), syntax_(syntax) {}

  Expr parse_all() {
    Expr e = parse_sum();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::SyntaxError,
                what + " at offset " + std::to_string(pos_) + " in '" + std::string(text_) + "'");
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  Expr parse_sum() {
    Expr e = parse_product();
    for (;;) {
      if (accept('+')) e = Expr::add(e, parse_product());
      else if (accept('-')) e = Expr::sub(e, parse_product());
      else return e;
    }
  }

  Expr parse_product() {
    Expr e = parse_unary();
    for (;;) {
      if (accept('*')) e = Expr::mul(e, parse_unary());
      else if (accept('/')) e = Expr::div(e, parse_unary());
      else return e;
    }
  }

  Expr parse_unary() {
    if (accept('-')) return Expr::neg(parse_unary());
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_primary();
    if (accept('^')) return Expr::pow(base, parse_unary());
    return base;
  }

  std::string read_points() {
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isupper(static_cast<unsigned char>(text_[pos_])) ||
            std::isdigit(static_cast<unsigned char>(text_[pos_])))) {
      ++pos_;
    }
    if (start == pos_) fail("expected point names");
    return std::string(text_.substr(start, pos_ - start));
  }

  Expr measure(MeasureKind kind, const std::string& points) {
    try {
      return Expr::symbol(MeasureSymbol(kind, Entity::parse(measure_entity_kind(kind), points)));
    } catch (const Error& e) {
      fail(std::string("bad measure argument: ") + e.what());
    }
  }

  Expr parse_primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = parse_sum();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) return parse_number();
    if (syntax_ == ExprSyntax::Natural && text_.substr(pos_).starts_with(kAngleSign)) {
      pos_ += kAngleSign.size();
      return measure(MeasureKind::MeasureOfAngle, read_points());
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
        ++pos_;
      }
      std::string ident(text_.substr(start, pos_ - start));
      skip_ws();
      bool call = pos_ < text_.size() && text_[pos_] == '(';
      if (ident == "sqrt" && call) {
        ++pos_;
        Expr e = parse_sum();
        expect(')');
        return Expr::sqrt(e);
      }
      std::optional<MeasureKind> kind = measure_kind_from_string(ident);
      if (!kind && syntax_ == ExprSyntax::Natural) {
        if (ident == "Area") kind = MeasureKind::AreaOfPolygon;
        else if (ident == "Perimeter") kind = MeasureKind::PerimeterOfPolygon;
      }
      if (kind && call) {
        ++pos_;
        std::string pts = read_points();
        expect(')');
        return measure(*kind, pts);
      }
      if (syntax_ == ExprSyntax::Natural && !call) {
        return measure(MeasureKind::LengthOfLine, ident);
      }
      fail("unknown identifier '" + ident + "'");
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  Expr parse_number() {
    std::int64_t whole = 0;
    std::int64_t frac = 0;
    std::int64_t scale = 1;
    auto digit_loop = [&](std::int64_t& acc, bool count_scale) {
      std::size_t n = 0;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        if (acc > 100'000'000'000'000LL) fail("number too large");
        acc = acc * 10 + (text_[pos_] - '0');
        if (count_scale) scale *= 10;
        ++pos_;
        ++n;
      }
      return n;
    };
    digit_loop(whole, false);
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      if (digit_loop(frac, true) == 0) fail("expected digits after '.'");
    }
    return Expr::constant(Rational(whole) + Rational(frac, scale));
  }

  std::string_view text_;
  ExprSyntax syntax_;
  std::size_t pos_ = 0;
};

void collect_terms(const Expr& e, bool negative, std::vector<std::pair<bool, Expr>>& out) {
  switch (e.op()) {
    case ExprOp::Add:
      collect_terms(e.lhs(), negative, out);
      collect_terms(e.rhs(), negative, out);
      return;
    case ExprOp::Sub:
      collect_terms(e.lhs(), negative, out);
      collect_terms(e.rhs(), !negative, out);
      return;
    case ExprOp::Neg:
      collect_terms(e.lhs(), !negative, out);
      return;
    default:
      out.emplace_back(negative, normalize_expr(e));
  }
}

void collect_factors(const Expr& e, std::vector<Expr>& out) {
  if (e.op() == ExprOp::Mul) {
    collect_factors(e.lhs(), out);
    collect_factors(e.rhs(), out);
    return;
  }
  out.push_back(normalize_expr(e));
}

int side_rank(const Expr& e) {
  if (e.op() == ExprOp::Symbol) return 0;
  return e.has_symbols() ? 1 : 2;
}

}  // namespace

Expr normalize_expr(const Expr& e) {
  switch (e.op()) {
    case ExprOp::Const:
    case ExprOp::Symbol:
      return e;
    case ExprOp::Add:
    case ExprOp::Sub:
    case ExprOp::Neg: {
      std::vector<std::pair<bool, Expr>> terms;
      collect_terms(e, false, terms);
      Rational constant(0);
      std::vector<std::pair<std::string, Expr>> pos;
      std::vector<std::pair<std::string, Expr>> neg;
      for (auto& [negative, t] : terms) {
        if (t.is_constant()) {
          constant += negative ? -t.value() : t.value();
          continue;
        }
        (negative ? neg : pos).emplace_back(format_expr(t), t);
      }
      auto by_text = [](const auto& a, const auto& b) { return a.first < b.first; };
      std::stable_sort(pos.begin(), pos.end(), by_text);
      std::stable_sort(neg.begin(), neg.end(), by_text);
      std::optional<Expr> out;
      for (auto& [text, t] : pos) out = out ? Expr::add(*out, t) : t;
      for (auto& [text, t] : neg) out = out ? Expr::sub(*out, t) : Expr::neg(t);
      if (!out) return Expr::constant(constant);
      if (constant.sign() > 0) out = Expr::add(*out, Expr::constant(constant));
      if (constant.sign() < 0) out = Expr::sub(*out, Expr::constant(-constant));
      return *out;
    }
    case ExprOp::Mul: {
      std::vector<Expr> factors;
      collect_factors(e, factors);
      Rational constant(1);
      std::vector<std::pair<std::string, Expr>> rest;
      for (auto& f : factors) {
        if (f.is_constant()) constant *= f.value();
        else rest.emplace_back(format_expr(f), f);
      }
      std::stable_sort(rest.begin(), rest.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      if (rest.empty() || constant.is_zero()) return Expr::constant(constant);
      std::optional<Expr> out;
      if (constant != Rational(1)) out = Expr::constant(constant);
      for (auto& [text, f] : rest) out = out ? Expr::mul(*out, f) : f;
      return *out;
    }
    case ExprOp::Div: return Expr::div(normalize_expr(e.lhs()), normalize_expr(e.rhs()));
    case ExprOp::Pow: return Expr::pow(normalize_expr(e.lhs()), normalize_expr(e.rhs()));
    case ExprOp::Sqrt: return Expr::sqrt(normalize_expr(e.lhs()));
  }
  return e;
}

Expr parse_expression(std::string_view text, ExprSyntax syntax) {
  return ExprParser(text, syntax).parse_all();
}

Equation::Equation(Expr lhs, Expr rhs) : lhs_(normalize_expr(lhs)), rhs_(normalize_expr(rhs)) {
  int rl = side_rank(lhs_);
  int rr = side_rank(rhs_);
  bool swap = rr < rl;
  if (rl == rr) {
    std::string a = format_expr(lhs_) + "=" + format_expr(rhs_);
    std::string b = format_expr(rhs_) + "=" + format_expr(lhs_);
    swap = b < a;
  }
  if (swap) std::swap(lhs_, rhs_);
}

std::string Equation::text(ExprSyntax syntax) const {
  const char* eq = syntax == ExprSyntax::Natural ? " = " : "=";
  return format_expr(lhs_, syntax) + eq + format_expr(rhs_, syntax);
}

std::optional<std::pair<MeasureSymbol, ExactValue>> Equation::as_assignment() const {
  if (lhs_.op() != ExprOp::Symbol || rhs_.has_symbols()) return std::nullopt;
  auto v = rhs_.evaluate([](const MeasureSymbol&) { return std::nullopt; });
  if (!v) return std::nullopt;
  return std::make_pair(lhs_.measure(), *v);
}

std::set<MeasureSymbol> Equation::symbols() const {
  std::set<MeasureSymbol> out;
  lhs_.collect_symbols(out);
  rhs_.collect_symbols(out);
  return out;
}

Equation parse_equation(std::string_view text, ExprSyntax syntax) {
  auto eq = text.find('=');
  if (eq == std::string_view::npos || text.find('=', eq + 1) != std::string_view::npos) {
    throw Error(ErrorCode::SyntaxError, "equation needs exactly one '=': '" + std::string(text) + "'");
  }
  return Equation(parse_expression(text.substr(0, eq), syntax), parse_expression(text.substr(eq + 1), syntax));
}

}  // namespace geogen
