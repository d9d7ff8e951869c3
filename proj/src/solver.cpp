#include <algorithm>
#include <optional>

#include "geogen/deduction.hpp"

namespace geogen {

namespace {

// Sorted (symbol, exponent) pairs; empty for the constant term.
using Monomial = std::vector<std::pair<MeasureSymbol, int>>;
using Poly = std::map<Monomial, ExactValue>;

void accumulate(Poly& p, const Monomial& m, const ExactValue& c) {
  auto& slot = p[m];
  slot += c;
  if (slot.is_zero()) p.erase(m);
}

Poly constant_poly(const ExactValue& v) {
  Poly p;
  if (!v.is_zero()) p[{}] = v;
  return p;
}

Poly add(const Poly& a, const Poly& b, int sign = 1) {
  Poly out = a;
  for (const auto& [m, c] : b) accumulate(out, m, sign > 0 ? c : -c);
  return out;
}

Poly mul(const Poly& a, const Poly& b) {
  Poly out;
  for (const auto& [ma, ca] : a) {
    for (const auto& [mb, cb] : b) {
      std::map<MeasureSymbol, int> exps(ma.begin(), ma.end());
      for (const auto& [s, e] : mb) exps[s] += e;
      accumulate(out, Monomial(exps.begin(), exps.end()), ca * cb);
    }
  }
  return out;
}

std::optional<ExactValue> as_constant(const Poly& p) {
  if (p.empty()) return ExactValue();
  if (p.size() == 1 && p.begin()->first.empty()) return p.begin()->second;
  return std::nullopt;
}

struct PolyBuilder {
  const std::map<MeasureSymbol, ExactValue>& known;
  std::set<MeasureSymbol> substituted;

  std::optional<Poly> build(const Expr& e) {
    switch (e.op()) {
      case ExprOp::Const:
        return constant_poly(e.value());
      case ExprOp::Symbol: {
        auto it = known.find(e.measure());
        if (it != known.end()) {
          substituted.insert(e.measure());
          return constant_poly(it->second);
        }
        return Poly{{Monomial{{e.measure(), 1}}, ExactValue(1)}};
      }
      case ExprOp::Neg: {
        auto a = build(e.lhs());
        if (!a) return std::nullopt;
        return add(Poly{}, *a, -1);
      }
      case ExprOp::Add:
      case ExprOp::Sub: {
        auto a = build(e.lhs());
        auto b = build(e.rhs());
        if (!a || !b) return std::nullopt;
        return add(*a, *b, e.op() == ExprOp::Add ? 1 : -1);
      }
      case ExprOp::Mul: {
        auto a = build(e.lhs());
        auto b = build(e.rhs());
        if (!a || !b) return std::nullopt;
        return mul(*a, *b);
      }
      case ExprOp::Div: {
        auto a = build(e.lhs());
        auto b = build(e.rhs());
        if (!a || !b) return std::nullopt;
        auto d = as_constant(*b);
        if (!d || d->is_zero()) return std::nullopt;
        Poly out;
        for (const auto& [m, c] : *a) {
          auto q = c.divided_by(*d);
          if (!q) return std::nullopt;
          accumulate(out, m, *q);
        }
        return out;
      }
      case ExprOp::Pow: {
        auto base = build(e.lhs());
        auto exp = build(e.rhs());
        if (!base || !exp) return std::nullopt;
        auto k = as_constant(*exp);
        if (!k) return std::nullopt;
        auto kr = k->as_rational();
        if (!kr || !kr->is_integer() || kr->num() < 0 || kr->num() > 8) return std::nullopt;
        Poly out = constant_poly(ExactValue(1));
        for (std::int64_t i = 0; i < kr->num(); ++i) out = mul(out, *base);
        return out;
      }
      case ExprOp::Sqrt: {
        auto a = build(e.lhs());
        if (!a) return std::nullopt;
        auto c = as_constant(*a);
        if (!c) return std::nullopt;
        auto r = c->sqrt();
        if (!r) return std::nullopt;
        return constant_poly(*r);
      }
    }
    return std::nullopt;
  }
};

struct PreparedEquation {
  std::size_t index;
  Poly poly;  // poly == 0
  std::set<MeasureSymbol> substituted;
  bool isolated_root = false;
};

std::optional<PreparedEquation> prepare(const Equation& eq, std::size_t index,
                                        const std::map<MeasureSymbol, ExactValue>& known) {
  try {
    PolyBuilder builder{known, {}};
    if (auto p = builder.build(Expr::sub(eq.lhs(), eq.rhs()))) {
      return PreparedEquation{index, std::move(*p), std::move(builder.substituted), false};
    }
    // sqrt(E) = c  ->  E = c^2 with c >= 0.
    for (int side = 0; side < 2; ++side) {
      const Expr& root = side == 0 ? eq.lhs() : eq.rhs();
      const Expr& other = side == 0 ? eq.rhs() : eq.lhs();
      if (root.op() != ExprOp::Sqrt) continue;
      PolyBuilder b2{known, {}};
      auto inner = b2.build(root.lhs());
      auto rhs = b2.build(other);
      if (!inner || !rhs) continue;
      auto c = as_constant(*rhs);
      if (!c || c->sign() < 0) continue;
      return PreparedEquation{index, add(*inner, constant_poly(*c * *c), -1), std::move(b2.substituted), true};
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Overflow) throw;
  }
  return std::nullopt;
}

std::set<MeasureSymbol> unknowns_of(const Poly& p) {
  std::set<MeasureSymbol> out;
  for (const auto& [m, c] : p) {
    for (const auto& [s, e] : m) out.insert(s);
  }
  return out;
}

bool is_linear(const Poly& p) {
  for (const auto& [m, c] : p) {
    if (m.size() > 1 || (m.size() == 1 && m[0].second != 1)) return false;
  }
  return true;
}

ExactValue coefficient(const Poly& p, const Monomial& m) {
  auto it = p.find(m);
  return it == p.end() ? ExactValue() : it->second;
}

[[noreturn]] void inconsistent(const std::string& what) {
  throw Error(ErrorCode::InconsistentSystem, what);
}

// Solves a single-unknown polynomial of the forms a*x+b or a*x^2+b.
std::optional<ExactValue> solve_single(const Poly& p, const MeasureSymbol& x) {
  ExactValue c0 = coefficient(p, {});
  ExactValue c1 = coefficient(p, {{x, 1}});
  ExactValue c2 = coefficient(p, {{x, 2}});
  std::size_t used = (c0.is_zero() ? 0 : 1) + (c1.is_zero() ? 0 : 1) + (c2.is_zero() ? 0 : 1);
  if (used != p.size()) return std::nullopt;
  if (!c1.is_zero() && c2.is_zero()) return (-c0).divided_by(c1);
  if (c1.is_zero() && !c2.is_zero()) {
    auto sq = (-c0).divided_by(c2);
    if (!sq || sq->sign() <= 0) return std::nullopt;
    return sq->sqrt();
  }
  return std::nullopt;
}

struct Row {
  std::map<MeasureSymbol, ExactValue> coeffs;
  ExactValue constant;  // sum(coeffs*x) + constant == 0
  std::set<std::size_t> origin;
};

void prune(Row& r) {
  for (auto it = r.coeffs.begin(); it != r.coeffs.end();) {
    it = it->second.is_zero() ? r.coeffs.erase(it) : std::next(it);
  }
}

}  // namespace

Equation SolveStep::result() const { return Equation(Expr::symbol(symbol), value_expr(value)); }

std::string SolveStep::detail() const {
  std::string out = method;
  if (!substituted.empty()) {
    out += " with ";
    for (std::size_t i = 0; i < substituted.size(); ++i) {
      if (i) out += ", ";
      out += substituted[i].text();
    }
  }
  return out;
}

SolveResult solve_round(const std::vector<Equation>& equations, const std::map<MeasureSymbol, ExactValue>& known) {
  std::vector<PreparedEquation> prepared;
  for (std::size_t i = 0; i < equations.size(); ++i) {
    if (auto p = prepare(equations[i], i, known)) prepared.push_back(std::move(*p));
  }

  std::map<MeasureSymbol, SolveStep> found;
  auto record = [&](SolveStep step) {
    auto it = found.find(step.symbol);
    if (it == found.end()) {
      found.emplace(step.symbol, std::move(step));
    } else if (!(it->second.value == step.value)) {
      inconsistent(step.symbol.text() + " takes values " + it->second.value.str() + " and " + step.value.str());
    }
  };
  auto make_step = [&](const MeasureSymbol& x, ExactValue v, std::string method, const std::set<std::size_t>& rows,
                       const std::set<MeasureSymbol>& subs) {
    SolveStep s;
    s.symbol = x;
    s.value = std::move(v);
    s.method = std::move(method);
    for (auto i : rows) s.equations.push_back(equations[i]);
    s.substituted.assign(subs.begin(), subs.end());
    return s;
  };

  std::vector<Row> rows;
  for (const auto& pe : prepared) {
    auto unknowns = unknowns_of(pe.poly);
    if (unknowns.empty()) {
      if (!pe.poly.empty()) inconsistent("residual " + pe.poly.begin()->second.str() + " in " + equations[pe.index].text());
      continue;
    }
    if (unknowns.size() == 1) {
      const auto& x = *unknowns.begin();
      if (auto v = solve_single(pe.poly, x)) {
        record(make_step(x, *v, pe.substituted.empty() ? "isolation" : "substitution", {pe.index}, pe.substituted));
      }
    }
    if (is_linear(pe.poly)) {
      Row r;
      for (const auto& [m, c] : pe.poly) {
        if (m.empty()) r.constant = c;
        else r.coeffs[m[0].first] = c;
      }
      r.origin = {pe.index};
      rows.push_back(std::move(r));
    }
  }

  // Gauss-Jordan over the linear rows, tracking which equations each row combines.
  std::set<MeasureSymbol> columns;
  for (const auto& r : rows) {
    for (const auto& [s, c] : r.coeffs) columns.insert(s);
  }
  std::vector<bool> is_pivot(rows.size(), false);
  for (const auto& col : columns) {
    std::optional<std::size_t> pivot;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (is_pivot[i]) continue;
      auto it = rows[i].coeffs.find(col);
      if (it != rows[i].coeffs.end() && it->second.is_monomial()) {
        if (!pivot || rows[i].origin.size() < rows[*pivot].origin.size()) pivot = i;
      }
    }
    if (!pivot) continue;
    is_pivot[*pivot] = true;
    Row& pr = rows[*pivot];
    ExactValue lead = pr.coeffs.at(col);
    bool ok = true;
    Row scaled = pr;
    for (auto& [s, c] : scaled.coeffs) {
      auto q = c.divided_by(lead);
      if (!q) ok = false;
      else c = *q;
    }
    auto qc = scaled.constant.divided_by(lead);
    if (!ok || !qc) continue;
    scaled.constant = *qc;
    pr = scaled;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i == *pivot) continue;
      auto it = rows[i].coeffs.find(col);
      if (it == rows[i].coeffs.end()) continue;
      ExactValue f = it->second;
      for (const auto& [s, c] : pr.coeffs) rows[i].coeffs[s] -= f * c;
      rows[i].constant -= f * pr.constant;
      rows[i].origin.insert(pr.origin.begin(), pr.origin.end());
      prune(rows[i]);
    }
  }
  for (const auto& r : rows) {
    if (r.coeffs.empty()) {
      if (!r.constant.is_zero()) inconsistent("linear equations are contradictory");
      continue;
    }
    if (r.coeffs.size() != 1 || r.origin.size() < 2) continue;
    const auto& [x, c] = *r.coeffs.begin();
    auto v = (-r.constant).divided_by(c);
    if (!v) continue;
    if (found.count(x)) {
      record(make_step(x, *v, "elimination", r.origin, {}));
      continue;
    }
    std::set<MeasureSymbol> subs;
    for (const auto& pe : prepared) {
      if (r.origin.count(pe.index)) subs.insert(pe.substituted.begin(), pe.substituted.end());
    }
    record(make_step(x, *v, "elimination", r.origin, subs));
  }

  SolveResult out;
  for (auto& [x, step] : found) {
    out.new_known[x] = step.value;
    out.steps.push_back(std::move(step));
  }
  return out;
}

SolveResult solve_equations(const std::vector<Equation>& equations, const std::map<MeasureSymbol, ExactValue>& known) {
  SolveResult total;
  auto current = known;
  std::vector<Equation> open;
  for (const auto& eq : equations) {
    if (auto a = eq.as_assignment()) {
      auto it = current.find(a->first);
      if (it == current.end()) {
        current.emplace(a->first, a->second);
        total.new_known.emplace(a->first, a->second);
      } else if (!(it->second == a->second)) {
        inconsistent(a->first.text() + " takes values " + it->second.str() + " and " + a->second.str());
      }
    } else {
      open.push_back(eq);
    }
  }
  // Assignments passed as equations are inputs, not derived facts.
  total.new_known.clear();
  for (;;) {
    auto round = solve_round(open, current);
    if (round.steps.empty()) break;
    for (auto& step : round.steps) {
      current[step.symbol] = step.value;
      total.new_known[step.symbol] = step.value;
      total.steps.push_back(std::move(step));
    }
  }
  return total;
}

}  // namespace geogen
