#pragma once
// Reference implementations used to check the library against slower,
// simpler computations. Nothing here reuses the matcher or the chase.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "geogen/deduction.hpp"

namespace oracle {

using namespace geogen;

inline std::string instantiate(const std::string& pattern, const Binding& b) {
  return substitute_vars(pattern, [&](const Var& v) { return b.at(v); });
}

inline bool equation_holds(const std::string& text, const std::set<std::string>& keys,
                           const std::map<MeasureSymbol, ExactValue>& known) {
  auto eq = parse_equation(text);
  if (keys.count(eq.text())) return true;
  auto lookup = [&](const MeasureSymbol& s) -> std::optional<ExactValue> {
    auto it = known.find(s);
    if (it == known.end()) return std::nullopt;
    return it->second;
  };
  try {
    auto l = eq.lhs().evaluate(lookup);
    auto r = eq.rhs().evaluate(lookup);
    return l && r && *l == *r;
  } catch (const Error&) {
    return false;
  }
}

// Every injective point assignment to the theorem's variables under
// which all premises hold, found by trying point tuples premise by premise.
// Each result is (premise keys, conclusion keys), deduplicated.
inline std::set<std::pair<std::set<std::string>, std::set<std::string>>> brute_force_applications(
    const TheoremDef& th, const std::vector<PointRef>& points, const std::set<std::string>& keys,
    const std::map<MeasureSymbol, ExactValue>& known, const Registry& reg) {
  std::set<std::pair<std::set<std::string>, std::set<std::string>>> out;
  Binding b;
  std::set<PointRef> used;
  std::function<void(std::size_t)> premise;
  std::function<void(std::size_t, std::size_t, std::vector<Var>&)> assign;

  auto finish = [&] {
    std::set<std::string> prem;
    for (const auto& p : th.premises) prem.insert(parse_literal(instantiate(p.text(), b), reg).text());
    for (const auto& e : th.algebraic_premises) {
      if (!equation_holds(instantiate(e, b), keys, known)) return;
      prem.insert(parse_equation(instantiate(e, b)).text());
    }
    std::set<std::string> concl;
    for (const auto& c : th.conclusions) concl.insert(parse_literal(instantiate(c.text(), b), reg).text());
    for (const auto& e : th.conclusion_equations) concl.insert(parse_equation(instantiate(e, b)).text());
    out.insert({prem, concl});
  };

  // Binds the still-free variables of premise k to every point tuple.
  assign = [&](std::size_t k, std::size_t i, std::vector<Var>& free) {
    if (i == free.size()) {
      std::string text;
      try {
        text = parse_literal(instantiate(th.premises[k].text(), b), reg).text();
      } catch (const Error&) {
        return;
      }
      if (keys.count(text)) premise(k + 1);
      return;
    }
    for (const auto& p : points) {
      if (used.count(p)) continue;
      b[free[i]] = p;
      used.insert(p);
      assign(k, i + 1, free);
      used.erase(p);
      b.erase(free[i]);
    }
  };
  premise = [&](std::size_t k) {
    if (k == th.premises.size()) {
      finish();
      return;
    }
    std::vector<Var> free;
    for (const auto& a : th.premises[k].args) {
      for (const auto& v : a.vars) {
        if (!b.count(v) && std::find(free.begin(), free.end(), v) == free.end()) free.push_back(v);
      }
    }
    assign(k, 0, free);
  };
  premise(0);
  return out;
}

// Naive fixpoint: apply every theorem to every point tuple and run the
// solver to completion, repeating until no new fact appears.
inline std::set<std::string> naive_closure(const std::vector<std::string>& initial, const Registry& reg) {
  std::set<std::string> keys;
  std::vector<Equation> equations;
  std::map<MeasureSymbol, ExactValue> known;
  std::set<PointRef> point_set;
  auto add = [&](const std::string& text) {
    auto fact = parse_fact(text, reg);
    if (!keys.insert(fact.key()).second) return false;
    for (const auto& e : referenced_entities(fact)) point_set.insert(e.points().begin(), e.points().end());
    if (fact.is_equation()) {
      if (auto a = fact.equation().as_assignment()) {
        auto it = known.find(a->first);
        if (it != known.end() && !(it->second == a->second)) throw Error(ErrorCode::InconsistentSystem, text);
        known.emplace(a->first, a->second);
      } else {
        equations.push_back(fact.equation());
      }
    }
    return true;
  };
  for (const auto& t : initial) add(t);
  for (bool changed = true; changed;) {
    changed = false;
    std::vector<PointRef> points(point_set.begin(), point_set.end());
    std::vector<std::string> found;
    for (const auto& [id, th] : reg.theorems()) {
      for (const auto& [prem, concl] : brute_force_applications(*th, points, keys, known, reg)) {
        found.insert(found.end(), concl.begin(), concl.end());
      }
    }
    for (const auto& step : solve_equations(equations, known).steps) found.push_back(step.result().text());
    for (const auto& f : found) changed = add(f) || changed;
  }
  return keys;
}

inline State make_state(const std::vector<std::string>& facts, const Registry& reg) {
  State s;
  for (const auto& f : facts) s.insert(parse_fact(f, reg));
  return s;
}

// Random literal sets over at most 8 points: one or two shapes with
// their sides drawn, plus midpoints, points on sides, medians and
// altitudes attached to them, and optional numeric givens.
inline std::vector<std::string> random_initial_state(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  std::vector<std::string> facts;
  std::vector<std::string> names;
  auto fresh = [&] {
    std::string n(1, static_cast<char>('A' + names.size()));
    names.push_back(n);
    return n;
  };
  auto line = [&](const std::string& a, const std::string& b) { facts.push_back("Line(" + a + b + ")"); };
  std::vector<std::array<std::string, 3>> triangles;
  std::vector<std::array<std::string, 2>> sides;

  static const char* kTriangleShapes[] = {"Triangle", "IsoscelesTriangle", "EquilateralTriangle", "RightTriangle"};
  static const char* kQuadShapes[] = {"Parallelogram", "Rectangle", "Rhombus", "Square"};
  if (pick(3) == 0) {
    auto a = fresh(), b = fresh(), c = fresh(), d = fresh();
    facts.push_back(std::string(kQuadShapes[pick(4)]) + "(" + a + b + c + d + ")");
    line(a, b), line(b, c), line(c, d), line(d, a);
    sides = {{a, b}, {b, c}, {c, d}, {d, a}};
    if (pick(2)) {
      line(a, c);
      facts.push_back("Triangle(" + a + b + c + ")");
      triangles.push_back({a, b, c});
    }
  } else {
    auto a = fresh(), b = fresh(), c = fresh();
    std::string shape = kTriangleShapes[pick(4)];
    if (shape == "IsoscelesTriangle" || shape == "RightTriangle") {
      facts.push_back(shape + "(" + b + a + c + ")");
      facts.push_back("Triangle(" + a + b + c + ")");
    } else {
      facts.push_back(shape + "(" + a + b + c + ")");
      if (shape != "Triangle") facts.push_back("Triangle(" + a + b + c + ")");
    }
    line(a, b), line(b, c), line(c, a);
    sides = {{a, b}, {b, c}, {c, a}};
    triangles.push_back({a, b, c});
  }
  std::size_t extras = 1 + pick(3);
  for (std::size_t i = 0; i < extras && names.size() < 8; ++i) {
    switch (pick(4)) {
      case 0: {
        auto s = sides[pick(sides.size())];
        auto m = fresh();
        facts.push_back("IsMidpointOfLine(" + m + "," + s[0] + s[1] + ")");
        break;
      }
      case 1: {
        auto s = sides[pick(sides.size())];
        auto p = fresh();
        facts.push_back("PointOnLine(" + p + "," + s[0] + s[1] + ")");
        if (pick(2)) {
          for (const auto& v : names) {
            if (v != p && v != s[0] && v != s[1]) {
              line(p, v);
              break;
            }
          }
        }
        break;
      }
      case 2:
        if (!triangles.empty()) {
          auto t = triangles[pick(triangles.size())];
          auto m = fresh();
          facts.push_back("IsMedianOfTriangle(" + t[0] + m + "," + t[0] + t[1] + t[2] + ")");
          line(t[0], m);
        }
        break;
      default:
        if (!triangles.empty()) {
          auto t = triangles[pick(triangles.size())];
          auto d = fresh();
          facts.push_back("IsAltitudeOfTriangle(" + t[0] + d + "," + t[0] + t[1] + t[2] + ")");
          facts.push_back("PointOnLine(" + d + "," + t[1] + t[2] + ")");
          line(t[0], d);
        }
        break;
    }
  }
  // Two midpoints on a common vertex with the joining segment drawn.
  if (!triangles.empty() && names.size() <= 6 && pick(2)) {
    auto t = triangles[0];
    auto d = fresh(), e = fresh();
    facts.push_back("IsMidpointOfLine(" + d + "," + t[0] + t[1] + ")");
    facts.push_back("IsMidpointOfLine(" + e + "," + t[0] + t[2] + ")");
    line(d, e);
  }
  if (pick(2)) {
    auto s = sides[pick(sides.size())];
    facts.push_back("LengthOfLine(" + s[0] + s[1] + ")=" + std::to_string(2 + 2 * pick(6)));
  }
  return facts;
}

}  // namespace oracle
