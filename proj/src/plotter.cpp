#include "geogen/plotter.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>

namespace geogen {

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t uniform_index(Rng& rng, std::size_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "uniform_index over an empty range");
  return static_cast<std::size_t>(rng() % n);
}

PointRef point_name(std::size_t index) {
  std::string name(1, static_cast<char>('A' + index % 26));
  if (index >= 26) name += std::to_string(index / 26);
  return name;
}

std::size_t point_index(const PointRef& name) {
  std::size_t letter = static_cast<std::size_t>(name.at(0) - 'A');
  std::size_t round = name.size() > 1 ? std::stoul(name.substr(1)) : 0;
  return round * 26 + letter;
}

void SynthConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (min_relations < 1 || max_relations < min_relations) bad("relation range is empty");
  if (max_predicates < 2) bad("max_predicates must allow one relation");
  if (min_extra_segments < 0 || max_extra_segments < min_extra_segments) bad("extra segment range is empty");
  if (retry_budget < 1) bad("retry_budget must be at least 1");
  if (attempts_per_instantiation < 1) bad("attempts_per_instantiation must be at least 1");
  if (!(width > 0) || !(height > 0)) bad("canvas must have positive size");
}

// ------------------------------------------------------------- diagram

std::vector<Literal> Diagram::initial_literals(const Registry& registry) const {
  std::vector<Literal> out;
  std::set<std::string> seen;
  for (const auto& p : literals) {
    if (seen.insert(p.literal.text()).second) out.push_back(p.literal);
  }
  auto line = registry.predicate_ptr("Line");
  for (const auto& s : extra_segments) {
    Literal lit(line, {s});
    if (seen.insert(lit.text()).second) out.push_back(lit);
  }
  return out;
}

State Diagram::initial_state(const Registry& registry) const {
  State s;
  for (const auto& lit : initial_literals(registry)) s.insert(lit);
  return s;
}

namespace {

Vec2 sub(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
Vec2 add(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
Vec2 scale(Vec2 a, double k) { return {a.x * k, a.y * k}; }
double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
double norm(Vec2 a) { return std::hypot(a.x, a.y); }
double dist(Vec2 a, Vec2 b) { return norm(sub(a, b)); }

double triangle_area(Vec2 a, Vec2 b, Vec2 c) { return std::abs(cross(sub(b, a), sub(c, a))) / 2; }

// Parameter of p projected on segment ab (0 at a, 1 at b).
double segment_param(Vec2 p, Vec2 a, Vec2 b) {
  Vec2 ab = sub(b, a);
  double len2 = dot(ab, ab);
  return len2 == 0 ? 0 : dot(sub(p, a), ab) / len2;
}

double line_distance(Vec2 p, Vec2 a, Vec2 b) {
  double len = dist(a, b);
  return len == 0 ? dist(p, a) : std::abs(cross(sub(b, a), sub(p, a))) / len;
}

}  // namespace

bool Diagram::covers_segment(const Entity& segment, double tolerance) const {
  const auto& pts = segment.points();
  if (pts.size() != 2 || !has_point(pts[0]) || !has_point(pts[1])) return false;
  Vec2 p = points.at(pts[0]);
  Vec2 q = points.at(pts[1]);
  double tol = tolerance * std::max(width, height);
  for (const auto& s : segments) {
    Vec2 a = points.at(s.points()[0]);
    Vec2 b = points.at(s.points()[1]);
    double eps = tol / std::max(dist(a, b), 1e-12);
    auto inside = [&](Vec2 x) {
      double t = segment_param(x, a, b);
      return line_distance(x, a, b) <= tol && t >= -eps && t <= 1 + eps;
    };
    if (inside(p) && inside(q)) return true;
  }
  return false;
}

// ------------------------------------------------------------- sampling

std::vector<Binding> slot_bindings(const Literal& literal) {
  const auto& def = literal.predicate();
  std::vector<Binding> out;
  std::set<std::string> seen;
  std::vector<std::size_t> order(def.slots.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<std::vector<std::size_t>> arrangements{order};
  if (def.symmetric && order.size() == 2) arrangements.push_back({1, 0});
  for (const auto& arrangement : arrangements) {
    std::function<void(std::size_t, Binding&)> rec = [&](std::size_t slot, Binding& b) {
      if (slot == def.slots.size()) {
        std::set<PointRef> distinct;
        for (const auto& [v, p] : b) distinct.insert(p);
        if (distinct.size() == b.size() && seen.insert(binding_text(b)).second) out.push_back(b);
        return;
      }
      const auto& vars = def.slots[slot].vars;
      const Entity& arg = literal.args()[arrangement[slot]];
      if (vars.empty()) {
        rec(slot + 1, b);
        return;
      }
      if (arg.points().size() != vars.size()) return;
      for (const auto& ordering : arg.orderings(def.reflect)) {
        Binding next = b;
        bool ok = true;
        for (std::size_t i = 0; i < vars.size() && ok; ++i) {
          auto [it, inserted] = next.emplace(vars[i], ordering[i]);
          ok = inserted || it->second == ordering[i];
        }
        if (ok) rec(slot + 1, next);
      }
    };
    Binding b;
    rec(0, b);
  }
  return out;
}

namespace {

Literal literal_from_slots(const PredicateDef& def, const Binding& binding, const Registry& registry) {
  std::vector<Entity> args;
  for (const auto& slot : def.slots) {
    std::vector<PointRef> pts;
    for (const auto& v : slot.vars) pts.push_back(binding.at(v));
    args.push_back(Entity::make(slot.kind, pts));
  }
  return Literal(registry.predicate_ptr(def.name), std::move(args));
}

PlacedLiteral place_entity(const PredicateDef& def, const Registry& registry) {
  Binding b;
  auto vars = def.vars();
  for (std::size_t i = 0; i < vars.size(); ++i) b[vars[i]] = point_name(i);
  return {literal_from_slots(def, b, registry), b};
}

State state_of(const std::vector<PlacedLiteral>& placed) {
  State s;
  for (const auto& p : placed) s.insert(p.literal);
  return s;
}

// Attachments of a relation predicate to the current figure: bindings of
// its required patterns extended with any-point choices. Fresh
// variables are left unbound.
std::vector<Binding> attachments(const PredicateDef& rel, const State& state, const Registry& registry) {
  const PlotSpec& plot = *rel.plot;
  std::vector<Binding> base = plot.requires_.empty() ? std::vector<Binding>{Binding{}}
                                                     : enumerate_bindings(state, plot.requires_, registry);
  auto all_points = state.points();
  std::vector<Binding> out;
  for (const auto& b : base) {
    std::function<void(std::size_t, Binding&)> rec = [&](std::size_t i, Binding& cur) {
      if (i == plot.any_point.size()) {
        out.push_back(cur);
        return;
      }
      for (const auto& p : all_points) {
        bool used = std::any_of(cur.begin(), cur.end(), [&](const auto& kv) { return kv.second == p; });
        if (used) continue;
        cur[plot.any_point[i]] = p;
        rec(i + 1, cur);
        cur.erase(plot.any_point[i]);
      }
    };
    Binding cur = b;
    rec(0, cur);
  }
  return out;
}

// Literal text with fresh variables bound to placeholder names; equal
// signatures mean equivalent attachments.
std::string attachment_signature(const PredicateDef& rel, Binding b, const Registry& registry) {
  for (std::size_t i = 0; i < rel.plot->fresh.size(); ++i) b[rel.plot->fresh[i]] = "Z" + std::to_string(90 + i);
  return literal_from_slots(rel, b, registry).text();
}

bool binds_all_slots(const PredicateDef& rel, const Binding& b) {
  for (const auto& slot : rel.slots) {
    for (const auto& v : slot.vars) {
      if (!b.count(v) && std::find(rel.plot->fresh.begin(), rel.plot->fresh.end(), v) == rel.plot->fresh.end()) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace

std::vector<PlacedLiteral> expand_constructs(const std::vector<PlacedLiteral>& literals, const Registry& registry) {
  std::vector<PlacedLiteral> out;
  std::set<std::string> seen;
  std::function<void(const PlacedLiteral&)> visit = [&](const PlacedLiteral& p) {
    if (!seen.insert(p.literal.text()).second) return;
    out.push_back(p);
    for (const auto& pattern : p.literal.predicate().constructs) {
      const auto& sub_def = registry.predicate(pattern.predicate);
      Binding sub_binding;
      for (std::size_t i = 0; i < pattern.args.size() && i < sub_def.slots.size(); ++i) {
        const auto& vars = sub_def.slots[i].vars;
        for (std::size_t j = 0; j < vars.size() && j < pattern.args[i].vars.size(); ++j) {
          sub_binding[vars[j]] = p.binding.at(pattern.args[i].vars[j]);
        }
      }
      visit({instantiate_literal(pattern, p.binding, registry), sub_binding});
    }
  };
  for (const auto& p : literals) visit(p);
  return out;
}

std::vector<const PredicateDef*> compatible_relations(const PredicateDef& entity, const Registry& registry) {
  auto state = state_of(expand_constructs({place_entity(entity, registry)}, registry));
  std::vector<const PredicateDef*> out;
  for (const auto* rel : registry.predicates_of_kind(PredicateKind::Relation)) {
    if (!rel->sample || !rel->plot) continue;
    for (const auto& b : attachments(*rel, state, registry)) {
      if (binds_all_slots(*rel, b)) {
        out.push_back(rel);
        break;
      }
    }
  }
  return out;
}

std::vector<const PredicateDef*> sample_combination(const Registry& registry, const SynthConfig& config, Rng& rng) {
  config.validate();
  std::vector<const PredicateDef*> entities;
  for (const auto* p : registry.predicates_of_kind(PredicateKind::Entity)) {
    if (p->sample) entities.push_back(p);
  }
  if (entities.empty()) throw Error(ErrorCode::NoCompatibleRelation, "registry has no sampleable entity predicate");
  const PredicateDef* entity = entities[uniform_index(rng, entities.size())];
  auto relations = compatible_relations(*entity, registry);
  if (relations.empty()) throw Error(ErrorCode::NoCompatibleRelation, "no relation attaches to " + entity->name);
  int hi = std::min(config.max_relations, config.max_predicates - 1);
  int lo = std::min(config.min_relations, hi);
  int n = lo + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(hi - lo + 1)));
  std::vector<const PredicateDef*> combo{entity};
  for (int i = 0; i < n; ++i) combo.push_back(relations[uniform_index(rng, relations.size())]);
  return combo;
}

std::vector<PlacedLiteral> instantiate(const std::vector<const PredicateDef*>& combo, const Registry& registry,
                                       Rng& rng) {
  std::vector<PlacedLiteral> placed;
  if (combo.empty()) return placed;
  placed.push_back(place_entity(*combo[0], registry));
  std::size_t next = combo[0]->vars().size();
  std::set<std::string> used;
  for (std::size_t k = 1; k < combo.size(); ++k) {
    const PredicateDef& rel = *combo[k];
    if (!rel.plot) continue;
    auto state = state_of(expand_constructs(placed, registry));
    std::vector<Binding> candidates;
    std::set<std::string> signatures;
    for (const auto& b : attachments(rel, state, registry)) {
      if (!binds_all_slots(rel, b)) continue;
      auto sig = attachment_signature(rel, b, registry);
      if (used.count(sig) || !signatures.insert(sig).second) continue;
      candidates.push_back(b);
    }
    if (candidates.empty()) continue;
    Binding b = candidates[uniform_index(rng, candidates.size())];
    used.insert(attachment_signature(rel, b, registry));
    for (const auto& v : rel.plot->fresh) b[v] = point_name(next++);
    placed.push_back({literal_from_slots(rel, b, registry), b});
  }
  return placed;
}

// ----------------------------------------------------------- constraints

ConstraintSystem build_constraints(const std::vector<PlacedLiteral>& literals, const Registry& registry) {
  (void)registry;
  ConstraintSystem sys;
  std::set<PointRef> points;
  std::set<std::string> seen;
  std::set<std::vector<PointRef>> polygons;
  for (const auto& p : literals) {
    const auto& def = p.literal.predicate();
    if (def.kind == PredicateKind::Relation && def.constraints.empty()) {
      throw Error(ErrorCode::MissingConstraintTemplate, def.name + " has no constraint template");
    }
    for (const auto& arg : p.literal.args()) {
      points.insert(arg.points().begin(), arg.points().end());
      if (arg.kind() == EntityKind::Polygon) polygons.insert(arg.points());
    }
    for (const auto& t : def.constraints) {
      Constraint c;
      c.primitive = t.primitive;
      for (const auto& v : t.points) c.points.push_back(p.binding.at(v));
      c.source = p.literal.text();
      std::string key = c.primitive + ":" + join_points(c.points);
      if (seen.insert(key).second) sys.constraints.push_back(std::move(c));
    }
  }
  sys.points.assign(points.begin(), points.end());
  std::sort(sys.points.begin(), sys.points.end(),
            [](const PointRef& a, const PointRef& b) { return point_index(a) < point_index(b); });
  sys.polygons.assign(polygons.begin(), polygons.end());
  return sys;
}

ConstraintSystem build_constraints(const std::vector<Literal>& literals, const Registry& registry) {
  std::vector<PlacedLiteral> placed;
  for (const auto& lit : literals) {
    auto bindings = slot_bindings(lit);
    if (bindings.empty()) {
      if (!lit.predicate().constraints.empty()) {
        throw Error(ErrorCode::MissingConstraintTemplate, "no slot binding for " + lit.text());
      }
      placed.push_back({lit, {}});
    } else {
      placed.push_back({lit, bindings.front()});
    }
  }
  return build_constraints(placed, registry);
}

namespace {

// Polynomial forms in the coordinates; each is zero when the constraint
// holds. Every form is a generalized circle in any single point.
std::vector<double> raw_forms(const Constraint& c, const std::map<PointRef, Vec2>& pts) {
  auto P = [&](std::size_t i) { return pts.at(c.points[i]); };
  const auto& k = c.primitive;
  if (k == "midpoint") {
    Vec2 m = P(0), a = P(1), b = P(2);
    return {m.x - (a.x + b.x) / 2, m.y - (a.y + b.y) / 2};
  }
  if (k == "parallel") return {cross(sub(P(1), P(0)), sub(P(3), P(2)))};
  if (k == "perp") return {dot(sub(P(1), P(0)), sub(P(3), P(2)))};
  if (k == "eqlen") {
    Vec2 u = sub(P(1), P(0)), v = sub(P(3), P(2));
    return {dot(u, u) - dot(v, v)};
  }
  if (k == "collinear") return {cross(sub(P(1), P(0)), sub(P(2), P(0)))};
  if (k == "bisectfoot") {
    Vec2 d = P(0), b = P(1), a = P(2), cc = P(3);
    double ba = dist(b, a), bc = dist(b, cc);
    Vec2 foot = scale(add(scale(a, bc), scale(cc, ba)), 1 / (ba + bc));
    return {d.x - foot.x, d.y - foot.y};
  }
  return {};
}

}  // namespace

double constraint_residual(const Constraint& c, const std::map<PointRef, Vec2>& pts) {
  for (const auto& p : c.points) {
    if (!pts.count(p)) return std::numeric_limits<double>::infinity();
  }
  auto P = [&](std::size_t i) { return pts.at(c.points[i]); };
  const auto& k = c.primitive;
  if (k == "midpoint") return dist(P(0), scale(add(P(1), P(2)), 0.5));
  if (k == "parallel" || k == "perp") {
    Vec2 u = sub(P(1), P(0)), v = sub(P(3), P(2));
    double nu = norm(u), nv = norm(v);
    if (nu == 0 || nv == 0) return 1;
    return std::abs(k == "parallel" ? cross(u, v) : dot(u, v)) / (nu * nv);
  }
  if (k == "eqlen") return std::abs(dist(P(0), P(1)) - dist(P(2), P(3)));
  if (k == "collinear") return line_distance(P(2), P(0), P(1));
  if (k == "bisectfoot") {
    auto f = raw_forms(c, pts);
    return std::hypot(f[0], f[1]);
  }
  return 0;
}

bool inequality_holds(const Constraint& c, const std::map<PointRef, Vec2>& pts, double min_separation) {
  for (const auto& p : c.points) {
    if (!pts.count(p)) return false;
  }
  Vec2 p = pts.at(c.points[0]), a = pts.at(c.points[1]), b = pts.at(c.points[2]);
  if (c.primitive == "between") {
    double t = segment_param(p, a, b);
    return t > 0 && t < 1;
  }
  if (c.primitive == "offline") return line_distance(p, a, b) >= min_separation;
  return true;
}

// ---------------------------------------------------------------- solving

namespace {

// alpha*|P|^2 + beta*x + gamma*y + delta = 0
struct GenCircle {
  double alpha = 0, beta = 0, gamma = 0, delta = 0;
};

struct Locus {
  enum Kind { Line, Circle } kind = Line;
  // Line: n.P + d = 0 with |n| = 1. Circle: center, radius.
  Vec2 n;
  double d = 0;
  Vec2 center;
  double radius = 0;
};

struct Infeasible {
  std::string reason;
};

std::optional<Locus> to_locus(const GenCircle& g, double span) {
  double lin = std::hypot(g.beta, g.gamma);
  double scale_ref = std::abs(g.alpha) * span * span + lin * span + std::abs(g.delta);
  if (scale_ref == 0) return std::nullopt;  // tautology
  if (std::abs(g.alpha) * span * span <= 1e-12 * scale_ref) {
    if (lin * span <= 1e-12 * scale_ref) throw Infeasible{"contradictory constraint"};
    Locus l;
    l.kind = Locus::Line;
    l.n = {g.beta / lin, g.gamma / lin};
    l.d = g.delta / lin;
    return l;
  }
  Locus c;
  c.kind = Locus::Circle;
  c.center = {-g.beta / (2 * g.alpha), -g.gamma / (2 * g.alpha)};
  double r2 = dot(c.center, c.center) - g.delta / g.alpha;
  if (r2 <= 0) throw Infeasible{"empty circle"};
  c.radius = std::sqrt(r2);
  return c;
}

std::vector<Vec2> intersect_line_circle(Vec2 n, double d, Vec2 center, double r) {
  double s = dot(n, center) + d;  // signed distance of the center
  if (std::abs(s) > r) return {};
  Vec2 foot = sub(center, scale(n, s));
  double h = std::sqrt(std::max(0.0, r * r - s * s));
  Vec2 t{-n.y, n.x};
  if (h == 0) return {foot};
  return {add(foot, scale(t, h)), sub(foot, scale(t, h))};
}

std::vector<Vec2> intersect(const Locus& a, const Locus& b) {
  if (a.kind == Locus::Line && b.kind == Locus::Line) {
    double det = cross(a.n, b.n);
    if (std::abs(det) < 1e-12) return {};
    return {{(-a.d * b.n.y + b.d * a.n.y) / det, (-a.n.x * b.d + b.n.x * a.d) / det}};
  }
  if (a.kind == Locus::Circle && b.kind == Locus::Line) return intersect(b, a);
  if (a.kind == Locus::Line) return intersect_line_circle(a.n, a.d, b.center, b.radius);
  // Radical line of two circles: 2(cb-ca).P + |ca|^2-|cb|^2 - ra^2 + rb^2 = 0.
  Vec2 w = scale(sub(b.center, a.center), 2);
  double lw = norm(w);
  if (lw < 1e-12) return {};
  double d = dot(a.center, a.center) - dot(b.center, b.center) - a.radius * a.radius + b.radius * b.radius;
  return intersect_line_circle(scale(w, 1 / lw), d / lw, a.center, a.radius);
}

class CoordinateSolver {
 public:
  CoordinateSolver(const ConstraintSystem& sys, const SynthConfig& cfg, Rng& rng) : sys_(sys), cfg_(cfg), rng_(rng) {
    std::map<PointRef, std::size_t> rank;
    for (std::size_t i = 0; i < sys.points.size(); ++i) rank[sys.points[i]] = i;
    latest_.resize(sys.points.size());
    for (const auto& c : sys.constraints) {
      std::size_t r = 0;
      for (const auto& p : c.points) r = std::max(r, rank.at(p));
      latest_[r].push_back(&c);
    }
  }

  // Throws Infeasible.
  std::map<PointRef, Vec2> attempt() {
    pts_.clear();
    for (std::size_t i = 0; i < sys_.points.size(); ++i) place(i);
    double area_min = cfg_.degenerate_area_ratio * cfg_.width * cfg_.height;
    for (const auto& poly : sys_.polygons) {
      for (std::size_t i = 0; i < poly.size(); ++i) {
        Vec2 a = pts_.at(poly[i]), b = pts_.at(poly[(i + 1) % poly.size()]), c = pts_.at(poly[(i + 2) % poly.size()]);
        if (triangle_area(a, b, c) < area_min) throw Infeasible{"degenerate polygon"};
      }
    }
    for (const auto& c : sys_.constraints) {
      if (c.is_equality() ? constraint_residual(c, pts_) > cfg_.tolerance
                          : !inequality_holds(c, pts_, cfg_.min_separation())) {
        throw Infeasible{"constraint " + c.primitive + " unsatisfied"};
      }
    }
    return pts_;
  }

 private:
  GenCircle fit(const PointRef& p, const Constraint& c, std::size_t component) {
    const double s = cfg_.width / 10;
    auto f = [&](double x, double y) {
      pts_[p] = {x, y};
      return raw_forms(c, pts_)[component];
    };
    double f0 = f(0, 0), fxp = f(s, 0), fxm = f(-s, 0), fy = f(0, s);
    GenCircle g;
    g.alpha = (fxp + fxm - 2 * f0) / (2 * s * s);
    g.beta = (fxp - fxm) / (2 * s);
    g.delta = f0;
    g.gamma = (fy - g.alpha * s * s - g.delta) / s;
    double cx = 0.7 * s, cy = -1.3 * s;
    double model = g.alpha * (cx * cx + cy * cy) + g.beta * cx + g.gamma * cy + g.delta;
    double actual = f(cx, cy);
    double mag = std::abs(f0) + std::abs(fxp) + std::abs(fxm) + std::abs(fy) + 1e-300;
    pts_.erase(p);
    if (std::abs(model - actual) > 1e-9 * mag) throw Infeasible{"constraint " + c.primitive + " is not a circle or line"};
    return g;
  }

  bool in_bounds(Vec2 v) const {
    return v.x >= -0.5 * cfg_.width && v.x <= 1.5 * cfg_.width && v.y >= -0.5 * cfg_.height &&
           v.y <= 1.5 * cfg_.height && std::isfinite(v.x) && std::isfinite(v.y);
  }

  bool acceptable(const PointRef& p, Vec2 v, const std::vector<const Constraint*>& cons) {
    if (!in_bounds(v)) return false;
    for (const auto& [q, w] : pts_) {
      if (q != p && dist(v, w) < cfg_.min_separation()) return false;
    }
    pts_[p] = v;
    bool ok = true;
    for (const auto* c : cons) {
      ok = c->is_equality() ? constraint_residual(*c, pts_) <= cfg_.tolerance
                            : inequality_holds(*c, pts_, cfg_.min_separation());
      if (!ok) break;
    }
    pts_.erase(p);
    return ok;
  }

  Vec2 sample_box() {
    double x = cfg_.width * (0.1 + 0.8 * uniform01(rng_));
    double y = cfg_.height * (0.1 + 0.8 * uniform01(rng_));
    return {x, y};
  }

  Vec2 sample_on(const Locus& l, const Constraint* hint) {
    if (l.kind == Locus::Circle) {
      double t = 2 * M_PI * uniform01(rng_);
      return add(l.center, {l.radius * std::cos(t), l.radius * std::sin(t)});
    }
    if (hint) {
      Vec2 a = pts_.at(hint->points[1]), b = pts_.at(hint->points[2]);
      Vec2 q = add(a, scale(sub(b, a), 0.15 + 0.7 * uniform01(rng_)));
      return sub(q, scale(l.n, dot(l.n, q) + l.d));
    }
    // Uniform along the chord of the line inside the free region.
    Vec2 dir{-l.n.y, l.n.x};
    Vec2 base = scale(l.n, -l.d);
    double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
    auto clip = [&](double p0, double dp, double mn, double mx) {
      if (std::abs(dp) < 1e-15) {
        if (p0 < mn || p0 > mx) lo = 1, hi = 0;
        return;
      }
      double t1 = (mn - p0) / dp, t2 = (mx - p0) / dp;
      lo = std::max(lo, std::min(t1, t2));
      hi = std::min(hi, std::max(t1, t2));
    };
    clip(base.x, dir.x, 0.05 * cfg_.width, 0.95 * cfg_.width);
    clip(base.y, dir.y, 0.05 * cfg_.height, 0.95 * cfg_.height);
    if (!(lo < hi)) throw Infeasible{"line misses the canvas"};
    return add(base, scale(dir, lo + (hi - lo) * uniform01(rng_)));
  }

  void place(std::size_t index) {
    const PointRef& p = sys_.points[index];
    const auto& cons = latest_[index];
    std::vector<Locus> loci;
    const Constraint* hint = nullptr;
    for (const auto* c : cons) {
      if (!c->is_equality()) {
        if (c->primitive == "between" && c->points[0] == p) hint = c;
        continue;
      }
      std::size_t components = raw_forms(*c, pts_with_dummy(p)).size();
      for (std::size_t k = 0; k < components; ++k) {
        if (auto l = to_locus(fit(p, *c, k), cfg_.width)) loci.push_back(*l);
      }
    }
    std::vector<Vec2> candidates;
    if (loci.size() <= 1) {
      for (int tries = 0; tries < 8; ++tries) {
        Vec2 v = loci.empty() ? sample_box() : sample_on(loci[0], hint);
        if (acceptable(p, v, cons)) {
          pts_[p] = v;
          return;
        }
      }
      throw Infeasible{"no admissible sample for " + p};
    }
    for (std::size_t i = 0; i < loci.size(); ++i) {
      for (std::size_t j = i + 1; j < loci.size(); ++j) {
        for (const auto& v : intersect(loci[i], loci[j])) {
          bool dup = std::any_of(candidates.begin(), candidates.end(), [&](Vec2 w) { return dist(v, w) < 1e-9; });
          if (!dup && acceptable(p, v, cons)) candidates.push_back(v);
        }
      }
      if (loci.size() == 2) break;
    }
    if (candidates.empty()) throw Infeasible{"no intersection for " + p};
    pts_[p] = candidates[uniform_index(rng_, candidates.size())];
  }

  // Coordinates with `p` present so forms can be sized.
  const std::map<PointRef, Vec2>& pts_with_dummy(const PointRef& p) {
    dummy_ = pts_;
    dummy_[p] = {0, 0};
    return dummy_;
  }

  const ConstraintSystem& sys_;
  const SynthConfig& cfg_;
  Rng& rng_;
  std::vector<std::vector<const Constraint*>> latest_;
  std::map<PointRef, Vec2> pts_;
  std::map<PointRef, Vec2> dummy_;
};

Diagram make_diagram(const ConstraintSystem& sys, std::map<PointRef, Vec2> pts, const SynthConfig& cfg) {
  Diagram d;
  d.order = sys.points;
  d.points = std::move(pts);
  d.width = cfg.width;
  d.height = cfg.height;
  return d;
}

std::optional<Diagram> try_solve(const ConstraintSystem& sys, Rng& rng, const SynthConfig& cfg, int attempts,
                                 std::map<std::string, int>& reasons) {
  CoordinateSolver solver(sys, cfg, rng);
  for (int i = 0; i < attempts; ++i) {
    try {
      return make_diagram(sys, solver.attempt(), cfg);
    } catch (const Infeasible& e) {
      ++reasons[e.reason];
    }
  }
  return std::nullopt;
}

[[noreturn]] void unsatisfied(int attempts, const std::map<std::string, int>& reasons) {
  std::string msg = "no valid coordinates after " + std::to_string(attempts) + " attempts";
  for (const auto& [r, n] : reasons) msg += "; " + r + " x" + std::to_string(n);
  throw Error(ErrorCode::UnsatisfiedAfterRetries, msg);
}

}  // namespace

Diagram solve_coordinates(const ConstraintSystem& system, Rng& rng, const SynthConfig& config) {
  config.validate();
  std::map<std::string, int> reasons;
  if (auto d = try_solve(system, rng, config, config.retry_budget, reasons)) return *d;
  unsatisfied(config.retry_budget, reasons);
}

// ---------------------------------------------------------- augmentation

void augment_segments(Diagram& diagram, Rng& rng, int count) {
  double tol = 1e-6 * std::max(diagram.width, diagram.height);
  auto blocked = [&](const PointRef& p, const PointRef& q) {
    Vec2 a = diagram.points.at(p), b = diagram.points.at(q);
    for (const auto& s : diagram.segments) {
      if (s == Entity::make(EntityKind::Segment, {p, q})) return true;
      Vec2 x = diagram.points.at(s.points()[0]), y = diagram.points.at(s.points()[1]);
      if (line_distance(a, x, y) > tol || line_distance(b, x, y) > tol) continue;
      double ta = segment_param(a, x, y), tb = segment_param(b, x, y);
      if (std::max(std::min(ta, tb), 0.0) < std::min(std::max(ta, tb), 1.0)) return true;
    }
    // A segment through a third point reads as two segments.
    for (const auto& [r, v] : diagram.points) {
      if (r == p || r == q) continue;
      double t = segment_param(v, a, b);
      if (t > 0 && t < 1 && line_distance(v, a, b) <= tol) return true;
    }
    return false;
  };
  for (int added = 0; added < count; ++added) {
    std::vector<std::pair<PointRef, PointRef>> candidates;
    for (std::size_t i = 0; i < diagram.order.size(); ++i) {
      for (std::size_t j = i + 1; j < diagram.order.size(); ++j) {
        if (!blocked(diagram.order[i], diagram.order[j])) candidates.emplace_back(diagram.order[i], diagram.order[j]);
      }
    }
    if (candidates.empty()) return;
    auto [p, q] = candidates[uniform_index(rng, candidates.size())];
    auto seg = Entity::make(EntityKind::Segment, {p, q});
    diagram.segments.push_back(seg);
    diagram.extra_segments.push_back(seg);
    std::sort(diagram.segments.begin(), diagram.segments.end());
  }
}

void compute_label_offsets(Diagram& diagram) {
  Vec2 centroid;
  for (const auto& [p, v] : diagram.points) centroid = add(centroid, v);
  if (!diagram.points.empty()) centroid = scale(centroid, 1.0 / static_cast<double>(diagram.points.size()));
  double tol = 1e-6 * std::max(diagram.width, diagram.height);
  diagram.label_offsets.clear();
  for (const auto& [p, v] : diagram.points) {
    // Point away from the segments that touch p.
    Vec2 pull;
    for (const auto& s : diagram.segments) {
      Vec2 a = diagram.points.at(s.points()[0]), b = diagram.points.at(s.points()[1]);
      double t = segment_param(v, a, b);
      if (line_distance(v, a, b) > tol || t < -1e-9 || t > 1 + 1e-9) continue;
      for (Vec2 end : {a, b}) {
        double len = dist(end, v);
        if (len > tol) pull = add(pull, scale(sub(end, v), 1 / len));
      }
    }
    Vec2 dir = scale(pull, -1);
    if (norm(dir) < 1e-6) dir = sub(v, centroid);
    if (norm(dir) < 1e-6) dir = {0, 1};
    diagram.label_offsets[p] = scale(dir, 1 / norm(dir));
  }
}

namespace {

// Drawn segments from Line literals, then labels.
void finish_diagram(Diagram& diagram, std::vector<PlacedLiteral> placed, std::uint64_t seed) {
  diagram.literals = std::move(placed);
  diagram.seed = seed;
  for (const auto& p : diagram.literals) {
    if (p.literal.name() == "Line") diagram.segments.push_back(p.literal.args()[0]);
  }
  std::sort(diagram.segments.begin(), diagram.segments.end());
  diagram.segments.erase(std::unique(diagram.segments.begin(), diagram.segments.end()), diagram.segments.end());
}

}  // namespace

Diagram synthesize_diagram(const Registry& registry, const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  auto combo = sample_combination(registry, config, rng);
  std::map<std::string, int> reasons;
  int spent = 0;
  while (spent < config.retry_budget) {
    auto placed = expand_constructs(instantiate(combo, registry, rng), registry);
    auto system = build_constraints(placed, registry);
    int budget = std::min(config.attempts_per_instantiation, config.retry_budget - spent);
    spent += budget;
    auto diagram = try_solve(system, rng, config, budget, reasons);
    if (!diagram) continue;
    finish_diagram(*diagram, std::move(placed), seed);
    int extra = config.min_extra_segments +
                static_cast<int>(uniform_index(rng, static_cast<std::size_t>(config.max_extra_segments -
                                                                             config.min_extra_segments + 1)));
    augment_segments(*diagram, rng, extra);
    compute_label_offsets(*diagram);
    return *diagram;
  }
  unsatisfied(spent, reasons);
}

Diagram plot_literals(const std::vector<Literal>& literals, const Registry& registry, const SynthConfig& config,
                      std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  std::vector<PlacedLiteral> placed;
  for (const auto& lit : literals) {
    auto bindings = slot_bindings(lit);
    if (bindings.empty()) throw Error(ErrorCode::InvalidBinding, "no slot binding for " + lit.text());
    placed.push_back({lit, bindings.front()});
  }
  placed = expand_constructs(placed, registry);
  auto system = build_constraints(placed, registry);
  std::map<std::string, int> reasons;
  auto diagram = try_solve(system, rng, config, config.retry_budget, reasons);
  if (!diagram) unsatisfied(config.retry_budget, reasons);
  finish_diagram(*diagram, std::move(placed), seed);
  compute_label_offsets(*diagram);
  return *diagram;
}

// ------------------------------------------------------------- geometry

bool literal_holds(const Literal& literal, const Diagram& diagram, double tolerance) {
  for (const auto& arg : literal.args()) {
    for (const auto& p : arg.points()) {
      if (!diagram.has_point(p)) return false;
    }
    if (arg.kind() == EntityKind::Polygon) {
      const auto& pts = arg.points();
      for (std::size_t i = 0; i < pts.size(); ++i) {
        Vec2 a = diagram.points.at(pts[i]), b = diagram.points.at(pts[(i + 1) % pts.size()]),
             c = diagram.points.at(pts[(i + 2) % pts.size()]);
        if (triangle_area(a, b, c) <= tolerance) return false;
      }
    }
  }
  const auto& def = literal.predicate();
  if (def.name == "Line") return diagram.covers_segment(literal.args()[0], tolerance);
  if (def.constraints.empty()) return true;
  for (const auto& b : slot_bindings(literal)) {
    bool all = true;
    for (const auto& t : def.constraints) {
      Constraint c{t.primitive, {}, literal.text()};
      for (const auto& v : t.points) c.points.push_back(b.at(v));
      all = c.is_equality() ? constraint_residual(c, diagram.points) <= tolerance
                            : inequality_holds(c, diagram.points, tolerance);
      if (!all) break;
    }
    if (all) return true;
  }
  return false;
}

double measure_value(const MeasureSymbol& symbol, const Diagram& diagram) {
  std::vector<Vec2> v;
  for (const auto& p : symbol.entity().points()) {
    if (!diagram.has_point(p)) throw Error(ErrorCode::InvalidArgument, "point " + p + " is not in the diagram");
    v.push_back(diagram.points.at(p));
  }
  switch (symbol.kind()) {
    case MeasureKind::LengthOfLine:
      return dist(v[0], v[1]);
    case MeasureKind::MeasureOfAngle: {
      Vec2 a = sub(v[0], v[1]), c = sub(v[2], v[1]);
      return std::atan2(std::abs(cross(a, c)), dot(a, c)) * 180 / M_PI;
    }
    case MeasureKind::AreaOfPolygon: {
      double s = 0;
      for (std::size_t i = 0; i < v.size(); ++i) s += cross(v[i], v[(i + 1) % v.size()]);
      return std::abs(s) / 2;
    }
    case MeasureKind::PerimeterOfPolygon: {
      double s = 0;
      for (std::size_t i = 0; i < v.size(); ++i) s += dist(v[i], v[(i + 1) % v.size()]);
      return s;
    }
  }
  return 0;
}

}  // namespace geogen
