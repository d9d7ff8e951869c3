#include "geogen/target_finder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

namespace geogen {

std::optional<TargetKind> target_kind(const Fact& fact) {
  if (fact.is_literal()) return TargetKind::Relation;
  if (fact.equation().as_assignment()) return TargetKind::Numeric;
  return std::nullopt;
}

void TargetFilter::validate() const {
  if (min_depth < 1 || min_depth > max_depth) throw Error(ErrorCode::InvalidArgument, "need 1 <= min_depth <= max_depth");
  if (max_steps < 1) throw Error(ErrorCode::InvalidArgument, "max_steps must be >= 1");
  if (min_count < 1 || min_count > max_count) throw Error(ErrorCode::InvalidArgument, "need 1 <= min_count <= max_count");
  if (!numeric && !relation) throw Error(ErrorCode::InvalidArgument, "no target kind allowed");
}

std::vector<TargetScore> score_targets(const DeductionGraph& graph, const Registry& registry) {
  std::vector<TargetScore> out;
  const State& st = graph.state();
  for (std::size_t i = 0; i < st.size(); ++i) {
    int id = static_cast<int>(i);
    if (st.layer(id) == 0) continue;
    auto steps = linearize(traceback(graph, st.fact(id).key()), registry);
    out.push_back({id, st.layer(id), static_cast<int>(steps.size())});
  }
  return out;
}

std::vector<int> select_targets(const DeductionGraph& graph, const Registry& registry, const TargetFilter& filter,
                                Rng& rng) {
  filter.validate();
  const State& st = graph.state();
  std::vector<int> eligible;
  for (std::size_t i = 0; i < st.size(); ++i) {
    int id = static_cast<int>(i);
    int depth = st.layer(id);
    if (depth < filter.min_depth || depth > filter.max_depth) continue;
    auto kind = target_kind(st.fact(id));
    if (!kind || (*kind == TargetKind::Numeric && !filter.numeric) ||
        (*kind == TargetKind::Relation && !filter.relation)) {
      continue;
    }
    auto steps = linearize(traceback(graph, st.fact(id).key()), registry);
    if (static_cast<int>(steps.size()) <= filter.max_steps) eligible.push_back(id);
  }
  if (eligible.empty()) throw Error(ErrorCode::NoEligibleTarget, "no node satisfies the target filter");
  auto span = static_cast<std::size_t>(filter.max_count - filter.min_count + 1);
  auto count = std::min(static_cast<std::size_t>(filter.min_count) + uniform_index(rng, span), eligible.size());
  // Partial Fisher-Yates: the first `count` entries are a uniform draw.
  for (std::size_t k = 0; k < count; ++k) {
    std::size_t j = k + uniform_index(rng, eligible.size() - k);
    std::swap(eligible[k], eligible[j]);
  }
  eligible.resize(count);
  return eligible;
}

std::string ReasoningPath::signature() const {
  std::string out;
  for (std::size_t i = 0; i < theorem_sequence.size(); ++i) {
    if (i) out += '-';
    out += std::to_string(theorem_sequence[i]);
  }
  return out;
}

namespace {

// Value of `symbol` solved from the givens and the equations concluded by
// theorem steps; solver steps are re-derived rather than read back.
std::optional<ExactValue> resolve(const ReasoningPath& path, const MeasureSymbol& symbol) {
  std::vector<Equation> equations;
  std::map<MeasureSymbol, ExactValue> known;
  auto take = [&](const Fact& f) {
    if (!f.is_equation()) return;
    if (auto a = f.equation().as_assignment()) {
      auto [it, fresh] = known.emplace(a->first, a->second);
      if (!fresh && !(it->second == a->second)) throw Error(ErrorCode::InconsistentSystem, f.key());
    } else {
      equations.push_back(f.equation());
    }
  };
  for (const auto& g : path.givens) take(g);
  for (const auto& s : path.steps) {
    if (s.theorem_id != kAlgebraTheoremId) take(s.conclusion);
  }
  if (auto it = known.find(symbol); it != known.end()) return it->second;
  auto solved = solve_equations(equations, known);
  if (auto it = solved.new_known.find(symbol); it != solved.new_known.end()) return it->second;
  return std::nullopt;
}

}  // namespace

ReasoningPath build_path(const DeductionGraph& graph, int target, const Registry& registry) {
  if (target < 0 || static_cast<std::size_t>(target) >= graph.node_count()) {
    throw Error(ErrorCode::UnknownTarget, "node " + std::to_string(target));
  }
  const Fact& fact = graph.state().fact(target);
  auto kind = target_kind(fact);
  if (!kind) throw Error(ErrorCode::InvalidArgument, "not a target: " + fact.key());
  auto sub = traceback(graph, fact.key());
  ReasoningPath path;
  path.target = fact;
  path.kind = *kind;
  path.depth = graph.state().layer(target);
  const State& st = sub.state();
  for (std::size_t i = 0; i < st.size(); ++i) {
    if (st.in_edges(static_cast<int>(i)).empty()) path.givens.push_back(st.fact(static_cast<int>(i)));
  }
  path.steps = linearize(sub, registry);
  for (const auto& s : path.steps) path.theorem_sequence.push_back(s.theorem_id);
  if (*kind == TargetKind::Numeric) {
    auto [symbol, value] = *fact.equation().as_assignment();
    auto again = resolve(path, symbol);
    if (!again || !(*again == value)) {
      throw Error(ErrorCode::InconsistentSystem, "path does not re-derive " + fact.key());
    }
    path.value = *again;
    path.answer = again->str();
  } else {
    path.answer = fact.key();
  }
  return path;
}

nlohmann::json step_to_json(const ReasoningStep& step) {
  nlohmann::json conditions = nlohmann::json::array();
  for (const auto& c : step.conditions) conditions.push_back(c.key());
  nlohmann::json binding = nlohmann::json::object();
  for (const auto& [v, p] : step.binding) binding[v] = p;
  return {{"conditions", conditions},
          {"theorem", {{"id", step.theorem_id}, {"name", step.theorem_name}, {"binding", binding}}},
          {"conclusion", step.conclusion.key()}};
}

nlohmann::json path_to_json(const ReasoningPath& path) {
  nlohmann::json givens = nlohmann::json::array();
  for (const auto& g : path.givens) givens.push_back(g.key());
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : path.steps) steps.push_back(step_to_json(s));
  return {{"givens", givens},
          {"steps", steps},
          {"target", path.target.key()},
          {"answer", path.answer},
          {"theorem_sequence", path.theorem_sequence},
          {"depth", path.depth}};
}

// ------------------------------------------------------------ numeric givens

namespace {

std::vector<MeasureSymbol> given_candidates(const State& state) {
  std::set<MeasureSymbol> out;
  for (std::size_t i = 0; i < state.size(); ++i) {
    const Fact& f = state.fact(static_cast<int>(i));
    if (!f.is_literal()) continue;
    for (const auto& e : f.literal().args()) {
      if (f.literal().name() == "Line" && e.kind() == EntityKind::Segment) {
        out.insert(MeasureSymbol(MeasureKind::LengthOfLine, e));
      } else if (e.kind() == EntityKind::Polygon && e.points().size() == 3) {
        const auto& p = e.points();
        for (std::size_t k = 0; k < 3; ++k) {
          auto angle = Entity::make(EntityKind::Angle, {p[(k + 2) % 3], p[k], p[(k + 1) % 3]});
          out.insert(MeasureSymbol(MeasureKind::MeasureOfAngle, angle));
        }
      }
    }
  }
  return {out.begin(), out.end()};
}

std::string decimal_text(double v, int places) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", places, v);
  return buf;
}

// Every value the chase fixes must stay a valid measure.
bool plausible(const State& state) {
  for (const auto& [s, k] : state.known()) {
    double v = k.value.to_double();
    if (v <= 0) return false;
    if (s.kind() == MeasureKind::MeasureOfAngle && v >= 180) return false;
  }
  return true;
}

}  // namespace

std::vector<Equation> add_numeric_givens(State& state, const Diagram& diagram, const Registry& registry,
                                         const GivenConfig& config, Rng& rng, const ChaseLimits& limits) {
  if (config.min_givens < 0 || config.min_givens > config.max_givens) {
    throw Error(ErrorCode::InvalidArgument, "need 0 <= min_givens <= max_givens");
  }
  auto wanted = static_cast<std::size_t>(config.min_givens) +
                uniform_index(rng, static_cast<std::size_t>(config.max_givens - config.min_givens + 1));
  auto candidates = given_candidates(state);
  std::vector<Equation> out;
  DeductionGraph closure = forward_chase(state, registry, limits);
  while (out.size() < wanted && !candidates.empty()) {
    std::size_t pick = uniform_index(rng, candidates.size());
    MeasureSymbol symbol = candidates[pick];
    candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(pick));
    if (closure.state().known_value(symbol)) continue;
    double measured = measure_value(symbol, diagram);
    for (int places : {0, 1}) {
      auto eq = parse_equation(symbol.text() + "=" + decimal_text(measured, places));
      State trial = state;
      try {
        trial.insert(eq, 0);
        auto next = forward_chase(trial, registry, limits);
        if (!plausible(next.state())) continue;
        state = std::move(trial);
        closure = std::move(next);
        out.push_back(eq);
        break;
      } catch (const ChaseLimitExceeded&) {
        throw;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::InconsistentSystem) throw;
      }
    }
  }
  return out;
}

}  // namespace geogen
