#include "geogen/deduction.hpp"

#include <algorithm>
#include <queue>
#include <tuple>

namespace geogen {

std::string binding_text(const Binding& binding) {
  std::string out;
  for (const auto& [var, point] : binding) {
    if (!out.empty()) out += ',';
    out += var + "=" + point;
  }
  return out;
}

// ------------------------------------------------------------------ State

std::pair<int, bool> State::insert(const Fact& fact, int layer) {
  if (auto it = index_.find(fact.key()); it != index_.end()) return {it->second, false};
  int id = static_cast<int>(facts_.size());
  if (fact.is_equation()) {
    if (auto a = fact.equation().as_assignment()) {
      auto it = known_.find(a->first);
      if (it != known_.end() && !(it->second.value == a->second)) {
        throw Error(ErrorCode::InconsistentSystem,
                    a->first.text() + " takes values " + it->second.value.str() + " and " + a->second.str());
      }
      if (it == known_.end()) known_.emplace(a->first, Known{a->second, id});
    }
    equation_ids_.push_back(id);
  } else {
    by_predicate_[fact.literal().name()].push_back(id);
  }
  facts_.push_back(fact);
  layers_.push_back(layer);
  in_edges_.emplace_back();
  index_.emplace(fact.key(), id);
  return {id, true};
}

std::optional<int> State::find(const std::string& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::vector<int>& State::literals_of(const std::string& predicate) const {
  static const std::vector<int> kEmpty;
  auto it = by_predicate_.find(predicate);
  return it == by_predicate_.end() ? kEmpty : it->second;
}

std::optional<ExactValue> State::known_value(const MeasureSymbol& symbol, int max_layer) const {
  auto it = known_.find(symbol);
  if (it == known_.end() || layer(it->second.source) > max_layer) return std::nullopt;
  return it->second.value;
}

int State::add_edge(Hyperedge edge) {
  int id = static_cast<int>(edges_.size());
  in_edges_[static_cast<std::size_t>(edge.conclusion)].push_back(id);
  edges_.push_back(std::move(edge));
  return id;
}

std::set<PointRef> State::points() const {
  std::set<PointRef> out;
  for (const auto& f : facts_) {
    for (const auto& e : referenced_entities(f)) out.insert(e.points().begin(), e.points().end());
  }
  return out;
}

std::vector<std::string> State::fact_keys() const {
  std::vector<std::string> out;
  out.reserve(facts_.size());
  for (const auto& f : facts_) out.push_back(f.key());
  std::sort(out.begin(), out.end());
  return out;
}

// --------------------------------------------------------------- matching

namespace {

std::vector<PointRef> resolve_points(const std::vector<Var>& vars, const Binding& binding) {
  std::vector<PointRef> out;
  out.reserve(vars.size());
  for (const auto& v : vars) {
    auto it = binding.find(v);
    if (it == binding.end()) throw Error(ErrorCode::InvalidBinding, "variable ?" + v + " is unbound");
    out.push_back(it->second);
  }
  return out;
}

Equation instantiate_equation(const std::string& pattern, const Binding& binding) {
  return parse_equation(substitute_vars(pattern, [&](const Var& v) {
    auto it = binding.find(v);
    if (it == binding.end()) throw Error(ErrorCode::InvalidBinding, "variable ?" + v + " is unbound");
    return it->second;
  }));
}

// Ids supporting an algebraic premise at max_layer, or nullopt if it fails.
std::optional<std::vector<int>> check_algebraic(const State& state, const Equation& eq, int max_layer) {
  if (auto id = state.find(eq.text()); id && state.layer(*id) <= max_layer) return std::vector<int>{*id};
  std::vector<int> support;
  auto lookup = [&](const MeasureSymbol& s) -> std::optional<ExactValue> {
    auto v = state.known_value(s, max_layer);
    if (v) support.push_back(state.known().at(s).source);
    return v;
  };
  try {
    auto l = eq.lhs().evaluate(lookup);
    auto r = eq.rhs().evaluate(lookup);
    if (!l || !r || !(*l == *r)) return std::nullopt;
  } catch (const Error&) {
    return std::nullopt;
  }
  std::sort(support.begin(), support.end());
  support.erase(std::unique(support.begin(), support.end()), support.end());
  return support;
}

std::string match_key(const State& state, const std::vector<int>& premise_ids, const std::vector<Fact>& conclusions) {
  std::vector<std::string> p;
  for (int id : premise_ids) p.push_back(state.fact(id).key());
  std::vector<std::string> c;
  for (const auto& f : conclusions) c.push_back(f.key());
  std::sort(p.begin(), p.end());
  p.erase(std::unique(p.begin(), p.end()), p.end());
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  std::string key;
  for (const auto& s : p) key += s + ";";
  key += "|";
  for (const auto& s : c) key += s + ";";
  return key;
}

class Matcher {
 public:
  Matcher(const State& state, const TheoremDef& theorem, const Registry& registry, int max_layer, bool merge = true)
      : state_(state), theorem_(theorem), registry_(registry), max_layer_(max_layer), merge_(merge) {
    for (const auto& p : theorem.premises) defs_.push_back(&registry.predicate(p.predicate));
    for (const auto& eq : theorem.algebraic_premises) algebraic_.push_back(eq);
  }

  std::vector<TheoremMatch> run() {
    if (!theorem_.premises.empty()) premise(0);
    std::vector<TheoremMatch> out;
    out.reserve(best_.size());
    for (auto& [key, m] : best_) out.push_back(std::move(m));
    std::sort(out.begin(), out.end(),
              [](const TheoremMatch& a, const TheoremMatch& b) { return binding_text(a.binding) < binding_text(b.binding); });
    return out;
  }

 private:
  void premise(std::size_t k) {
    if (k == theorem_.premises.size()) {
      finish();
      return;
    }
    const auto& pattern = theorem_.premises[k];
    for (int id : state_.literals_of(pattern.predicate)) {
      if (state_.layer(id) > max_layer_) break;
      const Literal& lit = state_.fact(id).literal();
      ids_.push_back(id);
      arguments(k, lit, false, 0);
      if (defs_[k]->symmetric && !(lit.args()[0] == lit.args()[1])) arguments(k, lit, true, 0);
      ids_.pop_back();
    }
  }

  void arguments(std::size_t k, const Literal& lit, bool swapped, std::size_t arg) {
    const auto& pattern = theorem_.premises[k];
    if (arg == pattern.args.size()) {
      premise(k + 1);
      return;
    }
    std::size_t source = swapped ? 1 - arg : arg;
    const Entity& entity = lit.args()[source];
    const auto& vars = pattern.args[arg].vars;
    if (entity.points().size() != vars.size()) return;
    for (const auto& order : entity.orderings(defs_[k]->reflect)) {
      std::vector<Var> bound;
      bool ok = true;
      for (std::size_t i = 0; i < vars.size() && ok; ++i) {
        auto it = binding_.find(vars[i]);
        if (it != binding_.end()) {
          ok = it->second == order[i];
        } else if (used_.count(order[i])) {
          ok = false;
        } else {
          binding_.emplace(vars[i], order[i]);
          used_.insert(order[i]);
          bound.push_back(vars[i]);
        }
      }
      if (ok) arguments(k, lit, swapped, arg + 1);
      for (const auto& v : bound) {
        used_.erase(binding_.at(v));
        binding_.erase(v);
      }
    }
  }

  void finish() {
    std::vector<int> premise_ids = ids_;
    for (const auto& text : algebraic_) {
      Equation eq;
      try {
        eq = instantiate_equation(text, binding_);
      } catch (const Error&) {
        return;
      }
      auto support = check_algebraic(state_, eq, max_layer_);
      if (!support) return;
      premise_ids.insert(premise_ids.end(), support->begin(), support->end());
    }
    std::vector<Fact> conclusions;
    try {
      conclusions = instantiate_conclusions(theorem_, binding_, registry_);
    } catch (const Error&) {
      return;
    }
    std::string key = merge_ ? match_key(state_, premise_ids, conclusions) : binding_text(binding_);
    auto it = best_.find(key);
    if (it != best_.end() && binding_text(it->second.binding) <= binding_text(binding_)) return;
    best_[key] = TheoremMatch{binding_, std::move(premise_ids), std::move(conclusions), key};
  }

  const State& state_;
  const TheoremDef& theorem_;
  const Registry& registry_;
  int max_layer_;
  bool merge_;
  std::vector<const PredicateDef*> defs_;
  std::vector<std::string> algebraic_;
  Binding binding_;
  std::set<PointRef> used_;
  std::vector<int> ids_;
  std::map<std::string, TheoremMatch> best_;
};

bool same_edge(const Hyperedge& a, const Hyperedge& b) {
  if (a.theorem_id != b.theorem_id || a.conclusion != b.conclusion) return false;
  auto pa = a.premises;
  auto pb = b.premises;
  std::sort(pa.begin(), pa.end());
  std::sort(pb.begin(), pb.end());
  return pa == pb;
}

// Inserts `conclusion`, recording a hyperedge when it is new or when the
// edge is a valid alternative derivation.
std::optional<int> record(State& state, const Fact& conclusion, Hyperedge edge, int layer, bool& inserted) {
  auto [id, fresh] = state.insert(conclusion, layer);
  inserted = fresh;
  edge.conclusion = id;
  if (!fresh) {
    if (state.layer(id) == 0) return std::nullopt;
    for (int p : edge.premises) {
      if (state.layer(p) >= state.layer(id)) return std::nullopt;
    }
    for (int e : state.in_edges(id)) {
      if (same_edge(state.edges()[static_cast<std::size_t>(e)], edge)) return std::nullopt;
    }
  }
  return state.add_edge(std::move(edge));
}

Application apply_match(State& state, const TheoremDef& theorem, const TheoremMatch& match, int layer) {
  Application app;
  for (const auto& fact : match.conclusions) {
    Hyperedge edge{match.premise_ids, theorem.id, match.binding, "", -1};
    bool inserted = false;
    auto e = record(state, fact, std::move(edge), layer, inserted);
    (inserted ? app.new_facts : app.duplicates).push_back(fact);
    if (e) app.edges.push_back(*e);
  }
  return app;
}

}  // namespace

Literal instantiate_literal(const LiteralPattern& pattern, const Binding& binding, const Registry& registry) {
  std::vector<Entity> args;
  args.reserve(pattern.args.size());
  for (const auto& a : pattern.args) args.push_back(Entity::make(a.kind, resolve_points(a.vars, binding)));
  return Literal(registry.predicate_ptr(pattern.predicate), std::move(args));
}

std::vector<Fact> instantiate_conclusions(const TheoremDef& theorem, const Binding& binding, const Registry& registry) {
  std::vector<Fact> out;
  for (const auto& p : theorem.conclusions) out.emplace_back(instantiate_literal(p, binding, registry));
  for (const auto& e : theorem.conclusion_equations) out.emplace_back(instantiate_equation(e, binding));
  return out;
}

std::vector<TheoremMatch> find_matches(const State& state, const TheoremDef& theorem, const Registry& registry,
                                       int max_layer) {
  return Matcher(state, theorem, registry, max_layer).run();
}

std::vector<Binding> enumerate_bindings(const State& state, const std::vector<LiteralPattern>& patterns,
                                       const Registry& registry) {
  TheoremDef pseudo;
  pseudo.premises = patterns;
  std::vector<Binding> out;
  for (auto& m : Matcher(state, pseudo, registry, INT_MAX, false).run()) out.push_back(std::move(m.binding));
  return out;
}

std::vector<Binding> match_premises(const State& state, const TheoremDef& theorem, const Registry& registry) {
  std::vector<Binding> out;
  for (auto& m : find_matches(state, theorem, registry)) out.push_back(std::move(m.binding));
  return out;
}

Application apply_theorem(State& state, const TheoremDef& theorem, const Binding& binding, const Registry& registry,
                          int layer) {
  std::set<PointRef> seen;
  for (const auto& v : theorem.vars()) {
    auto it = binding.find(v);
    if (it == binding.end()) throw Error(ErrorCode::InvalidBinding, "variable ?" + v + " is unbound");
    if (!seen.insert(it->second).second) throw Error(ErrorCode::InvalidBinding, "point " + it->second + " bound twice");
  }
  TheoremMatch match;
  match.binding = binding;
  for (const auto& p : theorem.premises) {
    auto lit = instantiate_literal(p, binding, registry);
    auto id = state.find(lit.text());
    if (!id) throw Error(ErrorCode::InvalidBinding, "premise " + lit.text() + " does not hold");
    match.premise_ids.push_back(*id);
  }
  for (const auto& text : theorem.algebraic_premises) {
    auto eq = instantiate_equation(text, binding);
    auto support = check_algebraic(state, eq, INT_MAX);
    if (!support) throw Error(ErrorCode::InvalidBinding, "premise " + eq.text() + " does not hold");
    match.premise_ids.insert(match.premise_ids.end(), support->begin(), support->end());
  }
  match.conclusions = instantiate_conclusions(theorem, binding, registry);
  if (layer < 0) {
    layer = 0;
    for (int id : match.premise_ids) layer = std::max(layer, state.layer(id));
    layer += 1;
  }
  return apply_match(state, theorem, match, layer);
}

// ------------------------------------------------------------------ chase

std::vector<int> DeductionGraph::nodes_at_layer(int layer) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < state_.size(); ++i) {
    if (state_.layer(static_cast<int>(i)) == layer) out.push_back(static_cast<int>(i));
  }
  return out;
}

nlohmann::json DeductionGraph::to_json(const Registry& registry) const {
  nlohmann::json nodes = nlohmann::json::array();
  for (std::size_t i = 0; i < state_.size(); ++i) {
    int id = static_cast<int>(i);
    nodes.push_back({{"id", id}, {"fact", state_.fact(id).key()}, {"layer", state_.layer(id)}});
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : state_.edges()) {
    nlohmann::json binding = nlohmann::json::object();
    for (const auto& [v, p] : e.binding) binding[v] = p;
    const auto* th = registry.find_theorem(e.theorem_id);
    edges.push_back({{"premises", e.premises},
                     {"theorem", e.theorem_id},
                     {"theorem_name", th ? th->name : std::string(kAlgebraTheoremName)},
                     {"binding", binding},
                     {"detail", e.detail},
                     {"conclusion", e.conclusion}});
  }
  return {{"nodes", nodes}, {"hyperedges", edges}};
}

namespace {

void add_solver_steps(State& state, int layer, bool& changed) {
  int prev = layer - 1;
  std::vector<Equation> equations;
  for (int id : state.equation_ids()) {
    if (state.layer(id) > prev) break;
    const auto& eq = state.fact(id).equation();
    if (!eq.as_assignment()) equations.push_back(eq);
  }
  std::map<MeasureSymbol, ExactValue> known;
  for (const auto& [s, k] : state.known()) {
    if (state.layer(k.source) <= prev) known.emplace(s, k.value);
  }
  auto result = solve_round(equations, known);
  for (const auto& step : result.steps) {
    Hyperedge edge;
    edge.theorem_id = kAlgebraTheoremId;
    edge.detail = step.detail();
    for (const auto& eq : step.equations) edge.premises.push_back(*state.find(eq.text()));
    for (const auto& s : step.substituted) edge.premises.push_back(state.known().at(s).source);
    bool inserted = false;
    record(state, Fact(step.result()), std::move(edge), layer, inserted);
    changed = changed || inserted;
  }
}

}  // namespace

DeductionGraph forward_chase(const State& initial, const Registry& registry, const ChaseLimits& limits) {
  if (limits.max_layers <= 0 || limits.max_nodes == 0 || limits.max_bindings_per_theorem == 0) {
    throw Error(ErrorCode::InvalidArgument, "chase limits must be positive");
  }
  State state;
  for (std::size_t i = 0; i < initial.size(); ++i) state.insert(initial.fact(static_cast<int>(i)), 0);
  std::set<std::string> fired;
  for (int sweep = 1;; ++sweep) {
    bool changed = false;
    for (const auto& [id, theorem] : registry.theorems()) {
      auto matches = find_matches(state, *theorem, registry, sweep - 1);
      if (matches.size() > limits.max_bindings_per_theorem) {
        throw ChaseLimitExceeded("theorem " + theorem->name + " has " + std::to_string(matches.size()) + " bindings",
                                 DeductionGraph(std::move(state)));
      }
      for (const auto& m : matches) {
        if (!fired.insert(std::to_string(id) + "#" + m.key).second) continue;
        auto app = apply_match(state, *theorem, m, sweep);
        changed = changed || !app.new_facts.empty();
      }
      if (state.size() > limits.max_nodes) {
        throw ChaseLimitExceeded("node limit " + std::to_string(limits.max_nodes) + " exceeded",
                                 DeductionGraph(std::move(state)));
      }
    }
    add_solver_steps(state, sweep, changed);
    if (!changed) break;
    if (sweep >= limits.max_layers) {
      throw ChaseLimitExceeded("layer limit " + std::to_string(limits.max_layers) + " reached before the fixpoint",
                               DeductionGraph(std::move(state)));
    }
  }
  return DeductionGraph(std::move(state));
}

// ------------------------------------------------------------ traceback

namespace {

// Lowest theorem id, then binding text, then detail.
int choose_edge(const State& state, int node) {
  int best = -1;
  for (int e : state.in_edges(node)) {
    if (best < 0) {
      best = e;
      continue;
    }
    const auto& a = state.edges()[static_cast<std::size_t>(e)];
    const auto& b = state.edges()[static_cast<std::size_t>(best)];
    if (std::make_tuple(a.theorem_id, binding_text(a.binding), a.detail) <
        std::make_tuple(b.theorem_id, binding_text(b.binding), b.detail)) {
      best = e;
    }
  }
  return best;
}

}  // namespace

DeductionGraph traceback(const DeductionGraph& graph, const std::string& target_key) {
  const State& src = graph.state();
  auto target = src.find(target_key);
  if (!target) throw Error(ErrorCode::UnknownTarget, "no node " + target_key);
  std::map<int, int> chosen;  // node -> edge (-1 for leaves)
  std::vector<int> stack{*target};
  while (!stack.empty()) {
    int n = stack.back();
    stack.pop_back();
    if (chosen.count(n)) continue;
    int e = src.layer(n) == 0 ? -1 : choose_edge(src, n);
    chosen[n] = e;
    if (e >= 0) {
      for (int p : src.edges()[static_cast<std::size_t>(e)].premises) stack.push_back(p);
    }
  }
  State out;
  std::map<int, int> remap;
  for (const auto& [n, e] : chosen) remap[n] = out.insert(src.fact(n), src.layer(n)).first;
  for (const auto& [n, e] : chosen) {
    if (e < 0) continue;
    Hyperedge edge = src.edges()[static_cast<std::size_t>(e)];
    for (int& p : edge.premises) p = remap.at(p);
    edge.conclusion = remap.at(n);
    out.add_edge(std::move(edge));
  }
  return DeductionGraph(std::move(out));
}

std::vector<ReasoningStep> linearize(const DeductionGraph& subgraph, const Registry& registry) {
  const State& st = subgraph.state();
  const auto n = static_cast<int>(st.size());
  std::vector<int> edge_of(static_cast<std::size_t>(n), -1);
  std::vector<bool> done(static_cast<std::size_t>(n), false);
  for (int i = 0; i < n; ++i) {
    edge_of[static_cast<std::size_t>(i)] = choose_edge(st, i);
    if (edge_of[static_cast<std::size_t>(i)] < 0) done[static_cast<std::size_t>(i)] = true;
  }
  using Key = std::tuple<int, int, std::string, int>;
  std::vector<ReasoningStep> steps;
  std::set<Key> ready;
  auto refresh = [&] {
    for (int i = 0; i < n; ++i) {
      auto ui = static_cast<std::size_t>(i);
      if (done[ui]) continue;
      const auto& e = st.edges()[static_cast<std::size_t>(edge_of[ui])];
      bool ok = std::all_of(e.premises.begin(), e.premises.end(),
                            [&](int p) { return done[static_cast<std::size_t>(p)]; });
      if (ok) ready.insert({st.layer(i), e.theorem_id, st.fact(i).key(), i});
    }
  };
  refresh();
  while (!ready.empty()) {
    auto [layer, theorem_id, key, node] = *ready.begin();
    ready.erase(ready.begin());
    if (done[static_cast<std::size_t>(node)]) continue;
    done[static_cast<std::size_t>(node)] = true;
    const auto& e = st.edges()[static_cast<std::size_t>(edge_of[static_cast<std::size_t>(node)])];
    ReasoningStep step;
    for (int p : e.premises) step.conditions.push_back(st.fact(p));
    step.theorem_id = e.theorem_id;
    if (const auto* th = registry.find_theorem(e.theorem_id)) {
      step.theorem_name = th->name;
      step.theorem_text = th->text;
    } else {
      step.theorem_name = std::string(kAlgebraTheoremName);
      step.theorem_text = "solving the equations";
    }
    step.binding = e.binding;
    step.detail = e.detail;
    step.conclusion = st.fact(node);
    step.layer = layer;
    steps.push_back(std::move(step));
    refresh();
  }
  if (std::find(done.begin(), done.end(), false) != done.end()) {
    throw Error(ErrorCode::CyclicSubgraph, "subgraph has no topological order");
  }
  return steps;
}

bool replay_step(const ReasoningStep& step, const Registry& registry) {
  try {
    State state;
    for (const auto& c : step.conditions) state.insert(c, 0);
    if (step.theorem_id == kAlgebraTheoremId) {
      std::vector<Equation> equations;
      for (const auto& c : step.conditions) {
        if (c.is_equation()) equations.push_back(c.equation());
      }
      auto result = solve_equations(equations, {});
      for (const auto& s : result.steps) {
        if (Fact(s.result()) == step.conclusion) return true;
      }
      return false;
    }
    const auto* th = registry.find_theorem(step.theorem_id);
    if (!th) return false;
    auto app = apply_theorem(state, *th, step.binding, registry);
    auto has = [&](const std::vector<Fact>& v) { return std::find(v.begin(), v.end(), step.conclusion) != v.end(); };
    return has(app.new_facts) || has(app.duplicates);
  } catch (const Error&) {
    return false;
  }
}

}  // namespace geogen
