#pragma once

#include <climits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "geogen/error.hpp"
#include "geogen/literal.hpp"
#include "geogen/registry.hpp"

namespace geogen {

using Binding = std::map<Var, PointRef>;

// "a=A,b=B,c=C" in variable order; the tie-break key for bindings.
std::string binding_text(const Binding& binding);

// One recorded derivation: the premise facts and theorem that produced
// `conclusion`. Solver derivations use kAlgebraTheoremId and an empty
// binding; `detail` then names the method and substitutions.
struct Hyperedge {
  std::vector<int> premises;
  int theorem_id = 0;
  Binding binding;
  std::string detail;
  int conclusion = -1;
};

// Facts with their first-derivation layer, derivation hyperedges, and
// values of measures fixed by assignment equations. Fact ids are dense
// and assigned in insertion order, so layers never decrease with id.
class State {
 public:
  // Returns (id, inserted). Assignments also record a known value;
  // a conflicting value throws InconsistentSystem.
  std::pair<int, bool> insert(const Fact& fact, int layer = 0);
  std::optional<int> find(const std::string& key) const;
  bool contains(const Fact& fact) const { return find(fact.key()).has_value(); }

  std::size_t size() const { return facts_.size(); }
  const Fact& fact(int id) const { return facts_[static_cast<std::size_t>(id)]; }
  int layer(int id) const { return layers_[static_cast<std::size_t>(id)]; }
  int max_layer() const { return layers_.empty() ? 0 : layers_.back(); }

  // Literal ids of one predicate, in insertion order.
  const std::vector<int>& literals_of(const std::string& predicate) const;
  const std::vector<int>& equation_ids() const { return equation_ids_; }

  struct Known {
    ExactValue value;
    int source = -1;  // id of the assignment fact
  };
  const std::map<MeasureSymbol, Known>& known() const { return known_; }
  // Value of `symbol` if it was fixed at a layer <= max_layer.
  std::optional<ExactValue> known_value(const MeasureSymbol& symbol, int max_layer = INT_MAX) const;

  int add_edge(Hyperedge edge);
  const std::vector<Hyperedge>& edges() const { return edges_; }
  // Hyperedge ids deriving fact `id` (its provenance).
  const std::vector<int>& in_edges(int id) const { return in_edges_[static_cast<std::size_t>(id)]; }

  std::set<PointRef> points() const;
  std::vector<std::string> fact_keys() const;

 private:
  std::vector<Fact> facts_;
  std::vector<int> layers_;
  std::vector<std::vector<int>> in_edges_;
  std::unordered_map<std::string, int> index_;
  std::map<std::string, std::vector<int>, std::less<>> by_predicate_;
  std::vector<int> equation_ids_;
  std::map<MeasureSymbol, Known> known_;
  std::vector<Hyperedge> edges_;
};

// A binding together with the facts it instantiates.
struct TheoremMatch {
  Binding binding;
  std::vector<int> premise_ids;  // literal premises, then algebraic support facts
  std::vector<Fact> conclusions;
  std::string key;  // canonical premise and conclusion sets
};

// All distinct applications of `theorem` against facts with layer <=
// max_layer. Bindings that instantiate identical premise and conclusion
// sets are merged, keeping the lexicographically smallest binding.
// Sorted by binding text.
std::vector<TheoremMatch> find_matches(const State& state, const TheoremDef& theorem, const Registry& registry,
                                       int max_layer = INT_MAX);
std::vector<Binding> match_premises(const State& state, const TheoremDef& theorem, const Registry& registry);
// Every injective binding under which all patterns hold, unmerged.
std::vector<Binding> enumerate_bindings(const State& state, const std::vector<LiteralPattern>& patterns,
                                        const Registry& registry);

struct Application {
  std::vector<Fact> new_facts;
  std::vector<Fact> duplicates;
  std::vector<int> edges;
};

// Rechecks the premises (InvalidBinding), then inserts the instantiated
// conclusions at `layer` (default: one above the highest premise).
Application apply_theorem(State& state, const TheoremDef& theorem, const Binding& binding,
                          const Registry& registry, int layer = -1);

// Throws InvalidBinding for unbound variables.
Literal instantiate_literal(const LiteralPattern& pattern, const Binding& binding, const Registry& registry);
// Instantiated conclusions of a theorem under a total binding.
std::vector<Fact> instantiate_conclusions(const TheoremDef& theorem, const Binding& binding, const Registry& registry);

// ---------------------------------------------------------------- solver

struct SolveStep {
  MeasureSymbol symbol;
  ExactValue value;
  std::string method;  // "isolation", "substitution" or "elimination"
  std::vector<Equation> equations;
  std::vector<MeasureSymbol> substituted;

  Equation result() const;
  std::string detail() const;
};

struct SolveResult {
  std::map<MeasureSymbol, ExactValue> new_known;
  std::vector<SolveStep> steps;
};

// One round: every unknown determined by `equations` given `known`,
// without feeding new values back in.
SolveResult solve_round(const std::vector<Equation>& equations, const std::map<MeasureSymbol, ExactValue>& known);
// Rounds until nothing new is found.
SolveResult solve_equations(const std::vector<Equation>& equations, const std::map<MeasureSymbol, ExactValue>& known);

// ----------------------------------------------------------------- chase

struct ChaseLimits {
  int max_layers = 32;
  std::size_t max_nodes = 20000;
  std::size_t max_bindings_per_theorem = 20000;
};

class DeductionGraph {
 public:
  DeductionGraph() = default;
  explicit DeductionGraph(State state) : state_(std::move(state)) {}

  const State& state() const { return state_; }
  std::size_t node_count() const { return state_.size(); }
  std::optional<int> find(const std::string& key) const { return state_.find(key); }
  int layer_count() const { return state_.size() == 0 ? 0 : state_.max_layer() + 1; }
  std::vector<int> nodes_at_layer(int layer) const;

  nlohmann::json to_json(const Registry& registry) const;

 private:
  State state_;
};

class ChaseLimitExceeded : public Error {
 public:
  ChaseLimitExceeded(const std::string& message, DeductionGraph partial)
      : Error(ErrorCode::LimitExceeded, message), partial_(std::move(partial)) {}
  const DeductionGraph& partial() const { return partial_; }

 private:
  DeductionGraph partial_;
};

// Breadth-first chase. Sweep s fires every theorem and one solver round
// against facts of layer < s; new facts get layer s. Stops at the
// fixpoint; throws ChaseLimitExceeded when a limit trips first.
DeductionGraph forward_chase(const State& initial, const Registry& registry, const ChaseLimits& limits = {});

// -------------------------------------------------------------- paths

struct ReasoningStep {
  std::vector<Fact> conditions;
  int theorem_id = 0;
  std::string theorem_name;
  std::string theorem_text;
  Binding binding;
  std::string detail;
  Fact conclusion;
  int layer = 0;
};

// Dependency closure of `target_key` with one derivation per node.
// Throws UnknownTarget.
DeductionGraph traceback(const DeductionGraph& graph, const std::string& target_key);

// Topological order of a traceback subgraph; throws CyclicSubgraph.
std::vector<ReasoningStep> linearize(const DeductionGraph& subgraph, const Registry& registry);

// Checks a step by re-deriving its conclusion from its conditions alone.
bool replay_step(const ReasoningStep& step, const Registry& registry);

}  // namespace geogen
