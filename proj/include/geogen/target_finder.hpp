#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "geogen/deduction.hpp"
#include "geogen/plotter.hpp"

namespace geogen {

// Numeric targets are assignment equations (symbol = value); relation
// targets are derived literals. Other equations are never targets.
enum class TargetKind { Numeric, Relation };

std::optional<TargetKind> target_kind(const Fact& fact);

struct TargetScore {
  int node = -1;
  int depth = 0;       // layer of the node
  int step_count = 0;  // linearized length of its traceback
};

struct TargetFilter {
  int min_depth = 1;
  int max_depth = 6;
  int max_steps = 12;
  bool numeric = true;
  bool relation = true;
  int min_count = 1;  // targets per diagram
  int max_count = 1;

  void validate() const;  // InvalidArgument
};

// Every node above layer 0, in id order.
std::vector<TargetScore> score_targets(const DeductionGraph& graph, const Registry& registry);

// Distinct eligible nodes drawn uniformly; the count is drawn from
// [min_count, max_count] and clipped to the eligible set. Throws NoEligibleTarget.
std::vector<int> select_targets(const DeductionGraph& graph, const Registry& registry, const TargetFilter& filter,
                                Rng& rng);

struct ReasoningPath {
  std::vector<Fact> givens;  // subgraph leaves, in id order
  std::vector<ReasoningStep> steps;
  Fact target;
  TargetKind kind = TargetKind::Relation;
  std::optional<ExactValue> value;  // numeric targets only
  std::string answer;               // value text or the target literal
  std::vector<int> theorem_sequence;
  int depth = 0;

  // "10-11-0": the theorem ids joined in step order.
  std::string signature() const;
};

// Traceback plus linearization of `target`. A numeric answer is re-solved
// from the path's own givens and theorem conclusions and must match the
// chase (InconsistentSystem otherwise).
ReasoningPath build_path(const DeductionGraph& graph, int target, const Registry& registry);

nlohmann::json step_to_json(const ReasoningStep& step);
nlohmann::json path_to_json(const ReasoningPath& path);

// ------------------------------------------------------------ numeric givens

struct GivenConfig {
  int min_givens = 1;
  int max_givens = 2;
};

// Picks measures of drawn sides and polygon angles that the chase does not
// already determine, with values read from the diagram: integers when the
// rounded system stays consistent, else one decimal. Each accepted given
// is inserted into `state` at layer 0.
std::vector<Equation> add_numeric_givens(State& state, const Diagram& diagram, const Registry& registry,
                                         const GivenConfig& config, Rng& rng, const ChaseLimits& limits = {});

}  // namespace geogen
