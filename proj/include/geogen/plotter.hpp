#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "geogen/deduction.hpp"
#include "geogen/literal.hpp"
#include "geogen/registry.hpp"

namespace geogen {

using Rng = std::mt19937_64;

// Uniform in [0, 1) from the top 53 bits; identical on every platform.
double uniform01(Rng& rng);
std::size_t uniform_index(Rng& rng, std::size_t n);

// "A".."Z", then "A1".."Z1", "A2", ...
PointRef point_name(std::size_t index);
std::size_t point_index(const PointRef& name);

struct Vec2 {
  double x = 0;
  double y = 0;
};

struct SynthConfig {
  int min_relations = 1;
  int max_relations = 3;
  int max_predicates = 4;  // entity + relations
  int min_extra_segments = 0;
  int max_extra_segments = 1;
  int retry_budget = 200;
  // Coordinate attempts per literal instantiation before re-instantiating.
  int attempts_per_instantiation = 10;
  double width = 100;
  double height = 100;
  double min_separation_ratio = 0.08;     // of width
  double degenerate_area_ratio = 1e-3;    // of width*height
  double tolerance = 1e-6;

  double min_separation() const { return min_separation_ratio * width; }
  void validate() const;  // InvalidArgument
};

// A literal with the slot-variable binding it was instantiated from.
struct PlacedLiteral {
  Literal literal;
  Binding binding;
};

struct Circle2 {
  PointRef center;
  double radius = 0;
};

// A numeric given drawn next to its segment or angle.
struct Annotation {
  MeasureSymbol symbol;
  std::string text;
};

struct Diagram {
  std::vector<PointRef> order;  // creation order
  std::map<PointRef, Vec2> points;
  std::vector<Entity> segments;  // drawn segments, sorted
  std::vector<Circle2> circles;
  std::map<PointRef, Vec2> label_offsets;  // unit directions
  double width = 100;
  double height = 100;
  std::vector<PlacedLiteral> literals;  // sampled and constructed literals
  std::vector<Entity> extra_segments;
  std::vector<Annotation> annotations;
  std::uint64_t seed = 0;

  // Layer-0 literals: every placed literal plus Line(..) for extra segments.
  std::vector<Literal> initial_literals(const Registry& registry) const;
  State initial_state(const Registry& registry) const;
  bool has_point(const PointRef& p) const { return points.count(p) > 0; }
  // True when a drawn segment contains both endpoints of `segment`.
  bool covers_segment(const Entity& segment, double tolerance = 1e-6) const;
};

// ------------------------------------------------------------- sampling

// Relation predicates whose plot requirements can attach to a diagram
// holding only `entity`.
std::vector<const PredicateDef*> compatible_relations(const PredicateDef& entity, const Registry& registry);

// One sampleable entity predicate followed by 1..n compatible relations.
// Throws NoCompatibleRelation.
std::vector<const PredicateDef*> sample_combination(const Registry& registry, const SynthConfig& config, Rng& rng);

// Binds the entity predicate to A, B, C, ... and attaches each relation
// to existing points and fresh ones. Relations with no unused
// attachment left are dropped.
std::vector<PlacedLiteral> instantiate(const std::vector<const PredicateDef*>& combo, const Registry& registry,
                                       Rng& rng);

// Adds construct literals recursively, keeping first occurrences.
std::vector<PlacedLiteral> expand_constructs(const std::vector<PlacedLiteral>& literals, const Registry& registry);

// Every binding of the predicate's slot variables consistent with the
// literal's (canonical) arguments.
std::vector<Binding> slot_bindings(const Literal& literal);

// ----------------------------------------------------------- constraints

struct Constraint {
  std::string primitive;
  std::vector<PointRef> points;
  std::string source;  // literal text

  bool is_equality() const { return primitive != "between" && primitive != "offline"; }
};

struct ConstraintSystem {
  std::vector<PointRef> points;  // creation order
  std::vector<Constraint> constraints;
  // Vertex triples that must not be collinear.
  std::vector<std::vector<PointRef>> polygons;
};

// Throws MissingConstraintTemplate for a relation without templates.
ConstraintSystem build_constraints(const std::vector<PlacedLiteral>& literals, const Registry& registry);
ConstraintSystem build_constraints(const std::vector<Literal>& literals, const Registry& registry);

// Largest normalized residual of an equality constraint (distances in
// canvas units, sines/cosines for directions).
double constraint_residual(const Constraint& c, const std::map<PointRef, Vec2>& points);
bool inequality_holds(const Constraint& c, const std::map<PointRef, Vec2>& points, double min_separation);

// Samples free coordinates and solves dependent points in creation order.
// Throws UnsatisfiedAfterRetries.
Diagram solve_coordinates(const ConstraintSystem& system, Rng& rng, const SynthConfig& config);

// Adds up to `count` segments between existing points.
void augment_segments(Diagram& diagram, Rng& rng, int count);

void compute_label_offsets(Diagram& diagram);

// Whole pipeline for one seed. Throws UnsatisfiedAfterRetries.
Diagram synthesize_diagram(const Registry& registry, const SynthConfig& config, std::uint64_t seed);
// Diagram realizing fixed literals plus their constructs, with no extra
// segments. Throws UnsatisfiedAfterRetries.
Diagram plot_literals(const std::vector<Literal>& literals, const Registry& registry, const SynthConfig& config,
                      std::uint64_t seed);

// ------------------------------------------------------------- geometry

// Truth of a literal on the diagram's coordinates.
bool literal_holds(const Literal& literal, const Diagram& diagram, double tolerance = 1e-6);
// Length, angle in degrees, polygon area or perimeter.
double measure_value(const MeasureSymbol& symbol, const Diagram& diagram);

// ------------------------------------------------------------ rendering

struct RenderSettings {
  int width_px = 512;
  int height_px = 512;
  int margin_px = 48;
  double point_radius = 3.5;
  double label_distance = 14;
  int font_size = 16;
};

std::string render_svg(const Diagram& diagram, const RenderSettings& settings = {});
// False when the build has no raster backend. Throws IoError on write failure.
bool render_png(const Diagram& diagram, const std::string& path, const RenderSettings& settings = {});
bool png_supported();

nlohmann::json diagram_to_json(const Diagram& diagram);
// Inverse of diagram_to_json except label offsets, which only affect
// rendering. Throws SyntaxError on malformed input.
Diagram diagram_from_json(const nlohmann::json& json, const Registry& registry);

}  // namespace geogen
