#pragma once

#include <compare>
#include <string>
#include <string_view>
#include <vector>

namespace geogen {

// Point names are an uppercase letter optionally followed by digits
// ("A", "P1", "B12").
using PointRef = std::string;

bool is_point_name(std::string_view name);

// Splits "ABC" or "A1BC2" into point names. Throws MalformedEntity.
std::vector<PointRef> split_points(std::string_view text);

// Inverse of split_points; names are lowercase-free so concatenation is unambiguous.
std::string join_points(const std::vector<PointRef>& points);

enum class EntityKind { Point, Segment, Angle, Polygon, Circle };

std::string_view to_string(EntityKind kind);
// "point", "segment", ... ; throws SyntaxError on unknown names.
EntityKind entity_kind_from_string(std::string_view name);

// Number of points an entity of this kind carries; 0 means "3 or more".
std::size_t fixed_point_count(EntityKind kind);

// A geometric entity over named points. Values are always canonical once
// constructed through make():
//   Segment  endpoints sorted
//   Angle    vertex in the middle, outer points sorted
//   Polygon  rotated so the smallest vertex leads; with `reflect` the
//            lexicographically smaller of both orientations is kept
//   Circle   identified by its center
class Entity {
 public:
  Entity() = default;

  // Validates and canonicalizes. Throws MalformedEntity.
  static Entity make(EntityKind kind, std::vector<PointRef> points, bool reflect = false);
  static Entity parse(EntityKind kind, std::string_view text, bool reflect = false);

  EntityKind kind() const { return kind_; }
  const std::vector<PointRef>& points() const { return points_; }
  const PointRef& vertex() const { return points_[1]; }  // Angle only

  // Concatenated point names, e.g. "AB" or "ABC".
  std::string text() const { return join_points(points_); }

  // Every raw point ordering that canonicalizes to this entity.
  std::vector<std::vector<PointRef>> orderings(bool reflect) const;

  // Sides of a polygon as canonical segments.
  std::vector<Entity> polygon_sides() const;

  friend bool operator==(const Entity&, const Entity&) = default;
  friend auto operator<=>(const Entity&, const Entity&) = default;

 private:
  Entity(EntityKind kind, std::vector<PointRef> points) : kind_(kind), points_(std::move(points)) {}

  EntityKind kind_ = EntityKind::Point;
  std::vector<PointRef> points_;
};

// Raw orderings equivalent to `points` under the kind's canonical symmetry.
std::vector<std::vector<PointRef>> equivalent_orderings(EntityKind kind,
                                                        const std::vector<PointRef>& points,
                                                        bool reflect);

// Canonical point order for a kind without validation.
std::vector<PointRef> canonical_order(EntityKind kind, std::vector<PointRef> points, bool reflect);

}  // namespace geogen
