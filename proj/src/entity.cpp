#include "geogen/entity.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "geogen/error.hpp"

namespace geogen {

bool is_point_name(std::string_view name) {
  if (name.empty() || !std::isupper(static_cast<unsigned char>(name[0]))) return false;
  return std::all_of(name.begin() + 1, name.end(),
                     [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; });
}

std::vector<PointRef> split_points(std::string_view text) {
  std::vector<PointRef> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!std::isupper(static_cast<unsigned char>(text[i]))) {
      throw Error(ErrorCode::MalformedEntity, "unexpected character in point list '" + std::string(text) + "'");
    }
    std::size_t j = i + 1;
    while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
    out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join_points(const std::vector<PointRef>& points) {
  std::string out;
  for (const auto& p : points) out += p;
  return out;
}

std::string_view to_string(EntityKind kind) {
  switch (kind) {
    case EntityKind::Point: return "point";
    case EntityKind::Segment: return "segment";
    case EntityKind::Angle: return "angle";
    case EntityKind::Polygon: return "polygon";
    case EntityKind::Circle: return "circle";
  }
  return "?";
}

EntityKind entity_kind_from_string(std::string_view name) {
  for (auto k : {EntityKind::Point, EntityKind::Segment, EntityKind::Angle, EntityKind::Polygon,
                 EntityKind::Circle}) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorCode::SyntaxError, "unknown entity kind '" + std::string(name) + "'");
}

std::size_t fixed_point_count(EntityKind kind) {
  switch (kind) {
    case EntityKind::Point: return 1;
    case EntityKind::Segment: return 2;
    case EntityKind::Angle: return 3;
    case EntityKind::Polygon: return 0;
    case EntityKind::Circle: return 1;
  }
  return 0;
}

namespace {

std::vector<PointRef> rotate_min_first(std::vector<PointRef> pts) {
  auto it = std::min_element(pts.begin(), pts.end());
  std::rotate(pts.begin(), it, pts.end());
  return pts;
}

}  // namespace

std::vector<PointRef> canonical_order(EntityKind kind, std::vector<PointRef> points, bool reflect) {
  switch (kind) {
    case EntityKind::Segment:
      if (points.size() == 2 && points[1] < points[0]) std::swap(points[0], points[1]);
      return points;
    case EntityKind::Angle:
      if (points.size() == 3 && points[2] < points[0]) std::swap(points[0], points[2]);
      return points;
    case EntityKind::Polygon: {
      auto forward = rotate_min_first(points);
      if (!reflect) return forward;
      std::reverse(points.begin(), points.end());
      auto backward = rotate_min_first(std::move(points));
      return std::min(forward, backward);
    }
    default:
      return points;
  }
}

std::vector<std::vector<PointRef>> equivalent_orderings(EntityKind kind,
                                                        const std::vector<PointRef>& points,
                                                        bool reflect) {
  std::vector<std::vector<PointRef>> out;
  switch (kind) {
    case EntityKind::Segment:
    case EntityKind::Angle: {
      out.push_back(points);
      auto rev = points;
      std::reverse(rev.begin(), rev.end());
      out.push_back(rev);
      break;
    }
    case EntityKind::Polygon: {
      auto add_rotations = [&](std::vector<PointRef> pts) {
        for (std::size_t i = 0; i < pts.size(); ++i) {
          out.push_back(pts);
          std::rotate(pts.begin(), pts.begin() + 1, pts.end());
        }
      };
      add_rotations(points);
      if (reflect) {
        auto rev = points;
        std::reverse(rev.begin(), rev.end());
        add_rotations(rev);
      }
      break;
    }
    default:
      out.push_back(points);
  }
  return out;
}

Entity Entity::make(EntityKind kind, std::vector<PointRef> points, bool reflect) {
  auto describe = [&] { return std::string(to_string(kind)) + " '" + join_points(points) + "'"; };
  for (const auto& p : points) {
    if (!is_point_name(p)) throw Error(ErrorCode::MalformedEntity, "bad point name '" + p + "'");
  }
  std::size_t want = fixed_point_count(kind);
  if (want != 0 && points.size() != want) {
    throw Error(ErrorCode::MalformedEntity, describe() + " needs " + std::to_string(want) + " points");
  }
  if (kind == EntityKind::Polygon && points.size() < 3) {
    throw Error(ErrorCode::MalformedEntity, describe() + " needs at least 3 points");
  }
  std::set<PointRef> distinct(points.begin(), points.end());
  if (distinct.size() != points.size()) {
    throw Error(ErrorCode::MalformedEntity, describe() + " repeats a point");
  }
  return Entity(kind, canonical_order(kind, std::move(points), reflect));
}

Entity Entity::parse(EntityKind kind, std::string_view text, bool reflect) {
  return make(kind, split_points(text), reflect);
}

std::vector<std::vector<PointRef>> Entity::orderings(bool reflect) const {
  return equivalent_orderings(kind_, points_, reflect);
}

std::vector<Entity> Entity::polygon_sides() const {
  std::vector<Entity> sides;
  if (kind_ != EntityKind::Polygon) return sides;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    sides.push_back(make(EntityKind::Segment, {points_[i], points_[(i + 1) % points_.size()]}));
  }
  return sides;
}

}  // namespace geogen
