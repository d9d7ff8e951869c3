#include "geogen/literal.hpp"

#include <algorithm>

#include "geogen/error.hpp"

namespace geogen {

Literal::Literal(std::shared_ptr<const PredicateDef> predicate, std::vector<Entity> args)
    : predicate_(std::move(predicate)), args_(std::move(args)) {
  const PredicateDef& def = *predicate_;
  if (args_.size() != def.arity()) {
    throw Error(ErrorCode::ArityMismatch, def.name + " takes " + std::to_string(def.arity()) + " arguments, got " +
                                              std::to_string(args_.size()));
  }
  for (std::size_t i = 0; i < args_.size(); ++i) {
    if (args_[i].kind() != def.slots[i].kind) {
      throw Error(ErrorCode::SlotKindMismatch, def.name + " argument " + std::to_string(i + 1) + " must be a " +
                                                   std::string(to_string(def.slots[i].kind)));
    }
    if (def.reflect && args_[i].kind() == EntityKind::Polygon) {
      args_[i] = Entity::make(EntityKind::Polygon, args_[i].points(), true);
    }
  }
  if (def.symmetric && args_.size() == 2 && args_[1].text() < args_[0].text()) std::swap(args_[0], args_[1]);
  text_ = def.name + "(";
  for (std::size_t i = 0; i < args_.size(); ++i) {
    if (i) text_ += ',';
    text_ += args_[i].text();
  }
  text_ += ')';
}

Literal parse_literal(std::string_view text, const Registry& registry) {
  auto open = text.find('(');
  if (open == std::string_view::npos || text.empty() || text.back() != ')') {
    throw Error(ErrorCode::SyntaxError, "expected Name(args) in '" + std::string(text) + "'");
  }
  std::string name(text.substr(0, open));
  auto def = registry.predicate_ptr(name);
  std::string_view inner = text.substr(open + 1, text.size() - open - 2);
  std::vector<std::string> parts;
  if (!inner.empty()) {
    std::size_t start = 0;
    for (std::size_t i = 0; i <= inner.size(); ++i) {
      if (i == inner.size() || inner[i] == ',') {
        std::string part;
        for (char c : inner.substr(start, i - start)) {
          if (c != ' ') part += c;
        }
        parts.push_back(part);
        start = i + 1;
      }
    }
  }
  if (parts.size() != def->arity()) {
    throw Error(ErrorCode::ArityMismatch, name + " takes " + std::to_string(def->arity()) + " arguments, got " +
                                              std::to_string(parts.size()) + " in '" + std::string(text) + "'");
  }
  std::vector<Entity> args;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    EntityKind kind = def->slots[i].kind;
    auto points = split_points(parts[i]);
    std::size_t want = fixed_point_count(kind);
    std::size_t minimum = want == 0 ? 3 : want;
    if (points.size() < minimum) {
      throw Error(ErrorCode::MalformedEntity, "'" + parts[i] + "' is too short for a " + std::string(to_string(kind)));
    }
    if (want != 0 && points.size() > want) {
      throw Error(ErrorCode::SlotKindMismatch, name + " argument " + std::to_string(i + 1) + " must be a " +
                                                   std::string(to_string(kind)) + ", got '" + parts[i] + "'");
    }
    args.push_back(Entity::make(kind, std::move(points), def->reflect));
  }
  return Literal(std::move(def), std::move(args));
}

std::string format_literal(const Literal& literal) { return literal.text(); }

Fact::Fact(Literal literal) : value_(std::move(literal)) { key_ = std::get<Literal>(value_).text(); }

Fact::Fact(Equation equation) : value_(std::move(equation)) { key_ = std::get<Equation>(value_).text(); }

Fact parse_fact(std::string_view text, const Registry& registry) {
  std::string compact;
  for (char c : text) {
    if (c != ' ' && c != '\t') compact += c;
  }
  if (compact.find('=') != std::string::npos) return Fact(parse_equation(compact));
  return Fact(parse_literal(compact, registry));
}

std::vector<Entity> referenced_entities(const Fact& fact) {
  if (fact.is_literal()) return fact.literal().args();
  std::vector<Entity> out;
  for (const auto& s : fact.equation().symbols()) out.push_back(s.entity());
  return out;
}

}  // namespace geogen
