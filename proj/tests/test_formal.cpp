#include <algorithm>
#include <random>

#include "doctest.h"
#include "geogen/error.hpp"
#include "geogen/expr.hpp"
#include "geogen/literal.hpp"
#include "geogen/registry.hpp"

using namespace geogen;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an exception");
  return ErrorCode::InvalidArgument;
}

std::string point_name(std::size_t i) {
  std::string n(1, static_cast<char>('A' + i % 26));
  if (i >= 26) n += std::to_string(i / 26);
  return n;
}

}  // namespace

TEST_CASE("entities canonicalize") {
  CHECK(Entity::parse(EntityKind::Segment, "BA").text() == "AB");
  CHECK(Entity::parse(EntityKind::Angle, "CBA") == Entity::parse(EntityKind::Angle, "ABC"));
  CHECK(Entity::parse(EntityKind::Polygon, "BCA").text() == "ABC");
  CHECK(Entity::parse(EntityKind::Polygon, "ACB").text() == "ACB");
  CHECK(Entity::parse(EntityKind::Polygon, "ACB", true).text() == "ABC");
  CHECK(Entity::parse(EntityKind::Polygon, "CDAB").text() == "ABCD");
  CHECK(split_points("A1BC12") == std::vector<PointRef>{"A1", "B", "C12"});
  CHECK(code_of([] { Entity::parse(EntityKind::Segment, "A"); }) == ErrorCode::MalformedEntity);
  CHECK(code_of([] { Entity::parse(EntityKind::Angle, "ABA"); }) == ErrorCode::MalformedEntity);
  CHECK(code_of([] { Entity::parse(EntityKind::Polygon, "AB"); }) == ErrorCode::MalformedEntity);
  CHECK(code_of([] { split_points("Ab"); }) == ErrorCode::MalformedEntity);
}

TEST_CASE("canonicalization is idempotent") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    auto kind = static_cast<EntityKind>(rng() % 4);
    std::size_t n = fixed_point_count(kind);
    if (n == 0) n = 3 + rng() % 4;
    std::vector<PointRef> pool;
    for (std::size_t i = 0; i < 30; ++i) pool.push_back(point_name(i));
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(n);
    bool reflect = rng() % 2;
    auto once = Entity::make(kind, pool, reflect);
    auto twice = Entity::make(kind, once.points(), reflect);
    CHECK(once == twice);
    for (const auto& ordering : once.orderings(reflect)) {
      CHECK(Entity::make(kind, ordering, reflect) == once);
    }
  }
}

TEST_CASE("parse_literal") {
  const auto& reg = core_registry();
  auto lit = parse_literal("IsMidpointOfLine(P,AB)", reg);
  CHECK(lit.name() == "IsMidpointOfLine");
  REQUIRE(lit.args().size() == 2);
  CHECK(lit.args()[0] == Entity::parse(EntityKind::Point, "P"));
  CHECK(lit.args()[1] == Entity::parse(EntityKind::Segment, "AB"));
  CHECK(parse_literal("IsMidpointOfLine(P,BA)", reg) == lit);
  CHECK(code_of([&] { parse_literal("IsMidpointOfLine(P)", reg); }) == ErrorCode::ArityMismatch);
  CHECK(code_of([&] { parse_literal("Foo(P)", reg); }) == ErrorCode::UnknownPredicate);
  CHECK(code_of([&] { parse_literal("IsMidpointOfLine(P,A)", reg); }) == ErrorCode::MalformedEntity);
  CHECK(code_of([&] { parse_literal("IsMidpointOfLine(PQ,AB)", reg); }) == ErrorCode::SlotKindMismatch);
}

TEST_CASE("format_literal") {
  const auto& reg = core_registry();
  Literal lit(reg.predicate_ptr("IsMidsegmentOfTriangle"),
              {Entity::parse(EntityKind::Segment, "DE"), Entity::parse(EntityKind::Polygon, "ABC")});
  CHECK(format_literal(lit) == "IsMidsegmentOfTriangle(DE,ABC)");
  CHECK(format_literal(parse_literal("Triangle(BCA)", reg)) == "Triangle(ABC)");
  CHECK(format_literal(parse_literal("ParallelBetweenLine(DE,BC)", reg)) == "ParallelBetweenLine(BC,DE)");
}

TEST_CASE("literal round trip over random literals") {
  const auto& reg = core_registry();
  std::vector<std::shared_ptr<const PredicateDef>> preds;
  for (const auto& [name, p] : reg.predicates()) {
    if (p->kind != PredicateKind::Measure) preds.push_back(p);
  }
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto& def = preds[rng() % preds.size()];
    std::vector<Entity> args;
    for (const auto& slot : def->slots) {
      std::size_t n = fixed_point_count(slot.kind);
      if (n == 0) n = slot.vars.empty() ? 3 + rng() % 3 : slot.vars.size();
      std::vector<PointRef> pool;
      for (std::size_t i = 0; i < 40; ++i) pool.push_back(point_name(i));
      std::shuffle(pool.begin(), pool.end(), rng);
      pool.resize(n);
      args.push_back(Entity::make(slot.kind, pool));
    }
    Literal lit(def, args);
    auto text = format_literal(lit);
    auto back = parse_literal(text, reg);
    CHECK(back == lit);
    CHECK(format_literal(back) == text);
  }
}

TEST_CASE("load_registry") {
  const auto& reg = core_registry();
  CHECK(reg.predicates().size() >= 20);
  CHECK(reg.theorems().size() >= 25);
  CHECK(reg.predicates().size() == 21);
  CHECK(reg.theorems().size() == 35);

  auto empty = load_registry("");
  CHECK(empty.predicates().empty());
  CHECK(empty.theorems().empty());

  CHECK(code_of([] { load_registry("theorem 1 t: premises=[Foo(?a)] conclusions=[]"); }) ==
        ErrorCode::DanglingReference);
  CHECK(code_of([] {
          load_registry("predicate P(point:?a) kind=entity\npredicate P(point:?a) kind=entity\n");
        }) == ErrorCode::DuplicateName);
  try {
    load_registry("# header\npredicate P(point:?a) kind=entity\npredicate Q(point:?a) bogus\n");
    FAIL("expected SyntaxError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SyntaxError);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  // Conclusion variables must be bound by premises.
  CHECK(code_of([] {
          load_registry("predicate P(point:?a) kind=entity\ntheorem 1 t: premises=[P(?a)] conclusions=[P(?b)]");
        }) == ErrorCode::SyntaxError);
  // Equations may only use registered measures.
  CHECK(code_of([] {
          load_registry("predicate P(segment:?a?b) kind=entity\n"
                        "theorem 1 t: premises=[P(?a?b)] conclusions=[; LengthOfLine(?a?b)=1]");
        }) == ErrorCode::DanglingReference);
}

TEST_CASE("registry exposes definitions") {
  const auto& reg = core_registry();
  const auto* mid = reg.find_theorem_by_name("midsegment_recognition");
  REQUIRE(mid != nullptr);
  CHECK(mid->premises.size() == 4);
  CHECK(mid->conclusions.at(0).text() == "IsMidsegmentOfTriangle(?d?e,?a?b?c)");
  const auto& tri = reg.predicate("Triangle");
  CHECK(tri.reflect);
  CHECK(tri.constructs.size() == 3);
  const auto& mp = reg.predicate("IsMidpointOfLine");
  REQUIRE(mp.plot.has_value());
  CHECK(mp.plot->fresh == std::vector<Var>{"m"});
  for (const auto& [id, t] : reg.theorems()) CHECK_FALSE(t->text.empty());
}

TEST_CASE("parse_expression") {
  auto e = parse_expression("LengthOfLine(DE)*2");
  CHECK(e.op() == ExprOp::Mul);
  CHECK(e.lhs().op() == ExprOp::Symbol);
  CHECK(e.rhs() == Expr::constant(Rational(2)));

  auto half = parse_expression("1/2");
  REQUIRE(half.is_constant());
  CHECK(half.value() == Rational(1, 2));

  auto sum = parse_expression("MeasureOfAngle(ABC)+MeasureOfAngle(BCA)");
  CHECK(sum.op() == ExprOp::Add);
  CHECK(sum.lhs().measure().text() == "MeasureOfAngle(ABC)");
  CHECK(sum.rhs().measure().text() == "MeasureOfAngle(ACB)");

  CHECK(parse_expression("2.5").value() == Rational(5, 2));
  CHECK(parse_expression("-3^2").value() == Rational(-9));
  CHECK(parse_expression("2^3^2").value() == Rational(512));
  CHECK(code_of([] { parse_expression("1+"); }) == ErrorCode::SyntaxError);
  CHECK(code_of([] { parse_expression("Foo(AB)"); }) == ErrorCode::SyntaxError);
  CHECK(code_of([] { parse_expression("(1"); }) == ErrorCode::SyntaxError);
}

TEST_CASE("expression formatting round trips") {
  for (const char* text : {"LengthOfLine(BC)/2", "1/2*sqrt(3)", "-2*sqrt(2)", "LengthOfLine(AB)^2+LengthOfLine(BC)^2",
                           "LengthOfLine(AB)-(LengthOfLine(BC)-LengthOfLine(CD))", "LengthOfLine(AB)*(1/2)",
                           "(-2)^LengthOfLine(AB)", "-(LengthOfLine(AB)+1)", "3-1/2*sqrt(3)"}) {
    auto e = parse_expression(text);
    CHECK(format_expr(e) == text);
    CHECK(parse_expression(format_expr(e)) == e);
    CHECK(parse_expression(format_expr(e, ExprSyntax::Natural), ExprSyntax::Natural) == e);
  }
  CHECK(format_expr(parse_expression("MeasureOfAngle(CBA)/2"), ExprSyntax::Natural) == "\xE2\x88\xA0" "ABC/2");
}

TEST_CASE("exact values") {
  auto five_root_two = ExactValue::surd(Rational(1), 50);
  CHECK(five_root_two.str() == "5*sqrt(2)");
  CHECK(ExactValue(Rational(9)).sqrt()->str() == "3");
  CHECK(ExactValue(Rational(1, 2)).sqrt()->str() == "1/2*sqrt(2)");
  CHECK((five_root_two * five_root_two) == ExactValue(50));
  CHECK((ExactValue(3) + ExactValue::surd(Rational(2), 2)).str() == "3+2*sqrt(2)");
  CHECK(ExactValue(8).divided_by(ExactValue(2))->str() == "4");
  CHECK_FALSE((ExactValue(3) + ExactValue::surd(1, 2)).sqrt().has_value());
  for (const ExactValue& v : {ExactValue(Rational(-7, 2)), ExactValue::surd(Rational(-1, 2), 3),
                              ExactValue(3) - ExactValue::surd(Rational(1, 2), 3)}) {
    CHECK(format_expr(value_expr(v)) == v.str());
    CHECK(parse_expression(v.str()).evaluate([](const MeasureSymbol&) { return std::nullopt; }) == v);
  }
}

TEST_CASE("equations normalize commuted forms") {
  auto a = parse_equation("LengthOfLine(AB)^2+LengthOfLine(BC)^2=LengthOfLine(AC)^2");
  auto b = parse_equation("LengthOfLine(CB)^2+LengthOfLine(BA)^2=LengthOfLine(CA)^2");
  CHECK(a == b);
  CHECK(a.text() == b.text());
  auto c = parse_equation("LengthOfLine(BC)/2=LengthOfLine(DE)");
  CHECK(c.text() == "LengthOfLine(DE)=LengthOfLine(BC)/2");
  auto d = parse_equation("4=LengthOfLine(DE)");
  CHECK(d.text() == "LengthOfLine(DE)=4");
  REQUIRE(d.as_assignment().has_value());
  CHECK(d.as_assignment()->second == ExactValue(4));
  // Normalized text reparses to the same equation.
  for (const auto& eq : {a, c, d, parse_equation("MeasureOfAngle(ABC)+MeasureOfAngle(BCA)+MeasureOfAngle(CAB)=180")}) {
    CHECK(parse_equation(eq.text()) == eq);
    CHECK(parse_equation(eq.text(ExprSyntax::Natural), ExprSyntax::Natural) == eq);
  }
}
