#include "subdiff/expression.hpp"
#include "subdiff/problems.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace subdiff;

namespace {
double eval(const std::string& s, double x = 0.0, double y = 0.0) { return Expression(s)(Point{x, y}); }
}  // namespace

TEST_CASE("arithmetic and precedence") {
  CHECK(eval("1 + 2 * 3") == 7.0);
  CHECK(eval("(1 + 2) * 3") == 9.0);
  CHECK(eval("2 ^ 3 ^ 2") == 512.0);
  CHECK(eval("-2 ^ 2") == -4.0);
  CHECK(eval("8 / 4 / 2") == 1.0);
  CHECK(eval("1 - 2 - 3") == -4.0);
  CHECK(eval("1.5e-3 * 2") == doctest::Approx(3e-3));
}

TEST_CASE("variables, constants and functions") {
  CHECK(eval("x * y", 2.0, 3.0) == 6.0);
  CHECK(eval("pi") == std::numbers::pi);
  CHECK(eval("sin(pi * x)", 0.5) == doctest::Approx(1.0));
  CHECK(eval("cos(0) + exp(0) + log(1) + sqrt(4) + abs(-3) + tan(0)") == 7.0);
  CHECK(eval("min(2, 3) + max(2, 3) + pow(2, 10)") == 1029.0);
}

TEST_CASE("built-in coefficients match their textual form") {
  for (const auto& p : {example_1d(), example_2d()}) {
    const Expression q(p.q_source), u0(p.u0_source), f(p.f_source);
    for (const Point pt : {Point{0.1, 0.2}, Point{0.5, 0.0}, Point{0.3, -0.4}, Point{0.9, 0.1}}) {
      CHECK(q(pt) == doctest::Approx(p.q_true(pt)).epsilon(1e-15));
      CHECK(u0(pt) == doctest::Approx(p.u0(pt)).epsilon(1e-15));
      CHECK(f(pt) == doctest::Approx(p.f(pt)).epsilon(1e-15));
    }
  }
}

TEST_CASE("clipped one-dimensional coefficient") {
  const auto q = example_1d().q_true;
  CHECK(q(Point{0.5, 0.0}) == 319.0 / 256.0);
  CHECK(q(Point{0.0, 0.0}) == 67.0 / 64.0);
  CHECK(q(Point{0.25, 0.0}) == doctest::Approx(1.0 + std::sin(std::numbers::pi / 4) / 4));
}

TEST_CASE("syntax errors") {
  CHECK_THROWS_AS(Expression("1 +"), ExpressionError);
  CHECK_THROWS_AS(Expression("(1"), ExpressionError);
  CHECK_THROWS_AS(Expression("z"), ExpressionError);
  CHECK_THROWS_AS(Expression("sin(1, 2)"), ExpressionError);
  CHECK_THROWS_AS(Expression("foo(1)"), ExpressionError);
  CHECK_THROWS_AS(Expression("1 2"), ExpressionError);
  CHECK_THROWS_AS(Expression(""), ExpressionError);
}

TEST_CASE("named problems") {
  CHECK(problem_by_name("example-4.1").dim == 1);
  CHECK(problem_by_name("1d-sine").dim == 1);
  CHECK(problem_by_name("example-4.2").dim == 2);
  CHECK(problem_by_name("2d-disk").dim == 2);
  CHECK_THROWS_AS(problem_by_name("nope"), std::invalid_argument);
  const auto c = custom_problem(2, "1 + x^2", "1 - x^2 - y^2", "1");
  CHECK(c.q_true(Point{2.0, 0.0}) == 5.0);
  CHECK_THROWS(custom_problem(3, "1", "0", "0"));
}
