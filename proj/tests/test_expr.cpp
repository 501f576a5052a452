#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "issf/error.hpp"
#include "issf/expr.hpp"
#include "issf/field.hpp"
#include "oracles.hpp"

using namespace issf;

namespace {

const char* kF1 = "-x1 - 0.24*x2*sin(x1 - x2) - 0.5*u1^3";
const char* kF2 = "-x2 - 0.16*x1*sin(x2 - x1) - 0.5*u2";

double f1_direct(double x1, double x2, double u1) { return -x1 - 0.24 * x2 * std::sin(x1 - x2) - 0.5 * u1 * u1 * u1; }

}  // namespace

TEST_CASE("parse and evaluate the coupled dynamics") {
  const ScalarExpr e = parse(kF1, {"x1", "x2", "u1"});
  CHECK(e.eval(std::map<std::string, double>{{"x1", 1.0}, {"x2", 0.0}, {"u1", 0.0}}) == doctest::Approx(-1.0));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-5.0, 5.0);
  for (int i = 0; i < 200; ++i) {
    const double p[3] = {d(rng), d(rng), d(rng)};
    CHECK(e.eval(p) == doctest::Approx(f1_direct(p[0], p[1], p[2])).epsilon(1e-14));
  }
}

TEST_CASE("trivial literals and intrinsics") {
  const ScalarExpr zero = parse("0", {});
  CHECK(zero.is_zero());
  CHECK(zero.eval(std::span<const double>{}) == 0.0);

  const ScalarExpr m = parse("min(x, y)", {"x", "y"});
  CHECK(m.eval(std::map<std::string, double>{{"x", 2.0}, {"y", 3.0}}) == 2.0);
  CHECK(parse("max(x, y, 7)", {"x", "y"}).eval(std::map<std::string, double>{{"x", 2.0}, {"y", 3.0}}) == 7.0);

  const double r = 0.64;
  CHECK(parse("0.96*r", {"r"}).eval(std::span<const double>(&r, 1)) == doctest::Approx(0.96 * 0.64).epsilon(1e-15));
  const double x0 = 0.0;
  CHECK(parse("sin(x)", {"x"}).eval(std::span<const double>(&x0, 1)) == 0.0);
  const double x = 2.5;
  CHECK(std::fabs(parse("exp(ln(x))", {"x"}).eval(std::span<const double>(&x, 1)) - 2.5) <= 1e-12);
}

TEST_CASE("operator precedence and associativity") {
  auto at = [](const char* src, double x) { return parse(src, {"x"}).eval(std::span<const double>(&x, 1)); };
  CHECK(at("2^3^2", 0.0) == 512.0);
  CHECK(at("-x^2", 3.0) == -9.0);
  CHECK(at("1 - 2 - 3", 0.0) == -4.0);
  CHECK(at("12 / 3 / 2", 0.0) == 2.0);
  CHECK(at("2*x + 3*x*x", 2.0) == 16.0);
  CHECK(at("pow(x, 0.5)", 9.0) == doctest::Approx(3.0));
  CHECK(at("abs(x) + sign(x)", -4.0) == 3.0);
  CHECK(at("1.5e-3*x", 1000.0) == doctest::Approx(1.5));
}

TEST_CASE("parse errors carry positions") {
  try {
    parse("x1 + * 2", {"x1"});
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 1);
    CHECK(e.column() == 6);
  }
  try {
    parse("x1 + u3", {"x1", "u1"});
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("u3") != std::string::npos);
    CHECK(e.column() == 6);
  }
  CHECK_THROWS_AS(parse("sin(x, x)", {"x"}), ParseError);
  CHECK_THROWS_AS(parse("foo(x)", {"x"}), ParseError);
  CHECK_THROWS_AS(parse("(x", {"x"}), ParseError);
  CHECK_THROWS_AS(parse("", {"x"}), ParseError);
  CHECK_THROWS_AS(parse("x", {"sin"}), ParseError);
}

TEST_CASE("domain errors name the subexpression") {
  const double x = -1.0;
  try {
    parse("1 + ln(x)", {"x"}).eval(std::span<const double>(&x, 1));
    FAIL("expected a domain error");
  } catch (const DomainError& e) {
    CHECK(e.subexpression().find("ln") != std::string::npos);
  }
  CHECK_THROWS_AS(parse("sqrt(x)", {"x"}).eval(std::span<const double>(&x, 1)), DomainError);
  const double z = 0.0;
  CHECK_THROWS_AS(parse("1/x", {"x"}).eval(std::span<const double>(&z, 1)), DomainError);
  const double big = 1000.0;
  CHECK_THROWS_AS(parse("exp(x)", {"x"}).eval(std::span<const double>(&big, 1)), DomainError);
}

TEST_CASE("symbolic derivatives") {
  const ScalarExpr id = parse("x1", {"x1"});
  const double one = 1.0;
  CHECK(differentiate(id, "x1").eval(std::span<const double>(&one, 1)) == 1.0);
  CHECK(differentiate(parse("2*r^3", {"r"}), "r").eval(std::span<const double>(&one, 1)) == doctest::Approx(6.0));

  const ScalarExpr dm = differentiate(parse("min(x, 5)", {"x"}), "x");
  EvalFlags smooth;
  const double seven = 7.0;
  CHECK(dm.eval(std::span<const double>(&seven, 1), &smooth) == 0.0);
  CHECK_FALSE(smooth.nonsmooth);
  EvalFlags kink;
  const double five = 5.0;
  dm.eval(std::span<const double>(&five, 1), &kink);
  CHECK(kink.nonsmooth);
}

TEST_CASE("property: gradient agrees with central differences") {
  const std::vector<std::string> sources = {
      kF1,
      "x1*x2^2 - 3*cos(x1*u1)",
      "exp(0.3*x1)*sin(x2) + u1^4",
      "sqrt(1 + x1^2 + x2^2)",
      "tan(0.1*x1) - ln(2 + x2^2)*u1",
      "x1/(1 + x2^2) + pow(1 + u1^2, 1.5)",
  };
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  for (const auto& src : sources) {
    const ScalarField h = ScalarField::parse(src, {"x1", "x2", "u1"});
    for (int k = 0; k < 100; ++k) {
      std::vector<double> p = {d(rng), d(rng), d(rng)};
      for (std::size_t i = 0; i < 3; ++i) {
        auto slice = [&](double t) {
          std::vector<double> q = p;
          q[i] = t;
          return h.value(q);
        };
        const double fd = oracle::central_difference(slice, p[i], 1e-5);
        const double g = h.gradient()[i].eval(p);
        CHECK(std::fabs(g - fd) <= 1e-6 * std::max(1.0, std::fabs(fd)));
      }
    }
  }
}

TEST_CASE("property: printed expressions re-parse to the same tree") {
  const std::vector<std::string> sources = {kF1, kF2, "-(x1 - 2)^2/3", "max(x1, -x2, 0.5)", "2^-x1", "-2^2"};
  for (const auto& src : sources) {
    const ScalarExpr e = parse(src, {"x1", "x2", "u1", "u2"});
    const ScalarExpr again = parse(e.to_string(), {"x1", "x2", "u1", "u2"});
    CHECK_MESSAGE(structurally_equal(e, again), src);
  }
}

TEST_CASE("substitution and display") {
  const ScalarExpr gamma = simplify(sum(parse("2*r^3", {"r"}), parse("2*r", {"r"})));
  CHECK(to_display(gamma, {{"r", "‖u‖"}}) == "2‖u‖³ + 2‖u‖");

  const ScalarExpr inner = parse("x1 + 1", {"x1"});
  const ScalarExpr composed = substitute(parse("3*r^2", {"r"}), "r", inner);
  const double x = 2.0;
  CHECK(composed.eval(std::span<const double>(&x, 1)) == doctest::Approx(27.0));
  CHECK(composed.variables() == std::vector<std::string>{"x1"});
}

TEST_CASE("lie derivative along the coupled dynamics") {
  const VariablePartition part{{"x1"}, {"x2"}, {"u1", "u2"}};
  const VectorField f = VectorField::parse({kF1, kF2}, part);
  const ScalarField h1 = ScalarField::parse("x1", {"x1"});

  CHECK(lie_derivative(h1, f, {{"x1", -1.0}, {"x2", 0.0}, {"u1", 0.0}, {"u2", 0.0}}) == doctest::Approx(1.0));
  const double expected = 1.0 + 0.12 * std::sin(1.5);
  CHECK(lie_derivative(h1, f, {{"x1", -1.0}, {"x2", 0.5}, {"u1", 0.0}, {"u2", 0.0}}) ==
        doctest::Approx(expected).epsilon(1e-14));

  const VectorField zero = VectorField::parse({"0", "0"}, part);
  const ScalarField h = ScalarField::parse("x1^2 + sin(x2)", {"x1", "x2"});
  CHECK(lie_derivative(h, zero, {{"x1", 0.3}, {"x2", -2.0}, {"u1", 1.0}, {"u2", 1.0}}) == 0.0);

  CHECK_THROWS_AS(lie_derivative(h1, f, {{"x1", 1.0}}), DimensionError);
}

TEST_CASE("property: lie derivative equals gradient dot field") {
  const VariablePartition part{{"x1"}, {"x2"}, {"u1", "u2"}};
  const VectorField f = VectorField::parse({kF1, kF2}, part);
  const ScalarField h = ScalarField::parse("x1*x2 + x2^3", {"x1", "x2"});
  const LieDerivative lie(h, f);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(-3.0, 3.0);
  for (int k = 0; k < 200; ++k) {
    const std::vector<double> p = {d(rng), d(rng), d(rng), d(rng)};
    const double x1 = p[0];
    const double x2 = p[1];
    const double fx1 = f1_direct(x1, x2, p[2]);
    const double fx2 = -x2 - 0.16 * x1 * std::sin(x2 - x1) - 0.5 * p[3];
    const double expected = x2 * fx1 + (x1 + 3.0 * x2 * x2) * fx2;
    CHECK(lie(p) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(lie.field(p) == doctest::Approx(x1 * x2 + x2 * x2 * x2).epsilon(1e-14));
  }
}
