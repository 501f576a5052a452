#include <doctest.h>

#include <cmath>
#include <random>

#include "issf/error.hpp"
#include "issf/gains.hpp"
#include "oracles.hpp"

using namespace issf;

TEST_CASE("class names round-trip") {
  for (GainClass c : {GainClass::K, GainClass::KInfinity, GainClass::ExtendedK, GainClass::ExtendedKInfinity}) {
    CHECK(parse_gain_class(to_string(c)) == c);
  }
  CHECK_FALSE(parse_gain_class("K-infinity"));
  CHECK(weaker(GainClass::KInfinity, GainClass::ExtendedK) == GainClass::K);
  CHECK(weaker(GainClass::ExtendedKInfinity, GainClass::ExtendedK) == GainClass::ExtendedK);
}

TEST_CASE("class certification") {
  const auto cubic = certify_class(GainFn::parse("2*r^3", GainClass::KInfinity, 10.0));
  CHECK(cubic.passed());
  REQUIRE(cubic.unbounded_probe);
  CHECK(2.0 * std::pow(*cubic.unbounded_probe, 3) >= 1e6);

  const auto zero = certify_class(GainFn::parse("0", GainClass::K, 10.0));
  CHECK(zero.verdict == Verdict::Fail);
  CHECK(zero.reason.find("increasing") != std::string::npos);

  const auto bump = certify_class(GainFn::parse("r - r^3", GainClass::K, 2.0));
  CHECK(bump.verdict == Verdict::Fail);
  REQUIRE(bump.failure_point);
  CHECK(std::fabs(*bump.failure_point - 1.0 / std::sqrt(3.0)) <= 2.0 * 2.0 / 4095.0);

  CHECK_FALSE(certify_class(GainFn::parse("r + 1", GainClass::K, 5.0)).passed());
  CHECK(certify_class(GainFn::parse("r^3", GainClass::ExtendedKInfinity, 10.0)).passed());
  CHECK_FALSE(certify_class(GainFn::parse("r^2", GainClass::ExtendedK, 10.0)).passed());
  CHECK(certify_class(GainFn::parse("r^2", GainClass::K, 10.0)).passed());
}

TEST_CASE("bounded gains are K but not K-inf") {
  const auto bounded = certify_class(GainFn::parse("r/(1 + r)", GainClass::KInfinity, 10.0));
  CHECK(bounded.verdict == Verdict::Fail);
  CHECK_FALSE(bounded.unbounded_probe);
  CHECK(certify_class(GainFn::parse("r/(1 + r)", GainClass::K, 10.0)).passed());
  const auto extended = certify_class(GainFn::parse("r/(1 + abs(r))", GainClass::ExtendedKInfinity, 10.0));
  CHECK(extended.verdict == Verdict::Fail);
}

TEST_CASE("inversion") {
  CHECK(invert(GainFn::parse("0.96*r", GainClass::ExtendedKInfinity, 10.0), 0.96) == doctest::Approx(1.0));
  CHECK(invert(GainFn::parse("2*r^3", GainClass::KInfinity, 10.0), 2.0) == doctest::Approx(1.0));
  const double x = invert(GainFn::parse("r + r^3", GainClass::KInfinity, 10.0), 2.0);
  CHECK(std::fabs(x - 1.0) <= 1e-10);
  CHECK_THROWS_AS(invert(GainFn::parse("r", GainClass::K, 3.0), 5.0), BracketError);
  CHECK_THROWS_AS(invert(GainFn::parse("r", GainClass::K, 3.0), -1.0), BracketError);
}

TEST_CASE("property: inversion agrees with a bisection oracle") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> coef(0.05, 2.0);
  std::uniform_real_distribution<double> where(-0.95, 0.95);
  for (int k = 0; k < 30; ++k) {
    const oracle::SaturatedOdd s{coef(rng), coef(rng), coef(rng)};
    const GainFn g = GainFn::parse(s.text(), GainClass::ExtendedKInfinity, 20.0);
    const double y = where(rng) * s(20.0);
    const double ref = oracle::bisect(s, y, -20.0, 20.0);
    CHECK(std::fabs(invert(g, y) - ref) <= 1e-10 * (1.0 + std::fabs(ref)));
    const GainFn inv = inverse(g);
    CHECK(std::fabs(inv(y) - ref) <= 1e-10 * (1.0 + std::fabs(ref)));
    CHECK(std::fabs(g(inv(y)) - y) <= 1e-11 * (1.0 + std::fabs(y)));
  }
}

TEST_CASE("composition") {
  const GainFn p1 = GainFn::parse("0.96*r", GainClass::ExtendedKInfinity, 100.0);
  const GainFn p2 = GainFn::parse("0.64*r", GainClass::ExtendedKInfinity, 100.0);
  const GainFn c = compose(p1, p2);
  const double slope = 0.96 * 0.64;
  for (double r = -100.0; r <= 100.0; r += 0.731) CHECK(std::fabs(c(r) - slope * r) <= 1e-12 * (1.0 + std::fabs(r)));
  CHECK(c.claimed() == GainClass::ExtendedKInfinity);

  const GainFn g = GainFn::parse("r^3 + r", GainClass::ExtendedKInfinity, 5.0);
  const GainFn gi = compose(g, GainFn::identity(GainClass::ExtendedKInfinity, 5.0));
  for (double r = -5.0; r <= 5.0; r += 0.25) CHECK(gi(r) == g(r));

  const GainFn cube = compose(GainFn::parse("2*r^3", GainClass::K, 10.0), GainFn::parse("2*r", GainClass::K, 5.0));
  CHECK(cube(1.0) == doctest::Approx(16.0));

  CHECK_THROWS_AS(compose(GainFn::parse("r", GainClass::K, 1.0), GainFn::parse("2*r", GainClass::K, 1.0)),
                  WindowError);
  CHECK_THROWS_AS(compose(GainFn::parse("r", GainClass::KInfinity, 10.0), GainFn::parse("r", GainClass::ExtendedK, 5.0)),
                  WindowError);
  const GainFn mixed = compose(GainFn::parse("r", GainClass::ExtendedK, 10.0),
                               GainFn::parse("r", GainClass::KInfinity, 5.0));
  CHECK(mixed.claimed() == GainClass::K);
}

TEST_CASE("small-gain condition") {
  const GainFn p1 = GainFn::parse("0.96*r", GainClass::ExtendedKInfinity, 100.0);
  const GainFn p2 = GainFn::parse("0.64*r", GainClass::ExtendedKInfinity, 100.0);
  const auto cert = check_small_gain(p1, p2);
  CHECK(cert.passed());
  CHECK(small_gain_margin(p1, p2, 1.0) == doctest::Approx(1.0 - 0.96 * 0.64).epsilon(1e-14));
  CHECK(cert.worst_monotonicity_margin == doctest::Approx(0.3856).epsilon(1e-12));

  const GainFn id = GainFn::identity(GainClass::ExtendedKInfinity, 10.0);
  CHECK(check_small_gain(id, id).verdict == Verdict::Fail);

  const auto twice = check_small_gain(GainFn::parse("2*r", GainClass::ExtendedKInfinity, 10.0), id);
  CHECK(twice.verdict == Verdict::Fail);
  REQUIRE(twice.failure_point);

  CHECK_THROWS_AS(check_small_gain(GainFn::parse("r", GainClass::KInfinity, 10.0), id), PreconditionError);
}

TEST_CASE("property: shrinking a cross gain only improves the small-gain margin") {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> scale(0.1, 0.9);
  const GainFn p2 = GainFn::parse("0.5*r + 0.3*r^3/(1 + r^2)", GainClass::ExtendedKInfinity, 50.0);
  for (int k = 0; k < 10; ++k) {
    const double s = scale(rng);
    const double t = s * scale(rng);
    const GainFn big = GainFn::parse(std::to_string(s) + "*r", GainClass::ExtendedKInfinity, 50.0);
    const GainFn small = GainFn::parse(std::to_string(t) + "*r", GainClass::ExtendedKInfinity, 50.0);
    for (double r : {-20.0, -1.0, -0.01, 0.01, 1.0, 20.0}) {
      CHECK(small_gain_margin(small, p2, r) >= small_gain_margin(big, p2, r));
    }
  }
}

TEST_CASE("dissipation form to implication form") {
  const GainFn chi = GainFn::parse("r", GainClass::ExtendedKInfinity, 100.0);
  const GainFn phi = GainFn::parse("r", GainClass::KInfinity, 10.0);
  const auto half = dissipation_to_implication(chi, phi, 0.5);
  for (double r = 0.0; r <= 10.0; r += 0.5) CHECK(half.gamma(r) == doctest::Approx(2.0 * r));
  for (double s = -5.0; s <= 5.0; s += 0.5) CHECK(half.alpha(s) == doctest::Approx(0.5 * s));
  CHECK(half.gamma(0.0) == 0.0);
  CHECK(half.gamma.claimed() == GainClass::K);

  const auto other = dissipation_to_implication(GainFn::parse("2*r", GainClass::ExtendedKInfinity, 100.0),
                                                GainFn::parse("r^3", GainClass::KInfinity, 2.0), 0.5);
  CHECK(other.gamma(1.0) == doctest::Approx(1.0));

  CHECK_THROWS_AS(dissipation_to_implication(chi, phi, 1.0), PreconditionError);
  CHECK_THROWS_AS(dissipation_to_implication(chi, phi, 0.0), PreconditionError);
  CHECK_THROWS_AS(dissipation_to_implication(GainFn::parse("r", GainClass::KInfinity, 10.0), phi, 0.5),
                  PreconditionError);
  // χ's window is too small to invert -φ(10)/c = -20.
  CHECK_THROWS_AS(dissipation_to_implication(GainFn::parse("r", GainClass::ExtendedKInfinity, 10.0), phi, 0.5),
                  BracketError);
}
