#include <doctest.h>

#include <atomic>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "issf/error.hpp"
#include "issf/numerics.hpp"
#include "oracles.hpp"

using namespace issf;

TEST_CASE("adaptive Simpson on polynomials and smooth integrands") {
  const auto cube = adaptive_simpson([](double s) { return s * s * s; }, 0.0, 1.0);
  CHECK(cube.converged);
  CHECK(std::fabs(cube.value - 0.25) <= 1e-12);

  const auto sine = adaptive_simpson([](double s) { return std::sin(s); }, 0.0, std::numbers::pi);
  CHECK(std::fabs(sine.value - 2.0) <= 1e-10);

  const auto reversed = adaptive_simpson([](double s) { return s * s; }, 1.0, 0.0);
  CHECK(reversed.value == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
  CHECK(adaptive_simpson([](double) { return 1.0; }, 2.0, 2.0).value == 0.0);
}

TEST_CASE("property: adaptive Simpson matches Gauss-Legendre") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> d(-3.0, 3.0);
  for (int k = 0; k < 50; ++k) {
    const double a = d(rng);
    const double b = a + std::fabs(d(rng)) + 0.1;
    const double w = d(rng);
    auto f = [w](double s) { return std::exp(-s * s) * std::cos(w * s) + 0.1 * s * s; };
    const double ref = oracle::gauss_legendre(f, a, b, 400);
    const auto got = adaptive_simpson(f, a, b);
    CHECK(got.converged);
    CHECK(std::fabs(got.value - ref) <= 1e-9);
  }
}

TEST_CASE("non-smooth integrands still converge") {
  auto kink = [](double s) { return std::fabs(s - 0.3); };
  const auto got = adaptive_simpson(kink, 0.0, 1.0);
  CHECK(got.converged);
  CHECK(std::fabs(got.value - (0.045 + 0.245)) <= 1e-9);
}

TEST_CASE("property: windowed extrema match brute-force scans") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  for (int k = 0; k < 40; ++k) {
    const double p = d(rng);
    const double q = d(rng);
    auto f = [p, q](double s) { return std::sin(3.0 * s + p) + q * s * s - 0.2 * std::fabs(s - p); };
    const double a = -2.0;
    const double b = 2.0;
    const double ref_max = oracle::scan_max(f, a, b, 200000);
    const double ref_min = oracle::scan_min(f, a, b, 200000);
    CHECK(window_max(f, a, b).value >= ref_max - 1e-9);
    CHECK(window_min(f, a, b).value <= ref_min + 1e-9);
    CHECK(window_max(f, a, b).value <= ref_max + 1e-6);
  }
}

TEST_CASE("golden section on a unimodal function") {
  const auto e = golden_section_max([](double s) { return -(s - 0.7) * (s - 0.7); }, 0.0, 2.0);
  CHECK(e.x == doctest::Approx(0.7).epsilon(1e-8));
}

TEST_CASE("monotone cubic interpolation") {
  const std::vector<double> x = {0.0, 1.0, 2.0, 3.0, 4.0};
  const std::vector<double> y = {0.0, 0.1, 0.2, 3.0, 3.1};
  const MonotoneCubic m(x, y);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(m(x[i]) == y[i]);
  CHECK(m.contains(2.5));
  CHECK_FALSE(m.contains(4.5));
  CHECK_THROWS_AS(m(4.5), WindowError);

  double prev = m(0.0);
  for (int i = 1; i <= 4000; ++i) {
    const double v = m(i * 1e-3);
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("property: monotone data gives a monotone interpolant") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> step(0.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    std::vector<double> x(30);
    std::vector<double> y(30);
    double cx = 0.0;
    double cy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      cx += 0.05 + step(rng);
      cy += step(rng) * step(rng) * (i % 3 == 0 ? 10.0 : 0.01);
      x[i] = cx;
      y[i] = cy;
    }
    const MonotoneCubic m(x, y);
    double prev = m(x.front());
    const std::size_t n = 5000;
    for (std::size_t i = 1; i <= n; ++i) {
      const double t = i == n ? x.back() : x.front() + (x.back() - x.front()) * static_cast<double>(i) / n;
      const double v = m(t);
      CHECK(v >= prev - 1e-12);
      CHECK(m.derivative(t) >= -1e-12);
      prev = v;
    }
  }
}

TEST_CASE("interpolant reproduces smooth functions") {
  const std::vector<double> x = uniform_grid(-1.0, 1.0, 401);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::atan(3.0 * x[i]);
  const MonotoneCubic m(x, y);
  for (double t = -0.99; t < 0.99; t += 0.0137) CHECK(std::fabs(m(t) - std::atan(3.0 * t)) <= 1e-6);
}

TEST_CASE("uniform grid") {
  const auto g = uniform_grid(-10.0, 10.0, 4096);
  CHECK(g.size() == 4096);
  CHECK(g.front() == -10.0);
  CHECK(g.back() == 10.0);
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] > g[i - 1]);
}

TEST_CASE("parallel_for visits every index once and rethrows") {
  std::vector<std::atomic<int>> hits(10000);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i].fetch_add(1); });
  bool all_once = true;
  for (const auto& h : hits) all_once = all_once && h.load() == 1;
  CHECK(all_once);

  CHECK_THROWS_AS(parallel_for(100,
                               [](std::size_t i) {
                                 if (i == 37) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
  CHECK(thread_count() >= 1);
}
