#pragma once

// Reference computations used as test oracles. Deliberately naive: fixed
// rules, brute force and plain bisection, sharing no code with the library.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <cstdio>
#include <random>
#include <string>
#include <utility>

namespace oracle {

using Fn = std::function<double(double)>;

/// Composite 5-point Gauss–Legendre rule on `panels` equal panels.
inline double gauss_legendre(const Fn& f, double a, double b, std::size_t panels = 64) {
  static constexpr std::array<double, 5> x = {0.0, 0.5384693101056831, -0.5384693101056831, 0.9061798459386640,
                                              -0.9061798459386640};
  static constexpr std::array<double, 5> w = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                              0.2369268850561891, 0.2369268850561891};
  const double h = (b - a) / static_cast<double>(panels);
  double total = 0.0;
  for (std::size_t p = 0; p < panels; ++p) {
    const double lo = a + h * static_cast<double>(p);
    const double mid = lo + 0.5 * h;
    double s = 0.0;
    for (std::size_t k = 0; k < 5; ++k) s += w[k] * f(mid + 0.5 * h * x[k]);
    total += 0.5 * h * s;
  }
  return total;
}

/// Largest value of f over n + 1 equally spaced points of [a, b].
inline double scan_max(const Fn& f, double a, double b, std::size_t n = 20000) {
  double best = f(a);
  for (std::size_t i = 1; i <= n; ++i) best = std::max(best, f(a + (b - a) * static_cast<double>(i) / n));
  return best;
}

inline double scan_min(const Fn& f, double a, double b, std::size_t n = 20000) {
  return -scan_max([&](double s) { return -f(s); }, a, b, n);
}

/// Solves f(x) = y on [lo, hi] for increasing f by 300 halvings.
inline double bisect(const Fn& f, double y, double lo, double hi) {
  for (int i = 0; i < 300; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) < y) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

inline double central_difference(const Fn& f, double x, double h = 1e-6) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// ρ0 = ½[r − φ1(φ2(r))] clipped to [−½, ½].
inline double rho0(const Fn& phi1, const Fn& phi2, double r) {
  return std::clamp(0.5 * (r - phi1(phi2(r))), -0.5, 0.5);
}

/// Windowed extrema of ρ0 by brute-force scan.
inline double rho1(const Fn& phi1, const Fn& phi2, double r, std::size_t n = 4000) {
  auto r0 = [&](double s) { return rho0(phi1, phi2, s); };
  if (r == 0.0) return 0.0;
  if (r < -1.0) return scan_max(r0, r - 1.0, -1.0, n);
  if (r < 0.0) return scan_max(r0, -2.0, r, n);
  if (r <= 1.0) return scan_min(r0, r, 2.0, n);
  return scan_min(r0, 1.0, r + 1.0, n);
}

/// Four-branch moving integral of ρ1.
inline double rho(const Fn& phi1, const Fn& phi2, double r, std::size_t panels = 64) {
  auto r1 = [&](double s) { return rho1(phi1, phi2, s, 1000); };
  if (r < -1.0) return gauss_legendre(r1, r, r + 1.0, panels);
  if (r < 0.0) return gauss_legendre(r1, r, 0.0, panels);
  if (r <= 1.0) return gauss_legendre(r1, 0.0, r, panels);
  return gauss_legendre(r1, r - 1.0, r, panels);
}

/// Saturated odd polynomial a·r + b·r³/(1 + r²) + c·r⁵/(1 + r⁴). Strictly
/// increasing and unbounded for a > 0 and b, c ≥ 0.
struct SaturatedOdd {
  double a = 1.0;
  double b = 0.0;
  double c = 0.0;

  double operator()(double r) const {
    const double r2 = r * r;
    return a * r + b * r * r2 / (1.0 + r2) + c * r * r2 * r2 / (1.0 + r2 * r2);
  }
  /// Global Lipschitz bound: the cubic term's slope peaks at 9/8 (r² = 3),
  /// the quintic term's at 25/16 (r⁴ = 5/3).
  double lipschitz() const { return a + 1.125 * b + 1.5625 * c; }

  /// Source text in the variable r.
  std::string text() const {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%.17g*r + %.17g*r^3/(1 + r^2) + %.17g*r^5/(1 + r^4)", a, b, c);
    return buf;
  }
};

/// Random pair whose Lipschitz bounds multiply to `product` < 1, so the
/// composition stays strictly inside the identity.
inline std::pair<SaturatedOdd, SaturatedOdd> random_small_gain_pair(std::mt19937_64& rng, double product) {
  std::uniform_real_distribution<double> coef(0.0, 1.0);
  std::uniform_real_distribution<double> lead(0.2, 1.0);
  std::uniform_real_distribution<double> split(0.25, 0.75);
  SaturatedOdd p{lead(rng), coef(rng), coef(rng)};
  SaturatedOdd q{lead(rng), coef(rng), coef(rng)};
  const double share = split(rng);
  const double lp = std::pow(product, share);
  const double lq = product / lp;
  const double sp = lp / p.lipschitz();
  const double sq = lq / q.lipschitz();
  p = {p.a * sp, p.b * sp, p.c * sp};
  q = {q.a * sq, q.b * sq, q.c * sq};
  return {p, q};
}

/// Exact solution of x' = −k·x.
inline double exponential_decay(double x0, double k, double t) { return x0 * std::exp(-k * t); }

}  // namespace oracle
