#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace issf {

/// Absolute per-interval tolerance of the adaptive quadrature.
inline constexpr double kQuadratureTolerance = 1e-10;

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
  bool converged = true;
  std::size_t evaluations = 0;
};

namespace detail {

template <class F>
void simpson_step(const F& f, double a, double fa, double m, double fm, double b, double fb, double whole,
                  double tol, int depth, QuadratureResult& acc) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  acc.evaluations += 2;
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (std::fabs(delta) <= 15.0 * tol || depth <= 0 || !(lm > a && rm < b)) {
    if (std::fabs(delta) > 15.0 * tol) acc.converged = false;
    acc.value += left + right + delta / 15.0;
    acc.error_estimate += std::fabs(delta) / 15.0;
    return;
  }
  simpson_step(f, a, fa, lm, flm, m, fm, left, 0.5 * tol, depth - 1, acc);
  simpson_step(f, m, fm, rm, frm, b, fb, right, 0.5 * tol, depth - 1, acc);
}

}  // namespace detail

/// Adaptive Simpson quadrature of f over [a, b] with Richardson correction.
/// `converged` is false when the depth limit was hit before `tol`.
template <class F>
QuadratureResult adaptive_simpson(const F& f, double a, double b, double tol = kQuadratureTolerance,
                                  int max_depth = 48) {
  QuadratureResult acc;
  if (a == b) return acc;
  const double sign = b < a ? -1.0 : 1.0;
  if (b < a) std::swap(a, b);
  const double m = 0.5 * (a + b);
  const double fa = f(a);
  const double fm = f(m);
  const double fb = f(b);
  acc.evaluations = 3;
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  detail::simpson_step(f, a, fa, m, fm, b, fb, whole, tol, max_depth, acc);
  acc.value *= sign;
  return acc;
}

struct Extremum {
  double x = 0.0;
  double value = 0.0;
};

/// Golden-section search for the maximum of a unimodal f on [a, b].
template <class F>
Extremum golden_section_max(const F& f, double a, double b, double xtol = 1e-12) {
  constexpr double kInvPhi = 0.6180339887498949;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int it = 0; it < 200 && (b - a) > xtol * (1.0 + std::fabs(a) + std::fabs(b)); ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  return fc >= fd ? Extremum{c, fc} : Extremum{d, fd};
}

/// Maximum of a continuous f over [a, b]: uniform scan of `scan_points`
/// points, then golden-section refinement around the best scanned point.
/// Derivative-free, so f need only be continuous.
template <class F>
Extremum window_max(const F& f, double a, double b, std::size_t scan_points = 256) {
  if (b < a) std::swap(a, b);
  if (a == b || scan_points < 2) return {a, f(a)};
  const std::size_t n = scan_points;
  Extremum best{a, f(a)};
  std::size_t best_i = 0;
  for (std::size_t i = 1; i < n; ++i) {
    const double x = i + 1 == n ? b : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    const double v = f(x);
    if (v > best.value) {
      best = {x, v};
      best_i = i;
    }
  }
  const double step = (b - a) / static_cast<double>(n - 1);
  const double lo = best_i == 0 ? a : std::max(a, best.x - step);
  const double hi = best_i + 1 == n ? b : std::min(b, best.x + step);
  const Extremum refined = golden_section_max(f, lo, hi);
  return refined.value > best.value ? refined : best;
}

template <class F>
Extremum window_min(const F& f, double a, double b, std::size_t scan_points = 256) {
  Extremum e = window_max([&](double x) { return -f(x); }, a, b, scan_points);
  e.value = -e.value;
  return e;
}

/// Shape-preserving piecewise cubic Hermite interpolant (Fritsch–Carlson).
/// Reproduces the data at the nodes; monotone data stays monotone.
class MonotoneCubic {
 public:
  MonotoneCubic() = default;
  MonotoneCubic(std::vector<double> x, std::vector<double> y);

  double operator()(double t) const;
  double derivative(double t) const;

  double front() const { return x_.front(); }
  double back() const { return x_.back(); }
  bool empty() const { return x_.empty(); }
  bool contains(double t) const { return !x_.empty() && t >= x_.front() && t <= x_.back(); }

 private:
  std::size_t segment(double t) const;

  std::vector<double> x_;
  std::vector<double> y_;
  std::vector<double> m_;
};

/// Uniform grid of n points over [lo, hi] with exact endpoints.
std::vector<double> uniform_grid(double lo, double hi, std::size_t n);

/// Worker count: ISSF_THREADS when set to a positive integer, otherwise
/// the hardware concurrency.
std::size_t thread_count();

/// Runs body(i) for i in [0, n) on up to thread_count() threads. The first
/// exception thrown by any body is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace issf
