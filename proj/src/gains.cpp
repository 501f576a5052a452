#include "issf/gains.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "issf/error.hpp"
#include "issf/numerics.hpp"

namespace issf {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// Largest point probed for K∞ claims.
constexpr double kMaxProbe = 1e12;

}  // namespace

std::string_view to_string(GainClass c) {
  switch (c) {
    case GainClass::K: return "K";
    case GainClass::KInfinity: return "K-inf";
    case GainClass::ExtendedK: return "extended-K";
    case GainClass::ExtendedKInfinity: return "extended-K-inf";
  }
  return "?";
}

std::optional<GainClass> parse_gain_class(std::string_view name) {
  if (name == "K") return GainClass::K;
  if (name == "K-inf") return GainClass::KInfinity;
  if (name == "extended-K") return GainClass::ExtendedK;
  if (name == "extended-K-inf") return GainClass::ExtendedKInfinity;
  return std::nullopt;
}

GainClass weaker(GainClass a, GainClass b) {
  const bool ext = is_extended(a) && is_extended(b);
  const bool unb = is_unbounded(a) && is_unbounded(b);
  if (ext) return unb ? GainClass::ExtendedKInfinity : GainClass::ExtendedK;
  return unb ? GainClass::KInfinity : GainClass::K;
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "PASS";
    case Verdict::Fail: return "FAIL";
    case Verdict::Inconclusive: return "INCONCLUSIVE";
  }
  return "?";
}

GainFn::GainFn(Fn value, GainClass claimed, double radius, std::string description, Fn slope)
    : value_(std::move(value)),
      slope_(std::move(slope)),
      claimed_(claimed),
      radius_(radius),
      description_(std::move(description)) {
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw PreconditionError("gain window radius must be positive and finite, got " + fmt(radius));
  }
}

GainFn GainFn::from_expr(ScalarExpr expr, GainClass claimed, double radius) {
  if (expr.variables().size() != 1 || expr.variables()[0] != "r") {
    throw DimensionError("a gain must be an expression in the single variable r");
  }
  ScalarExpr d = differentiate(expr, "r");
  Fn value = [expr](double r) { return expr.eval(std::span<const double>(&r, 1)); };
  Fn slope = [d](double r) { return d.eval(std::span<const double>(&r, 1)); };
  GainFn g(std::move(value), claimed, radius, expr.to_string(), std::move(slope));
  g.expr_ = std::move(expr);
  g.derivative_ = std::move(d);
  return g;
}

GainFn GainFn::parse(std::string_view source, GainClass claimed, double radius) {
  return from_expr(issf::parse(source, {"r"}), claimed, radius);
}

GainFn GainFn::identity(GainClass claimed, double radius) { return parse("r", claimed, radius); }

double GainFn::slope(double r) const {
  if (slope_) return slope_(r);
  const double h = 1e-6 * (1.0 + std::fabs(r));
  return (value_(r + h) - value_(r - h)) / (2.0 * h);
}

GainFn GainFn::with_radius(double radius) const {
  GainFn g = *this;
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw PreconditionError("gain window radius must be positive and finite, got " + fmt(radius));
  }
  g.radius_ = radius;
  return g;
}

GainFn GainFn::with_class(GainClass claimed) const {
  GainFn g = *this;
  g.claimed_ = claimed;
  return g;
}

ClassCertificate certify_class(const GainFn& g, std::size_t grid_size) {
  if (grid_size < 3) throw PreconditionError("certification grid needs at least 3 points");
  ClassCertificate cert;
  cert.subject = g.description();
  cert.claimed_class = std::string(to_string(g.claimed()));
  cert.window_lo = g.window_lo();
  cert.window_hi = g.window_hi();
  cert.grid_size = grid_size;

  const auto grid = uniform_grid(cert.window_lo, cert.window_hi, grid_size);
  std::vector<double> values(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) { values[i] = g(grid[i]); });

  auto fail = [&](double at, std::string reason) {
    if (cert.verdict == Verdict::Pass) {
      cert.verdict = Verdict::Fail;
      cert.failure_point = at;
      cert.reason = std::move(reason);
    }
  };

  const double g0 = g(0.0);
  if (!(std::fabs(g0) <= kGainZeroTolerance)) fail(0.0, "g(0) = " + fmt(g0) + " is not 0");

  cert.worst_monotonicity_margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double diff = values[i + 1] - values[i];
    if (!std::isfinite(values[i]) || !std::isfinite(values[i + 1])) {
      fail(grid[i], "non-finite value");
      continue;
    }
    if (diff < cert.worst_monotonicity_margin) {
      cert.worst_monotonicity_margin = diff;
      cert.worst_margin_point = grid[i];
    }
    if (!(diff > 0.0)) fail(grid[i], "not strictly increasing between " + fmt(grid[i]) + " and " + fmt(grid[i + 1]));
  }

  if (is_unbounded(g.claimed())) {
    // Unboundedness cannot be sampled. Probe geometrically outward from the
    // window edge until |g| reaches the threshold.
    auto probe = [&](double sign) -> std::optional<double> {
      for (double r = g.radius(); r <= kMaxProbe; r *= 2.0) {
        double v = 0.0;
        try {
          v = g(sign * r);
        } catch (const Error&) {
          return std::nullopt;
        }
        if (!std::isfinite(v)) return std::nullopt;
        if (std::fabs(v) >= kUnboundednessThreshold) return sign * r;
      }
      return std::nullopt;
    };
    const auto hi = probe(1.0);
    std::optional<double> lo = is_extended(g.claimed()) ? probe(-1.0) : std::optional<double>(0.0);
    if (!hi) {
      fail(cert.window_hi, "|g| stays below " + fmt(kUnboundednessThreshold) + " up to r = " + fmt(kMaxProbe));
    } else if (!lo) {
      fail(cert.window_lo, "|g| stays below " + fmt(kUnboundednessThreshold) + " down to r = " + fmt(-kMaxProbe));
    } else {
      cert.unbounded_probe = std::max(std::fabs(*hi), std::fabs(*lo));
    }
  }
  return cert;
}

double invert(const GainFn& g, double y) {
  const double wlo = g.window_lo();
  const double whi = g.window_hi();
  const double start = std::min(1.0, whi);
  double lo = is_extended(g.claimed()) ? -start : 0.0;
  double hi = start;
  double glo = g(lo);
  double ghi = g(hi);
  while (ghi < y && hi < whi) {
    lo = hi;
    glo = ghi;
    hi = std::min(2.0 * hi, whi);
    ghi = g(hi);
  }
  while (glo > y && lo > wlo) {
    hi = lo;
    ghi = glo;
    lo = std::max(2.0 * lo, wlo);
    glo = g(lo);
  }
  if (!(glo <= y && y <= ghi)) {
    throw BracketError("cannot invert " + g.description() + " at " + fmt(y) + ": range over the window is [" +
                       fmt(g(wlo)) + ", " + fmt(g(whi)) + "]");
  }
  if (glo == y) return lo;
  if (ghi == y) return hi;
  for (int it = 0; it < kMaxBisectionIterations; ++it) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    const double gm = g(mid);
    if (gm == y) return mid;
    if (gm < y) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
      ghi = gm;
    }
  }
  return (y - glo) <= (ghi - y) ? lo : hi;
}

GainFn inverse(const GainFn& g) {
  const double top = g(g.window_hi());
  const double radius = is_extended(g.claimed()) ? std::min(top, -g(g.window_lo())) : top;
  auto value = [g](double y) { return invert(g, y); };
  auto slope = [g](double y) { return 1.0 / g.slope(invert(g, y)); };
  return GainFn(value, g.claimed(), radius, "inverse(" + g.description() + ")", slope);
}

GainFn compose(const GainFn& g1, const GainFn& g2) {
  const double slack = 1e-12;
  const double hi = g2(g2.window_hi());
  const double lo = g2(g2.window_lo());
  auto outside = [&](double v) {
    return v > g1.window_hi() + slack * (1.0 + std::fabs(v)) || v < g1.window_lo() - slack * (1.0 + std::fabs(v));
  };
  if (outside(hi) || outside(lo)) {
    throw WindowError("image [" + fmt(lo) + ", " + fmt(hi) + "] of " + g2.description() + " leaves the window [" +
                      fmt(g1.window_lo()) + ", " + fmt(g1.window_hi()) + "] of " + g1.description());
  }
  const GainClass cls = weaker(g1.claimed(), g2.claimed());
  if (g1.expr() && g2.expr()) {
    return GainFn::from_expr(simplify(substitute(*g1.expr(), "r", *g2.expr())), cls, g2.radius());
  }
  auto value = [g1, g2](double r) { return g1(g2(r)); };
  auto slope = [g1, g2](double r) { return g1.slope(g2(r)) * g2.slope(r); };
  return GainFn(value, cls, g2.radius(), g1.description() + " o " + g2.description(), slope);
}

double small_gain_margin(const GainFn& phi1, const GainFn& phi2, double r) {
  const double c = phi1(phi2(r));
  return (r > 0.0 ? r - c : c - r) / std::fabs(r);
}

ClassCertificate check_small_gain(const GainFn& phi1, const GainFn& phi2, std::size_t grid_size,
                                  std::optional<double> radius) {
  if (phi1.claimed() != GainClass::ExtendedKInfinity || phi2.claimed() != GainClass::ExtendedKInfinity) {
    throw PreconditionError("small-gain check needs extended-K-inf cross gains");
  }
  if (grid_size < 2) throw PreconditionError("small-gain grid needs at least 2 points");
  const double R = radius.value_or(std::min(phi1.radius(), phi2.radius()));
  ClassCertificate cert;
  cert.subject = phi1.description() + " o " + phi2.description();
  cert.claimed_class = "small-gain";
  cert.window_lo = -R;
  cert.window_hi = R;
  cert.grid_size = grid_size;

  const std::size_t half = grid_size / 2;
  std::vector<double> points;
  points.reserve(2 * half);
  for (std::size_t i = half; i >= 1; --i) points.push_back(-R * static_cast<double>(i) / static_cast<double>(half));
  for (std::size_t i = 1; i <= half; ++i) points.push_back(R * static_cast<double>(i) / static_cast<double>(half));
  points.erase(std::remove_if(points.begin(), points.end(), [](double r) { return std::fabs(r) < kSmallGainHole; }),
               points.end());

  std::vector<double> margins(points.size());
  parallel_for(points.size(), [&](std::size_t i) { margins[i] = small_gain_margin(phi1, phi2, points[i]); });

  cert.worst_monotonicity_margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (margins[i] < cert.worst_monotonicity_margin || !std::isfinite(margins[i])) {
      cert.worst_monotonicity_margin = margins[i];
      cert.worst_margin_point = points[i];
    }
    if (!(margins[i] > 0.0) && cert.verdict == Verdict::Pass) {
      cert.verdict = Verdict::Fail;
      cert.failure_point = points[i];
      cert.reason = points[i] > 0.0 ? "composition does not lie strictly below the identity at r = " + fmt(points[i])
                                    : "composition does not lie strictly above the identity at r = " + fmt(points[i]);
    }
  }
  return cert;
}

ImplicationGains dissipation_to_implication(const GainFn& chi, const GainFn& phi, double c) {
  if (!(c > 0.0 && c < 1.0)) throw PreconditionError("the splitting constant c must lie in (0, 1), got " + fmt(c));
  if (chi.claimed() != GainClass::ExtendedKInfinity) throw PreconditionError("chi must be claimed extended-K-inf");
  if (phi.claimed() != GainClass::KInfinity) throw PreconditionError("phi must be claimed K-inf");
  if (const auto cert = certify_class(chi); !cert.passed()) {
    throw PreconditionError("chi failed class certification: " + cert.reason);
  }
  if (const auto cert = certify_class(phi); !cert.passed()) {
    throw PreconditionError("phi failed class certification: " + cert.reason);
  }

  auto gamma_value = [chi, phi, c](double r) { return -invert(chi, -phi(r) / c); };
  auto gamma_slope = [chi, phi, c](double r) {
    const double s = invert(chi, -phi(r) / c);
    return phi.slope(r) / (c * chi.slope(s));
  };
  GainFn gamma(gamma_value, GainClass::K, phi.radius(),
               "-inverse(" + chi.description() + ")(-(" + phi.description() + ")/" + fmt(c) + ")", gamma_slope);
  gamma(phi.radius());  // surfaces a BracketError now rather than at first use

  if (chi.expr()) {
    return {gamma, GainFn::from_expr(simplify(scaled(1.0 - c, *chi.expr())), chi.claimed(), chi.radius())};
  }
  auto alpha_value = [chi, c](double s) { return (1.0 - c) * chi(s); };
  auto alpha_slope = [chi, c](double s) { return (1.0 - c) * chi.slope(s); };
  return {gamma, GainFn(alpha_value, chi.claimed(), chi.radius(), fmt(1.0 - c) + "*(" + chi.description() + ")",
                        alpha_slope)};
}

}  // namespace issf
