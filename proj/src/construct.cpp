#include "issf/construct.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "issf/error.hpp"

namespace issf {

namespace {

constexpr double kCellWidth = 1.0 / kCellsPerUnit;
// Scan points per cell. Every window of ρ1 is at least one unit long, so a
// window sees at least 32·kCellsPerUnit scan points before refinement.
constexpr std::size_t kCellScan = 32;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// Uniform grid with 0 inserted when absent.
std::vector<double> grid_with_origin(double radius, std::size_t n) {
  auto g = uniform_grid(-radius, radius, n);
  const auto it = std::lower_bound(g.begin(), g.end(), 0.0);
  if (it == g.end() || *it != 0.0) g.insert(it, 0.0);
  return g;
}

// Linear interpolation in a sorted table.
double lerp_table(const std::vector<double>& x, const std::vector<double>& y, double t) {
  if (t < x.front() || t > x.back()) {
    throw WindowError("argument " + fmt(t) + " outside [" + fmt(x.front()) + ", " + fmt(x.back()) + "]");
  }
  auto it = std::upper_bound(x.begin(), x.end(), t);
  std::size_t i = it == x.begin() ? 0 : static_cast<std::size_t>(it - x.begin()) - 1;
  i = std::min(i, x.size() - 2);
  const double s = (t - x[i]) / (x[i + 1] - x[i]);
  return y[i] + s * (y[i + 1] - y[i]);
}

}  // namespace

struct RhoFn::Impl {
  Impl(GainFn a, GainFn b) : phi1(std::move(a)), phi2(std::move(b)) {}

  GainFn phi1;
  GainFn phi2;
  double radius = 0.0;
  long kmin = 0;  // boundary index range for the extrema tables
  long kmax = 0;
  long qmin = 0;  // boundary index range for the running integral
  long qmax = 0;

  std::vector<double> bval;           // ρ0 at boundaries
  std::vector<double> cmax, cmin;     // per-cell extrema
  std::vector<signed char> mono;      // +1 nondecreasing, −1 nonincreasing, 0 neither
  std::vector<double> run_max_from_m2;  // max over [−2, x_k]
  std::vector<double> run_max_to_m1;    // max over [x_k, −1]
  std::vector<double> run_min_to_2;     // min over [x_k, 2]
  std::vector<double> run_min_from_1;   // min over [1, x_k]
  std::vector<double> cumulative;       // ∫_0^{x_k} ρ1, indexed by k − qmin

  std::vector<double> nodes;
  std::vector<double> values;
  std::vector<double> derivs;
  MonotoneCubic interp;
  std::size_t rescaled = 0;
  std::size_t unconverged = 0;

  static double x_of(long k) { return static_cast<double>(k) * kCellWidth; }
  std::size_t at(long k) const { return static_cast<std::size_t>(k - kmin); }
  long cell(double x) const {
    const long k = static_cast<long>(std::floor(x / kCellWidth));
    return std::clamp(k, kmin, kmax - 1);
  }

  double rho0(double r) const {
    if (r == 0.0) return 0.0;
    const double v = 0.5 * (r - phi1(phi2(r)));
    return r < 0.0 ? std::max(-0.5, v) : std::min(0.5, v);
  }

  double partial_max(long k, double a, double b) const {
    if (a == b) return rho0(a);
    const signed char m = mono[at(k)];
    if (m > 0) return b == x_of(k + 1) ? bval[at(k + 1)] : rho0(b);
    if (m < 0) return a == x_of(k) ? bval[at(k)] : rho0(a);
    return window_max([this](double s) { return rho0(s); }, a, b, kCellScan).value;
  }

  double partial_min(long k, double a, double b) const {
    if (a == b) return rho0(a);
    const signed char m = mono[at(k)];
    if (m > 0) return a == x_of(k) ? bval[at(k)] : rho0(a);
    if (m < 0) return b == x_of(k + 1) ? bval[at(k + 1)] : rho0(b);
    return window_min([this](double s) { return rho0(s); }, a, b, kCellScan).value;
  }

  double rho1(double r) const {
    if (r == 0.0) return 0.0;
    if (r < -1.0) {  // max over [r − 1, −1]
      const double x = r - 1.0;
      const long k = cell(x);
      return std::max(partial_max(k, x, x_of(k + 1)), run_max_to_m1[at(k + 1)]);
    }
    if (r < 0.0) {  // max over [−2, r]
      const long k = cell(r);
      return std::max(run_max_from_m2[at(k)], partial_max(k, x_of(k), r));
    }
    if (r <= 1.0) {  // min over [r, 2]
      const long k = cell(r);
      return std::min(partial_min(k, r, x_of(k + 1)), run_min_to_2[at(k + 1)]);
    }
    const double y = r + 1.0;  // min over [1, r + 1]
    const long k = cell(y);
    return std::min(run_min_from_1[at(k)], partial_min(k, x_of(k), y));
  }

  // ∫_0^x ρ1 from the boundary table plus a partial cell.
  double integral_to(double x, bool* converged) const {
    long k = static_cast<long>(std::floor(x / kCellWidth));
    k = std::clamp(k, qmin, qmax - 1);
    const double base = cumulative[static_cast<std::size_t>(k - qmin)];
    const double xk = x_of(k);
    if (x == xk) return base;
    const auto q = adaptive_simpson([this](double s) { return rho1(s); }, xk, x);
    if (!q.converged && converged) *converged = false;
    return base + q.value;
  }

  double exact(double r, bool* converged) const {
    if (r < -radius || r > radius) throw WindowError("rho argument " + fmt(r) + " outside the window");
    if (r < -1.0) return integral_to(r + 1.0, converged) - integral_to(r, converged);
    if (r < 0.0) return -integral_to(r, converged);
    if (r <= 1.0) return integral_to(r, converged);
    return integral_to(r, converged) - integral_to(r - 1.0, converged);
  }

  double exact_derivative(double r) const {
    if (r < -1.0) return rho1(r + 1.0) - rho1(r);
    if (r < 0.0) return -rho1(r);
    if (r <= 1.0) return rho1(r);
    return rho1(r) - rho1(r - 1.0);
  }
};

double RhoFn::operator()(double r) const { return impl_->interp(r); }
double RhoFn::derivative(double r) const { return lerp_table(impl_->nodes, impl_->derivs, r); }
double RhoFn::exact(double r) const { return impl_->exact(r, nullptr); }
double RhoFn::exact_derivative(double r) const {
  if (std::fabs(r) > impl_->radius) throw WindowError("rho argument " + fmt(r) + " outside the window");
  return impl_->exact_derivative(r);
}
double RhoFn::rho0(double r) const { return impl_->rho0(r); }
double RhoFn::rho1(double r) const {
  if (std::fabs(r) > impl_->radius) throw WindowError("rho1 argument " + fmt(r) + " outside the window");
  return impl_->rho1(r);
}
double RhoFn::radius() const { return impl_->radius; }
const std::vector<double>& RhoFn::grid() const { return impl_->nodes; }
const std::vector<double>& RhoFn::values() const { return impl_->values; }
const std::vector<double>& RhoFn::derivatives() const { return impl_->derivs; }
std::size_t RhoFn::rescaled_count() const { return impl_->rescaled; }
std::size_t RhoFn::unconverged_cells() const { return impl_->unconverged; }
const GainFn& RhoFn::phi1() const { return impl_->phi1; }
const GainFn& RhoFn::phi2() const { return impl_->phi2; }

RhoFn build_rho(const GainFn& phi1, const GainFn& phi2, double radius, std::size_t grid_size) {
  if (!(radius >= 2.0)) throw PreconditionError("the construction window radius must be at least 2, got " + fmt(radius));
  if (grid_size < 3) throw PreconditionError("tabulation grid needs at least 3 points");
  const double reach = radius + 1.0;
  if (phi2.radius() < reach) {
    throw PreconditionError("phi2's window must reach " + fmt(reach) + ", it ends at " + fmt(phi2.radius()));
  }
  const double img_hi = phi2(reach);
  const double img_lo = phi2(-reach);
  if (!phi1.in_window(img_hi) || !phi1.in_window(img_lo)) {
    throw PreconditionError("phi1's window must contain phi2's image [" + fmt(img_lo) + ", " + fmt(img_hi) + "]");
  }
  const auto sg = check_small_gain(phi1, phi2, kDefaultGainGrid, reach);
  if (!sg.passed()) throw PreconditionError("small-gain condition fails: " + sg.reason);

  auto impl = std::make_shared<RhoFn::Impl>(phi1, phi2);
  RhoFn::Impl& m = *impl;
  m.radius = radius;
  m.kmin = static_cast<long>(std::floor(-reach * kCellsPerUnit));
  m.kmax = static_cast<long>(std::ceil(reach * kCellsPerUnit));
  const std::size_t nb = static_cast<std::size_t>(m.kmax - m.kmin + 1);
  const std::size_t nc = nb - 1;

  m.bval.resize(nb);
  m.cmax.resize(nc);
  m.cmin.resize(nc);
  m.mono.resize(nc);
  parallel_for(nb, [&](std::size_t i) { m.bval[i] = m.rho0(RhoFn::Impl::x_of(m.kmin + static_cast<long>(i))); });
  parallel_for(nc, [&](std::size_t i) {
    const double a = RhoFn::Impl::x_of(m.kmin + static_cast<long>(i));
    const double b = RhoFn::Impl::x_of(m.kmin + static_cast<long>(i) + 1);
    std::array<double, kCellScan> v{};
    v[0] = m.bval[i];
    v[kCellScan - 1] = m.bval[i + 1];
    for (std::size_t j = 1; j + 1 < kCellScan; ++j) {
      v[j] = m.rho0(a + (b - a) * static_cast<double>(j) / static_cast<double>(kCellScan - 1));
    }
    bool up = true;
    bool down = true;
    for (std::size_t j = 1; j < kCellScan; ++j) {
      up = up && v[j] >= v[j - 1];
      down = down && v[j] <= v[j - 1];
    }
    m.mono[i] = up ? 1 : (down ? -1 : 0);
    if (up) {
      m.cmax[i] = v.back();
      m.cmin[i] = v.front();
    } else if (down) {
      m.cmax[i] = v.front();
      m.cmin[i] = v.back();
    } else {
      auto f = [&m](double s) { return m.rho0(s); };
      m.cmax[i] = window_max(f, a, b, kCellScan).value;
      m.cmin[i] = window_min(f, a, b, kCellScan).value;
    }
  });

  const long km2 = -2 * kCellsPerUnit;
  const long km1 = -kCellsPerUnit;
  const long kp1 = kCellsPerUnit;
  const long kp2 = 2 * kCellsPerUnit;
  m.run_max_from_m2.assign(nb, kNaN);
  m.run_max_to_m1.assign(nb, kNaN);
  m.run_min_to_2.assign(nb, kNaN);
  m.run_min_from_1.assign(nb, kNaN);
  m.run_max_from_m2[m.at(km2)] = m.bval[m.at(km2)];
  for (long k = km2; k < 0; ++k) {
    m.run_max_from_m2[m.at(k + 1)] = std::max(m.run_max_from_m2[m.at(k)], m.cmax[m.at(k)]);
  }
  m.run_max_to_m1[m.at(km1)] = m.bval[m.at(km1)];
  for (long k = km1 - 1; k >= m.kmin; --k) {
    m.run_max_to_m1[m.at(k)] = std::max(m.run_max_to_m1[m.at(k + 1)], m.cmax[m.at(k)]);
  }
  m.run_min_to_2[m.at(kp2)] = m.bval[m.at(kp2)];
  for (long k = kp2 - 1; k >= 0; --k) {
    m.run_min_to_2[m.at(k)] = std::min(m.run_min_to_2[m.at(k + 1)], m.cmin[m.at(k)]);
  }
  m.run_min_from_1[m.at(kp1)] = m.bval[m.at(kp1)];
  for (long k = kp1; k < m.kmax; ++k) {
    m.run_min_from_1[m.at(k + 1)] = std::min(m.run_min_from_1[m.at(k)], m.cmin[m.at(k)]);
  }

  // Running integral of ρ1 over [−R, R], anchored at 0.
  m.qmin = static_cast<long>(std::floor(-radius * kCellsPerUnit));
  m.qmax = static_cast<long>(std::ceil(radius * kCellsPerUnit));
  const std::size_t nq = static_cast<std::size_t>(m.qmax - m.qmin);
  std::vector<double> cell_integral(nq);
  std::vector<char> cell_ok(nq, 1);
  parallel_for(nq, [&](std::size_t i) {
    const double a = RhoFn::Impl::x_of(m.qmin + static_cast<long>(i));
    const double b = RhoFn::Impl::x_of(m.qmin + static_cast<long>(i) + 1);
    const auto q = adaptive_simpson([&m](double s) { return m.rho1(s); }, a, b);
    cell_integral[i] = q.value;
    cell_ok[i] = q.converged ? 1 : 0;
  });
  m.unconverged = static_cast<std::size_t>(std::count(cell_ok.begin(), cell_ok.end(), 0));
  m.cumulative.assign(nq + 1, 0.0);
  const std::size_t zero = static_cast<std::size_t>(-m.qmin);
  for (std::size_t i = zero; i < nq; ++i) m.cumulative[i + 1] = m.cumulative[i] + cell_integral[i];
  for (std::size_t i = zero; i-- > 0;) m.cumulative[i] = m.cumulative[i + 1] - cell_integral[i];

  m.nodes = grid_with_origin(radius, grid_size);
  const std::size_t n = m.nodes.size();
  m.values.resize(n);
  m.derivs.resize(n);
  std::vector<char> node_ok(n, 1);
  parallel_for(n, [&](std::size_t i) {
    bool ok = true;
    m.values[i] = m.exact(m.nodes[i], &ok);
    m.derivs[i] = m.exact_derivative(m.nodes[i]);
    node_ok[i] = ok ? 1 : 0;
  });
  m.unconverged += static_cast<std::size_t>(std::count(node_ok.begin(), node_ok.end(), 0));
  if (m.unconverged > 0) {
    throw ConstructionError("rho quadrature did not reach tolerance " + fmt(kQuadratureTolerance) + " on " +
                            std::to_string(m.unconverged) + " interval(s)");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double r = m.nodes[i];
    if (r != 0.0 && !(std::fabs(m.values[i]) < std::fabs(r))) {
      m.values[i] = 0.5 * r;
      ++m.rescaled;
    }
  }
  m.interp = MonotoneCubic(m.nodes, m.values);

  RhoFn out;
  out.impl_ = std::move(impl);
  return out;
}

InvariantReport check_rho_invariants(const RhoFn& rho) {
  InvariantReport rep;
  const auto& x = rho.grid();
  const auto& v = rho.values();
  rep.points = x.size();
  rep.worst_margin = std::numeric_limits<double>::infinity();
  rep.max_slope = -std::numeric_limits<double>::infinity();
  auto fail = [&rep](double r, std::string why) {
    if (rep.passed) {
      rep.passed = false;
      rep.failure_point = r;
      rep.reason = std::move(why);
    }
  };
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = x[i];
    if (r == 0.0) {
      if (v[i] != 0.0) fail(r, "rho(0) = " + fmt(v[i]));
      continue;
    }
    const double r0 = rho.rho0(r);
    // Both gaps are positive exactly when the strict sandwich holds.
    const double inner = r < 0.0 ? v[i] - r0 : r0 - v[i];
    const double outer = r < 0.0 ? -v[i] : v[i];
    const double gap = std::min(inner, outer);
    if (gap < rep.worst_margin) {
      rep.worst_margin = gap;
      rep.worst_margin_point = r;
    }
    if (!(gap > 0.0)) fail(r, "strict sandwich between rho0 and 0 fails at r = " + fmt(r));
    if (!(std::fabs(v[i]) < std::fabs(r))) fail(r, "|rho(r)| < |r| fails at r = " + fmt(r));
  }
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double slope = (v[i + 1] - v[i]) / (x[i + 1] - x[i]);
    rep.max_slope = std::max(rep.max_slope, slope);
    if (!(slope < 0.5 + 1e-6)) fail(x[i], "finite-difference slope " + fmt(slope) + " exceeds 1/2");
  }
  return rep;
}

struct PhiFn::Impl {
  RhoFn rho;
  std::vector<double> nodes;
  std::vector<double> values;
  std::vector<double> derivs;  // NaN at 0
  MonotoneCubic interp;
  InvariantReport invariants;
  std::size_t zero_index = 0;
};

double PhiFn::operator()(double r) const { return impl_->interp(r); }

double PhiFn::derivative(double r, bool* flagged) const {
  const Impl& m = *impl_;
  const auto& x = m.nodes;
  if (r < x.front() || r > x.back()) throw WindowError("phi argument " + fmt(r) + " outside the window");
  const std::size_t z = m.zero_index;
  if (std::fabs(r) < kPhiSlopeExclusion) {
    if (flagged) *flagged = true;
    return r < 0.0 ? m.derivs[z - 1] : m.derivs[z + 1];
  }
  auto it = std::upper_bound(x.begin(), x.end(), r);
  std::size_t i = it == x.begin() ? 0 : static_cast<std::size_t>(it - x.begin()) - 1;
  i = std::min(i, x.size() - 2);
  if (i == z) return m.derivs[i + 1];  // (0, first positive node]
  if (i + 1 == z) return m.derivs[i];  // [last negative node, 0)
  const double s = (r - x[i]) / (x[i + 1] - x[i]);
  return m.derivs[i] + s * (m.derivs[i + 1] - m.derivs[i]);
}

double PhiFn::radius() const { return impl_->rho.radius(); }
const std::vector<double>& PhiFn::grid() const { return impl_->nodes; }
const std::vector<double>& PhiFn::values() const { return impl_->values; }
const std::vector<double>& PhiFn::derivatives() const { return impl_->derivs; }
const RhoFn& PhiFn::rho() const { return impl_->rho; }
const InvariantReport& PhiFn::invariants() const { return impl_->invariants; }

GainFn PhiFn::as_gain() const {
  PhiFn self = *this;
  return GainFn([self](double r) { return self(r); }, GainClass::ExtendedKInfinity, radius(), "phi(constructed)",
                [self](double r) { return self.derivative(r); });
}

PhiFn build_phi(const RhoFn& rho, std::size_t grid_size) {
  const GainFn& phi1 = rho.phi1();
  const GainFn& phi2 = rho.phi2();
  const double R = rho.radius();
  const double need = R + 0.5;
  if (phi1(phi1.window_hi()) < need || phi1(phi1.window_lo()) > -need) {
    throw PreconditionError("phi1's range over its window must cover [" + fmt(-need) + ", " + fmt(need) + "]");
  }
  auto impl = std::make_shared<PhiFn::Impl>();
  PhiFn::Impl& m = *impl;
  m.rho = rho;
  m.nodes = grid_with_origin(R, grid_size);
  const std::size_t n = m.nodes.size();
  m.zero_index = static_cast<std::size_t>(std::find(m.nodes.begin(), m.nodes.end(), 0.0) - m.nodes.begin());
  if (m.zero_index == 0 || m.zero_index + 1 >= n) throw PreconditionError("phi grid must straddle 0");
  const bool same_grid = m.nodes == rho.grid();

  m.values.assign(n, 0.0);
  m.derivs.assign(n, kNaN);
  std::vector<double> inv_r(n, 0.0);
  std::vector<double> upper(n, 0.0);
  std::vector<std::string> errors(n);
  parallel_for(n, [&](std::size_t i) {
    const double r = m.nodes[i];
    if (r == 0.0) return;
    const double p = same_grid ? rho.values()[i] : rho.exact(r);
    const double dp = same_grid ? rho.derivatives()[i] : rho.exact_derivative(r);
    if (std::fabs(p) < kMinRho) {
      errors[i] = "|rho(r)| = " + fmt(std::fabs(p)) + " below " + fmt(kMinRho) + " at r = " + fmt(r);
      return;
    }
    const auto q = adaptive_simpson([&](double t) { return invert(phi1, r - p * t); }, 0.0, 1.0);
    if (!q.converged) {
      errors[i] = "phi quadrature did not reach tolerance at r = " + fmt(r);
      return;
    }
    const double value = q.value;
    const double psi_r = invert(phi1, r);
    const double psi_s = invert(phi1, r - p);
    m.values[i] = value;
    m.derivs[i] = (psi_r - psi_s + dp * (psi_s - value)) / p;
    inv_r[i] = psi_r;
    upper[i] = phi2(r);
  });
  for (const auto& e : errors) {
    if (!e.empty()) throw ConstructionError(e);
  }

  InvariantReport& rep = m.invariants;
  rep.points = n;
  rep.worst_margin = std::numeric_limits<double>::infinity();
  rep.max_slope = std::numeric_limits<double>::infinity();  // smallest slope for phi
  for (std::size_t i = 0; i < n; ++i) {
    const double r = m.nodes[i];
    if (r == 0.0) continue;
    const double v = m.values[i];
    const double gap = r < 0.0 ? std::min(v - inv_r[i], upper[i] - v) : std::min(v - upper[i], inv_r[i] - v);
    if (gap < rep.worst_margin) {
      rep.worst_margin = gap;
      rep.worst_margin_point = r;
    }
    if (!(gap > 0.0) && rep.passed) {
      rep.passed = false;
      rep.failure_point = r;
      rep.reason = "sandwich between phi1^-1 and phi2 fails at r = " + fmt(r);
    }
    if (std::fabs(r) > kPhiSlopeExclusion) {
      rep.max_slope = std::min(rep.max_slope, m.derivs[i]);
      if (!(m.derivs[i] > 0.0) && rep.passed) {
        rep.passed = false;
        rep.failure_point = r;
        rep.reason = "phi'(r) = " + fmt(m.derivs[i]) + " is not positive at r = " + fmt(r);
      }
    }
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (!(m.values[i + 1] > m.values[i]) && rep.passed) {
      rep.passed = false;
      rep.failure_point = m.nodes[i];
      rep.reason = "phi is not increasing between " + fmt(m.nodes[i]) + " and " + fmt(m.nodes[i + 1]);
    }
  }
  if (!rep.passed) throw ConstructionError(rep.reason);
  m.interp = MonotoneCubic(m.nodes, m.values);

  PhiFn out;
  out.impl_ = std::move(impl);
  return out;
}

InvariantReport check_phi_sandwich(const GainFn& phi, const GainFn& phi1, const GainFn& phi2, double radius,
                                   std::size_t grid_size) {
  InvariantReport rep;
  auto grid = uniform_grid(-radius, radius, grid_size);
  grid.erase(std::remove(grid.begin(), grid.end(), 0.0), grid.end());
  rep.points = grid.size();
  std::vector<double> gaps(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    const double r = grid[i];
    const double v = phi(r);
    const double inv = invert(phi1, r);
    const double up = phi2(r);
    gaps[i] = r < 0.0 ? std::min(v - inv, up - v) : std::min(v - up, inv - v);
  });
  rep.worst_margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (gaps[i] < rep.worst_margin) {
      rep.worst_margin = gaps[i];
      rep.worst_margin_point = grid[i];
    }
    if (!(gaps[i] > 0.0) && rep.passed) {
      rep.passed = false;
      rep.failure_point = grid[i];
      rep.reason = "sandwich between phi1^-1 and phi2 fails at r = " + fmt(grid[i]);
    }
  }
  return rep;
}

ComposedBarrier::ComposedBarrier(ScalarField h1, ScalarField h2, Phi phi, SubsystemGains s1, SubsystemGains s2,
                                 GainFn gamma, GainFn alpha, ClassCertificate gamma_certificate,
                                 std::optional<InvariantReport> override_check)
    : h1_(std::move(h1)),
      h2_(std::move(h2)),
      phi_(std::move(phi)),
      s1_(std::move(s1)),
      s2_(std::move(s2)),
      gamma_(std::move(gamma)),
      alpha_(std::move(alpha)),
      gamma_certificate_(std::move(gamma_certificate)),
      override_check_(std::move(override_check)) {}

double ComposedBarrier::phi_value(double s) const {
  if (const auto* p = std::get_if<PhiFn>(&phi_)) return (*p)(s);
  return std::get<GainFn>(phi_)(s);
}

double ComposedBarrier::phi_slope(double s, bool* flagged) const {
  if (const auto* p = std::get_if<PhiFn>(&phi_)) return p->derivative(s, flagged);
  return std::get<GainFn>(phi_).slope(s);
}

namespace {

bool is_identity(const GainFn& g) {
  return g.expr() && structurally_equal(*g.expr(), parse("r", {"r"}));
}

bool is_zero_gain(const GainFn& g) { return g.expr() && g.expr()->is_zero(); }

}  // namespace

std::string ComposedBarrier::set_description() const {
  const std::string b1 = to_display(h1_.expr());
  const std::string b2 = to_display(h2_.expr());
  std::string first;
  if (const auto* g = std::get_if<GainFn>(&phi_)) {
    if (is_identity(*g)) {
      first = b1;
    } else if (g->expr()) {
      first = to_display(simplify(substitute(*g->expr(), "r", h1_.expr())));
    } else {
      first = "φ(" + b1 + ")";
    }
  } else {
    first = "φ(" + b1 + ")";
  }
  std::string out = "min{" + first + "," + b2 + "}";
  if (!is_zero_gain(gamma_)) {
    out += " + ";
    out += gamma_.expr() ? to_display(*gamma_.expr(), {{"r", "‖u‖"}}) : std::string("γ(‖u‖)");
  }
  return out + " ≥ 0";
}

ComposedBarrier compose_barrier(ScalarField h1, ScalarField h2, ComposedBarrier::Phi phi, SubsystemGains s1,
                                SubsystemGains s2, double window, std::size_t grid_size) {
  std::optional<InvariantReport> override_check;
  GainFn phi_gain = std::holds_alternative<PhiFn>(phi) ? std::get<PhiFn>(phi).as_gain() : std::get<GainFn>(phi);
  if (const auto* g = std::get_if<GainFn>(&phi)) {
    override_check = check_phi_sandwich(*g, s1.phi, s2.phi, window, grid_size);
    if (!override_check->passed) {
      throw ConstructionError("explicit phi " + g->description() + " fails the sandwich check: " +
                              override_check->reason);
    }
  } else {
    window = std::get<PhiFn>(phi).radius();
  }

  const GainFn& g1 = s1.gamma;
  const GainFn& g2 = s2.gamma;
  ClassCertificate cert;
  std::optional<GainFn> gamma;
  if (is_zero_gain(g1) && is_zero_gain(g2)) {
    gamma = GainFn::parse("0", GainClass::KInfinity, std::min(g1.radius(), g2.radius()));
    cert.subject = "0";
    cert.claimed_class = "zero";
    cert.window_hi = gamma->radius();
    cert.note = "zero gain: the composed set does not depend on the input";
  } else {
    double radius = std::min(g1.radius(), g2.radius());
    if (g1(radius) > window) radius = invert(g1, window);
    if (phi_gain.expr() && g1.expr() && g2.expr()) {
      const ScalarExpr e =
          simplify(sum(negate(substitute(*phi_gain.expr(), "r", negate(*g1.expr()))), *g2.expr()));
      gamma = GainFn::from_expr(e, GainClass::KInfinity, radius);
    } else {
      auto value = [phi_gain, g1, g2](double r) { return -phi_gain(-g1(r)) + g2(r); };
      auto slope = [phi_gain, g1, g2](double r) { return phi_gain.slope(-g1(r)) * g1.slope(r) + g2.slope(r); };
      gamma = GainFn(value, GainClass::KInfinity, radius,
                     "-phi(-(" + g1.description() + ")) + " + g2.description(), slope);
    }
    cert = certify_class(*gamma, grid_size);
    if (!cert.passed() && !cert.unbounded_probe && cert.failure_point == gamma->window_hi() &&
        std::holds_alternative<PhiFn>(phi)) {
      // Beyond the tabulation window γ cannot be probed. It dominates γ2,
      // and −φ(−γ1) dominates −φ2(−γ1), so either bound carries K∞.
      const auto c2 = certify_class(g2.with_class(GainClass::KInfinity), grid_size);
      const auto c1 = certify_class(g1.with_class(GainClass::KInfinity), grid_size);
      const auto cp = certify_class(s2.phi, grid_size);
      const ClassCertificate monotone = certify_class(gamma->with_class(GainClass::K), grid_size);
      if (monotone.passed() && (c2.passed() || (c1.passed() && cp.passed()))) {
        cert = monotone;
        cert.claimed_class = std::string(to_string(GainClass::KInfinity));
        cert.note += "; unboundedness inferred from " +
                     std::string(c2.passed() ? "gamma >= gamma2" : "gamma >= -phi2(-gamma1)");
      }
    }
    if (!cert.passed()) {
      // A bounded γ still defines a set; flag it instead of rejecting.
      const ClassCertificate weak = certify_class(gamma->with_class(GainClass::K), grid_size);
      if (weak.passed()) {
        const std::string reason = cert.reason;
        cert = weak;
        cert.note += "; flagged: set-defining gain only certified as class K (" + reason + ")";
      }
    }
  }

  const GainFn& a1 = s1.alpha;
  const GainFn& a2 = s2.alpha;
  std::optional<GainFn> alpha;
  const double alpha_radius = std::min(a2.radius(), window);
  if (is_identity(phi_gain) && a1.expr() && a2.expr()) {
    if (structurally_equal(*a1.expr(), *a2.expr())) {
      alpha = GainFn::from_expr(*a1.expr(), GainClass::ExtendedK, alpha_radius);
    } else {
      alpha = GainFn::parse("max(" + a1.expr()->to_string() + ", " + a2.expr()->to_string() + ")",
                            GainClass::ExtendedK, alpha_radius);
    }
  } else {
    auto value = [phi_gain, a1, a2](double s) {
      const double t = invert(phi_gain, s);
      return std::max(phi_gain.slope(t) * a1(t), a2(s));
    };
    alpha = GainFn(value, GainClass::ExtendedK, alpha_radius,
                   "max{phi'(phi^-1(s)) * (" + a1.description() + ")(phi^-1(s)), " + a2.description() + "}");
  }

  return ComposedBarrier(std::move(h1), std::move(h2), std::move(phi), std::move(s1), std::move(s2),
                         std::move(*gamma), std::move(*alpha), std::move(cert), std::move(override_check));
}

double dini_min(double v1, double v2, double d1, double d2) {
  if (std::fabs(v1 - v2) <= kBranchTolerance) return std::min(d1, d2);
  return v1 < v2 ? d1 : d2;
}

ComposedEvaluator::ComposedEvaluator(const ComposedBarrier& cb, const VectorField& f)
    : cb_(&cb), l1_(cb.h1(), f), l2_(cb.h2(), f) {}

double ComposedEvaluator::h(std::span<const double> values) const {
  return std::min(cb_->phi_value(l1_.field(values)), l2_.field(values));
}

DiniResult ComposedEvaluator::operator()(std::span<const double> values) const {
  DiniResult out;
  EvalFlags flags;
  const double h1 = l1_.field(values);
  out.branch1 = cb_->phi_value(h1);
  out.branch2 = l2_.field(values);
  bool one_sided = false;
  out.rate1 = cb_->phi_slope(h1, &one_sided) * l1_(values, &flags);
  out.rate2 = l2_(values, &flags);
  out.h = std::min(out.branch1, out.branch2);
  out.value = dini_min(out.branch1, out.branch2, out.rate1, out.rate2);
  out.flagged = flags.nonsmooth || one_sided;
  return out;
}

DiniResult composed_dini(const ComposedBarrier& cb, const VectorField& f, const std::map<std::string, double>& point) {
  std::vector<double> values(f.variables().size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto it = point.find(f.variables()[i]);
    if (it == point.end()) throw DimensionError("point does not assign variable '" + f.variables()[i] + "'");
    values[i] = it->second;
  }
  return ComposedEvaluator(cb, f)(values);
}

std::string tabulation_csv(std::span<const double> r, std::span<const double> values, std::string_view column) {
  std::string out = "r," + std::string(column) + "\n";
  char buf[64];
  for (std::size_t i = 0; i < r.size(); ++i) {
    auto res = std::to_chars(buf, buf + sizeof buf, r[i]);
    out.append(buf, res.ptr);
    out.push_back(',');
    res = std::to_chars(buf, buf + sizeof buf, values[i]);
    out.append(buf, res.ptr);
    out.push_back('\n');
  }
  return out;
}

}  // namespace issf
