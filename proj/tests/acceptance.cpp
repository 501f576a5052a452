// Acceptance gate. Prints one line per criterion and exits non-zero when the
// outcome differs from the pinned expectation.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "issf/commands.hpp"
#include "issf/construct.hpp"
#include "issf/field.hpp"
#include "issf/gains.hpp"
#include "issf/numerics.hpp"
#include "issf/scenario.hpp"
#include "issf/verify.hpp"
#include "oracles.hpp"

using namespace issf;
namespace fs = std::filesystem;

namespace {

// Criteria known not to hold for the bundled problem. See the README.
const std::set<int> kExpectedRed = {3};

constexpr double kCompositionTol = 1e-12;
constexpr double kMarginTol = 1e-9;
constexpr std::size_t kMinNonVacuous = 1000;
constexpr double kSlopeBound = 0.5 + 1e-6;
constexpr double kClosedFormTol = 1e-8;
constexpr double kRk4Tol = 1e-9;
constexpr double kGradientRtol = 1e-6;
constexpr double kQuadratureTol = 1e-12;

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

const Scenario& bundled() {
  static const Scenario sc = parse_scenario(bundled_example1(), "example1.scn");
  return sc;
}

ComposedBarrier identity_composition(const Scenario& sc) {
  const Subsystem a = sc.subsystem(0);
  const Subsystem b = sc.subsystem(1);
  return compose_barrier(a.h, b.h, GainFn::parse("r", GainClass::ExtendedKInfinity, sc.window),
                         SubsystemGains{a.phi, a.gamma, a.alpha}, SubsystemGains{b.phi, b.gamma, b.alpha}, sc.window,
                         sc.grid);
}

std::string with_variable(const std::string& text, const std::string& var) {
  std::string out;
  for (char c : text) {
    if (c == 'r') out += "(" + var + ")";
    else out += c;
  }
  return out;
}

Outcome composition_of_cross_gains() {
  const fs::path dir = fs::temp_directory_path() / "issf-acceptance-compose";
  fs::remove_all(dir);
  Scenario sc = bundled();
  sc.output_dir = dir.string();
  std::ostringstream log;
  const auto t0 = Clock::now();
  const CommandResult res = run_compose(sc, log);
  const double elapsed = seconds_since(t0);

  std::ifstream in(dir / "composition.csv");
  std::string line;
  std::getline(in, line);
  Outcome o;
  if (line != "r,phi1_phi2") {
    fs::remove_all(dir);
    return {false, "unexpected header '" + line + "'"};
  }
  double worst = 0.0;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    const double r = std::stod(line.substr(0, comma));
    const double v = std::stod(line.substr(comma + 1));
    worst = std::max(worst, std::fabs(v - 0.6144 * r));
    ++rows;
  }
  fs::remove_all(dir);
  o.pass = res.exit_code == kExitPass && rows == sc.grid && worst <= kCompositionTol && elapsed < 1.0;
  o.detail = std::to_string(rows) + " rows, max |phi1(phi2(r)) - 0.6144r| = " + fmt("%.3g", worst) + ", " +
             fmt("%.2f", elapsed) + " s";
  return o;
}

Outcome subsystem_hypotheses() {
  const Scenario& sc = bundled();
  const auto t0 = Clock::now();
  const auto rep = check_interconnection_hypotheses(sc.subsystem(0), sc.subsystem(1), sc.plan);
  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = rep.verdict == Verdict::Pass && rep.first.worst_margin >= -kMarginTol &&
           rep.second.worst_margin >= -kMarginTol && rep.first.triggered >= kMinNonVacuous &&
           rep.second.triggered >= kMinNonVacuous && elapsed < 30.0;
  o.detail = "non-vacuous " + std::to_string(rep.first.triggered) + "/" + std::to_string(rep.second.triggered) +
             " of " + std::to_string(sc.plan.samples) + ", worst margins " + fmt("%.4g", rep.first.worst_margin) +
             "/" + fmt("%.4g", rep.second.worst_margin) + ", " + fmt("%.2f", elapsed) + " s";
  return o;
}

Outcome composed_implication() {
  const Scenario& sc = bundled();
  const auto t0 = Clock::now();
  const ComposedBarrier cb = identity_composition(sc);
  const auto rep = check_composed_implication(cb, sc.f, sc.plan);
  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = rep.verdict == Verdict::Pass && rep.worst_margin >= -kMarginTol && elapsed < 30.0;
  o.detail = std::to_string(rep.violations) + " violations in " + std::to_string(rep.triggered) +
             " non-vacuous samples, worst margin " + fmt("%.4g", rep.worst_margin) + ", " + fmt("%.2f", elapsed) +
             " s";
  if (!rep.counterexamples.empty()) {
    const auto& c = rep.counterexamples.front();
    o.detail += ", e.g. at (";
    for (std::size_t i = 0; i < c.point.size(); ++i) {
      o.detail += (i ? ", " : "") + c.point[i].first + "=" + fmt("%.4g", c.point[i].second);
    }
    o.detail += ")";
  }
  return o;
}

Outcome forward_invariance() {
  const Scenario& sc = bundled();
  const auto t0 = Clock::now();
  const ComposedBarrier cb = identity_composition(sc);
  // γ(r) = −φ(−γ1(r)) + γ2(r) with φ the identity.
  const double gamma_oracle = 2.0 * 1.0 + 2.0 * 1.0;
  const double gamma_at_1 = cb.gamma()(1.0);
  const auto rep = check_forward_invariance(cb, sc.f, sc.plan, sc.simulation);
  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = std::fabs(gamma_at_1 - gamma_oracle) <= kMarginTol && rep.verdict == Verdict::Pass &&
           rep.trajectories.size() == sc.simulation.trajectories && elapsed < 60.0;
  o.detail = "gamma(1) = " + fmt("%.12g", gamma_at_1) + ", " + std::to_string(rep.trajectories.size()) +
             " trajectories, " + std::to_string(rep.violations) + " violations, worst margin " +
             fmt("%.4g", rep.worst_margin) + ", " + fmt("%.2f", elapsed) + " s";
  return o;
}

struct Pair {
  oracle::SaturatedOdd a;
  oracle::SaturatedOdd b;
  GainFn p1;
  GainFn p2;
};

const std::vector<Pair>& random_pairs() {
  static const std::vector<Pair> pairs = [] {
    std::vector<Pair> out;
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> product(0.3, 0.9);
    for (int k = 0; k < 20; ++k) {
      const auto [a, b] = oracle::random_small_gain_pair(rng, product(rng));
      out.push_back({a, b, GainFn::parse(a.text(), GainClass::ExtendedKInfinity, 1000.0),
                     GainFn::parse(b.text(), GainClass::ExtendedKInfinity, 1000.0)});
    }
    return out;
  }();
  return pairs;
}

Outcome rho_invariants() {
  std::size_t bad = 0;
  double max_slope = -1.0;
  double worst_quad = 0.0;
  for (const auto& p : random_pairs()) {
    const RhoFn rho = build_rho(p.p1, p.p2);
    if (!check_rho_invariants(rho).passed) ++bad;
    auto oa = [&](double r) { return p.a(r); };
    auto ob = [&](double r) { return p.b(r); };
    const auto& g = rho.grid();
    const auto& v = rho.values();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double r0 = oracle::rho0(oa, ob, g[i]);
      if (g[i] < 0.0 && !(r0 < v[i] && v[i] < 0.0)) ++bad;
      if (g[i] > 0.0 && !(0.0 < v[i] && v[i] < r0)) ++bad;
      if (i > 0) max_slope = std::max(max_slope, (v[i] - v[i - 1]) / (g[i] - g[i - 1]));
    }
    for (double r : {-7.5, -0.8, 0.3, 4.4}) {
      worst_quad = std::max(worst_quad, std::fabs(rho.exact(r) - oracle::rho(oa, ob, r)));
    }
  }
  Outcome o;
  o.pass = bad == 0 && max_slope < kSlopeBound && worst_quad <= 1e-6;
  o.detail = std::to_string(random_pairs().size()) + " pairs, " + std::to_string(bad) +
             " sandwich failures, max slope " + fmt("%.9f", max_slope) + ", max |rho - oracle| " +
             fmt("%.2g", worst_quad);
  return o;
}

Outcome phi_sandwich() {
  std::size_t bad = 0;
  std::size_t slope_bad = 0;
  for (const auto& p : random_pairs()) {
    const PhiFn phi = build_phi(build_rho(p.p1, p.p2));
    auto oa = [&](double r) { return p.a(r); };
    const auto& g = phi.grid();
    const auto& v = phi.values();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double r = g[i];
      if (r == 0.0) continue;
      const double inv = oracle::bisect(oa, r, -1000.0, 1000.0);
      const double up = p.b(r);
      if (r < 0.0 && !(inv < v[i] && v[i] < up)) ++bad;
      if (r > 0.0 && !(up < v[i] && v[i] < inv)) ++bad;
      if (std::fabs(r) > kPhiSlopeExclusion && !(phi.derivative(r) > 0.0)) ++slope_bad;
    }
  }

  // Linear pair: φ(r) = (r − ρ(r)/2)/a.
  const double a = 0.96;
  const PhiFn lin = build_phi(build_rho(GainFn::parse("0.96*r", GainClass::ExtendedKInfinity, 100.0),
                                        GainFn::parse("0.64*r", GainClass::ExtendedKInfinity, 100.0)));
  double worst = 0.0;
  for (std::size_t i = 0; i < lin.grid().size(); ++i) {
    const double r = lin.grid()[i];
    worst = std::max(worst, std::fabs(lin.values()[i] - (r - lin.rho()(r) / 2.0) / a));
  }
  Outcome o;
  o.pass = bad == 0 && slope_bad == 0 && worst <= kClosedFormTol;
  o.detail = std::to_string(bad) + " sandwich failures, " + std::to_string(slope_bad) +
             " non-positive slopes, linear closed form error " + fmt("%.2g", worst);
  return o;
}

Outcome dissipation_conversion() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> coef(0.0, 1.0);
  std::uniform_real_distribution<double> lead(0.2, 1.0);
  std::uniform_real_distribution<double> cdist(0.1, 0.9);
  std::uniform_real_distribution<double> slack(0.0, 0.5);
  std::size_t failures = 0;
  std::size_t uncertified = 0;
  std::size_t min_triggered = SIZE_MAX;
  double worst = INFINITY;
  for (int k = 0; k < 10; ++k) {
    const oracle::SaturatedOdd chi{lead(rng), coef(rng), coef(rng)};
    const oracle::SaturatedOdd phi{lead(rng), coef(rng), coef(rng)};
    const double c = cdist(rng);
    const double s = slack(rng);
    const auto conv = dissipation_to_implication(GainFn::parse(chi.text(), GainClass::ExtendedKInfinity, 1000.0),
                                                 GainFn::parse(phi.text(), GainClass::KInfinity, 2.0), c);
    if (!certify_class(conv.gamma).passed()) ++uncertified;

    const std::string rhs = "-(" + with_variable(chi.text(), "x") + ") - (" + with_variable(phi.text(), "abs(u)") +
                            ") + " + fmt("%.17g", s) + "*(1 + sin(3*x*u))";
    const VectorField f = VectorField::parse({rhs}, {{"x"}, {}, {"u"}});
    SamplingPlan plan;
    plan.state_box = {{-5.0, 5.0}};
    plan.u_max = 2.0;
    plan.samples = 10000;
    plan.seed = 100 + static_cast<std::uint64_t>(k);
    const auto rep = check_issf_implication(ScalarField::parse("x", {"x"}), f, conv.alpha, conv.gamma, plan);
    if (rep.verdict != Verdict::Pass || rep.worst_margin < -kMarginTol) ++failures;
    min_triggered = std::min(min_triggered, rep.triggered);
    worst = std::min(worst, rep.worst_margin);
  }
  Outcome o;
  o.pass = failures == 0 && uncertified == 0 && min_triggered >= 100;
  o.detail = "10 triples, " + std::to_string(uncertified) + " gamma certificates failed, " +
             std::to_string(failures) + " implication failures, min non-vacuous " + std::to_string(min_triggered) +
             ", worst margin " + fmt("%.4g", worst);
  return o;
}

Outcome numerical_kernels() {
  const VectorField decay = VectorField::parse({"-x"}, {{"x"}, {}, {}});
  const Trajectory t = simulate(decay, std::vector<double>{1.0}, InputSignal::constant({}), 1e-3, 1.0);
  const double rk4_err = std::fabs(t.x.back()[0] - oracle::exponential_decay(1.0, 1.0, 1.0));

  const ScalarField h = ScalarField::parse("-x1 - 0.24*x2*sin(x1 - x2) - 0.5*u1^3", {"x1", "x2", "u1"});
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(-3.0, 3.0);
  double worst_rel = 0.0;
  for (int k = 0; k < 100; ++k) {
    const std::vector<double> p = {d(rng), d(rng), d(rng)};
    for (std::size_t i = 0; i < p.size(); ++i) {
      auto slice = [&](double v) {
        std::vector<double> q = p;
        q[i] = v;
        return h.value(q);
      };
      const double fd = oracle::central_difference(slice, p[i], 1e-5);
      const double g = h.gradient()[i].eval(p);
      worst_rel = std::max(worst_rel, std::fabs(g - fd) / std::max(1.0, std::fabs(fd)));
    }
  }

  const double quad_err = std::fabs(adaptive_simpson([](double s) { return s * s * s; }, 0.0, 1.0).value - 0.25);
  Outcome o;
  o.pass = rk4_err <= kRk4Tol && worst_rel <= kGradientRtol && quad_err <= kQuadratureTol;
  o.detail = "RK4 error " + fmt("%.2g", rk4_err) + ", gradient rel error " + fmt("%.2g", worst_rel) +
             ", quadrature error " + fmt("%.2g", quad_err);
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "cross-gain composition", composition_of_cross_gains},
      {2, "subsystem hypotheses", subsystem_hypotheses},
      {3, "composed implication", composed_implication},
      {4, "forward invariance", forward_invariance},
      {5, "rho invariants", rho_invariants},
      {6, "phi sandwich", phi_sandwich},
      {7, "dissipation conversion", dissipation_conversion},
      {8, "numerical kernels", numerical_kernels},
  };

  int passed = 0;
  int unexpected = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const bool expected_red = kExpectedRed.count(c.id) > 0;
    if (o.pass) ++passed;
    if (o.pass == expected_red) ++unexpected;
    std::printf("[%s] %d %s: %s%s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                expected_red ? (o.pass ? " (expected FAIL)" : " (expected)") : "");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria pass, %zu expected red, %d unexpected\n", passed, criteria.size(), kExpectedRed.size(),
              unexpected);
  return unexpected == 0 ? 0 : 1;
}
