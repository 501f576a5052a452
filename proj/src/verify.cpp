#include "issf/verify.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

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

constexpr std::size_t kBlock = 2048;
constexpr int kBisectionSteps = 60;

double norm_of(std::span<const double> p, const std::vector<std::size_t>& idx) {
  double s = 0.0;
  for (auto i : idx) s += p[i] * p[i];
  return std::sqrt(s);
}

std::vector<std::size_t> input_indices(const VectorField& f) {
  std::vector<std::size_t> idx(f.input_dim());
  std::iota(idx.begin(), idx.end(), f.state_dim());
  return idx;
}

std::vector<std::size_t> named_indices(const VectorField& f, const std::vector<std::string>& names) {
  std::vector<std::size_t> idx;
  const auto& vars = f.variables();
  for (const auto& n : names) {
    const auto it = std::find(vars.begin(), vars.end(), n);
    if (it == vars.end()) throw DimensionError("variable '" + n + "' is not a variable of the vector field");
    idx.push_back(static_cast<std::size_t>(it - vars.begin()));
  }
  return idx;
}

std::map<std::string, double> to_map(const std::vector<std::string>& vars, std::span<const double> p) {
  std::map<std::string, double> m;
  for (std::size_t i = 0; i < vars.size(); ++i) m[vars[i]] = p[i];
  return m;
}

double map_norm(const std::map<std::string, double>& m, const std::vector<std::string>& names) {
  double s = 0.0;
  for (const auto& n : names) s += m.at(n) * m.at(n);
  return std::sqrt(s);
}

std::vector<std::string> input_names(const VectorField& f) { return f.partition().u; }

struct Outcome {
  bool triggered = false;
  bool flagged = false;
  double margin = 0.0;
};

using Evaluate = std::function<Outcome(std::span<const double>)>;
using Describe = std::function<Counterexample(std::span<const double>)>;

VerificationReport run_implication(std::string name, const VectorField& f, const SamplingPlan& plan,
                                   const std::vector<double>& samples, const Evaluate& eval,
                                   const Describe& describe) {
  VerificationReport rep;
  rep.name = std::move(name);
  rep.variables = f.variables();
  const std::size_t d = f.variables().size();
  const std::size_t n = samples.size() / d;
  rep.samples = n;

  std::vector<Outcome> out(n);
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t end = std::min(n, (b + 1) * kBlock);
    for (std::size_t i = b * kBlock; i < end; ++i) out[i] = eval(std::span<const double>(samples.data() + i * d, d));
  });

  std::vector<double> margins;
  rep.worst_margin = std::numeric_limits<double>::infinity();
  std::size_t worst = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (!out[i].triggered) continue;
    ++rep.triggered;
    if (out[i].flagged) ++rep.flagged;
    margins.push_back(out[i].margin);
    if (out[i].margin < rep.worst_margin) {
      rep.worst_margin = out[i].margin;
      worst = i;
    }
    if (out[i].margin < -kImplicationTolerance) {
      ++rep.violations;
      if (rep.counterexamples.size() < kMaxCounterexamples) {
        Counterexample c = describe(std::span<const double>(samples.data() + i * d, d));
        if (!c.rechecked) rep.notes.push_back("counterexample " + std::to_string(i) + " did not reproduce on recheck");
        rep.counterexamples.push_back(std::move(c));
      }
    }
  }
  rep.vacuous = n - rep.triggered;
  rep.notes.push_back("strategy " + std::string(to_string(plan.strategy)) + ", seed " + std::to_string(plan.seed) +
                      ", u_max " + fmt(plan.u_max));
  if (rep.triggered == 0) {
    rep.verdict = Verdict::Inconclusive;
    rep.worst_margin = 0.0;
    rep.notes.push_back("no sample satisfied the antecedent; the check is vacuous");
    return rep;
  }
  rep.worst_point.assign(samples.begin() + static_cast<std::ptrdiff_t>(worst * d),
                         samples.begin() + static_cast<std::ptrdiff_t>((worst + 1) * d));
  std::sort(margins.begin(), margins.end());
  auto q = [&margins](double p) {
    return margins[static_cast<std::size_t>(std::floor(p * static_cast<double>(margins.size() - 1)))];
  };
  rep.distribution = {margins.front(), q(0.01), q(0.5), q(0.99), margins.back()};
  rep.verdict = rep.violations > 0 ? Verdict::Fail : Verdict::Pass;
  if (rep.flagged > 0) {
    rep.notes.push_back(std::to_string(rep.flagged) + " triggered sample(s) evaluated at a nonsmooth point");
  }
  return rep;
}

// Bisects the segment between a (level ≥ 0) and b (level < 0) and returns
// a point with level in [0, band] when the band is reached.
std::vector<double> bisect_to_level(const std::function<double(std::span<const double>)>& level,
                                    std::vector<double> a, std::vector<double> b, double band) {
  std::vector<double> mid(a.size());
  for (int it = 0; it < kBisectionSteps; ++it) {
    if (level(a) <= band) break;
    for (std::size_t j = 0; j < a.size(); ++j) mid[j] = 0.5 * (a[j] + b[j]);
    if (level(mid) >= 0.0) {
      a = mid;
    } else {
      b = mid;
    }
  }
  return a;
}

}  // namespace

std::string_view to_string(SamplingStrategy s) {
  switch (s) {
    case SamplingStrategy::UniformGrid: return "uniform-grid";
    case SamplingStrategy::LatinHypercube: return "latin-hypercube";
    case SamplingStrategy::BoundaryBiased: return "boundary-biased";
  }
  return "?";
}

std::optional<SamplingStrategy> parse_strategy(std::string_view name) {
  if (name == "uniform-grid") return SamplingStrategy::UniformGrid;
  if (name == "latin-hypercube") return SamplingStrategy::LatinHypercube;
  if (name == "boundary-biased") return SamplingStrategy::BoundaryBiased;
  return std::nullopt;
}

void SamplingPlan::validate(std::size_t state_dim) const {
  if (state_box.size() != state_dim) {
    throw PreconditionError("sampling box has " + std::to_string(state_box.size()) + " intervals for " +
                            std::to_string(state_dim) + " state variables");
  }
  for (const auto& iv : state_box) {
    if (!(iv.lo < iv.hi)) throw PreconditionError("sampling interval [" + fmt(iv.lo) + ", " + fmt(iv.hi) + "] is empty");
  }
  if (samples == 0) throw PreconditionError("sample count must be positive");
  if (!(u_max >= 0.0) || !std::isfinite(u_max)) throw PreconditionError("u_max must be finite and nonnegative");
}

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t Rng::next() { return engine_(); }

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::vector<double> draw_samples(const SamplingPlan& plan, std::size_t state_dim, std::size_t input_dim,
                                 const std::function<double(std::span<const double>)>& level) {
  plan.validate(state_dim);
  const std::size_t d = state_dim + input_dim;
  std::vector<Interval> box = plan.state_box;
  for (std::size_t j = 0; j < input_dim; ++j) box.push_back({-plan.u_max, plan.u_max});
  Rng rng(plan.seed);
  std::vector<double> out;

  if (plan.strategy == SamplingStrategy::UniformGrid) {
    const auto per_axis = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(plan.samples), 1.0 / static_cast<double>(d)) + 1e-9)));
    std::size_t total = 1;
    for (std::size_t j = 0; j < d; ++j) total *= per_axis;
    out.resize(total * d);
    for (std::size_t i = 0; i < total; ++i) {
      std::size_t rest = i;
      for (std::size_t j = 0; j < d; ++j) {
        const std::size_t k = rest % per_axis;
        rest /= per_axis;
        const double t = per_axis == 1 ? 0.5 : static_cast<double>(k) / static_cast<double>(per_axis - 1);
        out[i * d + j] = box[j].lo + t * (box[j].hi - box[j].lo);
      }
    }
    return out;
  }

  const std::size_t n = plan.samples;
  out.resize(n * d);
  std::vector<std::size_t> perm(n);
  for (std::size_t j = 0; j < d; ++j) {
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.next() % i]);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = (static_cast<double>(perm[i]) + rng.uniform()) / static_cast<double>(n);
      out[i * d + j] = box[j].lo + t * (box[j].hi - box[j].lo);
    }
  }

  if (plan.strategy == SamplingStrategy::BoundaryBiased && level) {
    std::vector<double> lv(n);
    for (std::size_t i = 0; i < n; ++i) lv[i] = level(std::span<const double>(out.data() + i * d, d));
    for (std::size_t i = 1; i < n; i += 2) {
      for (std::size_t step = 1; step <= 64 && step < n; ++step) {
        const std::size_t k = (i + step) % n;
        if ((lv[i] >= 0.0) == (lv[k] >= 0.0)) continue;
        std::vector<double> a(out.begin() + static_cast<std::ptrdiff_t>(i * d), out.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
        std::vector<double> b(out.begin() + static_cast<std::ptrdiff_t>(k * d), out.begin() + static_cast<std::ptrdiff_t>((k + 1) * d));
        if (lv[i] < 0.0) std::swap(a, b);
        const auto p = bisect_to_level(level, a, b, 0.0);
        std::copy(p.begin(), p.end(), out.begin() + static_cast<std::ptrdiff_t>(i * d));
        break;
      }
    }
  }
  return out;
}

InputSignal InputSignal::constant(std::vector<double> value) {
  InputSignal s;
  s.kind_ = Kind::Constant;
  s.dim_ = value.size();
  std::ostringstream os;
  os << "constant(";
  for (std::size_t i = 0; i < value.size(); ++i) os << (i ? ", " : "") << value[i];
  os << ")";
  s.description_ = os.str();
  s.values_.push_back(std::move(value));
  return s;
}

InputSignal InputSignal::piecewise(std::vector<double> switch_times, std::vector<std::vector<double>> values) {
  if (values.size() != switch_times.size() + 1) {
    throw PreconditionError("a piecewise-constant input needs one more value than switch times");
  }
  if (!std::is_sorted(switch_times.begin(), switch_times.end())) {
    throw PreconditionError("switch times must be nondecreasing");
  }
  InputSignal s;
  s.kind_ = Kind::Piecewise;
  s.dim_ = values.front().size();
  for (const auto& v : values) {
    if (v.size() != s.dim_) throw DimensionError("piecewise-constant input values differ in dimension");
  }
  s.times_ = std::move(switch_times);
  s.values_ = std::move(values);
  s.description_ = "piecewise-constant(" + std::to_string(s.values_.size()) + " pieces)";
  return s;
}

InputSignal InputSignal::sinusoidal(std::vector<double> amplitude, double omega, double phase) {
  InputSignal s;
  s.kind_ = Kind::Sinusoidal;
  s.dim_ = amplitude.size();
  s.amplitude_ = std::move(amplitude);
  s.omega_ = omega;
  s.phase_ = phase;
  s.description_ = "sinusoidal(omega=" + fmt(omega) + ", phase=" + fmt(phase) + ")";
  return s;
}

InputSignal InputSignal::random(std::size_t dim, double bound, double hold, double horizon, std::uint64_t seed) {
  if (!(hold > 0.0)) throw PreconditionError("input hold time must be positive");
  if (!(bound >= 0.0)) throw PreconditionError("input bound must be nonnegative");
  const auto pieces = static_cast<std::size_t>(std::ceil(horizon / hold)) + 1;
  Rng rng(seed);
  std::vector<double> times;
  std::vector<std::vector<double>> values;
  for (std::size_t k = 0; k < pieces; ++k) {
    std::vector<double> v(dim, 0.0);
    if (dim > 0) {
      double norm = 0.0;
      do {
        norm = 0.0;
        for (auto& c : v) {
          c = rng.uniform(-1.0, 1.0);
          norm += c * c;
        }
        norm = std::sqrt(norm);
      } while (norm == 0.0 || norm > 1.0);
      const double scale = k % 2 == 0 ? bound / norm : bound;
      for (auto& c : v) c *= scale;
    }
    values.push_back(std::move(v));
    if (k + 1 < pieces) times.push_back(static_cast<double>(k + 1) * hold);
  }
  InputSignal s = piecewise(std::move(times), std::move(values));
  s.dim_ = dim;
  s.description_ = "random piecewise-constant(seed=" + std::to_string(seed) + ", hold=" + fmt(hold) +
                   ", bound=" + fmt(bound) + ")";
  return s;
}

void InputSignal::value(double t, std::span<double> out) const {
  switch (kind_) {
    case Kind::Constant:
      std::copy(values_[0].begin(), values_[0].end(), out.begin());
      return;
    case Kind::Piecewise: {
      const auto k = static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), t) - times_.begin());
      std::copy(values_[k].begin(), values_[k].end(), out.begin());
      return;
    }
    case Kind::Sinusoidal: {
      const double s = std::sin(omega_ * t + phase_);
      for (std::size_t i = 0; i < dim_; ++i) out[i] = amplitude_[i] * s;
      return;
    }
  }
}

double InputSignal::sup_norm() const {
  auto norm = [](const std::vector<double>& v) {
    return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  };
  if (kind_ == Kind::Sinusoidal) return norm(amplitude_);
  double m = 0.0;
  for (const auto& v : values_) m = std::max(m, norm(v));
  return m;
}

namespace {

struct SingleHolder {
  SingleHolder(const ScalarField& h_, const VectorField& f_) : h(h_), f(f_), lie(h, f) {}
  ScalarField h;
  VectorField f;
  LieDerivative lie;
};

struct ComposedHolder {
  ComposedHolder(const ComposedBarrier& cb_, const VectorField& f_) : cb(cb_), f(f_), eval(cb, f) {}
  ComposedBarrier cb;
  VectorField f;
  ComposedEvaluator eval;
};

}  // namespace

BarrierView single_barrier(const ScalarField& h, const VectorField& f) {
  auto holder = std::make_shared<SingleHolder>(h, f);
  BarrierView v;
  v.value = [holder](std::span<const double> p) { return holder->lie.field(p); };
  v.rate = [holder](std::span<const double> p) {
    EvalFlags flags;
    const double r = holder->lie(p, &flags);
    return std::pair<double, bool>(r, flags.nonsmooth);
  };
  v.description = h.expr().to_string();
  return v;
}

BarrierView composed_barrier_view(const ComposedBarrier& cb, const VectorField& f) {
  auto holder = std::make_shared<ComposedHolder>(cb, f);
  BarrierView v;
  v.value = [holder](std::span<const double> p) { return holder->eval.h(p); };
  v.rate = [holder](std::span<const double> p) {
    const DiniResult d = holder->eval(p);
    return std::pair<double, bool>(d.value, d.flagged);
  };
  v.description = cb.set_description();
  return v;
}

namespace {

// RK4 driver; `step` sees (t, point) after every accepted step including
// t = 0 and returns false to stop early.
bool integrate(const VectorField& f, std::span<const double> x0, const InputSignal& u, double dt, double horizon,
               const std::function<void(double, std::span<const double>)>& step, double* abort_time) {
  const std::size_t n = f.state_dim();
  const std::size_t m = f.input_dim();
  if (x0.size() != n) throw DimensionError("initial state has " + std::to_string(x0.size()) + " components, expected " + std::to_string(n));
  if (u.dim() != m) throw DimensionError("input signal has dimension " + std::to_string(u.dim()) + ", expected " + std::to_string(m));
  if (!(dt > 0.0)) throw PreconditionError("time step must be positive");
  if (!(horizon >= dt)) throw PreconditionError("horizon must be at least one time step");
  const auto steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));

  std::vector<double> point(n + m);
  std::copy(x0.begin(), x0.end(), point.begin());
  std::vector<double> x(x0.begin(), x0.end());
  std::vector<double> k1(n), k2(n), k3(n), k4(n);
  const std::span<double> uspan(point.data() + n, m);
  auto rhs = [&](const std::vector<double>& state, std::vector<double>& out) {
    std::copy(state.begin(), state.end(), point.begin());
    f.eval(point, out);
  };
  std::vector<double> tmp(n);
  u.value(0.0, uspan);
  step(0.0, point);
  for (std::size_t s = 0; s < steps; ++s) {
    const double t = static_cast<double>(s) * dt;
    const bool held = u.piecewise_constant();
    if (held) u.value(t + 0.5 * dt, uspan);

    if (!held) u.value(t, uspan);
    rhs(x, k1);
    if (!held) u.value(t + 0.5 * dt, uspan);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
    rhs(tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k2[i];
    rhs(tmp, k3);
    if (!held) u.value(t + dt, uspan);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + dt * k3[i];
    rhs(tmp, k4);
    bool blown = false;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      if (!std::isfinite(x[i]) || std::fabs(x[i]) > kBlowUpBound) blown = true;
    }
    const double t_next = static_cast<double>(s + 1) * dt;
    if (blown) {
      if (abort_time) *abort_time = t_next;
      return false;
    }
    std::copy(x.begin(), x.end(), point.begin());
    // The logged input is the one held over the step just taken.
    step(t_next, point);
  }
  return true;
}

}  // namespace

Trajectory simulate(const VectorField& f, std::span<const double> x0, const InputSignal& u, double dt, double horizon,
                    const BarrierView* barrier, double offset) {
  Trajectory traj;
  traj.input = u.description();
  const std::size_t n = f.state_dim();
  auto record = [&](double t, std::span<const double> p) {
    traj.t.push_back(t);
    traj.x.emplace_back(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(n));
    if (barrier) {
      const double h = barrier->value(p);
      traj.h.push_back(h);
      traj.margin.push_back(h + offset);
    }
  };
  traj.aborted = !integrate(f, x0, u, dt, horizon, record, &traj.abort_time);
  return traj;
}

namespace {

Counterexample single_counterexample(const ScalarField& h, const VectorField& f, const GainFn& alpha,
                                     const std::vector<std::string>& inputs, std::span<const double> p,
                                     const std::function<double(const std::map<std::string, double>&)>& bound) {
  Counterexample c;
  const auto m = to_map(f.variables(), p);
  for (const auto& [k, v] : m) c.point.emplace_back(k, v);
  const double hv = h.value(m);
  const double b = bound(m);
  const double rate = lie_derivative(h, f, m);
  const double rhs = -alpha(hv);
  c.margin = rate - rhs;
  c.values = {{"h", hv}, {"antecedent_bound", b}, {"input_norm", map_norm(m, inputs)},
              {"lie_derivative", rate}, {"required_rate", rhs}, {"margin", c.margin}};
  c.rechecked = hv <= -b && c.margin < -kImplicationTolerance;
  return c;
}

}  // namespace

VerificationReport check_issf_implication(const ScalarField& h, const VectorField& f, const GainFn& alpha,
                                          const GainFn& gamma, const SamplingPlan& plan) {
  const LieDerivative lie(h, f);
  const auto uidx = input_indices(f);
  const auto unames = input_names(f);
  auto level = [&](std::span<const double> p) { return -gamma(norm_of(p, uidx)) - lie.field(p); };
  const auto samples = draw_samples(plan, f.state_dim(), f.input_dim(), level);
  auto eval = [&](std::span<const double> p) {
    Outcome o;
    const double hv = lie.field(p);
    o.triggered = hv <= -gamma(norm_of(p, uidx));
    if (!o.triggered) return o;
    EvalFlags flags;
    o.margin = lie(p, &flags) + alpha(hv);
    o.flagged = flags.nonsmooth;
    return o;
  };
  auto describe = [&](std::span<const double> p) {
    return single_counterexample(h, f, alpha, unames, p,
                                 [&](const std::map<std::string, double>& m) { return gamma(map_norm(m, unames)); });
  };
  return run_implication("issf-implication", f, plan, samples, eval, describe);
}

InterconnectionReport check_interconnection_hypotheses(const Subsystem& s1, const Subsystem& s2,
                                                       const SamplingPlan& plan) {
  if (s1.f.variables() != s2.f.variables()) {
    throw DimensionError("subsystems must share the interconnected vector field's variables");
  }
  const VectorField& f = s1.f;
  auto one = [&](const Subsystem& own, const Subsystem& other) {
    const LieDerivative lie(own.h, f);
    const LieDerivative peer(other.h, f);
    const auto uidx = named_indices(f, own.inputs);
    auto bound = [&](std::span<const double> p) {
      return std::max(own.phi(std::fabs(peer.field(p))), own.gamma(norm_of(p, uidx)));
    };
    auto level = [&](std::span<const double> p) { return -bound(p) - lie.field(p); };
    const auto samples = draw_samples(plan, f.state_dim(), f.input_dim(), level);
    auto eval = [&](std::span<const double> p) {
      Outcome o;
      const double hv = lie.field(p);
      o.triggered = hv <= -bound(p);
      if (!o.triggered) return o;
      EvalFlags flags;
      o.margin = lie(p, &flags) + own.alpha(hv);
      o.flagged = flags.nonsmooth;
      return o;
    };
    auto describe = [&](std::span<const double> p) {
      return single_counterexample(own.h, f, own.alpha, own.inputs, p, [&](const std::map<std::string, double>& m) {
        return std::max(own.phi(std::fabs(other.h.value(m))), own.gamma(map_norm(m, own.inputs)));
      });
    };
    return run_implication("subsystem-" + std::to_string(own.index), f, plan, samples, eval, describe);
  };
  InterconnectionReport rep;
  rep.first = one(s1, s2);
  rep.second = one(s2, s1);
  auto rank = [](Verdict v) { return v == Verdict::Fail ? 2 : (v == Verdict::Inconclusive ? 1 : 0); };
  rep.verdict = rank(rep.first.verdict) >= rank(rep.second.verdict) ? rep.first.verdict : rep.second.verdict;
  return rep;
}

namespace {

Counterexample composed_counterexample(const ComposedBarrier& cb, const VectorField& f, std::span<const double> p,
                                       bool lyapunov) {
  Counterexample c;
  const auto m = to_map(f.variables(), p);
  for (const auto& [k, v] : m) c.point.emplace_back(k, v);
  const auto unames = input_names(f);
  const DiniResult d = composed_dini(cb, f, m);
  const double g = cb.gamma()(map_norm(m, unames));
  if (!lyapunov) {
    const double rhs = -cb.alpha()(d.h);
    c.margin = d.value - rhs;
    c.values = {{"h", d.h},           {"phi_h1", d.branch1},    {"h2", d.branch2},       {"rate1", d.rate1},
                {"rate2", d.rate2},   {"dini", d.value},        {"gamma", g},            {"required_rate", rhs},
                {"margin", c.margin}, {"flagged", d.flagged ? 1.0 : 0.0}};
    c.rechecked = d.h <= -g && c.margin < -kImplicationTolerance;
  } else {
    const double v = std::max(0.0, -d.h);
    const double bound = cb.alpha()(-v);
    c.margin = bound - (-d.value);
    c.values = {{"V", v},           {"phi_h1", d.branch1}, {"h2", d.branch2}, {"dV", -d.value},
                {"gamma", g},       {"bound", bound},      {"margin", c.margin}};
    c.rechecked = v > 0.0 && v >= g && c.margin < -kImplicationTolerance;
  }
  return c;
}

}  // namespace

VerificationReport check_composed_implication(const ComposedBarrier& cb, const VectorField& f,
                                              const SamplingPlan& plan) {
  const ComposedEvaluator ev(cb, f);
  const auto uidx = input_indices(f);
  auto level = [&](std::span<const double> p) { return -cb.gamma()(norm_of(p, uidx)) - ev.h(p); };
  const auto samples = draw_samples(plan, f.state_dim(), f.input_dim(), level);
  auto eval = [&](std::span<const double> p) {
    Outcome o;
    const double hv = ev.h(p);
    o.triggered = hv <= -cb.gamma()(norm_of(p, uidx));
    if (!o.triggered) return o;
    const DiniResult d = ev(p);
    o.margin = d.value + cb.alpha()(d.h);
    o.flagged = d.flagged;
    return o;
  };
  auto describe = [&](std::span<const double> p) { return composed_counterexample(cb, f, p, false); };
  return run_implication("composed-implication", f, plan, samples, eval, describe);
}

VerificationReport v_function_decrease(const ScalarField& h, const GainFn& gamma, const GainFn& alpha,
                                       const VectorField& f, const SamplingPlan& plan) {
  const LieDerivative lie(h, f);
  const auto uidx = input_indices(f);
  const auto unames = input_names(f);
  auto level = [&](std::span<const double> p) { return -lie.field(p) - gamma(norm_of(p, uidx)); };
  const auto samples = draw_samples(plan, f.state_dim(), f.input_dim(), level);
  auto eval = [&](std::span<const double> p) {
    Outcome o;
    const double v = std::max(0.0, -lie.field(p));
    o.triggered = v > 0.0 && v >= gamma(norm_of(p, uidx));
    if (!o.triggered) return o;
    EvalFlags flags;
    const double dv = -lie(p, &flags);
    o.margin = alpha(-v) - dv;
    o.flagged = flags.nonsmooth;
    return o;
  };
  auto describe = [&](std::span<const double> p) {
    Counterexample c;
    const auto m = to_map(f.variables(), p);
    for (const auto& [k, val] : m) c.point.emplace_back(k, val);
    const double v = std::max(0.0, -h.value(m));
    const double dv = -lie_derivative(h, f, m);
    const double g = gamma(map_norm(m, unames));
    const double bound = alpha(-v);
    c.margin = bound - dv;
    c.values = {{"V", v}, {"dV", dv}, {"gamma", g}, {"bound", bound}, {"margin", c.margin}};
    c.rechecked = v > 0.0 && v >= g && c.margin < -kImplicationTolerance;
    return c;
  };
  return run_implication("v-function-decrease", f, plan, samples, eval, describe);
}

VerificationReport v_function_decrease(const ComposedBarrier& cb, const VectorField& f, const SamplingPlan& plan) {
  const ComposedEvaluator ev(cb, f);
  const auto uidx = input_indices(f);
  auto level = [&](std::span<const double> p) { return -ev.h(p) - cb.gamma()(norm_of(p, uidx)); };
  const auto samples = draw_samples(plan, f.state_dim(), f.input_dim(), level);
  auto eval = [&](std::span<const double> p) {
    Outcome o;
    const double v = std::max(0.0, -ev.h(p));
    o.triggered = v > 0.0 && v >= cb.gamma()(norm_of(p, uidx));
    if (!o.triggered) return o;
    const DiniResult d = ev(p);
    o.margin = cb.alpha()(-v) + d.value;
    o.flagged = d.flagged;
    return o;
  };
  auto describe = [&](std::span<const double> p) { return composed_counterexample(cb, f, p, true); };
  return run_implication("v-function-decrease", f, plan, samples, eval, describe);
}

VerificationReport check_forward_invariance(const BarrierView& barrier, const GainFn& gamma, const VectorField& f,
                                            const SamplingPlan& plan, const InvarianceOptions& options) {
  plan.validate(f.state_dim());
  const std::size_t n = f.state_dim();
  const std::size_t m = f.input_dim();
  const double offset = gamma(plan.u_max);
  VerificationReport rep;
  rep.name = "forward-invariance";
  rep.variables = f.variables();
  rep.notes.push_back("set: " + barrier.description + " with u_max " + fmt(plan.u_max) + ", offset gamma(u_max) = " +
                      fmt(offset));

  auto level = [&](std::span<const double> x) {
    std::vector<double> p(n + m, 0.0);
    std::copy(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n), p.begin());
    return barrier.value(p) + offset;
  };

  struct Seed {
    std::vector<double> x0;
    bool boundary = false;
  };
  std::vector<Seed> seeds;
  if (!options.initial_states.empty()) {
    for (const auto& x : options.initial_states) {
      if (x.size() != n) throw DimensionError("initial state has the wrong dimension");
      seeds.push_back({x, false});
    }
  } else {
    SamplingPlan cand = plan;
    cand.strategy = SamplingStrategy::LatinHypercube;
    cand.samples = std::max<std::size_t>(2000, 20 * options.trajectories);
    const auto pts = draw_samples(cand, n, 0);
    std::vector<std::vector<double>> inside;
    std::vector<std::vector<double>> outside;
    for (std::size_t i = 0; i < cand.samples; ++i) {
      std::vector<double> x(pts.begin() + static_cast<std::ptrdiff_t>(i * n),
                            pts.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
      (level(x) >= 0.0 ? inside : outside).push_back(std::move(x));
    }
    if (inside.empty()) {
      rep.verdict = Verdict::Inconclusive;
      rep.notes.push_back("no sampled state of the box lies in the set");
      return rep;
    }
    auto n_boundary = static_cast<std::size_t>(std::llround(options.boundary_fraction * static_cast<double>(options.trajectories)));
    if (outside.empty() && n_boundary > 0) {
      rep.notes.push_back("the box contains no sampled state outside the set; boundary seeding skipped");
      n_boundary = 0;
    }
    const std::size_t n_inside = options.trajectories - n_boundary;
    for (std::size_t i = 0; i < n_inside; ++i) seeds.push_back({inside[i % inside.size()], false});
    for (std::size_t i = 0; i < n_boundary; ++i) {
      const auto& a = inside[(n_inside + i) % inside.size()];
      const auto& b = outside[i % outside.size()];
      seeds.push_back({bisect_to_level(level, a, b, kBoundaryBand), true});
    }
  }

  std::vector<InputSignal> inputs;
  inputs.reserve(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (options.input) {
      if (options.input->sup_norm() > plan.u_max + 1e-12) {
        throw PreconditionError("input signal sup-norm " + fmt(options.input->sup_norm()) + " exceeds u_max " +
                                fmt(plan.u_max));
      }
      inputs.push_back(*options.input);
    } else {
      const std::uint64_t seed = plan.seed + 0x9E3779B97F4A7C15ULL * (i + 1);
      inputs.push_back(InputSignal::random(m, plan.u_max, options.hold, options.horizon, seed));
    }
  }

  rep.trajectories.resize(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t i) {
    TrajectorySummary& s = rep.trajectories[i];
    s.index = i;
    s.x0 = seeds[i].x0;
    s.input = inputs[i].description();
    s.boundary_seeded = seeds[i].boundary;
    s.min_margin = std::numeric_limits<double>::infinity();
    bool first = true;
    auto watch = [&](double t, std::span<const double> p) {
      const double mg = barrier.value(p) + offset;
      if (first) {
        s.initial_margin = mg;
        first = false;
      }
      if (mg < s.min_margin) {
        s.min_margin = mg;
        s.t_min = t;
      }
    };
    double abort_time = 0.0;
    s.aborted = !integrate(f, s.x0, inputs[i], options.dt, options.horizon, watch, &abort_time);
    s.violated = s.min_margin < -kInvarianceTolerance;
  });

  rep.samples = seeds.size();
  rep.triggered = seeds.size();
  rep.worst_margin = std::numeric_limits<double>::infinity();
  std::size_t worst = 0;
  std::size_t aborted = 0;
  std::vector<std::size_t> violating;
  for (const auto& s : rep.trajectories) {
    if (s.min_margin < rep.worst_margin) {
      rep.worst_margin = s.min_margin;
      worst = s.index;
    }
    if (s.violated) {
      ++rep.violations;
      violating.push_back(s.index);
    }
    if (s.aborted) ++aborted;
  }
  rep.worst_point = rep.trajectories[worst].x0;
  if (aborted > 0) rep.notes.push_back(std::to_string(aborted) + " trajectory(ies) aborted at the blow-up bound");
  rep.verdict = rep.violations > 0 ? Verdict::Fail : (aborted > 0 ? Verdict::Inconclusive : Verdict::Pass);

  std::vector<std::size_t> keep{worst};
  for (auto i : violating) {
    if (keep.size() >= options.keep) break;
    if (i != worst) keep.push_back(i);
  }
  for (auto i : keep) {
    rep.recorded.emplace_back(i, simulate(f, seeds[i].x0, inputs[i], options.dt, options.horizon, &barrier, offset));
  }
  for (auto i : violating) {
    if (rep.counterexamples.size() >= kMaxCounterexamples) break;
    const auto& s = rep.trajectories[i];
    Counterexample c;
    for (std::size_t j = 0; j < n; ++j) c.point.emplace_back(f.variables()[j], s.x0[j]);
    c.margin = s.min_margin;
    c.values = {{"trajectory", static_cast<double>(i)}, {"t_min", s.t_min}, {"min_margin", s.min_margin}};
    // Independent recheck: integrate again with full logging.
    const Trajectory again = simulate(f, s.x0, inputs[i], options.dt, options.horizon, &barrier, offset);
    c.rechecked = !again.margin.empty() &&
                  *std::min_element(again.margin.begin(), again.margin.end()) < -kInvarianceTolerance;
    rep.counterexamples.push_back(std::move(c));
  }
  if (!rep.trajectories.empty()) {
    std::vector<double> mins;
    for (const auto& s : rep.trajectories) mins.push_back(s.min_margin);
    std::sort(mins.begin(), mins.end());
    auto q = [&mins](double p) { return mins[static_cast<std::size_t>(std::floor(p * static_cast<double>(mins.size() - 1)))]; };
    rep.distribution = {mins.front(), q(0.01), q(0.5), q(0.99), mins.back()};
  }
  rep.notes.push_back("dt " + fmt(options.dt) + ", horizon " + fmt(options.horizon) + ", hold " + fmt(options.hold));
  return rep;
}

VerificationReport check_forward_invariance(const ComposedBarrier& cb, const VectorField& f, const SamplingPlan& plan,
                                            const InvarianceOptions& options) {
  return check_forward_invariance(composed_barrier_view(cb, f), cb.gamma(), f, plan, options);
}

VerificationReport check_forward_invariance(const ScalarField& h, const GainFn& gamma, const VectorField& f,
                                            const SamplingPlan& plan, const InvarianceOptions& options) {
  return check_forward_invariance(single_barrier(h, f), gamma, f, plan, options);
}

std::string trajectory_csv(const Trajectory& traj, const std::vector<std::string>& state_names) {
  std::string out = "t";
  for (const auto& n : state_names) out += "," + n;
  out += ",h,margin\n";
  char buf[64];
  auto put = [&](double v) {
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
  };
  for (std::size_t i = 0; i < traj.t.size(); ++i) {
    put(traj.t[i]);
    for (double v : traj.x[i]) {
      out.push_back(',');
      put(v);
    }
    out.push_back(',');
    if (i < traj.h.size()) put(traj.h[i]);
    out.push_back(',');
    if (i < traj.margin.size()) put(traj.margin[i]);
    out.push_back('\n');
  }
  return out;
}

}  // namespace issf
