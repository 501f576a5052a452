#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "issf/construct.hpp"
#include "issf/field.hpp"
#include "issf/gains.hpp"

namespace issf {

inline constexpr double kImplicationTolerance = 1e-9;  // τ_v
inline constexpr double kInvarianceTolerance = 1e-6;   // τ_inv
inline constexpr double kBlowUpBound = 1e8;
inline constexpr double kBoundaryBand = 1e-3;
inline constexpr std::size_t kMaxCounterexamples = 16;

enum class SamplingStrategy { UniformGrid, LatinHypercube, BoundaryBiased };
std::string_view to_string(SamplingStrategy s);
std::optional<SamplingStrategy> parse_strategy(std::string_view name);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Where and how densely to sample (x, u). Inputs are drawn from
/// [-u_max, u_max]^m; gains see the Euclidean norm of the input block.
struct SamplingPlan {
  std::vector<Interval> state_box;  // one interval per state variable, partition order
  double u_max = 1.0;
  std::size_t samples = 100000;
  SamplingStrategy strategy = SamplingStrategy::LatinHypercube;
  std::uint64_t seed = 1;

  /// Throws PreconditionError for an empty interval, N = 0, u_max < 0 or
  /// a box of the wrong dimension.
  void validate(std::size_t state_dim) const;
};

/// Deterministic uniform double in [0, 1) from a 64-bit engine.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t next();

 private:
  std::mt19937_64 engine_;
};

/// Draws `plan.samples` points of dimension state_dim + input_dim, row
/// major. For the boundary-biased strategy, `level` (≥ 0 inside) pulls
/// every other point onto its zero level set by bisection.
std::vector<double> draw_samples(const SamplingPlan& plan, std::size_t state_dim, std::size_t input_dim,
                                 const std::function<double(std::span<const double>)>& level = {});

struct Counterexample {
  std::vector<std::pair<std::string, double>> point;
  std::vector<std::pair<std::string, double>> values;  // intermediate quantities
  double margin = 0.0;
  bool rechecked = false;  // violation reproduced by an independent evaluation
};

struct MarginDistribution {
  double min = 0.0;
  double p01 = 0.0;
  double median = 0.0;
  double p99 = 0.0;
  double max = 0.0;
};

/// Input signal u(t) for simulation.
class InputSignal {
 public:
  static InputSignal constant(std::vector<double> value);
  /// values[k] holds on [switch_times[k−1], switch_times[k]); the first
  /// value holds before switch_times[0] and the last after the final switch.
  static InputSignal piecewise(std::vector<double> switch_times, std::vector<std::vector<double>> values);
  static InputSignal sinusoidal(std::vector<double> amplitude, double omega, double phase = 0.0);
  /// Piecewise constant with hold `hold`; every value has Euclidean norm
  /// at most `bound`, half of them exactly `bound`.
  static InputSignal random(std::size_t dim, double bound, double hold, double horizon, std::uint64_t seed);

  std::size_t dim() const { return dim_; }
  /// True when the signal is constant on [t, t + dt) steps aligned to its
  /// holds; RK4 then samples it once per step at the midpoint.
  bool piecewise_constant() const { return kind_ != Kind::Sinusoidal; }
  void value(double t, std::span<double> out) const;
  const std::string& description() const { return description_; }
  /// Largest Euclidean norm the signal attains.
  double sup_norm() const;

 private:
  enum class Kind { Constant, Piecewise, Sinusoidal };
  Kind kind_ = Kind::Constant;
  std::size_t dim_ = 0;
  std::vector<double> times_;
  std::vector<std::vector<double>> values_;
  std::vector<double> amplitude_;
  double omega_ = 0.0;
  double phase_ = 0.0;
  std::string description_;
};

/// Scalar barrier with a rate along the dynamics; both evaluated at points
/// ordered as the vector field's variables.
struct BarrierView {
  std::function<double(std::span<const double>)> value;
  /// Returns (rate, flagged).
  std::function<std::pair<double, bool>(std::span<const double>)> rate;
  std::string description;
};

BarrierView single_barrier(const ScalarField& h, const VectorField& f);
BarrierView composed_barrier_view(const ComposedBarrier& cb, const VectorField& f);

struct Trajectory {
  std::vector<double> t;
  std::vector<std::vector<double>> x;
  std::vector<double> h;
  std::vector<double> margin;
  std::string input;
  bool aborted = false;
  double abort_time = 0.0;
};

/// Classic RK4 with fixed step. When `barrier` is given, logs h and
/// h + offset per step. Stops (aborted = true) when |x| exceeds 1e8.
Trajectory simulate(const VectorField& f, std::span<const double> x0, const InputSignal& u, double dt, double horizon,
                    const BarrierView* barrier = nullptr, double offset = 0.0);

struct TrajectorySummary {
  std::size_t index = 0;
  std::vector<double> x0;
  std::string input;
  bool boundary_seeded = false;
  double initial_margin = 0.0;
  double min_margin = 0.0;
  double t_min = 0.0;
  bool violated = false;
  bool aborted = false;
};

struct VerificationReport {
  std::string name;
  Verdict verdict = Verdict::Pass;
  std::vector<std::string> variables;
  std::size_t samples = 0;
  std::size_t triggered = 0;  // antecedent true
  std::size_t vacuous = 0;    // antecedent false
  std::size_t violations = 0;
  std::size_t flagged = 0;    // nonsmooth or one-sided evaluations among triggered
  double worst_margin = 0.0;
  std::vector<double> worst_point;
  MarginDistribution distribution;
  std::vector<Counterexample> counterexamples;
  std::vector<TrajectorySummary> trajectories;
  /// Worst trajectory first, then violating ones; capped.
  std::vector<std::pair<std::size_t, Trajectory>> recorded;
  std::vector<std::string> notes;
};

/// One subsystem of an interconnection. `f` is the full interconnected
/// field; `inputs` names this subsystem's own input variables.
struct Subsystem {
  int index = 1;
  VectorField f;
  ScalarField h;
  GainFn alpha;
  GainFn phi;
  GainFn gamma;
  std::vector<std::string> inputs;
};

/// h(x) ≤ −γ(|u|) ⇒ ∇h·f ≥ −α(h) − τ_v at sampled points.
VerificationReport check_issf_implication(const ScalarField& h, const VectorField& f, const GainFn& alpha,
                                          const GainFn& gamma, const SamplingPlan& plan);

struct InterconnectionReport {
  Verdict verdict = Verdict::Pass;
  VerificationReport first;
  VerificationReport second;
};

/// h_i ≤ −max{φ_i(|h_j|), γ_i(|u_i|)} ⇒ ∇h_i·f_i ≥ −α_i(h_i), both
/// subsystems over one joint sample of (x1, x2, u).
InterconnectionReport check_interconnection_hypotheses(const Subsystem& s1, const Subsystem& s2,
                                                       const SamplingPlan& plan);

/// h ≤ −γ(|u|) ⇒ D₊h ≥ −α(h) − τ_v for the composed barrier.
VerificationReport check_composed_implication(const ComposedBarrier& cb, const VectorField& f,
                                              const SamplingPlan& plan);

/// With V = max{0, −h}: V ≥ γ(|u|) ⇒ ∇V·f ≤ α(−V) + τ_v at sampled points
/// outside the set (V > 0). Points with V = 0 are vacuous.
VerificationReport v_function_decrease(const ScalarField& h, const GainFn& gamma, const GainFn& alpha,
                                       const VectorField& f, const SamplingPlan& plan);
VerificationReport v_function_decrease(const ComposedBarrier& cb, const VectorField& f, const SamplingPlan& plan);

struct InvarianceOptions {
  std::size_t trajectories = 100;
  double dt = 1e-3;
  double horizon = 20.0;
  double boundary_fraction = 0.3;
  double hold = 0.5;
  /// Used for every trajectory instead of seeded random inputs.
  std::optional<InputSignal> input;
  /// Used instead of sampled initial states.
  std::vector<std::vector<double>> initial_states;
  std::size_t keep = 4;
};

/// Simulates trajectories from {x : h(x) + γ(u_max) ≥ 0} and checks
/// min_t h(x(t)) + γ(u_max) ≥ −τ_inv.
VerificationReport check_forward_invariance(const BarrierView& barrier, const GainFn& gamma, const VectorField& f,
                                            const SamplingPlan& plan, const InvarianceOptions& options);
VerificationReport check_forward_invariance(const ComposedBarrier& cb, const VectorField& f, const SamplingPlan& plan,
                                            const InvarianceOptions& options);
VerificationReport check_forward_invariance(const ScalarField& h, const GainFn& gamma, const VectorField& f,
                                            const SamplingPlan& plan, const InvarianceOptions& options);

/// CSV with columns t, one per state variable, h, margin.
std::string trajectory_csv(const Trajectory& traj, const std::vector<std::string>& state_names);

}  // namespace issf
