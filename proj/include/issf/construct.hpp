#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "issf/field.hpp"
#include "issf/gains.hpp"
#include "issf/numerics.hpp"

namespace issf {

inline constexpr double kDefaultWindow = 10.0;
inline constexpr double kPhiSlopeExclusion = 1e-6;  // δ₀
inline constexpr double kBranchTolerance = 1e-9;    // τ_eq
inline constexpr double kMinRho = 1e-14;
/// Cells per unit length used for the windowed extrema and the running
/// integral of ρ1.
inline constexpr int kCellsPerUnit = 256;

/// Interpolating function ρ built from a small-gain pair (φ1, φ2).
///
/// Tabulated over [-R, R]; `exact` recomputes a value from the cell tables
/// without interpolation. Cheap to copy (shared immutable state).
class RhoFn {
 public:
  double operator()(double r) const;
  double derivative(double r) const;
  double exact(double r) const;
  double exact_derivative(double r) const;

  /// ½[r − φ1∘φ2(r)] clipped to [−½, ½].
  double rho0(double r) const;
  /// Windowed extrema of rho0.
  double rho1(double r) const;

  double radius() const;
  const std::vector<double>& grid() const;
  const std::vector<double>& values() const;
  const std::vector<double>& derivatives() const;
  /// Grid points where |ρ(r)| < |r| failed and ρ was shrunk to r/2.
  std::size_t rescaled_count() const;
  /// Cells whose quadrature did not reach the tolerance.
  std::size_t unconverged_cells() const;
  const GainFn& phi1() const;
  const GainFn& phi2() const;

  struct Impl;

 private:
  friend RhoFn build_rho(const GainFn&, const GainFn&, double, std::size_t);
  std::shared_ptr<const Impl> impl_;
};

/// Builds ρ on [-R, R]. Requires R ≥ 2, φ2's window to reach R + 1, φ1's
/// window to contain φ2(±(R + 1)) and the small-gain condition on
/// [-(R + 1), R + 1].
RhoFn build_rho(const GainFn& phi1, const GainFn& phi2, double radius = kDefaultWindow,
                std::size_t grid_size = kDefaultGainGrid);

struct InvariantReport {
  bool passed = true;
  std::size_t points = 0;
  double worst_margin = 0.0;  // smallest strict-inequality gap seen
  double worst_margin_point = 0.0;
  double max_slope = 0.0;     // largest forward-difference slope
  std::optional<double> failure_point;
  std::string reason;
};

/// ρ0 < ρ < 0 on r < 0, 0 < ρ < ρ0 on r > 0, forward-difference slope
/// below ½ + 1e-6 and |ρ| < |r| at every grid point.
InvariantReport check_rho_invariants(const RhoFn& rho);

/// φ(r) = (1/ρ(r))∫_{r−ρ(r)}^{r} φ1⁻¹(s) ds, tabulated, with φ(0) = 0.
class PhiFn {
 public:
  double operator()(double r) const;
  /// φ′ from the exact-formula table. Within δ₀ of 0 the one-sided value
  /// at the nearest node is used and `flagged` is set.
  double derivative(double r, bool* flagged = nullptr) const;

  double radius() const;
  const std::vector<double>& grid() const;
  const std::vector<double>& values() const;
  const std::vector<double>& derivatives() const;
  const RhoFn& rho() const;
  /// Report of the sandwich and slope checks run at construction.
  const InvariantReport& invariants() const;

  /// View as an extended-K∞ gain on [-R, R].
  GainFn as_gain() const;

  struct Impl;

 private:
  friend PhiFn build_phi(const RhoFn&, std::size_t);
  std::shared_ptr<const Impl> impl_;
};

/// Throws ConstructionError when the sandwich φ1⁻¹ < φ < φ2 (r < 0),
/// φ2 < φ < φ1⁻¹ (r > 0) or φ′ > 0 outside δ₀ fails at a grid point.
PhiFn build_phi(const RhoFn& rho, std::size_t grid_size = kDefaultGainGrid);

/// Sandwich check for an explicit φ against φ1⁻¹ and φ2 on a grid over
/// [-R, R] excluding 0.
InvariantReport check_phi_sandwich(const GainFn& phi, const GainFn& phi1, const GainFn& phi2, double radius,
                                   std::size_t grid_size = kDefaultGainGrid);

struct SubsystemGains {
  GainFn phi;    // cross gain
  GainFn gamma;  // input gain
  GainFn alpha;  // rate
};

/// Composed barrier h(x) = min{φ(h1(x1)), h2(x2)} with gain
/// γ(r) = −φ(−γ1(r)) + γ2(r) and rate α(s) = max{φ′(φ⁻¹(s))α1(φ⁻¹(s)), α2(s)}.
class ComposedBarrier {
 public:
  using Phi = std::variant<PhiFn, GainFn>;

  ComposedBarrier(ScalarField h1, ScalarField h2, Phi phi, SubsystemGains s1, SubsystemGains s2, GainFn gamma,
                  GainFn alpha, ClassCertificate gamma_certificate, std::optional<InvariantReport> override_check);

  const ScalarField& h1() const { return h1_; }
  const ScalarField& h2() const { return h2_; }
  const Phi& phi() const { return phi_; }
  bool phi_is_override() const { return std::holds_alternative<GainFn>(phi_); }
  const GainFn& gamma() const { return gamma_; }
  const GainFn& alpha() const { return alpha_; }
  const SubsystemGains& subsystem1() const { return s1_; }
  const SubsystemGains& subsystem2() const { return s2_; }
  const ClassCertificate& gamma_certificate() const { return gamma_certificate_; }
  const std::optional<InvariantReport>& override_check() const { return override_check_; }

  double phi_value(double s) const;
  double phi_slope(double s, bool* flagged = nullptr) const;

  /// Composed set in display form, e.g. "min{x1,x2} + 2‖u‖³ + 2‖u‖ ≥ 0".
  std::string set_description() const;

 private:
  ScalarField h1_;
  ScalarField h2_;
  Phi phi_;
  SubsystemGains s1_;
  SubsystemGains s2_;
  GainFn gamma_;
  GainFn alpha_;
  ClassCertificate gamma_certificate_;
  std::optional<InvariantReport> override_check_;
};

/// Builds the composed barrier. An explicit φ (a GainFn) must pass the
/// sandwich check on `window`; otherwise ConstructionError.
ComposedBarrier compose_barrier(ScalarField h1, ScalarField h2, ComposedBarrier::Phi phi, SubsystemGains s1,
                                SubsystemGains s2, double window = kDefaultWindow,
                                std::size_t grid_size = kDefaultGainGrid);

/// Lower right Dini derivative of min{v1, v2} from branch values and
/// branch derivatives; branches within kBranchTolerance count as equal.
double dini_min(double v1, double v2, double d1, double d2);

struct DiniResult {
  double h = 0.0;       // min{φ(h1), h2}
  double value = 0.0;   // D₊h
  double branch1 = 0.0;  // φ(h1)
  double branch2 = 0.0;  // h2
  double rate1 = 0.0;    // φ′(h1)·∇h1·f1
  double rate2 = 0.0;    // ∇h2·f2
  bool flagged = false;  // nonsmooth point or one-sided φ′
};

/// Evaluates the composed barrier and its Dini derivative along a vector
/// field at points ordered as f.variables().
class ComposedEvaluator {
 public:
  ComposedEvaluator(const ComposedBarrier& cb, const VectorField& f);

  double h(std::span<const double> values) const;
  DiniResult operator()(std::span<const double> values) const;

 private:
  const ComposedBarrier* cb_;
  LieDerivative l1_;
  LieDerivative l2_;
};

DiniResult composed_dini(const ComposedBarrier& cb, const VectorField& f, const std::map<std::string, double>& point);

/// Two-column CSV with header "r,<column>".
std::string tabulation_csv(std::span<const double> r, std::span<const double> values, std::string_view column);

}  // namespace issf
