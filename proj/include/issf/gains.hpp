#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "issf/expr.hpp"

namespace issf {

enum class GainClass { K, KInfinity, ExtendedK, ExtendedKInfinity };

std::string_view to_string(GainClass c);
/// Accepts "K", "K-inf", "extended-K", "extended-K-inf".
std::optional<GainClass> parse_gain_class(std::string_view name);

inline bool is_extended(GainClass c) { return c == GainClass::ExtendedK || c == GainClass::ExtendedKInfinity; }
inline bool is_unbounded(GainClass c) { return c == GainClass::KInfinity || c == GainClass::ExtendedKInfinity; }

/// Weaker of two claims: unbounded only if both are, extended only if both are.
GainClass weaker(GainClass a, GainClass b);

inline constexpr double kGainZeroTolerance = 1e-12;
inline constexpr double kUnboundednessThreshold = 1e6;
inline constexpr std::size_t kDefaultGainGrid = 4096;
inline constexpr double kSmallGainHole = 1e-8;
inline constexpr int kMaxBisectionIterations = 200;

/// Scalar comparison function with a claimed class and a window:
/// [-R, R] for extended classes, [0, R] otherwise.
///
/// Either symbolic (an expression in `r`) or numeric (a callable, e.g. a
/// tabulation or an inverse). Evaluation outside the window is allowed;
/// callers that need certified values check `in_window` themselves.
class GainFn {
 public:
  using Fn = std::function<double(double)>;

  GainFn(Fn value, GainClass claimed, double radius, std::string description, Fn slope = {});

  /// `expr` must be declared over exactly the variable `r`.
  static GainFn from_expr(ScalarExpr expr, GainClass claimed, double radius);
  static GainFn parse(std::string_view source, GainClass claimed, double radius);
  static GainFn identity(GainClass claimed, double radius);

  double operator()(double r) const { return value_(r); }
  /// Derivative; symbolic when available, otherwise the supplied slope or a
  /// central difference.
  double slope(double r) const;

  GainClass claimed() const { return claimed_; }
  double radius() const { return radius_; }
  double window_lo() const { return is_extended(claimed_) ? -radius_ : 0.0; }
  double window_hi() const { return radius_; }
  bool in_window(double r) const { return r >= window_lo() && r <= window_hi(); }
  const std::optional<ScalarExpr>& expr() const { return expr_; }
  const std::string& description() const { return description_; }

  GainFn with_radius(double radius) const;
  GainFn with_class(GainClass claimed) const;

 private:
  Fn value_;
  Fn slope_;
  GainClass claimed_;
  double radius_;
  std::string description_;
  std::optional<ScalarExpr> expr_;
  std::optional<ScalarExpr> derivative_;
};

enum class Verdict { Pass, Fail, Inconclusive };
std::string_view to_string(Verdict v);

/// Sampling evidence for a class claim or the small-gain condition.
struct ClassCertificate {
  Verdict verdict = Verdict::Pass;
  std::string subject;
  std::string claimed_class;
  double window_lo = 0.0;
  double window_hi = 0.0;
  std::size_t grid_size = 0;
  /// Smallest consecutive difference (class checks) or smallest relative
  /// distance from the identity (small-gain checks).
  double worst_monotonicity_margin = 0.0;
  double worst_margin_point = 0.0;
  std::optional<double> failure_point;
  std::string reason;
  /// Point at which the unboundedness threshold was reached (K∞ claims).
  std::optional<double> unbounded_probe;
  std::string note = "sampling certificate, not a proof";

  bool passed() const { return verdict == Verdict::Pass; }
};

/// Samples g on a uniform grid over its window; passes iff g(0) = 0 within
/// kGainZeroTolerance, consecutive differences are strictly positive and,
/// for K∞ claims, |g| reaches kUnboundednessThreshold at some point
/// R·2^k (k ≥ 0) on each side of the window.
ClassCertificate certify_class(const GainFn& g, std::size_t grid_size = kDefaultGainGrid);

/// r with g(r) = y within 1e-12·(1+|y|), by bracket doubling and bisection.
/// Throws BracketError when y cannot be bracketed inside the window.
double invert(const GainFn& g, double y);

/// Numeric inverse as a gain over the image of g's window.
GainFn inverse(const GainFn& g);

/// g1∘g2 on g2's window; throws WindowError when g2's image over that
/// window leaves g1's window.
GainFn compose(const GainFn& g1, const GainFn& g2);

/// Checks φ1∘φ2(r) < r for r > 0 and > r for r < 0 on a symmetric grid
/// over [-radius, radius] excluding |r| < kSmallGainHole. The default radius
/// is the smaller of the two windows.
ClassCertificate check_small_gain(const GainFn& phi1, const GainFn& phi2, std::size_t grid_size = kDefaultGainGrid,
                                  std::optional<double> radius = std::nullopt);

/// Relative small-gain margin sign(r)·(r − φ1∘φ2(r))/|r|.
double small_gain_margin(const GainFn& phi1, const GainFn& phi2, double r);

struct ImplicationGains {
  GainFn gamma;  // γ̂(r) = −χ⁻¹(−φ(r)/c), class K
  GainFn alpha;  // α̂(s) = (1−c)·χ(s), extended class K
};

/// Converts ∇h·f ≥ −χ(h) − φ(|u|) into h ≤ −γ̂(|u|) ⇒ ∇h·f ≥ −α̂(h).
/// The returned γ̂ shares φ's window.
ImplicationGains dissipation_to_implication(const GainFn& chi, const GainFn& phi, double c);

}  // namespace issf
