#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "issf/expr.hpp"

namespace issf {

/// Scalar field with its symbolic gradient, one component per variable.
class ScalarField {
 public:
  explicit ScalarField(ScalarExpr expr);

  static ScalarField parse(std::string_view source, std::vector<std::string> vars);

  double value(std::span<const double> values, EvalFlags* flags = nullptr) const {
    return expr_.eval(values, flags);
  }
  double value(const std::map<std::string, double>& point) const { return expr_.eval(point); }

  const ScalarExpr& expr() const { return expr_; }
  const std::vector<ScalarExpr>& gradient() const { return gradient_; }
  const std::vector<std::string>& variables() const { return expr_.variables(); }

 private:
  ScalarExpr expr_;
  std::vector<ScalarExpr> gradient_;
};

/// Ordered variables of an interconnection: state block of subsystem 1,
/// state block of subsystem 2, then inputs. A single system leaves
/// `x2` empty.
struct VariablePartition {
  std::vector<std::string> x1;
  std::vector<std::string> x2;
  std::vector<std::string> u;

  std::vector<std::string> all() const;
  std::size_t state_dim() const { return x1.size() + x2.size(); }
  std::size_t input_dim() const { return u.size(); }
};

/// Right-hand side of x' = f(x, u); one component per state variable.
class VectorField {
 public:
  VectorField(std::vector<ScalarExpr> components, VariablePartition partition);

  static VectorField parse(const std::vector<std::string>& sources, VariablePartition partition);

  /// `values` holds all variables in partition order; writes f into `out`.
  void eval(std::span<const double> values, std::span<double> out) const;
  double component(std::size_t i, std::span<const double> values) const {
    return components_[i].eval(values);
  }

  const std::vector<ScalarExpr>& components() const { return components_; }
  const VariablePartition& partition() const { return partition_; }
  const std::vector<std::string>& variables() const { return variables_; }
  std::size_t state_dim() const { return partition_.state_dim(); }
  std::size_t input_dim() const { return partition_.input_dim(); }

 private:
  std::vector<ScalarExpr> components_;
  VariablePartition partition_;
  std::vector<std::string> variables_;
};

/// Precomputed map from a scalar field onto a vector field's variables, for
/// evaluating ∇h(x)·f(x, u) repeatedly.
class LieDerivative {
 public:
  LieDerivative(const ScalarField& h, const VectorField& f);

  /// `values` is ordered as f.variables().
  double operator()(std::span<const double> values, EvalFlags* flags = nullptr) const;
  /// h itself at the same point.
  double field(std::span<const double> values, EvalFlags* flags = nullptr) const;

 private:
  struct Term {
    const ScalarExpr* partial;
    std::size_t state;  // component of f
  };
  const ScalarField* h_;
  const VectorField* f_;
  std::vector<std::size_t> h_to_f_;  // h variable -> f variable
  bool identity_map_ = false;
  std::vector<Term> terms_;
};

/// ∇h(x)·f(x, u) at `point`, which assigns every variable of `f`.
double lie_derivative(const ScalarField& h, const VectorField& f, const std::map<std::string, double>& point);
double lie_derivative(const ScalarField& h, const VectorField& f, std::span<const double> values);

}  // namespace issf
