#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace issf {

/// Distance from a kink of abs/sign/min/max below which a derivative
/// evaluation is reported as nonsmooth.
inline constexpr double kKinkTolerance = 1e-9;

enum class NodeKind : std::uint8_t {
  Constant,
  Variable,
  Negate,
  Add,
  Subtract,
  Multiply,
  Divide,
  Power,
  Call,
  // Derivative selector produced by differentiate() for abs/sign/min/max.
  // Not reachable from the surface grammar.
  Kink,
};

enum class Intrinsic : std::uint8_t { Sin, Cos, Tan, Exp, Ln, Sqrt, Abs, Sign, Min, Max, Pow };

enum class KinkRule : std::uint8_t { Abs, Sign, Min, Max };

struct ExprNode;
using NodePtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
  NodeKind kind = NodeKind::Constant;
  double value = 0.0;      // Constant
  std::size_t index = 0;   // Variable: position in the owning variable list
  Intrinsic fn = Intrinsic::Sin;
  KinkRule rule = KinkRule::Abs;
  std::vector<NodePtr> args;
};

/// Side information collected while evaluating a derivative expression.
struct EvalFlags {
  bool nonsmooth = false;
};

/// Immutable expression tree over an ordered list of named variables.
///
/// Evaluation never returns NaN or infinity: domain violations (ln of a
/// nonpositive value, sqrt of a negative value, division by zero, overflow)
/// raise DomainError naming the offending subexpression.
class ScalarExpr {
 public:
  ScalarExpr(NodePtr root, std::shared_ptr<const std::vector<std::string>> variables);

  /// `values[i]` is the value of `variables()[i]`.
  double eval(std::span<const double> values, EvalFlags* flags = nullptr) const;
  double eval(const std::map<std::string, double>& point, EvalFlags* flags = nullptr) const;

  const std::vector<std::string>& variables() const { return *variables_; }
  const std::shared_ptr<const std::vector<std::string>>& shared_variables() const {
    return variables_;
  }
  const NodePtr& root() const { return root_; }

  /// True when the tree mentions the variable at `index`.
  bool references(std::size_t index) const;
  bool references(std::string_view name) const;

  /// True for a tree that folds to the literal 0.
  bool is_zero() const;
  bool is_constant() const;

  /// Grammar-valid text that re-parses to a structurally identical tree
  /// (for trees produced by parse()).
  std::string to_string() const;

 private:
  NodePtr root_;
  std::shared_ptr<const std::vector<std::string>> variables_;
};

/// Parses `source` against `declared_vars`.
///
/// Grammar, loosest to tightest: `+ -`, `* /`, unary `-`, right-associative
/// `^`. Calls use `name(arg, ...)` for sin, cos, tan, exp, ln, sqrt, abs,
/// sign, min, max and pow. min and max accept two or more arguments.
ScalarExpr parse(std::string_view source, std::vector<std::string> declared_vars);

/// Symbolic derivative with respect to `var`. At kinks of abs/sign/min/max
/// the right-sided derivative is selected and EvalFlags::nonsmooth is set
/// when the result is evaluated within kKinkTolerance of the kink.
ScalarExpr differentiate(const ScalarExpr& e, std::string_view var);

/// Replaces `var` in `outer` by `inner`. Remaining variables of `outer`
/// must be declared by `inner`; the result is over `inner`'s variables.
ScalarExpr substitute(const ScalarExpr& outer, std::string_view var, const ScalarExpr& inner);

/// Builders with the same folding as simplify().
ScalarExpr negate(const ScalarExpr& e);
ScalarExpr sum(const ScalarExpr& a, const ScalarExpr& b);
ScalarExpr scaled(double c, const ScalarExpr& e);
ScalarExpr constant_expr(double c, std::vector<std::string> vars);

/// Folds constants and removes neutral elements. Not a CAS.
ScalarExpr simplify(const ScalarExpr& e);

/// Same shape, same literals (bitwise), same variable names.
bool structurally_equal(const ScalarExpr& a, const ScalarExpr& b);

/// Renders with unicode conventions for reports: integer powers as
/// superscripts, implicit multiplication after numeric coefficients and a
/// caller-chosen display name for each variable.
std::string to_display(const ScalarExpr& e, const std::map<std::string, std::string>& rename = {});

}  // namespace issf
