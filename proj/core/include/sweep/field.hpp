#pragma once

#include <Eigen/Core>
#include <optional>
#include <string_view>

#include "sweep/expr.hpp"

namespace sweep {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Declared differentiability class of a field.
enum class Smoothness {
  C11,        // C^{1,1}: gradient Lipschitz; required for sweeping constraints
  C1,         // continuously differentiable
  Lipschitz,  // may contain max2; derivatives are a selected subgradient
};

/// Which variables derivatives are taken with respect to.
enum class DiffVars {
  State,         // x only
  StateControl,  // (x, u) stacked
};

/// Value plus optional gradient / Hessian.
struct FieldEval {
  double value = 0.0;
  std::optional<Vec> grad;
  std::optional<Mat> hess;
};

/// Differentiable scalar function of (t, x, u) backed by an expression.
///
/// Derivatives are exact for the expression: they come from forward-mode
/// propagation of first and second order jets through the tree. Evaluation
/// is reentrant; a field can be shared across threads.
class ScalarField {
 public:
  ScalarField(Expr expr, Smoothness smoothness);

  static ScalarField parse(std::string_view src, int n, int m,
                           Smoothness smoothness = Smoothness::C11);

  int state_dim() const { return expr_.state_dim(); }
  int control_dim() const { return expr_.control_dim(); }
  Smoothness smoothness() const { return smoothness_; }
  const Expr& expr() const { return expr_; }
  std::string str() const { return expr_.str(); }

  double value(double t, const Vec& x, const Vec& u = Vec()) const;

  /// order 0: value only; 1: adds gradient; 2: adds Hessian.
  FieldEval eval(double t, const Vec& x, const Vec& u, int order,
                 DiffVars vars = DiffVars::State) const;

  /// Convenience for fields without control dependence.
  FieldEval eval(const Vec& x, int order) const { return eval(0.0, x, Vec(), order); }

 private:
  Expr expr_;
  Smoothness smoothness_;
};

}  // namespace sweep
