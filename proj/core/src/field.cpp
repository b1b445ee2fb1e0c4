#include "sweep/field.hpp"

#include <cmath>
#include <vector>

#include "sweep/errors.hpp"

namespace sweep {

namespace {

double ipow(double a, int e) {
  if (e < 0) return 1.0 / ipow(a, -e);
  double r = 1.0;
  double b = a;
  while (e) {
    if (e & 1) r *= b;
    b *= b;
    e >>= 1;
  }
  return r;
}

// Scalar derivatives phi(a), phi'(a), phi''(a) of a unary node.
struct Unary {
  double f0, f1, f2;
};

Unary unary_derivatives(const Expr& expr, int node_id, double a, int order) {
  const Node& nd = expr.node(node_id);
  switch (nd.op) {
    case Op::Neg: return {-a, -1.0, 0.0};
    case Op::Exp: {
      double e = std::exp(a);
      return {e, e, e};
    }
    case Op::Ln:
      if (!(a > 0.0)) throw DomainError("ln of non-positive value", expr.str(node_id));
      return {std::log(a), 1.0 / a, -1.0 / (a * a)};
    case Op::Sqrt: {
      if (a < 0.0) throw DomainError("sqrt of negative value", expr.str(node_id));
      double s = std::sqrt(a);
      if (order == 0) return {s, 0.0, 0.0};
      if (a == 0.0) throw DomainError("sqrt is not differentiable at zero", expr.str(node_id));
      return {s, 0.5 / s, -0.25 / (s * a)};
    }
    case Op::Sin: return {std::sin(a), std::cos(a), -std::sin(a)};
    case Op::Cos: return {std::cos(a), -std::sin(a), -std::cos(a)};
    case Op::Pow: {
      int k = nd.index;
      if (k < 0 && a == 0.0) throw DomainError("negative power of zero", expr.str(node_id));
      double f0 = ipow(a, k);
      double f1 = k == 0 ? 0.0 : k * ipow(a, k - 1);
      double c2 = static_cast<double>(k) * (k - 1);
      double f2 = c2 == 0.0 ? 0.0 : c2 * ipow(a, k - 2);
      return {f0, f1, f2};
    }
    default: break;
  }
  return {0.0, 0.0, 0.0};
}

double leaf_value(const Node& nd, double t, const Vec& x, const Vec& u) {
  switch (nd.op) {
    case Op::Const: return nd.constant;
    case Op::Time: return t;
    case Op::State: return x[nd.index];
    case Op::Control: return u[nd.index];
    default: return 0.0;
  }
}

double eval_value(const Expr& expr, double t, const Vec& x, const Vec& u) {
  auto nodes = expr.nodes();
  std::vector<double> v(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& nd = nodes[i];
    switch (nd.op) {
      case Op::Const:
      case Op::Time:
      case Op::State:
      case Op::Control: v[i] = leaf_value(nd, t, x, u); break;
      case Op::Add: v[i] = v[nd.lhs] + v[nd.rhs]; break;
      case Op::Sub: v[i] = v[nd.lhs] - v[nd.rhs]; break;
      case Op::Mul: v[i] = v[nd.lhs] * v[nd.rhs]; break;
      case Op::Div:
        if (v[nd.rhs] == 0.0) throw DomainError("division by zero", expr.str(static_cast<int>(i)));
        v[i] = v[nd.lhs] / v[nd.rhs];
        break;
      case Op::Max2: v[i] = v[nd.lhs] >= v[nd.rhs] ? v[nd.lhs] : v[nd.rhs]; break;
      default: v[i] = unary_derivatives(expr, static_cast<int>(i), v[nd.lhs], 0).f0; break;
    }
  }
  return v[static_cast<std::size_t>(expr.root())];
}

// Jet storage: per node [value | gradient (d) | Hessian (d*d, column major)].
class JetTape {
 public:
  JetTape(std::size_t nodes, int d, bool second)
      : d_(d), second_(second), stride_(1 + d + (second ? d * d : 0)), buf_(nodes * stride_, 0.0) {}

  double& v(int i) { return buf_[static_cast<std::size_t>(i) * stride_]; }
  Eigen::Map<Vec> g(int i) { return {&buf_[static_cast<std::size_t>(i) * stride_ + 1], d_}; }
  Eigen::Map<Mat> H(int i) { return {&buf_[static_cast<std::size_t>(i) * stride_ + 1 + d_], d_, d_}; }
  bool second() const { return second_; }

 private:
  int d_;
  bool second_;
  std::size_t stride_;
  std::vector<double> buf_;
};

FieldEval eval_jets(const Expr& expr, double t, const Vec& x, const Vec& u, int order,
                    DiffVars vars) {
  const int n = expr.state_dim();
  const int d = vars == DiffVars::State ? n : n + expr.control_dim();
  const bool second = order >= 2;
  auto nodes = expr.nodes();
  JetTape tape(nodes.size(), d, second);

  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const int i = static_cast<int>(k);
    const Node& nd = nodes[k];
    switch (nd.op) {
      case Op::Const:
      case Op::Time:
        tape.v(i) = leaf_value(nd, t, x, u);
        break;
      case Op::State:
        tape.v(i) = x[nd.index];
        tape.g(i)[nd.index] = 1.0;
        break;
      case Op::Control:
        tape.v(i) = u[nd.index];
        if (vars == DiffVars::StateControl) tape.g(i)[n + nd.index] = 1.0;
        break;
      case Op::Add:
      case Op::Sub: {
        const double s = nd.op == Op::Add ? 1.0 : -1.0;
        tape.v(i) = tape.v(nd.lhs) + s * tape.v(nd.rhs);
        tape.g(i) = tape.g(nd.lhs) + s * tape.g(nd.rhs);
        if (second) tape.H(i) = tape.H(nd.lhs) + s * tape.H(nd.rhs);
        break;
      }
      case Op::Mul: {
        const double a = tape.v(nd.lhs), b = tape.v(nd.rhs);
        tape.v(i) = a * b;
        tape.g(i) = a * tape.g(nd.rhs) + b * tape.g(nd.lhs);
        if (second) {
          auto ga = tape.g(nd.lhs);
          auto gb = tape.g(nd.rhs);
          tape.H(i) = a * tape.H(nd.rhs) + b * tape.H(nd.lhs) + ga * gb.transpose() +
                      gb * ga.transpose();
        }
        break;
      }
      case Op::Div: {
        const double a = tape.v(nd.lhs), b = tape.v(nd.rhs);
        if (b == 0.0) throw DomainError("division by zero", expr.str(i));
        const double r = 1.0 / b, r1 = -r * r, r2 = 2.0 * r * r * r;
        tape.v(i) = a * r;
        auto ga = tape.g(nd.lhs);
        auto gb = tape.g(nd.rhs);
        tape.g(i) = r * ga + a * r1 * gb;
        if (second) {
          tape.H(i) = r * tape.H(nd.lhs) + a * (r1 * tape.H(nd.rhs) + r2 * gb * gb.transpose()) +
                      r1 * (ga * gb.transpose() + gb * ga.transpose());
        }
        break;
      }
      case Op::Max2: {
        const int sel = tape.v(nd.lhs) >= tape.v(nd.rhs) ? nd.lhs : nd.rhs;
        tape.v(i) = tape.v(sel);
        tape.g(i) = tape.g(sel);
        if (second) tape.H(i) = tape.H(sel);
        break;
      }
      default: {
        const Unary du = unary_derivatives(expr, i, tape.v(nd.lhs), order);
        auto ga = tape.g(nd.lhs);
        tape.v(i) = du.f0;
        tape.g(i) = du.f1 * ga;
        if (second) tape.H(i) = du.f1 * tape.H(nd.lhs) + du.f2 * ga * ga.transpose();
        break;
      }
    }
  }

  const int root = expr.root();
  FieldEval out;
  out.value = tape.v(root);
  out.grad = Vec(tape.g(root));
  if (second) out.hess = Mat(tape.H(root));
  return out;
}

}  // namespace

ScalarField::ScalarField(Expr expr, Smoothness smoothness)
    : expr_(std::move(expr)), smoothness_(smoothness) {
  if (smoothness_ != Smoothness::Lipschitz && expr_.contains(Op::Max2)) {
    throw InvalidField("max2 is not allowed in a field declared C1 or C11: " + expr_.str());
  }
}

ScalarField ScalarField::parse(std::string_view src, int n, int m, Smoothness smoothness) {
  return ScalarField(Expr::parse(src, n, m), smoothness);
}

double ScalarField::value(double t, const Vec& x, const Vec& u) const {
  return eval_value(expr_, t, x, u);
}

FieldEval ScalarField::eval(double t, const Vec& x, const Vec& u, int order, DiffVars vars) const {
  if (order <= 0) return FieldEval{eval_value(expr_, t, x, u), std::nullopt, std::nullopt};
  return eval_jets(expr_, t, x, u, order, vars);
}

}  // namespace sweep
