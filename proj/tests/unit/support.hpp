#pragma once

#include <functional>
#include <random>

#include "sweep/expr.hpp"
#include "sweep/field.hpp"

namespace testing_support {

using sweep::Mat;
using sweep::Vec;

inline Vec random_vec(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-6) {
  Vec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec a = x, b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a) - f(b)) / (2 * h);
  }
  return g;
}

inline Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double h = 1e-6) {
  const Vec f0 = f(x);
  Mat J(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec a = x, b = x;
    a[i] += h;
    b[i] -= h;
    J.col(i) = (f(a) - f(b)) / (2 * h);
  }
  return J;
}

/// Random expression tree over t, x1..xn, u1..um. `smooth` keeps to
/// operations that are C-infinity on all of R^n (ln and sqrt only see
/// arguments bounded away from zero, no division, no max2).
class ExprGen {
 public:
  ExprGen(std::mt19937_64& rng, int n, int m, bool smooth) : rng_(rng), n_(n), m_(m), smooth_(smooth) {}

  sweep::Expr make(int depth) {
    sweep::ExprBuilder b(n_, m_);
    const int root = node(b, depth);
    return std::move(b).build(root);
  }

 private:
  int pick(int k) { return std::uniform_int_distribution<int>(0, k - 1)(rng_); }

  int leaf(sweep::ExprBuilder& b) {
    switch (pick(m_ > 0 ? 4 : 3)) {
      case 0: return b.constant(std::round(std::uniform_real_distribution<double>(0, 40)(rng_)) / 8);
      case 1: return b.time();
      case 2: return b.state(pick(n_));
      default: return b.control(pick(m_));
    }
  }

  // 1 + a^2, strictly positive.
  int positive(sweep::ExprBuilder& b, int a) {
    return b.binary(sweep::Op::Add, b.constant(1.0), b.power(a, 2));
  }

  int node(sweep::ExprBuilder& b, int depth) {
    using sweep::Op;
    if (depth == 0 || pick(4) == 0) return leaf(b);
    const int choice = pick(smooth_ ? 9 : 12);
    switch (choice) {
      case 0: return b.binary(Op::Add, node(b, depth - 1), node(b, depth - 1));
      case 1: return b.binary(Op::Sub, node(b, depth - 1), node(b, depth - 1));
      case 2: return b.binary(Op::Mul, node(b, depth - 1), node(b, depth - 1));
      case 3: return b.unary(Op::Neg, node(b, depth - 1));
      case 4: return b.power(node(b, depth - 1), 1 + pick(3));
      case 5: return b.unary(Op::Sin, node(b, depth - 1));
      case 6: return b.unary(Op::Cos, node(b, depth - 1));
      case 7: return b.unary(Op::Ln, positive(b, node(b, depth - 1)));
      case 8: return b.unary(Op::Sqrt, positive(b, node(b, depth - 1)));
      case 9: return b.binary(Op::Div, node(b, depth - 1), node(b, depth - 1));
      case 10: return b.binary(Op::Max2, node(b, depth - 1), node(b, depth - 1));
      default: return b.power(node(b, depth - 1), -1 - pick(2));
    }
  }

  std::mt19937_64& rng_;
  int n_;
  int m_;
  bool smooth_;
};

}  // namespace testing_support
