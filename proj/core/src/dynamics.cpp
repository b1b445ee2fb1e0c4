#include "sweep/dynamics.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>

#include "sweep/errors.hpp"

namespace sweep {

int Grid::cell(double t) const {
  if (N <= 0) return 0;
  int j = static_cast<int>(std::floor(t / T * N));
  return std::clamp(j, 0, N - 1);
}

bool ControlBox::contains(const Vec& u, double tol) const {
  return u.size() == lo.size() && (u - lo).minCoeff() >= -tol && (hi - u).minCoeff() >= -tol;
}

ControlSignal::ControlSignal(Grid grid, Mat values) : grid_(grid), values_(std::move(values)) {
  if (values_.cols() != std::max(grid_.N, 1)) throw GridMismatch();
}

ControlSignal ControlSignal::constant(Grid grid, const Vec& u) {
  Mat v(u.size(), std::max(grid.N, 1));
  v.colwise() = u;
  return ControlSignal(grid, std::move(v));
}

bool ControlSignal::within(const ControlBox& U, double tol) const {
  for (int j = 0; j < values_.cols(); ++j) {
    if (!U.contains(values_.col(j), tol)) return false;
  }
  return true;
}

// ---- spec -------------------------------------------------------------------

DynamicsSpec::DynamicsSpec(std::vector<ScalarField> f, ScalarField phi, SweepingSet set, double T,
                           double Mbar)
    : f_(std::move(f)), phi_(std::move(phi)), set_(std::move(set)), T_(T), Mbar_(Mbar) {
  const int n = set_.dim();
  if (static_cast<int>(f_.size()) != n) throw InvalidField("drift needs one component per state");
  m_ = f_.front().control_dim();
  for (const auto& fi : f_) {
    if (fi.state_dim() != n || fi.control_dim() != m_) {
      throw InvalidField("drift components disagree on dimensions");
    }
  }
  if (phi_.state_dim() != n) throw InvalidField("potential has the wrong state dimension");
  if (!(T_ >= 0.0)) throw InvalidField("horizon must be nonnegative");
}

DynamicsSpec DynamicsSpec::with_Mbar(double Mbar) const {
  DynamicsSpec s = *this;
  s.Mbar_ = Mbar;
  return s;
}

DynamicsSpec DynamicsSpec::with_set(SweepingSet set) const {
  return DynamicsSpec(f_, phi_, std::move(set), T_, Mbar_);
}

Vec DynamicsSpec::drift(double t, const Vec& x, const Vec& u) const {
  const int n = state_dim();
  Vec out(n);
  for (int i = 0; i < n; ++i) out[i] = f_[static_cast<std::size_t>(i)].value(t, x, u);
  FieldEval ph = phi_.eval(t, x, u, 1);
  return out - *ph.grad;
}

Mat DynamicsSpec::drift_jac_x(double t, const Vec& x, const Vec& u) const {
  const int n = state_dim();
  Mat J(n, n);
  for (int i = 0; i < n; ++i) J.row(i) = f_[static_cast<std::size_t>(i)].eval(t, x, u, 1).grad->transpose();
  return J - phi_hessian(x);
}

Mat DynamicsSpec::drift_jac_u(double t, const Vec& x, const Vec& u) const {
  const int n = state_dim();
  Mat J(n, m_);
  for (int i = 0; i < n; ++i) {
    Vec g = *f_[static_cast<std::size_t>(i)].eval(t, x, u, 1, DiffVars::StateControl).grad;
    J.row(i) = g.tail(m_).transpose();
  }
  return J;
}

Mat DynamicsSpec::phi_hessian(const Vec& x) const {
  return *phi_.eval(0.0, x, Vec::Zero(m_), 2).hess;
}

PenaltyTerms penalty_terms(const SweepingSet& S, double gamma, const Vec& x, bool with_jacobian) {
  const int n = S.dim(), r = S.count();
  PenaltyTerms out;
  out.xi = Vec(r);
  out.force = Vec::Zero(n);
  if (with_jacobian) out.jac = Mat::Zero(n, n);
  for (int i = 0; i < r; ++i) {
    FieldEval e = S.field(i).eval(x, with_jacobian ? 2 : 1);
    double xi = gamma * std::exp(gamma * e.value);
    out.xi[i] = xi;
    if (xi == 0.0) continue;
    out.force += xi * *e.grad;
    if (with_jacobian) out.jac += gamma * xi * (*e.grad) * e.grad->transpose() + xi * *e.hess;
  }
  return out;
}

double default_inv_tol(const DynamicsSpec& spec) {
  const double eta = spec.set().constants().eta;
  const double ratio = eta > 0.0 ? 2.0 * spec.Mbar() / eta : 0.0;
  return 1e-6 * (1.0 + ratio);
}

// ---- penalized integration --------------------------------------------------

Trajectory integrate_penalized(const DynamicsSpec& spec, double gamma, const Vec& x0,
                               const ControlSignal& u, const PenalizedOptions& opts) {
  const SweepingSet& S = spec.set();
  const Grid grid = u.grid();
  const int n = spec.state_dim();
  const double inv_tol = opts.inv_tol >= 0.0 ? opts.inv_tol : default_inv_tol(spec);
  const double h_min = std::max(grid.T, 1e-300) * opts.h_min_factor;
  const double g = 1.0 + 1.0 / std::sqrt(2.0);

  double v0 = psi_gamma(S, gamma, x0).value;
  if (opts.check_invariance && v0 > inv_tol) throw InvarianceViolation(0.0, v0);
  const double level = (opts.alpha && v0 <= -*opts.alpha) ? -*opts.alpha : 0.0;

  Trajectory tr;
  tr.grid = grid;
  tr.x = Mat(n, grid.nodes());
  tr.xi = Mat(S.count(), grid.nodes());
  tr.x.col(0) = x0;
  tr.xi.col(0) = penalty_terms(S, gamma, x0, false).xi;
  tr.max_penalty = tr.xi.col(0).maxCoeff();

  Vec x = x0;
  double h = grid.h() > 0 ? grid.h() : 0.0;
  for (int j = 0; j < grid.N; ++j) {
    const Vec uj = u.cell(j);
    const double t_end = grid.t(j + 1);
    double t = grid.t(j);
    int accepted = 0;
    auto rhs = [&](double tt, const Vec& xx) {
      return Vec(spec.drift(tt, xx, uj) - penalty_terms(S, gamma, xx, false).force);
    };
    while (t < t_end) {
      const double hs = std::min(h, t_end - t);
      PenaltyTerms pt = penalty_terms(S, gamma, x, true);
      Mat J = spec.drift_jac_x(t, x, uj) - pt.jac;
      Vec F0 = spec.drift(t, x, uj) - pt.force;
      Eigen::PartialPivLU<Mat> W(Mat::Identity(n, n) - g * hs * J);
      Vec k1 = W.solve(F0);
      Vec k2 = W.solve(rhs(t + hs, x + hs * k1) - 2.0 * k1);
      Vec xn = x + 1.5 * hs * k1 + 0.5 * hs * k2;
      Vec err = 0.5 * hs * (k1 + k2);
      double e = 0.0;
      for (int i = 0; i < n; ++i) {
        double sc = opts.atol + opts.rtol * std::max(std::abs(x[i]), std::abs(xn[i]));
        e = std::max(e, std::abs(err[i]) / sc);
      }
      if (!std::isfinite(e) || !xn.allFinite()) e = 1e10;
      const double fac = std::clamp(e > 0.0 ? 0.9 / std::sqrt(e) : 5.0, 0.2, 5.0);
      if (e <= 1.0) {
        t = (t_end - t - hs <= 1e-14 * grid.T) ? t_end : t + hs;
        x = xn;
        ++accepted;
        tr.max_penalty = std::max(tr.max_penalty, pt.xi.maxCoeff());
        h = hs < h ? std::max(h, hs * fac) : hs * fac;
      } else {
        h = hs * fac;
        if (h < h_min) throw StepFailure(t);
      }
    }
    tr.x.col(j + 1) = x;
    tr.xi.col(j + 1) = penalty_terms(S, gamma, x, false).xi;
    tr.substeps.push_back(accepted);
    if (opts.check_invariance) {
      double v = psi_gamma(S, gamma, x).value;
      if (v > level + inv_tol) throw InvarianceViolation(t_end, v);
    }
  }
  return tr;
}

// ---- catching-up ------------------------------------------------------------

Trajectory integrate_catching_up(const DynamicsSpec& spec, const Vec& x0, const ControlSignal& u,
                                 int substeps) {
  const SweepingSet& S = spec.set();
  const Grid grid = u.grid();
  const int n = spec.state_dim();
  substeps = std::max(1, substeps);
  if (psi_max(S, x0) > 1e-8) throw ProjectionFailure(0.0);

  Trajectory tr;
  tr.grid = grid;
  tr.x = Mat(n, grid.nodes());
  tr.xi = Mat::Zero(S.count(), grid.nodes());
  tr.x.col(0) = x0;
  Vec x = x0;
  const double h = grid.h() / substeps;
  for (int j = 0; j < grid.N; ++j) {
    const Vec uj = u.cell(j);
    Vec xi = Vec::Zero(S.count());
    for (int s = 0; s < substeps; ++s) {
      const double t = grid.t(j) + s * h;
      Vec y = x + h * spec.drift(t, x, uj);
      Projection pr;
      try {
        pr = project_onto_C(S, y, 1e-12, 50);
      } catch (const NoConvergence&) {
        throw ProjectionFailure(t);
      }
      x = pr.z;
      xi = pr.multipliers / h;
    }
    tr.x.col(j + 1) = x;
    tr.xi.col(j + 1) = xi;
    tr.max_penalty = std::max(tr.max_penalty, xi.maxCoeff());
    tr.substeps.push_back(substeps);
  }
  return tr;
}

PathDistance compare_to_oracle(const Trajectory& a, const Trajectory& b) {
  if (!(a.grid == b.grid) || a.x.rows() != b.x.rows() || a.x.cols() != b.x.cols()) {
    throw GridMismatch();
  }
  PathDistance d;
  const int N = a.grid.N;
  Vec sq(N + 1);
  for (int j = 0; j <= N; ++j) {
    double e = (a.x.col(j) - b.x.col(j)).norm();
    d.sup = std::max(d.sup, e);
    sq[j] = e * e;
  }
  double s = 0.0;
  for (int j = 0; j < N; ++j) s += 0.5 * a.grid.h() * (sq[j] + sq[j + 1]);
  d.l2 = std::sqrt(s);
  return d;
}

PathDistance distance_to_path(const Trajectory& a, const std::function<Vec(double)>& ref) {
  Trajectory b = a;
  for (int j = 0; j <= a.grid.N; ++j) b.x.col(j) = ref(a.grid.t(j));
  return compare_to_oracle(a, b);
}

}  // namespace sweep
