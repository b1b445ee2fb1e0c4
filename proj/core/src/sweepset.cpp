#include "sweep/sweepset.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "sweep/errors.hpp"
#include "sweep/smallqp.hpp"

namespace sweep {

SweepingSet::SweepingSet(std::vector<ScalarField> psi, SetConstants constants)
    : psi_(std::move(psi)), constants_(constants) {
  if (psi_.empty()) throw InvalidField("a sweeping set needs at least one constraint");
  n_ = psi_.front().state_dim();
  for (const auto& f : psi_) {
    if (f.state_dim() != n_) throw InvalidField("constraint fields disagree on the state dimension");
    if (f.smoothness() == Smoothness::Lipschitz || f.expr().contains(Op::Max2)) {
      throw InvalidField("constraint fields must be C11: " + f.str());
    }
  }
  if (constants_.eta > 0.0 && constants_.Mbar_psi > 0.0 &&
      constants_.Mbar_psi < 2.0 * constants_.eta) {
    throw InvalidField("gradient bound must be at least 2 eta");
  }
}

SweepingSet SweepingSet::with_constants(SetConstants c) const { return SweepingSet(psi_, c); }

Vec SweepingSet::values(const Vec& x) const {
  Vec v(count());
  for (int i = 0; i < count(); ++i) v[i] = psi_[static_cast<std::size_t>(i)].value(0.0, x);
  return v;
}

Mat SweepingSet::gradients(const Vec& x) const {
  Mat G(n_, count());
  for (int i = 0; i < count(); ++i) G.col(i) = *psi_[static_cast<std::size_t>(i)].eval(x, 1).grad;
  return G;
}

double psi_max(const SweepingSet& S, const Vec& x) { return S.values(x).maxCoeff(); }

SmoothMax psi_gamma(const SweepingSet& S, double gamma, const Vec& x) {
  const int r = S.count();
  Vec v(r);
  Mat G(S.dim(), r);
  for (int i = 0; i < r; ++i) {
    FieldEval e = S.field(i).eval(x, 1);
    v[i] = e.value;
    G.col(i) = *e.grad;
  }
  SmoothMax out;
  out.max = v.maxCoeff();
  Vec w = ((v.array() - out.max) * gamma).exp().matrix();
  double s = w.sum();
  out.value = out.max + std::log(s) / gamma;
  out.weights = w / s;
  out.grad = G * out.weights;
  return out;
}

// ---- schedule ----------------------------------------------------------------

double PenaltySchedule::alpha_of(double gamma, double Mbar, double eta) {
  return std::log(eta * gamma / (2.0 * Mbar)) / gamma;
}

double PenaltySchedule::sigma_of(double gamma, double Mbar, const SetConstants& c, int r) {
  return (r * c.Mbar_psi / (2.0 * c.eta * c.eta)) *
         (std::log(static_cast<double>(r)) / gamma + alpha_of(gamma, Mbar, c.eta));
}

PenaltySchedule::PenaltySchedule(std::vector<double> gammas, double Mbar, const SweepingSet& S)
    : gammas_(std::move(gammas)), Mbar_(Mbar) {
  if (gammas_.empty()) throw InvalidSchedule("penalty schedule is empty");
  if (!(Mbar > 0.0)) throw InvalidSchedule("dynamics bound must be positive");
  if (!S.has_constants()) throw InvalidSchedule("set constants eta and Mbar_psi are not known");
  const double floor = 2.0 * Mbar / S.constants().eta;
  for (std::size_t k = 0; k < gammas_.size(); ++k) {
    if (k > 0 && !(gammas_[k] > gammas_[k - 1])) {
      throw InvalidSchedule("penalty parameters must be strictly increasing");
    }
    if (!(gammas_[k] > floor)) {
      throw InvalidSchedule("penalty parameter " + std::to_string(gammas_[k]) +
                            " does not exceed 2*Mbar/eta = " + std::to_string(floor));
    }
    alpha_.push_back(alpha_of(gammas_[k], Mbar, S.constants().eta));
    sigma_.push_back(sigma_of(gammas_[k], Mbar, S.constants(), S.count()));
  }
}

std::vector<double> PenaltySchedule::log_uniform(double lo, double hi, int steps) {
  if (steps < 1 || !(lo > 0.0) || !(hi >= lo)) throw InvalidSchedule("bad log-uniform range");
  std::vector<double> g;
  if (steps == 1) return {hi};
  for (int k = 0; k < steps; ++k) {
    g.push_back(std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * k / (steps - 1)));
  }
  return g;
}

bool PenaltySchedule::monotone() const {
  for (std::size_t k = 1; k < gammas_.size(); ++k) {
    if (!(alpha_[k] < alpha_[k - 1]) || !(sigma_[k] < sigma_[k - 1])) return false;
  }
  return true;
}

// ---- membership and active sets ---------------------------------------------

const char* membership_name(Membership m) {
  switch (m) {
    case Membership::InCk: return "InCk";
    case Membership::InCgamma: return "InCgamma";
    case Membership::InC: return "InC";
    case Membership::Outside: return "Outside";
  }
  return "?";
}

Membership level_membership(const SweepingSet& S, double gamma, double alpha, const Vec& x) {
  SmoothMax sm = psi_gamma(S, gamma, x);
  if (sm.value <= -alpha) return Membership::InCk;
  if (sm.value <= 0.0) return Membership::InCgamma;
  if (sm.max <= kFeasTol) return Membership::InC;
  return Membership::Outside;
}

Membership level_membership(const SweepingSet& S, const PenaltySchedule& sched, int k,
                            const Vec& x) {
  return level_membership(S, sched.gamma(k), sched.alpha(k), x);
}

std::vector<int> active_set(const SweepingSet& S, const Vec& x, double a, double upper) {
  Vec v = S.values(x);
  std::vector<int> idx;
  for (int i = 0; i < v.size(); ++i) {
    if (v[i] >= -a && v[i] <= upper) idx.push_back(i);
  }
  return idx;
}

std::vector<std::pair<int, Vec>> normal_cone_rays(const SweepingSet& S, const Vec& x, double a) {
  std::vector<std::pair<int, Vec>> rays;
  for (int i : active_set(S, x, a)) rays.emplace_back(i, *S.field(i).eval(x, 1).grad);
  return rays;
}

// ---- assumption checks ------------------------------------------------------

A22Result check_A22(const SweepingSet& S, const std::vector<Vec>& boundary_samples, double a) {
  A22Result out;
  double best = std::numeric_limits<double>::infinity();
  for (const Vec& x : boundary_samples) {
    auto act = active_set(S, x, a, a);
    if (act.empty()) continue;
    Mat G(S.dim(), static_cast<int>(act.size()));
    for (std::size_t j = 0; j < act.size(); ++j) {
      G.col(static_cast<int>(j)) = *S.field(act[j]).eval(x, 1).grad;
    }
    double d = min_norm_point(G).norm;
    ++out.used_samples;
    if (d < best) {
      best = d;
      out.witness = x;
    }
  }
  if (out.used_samples == 0) throw NoBoundarySamples();
  out.eta_hat = 0.5 * best;
  out.pass = out.eta_hat > 1e-10;
  return out;
}

A23Result check_A23(const SweepingSet& S, const Vec& x, double a) {
  auto act = active_set(S, x, a);
  if (act.empty()) throw EmptyActiveSet();
  std::vector<Vec> g;
  for (int i : act) g.push_back(*S.field(i).eval(x, 1).grad);
  A23Result out;
  for (std::size_t j = 0; j < g.size(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (i != j) s += std::abs(g[i].dot(g[j]));
    }
    out.b_hat = std::max(out.b_hat, s / g[j].squaredNorm());
  }
  out.pass = out.b_hat < 1.0;
  return out;
}

Vec interior_direction(const SweepingSet& S, const Vec& c, double a) {
  if (psi_max(S, c) > a) throw NotOnBoundary();
  auto act = active_set(S, c, a, a);
  if (act.empty()) throw NotOnBoundary();
  const int k = static_cast<int>(act.size());
  Mat G(S.dim(), k);
  for (int j = 0; j < k; ++j) G.col(j) = *S.field(act[static_cast<std::size_t>(j)]).eval(c, 1).grad;

  Vec d = Vec::Zero(S.dim());
  for (int j = 0; j < k; ++j) {
    Vec y = -G.col(j);
    Vec lam = nnls(G, y);
    d += y - G * lam;
  }
  const double dn = d.norm();
  double bound = 0.0;
  if (S.has_constants()) {
    const auto& cs = S.constants();
    bound = 4.0 * cs.eta * cs.eta / (S.count() * cs.Mbar_psi);
  }
  if (!(dn > 1e-12)) throw DegenerateCone("interior direction vanishes; the active gradients are not pointed");
  for (int j = 0; j < k; ++j) {
    double cosv = d.dot(G.col(j)) / dn;
    if (!(cosv <= -bound + 1e-12) || !(cosv < 0.0)) {
      throw DegenerateCone("interior direction violates the cone bound (cosine " +
                           std::to_string(cosv) + ")");
    }
  }
  return d;
}

SweepingSet augment_with_ball(const SweepingSet& S, const Vec& y0, double R0) {
  if (!(R0 > 0.0)) throw InvalidField("ball radius must be positive");
  const int n = S.dim();
  if (y0.size() != n) throw InvalidField("ball center has the wrong dimension");
  ExprBuilder b(n, 0);
  int sum = -1;
  for (int i = 0; i < n; ++i) {
    int xi = b.state(i);
    int diff = xi;
    if (y0[i] > 0.0) diff = b.binary(Op::Sub, xi, b.constant(y0[i]));
    if (y0[i] < 0.0) diff = b.binary(Op::Add, xi, b.constant(-y0[i]));
    int sq = b.power(diff, 2);
    sum = sum < 0 ? sq : b.binary(Op::Add, sum, sq);
  }
  int body = b.binary(Op::Sub, sum, b.constant(R0 * R0));
  int root = b.binary(Op::Mul, b.constant(0.5), body);
  std::vector<ScalarField> psi = S.fields();
  psi.emplace_back(std::move(b).build(root), Smoothness::C11);
  return SweepingSet(std::move(psi));
}

// ---- projection -------------------------------------------------------------

Projection project_onto_constraints(const std::vector<ScalarField>& fields, const Vec& offsets,
                                    const Vec& y, double tol, int max_iters) {
  const int r = static_cast<int>(fields.size());
  const int n = static_cast<int>(y.size());
  auto values = [&](const Vec& z) {
    Vec c(r);
    for (int i = 0; i < r; ++i) c[i] = fields[static_cast<std::size_t>(i)].value(0.0, z) + offsets[i];
    return c;
  };
  Projection out;
  out.z = y;
  out.multipliers = Vec::Zero(r);
  Vec c = values(y);
  if (c.maxCoeff() <= 0.0) return out;

  const double scale = 1.0 + y.norm();
  Vec z = y;
  Vec lam = Vec::Zero(r);
  double rho = 1.0;
  for (int it = 1; it <= max_iters; ++it) {
    Mat G(n, r);
    Mat B = Mat::Identity(n, n);
    for (int i = 0; i < r; ++i) {
      FieldEval e = fields[static_cast<std::size_t>(i)].eval(z, 2);
      c[i] = e.value + offsets[i];
      G.col(i) = *e.grad;
      if (lam[i] > 0.0) B += lam[i] * *e.hess;
    }
    Eigen::SelfAdjointEigenSolver<Mat> eig(B, Eigen::EigenvaluesOnly);
    double lmin = eig.eigenvalues().minCoeff();
    if (lmin < 0.1) B.diagonal().array() += 0.1 - lmin;
    Eigen::LDLT<Mat> Bf(B);
    Vec q = z - y;
    Mat BiG = Bf.solve(G);
    Vec Biq = Bf.solve(q);
    Vec mu = nonneg_qp(G.transpose() * BiG, c - G.transpose() * Biq);
    Vec d = -(Biq + BiG * mu);

    if (d.norm() <= tol * scale && c.maxCoeff() <= tol) {
      for (int i = 0; i < r; ++i) {
        if (c[i] < -std::sqrt(tol)) mu[i] = 0.0;
      }
      out.z = z;
      out.multipliers = mu;
      out.iterations = it;
      out.stationarity = (q + G * mu).norm();
      return out;
    }

    rho = std::max(rho, 2.0 * mu.maxCoeff() + 1e-8);
    auto merit = [&](const Vec& p, const Vec& cp) {
      return 0.5 * (p - y).squaredNorm() + rho * cp.cwiseMax(0.0).sum();
    };
    const double m0 = merit(z, c);
    const double D = q.dot(d) - rho * c.cwiseMax(0.0).sum();
    double step = 1.0;
    Vec zn = z + d;
    for (int ls = 0; ls < 40; ++ls) {
      zn = z + step * d;
      Vec cn = values(zn);
      if (D >= 0.0 || merit(zn, cn) <= m0 + 1e-4 * step * D) break;
      step *= 0.5;
    }
    z = zn;
    lam = mu;
  }
  throw NoConvergence(max_iters);
}

Projection project_onto_C(const SweepingSet& S, const Vec& y, double tol, int max_iters) {
  return project_onto_constraints(S.fields(), Vec::Zero(S.count()), y, tol, max_iters);
}

Vec shifted_start(const SweepingSet& S, double gamma, double alpha, double sigma, const Vec& c) {
  auto inside = [&](const Vec& p) { return psi_gamma(S, gamma, p).value <= -alpha; };
  if (inside(c)) return c;
  Vec d;
  if (!active_set(S, c, 1e-7, 1e-7).empty()) {
    d = interior_direction(S, c);
  } else {
    d = -psi_gamma(S, gamma, c).grad;
  }
  if (!(d.norm() > 0.0)) throw DegenerateCone("no descent direction at the start point");
  d.normalize();
  double hi = sigma > 0.0 ? sigma : 1e-3;
  int grow = 0;
  while (!inside(c + hi * d)) {
    if (++grow > 40) throw DegenerateCone("shifted start did not reach the shrunken set");
    hi *= 2.0;
  }
  double lo = 0.0;
  for (int it = 0; it < 60 && hi - lo > 1e-14 * (1.0 + hi); ++it) {
    double mid = 0.5 * (lo + hi);
    if (inside(c + mid * d)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return c + hi * d;
}

}  // namespace sweep
