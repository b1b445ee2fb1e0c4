#include "sweep/ocp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

#include "sweep/errors.hpp"

namespace sweep {

// ---- problem pieces -----------------------------------------------------------

Vec TerminalSet::values(const Vec& x) const {
  switch (kind) {
    case Kind::All: return Vec();
    case Kind::Affine: return Vec::Constant(1, a.dot(x) - b);
    case Kind::Sublevel: {
      Vec v(static_cast<int>(psi.size()));
      for (std::size_t j = 0; j < psi.size(); ++j) v[static_cast<int>(j)] = psi[j].value(0.0, x);
      return v;
    }
  }
  return Vec();
}

Mat TerminalSet::gradients(const Vec& x) const {
  switch (kind) {
    case Kind::All: return Mat(x.size(), 0);
    case Kind::Affine: return a;
    case Kind::Sublevel: {
      Mat G(x.size(), static_cast<int>(psi.size()));
      for (std::size_t j = 0; j < psi.size(); ++j) G.col(static_cast<int>(j)) = *psi[j].eval(x, 1).grad;
      return G;
    }
  }
  return Mat();
}

double TerminalSet::violation(const Vec& x) const {
  Vec v = values(x);
  if (kind == Kind::Sublevel) v = v.cwiseMax(0.0);
  return v.size() ? v.norm() : 0.0;
}

double SweepingProblem::cost(const Vec& x0, const Vec& xT) const {
  Vec z(2 * n());
  z << x0, xT;
  return g.value(0.0, z);
}

std::pair<Vec, Vec> SweepingProblem::cost_gradient(const Vec& x0, const Vec& xT) const {
  Vec z(2 * n());
  z << x0, xT;
  Vec gr = *g.eval(z, 1).grad;
  return {gr.head(n()), gr.tail(n())};
}

double localization(const Vec& x, const Vec& center, double delta) {
  return std::max((x - center).squaredNorm() - 0.25 * delta * delta, 0.0);
}

double objective_J(const SweepingProblem& prob, const Trajectory& traj, const ControlSignal& u,
                   double K_tilde, double alpha_prox, const Mat* center,
                   const ControlSignal* incumbent) {
  const Grid& grid = traj.grid;
  double J = prob.cost(traj.x.col(0), traj.x.col(grid.N));
  if (center && center->cols() == grid.nodes()) {
    for (int j = 0; j < grid.N; ++j) {
      J += K_tilde * 0.5 * grid.h() *
           (localization(traj.x.col(j), center->col(j), prob.delta) +
            localization(traj.x.col(j + 1), center->col(j + 1), prob.delta));
    }
  }
  if (alpha_prox > 0.0 && incumbent) {
    J += alpha_prox * grid.h() * (u.values() - incumbent->values()).cwiseAbs().sum();
  }
  return J;
}

// ---- transcription ----------------------------------------------------------

Transcription::Transcription(const SweepingProblem& prob, const SolveConfig& cfg, double gamma,
                             Grid grid)
    : prob_(prob), cfg_(cfg), gamma_(gamma), grid_(grid), rho_(cfg.rho0) {
  mu_ = Vec::Zero(prob.CT.values(Vec::Zero(prob.n())).size());
}

bool Transcription::at_localization_edge(const Mat& x) const {
  if (center_.cols() != x.cols() || cfg_.K_tilde <= 0.0) return false;
  const double r2 = 0.25 * prob_.delta * prob_.delta;
  for (int j = 0; j < x.cols(); ++j) {
    if ((x.col(j) - center_.col(j)).squaredNorm() >= r2 * (1.0 - 1e-6)) return true;
  }
  return false;
}

Vec Transcription::effective_multiplier(const Vec& xT) const {
  Vec c = prob_.CT.values(xT);
  Vec eff = mu_ + rho_ * c;
  if (prob_.CT.kind == TerminalSet::Kind::Sublevel) eff = eff.cwiseMax(0.0);
  return eff;
}

Vec Transcription::prox_step(const Vec& y, const Vec& guess, double h) const {
  const SweepingSet& S = prob_.spec.set();
  const int n = static_cast<int>(y.size());
  auto merit = [&](const Vec& x) {
    double v = 0.5 * (x - y).squaredNorm();
    for (int i = 0; i < S.count(); ++i) v += h * std::exp(gamma_ * S.field(i).value(0.0, x));
    return v;
  };
  Vec x = guess;
  const double scale = 1.0 + y.norm();
  for (int it = 0; it < 80; ++it) {
    PenaltyTerms pt = penalty_terms(S, gamma_, x, true);
    Vec R = x - y + h * pt.force;
    const double rn = R.norm();
    if (!std::isfinite(rn)) break;
    if (rn <= 1e-14 * scale) return x;
    Mat W = Mat::Identity(n, n) + h * pt.jac;
    Eigen::LDLT<Mat> ldlt(W);
    Vec d;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      d = -ldlt.solve(R);
    } else {
      d = -R;
    }
    if (rn <= 1e-9 * scale) {
      x += d;
      continue;
    }
    const double m0 = merit(x);
    const double slope = R.dot(d);
    double s = 1.0;
    Vec xn = x + d;
    for (int ls = 0; ls < 50; ++ls) {
      xn = x + s * d;
      double m1 = merit(xn);
      if (std::isfinite(m1) && m1 <= m0 + 1e-4 * s * slope) break;
      // Near the solution the merit decrease drowns in rounding; fall back to
      // the residual norm.
      const double r1 = (xn - y + h * penalty_terms(S, gamma_, xn, false).force).norm();
      if (std::isfinite(r1) && r1 <= (1.0 - 1e-4 * s) * rn) break;
      s *= 0.5;
    }
    x = xn;
  }
  PenaltyTerms pt = penalty_terms(S, gamma_, x, false);
  Vec R = x - y + h * pt.force;
  if (!(R.norm() <= 1e-10 * scale)) throw StepFailure(-1.0);
  return x;
}

Transcription::Eval Transcription::evaluate(const ControlSignal& u, const Vec& x0,
                                            bool with_gradient) const {
  const DynamicsSpec& spec = prob_.spec;
  const SweepingSet& S = spec.set();
  const int n = prob_.n(), m = prob_.m();
  const int Nc = grid_.N;
  const int sub = std::max(1, cfg_.substeps);
  const int K = Nc * sub;
  const double h = grid_.h();
  const double hf = h / sub;
  const double beta = cfg_.u_ref ? cfg_.beta : 1.0;

  auto drift = [&](double t, const Vec& x, int c) {
    Vec v = spec.drift(t, x, u.cell(c));
    if (beta != 1.0) v = beta * v + (1.0 - beta) * spec.drift(t, x, cfg_.u_ref->cell(c));
    return v;
  };

  Mat X(n, K + 1);
  X.col(0) = x0;
  for (int k = 0; k < K; ++k) {
    const int c = k / sub;
    const double t = k * hf;
    Vec y = X.col(k) + hf * drift(t, X.col(k), c);
    try {
      X.col(k + 1) = prox_step(y, X.col(k), hf);
    } catch (const StepFailure&) {
      throw StepFailure(t);
    }
  }

  Eval ev;
  ev.x = Mat(n, Nc + 1);
  for (int j = 0; j <= Nc; ++j) ev.x.col(j) = X.col(j * sub);
  const Vec xT = ev.x.col(Nc);

  ev.J = prob_.cost(ev.x.col(0), xT);
  const bool localize = center_.cols() == Nc + 1 && cfg_.K_tilde > 0.0;
  auto node_weight = [&](int j) { return (j == 0 || j == Nc) ? 0.5 * h : h; };
  if (localize) {
    for (int j = 0; j <= Nc; ++j) {
      ev.J += cfg_.K_tilde * node_weight(j) * localization(ev.x.col(j), center_.col(j), prob_.delta);
    }
  }
  const bool prox = cfg_.alpha_prox > 0.0 && incumbent_.has_value();
  if (prox) ev.J += cfg_.alpha_prox * h * (u.values() - incumbent_->values()).cwiseAbs().sum();

  ev.terminal_values = prob_.CT.values(xT);
  ev.terminal_residual = prob_.CT.violation(xT);
  ev.value = ev.J;
  const Vec& c = ev.terminal_values;
  if (prob_.CT.kind == TerminalSet::Kind::Affine) {
    ev.value += mu_.dot(c) + 0.5 * rho_ * c.squaredNorm();
  } else if (prob_.CT.kind == TerminalSet::Kind::Sublevel) {
    for (int i = 0; i < c.size(); ++i) {
      double s = std::max(0.0, c[i] + mu_[i] / rho_);
      ev.value += 0.5 * rho_ * (s * s - (mu_[i] / rho_) * (mu_[i] / rho_));
    }
  }
  if (!with_gradient) return ev;

  // Direct sensitivities at control grid nodes.
  auto [g0, gT] = prob_.cost_gradient(ev.x.col(0), xT);
  auto direct = [&](int j) {
    Vec d = Vec::Zero(n);
    if (localize) {
      Vec diff = ev.x.col(j) - center_.col(j);
      if (diff.squaredNorm() > 0.25 * prob_.delta * prob_.delta) {
        d += cfg_.K_tilde * node_weight(j) * 2.0 * diff;
      }
    }
    if (j == 0) d += g0;
    if (j == Nc) {
      d += gT;
      if (c.size()) d += prob_.CT.gradients(xT) * effective_multiplier(xT);
    }
    return d;
  };

  ev.grad_u = Mat::Zero(m, std::max(Nc, 1));
  ev.a = Mat(n, Nc + 1);
  Vec a = direct(Nc);
  ev.a.col(Nc) = a;
  for (int k = K - 1; k >= 0; --k) {
    const int cell = k / sub;
    const double t = k * hf;
    const Vec xk = X.col(k);
    PenaltyTerms pt = penalty_terms(S, gamma_, X.col(k + 1), true);
    Mat W = Mat::Identity(n, n) + hf * pt.jac;
    Vec mu = W.ldlt().solve(a);
    Mat Jx = spec.drift_jac_x(t, xk, u.cell(cell));
    Mat Ju = spec.drift_jac_u(t, xk, u.cell(cell));
    if (beta != 1.0) {
      Jx = beta * Jx + (1.0 - beta) * spec.drift_jac_x(t, xk, cfg_.u_ref->cell(cell));
      Ju *= beta;
    }
    a = mu + hf * Jx.transpose() * mu;
    ev.grad_u.col(cell) += hf * Ju.transpose() * mu;
    if (k % sub == 0) {
      a += direct(k / sub);
      ev.a.col(k / sub) = a;
    }
  }
  if (prox) {
    ev.grad_u += cfg_.alpha_prox * h *
                 (u.values() - incumbent_->values()).unaryExpr([](double v) {
                   return static_cast<double>((v > 0) - (v < 0));
                 });
  }
  ev.grad_x0 = a;
  return ev;
}

// ---- start state --------------------------------------------------------------

namespace {

Vec shrunk_offsets(const SweepingSet& S, double gamma, double alpha) {
  return Vec::Constant(S.count(), alpha + std::log(static_cast<double>(S.count())) / gamma);
}

Vec project_start(const SweepingProblem& prob, double gamma, double alpha, const Vec& y) {
  const SweepingSet& S = prob.spec.set();
  std::vector<ScalarField> fields = prob.C0.psi;
  Vec off = Vec::Zero(static_cast<int>(fields.size()) + S.count());
  off.tail(S.count()) = shrunk_offsets(S, gamma, alpha);
  for (const auto& f : S.fields()) fields.push_back(f);
  return project_onto_constraints(fields, off, y, 1e-12, 100).z;
}

}  // namespace

Vec initial_state(const SweepingProblem& prob, const PenaltySchedule& sched, int k,
                  const std::optional<Vec>& guess) {
  const SweepingSet& S = prob.spec.set();
  if (prob.C0.kind == InitialSet::Kind::Point) {
    return shifted_start(S, sched.gamma(k), sched.alpha(k), sched.sigma(k), prob.C0.point);
  }
  Vec y = guess ? *guess : (prob.C0.point.size() ? prob.C0.point : Vec::Zero(prob.n()));
  return project_start(prob, sched.gamma(k), sched.alpha(k), y);
}

// ---- optimizer ------------------------------------------------------------------

namespace {

struct InnerStats {
  int iterations = 0;
  int evaluations = 0;
  double pg = 0.0;
  bool at_edge = false;
};

class InnerSolver {
 public:
  InnerSolver(const SweepingProblem& prob, const SolveConfig& cfg, Transcription& tr, double gamma,
              double alpha, double grad_tol)
      : prob_(prob), cfg_(cfg), tr_(tr), gamma_(gamma), alpha_(alpha), grad_tol_(grad_tol),
        free_x0_(prob.C0.kind == InitialSet::Kind::Sublevel) {}

  InnerStats run(ControlSignal& u, Vec& x0) {
    const double h = tr_.grid().h();
    const int mN = static_cast<int>(u.values().size());
    const int nz = mN + (free_x0_ ? static_cast<int>(x0.size()) : 0);

    auto pack = [&](const ControlSignal& uu, const Vec& xx) {
      Vec z(nz);
      z.head(mN) = Eigen::Map<const Vec>(uu.values().data(), mN);
      if (free_x0_) z.tail(nz - mN) = xx;
      return z;
    };
    auto unpack = [&](const Vec& z, ControlSignal& uu, Vec& xx) {
      Eigen::Map<Vec>(uu.values().data(), mN) = z.head(mN);
      if (free_x0_) xx = z.tail(nz - mN);
    };
    auto project = [&](const Vec& z) {
      Vec p = z;
      ControlSignal tmp = u;
      Eigen::Map<Vec>(tmp.values().data(), mN) = z.head(mN);
      for (int j = 0; j < tmp.values().cols(); ++j) tmp.values().col(j) = prob_.U.clamp(tmp.values().col(j));
      p.head(mN) = Eigen::Map<const Vec>(tmp.values().data(), mN);
      if (free_x0_) p.tail(nz - mN) = project_start(prob_, gamma_, alpha_, z.tail(nz - mN));
      return p;
    };
    // Gradient in the L2 metric for controls.
    auto scaled = [&](const Transcription::Eval& ev) {
      Vec g(nz);
      g.head(mN) = Eigen::Map<const Vec>(ev.grad_u.data(), mN) / h;
      if (free_x0_) g.tail(nz - mN) = ev.grad_x0;
      return g;
    };
    auto raw = [&](const Transcription::Eval& ev) {
      Vec g(nz);
      g.head(mN) = Eigen::Map<const Vec>(ev.grad_u.data(), mN);
      if (free_x0_) g.tail(nz - mN) = ev.grad_x0;
      return g;
    };

    InnerStats st;
    ControlSignal uw = u;
    Vec xw = x0;
    Vec z = project(pack(u, x0));
    unpack(z, uw, xw);
    Transcription::Eval ev = tr_.evaluate(uw, xw, true);
    ++st.evaluations;
    if (cfg_.on_iterate) cfg_.on_iterate(gamma_, 0, ev.value);
    Vec G = scaled(ev);
    std::deque<std::pair<Vec, Vec>> mem;
    int flat = 0;

    for (int it = 0; it < cfg_.max_inner; ++it) {
      st.pg = (project(z - G) - z).cwiseAbs().maxCoeff();
      if (st.pg <= grad_tol_) break;

      bool steepest = cfg_.optimizer == Optimizer::ProjectedGradient || mem.empty();
      bool accepted = false;
      for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
        Vec d = steepest ? Vec(-G) : lbfgs_direction(mem, G);
        for (int i = 0; i < mN; ++i) {
          const int row = i % prob_.m();
          if ((z[i] <= prob_.U.lo[row] && d[i] < 0.0) || (z[i] >= prob_.U.hi[row] && d[i] > 0.0)) d[i] = 0.0;
        }
        if (!(G.dot(d) < 0.0)) {
          if (steepest) {
            d = project(z - G) - z;
          } else {
            steepest = true;
            continue;
          }
        }
        const Vec graw = raw(ev);
        double step = 1.0;
        for (int ls = 0; ls < 40; ++ls) {
          Vec zn = project(z + step * d);
          if ((zn - z).cwiseAbs().maxCoeff() == 0.0) break;
          unpack(zn, uw, xw);
          Transcription::Eval en;
          try {
            en = tr_.evaluate(uw, xw, true);
          } catch (const StepFailure&) {
            step *= 0.5;
            continue;
          }
          ++st.evaluations;
          if (std::isfinite(en.value) && en.value <= ev.value + 1e-4 * graw.dot(zn - z)) {
            Vec Gn = scaled(en);
            Vec s = zn - z, y = Gn - G;
            if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
              mem.emplace_back(s, y);
              if (static_cast<int>(mem.size()) > cfg_.lbfgs_memory) mem.pop_front();
            }
            flat = std::abs(en.value - ev.value) <= 1e-15 * (1.0 + std::abs(ev.value)) ? flat + 1 : 0;
            z = zn;
            ev = en;
            G = Gn;
            accepted = true;
            if (cfg_.on_iterate) cfg_.on_iterate(gamma_, it + 1, ev.value);
            break;
          }
          step *= 0.5;
        }
        if (!accepted) {
          mem.clear();
          if (steepest) break;
          steepest = true;
        }
      }
      st.iterations = it + 1;
      if (!accepted) {
        // A stall on the edge of the localization dead zone is a trust region
        // hit; the caller recenters.
        st.at_edge = tr_.at_localization_edge(ev.x);
        if (st.pg > 1e-3 && !st.at_edge) throw LineSearchStall(gamma_, it);
        break;
      }
      if (flat >= 3) break;
    }
    st.pg = (project(z - G) - z).cwiseAbs().maxCoeff();
    unpack(z, u, x0);
    last_ = ev;
    return st;
  }

  const Transcription::Eval& last() const { return last_; }

 private:
  static Vec lbfgs_direction(const std::deque<std::pair<Vec, Vec>>& mem, const Vec& G) {
    Vec q = G;
    std::vector<double> alpha(mem.size());
    for (int i = static_cast<int>(mem.size()) - 1; i >= 0; --i) {
      const auto& [s, y] = mem[static_cast<std::size_t>(i)];
      alpha[static_cast<std::size_t>(i)] = s.dot(q) / y.dot(s);
      q -= alpha[static_cast<std::size_t>(i)] * y;
    }
    const auto& [s_last, y_last] = mem.back();
    q *= s_last.dot(y_last) / y_last.dot(y_last);
    for (std::size_t i = 0; i < mem.size(); ++i) {
      const auto& [s, y] = mem[i];
      double b = y.dot(q) / y.dot(s);
      q += (alpha[i] - b) * s;
    }
    return -q;
  }

  const SweepingProblem& prob_;
  const SolveConfig& cfg_;
  Transcription& tr_;
  double gamma_;
  double alpha_;
  double grad_tol_;
  bool free_x0_;
  Transcription::Eval last_;
};

}  // namespace

SolveResult solve(const SweepingProblem& prob, const SolveConfig& cfg, const ControlSignal& u_init) {
  if (cfg.N < 16) throw InvalidSchedule("grid size N must be at least 16");
  const Grid grid{prob.T(), cfg.N};
  if (!(u_init.grid() == grid)) throw GridMismatch();
  auto say = [&](const std::string& s) {
    if (cfg.log) cfg.log(s);
  };

  ControlSignal u = u_init;
  for (int j = 0; j < u.values().cols(); ++j) u.values().col(j) = prob.U.clamp(u.values().col(j));
  std::optional<Vec> x0_prev;
  Vec mu;
  double rho = cfg.rho0;
  SolveResult res{Trajectory{}, u, Vec(), 0.0, 0.0, 0.0, {}, 0.0, Vec(), Mat(), Mat()};

  const PenaltySchedule& sched = cfg.schedule;
  for (int k = 0; k < sched.size(); ++k) {
    const double gamma = sched.gamma(k);
    Vec x0 = initial_state(prob, sched, k, x0_prev);
    Transcription tr(prob, cfg, gamma, grid);
    if (mu.size() == tr.multipliers().size()) tr.set_multipliers(mu, rho);
    const bool last = k + 1 == sched.size();
    const double feas_tol = last ? cfg.feas_tol : std::max(cfg.feas_tol, cfg.stage_feas_tol);
    InnerSolver inner(prob, cfg, tr, gamma, sched.alpha(k),
                      last ? cfg.grad_tol : std::max(cfg.grad_tol, cfg.stage_grad_tol));

    GammaLog gl;
    gl.gamma = gamma;
    double prev_violation = std::numeric_limits<double>::infinity();
    for (int outer = 0; outer < cfg.max_outer; ++outer) {
      tr.set_center(tr.evaluate(u, x0, false).x);
      if (cfg.alpha_prox > 0.0) tr.set_incumbent(u);
      InnerStats st = inner.run(u, x0);
      gl.iterations += st.iterations;
      gl.evaluations += st.evaluations;
      gl.pg_norm = st.pg;
      gl.outer = outer + 1;
      const auto& ev = inner.last();
      const double viol = ev.terminal_residual;
      gl.terminal_residual = viol;
      gl.J = ev.J;
      std::ostringstream os;
      os << "gamma " << gamma << " outer " << outer << " J " << ev.J << " residual " << viol
         << " pg " << st.pg << " iters " << st.iterations;
      say(os.str());
      const bool feasible = prob.CT.kind == TerminalSet::Kind::All || viol <= feas_tol;
      if (feasible && !st.at_edge) break;
      if (feasible) continue;
      Vec eff = tr.effective_multiplier(ev.x.col(grid.N));
      if (viol > 0.25 * prev_violation) tr.set_multipliers(eff, tr.rho() * 2.0);
      else tr.set_multipliers(eff, tr.rho());
      prev_violation = viol;
    }
    mu = tr.multipliers();
    rho = tr.rho();
    x0_prev = x0;
    res.log.push_back(gl);

    if (k + 1 == sched.size()) {
      Transcription::Eval ev = tr.evaluate(u, x0, true);
      const SweepingSet& S = prob.spec.set();
      res.trajectory.grid = grid;
      res.trajectory.x = ev.x;
      res.trajectory.xi = Mat(S.count(), grid.nodes());
      for (int j = 0; j <= grid.N; ++j) {
        res.trajectory.xi.col(j) = penalty_terms(S, gamma, ev.x.col(j), false).xi;
      }
      res.trajectory.max_penalty = res.trajectory.xi.maxCoeff();
      res.control = u;
      res.x0 = x0;
      res.gamma = gamma;
      res.J = ev.J;
      res.objective = ev.value;
      res.terminal_residual = ev.terminal_residual;
      res.terminal_multiplier = tr.effective_multiplier(ev.x.col(grid.N));
      res.center = tr.evaluate(u, x0, false).x;
      res.p = -ev.a;
    }
  }
  if (res.terminal_residual > cfg.infeasible_tol) throw TerminalInfeasible(res.terminal_residual);
  return res;
}

// ---- gradient check -------------------------------------------------------------

double GradientCheck::rel_gap() const {
  const double s = std::max(std::abs(adjoint), std::abs(fd));
  if (s < 1e-12) return std::abs(adjoint - fd);
  return std::abs(adjoint - fd) / s;
}

GradientCheck gradient_check(const SweepingProblem& prob, const SolveConfig& cfg,
                             const ControlSignal& u, const ControlSignal& direction) {
  const int k = cfg.schedule.size() - 1;
  const Grid grid = u.grid();
  Transcription tr(prob, cfg, cfg.schedule.gamma(k), grid);
  Vec x0 = initial_state(prob, cfg.schedule, k);
  Transcription::Eval ev = tr.evaluate(u, x0, true);
  GradientCheck out;
  out.adjoint = (ev.grad_u.array() * direction.values().array()).sum();
  const double eps = 1e-5 * (1.0 + u.values().cwiseAbs().maxCoeff());
  ControlSignal up = u, um = u;
  up.values() += eps * direction.values();
  um.values() -= eps * direction.values();
  out.fd = (tr.evaluate(up, x0, false).value - tr.evaluate(um, x0, false).value) / (2.0 * eps);
  return out;
}

}  // namespace sweep
