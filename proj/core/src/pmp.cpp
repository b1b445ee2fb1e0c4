#include "sweep/pmp.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numbers>

#include "sweep/errors.hpp"
#include "sweep/estimate.hpp"
#include "sweep/smallqp.hpp"

namespace sweep {

namespace {

double jump_eps(const Grid& g) { return 1e-12 * (1.0 + std::abs(g.T)); }

Vec interp(const Grid& grid, const Mat& x, double t) {
  if (grid.N == 0) return x.col(0);
  const int j = grid.cell(t);
  const double s = std::clamp((t - grid.t(j)) / grid.h(), 0.0, 1.0);
  return (1.0 - s) * x.col(j) + s * x.col(j + 1);
}

Vec grad_psi(const SweepingSet& S, int i, const Vec& x) { return *S.field(i).eval(x, 1).grad; }

Mat node_derivatives(const Grid& grid, const Mat& x) {
  const int N = grid.N;
  Mat d = Mat::Zero(x.rows(), x.cols());
  if (N == 0) return d;
  const double h = grid.h();
  if (N == 1) {
    d.col(0) = d.col(1) = (x.col(1) - x.col(0)) / h;
    return d;
  }
  for (int j = 1; j < N; ++j) d.col(j) = (x.col(j + 1) - x.col(j - 1)) / (2 * h);
  d.col(0) = (-3 * x.col(0) + 4 * x.col(1) - x.col(2)) / (2 * h);
  d.col(N) = (3 * x.col(N) - 4 * x.col(N - 1) + x.col(N - 2)) / (2 * h);
  return d;
}

double sup_norm(const Mat& p) {
  double s = 0.0;
  for (int j = 0; j < p.cols(); ++j) s = std::max(s, p.col(j).norm());
  return s;
}

// Distance from v to the cone spanned by the columns of G.
double cone_distance(const Mat& G, const Vec& v) {
  if (G.cols() == 0) return v.norm();
  return (v - G * nnls(G, v)).norm();
}

using TestFn = std::function<Vec(double)>;

std::vector<TestFn> test_functions(int n, double T, std::uint64_t seed, int random_tests) {
  std::vector<TestFn> out;
  for (int q = 0; q <= 3; ++q) {
    for (int j = 0; j < n; ++j) {
      out.push_back([=](double t) {
        Vec z = Vec::Zero(n);
        z[j] = std::pow(t / T, q);
        return z;
      });
    }
  }
  std::uint64_t state = seed ^ 0x9e3779b97f4a7c15ULL;
  auto gauss = [&state] {
    const double a = std::max(uniform01(state), 1e-300), b = uniform01(state);
    return std::sqrt(-2.0 * std::log(a)) * std::cos(2.0 * std::numbers::pi * b);
  };
  for (int k = 0; k < random_tests; ++k) {
    struct Bump {
      double c, w;
      Vec coef;
    };
    std::vector<Bump> bumps;
    for (int b = 0; b < 3; ++b) {
      Bump bump{T * uniform01(state), T * (0.05 + 0.25 * uniform01(state)), Vec(n)};
      for (int i = 0; i < n; ++i) bump.coef[i] = gauss();
      bumps.push_back(bump);
    }
    out.push_back([bumps, n](double t) {
      Vec z = Vec::Zero(n);
      for (const Bump& b : bumps) z += b.coef * std::exp(-0.5 * std::pow((t - b.c) / b.w, 2));
      return z;
    });
  }
  return out;
}

// Control candidates: a tensor grid for small m, otherwise corners plus random points.
std::vector<Vec> control_candidates(const ControlBox& U, int samples, std::uint64_t seed) {
  const int m = U.dim();
  const Vec& lo = U.lo;
  const Vec& hi = U.hi;
  std::vector<Vec> cands;
  if (m <= 2) {
    const int k = std::max(2, samples);
    const int total = m == 0 ? 1 : (m == 1 ? k : k * k);
    for (int idx = 0; idx < total; ++idx) {
      Vec v(m);
      int rem = idx;
      for (int d = 0; d < m; ++d) {
        v[d] = lo[d] + (hi[d] - lo[d]) * (rem % k) / (k - 1);
        rem /= k;
      }
      cands.push_back(v);
    }
  } else {
    const int corners = m <= 12 ? 1 << m : 0;
    for (int c = 0; c < corners; ++c) {
      Vec v(m);
      for (int d = 0; d < m; ++d) v[d] = (c >> d) & 1 ? hi[d] : lo[d];
      cands.push_back(v);
    }
    std::uint64_t state = seed + 17;
    for (int c = 0; c < 200; ++c) {
      Vec v(m);
      for (int d = 0; d < m; ++d) v[d] = lo[d] + (hi[d] - lo[d]) * uniform01(state);
      cands.push_back(v);
    }
  }
  return cands;
}

}  // namespace

Vec PmpCertificate::p_left(int j) const {
  Vec v = p.col(j);
  for (const Jump& jp : p_jumps) {
    if (std::abs(jp.t - grid.t(j)) <= jump_eps(grid)) v -= jp.dp;
  }
  return v;
}

void PmpCertificate::validate(int n, int m, int r) const {
  const int cols = grid.nodes();
  if (x.rows() != n || x.cols() != cols || u.rows() != m || u.cols() != cols || p.rows() != n ||
      p.cols() != cols || xi.rows() != r || xi.cols() != cols ||
      static_cast<int>(nu.size()) != r) {
    throw GridMismatch();
  }
  for (const AdjointMeasure& mu : nu) {
    if (mu.density.size() != cols || !(mu.grid == grid)) throw GridMismatch();
  }
  for (const Jump& jp : p_jumps) {
    if (jp.dp.size() != n) throw GridMismatch();
  }
}

const std::vector<std::string>& residual_names() {
  static const std::vector<std::string> names = {
      "primal_dynamics", "nontriviality", "adjoint",      "slack_a",
      "slack_b",         "transversality", "maximization"};
  return names;
}

const Residual& ResidualReport::get(const std::string& name) const {
  for (const Residual& r : items) {
    if (r.name == name) return r;
  }
  throw Error("no residual named " + name);
}

double check_primal(const PmpCertificate& cert, const SweepingProblem& prob) {
  const SweepingSet& S = prob.spec.set();
  cert.validate(prob.n(), prob.m(), S.count());
  const Grid& grid = cert.grid;
  double dyn = 0.0;
  for (int j = 1; j < grid.N; ++j) {
    const Vec dx = (cert.x.col(j + 1) - cert.x.col(j - 1)) / (2 * grid.h());
    Vec rhs = prob.spec.drift(grid.t(j), cert.x.col(j), cert.u.col(j));
    for (int i = 0; i < S.count(); ++i) rhs -= cert.xi(i, j) * grad_psi(S, i, cert.x.col(j));
    dyn = std::max(dyn, (dx - rhs).norm());
  }
  double viol = 0.0;
  for (int j = 0; j <= grid.N; ++j) viol = std::max(viol, S.values(cert.x.col(j)).maxCoeff());
  return dyn + std::max(viol, 0.0);
}

double check_adjoint(const PmpCertificate& cert, const SweepingProblem& prob,
                     const VerifyOptions& opts) {
  const SweepingSet& S = prob.spec.set();
  const int n = prob.n(), r = S.count();
  cert.validate(n, prob.m(), r);
  const Grid& grid = cert.grid;
  const int N = grid.N;
  if (N == 0 || grid.T <= 0.0) return 0.0;
  const double h = grid.h(), eps = jump_eps(grid);

  // Integrand of the drift part at each node, from the right and from the left.
  Mat right(n, N + 1), left(n, N + 1);
  Mat G(n * r, N + 1);  // constraint gradients per node
  for (int j = 0; j <= N; ++j) {
    const Vec x = cert.x.col(j);
    const Mat A = -prob.spec.drift_jac_x(grid.t(j), x, cert.u.col(j)).transpose();
    Mat B = A;
    for (int i = 0; i < r; ++i) {
      FieldEval e = S.field(i).eval(x, 2);
      B += cert.xi(i, j) * *e.hess;
      G.block(i * n, j, n, 1) = *e.grad;
    }
    right.col(j) = B * cert.p.col(j);
    left.col(j) = B * cert.p_left(j);
  }
  double tv = 0.0;
  for (int j = 0; j < N; ++j) tv += (cert.p.col(j + 1) - cert.p.col(j)).norm();
  double scale = sup_norm(cert.p) + tv;
  if (!(scale > 0.0)) scale = 1.0;

  // Absolutely continuous increment of p over each cell.
  Mat dp_ac(n, N);
  for (int j = 0; j < N; ++j) {
    Vec d = cert.p_left(j + 1) - cert.p.col(j);
    for (const Jump& jp : cert.p_jumps) {
      if (jp.t > grid.t(j) + eps && jp.t < grid.t(j + 1) - eps) d -= jp.dp;
    }
    dp_ac.col(j) = d;
  }

  double worst = 0.0;
  for (const TestFn& z : test_functions(n, grid.T, opts.seed, opts.random_tests)) {
    std::vector<Vec> zn(static_cast<std::size_t>(N + 1));
    double zsup = 0.0;
    for (int j = 0; j <= N; ++j) {
      zn[static_cast<std::size_t>(j)] = z(grid.t(j));
      zsup = std::max(zsup, zn[static_cast<std::size_t>(j)].norm());
    }
    double lhs = 0.0, rhs = 0.0;
    for (int j = 0; j < N; ++j) {
      const Vec& za = zn[static_cast<std::size_t>(j)];
      const Vec& zb = zn[static_cast<std::size_t>(j + 1)];
      lhs += z(grid.t(j) + 0.5 * h).dot(dp_ac.col(j));
      rhs += 0.5 * h * (za.dot(right.col(j)) + zb.dot(left.col(j + 1)));
      for (int i = 0; i < r; ++i) {
        rhs += 0.5 * h *
               (za.dot(G.col(j).segment(i * n, n)) * cert.nu[i].density[j] +
                zb.dot(G.col(j + 1).segment(i * n, n)) * cert.nu[i].density[j + 1]);
      }
    }
    for (const Jump& jp : cert.p_jumps) lhs += z(jp.t).dot(jp.dp);
    for (int i = 0; i < r; ++i) {
      for (const Atom& a : cert.nu[i].atoms) {
        rhs += z(a.t).dot(grad_psi(S, i, interp(grid, cert.x, a.t))) * a.weight;
      }
    }
    if (zsup > 0.0) worst = std::max(worst, std::abs(lhs - rhs) / (zsup * scale));
  }
  return worst;
}

std::pair<double, double> check_slackness(const PmpCertificate& cert, const SweepingProblem& prob,
                                          double active_tol) {
  const SweepingSet& S = prob.spec.set();
  cert.validate(prob.n(), prob.m(), S.count());
  const double psup = sup_norm(cert.p);
  double a = 0.0, b = 0.0;
  for (int j = 0; j <= cert.grid.N; ++j) {
    const Vec x = cert.x.col(j);
    const Vec pl = cert.p_left(j);
    for (int i = 0; i < S.count(); ++i) {
      FieldEval e = S.field(i).eval(x, 1);
      if (e.value < -active_tol) a = std::max(a, cert.xi(i, j));
      b = std::max(b, std::abs(cert.xi(i, j) * e.grad->dot(pl)));
    }
  }
  return {a, psup > 0.0 ? b / psup : b};
}

EndpointResiduals check_transversality_and_max(const PmpCertificate& cert,
                                               const SweepingProblem& prob,
                                               const VerifyOptions& opts) {
  const int n = prob.n(), m = prob.m();
  cert.validate(n, m, prob.spec.set().count());
  const Grid& grid = cert.grid;
  const int N = grid.N;
  EndpointResiduals out;
  const Vec x0 = cert.x.col(0), xT = cert.x.col(N);
  const Vec p0 = cert.p.col(0), pT = cert.p.col(N);
  const double lam = cert.lambda;

  // (p(0), -p(T)) - lambda grad g must lie in N_C0 x N_CT.
  auto [g0, gT] = prob.cost_gradient(x0, xT);
  const Vec r0 = p0 - lam * g0;
  const Vec rT = -pT - lam * gT;
  double d0 = 0.0;
  switch (prob.C0.kind) {
    case InitialSet::Kind::Point: break;
    case InitialSet::Kind::Sublevel: {
      std::vector<Vec> cols;
      for (const ScalarField& f : prob.C0.psi) {
        FieldEval e = f.eval(x0, 1);
        if (e.value >= -opts.active_tol) cols.push_back(*e.grad);
      }
      Mat G(n, static_cast<int>(cols.size()));
      for (std::size_t k = 0; k < cols.size(); ++k) G.col(static_cast<int>(k)) = cols[k];
      d0 = cone_distance(G, r0);
      break;
    }
    default: throw UnsupportedSetDescriptor("initial set");
  }
  double dT = 0.0;
  switch (prob.CT.kind) {
    case TerminalSet::Kind::All: dT = rT.norm(); break;
    case TerminalSet::Kind::Affine: {
      const Vec& a = prob.CT.a;
      dT = (rT - a * (a.dot(rT) / a.squaredNorm())).norm();
      break;
    }
    case TerminalSet::Kind::Sublevel: {
      const Vec vals = prob.CT.values(xT);
      const Mat all = prob.CT.gradients(xT);
      std::vector<int> act;
      for (int k = 0; k < vals.size(); ++k) {
        if (vals[k] >= -opts.active_tol) act.push_back(k);
      }
      Mat G(n, static_cast<int>(act.size()));
      for (std::size_t k = 0; k < act.size(); ++k) G.col(static_cast<int>(k)) = all.col(act[k]);
      dT = cone_distance(G, rT);
      break;
    }
    default: throw UnsupportedSetDescriptor("terminal set");
  }
  double s = pT.norm() + lam;
  if (!(s > 0.0)) s = 1.0;
  out.transversality = std::hypot(d0, dT) / s;
  out.nontriviality = prob.CT.kind == TerminalSet::Kind::All ? std::abs(lam - 1.0)
                                                             : std::abs(pT.norm() + lam - 1.0);

  const std::vector<Vec> cands = control_candidates(prob.U, opts.control_samples, opts.seed);
  const double psup = sup_norm(cert.p);
  double gap = 0.0;
  for (int j = 0; j <= N; ++j) {
    const Vec pl = cert.p.col(j);
    const Vec x = cert.x.col(j);
    const double t = grid.t(j);
    const double h_bar = prob.spec.drift(t, x, cert.u.col(j)).dot(pl);
    for (const Vec& v : cands) gap = std::max(gap, prob.spec.drift(t, x, v).dot(pl) - h_bar);
  }
  out.maximization = psup > 0.0 ? gap / psup : gap;
  return out;
}

ResidualReport verify(const PmpCertificate& cert, const SweepingProblem& prob,
                      const VerifyOptions& opts) {
  double primal = 0.0, adj = 0.0;
  std::pair<double, double> slack;
  EndpointResiduals ep;
  if (opts.threads > 1) {
    // The groups only read the certificate; results match the serial path.
    auto f_adj = std::async(std::launch::async, [&] { return check_adjoint(cert, prob, opts); });
    auto f_ep = std::async(std::launch::async,
                           [&] { return check_transversality_and_max(cert, prob, opts); });
    primal = check_primal(cert, prob);
    slack = check_slackness(cert, prob, opts.active_tol);
    adj = f_adj.get();
    ep = f_ep.get();
  } else {
    primal = check_primal(cert, prob);
    adj = check_adjoint(cert, prob, opts);
    slack = check_slackness(cert, prob, opts.active_tol);
    ep = check_transversality_and_max(cert, prob, opts);
  }
  const auto [sa, sb] = slack;
  const double k = opts.tol_scale;
  ResidualReport rep;
  auto add = [&](const std::string& name, double v, double tol) {
    rep.items.push_back({name, v, tol * k, std::isfinite(v) && v <= tol * k});
  };
  add("primal_dynamics", primal, opts.tol_primal);
  add("nontriviality", ep.nontriviality, opts.tol_nontriviality);
  add("adjoint", adj, opts.tol_adjoint);
  add("slack_a", sa, opts.tol_slack_a);
  add("slack_b", sb, opts.tol_slack_b);
  add("transversality", ep.transversality, opts.tol_transversality);
  add("maximization", ep.maximization, opts.tol_maximization);
  rep.pass = std::all_of(rep.items.begin(), rep.items.end(), [](const Residual& r) { return r.pass; });
  return rep;
}

Mat fit_multipliers(const SweepingProblem& prob, const Grid& grid, const Mat& x, const Mat& u,
                    double active_tol) {
  const SweepingSet& S = prob.spec.set();
  const int n = prob.n(), r = S.count();
  Mat xi = Mat::Zero(r, grid.nodes());
  const Mat dx = node_derivatives(grid, x);
  for (int j = 0; j <= grid.N; ++j) {
    const Vec xj = x.col(j);
    const std::vector<int> act = active_set(S, xj, active_tol);
    if (act.empty()) continue;
    Mat G(n, static_cast<int>(act.size()));
    for (std::size_t k = 0; k < act.size(); ++k) G.col(static_cast<int>(k)) = grad_psi(S, act[k], xj);
    const Vec w = nnls(G, prob.spec.drift(grid.t(j), xj, u.col(j)) - dx.col(j));
    for (std::size_t k = 0; k < act.size(); ++k) xi(act[k], j) = w[static_cast<int>(k)];
  }
  return xi;
}

void normalize_certificate(PmpCertificate& cert) {
  const double s = cert.p.col(cert.grid.N).norm() + cert.lambda;
  if (!(s >= 1e-12)) throw DegenerateNormalization();
  cert.p /= s;
  for (Jump& jp : cert.p_jumps) jp.dp /= s;
  for (AdjointMeasure& mu : cert.nu) {
    mu.density /= s;
    for (Atom& a : mu.atoms) a.weight /= s;
  }
  cert.lambda /= s;
}

PmpCertificate extract_certificate(const SolveResult& result, const SweepingProblem& prob,
                                   const SolveConfig& cfg, const CertificateOptions& opts) {
  const Grid grid = result.trajectory.grid;
  const int N = grid.N, n = prob.n();
  const SweepingSet& S = prob.spec.set();
  const int r = S.count();
  const Vec x0 = prob.C0.kind == InitialSet::Kind::Point ? prob.C0.point : result.x0;

  AdjointOptions ao;
  ao.beta = cfg.beta;
  if (cfg.u_ref) ao.u_ref = &*cfg.u_ref;
  ao.substeps = opts.adjoint_substeps;
  if (result.center.size() > 0 && cfg.K_tilde != 0.0) {
    const Mat center = result.center;
    const double K = cfg.K_tilde, delta = prob.delta;
    ao.lambda = 1.0;
    ao.omega = [center, grid, K, delta](double t, const Vec& x) -> Vec {
      const Vec d = x - interp(grid, center, t);
      if (d.squaredNorm() <= 0.25 * delta * delta) return Vec::Zero(x.size());
      return 2.0 * K * d;
    };
  }

  // State from the control, adjoint from the penalized trajectory with the
  // terminal value taken at the state's endpoint.
  auto build = [&](const ControlSignal& control) {
    PmpCertificate cert;
    cert.grid = grid;
    cert.u = Mat(control.dim(), N + 1);
    for (int j = 0; j <= N; ++j) cert.u.col(j) = control.cell(std::min(j, N - 1));
    cert.x = integrate_catching_up(prob.spec, x0, control, opts.oracle_substeps).x;
    cert.xi = fit_multipliers(prob, grid, cert.x, cert.u, opts.active_tol);

    const Vec xT = cert.x.col(N);
    Vec pT = -prob.cost_gradient(cert.x.col(0), xT).second;
    if (result.terminal_multiplier.size() > 0 && prob.CT.kind != TerminalSet::Kind::All) {
      pT -= prob.CT.gradients(xT) * result.terminal_multiplier;
    }
    const AdjointPath adj = integrate_adjoint(prob.spec, result.gamma, result.trajectory,
                                              result.control, pT, ao);
    cert.p = adj.p;
    MeasureOptions mo = opts.measures;
    mo.snap_to_ends = true;
    cert.nu = accumulate_measures(adj.density, adj.cell_mass, grid, mo);

    // Atoms of the measures show up as jumps of p.
    std::vector<double> times;
    for (const AdjointMeasure& mu : cert.nu) {
      for (const Atom& a : mu.atoms) times.push_back(a.t);
    }
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end(),
                            [&](double a, double b) { return std::abs(a - b) <= jump_eps(grid); }),
                times.end());
    for (double t : times) {
      const Vec x = interp(grid, cert.x, t);
      if (std::abs(t - grid.T) <= jump_eps(grid) && N >= 2) {
        // Terminal atoms are refit so that the jump matches p(T) minus the
        // left limit extrapolated from the last two nodes.
        std::vector<int> act;
        for (int i = 0; i < r; ++i) {
          for (const Atom& a : cert.nu[i].atoms) {
            if (std::abs(a.t - t) <= jump_eps(grid)) act.push_back(i);
          }
        }
        Mat G(n, static_cast<int>(act.size()));
        for (std::size_t k = 0; k < act.size(); ++k) G.col(static_cast<int>(k)) = grad_psi(S, act[k], x);
        const Vec left = 2.0 * cert.p.col(N - 1) - cert.p.col(N - 2);
        const Vec w = nnls(G, cert.p.col(N) - left);
        for (std::size_t k = 0; k < act.size(); ++k) {
          for (Atom& a : cert.nu[act[k]].atoms) {
            if (std::abs(a.t - t) <= jump_eps(grid)) a.weight = w[static_cast<int>(k)];
          }
        }
      }
      Vec dp = Vec::Zero(n);
      for (int i = 0; i < r; ++i) {
        for (const Atom& a : cert.nu[i].atoms) {
          if (std::abs(a.t - t) <= jump_eps(grid)) dp += grad_psi(S, i, x) * a.weight;
        }
      }
      cert.p_jumps.push_back({t, dp});
    }
    return cert;
  };

  PmpCertificate cert = build(result.control);

  // Cells whose control sits close to a Hamiltonian maximizer are moved onto
  // it; the solved control is only accurate to the discretization.
  if (opts.polish_band > 0.0) {
    const std::vector<Vec> cands = control_candidates(prob.U, opts.control_samples, opts.seed);
    const Vec width = prob.U.hi - prob.U.lo;
    ControlSignal polished = result.control;
    bool changed = false;
    for (int j = 0; j < N; ++j) {
      const Vec pl = cert.p.col(j);
      const Vec x = cert.x.col(j);
      const double t = grid.t(j);
      const Vec u = polished.cell(j);
      double best = prob.spec.drift(t, x, u).dot(pl);
      Vec arg = u;
      for (const Vec& v : cands) {
        const double h = prob.spec.drift(t, x, v).dot(pl);
        if (h > best) best = h, arg = v;
      }
      const double dist = ((arg - u).cwiseAbs().array() /
                           width.array().max(1e-300)).maxCoeff();
      if (dist > 0.0 && dist <= opts.polish_band) {
        polished.values().col(j) = arg;
        changed = true;
      }
    }
    if (changed) cert = build(polished);
  }

  cert.lambda = 1.0;
  if (prob.CT.kind != TerminalSet::Kind::All) normalize_certificate(cert);
  return cert;
}

}  // namespace sweep
