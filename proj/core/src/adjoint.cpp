#include <Eigen/LU>
#include <algorithm>
#include <cmath>

#include "sweep/dynamics.hpp"
#include "sweep/errors.hpp"

namespace sweep {

AdjointPath integrate_adjoint(const DynamicsSpec& spec, double gamma, const Trajectory& traj,
                              const ControlSignal& u, const Vec& pT, const AdjointOptions& opts) {
  const Grid grid = traj.grid;
  if (!(u.grid() == grid)) throw GridMismatch();
  if (opts.u_ref && !(opts.u_ref->grid() == grid)) throw GridMismatch();
  const SweepingSet& S = spec.set();
  const int n = spec.state_dim(), r = S.count();
  const int K = std::max(1, opts.substeps);
  const double hs = grid.h() / K;

  AdjointPath out;
  out.grid = grid;
  out.p = Mat(n, grid.nodes());
  out.density = Mat(r, grid.nodes());
  out.cell_mass = Mat::Zero(r, std::max(grid.N, 0));

  auto densities = [&](const Vec& x, const Vec& p) {
    Vec d(r);
    for (int i = 0; i < r; ++i) {
      FieldEval e = S.field(i).eval(x, 1);
      d[i] = gamma * gamma * std::exp(gamma * e.value) * e.grad->dot(p);
    }
    return d;
  };

  Vec p = pT;
  out.p.col(grid.N) = p;
  out.density.col(grid.N) = densities(traj.x.col(grid.N), p);

  for (int j = grid.N - 1; j >= 0; --j) {
    const Vec uj = u.cell(j);
    const Vec uref = opts.u_ref ? opts.u_ref->cell(j) : uj;
    Vec dens = Vec::Zero(r);
    for (int s = K - 1; s >= 0; --s) {
      const double frac = static_cast<double>(s) / K;
      const double tau = grid.t(j) + s * hs;
      const Vec x = (1.0 - frac) * traj.x.col(j) + frac * traj.x.col(j + 1);
      Mat J = spec.drift_jac_x(tau, x, uj);
      if (opts.beta != 1.0) J = opts.beta * J + (1.0 - opts.beta) * spec.drift_jac_x(tau, x, uref);
      Mat A = -J.transpose() + penalty_terms(S, gamma, x, true).jac;
      Vec rhs = p;
      if (opts.lambda != 0.0 && opts.omega) rhs -= hs * opts.lambda * opts.omega(tau, x);
      p = Eigen::PartialPivLU<Mat>(Mat::Identity(n, n) + hs * A).solve(rhs);
      if (!p.allFinite()) throw StepFailure(tau);
      dens = densities(x, p);
      out.cell_mass.col(j) += hs * dens;
    }
    out.p.col(j) = p;
    out.density.col(j) = dens;
  }
  return out;
}

// ---- measures ---------------------------------------------------------------

double AdjointMeasure::ac_mass() const {
  double s = 0.0;
  for (int j = 0; j < grid.N; ++j) s += 0.5 * grid.h() * (density[j] + density[j + 1]);
  return s;
}

double AdjointMeasure::total_mass() const {
  double s = ac_mass();
  for (const Atom& a : atoms) s += a.weight;
  return s;
}

double AdjointMeasure::total_variation() const {
  double s = 0.0;
  for (int j = 0; j < grid.N; ++j) {
    s += 0.5 * grid.h() * (std::abs(density[j]) + std::abs(density[j + 1]));
  }
  for (const Atom& a : atoms) s += std::abs(a.weight);
  return s;
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

}  // namespace

std::vector<AdjointMeasure> accumulate_measures(const Mat& density, const Mat& cell_mass,
                                                const Grid& grid, const MeasureOptions& opts) {
  const int r = static_cast<int>(density.rows());
  const int N = grid.N;
  const double h = grid.h();
  if (density.cols() != grid.nodes()) throw GridMismatch();
  if (cell_mass.size() > 0 && (cell_mass.rows() != r || cell_mass.cols() != N)) throw GridMismatch();

  std::vector<AdjointMeasure> out;
  for (int i = 0; i < r; ++i) {
    AdjointMeasure mu;
    mu.grid = grid;
    mu.density = density.row(i).transpose();

    Vec c(N);
    for (int j = 0; j < N; ++j) {
      c[j] = cell_mass.size() > 0 ? cell_mass(i, j) : 0.5 * h * (density(i, j) + density(i, j + 1));
    }
    const double tv = c.cwiseAbs().sum();
    if (!(tv > 0.0) || N == 0) {
      out.push_back(std::move(mu));
      continue;
    }
    std::vector<double> avg(static_cast<std::size_t>(N));
    for (int j = 0; j < N; ++j) avg[static_cast<std::size_t>(j)] = std::abs(c[j]) / h;
    const double spike = opts.spike_thresh * median(avg);
    // Second differences locate the edges of a boundary layer: they are
    // O(h^2) on the smooth part and of the order of the layer height inside it.
    std::vector<double> d2(static_cast<std::size_t>(N + 1), 0.0);
    for (int k = 1; k < N; ++k) {
      d2[static_cast<std::size_t>(k)] = std::abs(density(i, k - 1) - 2.0 * density(i, k) + density(i, k + 1));
    }
    const double curv = opts.spike_thresh * median(std::vector<double>(d2.begin() + 1, d2.end() - 1)) +
                        1e-12 * density.row(i).cwiseAbs().maxCoeff();

    // A run of spike cells is an atom when the run as a whole carries enough
    // mass; a resolved boundary layer spreads an atom over many cells.
    std::vector<bool> flag(static_cast<std::size_t>(N), false);
    for (int j = 0; j < N; ++j) flag[static_cast<std::size_t>(j)] = avg[static_cast<std::size_t>(j)] > spike;
    int floor_node = 0;
    for (int j = 0; j < N;) {
      if (!flag[static_cast<std::size_t>(j)]) {
        ++j;
        continue;
      }
      int k = j;
      double w = 0.0;
      while (k < N && flag[static_cast<std::size_t>(k)]) w += c[k++];
      if (std::abs(w) <= opts.atom_thresh * tv) {
        j = k;
        continue;
      }
      const int next = k;
      // Widen the run over the tails of the layer.
      int a = j, b = k;
      while (a > floor_node && d2[static_cast<std::size_t>(a)] > curv) --a;
      while (b < N && d2[static_cast<std::size_t>(b)] > curv) {
        ++b;
        if (b < N && flag[static_cast<std::size_t>(b)]) break;
      }
      // Absolutely continuous part across the run: interpolate between the
      // regular nodes on either side, or extrapolate linearly at an end.
      auto base = [&](int node) {
        if (a > 0 && b < N) {
          const double s = static_cast<double>(node - a) / (b - a);
          return (1.0 - s) * density(i, a) + s * density(i, b);
        }
        if (b < N) {
          const double slope = b + 1 <= N ? density(i, b + 1) - density(i, b) : 0.0;
          return density(i, b) - (b - node) * slope;
        }
        if (a > 0) {
          const double slope = density(i, a) - density(i, a - 1);
          return density(i, a) + (node - a) * slope;
        }
        return 0.0;
      };
      double mass = 0.0, ac = 0.0;
      for (int cell = a; cell < b; ++cell) {
        mass += c[cell];
        ac += 0.5 * h * (base(cell) + base(cell + 1));
      }
      for (int node = a; node <= b; ++node) {
        if ((node == a && a > 0) || (node == b && b < N)) continue;
        mu.density[node] = base(node);
      }
      double at = 0.5 * (grid.t(j) + grid.t(k));
      if (opts.snap_to_ends && b == N) at = grid.T;
      if (opts.snap_to_ends && a == 0 && b < N) at = 0.0;
      mu.atoms.push_back({at, mass - ac});
      floor_node = b;
      j = std::max(next, b);
    }
    out.push_back(std::move(mu));
  }
  return out;
}

}  // namespace sweep
