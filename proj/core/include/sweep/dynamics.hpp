#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "sweep/sweepset.hpp"

namespace sweep {

/// Uniform grid t_j = j T / N, j = 0..N. N = 0 is allowed only when T = 0.
struct Grid {
  double T = 1.0;
  int N = 1;

  double h() const { return N > 0 ? T / N : 0.0; }
  double t(int j) const { return N > 0 ? T * j / N : 0.0; }
  int nodes() const { return N + 1; }
  /// Cell index containing t (clamped to 0..N-1).
  int cell(double t) const;
  bool operator==(const Grid& o) const { return T == o.T && N == o.N; }
};

struct ControlBox {
  Vec lo;
  Vec hi;

  int dim() const { return static_cast<int>(lo.size()); }
  Vec clamp(const Vec& u) const { return u.cwiseMax(lo).cwiseMin(hi); }
  bool contains(const Vec& u, double tol = 0.0) const;
};

/// Piecewise constant control, one value per grid cell.
class ControlSignal {
 public:
  ControlSignal(Grid grid, Mat values);  // values: m x N
  static ControlSignal constant(Grid grid, const Vec& u);

  const Grid& grid() const { return grid_; }
  int dim() const { return static_cast<int>(values_.rows()); }
  Vec cell(int j) const { return values_.col(j); }
  Vec at(double t) const { return values_.col(grid_.cell(t)); }
  const Mat& values() const { return values_; }
  Mat& values() { return values_; }
  bool within(const ControlBox& U, double tol = 0.0) const;

 private:
  Grid grid_;
  Mat values_;
};

struct Trajectory {
  Grid grid;
  Mat x;   // n x (N+1)
  Mat xi;  // r x (N+1), nonnegative multiplier samples
  std::vector<int> substeps;  // accepted substeps per cell
  double max_penalty = 0.0;   // largest multiplier met at any substep

  Vec state(int j) const { return x.col(j); }
};

/// Drift f - grad Phi of the perturbed sweeping process together with the
/// sweeping set and the drift bound Mbar.
class DynamicsSpec {
 public:
  DynamicsSpec(std::vector<ScalarField> f, ScalarField phi, SweepingSet set, double T,
               double Mbar = 0.0);

  int state_dim() const { return set_.dim(); }
  int control_dim() const { return m_; }
  double T() const { return T_; }
  double Mbar() const { return Mbar_; }
  const SweepingSet& set() const { return set_; }
  const std::vector<ScalarField>& f() const { return f_; }
  const ScalarField& phi() const { return phi_; }

  DynamicsSpec with_Mbar(double Mbar) const;
  DynamicsSpec with_set(SweepingSet set) const;

  Vec drift(double t, const Vec& x, const Vec& u) const;
  /// d(drift)/dx.
  Mat drift_jac_x(double t, const Vec& x, const Vec& u) const;
  /// d(drift)/du.
  Mat drift_jac_u(double t, const Vec& x, const Vec& u) const;
  /// Hessian of Phi.
  Mat phi_hessian(const Vec& x) const;

 private:
  std::vector<ScalarField> f_;
  ScalarField phi_;
  SweepingSet set_;
  double T_;
  double Mbar_;
  int m_;
};

/// Penalty force sum_i xi_i grad psi_i with xi_i = gamma exp(gamma psi_i) and
/// its Jacobian sum_i (gamma xi_i g_i g_i' + xi_i Hess psi_i).
struct PenaltyTerms {
  Vec xi;
  Vec force;
  Mat jac;
};

PenaltyTerms penalty_terms(const SweepingSet& S, double gamma, const Vec& x, bool with_jacobian);

struct PenalizedOptions {
  double rtol = 1e-6;
  double atol = 1e-8;
  double h_min_factor = 1e-9;
  /// Negative: 1e-6 (1 + 2 Mbar / eta).
  double inv_tol = -1.0;
  /// When set and x0 lies in the shrunken level set {psi_gamma <= -alpha},
  /// invariance of that level set is asserted instead of psi_gamma <= 0.
  std::optional<double> alpha;
  bool check_invariance = true;
};

double default_inv_tol(const DynamicsSpec& spec);

/// Linearly implicit two-stage Rosenbrock integration of the penalized
/// system with embedded error control. Throws StepFailure or
/// InvarianceViolation.
Trajectory integrate_penalized(const DynamicsSpec& spec, double gamma, const Vec& x0,
                               const ControlSignal& u, const PenalizedOptions& opts = {});

/// Moreau catching-up scheme x+ = proj_C(x + h drift). `substeps` steps per
/// control cell. Multipliers are the projection KKT coefficients over h,
/// recorded at the node a step lands on. Throws ProjectionFailure.
Trajectory integrate_catching_up(const DynamicsSpec& spec, const Vec& x0, const ControlSignal& u,
                                 int substeps = 1);

struct PathDistance {
  double sup = 0.0;
  double l2 = 0.0;
};

/// Throws GridMismatch.
PathDistance compare_to_oracle(const Trajectory& a, const Trajectory& b);

/// Distance of a trajectory to a reference path t -> x(t).
PathDistance distance_to_path(const Trajectory& a, const std::function<Vec(double)>& ref);

// ---- adjoint ------------------------------------------------------------------

struct AdjointOptions {
  double beta = 1.0;
  double lambda = 0.0;
  /// Reference control for the convexified drift; defaults to u.
  const ControlSignal* u_ref = nullptr;
  /// Selected element of the localization subgradient, already weighted.
  std::function<Vec(double t, const Vec& x)> omega;
  int substeps = 10;
};

struct AdjointPath {
  Grid grid;
  Mat p;          // n x (N+1)
  Mat density;    // r x (N+1) node values of gamma xi_i <grad psi_i, p>
  Mat cell_mass;  // r x N integrals of the densities over each cell
};

/// Backward implicit Euler for the linear adjoint system along a penalized
/// trajectory (state linearly interpolated inside cells).
AdjointPath integrate_adjoint(const DynamicsSpec& spec, double gamma, const Trajectory& traj,
                              const ControlSignal& u, const Vec& pT, const AdjointOptions& opts = {});

struct Atom {
  double t = 0.0;
  double weight = 0.0;
};

/// Signed measure: density at grid nodes (trapezoid rule) plus atoms.
struct AdjointMeasure {
  Grid grid;
  Vec density;
  std::vector<Atom> atoms;

  double ac_mass() const;
  double total_mass() const;
  double total_variation() const;
};

struct MeasureOptions {
  double atom_thresh = 0.05;
  double spike_thresh = 10.0;
  /// A run of spike cells touching t = 0 or t = T is placed at that end
  /// point instead of the run midpoint.
  bool snap_to_ends = false;
};

/// Splits each density into an absolutely continuous part and atoms.
/// `cell_mass` (r x N) may be empty, in which case cell integrals come from
/// the trapezoid rule on `density` (r x (N+1)).
std::vector<AdjointMeasure> accumulate_measures(const Mat& density, const Mat& cell_mass,
                                                const Grid& grid, const MeasureOptions& opts = {});

}  // namespace sweep
