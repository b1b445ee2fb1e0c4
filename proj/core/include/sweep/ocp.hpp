#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sweep/dynamics.hpp"

namespace sweep {

struct InitialSet {
  enum class Kind { Point, Sublevel };
  Kind kind = Kind::Point;
  Vec point;
  std::vector<ScalarField> psi;  // over x1..xn
};

struct TerminalSet {
  enum class Kind { All, Affine, Sublevel };
  Kind kind = Kind::All;
  Vec a;  // affine: <a, x> = b
  double b = 0.0;
  std::vector<ScalarField> psi;  // sublevel: psi_j(x) <= 0

  /// Constraint values (affine: one residual, sublevel: one per field).
  Vec values(const Vec& x) const;
  /// Columns are constraint gradients.
  Mat gradients(const Vec& x) const;
  /// Euclidean size of the violation.
  double violation(const Vec& x) const;
};

struct SweepingProblem {
  std::string name;
  DynamicsSpec spec;
  ScalarField g;  // over (x(0), x(T)) as x1..x2n
  InitialSet C0;
  TerminalSet CT;
  ControlBox U;
  double delta = 1.0;

  int n() const { return spec.state_dim(); }
  int m() const { return spec.control_dim(); }
  double T() const { return spec.T(); }
  /// g and its gradient split into the x(0) and x(T) blocks.
  double cost(const Vec& x0, const Vec& xT) const;
  std::pair<Vec, Vec> cost_gradient(const Vec& x0, const Vec& xT) const;
};

enum class Optimizer { ProjectedGradient, LBFGS };

struct SolveConfig {
  explicit SolveConfig(PenaltySchedule s) : schedule(std::move(s)) {}

  PenaltySchedule schedule;
  int N = 200;
  int substeps = 1;  // transcription steps per control cell
  double beta = 1.0;
  std::optional<ControlSignal> u_ref;  // used when beta < 1
  double alpha_prox = 0.0;
  double K_tilde = 100.0;
  Optimizer optimizer = Optimizer::LBFGS;
  int lbfgs_memory = 12;
  int max_outer = 20;
  int max_inner = 400;
  double grad_tol = 1e-7;    // on || P(u - g/h) - u ||_inf
  double feas_tol = 1e-7;    // terminal constraint
  // Looser targets for every penalty level but the last.
  double stage_grad_tol = 1e-4;
  double stage_feas_tol = 1e-5;
  double infeasible_tol = 1e-4;  // final residual above this raises TerminalInfeasible
  double rho0 = 10.0;        // initial augmented Lagrangian weight
  int adjoint_substeps = 10;
  int certificate_substeps = 8;
  std::function<void(const std::string&)> log;
  // Called with the objective after every accepted inner step; iteration 0
  // marks the start of an inner solve (fresh multipliers or center).
  std::function<void(double gamma, int iteration, double value)> on_iterate;
};

struct GammaLog {
  double gamma = 0.0;
  double J = 0.0;
  int iterations = 0;
  int evaluations = 0;
  int outer = 0;
  double pg_norm = 0.0;
  double terminal_residual = 0.0;
};

struct SolveResult {
  Trajectory trajectory;  // transcription states at the control grid, final gamma
  ControlSignal control;
  Vec x0;
  double gamma = 0.0;
  double J = 0.0;          // cost + localization + proximal terms
  double objective = 0.0;  // J plus augmented Lagrangian terms
  std::vector<GammaLog> log;
  double terminal_residual = 0.0;
  Vec terminal_multiplier;  // gradient multiplier of the terminal constraint(s)
  Mat center;               // localization center used at the final gamma
  Mat p;                    // discrete adjoint (negative objective sensitivity), n x (N+1)
};

/// Objective of the discretized approximating problem for a fixed penalty
/// level. Evaluates J and its exact gradient with respect to the controls
/// (and x(0) when C0 is a sublevel set) through the discrete adjoint.
class Transcription {
 public:
  Transcription(const SweepingProblem& prob, const SolveConfig& cfg, double gamma, Grid grid);

  struct Eval {
    double value = 0.0;  // full objective including augmented Lagrangian terms
    double J = 0.0;      // cost + K int L + proximal
    Mat grad_u;          // m x N
    Vec grad_x0;         // n
    Mat x;               // n x (N+1) at the control grid
    Mat a;               // objective sensitivity at the control grid nodes
    double terminal_residual = 0.0;
    Vec terminal_values;
  };

  Eval evaluate(const ControlSignal& u, const Vec& x0, bool with_gradient) const;

  void set_center(Mat center) { center_ = std::move(center); }
  void set_incumbent(std::optional<ControlSignal> u) { incumbent_ = std::move(u); }
  void set_multipliers(Vec mu, double rho) {
    mu_ = std::move(mu);
    rho_ = rho;
  }
  const Vec& multipliers() const { return mu_; }
  double rho() const { return rho_; }
  /// Gradient multiplier of the terminal constraint at a terminal state.
  Vec effective_multiplier(const Vec& xT) const;
  double gamma() const { return gamma_; }
  const Grid& grid() const { return grid_; }
  /// True when some node of x sits on or beyond the localization radius.
  bool at_localization_edge(const Mat& x) const;

  /// Solves x = y - h grad V(x) for V = sum exp(gamma psi_i).
  Vec prox_step(const Vec& y, const Vec& guess, double h) const;

 private:
  const SweepingProblem& prob_;
  const SolveConfig& cfg_;
  double gamma_;
  Grid grid_;
  Mat center_;
  std::optional<ControlSignal> incumbent_;
  Vec mu_;
  double rho_ = 10.0;
};

double localization(const Vec& x, const Vec& center, double delta);

/// Mayer cost plus K int L plus proximal term for a given trajectory.
double objective_J(const SweepingProblem& prob, const Trajectory& traj, const ControlSignal& u,
                   double K_tilde, double alpha_prox = 0.0, const Mat* center = nullptr,
                   const ControlSignal* incumbent = nullptr);

/// Start state for penalty level k: the C0 point, shifted into the shrunken
/// set when it is not already inside.
Vec initial_state(const SweepingProblem& prob, const PenaltySchedule& sched, int k,
                  const std::optional<Vec>& guess = std::nullopt);

SolveResult solve(const SweepingProblem& prob, const SolveConfig& cfg, const ControlSignal& u_init);

struct GradientCheck {
  double adjoint = 0.0;
  double fd = 0.0;
  double rel_gap() const;
};

/// Directional derivative of the transcription objective at the last
/// schedule entry: adjoint versus central differences.
GradientCheck gradient_check(const SweepingProblem& prob, const SolveConfig& cfg,
                             const ControlSignal& u, const ControlSignal& direction);

}  // namespace sweep
