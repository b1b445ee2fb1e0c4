#pragma once

// Grid-resolution checks of the maximum principle for the sweeping problem.

#include <cstdint>
#include <string>
#include <vector>

#include "sweep/ocp.hpp"

namespace sweep {

struct Jump {
  double t = 0.0;
  Vec dp;
};

struct PmpCertificate {
  Grid grid;
  Mat x;   // n x (N+1)
  Mat u;   // m x (N+1), control value at each node
  Mat p;   // n x (N+1), right-continuous samples
  std::vector<Jump> p_jumps;
  std::vector<AdjointMeasure> nu;  // one per constraint
  Mat xi;                          // r x (N+1)
  double lambda = 0.0;

  /// p at node j with jumps located exactly at t_j removed.
  Vec p_left(int j) const;
  /// Throws GridMismatch when array shapes disagree with the grid.
  void validate(int n, int m, int r) const;
};

struct Residual {
  std::string name;
  double value = 0.0;
  double tol = 0.0;
  bool pass = false;
};

struct ResidualReport {
  std::vector<Residual> items;  // fixed order, see residual_names()
  bool pass = false;

  const Residual& get(const std::string& name) const;
};

const std::vector<std::string>& residual_names();

struct VerifyOptions {
  double tol_primal = 5e-3;
  double tol_adjoint = 1e-2;
  double tol_slack_a = 1e-6;
  double tol_slack_b = 1e-3;
  double tol_transversality = 1e-6;
  double tol_nontriviality = 1e-6;
  double tol_maximization = 1e-6;
  double tol_scale = 1.0;
  double active_tol = 1e-6;
  std::uint64_t seed = 0;
  int random_tests = 16;
  int control_samples = 21;  // per control dimension
  int threads = 1;           // > 1 runs the condition groups concurrently
};

double check_primal(const PmpCertificate& cert, const SweepingProblem& prob);
double check_adjoint(const PmpCertificate& cert, const SweepingProblem& prob,
                     const VerifyOptions& opts = {});
std::pair<double, double> check_slackness(const PmpCertificate& cert, const SweepingProblem& prob,
                                          double active_tol = 1e-6);

struct EndpointResiduals {
  double transversality = 0.0;
  double maximization = 0.0;
  double nontriviality = 0.0;
};

/// Throws UnsupportedSetDescriptor.
EndpointResiduals check_transversality_and_max(const PmpCertificate& cert,
                                               const SweepingProblem& prob,
                                               const VerifyOptions& opts = {});

ResidualReport verify(const PmpCertificate& cert, const SweepingProblem& prob,
                      const VerifyOptions& opts = {});

struct CertificateOptions {
  int adjoint_substeps = 10;
  int oracle_substeps = 8;
  double active_tol = 1e-6;
  MeasureOptions measures;
  // Cells within this fraction of the box width of a Hamiltonian maximizer
  // are moved onto it. Zero disables.
  double polish_band = 0.05;
  int control_samples = 21;
  std::uint64_t seed = 0;
};

/// Packages a solve into a certificate: the state is the sweeping process
/// driven by the solved control, p and the measures come from the adjoint
/// along the penalized trajectory, normalized so ||p(T)|| + lambda = 1
/// (lambda = 1 when the terminal set is the whole space).
/// Throws DegenerateNormalization.
PmpCertificate extract_certificate(const SolveResult& result, const SweepingProblem& prob,
                                   const SolveConfig& cfg, const CertificateOptions& opts = {});

/// Rescales p, the measures and lambda so that ||p(T)|| + lambda = 1.
/// Throws DegenerateNormalization when that sum is below 1e-12.
void normalize_certificate(PmpCertificate& cert);

/// Fits xi >= 0 on active constraints so that the primal equation holds as
/// well as possible at every node (central differences).
Mat fit_multipliers(const SweepingProblem& prob, const Grid& grid, const Mat& x, const Mat& u,
                    double active_tol);

}  // namespace sweep
