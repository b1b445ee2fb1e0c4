#pragma once

// Geometry of C = { x : psi_i(x) <= 0 for all i }.

#include <optional>
#include <utility>
#include <vector>

#include "sweep/field.hpp"

namespace sweep {

inline constexpr double kFeasTol = 1e-9;

/// Constants attached to a sweeping set. Zero means "not yet estimated".
struct SetConstants {
  double eta = 0.0;       // half the distance from 0 to the hull of active gradients
  double Mbar_psi = 0.0;  // common gradient bound on C
  double rho = 1.0;       // smoothness margin
};

class SweepingSet {
 public:
  SweepingSet(std::vector<ScalarField> psi, SetConstants constants = {});

  int dim() const { return n_; }
  int count() const { return static_cast<int>(psi_.size()); }
  const ScalarField& field(int i) const { return psi_[static_cast<std::size_t>(i)]; }
  const std::vector<ScalarField>& fields() const { return psi_; }
  const SetConstants& constants() const { return constants_; }
  bool has_constants() const { return constants_.eta > 0.0 && constants_.Mbar_psi > 0.0; }

  /// Throws InvalidField when Mbar_psi < 2 eta.
  SweepingSet with_constants(SetConstants c) const;

  Vec values(const Vec& x) const;
  /// Columns are the gradients of psi_1..psi_r.
  Mat gradients(const Vec& x) const;

 private:
  std::vector<ScalarField> psi_;
  SetConstants constants_;
  int n_ = 0;
};

double psi_max(const SweepingSet& S, const Vec& x);

struct SmoothMax {
  double value = 0.0;  // (1/gamma) ln sum exp(gamma psi_i)
  Vec grad;
  Vec weights;  // softmax weights
  double max = 0.0;
};

SmoothMax psi_gamma(const SweepingSet& S, double gamma, const Vec& x);

class PenaltySchedule {
 public:
  /// Throws InvalidSchedule unless gammas are strictly increasing and every
  /// gamma exceeds 2 Mbar / eta.
  PenaltySchedule(std::vector<double> gammas, double Mbar, const SweepingSet& S);

  static std::vector<double> log_uniform(double lo, double hi, int steps);

  int size() const { return static_cast<int>(gammas_.size()); }
  double gamma(int k) const { return gammas_.at(static_cast<std::size_t>(k)); }
  double alpha(int k) const { return alpha_.at(static_cast<std::size_t>(k)); }
  double sigma(int k) const { return sigma_.at(static_cast<std::size_t>(k)); }
  double Mbar() const { return Mbar_; }
  const std::vector<double>& gammas() const { return gammas_; }

  /// alpha_k and sigma_k strictly decrease along the schedule. Holds once
  /// gamma_1 > 2 e Mbar / eta.
  bool monotone() const;

  static double alpha_of(double gamma, double Mbar, double eta);
  static double sigma_of(double gamma, double Mbar, const SetConstants& c, int r);

 private:
  std::vector<double> gammas_;
  std::vector<double> alpha_;
  std::vector<double> sigma_;
  double Mbar_;
};

enum class Membership { InCk, InCgamma, InC, Outside };

const char* membership_name(Membership m);

Membership level_membership(const SweepingSet& S, double gamma, double alpha, const Vec& x);
Membership level_membership(const SweepingSet& S, const PenaltySchedule& sched, int k,
                            const Vec& x);

/// Indices with -a <= psi_i(x) <= upper.
std::vector<int> active_set(const SweepingSet& S, const Vec& x, double a,
                            double upper = kFeasTol);

std::vector<std::pair<int, Vec>> normal_cone_rays(const SweepingSet& S, const Vec& x, double a);

struct A22Result {
  double eta_hat = 0.0;
  std::optional<Vec> witness;
  int used_samples = 0;
  bool pass = false;
};

/// Throws NoBoundarySamples when no sample has an active constraint.
A22Result check_A22(const SweepingSet& S, const std::vector<Vec>& boundary_samples,
                    double a = 1e-7);

struct A23Result {
  double b_hat = 0.0;
  bool pass = false;
};

/// Throws EmptyActiveSet.
A23Result check_A23(const SweepingSet& S, const Vec& x, double a);

/// Tangent direction pointing into C at a boundary point. Throws
/// NotOnBoundary or DegenerateCone.
Vec interior_direction(const SweepingSet& S, const Vec& c, double a = 1e-7);

SweepingSet augment_with_ball(const SweepingSet& S, const Vec& y0, double R0);

struct Projection {
  Vec z;
  Vec multipliers;  // KKT coefficients of the constraint gradients
  int iterations = 0;
  double stationarity = 0.0;
};

/// Euclidean projection onto { z : fields_i(z) + offsets_i <= 0 } by damped
/// SQP. Throws NoConvergence.
Projection project_onto_constraints(const std::vector<ScalarField>& fields, const Vec& offsets,
                                    const Vec& y, double tol = 1e-10, int max_iters = 50);

Projection project_onto_C(const SweepingSet& S, const Vec& y, double tol = 1e-10,
                          int max_iters = 50);

/// Point c + s d/|d| with the smallest s in (0, sigma] (extended by doubling
/// when needed) that lies in C^gamma(k). Returns c itself if already there.
Vec shifted_start(const SweepingSet& S, double gamma, double alpha, double sigma, const Vec& c);

}  // namespace sweep
