#pragma once

// Sampling estimates of the constants the theory assumes exist.

#include <cstdint>
#include <functional>
#include <vector>

#include "sweep/sweepset.hpp"

namespace sweep {

/// Ball where estimates are taken.
struct Region {
  Vec center;
  double radius = 1.0;
};

/// Points of bdry C near the region: exterior samples are projected onto C
/// (this reaches corners with positive probability), interior samples are
/// pushed outward along random rays.
std::vector<Vec> sample_boundary(const SweepingSet& S, const Region& region, int count,
                                 std::uint64_t seed);

struct SetEstimate {
  SetConstants constants;
  A22Result a22;
  int boundary_samples = 0;
  double max_grad = 0.0;
};

/// eta from check_A22, Mbar_psi = 1.1 * max gradient norm over boundary and
/// interior samples (lifted to 2 eta if needed).
SetEstimate estimate_set_constants(const SweepingSet& S, const Region& region, int count,
                                   std::uint64_t seed);

/// 1.1 * sup ||f - grad Phi|| over samples of (C within the region) x U,
/// with U sampled at its corners and at random interior points.
using DriftFn = std::function<Vec(double t, const Vec& x, const Vec& u)>;
double estimate_drift_bound(const SweepingSet& S, const Region& region, double T, const Vec& lo,
                            const Vec& hi, int count, std::uint64_t seed, const DriftFn& f_phi);

/// Rays from `origin` along which every constraint stays satisfied out to
/// `reach` (evidence that C is unbounded). Returns the directions found.
std::vector<Vec> recession_directions(const SweepingSet& S, const Vec& origin, int rays,
                                      double reach, std::uint64_t seed);

Vec sample_ball(const Region& region, std::uint64_t& state);
double uniform01(std::uint64_t& state);

}  // namespace sweep
