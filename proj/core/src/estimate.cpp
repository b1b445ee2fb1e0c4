#include "sweep/estimate.hpp"

#include <algorithm>
#include <cmath>

#include "sweep/errors.hpp"

namespace sweep {

namespace {

std::uint64_t splitmix(std::uint64_t& s) {
  std::uint64_t z = (s += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double gauss(std::uint64_t& s) {
  double u1 = std::max(uniform01(s), 1e-300);
  double u2 = uniform01(s);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

Vec random_unit(int n, std::uint64_t& s) {
  Vec d(n);
  for (int i = 0; i < n; ++i) d[i] = gauss(s);
  double nn = d.norm();
  return nn > 0 ? Vec(d / nn) : Vec(Vec::Unit(n, 0));
}

}  // namespace

double uniform01(std::uint64_t& state) {
  return static_cast<double>(splitmix(state) >> 11) * (1.0 / 9007199254740992.0);
}

Vec sample_ball(const Region& region, std::uint64_t& state) {
  const int n = static_cast<int>(region.center.size());
  Vec d = random_unit(n, state);
  double rad = region.radius * std::pow(uniform01(state), 1.0 / n);
  return region.center + rad * d;
}

std::vector<Vec> sample_boundary(const SweepingSet& S, const Region& region, int count,
                                 std::uint64_t seed) {
  std::uint64_t st = seed * 0xD1B54A32D192ED03ULL + 11;
  std::vector<Vec> out;
  const int n = S.dim();
  for (int attempt = 0; attempt < 40 * count && static_cast<int>(out.size()) < count; ++attempt) {
    Vec y = sample_ball(region, st);
    double m = psi_max(S, y);
    if (m > 0.0) {
      try {
        Projection pr = project_onto_C(S, y, 1e-12, 60);
        if ((pr.z - region.center).norm() <= 2.0 * region.radius) out.push_back(pr.z);
      } catch (const Error&) {
      }
      continue;
    }
    // Interior: march outward to a sign change then bisect.
    Vec d = random_unit(n, st);
    double lo = 0.0, hi = region.radius / 8;
    bool found = false;
    for (int k = 0; k < 8; ++k) {
      if (psi_max(S, y + hi * d) > 0.0) {
        found = true;
        break;
      }
      lo = hi;
      hi *= 2.0;
    }
    if (!found) continue;
    for (int k = 0; k < 80; ++k) {
      double mid = 0.5 * (lo + hi);
      (psi_max(S, y + mid * d) > 0.0 ? hi : lo) = mid;
    }
    Vec z = y + lo * d;
    if ((z - region.center).norm() <= 2.0 * region.radius) out.push_back(z);
  }
  return out;
}

SetEstimate estimate_set_constants(const SweepingSet& S, const Region& region, int count,
                                   std::uint64_t seed) {
  SetEstimate est;
  std::vector<Vec> bnd = sample_boundary(S, region, count, seed);
  est.boundary_samples = static_cast<int>(bnd.size());
  est.a22 = check_A22(S, bnd);
  double gmax = 0.0;
  for (const Vec& x : bnd) gmax = std::max(gmax, S.gradients(x).colwise().norm().maxCoeff());
  std::uint64_t st = seed + 0x51ED;
  for (int s = 0; s < count; ++s) {
    Vec x = sample_ball(region, st);
    if (psi_max(S, x) <= 0.0) gmax = std::max(gmax, S.gradients(x).colwise().norm().maxCoeff());
  }
  est.max_grad = gmax;
  est.constants.eta = est.a22.eta_hat;
  est.constants.Mbar_psi = std::max(1.1 * gmax, 2.0 * est.constants.eta);
  est.constants.rho = S.constants().rho;
  return est;
}

double estimate_drift_bound(const SweepingSet& S, const Region& region, double T, const Vec& lo,
                            const Vec& hi, int count, std::uint64_t seed, const DriftFn& f_phi) {
  std::uint64_t st = seed * 0x9E3779B97F4A7C15ULL + 7;
  const int m = static_cast<int>(lo.size());
  const int corners = 1 << std::min(m, 6);
  double best = 0.0;
  auto consider = [&](const Vec& x) {
    double t = T * uniform01(st);
    Vec u(m);
    for (int c = 0; c < corners; ++c) {
      for (int j = 0; j < m; ++j) {
        u[j] = j < 6 ? (((c >> j) & 1) ? hi[j] : lo[j]) : lo[j] + uniform01(st) * (hi[j] - lo[j]);
      }
      best = std::max(best, f_phi(t, x, u).norm());
    }
    for (int j = 0; j < m; ++j) u[j] = lo[j] + uniform01(st) * (hi[j] - lo[j]);
    best = std::max(best, f_phi(t, x, u).norm());
  };
  int taken = 0;
  for (int s = 0; s < 40 * count && taken < count; ++s) {
    Vec x = sample_ball(region, st);
    if (psi_max(S, x) > 0.0) continue;
    consider(x);
    ++taken;
  }
  for (const Vec& x : sample_boundary(S, region, std::max(8, count / 4), seed + 1)) consider(x);
  return 1.1 * std::max(best, 1e-12);
}

std::vector<Vec> recession_directions(const SweepingSet& S, const Vec& origin, int rays,
                                      double reach, std::uint64_t seed) {
  std::uint64_t st = seed * 0xA24BAED4963EE407ULL + 3;
  std::vector<Vec> dirs;
  const int n = S.dim();
  std::vector<Vec> cands;
  for (int i = 0; i < n; ++i) {
    cands.push_back(Vec::Unit(n, i));
    cands.push_back(-Vec::Unit(n, i));
  }
  for (int k = 0; k < rays; ++k) cands.push_back(random_unit(n, st));
  for (const Vec& d : cands) {
    bool inside = true;
    for (double R = 1.0; R <= reach && inside; R *= 4.0) inside = psi_max(S, origin + R * d) <= 0.0;
    if (inside) dirs.push_back(d);
  }
  return dirs;
}

}  // namespace sweep
