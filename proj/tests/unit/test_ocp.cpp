#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <string>

#include "support.hpp"
#include "sweep/errors.hpp"
#include "sweep/ocp.hpp"
#include "sweep/pmp.hpp"
#include "sweepcli/problem_io.hpp"
#include "sweepcli/registry.hpp"

using namespace sweep;
using testing_support::random_vec;

namespace {

const sweepcli::BuiltProblem& builtin(const std::string& name) {
  static std::map<std::string, sweepcli::BuiltProblem> cache;
  auto it = cache.find(name);
  if (it == cache.end()) {
    it = cache.emplace(name, sweepcli::build_problem(sweepcli::find_example(name).file)).first;
  }
  return it->second;
}

Trajectory two_node(const Vec& x0, const Vec& xT, double T) {
  Trajectory tr;
  tr.grid = Grid{T, 1};
  tr.x = Mat(x0.size(), 2);
  tr.x.col(0) = x0;
  tr.x.col(1) = xT;
  return tr;
}

}  // namespace

TEST(Objective, MayerCostOfTheThreeStateExample) {
  const SweepingProblem& prob = builtin("paper-6-1").problem;
  const Vec x0 = (Vec(3) << 0, 1, -1).finished();
  const ControlSignal u = ControlSignal::constant(Grid{0.5, 1}, Vec::Ones(1));
  EXPECT_NEAR(objective_J(prob, two_node(x0, (Vec(3) << 0.5, 1, -1.25).finished(), 0.5), u, 100), 0.0,
              1e-15);
  EXPECT_NEAR(objective_J(prob, two_node(x0, (Vec(3) << 1, 0, 0).finished(), 0.5), u, 100), -2.0, 1e-15);
}

TEST(Objective, LocalizationAndProximalTerms) {
  EXPECT_EQ(localization(Vec::Zero(2), (Vec(2) << 0.4, 0).finished(), 1.0), 0.0);
  EXPECT_NEAR(localization(Vec::Zero(2), (Vec(2) << 1, 0).finished(), 1.0), 0.75, 1e-15);

  const SweepingProblem& prob = builtin("scalar-linear").problem;
  const Grid grid{1.0, 1};
  const Trajectory tr = two_node(Vec::Zero(1), Vec::Constant(1, 1.0), 1.0);
  const ControlSignal u = ControlSignal::constant(grid, Vec::Constant(1, 0.5));
  const ControlSignal inc = ControlSignal::constant(grid, Vec::Constant(1, -0.5));
  const Mat center = Mat::Zero(1, 2);
  // cost 1, localization trapezoid 0.5 * (0 + 0.75) * K, proximal alpha * h * |1|.
  EXPECT_NEAR(objective_J(prob, tr, u, 10.0, 0.2, &center, &inc), 1.0 + 3.75 + 0.2, 1e-14);
}

TEST(Gradient, AdjointMatchesFiniteDifferencesOnEveryBuiltin) {
  std::mt19937_64 rng(12);
  for (const auto& ex : sweepcli::examples()) {
    if (ex.fixture) continue;
    const auto& b = builtin(ex.name);
    SolveConfig cfg = sweepcli::make_config(b);
    const Grid grid{b.problem.T(), 40};
    const int m = b.problem.m();
    for (int k = 0; k < 3; ++k) {
      Mat vals(m, grid.N), dir(m, grid.N);
      for (int j = 0; j < grid.N; ++j) {
        vals.col(j) = random_vec(rng, m, -0.9, 0.9);
        dir.col(j) = random_vec(rng, m, -1, 1);
      }
      const GradientCheck gc = gradient_check(b.problem, cfg, ControlSignal(grid, vals), ControlSignal(grid, dir));
      EXPECT_LE(gc.rel_gap(), 1e-4) << ex.name << " adjoint " << gc.adjoint << " fd " << gc.fd;
    }
    const GradientCheck zero = gradient_check(b.problem, cfg, ControlSignal::constant(grid, Vec::Zero(m)),
                                              ControlSignal(grid, Mat::Zero(m, grid.N)));
    EXPECT_EQ(zero.adjoint, 0.0);
    EXPECT_LE(std::abs(zero.fd), 1e-12);
  }
}

TEST(Solve, ScalarProblemAgainstExhaustiveSearch) {
  const auto& b = builtin("scalar-linear");
  const SweepingProblem& prob = b.problem;
  const int N = 16;
  const Grid grid{prob.T(), N};

  // Every bang-bang control through the catching-up scheme.
  double best = 1e300;
  for (int mask = 0; mask < (1 << N); ++mask) {
    Mat vals(1, N);
    for (int j = 0; j < N; ++j) vals(0, j) = (mask >> j & 1) ? 1.0 : -1.0;
    const Trajectory tr = integrate_catching_up(prob.spec, prob.C0.point, ControlSignal(grid, vals), 2);
    best = std::min(best, prob.cost(tr.x.col(0), tr.x.col(N)));
  }
  EXPECT_NEAR(best, 2.25, 1e-12);

  SolveConfig cfg = sweepcli::make_config(b);
  cfg.N = N;
  const SolveResult res = solve(prob, cfg, ControlSignal::constant(grid, Vec::Zero(1)));
  const double J = prob.cost(res.trajectory.x.col(0), res.trajectory.x.col(N));
  EXPECT_NEAR(J, best, 0.05);
  EXPECT_TRUE(res.control.within(prob.U, 1e-12));
}

TEST(Solve, StationaryProblemRestsAtTheOrigin) {
  const auto& b = builtin("stationary");
  SolveConfig cfg = sweepcli::make_config(b);
  const Grid grid{b.problem.T(), cfg.N};
  const SolveResult res = solve(b.problem, cfg, ControlSignal::constant(grid, Vec::Constant(1, 0.7)));
  EXPECT_LE(res.J, 1e-6);
  EXPECT_LE(res.trajectory.x.col(grid.N).norm(), 1e-3);
}

TEST(Solve, InnerIterationsDescend) {
  const auto& b = builtin("polygon-2d");
  SolveConfig cfg = sweepcli::make_config(b);
  int violations = 0, steps = 0;
  double last = 0.0;
  cfg.on_iterate = [&](double, int it, double value) {
    if (it > 0) {
      ++steps;
      if (value > last + 1e-12 * (1 + std::abs(last))) ++violations;
    }
    last = value;
  };
  const Grid grid{b.problem.T(), cfg.N};
  const SolveResult res = solve(b.problem, cfg, ControlSignal::constant(grid, Vec::Zero(2)));
  EXPECT_GT(steps, 10);
  EXPECT_EQ(violations, 0);
  // The corner (0.75, 0.75) is the nearest point of the pentagon to (2, 2).
  EXPECT_NEAR(res.trajectory.x(0, grid.N), 0.75, 0.02);
  EXPECT_NEAR(res.trajectory.x(1, grid.N), 0.75, 0.02);
}

TEST(Solve, DeterministicAndStableUnderWarmStart) {
  const auto& b = builtin("scalar-linear");
  const SolveConfig cfg = sweepcli::make_config(b);
  const Grid grid{b.problem.T(), cfg.N};
  const ControlSignal u0 = ControlSignal::constant(grid, Vec::Zero(1));
  const SolveResult a = solve(b.problem, cfg, u0);
  const SolveResult c = solve(b.problem, cfg, u0);
  EXPECT_TRUE(a.control.values().cwiseEqual(c.control.values()).all());
  EXPECT_EQ(a.J, c.J);

  const SolveResult warm = solve(b.problem, cfg, a.control);
  EXPECT_NEAR(warm.J, a.J, 1e-4 * (1 + std::abs(a.J)));
}

TEST(Certificate, FreeEndpointHasUnitCostMultiplier) {
  const auto& b = builtin("scalar-linear");
  const SolveConfig cfg = sweepcli::make_config(b);
  const Grid grid{b.problem.T(), cfg.N};
  const SolveResult res = solve(b.problem, cfg, ControlSignal::constant(grid, Vec::Zero(1)));
  const PmpCertificate cert = extract_certificate(res, b.problem, cfg);
  EXPECT_EQ(cert.lambda, 1.0);
  // p(T) = -lambda dg/dx(T) = -2 (x(T) - 2).
  EXPECT_NEAR(cert.p(0, grid.N), -2 * (cert.x(0, grid.N) - 2), 1e-9);
}

TEST(Certificate, Normalization) {
  PmpCertificate cert;
  cert.grid = Grid{1.0, 2};
  cert.p = Mat::Zero(2, 3);
  cert.p.col(2) << 3, 4;
  cert.lambda = 5;
  AdjointMeasure mu;
  mu.grid = cert.grid;
  mu.density = Vec::Constant(3, 2.0);
  mu.atoms.push_back({1.0, 10.0});
  cert.nu.push_back(mu);
  cert.p_jumps.push_back({1.0, (Vec(2) << 1, 1).finished()});
  normalize_certificate(cert);
  EXPECT_NEAR(cert.p.col(2).norm() + cert.lambda, 1.0, 1e-15);
  EXPECT_NEAR(cert.lambda, 0.5, 1e-15);
  EXPECT_NEAR(cert.nu[0].atoms[0].weight, 1.0, 1e-15);
  EXPECT_NEAR(cert.nu[0].density[1], 0.2, 1e-15);
  EXPECT_NEAR(cert.p_jumps[0].dp[0], 0.1, 1e-15);

  PmpCertificate zero;
  zero.grid = Grid{1.0, 2};
  zero.p = Mat::Zero(2, 3);
  EXPECT_THROW(normalize_certificate(zero), DegenerateNormalization);
}

TEST(Schedule, InitialStateLiesInTheShrunkenSet) {
  const auto& b = builtin("paper-6-1");
  const SolveConfig cfg = sweepcli::make_config(b);
  for (int k = 0; k < cfg.schedule.size(); ++k) {
    const Vec x0 = initial_state(b.problem, cfg.schedule, k);
    EXPECT_LE(psi_gamma(b.problem.spec.set(), cfg.schedule.gamma(k), x0).value,
              -cfg.schedule.alpha(k) + 1e-12);
    EXPECT_LE((x0 - b.problem.C0.point).norm(), cfg.schedule.sigma(k) + 1e-12);
  }
}
