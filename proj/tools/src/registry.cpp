#include "sweepcli/registry.hpp"

#include <cmath>

namespace sweepcli {

namespace {

ProblemFile paper_example(bool free_end) {
  ProblemFile p;
  p.name = free_end ? "paper-6-1-free" : "paper-6-1";
  p.n = 3;
  p.m = 1;
  p.T = 0.5;
  p.psi = {"x1^2 + x2^2 + x3", "x1^2 + (x2 - 2)^2 + x3"};
  p.f = {"4*x1 + u1", "x2 - 1", "-2*x1 - x2 + u1 + 2"};
  p.phi = "0";
  p.g = "-x4^2 - x6 - 1";
  p.C0_kind = "point";
  p.C0_point = {0.0, 1.0, -1.0};
  if (free_end) {
    p.CT_kind = "all";
  } else {
    p.CT_kind = "affine";
    p.CT_a = {8.0, 0.0, -4.0};
    p.CT_b = 9.0;
  }
  p.U_lo = {-1.0};
  p.U_hi = {1.0};
  p.delta = 1.0;
  p.schedule.gammas = {50.0, 100.0, 200.0, 400.0, 800.0, 1600.0};
  p.N = 200;
  p.substeps = 8;
  p.region = sweep::Region{(sweep::Vec(3) << 0.0, 1.0, -1.0).finished(), 1.0};
  return p;
}

ProblemFile polygon() {
  ProblemFile p;
  p.name = "polygon-2d";
  p.n = 2;
  p.m = 2;
  p.T = 1.0;
  p.psi = {"x1 - 1", "-x1 - 1", "x2 - 1", "-x2 - 1", "x1 + x2 - 1.5"};
  p.f = {"u1", "u2"};
  p.g = "(x3 - 2)^2 + (x4 - 2)^2";
  p.C0_point = {0.0, 0.0};
  p.U_lo = {-1.0, -1.0};
  p.U_hi = {1.0, 1.0};
  p.schedule.gammas = {100.0, 200.0, 400.0, 800.0};
  p.N = 100;
  p.region = sweep::Region{sweep::Vec::Zero(2), 2.0};
  return p;
}

ProblemFile scalar_linear() {
  ProblemFile p;
  p.name = "scalar-linear";
  p.n = 1;
  p.m = 1;
  p.T = 1.0;
  p.psi = {"x1 - 0.5"};
  p.f = {"u1"};
  p.g = "(x2 - 2)^2";
  p.C0_point = {0.0};
  p.U_lo = {-1.0};
  p.U_hi = {1.0};
  p.schedule.gammas = {50.0, 100.0, 200.0, 400.0};
  p.N = 100;
  p.region = sweep::Region{sweep::Vec::Zero(1), 1.0};
  return p;
}

ProblemFile stationary() {
  ProblemFile p;
  p.name = "stationary";
  p.n = 2;
  p.m = 1;
  p.T = 1.0;
  p.psi = {"x1^2 + x2^2 - 1"};
  p.f = {"u1 - x1", "-x2"};
  p.g = "x3^2 + x4^2";
  p.C0_point = {0.0, 0.0};
  p.U_lo = {-1.0};
  p.U_hi = {1.0};
  p.schedule.gammas = {50.0, 100.0, 200.0};
  p.N = 50;
  p.region = sweep::Region{sweep::Vec::Zero(2), 1.0};
  return p;
}

ProblemFile set_fixture(const std::string& name, std::vector<std::string> psi) {
  ProblemFile p;
  p.name = name;
  p.n = 2;
  p.m = 1;
  p.T = 1.0;
  p.psi = std::move(psi);
  p.f = {"u1", "0"};
  p.g = "0";
  p.C0_point = {0.0, 0.0};
  p.U_lo = {-1.0};
  p.U_hi = {1.0};
  p.region = sweep::Region{sweep::Vec::Zero(2), 1.5};
  return p;
}

}  // namespace

const std::vector<Example>& examples() {
  static const std::vector<Example> list = {
      {"paper-6-1", "three states, two paraboloid constraints, affine terminal set", false,
       paper_example(false)},
      {"paper-6-1-free", "paper-6-1 with a free terminal state", false, paper_example(true)},
      {"polygon-2d", "single integrator in a pentagon, pushed towards a corner", false, polygon()},
      {"scalar-linear", "scalar integrator against a half-line", false, scalar_linear()},
      {"stationary", "damped planar system whose optimum rests at the origin", false,
       stationary()},
      {"unit-ball", "unit disc, one constraint", true, set_fixture("unit-ball", {"x1^2 + x2^2 - 1"})},
      {"duplicated", "unit disc listed twice", true,
       set_fixture("duplicated", {"x1^2 + x2^2 - 1", "x1^2 + x2^2 - 1"})},
      {"opposing", "two half-planes meeting in a line", true,
       set_fixture("opposing", {"x1", "-x1"})},
  };
  return list;
}

const Example& find_example(const std::string& name) {
  for (const Example& e : examples()) {
    if (e.name == name) return e;
  }
  throw SchemaError("unknown example: " + name);
}

namespace closed_form {

using sweep::Vec;

Vec state(double t) { return (Vec(3) << t, 1.0, -1.0 - t * t).finished(); }

Vec adjoint(double t) {
  if (t >= kT) return (Vec(3) << 0.75, 0.0, 0.0).finished();
  const double d = 4.0 * t * t + 1.0;
  return (Vec(3) << 3.0 / (4.0 * d), 0.0, -3.0 * t / (2.0 * d)).finished();
}

double density(int i, double t) {
  const double d = 4.0 * t * t + 1.0;
  const double odd = 12.0 * t * t * t + 3.0 * t;
  const double even = 24.0 * t * t - 6.0;
  return ((i == 0 ? odd : -odd) + even) / (8.0 * d * d);
}

sweep::PmpCertificate certificate(int N) {
  sweep::PmpCertificate c;
  c.grid = sweep::Grid{kT, N};
  c.x.resize(3, N + 1);
  c.p.resize(3, N + 1);
  c.u = sweep::Mat::Ones(1, N + 1);
  c.xi = sweep::Mat::Ones(2, N + 1);
  for (int i = 0; i < 2; ++i) {
    sweep::AdjointMeasure mu;
    mu.grid = c.grid;
    mu.density.resize(N + 1);
    mu.atoms = {{kT, kAtom}};
    c.nu.push_back(mu);
  }
  for (int j = 0; j <= N; ++j) {
    const double t = c.grid.t(j);
    c.x.col(j) = state(t);
    c.p.col(j) = adjoint(j == N ? kT : t);
    for (int i = 0; i < 2; ++i) c.nu[static_cast<std::size_t>(i)].density[j] = density(i, t);
  }
  c.p_jumps = {{kT, (Vec(3) << 0.375, 0.0, 0.375).finished()}};
  c.lambda = kLambda;
  return c;
}

}  // namespace closed_form

}  // namespace sweepcli
