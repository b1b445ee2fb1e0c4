#include <gtest/gtest.h>

#include <functional>
#include <string>

#include "sweep/errors.hpp"
#include "sweep/pmp.hpp"
#include "sweepcli/problem_io.hpp"
#include "sweepcli/registry.hpp"

using namespace sweep;
namespace cf = sweepcli::closed_form;

namespace {

const SweepingProblem& three_state() {
  static const sweepcli::BuiltProblem b =
      sweepcli::build_problem(sweepcli::find_example("paper-6-1").file);
  return b.problem;
}

const PmpCertificate& exact() {
  static const PmpCertificate c = cf::certificate(2000);
  return c;
}

// Largest residual-to-tolerance ratio in a report.
double worst_ratio(const ResidualReport& r) {
  double w = 0.0;
  for (const Residual& it : r.items) w = std::max(w, it.value / it.tol);
  return w;
}

}  // namespace

TEST(ClosedForm, StateAndAdjointFormulas) {
  // x1 solves x1' = 4 x1 + 1 - 2 x1 (xi1 + xi2) with both multipliers 1.
  for (double t : {0.0, 0.1, 0.25, 0.5}) {
    const Vec x = cf::state(t);
    EXPECT_NEAR(x[0], t, 1e-15);
    EXPECT_NEAR(x[1], 1.0, 1e-15);
    EXPECT_NEAR(x[2], -1.0 - t * t, 1e-15);
  }
  const Vec pT = cf::adjoint(cf::kT);
  EXPECT_NEAR(pT.norm() + cf::kLambda, 1.0, 1e-15);
}

TEST(Verify, ClosedFormCertificatePasses) {
  const ResidualReport r = verify(exact(), three_state());
  for (const Residual& it : r.items) EXPECT_TRUE(it.pass) << it.name << " " << it.value;
  EXPECT_TRUE(r.pass);
  ASSERT_EQ(r.items.size(), residual_names().size());
  for (std::size_t i = 0; i < r.items.size(); ++i) EXPECT_EQ(r.items[i].name, residual_names()[i]);
}

TEST(Verify, CorruptionsAreCaught) {
  const SweepingProblem& prob = three_state();
  const int N = exact().grid.N;
  std::vector<std::pair<std::string, std::function<void(PmpCertificate&)>>> cases = {
      {"drop atoms", [](PmpCertificate& c) { for (auto& mu : c.nu) mu.atoms.clear(); }},
      {"flip p3", [](PmpCertificate& c) { c.p.row(2) *= -1.0; }},
      {"shift xi", [](PmpCertificate& c) { c.xi.array() += 0.1; }},
      {"double lambda", [](PmpCertificate& c) { c.lambda *= 2.0; }},
      {"flip u", [N](PmpCertificate& c) { c.u.leftCols(N / 2).array() = -1.0; }},
      {"drop jump", [](PmpCertificate& c) { c.p_jumps.clear(); }},
  };
  for (const auto& [name, corrupt] : cases) {
    PmpCertificate c = exact();
    corrupt(c);
    const ResidualReport r = verify(c, prob);
    EXPECT_FALSE(r.pass) << name;
    EXPECT_GT(worst_ratio(r), 10.0) << name;
  }
}

TEST(Verify, InvariantUnderRescaling) {
  const SweepingProblem& prob = three_state();
  PmpCertificate c = exact();
  c.p *= 3.0;
  c.lambda *= 3.0;
  for (auto& jp : c.p_jumps) jp.dp *= 3.0;
  for (auto& mu : c.nu) {
    mu.density *= 3.0;
    for (auto& a : mu.atoms) a.weight *= 3.0;
  }
  normalize_certificate(c);
  const ResidualReport a = verify(exact(), prob), b = verify(c, prob);
  for (std::size_t i = 0; i < a.items.size(); ++i) {
    EXPECT_NEAR(a.items[i].value, b.items[i].value, 1e-9 + 1e-6 * a.items[i].value) << a.items[i].name;
  }
}

TEST(Verify, StableAcrossSeedsAndThreads) {
  const SweepingProblem& prob = three_state();
  VerifyOptions base;
  const ResidualReport ref = verify(exact(), prob, base);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    VerifyOptions o;
    o.seed = seed;
    const ResidualReport r = verify(exact(), prob, o);
    EXPECT_TRUE(r.pass) << "seed " << seed;
    for (std::size_t i = 0; i < r.items.size(); ++i) {
      EXPECT_LE(r.items[i].value, std::max(2 * ref.items[i].value, 0.1 * r.items[i].tol));
    }
  }
  VerifyOptions threaded;
  threaded.threads = 4;
  const ResidualReport t = verify(exact(), prob, threaded);
  for (std::size_t i = 0; i < t.items.size(); ++i) EXPECT_EQ(t.items[i].value, ref.items[i].value);
}

TEST(Verify, ToleranceScale) {
  PmpCertificate c = exact();
  c.xi.array() += 0.1;
  VerifyOptions o;
  const double v = verify(c, three_state(), o).get("primal_dynamics").value;
  o.tol_scale = 2 * v / o.tol_primal;
  EXPECT_TRUE(verify(c, three_state(), o).get("primal_dynamics").pass);
}

TEST(Verify, RestingStateWithZeroAdjoint) {
  const sweepcli::BuiltProblem b =
      sweepcli::build_problem(sweepcli::find_example("stationary").file);
  PmpCertificate c;
  c.grid = Grid{b.problem.T(), 50};
  c.x = Mat::Zero(2, 51);
  c.u = Mat::Zero(1, 51);
  c.p = Mat::Zero(2, 51);
  c.xi = Mat::Zero(1, 51);
  AdjointMeasure mu;
  mu.grid = c.grid;
  mu.density = Vec::Zero(51);
  c.nu = {mu};
  c.lambda = 1.0;
  const ResidualReport r = verify(c, b.problem);
  EXPECT_TRUE(r.pass);
  for (const Residual& it : r.items) EXPECT_LE(it.value, 1e-12) << it.name;
}

TEST(Verify, ShapeErrors) {
  PmpCertificate c = exact();
  c.xi = Mat::Zero(1, c.grid.nodes());
  EXPECT_THROW(c.validate(3, 1, 2), GridMismatch);
  EXPECT_THROW(verify(c, three_state()), GridMismatch);
  PmpCertificate d = exact();
  EXPECT_NO_THROW(d.validate(3, 1, 2));
  const Vec left = d.p_left(d.grid.N);
  EXPECT_TRUE(left.isApprox(d.p.col(d.grid.N) - d.p_jumps[0].dp));
  EXPECT_LT((left - d.p.col(d.grid.N - 1)).norm(), 1e-2);
}

TEST(Slackness, ClosedFormIsComplementary) {
  const auto [a, b] = check_slackness(exact(), three_state());
  EXPECT_LE(a, 1e-12);
  EXPECT_LE(b, 1e-3);
}
