#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include <Eigen/QR>

#include "support.hpp"
#include "sweep/errors.hpp"
#include "sweep/estimate.hpp"
#include "sweep/smallqp.hpp"
#include "sweep/sweepset.hpp"

using namespace sweep;
using testing_support::random_vec;

namespace {

// The two paraboloids of the three-state example, with hand constants.
SweepingSet example_set() {
  return SweepingSet({ScalarField::parse("x1^2 + x2^2 + x3", 3, 0),
                      ScalarField::parse("x1^2 + (x2 - 2)^2 + x3", 3, 0)},
                     SetConstants{0.5, 3.6, 1.0});
}

Vec on_gamma(double s) { return (Vec(3) << s, 1.0, -1.0 - s * s).finished(); }

Vec v3(double a, double b, double c) { return (Vec(3) << a, b, c).finished(); }

// Distance from the origin to the hull of two vectors by a fine scan of the segment.
double hull_distance_scan(const Vec& a, const Vec& b) {
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 100000; ++k) {
    const double l = k / 100000.0;
    best = std::min(best, (l * a + (1 - l) * b).norm());
  }
  return best;
}

}  // namespace

TEST(PsiMax, ExampleValues) {
  const SweepingSet S = example_set();
  EXPECT_DOUBLE_EQ(psi_max(S, v3(0, 1, -1)), 0.0);
  EXPECT_DOUBLE_EQ(psi_max(S, v3(0, 1, -2)), -1.0);
  const SweepingSet one({ScalarField::parse("x1 - 3", 1, 0)});
  EXPECT_DOUBLE_EQ(psi_max(one, Vec::Constant(1, 1.0)), -2.0);
}

TEST(PsiGamma, SingleConstraintIsExact) {
  const SweepingSet S({ScalarField::parse("x1^2 + x2 - 1", 2, 0)});
  const Vec x = (Vec(2) << 0.3, -0.4).finished();
  for (double g : {1.0, 50.0, 1e6}) {
    const SmoothMax sm = psi_gamma(S, g, x);
    EXPECT_DOUBLE_EQ(sm.value, 0.09 - 0.4 - 1.0);
    EXPECT_TRUE(sm.grad.isApprox((Vec(2) << 0.6, 1.0).finished()));
  }
}

TEST(PsiGamma, EqualWeightsOnTheJunction) {
  const SweepingSet S = example_set();
  const Vec x = on_gamma(0.2);
  for (double g : {10.0, 100.0, 1000.0}) {
    const SmoothMax sm = psi_gamma(S, g, x);
    EXPECT_NEAR(sm.value, std::log(2.0) / g, 1e-15);
    const Vec expect = 0.5 * v3(0.4, 2, 1) + 0.5 * v3(0.4, -2, 1);
    EXPECT_LT((sm.grad - expect).norm(), 1e-12);
  }
}

TEST(PsiGamma, SandwichOnRandomPoints) {
  const SweepingSet S = example_set();
  std::mt19937_64 rng(5);
  for (double g : {10.0, 100.0}) {
    for (int k = 0; k < 1000; ++k) {
      const Vec x = random_vec(rng, 3, -3, 3);
      const double psi = psi_max(S, x);
      const double v = psi_gamma(S, g, x).value;
      ASSERT_LE(psi, v);
      ASSERT_LE(v, psi + std::log(2.0) / g);
    }
  }
}

TEST(PsiGamma, NonincreasingInGamma) {
  const SweepingSet S = example_set();
  std::mt19937_64 rng(6);
  for (int k = 0; k < 1000; ++k) {
    const Vec x = random_vec(rng, 3, -3, 3);
    double prev = psi_gamma(S, 1.0, x).value;
    for (double g : {2.0, 10.0, 100.0, 1e4}) {
      const double v = psi_gamma(S, g, x).value;
      ASSERT_LE(v, prev);
      prev = v;
    }
  }
}

TEST(PsiGamma, NoOverflow) {
  const SweepingSet S({ScalarField::parse("x1", 2, 0), ScalarField::parse("x2", 2, 0)});
  for (double g : {1.0, 1e4, 1e8}) {
    for (double mag : {1e4, -1e4}) {
      const Vec x = (Vec(2) << mag, mag / 2).finished();
      const SmoothMax sm = psi_gamma(S, g, x);
      EXPECT_TRUE(std::isfinite(sm.value));
      EXPECT_TRUE(sm.grad.allFinite());
      EXPECT_GE(sm.value, std::max(x[0], x[1]));
    }
  }
}

TEST(Membership, ExampleClasses) {
  const SweepingSet S = example_set();
  const PenaltySchedule sched({50.0, 100.0}, 4.6, S);
  for (int k = 0; k < 2; ++k) {
    EXPECT_EQ(level_membership(S, sched, k, v3(0, 1, -5)), Membership::InCk);
    EXPECT_EQ(level_membership(S, sched, k, v3(0, 1, -1)), Membership::InC);
    EXPECT_EQ(level_membership(S, sched, k, v3(0, 1, 0)), Membership::Outside);
  }
}

TEST(Membership, LevelSetsAreNested) {
  const SweepingSet S = example_set();
  const PenaltySchedule sched({50.0, 100.0, 200.0, 400.0}, 4.6, S);
  std::mt19937_64 rng(9);
  int inner = 0;
  for (int n = 0; n < 20000; ++n) {
    const Vec x = v3(0, 1, -1) + random_vec(rng, 3, -0.3, 0.3);
    for (int k = 0; k < sched.size(); ++k) {
      const Membership m = level_membership(S, sched, k, x);
      const double pg = psi_gamma(S, sched.gamma(k), x).value;
      if (m == Membership::InCk) {
        ++inner;
        ASSERT_LE(pg, 0.0);
        ASSERT_LE(psi_max(S, x), 0.0);
        if (k + 1 < sched.size()) {
          ASSERT_EQ(level_membership(S, sched, k + 1, x), Membership::InCk);
        }
      }
      if (m == Membership::InCgamma) {
        ASSERT_LE(psi_max(S, x), 0.0);
      }
    }
  }
  EXPECT_GT(inner, 100);
}

TEST(Schedule, AlphaSigmaFormulas) {
  const SweepingSet S = example_set();
  const double Mbar = 4.6;
  const PenaltySchedule sched({50.0, 400.0}, Mbar, S);
  for (int k = 0; k < 2; ++k) {
    const double g = sched.gamma(k);
    const double alpha = std::log(0.5 * g / (2 * Mbar)) / g;
    EXPECT_NEAR(sched.alpha(k), alpha, 1e-15);
    EXPECT_NEAR(sched.sigma(k), (2 * 3.6 / (2 * 0.25)) * (std::log(2.0) / g + alpha), 1e-13);
  }
  EXPECT_TRUE(sched.monotone());
  EXPECT_THROW(PenaltySchedule({10.0}, Mbar, S), InvalidSchedule);
  EXPECT_THROW(PenaltySchedule({100.0, 50.0}, Mbar, S), InvalidSchedule);
  EXPECT_THROW(PenaltySchedule({}, Mbar, S), InvalidSchedule);
  const auto lu = PenaltySchedule::log_uniform(10, 1000, 3);
  EXPECT_NEAR(lu[1], 100.0, 1e-9);
}

TEST(NormalCone, RaysOnTheJunction) {
  const SweepingSet S = example_set();
  const auto rays = normal_cone_rays(S, v3(0, 1, -1), 0.0);
  ASSERT_EQ(rays.size(), 2u);
  EXPECT_TRUE(rays[0].second.isApprox(v3(0, 2, 1)));
  EXPECT_TRUE(rays[1].second.isApprox(v3(0, -2, 1)));
  EXPECT_TRUE(normal_cone_rays(S, v3(0, 1, -3), 0.0).empty());
  EXPECT_EQ(normal_cone_rays(S, v3(0.5, 1, -1.25), 0.0).size(), 2u);
}

TEST(A22, JunctionOfTheExample) {
  const SweepingSet S = example_set();
  std::vector<Vec> samples;
  double scan = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 40; ++k) {
    const double s = -1.0 + 2.0 * k / 40;
    samples.push_back(on_gamma(s));
    scan = std::min(scan, hull_distance_scan(v3(2 * s, 2, 1), v3(2 * s, -2, 1)));
  }
  const A22Result r = check_A22(S, samples);
  EXPECT_TRUE(r.pass);
  EXPECT_GE(r.eta_hat, 0.5 - 1e-9);
  EXPECT_NEAR(r.eta_hat, 0.5 * scan, 1e-6);
  ASSERT_TRUE(r.witness.has_value());
  EXPECT_NEAR((*r.witness)[0], 0.0, 1e-12);
}

TEST(A22, SingleConstraintAndOpposingGradients) {
  const SweepingSet disc({ScalarField::parse("x1^2 + x2^2 - 1", 2, 0)});
  std::vector<Vec> circle;
  for (int k = 0; k < 16; ++k) {
    const double a = 2 * M_PI * k / 16;
    circle.push_back((Vec(2) << std::cos(a), std::sin(a)).finished());
  }
  const A22Result r = check_A22(disc, circle);
  EXPECT_NEAR(r.eta_hat, 1.0, 1e-12);

  const SweepingSet slab({ScalarField::parse("x1", 2, 0), ScalarField::parse("-x1", 2, 0)});
  const A22Result o = check_A22(slab, {Vec::Zero(2)});
  EXPECT_NEAR(o.eta_hat, 0.0, 1e-12);
  EXPECT_FALSE(o.pass);

  EXPECT_THROW(check_A22(disc, {Vec::Zero(2)}), NoBoundarySamples);
}

TEST(A23, ExampleAndDegenerateCases) {
  const SweepingSet S = example_set();
  const A23Result r = check_A23(S, on_gamma(0.0), 1e-9);
  EXPECT_NEAR(r.b_hat, 0.6, 1e-15);
  EXPECT_TRUE(r.pass);

  const SweepingSet disc({ScalarField::parse("x1^2 + x2^2 - 1", 2, 0)});
  EXPECT_EQ(check_A23(disc, (Vec(2) << 1, 0).finished(), 1e-9).b_hat, 0.0);

  const SweepingSet dup({ScalarField::parse("x1^2 + x2^2 - 1", 2, 0),
                         ScalarField::parse("x1^2 + x2^2 - 1", 2, 0)});
  const A23Result d = check_A23(dup, (Vec(2) << 0, 1).finished(), 1e-9);
  EXPECT_NEAR(d.b_hat, 1.0, 1e-15);
  EXPECT_FALSE(d.pass);

  EXPECT_THROW(check_A23(disc, Vec::Zero(2), 1e-9), EmptyActiveSet);
}

TEST(InteriorDirection, JunctionAgainstConeScan) {
  const SweepingSet S = example_set();
  const Vec c = v3(0, 1, -1);
  const Vec d = interior_direction(S, c);
  const Vec g1 = v3(0, 2, 1), g2 = v3(0, -2, 1);
  EXPECT_LT(d.dot(g1), 0.0);
  EXPECT_LT(d.dot(g2), 0.0);

  // Independent: project -g_j onto cone{g1, g2} by scanning multipliers.
  Vec expect = Vec::Zero(3);
  for (const Vec& gj : {g1, g2}) {
    double best = std::numeric_limits<double>::infinity();
    Vec arg;
    for (int a = 0; a <= 400; ++a) {
      for (int b = 0; b <= 400; ++b) {
        const Vec w = (a / 200.0) * g1 + (b / 200.0) * g2;
        const double dist = (-gj - w).norm();
        if (dist < best) {
          best = dist;
          arg = w;
        }
      }
    }
    expect += -gj - arg;
  }
  EXPECT_LT((d - expect).norm(), 1e-2);
}

TEST(InteriorDirection, LemmaBoundsAlongTheJunction) {
  const SweepingSet S = example_set();
  const auto& c = S.constants();
  const double r = S.count();
  for (int k = 0; k <= 20; ++k) {
    const Vec x = on_gamma(-1.0 + 0.1 * k);
    ASSERT_TRUE(check_A22(S, {x}).pass);
    const Vec d = interior_direction(S, x);
    const double dn = d.norm();
    EXPECT_GE(dn, 4 * c.eta * c.eta / c.Mbar_psi);
    EXPECT_LE(dn, r * c.Mbar_psi);
    for (const auto& [i, g] : normal_cone_rays(S, x, 1e-7)) {
      EXPECT_LE(d.dot(g) / dn, -4 * c.eta * c.eta / (r * c.Mbar_psi)) << "constraint " << i;
    }
  }
}

TEST(InteriorDirection, HalfSpaceAndErrors) {
  const SweepingSet half({ScalarField::parse("x1", 2, 0)}, SetConstants{0.5, 1.1, 1.0});
  const Vec d = interior_direction(half, Vec::Zero(2));
  EXPECT_GT(d.norm(), 0.0);
  EXPECT_TRUE((d / d.norm()).isApprox((Vec(2) << -1, 0).finished()));
  EXPECT_THROW(interior_direction(half, (Vec(2) << -1, 0).finished()), NotOnBoundary);
  const SweepingSet slab({ScalarField::parse("x1", 2, 0), ScalarField::parse("-x1", 2, 0)});
  EXPECT_THROW(interior_direction(slab, Vec::Zero(2)), DegenerateCone);
}

TEST(Augment, BallAroundTheExample) {
  const SweepingSet S = example_set();
  const Vec y0 = v3(0, 1, -2);
  const SweepingSet A = augment_with_ball(S, y0, 10.0);
  ASSERT_EQ(A.count(), 3);
  for (int k = 0; k <= 50; ++k) {
    const double t = 0.5 * k / 50;
    EXPECT_LT(A.values(on_gamma(t))[2], 0.0);
  }
  EXPECT_EQ(active_set(A, on_gamma(0.1), 1e-9).size(), 2u);
  const Vec x = y0 + 10.0 * v3(1, 0, 0);
  EXPECT_NEAR(A.values(x)[2], 0.0, 1e-12);
  EXPECT_TRUE(A.gradients(x).col(2).isApprox(x - y0));
}

TEST(Project, JunctionExample) {
  const SweepingSet S = example_set();
  const Projection p = project_onto_C(S, v3(0, 1, -0.9));
  EXPECT_LT((p.z - v3(0, 1, -1)).norm(), 1e-9);
  EXPECT_NEAR(p.multipliers[0], 0.05, 1e-9);
  EXPECT_NEAR(p.multipliers[1], 0.05, 1e-9);

  // Independent: best feasible point on a local grid.
  double best = std::numeric_limits<double>::infinity();
  Vec arg;
  for (int a = -20; a <= 20; ++a) {
    for (int b = -20; b <= 20; ++b) {
      for (int c = -40; c <= 0; ++c) {
        const Vec z = v3(0.005 * a, 1 + 0.005 * b, -1 + 0.005 * c);
        if (psi_max(S, z) > 0) continue;
        const double d = (z - v3(0, 1, -0.9)).norm();
        if (d < best) {
          best = d;
          arg = z;
        }
      }
    }
  }
  EXPECT_LT((arg - p.z).norm(), 0.01);
}

TEST(Project, IdentityAndHalfSpace) {
  const SweepingSet S = example_set();
  const Vec y = v3(0.1, 1, -3);
  EXPECT_EQ(project_onto_C(S, y).z, y);
  const SweepingSet half({ScalarField::parse("x1", 2, 0)});
  const Projection p = project_onto_C(half, (Vec(2) << 0.3, -7).finished());
  EXPECT_LT((p.z - (Vec(2) << 0, -7).finished()).norm(), 1e-10);
}

TEST(Project, KktAndOptimalityOnRandomPoints) {
  const SweepingSet S = example_set();
  std::mt19937_64 rng(21);
  for (int k = 0; k < 30; ++k) {
    const Vec base = on_gamma(std::uniform_real_distribution<double>(-0.8, 0.8)(rng));
    const Vec y = base + random_vec(rng, 3, -0.1, 0.1) + v3(0, 0, 0.05);
    const Projection p = project_onto_C(S, y);
    ASSERT_LE(psi_max(S, p.z), 1e-9);
    // y - z in the cone of active gradients.
    const auto act = active_set(S, p.z, 1e-8);
    if (act.empty()) {
      EXPECT_LT((y - p.z).norm(), 1e-9);
    } else {
      Mat G(3, static_cast<int>(act.size()));
      for (std::size_t i = 0; i < act.size(); ++i) G.col(static_cast<int>(i)) = S.gradients(p.z).col(act[i]);
      const Vec w = nnls(G, y - p.z);
      EXPECT_LT((G * w - (y - p.z)).norm(), 1e-8);
    }
    for (int j = 0; j < 100; ++j) {
      const Vec w = project_onto_C(S, p.z + random_vec(rng, 3, -0.5, 0.5) - v3(0, 0, 0.6)).z;
      ASSERT_LE(psi_max(S, w), 1e-9);
      ASSERT_LE((y - p.z).norm(), (y - w).norm() + 1e-9);
    }
  }
}

TEST(SmallQp, MinNormPointAgainstScan) {
  std::mt19937_64 rng(4);
  for (int k = 0; k < 20; ++k) {
    const Mat G = Eigen::Map<const Mat>(random_vec(rng, 6, -1, 1).data(), 2, 3);
    const MinNormResult r = min_norm_point(G);
    EXPECT_NEAR(r.weights.sum(), 1.0, 1e-12);
    EXPECT_GE(r.weights.minCoeff(), -1e-14);
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a <= 400; ++a) {
      for (int b = 0; a + b <= 400; ++b) {
        const double l1 = a / 400.0, l2 = b / 400.0;
        best = std::min(best, (l1 * G.col(0) + l2 * G.col(1) + (1 - l1 - l2) * G.col(2)).norm());
      }
    }
    EXPECT_LE(r.norm, best + 1e-12);
    EXPECT_GE(r.norm, best - 1e-2);
  }
}

TEST(SmallQp, NnlsAgainstSubsetEnumeration) {
  std::mt19937_64 rng(8);
  for (int k = 0; k < 30; ++k) {
    const Mat A = Eigen::Map<const Mat>(random_vec(rng, 12, -1, 1).data(), 4, 3);
    const Vec y = random_vec(rng, 4, -1, 1);
    const Vec x = nnls(A, y);
    double best = y.norm();
    for (int mask = 1; mask < 8; ++mask) {
      std::vector<int> cols;
      for (int i = 0; i < 3; ++i) {
        if (mask >> i & 1) cols.push_back(i);
      }
      Mat B(4, static_cast<int>(cols.size()));
      for (std::size_t i = 0; i < cols.size(); ++i) B.col(static_cast<int>(i)) = A.col(cols[i]);
      const Vec z = B.colPivHouseholderQr().solve(y);
      if (z.minCoeff() < 0) continue;
      best = std::min(best, (B * z - y).norm());
    }
    EXPECT_GE(x.minCoeff(), 0.0);
    EXPECT_NEAR((A * x - y).norm(), best, 1e-9);
  }
}

TEST(Estimate, UnitDiscHalfGradient) {
  const SweepingSet disc({ScalarField::parse("x1^2 + x2^2 - 1", 2, 0)});
  const SetEstimate e = estimate_set_constants(disc, Region{Vec::Zero(2), 1.5}, 200, 1);
  EXPECT_NEAR(e.constants.eta, 1.0, 1e-6);
  EXPECT_GE(e.constants.Mbar_psi, 2 * e.constants.eta);
}
