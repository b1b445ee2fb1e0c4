#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "support.hpp"
#include "sweep/errors.hpp"
#include "sweep/sweepset.hpp"

using namespace sweep;
using testing_support::ExprGen;
using testing_support::fd_gradient;
using testing_support::random_vec;

TEST(Parse, FirstConstraintOfThreeStateExample) {
  const Expr e = Expr::parse("x1^2 + x2^2 + x3", 3, 1);
  EXPECT_EQ(e.str(), "(((x1^2) + (x2^2)) + x3)");
  const ScalarField f(e, Smoothness::C11);
  const FieldEval ev = f.eval(Vec((Vec(3) << 0, 1, -1).finished()), 1);
  EXPECT_DOUBLE_EQ(ev.value, 0.0);
  EXPECT_TRUE(ev.grad->isApprox((Vec(3) << 0, 2, 1).finished()));
}

TEST(Parse, ZeroIsConstant) {
  const Expr e = Expr::parse("0", 3, 1);
  ASSERT_EQ(e.nodes().size(), 1u);
  EXPECT_EQ(e.node(e.root()).op, Op::Const);
  EXPECT_EQ(e.node(e.root()).constant, 0.0);
}

TEST(Parse, DanglingOperatorReportsPosition) {
  try {
    Expr::parse("x1 +", 3, 1);
    FAIL() << "expected SyntaxError";
  } catch (const SyntaxError& e) {
    EXPECT_EQ(e.position(), 4u);
    EXPECT_FALSE(e.expected().empty());
  }
}

TEST(Parse, IdentifierErrors) {
  EXPECT_THROW(Expr::parse("y1 + 1", 3, 1), UnknownIdentifier);
  EXPECT_THROW(Expr::parse("x4", 3, 1), IndexOutOfRange);
  EXPECT_THROW(Expr::parse("u2", 3, 1), IndexOutOfRange);
  EXPECT_THROW(Expr::parse("x0", 3, 1), IndexOutOfRange);
  EXPECT_THROW(Expr::parse("(x1", 3, 1), SyntaxError);
  EXPECT_THROW(Expr::parse("x1^1.5", 3, 1), SyntaxError);
  EXPECT_THROW(Expr::parse("", 3, 1), SyntaxError);
}

TEST(Parse, Precedence) {
  // ^ binds tighter than unary minus, which binds tighter than * and /.
  const ScalarField f = ScalarField::parse("-x1^2*3 + 2/4 - 1", 1, 0);
  EXPECT_DOUBLE_EQ(f.value(0, Vec::Constant(1, 2.0)), -12.0 + 0.5 - 1.0);
}

TEST(Eval, ConstantField) {
  const ScalarField f = ScalarField::parse("5", 3, 1);
  const FieldEval ev = f.eval(0.3, Vec::Ones(3), Vec::Zero(1), 2);
  EXPECT_EQ(ev.value, 5.0);
  EXPECT_TRUE(ev.grad->isZero());
  EXPECT_TRUE(ev.hess->isZero());
}

TEST(Eval, SecondConstraintOnExampleArc) {
  const ScalarField f = ScalarField::parse("x1^2 + (x2 - 2)^2 + x3", 3, 0);
  const double t = 0.3;
  const Vec x = (Vec(3) << t, 1.0, -1.0 - t * t).finished();
  const FieldEval ev = f.eval(x, 1);
  EXPECT_NEAR(ev.value, 0.0, 1e-15);
  EXPECT_TRUE(ev.grad->isApprox((Vec(3) << 0.6, -2.0, 1.0).finished(), 1e-14));
  const Vec fd = fd_gradient([&](const Vec& y) { return f.value(0, y); }, x);
  EXPECT_LT((fd - *ev.grad).norm(), 1e-8);
}

TEST(Eval, OnlyRequestedDerivatives) {
  const ScalarField f = ScalarField::parse("x1*x2", 2, 0);
  EXPECT_FALSE(f.eval(Vec::Ones(2), 0).grad.has_value());
  EXPECT_TRUE(f.eval(Vec::Ones(2), 1).grad.has_value());
  EXPECT_FALSE(f.eval(Vec::Ones(2), 1).hess.has_value());
  EXPECT_TRUE(f.eval(Vec::Ones(2), 2).hess.has_value());
}

TEST(Eval, DomainErrorsNameTheSubexpression) {
  const ScalarField ln = ScalarField::parse("x1 + ln(x2)", 2, 0);
  try {
    ln.value(0, (Vec(2) << 1, -1).finished());
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    EXPECT_EQ(e.subexpression(), "ln(x2)");
  }
  EXPECT_THROW(ScalarField::parse("sqrt(x1)", 1, 0).value(0, Vec::Constant(1, -1)), DomainError);
  EXPECT_THROW(ScalarField::parse("1/x1", 1, 0).value(0, Vec::Zero(1)), DomainError);
}

TEST(Eval, ControlDerivativesStacked) {
  const ScalarField f = ScalarField::parse("x1*u1 + u2^2 + t*x2", 2, 2);
  const Vec x = (Vec(2) << 2, 3).finished(), u = (Vec(2) << 5, 7).finished();
  const FieldEval ev = f.eval(0.5, x, u, 2, DiffVars::StateControl);
  EXPECT_TRUE(ev.grad->isApprox((Vec(4) << 5, 0.5, 2, 14).finished()));
  EXPECT_DOUBLE_EQ((*ev.hess)(0, 2), 1.0);
  EXPECT_DOUBLE_EQ((*ev.hess)(3, 3), 2.0);
}

TEST(Field, Max2ForbiddenInConstraints) {
  EXPECT_THROW(ScalarField::parse("max2(x1, x2)", 2, 0), InvalidField);
  const ScalarField g = ScalarField::parse("max2(x1, x2)", 2, 0, Smoothness::Lipschitz);
  EXPECT_THROW(SweepingSet({g}), InvalidField);
  EXPECT_DOUBLE_EQ(g.value(0, (Vec(2) << -1, 3).finished()), 3.0);
}

TEST(Property, RoundTripOfRandomExpressions) {
  std::mt19937_64 rng(7);
  int checked = 0;
  for (int k = 0; k < 1200; ++k) {
    ExprGen gen(rng, 3, 2, k % 2 == 0);
    const Expr e = gen.make(6);
    const Expr back = Expr::parse(e.str(), 3, 2);
    ASSERT_EQ(back, e) << e.str();
    ASSERT_EQ(back.str(), e.str());
    ++checked;
  }
  EXPECT_GE(checked, 1000);
}

TEST(Property, ForwardModeMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  int checked = 0;
  for (int k = 0; k < 300; ++k) {
    ExprGen gen(rng, 3, 1, true);
    const ScalarField f(gen.make(5), Smoothness::C11);
    const Vec x = random_vec(rng, 3, -1, 1);
    const Vec u = random_vec(rng, 1, -1, 1);
    const double t = 0.25;
    const FieldEval ev = f.eval(t, x, u, 2);
    if (!std::isfinite(ev.value) || std::abs(ev.value) > 1e6) continue;
    auto val = [&](const Vec& y) { return f.value(t, y, u); };
    const Vec fd = fd_gradient(val, x);
    ASSERT_LE((fd - *ev.grad).norm(), 1e-6 * (1 + fd.norm())) << f.str();

    auto grad = [&](const Vec& y) { return Vec(*f.eval(t, y, u, 1).grad); };
    const Mat fdh = testing_support::fd_jacobian(grad, x, 1e-5);
    ASSERT_LE((fdh - *ev.hess).norm(), 1e-4 * (1 + fdh.norm())) << f.str();
    ++checked;
  }
  EXPECT_GT(checked, 250);
}

TEST(Property, EvaluationIsBitIdentical) {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 50; ++k) {
    ExprGen gen(rng, 2, 1, true);
    const ScalarField f(gen.make(5), Smoothness::C11);
    const Vec x = random_vec(rng, 2, -1, 1), u = random_vec(rng, 1, -1, 1);
    const FieldEval a = f.eval(0.1, x, u, 2), b = f.eval(0.1, x, u, 2);
    EXPECT_EQ(std::memcmp(&a.value, &b.value, sizeof(double)), 0);
    EXPECT_TRUE((*a.grad).cwiseEqual(*b.grad).all());
    EXPECT_TRUE((*a.hess).cwiseEqual(*b.hess).all());
  }
}
