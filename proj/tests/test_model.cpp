#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace portopt;
using testing_support::hand_built;

namespace {

Instance two_assets() {
  Vector r(2);
  r << 1.2, 0.8;
  return hand_built(r, Matrix::Identity(2, 2), Vector::Ones(2), 0.9, 0.6, 0.25);
}

}  // namespace

TEST(Return, BasisZeroAndMix) {
  const Instance inst = two_assets();
  EXPECT_EQ(portfolio_return(Vector::Unit(2, 0), inst), 1.2);
  EXPECT_EQ(portfolio_return(Vector::Zero(2), inst), 0.0);
  EXPECT_DOUBLE_EQ(portfolio_return(Vector::Constant(2, 0.5), inst), 1.0);
}

TEST(Volatility, BasisZeroAndIdentity) {
  Instance inst = two_assets();
  inst.sigma << 0.04, 0.01, 0.01, 0.09;
  EXPECT_EQ(portfolio_volatility(Vector::Unit(2, 0), inst), 0.04);
  EXPECT_EQ(portfolio_volatility(Vector::Zero(2), inst), 0.0);
  inst.sigma.setIdentity();
  EXPECT_DOUBLE_EQ(portfolio_volatility(Vector::Constant(2, 0.5), inst), 0.5);
}

TEST(Evaluate, Variants) {
  Instance inst = two_assets();
  inst.sigma << 0.04, 0.01, 0.01, 0.09;
  const Vector e1 = Vector::Unit(2, 0);
  EXPECT_EQ(evaluate(Variant::MinVola, e1, inst), 0.04);
  EXPECT_EQ(evaluate(Variant::MaxRet, e1, inst), 1.2);
  inst.lambda = 0.0;
  const Vector w = Vector::Constant(2, 0.5);
  EXPECT_EQ(evaluate(Variant::MultiObj, w, inst), portfolio_volatility(w, inst));
}

TEST(Evaluate, MultiObjDefinitionConsistency) {
  std::mt19937_64 rng(4);
  const Instance inst = testing_support::generated(12, 3);
  for (int k = 0; k < 100; ++k) {
    const Vector w = testing_support::random_vector(12, -0.2, 0.5, rng);
    EXPECT_EQ(evaluate(Variant::MultiObj, w, inst),
              evaluate(Variant::MinVola, w, inst) - inst.lambda * portfolio_return(w, inst));
  }
}

TEST(Evaluate, DimensionMismatch) {
  const Instance inst = two_assets();
  try {
    portfolio_return(Vector::Zero(3), inst);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionError);
  }
  EXPECT_THROW(portfolio_volatility(Vector::Zero(1), inst), Error);
  EXPECT_THROW(evaluate(Variant::MaxRet, Vector::Zero(1), inst), Error);
  EXPECT_THROW(is_feasible(Variant::MaxRet, Vector::Zero(1), inst), Error);
}

TEST(Volatility, NonNegativeOnClippedPsd) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix A = testing_support::random_psd(8, 3, rng);
    Eigen::SelfAdjointEigenSolver<Matrix> es(A);
    Matrix S = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
    Instance inst = hand_built(Vector::Ones(8), S, Vector::Ones(8));
    for (int k = 0; k < 50; ++k) {
      EXPECT_GE(portfolio_volatility(testing_support::random_vector(8, -1, 1, rng), inst), -1e-9);
    }
  }
}

TEST(Feasibility, ExactPointFeasibleWithZeroTolerance) {
  const Instance inst = two_assets();
  Vector w(2);
  w << 0.5, 0.5;
  EXPECT_TRUE(is_feasible(Variant::MinVola, w, inst, FeasibilityTolerance::uniform(0.0)).feasible);
}

TEST(Feasibility, ZeroVectorViolatesNormalization) {
  const Instance inst = two_assets();
  const auto rep = is_feasible(Variant::MultiObj, Vector::Zero(2), inst);
  EXPECT_FALSE(rep.feasible);
  EXPECT_EQ(rep.magnitude(Constraint::Normalization), 1.0);
}

TEST(Feasibility, NormalizationSlack) {
  const Instance inst = two_assets();
  Vector w(2);
  w << 0.505, 0.5;
  FeasibilityTolerance tol{0.01, 0.0, 0.0};
  const auto rep = is_feasible(Variant::MultiObj, w, inst, tol);
  EXPECT_TRUE(rep.feasible);
  EXPECT_EQ(rep.magnitude(Constraint::Normalization), 0.0);
}

TEST(Feasibility, ReportsEachViolationWithMagnitude) {
  Instance inst = two_assets();
  inst.u << 0.6, 0.6;
  Vector w(2);
  w << 0.9, -0.1;
  const auto rep = is_feasible(Variant::MinVola, w, inst, FeasibilityTolerance::uniform(0.0));
  EXPECT_FALSE(rep.feasible);
  EXPECT_NEAR(rep.magnitude(Constraint::UpperBound), 0.3, 1e-15);
  EXPECT_NEAR(rep.magnitude(Constraint::LowerBound), 0.1, 1e-15);
  EXPECT_NEAR(rep.magnitude(Constraint::Normalization), 0.2, 1e-15);
  EXPECT_EQ(rep.magnitude(Constraint::ReturnFloor), 0.0);  // mu = 1.0 >= 0.9
  int upper_asset = -1;
  for (const auto& v : rep.violations) {
    if (v.constraint == Constraint::UpperBound) upper_asset = v.asset;
  }
  EXPECT_EQ(upper_asset, 0);
}

TEST(Feasibility, VariantSpecificConstraints) {
  Instance inst = two_assets();
  const Vector w = Vector::Unit(2, 1);  // mu = 0.8, sigma^2 = 1
  const auto minvola = is_feasible(Variant::MinVola, w, inst);
  EXPECT_NEAR(minvola.magnitude(Constraint::ReturnFloor), 0.1, 1e-15);
  const auto maxret = is_feasible(Variant::MaxRet, w, inst);
  EXPECT_NEAR(maxret.magnitude(Constraint::VolatilityCap), 0.4, 1e-15);
  EXPECT_TRUE(is_feasible(Variant::MultiObj, w, inst).feasible);
}

TEST(Feasibility, MonotoneInTolerance) {
  std::mt19937_64 rng(12);
  const Instance inst = testing_support::generated(6, 2);
  std::uniform_real_distribution<double> ud(0.0, 0.05);
  for (int k = 0; k < 500; ++k) {
    Vector w = testing_support::random_vector(6, -0.02, 0.4, rng);
    FeasibilityTolerance a{ud(rng), ud(rng), ud(rng)};
    FeasibilityTolerance b{a.norm + ud(rng), a.ret + ud(rng), a.bound + ud(rng)};
    for (auto v : {Variant::MinVola, Variant::MaxRet, Variant::MultiObj}) {
      if (is_feasible(v, w, inst, a)) {
        EXPECT_TRUE(is_feasible(v, w, inst, b).feasible);
      }
    }
  }
}

TEST(Variant, NamesRoundTrip) {
  for (auto v : {Variant::MinVola, Variant::MaxRet, Variant::MultiObj}) EXPECT_EQ(parse_variant(to_string(v)), v);
  EXPECT_THROW(parse_variant("sharpe"), Error);
}
