#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "support.hpp"

using namespace portopt;
using testing_support::universe;

namespace {

Matrix row(std::initializer_list<double> v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) m(0, i++) = x;
  return m;
}

// Plain double loop, independent of the Eigen rank update.
Matrix naive_covariance(const Matrix& rd) {
  const Eigen::Index n = rd.rows(), T = rd.cols();
  Vector mean = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index t = 0; t < T; ++t) mean(i) += rd(i, t);
    mean(i) /= static_cast<double>(T);
  }
  Matrix s(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      double acc = 0.0;
      for (Eigen::Index t = 0; t < T; ++t) acc += (rd(i, t) - mean(i)) * (rd(j, t) - mean(j));
      s(i, j) = 252.0 / static_cast<double>(T) * acc;
    }
  }
  return s;
}

Matrix random_prices(int n, int T, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 0.02);
  Matrix p(n, T);
  for (int i = 0; i < n; ++i) {
    p(i, 0) = 50.0 + 10.0 * i;
    for (int t = 1; t < T; ++t) p(i, t) = p(i, t - 1) * std::exp(nd(rng));
  }
  return p;
}

}  // namespace

TEST(DailyReturns, RatioArithmetic) {
  Matrix rd = compute_daily_returns(row({100, 110, 99}));
  ASSERT_EQ(rd.cols(), 2);
  EXPECT_NEAR(rd(0, 0), 0.10, 1e-15);
  EXPECT_NEAR(rd(0, 1), -0.10, 1e-15);
}

TEST(DailyReturns, ConstantPricesGiveZero) {
  Matrix rd = compute_daily_returns(row({50, 50, 50}));
  EXPECT_EQ(rd(0, 0), 0.0);
  EXPECT_EQ(rd(0, 1), 0.0);
}

TEST(DailyReturns, Errors) {
  try {
    compute_daily_returns(row({100}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientData);
  }
  try {
    compute_daily_returns(row({100, 0, 5}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidPrice);
  }
}

TEST(AnnualizeReturns, ZeroReturnsGiveOne) {
  Matrix rd = Matrix::Zero(2, 252);
  Vector r = annualize_returns(rd);
  EXPECT_DOUBLE_EQ(r(0), 1.0);
  EXPECT_DOUBLE_EQ(r(1), 1.0);
}

TEST(AnnualizeReturns, ConstantDailyReturn) {
  Matrix rd = Matrix::Constant(1, 252, 0.01);
  EXPECT_NEAR(annualize_returns(rd)(0), std::pow(1.01, 252), 1e-9 * std::pow(1.01, 252));
}

TEST(AnnualizeReturns, MatchesProductFormula) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ud(-0.05, 0.05);
  Matrix rd(3, 40);
  for (Eigen::Index i = 0; i < rd.size(); ++i) rd.data()[i] = ud(rng);
  Vector r = annualize_returns(rd);
  for (int i = 0; i < 3; ++i) {
    double prod = 1.0;
    for (int t = 0; t < 40; ++t) prod *= 1.0 + rd(i, t);
    const double expect = std::pow(prod, 252.0 / 40.0);
    EXPECT_NEAR(r(i), expect, 1e-12 * expect);
  }
}

TEST(AnnualizeReturns, TotalLossRejected) {
  try {
    annualize_returns(row({0.1, -1.0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonPositiveGrowth);
  }
}

TEST(AnnualizeReturns, DuplicatedSeriesUnchanged) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix rd = compute_daily_returns(random_prices(4, 30, rng));
    Matrix twice(rd.rows(), 2 * rd.cols());
    twice << rd, rd;
    Vector a = annualize_returns(rd), b = annualize_returns(twice);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(a(i), b(i), 1e-12 * a(i));
  }
}

TEST(AnnualizeCovariance, HandEvaluatedPair) {
  Matrix rd(2, 4);
  rd << 1, -1, 1, -1, -1, 1, -1, 1;
  Matrix s = annualize_covariance(rd);
  EXPECT_DOUBLE_EQ(s(0, 1), -252.0);
  EXPECT_DOUBLE_EQ(s(1, 0), -252.0);
}

TEST(AnnualizeCovariance, ConstantSeriesHasZeroRowAndColumn) {
  Matrix rd(3, 5);
  rd << 0.01, 0.02, -0.01, 0.0, 0.03, 0.02, 0.02, 0.02, 0.02, 0.02, -0.02, 0.01, 0.0, 0.01, 0.02;
  Matrix s = annualize_covariance(rd);
  for (int j = 0; j < 3; ++j) {
    EXPECT_NEAR(s(1, j), 0.0, 1e-15);
    EXPECT_NEAR(s(j, 1), 0.0, 1e-15);
  }
}

TEST(AnnualizeCovariance, IdenticalSeries) {
  Matrix rd(2, 6);
  rd.row(0) << 0.01, -0.02, 0.03, 0.0, 0.01, -0.01;
  rd.row(1) = rd.row(0);
  Matrix s = annualize_covariance(rd);
  EXPECT_GE(s(0, 0), 0.0);
  EXPECT_NEAR(s(0, 0), s(0, 1), 1e-15);
  EXPECT_NEAR(s(1, 1), s(0, 1), 1e-15);
}

TEST(AnnualizeCovariance, NeedsTwoColumns) {
  try {
    annualize_covariance(row({0.01}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientData);
  }
}

TEST(AnnualizeCovariance, RandomTablesSymmetricPsdAndMatchNaive) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 2 + trial % 7;
    const int T = 3 + (trial * 7) % 40;  // includes |T| < n (singular)
    Matrix rd = compute_daily_returns(random_prices(n, T, rng));
    Matrix s = annualize_covariance(rd);
    Matrix oracle = naive_covariance(rd);
    EXPECT_LE((s - oracle).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + oracle.cwiseAbs().maxCoeff()));
    EXPECT_LE((s - s.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    Eigen::SelfAdjointEigenSolver<Matrix> es(s);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8 * s.trace());
  }
}

TEST(PriceCsv, ParsesAndDropsIncompleteAssets) {
  std::istringstream in(
      "date,AAA,BBB,CCC\n"
      "2024-01-02,10,20,30\n"
      "2024-01-03,11,,31\n"
      "2024-01-04,12,22,32\n");
  PriceTable t = read_price_csv(in);
  ASSERT_EQ(t.assets, (std::vector<std::string>{"AAA", "CCC"}));
  ASSERT_EQ(t.num_dates(), 3u);
  EXPECT_EQ(t.prices(1, 2), 32.0);
}

TEST(PriceCsv, RejectsUnorderedDates) {
  std::istringstream in("date,A\n2024-01-03,1\n2024-01-02,2\n");
  EXPECT_THROW(read_price_csv(in), Error);
}

TEST(PriceCsv, RejectsBadDate) {
  std::istringstream in("date,A\n2024/01/03,1\n");
  EXPECT_THROW(read_price_csv(in), Error);
}

TEST(PriceCsv, RoundTrip) {
  PriceTable t = synthetic_prices({5, 10, 2, 9});
  std::ostringstream out;
  write_price_csv(out, t);
  std::istringstream in(out.str());
  PriceTable back = read_price_csv(in);
  EXPECT_EQ(back.assets, t.assets);
  EXPECT_EQ(back.dates, t.dates);
  EXPECT_EQ(back.prices, t.prices);
}

TEST(RandomPortfolio, SingleAsset) {
  Rng rng(1);
  Vector w = sample_random_portfolio(Vector::Ones(1), rng);
  EXPECT_EQ(w(0), 1.0);
}

TEST(RandomPortfolio, RespectsBoundsAndSumsToOne) {
  Rng rng(2);
  const Vector u = Vector::Constant(10, 0.3);
  for (int k = 0; k < 2000; ++k) {
    Vector w = sample_random_portfolio(u, rng);
    EXPECT_NEAR(w.sum(), 1.0, 1e-12);
    EXPECT_GE(w.minCoeff(), 0.0);
    EXPECT_LE((w - u).maxCoeff(), 0.0);
  }
}

TEST(RandomPortfolio, TightBounds) {
  Rng rng(9);
  const Vector u = Vector::Constant(10, 0.1);
  Vector w = sample_random_portfolio(u, rng);
  EXPECT_NEAR(w.sum(), 1.0, 1e-12);
  EXPECT_LE((w - u).maxCoeff(), 0.0);
}

TEST(RandomPortfolio, InfeasibleBounds) {
  Rng rng(1);
  try {
    sample_random_portfolio(Vector::Constant(3, 0.2), rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InfeasibleBounds);
  }
}

TEST(Quantile, NearestRank) {
  EXPECT_EQ(nearest_rank_quantile({5, 1, 4, 2, 3}, 0.7), 4.0);
  EXPECT_EQ(nearest_rank_quantile({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 0.7), 7.0);
  EXPECT_EQ(nearest_rank_quantile({3}, 0.7), 3.0);
}

TEST(BuildInstance, AssetLimits) {
  EXPECT_DOUBLE_EQ(testing_support::generated(10, 1).u(0), 0.3);
  const Instance big = testing_support::generated(50, 1);
  for (int i = 0; i < 50; ++i) EXPECT_DOUBLE_EQ(big.u(i), 0.1);
  EXPECT_DOUBLE_EQ(asset_limit(20), 0.15);
  EXPECT_DOUBLE_EQ(asset_limit(30), 0.1);
  EXPECT_DOUBLE_EQ(asset_limit(100), 0.1);
  EXPECT_DOUBLE_EQ(asset_limit(3), 1.0);
}

TEST(BuildInstance, ConstantReturnsGiveThatFloor) {
  AssetUniverse uni = universe();
  uni.r.setConstant(1.07);
  Instance inst = build_instance(uni, 12, 4);
  EXPECT_EQ(inst.epsilon, 1.07);
}

TEST(BuildInstance, Deterministic) {
  const Instance a = testing_support::generated(15, 77);
  const Instance b = testing_support::generated(15, 77);
  EXPECT_EQ(a.asset_ids, b.asset_ids);
  EXPECT_EQ(a.r, b.r);
  EXPECT_EQ(a.sigma, b.sigma);
  EXPECT_EQ(a.epsilon, b.epsilon);
  EXPECT_EQ(a.nu, b.nu);
  EXPECT_EQ(a.lambda, b.lambda);
  const Instance c = testing_support::generated(15, 78);
  EXPECT_NE(a.asset_ids, c.asset_ids);
}

TEST(BuildInstance, ParameterRules) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const int n = 5 + static_cast<int>(seed) * 9;
    const Instance inst = testing_support::generated(n, seed);
    EXPECT_GE(inst.epsilon, inst.r.minCoeff());
    EXPECT_LE(inst.epsilon, inst.r.maxCoeff());
    EXPECT_GE(inst.u.sum(), 1.0);
    EXPECT_GT(inst.nu, 0.0);
    EXPECT_GT(inst.lambda, 0.0);
    std::vector<std::string> ids = inst.asset_ids;
    std::sort(ids.begin(), ids.end());
    EXPECT_EQ(std::unique(ids.begin(), ids.end()), ids.end());
  }
}

TEST(BuildInstance, RecomputesNuAndLambda) {
  // Re-derive the cap and risk factor from the same random stream.
  BuildOptions opts;
  opts.num_random_portfolios = 200;
  const Instance inst = build_instance(universe(), 8, 21, opts);
  Rng rng(21);
  for (int i = 0; i < 8; ++i) uniform_index(rng, universe().size() - static_cast<std::size_t>(i));
  std::vector<double> vols;
  double ratio = 0.0;
  for (int k = 0; k < 200; ++k) {
    Vector w = sample_random_portfolio(inst.u, rng);
    vols.push_back(w.dot(inst.sigma * w));
    ratio += vols.back() / w.dot(inst.r);
  }
  std::sort(vols.begin(), vols.end());
  EXPECT_EQ(inst.nu, vols[139]);  // ceil(0.7 * 200) = 140th smallest
  EXPECT_NEAR(inst.lambda, ratio / 200.0, 1e-15);
}

TEST(BuildInstance, TooFewAssets) {
  try {
    build_instance(universe(), 500, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientUniverse);
  }
}

TEST(BuildInstance, NetReturnsOption) {
  BuildOptions opts;
  opts.net_returns = true;
  const Instance net = build_instance(universe(), 6, 3, opts);
  const Instance gross = build_instance(universe(), 6, 3);
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(net.r(i), gross.r(i) - 1.0, 1e-15);
}

TEST(InstanceJson, RoundTripFullPrecision) {
  const Instance inst = testing_support::generated(7, 5, Variant::MaxRet);
  const Instance back = instance_from_json(nlohmann::json::parse(to_json(inst).dump()));
  EXPECT_EQ(back.n, inst.n);
  EXPECT_EQ(back.asset_ids, inst.asset_ids);
  EXPECT_EQ(back.r, inst.r);
  EXPECT_EQ(back.sigma, inst.sigma);
  EXPECT_EQ(back.u, inst.u);
  EXPECT_EQ(back.epsilon, inst.epsilon);
  EXPECT_EQ(back.nu, inst.nu);
  EXPECT_EQ(back.lambda, inst.lambda);
  EXPECT_EQ(back.seed, inst.seed);
  EXPECT_EQ(back.window_start, inst.window_start);
  EXPECT_EQ(back.variant, Variant::MaxRet);
}

TEST(InstanceJson, SchemaKeys) {
  const auto j = to_json(testing_support::generated(3, 1));
  for (const char* key : {"n", "asset_ids", "r", "sigma", "u", "epsilon", "nu", "lambda", "seed", "source_window"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["sigma"].size(), 9u);
  EXPECT_TRUE(j["source_window"].contains("start"));
}

TEST(InstanceJson, SizeMismatchRejected) {
  auto j = to_json(testing_support::generated(3, 1));
  j["r"] = std::vector<double>{1.0, 2.0};
  EXPECT_THROW(instance_from_json(j), Error);
}

TEST(Universe, SyntheticMarketIsPsd) {
  const auto& u = universe();
  EXPECT_EQ(u.size(), 200u);
  EXPECT_LE((u.sigma - u.sigma.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  Eigen::SelfAdjointEigenSolver<Matrix> es(u.sigma);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8 * u.sigma.trace());
}
