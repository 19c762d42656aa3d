#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "rsspos/error.hpp"
#include "rsspos/metrics.hpp"
#include "rsspos/random.hpp"

using namespace rsspos;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected rsspos::Error";
  return ErrorCode::InvalidArgument;
}

void expect_rel(double a, double b, double tol) {
  EXPECT_TRUE(oracle::close_relative(a, b, tol, 1e-300)) << a << " vs " << b;
}

}  // namespace

TEST(RegressionMetrics, PerfectPrediction) {
  const std::vector<double> a{1, 2, 3, 4};
  const auto r = regression_metrics(a, a);
  EXPECT_EQ(r.mse, 0.0);
  EXPECT_EQ(r.max_abs_error, 0.0);
  EXPECT_EQ(r.variance, 0.0);
  EXPECT_DOUBLE_EQ(r.correlation, 1.0);
  EXPECT_EQ(r.n, 4u);
}

TEST(RegressionMetrics, HandArithmetic) {
  const std::vector<double> actual{0, 0, 0};
  const std::vector<double> predicted{1, -1, 2};
  const auto r = regression_metrics(actual, predicted, ConstantSeries::NanCorrelation);
  EXPECT_DOUBLE_EQ(r.mse, 2.0);
  EXPECT_DOUBLE_EQ(r.max_abs_error, 2.0);
  EXPECT_NEAR(r.variance, (1.0 / 9 + 25.0 / 9 + 16.0 / 9) / 2.0, 1e-12);
  EXPECT_TRUE(std::isnan(r.correlation));
}

TEST(RegressionMetrics, VarianceUsesSampleDenominator) {
  // 41 errors with zero mean and mse 6: +-sqrt(6) pairs plus one extra that
  // keeps the mean at zero.
  std::vector<double> actual(41, 0.0), predicted(41, 0.0);
  const double a = std::sqrt(6.0 * 41.0 / 40.0);
  for (int i = 0; i < 40; ++i) predicted[static_cast<std::size_t>(i)] = i % 2 == 0 ? a : -a;
  for (int i = 0; i < 41; ++i) actual[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < 41; ++i) predicted[static_cast<std::size_t>(i)] += i;
  const auto r = regression_metrics(actual, predicted);
  EXPECT_NEAR(r.mse, 6.0, 1e-12);
  EXPECT_NEAR(r.variance, 6.15, 1e-12);
  EXPECT_NEAR(r.std_dev, 2.48, 0.005);
}

TEST(RegressionMetrics, Errors) {
  const std::vector<double> a{1, 2, 3}, b{1, 2};
  EXPECT_EQ(code_of([&] { regression_metrics(a, b); }), ErrorCode::LengthMismatch);
  const std::vector<double> one{1};
  EXPECT_EQ(code_of([&] { regression_metrics(one, one); }), ErrorCode::TooFewSamples);
  const std::vector<double> flat{2, 2, 2}, varied{1, 2, 3};
  EXPECT_EQ(code_of([&] { regression_metrics(flat, varied); }), ErrorCode::ZeroVariance);
  EXPECT_EQ(code_of([&] { regression_metrics(varied, flat); }), ErrorCode::ZeroVariance);
}

TEST(RegressionMetrics, MatchesNaiveOracleAndIdentity) {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.below(60);
    std::vector<double> actual(n), predicted(n);
    for (std::size_t i = 0; i < n; ++i) {
      actual[i] = rng.uniform(-100, 300);
      predicted[i] = actual[i] + rng.normal(rng.uniform(-3, 3), rng.uniform(0.1, 20));
    }
    const auto r = regression_metrics(actual, predicted);
    const auto o = oracle::regression_metrics(actual, predicted);
    expect_rel(r.mse, o.mse, 1e-12);
    expect_rel(r.max_abs_error, o.max_abs_error, 1e-12);
    expect_rel(r.variance, o.variance, 1e-12);
    expect_rel(r.std_dev, o.std_dev, 1e-12);
    expect_rel(r.correlation, o.correlation, 1e-12);

    double mean_e = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean_e += predicted[i] - actual[i];
    mean_e /= static_cast<double>(n);
    const double dn = static_cast<double>(n);
    expect_rel(r.mse, r.variance * (dn - 1) / dn + mean_e * mean_e, 1e-12);
    EXPECT_LE(std::abs(r.correlation), 1.0);
  }
}

TEST(RegressionMetrics, JointPermutationSymmetry) {
  Rng rng(8);
  std::vector<std::pair<double, double>> pairs;
  for (int i = 0; i < 30; ++i) pairs.emplace_back(rng.uniform(0, 200), rng.uniform(0, 200));
  auto split = [](const auto& ps) {
    std::vector<double> a, p;
    for (const auto& [x, y] : ps) {
      a.push_back(x);
      p.push_back(y);
    }
    return std::pair{a, p};
  };
  const auto [a0, p0] = split(pairs);
  const auto r0 = regression_metrics(a0, p0);
  rng.shuffle(pairs.begin(), pairs.end());
  const auto [a1, p1] = split(pairs);
  const auto r1 = regression_metrics(a1, p1);
  expect_rel(r0.mse, r1.mse, 1e-12);
  EXPECT_EQ(r0.max_abs_error, r1.max_abs_error);
  expect_rel(r0.variance, r1.variance, 1e-12);
  expect_rel(r0.correlation, r1.correlation, 1e-12);
}

TEST(GoodnessOfFit, FieldCalibrationReports) {
  // SSE and R^2 of the field fits; n from the survey geometry; k = 5 coefficients.
  const auto a = fit_report_from_sums(422.7, 422.7 / (1.0 - 0.9917), 29, 5);
  EXPECT_NEAR(a.rmse, 4.197, 0.001);
  EXPECT_NEAR(a.adj_r_square, 0.9903, 0.0001);
  const auto b = fit_report_from_sums(85.13, 85.13 / (1.0 - 0.9956), 21, 5);
  EXPECT_NEAR(b.rmse, 2.307, 0.001);
  EXPECT_NEAR(b.adj_r_square, 0.9945, 0.0001);
}

TEST(GoodnessOfFit, PerfectFit) {
  const std::vector<double> a{1, 4, 9, 16, 25, 36, 49};
  const auto r = goodness_of_fit(a, a, 5);
  EXPECT_EQ(r.sse, 0.0);
  EXPECT_EQ(r.r_square, 1.0);
  EXPECT_EQ(r.rmse, 0.0);
}

TEST(GoodnessOfFit, MatchesNaiveOracle) {
  Rng rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 6 + rng.below(50);
    std::vector<double> actual(n), predicted(n);
    for (std::size_t i = 0; i < n; ++i) {
      actual[i] = rng.uniform(50, 200);
      predicted[i] = actual[i] + rng.normal(0, 5);
    }
    const auto r = goodness_of_fit(actual, predicted, 5);
    const auto o = oracle::goodness_of_fit(actual, predicted, 5);
    expect_rel(r.sse, o.sse, 1e-12);
    expect_rel(r.r_square, o.r_square, 1e-12);
    expect_rel(r.adj_r_square, o.adj_r_square, 1e-12);
    expect_rel(r.rmse, o.rmse, 1e-12);
  }
}

TEST(GoodnessOfFit, Errors) {
  const std::vector<double> five{1, 2, 3, 4, 5};
  EXPECT_EQ(code_of([&] { goodness_of_fit(five, five, 5); }), ErrorCode::TooFewSamples);
  const std::vector<double> flat(8, 3.0);
  EXPECT_EQ(code_of([&] { goodness_of_fit(flat, flat, 5); }), ErrorCode::ZeroTotalVariance);
  const std::vector<double> shorter{1, 2};
  EXPECT_EQ(code_of([&] { goodness_of_fit(five, shorter, 1); }), ErrorCode::LengthMismatch);
}
