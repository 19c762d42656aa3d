#include "rsspos/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rsspos/error.hpp"

namespace rsspos {
namespace {

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

void check_pair(std::span<const double> actual, std::span<const double> predicted) {
  if (actual.size() != predicted.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(actual.size()) + " actual vs " +
                                               std::to_string(predicted.size()) + " predicted");
  }
}

}  // namespace

MetricsReport regression_metrics(std::span<const double> actual, std::span<const double> predicted,
                                 ConstantSeries on_constant) {
  check_pair(actual, predicted);
  const std::size_t n = actual.size();
  if (n < 2) throw Error(ErrorCode::TooFewSamples, "regression metrics need n >= 2");

  MetricsReport report;
  report.n = n;
  double sum_e = 0.0;
  double sum_e2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = predicted[i] - actual[i];
    sum_e += e;
    sum_e2 += e * e;
    report.max_abs_error = std::max(report.max_abs_error, std::abs(e));
  }
  const auto nd = static_cast<double>(n);
  report.mse = sum_e2 / nd;
  const double mean_e = sum_e / nd;
  double ss_e = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = predicted[i] - actual[i] - mean_e;
    ss_e += d * d;
  }
  report.variance = ss_e / (nd - 1.0);
  report.std_dev = std::sqrt(report.variance);

  const double mean_a = mean_of(actual);
  const double mean_p = mean_of(predicted);
  double saa = 0.0, spp = 0.0, sap = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = actual[i] - mean_a;
    const double dp = predicted[i] - mean_p;
    saa += da * da;
    spp += dp * dp;
    sap += da * dp;
  }
  if (saa == 0.0 || spp == 0.0) {
    if (on_constant == ConstantSeries::NanCorrelation) {
      report.correlation = std::numeric_limits<double>::quiet_NaN();
      return report;
    }
    throw Error(ErrorCode::ZeroVariance, "correlation undefined for a constant series");
  }
  report.correlation = std::clamp(sap / std::sqrt(saa * spp), -1.0, 1.0);
  return report;
}

FitReport fit_report_from_sums(double sse, double sst, std::size_t n, std::size_t k) {
  if (n <= k) {
    throw Error(ErrorCode::TooFewSamples,
                "need n > k (n = " + std::to_string(n) + ", k = " + std::to_string(k) + ")");
  }
  if (!(sst > 0.0)) throw Error(ErrorCode::ZeroTotalVariance, "actual values are constant");
  if (sse < 0.0) throw Error(ErrorCode::InvalidArgument, "negative SSE");
  const auto nd = static_cast<double>(n);
  const auto kd = static_cast<double>(k);
  FitReport report;
  report.sse = sse;
  report.n = n;
  report.k = k;
  report.r_square = 1.0 - sse / sst;
  report.adj_r_square = 1.0 - (1.0 - report.r_square) * (nd - 1.0) / (nd - kd);
  report.rmse = std::sqrt(sse / (nd - kd));
  return report;
}

FitReport goodness_of_fit(std::span<const double> actual, std::span<const double> predicted, std::size_t k) {
  check_pair(actual, predicted);
  if (actual.size() <= k) {
    throw Error(ErrorCode::TooFewSamples, "need more samples than coefficients");
  }
  const double mean_a = mean_of(actual);
  double sse = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double r = actual[i] - predicted[i];
    const double d = actual[i] - mean_a;
    sse += r * r;
    sst += d * d;
  }
  return fit_report_from_sums(sse, sst, actual.size(), k);
}

}  // namespace rsspos
