#pragma once

#include <cstddef>
#include <span>

namespace rsspos {

/// Error statistics for a set of predictions, with errors e = predicted - actual.
struct MetricsReport {
  double mse = 0.0;
  double max_abs_error = 0.0;
  double std_dev = 0.0;
  double variance = 0.0;     ///< sample variance of e (n - 1 denominator)
  double correlation = 0.0;  ///< Pearson(actual, predicted)
  std::size_t n = 0;
};

enum class ConstantSeries { Throw, NanCorrelation };

/// Requires equal lengths and n >= 2. When either series is constant the
/// correlation is undefined: throws ZeroVariance, or reports NaN if asked to.
MetricsReport regression_metrics(std::span<const double> actual, std::span<const double> predicted,
                                 ConstantSeries on_constant = ConstantSeries::Throw);

/// Goodness of fit of a k-coefficient model.
struct FitReport {
  double sse = 0.0;
  double r_square = 0.0;
  double adj_r_square = 0.0;
  double rmse = 0.0;  ///< sqrt(sse / (n - k))
  std::size_t n = 0;
  std::size_t k = 0;
};

FitReport goodness_of_fit(std::span<const double> actual, std::span<const double> predicted, std::size_t k);

/// Same statistics from the sums of squares alone (SSE and total SS).
FitReport fit_report_from_sums(double sse, double sst, std::size_t n, std::size_t k);

}  // namespace rsspos
