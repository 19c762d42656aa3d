#include "rsspos/fit.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "rsspos/error.hpp"

namespace rsspos {

double evaluate_poly4(const Polynomial4& poly, double rss_dbm) {
  double acc = poly.p[0];
  for (std::size_t i = 1; i < poly.p.size(); ++i) acc = acc * rss_dbm + poly.p[i];
  return acc;
}

FitInput filter_near_field(std::span<const RssSample> samples, double cutoff_m) {
  FitInput input;
  input.min_distance_m = cutoff_m;
  for (const auto& s : samples) {
    if (!s.true_distance_m) {
      throw Error(ErrorCode::InvalidArgument, "sample at x=" + std::to_string(s.x_m) + " has no true distance");
    }
    if (*s.true_distance_m >= cutoff_m) input.pairs.push_back({s.rss_dbm, *s.true_distance_m});
  }
  if (input.pairs.size() < kPoly4Coefficients) {
    throw Error(ErrorCode::TooFewSamples, std::to_string(input.pairs.size()) + " pairs remain after cutoff " +
                                              std::to_string(cutoff_m) + " m; need 5");
  }
  return input;
}

Poly4Fit fit_poly4(const FitInput& input) {
  const auto n = static_cast<Eigen::Index>(input.pairs.size());
  if (input.pairs.size() < kPoly4Coefficients) {
    throw Error(ErrorCode::TooFewSamples, "quartic fit needs at least 5 pairs");
  }
  std::set<double> distinct;
  for (const auto& pr : input.pairs) {
    if (!std::isfinite(pr.rss_dbm) || !std::isfinite(pr.distance_m)) {
      throw Error(ErrorCode::InvalidArgument, "non-finite fit pair");
    }
    distinct.insert(pr.rss_dbm);
  }
  if (distinct.size() < kPoly4Coefficients) {
    throw Error(ErrorCode::RankDeficient,
                "only " + std::to_string(distinct.size()) + " distinct RSS values; need 5");
  }

  double mean = 0.0;
  for (const auto& pr : input.pairs) mean += pr.rss_dbm;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (const auto& pr : input.pairs) var += (pr.rss_dbm - mean) * (pr.rss_dbm - mean);
  const double scale = std::sqrt(var / static_cast<double>(n));

  Eigen::MatrixXd design(n, 5);
  Eigen::VectorXd target(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& pr = input.pairs[static_cast<std::size_t>(i)];
    const double z = (pr.rss_dbm - mean) / scale;
    double zp = 1.0;
    for (int j = 0; j < 5; ++j) {
      design(i, j) = zp;
      zp *= z;
    }
    target(i) = pr.distance_m;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < 5) throw Error(ErrorCode::RankDeficient, "design matrix is rank deficient");
  const Eigen::VectorXd a = qr.solve(target);  // coefficients of z^0..z^4

  // Expand sum_j a_j ((R - mean)/scale)^j into powers of R.
  std::array<double, 5> by_power{};  // by_power[m] multiplies R^m
  for (int j = 0; j < 5; ++j) {
    const double aj = a(j) / std::pow(scale, j);
    double binom = 1.0;
    for (int m = 0; m <= j; ++m) {
      by_power[static_cast<std::size_t>(m)] += aj * binom * std::pow(-mean, j - m);
      binom = binom * (j - m) / (m + 1);
    }
  }

  Poly4Fit fit;
  for (std::size_t m = 0; m < 5; ++m) fit.poly.p[4 - m] = by_power[m];

  std::vector<double> actual(input.pairs.size());
  std::vector<double> predicted(input.pairs.size());
  fit.rss_min_dbm = input.pairs.front().rss_dbm;
  fit.rss_max_dbm = input.pairs.front().rss_dbm;
  for (std::size_t i = 0; i < input.pairs.size(); ++i) {
    actual[i] = input.pairs[i].distance_m;
    predicted[i] = evaluate_poly4(fit.poly, input.pairs[i].rss_dbm);
    fit.rss_min_dbm = std::min(fit.rss_min_dbm, input.pairs[i].rss_dbm);
    fit.rss_max_dbm = std::max(fit.rss_max_dbm, input.pairs[i].rss_dbm);
  }
  fit.report = goodness_of_fit(actual, predicted, kPoly4Coefficients);
  return fit;
}

}  // namespace rsspos
