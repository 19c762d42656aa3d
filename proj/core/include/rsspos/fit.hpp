#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

#include "rsspos/channel.hpp"
#include "rsspos/metrics.hpp"

namespace rsspos {

/// Distance = p1*R^4 + p2*R^3 + p3*R^2 + p4*R + p5, R in dBm, distance in m.
/// `p[0]` is p1.
struct Polynomial4 {
  std::array<double, 5> p{};

  bool operator==(const Polynomial4&) const = default;
};

/// Horner evaluation.
double evaluate_poly4(const Polynomial4& poly, double rss_dbm);

struct RssDistancePair {
  double rss_dbm = 0.0;
  double distance_m = 0.0;
};

struct FitInput {
  std::vector<RssDistancePair> pairs;
  double min_distance_m = 0.0;
};

inline constexpr std::size_t kPoly4Coefficients = 5;

/// Keeps the samples with true_distance_m >= cutoff_m, in input order.
/// Throws InvalidArgument if a sample lacks a true distance and TooFewSamples if
/// fewer than 5 pairs remain.
FitInput filter_near_field(std::span<const RssSample> samples, double cutoff_m);

struct Poly4Fit {
  Polynomial4 poly;
  FitReport report;
  double rss_min_dbm = 0.0;  ///< calibrated RSS domain
  double rss_max_dbm = 0.0;
};

/// Least-squares quartic. Solved in the standardized predictor
/// z = (R - mean) / std with a Householder QR, then expanded back to raw-R
/// coefficients. The report uses the expanded coefficients and k = 5.
Poly4Fit fit_poly4(const FitInput& input);

}  // namespace rsspos
