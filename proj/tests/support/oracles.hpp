#pragma once

// Independent reference computations used to check the library. Nothing here
// calls into the code under test except for plain data types and the network
// loss (the finite-difference oracle differentiates it numerically).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "rsspos/fit.hpp"
#include "rsspos/geometry.hpp"
#include "rsspos/metrics.hpp"
#include "rsspos/nn.hpp"

namespace oracle {

inline double range_objective(const std::vector<rsspos::AnchorRange>& ranges, double x, double y, double z) {
  double sum = 0.0;
  for (const auto& ar : ranges) {
    const double dx = x - ar.anchor.x_m;
    const double dy = y - ar.anchor.y_m;
    const double dz = z - ar.anchor.z_m;
    const double r = std::sqrt(dx * dx + dy * dy + dz * dz) - ar.range_m;
    sum += r * r;
  }
  return sum;
}

struct GridMinimum {
  double x = 0.0;
  double y = 0.0;
  double cost = std::numeric_limits<double>::infinity();
};

// Exhaustive grid search for the 2D objective in the plane z = `z`. A 1 m scan
// over [x0, x1] x [y0, y1] picks candidate cells; each of the best `keep`
// separated candidates is rescanned on a `fine` grid over +-1.5 m.
inline GridMinimum grid_minimize_2d(const std::vector<rsspos::AnchorRange>& ranges, double z, double x0, double x1,
                                    double y0, double y1, double fine = 0.01, std::size_t keep = 8) {
  std::vector<GridMinimum> coarse;
  for (double x = x0; x <= x1 + 1e-9; x += 1.0) {
    for (double y = y0; y <= y1 + 1e-9; y += 1.0) coarse.push_back({x, y, range_objective(ranges, x, y, z)});
  }
  std::sort(coarse.begin(), coarse.end(), [](const GridMinimum& a, const GridMinimum& b) { return a.cost < b.cost; });
  std::vector<GridMinimum> seeds;
  for (const auto& c : coarse) {
    const bool near_existing = std::any_of(seeds.begin(), seeds.end(), [&](const GridMinimum& s) {
      return std::abs(s.x - c.x) < 3.0 && std::abs(s.y - c.y) < 3.0;
    });
    if (!near_existing) seeds.push_back(c);
    if (seeds.size() >= keep) break;
  }
  GridMinimum best;
  const int steps = static_cast<int>(std::lround(1.5 / fine));
  for (const auto& s : seeds) {
    for (int i = -steps; i <= steps; ++i) {
      for (int j = -steps; j <= steps; ++j) {
        const double x = s.x + i * fine;
        const double y = s.y + j * fine;
        const double c = range_objective(ranges, x, y, z);
        if (c < best.cost) best = {x, y, c};
      }
    }
  }
  return best;
}

// Power-sum evaluation, p1 R^4 + ... + p5, with std::pow.
inline double poly4_power_sum(const rsspos::Polynomial4& poly, double r) {
  double sum = 0.0;
  for (int i = 0; i < 5; ++i) sum += poly.p[static_cast<std::size_t>(i)] * std::pow(r, 4 - i);
  return sum;
}

// Textbook statistics in long double, one quantity per pass.
inline rsspos::MetricsReport regression_metrics(const std::vector<double>& actual, const std::vector<double>& predicted) {
  const std::size_t n = actual.size();
  std::vector<long double> e(n);
  for (std::size_t i = 0; i < n; ++i) e[i] = static_cast<long double>(predicted[i]) - actual[i];

  long double sq = 0.0L, mx = 0.0L, mean_e = 0.0L;
  for (auto v : e) sq += v * v;
  for (auto v : e) mx = std::max(mx, std::fabs(v));
  for (auto v : e) mean_e += v;
  mean_e /= static_cast<long double>(n);
  long double var = 0.0L;
  for (auto v : e) var += (v - mean_e) * (v - mean_e);
  var /= static_cast<long double>(n - 1);

  long double ma = 0.0L, mp = 0.0L;
  for (std::size_t i = 0; i < n; ++i) ma += actual[i];
  for (std::size_t i = 0; i < n; ++i) mp += predicted[i];
  ma /= static_cast<long double>(n);
  mp /= static_cast<long double>(n);
  long double sap = 0.0L, saa = 0.0L, spp = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    const long double a = actual[i] - ma;
    const long double p = predicted[i] - mp;
    sap += a * p;
    saa += a * a;
    spp += p * p;
  }

  rsspos::MetricsReport r;
  r.n = n;
  r.mse = static_cast<double>(sq / static_cast<long double>(n));
  r.max_abs_error = static_cast<double>(mx);
  r.variance = static_cast<double>(var);
  r.std_dev = static_cast<double>(std::sqrt(var));
  r.correlation = static_cast<double>(sap / std::sqrt(saa * spp));
  return r;
}

inline rsspos::FitReport goodness_of_fit(const std::vector<double>& actual, const std::vector<double>& predicted,
                                         std::size_t k) {
  const std::size_t n = actual.size();
  long double mean = 0.0L;
  for (double a : actual) mean += a;
  mean /= static_cast<long double>(n);
  long double sse = 0.0L, sst = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    const long double r = static_cast<long double>(actual[i]) - predicted[i];
    sse += r * r;
    sst += (actual[i] - mean) * (actual[i] - mean);
  }
  rsspos::FitReport f;
  f.n = n;
  f.k = k;
  f.sse = static_cast<double>(sse);
  f.r_square = static_cast<double>(1.0L - sse / sst);
  f.adj_r_square = static_cast<double>(1.0L - (sse / sst) * static_cast<long double>(n - 1) /
                                                  static_cast<long double>(n - k));
  f.rmse = static_cast<double>(std::sqrt(sse / static_cast<long double>(n - k)));
  return f;
}

// Central differences of the normalized loss with respect to every parameter,
// flattened in the order w_hidden (column-major), b_hidden, w_out, b_out.
inline std::vector<double> finite_difference_gradients(const rsspos::MlpModel& model, const rsspos::NnDataset& data,
                                                       const std::vector<std::size_t>& rows, double h = 1e-5) {
  std::vector<double> out;
  auto probe = [&](auto&& param) {
    rsspos::MlpModel plus = model, minus = model;
    param(plus) += h;
    param(minus) -= h;
    out.push_back((rsspos::normalized_loss(plus, data, rows) - rsspos::normalized_loss(minus, data, rows)) / (2 * h));
  };
  for (Eigen::Index c = 0; c < model.w_hidden.cols(); ++c) {
    for (Eigen::Index r = 0; r < model.w_hidden.rows(); ++r) {
      probe([&](rsspos::MlpModel& m) -> double& { return m.w_hidden(r, c); });
    }
  }
  for (Eigen::Index i = 0; i < model.b_hidden.size(); ++i) {
    probe([&](rsspos::MlpModel& m) -> double& { return m.b_hidden(i); });
  }
  for (Eigen::Index i = 0; i < model.w_out.size(); ++i) {
    probe([&](rsspos::MlpModel& m) -> double& { return m.w_out(i); });
  }
  probe([](rsspos::MlpModel& m) -> double& { return m.b_out; });
  return out;
}

inline std::vector<double> flatten(const rsspos::MlpGradients& g) {
  std::vector<double> out(g.w_hidden.data(), g.w_hidden.data() + g.w_hidden.size());
  out.insert(out.end(), g.b_hidden.data(), g.b_hidden.data() + g.b_hidden.size());
  out.insert(out.end(), g.w_out.data(), g.w_out.data() + g.w_out.size());
  out.push_back(g.b_out);
  return out;
}

// |a - b| <= tol * max(|a|, |b|), with `floor` guarding values that are
// numerically zero.
inline bool close_relative(double a, double b, double tol, double floor = 1e-9) {
  return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace oracle
