// Acceptance suite: runs every criterion at its stated tolerance and prints
// one PASS/FAIL line each. Exit status is non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "harness/harness.hpp"
#include "oracles.hpp"
#include "rsspos/channel.hpp"
#include "rsspos/error.hpp"
#include "rsspos/fit.hpp"
#include "rsspos/geometry.hpp"
#include "rsspos/metrics.hpp"
#include "rsspos/nn.hpp"
#include "rsspos/random.hpp"

using namespace rsspos;

namespace {

const std::string kConfigDir = RSSPOS_SOURCE_DIR "/configs";

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

Outcome metric_conventions() {
  const auto a = fit_report_from_sums(422.7, 422.7 / (1.0 - 0.9917), 29, 5);
  const auto b = fit_report_from_sums(85.13, 85.13 / (1.0 - 0.9956), 21, 5);
  const bool ok = std::abs(a.rmse - 4.197) <= 0.001 && std::abs(a.adj_r_square - 0.9903) <= 0.0001 &&
                  std::abs(b.rmse - 2.307) <= 0.001 && std::abs(b.adj_r_square - 0.9945) <= 0.0001;
  return {ok, fmt("rmse %.4f adjR2 %.5f | rmse %.4f adjR2 %.5f", a.rmse, a.adj_r_square, b.rmse, b.adj_r_square)};
}

Outcome variance_convention() {
  // 41 errors, zero mean, mse 6.
  std::vector<double> actual(41), predicted(41);
  const double amp = std::sqrt(6.0 * 41.0 / 40.0);
  for (int i = 0; i < 41; ++i) {
    actual[static_cast<std::size_t>(i)] = 100.0 + i;
    const double e = i == 40 ? 0.0 : (i % 2 == 0 ? amp : -amp);
    predicted[static_cast<std::size_t>(i)] = actual[static_cast<std::size_t>(i)] + e;
  }
  const auto r = regression_metrics(actual, predicted);
  const bool ok =
      std::abs(r.mse - 6.0) < 1e-9 && std::abs(r.variance - 6.15) < 0.005 && std::abs(r.std_dev - 2.48) < 0.005;
  return {ok, fmt("mse %.4f variance %.4f std %.4f", r.mse, r.variance, r.std_dev)};
}

Outcome sample_counts() {
  const auto survey = generate_survey(default_layout(), ChannelModel{}, 1);
  const auto samples = survey.for_rsu("ap200");
  const auto n60 = filter_near_field(samples, 60.0).pairs.size();
  const auto n100 = filter_near_field(samples, 100.0).pairs.size();
  return {n60 == 29 && n100 == 21, fmt("n(60) = %zu, n(100) = %zu", n60, n100)};
}

Outcome cutoff_improvement() {
  const auto config = harness::load_config(kConfigDir + "/exp2_clean.json");
  int wins = 0;
  double sum60 = 0.0, sum100 = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto survey = generate_survey(config.layout, config.channel, seed);
    const auto samples = survey.for_rsu("ap200");
    const double r60 = fit_poly4(filter_near_field(samples, 60.0)).report.rmse;
    const double r100 = fit_poly4(filter_near_field(samples, 100.0)).report.rmse;
    if (r100 < r60) ++wins;
    sum60 += r60;
    sum100 += r100;
  }
  return {wins >= 16, fmt("%d/20 runs improve; mean rmse %.3f -> %.3f m", wins, sum60 / 20, sum100 / 20)};
}

double best_max_error(const std::string& config_name) {
  const auto config = harness::load_config(kConfigDir + "/" + config_name);
  const auto survey = generate_survey(config.layout, config.channel, config.seed);
  SweepConfig sweep_config;
  sweep_config.train.learning_rate = 0.1;
  sweep_config.train.max_epochs = 5000;
  sweep_config.train.patience = 6;
  const auto rows = sweep(dataset_from_survey(survey.samples), sweep_config);
  return rows.front().all.max_abs_error;
}

Outcome interference_degradation() {
  const double clean = best_max_error("exp2_clean.json");
  const double co = best_max_error("exp1_cochannel.json");
  const double ratio = co / clean;
  return {ratio >= 3.0, fmt("best max error %.2f m co-channel vs %.2f m clean, ratio %.2f", co, clean, ratio)};
}

Outcome gradient_check() {
  Rng rng(4242);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const int inputs = 1 + static_cast<int>(rng.below(3));
    const int hidden = 1 + static_cast<int>(rng.below(10));
    const std::size_t n = 10 + rng.below(32);
    NnDataset data;
    data.inputs.resize(static_cast<Eigen::Index>(n), inputs);
    data.targets.resize(static_cast<Eigen::Index>(n));
    for (Eigen::Index r = 0; r < data.inputs.rows(); ++r) {
      for (Eigen::Index c = 0; c < inputs; ++c) data.inputs(r, c) = rng.uniform(-95, -40);
      data.targets(r) = rng.uniform(0, 200);
    }
    for (int c = 0; c < inputs; ++c) data.feature_names.push_back("f" + std::to_string(c));
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    MlpModel model = init_mlp(inputs, hidden, 100 + static_cast<std::uint64_t>(trial));
    for (Eigen::Index i = 0; i < model.b_hidden.size(); ++i) model.b_hidden(i) = rng.uniform(-0.5, 0.5);
    model.b_out = rng.uniform(-0.5, 0.5);
    fit_normalization(model, data, rows);

    const auto analytic = oracle::flatten(gradients(model, data, rows));
    const auto numeric = oracle::finite_difference_gradients(model, data, rows);
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      // Relative error, with components below 1e-4 compared on that scale
      // since central differences carry ~1e-10 absolute truncation noise.
      const double scale = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-4});
      worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / scale);
    }
  }
  return {worst <= 1e-6, fmt("worst relative deviation %.2e over 10 networks", worst)};
}

Outcome multilateration_oracle() {
  Rng rng(777);
  double worst_noiseless = 0.0;
  for (int i = 0; i < 100; ++i) {
    const LocalPoint truth{rng.uniform(0, 200), rng.uniform(-30, 30), 0.0};
    std::vector<AnchorRange> ranges;
    for (int k = 0; k < 3; ++k) {
      const LocalPoint a{rng.uniform(0, 200), rng.uniform(-30, 30), 0.0};
      ranges.push_back({a, distance(a, truth)});
    }
    // Odd cases start from a hint up to 10 m off, even ones from no hint.
    const LocalPoint hint{truth.x_m + rng.uniform(-10, 10), truth.y_m + rng.uniform(-10, 10), 0.0};
    const LocalPoint fix = i % 2 == 1 ? multilaterate(ranges, SolveMode::TwoD, hint)
                                      : multilaterate(ranges, SolveMode::TwoD);
    worst_noiseless = std::max(worst_noiseless, std::hypot(fix.x_m - truth.x_m, fix.y_m - truth.y_m));
  }

  double worst_noisy = 0.0;
  for (int i = 0; i < 20; ++i) {
    const LocalPoint truth{rng.uniform(20, 180), rng.uniform(-20, 20), 0.0};
    std::vector<AnchorRange> ranges;
    for (int k = 0; k < 3; ++k) {
      const LocalPoint a{rng.uniform(0, 200), rng.uniform(-30, 30), 0.0};
      ranges.push_back({a, std::max(0.0, distance(a, truth) + rng.normal(0.0, 2.0))});
    }
    const LocalPoint hint{truth.x_m + rng.uniform(-3, 3), truth.y_m + rng.uniform(-3, 3), 0.0};
    const LocalPoint fix = multilaterate(ranges, SolveMode::TwoD, hint);
    const auto grid = oracle::grid_minimize_2d(ranges, 0.0, truth.x_m - 40, truth.x_m + 40, truth.y_m - 40,
                                               truth.y_m + 40);
    worst_noisy = std::max(worst_noisy, std::hypot(fix.x_m - grid.x, fix.y_m - grid.y));
  }
  return {worst_noiseless <= 1e-6 && worst_noisy <= 0.05,
          fmt("noiseless worst %.2e m, noisy worst %.4f m from grid minimizer", worst_noiseless, worst_noisy)};
}

Outcome fit_recovery() {
  const Polynomial4 truth{{1.5e-5, 2.0e-3, 0.15, 3.0, 80.0}};
  FitInput in;
  for (int i = 0; i < 25; ++i) {
    const double r = -92.0 + 32.0 * i / 24.0;
    in.pairs.push_back({r, oracle::poly4_power_sum(truth, r)});
  }
  const auto fit = fit_poly4(in);
  double worst_pred = 0.0;
  for (double r = -92.0; r <= -60.0; r += 0.1) {
    worst_pred = std::max(worst_pred, std::abs(evaluate_poly4(fit.poly, r) - oracle::poly4_power_sum(truth, r)));
  }

  Rng rng(99);
  bool horner_ok = true;
  for (int i = 0; i < 200 && horner_ok; ++i) {
    Polynomial4 p;
    for (auto& c : p.p) c = rng.uniform(-5, 5);
    const double r = rng.uniform(-100, -40);
    horner_ok = oracle::close_relative(evaluate_poly4(p, r), oracle::poly4_power_sum(p, r), 1e-9);
  }
  const Polynomial4 field{{-0.005206, -1.553, -173.5, -8608.0, -1.601e5}};
  const double at80 = evaluate_poly4(field, -80.0);
  const bool field_ok = oracle::close_relative(at80, oracle::poly4_power_sum(field, -80.0), 1e-9);
  return {worst_pred <= 1e-6 && horner_ok && field_ok,
          fmt("recovery worst %.2e m; field quartic at -80 dBm = %.4f m", worst_pred, at80)};
}

Outcome end_to_end_drive() {
  const auto config = harness::load_config(kConfigDir + "/drive_outage.json");
  const auto first = harness::run_drive(config);
  const auto second = harness::run_drive(config);

  std::size_t wrong_source = 0;
  for (const auto& row : first.rows) {
    // Satellites and corrections both present -> DGPS, anything else -> RSS.
    const bool dgps = !config.in_outage(row.x_true_m) && config.dgps_corrections;
    const FixSource expected = dgps ? FixSource::Dgps : FixSource::Rss;
    if (row.source != expected) ++wrong_source;
  }
  auto render = [](const harness::DriveResult& r) {
    std::ostringstream out;
    harness::write_trace_csv(out, r.rows);
    harness::print_summary(out, r.summary);
    return out.str();
  };
  const bool identical = render(first) == render(second);
  const auto& s = first.summary;
  const bool accurate = s.outage_steps > 0 && s.outage_max_abs_error_m <= 2.0 * s.calibration_rmse_m;
  return {wrong_source == 0 && identical && accurate,
          fmt("%zu/%zu steps on the expected source; outage max error %.3f m vs 2 x rmse %.3f m; reruns %s",
              first.rows.size() - wrong_source, first.rows.size(), s.outage_max_abs_error_m,
              2.0 * s.calibration_rmse_m, identical ? "identical" : "DIFFER")};
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "metric conventions", 1.0, metric_conventions},
      {2, "variance convention", 1.0, variance_convention},
      {3, "sample-count geometry", 1.0, sample_counts},
      {4, "cutoff improvement", 10.0, cutoff_improvement},
      {5, "interference degradation", 300.0, interference_degradation},
      {6, "gradient correctness", 5.0, gradient_check},
      {7, "multilateration oracle", 30.0, multilateration_oracle},
      {8, "fit recovery", 1.0, fit_recovery},
      {9, "end-to-end drive", 10.0, end_to_end_drive},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("threw: ") + e.what()};
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = elapsed < c.limit_s;
    const bool pass = outcome.pass && in_time;
    if (!pass) ++failures;
    std::printf("%s  %d  %-26s %s [%.2f s, limit %.0f s%s]\n", pass ? "PASS" : "FAIL", c.id, c.name,
                outcome.detail.c_str(), elapsed, c.limit_s, in_time ? "" : ", TOO SLOW");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
