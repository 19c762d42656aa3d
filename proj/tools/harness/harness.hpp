#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rsspos/channel.hpp"
#include "rsspos/fit.hpp"
#include "rsspos/nn.hpp"
#include "rsspos/positioning.hpp"

namespace rsspos::harness {

enum class EstimatorKind { Polynomial, Network };

struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::Polynomial;
  double cutoff_m = 60.0;  ///< near-field cutoff for polynomial calibration
  int hidden = 10;         ///< network hidden units
  std::uint64_t nn_seed = 1;
  TrainConfig train;
};

/// One experiment: where the RSUs are, how the channel behaves, where GPS is
/// lost and which estimator backs the RSS fallback.
struct ScenarioConfig {
  SurveyLayout layout = default_layout();
  ChannelModel channel;
  std::vector<std::pair<double, double>> gps_outages;  ///< [x_start, x_end] meters
  bool dgps_corrections = true;
  double speed_mps = 10.0;
  GlobalPosition origin;
  SelectionPolicy policy;
  EstimatorConfig estimator;
  std::uint64_t seed = 1;

  void validate() const;
  bool in_outage(double x_m) const;
};

/// Parses the four-section JSON document (`layout`, `channel`, `scenario`,
/// `estimator`). Missing keys keep their defaults; unknown keys throw
/// InvalidArgument.
ScenarioConfig parse_config(const nlohmann::json& doc);
ScenarioConfig load_config(const std::string& path);

/// Per-RSU quartics fitted on a survey with the given near-field cutoff.
PolynomialRanging calibrate_polynomials(const SurveyDataset& survey, double cutoff_m);

/// Single network trained on the pivoted survey.
NnPositioning calibrate_network(const SurveyDataset& survey, const EstimatorConfig& config);

/// Flat report object: p1..p5, sse, r_square, adj_r_square, rmse, n.
nlohmann::json fit_report_json(const Poly4Fit& fit);

struct TraceRow {
  double t_s = 0.0;
  double x_true_m = 0.0;
  double x_est_m = 0.0;
  double y_est_m = 0.0;
  FixSource source = FixSource::Dgps;
  std::vector<std::string> used_rsus;
  double quality_m = 0.0;
  double abs_error_m = 0.0;  ///< |x_est - x_true| as written (4 decimals)
  bool in_outage = false;
};

struct DriveSummary {
  std::size_t steps = 0;
  double mean_abs_error_m = 0.0;
  double max_abs_error_m = 0.0;
  std::size_t outage_steps = 0;
  double outage_mean_abs_error_m = 0.0;
  double outage_max_abs_error_m = 0.0;
  double calibration_rmse_m = 0.0;  ///< largest calibration RMSE of the estimator
};

struct DriveResult {
  std::vector<TraceRow> rows;
  DriveSummary summary;
  RangeEstimator estimator;
};

/// Calibrates the estimator on a survey drawn with the scenario seed, then
/// drives start..end in layout steps with independent beacon noise.
/// Errors from `locate` (NoCoverage, InsufficientAnchors) propagate.
DriveResult run_drive(const ScenarioConfig& config);

/// `t_s,x_true_m,x_est_m,y_est_m,source,used_rsus,quality_m,abs_error_m`;
/// used RSU ids are joined with ';'.
void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows);

void print_summary(std::ostream& out, const DriveSummary& summary);

/// Parses "LO..HI" (inclusive) into a list of hidden sizes.
std::vector<int> parse_hidden_range(const std::string& text);

/// Full command-line entry point; returns the process exit code
/// (0 ok, 1 usage, 2 data/config error, 3 insufficient data/anchors).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rsspos::harness
