#include "harness.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "rsspos/error.hpp"

namespace rsspos::harness {
namespace {

using nlohmann::json;

constexpr std::uint64_t kDriveStreamSalt = 0x9E3779B97F4A7C15ULL;

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::InvalidArgument, "config: " + msg); }

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) config_error(where + " must be an object");
  for (const auto& [key, unused] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      config_error("unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, T& target, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    target = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    config_error(where + "." + key + ": " + e.what());
  }
}

Rsu parse_rsu(const json& j, std::size_t index) {
  const std::string where = "layout.rsus[" + std::to_string(index) + "]";
  check_keys(j, {"id", "x_m", "y_m", "z_m", "channel", "tx_ref_rss_dbm", "beacon_interval_ms"}, where);
  Rsu rsu;
  if (!j.contains("id") || !j.contains("x_m")) config_error(where + " needs at least id and x_m");
  read(j, "id", rsu.id, where);
  read(j, "x_m", rsu.position.x_m, where);
  read(j, "y_m", rsu.position.y_m, where);
  rsu.position.z_m = 1.10;
  read(j, "z_m", rsu.position.z_m, where);
  read(j, "channel", rsu.channel, where);
  if (j.contains("tx_ref_rss_dbm")) {
    double v = 0.0;
    read(j, "tx_ref_rss_dbm", v, where);
    rsu.tx_ref_rss_dbm = v;
  }
  read(j, "beacon_interval_ms", rsu.beacon_interval_ms, where);
  return rsu;
}

void parse_layout(const json& j, SurveyLayout& layout) {
  check_keys(j, {"rsus", "start_m", "end_m", "step_m", "lane_y_m", "antenna_z_m"}, "layout");
  read(j, "start_m", layout.start_m, "layout");
  read(j, "end_m", layout.end_m, "layout");
  read(j, "step_m", layout.step_m, "layout");
  read(j, "lane_y_m", layout.lane_y_m, "layout");
  read(j, "antenna_z_m", layout.antenna_z_m, "layout");
  if (j.contains("rsus")) {
    if (!j["rsus"].is_array()) config_error("layout.rsus must be an array");
    layout.rsus.clear();
    for (std::size_t i = 0; i < j["rsus"].size(); ++i) layout.rsus.push_back(parse_rsu(j["rsus"][i], i));
  }
}

void parse_channel(const json& j, ChannelModel& m) {
  check_keys(j,
             {"ref_distance_m", "ref_rss_dbm", "path_loss_exponent", "far_sigma_db", "near_sigma_db", "near_field_m",
              "interference_sigma_db", "rss_floor_dbm", "near_tail_db", "near_tail_m"},
             "channel");
  read(j, "ref_distance_m", m.ref_distance_m, "channel");
  read(j, "ref_rss_dbm", m.ref_rss_dbm, "channel");
  read(j, "path_loss_exponent", m.path_loss_exponent, "channel");
  read(j, "far_sigma_db", m.far_sigma_db, "channel");
  read(j, "near_sigma_db", m.near_sigma_db, "channel");
  read(j, "near_field_m", m.near_field_m, "channel");
  read(j, "interference_sigma_db", m.interference_sigma_db, "channel");
  read(j, "rss_floor_dbm", m.rss_floor_dbm, "channel");
  read(j, "near_tail_db", m.near_tail_db, "channel");
  read(j, "near_tail_m", m.near_tail_m, "channel");
}

void parse_scenario(const json& j, ScenarioConfig& c) {
  check_keys(j, {"seed", "gps_outages", "dgps_corrections", "speed_mps", "origin", "policy"}, "scenario");
  read(j, "seed", c.seed, "scenario");
  read(j, "dgps_corrections", c.dgps_corrections, "scenario");
  read(j, "speed_mps", c.speed_mps, "scenario");
  if (j.contains("gps_outages")) {
    const auto& arr = j["gps_outages"];
    if (!arr.is_array()) config_error("scenario.gps_outages must be an array of [start, end]");
    for (const auto& iv : arr) {
      if (!iv.is_array() || iv.size() != 2 || !iv[0].is_number() || !iv[1].is_number()) {
        config_error("scenario.gps_outages entries must be [start, end]");
      }
      c.gps_outages.emplace_back(iv[0].get<double>(), iv[1].get<double>());
    }
  }
  if (j.contains("origin")) {
    const auto& o = j["origin"];
    check_keys(o, {"latitude_deg", "longitude_deg", "altitude_m"}, "scenario.origin");
    read(o, "latitude_deg", c.origin.latitude_deg, "scenario.origin");
    read(o, "longitude_deg", c.origin.longitude_deg, "scenario.origin");
    read(o, "altitude_m", c.origin.altitude_m, "scenario.origin");
  }
  if (j.contains("policy")) {
    const auto& p = j["policy"];
    check_keys(p,
               {"min_rsu_count", "require_distinct_channels", "prefer_weakest_rss", "min_rsu_spacing_m",
                "near_field_m"},
               "scenario.policy");
    read(p, "min_rsu_count", c.policy.min_rsu_count, "scenario.policy");
    read(p, "require_distinct_channels", c.policy.require_distinct_channels, "scenario.policy");
    read(p, "prefer_weakest_rss", c.policy.prefer_weakest_rss, "scenario.policy");
    read(p, "min_rsu_spacing_m", c.policy.min_rsu_spacing_m, "scenario.policy");
    read(p, "near_field_m", c.policy.near_field_m, "scenario.policy");
  }
}

void parse_estimator(const json& j, EstimatorConfig& e) {
  check_keys(j, {"type", "cutoff_m", "hidden", "seed", "max_epochs", "patience", "learning_rate"}, "estimator");
  if (j.contains("type")) {
    const auto type = j["type"].is_string() ? j["type"].get<std::string>() : std::string();
    if (type == "poly") {
      e.kind = EstimatorKind::Polynomial;
    } else if (type == "nn") {
      e.kind = EstimatorKind::Network;
    } else {
      config_error("estimator.type must be \"poly\" or \"nn\"");
    }
  }
  read(j, "cutoff_m", e.cutoff_m, "estimator");
  read(j, "hidden", e.hidden, "estimator");
  read(j, "seed", e.nn_seed, "estimator");
  read(j, "max_epochs", e.train.max_epochs, "estimator");
  read(j, "patience", e.train.patience, "estimator");
  read(j, "learning_rate", e.train.learning_rate, "estimator");
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot open " + path + " for writing");
  return out;
}

double parse_rounded(double v) { return std::strtod(format_fixed(v).c_str(), nullptr); }

std::string join_ids(const std::vector<std::string>& ids) {
  std::string s;
  for (const auto& id : ids) {
    if (!s.empty()) s += ';';
    s += id;
  }
  return s;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InsufficientAnchors:
    case ErrorCode::NoCoverage:
    case ErrorCode::TooFewSamples:
    case ErrorCode::RankDeficient:
      return 3;
    default:
      return 2;
  }
}

}  // namespace

void ScenarioConfig::validate() const {
  layout.validate();
  channel.validate();
  policy.validate();
  if (!(speed_mps > 0.0)) config_error("scenario.speed_mps must be > 0");
  for (const auto& [a, b] : gps_outages) {
    if (!(a <= b) || a < layout.start_m || b > layout.end_m) {
      config_error("gps outage [" + std::to_string(a) + ", " + std::to_string(b) + "] outside the road segment");
    }
  }
  if (estimator.cutoff_m < 0.0) config_error("estimator.cutoff_m must be >= 0");
  if (estimator.hidden < 1) config_error("estimator.hidden must be >= 1");
  to_local(origin, origin);  // rejects invalid or polar origins
}

bool ScenarioConfig::in_outage(double x_m) const {
  return std::any_of(gps_outages.begin(), gps_outages.end(),
                     [x_m](const auto& iv) { return x_m >= iv.first && x_m <= iv.second; });
}

ScenarioConfig parse_config(const json& doc) {
  check_keys(doc, {"layout", "channel", "scenario", "estimator"}, "document");
  ScenarioConfig c;
  if (doc.contains("layout")) parse_layout(doc["layout"], c.layout);
  if (doc.contains("channel")) parse_channel(doc["channel"], c.channel);
  if (doc.contains("scenario")) parse_scenario(doc["scenario"], c);
  if (doc.contains("estimator")) parse_estimator(doc["estimator"], c.estimator);
  c.validate();
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot read config " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    config_error(path + ": " + e.what());
  }
  return parse_config(doc);
}

PolynomialRanging calibrate_polynomials(const SurveyDataset& survey, double cutoff_m) {
  PolynomialRanging ranging;
  for (const auto& rsu : survey.layout.rsus) {
    const auto samples = survey.for_rsu(rsu.id);
    ranging.per_rsu.emplace(rsu.id, CalibratedPolynomial::from_fit(fit_poly4(filter_near_field(samples, cutoff_m))));
  }
  return ranging;
}

NnPositioning calibrate_network(const SurveyDataset& survey, const EstimatorConfig& config) {
  const NnDataset data = dataset_from_survey(survey.samples);
  const auto splits = split_dataset(data.size(), config.nn_seed);
  TrainConfig train_cfg = config.train;
  train_cfg.seed = config.nn_seed;
  const auto trained =
      train(init_mlp(static_cast<int>(data.inputs.cols()), config.hidden, config.nn_seed), data, splits, train_cfg);

  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  NnPositioning nn;
  nn.model = trained.model;
  nn.feature_rsu_ids = data.feature_names;
  nn.lane_y_m = survey.layout.lane_y_m;
  nn.lane_z_m = survey.layout.antenna_z_m;
  nn.segment_start_m = survey.layout.start_m;
  nn.segment_end_m = survey.layout.end_m;
  nn.rmse_m = std::sqrt(mse_on(trained.model, data, all));
  return nn;
}

json fit_report_json(const Poly4Fit& fit) {
  json j;
  j["p1"] = fit.poly.p[0];
  j["p2"] = fit.poly.p[1];
  j["p3"] = fit.poly.p[2];
  j["p4"] = fit.poly.p[3];
  j["p5"] = fit.poly.p[4];
  j["sse"] = fit.report.sse;
  j["r_square"] = fit.report.r_square;
  j["adj_r_square"] = fit.report.adj_r_square;
  j["rmse"] = fit.report.rmse;
  j["n"] = fit.report.n;
  return j;
}

DriveResult run_drive(const ScenarioConfig& config) {
  config.validate();
  const SurveyDataset calibration = generate_survey(config.layout, config.channel, config.seed);

  DriveResult result;
  double calibration_rmse = 0.0;
  if (config.estimator.kind == EstimatorKind::Polynomial) {
    auto ranging = calibrate_polynomials(calibration, config.estimator.cutoff_m);
    for (const auto& [id, cal] : ranging.per_rsu) calibration_rmse = std::max(calibration_rmse, cal.rmse_m);
    result.estimator = std::move(ranging);
  } else {
    auto nn = calibrate_network(calibration, config.estimator);
    calibration_rmse = nn.rmse_m;
    result.estimator = std::move(nn);
  }
  const PositioningEngine engine(result.estimator, config.policy, config.origin);

  Rng rng(config.seed ^ kDriveStreamSalt);
  const double window_ms = 1000.0 * config.layout.step_m / config.speed_mps;
  std::optional<LocalPoint> last_fix;
  for (double x : config.layout.positions()) {
    const LocalPoint truth = config.layout.vehicle_at(x);
    const bool outage = config.in_outage(x);
    GpsStatus gps;
    gps.satellites_ok = !outage;
    gps.dgps_corrections = config.dgps_corrections;
    gps.dgps_position = to_global(truth, config.origin);

    // Every beacon an RSU sends while the vehicle covers one step is heard
    // once; the engine sees the strongest per RSU.
    std::vector<Beacon> heard;
    for (const auto& rsu : config.layout.rsus) {
      const double d = distance(truth, rsu.position);
      const double ref = rsu.tx_ref_rss_dbm.value_or(config.channel.ref_rss_dbm);
      const int interferers = config.layout.cochannel_interferers(rsu);
      const int count = std::max(1, static_cast<int>(std::floor(window_ms / rsu.beacon_interval_ms + 1e-9)));
      for (int k = 0; k < count; ++k) {
        const double rss = sample_rss(config.channel, d, ref, interferers, rng);
        if (rss > config.channel.rss_floor_dbm) heard.push_back(Beacon{rsu, rss});
      }
    }
    const auto beacons = strongest_per_rsu(heard);

    const PositionFix fix = engine.locate(gps, beacons, last_fix);
    last_fix = fix.local;

    TraceRow row;
    row.t_s = (x - config.layout.start_m) / config.speed_mps;
    row.x_true_m = x;
    row.x_est_m = fix.local.x_m;
    row.y_est_m = fix.local.y_m;
    row.source = fix.source;
    row.used_rsus = fix.used_rsu_ids;
    row.quality_m = fix.quality_m;
    row.abs_error_m = parse_rounded(std::abs(parse_rounded(fix.local.x_m) - x));
    row.in_outage = outage;
    result.rows.push_back(std::move(row));
  }

  DriveSummary& s = result.summary;
  s.calibration_rmse_m = calibration_rmse;
  double sum = 0.0, outage_sum = 0.0;
  for (const auto& r : result.rows) {
    ++s.steps;
    sum += r.abs_error_m;
    s.max_abs_error_m = std::max(s.max_abs_error_m, r.abs_error_m);
    if (r.in_outage) {
      ++s.outage_steps;
      outage_sum += r.abs_error_m;
      s.outage_max_abs_error_m = std::max(s.outage_max_abs_error_m, r.abs_error_m);
    }
  }
  if (s.steps > 0) s.mean_abs_error_m = sum / static_cast<double>(s.steps);
  if (s.outage_steps > 0) s.outage_mean_abs_error_m = outage_sum / static_cast<double>(s.outage_steps);
  return result;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows) {
  out << "t_s,x_true_m,x_est_m,y_est_m,source,used_rsus,quality_m,abs_error_m\n";
  for (const auto& r : rows) {
    out << format_fixed(r.t_s) << ',' << format_fixed(r.x_true_m) << ',' << format_fixed(r.x_est_m) << ','
        << format_fixed(r.y_est_m) << ',' << to_string(r.source) << ',' << join_ids(r.used_rsus) << ','
        << format_fixed(r.quality_m) << ',' << format_fixed(r.abs_error_m) << '\n';
  }
}

void print_summary(std::ostream& out, const DriveSummary& s) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "steps=%zu\nmean_abs_error_m=%.12g\nmax_abs_error_m=%.12g\noutage_steps=%zu\n"
                "outage_mean_abs_error_m=%.12g\noutage_max_abs_error_m=%.12g\ncalibration_rmse_m=%.12g\n",
                s.steps, s.mean_abs_error_m, s.max_abs_error_m, s.outage_steps, s.outage_mean_abs_error_m,
                s.outage_max_abs_error_m, s.calibration_rmse_m);
  out << buf;
}

std::vector<int> parse_hidden_range(const std::string& text) {
  const auto dots = text.find("..");
  auto to_int = [&](const std::string& part) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(part, &used);
    } catch (const std::exception&) {
      used = std::string::npos;
    }
    if (used != part.size() || v < 1) {
      throw Error(ErrorCode::InvalidArgument, "hidden range must look like LO..HI with LO >= 1, got '" + text + "'");
    }
    return v;
  };
  const int lo = to_int(dots == std::string::npos ? text : text.substr(0, dots));
  const int hi = dots == std::string::npos ? lo : to_int(text.substr(dots + 2));
  if (hi < lo) throw Error(ErrorCode::InvalidArgument, "hidden range upper bound below lower bound");
  std::vector<int> sizes;
  for (int h = lo; h <= hi; ++h) sizes.push_back(h);
  return sizes;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Vehicle positioning from roadside-unit RSS: survey, fit, sweep and drive experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::string in_path;
  std::optional<std::uint64_t> seed;

  auto* survey = app.add_subcommand("survey", "Generate a synthetic RSS survey CSV");
  survey->add_option("--config", config_path, "Scenario JSON (defaults to the clean-channel layout)");
  survey->add_option("--seed", seed, "Override the scenario seed");
  survey->add_option("--out", out_path, "Output survey CSV")->required();

  std::string rsu_id;
  double min_distance = 60.0;
  auto* fit = app.add_subcommand("fit", "Fit the RSS-to-distance quartic for one RSU");
  fit->add_option("--in", in_path, "Survey CSV")->required();
  fit->add_option("--rsu", rsu_id, "RSU id")->required();
  fit->add_option("--min-distance", min_distance, "Near-field cutoff (m)");
  fit->add_option("--out", out_path, "Fit report JSON")->required();

  std::string hidden = "2..10";
  std::size_t n_seeds = 20;
  TrainConfig train_cfg;
  unsigned threads = 0;
  auto* sweep_cmd = app.add_subcommand("sweep", "Train and rank networks over hidden sizes and seeds");
  sweep_cmd->add_option("--in", in_path, "Survey CSV")->required();
  sweep_cmd->add_option("--hidden", hidden, "Hidden sizes LO..HI");
  sweep_cmd->add_option("--seeds", n_seeds, "Number of seeds (1..N)")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--epochs", train_cfg.max_epochs, "Maximum epochs")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--patience", train_cfg.patience, "Early-stopping patience")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--lr", train_cfg.learning_rate, "Learning rate")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--threads", threads, "Worker threads (0 = all cores)");
  sweep_cmd->add_option("--out", out_path, "Sweep table CSV")->required();

  auto* drive = app.add_subcommand("drive", "Simulate a drive with GPS outages and write the fix trace");
  drive->add_option("--config", config_path, "Scenario JSON")->required();
  drive->add_option("--seed", seed, "Override the scenario seed");
  drive->add_option("--out", out_path, "Trace CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n' << app.help();
    return 1;
  }

  try {
    if (survey->parsed()) {
      ScenarioConfig cfg = config_path.empty() ? ScenarioConfig{} : load_config(config_path);
      if (seed) cfg.seed = *seed;
      const auto dataset = generate_survey(cfg.layout, cfg.channel, cfg.seed);
      auto file = open_output(out_path);
      write_survey_csv(file, dataset);
      out << dataset.samples.size() << " rows written to " << out_path << '\n';
    } else if (fit->parsed()) {
      std::ifstream in(in_path);
      if (!in) throw Error(ErrorCode::InvalidArgument, "cannot read " + in_path);
      std::vector<RssSample> samples;
      for (auto& row : read_survey_csv(in)) {
        if (row.sample.rsu_id == rsu_id) samples.push_back(std::move(row.sample));
      }
      if (samples.empty()) throw Error(ErrorCode::InvalidArgument, "RSU '" + rsu_id + "' not in " + in_path);
      const auto result = fit_poly4(filter_near_field(samples, min_distance));
      auto file = open_output(out_path);
      file << fit_report_json(result).dump(2) << '\n';
      out << "n=" << result.report.n << " rmse=" << result.report.rmse << " r_square=" << result.report.r_square
          << '\n';
    } else if (sweep_cmd->parsed()) {
      std::ifstream in(in_path);
      if (!in) throw Error(ErrorCode::InvalidArgument, "cannot read " + in_path);
      std::vector<RssSample> samples;
      for (auto& row : read_survey_csv(in)) samples.push_back(std::move(row.sample));
      const NnDataset data = dataset_from_survey(samples);
      SweepConfig cfg;
      cfg.hidden_sizes = parse_hidden_range(hidden);
      cfg.seeds = SweepConfig::default_seeds(n_seeds);
      cfg.train = train_cfg;
      cfg.threads = threads;
      const auto rows = sweep(data, cfg);
      auto file = open_output(out_path);
      write_sweep_csv(file, rows);
      out << rows.size() << " networks trained; top 5:\n";
      const std::size_t top = std::min<std::size_t>(5, rows.size());
      write_sweep_csv(out, std::span<const SweepRow>(rows.data(), top));
    } else if (drive->parsed()) {
      ScenarioConfig cfg = load_config(config_path);
      if (seed) cfg.seed = *seed;
      const auto result = run_drive(cfg);
      auto file = open_output(out_path);
      write_trace_csv(file, result.rows);
      print_summary(out, result.summary);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  }
  return 0;
}

}  // namespace rsspos::harness
