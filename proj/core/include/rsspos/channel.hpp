#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rsspos/geometry.hpp"
#include "rsspos/random.hpp"

namespace rsspos {

inline constexpr int kMinChannel = 1;
inline constexpr int kMaxChannel = 13;

/// A roadside unit. When `tx_ref_rss_dbm` is unset the channel model's
/// reference RSS applies.
struct Rsu {
  std::string id;
  LocalPoint position;
  int channel = 1;
  std::optional<double> tx_ref_rss_dbm;
  double beacon_interval_ms = 100.0;
};

/// Log-distance path loss with Gaussian shadowing in dB.
///
/// The shadowing std-dev is `near_sigma_db` inside `near_field_m`. Beyond it the
/// far-field value applies, optionally raised by a tail
/// `near_tail_db * exp(-(d - near_field_m) / near_tail_m)` that lets the
/// near-field disturbance fade out instead of stopping abruptly. The tail is
/// off by default.
struct ChannelModel {
  double ref_distance_m = 1.0;
  double ref_rss_dbm = -40.0;
  double path_loss_exponent = 2.7;
  double far_sigma_db = 2.0;
  double near_sigma_db = 8.0;
  double near_field_m = 60.0;
  double interference_sigma_db = 6.0;
  double rss_floor_dbm = -95.0;
  double near_tail_db = 0.0;
  double near_tail_m = 20.0;

  /// Throws InvalidArgument when a parameter is out of its domain.
  void validate() const;

  /// Shadowing std-dev (dB) at `distance_m` without interference.
  double base_sigma_db(double distance_m) const;
};

double expected_rss(const ChannelModel& model, double distance_m);

/// Same as above with the reference RSS replaced (per-RSU transmit level).
double expected_rss(const ChannelModel& model, double distance_m, double ref_rss_dbm);

/// Channels overlap when fewer than 5 channels apart.
bool channels_overlap(int a, int b);

/// One shadowed RSS draw; consumes exactly one normal variate from `rng`.
double sample_rss(const ChannelModel& model, double distance_m, int n_cochannel_interferers, Rng& rng);

/// As above for a transmitter whose reference RSS differs from the model's.
double sample_rss(const ChannelModel& model, double distance_m, double ref_rss_dbm, int n_cochannel_interferers,
                  Rng& rng);

struct SurveyLayout {
  std::vector<Rsu> rsus;
  double start_m = 0.0;
  double end_m = 200.0;
  double step_m = 5.0;
  double lane_y_m = 7.0;
  double antenna_z_m = 1.10;

  void validate() const;

  /// Grid of vehicle x positions, start..end inclusive.
  std::vector<double> positions() const;

  LocalPoint vehicle_at(double x_m) const { return LocalPoint{x_m, lane_y_m, antenna_z_m}; }

  const Rsu& rsu(const std::string& id) const;

  /// RSUs (other than `self`) whose channel overlaps self's channel.
  int cochannel_interferers(const Rsu& self) const;
};

/// RSUs at 0/100/200 m along the road side with antennas at 1.10 m; channels
/// as given (channel 6 for all reproduces the co-channel experiment, 1/7/13
/// the clean one).
SurveyLayout default_layout(int ch0 = 1, int ch100 = 7, int ch200 = 13);

struct RssSample {
  double x_m = 0.0;
  std::string rsu_id;
  double rss_dbm = 0.0;
  std::optional<double> true_distance_m;
};

struct SurveyDataset {
  SurveyLayout layout;
  std::vector<RssSample> samples;  ///< ordered by x_m, then rsu_id
  std::uint64_t seed = 0;

  /// Samples of one RSU, in x order.
  std::vector<RssSample> for_rsu(const std::string& rsu_id) const;
};

SurveyDataset generate_survey(const SurveyLayout& layout, const ChannelModel& model, std::uint64_t seed);

/// Survey CSV: `x_m,rsu_id,rss_dbm,true_distance_m,channel`, 4 decimals,
/// ordered by x_m then rsu_id.
void write_survey_csv(std::ostream& out, const SurveyDataset& dataset);

/// A parsed survey CSV row.
struct SurveyRow {
  RssSample sample;
  int channel = 0;
};

/// Throws InvalidArgument on malformed input (missing columns, bad numbers).
std::vector<SurveyRow> read_survey_csv(std::istream& in);

/// Fixed-point formatting used by every CSV writer (no "-0.0000").
std::string format_fixed(double value, int decimals = 4);

}  // namespace rsspos
