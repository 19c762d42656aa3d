#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rsspos/channel.hpp"
#include "rsspos/fit.hpp"
#include "rsspos/geometry.hpp"
#include "rsspos/nn.hpp"

namespace rsspos {

/// Satellite and correction status. "Good signals" is decided by the caller.
struct GpsStatus {
  bool satellites_ok = false;
  bool dgps_corrections = false;
  std::optional<GlobalPosition> dgps_position;
  double dgps_sigma_m = 1.0;  ///< reported as quality_m on DGPS fixes

  bool dgps_usable() const { return satellites_ok && dgps_corrections; }
};

struct SelectionPolicy {
  int min_rsu_count = 2;  ///< 2 for a 2D fix, 3 for 3D
  bool require_distinct_channels = true;
  bool prefer_weakest_rss = true;
  double min_rsu_spacing_m = 100.0;
  double near_field_m = 60.0;

  void validate() const;
  SolveMode mode() const { return min_rsu_count >= 3 ? SolveMode::ThreeD : SolveMode::TwoD; }
};

/// Pairs of RSUs installed closer than the policy's minimum spacing.
std::vector<std::pair<std::string, std::string>> spacing_violations(std::span<const Rsu> rsus,
                                                                    const SelectionPolicy& policy);

/// One received beacon: the RSU description it carries and its RSS.
struct Beacon {
  Rsu rsu;
  double rss_dbm = 0.0;
};

/// Keeps the strongest beacon per RSU id, ordered by id.
std::vector<Beacon> strongest_per_rsu(std::span<const Beacon> beacons);

struct RsuSelection {
  std::vector<Beacon> selected;
  bool channel_fallback = false;  ///< distinct channels could not be honored
};

/// Weakest-first (farthest-first) greedy choice of `needed` RSUs on mutually
/// non-overlapping channels; falls back to plain RSS order when the channel
/// rule cannot be met. Input must hold at most one beacon per RSU.
RsuSelection select_rsus(std::span<const Beacon> beacons, const SelectionPolicy& policy, std::size_t needed);

/// Quartic RSS-to-distance model with the RSS range it was calibrated on.
struct CalibratedPolynomial {
  Polynomial4 poly;
  double rss_min_dbm = 0.0;
  double rss_max_dbm = 0.0;
  double rmse_m = 0.0;

  static CalibratedPolynomial from_fit(const Poly4Fit& fit);
};

struct RangeEstimate {
  double range_m = 0.0;
  bool clamped = false;
};

/// Evaluates the quartic with RSS clamped into the calibrated domain; the
/// range is clamped to >= 0.
RangeEstimate rss_to_range(const CalibratedPolynomial& estimator, double rss_dbm);

/// Per-RSU quartics (ranging + multilateration).
struct PolynomialRanging {
  std::map<std::string, CalibratedPolynomial> per_rsu;
};

/// A network that maps the RSS vector of `feature_rsu_ids` straight to the
/// position along the calibrated road segment.
struct NnPositioning {
  MlpModel model;
  std::vector<std::string> feature_rsu_ids;
  double lane_y_m = 0.0;
  double lane_z_m = 0.0;
  double segment_start_m = 0.0;
  double segment_end_m = 0.0;
  double rmse_m = 0.0;
};

using RangeEstimator = std::variant<PolynomialRanging, NnPositioning>;

enum class FixSource { Dgps, Rss };

std::string_view to_string(FixSource source);

struct PositionFix {
  GlobalPosition global;
  LocalPoint local;
  FixSource source = FixSource::Rss;
  std::vector<std::string> used_rsu_ids;
  double quality_m = 0.0;  ///< estimated 1-sigma error
  bool degraded = false;   ///< clamped range, channel fallback or out-of-segment NN output
};

/// Hybrid fix: DGPS when satellites and corrections are both available,
/// otherwise RSS positioning with `estimator`.
///
/// Polynomial path: RSUs are selected weakest-first on distinct channels,
/// ranged, and those estimated inside the near field are dropped while enough
/// far ones remain. Every `min_rsu_count`-subset is multilaterated and the
/// fixes are averaged. NN path: the network output is placed on the
/// calibrated lane.
PositionFix locate(const GpsStatus& gps, std::span<const Beacon> beacons, const RangeEstimator& estimator,
                   const SelectionPolicy& policy, const GlobalPosition& origin,
                   const std::optional<LocalPoint>& hint = std::nullopt);

/// Immutable engine bundling the estimator, policy and frame origin.
class PositioningEngine {
 public:
  PositioningEngine(RangeEstimator estimator, SelectionPolicy policy, GlobalPosition origin)
      : estimator_(std::move(estimator)), policy_(policy), origin_(origin) {
    policy_.validate();
  }

  PositionFix locate(const GpsStatus& gps, std::span<const Beacon> beacons,
                     const std::optional<LocalPoint>& hint = std::nullopt) const {
    return rsspos::locate(gps, beacons, estimator_, policy_, origin_, hint);
  }

  const RangeEstimator& estimator() const { return estimator_; }
  const SelectionPolicy& policy() const { return policy_; }
  const GlobalPosition& origin() const { return origin_; }

 private:
  RangeEstimator estimator_;
  SelectionPolicy policy_;
  GlobalPosition origin_;
};

}  // namespace rsspos
