#include "rsspos/positioning.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "rsspos/error.hpp"

namespace rsspos {
namespace {

void check_unique(std::span<const Beacon> beacons) {
  std::set<std::string> ids;
  for (const auto& b : beacons) {
    if (!ids.insert(b.rsu.id).second) {
      throw Error(ErrorCode::InvalidArgument, "more than one beacon for RSU " + b.rsu.id);
    }
  }
}

std::vector<Beacon> ordered_by_rss(std::span<const Beacon> beacons, bool weakest_first) {
  std::vector<Beacon> order(beacons.begin(), beacons.end());
  std::sort(order.begin(), order.end(), [weakest_first](const Beacon& a, const Beacon& b) {
    if (a.rss_dbm != b.rss_dbm) return weakest_first ? a.rss_dbm < b.rss_dbm : a.rss_dbm > b.rss_dbm;
    return a.rsu.id < b.rsu.id;
  });
  return order;
}

// Greedy pass keeping beacons whose channel overlaps none already kept.
std::vector<Beacon> distinct_channel_greedy(const std::vector<Beacon>& order, std::size_t limit) {
  std::vector<Beacon> kept;
  for (const auto& b : order) {
    if (kept.size() >= limit) break;
    const bool clash = std::any_of(kept.begin(), kept.end(), [&](const Beacon& k) {
      return channels_overlap(k.rsu.channel, b.rsu.channel);
    });
    if (!clash) kept.push_back(b);
  }
  return kept;
}

// All index combinations of size k from [0, n), lexicographic.
std::vector<std::vector<std::size_t>> combinations(std::size_t n, std::size_t k) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    out.push_back(idx);
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + (i - 1)) --i;
    if (i == 0) break;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
  return out;
}

PositionFix make_fix(const LocalPoint& local, const GlobalPosition& origin, FixSource source) {
  PositionFix fix;
  fix.local = local;
  fix.global = to_global(local, origin);
  fix.source = source;
  return fix;
}

PositionFix locate_polynomial(std::span<const Beacon> beacons, const PolynomialRanging& ranging,
                              const SelectionPolicy& policy, const GlobalPosition& origin,
                              const std::optional<LocalPoint>& hint) {
  const auto min_count = static_cast<std::size_t>(policy.min_rsu_count);
  const auto order = ordered_by_rss(beacons, policy.prefer_weakest_rss);

  bool channel_fallback = false;
  std::vector<Beacon> usable;
  if (policy.require_distinct_channels) {
    usable = distinct_channel_greedy(order, order.size());
    if (usable.size() < min_count) {
      auto sel = select_rsus(beacons, policy, min_count);
      usable = std::move(sel.selected);
      channel_fallback = sel.channel_fallback;
    }
  } else {
    usable = order;
  }

  struct Ranged {
    const Beacon* beacon;
    const CalibratedPolynomial* model;
    RangeEstimate estimate;
  };
  std::vector<Ranged> ranged;
  for (const auto& b : usable) {
    const auto it = ranging.per_rsu.find(b.rsu.id);
    if (it == ranging.per_rsu.end()) continue;
    ranged.push_back({&b, &it->second, rss_to_range(it->second, b.rss_dbm)});
  }
  if (ranged.size() < min_count) {
    throw Error(ErrorCode::InsufficientAnchors, std::to_string(ranged.size()) + " calibrated RSUs usable, need " +
                                                    std::to_string(min_count));
  }

  std::vector<Ranged> far;
  for (const auto& r : ranged) {
    if (r.estimate.range_m >= policy.near_field_m && !r.estimate.clamped) far.push_back(r);
  }
  std::vector<Ranged> chosen;
  if (far.size() >= min_count) {
    chosen = std::move(far);
  } else {
    chosen.assign(ranged.begin(), ranged.begin() + static_cast<std::ptrdiff_t>(min_count));
  }

  std::vector<LocalPoint> fixes;
  for (const auto& subset : combinations(chosen.size(), min_count)) {
    std::vector<AnchorRange> anchors;
    for (auto i : subset) anchors.push_back({chosen[i].beacon->rsu.position, chosen[i].estimate.range_m});
    fixes.push_back(multilaterate(anchors, policy.mode(), hint));
  }

  PositionFix fix = make_fix(fuse_fixes(fixes), origin, FixSource::Rss);
  bool clamped = false;
  for (const auto& r : chosen) {
    fix.used_rsu_ids.push_back(r.beacon->rsu.id);
    fix.quality_m = std::max(fix.quality_m, r.model->rmse_m);
    clamped = clamped || r.estimate.clamped;
  }
  fix.degraded = clamped || channel_fallback;
  if (fix.degraded) fix.quality_m *= 2.0;
  return fix;
}

PositionFix locate_network(std::span<const Beacon> beacons, const NnPositioning& nn, const SelectionPolicy& policy,
                           const GlobalPosition& origin) {
  if (beacons.size() < static_cast<std::size_t>(policy.min_rsu_count)) {
    throw Error(ErrorCode::InsufficientAnchors, "heard " + std::to_string(beacons.size()) + " RSUs");
  }
  std::vector<double> inputs;
  for (const auto& id : nn.feature_rsu_ids) {
    const auto it = std::find_if(beacons.begin(), beacons.end(), [&](const Beacon& b) { return b.rsu.id == id; });
    if (it == beacons.end()) {
      throw Error(ErrorCode::InsufficientAnchors, "network input RSU " + id + " not heard");
    }
    inputs.push_back(it->rss_dbm);
  }
  const double raw = forward(nn.model, inputs);
  const double x = std::clamp(raw, nn.segment_start_m, nn.segment_end_m);
  PositionFix fix = make_fix(LocalPoint{x, nn.lane_y_m, nn.lane_z_m}, origin, FixSource::Rss);
  fix.used_rsu_ids = nn.feature_rsu_ids;
  fix.degraded = x != raw;
  fix.quality_m = fix.degraded ? 2.0 * nn.rmse_m : nn.rmse_m;
  return fix;
}

}  // namespace

void SelectionPolicy::validate() const {
  if (min_rsu_count < 2) throw Error(ErrorCode::InvalidArgument, "min_rsu_count must be >= 2");
  if (min_rsu_spacing_m < 0.0 || near_field_m < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "spacing and near-field distances must be >= 0");
  }
}

std::vector<std::pair<std::string, std::string>> spacing_violations(std::span<const Rsu> rsus,
                                                                    const SelectionPolicy& policy) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < rsus.size(); ++i) {
    for (std::size_t j = i + 1; j < rsus.size(); ++j) {
      if (distance(rsus[i].position, rsus[j].position) < policy.min_rsu_spacing_m) {
        out.emplace_back(rsus[i].id, rsus[j].id);
      }
    }
  }
  return out;
}

std::vector<Beacon> strongest_per_rsu(std::span<const Beacon> beacons) {
  std::map<std::string, Beacon> best;
  for (const auto& b : beacons) {
    auto [it, inserted] = best.emplace(b.rsu.id, b);
    if (!inserted && b.rss_dbm > it->second.rss_dbm) it->second = b;
  }
  std::vector<Beacon> out;
  for (auto& [id, b] : best) out.push_back(std::move(b));
  return out;
}

RsuSelection select_rsus(std::span<const Beacon> beacons, const SelectionPolicy& policy, std::size_t needed) {
  check_unique(beacons);
  if (needed == 0) throw Error(ErrorCode::InvalidArgument, "needed must be >= 1");
  if (beacons.size() < needed) {
    throw Error(ErrorCode::InsufficientAnchors, "heard " + std::to_string(beacons.size()) + " RSUs, need " +
                                                    std::to_string(needed));
  }
  const auto order = ordered_by_rss(beacons, policy.prefer_weakest_rss);
  RsuSelection sel;
  if (policy.require_distinct_channels) {
    sel.selected = distinct_channel_greedy(order, needed);
    if (sel.selected.size() == needed) return sel;
    sel.channel_fallback = true;
  }
  sel.selected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(needed));
  return sel;
}

CalibratedPolynomial CalibratedPolynomial::from_fit(const Poly4Fit& fit) {
  return CalibratedPolynomial{fit.poly, fit.rss_min_dbm, fit.rss_max_dbm, fit.report.rmse};
}

RangeEstimate rss_to_range(const CalibratedPolynomial& estimator, double rss_dbm) {
  if (!std::isfinite(rss_dbm)) throw Error(ErrorCode::InvalidArgument, "non-finite RSS");
  const double r = std::clamp(rss_dbm, estimator.rss_min_dbm, estimator.rss_max_dbm);
  RangeEstimate out;
  out.clamped = r != rss_dbm;
  const double d = evaluate_poly4(estimator.poly, r);
  out.range_m = std::max(d, 0.0);
  out.clamped = out.clamped || d < 0.0;
  return out;
}

std::string_view to_string(FixSource source) { return source == FixSource::Dgps ? "DGPS" : "RSS"; }

PositionFix locate(const GpsStatus& gps, std::span<const Beacon> beacons, const RangeEstimator& estimator,
                   const SelectionPolicy& policy, const GlobalPosition& origin,
                   const std::optional<LocalPoint>& hint) {
  policy.validate();
  if (gps.dgps_usable()) {
    if (!gps.dgps_position) {
      throw Error(ErrorCode::InvalidArgument, "DGPS flagged usable but no position supplied");
    }
    PositionFix fix;
    fix.global = *gps.dgps_position;
    fix.local = to_local(fix.global, origin);
    fix.source = FixSource::Dgps;
    fix.quality_m = gps.dgps_sigma_m;
    return fix;
  }
  if (beacons.empty()) throw Error(ErrorCode::NoCoverage, "no usable GPS and no RSU beacons");
  check_unique(beacons);
  if (const auto* poly = std::get_if<PolynomialRanging>(&estimator)) {
    return locate_polynomial(beacons, *poly, policy, origin, hint);
  }
  return locate_network(beacons, std::get<NnPositioning>(estimator), policy, origin);
}

}  // namespace rsspos
