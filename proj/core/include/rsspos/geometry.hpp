#pragma once

#include <optional>
#include <span>
#include <vector>

namespace rsspos {

inline constexpr double kEarthRadiusM = 6'371'000.0;

struct GlobalPosition {
  double latitude_deg = 0.0;
  double longitude_deg = 0.0;
  double altitude_m = 0.0;

  bool operator==(const GlobalPosition&) const = default;
};

/// Road-aligned local frame: x along the road, y lateral, z up (meters).
struct LocalPoint {
  double x_m = 0.0;
  double y_m = 0.0;
  double z_m = 0.0;

  bool operator==(const LocalPoint&) const = default;
};

double distance(const LocalPoint& a, const LocalPoint& b);

struct AnchorRange {
  LocalPoint anchor;
  double range_m = 0.0;
};

enum class SolveMode { TwoD, ThreeD };

/// Equirectangular projection around `origin`. Valid for |latitude| < 89 deg.
LocalPoint to_local(const GlobalPosition& g, const GlobalPosition& origin);
GlobalPosition to_global(const LocalPoint& p, const GlobalPosition& origin);

struct MultilaterationOptions {
  int max_iterations = 100;
  double step_tolerance_m = 1e-9;
};

/// Least-squares position from anchor ranges, minimizing
/// sum_i (|p - anchor_i| - range_i)^2.
///
/// 2D mode holds z fixed at the hint's z (or 0) and needs >= 2 ranges; 3D mode
/// needs >= 3. When the anchors leave a mirror ambiguity (collinear anchors in
/// 2D, coplanar in 3D) the candidate nearer the hint wins. Without a hint, 2D
/// picks the side of the anchor line with larger y; 3D throws
/// DegenerateGeometry.
LocalPoint multilaterate(std::span<const AnchorRange> ranges, SolveMode mode,
                         const std::optional<LocalPoint>& hint = std::nullopt,
                         const MultilaterationOptions& options = {});

/// Component-wise mean. Summation runs over the points in sorted order so the
/// result is bit-identical for every permutation of the input.
LocalPoint fuse_fixes(std::span<const LocalPoint> points);

}  // namespace rsspos
