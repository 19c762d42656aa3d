#include "rsspos/geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <numbers>
#include <string>
#include <tuple>
#include <vector>

#include "rsspos/error.hpp"

namespace rsspos {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kMaxAbsLatitudeDeg = 89.0;

void check_global(const GlobalPosition& g, const char* what) {
  if (!std::isfinite(g.latitude_deg) || !std::isfinite(g.longitude_deg) ||
      !std::isfinite(g.altitude_m) || std::abs(g.latitude_deg) > 90.0 ||
      std::abs(g.longitude_deg) > 180.0) {
    throw Error(ErrorCode::InvalidArgument, std::string(what) + " is not a valid global position");
  }
  if (std::abs(g.latitude_deg) >= kMaxAbsLatitudeDeg) {
    throw Error(ErrorCode::PolarRegion, std::string(what) + " latitude outside (-89, 89) deg");
  }
}

double wrap_longitude_delta(double delta_deg) {
  if (delta_deg > 180.0) return delta_deg - 360.0;
  if (delta_deg < -180.0) return delta_deg + 360.0;
  return delta_deg;
}

double wrap_longitude(double lon_deg) {
  if (lon_deg > 180.0) return lon_deg - 360.0;
  if (lon_deg < -180.0) return lon_deg + 360.0;
  return lon_deg;
}

// Geometry of the anchor cloud in the solve dimensions: centroid, principal
// directions (columns, decreasing spread) and numerical rank.
struct AnchorFrame {
  Eigen::VectorXd centroid;
  Eigen::MatrixXd directions;
  int rank = 0;
};

AnchorFrame analyze_anchors(const Eigen::MatrixXd& anchors) {
  AnchorFrame frame;
  frame.centroid = anchors.colwise().mean().transpose();
  const Eigen::MatrixXd centered = anchors.rowwise() - frame.centroid.transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeFullV);
  frame.directions = svd.matrixV();
  const Eigen::VectorXd& sv = svd.singularValues();
  const double tol = 1e-9 * (1.0 + (sv.size() > 0 ? sv(0) : 0.0));
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol) ++frame.rank;
  }
  return frame;
}

// Unit normal of the mirror line (2D) or plane (3D), oriented towards +y in 2D
// and +z in 3D so that the no-hint conventions are well defined.
Eigen::VectorXd mirror_normal(const AnchorFrame& frame) {
  Eigen::VectorXd n = frame.directions.col(frame.directions.cols() - 1);
  const Eigen::Index up = n.size() - 1;
  if (n(up) < 0.0 || (n(up) == 0.0 && n(0) < 0.0)) n = -n;
  return n;
}

// Residuals r_i(v), their Jacobian and the curvature sum_i r_i * Hess(r_i)
// for the solve variables v. Either output pointer may be null.
using ResidualFn =
    std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&, Eigen::MatrixXd*, Eigen::MatrixXd*)>;

double cost_of(const ResidualFn& fn, const Eigen::VectorXd& v, Eigen::VectorXd& scratch) {
  fn(v, scratch, nullptr, nullptr);
  return scratch.squaredNorm();
}

// Gauss-Newton with backtracking. Large residuals make plain GN converge only
// linearly, so once an iteration cuts the cost by less than 20% the curvature
// term is added (full Newton step) while the Hessian stays positive definite.
// At zero residual both steps coincide. When `bounded_last` is set the last
// variable is kept >= 0 (active-set handling at the bound).
Eigen::VectorXd gauss_newton(const ResidualFn& fn, Eigen::VectorXd v, bool bounded_last, double scale,
                             const MultilaterationOptions& options) {
  const Eigen::Index dims = v.size();
  Eigen::VectorXd res;
  Eigen::VectorXd scratch;
  Eigen::MatrixXd jac;
  Eigen::MatrixXd curvature;
  double cost = cost_of(fn, v, scratch);
  bool slow = false;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    fn(v, res, &jac, slow ? &curvature : nullptr);
    Eigen::VectorXd gradient = jac.transpose() * res;
    const bool pinned = bounded_last && v(dims - 1) <= 0.0 && gradient(dims - 1) > 0.0;
    if (pinned) gradient(dims - 1) = 0.0;
    if (gradient.norm() <= 1e-12 * scale) return v;

    const Eigen::Index free_dims = pinned ? dims - 1 : dims;
    const auto free_jac = jac.leftCols(free_dims);
    Eigen::VectorXd gn_step = Eigen::VectorXd::Zero(dims);
    gn_step.head(free_dims) = free_jac.completeOrthogonalDecomposition().solve(-res);

    std::vector<Eigen::VectorXd> steps;
    if (slow) {
      const Eigen::MatrixXd hessian =
          free_jac.transpose() * free_jac + curvature.topLeftCorner(free_dims, free_dims);
      const Eigen::LLT<Eigen::MatrixXd> llt(hessian);
      if (llt.info() == Eigen::Success) {
        Eigen::VectorXd newton = Eigen::VectorXd::Zero(dims);
        newton.head(free_dims) = llt.solve(-gradient.head(free_dims));
        if (newton.allFinite()) steps.push_back(newton);
      }
    }
    steps.push_back(gn_step);

    auto project = [&](Eigen::VectorXd c) {
      if (bounded_last) c(dims - 1) = std::max(c(dims - 1), 0.0);
      return c;
    };
    Eigen::VectorXd candidate;
    double candidate_cost = cost;
    for (const auto& step : steps) {
      double alpha = 1.0;
      candidate = project(v + step);
      candidate_cost = cost_of(fn, candidate, scratch);
      for (int k = 0; k < 60 && candidate_cost > cost; ++k) {
        alpha *= 0.5;
        candidate = project(v + alpha * step);
        candidate_cost = cost_of(fn, candidate, scratch);
      }
      if (candidate_cost <= cost) break;
    }
    if (candidate_cost > cost) return v;  // no descent left along either direction

    const double moved = (candidate - v).norm();
    slow = cost - candidate_cost < 0.2 * cost;
    v = candidate;
    cost = candidate_cost;
    if (moved < options.step_tolerance_m) return v;
  }
  throw Error(ErrorCode::NoConvergence,
              "Gauss-Newton did not converge in " + std::to_string(options.max_iterations) + " iterations");
}

}  // namespace

double distance(const LocalPoint& a, const LocalPoint& b) {
  return std::hypot(a.x_m - b.x_m, a.y_m - b.y_m, a.z_m - b.z_m);
}

LocalPoint to_local(const GlobalPosition& g, const GlobalPosition& origin) {
  check_global(g, "position");
  check_global(origin, "origin");
  const double dlon = wrap_longitude_delta(g.longitude_deg - origin.longitude_deg) * kDegToRad;
  const double dlat = (g.latitude_deg - origin.latitude_deg) * kDegToRad;
  return LocalPoint{kEarthRadiusM * dlon * std::cos(origin.latitude_deg * kDegToRad),
                    kEarthRadiusM * dlat, g.altitude_m - origin.altitude_m};
}

GlobalPosition to_global(const LocalPoint& p, const GlobalPosition& origin) {
  check_global(origin, "origin");
  if (!std::isfinite(p.x_m) || !std::isfinite(p.y_m) || !std::isfinite(p.z_m)) {
    throw Error(ErrorCode::InvalidArgument, "local point has non-finite components");
  }
  const double lat = origin.latitude_deg + p.y_m / kEarthRadiusM / kDegToRad;
  if (std::abs(lat) >= kMaxAbsLatitudeDeg) {
    throw Error(ErrorCode::PolarRegion, "result latitude outside (-89, 89) deg");
  }
  const double lon = origin.longitude_deg +
                     p.x_m / (kEarthRadiusM * std::cos(origin.latitude_deg * kDegToRad)) / kDegToRad;
  return GlobalPosition{lat, wrap_longitude(lon), origin.altitude_m + p.z_m};
}

LocalPoint multilaterate(std::span<const AnchorRange> ranges, SolveMode mode,
                         const std::optional<LocalPoint>& hint,
                         const MultilaterationOptions& options) {
  const bool planar = mode == SolveMode::TwoD;
  const std::size_t required = planar ? 2 : 3;
  if (ranges.size() < required) {
    throw Error(ErrorCode::InsufficientAnchors, "need at least " + std::to_string(required) +
                                                    " ranges, got " + std::to_string(ranges.size()));
  }
  const Eigen::Index dims = planar ? 2 : 3;
  const auto m = static_cast<Eigen::Index>(ranges.size());
  Eigen::MatrixXd anchors(m, dims);
  Eigen::VectorXd anchor_z(m);
  Eigen::VectorXd range_vec(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& ar = ranges[static_cast<std::size_t>(i)];
    if (!std::isfinite(ar.range_m) || ar.range_m < 0.0 || !std::isfinite(ar.anchor.x_m) ||
        !std::isfinite(ar.anchor.y_m) || !std::isfinite(ar.anchor.z_m)) {
      throw Error(ErrorCode::InvalidArgument, "anchor ranges must be finite and non-negative");
    }
    anchors(i, 0) = ar.anchor.x_m;
    anchors(i, 1) = ar.anchor.y_m;
    if (!planar) anchors(i, 2) = ar.anchor.z_m;
    anchor_z(i) = ar.anchor.z_m;
    range_vec(i) = ar.range_m;
  }

  const AnchorFrame frame = analyze_anchors(anchors);
  const bool ambiguous = frame.rank == dims - 1;
  if (frame.rank < dims - 1) {
    throw Error(ErrorCode::DegenerateGeometry,
                planar ? "anchors are coincident" : "anchors are collinear");
  }
  if (ambiguous && !planar && !hint) {
    throw Error(ErrorCode::DegenerateGeometry,
                "coplanar anchors leave a mirror ambiguity in 3D; a hint is required");
  }

  const double fixed_z = planar && hint ? hint->z_m : 0.0;
  const double scale = 1.0 + range_vec.norm();
  // Out-of-solve-space height difference per anchor (2D only).
  Eigen::VectorXd dz2 = Eigen::VectorXd::Zero(m);
  if (planar) dz2 = (anchor_z.array() - fixed_z).square().matrix();

  Eigen::VectorXd hint_vec(dims);
  if (hint) {
    hint_vec(0) = hint->x_m;
    hint_vec(1) = hint->y_m;
    if (!planar) hint_vec(2) = hint->z_m;
  }

  Eigen::VectorXd solution(dims);
  if (!ambiguous) {
    const ResidualFn fn = [&](const Eigen::VectorXd& p, Eigen::VectorXd& res, Eigen::MatrixXd* jac,
                              Eigen::MatrixXd* curv) {
      res.resize(m);
      if (jac) jac->resize(m, dims);
      if (curv) curv->setZero(dims, dims);
      for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::VectorXd diff = p - anchors.row(i).transpose();
        const double d = std::sqrt(diff.squaredNorm() + dz2(i));
        res(i) = d - range_vec(i);
        if (jac) {
          if (d > 0.0) {
            jac->row(i) = (diff / d).transpose();
          } else {
            jac->row(i).setZero();
          }
        }
        if (curv && d > 0.0) {
          // Hess(d) = (I - diff diff^T / d^2) / d
          const Eigen::MatrixXd h =
              (Eigen::MatrixXd::Identity(dims, dims) - diff * diff.transpose() / (d * d)) / d;
          *curv += res(i) * h;
        }
      }
    };
    // The objective can have several basins: near-degenerate anchor sets
    // mirror one across their best-fit line (plane), and a start on the far
    // side of a short range circle falls into another. Descend from the hint,
    // from the linearized closed-form solution and from the mirrored hint, and
    // keep the lowest cost (earlier starts win ties).
    const Eigen::VectorXd normal = mirror_normal(frame);
    const Eigen::VectorXd start = hint ? hint_vec : Eigen::VectorXd(frame.centroid + normal);
    const Eigen::VectorXd mirrored = start - 2.0 * (start - frame.centroid).dot(normal) * normal;

    // Subtracting the squared range equation of anchor 0 from the others
    // leaves a linear system in p (exact for consistent ranges).
    const Eigen::MatrixXd centered = anchors.rowwise() - frame.centroid.transpose();
    Eigen::MatrixXd lin_a(m - 1, dims);
    Eigen::VectorXd lin_b(m - 1);
    const auto lhs0 = range_vec(0) * range_vec(0) - dz2(0) - centered.row(0).squaredNorm();
    for (Eigen::Index i = 1; i < m; ++i) {
      lin_a.row(i - 1) = 2.0 * (centered.row(i) - centered.row(0));
      lin_b(i - 1) = lhs0 - (range_vec(i) * range_vec(i) - dz2(i) - centered.row(i).squaredNorm());
    }
    const Eigen::VectorXd linear = frame.centroid + lin_a.completeOrthogonalDecomposition().solve(lin_b);

    std::vector<Eigen::VectorXd> starts{start};
    if (linear.allFinite()) starts.push_back(linear);
    starts.push_back(mirrored);

    std::optional<Eigen::VectorXd> best;
    double best_cost = 0.0;
    std::optional<Error> failure;
    Eigen::VectorXd scratch;
    for (const Eigen::VectorXd& s : starts) {
      try {
        Eigen::VectorXd p = gauss_newton(fn, s, false, scale, options);
        const double c = cost_of(fn, p, scratch);
        if (!best || c < best_cost - 1e-9 * (1.0 + best_cost)) {
          best = std::move(p);
          best_cost = c;
        }
      } catch (const Error& e) {
        if (!failure) failure = e;
      }
    }
    if (!best) throw *failure;
    solution = *best;
  } else {
    // Anchors span a line (2D) or plane (3D): solve for the in-span
    // coordinates plus u = squared offset from the span, u >= 0. The mirror
    // side is chosen afterwards.
    const Eigen::Index span_dims = dims - 1;
    const Eigen::MatrixXd basis = frame.directions.leftCols(span_dims);
    const Eigen::VectorXd normal = mirror_normal(frame);
    const Eigen::MatrixXd anchor_coords =
        (anchors.rowwise() - frame.centroid.transpose()) * basis;  // m x span_dims

    const ResidualFn fn = [&](const Eigen::VectorXd& v, Eigen::VectorXd& res, Eigen::MatrixXd* jac,
                              Eigen::MatrixXd* curv) {
      res.resize(m);
      if (jac) jac->resize(m, span_dims + 1);
      if (curv) curv->setZero(span_dims + 1, span_dims + 1);
      const Eigen::VectorXd coords = v.head(span_dims);
      for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::VectorXd diff = coords - anchor_coords.row(i).transpose();
        const double d = std::sqrt(diff.squaredNorm() + v(span_dims) + dz2(i));
        res(i) = d - range_vec(i);
        if (jac) {
          if (d > 0.0) {
            jac->row(i).head(span_dims) = (diff / d).transpose();
            (*jac)(i, span_dims) = 0.5 / d;
          } else {
            jac->row(i).setZero();
          }
        }
        if (curv && d > 0.0) {
          const double d3 = d * d * d;
          Eigen::MatrixXd h(span_dims + 1, span_dims + 1);
          h.topLeftCorner(span_dims, span_dims) =
              Eigen::MatrixXd::Identity(span_dims, span_dims) / d - diff * diff.transpose() / d3;
          h.col(span_dims).head(span_dims) = -0.5 * diff / d3;
          h.row(span_dims).head(span_dims) = (-0.5 * diff / d3).transpose();
          h(span_dims, span_dims) = -0.25 / d3;
          *curv += res(i) * h;
        }
      }
    };

    Eigen::VectorXd start(span_dims + 1);
    double side = 1.0;
    if (hint) {
      const Eigen::VectorXd rel = hint_vec - frame.centroid;
      start.head(span_dims) = basis.transpose() * rel;
      const double offset = rel.dot(normal);
      start(span_dims) = std::max(offset * offset, 1.0);
      if (offset < 0.0) side = -1.0;
    } else {
      start.head(span_dims).setZero();
      start(span_dims) = 1.0;
    }
    const Eigen::VectorXd v = gauss_newton(fn, start, true, scale, options);
    solution = frame.centroid + basis * v.head(span_dims) + side * std::sqrt(v(span_dims)) * normal;
  }

  return LocalPoint{solution(0), solution(1), planar ? fixed_z : solution(2)};
}

LocalPoint fuse_fixes(std::span<const LocalPoint> points) {
  if (points.empty()) throw Error(ErrorCode::EmptyInput, "cannot fuse an empty list of fixes");
  std::vector<LocalPoint> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end(), [](const LocalPoint& a, const LocalPoint& b) {
    return std::tie(a.x_m, a.y_m, a.z_m) < std::tie(b.x_m, b.y_m, b.z_m);
  });
  // Offsets from the first point keep identical inputs exact.
  const LocalPoint& base = sorted.front();
  double sx = 0.0, sy = 0.0, sz = 0.0;
  for (const auto& p : sorted) {
    sx += p.x_m - base.x_m;
    sy += p.y_m - base.y_m;
    sz += p.z_m - base.z_m;
  }
  const auto n = static_cast<double>(sorted.size());
  return LocalPoint{base.x_m + sx / n, base.y_m + sy / n, base.z_m + sz / n};
}

}  // namespace rsspos
