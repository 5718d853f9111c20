#pragma once

// Where a TGL meets the ZEUC, whether that point attracts, and how it moves
// when the whole wind field is scaled.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "orosoar/error.hpp"
#include "orosoar/glide_polar.hpp"
#include "orosoar/tgl.hpp"
#include "orosoar/wind_field.hpp"
#include "orosoar/zeuc.hpp"

namespace orosoar::analysis {

enum class Stability { Stable, Unstable };

inline constexpr const char* to_string(Stability s) noexcept { return s == Stability::Stable ? "stable" : "unstable"; }

struct ZRange {
  double lo;
  double hi;
};

struct Equilibrium {
  Point position{};
  wind::WindVector local_wind{};
  Stability stability{Stability::Stable};
  double tgl_zeuc_angle{std::numeric_limits<double>::quiet_NaN()};  ///< degrees, 90 = perpendicular
  int crossings{0};  ///< number of sign changes found along the TGL
};

struct EquilibriumOptions {
  int scan_intervals{400};
  double tolerance{1e-6};  ///< |e| at the returned point, m/s
  int max_bisections{200};
};

/// Unit tangent of the TGL pointing up.
inline Point tgl_tangent(const Tgl& tgl) noexcept { return {-tgl.B, tgl.A}; }

/// de/ds along the TGL at a point on it, by central difference of step h.
template <wind::WindField F>
double excess_slope_along(const Tgl& tgl, const F& field, const wind::ScaleSchedule& schedule,
                          const airframe::GlidePolar& polar, Point p, double t, double h) {
  const Point d = tgl_tangent(tgl);
  const double up = excess_updraft(field, schedule, polar, p.x + h * d.x, p.z + h * d.z, t);
  const double down = excess_updraft(field, schedule, polar, p.x - h * d.x, p.z - h * d.z, t);
  return (up - down) / (2.0 * h);
}

/// Stable iff excess updraft decreases going up the TGL. The difference step
/// is 1e-3 of the z-range height.
template <wind::WindField F>
Stability equilibrium_stability(const Tgl& tgl, const F& field, const wind::ScaleSchedule& schedule,
                                const airframe::GlidePolar& polar, Point p, double t, ZRange z_range) {
  const double height = z_range.hi - z_range.lo;
  if (!(height > 0.0)) throw Error(ErrorCode::EmptyDomain, "z range must have positive height");
  if (std::abs(tgl.residual(p.x, p.z)) > 1e-6) {
    throw Error(ErrorCode::PointOffTgl, "point is " + std::to_string(tgl.residual(p.x, p.z)) + " m off the TGL");
  }
  return excess_slope_along(tgl, field, schedule, polar, p, t, 1e-3 * height) < 0.0 ? Stability::Stable
                                                                                     : Stability::Unstable;
}

/// Angle, degrees, between the TGL and the e = 0 level line through p,
/// taken from the numerical gradient of e.
template <wind::WindField F>
double gradient_contour_angle(const Tgl& tgl, const F& field, const wind::ScaleSchedule& schedule,
                              const airframe::GlidePolar& polar, Point p, double t, double h) {
  const double gx = (excess_updraft(field, schedule, polar, p.x + h, p.z, t) -
                     excess_updraft(field, schedule, polar, p.x - h, p.z, t)) /
                    (2.0 * h);
  const double gz = (excess_updraft(field, schedule, polar, p.x, p.z + h, t) -
                     excess_updraft(field, schedule, polar, p.x, p.z - h, t)) /
                    (2.0 * h);
  const double gn = std::hypot(gx, gz);
  if (!(gn > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  // Level-line tangent is (-gz, gx); TGL tangent is (-B, A).
  const Point d = tgl_tangent(tgl);
  const double c = std::abs(d.x * -gz + d.z * gx) / gn;
  return std::acos(std::min(1.0, c)) * 180.0 / std::numbers::pi;
}

/// Scans e along the TGL between z_range.lo and z_range.hi, bisects every
/// sign change, and returns the lowest stable crossing (the lowest unstable
/// one when no stable crossing exists).
template <wind::WindField F>
Equilibrium predict_equilibrium(const Tgl& tgl, const F& field, const wind::ScaleSchedule& schedule,
                                const airframe::GlidePolar& polar, ZRange z_range, double t,
                                const EquilibriumOptions& options = {}) {
  if (!(z_range.hi > z_range.lo)) throw Error(ErrorCode::EmptyDomain, "z range must have positive height");
  auto e_at = [&](double z) { return excess_updraft(field, schedule, polar, tgl.x_at(z), z, t); };
  auto e_soft = [&](double z) { return detail::value_or_nan([&] { return e_at(z); }); };

  const int n = std::max(1, options.scan_intervals);
  const double dz = (z_range.hi - z_range.lo) / n;
  std::vector<double> zs(static_cast<std::size_t>(n) + 1);
  std::vector<double> es(zs.size());
  for (int k = 0; k <= n; ++k) {
    zs[static_cast<std::size_t>(k)] = k == n ? z_range.hi : z_range.lo + dz * k;
  }
  es.front() = e_at(zs.front());
  es.back() = e_at(zs.back());
  for (std::size_t k = 1; k + 1 < zs.size(); ++k) es[k] = e_soft(zs[k]);

  struct Root {
    double z;
    bool stable;
  };
  std::vector<Root> roots;
  for (std::size_t k = 0; k + 1 < zs.size(); ++k) {
    const double ea = es[k], eb = es[k + 1];
    if (std::isnan(ea) || std::isnan(eb) || (ea >= 0.0) == (eb >= 0.0)) continue;
    double lo = zs[k], hi = zs[k + 1], flo = ea;
    double mid = 0.5 * (lo + hi);
    for (int it = 0; it < options.max_bisections; ++it) {
      mid = 0.5 * (lo + hi);
      const double fm = e_at(mid);
      if (std::abs(fm) < options.tolerance || hi - lo < 1e-14) break;
      if ((fm >= 0.0) == (flo >= 0.0)) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
      }
    }
    roots.push_back({mid, ea >= 0.0});
  }
  if (roots.empty()) {
    throw Error(ErrorCode::NoIntersection, "excess updraft does not change sign along the TGL on z in [" +
                                               std::to_string(z_range.lo) + ", " + std::to_string(z_range.hi) + "]");
  }
  const Root* pick = nullptr;
  for (const Root& r : roots) {
    if (r.stable) {
      pick = &r;
      break;
    }
  }
  if (pick == nullptr) pick = &roots.front();

  Equilibrium eq;
  eq.position = {tgl.x_at(pick->z), pick->z};
  eq.local_wind = wind::sample(field, schedule, eq.position.x, eq.position.z, t);
  eq.crossings = static_cast<int>(roots.size());
  const double h = 1e-3 * (z_range.hi - z_range.lo);
  eq.stability = detail::value_or_nan([&] { return excess_slope_along(tgl, field, schedule, polar, eq.position, t, h); }) < 0.0
                     ? Stability::Stable
                     : Stability::Unstable;
  eq.tgl_zeuc_angle = detail::value_or_nan(
      [&] { return gradient_contour_angle(tgl, field, schedule, polar, eq.position, t, h); });
  return eq;
}

/// de/dlambda at lambda = 1 for a point on the ZEUC whose local horizontal
/// wind is v: s(v) - s'(v) v.
inline double scaling_sensitivity(const airframe::GlidePolar& polar, double v) {
  return airframe::sink_rate(polar, v) - polar.slope(v) * v;
}

/// Acute angle, degrees, between the TGL and the contour segment nearest to
/// p. Throws PointNotNearContour when no segment is within one cell.
inline double tgl_zeuc_angle(const Tgl& tgl, const ZeucContour& contour, Point p) {
  double best = std::numeric_limits<double>::infinity();
  Point dir{0.0, 0.0};
  for (const auto& line : contour.polylines) {
    for (std::size_t k = 0; k + 1 < line.size(); ++k) {
      const Point a = line[k], b = line[k + 1];
      const double sx = b.x - a.x, sz = b.z - a.z;
      const double len2 = sx * sx + sz * sz;
      if (len2 == 0.0) continue;
      const double u = std::clamp(((p.x - a.x) * sx + (p.z - a.z) * sz) / len2, 0.0, 1.0);
      const double d = std::hypot(a.x + u * sx - p.x, a.z + u * sz - p.z);
      if (d < best) {
        best = d;
        dir = {sx, sz};
      }
    }
  }
  if (!(best <= contour.cell)) {
    throw Error(ErrorCode::PointNotNearContour, "nearest contour segment is " + std::to_string(best) + " m away");
  }
  const Point d = tgl_tangent(tgl);
  const double c = std::abs(d.x * dir.x + d.z * dir.z) / std::hypot(dir.x, dir.z);
  return std::acos(std::min(1.0, c)) * 180.0 / std::numbers::pi;
}

}  // namespace orosoar::analysis
