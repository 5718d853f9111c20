#pragma once

// Point-mass aerodynamics of an unpowered glider in the longitudinal plane,
// and the affine pitch-to-airspeed trim map used by the simulator plant.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "orosoar/error.hpp"
#include "orosoar/glide_polar.hpp"

namespace orosoar::airframe {

struct AirframeParams {
  double m{1.2};         ///< mass, kg
  double S{0.3};         ///< wing area, m^2
  double rho{1.225};     ///< air density, kg/m^3
  double g{9.81};        ///< gravity, m/s^2
  double a0{0.035};      ///< drag polynomial, constant term
  double a1{-0.04};      ///< drag polynomial, linear in C_L
  double a2{0.06};       ///< drag polynomial, quadratic in C_L
  double theta0{0.0};    ///< trim pitch, rad
  double v_ref{10.0};    ///< trim airspeed at theta0, m/s
  double k_v{20.0};      ///< trim airspeed slope, (m/s)/rad, positive: pitch up slows down
  double tau_v{1.0};     ///< airspeed lag, s
  double tau_theta{0.3}; ///< pitch lag (lag plant), s

  void validate() const {
    if (!(m > 0.0 && S > 0.0 && rho > 0.0 && g > 0.0)) {
      throw Error(ErrorCode::InvalidScenario, "airframe needs m, S, rho, g > 0");
    }
    if (!(tau_v > 0.0 && tau_theta > 0.0 && k_v > 0.0)) {
      throw Error(ErrorCode::InvalidScenario, "airframe needs tau_v, tau_theta, k_v > 0");
    }
    for (double c : {a0, a1, a2, theta0, v_ref}) {
      if (!std::isfinite(c)) throw Error(ErrorCode::InvalidScenario, "non-finite airframe parameter");
    }
  }

  void validate(const GlidePolar& polar) const {
    validate();
    if (!polar.contains(v_ref)) throw PolarRangeError(v_ref, polar.v_min(), polar.v_max());
  }
};

inline constexpr double kDeskVMin = 5.0;
inline constexpr double kDeskVMax = 14.0;

/// The small foam glider used as the default airframe.
inline AirframeParams desk_airframe() { return AirframeParams{}; }

namespace detail {
inline void require_positive_airspeed(double v_a) {
  if (!(v_a > 0.0)) throw Error(ErrorCode::NonPositiveAirspeed, "airspeed " + std::to_string(v_a) + " m/s");
}
}  // namespace detail

/// Lift coefficient that supports the weight in level flight.
inline double lift_coefficient(const AirframeParams& p, double v_a) {
  detail::require_positive_airspeed(v_a);
  return 2.0 * p.m * p.g / (p.rho * v_a * v_a * p.S);
}

/// Drag force, N, from the quadratic drag polynomial in C_L.
inline double drag(const AirframeParams& p, double v_a) {
  const double cl = lift_coefficient(p, v_a);
  return 0.5 * p.rho * v_a * v_a * p.S * (p.a0 + p.a1 * cl + p.a2 * cl * cl);
}

/// Small-angle descent angle, rad. Positive means descending.
inline double glide_angle(const AirframeParams& p, double v_a, double thrust) {
  return (drag(p, v_a) - thrust) / (p.m * p.g);
}

/// Still-air sink rate from the point-mass model, v * gamma(v) at T = 0.
inline double point_mass_sink(const AirframeParams& p, double v_a) { return v_a * glide_angle(p, v_a, 0.0); }

/// Cubic polar fitted to n evenly spaced point-mass samples on [v_min, v_max].
/// Each least-squares row is scaled by 1/s^2. That leans the fit towards the
/// low-sink part of the curve and keeps the cubic's minimum near the model's.
inline GlidePolar polar_from_point_mass(const AirframeParams& p, int n_samples, double v_min = kDeskVMin,
                                        double v_max = kDeskVMax) {
  if (n_samples < 8) {
    throw Error(ErrorCode::InsufficientSamples, "need at least 8 samples, got " + std::to_string(n_samples));
  }
  if (!(v_min > 0.0) || !(v_min < v_max)) {
    throw Error(ErrorCode::NonPositiveAirspeed, "polar range must satisfy 0 < v_min < v_max");
  }
  std::vector<PolarSample> samples;
  std::vector<double> weights;
  samples.reserve(static_cast<std::size_t>(n_samples));
  for (int i = 0; i < n_samples; ++i) {
    const double v = v_min + (v_max - v_min) * i / (n_samples - 1);
    const double s = point_mass_sink(p, v);
    samples.push_back({v, s});
    weights.push_back(s > 0.0 ? 1.0 / (s * s) : 1.0);
  }
  return GlidePolar(detail::weighted_cubic(samples, weights), v_min, v_max);
}

/// Default polar of the desk airframe.
inline GlidePolar desk_polar() { return polar_from_point_mass(desk_airframe(), 64); }

/// Steady airspeed the plant converges to at pitch theta, clamped to the polar.
inline double trim_airspeed(const AirframeParams& p, const GlidePolar& polar, double theta) {
  return std::clamp(p.v_ref - p.k_v * (theta - p.theta0), polar.v_min(), polar.v_max());
}

/// Inverse of the trim map (unclamped): the pitch that trims to airspeed v.
inline double trim_pitch(const AirframeParams& p, double v) { return p.theta0 - (v - p.v_ref) / p.k_v; }

}  // namespace orosoar::airframe
