#pragma once

// TGL controller laws. Every function is pure: state goes in, next state
// comes out.

#include <algorithm>
#include <cmath>
#include <string>

#include "orosoar/error.hpp"
#include "orosoar/tgl.hpp"

namespace orosoar::control {

struct PidGains {
  double kp{0.0};
  double ki{0.0};
  double kd{0.0};
  double integrator_limit{1.0};  ///< output units
  double output_limit{1.0};      ///< output units
  double derivative_filter_tau{0.0};  ///< s

  void validate() const {
    if (!std::isfinite(kp) || !std::isfinite(ki) || !std::isfinite(kd)) {
      throw Error(ErrorCode::InvalidGains, "non-finite gain");
    }
    if (!(integrator_limit > 0.0) || !(output_limit > 0.0)) {
      throw Error(ErrorCode::InvalidGains, "limits must be positive");
    }
    if (!(derivative_filter_tau >= 0.0) || !std::isfinite(derivative_filter_tau)) {
      throw Error(ErrorCode::InvalidGains, "derivative filter tau must be >= 0");
    }
  }

  friend bool operator==(const PidGains&, const PidGains&) = default;
};

/// The integral is kept in output units (already multiplied by ki).
struct PidState {
  double integral{0.0};
  double prev_error{0.0};
  double derivative{0.0};  ///< filtered de/dt
  bool initialized{false};

  friend bool operator==(const PidState&, const PidState&) = default;
};

struct PidResult {
  double output;
  PidState state;
};

inline void require_positive_dt(double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::NonPositiveDt, "dt = " + std::to_string(dt));
}

/// One discrete PID update: trapezoidal integral, first-order filtered
/// derivative (zero on the first call), integral frozen while the output
/// saturates in the direction of the error, output clamped.
inline PidResult pid_step(const PidGains& g, const PidState& s, double error, double dt) {
  require_positive_dt(dt);
  const double prev = s.initialized ? s.prev_error : error;
  const double deriv =
      s.initialized ? (g.derivative_filter_tau * s.derivative + (error - prev)) / (g.derivative_filter_tau + dt) : 0.0;

  double integral = std::clamp(s.integral + g.ki * 0.5 * (error + prev) * dt, -g.integrator_limit, g.integrator_limit);
  const double raw = g.kp * error + integral + g.kd * deriv;
  if (std::abs(raw) > g.output_limit && error != 0.0 && (raw > 0.0) == (error > 0.0)) integral = s.integral;

  const double out = std::clamp(g.kp * error + integral + g.kd * deriv, -g.output_limit, g.output_limit);
  return {out, PidState{integral, error, deriv, true}};
}

struct SoaringControllerConfig {
  double theta0{0.0};  ///< rad
  PidGains pitch_gains{0.2, 0.05, 0.1, 0.35, 0.35, 0.1};
  PidGains elevator_gains{2.0, 0.4, 0.3, 0.5, 1.0, 0.05};
  double pitch_min{-0.35};  ///< rad, absolute
  double pitch_max{0.35};   ///< rad, absolute

  /// Setpoint window theta0 +/- half_width.
  void set_pitch_window(double half_width) {
    pitch_min = theta0 - half_width;
    pitch_max = theta0 + half_width;
  }

  void validate() const {
    pitch_gains.validate();
    elevator_gains.validate();
    if (!(pitch_min <= theta0 && theta0 <= pitch_max)) {
      throw Error(ErrorCode::InvalidGains, "pitch setpoint limits must bracket theta0");
    }
  }
};

struct ControllerState {
  PidState pitch;
  PidState elevator;
  friend bool operator==(const ControllerState&, const ControllerState&) = default;
};

/// e_rho: perpendicular distance to the TGL, positive upstream.
inline double signed_distance(const analysis::Tgl& tgl, double x, double z) noexcept { return -tgl.residual(x, z); }

/// theta_sp = theta0 + PID(e_rho), clamped to the pitch window.
inline PidResult pitch_setpoint(const SoaringControllerConfig& cfg, const PidState& s, double e_rho, double dt) {
  PidResult r = pid_step(cfg.pitch_gains, s, e_rho, dt);
  r.output = std::clamp(cfg.theta0 + r.output, cfg.pitch_min, cfg.pitch_max);
  return r;
}

/// Normalised elevator deflection in [-1, 1] from the pitch error.
inline PidResult elevator_setpoint(const SoaringControllerConfig& cfg, const PidState& s, double theta_error,
                                   double dt) {
  PidResult r = pid_step(cfg.elevator_gains, s, theta_error, dt);
  r.output = std::clamp(r.output, -1.0, 1.0);
  return r;
}

/// Aileron command holding the wings level.
inline PidResult roll_setpoint(const PidGains& g, const PidState& s, double roll_error, double dt) {
  return pid_step(g, s, roll_error, dt);
}

/// Heading error toward a waypoint `lookahead` m upwind at lateral offset y.
inline double yaw_error(double y, double lookahead, double psi) {
  if (!(lookahead > 0.0)) throw Error(ErrorCode::NonPositiveR, "waypoint distance must be positive");
  return std::atan2(y, lookahead) - psi;
}

/// Rudder command: PD on the heading error (any ki is ignored).
inline PidResult yaw_setpoint(PidGains g, const PidState& s, double yaw_err, double dt) {
  g.ki = 0.0;
  return pid_step(g, s, yaw_err, dt);
}

}  // namespace orosoar::control
