#pragma once

// Fixed-step longitudinal soaring simulator.
//
// The aircraft always faces the freestream, so its ground velocity is
// (wx - v_a, wz - s(v_a)). Airspeed follows an affine trim map of pitch
// through a first-order lag; pitch either lags the setpoint directly or is
// driven through an elevator loop. Controllers and the wind scale are held
// constant across the RK4 substeps of one step.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <system_error>
#include <vector>

#include "orosoar/airframe.hpp"
#include "orosoar/control.hpp"
#include "orosoar/equilibrium.hpp"
#include "orosoar/error.hpp"
#include "orosoar/glide_polar.hpp"
#include "orosoar/rk4.hpp"
#include "orosoar/tgl.hpp"
#include "orosoar/wind_field.hpp"
#include "orosoar/zeuc.hpp"

namespace orosoar::sim {

enum class PlantMode { Lag, Cascade };

inline constexpr const char* to_string(PlantMode m) noexcept { return m == PlantMode::Lag ? "lag" : "cascade"; }

struct CascadeParams {
  double m_de{20.0};  ///< pitch acceleration per unit elevator, rad/s^2
  double m_q{5.0};    ///< pitch-rate damping, 1/s
  bool scale_with_airspeed{false};  ///< multiply m_de by (v_a / v_ref)^2
};

struct UavState {
  double t{0.0};
  double x{0.0};
  double z{0.0};
  double v_a{10.0};
  double theta{0.0};
  double q{0.0};
  friend bool operator==(const UavState&, const UavState&) = default;
};

struct TglEvent {
  double t;
  analysis::Tgl tgl;
};

struct Scenario {
  wind::AnyField field{wind::CylinderField(9.0, 3.0)};
  std::string grid_path;  ///< source file when `field` is a grid, as written in the scenario
  wind::ScaleSchedule scale_schedule{};
  airframe::AirframeParams airframe{};
  airframe::GlidePolar polar{airframe::GlidePolar::quadratic(1.2, 0.12, 10.0, 6.0, 16.0)};
  control::SoaringControllerConfig controller{};
  std::vector<TglEvent> tgl_schedule{{0.0, analysis::Tgl{}}};
  PlantMode plant_mode{PlantMode::Lag};
  CascadeParams cascade{};
  double dt{0.02};
  double duration{120.0};
  UavState initial{};
  std::uint64_t seed{0};

  // Analysis window used by the CLI, the service and convergence checks.
  analysis::Domain domain{-9.0, 0.0, 0.0, 9.0};
  analysis::ZRange z_range{3.2, 9.0};
  double zeuc_cell{0.05};

  std::size_t step_count() const { return static_cast<std::size_t>(std::llround(duration / dt)); }

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorCode::NonPositiveDt, "dt = " + std::to_string(dt));
    if (!(duration >= dt)) throw Error(ErrorCode::InvalidScenario, "duration must be at least dt");
    if (tgl_schedule.empty() || tgl_schedule.front().t != 0.0) {
      throw Error(ErrorCode::InvalidScenario, "tgl_schedule must start at t = 0");
    }
    for (std::size_t i = 1; i < tgl_schedule.size(); ++i) {
      if (tgl_schedule[i].t < tgl_schedule[i - 1].t) {
        throw Error(ErrorCode::InvalidScenario, "tgl_schedule times must be non-decreasing");
      }
    }
    airframe.validate(polar);
    controller.validate();
    if (!(cascade.m_de > 0.0) || !(cascade.m_q >= 0.0)) {
      throw Error(ErrorCode::InvalidScenario, "cascade needs m_de > 0 and m_q >= 0");
    }
    if (!polar.contains(initial.v_a)) {
      throw Error(ErrorCode::PolarRangeExceeded, "initial airspeed " + std::to_string(initial.v_a) +
                                                     " m/s outside the polar range");
    }
  }
};

struct LogRecord {
  double t;
  double x;
  double z;
  double v_a;
  double theta;
  double theta_sp;
  double e_rho;
  double elevator;
  double wx;
  double wz;
  double lambda;
  double excess_updraft;  ///< hover-assumption e at (x, z); NaN when wx is outside the polar
};

inline constexpr std::array<const char*, 12> kLogColumns = {
    "t", "x", "z", "v_a", "theta", "theta_sp", "e_rho", "elevator", "wx", "wz", "lambda", "excess_updraft"};

class Simulator {
 public:
  explicit Simulator(Scenario scenario) : sc_(std::move(scenario)), controller0_(sc_.controller) {
    sc_.validate();
    reset();
  }

  const Scenario& scenario() const noexcept { return sc_; }
  const UavState& state() const noexcept { return state_; }
  const control::ControllerState& controller_state() const noexcept { return ctl_; }
  std::size_t step_index() const noexcept { return k_; }
  double time() const noexcept { return static_cast<double>(k_) * sc_.dt; }
  bool finished() const noexcept { return k_ >= sc_.step_count(); }
  const wind::ScaleSchedule& scale_schedule() const noexcept { return schedule_; }

  /// TGL in force at the current step boundary.
  const analysis::Tgl& active_tgl() const {
    if (tgl_override_) return *tgl_override_;
    const analysis::Tgl* tgl = &sc_.tgl_schedule.front().tgl;
    for (const auto& ev : sc_.tgl_schedule) {
      if (event_step(ev.t) <= k_) tgl = &ev.tgl;
    }
    return *tgl;
  }

  /// Wind scale held over the current step.
  double lambda() const { return schedule_(time()); }

  /// Replaces the TGL from the current step on; later scheduled TGLs are dropped.
  void set_tgl(const analysis::Tgl& tgl) { tgl_override_ = tgl; }

  /// Holds the wind scale at lambda from the current step on.
  void set_wind_scale(double lambda) { schedule_ = wind::ScaleSchedule::constant(lambda); }

  void set_gains(const control::PidGains& pitch, const control::PidGains& elevator) {
    pitch.validate();
    elevator.validate();
    sc_.controller.pitch_gains = pitch;
    sc_.controller.elevator_gains = elevator;
  }

  void reset() {
    state_ = sc_.initial;
    state_.t = 0.0;
    ctl_ = {};
    k_ = 0;
    tgl_override_.reset();
    schedule_ = sc_.scale_schedule;
    sc_.controller = controller0_;
  }

  /// Samples the controllers at the current boundary, fills `rec`, then
  /// integrates one step. `rec` is left untouched only when the wind at the
  /// current position cannot be evaluated.
  void step(LogRecord& rec) {
    const double dt = sc_.dt;
    const double t = time();
    const double lam = lambda();
    const analysis::Tgl& tgl = active_tgl();
    const auto& af = sc_.airframe;
    const auto& polar = sc_.polar;

    const double e_rho = control::signed_distance(tgl, state_.x, state_.z);
    const control::PidResult pitch = control::pitch_setpoint(sc_.controller, ctl_.pitch, e_rho, dt);
    double elevator = 0.0;
    control::PidState elev_state = ctl_.elevator;
    if (sc_.plant_mode == PlantMode::Cascade) {
      const control::PidResult el = control::elevator_setpoint(sc_.controller, ctl_.elevator, pitch.output - state_.theta, dt);
      elevator = el.output;
      elev_state = el.state;
    }

    const wind::WindVector w = lam * sc_.field.sample(state_.x, state_.z);
    rec = LogRecord{t,           state_.x, state_.z, state_.v_a, state_.theta, pitch.output,
                    e_rho,       elevator, w.wx,     w.wz,       lam,
                    polar.contains(w.wx) ? w.wz - polar.evaluate(w.wx) : std::numeric_limits<double>::quiet_NaN()};

    const double theta_sp = pitch.output;
    const PlantMode mode = sc_.plant_mode;
    const CascadeParams cp = sc_.cascade;
    auto rhs = [&](const std::array<double, 5>& y) {
      const wind::WindVector wy = lam * sc_.field.sample(y[0], y[1]);
      const double v = y[2];
      const double v_trim = airframe::trim_airspeed(af, polar, y[3]);
      std::array<double, 5> d{};
      d[0] = wy.wx - v;
      d[1] = wy.wz - polar.evaluate(v);
      d[2] = (v_trim - v) / af.tau_v;
      if (mode == PlantMode::Lag) {
        d[3] = (theta_sp - y[3]) / af.tau_theta;
        d[4] = 0.0;
      } else {
        const double m_de = cp.scale_with_airspeed ? cp.m_de * (v / af.v_ref) * (v / af.v_ref) : cp.m_de;
        d[3] = y[4];
        d[4] = m_de * elevator - cp.m_q * y[4];
      }
      return d;
    };
    const auto y = rk4_step<5>({state_.x, state_.z, state_.v_a, state_.theta, state_.q}, dt, rhs);
    if (!polar.contains(y[2])) {
      throw Error(ErrorCode::PolarRangeExceeded,
                  "airspeed " + std::to_string(y[2]) + " m/s left [" + std::to_string(polar.v_min()) + ", " +
                      std::to_string(polar.v_max()) + "] at t=" + std::to_string(t + dt) +
                      " (x=" + std::to_string(y[0]) + ", z=" + std::to_string(y[1]) +
                      ", theta=" + std::to_string(y[3]) + ")");
    }
    ++k_;
    state_ = UavState{time(), y[0], y[1], y[2], y[3], y[4]};
    ctl_.pitch = pitch.state;
    ctl_.elevator = elev_state;
  }

  LogRecord step() {
    LogRecord rec{};
    step(rec);
    return rec;
  }

 private:
  std::size_t event_step(double t) const { return static_cast<std::size_t>(std::llround(t / sc_.dt)); }

  Scenario sc_;
  control::SoaringControllerConfig controller0_;
  UavState state_{};
  control::ControllerState ctl_{};
  std::size_t k_{0};
  std::optional<analysis::Tgl> tgl_override_;
  wind::ScaleSchedule schedule_{};
};

struct RunResult {
  std::vector<LogRecord> log;
  std::optional<Error> error;  ///< set when the run terminated early
};

/// Runs the scenario to completion or to the first failure.
inline RunResult run(const Scenario& scenario) {
  RunResult out;
  Simulator sim(scenario);
  out.log.reserve(scenario.step_count());
  while (!sim.finished()) {
    LogRecord rec{};
    rec.t = std::numeric_limits<double>::quiet_NaN();
    try {
      sim.step(rec);
    } catch (const Error& e) {
      if (!std::isnan(rec.t)) out.log.push_back(rec);
      out.error = e;
      break;
    }
    out.log.push_back(rec);
  }
  return out;
}

struct Convergence {
  bool settled{false};
  double settle_time{std::numeric_limits<double>::infinity()};  ///< s after the first log record
  double final_offset{std::numeric_limits<double>::infinity()};  ///< m, last record to the target
  double rms_e_rho{std::numeric_limits<double>::infinity()};     ///< m, over the final 20%
  analysis::Point mean_settled{};  ///< mean position over the final 20%
};

/// Settled when every record in the final 20% of the log stays within
/// `settle_band` of `target`. Settle time is when the log last entered the band.
inline Convergence measure_convergence(std::span<const LogRecord> log, const analysis::Tgl& tgl,
                                       analysis::Point target, double settle_band) {
  if (log.empty()) throw Error(ErrorCode::EmptyLog, "no records to measure");
  const std::size_t n = log.size();
  const std::size_t tail = n - (n * 4) / 5;
  const std::size_t first_tail = n - tail;
  auto dist = [&](const LogRecord& r) { return std::hypot(r.x - target.x, r.z - target.z); };

  Convergence c;
  c.settled = true;
  double sq = 0.0, mx = 0.0, mz = 0.0;
  for (std::size_t i = first_tail; i < n; ++i) {
    if (!(dist(log[i]) <= settle_band)) c.settled = false;
    const double e = control::signed_distance(tgl, log[i].x, log[i].z);
    sq += e * e;
    mx += log[i].x;
    mz += log[i].z;
  }
  c.rms_e_rho = std::sqrt(sq / static_cast<double>(tail));
  c.mean_settled = {mx / static_cast<double>(tail), mz / static_cast<double>(tail)};
  c.final_offset = dist(log.back());

  std::size_t entered = 0;
  for (std::size_t i = n; i-- > 0;) {
    if (!(dist(log[i]) <= settle_band)) {
      entered = i + 1;
      break;
    }
  }
  if (entered < n) c.settle_time = log[entered].t - log.front().t;
  return c;
}

namespace detail {
inline void put_double(std::ostream& os, double v) {
  if (std::isnan(v)) {
    os << "nan";
    return;
  }
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  os.write(buf, res.ptr - buf);
}
}  // namespace detail

/// Log CSV in LogRecord column order, shortest round-trip number format.
inline void write_log_csv(std::ostream& os, std::span<const LogRecord> log) {
  for (std::size_t i = 0; i < kLogColumns.size(); ++i) os << (i ? "," : "") << kLogColumns[i];
  os << '\n';
  for (const LogRecord& r : log) {
    const double cols[] = {r.t, r.x, r.z, r.v_a, r.theta, r.theta_sp, r.e_rho, r.elevator, r.wx, r.wz, r.lambda,
                           r.excess_updraft};
    for (std::size_t i = 0; i < std::size(cols); ++i) {
      if (i) os << ',';
      detail::put_double(os, cols[i]);
    }
    os << '\n';
  }
}

/// Starts the scenario trimmed at `eq`: on the TGL, airspeed equal to the
/// local horizontal wind, pitch and controller theta0 at the matching trim.
inline void trim_at(Scenario& sc, const analysis::Equilibrium& eq, double window = 0.35) {
  const double v = eq.local_wind.wx;
  const double theta = airframe::trim_pitch(sc.airframe, v);
  sc.controller.theta0 = theta;
  sc.controller.set_pitch_window(window);
  sc.initial = UavState{0.0, eq.position.x, eq.position.z, v, theta, 0.0};
}

}  // namespace orosoar::sim
