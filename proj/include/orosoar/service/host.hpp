#pragma once

// The simulation side of the live service, free of any networking. The
// server owns one SimHost and talks to it only from a single strand; tests
// drive it directly.

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "orosoar/equilibrium.hpp"
#include "orosoar/scenario_io.hpp"
#include "orosoar/service/protocol.hpp"
#include "orosoar/sim.hpp"
#include "orosoar/zeuc.hpp"

namespace orosoar::service {

struct HostOptions {
  double snapshot_rate{20.0};           ///< snapshots per simulated second (per wall second while paused)
  std::size_t max_steps_per_advance{5000};  ///< cap on catch-up after a stall
};

enum class RunStatus { Running, Paused, Halted };

inline constexpr const char* to_string(RunStatus s) noexcept {
  switch (s) {
    case RunStatus::Running: return "running";
    case RunStatus::Paused: return "paused";
    case RunStatus::Halted: return "halted";
  }
  return "unknown";
}

/// An applied command and the boundary it took effect at. `epoch` counts resets.
struct TraceEntry {
  std::uint64_t epoch;
  std::uint64_t step;
  Command command;
};

/// A message addressed to one client.
struct Reply {
  std::uint64_t client;
  json message;
};

/// Applies a command's effect on the simulation. Commands that only steer
/// pacing (pause, resume, set_time_scale) leave it untouched. Throws without
/// side effects when the command is invalid in the current state.
inline void apply_to(sim::Simulator& s, const Command& c) {
  switch (c.kind) {
    case CommandKind::SetTgl:
      s.set_tgl(c.tgl);
      break;
    case CommandKind::TranslateTgl:
      s.set_tgl(analysis::translate_tgl(s.active_tgl(), c.dx, c.dz));
      break;
    case CommandKind::RotateTgl:
      s.set_tgl(analysis::rotate_tgl(s.active_tgl(), c.pivot_x, c.pivot_z, c.dangle));
      break;
    case CommandKind::SetWindScale:
      s.set_wind_scale(c.lambda);
      break;
    case CommandKind::Reset:
      s.reset();
      break;
    case CommandKind::SetGains: {
      const auto& cfg = s.scenario().controller;
      control::PidGains pitch = cfg.pitch_gains, elevator = cfg.elevator_gains;
      try {
        if (c.pitch_gains) pitch = io::detail::gains_from(*c.pitch_gains, pitch, "pitch");
        if (c.elevator_gains) elevator = io::detail::gains_from(*c.elevator_gains, elevator, "elevator");
      } catch (const Error& e) {
        if (e.code() == ErrorCode::InvalidScenario) throw Error(ErrorCode::MalformedCommand, e.what());
        throw;
      }
      s.set_gains(pitch, elevator);
      break;
    }
    case CommandKind::Pause:
    case CommandKind::Resume:
    case CommandKind::SetTimeScale:
      break;
  }
}

/// Offline replay of a command trace. Returns the state at every step
/// boundary, one vector per epoch; the last epoch runs to `last_step`.
inline std::vector<std::vector<sim::UavState>> replay_trace(const sim::Scenario& scenario,
                                                            std::span<const TraceEntry> trace,
                                                            std::uint64_t last_step) {
  sim::Simulator s(scenario);
  std::vector<std::vector<sim::UavState>> out(1, {s.state()});
  auto advance_to = [&](std::uint64_t step) {
    while (s.step_index() < step) {
      s.step();
      out.back().push_back(s.state());
    }
  };
  for (const TraceEntry& e : trace) {
    while (out.size() < e.epoch + 1) out.emplace_back();
    advance_to(e.step);
    apply_to(s, e.command);
    if (e.command.kind == CommandKind::Reset) {
      out.emplace_back(std::vector<sim::UavState>{s.state()});
    }
  }
  advance_to(last_step);
  return out;
}

class SimHost {
 public:
  explicit SimHost(sim::Scenario scenario, HostOptions options = {})
      : sim_(std::move(scenario)), opts_(options), cached_lambda_(sim_.lambda()) {
    if (!(opts_.snapshot_rate > 0.0)) throw Error(ErrorCode::InvalidScenario, "snapshot rate must be positive");
    next_snapshot_t_ = 1.0 / opts_.snapshot_rate;
  }

  const sim::Simulator& simulator() const noexcept { return sim_; }
  RunStatus status() const noexcept { return status_; }
  double time_scale() const noexcept { return time_scale_; }
  std::uint64_t epoch() const noexcept { return epoch_; }
  const std::vector<TraceEntry>& trace() const noexcept { return trace_; }

  /// Queues a command; it takes effect at the next step boundary.
  void submit(std::uint64_t client, Command c) { pending_.push_back({client, std::move(c)}); }

  /// Applies every queued command, in arrival order, at the current boundary.
  /// Acks report that boundary; for a reset it is the boundary it ended.
  std::vector<Reply> apply_pending() {
    std::vector<Reply> replies;
    while (!pending_.empty()) {
      auto [client, c] = std::move(pending_.front());
      pending_.pop_front();
      replies.push_back({client, apply(c)});
    }
    return replies;
  }

  /// Runs up to `steps` steps while running. Snapshots due along the way are
  /// appended to `snapshots`. Returns the number of steps taken.
  std::size_t step_many(std::size_t steps, std::vector<json>& snapshots) {
    std::size_t taken = 0;
    while (taken < steps && status_ == RunStatus::Running) {
      try {
        sim_.step(last_);
        has_last_ = true;
      } catch (const Error& e) {
        status_ = RunStatus::Halted;
        diagnostic_ = e.what();
        snapshots.push_back(snapshot());
        break;
      }
      ++taken;
      if (sim_.time() + 1e-9 >= next_snapshot_t_) {
        snapshots.push_back(snapshot());
        const double period = 1.0 / opts_.snapshot_rate;
        while (next_snapshot_t_ <= sim_.time() + 1e-9) next_snapshot_t_ += period;
      }
    }
    return taken;
  }

  /// Wall-clock driver: applies queued commands, then advances simulated
  /// time by `seconds` times the time scale. While paused or halted a
  /// heartbeat snapshot goes out at the snapshot rate of wall time.
  void advance_wall(double seconds, std::vector<Reply>& replies, std::vector<json>& snapshots) {
    heartbeat_ += seconds;
    for (auto& r : apply_pending()) replies.push_back(std::move(r));
    if (reset_pending_) {
      reset_pending_ = false;
      snapshots.push_back(snapshot());
    }
    if (status_ == RunStatus::Running) {
      debt_ += seconds * time_scale_;
      const double dt = sim_.scenario().dt;
      auto n = static_cast<std::size_t>(std::floor(debt_ / dt + 1e-9));
      if (n > opts_.max_steps_per_advance) {
        n = opts_.max_steps_per_advance;
        debt_ = static_cast<double>(n) * dt;
      }
      debt_ -= static_cast<double>(step_many(n, snapshots)) * dt;
      idle_ = 0.0;
    } else {
      idle_ += seconds;
      if (idle_ >= 1.0 / opts_.snapshot_rate) {
        idle_ = 0.0;
        snapshots.push_back(snapshot());
      }
    }
  }

  /// Current revision of the contour. Bumps whenever the wind scale in force
  /// differs from the one the cached contour was computed for.
  std::uint64_t zeuc_revision() {
    const double lam = sim_.lambda();
    if (lam != cached_lambda_) {
      cached_lambda_ = lam;
      ++revision_;
      contour_.reset();
    }
    return revision_;
  }

  /// Contour payload for the current revision, computed on first use.
  const json& zeuc_payload() {
    const std::uint64_t rev = zeuc_revision();
    if (!contour_) {
      const auto& sc = sim_.scenario();
      const auto c = analysis::extract_zeuc(sc.field, wind::ScaleSchedule::constant(cached_lambda_), sc.polar,
                                            sc.domain, sc.zeuc_cell, 0.0);
      json j = analysis::to_json(c);
      j["revision"] = rev;
      j["lambda"] = cached_lambda_;
      contour_ = std::move(j);
    }
    return *contour_;
  }

  /// Projection of the current state. The contour itself is not included.
  json snapshot() {
    const auto& st = sim_.state();
    const auto& tgl = sim_.active_tgl();
    const double lam = sim_.lambda();
    json j{{"t", sim_.time()},
           {"step", sim_.step_index()},
           {"epoch", epoch_},
           {"heartbeat", heartbeat_},
           {"status", to_string(status_)},
           {"time_scale", time_scale_},
           {"state", {{"x", st.x}, {"z", st.z}, {"v_a", st.v_a}, {"theta", st.theta}, {"q", st.q}}},
           {"tgl", io::tgl_to_json(tgl)},
           {"e_rho", control::signed_distance(tgl, st.x, st.z)},
           {"lambda", lam},
           {"theta_sp", has_last_ ? json(last_.theta_sp) : json(nullptr)},
           {"elevator", has_last_ ? json(last_.elevator) : json(nullptr)},
           {"equilibrium", equilibrium(tgl, lam)},
           {"zeuc_revision", zeuc_revision()}};
    if (diagnostic_) j["diagnostic"] = *diagnostic_;
    return j;
  }

  json info() const {
    return {{"protocol_version", kProtocolVersion},
            {"schema_version", io::kScenarioSchemaVersion},
            {"snapshot_rate", opts_.snapshot_rate},
            {"scenario", io::scenario_to_json(sim_.scenario())}};
  }

 private:
  json apply(const Command& c) {
    const double t = sim_.time();
    const std::uint64_t step = sim_.step_index();
    try {
      switch (c.kind) {
        case CommandKind::Pause:
          if (status_ == RunStatus::Running) status_ = RunStatus::Paused;
          break;
        case CommandKind::Resume:
          if (status_ == RunStatus::Halted) {
            throw Error(ErrorCode::MalformedCommand, "simulation halted (" + diagnostic_.value_or("") + "), reset first");
          }
          status_ = RunStatus::Running;
          debt_ = 0.0;
          break;
        case CommandKind::SetTimeScale:
          time_scale_ = c.time_scale;
          break;
        default:
          apply_to(sim_, c);
      }
    } catch (const Error& e) {
      return rejection(c.seq, to_string(c.kind), e);
    }
    trace_.push_back({epoch_, step, c});
    if (c.kind == CommandKind::Reset) {
      ++epoch_;
      has_last_ = false;
      diagnostic_.reset();
      if (status_ == RunStatus::Halted) status_ = RunStatus::Paused;
      next_snapshot_t_ = 1.0 / opts_.snapshot_rate;
      debt_ = 0.0;
      reset_pending_ = true;
    }
    return ack(c, t, step);
  }

  json equilibrium(const analysis::Tgl& tgl, double lam) {
    if (eq_key_ && eq_key_->tgl == tgl && eq_key_->lambda == lam) return eq_value_;
    const auto& sc = sim_.scenario();
    try {
      const auto eq = analysis::predict_equilibrium(tgl, sc.field, wind::ScaleSchedule::constant(lam), sc.polar,
                                                    sc.z_range, 0.0);
      eq_value_ = {{"x", eq.position.x}, {"z", eq.position.z}, {"stability", analysis::to_string(eq.stability)}};
    } catch (const Error&) {
      eq_value_ = nullptr;
    }
    eq_key_ = EqKey{tgl, lam};
    return eq_value_;
  }

  struct Pending {
    std::uint64_t client;
    Command command;
  };
  struct EqKey {
    analysis::Tgl tgl;
    double lambda;
  };

  sim::Simulator sim_;
  HostOptions opts_;
  RunStatus status_{RunStatus::Running};
  double time_scale_{1.0};
  double debt_{0.0};
  double idle_{0.0};
  double heartbeat_{0.0};
  double next_snapshot_t_{0.0};
  std::uint64_t epoch_{0};
  std::deque<Pending> pending_;
  std::vector<TraceEntry> trace_;
  sim::LogRecord last_{};
  bool has_last_{false};
  bool reset_pending_{false};
  std::optional<std::string> diagnostic_;

  double cached_lambda_;
  std::uint64_t revision_{0};
  std::optional<json> contour_;

  std::optional<EqKey> eq_key_;
  json eq_value_;
};

}  // namespace orosoar::service
