// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "orosoar/orosoar.hpp"

using namespace orosoar;
using analysis::Domain;
using analysis::Equilibrium;
using analysis::Point;
using analysis::Tgl;
using sim::LogRecord;
using sim::PlantMode;
using sim::Scenario;

namespace {

struct Outcome {
  bool pass{true};
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + std::string("failed: ") + what;
    }
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------
// Shared rig for the closed-loop criteria.

constexpr double kSlowX = -5.1;
constexpr double kNearVmeX = -3.0;
constexpr double kFastX = -1.8;

Equilibrium predict(const Scenario& sc, const Tgl& tgl, const wind::ScaleSchedule& sched = {}) {
  return analysis::predict_equilibrium(tgl, sc.field, sched, sc.polar, sc.z_range, 0.0);
}

double band(const Scenario& sc) { return 0.02 * sc.domain.diagonal(); }

// Rig trimmed at the equilibrium of a vertical TGL through x, started
// `offset` metres up the TGL and `upstream` metres off it, with airspeed
// matched to the local wind.
Scenario rig(double x, PlantMode mode, double offset, double upstream = 0.0) {
  Scenario sc;
  sc.plant_mode = mode;
  sc.tgl_schedule = {{0.0, analysis::make_tgl(x, 0.0, 0.0)}};
  const Equilibrium eq = predict(sc, sc.tgl_schedule[0].tgl);
  sim::trim_at(sc, eq);
  sc.initial.z += offset;
  sc.initial.x -= upstream;
  sc.initial.v_a = std::clamp(sc.field.sample(sc.initial.x, sc.initial.z).wx, sc.polar.v_min(), sc.polar.v_max());
  return sc;
}

std::span<const LogRecord> window(const std::vector<LogRecord>& log, double t0, double t1) {
  auto lo = std::lower_bound(log.begin(), log.end(), t0 - 1e-9, [](const LogRecord& r, double t) { return r.t < t; });
  auto hi = std::lower_bound(log.begin(), log.end(), t1 - 1e-9, [](const LogRecord& r, double t) { return r.t < t; });
  return {lo, hi};
}

std::string csv(const std::vector<LogRecord>& log) {
  std::ostringstream os;
  sim::write_log_csv(os, log);
  return os.str();
}

// ---------------------------------------------------------------------------

Outcome potential_flow() {
  Outcome o;
  const double U = 9.0, R = 1.0;
  const wind::CylinderField f(U, R);
  double worst_vr = 0.0, worst_div = 0.0, worst_mirror = 0.0;
  for (int k = 0; k < 720; ++k) {
    const double a = 2.0 * std::numbers::pi * k / 720.0;
    const double r = R * (1.0 + 1e-8);
    const double c = std::cos(a), s = std::sin(a);
    const wind::WindVector w = f.sample(r * c, r * s);
    worst_vr = std::max(worst_vr, std::abs(w.wx * c + w.wz * s));
  }
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * std::numbers::pi), rad(1.1 * R, 20.0 * R);
  for (int k = 0; k < 20000; ++k) {
    const double a = ang(rng), r = rad(rng);
    const double x = r * std::cos(a), z = r * std::sin(a);
    const double h = 1e-4 * R;
    const double div = (f.sample(x + h, z).wx - f.sample(x - h, z).wx) / (2 * h) +
                       (f.sample(x, z + h).wz - f.sample(x, z - h).wz) / (2 * h);
    worst_div = std::max(worst_div, std::abs(div));
    const wind::WindVector w = f.sample(x, z), mx = f.sample(-x, z), mz = f.sample(x, -z);
    worst_mirror = std::max({worst_mirror, std::abs(w.wx - mx.wx), std::abs(w.wz + mx.wz), std::abs(w.wx - mz.wx),
                             std::abs(w.wz + mz.wz)});
  }
  const wind::WindVector far = f.sample(1000.0 * R, 0.0);
  const wind::WindVector far_up = f.sample(0.0, 1000.0 * R);
  o.check(worst_vr < 1e-6 * U, fmt("|V_r| at the wall %.2e", worst_vr));
  o.check(worst_div < 1e-6 * U / R, fmt("divergence %.2e", worst_div));
  o.check(std::abs(far.wx - U) < 1e-4 && std::abs(far.wz) < 1e-4 && std::abs(far_up.wx - U) < 1e-4 &&
              std::abs(far_up.wz) < 1e-4,
          "far field");
  o.check(worst_mirror < 1e-12, fmt("mirror error %.2e", worst_mirror));
  o.note(fmt("max |V_r| %.1e, max div %.1e, mirror %.1e", worst_vr, worst_div, worst_mirror));
  return o;
}

Outcome zeuc_oracle() {
  Outcome o;
  const wind::CylinderField f(9.0, 1.0);
  const airframe::GlidePolar polar = airframe::desk_polar();
  const Domain dom{-5.0, 0.0, 0.0, 5.0};
  const double cell = 0.025;
  const wind::ScaleSchedule sched;
  const analysis::ZeucContour c = analysis::extract_zeuc(f, sched, polar, dom, cell, 0.0);
  o.check(c.nx == 200 && c.nz == 200, "lattice is not 200x200");

  double worst = 0.0;
  std::size_t vertices = 0;
  for (const auto& line : c.polylines) {
    for (const Point& p : line) {
      worst = std::max(worst, std::abs(analysis::excess_updraft(f, sched, polar, p.x, p.z, 0.0)));
      ++vertices;
    }
  }

  // Brute force: sign-change cells of a 4x finer lattice, mapped to the parent cell.
  const analysis::Lattice fine = analysis::Lattice::make(dom, cell / 4.0);
  std::vector<double> e((fine.nx + 1) * (fine.nz + 1));
  auto E = [&](std::size_t i, std::size_t j) -> double& { return e[i * (fine.nz + 1) + j]; };
  for (std::size_t i = 0; i <= fine.nx; ++i) {
    for (std::size_t j = 0; j <= fine.nz; ++j) {
      try {
        E(i, j) = analysis::excess_updraft(f, sched, polar, fine.x(i), fine.z(j), 0.0);
      } catch (const Error&) {
        E(i, j) = std::numeric_limits<double>::quiet_NaN();
      }
    }
  }
  const std::set<analysis::CellIndex> unknown(c.unknown_cells.begin(), c.unknown_cells.end());
  std::set<analysis::CellIndex> brute;
  for (std::size_t i = 0; i < fine.nx; ++i) {
    for (std::size_t j = 0; j < fine.nz; ++j) {
      const double v[] = {E(i, j), E(i + 1, j), E(i + 1, j + 1), E(i, j + 1)};
      if (std::any_of(std::begin(v), std::end(v), [](double x) { return std::isnan(x); })) continue;
      const bool pos = v[0] >= 0.0;
      if (std::all_of(std::begin(v), std::end(v), [&](double x) { return (x >= 0.0) == pos; })) continue;
      const analysis::CellIndex parent{i / 4, j / 4};
      if (!unknown.count(parent)) brute.insert(parent);
    }
  }
  const std::set<analysis::CellIndex> crossed(c.crossed_cells.begin(), c.crossed_cells.end());
  std::size_t only_ms = 0, only_brute = 0;
  for (const auto& k : crossed) only_ms += brute.count(k) ? 0 : 1;
  for (const auto& k : brute) only_brute += crossed.count(k) ? 0 : 1;

  o.check(!crossed.empty(), "empty contour");
  o.check(only_ms == 0 && only_brute == 0, fmt("cell sets differ (%zu only marching, %zu only brute)", only_ms, only_brute));
  o.check(worst < 1e-3, fmt("vertex |e| %.2e", worst));
  o.note(fmt("%zu cells, %zu unknown, %zu vertices, max vertex |e| %.1e", crossed.size(), unknown.size(), vertices,
             worst));
  return o;
}

Outcome tgl_convergence() {
  Outcome o;
  for (PlantMode mode : {PlantMode::Lag, PlantMode::Cascade}) {
    for (double x : {kSlowX, kNearVmeX, kFastX}) {
      Scenario sc = rig(x, mode, 0.5, 0.3);
      const Tgl tgl = sc.tgl_schedule[0].tgl;
      const Equilibrium eq = predict(sc, tgl);
      const sim::RunResult r = sim::run(sc);
      const std::string tag = fmt("%s x=%.1f", to_string(mode), x);
      if (r.error) {
        o.check(false, tag + " terminated: " + r.error->what());
        continue;
      }
      const sim::Convergence c = sim::measure_convergence(r.log, tgl, eq.position, band(sc));
      const double offset = std::hypot(c.mean_settled.x - eq.position.x, c.mean_settled.z - eq.position.z);
      o.check(eq.stability == analysis::Stability::Stable, tag + " equilibrium not stable");
      o.check(c.settled, tag + fmt(" not settled (final offset %.3f m)", c.final_offset));
      o.check(c.settle_time < 60.0, tag + fmt(" settle time %.1f s", c.settle_time));
      o.check(c.rms_e_rho < 0.05, tag + fmt(" rms e_rho %.3g m", c.rms_e_rho));
      o.note(tag + fmt(" v=%.2f settle %.1fs offset %.1e rms %.1e", eq.local_wind.wx, c.settle_time, offset,
                       c.rms_e_rho));
    }
  }
  return o;
}

Outcome translation() {
  Outcome o;
  const std::vector<double> xs{-3.5, -3.0, -2.5, -2.0};
  const double hold = 60.0;
  for (PlantMode mode : {PlantMode::Lag, PlantMode::Cascade}) {
    Scenario sc = rig(xs[0], mode, 0.0);
    sc.duration = hold * static_cast<double>(xs.size());
    for (std::size_t k = 1; k < xs.size(); ++k) {
      sc.tgl_schedule.push_back({hold * static_cast<double>(k), analysis::make_tgl(xs[k], 0.0, 0.0)});
    }
    const sim::RunResult r = sim::run(sc);
    if (r.error) {
      o.check(false, std::string(to_string(mode)) + " terminated: " + r.error->what());
      continue;
    }
    std::vector<Point> settled;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      const Tgl& tgl = sc.tgl_schedule[k].tgl;
      const Equilibrium eq = predict(sc, tgl);
      const auto seg = window(r.log, hold * static_cast<double>(k), hold * static_cast<double>(k + 1));
      const sim::Convergence c = sim::measure_convergence(seg, tgl, eq.position, band(sc));
      const std::string tag = fmt("%s TGL %zu", to_string(mode), k);
      o.check(c.settled, tag + fmt(" not settled (final offset %.3f m)", c.final_offset));
      o.check(c.settle_time < 60.0, tag + fmt(" settle time %.1f s", c.settle_time));
      o.check(c.rms_e_rho < 0.05, tag + fmt(" rms e_rho %.3g", c.rms_e_rho));
      if (k > 0) {
        // e_rho jumps by the translation at the event step
        const double jump = seg.front().e_rho - (seg.data() - 1)->e_rho;
        o.check(std::abs(jump - 0.5) < 0.01, tag + fmt(" e_rho jump %.3f", jump));
      }
      settled.push_back(c.mean_settled);
    }
    bool monotone = true;
    for (std::size_t k = 1; k < settled.size(); ++k) monotone = monotone && settled[k].x > settled[k - 1].x;
    o.check(monotone, std::string(to_string(mode)) + " settled x not monotone");
    std::string path = std::string(to_string(mode)) + " settled x:";
    for (const Point& p : settled) path += fmt(" %.3f", p.x);
    o.note(path);
  }
  return o;
}

Outcome wind_scaling() {
  Outcome o;
  const double lam = 9.5 / 8.5;
  const double t_step = 60.0, ramp = 10.0, t_end = 180.0;

  // Closed form and finite difference of the sensitivity.
  {
    const double s_min = 1.2, a = 0.12, vme = 10.0;
    const auto polar = airframe::GlidePolar::quadratic(s_min, a, vme, 6.0, 16.0);
    double worst_closed = 0.0;
    for (double v = 6.0; v <= 16.0; v += 0.125) {
      worst_closed = std::max(worst_closed, std::abs(analysis::scaling_sensitivity(polar, v) -
                                                     (s_min - a * (v * v - vme * vme))));
    }
    o.check(worst_closed < 1e-12, fmt("closed form error %.2e", worst_closed));
    Scenario sc;
    double worst_fd = 0.0;
    for (double x : {kSlowX, kNearVmeX, kFastX}) {
      const Equilibrium eq = predict(sc, analysis::make_tgl(x, 0.0, 0.0));
      const double h = 1e-4;
      auto e_of = [&](double l) {
        return analysis::excess_updraft(sc.field, wind::ScaleSchedule::constant(l), sc.polar, eq.position.x,
                                        eq.position.z, 0.0);
      };
      const double fd = (e_of(1.0 + h) - e_of(1.0 - h)) / (2 * h);
      worst_fd = std::max(worst_fd, std::abs(fd - analysis::scaling_sensitivity(sc.polar, eq.local_wind.wx)));
    }
    o.check(worst_fd < 1e-6, fmt("finite difference error %.2e", worst_fd));
    o.note(fmt("closed form %.1e, finite difference %.1e", worst_closed, worst_fd));
  }

  struct Shift {
    double dx, dz, sensitivity;
  };
  auto shift_at = [&](double x) -> std::optional<Shift> {
    Scenario sc = rig(x, PlantMode::Lag, 0.0);
    sc.duration = t_end;
    sc.scale_schedule = wind::ScaleSchedule({{0.0, 1.0}, {t_step, 1.0}, {t_step + ramp, lam}});
    const sim::RunResult r = sim::run(sc);
    if (r.error) {
      o.check(false, fmt("x=%.1f terminated: ", x) + r.error->what());
      return std::nullopt;
    }
    const Tgl tgl = sc.tgl_schedule[0].tgl;
    const Equilibrium before = predict(sc, tgl);
    const Equilibrium after = predict(sc, tgl, wind::ScaleSchedule::constant(lam));
    const sim::Convergence c0 = sim::measure_convergence(window(r.log, 0.0, t_step), tgl, before.position, band(sc));
    const sim::Convergence c1 = sim::measure_convergence(window(r.log, t_step, t_end), tgl, after.position, band(sc));
    o.check(c0.settled && c1.settled, fmt("x=%.1f did not settle on both sides of the change", x));
    return Shift{c1.mean_settled.x - c0.mean_settled.x, c1.mean_settled.z - c0.mean_settled.z,
                 analysis::scaling_sensitivity(sc.polar, before.local_wind.wx)};
  };
  const auto slow = shift_at(kSlowX), mid = shift_at(kNearVmeX), fast = shift_at(kFastX);
  if (!slow || !mid || !fast) return o;
  const double d_slow = std::hypot(slow->dx, slow->dz), d_mid = std::hypot(mid->dx, mid->dz);
  o.check(d_mid < 0.3 * d_slow, fmt("near-V_ME shift %.3f m vs slow-side %.3f m", d_mid, d_slow));
  o.check(std::signbit(slow->dz) == std::signbit(slow->sensitivity), "slow-side vertical shift sign");
  o.check(std::signbit(fast->dz) == std::signbit(fast->sensitivity), "fast-side vertical shift sign");
  o.check(slow->sensitivity > 0.0 && fast->sensitivity < 0.0, "sensitivity signs are not +/-");
  o.note(fmt("shift slow %.3f m (dz %+.3f, de/dl %+.2f), near-V_ME %.3f m (ratio %.2f), fast dz %+.3f (de/dl %+.2f)",
             d_slow, slow->dz, slow->sensitivity, d_mid, d_mid / d_slow, fast->dz, fast->sensitivity));
  return o;
}

Outcome stability() {
  Outcome o;
  for (PlantMode mode : {PlantMode::Lag, PlantMode::Cascade}) {
    for (double d : {0.3, -0.3}) {
      Scenario sc = rig(kNearVmeX, mode, d);
      sc.duration = 60.0;
      const Equilibrium eq = predict(sc, sc.tgl_schedule[0].tgl);
      const sim::RunResult r = sim::run(sc);
      const std::string tag = fmt("%s %+.1f m", to_string(mode), d);
      if (r.error) {
        o.check(false, tag + " terminated: " + r.error->what());
        continue;
      }
      auto dist = [&](const LogRecord& rec) { return std::hypot(rec.x - eq.position.x, rec.z - eq.position.z); };
      const double d0 = dist(r.log.front()), d1 = dist(r.log.back());
      o.check(d1 < 0.05 * d0, tag + fmt(" did not decay (%.3f -> %.3f m)", d0, d1));
    }
  }

  // Synthetic field where excess updraft grows with height along a vertical TGL.
  Scenario sc;
  const double v = 10.0, k = 0.5, z0 = 10.0;
  std::vector<double> xs{-10.0, 10.0}, zs{0.0, 20.0}, wx, wz;
  for (double x : xs) {
    for (double z : zs) {
      (void)x;
      wx.push_back(v);
      wz.push_back(sc.polar.evaluate(v) + k * (z - z0));
    }
  }
  sc.field = wind::GridField(xs, zs, wx, wz);
  sc.z_range = {5.0, 15.0};
  sc.domain = {-10.0, 10.0, 0.0, 20.0};
  sc.tgl_schedule = {{0.0, analysis::make_tgl(0.0, 0.0, 0.0)}};
  const Equilibrium eq = predict(sc, sc.tgl_schedule[0].tgl);
  o.check(eq.stability == analysis::Stability::Unstable, "synthetic crossing not classified unstable");
  o.check(std::abs(k * (eq.position.z - z0)) < 1e-6, "synthetic crossing misplaced");
  sim::trim_at(sc, eq);
  sc.initial.z += 0.01;
  sc.duration = 30.0;
  const sim::RunResult r = sim::run(sc);
  const double reach = std::abs(r.log.back().z - z0);
  o.check(reach > 1.0 || r.error.has_value(), fmt("unstable crossing did not diverge (%.3f m)", reach));
  o.note(fmt("stable: +/-0.3 m decays in both modes; unstable: 0.01 m grows to %.2f m%s", reach,
             r.error ? " before leaving the field" : ""));
  return o;
}

Outcome controller() {
  Outcome o;
  control::SoaringControllerConfig cfg;
  cfg.theta0 = 0.061;
  cfg.set_pitch_window(0.35);
  control::PidState s;
  bool trim = true;
  for (int k = 0; k < 5000; ++k) {
    const auto r = control::pitch_setpoint(cfg, s, 0.0, 0.02);
    trim = trim && r.output == cfg.theta0;
    s = r.state;
  }
  o.check(trim, "zero-error history does not give theta0");

  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-20.0, 20.0), ang(-1.5, 1.5), gap(1e-4, 10.0);
  bool sign = true;
  for (int k = 0; k < 20000; ++k) {
    const Tgl tgl = analysis::make_tgl(u(rng), u(rng), ang(rng));
    const double z = u(rng);
    sign = sign && control::signed_distance(tgl, tgl.x_at(z) - gap(rng), z) > 0.0 &&
           control::signed_distance(tgl, tgl.x_at(z) + gap(rng), z) < 0.0;
  }
  o.check(sign, "e_rho not positive upstream");

  const double yaw = control::yaw_error(5.0, 5.0, 0.0);
  o.check(std::abs(yaw - std::numbers::pi / 4) < 1e-15, fmt("yaw example %.17g", yaw));

  std::uniform_real_distribution<double> e(-50.0, 50.0), gain(0.0, 10.0), lim(0.01, 3.0), dt(1e-3, 0.2);
  bool bounded = true;
  for (int trial = 0; trial < 500; ++trial) {
    const control::PidGains g{gain(rng), gain(rng), gain(rng), lim(rng), lim(rng), 0.05 * gain(rng)};
    control::PidState st;
    for (int k = 0; k < 1000; ++k) {
      const auto r = control::pid_step(g, st, e(rng), dt(rng));
      bounded = bounded && std::abs(r.state.integral) <= g.integrator_limit && std::abs(r.output) <= g.output_limit;
      st = r.state;
    }
  }
  o.check(bounded, "anti-windup bound violated");
  o.note("trim reduction, upstream sign over 20000 lines, yaw pi/4, anti-windup over 500x1000 steps");
  return o;
}

Outcome determinism() {
  Outcome o;
  for (PlantMode mode : {PlantMode::Lag, PlantMode::Cascade}) {
    Scenario sc = rig(kNearVmeX, mode, 0.5);
    sc.duration = 60.0;
    sc.tgl_schedule.push_back({30.0, analysis::make_tgl(-2.5, 0.0, 0.0)});
    const std::string ref = csv(sim::run(sc).log);
    std::vector<std::string> outs(4);
    std::vector<std::thread> pool;
    for (auto& out : outs) pool.emplace_back([&sc, &out] { out = csv(sim::run(sc).log); });
    for (auto& t : pool) t.join();
    const bool same = std::all_of(outs.begin(), outs.end(), [&](const std::string& s) { return s == ref; });
    o.check(same && csv(sim::run(sc).log) == ref, std::string(to_string(mode)) + " logs differ between runs");

    double worst = 0.0;
    for (double x : {kSlowX, kNearVmeX, kFastX}) {
      Scenario a = rig(x, mode, 0.5);
      Scenario b = a;
      b.dt = a.dt / 2.0;
      const auto ra = sim::run(a), rb = sim::run(b);
      if (ra.error || rb.error) {
        o.check(false, fmt("%s x=%.1f terminated", to_string(mode), x));
        continue;
      }
      worst = std::max(worst, std::hypot(ra.log.back().x - rb.log.back().x, ra.log.back().z - rb.log.back().z));
    }
    o.check(worst < 1e-4, fmt("%s dt-halving moved the settled point %.2e m", to_string(mode), worst));
    o.note(fmt("%s dt-halving %.1e m", to_string(mode), worst));
  }
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> fn;
    double time_limit;  // seconds of wall time, 0 for none
  };
  const std::vector<Criterion> criteria{
      {1, "potential-flow suite", potential_flow, 1.0},
      {2, "ZEUC oracle equivalence", zeuc_oracle, 10.0},
      {3, "TGL convergence", tgl_convergence, 0.0},
      {4, "single-degree control freedom", translation, 0.0},
      {5, "wind-scaling behaviour", wind_scaling, 0.0},
      {6, "stability criterion validity", stability, 0.0},
      {7, "controller unit suite", controller, 0.0},
      {8, "determinism and dt convergence", determinism, 0.0},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.fn();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.time_limit > 0.0 && secs >= c.time_limit) out.check(false, fmt("runtime %.2f s over %.0f s", secs, c.time_limit));
    failed += out.pass ? 0 : 1;
    std::printf("[%s] criterion %d (%s), %.2f s: %s\n", out.pass ? "PASS" : "FAIL", c.id, c.name, secs,
                out.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
