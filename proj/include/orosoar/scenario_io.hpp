#pragma once

// Scenario files (JSON) and the small CSV inputs around them.
// The schema is documented in docs/scenario_schema.md.

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "orosoar/airframe.hpp"
#include "orosoar/control.hpp"
#include "orosoar/error.hpp"
#include "orosoar/glide_polar.hpp"
#include "orosoar/sim.hpp"
#include "orosoar/tgl.hpp"
#include "orosoar/wind_field.hpp"

namespace orosoar::io {

using nlohmann::json;

inline constexpr int kScenarioSchemaVersion = 1;

namespace detail {

[[noreturn]] inline void bad(const std::string& what) { throw Error(ErrorCode::InvalidScenario, what); }

inline void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) bad(where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items()) {
    if (!ok.count(k)) bad("unknown key '" + k + "' in " + where);
  }
}

inline double num(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) bad("missing '" + std::string(key) + "' in " + where);
  if (!j.at(key).is_number()) bad("'" + std::string(key) + "' in " + where + " must be a number");
  return j.at(key).get<double>();
}

inline double num_or(const json& j, const char* key, double fallback, const std::string& where) {
  return j.contains(key) ? num(j, key, where) : fallback;
}

inline std::pair<double, double> pair_of(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    bad(where + " must be a [number, number] pair");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

inline control::PidGains gains_from(const json& j, const control::PidGains& base, const std::string& where) {
  only_keys(j, where, {"kp", "ki", "kd", "integrator_limit", "output_limit", "derivative_filter_tau"});
  control::PidGains g = base;
  g.kp = num_or(j, "kp", g.kp, where);
  g.ki = num_or(j, "ki", g.ki, where);
  g.kd = num_or(j, "kd", g.kd, where);
  g.integrator_limit = num_or(j, "integrator_limit", g.integrator_limit, where);
  g.output_limit = num_or(j, "output_limit", g.output_limit, where);
  g.derivative_filter_tau = num_or(j, "derivative_filter_tau", g.derivative_filter_tau, where);
  g.validate();
  return g;
}

inline json gains_to(const control::PidGains& g) {
  return {{"kp", g.kp},
          {"ki", g.ki},
          {"kd", g.kd},
          {"integrator_limit", g.integrator_limit},
          {"output_limit", g.output_limit},
          {"derivative_filter_tau", g.derivative_filter_tau}};
}

}  // namespace detail

/// TGL from `{origin: [x, z], angle_from_vertical}` or `{A, B, C}`.
inline analysis::Tgl tgl_from_json(const json& j) {
  if (j.contains("origin")) {
    detail::only_keys(j, "tgl", {"t", "origin", "angle_from_vertical"});
    const auto [x, z] = detail::pair_of(j.at("origin"), "tgl.origin");
    return analysis::make_tgl(x, z, detail::num_or(j, "angle_from_vertical", 0.0, "tgl"));
  }
  detail::only_keys(j, "tgl", {"t", "A", "B", "C"});
  return analysis::tgl_from_coefficients(detail::num(j, "A", "tgl"), detail::num(j, "B", "tgl"),
                                         detail::num(j, "C", "tgl"));
}

inline json tgl_to_json(const analysis::Tgl& t) { return {{"A", t.A}, {"B", t.B}, {"C", t.C}}; }

inline wind::GridField load_grid_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open grid file " + path.string());
  return wind::load_grid(in);
}

/// Parses a scenario. Relative grid paths resolve against `base_dir`.
inline sim::Scenario scenario_from_json(const json& j, const std::filesystem::path& base_dir = {}) {
  using detail::bad;
  using detail::num;
  using detail::num_or;
  detail::only_keys(j, "scenario",
                    {"schema_version", "field", "scale_schedule", "airframe", "polar", "controller", "tgl_schedule",
                     "plant_mode", "cascade", "integrator", "dt", "duration", "initial_state", "seed", "analysis"});
  if (j.contains("schema_version") && j.at("schema_version") != kScenarioSchemaVersion) {
    bad("unsupported schema_version");
  }
  sim::Scenario sc;

  // field
  if (!j.contains("field")) bad("missing 'field'");
  const json& f = j.at("field");
  const std::string kind = f.value("type", "");
  if (kind == "cylinder") {
    detail::only_keys(f, "field", {"type", "freestream", "radius", "center"});
    double cx = 0.0, cz = 0.0;
    if (f.contains("center")) std::tie(cx, cz) = detail::pair_of(f.at("center"), "field.center");
    sc.field = wind::CylinderField(num(f, "freestream", "field"), num(f, "radius", "field"), cx, cz);
  } else if (kind == "grid") {
    detail::only_keys(f, "field", {"type", "path"});
    if (!f.contains("path") || !f.at("path").is_string()) bad("grid field needs a 'path' string");
    sc.grid_path = f.at("path").get<std::string>();
    std::filesystem::path p(sc.grid_path);
    if (p.is_relative()) p = base_dir / p;
    sc.field = load_grid_file(p);
  } else {
    bad("field.type must be 'cylinder' or 'grid'");
  }

  // scale schedule
  if (j.contains("scale_schedule")) {
    std::vector<wind::ScaleSchedule::Breakpoint> pts;
    for (const json& b : j.at("scale_schedule")) {
      detail::only_keys(b, "scale_schedule entry", {"t", "lambda"});
      pts.push_back({num(b, "t", "scale_schedule"), num(b, "lambda", "scale_schedule")});
    }
    sc.scale_schedule = wind::ScaleSchedule(std::move(pts));
  }

  // airframe
  if (j.contains("airframe")) {
    const json& a = j.at("airframe");
    detail::only_keys(a, "airframe",
                      {"m", "S", "rho", "g", "a0", "a1", "a2", "theta0", "v_ref", "k_v", "tau_v", "tau_theta"});
    auto& p = sc.airframe;
    p.m = num_or(a, "m", p.m, "airframe");
    p.S = num_or(a, "S", p.S, "airframe");
    p.rho = num_or(a, "rho", p.rho, "airframe");
    p.g = num_or(a, "g", p.g, "airframe");
    p.a0 = num_or(a, "a0", p.a0, "airframe");
    p.a1 = num_or(a, "a1", p.a1, "airframe");
    p.a2 = num_or(a, "a2", p.a2, "airframe");
    p.theta0 = num_or(a, "theta0", p.theta0, "airframe");
    p.v_ref = num_or(a, "v_ref", p.v_ref, "airframe");
    p.k_v = num_or(a, "k_v", p.k_v, "airframe");
    p.tau_v = num_or(a, "tau_v", p.tau_v, "airframe");
    p.tau_theta = num_or(a, "tau_theta", p.tau_theta, "airframe");
    p.validate();
  }

  // polar
  if (j.contains("polar")) {
    const json& p = j.at("polar");
    const std::string type = p.value("type", "coefficients");
    if (type == "coefficients") {
      detail::only_keys(p, "polar", {"type", "coeffs", "v_min", "v_max"});
      const json& c = p.at("coeffs");
      if (!c.is_array() || c.size() != 4) bad("polar.coeffs must hold 4 numbers");
      sc.polar = airframe::GlidePolar({c[0].get<double>(), c[1].get<double>(), c[2].get<double>(), c[3].get<double>()},
                                      num(p, "v_min", "polar"), num(p, "v_max", "polar"));
    } else if (type == "quadratic") {
      detail::only_keys(p, "polar", {"type", "s_min", "a", "v_me", "v_min", "v_max"});
      sc.polar = airframe::GlidePolar::quadratic(num(p, "s_min", "polar"), num(p, "a", "polar"),
                                                 num(p, "v_me", "polar"), num(p, "v_min", "polar"),
                                                 num(p, "v_max", "polar"));
    } else if (type == "point_mass") {
      detail::only_keys(p, "polar", {"type", "n_samples", "v_min", "v_max"});
      sc.polar = airframe::polar_from_point_mass(sc.airframe, p.value("n_samples", 64),
                                                 num_or(p, "v_min", airframe::kDeskVMin, "polar"),
                                                 num_or(p, "v_max", airframe::kDeskVMax, "polar"));
    } else {
      bad("polar.type must be 'coefficients', 'quadratic' or 'point_mass'");
    }
  }

  // controller
  if (j.contains("controller")) {
    const json& c = j.at("controller");
    detail::only_keys(c, "controller", {"theta0", "pitch_gains", "elevator_gains", "pitch_setpoint_limits"});
    auto& cfg = sc.controller;
    cfg.theta0 = num_or(c, "theta0", cfg.theta0, "controller");
    cfg.set_pitch_window(0.35);
    if (c.contains("pitch_gains")) cfg.pitch_gains = detail::gains_from(c.at("pitch_gains"), cfg.pitch_gains, "pitch_gains");
    if (c.contains("elevator_gains")) {
      cfg.elevator_gains = detail::gains_from(c.at("elevator_gains"), cfg.elevator_gains, "elevator_gains");
    }
    if (c.contains("pitch_setpoint_limits")) {
      std::tie(cfg.pitch_min, cfg.pitch_max) = detail::pair_of(c.at("pitch_setpoint_limits"), "pitch_setpoint_limits");
    }
  }

  // TGL schedule
  if (!j.contains("tgl_schedule") || !j.at("tgl_schedule").is_array() || j.at("tgl_schedule").empty()) {
    bad("tgl_schedule must be a non-empty array");
  }
  sc.tgl_schedule.clear();
  for (const json& e : j.at("tgl_schedule")) {
    sc.tgl_schedule.push_back({num_or(e, "t", 0.0, "tgl_schedule"), tgl_from_json(e)});
  }

  const std::string mode = j.value("plant_mode", "lag");
  if (mode == "lag") {
    sc.plant_mode = sim::PlantMode::Lag;
  } else if (mode == "cascade") {
    sc.plant_mode = sim::PlantMode::Cascade;
  } else {
    bad("plant_mode must be 'lag' or 'cascade'");
  }
  if (j.contains("cascade")) {
    const json& c = j.at("cascade");
    detail::only_keys(c, "cascade", {"m_de", "m_q", "scale_with_airspeed"});
    sc.cascade.m_de = num_or(c, "m_de", sc.cascade.m_de, "cascade");
    sc.cascade.m_q = num_or(c, "m_q", sc.cascade.m_q, "cascade");
    sc.cascade.scale_with_airspeed = c.value("scale_with_airspeed", false);
  }
  if (j.value("integrator", "rk4") != "rk4") bad("integrator must be 'rk4'");
  sc.dt = num_or(j, "dt", sc.dt, "scenario");
  sc.duration = num_or(j, "duration", sc.duration, "scenario");
  sc.seed = j.value("seed", std::uint64_t{0});

  if (j.contains("initial_state")) {
    const json& s = j.at("initial_state");
    detail::only_keys(s, "initial_state", {"x", "z", "v_a", "theta", "q"});
    sc.initial.x = num(s, "x", "initial_state");
    sc.initial.z = num(s, "z", "initial_state");
    sc.initial.v_a = num(s, "v_a", "initial_state");
    sc.initial.theta = num_or(s, "theta", 0.0, "initial_state");
    sc.initial.q = num_or(s, "q", 0.0, "initial_state");
  }

  if (j.contains("analysis")) {
    const json& a = j.at("analysis");
    detail::only_keys(a, "analysis", {"domain", "z_range", "cell"});
    if (a.contains("domain")) {
      const json& d = a.at("domain");
      if (!d.is_array() || d.size() != 4) bad("analysis.domain must be [x_min, x_max, z_min, z_max]");
      sc.domain = {d[0].get<double>(), d[1].get<double>(), d[2].get<double>(), d[3].get<double>()};
    }
    if (a.contains("z_range")) {
      const auto [lo, hi] = detail::pair_of(a.at("z_range"), "analysis.z_range");
      sc.z_range = {lo, hi};
    }
    sc.zeuc_cell = num_or(a, "cell", sc.zeuc_cell, "analysis");
  }

  sc.validate();
  return sc;
}

inline sim::Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open scenario file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidScenario, path.string() + ": " + e.what());
  }
  try {
    return scenario_from_json(j, path.parent_path());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidScenario, path.string() + ": " + e.what());
  }
}

inline json scenario_to_json(const sim::Scenario& sc) {
  json j;
  j["schema_version"] = kScenarioSchemaVersion;
  std::visit(
      [&](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, wind::CylinderField>) {
          j["field"] = {{"type", "cylinder"},
                        {"freestream", f.freestream()},
                        {"radius", f.radius()},
                        {"center", {f.center_x(), f.center_z()}}};
        } else {
          j["field"] = {{"type", "grid"}, {"path", sc.grid_path}};
        }
      },
      sc.field.get());
  json sched = json::array();
  for (const auto& b : sc.scale_schedule.breakpoints()) sched.push_back({{"t", b.t}, {"lambda", b.lambda}});
  j["scale_schedule"] = std::move(sched);
  const auto& a = sc.airframe;
  j["airframe"] = {{"m", a.m},         {"S", a.S},         {"rho", a.rho},     {"g", a.g},
                   {"a0", a.a0},       {"a1", a.a1},       {"a2", a.a2},       {"theta0", a.theta0},
                   {"v_ref", a.v_ref}, {"k_v", a.k_v},     {"tau_v", a.tau_v}, {"tau_theta", a.tau_theta}};
  const auto& c = sc.polar.coeffs();
  j["polar"] = {{"type", "coefficients"},
                {"coeffs", {c[0], c[1], c[2], c[3]}},
                {"v_min", sc.polar.v_min()},
                {"v_max", sc.polar.v_max()}};
  j["controller"] = {{"theta0", sc.controller.theta0},
                     {"pitch_gains", detail::gains_to(sc.controller.pitch_gains)},
                     {"elevator_gains", detail::gains_to(sc.controller.elevator_gains)},
                     {"pitch_setpoint_limits", {sc.controller.pitch_min, sc.controller.pitch_max}}};
  json tgls = json::array();
  for (const auto& e : sc.tgl_schedule) {
    json t = tgl_to_json(e.tgl);
    t["t"] = e.t;
    tgls.push_back(std::move(t));
  }
  j["tgl_schedule"] = std::move(tgls);
  j["plant_mode"] = sim::to_string(sc.plant_mode);
  j["cascade"] = {{"m_de", sc.cascade.m_de},
                  {"m_q", sc.cascade.m_q},
                  {"scale_with_airspeed", sc.cascade.scale_with_airspeed}};
  j["integrator"] = "rk4";
  j["dt"] = sc.dt;
  j["duration"] = sc.duration;
  j["initial_state"] = {{"x", sc.initial.x},
                        {"z", sc.initial.z},
                        {"v_a", sc.initial.v_a},
                        {"theta", sc.initial.theta},
                        {"q", sc.initial.q}};
  j["seed"] = sc.seed;
  j["analysis"] = {{"domain", {sc.domain.x_min, sc.domain.x_max, sc.domain.z_min, sc.domain.z_max}},
                   {"z_range", {sc.z_range.lo, sc.z_range.hi}},
                   {"cell", sc.zeuc_cell}};
  return j;
}

/// Glide-log CSV with header `v,sink`.
inline std::vector<airframe::PolarSample> load_glide_log(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  std::vector<airframe::PolarSample> out;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = wind::detail::trim(line);
    if (view.empty()) continue;
    const auto cells = wind::detail::split_csv(view);
    if (!header) {
      if (cells.size() != 2 || cells[0] != "v" || cells[1] != "sink") {
        throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": expected header v,sink");
      }
      header = true;
      continue;
    }
    airframe::PolarSample s{};
    if (cells.size() != 2 || !wind::detail::parse_double(cells[0], s.v) ||
        !wind::detail::parse_double(cells[1], s.sink)) {
      throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": expected two numbers");
    }
    out.push_back(s);
  }
  if (!header) throw Error(ErrorCode::MalformedRow, "empty glide log");
  return out;
}

}  // namespace orosoar::io
