// orosoar: batch runs, contour and equilibrium exports, polar fits, and the
// live server. Exit codes: 0 ok (run: settled), 2 run did not settle, 1 error.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "orosoar/orosoar.hpp"
#include "orosoar/service/server.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace orosoar;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNotSettled = 2;

struct Overrides {
  std::optional<double> dt;
  std::optional<double> duration;
  std::optional<double> scale;
};

sim::Scenario load(const std::string& path, const Overrides& o) {
  sim::Scenario sc = io::load_scenario(path);
  if (o.dt) sc.dt = *o.dt;
  if (o.duration) sc.duration = *o.duration;
  if (o.scale) sc.scale_schedule = wind::ScaleSchedule::constant(*o.scale);
  sc.validate();
  spdlog::debug("loaded {} (dt {}, duration {}, plant {})", path, sc.dt, sc.duration, sim::to_string(sc.plant_mode));
  return sc;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  return out;
}

void write_json(const std::optional<fs::path>& path, const json& j) {
  if (!path) {
    std::cout << j.dump(2) << '\n';
    return;
  }
  auto out = open_out(*path);
  out << j.dump(2) << '\n';
}

json point_json(analysis::Point p) { return {{"x", p.x}, {"z", p.z}}; }

json equilibrium_json(const analysis::Equilibrium& eq) {
  return {{"position", point_json(eq.position)},
          {"local_wind", {{"wx", eq.local_wind.wx}, {"wz", eq.local_wind.wz}}},
          {"stability", analysis::to_string(eq.stability)},
          {"tgl_zeuc_angle_deg", eq.tgl_zeuc_angle},
          {"crossings", eq.crossings}};
}

// ---------------------------------------------------------------------------

int cmd_run(const std::string& scenario_path, const fs::path& out_path, std::optional<fs::path> summary_path,
            const Overrides& o) {
  const sim::Scenario sc = load(scenario_path, o);
  const sim::RunResult r = sim::run(sc);
  {
    auto out = open_out(out_path);
    sim::write_log_csv(out, r.log);
  }
  spdlog::info("{} records written to {}", r.log.size(), out_path.string());

  // Convergence is judged after the last scheduled change.
  double t_from = sc.tgl_schedule.back().t;
  t_from = std::max(t_from, sc.scale_schedule.breakpoints().back().t);
  const double t_end = sc.duration;
  const analysis::Tgl& tgl = sc.tgl_schedule.back().tgl;
  const double lambda_end = sc.scale_schedule(t_end);

  json summary{{"scenario", scenario_path},
               {"records", r.log.size()},
               {"measured_from_t", t_from},
               {"settle_band", 0.02 * sc.domain.diagonal()},
               {"tgl", io::tgl_to_json(tgl)},
               {"lambda", lambda_end}};
  if (r.error) summary["error"] = r.error->what();

  bool settled = false;
  std::optional<analysis::Equilibrium> eq;
  try {
    eq = analysis::predict_equilibrium(tgl, sc.field, wind::ScaleSchedule::constant(lambda_end), sc.polar,
                                       sc.z_range, 0.0);
    summary["predicted"] = equilibrium_json(*eq);
  } catch (const Error& e) {
    summary["predicted"] = nullptr;
    summary["prediction_error"] = e.what();
  }

  auto first = std::lower_bound(r.log.begin(), r.log.end(), t_from - 1e-9,
                                [](const sim::LogRecord& rec, double t) { return rec.t < t; });
  const std::span<const sim::LogRecord> tail(first, r.log.end());
  if (eq && !tail.empty() && !r.error) {
    const auto c = sim::measure_convergence(tail, tgl, eq->position, 0.02 * sc.domain.diagonal());
    settled = c.settled;
    summary["settled"] = c.settled;
    summary["settle_time"] = std::isfinite(c.settle_time) ? json(c.settle_time) : json(nullptr);
    summary["final_offset"] = c.final_offset;
    summary["rms_e_rho"] = c.rms_e_rho;
    summary["mean_settled"] = point_json(c.mean_settled);
    summary["predicted_vs_settled"] =
        std::hypot(c.mean_settled.x - eq->position.x, c.mean_settled.z - eq->position.z);
  } else {
    summary["settled"] = false;
  }

  if (!summary_path) summary_path = fs::path(out_path).replace_extension(".summary.json");
  write_json(summary_path, summary);
  if (r.error) {
    spdlog::error("run terminated: {}", r.error->what());
    return kExitError;
  }
  if (!settled) spdlog::warn("run did not settle within the band");
  return settled ? kExitOk : kExitNotSettled;
}

int cmd_zeuc(const std::string& scenario_path, std::optional<double> cell, double t,
             const std::optional<fs::path>& out_path, const Overrides& o) {
  const sim::Scenario sc = load(scenario_path, o);
  const auto c = analysis::extract_zeuc(sc.field, sc.scale_schedule, sc.polar, sc.domain, cell.value_or(sc.zeuc_cell), t);
  spdlog::info("{} polylines, {} crossed cells, {} unknown cells", c.polylines.size(), c.crossed_cells.size(),
               c.unknown_cells.size());
  if (out_path && out_path->extension() == ".csv") {
    auto out = open_out(*out_path);
    analysis::write_csv(out, c);
    return kExitOk;
  }
  write_json(out_path, analysis::to_json(c));
  return kExitOk;
}

int cmd_equilibrium(const std::string& scenario_path, double t, const std::optional<fs::path>& out_path,
                    const Overrides& o) {
  const sim::Scenario sc = load(scenario_path, o);
  const analysis::Tgl* tgl = &sc.tgl_schedule.front().tgl;
  for (const auto& ev : sc.tgl_schedule) {
    if (ev.t <= t) tgl = &ev.tgl;
  }
  const auto eq = analysis::predict_equilibrium(*tgl, sc.field, sc.scale_schedule, sc.polar, sc.z_range, t);
  json j = equilibrium_json(eq);
  j["t"] = t;
  j["tgl"] = io::tgl_to_json(*tgl);
  j["lambda"] = sc.scale_schedule(t);
  if (sc.polar.contains(eq.local_wind.wx)) {
    j["scaling_sensitivity"] = analysis::scaling_sensitivity(sc.polar, eq.local_wind.wx);
  }
  write_json(out_path, j);
  return kExitOk;
}

int cmd_fit_polar(const fs::path& input, std::optional<double> v_min, std::optional<double> v_max,
                  const std::optional<fs::path>& out_path) {
  std::ifstream in(input);
  if (!in) throw Error(ErrorCode::IoError, "cannot open glide log " + input.string());
  const auto samples = io::load_glide_log(in);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& s : samples) {
    lo = std::min(lo, s.v);
    hi = std::max(hi, s.v);
  }
  const auto fit = airframe::fit_polar(samples, v_min.value_or(lo), v_max.value_or(hi));
  const auto& c = fit.polar.coeffs();
  // The "polar" object can be pasted into a scenario as is.
  write_json(out_path, {{"polar",
                         {{"type", "coefficients"},
                          {"coeffs", {c[0], c[1], c[2], c[3]}},
                          {"v_min", fit.polar.v_min()},
                          {"v_max", fit.polar.v_max()}}},
                        {"v_me", fit.polar.v_me()},
                        {"residual_rms", fit.residual_rms},
                        {"samples", samples.size()}});
  return kExitOk;
}

service::Server* g_server = nullptr;

extern "C" void on_signal(int) {
  if (g_server) g_server->context().stop();
}

int cmd_serve(const std::string& scenario_path, const std::string& address, unsigned short port,
              const std::optional<fs::path>& static_root, int threads, std::optional<double> time_scale,
              const Overrides& o) {
  const sim::Scenario sc = load(scenario_path, o);
  service::ServerOptions opts;
  opts.address = address;
  opts.port = port;
  opts.static_root = static_root;
  opts.threads = threads;
  service::Server server(sc, opts);
  server.start();
  if (time_scale) {
    server.with_host([&](service::SimHost& h) {
      h.submit(0, service::parse_command({{"type", "set_time_scale"}, {"seq", 0}, {"payload", {{"scale", *time_scale}}}}));
      return 0;
    });
  }
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  spdlog::info("serving on http://{}:{} (ws at /ws)", address, server.port());
  server.wait();
  g_server = nullptr;
  return kExitOk;
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("orosoar");
  logger->set_pattern("%^%l%$: %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("OROSOAR_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to off; only accept a real match.
    if (level != spdlog::level::off || std::string(env) == "off") {
      spdlog::set_level(level);
    } else {
      spdlog::warn("ignoring OROSOAR_LOG={} (use trace, debug, info, warn, error, critical or off)", env);
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Orographic soaring analysis and simulation"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Print help for every subcommand");

  std::string scenario;
  Overrides o;
  double t = 0.0;
  std::optional<double> cell;
  std::optional<std::string> out, summary, static_root;
  std::optional<double> v_min, v_max, time_scale;
  std::string input;
  std::string address = "127.0.0.1";
  unsigned short port = 8080;
  int threads = 2;

  auto add_overrides = [&](CLI::App* sub) {
    sub->add_option("--dt", o.dt, "Override the step size, s")->check(CLI::PositiveNumber);
    sub->add_option("--duration", o.duration, "Override the duration, s")->check(CLI::PositiveNumber);
    sub->add_option("--scale", o.scale, "Hold the wind scale at this constant lambda")->check(CLI::PositiveNumber);
  };

  auto* run = app.add_subcommand("run", "Simulate a scenario and write the log CSV plus a summary JSON");
  run->add_option("--scenario", scenario, "Scenario JSON")->required();
  run->add_option("--out", out, "Log CSV path")->required();
  run->add_option("--summary", summary, "Summary JSON path (default: <out>.summary.json)");
  add_overrides(run);

  auto* zeuc = app.add_subcommand("zeuc", "Extract the zero-excess-updraft contour");
  zeuc->add_option("--scenario", scenario, "Scenario JSON")->required();
  zeuc->add_option("--cell", cell, "Cell size, m (default: scenario analysis.cell)")->check(CLI::PositiveNumber);
  zeuc->add_option("--t", t, "Time at which the wind scale is taken, s");
  zeuc->add_option("--out", out, "Output path; .csv writes polyline rows, anything else JSON (default: stdout)");
  add_overrides(zeuc);

  auto* equilibrium = app.add_subcommand("equilibrium", "Predict where the active TGL meets the contour");
  equilibrium->add_option("--scenario", scenario, "Scenario JSON")->required();
  equilibrium->add_option("--t", t, "Time selecting the TGL and wind scale, s");
  equilibrium->add_option("--out", out, "Output JSON (default: stdout)");
  add_overrides(equilibrium);

  auto* fit = app.add_subcommand("fit-polar", "Fit a cubic glide polar to a v,sink CSV");
  fit->add_option("--input", input, "Glide log CSV with header v,sink")->required();
  fit->add_option("--v-min", v_min, "Lower end of the polar range (default: slowest sample)");
  fit->add_option("--v-max", v_max, "Upper end of the polar range (default: fastest sample)");
  fit->add_option("--out", out, "Output JSON (default: stdout)");

  auto* serve = app.add_subcommand("serve", "Run the live simulation server");
  serve->add_option("--scenario", scenario, "Scenario JSON")->required();
  serve->add_option("--address", address, "Listen address");
  serve->add_option("--port", port, "Listen port");
  serve->add_option("--static", static_root, "Directory served for non-API paths (the UI bundle)");
  serve->add_option("--threads", threads, "Network threads")->check(CLI::Range(1, 64));
  serve->add_option("--time-scale", time_scale, "Initial simulated seconds per wall second")
      ->check(CLI::PositiveNumber);
  add_overrides(serve);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help is reported through the same path with a zero exit code.
    return app.exit(e) == 0 ? kExitOk : kExitError;
  }

  auto opt_path = [](const std::optional<std::string>& s) -> std::optional<fs::path> {
    return s ? std::optional<fs::path>(*s) : std::nullopt;
  };
  try {
    if (*run) return cmd_run(scenario, *out, opt_path(summary), o);
    if (*zeuc) return cmd_zeuc(scenario, cell, t, opt_path(out), o);
    if (*equilibrium) return cmd_equilibrium(scenario, t, opt_path(out), o);
    if (*fit) return cmd_fit_polar(input, v_min, v_max, opt_path(out));
    if (*serve) return cmd_serve(scenario, address, port, opt_path(static_root), threads, time_scale, o);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitError;
  }
  return kExitError;
}
