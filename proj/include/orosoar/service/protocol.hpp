#pragma once

// Wire format of the live-simulation service. Every message in either
// direction is a JSON object {type, seq, payload}. The full schema is in
// docs/protocol.md.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "orosoar/control.hpp"
#include "orosoar/error.hpp"
#include "orosoar/scenario_io.hpp"
#include "orosoar/tgl.hpp"

namespace orosoar::service {

using nlohmann::json;

inline constexpr int kProtocolVersion = 1;

enum class CommandKind {
  SetTgl,
  TranslateTgl,
  RotateTgl,
  SetWindScale,
  Pause,
  Resume,
  Reset,
  SetGains,
  SetTimeScale,
};

inline constexpr std::string_view to_string(CommandKind k) noexcept {
  switch (k) {
    case CommandKind::SetTgl: return "set_tgl";
    case CommandKind::TranslateTgl: return "translate_tgl";
    case CommandKind::RotateTgl: return "rotate_tgl";
    case CommandKind::SetWindScale: return "set_wind_scale";
    case CommandKind::Pause: return "pause";
    case CommandKind::Resume: return "resume";
    case CommandKind::Reset: return "reset";
    case CommandKind::SetGains: return "set_gains";
    case CommandKind::SetTimeScale: return "set_time_scale";
  }
  return "unknown";
}

inline std::optional<CommandKind> command_kind(std::string_view s) {
  for (CommandKind k : {CommandKind::SetTgl, CommandKind::TranslateTgl, CommandKind::RotateTgl,
                        CommandKind::SetWindScale, CommandKind::Pause, CommandKind::Resume, CommandKind::Reset,
                        CommandKind::SetGains, CommandKind::SetTimeScale}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

/// A decoded operator command. Only the fields of its kind are meaningful.
struct Command {
  CommandKind kind{CommandKind::Pause};
  std::int64_t seq{0};
  json payload = json::object();  ///< as received, kept for the trace

  analysis::Tgl tgl{};          // set_tgl
  double dx{0.0}, dz{0.0};      // translate_tgl
  double pivot_x{0.0}, pivot_z{0.0}, dangle{0.0};  // rotate_tgl
  double lambda{1.0};           // set_wind_scale
  double time_scale{1.0};       // set_time_scale
  std::optional<json> pitch_gains, elevator_gains;  // set_gains, merged at apply time
};

namespace detail {

[[noreturn]] inline void malformed(const std::string& what) { throw Error(ErrorCode::MalformedCommand, what); }

inline double number(const json& p, const char* key) {
  if (!p.contains(key) || !p.at(key).is_number()) malformed(std::string("payload needs a numeric '") + key + "'");
  const double v = p.at(key).get<double>();
  if (!std::isfinite(v)) malformed(std::string("'") + key + "' must be finite");
  return v;
}

inline void keys(const json& p, std::initializer_list<const char*> allowed) {
  try {
    io::detail::only_keys(p, "payload", allowed);
  } catch (const Error& e) {
    malformed(e.what());
  }
}

}  // namespace detail

/// Decodes a client message. Shape errors throw MalformedCommand; a TGL that
/// violates its own invariants throws the TGL's error (e.g. NearHorizontal).
inline Command parse_command(const json& msg) {
  using detail::malformed;
  using detail::number;
  if (!msg.is_object()) malformed("message must be a JSON object");
  for (const auto& [k, v] : msg.items()) {
    if (k != "type" && k != "seq" && k != "payload") malformed("unknown envelope key '" + k + "'");
  }
  if (!msg.contains("type") || !msg.at("type").is_string()) malformed("envelope needs a string 'type'");
  if (!msg.contains("seq") || !msg.at("seq").is_number_integer()) malformed("envelope needs an integer 'seq'");
  const auto kind = command_kind(msg.at("type").get<std::string>());
  if (!kind) malformed("unknown command '" + msg.at("type").get<std::string>() + "'");

  Command c;
  c.kind = *kind;
  c.seq = msg.at("seq").get<std::int64_t>();
  c.payload = msg.value("payload", json::object());
  const json& p = c.payload;
  if (!p.is_object()) malformed("payload must be an object");

  switch (c.kind) {
    case CommandKind::SetTgl:
      try {
        c.tgl = io::tgl_from_json(p);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::InvalidScenario) malformed(e.what());
        throw;
      }
      break;
    case CommandKind::TranslateTgl:
      detail::keys(p, {"dx", "dz"});
      c.dx = p.contains("dx") ? number(p, "dx") : 0.0;
      c.dz = p.contains("dz") ? number(p, "dz") : 0.0;
      break;
    case CommandKind::RotateTgl: {
      detail::keys(p, {"pivot", "dangle"});
      c.dangle = number(p, "dangle");
      if (!p.contains("pivot")) malformed("rotate_tgl needs 'pivot'");
      try {
        std::tie(c.pivot_x, c.pivot_z) = io::detail::pair_of(p.at("pivot"), "pivot");
      } catch (const Error& e) {
        malformed(e.what());
      }
      break;
    }
    case CommandKind::SetWindScale:
      detail::keys(p, {"lambda"});
      c.lambda = number(p, "lambda");
      if (!(c.lambda > 0.0)) malformed("lambda must be positive");
      break;
    case CommandKind::SetTimeScale:
      detail::keys(p, {"scale"});
      c.time_scale = number(p, "scale");
      if (!(c.time_scale > 0.0 && c.time_scale <= 1000.0)) malformed("scale must be in (0, 1000]");
      break;
    case CommandKind::SetGains:
      detail::keys(p, {"pitch", "elevator"});
      if (p.contains("pitch")) c.pitch_gains = p.at("pitch");
      if (p.contains("elevator")) c.elevator_gains = p.at("elevator");
      if (!c.pitch_gains && !c.elevator_gains) malformed("set_gains needs 'pitch' or 'elevator'");
      break;
    case CommandKind::Pause:
    case CommandKind::Resume:
    case CommandKind::Reset:
      detail::keys(p, {});
      break;
  }
  return c;
}

inline json envelope(std::string_view type, std::int64_t seq, json payload) {
  return {{"type", type}, {"seq", seq}, {"payload", std::move(payload)}};
}

/// Acknowledgement: `seq` echoes the command, `t` is the step boundary at
/// which it took effect.
inline json ack(const Command& c, double t, std::uint64_t step) {
  return envelope("ack", c.seq, {{"command", to_string(c.kind)}, {"t", t}, {"step", step}});
}

inline json rejection(std::int64_t seq, std::string_view command, const Error& e) {
  return envelope("reject", seq,
                  {{"command", command}, {"code", orosoar::to_string(e.code())}, {"message", e.what()}});
}

}  // namespace orosoar::service
