#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace orosoar {

/// Failure categories shared by every module. The enumerator name is what
/// the CLI prints and what the live service sends back in rejections.
enum class ErrorCode {
  // windfield
  InsideBody,
  OutOfBounds,
  MalformedRow,
  IncompleteLattice,
  NonMonotoneCoordinates,
  InvalidField,
  // airframe
  NonPositiveAirspeed,
  NoInteriorMinimum,
  NonPositiveSink,
  OutOfPolarRange,
  InsufficientSamples,
  SingularFit,
  // analysis
  EmptyDomain,
  NearHorizontal,
  NoIntersection,
  PointOffTgl,
  PointNotNearContour,
  // control
  NonPositiveDt,
  NonPositiveR,
  InvalidGains,
  // sim
  PolarRangeExceeded,
  EmptyLog,
  InvalidScenario,
  // io / service
  IoError,
  MalformedCommand,
  PortInUse,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InsideBody: return "InsideBody";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::IncompleteLattice: return "IncompleteLattice";
    case ErrorCode::NonMonotoneCoordinates: return "NonMonotoneCoordinates";
    case ErrorCode::InvalidField: return "InvalidField";
    case ErrorCode::NonPositiveAirspeed: return "NonPositiveAirspeed";
    case ErrorCode::NoInteriorMinimum: return "NoInteriorMinimum";
    case ErrorCode::NonPositiveSink: return "NonPositiveSink";
    case ErrorCode::OutOfPolarRange: return "OutOfPolarRange";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::SingularFit: return "SingularFit";
    case ErrorCode::EmptyDomain: return "EmptyDomain";
    case ErrorCode::NearHorizontal: return "NearHorizontal";
    case ErrorCode::NoIntersection: return "NoIntersection";
    case ErrorCode::PointOffTgl: return "PointOffTgl";
    case ErrorCode::PointNotNearContour: return "PointNotNearContour";
    case ErrorCode::NonPositiveDt: return "NonPositiveDt";
    case ErrorCode::NonPositiveR: return "NonPositiveR";
    case ErrorCode::InvalidGains: return "InvalidGains";
    case ErrorCode::PolarRangeExceeded: return "PolarRangeExceeded";
    case ErrorCode::EmptyLog: return "EmptyLog";
    case ErrorCode::InvalidScenario: return "InvalidScenario";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::MalformedCommand: return "MalformedCommand";
    case ErrorCode::PortInUse: return "PortInUse";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// OutOfPolarRange carries the airspeed that fell outside the polar.
class PolarRangeError : public Error {
 public:
  PolarRangeError(double speed, double v_min, double v_max)
      : Error(ErrorCode::OutOfPolarRange,
              "airspeed " + std::to_string(speed) + " m/s outside [" + std::to_string(v_min) + ", " +
                  std::to_string(v_max) + "]"),
        speed_(speed) {}

  double speed() const noexcept { return speed_; }

 private:
  double speed_;
};

/// OutOfBounds carries the query point that left the sampled domain.
class OutOfBoundsError : public Error {
 public:
  OutOfBoundsError(double x, double z)
      : Error(ErrorCode::OutOfBounds,
              "(" + std::to_string(x) + ", " + std::to_string(z) + ") outside grid bounds"),
        x_(x),
        z_(z) {}

  double x() const noexcept { return x_; }
  double z() const noexcept { return z_; }

 private:
  double x_;
  double z_;
};

}  // namespace orosoar
