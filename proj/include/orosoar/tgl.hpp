#pragma once

#include <cmath>
#include <string>

#include "orosoar/error.hpp"

namespace orosoar::analysis {

/// Target gradient line A x + B z + C = 0 with A^2 + B^2 = 1 and A > 0, so
/// the unit normal (A, B) points downstream.
struct Tgl {
  enum class Provenance { PointAngle, Coefficients };

  double A{1.0};
  double B{0.0};
  double C{0.0};
  Provenance provenance{Provenance::Coefficients};

  /// Line residual A x + B z + C (signed distance, positive downstream).
  double residual(double x, double z) const noexcept { return A * x + B * z + C; }

  /// x on the line at altitude z.
  double x_at(double z) const noexcept { return -(B * z + C) / A; }

  /// Lean of the line from vertical, rad; positive tilts the top downstream.
  double angle_from_vertical() const noexcept { return std::atan2(-B, A); }

  friend bool operator==(const Tgl& a, const Tgl& b) noexcept { return a.A == b.A && a.B == b.B && a.C == b.C; }
};

inline constexpr double kMinNormalX = 1e-6;

/// Normalises raw coefficients. Throws NearHorizontal when the line is
/// (nearly) horizontal.
inline Tgl tgl_from_coefficients(double A, double B, double C,
                                 Tgl::Provenance provenance = Tgl::Provenance::Coefficients) {
  if (!std::isfinite(A) || !std::isfinite(B) || !std::isfinite(C)) {
    throw Error(ErrorCode::NearHorizontal, "non-finite line coefficients");
  }
  const double n = std::hypot(A, B);
  if (!(n > 0.0)) throw Error(ErrorCode::NearHorizontal, "degenerate line (A = B = 0)");
  A /= n;
  B /= n;
  C /= n;
  if (std::abs(A) < kMinNormalX) {
    throw Error(ErrorCode::NearHorizontal, "|A| = " + std::to_string(std::abs(A)) + " below 1e-6");
  }
  if (A < 0.0) {
    A = -A;
    B = -B;
    C = -C;
  }
  return {A, B, C, provenance};
}

/// Line through `origin` leaning `angle_from_vertical` rad from vertical.
inline Tgl make_tgl(double origin_x, double origin_z, double angle_from_vertical) {
  const double A = std::cos(angle_from_vertical);
  const double B = -std::sin(angle_from_vertical);
  return tgl_from_coefficients(A, B, -(A * origin_x + B * origin_z), Tgl::Provenance::PointAngle);
}

inline Tgl translate_tgl(const Tgl& tgl, double dx, double dz) {
  return tgl_from_coefficients(tgl.A, tgl.B, tgl.C - (tgl.A * dx + tgl.B * dz), tgl.provenance);
}

/// Rigid rotation about a pivot; positive `dangle` increases the lean.
inline Tgl rotate_tgl(const Tgl& tgl, double pivot_x, double pivot_z, double dangle) {
  const double c = std::cos(dangle);
  const double s = std::sin(dangle);
  const double A = tgl.A * c + tgl.B * s;
  const double B = tgl.B * c - tgl.A * s;
  const double C = tgl.residual(pivot_x, pivot_z) - (A * pivot_x + B * pivot_z);
  return tgl_from_coefficients(A, B, C, tgl.provenance);
}

}  // namespace orosoar::analysis
