#pragma once

// Orographic wind fields in the vertical (x, z) plane.
//
// Frame: x positive downstream (freestream direction), z positive up.
// All field types are immutable after construction and safe to sample from
// any number of threads.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <istream>
#include <iterator>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "orosoar/error.hpp"

namespace orosoar::wind {

struct WindVector {
  double wx{0.0};  ///< horizontal, m/s, positive downstream
  double wz{0.0};  ///< vertical, m/s, positive up

  friend bool operator==(const WindVector&, const WindVector&) = default;
};

inline WindVector operator*(double s, WindVector w) { return {s * w.wx, s * w.wz}; }

/// Anything that maps a position to a wind vector.
template <typename F>
concept WindField = requires(const F& f, double x, double z) {
  { f.sample(x, z) } -> std::same_as<WindVector>;
};

/// Uniform stream past a circular cylinder (uniform flow plus a doublet).
/// The upper windward quadrant models the updraft in front of a rounded hill.
class CylinderField {
 public:
  CylinderField(double freestream, double radius, double center_x = 0.0, double center_z = 0.0)
      : freestream_(freestream), radius_(radius), cx_(center_x), cz_(center_z) {
    if (!(freestream > 0.0) || !(radius > 0.0) || !std::isfinite(center_x) || !std::isfinite(center_z)) {
      throw Error(ErrorCode::InvalidField, "cylinder needs U > 0 and R > 0");
    }
  }

  double freestream() const noexcept { return freestream_; }
  double radius() const noexcept { return radius_; }
  double center_x() const noexcept { return cx_; }
  double center_z() const noexcept { return cz_; }

  /// Radial/tangential potential-flow velocities rotated into the (x, z) frame:
  ///   V_r = U (1 - R^2/r^2) cos(theta),  V_theta = -U (1 + R^2/r^2) sin(theta).
  WindVector sample(double x, double z) const {
    const double dx = x - cx_;
    const double dz = z - cz_;
    const double r2 = dx * dx + dz * dz;
    const double R2 = radius_ * radius_;
    if (!(r2 > R2)) {
      throw Error(ErrorCode::InsideBody,
                  "(" + std::to_string(x) + ", " + std::to_string(z) + ") is not outside the cylinder");
    }
    const double r = std::sqrt(r2);
    const double c = dx / r;
    const double s = dz / r;
    const double k = R2 / r2;
    const double v_r = freestream_ * (1.0 - k) * c;
    const double v_t = -freestream_ * (1.0 + k) * s;
    return {v_r * c - v_t * s, v_r * s + v_t * c};
  }

 private:
  double freestream_;
  double radius_;
  double cx_;
  double cz_;
};

/// Rectilinear lattice of wind samples with bilinear interpolation.
/// Queries outside the bounding box are errors, never clamped.
class GridField {
 public:
  /// Samples are indexed [ix * nz + iz].
  GridField(std::vector<double> x_coords, std::vector<double> z_coords, std::vector<double> wx_samples,
            std::vector<double> wz_samples)
      : xs_(std::move(x_coords)), zs_(std::move(z_coords)), wx_(std::move(wx_samples)), wz_(std::move(wz_samples)) {
    if (xs_.size() < 2 || zs_.size() < 2) {
      throw Error(ErrorCode::InvalidField, "grid needs at least two coordinates per axis");
    }
    auto strictly_increasing = [](const std::vector<double>& v) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) return false;
        if (i > 0 && !(v[i] > v[i - 1])) return false;
      }
      return true;
    };
    if (!strictly_increasing(xs_) || !strictly_increasing(zs_)) {
      throw Error(ErrorCode::NonMonotoneCoordinates, "grid coordinates must be strictly increasing");
    }
    const std::size_t n = xs_.size() * zs_.size();
    if (wx_.size() != n || wz_.size() != n) {
      throw Error(ErrorCode::InvalidField, "sample arrays must have |x| * |z| entries");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(wx_[i]) || !std::isfinite(wz_[i])) {
        throw Error(ErrorCode::InvalidField, "non-finite wind sample");
      }
    }
  }

  const std::vector<double>& x_coords() const noexcept { return xs_; }
  const std::vector<double>& z_coords() const noexcept { return zs_; }
  const std::vector<double>& wx_samples() const noexcept { return wx_; }
  const std::vector<double>& wz_samples() const noexcept { return wz_; }

  WindVector node(std::size_t ix, std::size_t iz) const {
    const std::size_t k = ix * zs_.size() + iz;
    return {wx_[k], wz_[k]};
  }

  WindVector sample(double x, double z) const {
    if (!(x >= xs_.front() && x <= xs_.back() && z >= zs_.front() && z <= zs_.back())) {
      throw OutOfBoundsError(x, z);
    }
    const std::size_t i = cell_index(xs_, x);
    const std::size_t j = cell_index(zs_, z);
    const double tx = (x - xs_[i]) / (xs_[i + 1] - xs_[i]);
    const double tz = (z - zs_[j]) / (zs_[j + 1] - zs_[j]);
    const WindVector a = node(i, j);
    const WindVector b = node(i + 1, j);
    const WindVector c = node(i, j + 1);
    const WindVector d = node(i + 1, j + 1);
    auto lerp2 = [&](double va, double vb, double vc, double vd) {
      return (1.0 - tz) * ((1.0 - tx) * va + tx * vb) + tz * ((1.0 - tx) * vc + tx * vd);
    };
    return {lerp2(a.wx, b.wx, c.wx, d.wx), lerp2(a.wz, b.wz, c.wz, d.wz)};
  }

 private:
  static std::size_t cell_index(const std::vector<double>& c, double v) {
    auto it = std::upper_bound(c.begin(), c.end(), v);
    std::size_t i = static_cast<std::size_t>(std::distance(c.begin(), it));
    i = i == 0 ? 0 : i - 1;
    return std::min(i, c.size() - 2);
  }

  std::vector<double> xs_;
  std::vector<double> zs_;
  std::vector<double> wx_;
  std::vector<double> wz_;
};

/// Runtime-selected field, as read from a scenario file.
class AnyField {
 public:
  AnyField(CylinderField f) : impl_(std::move(f)) {}
  AnyField(GridField f) : impl_(std::move(f)) {}

  WindVector sample(double x, double z) const {
    return std::visit([&](const auto& f) { return f.sample(x, z); }, impl_);
  }

  const std::variant<CylinderField, GridField>& get() const noexcept { return impl_; }

 private:
  std::variant<CylinderField, GridField> impl_;
};

/// Piecewise-linear wind-scale factor over time, clamped at both ends.
class ScaleSchedule {
 public:
  struct Breakpoint {
    double t;
    double lambda;
  };

  ScaleSchedule() : points_{{0.0, 1.0}} {}

  explicit ScaleSchedule(std::vector<Breakpoint> points) : points_(std::move(points)) {
    if (points_.empty()) {
      throw Error(ErrorCode::InvalidField, "scale schedule needs at least one breakpoint");
    }
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (!std::isfinite(points_[i].t) || !(points_[i].lambda > 0.0) || !std::isfinite(points_[i].lambda)) {
        throw Error(ErrorCode::InvalidField, "scale factors must be finite and positive");
      }
      if (i > 0 && !(points_[i].t > points_[i - 1].t)) {
        throw Error(ErrorCode::NonMonotoneCoordinates, "schedule times must be strictly increasing");
      }
    }
  }

  static ScaleSchedule constant(double lambda) { return ScaleSchedule({{0.0, lambda}}); }

  const std::vector<Breakpoint>& breakpoints() const noexcept { return points_; }

  double operator()(double t) const {
    if (t <= points_.front().t) return points_.front().lambda;
    if (t >= points_.back().t) return points_.back().lambda;
    auto it = std::upper_bound(points_.begin(), points_.end(), t,
                               [](double v, const Breakpoint& b) { return v < b.t; });
    const Breakpoint& hi = *it;
    const Breakpoint& lo = *(it - 1);
    const double u = (t - lo.t) / (hi.t - lo.t);
    return lo.lambda + u * (hi.lambda - lo.lambda);
  }

 private:
  std::vector<Breakpoint> points_;
};

/// Time-modulated field: lambda(t) times the base vector, both components.
template <WindField F>
WindVector sample(const F& field, const ScaleSchedule& schedule, double x, double z, double t) {
  return schedule(t) * field.sample(x, z);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

/// Sorted values merged when consecutive entries are within `tol`.
inline std::vector<double> merge_coordinates(std::vector<double> v, double tol) {
  std::sort(v.begin(), v.end());
  std::vector<double> out;
  for (double x : v) {
    if (out.empty() || x - out.back() > tol) out.push_back(x);
  }
  return out;
}

inline std::size_t locate(const std::vector<double>& coords, double v, double tol) {
  auto it = std::lower_bound(coords.begin(), coords.end(), v - tol);
  return static_cast<std::size_t>(std::distance(coords.begin(), it));
}

}  // namespace detail

/// Coordinates closer than this are the same lattice line.
inline constexpr double kLatticeTolerance = 1e-9;

/// Reads a `x,z,wx,wz` CSV (any row order) into a GridField.
inline GridField load_grid(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  struct Row {
    double x, z, wx, wz;
    std::size_t line;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = detail::trim(line);
    if (view.empty()) continue;
    const auto cells = detail::split_csv(view);
    if (!have_header) {
      if (cells.size() != 4 || cells[0] != "x" || cells[1] != "z" || cells[2] != "wx" || cells[3] != "wz") {
        throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": expected header x,z,wx,wz");
      }
      have_header = true;
      continue;
    }
    if (cells.size() != 4) {
      throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": expected 4 columns");
    }
    Row r{};
    double* dst[4] = {&r.x, &r.z, &r.wx, &r.wz};
    for (std::size_t k = 0; k < 4; ++k) {
      if (!detail::parse_double(cells[k], *dst[k])) {
        throw Error(ErrorCode::MalformedRow,
                    "line " + std::to_string(line_no) + ": non-numeric value '" + std::string(cells[k]) + "'");
      }
    }
    r.line = line_no;
    rows.push_back(r);
  }
  if (!have_header) throw Error(ErrorCode::MalformedRow, "empty grid file");

  std::vector<double> xv, zv;
  xv.reserve(rows.size());
  zv.reserve(rows.size());
  for (const Row& r : rows) {
    xv.push_back(r.x);
    zv.push_back(r.z);
  }
  const auto xs = detail::merge_coordinates(std::move(xv), kLatticeTolerance);
  const auto zs = detail::merge_coordinates(std::move(zv), kLatticeTolerance);
  if (xs.size() < 2 || zs.size() < 2) {
    throw Error(ErrorCode::IncompleteLattice, "grid needs at least a 2x2 lattice");
  }
  const std::size_t n = xs.size() * zs.size();
  std::vector<double> wx(n, 0.0), wz(n, 0.0);
  std::vector<bool> seen(n, false);
  for (const Row& r : rows) {
    const std::size_t i = detail::locate(xs, r.x, kLatticeTolerance);
    const std::size_t j = detail::locate(zs, r.z, kLatticeTolerance);
    const std::size_t k = i * zs.size() + j;
    if (seen[k]) {
      throw Error(ErrorCode::MalformedRow, "line " + std::to_string(r.line) + ": duplicate lattice point");
    }
    seen[k] = true;
    wx[k] = r.wx;
    wz[k] = r.wz;
  }
  if (rows.size() != n) {
    for (std::size_t k = 0; k < n; ++k) {
      if (!seen[k]) {
        throw Error(ErrorCode::IncompleteLattice, "missing lattice point (" + std::to_string(xs[k / zs.size()]) +
                                                      ", " + std::to_string(zs[k % zs.size()]) + ")");
      }
    }
  }
  return GridField(xs, zs, std::move(wx), std::move(wz));
}

}  // namespace orosoar::wind
