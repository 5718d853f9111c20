#pragma once

// Excess updraft and the zero-excess-updraft contour (ZEUC).

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <utility>
#include <vector>

#include "orosoar/error.hpp"
#include "orosoar/glide_polar.hpp"
#include "orosoar/wind_field.hpp"

namespace orosoar::analysis {

/// Updraft minus the sink rate at the local horizontal wind, assuming the
/// aircraft hovers (airspeed equals wx).
template <wind::WindField F>
double excess_updraft(const F& field, const wind::ScaleSchedule& schedule, const airframe::GlidePolar& polar,
                      double x, double z, double t) {
  const wind::WindVector w = wind::sample(field, schedule, x, z, t);
  return w.wz - airframe::sink_rate(polar, w.wx);
}

struct Domain {
  double x_min;
  double x_max;
  double z_min;
  double z_max;

  double width() const noexcept { return x_max - x_min; }
  double height() const noexcept { return z_max - z_min; }
  double diagonal() const noexcept { return std::hypot(width(), height()); }
  bool contains(double x, double z) const noexcept {
    return x >= x_min && x <= x_max && z >= z_min && z <= z_max;
  }
};

struct Point {
  double x;
  double z;
  friend bool operator==(const Point&, const Point&) = default;
};

struct CellIndex {
  std::size_t i;
  std::size_t j;
  friend auto operator<=>(const CellIndex&, const CellIndex&) = default;
};

struct ZeucContour {
  std::vector<std::vector<Point>> polylines;
  double cell{0.0};  ///< requested cell size, m
  double t{0.0};
  Domain domain{};
  std::size_t nx{0};  ///< cell columns
  std::size_t nz{0};  ///< cell rows
  std::vector<CellIndex> crossed_cells;  ///< cells holding a segment, sorted
  std::vector<CellIndex> unknown_cells;  ///< cells with an unevaluable corner, sorted
};

struct ZeucOptions {
  bool polish{true};          ///< refine each vertex on the true field along its edge
  double polish_tol{1e-9};    ///< |e| target for the refinement, m/s
  int polish_max_iter{60};
};

/// Node lattice shared by extract_zeuc and any external scan of the same grid.
struct Lattice {
  Domain domain;
  std::size_t nx;
  std::size_t nz;

  static Lattice make(const Domain& d, double cell) {
    if (!(cell > 0.0) || !std::isfinite(cell)) throw Error(ErrorCode::EmptyDomain, "cell size must be positive");
    if (!(d.x_max > d.x_min) || !(d.z_max > d.z_min)) {
      throw Error(ErrorCode::EmptyDomain, "domain must have positive width and height");
    }
    auto count = [cell](double extent) {
      return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(extent / cell - 1e-9)));
    };
    return {d, count(d.width()), count(d.height())};
  }

  double x(std::size_t i) const noexcept {
    return i == nx ? domain.x_max : domain.x_min + domain.width() * static_cast<double>(i) / static_cast<double>(nx);
  }
  double z(std::size_t j) const noexcept {
    return j == nz ? domain.z_max : domain.z_min + domain.height() * static_cast<double>(j) / static_cast<double>(nz);
  }
};

namespace detail {

template <typename Fn>
double value_or_nan(Fn&& fn) {
  try {
    return fn();
  } catch (const Error&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

// Illinois regula falsi on f over [0, 1] with f(0) = fa, f(1) = fb of
// opposite sign. Returns the parameter of the root.
template <typename Fn>
double illinois(Fn&& f, double fa, double fb, double t0, double tol, int max_iter) {
  double a = 0.0;
  double b = 1.0;
  double t = t0;
  int side = 0;
  for (int it = 0; it < max_iter; ++it) {
    const double ft = f(t);
    if (!std::isfinite(ft)) return t0;
    if (std::abs(ft) < tol) return t;
    if ((ft >= 0.0) == (fa >= 0.0)) {
      a = t;
      fa = ft;
      if (side == -1) fb *= 0.5;
      side = -1;
    } else {
      b = t;
      fb = ft;
      if (side == 1) fa *= 0.5;
      side = 1;
    }
    t = (a * fb - b * fa) / (fb - fa);
    if (b - a < 1e-15) return t;
  }
  return t;
}

}  // namespace detail

/// Marching-squares contour of e = 0 over `domain`. Nodes with e >= 0 count
/// as inside. Saddle cells are resolved by the value at the bilinear saddle
/// point. Cells with an unevaluable corner (inside the body, off the grid,
/// or outside the polar range) are skipped and listed as unknown.
template <wind::WindField F>
ZeucContour extract_zeuc(const F& field, const wind::ScaleSchedule& schedule, const airframe::GlidePolar& polar,
                         const Domain& domain, double cell, double t, const ZeucOptions& options = {}) {
  const Lattice lat = Lattice::make(domain, cell);
  const std::size_t nx = lat.nx;
  const std::size_t nz = lat.nz;
  auto e_at = [&](double x, double z) {
    return detail::value_or_nan([&] { return excess_updraft(field, schedule, polar, x, z, t); });
  };

  std::vector<double> e((nx + 1) * (nz + 1));
  auto E = [&](std::size_t i, std::size_t j) -> double& { return e[i * (nz + 1) + j]; };
  for (std::size_t i = 0; i <= nx; ++i) {
    for (std::size_t j = 0; j <= nz; ++j) E(i, j) = e_at(lat.x(i), lat.z(j));
  }

  // Edge ids: horizontal edge (i,j)-(i+1,j) is 2*(i*(nz+1)+j); vertical
  // edge (i,j)-(i,j+1) is that plus one.
  auto h_edge = [&](std::size_t i, std::size_t j) { return std::uint64_t{2} * (i * (nz + 1) + j); };
  auto v_edge = [&](std::size_t i, std::size_t j) { return std::uint64_t{2} * (i * (nz + 1) + j) + 1; };

  std::map<std::uint64_t, Point> vertex;
  std::map<std::uint64_t, std::vector<std::uint64_t>> adjacency;

  auto crossing = [&](std::uint64_t id) -> Point {
    if (auto it = vertex.find(id); it != vertex.end()) return it->second;
    const std::size_t node = static_cast<std::size_t>(id / 2);
    const std::size_t i = node / (nz + 1);
    const std::size_t j = node % (nz + 1);
    const bool horizontal = id % 2 == 0;
    const std::size_t i2 = horizontal ? i + 1 : i;
    const std::size_t j2 = horizontal ? j : j + 1;
    const double ea = E(i, j);
    const double eb = E(i2, j2);
    const double xa = lat.x(i), za = lat.z(j), xb = lat.x(i2), zb = lat.z(j2);
    double s = ea == eb ? 0.5 : ea / (ea - eb);
    if (options.polish && ea != 0.0 && eb != 0.0) {
      auto f = [&](double u) { return e_at(xa + u * (xb - xa), za + u * (zb - za)); };
      s = detail::illinois(f, ea, eb, s, options.polish_tol, options.polish_max_iter);
    }
    const Point p{xa + s * (xb - xa), za + s * (zb - za)};
    vertex.emplace(id, p);
    return p;
  };
  auto link = [&](std::uint64_t a, std::uint64_t b) {
    crossing(a);
    crossing(b);
    adjacency[a].push_back(b);
    adjacency[b].push_back(a);
  };

  ZeucContour out;
  out.cell = cell;
  out.t = t;
  out.domain = domain;
  out.nx = nx;
  out.nz = nz;

  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < nz; ++j) {
      const double e0 = E(i, j), e1 = E(i + 1, j), e2 = E(i + 1, j + 1), e3 = E(i, j + 1);
      if (std::isnan(e0) || std::isnan(e1) || std::isnan(e2) || std::isnan(e3)) {
        out.unknown_cells.push_back({i, j});
        continue;
      }
      const bool p0 = e0 >= 0.0, p1 = e1 >= 0.0, p2 = e2 >= 0.0, p3 = e3 >= 0.0;
      const std::uint64_t bottom = h_edge(i, j), right = v_edge(i + 1, j), top = h_edge(i, j + 1),
                          left = v_edge(i, j);
      std::vector<std::uint64_t> cut;
      if (p0 != p1) cut.push_back(bottom);
      if (p1 != p2) cut.push_back(right);
      if (p2 != p3) cut.push_back(top);
      if (p3 != p0) cut.push_back(left);
      if (cut.empty()) continue;
      out.crossed_cells.push_back({i, j});
      if (cut.size() == 2) {
        link(cut[0], cut[1]);
        continue;
      }
      // Saddle: the diagonal pair sharing the sign of the saddle value is joined.
      const double den = e0 + e2 - e1 - e3;
      const double centre = den != 0.0 ? (e0 * e2 - e1 * e3) / den : 0.25 * (e0 + e1 + e2 + e3);
      const bool centre_pos = centre >= 0.0;
      if (p0 == centre_pos) {
        // corners 1 and 3 are cut off
        link(bottom, right);
        link(top, left);
      } else {
        link(left, bottom);
        link(right, top);
      }
    }
  }

  // Chain segments: open chains from their lowest-id end first, then loops.
  std::map<std::uint64_t, bool> used;
  auto trace = [&](std::uint64_t start) {
    std::vector<Point> line;
    std::uint64_t prev = std::numeric_limits<std::uint64_t>::max();
    std::uint64_t cur = start;
    for (;;) {
      line.push_back(vertex.at(cur));
      used[cur] = true;
      std::uint64_t next = std::numeric_limits<std::uint64_t>::max();
      for (std::uint64_t n : adjacency.at(cur)) {
        if (n != prev && !used[n]) {
          next = n;
          break;
        }
      }
      if (next == std::numeric_limits<std::uint64_t>::max()) {
        // close a loop back to the start
        for (std::uint64_t n : adjacency.at(cur)) {
          if (n == start && line.size() > 2) line.push_back(vertex.at(start));
        }
        break;
      }
      prev = cur;
      cur = next;
    }
    out.polylines.push_back(std::move(line));
  };
  for (const auto& [id, nbrs] : adjacency) {
    if (nbrs.size() == 1 && !used[id]) trace(id);
  }
  for (const auto& [id, nbrs] : adjacency) {
    if (!used[id]) trace(id);
  }
  return out;
}

/// `{polylines: [[[x,z],...]], cell, t}`
inline nlohmann::json to_json(const ZeucContour& c) {
  nlohmann::json lines = nlohmann::json::array();
  for (const auto& pl : c.polylines) {
    nlohmann::json jl = nlohmann::json::array();
    for (const auto& p : pl) jl.push_back({p.x, p.z});
    lines.push_back(std::move(jl));
  }
  return {{"polylines", std::move(lines)}, {"cell", c.cell}, {"t", c.t}};
}

/// `polyline_id,x,z` rows.
inline void write_csv(std::ostream& os, const ZeucContour& c) {
  os << "polyline_id,x,z\n";
  const auto old = os.precision(17);
  for (std::size_t k = 0; k < c.polylines.size(); ++k) {
    for (const auto& p : c.polylines[k]) os << k << ',' << p.x << ',' << p.z << '\n';
  }
  os.precision(old);
}

}  // namespace orosoar::analysis
