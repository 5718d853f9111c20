#pragma once

#include <array>
#include <cstddef>

namespace orosoar::sim {

/// Classic fourth-order Runge-Kutta step for y' = f(y) on a fixed-size state.
template <std::size_t N, typename Rhs>
std::array<double, N> rk4_step(const std::array<double, N>& y, double dt, Rhs&& f) {
  auto axpy = [](const std::array<double, N>& a, double h, const std::array<double, N>& k) {
    std::array<double, N> r{};
    for (std::size_t i = 0; i < N; ++i) r[i] = a[i] + h * k[i];
    return r;
  };
  const std::array<double, N> k1 = f(y);
  const std::array<double, N> k2 = f(axpy(y, 0.5 * dt, k1));
  const std::array<double, N> k3 = f(axpy(y, 0.5 * dt, k2));
  const std::array<double, N> k4 = f(axpy(y, dt, k3));
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

}  // namespace orosoar::sim
