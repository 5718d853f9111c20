#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "orosoar/error.hpp"

namespace orosoar::airframe {

/// Cubic sink-rate polynomial s(v) = c0 + c1 v + c2 v^2 + c3 v^3 (m/s,
/// positive down) over horizontal airspeed v in [v_min, v_max].
///
/// Construction enforces the shape every soaring computation relies on:
/// s > 0 on the whole range and exactly one interior local minimum, the
/// maximum-endurance speed V_ME.
class GlidePolar {
 public:
  GlidePolar(std::array<double, 4> coeffs, double v_min, double v_max)
      : coeffs_(coeffs), v_min_(v_min), v_max_(v_max) {
    for (double c : coeffs_) {
      if (!std::isfinite(c)) throw Error(ErrorCode::InvalidField, "non-finite polar coefficient");
    }
    if (!std::isfinite(v_min) || !std::isfinite(v_max) || !(v_min < v_max)) {
      throw Error(ErrorCode::OutOfPolarRange, "polar range must satisfy v_min < v_max");
    }
    const auto crit = critical_points();
    std::optional<double> minimum;
    int minima = 0;
    for (double v : crit) {
      if (curvature(v) > 0.0) {
        minimum = v;
        ++minima;
      }
    }
    if (minima != 1) {
      throw Error(ErrorCode::NoInteriorMinimum, "sink curve has no interior minimum on [" + std::to_string(v_min) +
                                                    ", " + std::to_string(v_max) + "]");
    }
    v_me_ = *minimum;
    double lowest = std::min(evaluate(v_min_), evaluate(v_max_));
    for (double v : crit) lowest = std::min(lowest, evaluate(v));
    if (!(lowest > 0.0)) {
      throw Error(ErrorCode::NonPositiveSink, "sink rate must be positive over the polar range");
    }
  }

  /// s(v) = s_min + a (v - v_me)^2, the textbook U-shaped polar.
  static GlidePolar quadratic(double s_min, double a, double v_me, double v_min, double v_max) {
    return GlidePolar({s_min + a * v_me * v_me, -2.0 * a * v_me, a, 0.0}, v_min, v_max);
  }

  const std::array<double, 4>& coeffs() const noexcept { return coeffs_; }
  double v_min() const noexcept { return v_min_; }
  double v_max() const noexcept { return v_max_; }
  double v_me() const noexcept { return v_me_; }
  bool contains(double v) const noexcept { return v >= v_min_ && v <= v_max_; }

  /// Unchecked polynomial evaluation (Horner).
  double evaluate(double v) const noexcept {
    return ((coeffs_[3] * v + coeffs_[2]) * v + coeffs_[1]) * v + coeffs_[0];
  }
  double slope(double v) const noexcept { return (3.0 * coeffs_[3] * v + 2.0 * coeffs_[2]) * v + coeffs_[1]; }
  double curvature(double v) const noexcept { return 6.0 * coeffs_[3] * v + 2.0 * coeffs_[2]; }

 private:
  // Roots of s'(v) strictly inside the range.
  std::vector<double> critical_points() const {
    const double a = 3.0 * coeffs_[3];
    const double b = 2.0 * coeffs_[2];
    const double c = coeffs_[1];
    std::vector<double> roots;
    if (a == 0.0) {
      if (b != 0.0) roots.push_back(-c / b);
    } else {
      const double disc = b * b - 4.0 * a * c;
      if (disc >= 0.0) {
        const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
        if (q != 0.0) {
          roots.push_back(q / a);
          roots.push_back(c / q);
        } else {
          roots.push_back(0.0);
        }
      }
    }
    std::vector<double> inside;
    for (double r : roots) {
      if (r > v_min_ && r < v_max_) inside.push_back(r);
    }
    return inside;
  }

  std::array<double, 4> coeffs_;
  double v_min_;
  double v_max_;
  double v_me_{0.0};
};

/// Checked sink rate: throws OutOfPolarRange outside [v_min, v_max].
inline double sink_rate(const GlidePolar& polar, double v) {
  if (!polar.contains(v)) throw PolarRangeError(v, polar.v_min(), polar.v_max());
  return polar.evaluate(v);
}

/// Maximum-endurance speed: the interior minimiser of s(v).
inline double v_me(const GlidePolar& polar) { return polar.v_me(); }

struct PolarSample {
  double v;     ///< horizontal airspeed, m/s
  double sink;  ///< sink rate, m/s, positive down
};

struct PolarFit {
  GlidePolar polar;
  double residual_rms;  ///< m/s
};

namespace detail {

// Weighted least-squares cubic in the centred, scaled variable
// t = (v - mid) / half, converted back to raw power-basis coefficients.
inline std::array<double, 4> weighted_cubic(std::span<const PolarSample> samples, std::span<const double> weights) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& s : samples) {
    lo = std::min(lo, s.v);
    hi = std::max(hi, s.v);
  }
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);

  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd design(n, 4);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = weights.empty() ? 1.0 : weights[static_cast<std::size_t>(i)];
    const double t = (samples[static_cast<std::size_t>(i)].v - mid) / half;
    double p = 1.0;
    for (int k = 0; k < 4; ++k) {
      design(i, k) = w * p;
      p *= t;
    }
    rhs(i) = w * samples[static_cast<std::size_t>(i)].sink;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-12);
  if (qr.rank() < 4) throw Error(ErrorCode::SingularFit, "rank-deficient cubic design matrix");
  const Eigen::Vector4d b = qr.solve(rhs);

  // p(v) = sum_k b_k ((v - mid)/half)^k, expanded binomially.
  constexpr double binom[4][4] = {{1, 0, 0, 0}, {1, 1, 0, 0}, {1, 2, 1, 0}, {1, 3, 3, 1}};
  std::array<double, 4> c{0.0, 0.0, 0.0, 0.0};
  for (int k = 0; k < 4; ++k) {
    const double scale = b(k) / std::pow(half, k);
    for (int j = 0; j <= k; ++j) {
      c[static_cast<std::size_t>(j)] += scale * binom[k][j] * std::pow(-mid, k - j);
    }
  }
  return c;
}

inline void check_samples(std::span<const PolarSample> samples) {
  if (samples.size() < 4) {
    throw Error(ErrorCode::InsufficientSamples, "need at least 4 samples, got " + std::to_string(samples.size()));
  }
  std::vector<double> v;
  for (const auto& s : samples) {
    if (!std::isfinite(s.v) || !std::isfinite(s.sink)) {
      throw Error(ErrorCode::InsufficientSamples, "non-finite polar sample");
    }
    v.push_back(s.v);
  }
  std::sort(v.begin(), v.end());
  const auto distinct = std::unique(v.begin(), v.end()) - v.begin();
  if (distinct < 4) {
    throw Error(ErrorCode::InsufficientSamples, "need at least 4 distinct airspeeds, got " + std::to_string(distinct));
  }
}

inline double residual_rms(const GlidePolar& polar, std::span<const PolarSample> samples) {
  double acc = 0.0;
  for (const auto& s : samples) {
    const double r = polar.evaluate(s.v) - s.sink;
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(samples.size()));
}

}  // namespace detail

/// Least-squares cubic through gliding-flight data (v, sink).
inline PolarFit fit_polar(std::span<const PolarSample> samples, double v_min, double v_max) {
  detail::check_samples(samples);
  GlidePolar polar(detail::weighted_cubic(samples, {}), v_min, v_max);
  const double rms = detail::residual_rms(polar, samples);
  return {std::move(polar), rms};
}

}  // namespace orosoar::airframe
