// ============================================================================
// channel_model.hpp -- line-of-sight gains and the quantized IM/DD channel
//
// The communication link is Y_c = h_c X + Z_c with Z_c ~ N(0, sigma_c^2) and a
// nonnegative intensity input X. For numerical optimization the input is
// restricted to the grid {0, q, ..., x_max} and the output to a grid of step
// q^2 anchored at zero; each likelihood row is the Gaussian density sampled on
// the output grid, truncated at +/- noise_span standard deviations around its
// mean and renormalized.
// ============================================================================
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "oisac/error.hpp"
#include "oisac/params.hpp"

namespace oisac {

// ----------------------------------------------------------------------------
// Lambertian emitter and line-of-sight gains
// ----------------------------------------------------------------------------

/// Lambertian order m = -ln 2 / ln(cos half_power_angle).
inline double lambertian_order(double half_power_angle) {
  const double c = std::cos(half_power_angle);
  detail::require_domain(half_power_angle > 0.0 && half_power_angle < std::numbers::pi / 2.0 &&
                             c > 0.0 && c < 1.0,
                         "lambertian_order: half-power angle must lie in (0, pi/2)");
  return -std::numbers::ln2 / std::log(c);
}

/// Radiant intensity gain R0(phi) = (m+1)/(2 pi) cos^m(phi); zero beyond pi/2.
inline double radiant_intensity(double phi, double m) {
  detail::require_domain(m > 0.0, "radiant_intensity: order must be positive");
  if (std::abs(phi) >= std::numbers::pi / 2.0) return 0.0;
  return (m + 1.0) / (2.0 * std::numbers::pi) * std::pow(std::cos(phi), m);
}

struct OpticalGeometry {
  double half_power_angle = std::numbers::pi / 3.0;  ///< Phi_1/2 (rad)
  double emission_angle = 0.0;                       ///< phi at the transmitter (rad)
  double incidence_angle = 0.0;                      ///< psi at the receiver (rad)
  double fov = std::numbers::pi / 2.0 - 1e-9;        ///< receiver field of view (rad)
  double area = 1e-4;                                ///< detector area A (m^2)
  double concentrator_gain = 1.0;                    ///< T_s(psi)
  double optical_gain = 1.0;                         ///< g(psi)
  double distance = 1.0;                             ///< link distance (m)
};

/// Generic LoS gain (A / r^2) R0 T_s g cos(psi) 1[psi <= fov].
inline double los_gain(double area, double distance, double radiant, double concentrator,
                       double optical, double incidence_angle, double fov) {
  detail::require_domain(distance > 0.0, "los_gain: distance must be positive");
  if (incidence_angle > fov) return 0.0;
  return area / (distance * distance) * radiant * concentrator * optical *
         std::cos(incidence_angle);
}

/// Communication channel gain h_c of the transmitter / receiver pair.
inline double comm_gain(const OpticalGeometry& g) {
  const double m = lambertian_order(g.half_power_angle);
  return los_gain(g.area, g.distance, radiant_intensity(g.emission_angle, m),
                  g.concentrator_gain, g.optical_gain, g.incidence_angle, g.fov);
}

/// Per-antenna target response (rho / r^4) R0(0) T_s g cos(psi) 1[phi <= fov].
/// `rho` already folds in the round-trip optics.
inline double target_response(double rho, const OpticalGeometry& g) {
  detail::require_domain(g.distance > 0.0, "target_response: distance must be positive");
  if (g.emission_angle > g.fov) return 0.0;
  const double m = lambertian_order(g.half_power_angle);
  const double r2 = g.distance * g.distance;
  return rho / (r2 * r2) * radiant_intensity(0.0, m) * g.concentrator_gain *
         g.optical_gain * std::cos(g.incidence_angle);
}

/// Mean of each sensing antenna's observation, rho x / r^4.
inline double sensing_gain(double r_s, double x, const SystemParams& params) {
  detail::require_domain(r_s > 0.0, "sensing_gain: range must be positive");
  const double r2 = r_s * r_s;
  return params.rho * x / (r2 * r2);
}

// ----------------------------------------------------------------------------
// Quantized channel
// ----------------------------------------------------------------------------

/// Row-stochastic likelihood W(y | x) on discrete input/output grids.
/// Immutable once built; each row also records its nonzero band.
class QuantizedChannel {
public:
  QuantizedChannel(std::vector<double> x_grid, std::vector<double> y_grid,
                   std::vector<double> likelihood, std::vector<std::size_t> band_begin,
                   std::vector<std::size_t> band_end)
      : x_grid_(std::move(x_grid)),
        y_grid_(std::move(y_grid)),
        w_(std::move(likelihood)),
        band_begin_(std::move(band_begin)),
        band_end_(std::move(band_end)) {}

  [[nodiscard]] std::size_t rows() const noexcept { return x_grid_.size(); }
  [[nodiscard]] std::size_t cols() const noexcept { return y_grid_.size(); }
  [[nodiscard]] std::span<const double> x_grid() const noexcept { return x_grid_; }
  [[nodiscard]] std::span<const double> y_grid() const noexcept { return y_grid_; }

  [[nodiscard]] double operator()(std::size_t row, std::size_t col) const {
    return w_[row * cols() + col];
  }
  [[nodiscard]] std::span<const double> row(std::size_t r) const {
    return {w_.data() + r * cols(), cols()};
  }
  /// Half-open column range outside of which row `r` is exactly zero.
  [[nodiscard]] std::size_t band_begin(std::size_t r) const { return band_begin_[r]; }
  [[nodiscard]] std::size_t band_end(std::size_t r) const { return band_end_[r]; }

private:
  std::vector<double> x_grid_;
  std::vector<double> y_grid_;
  std::vector<double> w_;
  std::vector<std::size_t> band_begin_;
  std::vector<std::size_t> band_end_;
};

/// Input grid {0, q, 2q, ..., x_max}; points are computed as k*q so the last
/// one is x_max up to the divisibility check in SystemParams::validate.
inline std::vector<double> input_grid(const SystemParams& params) {
  params.validate();
  const std::size_t n = params.input_size();
  std::vector<double> xs(n);
  for (std::size_t k = 0; k < n; ++k) xs[k] = static_cast<double>(k) * params.q;
  xs.back() = params.x_max;
  return xs;
}

inline QuantizedChannel build_quantized_channel(const SystemParams& params,
                                                std::size_t max_cells = 50'000'000) {
  const std::vector<double> xs = input_grid(params);
  const double sigma = std::sqrt(params.sigma_c2);
  const double half_width = params.noise_span * sigma;
  const double dy = params.q * params.q;

  const double y_lo = -half_width;
  const double y_hi = params.h_c * params.x_max + half_width;
  const auto k_lo = static_cast<long long>(std::floor(y_lo / dy));
  const auto k_hi = static_cast<long long>(std::ceil(y_hi / dy));
  const auto n_y = static_cast<std::size_t>(k_hi - k_lo + 1);
  if (n_y == 0 || xs.size() * n_y > max_cells) {
    throw ConfigError("build_quantized_channel: grid of " + std::to_string(xs.size()) + " x " +
                      std::to_string(n_y) + " exceeds the size cap");
  }
  std::vector<double> ys(n_y);
  for (std::size_t j = 0; j < n_y; ++j) ys[j] = static_cast<double>(k_lo + static_cast<long long>(j)) * dy;

  // Slack so that points sitting exactly on the truncation edge survive rounding.
  const double edge = half_width * (1.0 + 1e-12);
  std::vector<double> w(xs.size() * n_y, 0.0);
  std::vector<std::size_t> b0(xs.size()), b1(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double mean = params.h_c * xs[i];
    double* row = w.data() + i * n_y;
    std::size_t first = n_y, last = 0;
    double total = 0.0;
    for (std::size_t j = 0; j < n_y; ++j) {
      const double d = ys[j] - mean;
      if (std::abs(d) > edge) continue;
      row[j] = std::exp(-0.5 * d * d / params.sigma_c2);
      total += row[j];
      first = std::min(first, j);
      last = j;
    }
    if (!(total > 0.0)) {
      throw NumericalError("build_quantized_channel: empty likelihood row; q^2 too coarse for sigma_c");
    }
    for (std::size_t j = first; j <= last; ++j) row[j] /= total;
    b0[i] = first;
    b1[i] = last + 1;
  }
  return {xs, std::move(ys), std::move(w), std::move(b0), std::move(b1)};
}

}  // namespace oisac
