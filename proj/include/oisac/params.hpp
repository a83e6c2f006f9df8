// ============================================================================
// params.hpp -- physical and prior constants of the optical ISAC link
//
// Defaults reproduce the reference setup: unit channel gain, unit noise
// variances, perfect reflectivity, exponential range prior with rate 0.5 /m,
// 64 sensing antennas, 10 W mean optical power and a 0.25-step input grid
// that ends at 30 W. Noise is truncated at +/- 5 standard deviations.
// ============================================================================
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>

#include "oisac/error.hpp"

namespace oisac {

struct SystemParams {
  double h_c = 1.0;           ///< communication channel gain
  double sigma_c2 = 1.0;      ///< communication noise variance (W)
  double sigma_s2 = 1.0;      ///< per-antenna sensing noise variance (W)
  double rho = 1.0;           ///< reflectivity coefficient
  double lambda = 0.5;        ///< exponential range-prior rate (1/m)
  std::uint32_t n_s = 64;     ///< sensing antenna count
  double power_budget = 10.0; ///< mean optical power P (W)
  double q = 0.25;            ///< input quantization step
  double x_max = 30.0;        ///< last input mass point
  double noise_span = 5.0;    ///< noise truncation in standard deviations

  /// Number of points in {0, q, ..., x_max}.
  [[nodiscard]] std::size_t input_size() const {
    return static_cast<std::size_t>(std::llround(x_max / q)) + 1;
  }

  void validate() const {
    using detail::require;
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    require(std::isfinite(h_c) && h_c > 0.0, "h_c must be positive");
    require(positive(sigma_c2), "sigma_c2 must be positive");
    require(positive(sigma_s2), "sigma_s2 must be positive");
    require(positive(rho), "rho must be positive");
    require(positive(lambda), "lambda must be positive");
    require(n_s >= 1, "n_s must be at least 1");
    require(positive(power_budget), "power_budget must be positive");
    require(positive(q), "q must be positive");
    require(positive(x_max), "x_max must be positive");
    require(positive(noise_span), "noise_span must be positive");
    const double steps = x_max / q;
    require(std::abs(steps - std::round(steps)) <= 1e-9 * std::max(1.0, steps),
            "q must divide x_max exactly");
  }
};

}  // namespace oisac
