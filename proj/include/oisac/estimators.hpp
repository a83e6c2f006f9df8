// ============================================================================
// estimators.hpp -- range estimators for the monostatic sensing receiver
//
// Observation model: n_s antennas each see y_j = rho x / r^4 + N(0, sigma_s^2)
// with an exponential prior r ~ Exp(lambda). The sample mean y_bar is a
// sufficient statistic for r, so every estimator here depends on the samples
// only through y_bar.
//
//   MLE : r = (rho x / y_bar)^(1/4), defined for y_bar > 0.
//   MAP : unique nonnegative root of
//           (lambda sigma_s^2 / n_s) r^9 + 4 rho x y_bar r^4 - 4 rho^2 x^2 = 0.
//   MP  : posterior mean, by trapezoid quadrature on a range grid.
//
// Fisher information and the Bayesian Cramer-Rao bound live here too.
// ============================================================================
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oisac/error.hpp"
#include "oisac/params.hpp"
#include "oisac/summation.hpp"

namespace oisac {

enum class EstimatorKind { map, mle, mp, bcrb };

inline std::string_view to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::map: return "map";
    case EstimatorKind::mle: return "mle";
    case EstimatorKind::mp: return "mp";
    case EstimatorKind::bcrb: return "bcrb";
  }
  return "unknown";
}

inline EstimatorKind parse_estimator(std::string_view s) {
  if (s == "map") return EstimatorKind::map;
  if (s == "mle") return EstimatorKind::mle;
  if (s == "mp") return EstimatorKind::mp;
  if (s == "bcrb") return EstimatorKind::bcrb;
  throw ConfigError("unknown estimator '" + std::string(s) + "'");
}

// ----------------------------------------------------------------------------
// Observation and estimate types
// ----------------------------------------------------------------------------

class SensingObservation {
public:
  /// From the raw per-antenna samples; n_s is the sample count.
  static SensingObservation from_samples(double x, std::vector<double> y) {
    detail::require(!y.empty(), "SensingObservation: need at least one sample");
    const double mean = compensated_sum(y) / static_cast<double>(y.size());
    const auto n = static_cast<std::uint32_t>(y.size());
    return SensingObservation(x, std::move(y), mean, n);
  }

  /// From the sufficient statistic alone (Monte Carlo path).
  static SensingObservation from_mean(double x, double y_bar, std::uint32_t n_s) {
    detail::require(n_s >= 1, "SensingObservation: n_s must be at least 1");
    return SensingObservation(x, {}, y_bar, n_s);
  }

  [[nodiscard]] double x() const noexcept { return x_; }
  [[nodiscard]] double y_bar() const noexcept { return y_bar_; }
  [[nodiscard]] std::uint32_t n_s() const noexcept { return n_s_; }
  /// Empty when built from the mean only.
  [[nodiscard]] std::span<const double> samples() const noexcept { return y_; }

private:
  SensingObservation(double x, std::vector<double> y, double y_bar, std::uint32_t n_s)
      : x_(x), y_(std::move(y)), y_bar_(y_bar), n_s_(n_s) {}

  double x_;
  std::vector<double> y_;
  double y_bar_;
  std::uint32_t n_s_;
};

struct RangeEstimate {
  double value = 0.0;
  EstimatorKind kind = EstimatorKind::mle;
  bool valid = false;
  double residual = 0.0;   ///< |polynomial| at the MAP root; 0 otherwise
  int iterations = 0;
};

enum class QuadratureScheme { uniform, log };

struct QuadratureConfig {
  double r_min = 1e-3;
  double r_max = 0.0;  ///< 0 selects the (1 - 1e-8) quantile of the prior
  std::size_t n_nodes = 2048;
  QuadratureScheme scheme = QuadratureScheme::log;

  /// Bounds with r_max resolved against the prior rate.
  [[nodiscard]] QuadratureConfig resolved(double lambda) const {
    QuadratureConfig out = *this;
    if (out.r_max <= 0.0) out.r_max = -std::log(1e-8) / lambda;
    out.validate();
    return out;
  }

  void validate() const {
    detail::require(r_min > 0.0 && r_max > r_min, "QuadratureConfig: need 0 < r_min < r_max");
    detail::require(n_nodes >= 16, "QuadratureConfig: n_nodes must be at least 16");
  }
};

/// Node positions for a resolved quadrature configuration.
inline std::vector<double> quadrature_nodes(const QuadratureConfig& cfg) {
  cfg.validate();
  std::vector<double> r(cfg.n_nodes);
  const double n1 = static_cast<double>(cfg.n_nodes - 1);
  if (cfg.scheme == QuadratureScheme::uniform) {
    for (std::size_t k = 0; k < cfg.n_nodes; ++k)
      r[k] = cfg.r_min + (cfg.r_max - cfg.r_min) * static_cast<double>(k) / n1;
  } else {
    const double a = std::log(cfg.r_min);
    const double b = std::log(cfg.r_max);
    for (std::size_t k = 0; k < cfg.n_nodes; ++k)
      r[k] = std::exp(a + (b - a) * static_cast<double>(k) / n1);
  }
  r.front() = cfg.r_min;
  r.back() = cfg.r_max;
  return r;
}

/// Trapezoid rule for samples f on nodes r.
inline double trapezoid(std::span<const double> r, std::span<const double> f) {
  CompensatedSum s;
  for (std::size_t k = 1; k < r.size(); ++k) s.add(0.5 * (r[k] - r[k - 1]) * (f[k] + f[k - 1]));
  return s.value();
}

// ----------------------------------------------------------------------------
// MLE
// ----------------------------------------------------------------------------

/// Maximum-likelihood range. `valid` is false when rho x / y_bar is not
/// positive; the caller decides the fallback.
inline RangeEstimate mle_range(const SensingObservation& obs, const SystemParams& params) {
  detail::require_domain(obs.x() > 0.0, "mle_range: x = 0 leaves the range unidentifiable");
  RangeEstimate est;
  est.kind = EstimatorKind::mle;
  if (!(obs.y_bar() > 0.0)) return est;
  est.value = std::sqrt(std::sqrt(params.rho * obs.x() / obs.y_bar()));
  est.valid = std::isfinite(est.value);
  return est;
}

// ----------------------------------------------------------------------------
// MAP
// ----------------------------------------------------------------------------

/// Coefficients of a r^9 + b r^4 - c.
struct MapPolynomial {
  long double a = 0.0L;
  long double b = 0.0L;
  long double c = 0.0L;

  static MapPolynomial from(const SensingObservation& obs, const SystemParams& params) {
    const long double x = obs.x();
    const long double rho = params.rho;
    return {static_cast<long double>(params.lambda) * params.sigma_s2 / obs.n_s(),
            4.0L * rho * x * obs.y_bar(), 4.0L * rho * rho * x * x};
  }

  [[nodiscard]] long double operator()(long double r) const noexcept {
    const long double r2 = r * r;
    const long double r4 = r2 * r2;
    return r4 * (a * r4 * r + b) - c;
  }
  [[nodiscard]] long double derivative(long double r) const noexcept {
    const long double r3 = r * r * r;
    return r3 * (9.0L * a * r3 * r * r + 4.0L * b);
  }
};

struct MapSolverOptions {
  double tol = 1e-10;
  int max_iter = 200;
};

/// MAP range by safeguarded Newton-Raphson. The polynomial is negative at 0
/// and has exactly one positive root, so the bracket [lo, hi] with
/// p(lo) < 0 < p(hi) always contains it.
inline RangeEstimate map_range(const SensingObservation& obs, const SystemParams& params,
                               MapSolverOptions opts = {}) {
  detail::require_domain(obs.x() >= 0.0, "map_range: x must be nonnegative");
  detail::require_domain(params.lambda >= 0.0, "map_range: lambda must be nonnegative");
  RangeEstimate est;
  est.kind = EstimatorKind::map;
  const MapPolynomial p = MapPolynomial::from(obs, params);

  if (p.c == 0.0L) {  // x = 0: only the prior mode remains
    est.valid = true;
    return est;
  }
  if (p.a == 0.0L && p.b <= 0.0L) {
    throw ConvergenceError("map_range: no nonnegative root without a prior and y_bar <= 0");
  }

  double start = (obs.y_bar() > 0.0)
                     ? mle_range(obs, params).value
                     : static_cast<double>(std::pow(p.c / p.a, 1.0L / 9.0L));
  if (!(start > 0.0) || !std::isfinite(start)) start = 1.0;

  long double lo = 0.0L;
  long double hi = 2.0L * start;
  for (int k = 0; p(hi) <= 0.0L; ++k) {
    if (k > 2000) throw ConvergenceError("map_range: failed to bracket the root");
    lo = hi;
    hi *= 2.0L;
  }

  long double r = std::clamp<long double>(start, lo, hi);
  if (r <= lo || r >= hi) r = 0.5L * (lo + hi);
  long double fr = p(r);
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    if (std::fabs(fr) <= opts.tol) break;
    if (fr < 0.0L) lo = r; else hi = r;
    long double next = r - fr / p.derivative(r);
    if (!(next > lo && next < hi)) next = 0.5L * (lo + hi);
    if (next == r) break;
    r = next;
    fr = p(r);
  }

  // Round to double, then pick the neighbour with the smallest residual.
  double best = static_cast<double>(r);
  long double best_res = std::fabs(p(best));
  for (double cand : {std::nextafter(best, 0.0), std::nextafter(best, 1e300)}) {
    const long double res = std::fabs(p(cand));
    if (res < best_res) {
      best = cand;
      best_res = res;
    }
  }
  est.value = best;
  est.residual = static_cast<double>(best_res);
  est.iterations = it;
  if (!(best_res <= opts.tol)) {
    throw ConvergenceError("map_range: residual " + std::to_string(est.residual) +
                           " above tolerance after " + std::to_string(it) + " iterations");
  }
  est.valid = true;
  return est;
}

// ----------------------------------------------------------------------------
// Posterior and posterior mean
// ----------------------------------------------------------------------------

/// Unnormalized log posterior on a single node, constants dropped.
inline double log_posterior_kernel(double r, double x, double y_bar, std::uint32_t n_s,
                                   const SystemParams& params) {
  const double r2 = r * r;
  const double d = y_bar - params.rho * x / (r2 * r2);
  return -params.lambda * r - 0.5 * static_cast<double>(n_s) * d * d / params.sigma_s2;
}

/// Posterior density of r on `r_grid`, normalized so that its trapezoid
/// integral is one.
inline std::vector<double> posterior_density(std::span<const double> r_grid,
                                             const SensingObservation& obs,
                                             const SystemParams& params) {
  detail::require(r_grid.size() >= 2, "posterior_density: need at least two nodes");
  for (std::size_t k = 0; k < r_grid.size(); ++k) {
    detail::require(r_grid[k] > 0.0 && (k == 0 || r_grid[k] > r_grid[k - 1]),
                    "posterior_density: grid must be positive and strictly increasing");
  }
  std::vector<double> out(r_grid.size());
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < r_grid.size(); ++k) {
    out[k] = std::log(params.lambda) +
             log_posterior_kernel(r_grid[k], obs.x(), obs.y_bar(), obs.n_s(), params);
    peak = std::max(peak, out[k]);
  }
  if (!(peak >= std::log(std::numeric_limits<double>::min()))) {
    throw NumericalError("posterior_density: posterior underflows on the whole grid; widen it");
  }
  for (double& v : out) v = std::exp(v - peak);
  const double z = trapezoid(r_grid, out);
  if (!(z > 0.0) || !std::isfinite(z)) {
    throw NumericalError("posterior_density: degenerate normalizer");
  }
  for (double& v : out) v /= z;
  return out;
}

/// Posterior-mean estimator bound to one quadrature grid. Reusable across
/// observations; not thread-safe (holds a scratch buffer).
class PosteriorMean {
public:
  PosteriorMean(const SystemParams& params, const QuadratureConfig& quad)
      : params_(params), nodes_(quadrature_nodes(quad.resolved(params.lambda))) {
    inv_r4_.resize(nodes_.size());
    weight_.resize(nodes_.size());
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
      const double r2 = nodes_[k] * nodes_[k];
      inv_r4_[k] = 1.0 / (r2 * r2);
      // Trapezoid weight of node k.
      const double left = (k > 0) ? nodes_[k] - nodes_[k - 1] : 0.0;
      const double right = (k + 1 < nodes_.size()) ? nodes_[k + 1] - nodes_[k] : 0.0;
      weight_[k] = 0.5 * (left + right);
    }
    scratch_.resize(nodes_.size());
  }

  [[nodiscard]] std::span<const double> nodes() const noexcept { return nodes_; }

  RangeEstimate operator()(const SensingObservation& obs) {
    const double scale = 0.5 * static_cast<double>(obs.n_s()) / params_.sigma_s2;
    const double gain = params_.rho * obs.x();
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
      const double d = obs.y_bar() - gain * inv_r4_[k];
      scratch_[k] = -params_.lambda * nodes_[k] - scale * d * d;
      peak = std::max(peak, scratch_[k]);
    }
    if (!std::isfinite(peak)) throw NumericalError("posterior mean: non-finite posterior");
    CompensatedSum num, den;
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
      const double w = weight_[k] * std::exp(scratch_[k] - peak);
      num.add(w * nodes_[k]);
      den.add(w);
    }
    RangeEstimate est;
    est.kind = EstimatorKind::mp;
    est.value = num.value() / den.value();
    est.valid = std::isfinite(est.value);
    if (!est.valid) throw NumericalError("posterior mean: degenerate normalizer");
    return est;
  }

private:
  SystemParams params_;
  std::vector<double> nodes_;
  std::vector<double> inv_r4_;
  std::vector<double> weight_;
  std::vector<double> scratch_;
};

inline RangeEstimate mp_range(const SensingObservation& obs, const SystemParams& params,
                              const QuadratureConfig& quad = {}) {
  PosteriorMean mp(params, quad);
  return mp(obs);
}

// ----------------------------------------------------------------------------
// Fisher information and BCRB
// ----------------------------------------------------------------------------

/// Bayesian information 16 n_s rho^2 x^2 r^-8 / sigma_s^2 + lambda.
inline double fisher_information(double x, double r_s, const SystemParams& params) {
  detail::require_domain(r_s > 0.0, "fisher_information: range must be positive");
  detail::require_domain(x >= 0.0, "fisher_information: x must be nonnegative");
  const double r4 = (r_s * r_s) * (r_s * r_s);
  const double g = params.rho * x / r4;
  return 16.0 * static_cast<double>(params.n_s) * g * g / params.sigma_s2 + params.lambda;
}

inline double bcrb(double x, double r_s, const SystemParams& params) {
  return 1.0 / fisher_information(x, r_s, params);
}

}  // namespace oisac
