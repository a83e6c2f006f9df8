// ============================================================================
// sensing_cost.hpp -- per-symbol sensing cost c(x)
//
// c(x) is the expected squared range error when intensity x is transmitted.
// For the MAP, MLE and posterior-mean estimators it is estimated by nested
// Monte Carlo: n_r prior draws r ~ Exp(lambda), each with n_y observation
// draws. For the BCRB it is the prior average of 1 / J(x, r), computed by
// quadrature.
//
// Random variates are keyed by (seed, grid index, i, j) so results are
// bit-identical for any thread count. Per-draw partial results are reduced in
// index order with compensated summation.
// ============================================================================
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oisac/channel_model.hpp"
#include "oisac/error.hpp"
#include "oisac/estimators.hpp"
#include "oisac/parallel.hpp"
#include "oisac/params.hpp"
#include "oisac/random.hpp"
#include "oisac/summation.hpp"

namespace oisac {

struct MonteCarloConfig {
  std::uint32_t n_r = 2000;
  std::uint32_t n_y = 2000;
  std::uint64_t seed = 20240501;
  double clamp_eps = 1e-9;  ///< MLE uses max(y_bar, clamp_eps)

  void validate() const {
    detail::require(n_r >= 1, "MonteCarloConfig: n_r must be at least 1");
    detail::require(n_y >= 1, "MonteCarloConfig: n_y must be at least 1");
    detail::require(clamp_eps > 0.0, "MonteCarloConfig: clamp_eps must be positive");
  }
};

struct CostSample {
  double x = 0.0;
  double mse = 0.0;
  double variance = 0.0;
  double bias_sq = 0.0;
  double mse_stderr = 0.0;   ///< standard error of mse across prior draws
  EstimatorKind kind = EstimatorKind::mle;
  std::uint32_t n_r = 0;
  std::uint32_t n_y = 0;
  std::uint64_t seed = 0;
  std::uint64_t clamped = 0;  ///< MLE draws with y_bar <= clamp_eps
};

struct CostVector {
  std::vector<double> x_grid;
  std::vector<CostSample> samples;
  EstimatorKind kind = EstimatorKind::bcrb;
  MonteCarloConfig mc;  ///< unused for the BCRB

  [[nodiscard]] std::size_t size() const noexcept { return x_grid.size(); }
  [[nodiscard]] std::vector<double> values() const {
    std::vector<double> v(samples.size());
    for (std::size_t k = 0; k < samples.size(); ++k) v[k] = samples[k].mse;
    return v;
  }
};

// ----------------------------------------------------------------------------
// Averaged BCRB
// ----------------------------------------------------------------------------

/// E_r[BCRB(x | r)] under Exp(lambda). The integrand is interpolated linearly
/// between quadrature nodes and each segment is integrated exactly against the
/// exponential weight. Mass below r_min uses the r -> 0 limit of the bound and
/// mass beyond r_max uses its saturation value 1/lambda.
inline double avg_bcrb(double x, const SystemParams& params, const QuadratureConfig& quad = {}) {
  detail::require_domain(x >= 0.0, "avg_bcrb: x must be nonnegative");
  if (x == 0.0) return 1.0 / params.lambda;
  const QuadratureConfig cfg = quad.resolved(params.lambda);
  const std::vector<double> r = quadrature_nodes(cfg);
  const double lam = params.lambda;

  auto segment = [lam](double a, double b, double fa, double fb) {
    const double ea = std::exp(-lam * a);
    const double h = b - a;
    const double mass = -ea * std::expm1(-lam * h);  // e^{-la} - e^{-lb}
    const double eb = ea - mass;
    return fa * mass + (fb - fa) / h * (-h * eb + mass / lam);
  };

  CompensatedSum total;
  const double f0 = (x > 0.0) ? 0.0 : 1.0 / lam;
  double prev_r = 0.0;
  double prev_f = f0;
  for (double rk : r) {
    const double fk = bcrb(x, rk, params);
    total.add(segment(prev_r, rk, prev_f, fk));
    prev_r = rk;
    prev_f = fk;
  }
  total.add(std::exp(-lam * cfg.r_max) / lam);
  return total.value();
}

/// Degenerate prior concentrated at r0: the average collapses to one bound.
inline double avg_bcrb_point_mass(double x, double r0, const SystemParams& params) {
  return bcrb(x, r0, params);
}

// ----------------------------------------------------------------------------
// Monte Carlo cost
// ----------------------------------------------------------------------------

namespace detail {

struct DrawStats {
  double mse = 0.0;
  double var = 0.0;
  double bias_sq = 0.0;
  std::uint64_t clamped = 0;
  std::uint64_t failures = 0;
};

}  // namespace detail

/// Monte Carlo estimate of c(x). `stream` separates independent grid points.
inline CostSample mc_cost(double x, EstimatorKind kind, const SystemParams& params,
                          const MonteCarloConfig& cfg, const QuadratureConfig& quad = {},
                          std::uint64_t stream = 0, unsigned threads = 0) {
  params.validate();
  cfg.validate();
  oisac::detail::require_domain(x >= 0.0, "mc_cost: x must be nonnegative");

  CostSample out;
  out.x = x;
  out.kind = kind;
  out.seed = cfg.seed;
  if (kind == EstimatorKind::bcrb) {
    out.mse = out.variance = avg_bcrb(x, params, quad);
    return out;
  }
  out.n_r = cfg.n_r;
  out.n_y = cfg.n_y;

  const double noise_sd = std::sqrt(params.sigma_s2 / params.n_s);
  std::vector<detail::DrawStats> per_draw(cfg.n_r);

  parallel_for(cfg.n_r, worker_count(threads), [&](std::size_t begin, std::size_t end) {
    std::optional<PosteriorMean> mp;
    if (kind == EstimatorKind::mp) mp.emplace(params, quad);
    std::vector<double> est(cfg.n_y);
    for (std::size_t i = begin; i < end; ++i) {
      const random::Key prior_key{cfg.seed, stream, i, 0};
      const double r = prior_key.exponential(params.lambda);
      const double mean = sensing_gain(r, x, params);
      detail::DrawStats& st = per_draw[i];
      for (std::size_t j = 0; j < cfg.n_y; ++j) {
        const random::Key obs_key{cfg.seed, stream, i, j + 1};
        const double y_bar = mean + noise_sd * obs_key.standard_normal();
        double r_hat = 0.0;
        switch (kind) {
          case EstimatorKind::mle:
            if (x > 0.0) {
              double y = y_bar;
              if (!(y > cfg.clamp_eps)) {
                y = cfg.clamp_eps;
                ++st.clamped;
              }
              r_hat = std::sqrt(std::sqrt(params.rho * x / y));
            }
            break;
          case EstimatorKind::map:
            try {
              r_hat = map_range(SensingObservation::from_mean(x, y_bar, params.n_s), params).value;
            } catch (const ConvergenceError&) {
              ++st.failures;
              r_hat = std::numeric_limits<double>::quiet_NaN();
            }
            break;
          case EstimatorKind::mp:
            r_hat = (*mp)(SensingObservation::from_mean(x, y_bar, params.n_s)).value;
            break;
          case EstimatorKind::bcrb:
            break;
        }
        est[j] = r_hat;
      }
      if (st.failures > 0) continue;
      CompensatedSum s_mean;
      for (double v : est) s_mean.add(v);
      const double m = s_mean.value() / cfg.n_y;
      CompensatedSum s_var, s_mse;
      for (double v : est) {
        if (!std::isfinite(v) || v < 0.0) {
          throw NumericalError("mc_cost: non-finite or negative estimate at x=" + std::to_string(x));
        }
        s_var.add((v - m) * (v - m));
        s_mse.add((r - v) * (r - v));
      }
      st.var = s_var.value() / cfg.n_y;
      st.mse = s_mse.value() / cfg.n_y;
      st.bias_sq = (m - r) * (m - r);
    }
  });

  CompensatedSum mse, var, bias, mse2;
  std::uint64_t failures = 0;
  for (const auto& st : per_draw) {
    mse.add(st.mse);
    var.add(st.var);
    bias.add(st.bias_sq);
    mse2.add(st.mse * st.mse);
    out.clamped += st.clamped;
    failures += st.failures;
  }
  if (failures > 0) {
    throw NumericalError("mc_cost: " + std::to_string(failures) +
                         " MAP solver failures at x=" + std::to_string(x));
  }
  const double n = cfg.n_r;
  out.mse = mse.value() / n;
  out.variance = var.value() / n;
  out.bias_sq = bias.value() / n;
  if (cfg.n_r > 1) {
    const double spread = std::max(0.0, (mse2.value() - n * out.mse * out.mse) / (n - 1.0));
    out.mse_stderr = std::sqrt(spread / n);
  }
  return out;
}

/// c(x_k) for every point of the input grid; grid index k keys the stream.
inline CostVector cost_vector(EstimatorKind kind, const SystemParams& params,
                              const MonteCarloConfig& cfg, const QuadratureConfig& quad = {},
                              unsigned threads = 0) {
  CostVector out;
  out.x_grid = input_grid(params);
  out.kind = kind;
  out.mc = cfg;
  out.samples.reserve(out.x_grid.size());
  for (std::size_t k = 0; k < out.x_grid.size(); ++k) {
    out.samples.push_back(mc_cost(out.x_grid[k], kind, params, cfg, quad, k, threads));
  }
  return out;
}

/// Wraps arbitrary per-point costs (tests, externally computed vectors).
inline CostVector make_cost_vector(std::vector<double> x_grid, std::span<const double> costs,
                                   EstimatorKind kind = EstimatorKind::bcrb) {
  detail::require(x_grid.size() == costs.size(), "make_cost_vector: size mismatch");
  CostVector out;
  out.kind = kind;
  out.samples.resize(costs.size());
  for (std::size_t k = 0; k < costs.size(); ++k) {
    detail::require(std::isfinite(costs[k]) && costs[k] >= 0.0,
                    "make_cost_vector: costs must be finite and nonnegative");
    out.samples[k].x = x_grid[k];
    out.samples[k].mse = out.samples[k].variance = costs[k];
    out.samples[k].kind = kind;
  }
  out.x_grid = std::move(x_grid);
  return out;
}

}  // namespace oisac
