// ============================================================================
// cd_optimizer.hpp -- capacity-distortion region of the quantized ISAC link
//
// For each distortion dual t the optimizer maximizes
//     I(X; Y_c) - s E[X] - t E[c(X)]
// over input distributions on the grid, then tunes the power dual s >= 0 so
// that the mean power meets the budget (complementary slackness). Two inner
// solvers are provided:
//   * BAA : penalized Blahut-Arimoto on the quantized channel;
//   * CFA : the exponential-family optimum p(x) ~ exp(-s x - t c(x)) that is
//           exact when I(X; Y_c) is replaced by H(X) (high optical SNR).
// Duals are expressed in nats per unit so both solvers share one fixed point
// in the noiseless limit; rates are reported in bits.
// ============================================================================
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "oisac/channel_model.hpp"
#include "oisac/error.hpp"
#include "oisac/parallel.hpp"
#include "oisac/sensing_cost.hpp"
#include "oisac/summation.hpp"

namespace oisac {

enum class SolverKind { baa, cfa };

inline std::string_view to_string(SolverKind s) { return s == SolverKind::baa ? "baa" : "cfa"; }

inline SolverKind parse_solver(std::string_view s) {
  if (s == "baa") return SolverKind::baa;
  if (s == "cfa") return SolverKind::cfa;
  throw ConfigError("unknown solver '" + std::string(s) + "'");
}

// ----------------------------------------------------------------------------
// Distributions
// ----------------------------------------------------------------------------

struct InputDistribution {
  std::vector<double> x;
  std::vector<double> p;

  static InputDistribution uniform(std::span<const double> grid) {
    return {std::vector<double>(grid.begin(), grid.end()),
            std::vector<double>(grid.size(), 1.0 / static_cast<double>(grid.size()))};
  }

  static InputDistribution point_mass(std::span<const double> grid, std::size_t at) {
    InputDistribution d{std::vector<double>(grid.begin(), grid.end()),
                        std::vector<double>(grid.size(), 0.0)};
    d.p.at(at) = 1.0;
    return d;
  }

  void validate() const {
    detail::require(x.size() == p.size() && !p.empty(), "InputDistribution: size mismatch");
    for (double v : p) detail::require(v >= 0.0 && std::isfinite(v), "InputDistribution: negative mass");
    detail::require(std::abs(compensated_sum(p) - 1.0) <= 1e-10, "InputDistribution: mass does not sum to 1");
  }

  [[nodiscard]] double expectation(std::span<const double> f) const {
    CompensatedSum s;
    for (std::size_t k = 0; k < p.size(); ++k) s.add(p[k] * f[k]);
    return s.value();
  }
  [[nodiscard]] double mean() const { return expectation(x); }

  [[nodiscard]] double entropy_bits() const {
    CompensatedSum s;
    for (double v : p)
      if (v > 0.0) s.add(-v * std::log2(v));
    return s.value();
  }
};

/// Running sum of p over the ascending grid.
inline std::vector<double> cdf_of(const InputDistribution& dist) {
  std::vector<double> out(dist.p.size());
  CompensatedSum s;
  for (std::size_t k = 0; k < dist.p.size(); ++k) {
    s.add(dist.p[k]);
    out[k] = s.value();
  }
  return out;
}

// ----------------------------------------------------------------------------
// Mutual information
// ----------------------------------------------------------------------------

namespace detail {

/// Output marginal q(y) = sum_x p(x) W(y|x), written into `q`.
inline void output_marginal(std::span<const double> p, const QuantizedChannel& ch,
                            std::span<double> q) {
  std::fill(q.begin(), q.end(), 0.0);
  for (std::size_t k = 0; k < ch.rows(); ++k) {
    const double pk = p[k];
    if (pk == 0.0) continue;
    const double* row = ch.row(k).data();
    for (std::size_t j = ch.band_begin(k), e = ch.band_end(k); j < e; ++j) q[j] += pk * row[j];
  }
}

inline std::vector<double> output_marginal(std::span<const double> p, const QuantizedChannel& ch) {
  std::vector<double> q(ch.cols());
  output_marginal(p, ch, q);
  return q;
}

/// D_k = KL(W(.|x_k) || q) in nats for every row. Band entries are strictly
/// positive, and q > 0 wherever any row with positive mass is nonzero.
inline void row_divergences(const QuantizedChannel& ch, std::span<const double> neg_entropy,
                            std::span<const double> log_q, std::span<double> out) {
  for (std::size_t k = 0; k < ch.rows(); ++k) {
    const double* row = ch.row(k).data();
    double cross = 0.0;
    for (std::size_t j = ch.band_begin(k), e = ch.band_end(k); j < e; ++j) cross += row[j] * log_q[j];
    out[k] = neg_entropy[k] - cross;
  }
}

inline std::vector<double> row_neg_entropy(const QuantizedChannel& ch) {
  std::vector<double> h(ch.rows(), 0.0);
  for (std::size_t k = 0; k < ch.rows(); ++k) {
    const auto row = ch.row(k);
    for (std::size_t j = ch.band_begin(k); j < ch.band_end(k); ++j)
      if (row[j] > 0.0) h[k] += row[j] * std::log(row[j]);
  }
  return h;
}

/// log q, floored at the log of the smallest subnormal where q underflowed
/// to zero (only rows whose own mass underflowed can see such outputs).
inline void safe_log(std::span<const double> q, std::span<double> out) {
  const double floor_log = std::log(std::numeric_limits<double>::denorm_min());
  for (std::size_t j = 0; j < q.size(); ++j) out[j] = (q[j] > 0.0) ? std::log(q[j]) : floor_log;
}

inline std::vector<double> safe_log(std::span<const double> q) {
  std::vector<double> out(q.size());
  safe_log(q, out);
  return out;
}

}  // namespace detail

/// I(X; Y) in bits, with 0 log 0 = 0.
inline double mutual_information(const InputDistribution& dist, const QuantizedChannel& ch) {
  detail::require(dist.p.size() == ch.rows(), "mutual_information: dimension mismatch");
  const auto q = detail::output_marginal(dist.p, ch);
  const auto log_q = detail::safe_log(q);
  const auto h = detail::row_neg_entropy(ch);
  std::vector<double> d(ch.rows());
  detail::row_divergences(ch, h, log_q, d);
  CompensatedSum s;
  for (std::size_t k = 0; k < ch.rows(); ++k)
    if (dist.p[k] > 0.0) s.add(dist.p[k] * d[k]);
  return std::max(0.0, s.value() / std::numbers::ln2);
}

// ----------------------------------------------------------------------------
// Penalized Blahut-Arimoto
// ----------------------------------------------------------------------------

struct BaaOptions {
  double delta_ba = 1e-6;          ///< bracket gap in bits
  std::size_t max_iter = 100'000;
  /// Largest over-relaxation exponent; 1 gives the classic update.
  double max_relaxation = 2.0;
  /// Every this many iterations a Newton step on the support is tried and
  /// kept only if it does not lower I_L; 0 disables it.
  std::size_t newton_period = 10;
  /// Weight of the uniform distribution mixed into p_init.
  double support_floor = 1e-6;
  bool record_lower_trace = false;
};

struct BAAResult {
  InputDistribution distribution;
  double i_lower = 0.0;          ///< penalized lower bracket (bits)
  double i_upper = 0.0;          ///< penalized upper bracket (bits)
  std::size_t iterations = 0;
  double mean_power = 0.0;
  double mean_distortion = 0.0;
  double rate_bits = 0.0;        ///< unpenalized I(X; Y_c) of the returned distribution
  double lagrangian_rate = 0.0;  ///< i_lower + (s P + t D) / ln 2
  bool lower_monotone = true;    ///< i_lower never decreased across iterations
  std::vector<double> lower_trace;
};

namespace detail {

/// Shifts `log_w` so that exp(log_w) sums to one and writes the weights.
/// Log weights below `floor` are raised to it.
inline void normalize_log_weights(std::span<double> log_w, std::span<double> w,
                                  double floor = -std::numeric_limits<double>::infinity()) {
  double top = -std::numeric_limits<double>::infinity();
  for (double v : log_w) top = std::max(top, v);
  double total = 0.0;
  for (double v : log_w) total += std::exp(v - top);
  const double shift = top + std::log(total);
  for (std::size_t k = 0; k < log_w.size(); ++k) {
    log_w[k] = std::max(log_w[k] - shift, floor);
    w[k] = std::exp(log_w[k]);
  }
}

/// Iterates never drop a mass below e^-600. Such masses are invisible in
/// every reported quantity, and without the floor the far tails sink to
/// e^-1e6 and take thousands of iterations to climb back.
inline constexpr double kLogMassFloor = -600.0;

/// Scratch state for one Blahut-Arimoto run.
class BaaState {
public:
  BaaState(const QuantizedChannel& ch, std::span<const double> penalty)
      : ch_(ch), penalty_(penalty), neg_h_(row_neg_entropy(ch)),
        q_(ch.cols()), log_q_(ch.cols()), d_(ch.rows()), log_g_(ch.rows()) {}

  /// Fills divergences and the penalized brackets (nats) for `p`, whose
  /// logarithms are `log_p`. Marginal entries near the subnormal range are
  /// recomputed as a log-sum-exp so that their logarithms stay accurate.
  void evaluate(std::span<const double> p, std::span<const double> log_p) {
    output_marginal(p, ch_, q_);
    safe_log(q_, log_q_);
    for (std::size_t j = 0; j < q_.size(); ++j) {
      if (q_[j] > kTinyMarginal) continue;
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < ch_.rows(); ++k)
        if (j >= ch_.band_begin(k) && j < ch_.band_end(k)) top = std::max(top, log_p[k] + std::log(ch_(k, j)));
      if (!std::isfinite(top)) continue;
      double acc = 0.0;
      for (std::size_t k = 0; k < ch_.rows(); ++k)
        if (j >= ch_.band_begin(k) && j < ch_.band_end(k)) acc += std::exp(log_p[k] + std::log(ch_(k, j)) - top);
      log_q_[j] = top + std::log(acc);
    }
    row_divergences(ch_, neg_h_, log_q_, d_);
    upper = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < d_.size(); ++k) {
      log_g_[k] = d_[k] - penalty_[k];
      upper = std::max(upper, log_g_[k]);
    }
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < d_.size(); ++k) top = std::max(top, log_p[k] + log_g_[k]);
    double z = 0.0;
    for (std::size_t k = 0; k < d_.size(); ++k) z += std::exp(log_p[k] + log_g_[k] - top);
    lower = top + std::log(z);
  }

  /// log p_next = log p + mu (log g - lower), renormalized; fills both
  /// the log weights and the probabilities.
  void step(std::span<const double> log_p, double mu, std::span<double> next_log,
            std::span<double> next) const {
    for (std::size_t k = 0; k < log_p.size(); ++k) next_log[k] = log_p[k] + mu * (log_g_[k] - lower);
    normalize_log_weights(next_log, next, kLogMassFloor);
  }

  [[nodiscard]] std::span<const double> divergences() const noexcept { return d_; }
  [[nodiscard]] std::span<const double> marginal() const noexcept { return q_; }
  [[nodiscard]] std::span<const double> log_gains() const noexcept { return log_g_; }

  double upper = 0.0;
  double lower = 0.0;

private:
  static constexpr double kTinyMarginal = 1e-280;

  const QuantizedChannel& ch_;
  std::span<const double> penalty_;
  std::vector<double> neg_h_, q_, log_q_, d_, log_g_;
};


/// Solves a x = b (n x n, row-major) by Gaussian elimination with partial
/// pivoting; `b` is overwritten with x. Returns false for a singular matrix.
inline bool solve_dense(std::vector<double>& a, std::vector<double>& b, std::size_t n) {
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r * n + c]) > std::abs(a[piv * n + c])) piv = r;
    if (!(std::abs(a[piv * n + c]) > 0.0)) return false;
    if (piv != c) {
      for (std::size_t k = 0; k < n; ++k) std::swap(a[c * n + k], a[piv * n + k]);
      std::swap(b[c], b[piv]);
    }
    const double inv = 1.0 / a[c * n + c];
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r * n + c] * inv;
      if (f == 0.0) continue;
      for (std::size_t k = c; k < n; ++k) a[r * n + k] -= f * a[c * n + k];
      b[r] -= f * b[c];
    }
  }
  for (std::size_t c = n; c-- > 0;) {
    double acc = b[c];
    for (std::size_t k = c + 1; k < n; ++k) acc -= a[c * n + k] * b[k];
    b[c] = acc / a[c * n + c];
  }
  return true;
}

/// Damped Newton direction of sum_k p_k log g_k(p) on the active
/// coordinates, constrained to sum(dp) = 0. The curvature matrix is
/// A_kl = sum_y W(y|x_k) W(y|x_l) / q(y) + damping / p_k [k = l]; large
/// damping approaches the Blahut-Arimoto direction.
inline bool newton_direction(const QuantizedChannel& ch, std::span<const double> p,
                             std::span<const double> q, std::span<const double> log_g,
                             std::span<const std::size_t> active, double damping,
                             std::vector<double>& dp) {
  const std::size_t m = active.size();
  const std::size_t n = m + 1;
  std::vector<double> a(n * n, 0.0), b(n, 0.0);
  for (std::size_t u = 0; u < m; ++u) {
    const std::size_t ku = active[u];
    const double* wu = ch.row(ku).data();
    for (std::size_t v = u; v < m; ++v) {
      const std::size_t kv = active[v];
      const double* wv = ch.row(kv).data();
      const std::size_t lo = std::max(ch.band_begin(ku), ch.band_begin(kv));
      const std::size_t hi = std::min(ch.band_end(ku), ch.band_end(kv));
      double acc = 0.0;
      for (std::size_t j = lo; j < hi; ++j)
        if (q[j] > 0.0) acc += wu[j] * wv[j] / q[j];
      a[u * n + v] = a[v * n + u] = acc;
    }
  }
  for (std::size_t u = 0; u < m; ++u) {
    a[u * n + u] += damping / p[active[u]];
    a[u * n + m] = a[m * n + u] = 1.0;
    b[u] = log_g[active[u]];
  }
  if (!solve_dense(a, b, n)) return false;
  dp.assign(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(m));
  for (double v : dp)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace detail

/// Penalized Blahut-Arimoto: maximizes I(X; Y_c) - s E[X] - t E[c(X)] until
/// the brackets I_U = max_k log g_k and I_L = log sum_k p_k g_k (penalized,
/// reported in bits) are closer than delta_ba.
///
/// The update p <- p g^mu / sum is over-relaxed (mu > 1) while that keeps I_L
/// nondecreasing and falls back to the classic mu = 1 step otherwise; the
/// fixed point and the brackets are those of the classic iteration.
inline BAAResult baa_inner(const QuantizedChannel& ch, std::span<const double> cost, double s,
                           double t, const InputDistribution& p_init, const BaaOptions& opts = {}) {
  const std::size_t n = ch.rows();
  detail::require(cost.size() == n, "baa_inner: cost vector not aligned with the input grid");
  detail::require(p_init.p.size() == n, "baa_inner: initial distribution not aligned");
  detail::require(opts.delta_ba > 0.0, "baa_inner: delta_ba must be positive");
  detail::require(opts.max_relaxation >= 1.0, "baa_inner: max_relaxation must be >= 1");
  detail::require(opts.support_floor >= 0.0 && opts.support_floor < 1.0,
                  "baa_inner: support_floor must lie in [0, 1)");
  detail::require(s >= 0.0 && t >= 0.0, "baa_inner: duals must be nonnegative");

  const auto xs = ch.x_grid();
  std::vector<double> penalty(n);
  for (std::size_t k = 0; k < n; ++k) penalty[k] = s * xs[k] + t * cost[k];

  detail::BaaState state_a(ch, penalty), state_b(ch, penalty);
  detail::BaaState* cur = &state_a;
  detail::BaaState* trial = &state_b;
  // The iteration cannot revive a zero coordinate, so warm starts are mixed
  // with a small uniform component to restore full support. Weights are
  // carried in the log domain so that masses far below the smallest double
  // keep evolving.
  std::vector<double> p(n), next(n), log_p(n), next_log(n);
  for (std::size_t k = 0; k < n; ++k)
    log_p[k] = std::log((1.0 - opts.support_floor) * p_init.p[k] +
                        opts.support_floor / static_cast<double>(n));
  detail::normalize_log_weights(log_p, p);
  cur->evaluate(p, log_p);

  BAAResult res;
  const double gap_nats = opts.delta_ba * std::numbers::ln2;
  double mu = 1.0;
  std::size_t it = 0;
  std::vector<std::size_t> active;
  std::vector<double> dp;
  double damping = 1e-2;
  if (opts.record_lower_trace) res.lower_trace.push_back(cur->lower / std::numbers::ln2);

  auto accept = [&] {
    std::swap(p, next);
    std::swap(log_p, next_log);
    std::swap(cur, trial);
  };

  while (!(cur->upper - cur->lower < gap_nats) && it < opts.max_iter) {
    ++it;
    cur->step(log_p, mu, next_log, next);
    trial->evaluate(next, next_log);
    if (mu > 1.0 && trial->lower < cur->lower) {
      mu = 1.0;
      cur->step(log_p, mu, next_log, next);
      trial->evaluate(next, next_log);
    } else {
      mu = std::min(opts.max_relaxation, mu * 1.5);
    }
    if (trial->lower < cur->lower - 1e-12 * std::max(1.0, std::abs(cur->lower))) res.lower_monotone = false;
    accept();

    if (opts.newton_period > 0 && it % opts.newton_period == 0 && !(cur->upper - cur->lower < gap_nats)) {
      active.clear();
      for (std::size_t k = 0; k < n; ++k)
        if (p[k] > 1e-200) active.push_back(k);
      for (int attempt = 0; attempt < 4 && active.size() > 1; ++attempt) {
        if (!detail::newton_direction(ch, p, cur->marginal(), cur->log_gains(), active, damping, dp)) {
          damping *= 10.0;
          continue;
        }
        std::copy(log_p.begin(), log_p.end(), next_log.begin());
        for (std::size_t u = 0; u < active.size(); ++u) {
          const std::size_t k = active[u];
          next_log[k] = std::log(std::max(p[k] + dp[u], 0.01 * p[k]));
        }
        detail::normalize_log_weights(next_log, next, detail::kLogMassFloor);
        trial->evaluate(next, next_log);
        if (trial->lower >= cur->lower) {
          accept();
          damping = std::max(1e-12, damping * 0.1);
          break;
        }
        damping *= 10.0;
      }
    }
    if (opts.record_lower_trace) res.lower_trace.push_back(cur->lower / std::numbers::ln2);
  }

  res.distribution = {std::vector<double>(xs.begin(), xs.end()), p};
  res.i_lower = cur->lower / std::numbers::ln2;
  res.i_upper = cur->upper / std::numbers::ln2;
  res.iterations = it;
  res.mean_power = res.distribution.mean();
  res.mean_distortion = res.distribution.expectation(cost);
  CompensatedSum rate;
  const auto d = cur->divergences();
  for (std::size_t k = 0; k < n; ++k)
    if (p[k] > 0.0) rate.add(p[k] * d[k]);
  res.rate_bits = std::max(0.0, rate.value() / std::numbers::ln2);
  res.lagrangian_rate = res.i_lower + (s * res.mean_power + t * res.mean_distortion) / std::numbers::ln2;
  if (!(cur->upper - cur->lower < gap_nats)) {
    std::ostringstream msg;
    msg << "baa_inner: no convergence after " << it << " iterations (s=" << s << ", t=" << t
        << ", gap=" << (res.i_upper - res.i_lower) << ")";
    throw ConvergenceError(msg.str());
  }
  return res;
}

// ----------------------------------------------------------------------------
// Closed-form (exponential family) solver
// ----------------------------------------------------------------------------

/// p_k ~ exp(-s x_k - t c_k), normalized in the log domain.
inline InputDistribution cfa_dist(std::span<const double> x_grid, std::span<const double> cost,
                                  double s, double t) {
  detail::require(x_grid.size() == cost.size() && !cost.empty(), "cfa_dist: size mismatch");
  detail::require(s >= 0.0 && t >= 0.0, "cfa_dist: duals must be nonnegative");
  std::vector<double> logw(cost.size());
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < cost.size(); ++k) {
    logw[k] = -s * x_grid[k] - t * cost[k];
    peak = std::max(peak, logw[k]);
  }
  if (!std::isfinite(peak)) throw NumericalError("cfa_dist: non-finite weights");
  CompensatedSum z;
  for (double& v : logw) {
    v = std::exp(v - peak);
    z.add(v);
  }
  const double total = z.value();
  for (double& v : logw) v /= total;
  return {std::vector<double>(x_grid.begin(), x_grid.end()), std::move(logw)};
}

// ----------------------------------------------------------------------------
// Endpoints and bounds
// ----------------------------------------------------------------------------

struct SensingEndpoint {
  std::size_t index = 0;
  double x_star = 0.0;
  double d_min = 0.0;
  InputDistribution distribution;
};

/// Sensing-optimal mode: the point mass at argmin_{x <= P} c(x), ties to the
/// larger x.
inline SensingEndpoint sens_opt_endpoint(const CostVector& cost, double power_budget) {
  const auto c = cost.values();
  std::size_t best = cost.size();
  for (std::size_t k = 0; k < cost.size(); ++k) {
    if (cost.x_grid[k] > power_budget * (1.0 + 1e-12)) continue;
    if (best == cost.size() || c[k] <= c[best]) best = k;
  }
  if (best == cost.size()) throw ConfigError("sens_opt_endpoint: no grid point within the power budget");
  return {best, cost.x_grid[best], c[best], InputDistribution::point_mass(cost.x_grid, best)};
}

struct CapacityBounds {
  double lower = 0.0;
  double upper = 0.0;
};

/// Closed-form capacity bounds of the average-power IM/DD Gaussian channel,
/// in bits. The upper bound drops its o(1) term.
inline CapacityBounds capacity_bounds(double power, double h_c, double sigma2) {
  const double snr = h_c * power;
  detail::require_domain(snr > 0.0 && sigma2 > 0.0, "capacity_bounds: h_c P and sigma^2 must be positive");
  const double ln2 = std::numbers::ln2;
  const double lower =
      (0.5 * std::log(snr) - std::sqrt(std::numbers::pi * sigma2 / (2.0 * snr)) +
       0.5 * std::log(1.0 + 2.0 / snr)) / ln2 +
      (std::sqrt(snr * (2.0 + snr)) - snr - 1.0) / ln2;
  const double upper = (1.0 - std::log(1.0 / power) + std::log(h_c)) / ln2;
  return {lower, upper};
}

// ----------------------------------------------------------------------------
// Dual power search and region sweep
// ----------------------------------------------------------------------------

struct DualSearchOptions {
  double delta_b = 1e-3;   ///< power tolerance (W)
  double eta0 = 1.0;       ///< initial learning rate
  double gamma = 20.0;     ///< learning-rate decay
  std::size_t max_updates = 200;
  BaaOptions baa;
};

/// Learning rate eta0 / (1 + gamma 0.1^i); approaches eta0 as i grows.
inline double learning_rate(double eta0, double gamma, std::size_t i) {
  return eta0 / (1.0 + gamma * std::pow(0.1, static_cast<double>(i)));
}

struct RegionPoint {
  double t = 0.0;
  double s_star = 0.0;
  double distortion = 0.0;
  double rate_bits = 0.0;
  double mean_power = 0.0;
  SolverKind solver = SolverKind::baa;
  InputDistribution distribution;
  std::size_t updates = 0;  ///< inner solver calls spent on the power dual
  bool ok = true;
  std::string message;
};

struct InnerResult {
  InputDistribution dist;
  double power = 0.0;
  double distortion = 0.0;
  double rate = 0.0;
};

/// One inner solve at fixed duals. BAA rates are I(X; Y_c) on the channel;
/// CFA rates are I(X; Y_c) of the exponential-family input on the same channel.
inline InnerResult solve_inner(SolverKind solver, const QuantizedChannel& ch,
                               std::span<const double> cost, double s, double t,
                               const InputDistribution& warm, const BaaOptions& baa) {
  if (solver == SolverKind::baa) {
    BAAResult r = baa_inner(ch, cost, s, t, warm, baa);
    return {std::move(r.distribution), r.mean_power, r.mean_distortion, r.rate_bits};
  }
  InputDistribution d = cfa_dist(ch.x_grid(), cost, s, t);
  const double power = d.mean();
  const double dist = d.expectation(cost);
  const double rate = mutual_information(d, ch);
  return {std::move(d), power, dist, rate};
}

/// Finds s* >= 0 so that the mean power meets `power_budget` (or s* = 0 when
/// the unconstrained optimum already fits). Damped secant updates with a
/// bracketing safeguard; if the bracket collapses onto a jump in E[X](s) the
/// two bracketing solutions are time-shared to hit the budget. Each inner
/// solve starts from the uniform distribution.
inline RegionPoint dual_power_search(double t, SolverKind solver, const QuantizedChannel& ch,
                                     const CostVector& cost, double power_budget,
                                     const DualSearchOptions& opts = {}) {
  detail::require(opts.delta_b > 0.0, "dual_power_search: delta_b must be positive");
  detail::require(cost.size() == ch.rows(), "dual_power_search: cost vector not aligned");
  const auto c = cost.values();
  const double target = power_budget;

  RegionPoint pt;
  pt.t = t;
  pt.solver = solver;
  auto finish = [&](double s, InnerResult&& r, std::size_t updates) {
    pt.s_star = s;
    pt.distortion = r.distortion;
    pt.rate_bits = r.rate;
    pt.mean_power = r.power;
    pt.distribution = std::move(r.dist);
    pt.updates = updates;
    return pt;
  };

  const InputDistribution cold = InputDistribution::uniform(ch.x_grid());
  InnerResult r0 = solve_inner(solver, ch, c, 0.0, t, cold, opts.baa);
  if (r0.power <= target) return finish(0.0, std::move(r0), 1);

  std::vector<std::pair<double, double>> trace{{0.0, r0.power}};
  std::size_t updates = 1;
  auto solve = [&](double s) {
    ++updates;
    InnerResult r = solve_inner(solver, ch, c, s, t, cold, opts.baa);
    trace.emplace_back(s, r.power);
    return r;
  };

  // Bracket: P(s_lo) > target > P(s_hi), growing s geometrically.
  double s_lo = 0.0;
  InnerResult lo_res = r0;
  double s_hi = 1.0;
  InnerResult hi_res = solve(s_hi);
  while (hi_res.power - target >= opts.delta_b && updates < opts.max_updates) {
    if (std::abs(hi_res.power - target) < opts.delta_b) break;
    s_lo = s_hi;
    lo_res = std::move(hi_res);
    s_hi *= 4.0;
    hi_res = solve(s_hi);
  }
  if (std::abs(hi_res.power - target) < opts.delta_b) return finish(s_hi, std::move(hi_res), updates);

  // Damped secant on the bracket with the learning-rate schedule; steps that
  // leave the bracket are replaced by bisection (geometric when it spans
  // decades).
  double s_a = s_lo, p_a = lo_res.power;
  double s_b = s_hi, p_b = hi_res.power;
  for (std::size_t i = 1; updates < opts.max_updates; ++i) {
    if (s_hi - s_lo <= 1e-12 * s_hi) {
      // E[X](s) jumps across the budget: mix the two sides.
      const double w = (lo_res.power - target) / (lo_res.power - hi_res.power);
      InnerResult mix;
      mix.dist = lo_res.dist;
      for (std::size_t k = 0; k < mix.dist.p.size(); ++k)
        mix.dist.p[k] = (1.0 - w) * lo_res.dist.p[k] + w * hi_res.dist.p[k];
      mix.power = mix.dist.mean();
      mix.distortion = mix.dist.expectation(c);
      mix.rate = (1.0 - w) * lo_res.rate + w * hi_res.rate;
      return finish(0.5 * (s_lo + s_hi), std::move(mix), updates);
    }
    const double eta = learning_rate(opts.eta0, opts.gamma, i);
    const double slope = (p_b - p_a) / (s_b - s_a);
    double s_next = std::numeric_limits<double>::quiet_NaN();
    if (std::isfinite(slope) && slope < 0.0) s_next = s_b - eta * (p_b - target) / slope;
    const double margin = 1e-3 * (s_hi - s_lo);
    if (!(s_next > s_lo + margin && s_next < s_hi - margin)) {
      s_next = (s_lo > 0.0 && s_hi > 10.0 * s_lo) ? std::sqrt(s_lo * s_hi) : 0.5 * (s_lo + s_hi);
      if (s_lo == 0.0 && s_hi > 1.0) s_next = std::min(s_next, 1e-3 * s_hi + 1e-6);
    }
    InnerResult cur = solve(s_next);
    const double err = cur.power - target;
    if (std::abs(err) < opts.delta_b) return finish(s_next, std::move(cur), updates);
    s_a = s_b;
    p_a = p_b;
    s_b = s_next;
    p_b = cur.power;
    if (err > 0.0) {
      s_lo = s_next;
      lo_res = std::move(cur);
    } else {
      s_hi = s_next;
      hi_res = std::move(cur);
    }
  }

  std::ostringstream msg;
  msg << "dual_power_search: power dual did not converge for t=" << t << "; trace (s, P):";
  const std::size_t from = trace.size() > 8 ? trace.size() - 8 : 0;
  for (std::size_t k = from; k < trace.size(); ++k)
    msg << " (" << trace[k].first << ", " << trace[k].second << ")";
  throw ConvergenceError(msg.str());
}

/// Default sweep: t = 0 followed by 40 log-spaced values over [1e-2, 1e6].
inline std::vector<double> default_t_set() {
  std::vector<double> t{0.0};
  for (int k = 0; k < 40; ++k) t.push_back(std::pow(10.0, -2.0 + 8.0 * k / 39.0));
  return t;
}

/// One region point per t (each solved from a uniform start), sorted by
/// distortion. Failing t values are returned with ok = false unless `strict`.
inline std::vector<RegionPoint> cd_region(std::span<const double> t_set, SolverKind solver,
                                          const QuantizedChannel& ch, const CostVector& cost,
                                          double power_budget, const DualSearchOptions& opts = {},
                                          unsigned threads = 1, bool strict = true) {
  detail::require(!t_set.empty(), "cd_region: empty t set");
  for (std::size_t k = 0; k < t_set.size(); ++k) {
    detail::require(t_set[k] >= 0.0, "cd_region: t must be nonnegative");
    detail::require(k == 0 || t_set[k] > t_set[k - 1], "cd_region: t set must be ascending");
  }
  std::vector<RegionPoint> out(t_set.size());
  parallel_for(t_set.size(), worker_count(threads), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      try {
        out[k] = dual_power_search(t_set[k], solver, ch, cost, power_budget, opts);
      } catch (const NumericalError& err) {
        if (strict) throw NumericalError("t=" + std::to_string(t_set[k]) + ": " + err.what());
        out[k].t = t_set[k];
        out[k].solver = solver;
        out[k].ok = false;
        out[k].message = err.what();
      }
    }
  });
  std::stable_sort(out.begin(), out.end(), [](const RegionPoint& a, const RegionPoint& b) {
    return a.distortion < b.distortion;
  });
  return out;
}

// ----------------------------------------------------------------------------
// Time-sharing envelope
// ----------------------------------------------------------------------------

struct RatePoint {
  double distortion = 0.0;
  double rate = 0.0;
};

/// Upper concave envelope of (distortion, rate) points, ascending in distortion.
inline std::vector<RatePoint> concave_envelope(std::vector<RatePoint> pts) {
  std::sort(pts.begin(), pts.end(), [](const RatePoint& a, const RatePoint& b) {
    return a.distortion < b.distortion || (a.distortion == b.distortion && a.rate > b.rate);
  });
  std::vector<RatePoint> hull;
  for (const auto& p : pts) {
    if (!hull.empty() && hull.back().distortion == p.distortion) continue;
    while (hull.size() >= 2) {
      const auto& a = hull[hull.size() - 2];
      const auto& b = hull.back();
      const double cross = (b.distortion - a.distortion) * (p.rate - a.rate) -
                           (b.rate - a.rate) * (p.distortion - a.distortion);
      if (cross >= 0.0) hull.pop_back(); else break;
    }
    hull.push_back(p);
  }
  return hull;
}

/// Envelope value at distortion d (clamped to the envelope's support).
inline double envelope_at(std::span<const RatePoint> hull, double d) {
  if (hull.empty()) return 0.0;
  if (d <= hull.front().distortion) return hull.front().rate;
  if (d >= hull.back().distortion) return hull.back().rate;
  for (std::size_t k = 1; k < hull.size(); ++k) {
    if (d <= hull[k].distortion) {
      const auto& a = hull[k - 1];
      const auto& b = hull[k];
      return a.rate + (b.rate - a.rate) * (d - a.distortion) / (b.distortion - a.distortion);
    }
  }
  return hull.back().rate;
}

}  // namespace oisac
