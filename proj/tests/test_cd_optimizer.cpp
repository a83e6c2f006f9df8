#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "oisac/cd_optimizer.hpp"

using namespace oisac;

namespace {

// Channel from a dense row-major matrix; bands span the nonzero entries.
QuantizedChannel dense_channel(std::vector<double> xs, std::size_t n_y, std::vector<double> w) {
  std::vector<double> ys(n_y);
  for (std::size_t j = 0; j < n_y; ++j) ys[j] = static_cast<double>(j);
  std::vector<std::size_t> b0(xs.size()), b1(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::size_t first = n_y, last = 0;
    for (std::size_t j = 0; j < n_y; ++j)
      if (w[i * n_y + j] > 0.0) {
        first = std::min(first, j);
        last = j;
      }
    b0[i] = first;
    b1[i] = last + 1;
  }
  return {std::move(xs), std::move(ys), std::move(w), std::move(b0), std::move(b1)};
}

// Direct double sum for I(X; Y) in bits.
double mi_oracle(const std::vector<double>& p, const QuantizedChannel& ch) {
  std::vector<double> q(ch.cols(), 0.0);
  for (std::size_t i = 0; i < ch.rows(); ++i)
    for (std::size_t j = 0; j < ch.cols(); ++j) q[j] += p[i] * ch(i, j);
  double mi = 0.0;
  for (std::size_t i = 0; i < ch.rows(); ++i)
    for (std::size_t j = 0; j < ch.cols(); ++j)
      if (p[i] > 0.0 && ch(i, j) > 0.0) mi += p[i] * ch(i, j) * std::log2(ch(i, j) / q[j]);
  return mi;
}

double binary_entropy(double e) { return -e * std::log2(e) - (1.0 - e) * std::log2(1.0 - e); }

double sup_norm(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

// Default link with the averaged-BCRB cost, built once for the suite.
class DefaultLink : public ::testing::Test {
protected:
  static void SetUpTestSuite() {
    params_ = new SystemParams();
    channel_ = new QuantizedChannel(build_quantized_channel(*params_));
    cost_ = new CostVector(cost_vector(EstimatorKind::bcrb, *params_, MonteCarloConfig{}));
  }
  static void TearDownTestSuite() {
    delete cost_;
    delete channel_;
    delete params_;
  }

  static SystemParams* params_;
  static QuantizedChannel* channel_;
  static CostVector* cost_;
};

SystemParams* DefaultLink::params_ = nullptr;
QuantizedChannel* DefaultLink::channel_ = nullptr;
CostVector* DefaultLink::cost_ = nullptr;

}  // namespace

// ---------------------------------------------------------------------------
// Distributions and CDFs
// ---------------------------------------------------------------------------

TEST(Cdf, PointMassIsAStep) {
  const std::vector<double> grid{0.0, 1.0, 2.0, 3.0};
  const auto cdf = cdf_of(InputDistribution::point_mass(grid, 2));
  EXPECT_EQ(cdf, (std::vector<double>{0.0, 0.0, 1.0, 1.0}));
}

TEST(Cdf, UniformIsALinearStaircase) {
  std::vector<double> grid(121);
  for (std::size_t k = 0; k < grid.size(); ++k) grid[k] = 0.25 * k;
  const auto cdf = cdf_of(InputDistribution::uniform(grid));
  for (std::size_t k = 0; k < cdf.size(); ++k) EXPECT_NEAR(cdf[k], (k + 1) / 121.0, 1e-14);
  EXPECT_NEAR(cdf.back(), 1.0, 1e-10);
}

TEST(Cdf, RandomDistributionsEndAtOne) {
  std::mt19937_64 gen(5);
  std::exponential_distribution<double> e(1.0);
  for (int trial = 0; trial < 50; ++trial) {
    InputDistribution d;
    d.x.resize(200);
    d.p.resize(200);
    double z = 0.0;
    for (std::size_t k = 0; k < 200; ++k) {
      d.x[k] = static_cast<double>(k);
      d.p[k] = e(gen);
      z += d.p[k];
    }
    for (double& v : d.p) v /= z;
    const auto cdf = cdf_of(d);
    for (std::size_t k = 1; k < cdf.size(); ++k) ASSERT_GE(cdf[k], cdf[k - 1]);
    EXPECT_NEAR(cdf.back(), 1.0, 1e-10);
  }
}

// ---------------------------------------------------------------------------
// Mutual information
// ---------------------------------------------------------------------------

TEST(MutualInformation, PointMassCarriesNothing) {
  SystemParams p;
  const auto ch = build_quantized_channel(p);
  EXPECT_NEAR(mutual_information(InputDistribution::point_mass(ch.x_grid(), 40), ch), 0.0, 1e-12);
}

TEST(MutualInformation, NoiselessBinaryChannel) {
  const auto ch = dense_channel({0.0, 1.0}, 2, {1.0, 0.0, 0.0, 1.0});
  EXPECT_NEAR(mutual_information(InputDistribution::uniform(ch.x_grid()), ch), 1.0, 1e-14);
}

TEST(MutualInformation, FourInputsCollapsingToTwoOutputs) {
  const auto ch = dense_channel({0.0, 1.0, 2.0, 3.0}, 2, {1, 0, 1, 0, 0, 1, 0, 1});
  EXPECT_NEAR(mutual_information(InputDistribution::uniform(ch.x_grid()), ch), 1.0, 1e-14);
}

TEST(MutualInformation, MatchesDirectSumOnRandomChannels) {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t nx = 6, ny = 9;
    std::vector<double> w(nx * ny), xs(nx), p(nx);
    for (std::size_t i = 0; i < nx; ++i) {
      xs[i] = static_cast<double>(i);
      double z = 0.0;
      for (std::size_t j = 0; j < ny; ++j) z += (w[i * ny + j] = u(gen));
      for (std::size_t j = 0; j < ny; ++j) w[i * ny + j] /= z;
    }
    double z = 0.0;
    for (double& v : p) z += (v = u(gen));
    for (double& v : p) v /= z;
    const auto ch = dense_channel(xs, ny, w);
    InputDistribution d{xs, p};
    EXPECT_NEAR(mutual_information(d, ch), mi_oracle(p, ch), 1e-12);
  }
}

// ---------------------------------------------------------------------------
// Blahut-Arimoto
// ---------------------------------------------------------------------------

TEST(Baa, BinarySymmetricChannelCapacity) {
  for (double e : {0.01, 0.11, 0.3}) {
    const auto ch = dense_channel({0.0, 1.0}, 2, {1 - e, e, e, 1 - e});
    const std::vector<double> zero(2, 0.0);
    const auto r = baa_inner(ch, zero, 0.0, 0.0, InputDistribution::uniform(ch.x_grid()));
    EXPECT_NEAR(r.rate_bits, 1.0 - binary_entropy(e), 1e-6);
  }
}

TEST(Baa, ZCHannelCapacityMatchesClosedForm) {
  // Z channel with crossover e: C = log2(1 + (1 - e) e^{e / (1 - e)}).
  const double e = 0.25;
  const auto ch = dense_channel({0.0, 1.0}, 2, {1.0, 0.0, e, 1.0 - e});
  const std::vector<double> zero(2, 0.0);
  const auto start = InputDistribution::point_mass(ch.x_grid(), 0);
  const auto r = baa_inner(ch, zero, 0.0, 0.0, start);
  EXPECT_NEAR(r.rate_bits, std::log2(1.0 + (1.0 - e) * std::pow(e, e / (1.0 - e))), 1e-6);
}

TEST_F(DefaultLink, UnconstrainedBracketsClose) {
  BaaOptions opts;
  opts.record_lower_trace = true;
  const std::vector<double> zero(channel_->rows(), 0.0);
  const auto r = baa_inner(*channel_, zero, 0.0, 0.0, InputDistribution::uniform(channel_->x_grid()), opts);
  EXPECT_LE(r.i_lower, r.i_upper);
  EXPECT_LT(r.i_upper - r.i_lower, opts.delta_ba);
  EXPECT_TRUE(r.lower_monotone);
  for (std::size_t k = 1; k < r.lower_trace.size(); ++k) ASSERT_GE(r.lower_trace[k], r.lower_trace[k - 1]);
  EXPECT_NEAR(r.rate_bits, mutual_information(r.distribution, *channel_), 1e-9);
  EXPECT_NEAR(r.rate_bits, r.i_lower, 1e-6);
  r.distribution.validate();
}

TEST_F(DefaultLink, PenalizedBracketsAreMonotone) {
  BaaOptions opts;
  opts.record_lower_trace = true;
  const auto c = cost_->values();
  for (auto [s, t] : {std::pair{0.05, 0.0}, std::pair{0.2, 10.0}, std::pair{1.0, 100.0}}) {
    const auto r = baa_inner(*channel_, c, s, t, InputDistribution::uniform(channel_->x_grid()), opts);
    EXPECT_TRUE(r.lower_monotone) << "s=" << s << " t=" << t;
    EXPECT_LT(r.i_upper - r.i_lower, opts.delta_ba);
    EXPECT_NEAR(r.mean_power, r.distribution.mean(), 1e-12);
    EXPECT_NEAR(r.mean_distortion, r.distribution.expectation(c), 1e-12);
  }
}

TEST_F(DefaultLink, HugeDistortionDualConcentratesOnCheapestInput) {
  const auto c = cost_->values();
  const auto r = baa_inner(*channel_, c, 0.0, 1e6, InputDistribution::uniform(channel_->x_grid()));
  EXPECT_LT(r.distribution.entropy_bits(), 0.1);
  const auto top = std::max_element(r.distribution.p.begin(), r.distribution.p.end()) - r.distribution.p.begin();
  const auto cheapest = std::min_element(c.begin(), c.end()) - c.begin();
  EXPECT_EQ(top, cheapest);
}

TEST_F(DefaultLink, IterationCapRaises) {
  BaaOptions opts;
  opts.max_iter = 3;
  const std::vector<double> zero(channel_->rows(), 0.0);
  EXPECT_THROW(baa_inner(*channel_, zero, 0.0, 0.0, InputDistribution::uniform(channel_->x_grid()), opts),
               ConvergenceError);
}

TEST(Baa, RejectsMisalignedCost) {
  const auto ch = dense_channel({0.0, 1.0}, 2, {1.0, 0.0, 0.0, 1.0});
  const std::vector<double> c(3, 0.0);
  EXPECT_THROW(baa_inner(ch, c, 0.0, 0.0, InputDistribution::uniform(ch.x_grid())), ConfigError);
}

// ---------------------------------------------------------------------------
// Closed-form solver
// ---------------------------------------------------------------------------

TEST_F(DefaultLink, CfaWithoutDualsIsUniform) {
  const auto c = cost_->values();
  const auto d = cfa_dist(channel_->x_grid(), c, 0.0, 0.0);
  for (double v : d.p) EXPECT_NEAR(v, 1.0 / 121.0, 1e-15);
  EXPECT_NEAR(d.entropy_bits(), std::log2(121.0), 1e-12);
  EXPECT_NEAR(std::log2(121.0), 6.918, 1e-3);
}

TEST_F(DefaultLink, CfaPowerDualGivesGeometricDecay) {
  const auto c = cost_->values();
  const double s = 0.3;
  const auto d = cfa_dist(channel_->x_grid(), c, s, 0.0);
  for (std::size_t k = 1; k < d.p.size(); ++k) {
    EXPECT_NEAR(d.p[k] / d.p[k - 1], std::exp(-s * params_->q), 1e-12);
  }
}

TEST_F(DefaultLink, CfaIgnoresConstantCostShift) {
  auto c = cost_->values();
  const auto a = cfa_dist(channel_->x_grid(), c, 0.2, 5.0);
  for (double& v : c) v += 3.25;
  const auto b = cfa_dist(channel_->x_grid(), c, 0.2, 5.0);
  for (std::size_t k = 0; k < a.p.size(); ++k) EXPECT_NEAR(a.p[k], b.p[k], 1e-14);
}

TEST(Cfa, NonFiniteWeightsRaise) {
  const std::vector<double> x{0.0, 1.0};
  const std::vector<double> c{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  EXPECT_THROW(cfa_dist(x, c, 0.0, 1.0), NumericalError);
}

TEST(Cfa, MatchesBaaOnNoiselessChannel) {
  // On an identity channel I(X; Y) = H(X), so both solvers share the optimum.
  const std::size_t n = 12;
  std::vector<double> xs(n), w(n * n, 0.0), c(n);
  for (std::size_t k = 0; k < n; ++k) {
    xs[k] = 0.5 * k;
    w[k * n + k] = 1.0;
    c[k] = 1.0 / (1.0 + k);
  }
  const auto ch = dense_channel(xs, n, w);
  const auto cfa = cfa_dist(xs, c, 0.4, 2.0);
  const auto baa = baa_inner(ch, c, 0.4, 2.0, InputDistribution::uniform(xs));
  EXPECT_LT(sup_norm(cfa.p, baa.distribution.p), 1e-5);
}

// ---------------------------------------------------------------------------
// Endpoints and bounds
// ---------------------------------------------------------------------------

TEST_F(DefaultLink, SensingEndpointOfBcrbCost) {
  const auto ep = sens_opt_endpoint(*cost_, params_->power_budget);
  EXPECT_EQ(ep.x_star, 10.0);
  EXPECT_EQ(ep.d_min, avg_bcrb(10.0, *params_));
  EXPECT_EQ(mutual_information(ep.distribution, *channel_), 0.0);
  EXPECT_EQ(cdf_of(ep.distribution)[ep.index], 1.0);
  EXPECT_EQ(cdf_of(ep.distribution)[ep.index - 1], 0.0);
}

TEST_F(DefaultLink, ConstantCostTiesBreakTowardBudget) {
  const std::vector<double> flat(channel_->rows(), 1.5);
  const auto cv = make_cost_vector(std::vector<double>(channel_->x_grid().begin(), channel_->x_grid().end()), flat);
  EXPECT_EQ(sens_opt_endpoint(cv, 10.0).x_star, 10.0);
}

TEST(Endpoint, NoFeasibleGridPointRaises) {
  const std::vector<double> c{1.0, 2.0};
  EXPECT_THROW(sens_opt_endpoint(make_cost_vector({5.0, 6.0}, c), 1.0), ConfigError);
}

TEST(CapacityBounds, ReferenceLevels) {
  const auto b = capacity_bounds(10.0, 1.0, 1.0);
  EXPECT_NEAR(b.upper, 4.7646, 1e-3);
  // Lower bound evaluated term by term in base 2.
  const double a = 10.0;
  const double oracle = 0.5 * std::log2(a) - std::sqrt(std::numbers::pi / (2.0 * a)) / std::log(2.0) +
                        0.5 * std::log2(1.0 + 2.0 / a) +
                        (std::sqrt(a * (2.0 + a)) - a - 1.0) / std::log(2.0);
  EXPECT_NEAR(b.lower, oracle, 1e-12);
  EXPECT_NEAR(b.lower, 1.155, 1e-3);
  EXPECT_LT(b.lower, b.upper);
}

TEST(CapacityBounds, DomainChecks) {
  EXPECT_THROW(capacity_bounds(0.0, 1.0, 1.0), DomainError);
  EXPECT_THROW(capacity_bounds(10.0, 1.0, 0.0), DomainError);
}

// ---------------------------------------------------------------------------
// Dual power search
// ---------------------------------------------------------------------------

TEST(LearningRate, PositiveAndIncreasingTowardEta0) {
  double prev = 0.0;
  for (std::size_t i = 0; i < 20; ++i) {
    const double eta = learning_rate(1.0, 20.0, i);
    // Once gamma 0.1^i drops below half an ulp the rate is exactly eta0.
    if (i < 15) EXPECT_GT(eta, prev) << "i=" << i;
    else EXPECT_GE(eta, prev) << "i=" << i;
    EXPECT_LE(eta, 1.0);
    prev = eta;
  }
  EXPECT_NEAR(prev, 1.0, 1e-15);
}

TEST_F(DefaultLink, CommunicationOptimalPoint) {
  const DualSearchOptions opts;
  const auto pt = dual_power_search(0.0, SolverKind::baa, *channel_, *cost_, params_->power_budget, opts);
  EXPECT_NEAR(pt.mean_power, 10.0, opts.delta_b);
  EXPECT_NEAR(pt.rate_bits, 2.8157, 0.05);
  EXPECT_GT(pt.s_star, 0.0);
  const auto b = capacity_bounds(10.0, 1.0, 1.0);
  EXPECT_LT(b.lower, pt.rate_bits);
  EXPECT_LT(pt.rate_bits, b.upper);
}

TEST_F(DefaultLink, SlackBudgetKeepsZeroPowerDual) {
  // A cost whose cheapest point lies inside the budget: at large t the
  // optimum is that point mass and the power constraint is inactive.
  std::vector<double> c(channel_->rows());
  for (std::size_t k = 0; k < c.size(); ++k) c[k] = std::abs(channel_->x_grid()[k] - 4.0) + 0.1;
  const auto cv = make_cost_vector(std::vector<double>(channel_->x_grid().begin(), channel_->x_grid().end()), c);
  const auto pt = dual_power_search(1e6, SolverKind::baa, *channel_, cv, 10.0);
  EXPECT_EQ(pt.s_star, 0.0);
  EXPECT_LE(pt.mean_power, 10.0);
  EXPECT_NEAR(pt.mean_power, 4.0, 1e-6);
}

TEST_F(DefaultLink, RateGrowsWithBudget) {
  for (double t : {0.0, 10.0}) {
    double prev = -1.0;
    for (double P : {5.0, 10.0, 20.0}) {
      const auto pt = dual_power_search(t, SolverKind::baa, *channel_, *cost_, P);
      EXPECT_GE(pt.rate_bits, prev) << "t=" << t << " P=" << P;
      EXPECT_LE(pt.mean_power, P + 1e-3);
      prev = pt.rate_bits;
    }
  }
}

TEST_F(DefaultLink, SearchRejectsBadTolerance) {
  DualSearchOptions opts;
  opts.delta_b = 0.0;
  EXPECT_THROW(dual_power_search(0.0, SolverKind::cfa, *channel_, *cost_, 10.0, opts), ConfigError);
}

// ---------------------------------------------------------------------------
// Region
// ---------------------------------------------------------------------------

namespace {

// Each point meets the budget only to within delta_b. At very large t that
// slack lets a few thousandths of mass sit one grid step away from the point
// mass, which moves D by ~1e-5 relative and the rate by a few hundredths of a
// bit, so monotonicity in t is asserted tightly only for a tight delta_b,
// and then to the accuracy of the inner solver.
struct MonotoneSlack {
  double d_rel = 1e-8;
  double rate_bits = 1e-9;
};

MonotoneSlack slack_for(const DualSearchOptions& opts) {
  if (opts.delta_b <= 1e-6) return {1e-8, opts.baa.delta_ba};
  return {1e-4, 0.05};
}

void expect_region_properties(const std::vector<RegionPoint>& region, double P, const DualSearchOptions& opts) {
  const MonotoneSlack slack = slack_for(opts);
  std::vector<RegionPoint> by_t = region;
  std::sort(by_t.begin(), by_t.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
  for (std::size_t k = 0; k < by_t.size(); ++k) {
    const auto& pt = by_t[k];
    ASSERT_TRUE(pt.ok) << pt.message;
    EXPECT_LE(pt.mean_power, P + opts.delta_b) << "t=" << pt.t;
    EXPECT_GE(pt.distortion, 0.0);
    EXPECT_GE(pt.rate_bits, 0.0);
    if (pt.s_star > 0.0) EXPECT_LT(std::abs(pt.mean_power - P), opts.delta_b) << "t=" << pt.t;
    else EXPECT_LE(pt.mean_power, P);
    if (k > 0) {
      EXPECT_LE(pt.distortion, by_t[k - 1].distortion * (1.0 + slack.d_rel)) << "t=" << pt.t;
      EXPECT_LE(pt.rate_bits, by_t[k - 1].rate_bits + slack.rate_bits) << "t=" << pt.t;
    }
  }
  for (std::size_t k = 1; k < region.size(); ++k) EXPECT_LE(region[k - 1].distortion, region[k].distortion);

  std::vector<RatePoint> raw;
  for (const auto& pt : region) raw.push_back({pt.distortion, pt.rate_bits});
  const auto hull = concave_envelope(raw);
  for (const auto& r : raw) EXPECT_GE(envelope_at(hull, r.distortion), r.rate - 1e-12);
}

}  // namespace

TEST_F(DefaultLink, BaaRegionProperties) {
  const std::vector<double> ts{0.0, 0.1, 1.0, 3.0, 10.0, 100.0, 1e3, 1e4, 1e6};
  const DualSearchOptions opts;
  const auto region = cd_region(ts, SolverKind::baa, *channel_, *cost_, params_->power_budget, opts);
  ASSERT_EQ(region.size(), ts.size());
  expect_region_properties(region, params_->power_budget, opts);
  // Largest t approaches the sensing-optimal endpoint.
  const auto ep = sens_opt_endpoint(*cost_, params_->power_budget);
  EXPECT_NEAR(region.front().distortion, ep.d_min, 1e-3 * ep.d_min);
  EXPECT_LT(region.front().rate_bits, 0.1);
}

TEST_F(DefaultLink, CfaRegionProperties) {
  const auto ts = default_t_set();
  ASSERT_EQ(ts.size(), 41u);
  EXPECT_EQ(ts.front(), 0.0);
  EXPECT_NEAR(ts[1], 1e-2, 1e-15);
  EXPECT_NEAR(ts.back(), 1e6, 1e-6);
  const DualSearchOptions opts;
  const auto region = cd_region(ts, SolverKind::cfa, *channel_, *cost_, params_->power_budget, opts);
  expect_region_properties(region, params_->power_budget, opts);
  const auto b = capacity_bounds(10.0, 1.0, 1.0);
  const auto com = std::max_element(region.begin(), region.end(),
                                    [](const auto& a, const auto& c) { return a.rate_bits < c.rate_bits; });
  EXPECT_GE(com->rate_bits, b.lower);
  EXPECT_LE(com->rate_bits, b.upper);
}

TEST_F(DefaultLink, TightPowerToleranceGivesExactMonotonicity) {
  DualSearchOptions opts;
  opts.delta_b = 1e-8;
  for (auto solver : {SolverKind::cfa, SolverKind::baa}) {
    const std::vector<double> ts = solver == SolverKind::cfa ? default_t_set()
                                                             : std::vector<double>{0.0, 1.0, 100.0, 1e4, 1e5, 3e5, 1e6};
    const auto region = cd_region(ts, solver, *channel_, *cost_, params_->power_budget, opts);
    expect_region_properties(region, params_->power_budget, opts);
  }
}

TEST_F(DefaultLink, RegionIsIndependentOfThreadCount) {
  const std::vector<double> ts{0.0, 1.0, 10.0, 1e3};
  const auto a = cd_region(ts, SolverKind::cfa, *channel_, *cost_, 10.0, {}, 1);
  const auto b = cd_region(ts, SolverKind::cfa, *channel_, *cost_, 10.0, {}, 3);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].rate_bits, b[k].rate_bits);
    EXPECT_EQ(a[k].distortion, b[k].distortion);
    EXPECT_EQ(a[k].s_star, b[k].s_star);
  }
}

TEST_F(DefaultLink, RegionValidatesTheSweep) {
  const std::vector<double> unsorted{1.0, 0.5};
  EXPECT_THROW(cd_region(unsorted, SolverKind::cfa, *channel_, *cost_, 10.0), ConfigError);
  const std::vector<double> empty;
  EXPECT_THROW(cd_region(empty, SolverKind::cfa, *channel_, *cost_, 10.0), ConfigError);
}

TEST(Region, SolversAgreeAtHighOpticalSnr) {
  SystemParams p;
  p.sigma_c2 = 1e-3;
  const auto ch = build_quantized_channel(p);
  const auto cost = cost_vector(EstimatorKind::bcrb, p, MonteCarloConfig{});
  const auto c = cost.values();
  // Same duals fed to both inner solvers.
  for (auto [s, t] : {std::pair{0.0, 0.0}, std::pair{0.1, 1.0}, std::pair{0.3, 30.0}, std::pair{1.0, 1e3}}) {
    const auto baa = solve_inner(SolverKind::baa, ch, c, s, t, InputDistribution::uniform(ch.x_grid()), {});
    const auto cfa = solve_inner(SolverKind::cfa, ch, c, s, t, InputDistribution::uniform(ch.x_grid()), {});
    EXPECT_LT(std::abs(baa.rate - cfa.rate), 0.02) << "s=" << s << " t=" << t;
  }
  // Whole sweep, each solver finding its own power dual.
  const auto ts = default_t_set();
  auto by_t = [](std::vector<RegionPoint> v) {
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
    return v;
  };
  const auto baa = by_t(cd_region(ts, SolverKind::baa, ch, cost, p.power_budget));
  const auto cfa = by_t(cd_region(ts, SolverKind::cfa, ch, cost, p.power_budget));
  for (std::size_t k = 0; k < ts.size(); ++k) {
    EXPECT_LT(std::abs(baa[k].rate_bits - cfa[k].rate_bits), 0.02) << "t=" << ts[k];
  }
}

TEST_F(DefaultLink, SolversAgreeOnCommonDistortions) {
  const auto ts = default_t_set();
  const auto baa = cd_region(ts, SolverKind::baa, *channel_, *cost_, params_->power_budget);
  const auto cfa = cd_region(ts, SolverKind::cfa, *channel_, *cost_, params_->power_budget);
  std::vector<RatePoint> rb, rc;
  for (const auto& pt : baa) rb.push_back({pt.distortion, pt.rate_bits});
  for (const auto& pt : cfa) rc.push_back({pt.distortion, pt.rate_bits});
  const auto hb = concave_envelope(rb);
  const auto hc = concave_envelope(rc);
  const double lo = std::max(hb.front().distortion, hc.front().distortion);
  const double hi = std::min(hb.back().distortion, hc.back().distortion);
  for (int k = 0; k <= 200; ++k) {
    const double d = lo * std::pow(hi / lo, k / 200.0);
    EXPECT_LE(std::abs(envelope_at(hb, d) - envelope_at(hc, d)), 0.05) << "D=" << d;
  }
}

TEST_F(DefaultLink, IsacCdfsAgreeAcrossSolvers) {
  const auto baa = dual_power_search(10.0, SolverKind::baa, *channel_, *cost_, params_->power_budget);
  const auto cfa = dual_power_search(10.0, SolverKind::cfa, *channel_, *cost_, params_->power_budget);
  EXPECT_LE(sup_norm(cdf_of(baa.distribution), cdf_of(cfa.distribution)), 0.05);
}

// ---------------------------------------------------------------------------
// Envelope
// ---------------------------------------------------------------------------

TEST(Envelope, DominatesEveryRawPoint) {
  std::mt19937_64 gen(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<RatePoint> pts(30);
    for (auto& p : pts) p = {u(gen), u(gen)};
    const auto hull = concave_envelope(pts);
    for (std::size_t k = 1; k < hull.size(); ++k) ASSERT_GT(hull[k].distortion, hull[k - 1].distortion);
    for (const auto& p : pts) EXPECT_GE(envelope_at(hull, p.distortion), p.rate - 1e-12);
  }
}

TEST(Envelope, LinearInterpolationBetweenVertices) {
  const std::vector<RatePoint> hull = concave_envelope({{0.0, 0.0}, {1.0, 1.0}, {3.0, 2.0}});
  EXPECT_NEAR(envelope_at(hull, 0.5), 0.5, 1e-15);
  EXPECT_NEAR(envelope_at(hull, 2.0), 1.5, 1e-15);
  EXPECT_EQ(envelope_at(hull, 10.0), 2.0);
}
