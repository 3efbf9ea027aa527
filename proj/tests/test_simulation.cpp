#include <gtest/gtest.h>

#include <algorithm>

#include "support.hpp"

using namespace blpid;
using namespace blpid::testing;

TEST(Simulation, PriceShifters) {
  const Vector g = price_shifters(3);
  EXPECT_EQ(g[0], 3.0);
  EXPECT_NEAR(g[1], 1.0986122886681098, 1e-15);
}

TEST(Simulation, LambdaZeroIsPlainLogit) {
  DgpSpec spec;
  spec.markets = 200;
  spec.lambda = 0.0;
  const auto sim = simulate_dataset(spec);
  for (std::size_t i = 0; i < sim.data.size(); ++i) {
    const auto& m = sim.data[i];
    const Vector e = (1.0 - m.prices.array() + sim.xi[i].array()).exp();
    const double den = 1.0 + e.sum();
    EXPECT_NEAR(sim.outside_share[i], 1.0 / den, 1e-14);
    EXPECT_NEAR(m.inside_shares[0], e[0] / e.sum(), 1e-14);
    EXPECT_NEAR(m.inside_shares[1], e[1] / e.sum(), 1e-14);
  }
}

TEST(Simulation, DeterministicInSeedAndThreads) {
  DgpSpec spec;
  spec.markets = 500;
  spec.seed = 42;
  const auto a = simulate_dataset(spec, 1), b = simulate_dataset(spec, 3);
  spec.seed = 43;
  const auto c = simulate_dataset(spec, 1);
  bool differs = false;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    EXPECT_EQ(a.data[i].inside_shares, b.data[i].inside_shares);
    EXPECT_EQ(a.data[i].prices, b.data[i].prices);
    EXPECT_EQ(a.outside_share[i], b.outside_share[i]);
    differs = differs || a.data[i].prices != c.data[i].prices;
  }
  EXPECT_TRUE(differs);
}

TEST(Simulation, InversionRecoversTheStoredShocks) {
  DgpSpec spec;
  spec.markets = 300;
  const auto sim = simulate_dataset(spec);
  for (std::size_t i = 0; i < sim.data.size(); ++i) {
    const auto& m = sim.data[i];
    const Vector xi = demand_shocks(assemble_shares(sim.outside_share[i], m.inside_shares), m.x, m.prices,
                                    spec.theta(), spec.mixing());
    EXPECT_LT((xi - sim.xi[i]).cwiseAbs().maxCoeff(), 1e-8) << i;
  }
}

TEST(Simulation, EndogeneityAndInstrumentExogeneity) {
  DgpSpec spec;
  spec.markets = 100000;
  spec.seed = 3;
  const auto sim = simulate_dataset(spec);
  const auto M = static_cast<double>(spec.markets);
  for (int j = 0; j < 2; ++j) {
    double mx = 0, mp = 0;
    for (std::size_t i = 0; i < sim.data.size(); ++i) {
      mx += sim.xi[i][j];
      mp += sim.data[i].prices[j];
    }
    mx /= M;
    mp /= M;
    // cov(ξ_j, p_j) = var(ϖ_j) = 1; each product term has variance
    // var(ξ)var(p) + cov² = 2·var(p) + 1.
    double cov = 0, vp = 0;
    std::vector<double> cell_sum(5, 0.0), cell_sq(5, 0.0);
    std::vector<int> cell_n(5, 0);
    for (std::size_t i = 0; i < sim.data.size(); ++i) {
      const double dx = sim.xi[i][j] - mx, dp = sim.data[i].prices[j] - mp;
      cov += dx * dp;
      vp += dp * dp;
      const auto c = static_cast<std::size_t>(sim.data[i].z[0]) - 1;
      cell_sum[c] += sim.xi[i][j];
      cell_sq[c] += sim.xi[i][j] * sim.xi[i][j];
      ++cell_n[c];
    }
    cov /= M;
    vp /= M;
    EXPECT_NEAR(cov, 1.0, 3.0 * std::sqrt((2.0 * vp + 1.0) / M)) << j;
    for (std::size_t c = 0; c < 5; ++c) {
      const double mean = cell_sum[c] / cell_n[c];
      const double sd = std::sqrt(cell_sq[c] / cell_n[c] - mean * mean);
      EXPECT_NEAR(mean, 0.0, 3.0 * sd / std::sqrt(cell_n[c])) << j << ' ' << c;
    }
  }
}

TEST(MedianMarket, MatchesSortOracle) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  for (int size : {1, 2, 7, 10, 31}) {
    std::vector<double> v(static_cast<std::size_t>(size));
    for (auto& x : v) x = n(rng);
    std::vector<double> s = v;
    std::sort(s.begin(), s.end());
    const double oracle = size % 2 ? s[s.size() / 2] : 0.5 * (s[s.size() / 2 - 1] + s[s.size() / 2]);
    EXPECT_EQ(detail::median_of(v), oracle) << size;
  }
  EXPECT_THROW(detail::median_of({}), DataError);
}

TEST(MedianMarket, SingleMarketIsItself) {
  const Dataset one({toy_dataset()[1]});
  const auto m = median_market(one);
  EXPECT_EQ(m.inside_shares, one[0].inside_shares);
  EXPECT_EQ(m.prices, one[0].prices);
  EXPECT_EQ(*m.outside_share_ref, 0.45);
}

TEST(MedianMarket, EvenCountAveragesTheMiddlePair) {
  const Dataset d = toy_dataset();
  const Dataset two({d[0], d[2]});
  const auto m = median_market(two);
  EXPECT_NEAR(m.inside_shares[0], 0.30, 1e-15);
  EXPECT_NEAR(m.prices[0], 3.0, 1e-15);
  EXPECT_NEAR(m.prices[1], 1.1, 1e-15);
}

TEST(MedianMarket, LargeSampleMatchesPrintedValues) {
  DgpSpec spec;
  spec.markets = 100000;
  const auto m = median_market(simulate_dataset(spec).data);
  EXPECT_NEAR(m.inside_shares[0], 0.3211, 0.02);
  EXPECT_NEAR(m.inside_shares[1], 0.6789, 0.02);
  EXPECT_NEAR(m.prices[0], 2.9925, 0.02);
  EXPECT_NEAR(m.prices[1], 0.972, 0.02);
}

TEST(Counterexample, DesignAIsClosedFormLogit) {
  // Design A is plain logit with δ = ξ, so σ⁻¹_j = ln s̃_j + ln((1 − s₀)/s₀)
  // draw by draw, and the design-A mean is E[ln s̃_j] + ln((1 − s₀)/s₀).
  const int draws = 5000;
  const CounterexampleDesign design(draws, 9, 21);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n;
  Vector mean_log = Vector::Zero(2);
  for (int d = 0; d < draws; ++d) {
    const double a = n(rng), b = n(rng);
    const double lse = std::max(a, b) + std::log1p(std::exp(-std::abs(a - b)));
    mean_log[0] += a - lse;
    mean_log[1] += b - lse;
  }
  mean_log /= draws;
  for (double s0 : {0.2, 0.4}) {
    const auto v = design.evaluate(s0);
    EXPECT_EQ(v.rejected, 0);
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(v.mean_a[j], mean_log[j] + std::log((1 - s0) / s0), 1e-10);
    EXPECT_NEAR(v.F, (v.mean_a + v.mean_b).squaredNorm(), 1e-15);
    EXPECT_GE(v.F, 0.0);
  }
  EXPECT_THROW(design.evaluate(1.0), ConfigError);
}

TEST(Counterexample, CurveRefinementFindsALocalMinimum) {
  const CounterexampleDesign design(2000, 1, 41);
  const auto c = counterexample_curve(design, 0.1, 0.5, 9);
  ASSERT_EQ(c.F.size(), 9u);
  EXPECT_LE(c.min, *std::min_element(c.F.begin(), c.F.end()));
  EXPECT_NEAR(design.evaluate(c.argmin).F, c.min, 1e-12);
  const double h = 1e-3;
  EXPECT_LE(c.min, design.evaluate(c.argmin - h).F);
  EXPECT_LE(c.min, design.evaluate(c.argmin + h).F);
  EXPECT_THROW(counterexample_curve(design, 0.5, 0.1, 9), ConfigError);
}
