#pragma once

// Two-product simulation design with a discrete instrument, and the
// two-design counterexample function F(s₀).

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "blpid/core.hpp"
#include "blpid/inversion.hpp"
#include "blpid/parallel.hpp"
#include "blpid/share_map.hpp"

namespace blpid {

/// z ~ U{1..5}; p_j = g_j(z) + ϖ_j with g₁(z) = z, g₂(z) = ln z and
/// ϖ ~ N(0, I₂); ξ_j = ϖ_j + ζ with a common ζ ~ N(0, 1); x_j = 1. The
/// only random coefficient is ν ~ N(0, λ²) on price.
struct DgpSpec {
  int markets = 1000;
  std::uint64_t seed = 1;
  double alpha = 1.0;
  double beta = 1.0;
  double lambda = 1.0;
  int nodes = 15;  // Gauss-Hermite nodes for the share integral

  ParamTheta theta() const {
    ParamTheta t;
    t.alpha = alpha;
    t.beta = Vector::Constant(1, beta);
    t.lambda = Vector::Constant(1, lambda);
    return t;
  }

  MixingSpec mixing() const { return MixingSpec::price_coefficient(1, 0, nodes); }
};

inline Vector price_shifters(int z) {
  Vector g(2);
  g << static_cast<double>(z), std::log(static_cast<double>(z));
  return g;
}

/// Dataset plus the values a researcher would not observe.
struct SimulatedData {
  Dataset data;
  std::vector<double> outside_share;
  std::vector<Vector> xi;
};

/// Random stream for market m, independent of scheduling.
inline std::mt19937_64 market_stream(std::uint64_t seed, std::uint64_t m) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(m), static_cast<std::uint32_t>(m >> 32), 0x73696d75u};
  return std::mt19937_64(seq);
}

inline SimulatedData simulate_dataset(const DgpSpec& spec, unsigned threads = 1) {
  if (spec.markets < 1) throw ConfigError("market count must be at least 1");
  if (!(spec.lambda >= 0.0)) throw ConfigError("lambda must be nonnegative");
  const ParamTheta theta = spec.theta();
  const Quadrature q = build_quadrature(spec.mixing(), theta.lambda);
  const auto M = static_cast<std::size_t>(spec.markets);
  std::vector<MarketObservation> markets(M);
  std::vector<double> s0(M);
  std::vector<Vector> xi(M);
  parallel_for(M, threads, [&](std::size_t m) {
    auto rng = market_stream(spec.seed, m);
    std::uniform_int_distribution<int> zdist(1, 5);
    std::normal_distribution<double> normal;
    const int z = zdist(rng);
    const double w1 = normal(rng), w2 = normal(rng), common = normal(rng);
    auto& obs = markets[m];
    obs.market_id = std::to_string(m + 1);
    obs.x = Matrix::Ones(2, 1);
    obs.prices = price_shifters(z) + Vector((Vector(2) << w1, w2).finished());
    obs.z = Vector::Constant(1, static_cast<double>(z));
    xi[m] = (Vector(2) << w1 + common, w2 + common).finished();
    KernelWorkspace ws;
    ShareKernel(q, obs.x, obs.prices).evaluate(mean_utility(theta, obs.x, obs.prices, xi[m]), ws);
    obs.inside_shares = ws.shares / ws.shares.sum();
    s0[m] = ws.outside;
    obs.outside_share_ref = ws.outside;
  });
  return {Dataset(std::move(markets)), std::move(s0), std::move(xi)};
}

namespace detail {
inline double median_of(std::vector<double> v) {
  if (v.empty()) throw DataError("median of an empty sample");
  const auto n = v.size();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (n % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}
}  // namespace detail

/// Componentwise sample medians of s̃, p and x (even counts average the
/// two middle values). The result's outside_share_ref is the median
/// reference share when every market carries one.
inline MarketObservation median_market(const Dataset& data) {
  const auto J = static_cast<Eigen::Index>(data.products());
  const auto dx = static_cast<Eigen::Index>(data.characteristics());
  const auto dz = static_cast<Eigen::Index>(data.instruments());
  MarketObservation out;
  out.market_id = "median";
  out.inside_shares.resize(J);
  out.prices.resize(J);
  out.x.resize(J, dx);
  out.z.resize(dz);
  std::vector<double> buf(data.size());
  auto column = [&](auto get) {
    for (std::size_t i = 0; i < data.size(); ++i) buf[i] = get(data[i]);
    return detail::median_of(buf);
  };
  for (Eigen::Index j = 0; j < J; ++j) {
    out.inside_shares[j] = column([j](const MarketObservation& m) { return m.inside_shares[j]; });
    out.prices[j] = column([j](const MarketObservation& m) { return m.prices[j]; });
    for (Eigen::Index k = 0; k < dx; ++k) out.x(j, k) = column([j, k](const MarketObservation& m) { return m.x(j, k); });
  }
  for (Eigen::Index k = 0; k < dz; ++k) out.z[k] = column([k](const MarketObservation& m) { return m.z[k]; });
  const bool refs = std::all_of(data.markets().begin(), data.markets().end(),
                                [](const MarketObservation& m) { return m.outside_share_ref.has_value(); });
  if (refs) out.outside_share_ref = column([](const MarketObservation& m) { return *m.outside_share_ref; });
  return out;
}

/// F(s₀) = Σ_j (E[σ⁻¹_j(s₀; design A)] + E[σ⁻¹_j(s₀; design B)])² with
/// θ = (0, 0, 1), ξ ~ N(0, I₂) and x = (0, 0) in design A, x = (0, 10) in
/// design B (random coefficient ζ ~ N(0, 1) on x). Draws are fixed at
/// construction so F is a smooth function of s₀ (common random numbers).
class CounterexampleDesign {
 public:
  CounterexampleDesign(int draws, std::uint64_t seed, int nodes = 81, unsigned threads = 1)
      : threads_(threads) {
    if (draws < 1) throw ConfigError("need at least one draw");
    MixingSpec mix;
    mix.family = MixingFamily::kGaussianIndependent;
    mix.zeta_sd_index = {0};
    mix.nodes = nodes;
    const Vector lambda = Vector::Ones(1);
    xb_ = (Matrix(2, 1) << 0.0, 10.0).finished();
    xa_ = Matrix::Zero(2, 1);
    price_ = Vector::Zero(2);
    kernel_b_.emplace(build_quadrature(mix, lambda), xb_, price_);
    kernel_a_.emplace(build_quadrature(MixingSpec::degenerate(), Vector()), xa_, price_);
    tilde_a_.resize(static_cast<std::size_t>(draws));
    tilde_b_.resize(static_cast<std::size_t>(draws));
    warm_.resize(static_cast<std::size_t>(draws));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    for (int d = 0; d < draws; ++d) {
      Vector xi(2);
      xi << normal(rng), normal(rng);
      const double m = xi.maxCoeff();
      Vector e = (xi.array() - m).exp();
      tilde_a_[static_cast<std::size_t>(d)] = e / e.sum();
      KernelWorkspace ws;
      kernel_b_->evaluate(xi, ws);
      tilde_b_[static_cast<std::size_t>(d)] = ws.shares / ws.shares.sum();
      warm_[static_cast<std::size_t>(d)] = xi;
    }
  }

  struct Value {
    double F = kNaN;
    Vector mean_a;
    Vector mean_b;
    int rejected = 0;
  };

  /// Evaluates F at s₀. Draws whose inversion fails in either design are
  /// dropped from both averages.
  Value evaluate(double s0, const InversionOptions& opts = {}) const {
    if (!(s0 > 0.0 && s0 < 1.0)) throw ConfigError("s0 must lie in (0,1)");
    const std::size_t n = tilde_a_.size();
    std::vector<Vector> da(n), db(n);
    std::vector<char> ok(n, 0);
    parallel_for(n, threads_, [&](std::size_t d) {
      try {
        da[d] = invert_sigma(*kernel_a_, assemble_shares(s0, tilde_a_[d]), opts).delta;
        db[d] = invert_sigma(*kernel_b_, assemble_shares(s0, tilde_b_[d]), opts, warm_[d]).delta;
        ok[d] = 1;
      } catch (const NumericalError&) {
      }
    });
    Value v;
    v.mean_a = Vector::Zero(2);
    v.mean_b = Vector::Zero(2);
    int used = 0;
    for (std::size_t d = 0; d < n; ++d) {
      if (!ok[d]) {
        ++v.rejected;
        continue;
      }
      v.mean_a += da[d];
      v.mean_b += db[d];
      ++used;
    }
    if (used == 0) throw NumericalError("every draw failed to invert");
    v.mean_a /= used;
    v.mean_b /= used;
    v.F = (v.mean_a + v.mean_b).squaredNorm();
    return v;
  }

  std::size_t draws() const noexcept { return tilde_a_.size(); }

 private:
  unsigned threads_;
  Matrix xa_, xb_;
  Vector price_;
  std::optional<ShareKernel> kernel_a_, kernel_b_;
  std::vector<Vector> tilde_a_, tilde_b_, warm_;
};

/// F on an evenly spaced s₀ grid, plus the minimizer refined by Brent's
/// method between the neighbours of the best grid point.
struct CounterexampleCurve {
  std::vector<double> s0;
  std::vector<double> F;
  double argmin = kNaN;
  double min = kNaN;
  int rejected = 0;
};

inline CounterexampleCurve counterexample_curve(const CounterexampleDesign& design, double lo, double hi, int points,
                                                bool refine = true, const InversionOptions& opts = {}) {
  if (!(lo > 0.0 && hi < 1.0 && lo < hi) || points < 3) throw ConfigError("need 0 < lo < hi < 1 and points >= 3");
  CounterexampleCurve out;
  std::size_t best = 0;
  for (int k = 0; k < points; ++k) {
    const double s = lo + (hi - lo) * k / (points - 1);
    const auto v = design.evaluate(s, opts);
    out.s0.push_back(s);
    out.F.push_back(v.F);
    out.rejected = std::max(out.rejected, v.rejected);
    if (v.F < out.F[best]) best = static_cast<std::size_t>(k);
  }
  out.argmin = out.s0[best];
  out.min = out.F[best];
  if (!refine) return out;
  const double a = out.s0[best == 0 ? 0 : best - 1];
  const double b = out.s0[std::min(best + 1, out.s0.size() - 1)];
  std::uintmax_t iters = 40;
  const auto r = boost::math::tools::brent_find_minima([&](double s) { return design.evaluate(s, opts).F; }, a, b,
                                                       20, iters);
  if (r.second < out.min) {
    out.argmin = r.first;
    out.min = r.second;
  }
  return out;
}

inline double counterexample_F(double s0, int mc_draws, std::uint64_t seed, int nodes = 81) {
  return CounterexampleDesign(mc_draws, seed, nodes).evaluate(s0).F;
}

}  // namespace blpid
