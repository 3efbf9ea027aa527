#pragma once

// Unconditional moment inequalities E[m(W, v_j, θ) g_j(Z)] ≥ 0, the max
// statistic, self-normalized and multiplier-bootstrap critical values, and
// grid confidence sets.
//
// Sign convention: T_n = max_j √n(−μ̂_j)/σ̂_j, so large values signal a
// violated inequality and C_n = {θ : T_n ≤ c}. `literal_sign` switches to
// max_j √n μ̂_j/σ̂_j.

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "blpid/identified_set.hpp"
#include "blpid/instruments.hpp"

namespace blpid {

/// Ordered (direction, instrument function) pairs.
struct MomentSystem {
  DirectionSet directions;
  InstrumentFunctionSet instruments;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;

  std::size_t size() const noexcept { return pairs.size(); }

  /// Every direction crossed with every unflagged instrument function,
  /// direction-major.
  static MomentSystem cross(DirectionSet dirs, InstrumentFunctionSet g) {
    MomentSystem s{std::move(dirs), std::move(g), {}};
    for (std::size_t d = 0; d < s.directions.size(); ++d)
      for (std::size_t k = 0; k < s.instruments.size(); ++k)
        if (!s.instruments.flagged[k]) s.pairs.emplace_back(d, k);
    if (s.pairs.empty()) throw ConfigError("moment system is empty");
    return s;
  }
};

enum class InfiniteMoment { kCap, kDrop };
enum class CriticalMethod { kSelfNormalized, kMultiplierBootstrap, kTwoStepHybrid };
enum class Multiplier { kGaussian, kRademacher };

struct InferenceOptions {
  double pi = 0.1;
  CriticalMethod method = CriticalMethod::kSelfNormalized;
  int bootstrap_draws = 500;
  std::uint64_t seed = 1;
  Multiplier multiplier = Multiplier::kGaussian;
  InfiniteMoment infinite = InfiniteMoment::kCap;
  double cap = 1e6;
  double min_sd = 1e-10;
  int min_active = 5;
  bool literal_sign = false;
  SupportOptions support;
};

/// Per-moment sample statistics at one θ; `values` holds m_ij g_ij
/// (markets × moments).
struct MomentStats {
  Vector mean;
  Vector sd;  // 1/n normalization
  std::vector<bool> retained;
  std::vector<int> infinite;  // active markets with m = +∞
  Matrix values;
  std::size_t n = 0;

  std::size_t retained_count() const noexcept {
    std::size_t k = 0;
    for (bool r : retained) k += r ? 1 : 0;
    return k;
  }
};

/// Moment statistics from precomputed support data at θ's λ.
inline MomentStats moment_stats(const SupportData& sd, const ParamTheta& theta, const MomentSystem& system,
                                const InferenceOptions& opts = {}) {
  const auto n = sd.h.rows();
  const auto p = static_cast<Eigen::Index>(system.size());
  MomentStats st;
  st.n = static_cast<std::size_t>(n);
  st.values = Matrix::Zero(n, p);
  st.mean = Vector::Zero(p);
  st.sd = Vector::Zero(p);
  st.retained.assign(static_cast<std::size_t>(p), true);
  st.infinite.assign(static_cast<std::size_t>(p), 0);
  for (Eigen::Index j = 0; j < p; ++j) {
    const auto [d, g] = system.pairs[static_cast<std::size_t>(j)];
    const auto& act = system.instruments.active[g];
    int active = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!act[static_cast<std::size_t>(i)]) continue;
      double m = sd.moment(i, d, theta);
      if (std::isnan(m)) {
        st.retained[static_cast<std::size_t>(j)] = false;  // market without a usable inversion
        continue;
      }
      ++active;
      if (std::isinf(m)) {
        ++st.infinite[static_cast<std::size_t>(j)];
        m = opts.cap;
      }
      st.values(i, j) = m;
    }
    if (active < opts.min_active) st.retained[static_cast<std::size_t>(j)] = false;
    if (opts.infinite == InfiniteMoment::kDrop && st.infinite[static_cast<std::size_t>(j)] > 0)
      st.retained[static_cast<std::size_t>(j)] = false;
    const double mu = st.values.col(j).mean();
    const double var = (st.values.col(j).array() - mu).square().mean();
    st.mean[j] = mu;
    st.sd[j] = std::sqrt(var);
    if (!(st.sd[j] >= opts.min_sd)) st.retained[static_cast<std::size_t>(j)] = false;
  }
  return st;
}

inline MomentStats moment_stats(const Dataset& data, const ParamTheta& theta, const MomentSystem& system,
                                const OutsideShareSet& s0set, const MixingSpec& mixing,
                                const InferenceOptions& opts = {}, unsigned threads = 1) {
  const SupportData sd =
      compute_support_data(data, system.directions, theta.lambda, s0set, mixing, opts.support, threads);
  return moment_stats(sd, theta, system, opts);
}

/// max over retained moments of √n(−μ̂_j)/σ̂_j (or +μ̂_j with
/// `literal_sign`); −∞ when nothing is retained.
inline double test_statistic(const Vector& mean, const Vector& sd, std::size_t n, const std::vector<bool>& retained,
                             bool literal_sign = false) {
  double t = -kInf;
  const double rn = std::sqrt(static_cast<double>(n));
  for (Eigen::Index j = 0; j < mean.size(); ++j) {
    if (!retained[static_cast<std::size_t>(j)]) continue;
    const double mu = literal_sign ? mean[j] : -mean[j];
    t = std::max(t, rn * mu / sd[j]);
  }
  return t;
}

inline double test_statistic(const MomentStats& st, bool literal_sign = false) {
  return test_statistic(st.mean, st.sd, st.n, st.retained, literal_sign);
}

/// Standard normal quantile at 1 − tail, accurate for small tails.
inline double normal_upper_quantile(double tail) {
  return boost::math::quantile(boost::math::complement(boost::math::normal(), tail));
}

/// c = q/√(1 − q²/n) with q = Φ⁻¹(1 − π/p_n).
inline double critical_value_sn(double pi, std::size_t p_n, std::size_t n) {
  if (!(pi > 0.0 && pi < 1.0)) throw ConfigError("pi must lie in (0,1)");
  if (p_n < 1 || n < 1) throw ConfigError("need p_n >= 1 and n >= 1");
  const double q = normal_upper_quantile(pi / static_cast<double>(p_n));
  const double ratio = q * q / static_cast<double>(n);
  if (ratio >= 1.0) throw ConfigError("sample too small for the self-normalized critical value");
  return q / std::sqrt(1.0 - ratio);
}

/// Seed for bootstrap replicate b, independent of scheduling.
inline std::seed_seq replicate_seed(std::uint64_t seed, std::uint64_t b) {
  return std::seed_seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                       static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32), 0x6d756c74u};
}

/// (1 − π) quantile of W*_b = max_j n^{-1/2} Σ_i e_i (m_ij g_ij − μ̂_j)/σ̂_j.
/// The quantile is the ⌈(1 − π)B⌉-th order statistic.
inline double critical_value_bootstrap(const MomentStats& st, double pi, int B, std::uint64_t seed,
                                       Multiplier law = Multiplier::kGaussian, unsigned threads = 1) {
  if (B < 100) throw ConfigError("bootstrap needs at least 100 draws");
  if (!(pi > 0.0 && pi < 1.0)) throw ConfigError("pi must lie in (0,1)");
  std::vector<Eigen::Index> keep;
  for (std::size_t j = 0; j < st.retained.size(); ++j)
    if (st.retained[j]) keep.push_back(static_cast<Eigen::Index>(j));
  if (keep.empty()) return kNaN;
  const auto n = st.values.rows();
  Matrix centred(n, static_cast<Eigen::Index>(keep.size()));
  const double rn = std::sqrt(static_cast<double>(n));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const auto j = keep[k];
    centred.col(static_cast<Eigen::Index>(k)) = (st.values.col(j).array() - st.mean[j]) / (st.sd[j] * rn);
  }
  std::vector<double> w(static_cast<std::size_t>(B));
  parallel_for(static_cast<std::size_t>(B), threads, [&](std::size_t b) {
    auto seq = replicate_seed(seed, b);
    std::mt19937_64 rng(seq);
    Vector e(n);
    if (law == Multiplier::kGaussian) {
      std::normal_distribution<double> normal;
      for (Eigen::Index i = 0; i < n; ++i) e[i] = normal(rng);
    } else {
      std::bernoulli_distribution coin(0.5);
      for (Eigen::Index i = 0; i < n; ++i) e[i] = coin(rng) ? 1.0 : -1.0;
    }
    w[b] = (centred.transpose() * e).maxCoeff();
  });
  std::sort(w.begin(), w.end());
  const auto k = static_cast<std::size_t>(std::ceil((1.0 - pi) * B - 1e-9));
  return w[std::clamp<std::size_t>(k, 1, w.size()) - 1];
}

struct TestOutcome {
  double statistic = kNaN;
  double critical = kNaN;
  CriticalMethod method = CriticalMethod::kSelfNormalized;
  bool reject = false;
  MomentStats stats;
};

inline TestOutcome test_theta(const SupportData& sd, const ParamTheta& theta, const MomentSystem& system,
                              const InferenceOptions& opts, unsigned threads = 1) {
  TestOutcome out;
  out.method = opts.method;
  out.stats = moment_stats(sd, theta, system, opts);
  out.statistic = test_statistic(out.stats, opts.literal_sign);
  switch (opts.method) {
    case CriticalMethod::kSelfNormalized:
      // p_n counts the whole system so c does not depend on θ.
      out.critical = critical_value_sn(opts.pi, system.size(), out.stats.n);
      break;
    case CriticalMethod::kMultiplierBootstrap:
      out.critical = critical_value_bootstrap(out.stats, opts.pi, opts.bootstrap_draws, opts.seed, opts.multiplier,
                                              threads);
      break;
    case CriticalMethod::kTwoStepHybrid:
      throw ConfigError("the two-step hybrid critical value is not implemented");
  }
  out.reject = out.statistic > out.critical;
  return out;
}

inline TestOutcome test_theta(const Dataset& data, const ParamTheta& theta, const MomentSystem& system,
                              const OutsideShareSet& s0set, const MixingSpec& mixing, const InferenceOptions& opts,
                              unsigned threads = 1) {
  const SupportData sd =
      compute_support_data(data, system.directions, theta.lambda, s0set, mixing, opts.support, threads);
  return test_theta(sd, theta, system, opts, threads);
}

/// C_n(1 − π) = {θ : T_n(θ) ≤ c_n(θ, π)} over the grid.
inline GridResult confidence_set(const ThetaGrid& grid, const Dataset& data, const MomentSystem& system,
                                 const OutsideShareSet& s0set, const MixingSpec& mixing, const InferenceOptions& opts,
                                 unsigned threads = 1) {
  GridResult out(grid.names());
  const std::size_t block = grid.lambda_block();
  for (std::size_t start = 0; start < grid.size(); start += block) {
    const SupportData sd =
        compute_support_data(data, system.directions, grid.point(start).lambda, s0set, mixing, opts.support, threads);
    out.diagnostics.inversion_failures += sd.grid_failures;
    out.diagnostics.failed_markets += static_cast<int>(sd.failed_markets.size());
    std::vector<TestOutcome> results(block);
    // Bootstrap replicates parallelize internally; otherwise spread points.
    const bool inner = opts.method == CriticalMethod::kMultiplierBootstrap;
    parallel_for(block, inner ? 1 : threads, [&](std::size_t k) {
      results[k] = test_theta(sd, grid.point(start + k), system, opts, inner ? threads : 1);
      results[k].stats.values.resize(0, 0);
    });
    for (std::size_t k = 0; k < block; ++k) {
      const auto& r = results[k];
      out.diagnostics.dropped_moments += static_cast<int>(system.size() - r.stats.retained_count());
      out.add(grid.coordinates(start + k), !r.reject, r.statistic, r.critical);
    }
  }
  out.finalize();
  return out;
}

/// Corollary-style projection: equilibrium-object intervals over the
/// confidence-set members.
inline EquilibriumBounds project_confidence_set(const MarketObservation& market,
                                                const std::vector<ParamTheta>& members,
                                                const OutsideShareSet& s0set, const MixingSpec& mixing, int n_s0,
                                                const ObjectRequest& request = {},
                                                const InversionOptions& opts = {}, unsigned threads = 1) {
  return equilibrium_bounds(market, members, s0set, mixing, n_s0, request, opts, threads);
}

}  // namespace blpid
