#pragma once

// Support moments m(W, v, θ) = sup_{s₀∈S₀} v'ξ(s₀; θ), their conditional
// means over z-cells, membership of θ and the grid identified set.
//
// ξ(s₀; θ) = δ(s₀; λ) − xβ + αp, where δ(s₀; λ) inverts σ at (s₀, s̃(1−s₀)).
// The maximizing s₀ only depends on λ, so for each λ we store
// h(v) = sup v'δ(s₀) per market and direction, and every (α, β) sharing that
// λ reuses it: m = h − β'(x'v) + α v'p.

#include <boost/math/tools/minima.hpp>

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "blpid/core.hpp"
#include "blpid/directions.hpp"
#include "blpid/grid_result.hpp"
#include "blpid/inversion.hpp"
#include "blpid/parallel.hpp"
#include "blpid/share_map.hpp"

namespace blpid {

struct SupportOptions {
  int grid_points = 51;      // log-odds spaced s₀ grid on the clipped interval
  bool refine = true;        // Brent refinement around the best grid point
  double refine_tol = 1e-6;  // in s₀
  // Report +∞ when the best grid value sits at an endpoint where the nominal
  // S₀ reaches 0 or 1, the last three grid values increase towards it, and
  // the outward slope per unit log-odds is at least this.
  double divergence_slope = 1e-2;
  InversionOptions inversion;
};

struct SupportMomentResult {
  double value = -kInf;  // +∞ marks divergence
  double argmax = kNaN;
  int iterations = 0;

  bool infinite() const noexcept { return std::isinf(value) && value > 0.0; }
};

namespace detail {
inline double logit(double s) { return std::log(s) - std::log1p(-s); }
inline double inv_logit(double t) { return t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t)); }
}  // namespace detail

/// δ(s₀) for one market at one λ, tabulated on a log-odds grid over the
/// clipped S₀. Grid points whose inversion fails are marked invalid.
class ShockCurve {
 public:
  ShockCurve(const MarketObservation& market, ShareInterval interval, ShareKernel kernel,
             const SupportOptions& opts = {})
      : tilde_(market.inside_shares), interval_(interval), kernel_(std::move(kernel)), opts_(opts) {
    const int n = interval.singleton() ? 1 : opts.grid_points;
    if (n < 1 || (!interval.singleton() && n < 2)) throw ConfigError("s0 grid needs at least 2 points");
    t_.resize(n);
    s0_.resize(n);
    delta_.resize(n, tilde_.size());
    valid_.assign(static_cast<std::size_t>(n), false);
    const double t0 = detail::logit(interval.lo), t1 = detail::logit(interval.hi);
    std::optional<Vector> warm;
    Vector prev, prev2;
    int solved = 0;
    for (int k = 0; k < n; ++k) {
      t_[k] = n == 1 ? t0 : t0 + (t1 - t0) * k / (n - 1);
      s0_[k] = k == 0 ? interval.lo : (k == n - 1 ? interval.hi : detail::inv_logit(t_[k]));
      // Linear extrapolation from the two previous solutions.
      if (solved >= 2)
        warm = Vector(2.0 * prev - prev2);
      else if (solved == 1)
        warm = prev;
      try {
        auto r = invert_sigma(kernel_, assemble_shares(s0_[k], tilde_), opts_.inversion, warm);
        iterations_ += r.iterations;
        delta_.row(k) = r.delta.transpose();
        valid_[k] = true;
        prev2 = prev;
        prev = r.delta;
        ++solved;
      } catch (const NumericalError&) {
        ++failures_;
      }
    }
    if (solved == 0) throw NumericalError("share inversion failed at every s0 grid point");
  }

  const Vector& s0() const noexcept { return s0_; }
  const Vector& log_odds() const noexcept { return t_; }
  const Matrix& delta() const noexcept { return delta_; }
  bool valid(Eigen::Index k) const { return valid_[static_cast<std::size_t>(k)]; }
  const ShareInterval& interval() const noexcept { return interval_; }
  const ShareKernel& kernel() const noexcept { return kernel_; }
  int failures() const noexcept { return failures_; }
  long iterations() const noexcept { return iterations_; }

  /// Inverts at an off-grid s₀, warm-started from `warm`.
  InversionResult delta_at(double s0, const Vector& warm) const {
    return invert_sigma(kernel_, assemble_shares(s0, tilde_), opts_.inversion, warm);
  }

  /// sup over S₀ of v'δ(s₀).
  SupportMomentResult sup(const Vector& v) const {
    const Eigen::Index n = t_.size();
    SupportMomentResult out;
    Vector g(n);
    Eigen::Index best = -1;
    for (Eigen::Index k = 0; k < n; ++k) {
      g[k] = valid_[static_cast<std::size_t>(k)] ? v.dot(delta_.row(k).transpose()) : -kInf;
      if (valid_[static_cast<std::size_t>(k)] && (best < 0 || g[k] > g[best])) best = k;
    }
    out.value = g[best];
    out.argmax = s0_[best];
    if (n < 3) return out;

    auto rising = [&](Eigen::Index a, Eigen::Index b, Eigen::Index c) {
      return valid(a) && valid(b) && valid(c) && g[a] > g[b] && g[b] > g[c] &&
             (g[a] - g[b]) / std::abs(t_[a] - t_[b]) >= opts_.divergence_slope;
    };
    if ((best == 0 && interval_.open_low && rising(0, 1, 2)) ||
        (best == n - 1 && interval_.open_high && rising(n - 1, n - 2, n - 3))) {
      out.value = kInf;
      return out;
    }
    if (!opts_.refine) return out;

    double lo, hi;
    if (best > 0 && best < n - 1) {
      lo = t_[best - 1];
      hi = t_[best + 1];
    } else {
      // Endpoint maximum: refine only if the quadratic through the three
      // end grid values rises inward, and a probe just inside confirms it.
      const Eigen::Index inner = best == 0 ? 1 : n - 2;
      const Eigen::Index third = best == 0 ? 2 : n - 3;
      if (!valid(inner) || !valid(third)) return out;
      const double h1 = t_[inner] - t_[best], h2 = t_[third] - t_[best];
      const double d1 = (g[inner] - g[best]) / h1, d2 = (g[third] - g[best]) / h2;
      const double slope_at_end = d1 - (d2 - d1) / (h2 - h1) * h1;  // derivative of the quadratic at t_best
      if (!(slope_at_end * h1 > 0.0)) return out;
      const double probe = t_[best] + 1e-3 * (t_[inner] - t_[best]);
      const double val = objective(v, probe, best, out.iterations);
      if (!(val > g[best])) return out;
      lo = std::min(t_[best], t_[inner]);
      hi = std::max(t_[best], t_[inner]);
    }
    const double s_mid = detail::inv_logit(t_[best]);
    const double t_tol = opts_.refine_tol / std::max(s_mid * (1.0 - s_mid), 1e-12);
    const int bits = std::clamp(static_cast<int>(std::ceil(-std::log2(t_tol / std::max(1.0, std::abs(t_[best]))))) + 1, 8, 50);
    std::uintmax_t max_iter = 200;
    int used = 0;
    const auto r = boost::math::tools::brent_find_minima(
        [&](double t) { return -objective(v, t, best, used); }, lo, hi, bits, max_iter);
    out.iterations += used;
    if (-r.second > out.value) {
      out.value = -r.second;
      out.argmax = detail::inv_logit(r.first);
    }
    return out;
  }

 private:
  double objective(const Vector& v, double t, Eigen::Index near, int& iterations) const {
    try {
      const auto r = delta_at(detail::inv_logit(t), delta_.row(near).transpose());
      iterations += r.iterations;
      return v.dot(r.delta);
    } catch (const NumericalError&) {
      return -kInf;
    }
  }

  Vector tilde_;
  ShareInterval interval_;
  ShareKernel kernel_;
  SupportOptions opts_;
  Vector t_;
  Vector s0_;
  Matrix delta_;
  std::vector<bool> valid_;
  int failures_ = 0;
  long iterations_ = 0;
};

/// ξ(s₀) = σ⁻¹((s₀, s̃(1−s₀))) − (xβ − αp).
inline Vector residual(const MarketObservation& market, double s0, const ParamTheta& theta,
                       const MixingSpec& mixing, const InversionOptions& opts = {}) {
  if (!(s0 > 0.0 && s0 < 1.0)) throw ConfigError("s0 must lie in (0,1)");
  return demand_shocks(assemble_shares(s0, market.inside_shares), market.x, market.prices, theta, mixing, opts);
}

/// m(W, v, θ) for one market.
inline SupportMomentResult support_moment(const MarketObservation& market, const Vector& v, const ParamTheta& theta,
                                          const OutsideShareSet& s0set, const MixingSpec& mixing,
                                          const SupportOptions& opts = {}) {
  const ShockCurve curve(market, s0set.interval_for(market),
                         ShareKernel(build_quadrature(mixing, theta.lambda), market.x, market.prices), opts);
  auto r = curve.sup(v);
  if (!r.infinite()) r.value += -v.dot(market.x * theta.beta) + theta.alpha * v.dot(market.prices);
  return r;
}

/// Assignment of markets to conditioning cells.
struct CellPartition {
  std::vector<int> cell_of;  // per market
  int cells = 0;
  std::vector<std::string> labels;

  static CellPartition single(std::size_t markets) {
    return {std::vector<int>(markets, 0), 1, {"all"}};
  }

  /// One cell per distinct value of instrument column `column`.
  static CellPartition exact(const Dataset& data, std::size_t column) {
    if (column >= data.instruments()) throw ConfigError("grouping column beyond the instrument count");
    std::map<double, int> index;
    for (const auto& m : data.markets()) index.emplace(m.z[static_cast<Eigen::Index>(column)], 0);
    CellPartition p;
    for (auto& [value, id] : index) {
      id = p.cells++;
      char buf[64];
      std::snprintf(buf, sizeof buf, "z%zu=%.17g", column + 1, value);
      p.labels.emplace_back(buf);
    }
    for (const auto& m : data.markets()) p.cell_of.push_back(index.at(m.z[static_cast<Eigen::Index>(column)]));
    return p;
  }
};

/// Per-market, per-direction pieces of the support moment at one λ:
/// m_id(α, β) = h(i,d) − β'xv[d].row(i) + α pv(i,d).
struct SupportData {
  Vector lambda;
  Matrix h;                 // markets × directions, +∞ on divergence
  std::vector<Matrix> xv;   // per direction: markets × d_X, rows x_i'v
  Matrix pv;                // markets × directions
  int grid_failures = 0;    // s₀ grid points whose inversion failed
  std::vector<int> failed_markets;  // markets with no usable curve (h = NaN)

  double moment(Eigen::Index i, std::size_t d, const ParamTheta& theta) const {
    const double hv = h(i, static_cast<Eigen::Index>(d));
    if (std::isinf(hv)) return hv;
    return hv - xv[d].row(i).dot(theta.beta) + theta.alpha * pv(i, static_cast<Eigen::Index>(d));
  }
};

inline SupportData compute_support_data(const Dataset& data, const DirectionSet& dirs, const Vector& lambda,
                                        const OutsideShareSet& s0set, const MixingSpec& mixing,
                                        const SupportOptions& opts = {}, unsigned threads = 1) {
  if (dirs.products() != static_cast<Eigen::Index>(data.products()))
    throw ConfigError("directions and dataset disagree on J");
  const auto M = static_cast<Eigen::Index>(data.size());
  const auto D = dirs.size();
  const Quadrature q = build_quadrature(mixing, lambda);
  SupportData out;
  out.lambda = lambda;
  out.h.resize(M, static_cast<Eigen::Index>(D));
  out.pv.resize(M, static_cast<Eigen::Index>(D));
  out.xv.assign(D, Matrix(M, static_cast<Eigen::Index>(data.characteristics())));
  std::vector<int> failures(static_cast<std::size_t>(M), 0);
  std::vector<char> failed(static_cast<std::size_t>(M), 0);
  parallel_for(static_cast<std::size_t>(M), threads, [&](std::size_t i) {
    const auto& m = data[i];
    const auto row = static_cast<Eigen::Index>(i);
    for (std::size_t d = 0; d < D; ++d) {
      out.xv[d].row(row) = (m.x.transpose() * dirs[d].v).transpose();
      out.pv(row, static_cast<Eigen::Index>(d)) = dirs[d].v.dot(m.prices);
    }
    try {
      const ShockCurve curve(m, s0set.interval_for(m), ShareKernel(q, m.x, m.prices), opts);
      failures[i] = curve.failures();
      for (std::size_t d = 0; d < D; ++d) out.h(row, static_cast<Eigen::Index>(d)) = curve.sup(dirs[d].v).value;
    } catch (const NumericalError&) {
      failed[i] = 1;
      out.h.row(row).setConstant(kNaN);
    }
  });
  for (Eigen::Index i = 0; i < M; ++i) {
    out.grid_failures += failures[static_cast<std::size_t>(i)];
    if (failed[static_cast<std::size_t>(i)]) out.failed_markets.push_back(static_cast<int>(i));
  }
  return out;
}

/// Sample moments of y = (h, x'v, v'p) for one (direction, cell); the
/// moment for θ is c'y with c = (1, −β, α).
struct CellMoments {
  int count = 0;     // markets with finite h
  int infinite = 0;  // markets with h = +∞
  Vector mean;
  Matrix cov;        // 1/n normalization

  static Vector coefficients(const ParamTheta& theta) {
    Vector c(theta.beta.size() + 2);
    c[0] = 1.0;
    c.segment(1, theta.beta.size()) = -theta.beta;
    c[c.size() - 1] = theta.alpha;
    return c;
  }

  double mean_at(const Vector& c) const { return infinite > 0 ? kInf : c.dot(mean); }
  double sd_at(const Vector& c) const { return std::sqrt(std::max(0.0, c.dot(cov * c))); }
};

/// Conditional moment table at one λ: directions × cells.
class MomentTable {
 public:
  MomentTable(const SupportData& sd, const CellPartition& cells)
      : directions_(static_cast<std::size_t>(sd.h.cols())), cells_(static_cast<std::size_t>(cells.cells)) {
    const auto M = sd.h.rows();
    if (static_cast<std::size_t>(M) != cells.cell_of.size()) throw ConfigError("partition size differs from markets");
    const auto K = sd.xv.empty() ? 2 : sd.xv[0].cols() + 2;
    table_.resize(directions_ * cells_);
    for (std::size_t d = 0; d < directions_; ++d) {
      const auto dd = static_cast<Eigen::Index>(d);
      for (std::size_t c = 0; c < cells_; ++c) {
        auto& cm = table_[d * cells_ + c];
        cm.mean = Vector::Zero(K);
        cm.cov = Matrix::Zero(K, K);
      }
      // Two passes: means, then centred cross-products.
      for (Eigen::Index i = 0; i < M; ++i) {
        const double hv = sd.h(i, dd);
        if (std::isnan(hv)) continue;
        auto& cm = table_[d * cells_ + static_cast<std::size_t>(cells.cell_of[static_cast<std::size_t>(i)])];
        if (std::isinf(hv)) {
          ++cm.infinite;
          continue;
        }
        ++cm.count;
        cm.mean += row(sd, i, dd, K);
      }
      for (std::size_t c = 0; c < cells_; ++c) {
        auto& cm = table_[d * cells_ + c];
        if (cm.count > 0) cm.mean /= cm.count;
      }
      for (Eigen::Index i = 0; i < M; ++i) {
        const double hv = sd.h(i, dd);
        if (!std::isfinite(hv)) continue;
        auto& cm = table_[d * cells_ + static_cast<std::size_t>(cells.cell_of[static_cast<std::size_t>(i)])];
        const Vector e = row(sd, i, dd, K) - cm.mean;
        cm.cov.noalias() += e * e.transpose();
      }
      for (std::size_t c = 0; c < cells_; ++c) {
        auto& cm = table_[d * cells_ + c];
        if (cm.count > 0) cm.cov /= cm.count;
      }
    }
  }

  std::size_t directions() const noexcept { return directions_; }
  std::size_t cells() const noexcept { return cells_; }
  const CellMoments& at(std::size_t d, std::size_t c) const { return table_[d * cells_ + c]; }

 private:
  static Vector row(const SupportData& sd, Eigen::Index i, Eigen::Index d, Eigen::Index K) {
    Vector y(K);
    y[0] = sd.h(i, d);
    y.segment(1, K - 2) = sd.xv[static_cast<std::size_t>(d)].row(i).transpose();
    y[K - 1] = sd.pv(i, d);
    return y;
  }

  std::size_t directions_;
  std::size_t cells_;
  std::vector<CellMoments> table_;
};

/// Per (direction, cell) sample means of the support moment at θ. Empty
/// cells have count 0 and NaN mean; a cell with any +∞ contribution has
/// mean +∞.
struct ConditionalMomentTable {
  Matrix mean;  // directions × cells
  Matrix sd;
  std::vector<std::vector<int>> counts;
  std::vector<std::string> cell_labels;
};

inline ConditionalMomentTable conditional_moment_table(const Dataset& data, const DirectionSet& dirs,
                                                       const ParamTheta& theta, const OutsideShareSet& s0set,
                                                       const MixingSpec& mixing, const CellPartition& cells,
                                                       const SupportOptions& opts = {}, unsigned threads = 1) {
  const SupportData sd = compute_support_data(data, dirs, theta.lambda, s0set, mixing, opts, threads);
  const MomentTable table(sd, cells);
  const Vector c = CellMoments::coefficients(theta);
  ConditionalMomentTable out;
  out.mean.resize(static_cast<Eigen::Index>(table.directions()), cells.cells);
  out.sd.resize(static_cast<Eigen::Index>(table.directions()), cells.cells);
  out.counts.assign(table.directions(), std::vector<int>(static_cast<std::size_t>(cells.cells), 0));
  out.cell_labels = cells.labels;
  for (std::size_t d = 0; d < table.directions(); ++d)
    for (std::size_t k = 0; k < table.cells(); ++k) {
      const auto& cm = table.at(d, k);
      const auto r = static_cast<Eigen::Index>(d), col = static_cast<Eigen::Index>(k);
      out.counts[d][k] = cm.count + cm.infinite;
      out.mean(r, col) = cm.count + cm.infinite == 0 ? kNaN : cm.mean_at(c);
      out.sd(r, col) = cm.count == 0 ? kNaN : cm.sd_at(c);
    }
  return out;
}

/// Tolerance for sampling noise: a (v, cell) inequality holds when its mean
/// is at least −(absolute + se_multiplier · sd / √n_cell).
struct Slack {
  double absolute = 0.0;
  double se_multiplier = 2.0;
};

struct MembershipResult {
  bool member = true;
  double min_value = kInf;  // min over finite moments of mean + slack
  int worst_direction = -1;
  int worst_cell = -1;
  double worst_mean = kNaN;
};

inline MembershipResult membership(const MomentTable& table, const ParamTheta& theta, const Slack& slack) {
  MembershipResult out;
  if (std::isinf(slack.absolute) && slack.absolute > 0.0) return out;
  const Vector c = CellMoments::coefficients(theta);
  for (std::size_t d = 0; d < table.directions(); ++d)
    for (std::size_t k = 0; k < table.cells(); ++k) {
      const auto& cm = table.at(d, k);
      if (cm.count == 0 || cm.infinite > 0) continue;
      const double mean = cm.mean_at(c);
      double tol = slack.absolute;
      if (slack.se_multiplier > 0.0) tol += slack.se_multiplier * cm.sd_at(c) / std::sqrt(static_cast<double>(cm.count));
      const double value = mean + tol;
      if (value < out.min_value) {
        out.min_value = value;
        out.worst_direction = static_cast<int>(d);
        out.worst_cell = static_cast<int>(k);
        out.worst_mean = mean;
      }
    }
  out.member = out.min_value >= 0.0;
  return out;
}

inline MembershipResult membership(const ParamTheta& theta, const Dataset& data, const DirectionSet& dirs,
                                   const OutsideShareSet& s0set, const MixingSpec& mixing, const CellPartition& cells,
                                   const Slack& slack, const SupportOptions& opts = {}, unsigned threads = 1) {
  const SupportData sd = compute_support_data(data, dirs, theta.lambda, s0set, mixing, opts, threads);
  return membership(MomentTable(sd, cells), theta, slack);
}

/// Exhaustive grid search for the identified set. λ blocks are processed in
/// grid order; (α, β) points inside a block reuse the block's moment table.
inline GridResult compute_identified_set(const ThetaGrid& grid, const Dataset& data, const DirectionSet& dirs,
                                         const OutsideShareSet& s0set, const MixingSpec& mixing,
                                         const CellPartition& cells, const Slack& slack,
                                         const SupportOptions& opts = {}, unsigned threads = 1) {
  GridResult out(grid.names());
  const std::size_t block = grid.lambda_block();
  for (std::size_t start = 0; start < grid.size(); start += block) {
    const ParamTheta first = grid.point(start);
    const SupportData sd = compute_support_data(data, dirs, first.lambda, s0set, mixing, opts, threads);
    out.diagnostics.inversion_failures += sd.grid_failures;
    out.diagnostics.failed_markets += static_cast<int>(sd.failed_markets.size());
    const MomentTable table(sd, cells);
    for (std::size_t i = start; i < start + block; ++i) {
      const auto m = membership(table, grid.point(i), slack);
      out.add(grid.coordinates(i), m.member, m.min_value);
    }
  }
  out.finalize();
  return out;
}

/// Sampled shock set U for one market: ξ(s₀) on `n_s0` evenly spaced
/// outside shares in the clipped S₀.
struct ShockSetSample {
  std::vector<double> s0;
  std::vector<Vector> xi;
  std::vector<Vector> delta;
  int skipped = 0;
};

inline std::vector<double> s0_sample(const ShareInterval& iv, int n) {
  if (iv.singleton() || n <= 1) return {iv.singleton() ? iv.lo : 0.5 * (iv.lo + iv.hi)};
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) out[static_cast<std::size_t>(k)] = iv.lo + (iv.hi - iv.lo) * k / (n - 1);
  out.back() = iv.hi;
  return out;
}

inline ShockSetSample shock_set(const MarketObservation& market, const ParamTheta& theta,
                                const OutsideShareSet& s0set, const MixingSpec& mixing, int n_s0,
                                const InversionOptions& opts = {}) {
  const ShareKernel k(build_quadrature(mixing, theta.lambda), market.x, market.prices);
  const Vector base = market.x * theta.beta - theta.alpha * market.prices;
  ShockSetSample out;
  std::optional<Vector> warm;
  for (double s0 : s0_sample(s0set.interval_for(market), n_s0)) {
    try {
      const auto r = invert_sigma(k, assemble_shares(s0, market.inside_shares), opts, warm);
      warm = r.delta;
      out.s0.push_back(s0);
      out.delta.push_back(r.delta);
      out.xi.push_back(r.delta - base);
    } catch (const NumericalError&) {
      ++out.skipped;
    }
  }
  return out;
}

/// Which equilibrium objects to bound.
struct ObjectRequest {
  bool elasticities = true;
  bool markups = true;
  bool diversion = true;
  bool shares = true;
};

/// Intervals of equilibrium objects over θ members × sampled S₀. Entry
/// (j,k) of `elasticity` bounds e_jk; `diversion[j][k]` bounds D_jk.
struct EquilibriumBounds {
  std::vector<std::vector<Interval>> elasticity;
  std::vector<Interval> markup;
  std::vector<std::vector<Interval>> diversion;
  std::vector<Interval> shares;
  int evaluated = 0;
  int skipped = 0;  // (θ, s₀) pairs lost to inversion failure or singular objects
};

inline EquilibriumBounds equilibrium_bounds(const MarketObservation& market, const std::vector<ParamTheta>& members,
                                            const OutsideShareSet& s0set, const MixingSpec& mixing, int n_s0,
                                            const ObjectRequest& request = {}, const InversionOptions& opts = {},
                                            unsigned threads = 1) {
  if (members.empty()) throw ConfigError("equilibrium bounds need at least one parameter value");
  const auto J = static_cast<std::size_t>(market.products());
  EquilibriumBounds out;
  if (request.elasticities) out.elasticity.assign(J, std::vector<Interval>(J));
  if (request.markups) out.markup.assign(J, Interval{});
  if (request.diversion) out.diversion.assign(J, std::vector<Interval>(J));
  if (request.shares) out.shares.assign(J, Interval{});

  // Objects depend on θ only through (α, λ).
  std::map<std::vector<double>, std::vector<double>> by_lambda;  // λ → α values
  for (const auto& t : members) {
    std::vector<double> key(t.lambda.data(), t.lambda.data() + t.lambda.size());
    by_lambda[key].push_back(t.alpha);
  }
  std::vector<std::pair<std::vector<double>, std::vector<double>>> work(by_lambda.begin(), by_lambda.end());
  for (auto& w : work) {
    std::sort(w.second.begin(), w.second.end());
    w.second.erase(std::unique(w.second.begin(), w.second.end()), w.second.end());
  }
  const auto samples = s0_sample(s0set.interval_for(market), n_s0);

  std::vector<EquilibriumBounds> partial(work.size());
  parallel_for(work.size(), threads, [&](std::size_t w) {
    auto& acc = partial[w];
    acc.elasticity = out.elasticity;
    acc.markup = out.markup;
    acc.diversion = out.diversion;
    acc.shares = out.shares;
    const Vector lambda = Eigen::Map<const Vector>(work[w].first.data(), static_cast<Eigen::Index>(work[w].first.size()));
    const ShareKernel k(build_quadrature(mixing, lambda), market.x, market.prices);
    std::optional<Vector> warm;
    for (double s0 : samples) {
      Vector delta;
      try {
        const auto r = invert_sigma(k, assemble_shares(s0, market.inside_shares), opts, warm);
        delta = r.delta;
        warm = delta;
      } catch (const NumericalError&) {
        acc.skipped += static_cast<int>(work[w].second.size());
        continue;
      }
      for (double alpha : work[w].second) {
        EquilibriumObjects obj;
        try {
          obj = equilibrium_objects(k, delta, alpha, market.prices);
        } catch (const SingularityError&) {
          ++acc.skipped;
          continue;
        }
        ++acc.evaluated;
        for (std::size_t j = 0; j < J; ++j) {
          const auto jj = static_cast<Eigen::Index>(j);
          if (request.shares) acc.shares[j].include(obj.shares[jj]);
          if (request.markups && std::isfinite(obj.markup[jj])) acc.markup[j].include(obj.markup[jj]);
          for (std::size_t l = 0; l < J; ++l) {
            const auto ll = static_cast<Eigen::Index>(l);
            if (request.elasticities) acc.elasticity[j][l].include(obj.elasticity(jj, ll));
            if (request.diversion && j != l && std::isfinite(obj.diversion(jj, ll)))
              acc.diversion[j][l].include(obj.diversion(jj, ll));
          }
        }
      }
    }
  });
  auto merge = [](Interval& a, const Interval& b) {
    if (!b.empty()) {
      a.include(b.lo);
      a.include(b.hi);
    }
  };
  for (const auto& p : partial) {
    out.evaluated += p.evaluated;
    out.skipped += p.skipped;
    for (std::size_t j = 0; j < J; ++j) {
      if (request.shares) merge(out.shares[j], p.shares[j]);
      if (request.markups) merge(out.markup[j], p.markup[j]);
      for (std::size_t l = 0; l < J; ++l) {
        if (request.elasticities) merge(out.elasticity[j][l], p.elasticity[j][l]);
        if (request.diversion) merge(out.diversion[j][l], p.diversion[j][l]);
      }
    }
  }
  return out;
}

}  // namespace blpid
