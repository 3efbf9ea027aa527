#pragma once

// Domain types shared by every module: market observations, datasets,
// structural parameters, the mixing specification, the outside-share set
// and the parameter grid.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "blpid/errors.hpp"

namespace blpid {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// One market: conditional inside shares s̃, characteristics x (J×d_X),
/// prices p and instruments z. `outside_share_ref` is an optional
/// researcher-supplied outside share used as the centre of a band S₀.
struct MarketObservation {
  std::string market_id;
  Vector inside_shares;
  Matrix x;
  Vector prices;
  Vector z;
  std::optional<double> outside_share_ref;

  std::size_t products() const noexcept { return static_cast<std::size_t>(inside_shares.size()); }
};

/// Throws DataError unless the market satisfies the share and shape invariants.
inline void validate_market(const MarketObservation& m) {
  const auto J = m.inside_shares.size();
  if (J < 2) throw DataError("market " + m.market_id + ": need at least 2 inside products");
  if (m.prices.size() != J || m.x.rows() != J)
    throw DataError("market " + m.market_id + ": shares, prices and x disagree on J");
  double sum = 0.0;
  for (Eigen::Index j = 0; j < J; ++j) {
    const double s = m.inside_shares[j];
    if (!(s > 0.0 && s < 1.0))
      throw DataError("market " + m.market_id + ": inside share outside (0,1)");
    sum += s;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw DataError("market " + m.market_id + ": inside shares do not sum to 1");
  if (!m.prices.allFinite() || !m.x.allFinite() || !m.z.allFinite())
    throw DataError("market " + m.market_id + ": non-finite covariate");
  if (m.outside_share_ref && !(*m.outside_share_ref > 0.0 && *m.outside_share_ref < 1.0))
    throw DataError("market " + m.market_id + ": outside share reference outside (0,1)");
}

/// Ordered, immutable collection of markets sharing (J, d_X, d_z).
class Dataset {
 public:
  Dataset() = default;

  explicit Dataset(std::vector<MarketObservation> markets,
                   std::vector<double> renormalization = {})
      : markets_(std::move(markets)), renormalization_(std::move(renormalization)) {
    if (markets_.empty()) throw DataError("dataset is empty");
    products_ = markets_.front().products();
    characteristics_ = static_cast<std::size_t>(markets_.front().x.cols());
    instruments_ = static_cast<std::size_t>(markets_.front().z.size());
    for (const auto& m : markets_) {
      validate_market(m);
      if (m.products() != products_ || static_cast<std::size_t>(m.x.cols()) != characteristics_ ||
          static_cast<std::size_t>(m.z.size()) != instruments_)
        throw DataError("market " + m.market_id + ": dimensions differ from the first market");
    }
    if (renormalization_.empty()) renormalization_.assign(markets_.size(), 1.0);
    if (renormalization_.size() != markets_.size())
      throw DataError("renormalization factors do not match market count");
  }

  std::size_t size() const noexcept { return markets_.size(); }
  std::size_t products() const noexcept { return products_; }
  std::size_t characteristics() const noexcept { return characteristics_; }
  std::size_t instruments() const noexcept { return instruments_; }

  const MarketObservation& operator[](std::size_t i) const { return markets_[i]; }
  const std::vector<MarketObservation>& markets() const noexcept { return markets_; }

  /// Sum of the raw inside shares per market before renormalization.
  const std::vector<double>& renormalization() const noexcept { return renormalization_; }

 private:
  std::vector<MarketObservation> markets_;
  std::vector<double> renormalization_;
  std::size_t products_ = 0;
  std::size_t characteristics_ = 0;
  std::size_t instruments_ = 0;
};

/// θ = (α, β, λ).
struct ParamTheta {
  double alpha = 0.0;
  Vector beta;
  Vector lambda;
};

enum class MixingFamily { kDegenerate, kGaussianIndependent };
enum class QuadratureRule { kGaussHermite, kMonteCarlo };

/// Law of the random coefficients (ζ, ν). For the Gaussian family every
/// coordinate is an independent centred normal whose standard deviation is
/// the λ entry named by its index (-1 keeps the coordinate at zero).
struct MixingSpec {
  MixingFamily family = MixingFamily::kDegenerate;
  std::vector<int> zeta_sd_index;  // one entry per characteristic
  int nu_sd_index = -1;
  QuadratureRule rule = QuadratureRule::kGaussHermite;
  int nodes = 15;  // per random dimension (Gauss-Hermite) or total draws (Monte Carlo)
  std::uint64_t seed = 0;

  static MixingSpec degenerate() { return {}; }

  /// Random price coefficient only: ν ~ N(0, λ[index]²).
  static MixingSpec price_coefficient(std::size_t characteristics, int index = 0, int nodes = 15) {
    MixingSpec m;
    m.family = MixingFamily::kGaussianIndependent;
    m.zeta_sd_index.assign(characteristics, -1);
    m.nu_sd_index = index;
    m.nodes = nodes;
    return m;
  }
};

/// Clipped outside-share interval for one market. `open_low`/`open_high`
/// record that the nominal set reaches 0 or 1 and was clipped to η.
struct ShareInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool open_low = false;
  bool open_high = false;

  bool singleton() const noexcept { return lo == hi; }
  bool contains(double s0) const noexcept { return s0 >= lo && s0 <= hi; }
};

/// The set S₀ restricting the unobserved outside share.
class OutsideShareSet {
 public:
  enum class Kind { kAgnostic, kBand, kSingleton };

  static OutsideShareSet agnostic(double eta = 1e-4) { return OutsideShareSet(Kind::kAgnostic, 0.0, {}, eta); }

  /// (c − ε, c + ε) ∩ (0,1), with c the market's reference outside share
  /// unless `center` is given.
  static OutsideShareSet band(double half_width, std::optional<double> center = {}, double eta = 1e-4) {
    if (!(half_width > 0.0)) throw ConfigError("band half-width must be positive");
    return OutsideShareSet(Kind::kBand, half_width, center, eta);
  }

  /// {c}, with c the market's reference outside share unless given.
  static OutsideShareSet singleton(std::optional<double> value = {}, double eta = 1e-4) {
    return OutsideShareSet(Kind::kSingleton, 0.0, value, eta);
  }

  Kind kind() const noexcept { return kind_; }
  double half_width() const noexcept { return half_width_; }
  double eta() const noexcept { return eta_; }
  std::optional<double> center() const noexcept { return center_; }

  ShareInterval interval_for(const MarketObservation& m) const {
    const double lo_clip = eta_, hi_clip = 1.0 - eta_;
    ShareInterval out;
    switch (kind_) {
      case Kind::kAgnostic:
        out = {lo_clip, hi_clip, true, true};
        break;
      case Kind::kBand: {
        const double c = center_for(m);
        const double lo = c - half_width_, hi = c + half_width_;
        out.open_low = lo <= 0.0;
        out.open_high = hi >= 1.0;
        out.lo = std::max(lo, lo_clip);
        out.hi = std::min(hi, hi_clip);
        if (!(out.lo < out.hi))
          throw DataError("market " + m.market_id + ": outside-share band is empty after clipping");
        break;
      }
      case Kind::kSingleton: {
        const double c = std::clamp(center_for(m), lo_clip, hi_clip);
        out = {c, c, false, false};
        break;
      }
    }
    return out;
  }

 private:
  OutsideShareSet(Kind kind, double half_width, std::optional<double> center, double eta)
      : kind_(kind), half_width_(half_width), center_(center), eta_(eta) {
    if (!(eta > 0.0 && eta <= 0.01)) throw ConfigError("clip eta must lie in (0, 0.01]");
    if (center && !(*center > 0.0 && *center < 1.0))
      throw ConfigError("outside-share centre must lie in (0,1)");
  }

  double center_for(const MarketObservation& m) const {
    if (center_) return *center_;
    if (!m.outside_share_ref)
      throw DataError("market " + m.market_id + ": S0 needs a reference outside share but none is present");
    return *m.outside_share_ref;
  }

  Kind kind_;
  double half_width_;
  std::optional<double> center_;
  double eta_;
};

/// One coordinate of the parameter grid; `points == 1` freezes it at `lo`.
struct GridAxis {
  std::string name;
  double lo = 0.0;
  double hi = 0.0;
  int points = 1;

  static GridAxis frozen(std::string name, double value) { return {std::move(name), value, value, 1}; }

  static GridAxis stepped(std::string name, double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi > lo)) throw ConfigError("axis " + name + ": need hi > lo and step > 0");
    const int n = static_cast<int>(std::llround((hi - lo) / step)) + 1;
    return {std::move(name), lo, hi, n};
  }

  double value(int k) const {
    if (points == 1) return lo;
    return lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
  }
};

/// Cartesian grid over (α, β₁..β_dX, λ₁..λ_dλ). Linear index runs with α
/// fastest and the last λ coordinate slowest, so consecutive blocks of
/// `lambda_block()` points share the same λ.
class ThetaGrid {
 public:
  ThetaGrid() = default;

  ThetaGrid(GridAxis alpha, std::vector<GridAxis> beta, std::vector<GridAxis> lambda) {
    axes_.push_back(std::move(alpha));
    beta_count_ = beta.size();
    for (auto& a : beta) axes_.push_back(std::move(a));
    for (auto& a : lambda) axes_.push_back(std::move(a));
    for (const auto& a : axes_) {
      if (a.points < 1) throw ConfigError("axis " + a.name + ": needs at least one point");
      if (a.points == 1 && a.hi != a.lo) throw ConfigError("axis " + a.name + ": frozen axis needs lo == hi");
      if (a.points >= 2 && !(a.hi > a.lo)) throw ConfigError("axis " + a.name + ": needs hi > lo");
    }
  }

  const std::vector<GridAxis>& axes() const noexcept { return axes_; }
  std::size_t beta_count() const noexcept { return beta_count_; }
  std::size_t lambda_count() const noexcept { return axes_.size() - 1 - beta_count_; }

  std::size_t size() const noexcept {
    std::size_t n = 1;
    for (const auto& a : axes_) n *= static_cast<std::size_t>(a.points);
    return axes_.empty() ? 0 : n;
  }

  /// Number of consecutive points sharing one λ value.
  std::size_t lambda_block() const noexcept {
    std::size_t n = 1;
    for (std::size_t k = 0; k < 1 + beta_count_; ++k) n *= static_cast<std::size_t>(axes_[k].points);
    return n;
  }

  std::vector<double> coordinates(std::size_t index) const {
    std::vector<double> c(axes_.size());
    for (std::size_t k = 0; k < axes_.size(); ++k) {
      const auto n = static_cast<std::size_t>(axes_[k].points);
      c[k] = axes_[k].value(static_cast<int>(index % n));
      index /= n;
    }
    return c;
  }

  ParamTheta point(std::size_t index) const { return from_coordinates(coordinates(index)); }

  ParamTheta from_coordinates(const std::vector<double>& c) const {
    ParamTheta t;
    t.alpha = c[0];
    t.beta.resize(static_cast<Eigen::Index>(beta_count_));
    for (std::size_t k = 0; k < beta_count_; ++k) t.beta[static_cast<Eigen::Index>(k)] = c[1 + k];
    t.lambda.resize(static_cast<Eigen::Index>(lambda_count()));
    for (std::size_t k = 0; k < lambda_count(); ++k) t.lambda[static_cast<Eigen::Index>(k)] = c[1 + beta_count_ + k];
    return t;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> n;
    for (const auto& a : axes_) n.push_back(a.name);
    return n;
  }

 private:
  std::vector<GridAxis> axes_;
  std::size_t beta_count_ = 0;
};

/// Closed interval [lo, hi]; empty when lo > hi.
struct Interval {
  double lo = kInf;
  double hi = -kInf;

  bool empty() const noexcept { return lo > hi; }
  void include(double v) noexcept {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  bool contains(double v, double tol = 0.0) const noexcept { return v >= lo - tol && v <= hi + tol; }
};

}  // namespace blpid
