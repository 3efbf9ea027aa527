#pragma once

// Choice probabilities, the σ and σ̃ maps and the per-market equilibrium
// objects (elasticities, markups, diversion ratios, shares).

#include <cmath>
#include <string>

#include "blpid/core.hpp"
#include "blpid/quadrature.hpp"

namespace blpid {

/// Scratch buffers for repeated kernel evaluations at one market.
struct KernelWorkspace {
  Matrix node_shares;  // nodes × J
  Vector node_outside;
  Vector shares;
  double outside = 0.0;
};

/// Logit kernel for one market at a fixed node set. Node r adds the
/// offset μ_rj = ζ_r·x_j − ν_r p_j to the mean utility δ_j.
class ShareKernel {
 public:
  ShareKernel(const Quadrature& q, const Matrix& x, const Vector& p) : weights_(q.weights), nu_(q.nu) {
    const auto J = p.size();
    if (x.rows() != J) throw DataError("x and p disagree on the number of products");
    if (q.zeta.cols() != x.cols() && q.zeta.cols() != 0)
      throw ConfigError("mixing has a different number of characteristics than x");
    const auto R = q.weights.size();
    offsets_.resize(R, J);
    for (Eigen::Index r = 0; r < R; ++r)
      for (Eigen::Index j = 0; j < J; ++j) {
        double mu = -q.nu[r] * p[j];
        if (q.zeta.cols() != 0) mu += q.zeta.row(r).dot(x.row(j));
        offsets_(r, j) = mu;
      }
    logit_ = q.degenerate();
  }

  Eigen::Index products() const noexcept { return offsets_.cols(); }
  Eigen::Index nodes() const noexcept { return offsets_.rows(); }
  bool logit() const noexcept { return logit_; }
  const Vector& weights() const noexcept { return weights_; }
  const Vector& nu() const noexcept { return nu_; }

  /// Fills node-level and aggregate shares at δ + c·1.
  void evaluate(const Vector& delta, KernelWorkspace& ws, double c = 0.0) const {
    const auto R = nodes(), J = products();
    ws.node_shares.resize(R, J);
    ws.node_outside.resize(R);
    ws.shares.setZero(J);
    ws.outside = 0.0;
    for (Eigen::Index r = 0; r < R; ++r) {
      double m = 0.0;
      for (Eigen::Index j = 0; j < J; ++j) m = std::max(m, delta[j] + c + offsets_(r, j));
      const double e0 = std::exp(-m);
      double den = e0;
      for (Eigen::Index j = 0; j < J; ++j) {
        const double e = std::exp(delta[j] + c + offsets_(r, j) - m);
        ws.node_shares(r, j) = e;
        den += e;
      }
      const double inv = 1.0 / den;
      ws.node_outside[r] = e0 * inv;
      ws.outside += weights_[r] * e0 * inv;
      for (Eigen::Index j = 0; j < J; ++j) {
        ws.node_shares(r, j) *= inv;
        ws.shares[j] += weights_[r] * ws.node_shares(r, j);
      }
    }
  }

  Matrix node_shares(const Vector& delta) const {
    KernelWorkspace ws;
    evaluate(delta, ws);
    return ws.node_shares;
  }

  Vector sigma(const Vector& delta) const {
    KernelWorkspace ws;
    evaluate(delta, ws);
    return ws.shares;
  }

  double outside_share(const Vector& delta) const {
    KernelWorkspace ws;
    evaluate(delta, ws);
    return ws.outside;
  }

  /// Conditional inside shares ∫s_j / (1 − ∫s_0).
  Vector sigma_tilde(const Vector& delta) const {
    KernelWorkspace ws;
    evaluate(delta, ws);
    return ws.shares / ws.shares.sum();
  }

 private:
  Vector weights_;
  Vector nu_;
  Matrix offsets_;
  bool logit_ = false;
};

/// Mean utilities δ = xβ − αp + ξ.
inline Vector mean_utility(const ParamTheta& theta, const Matrix& x, const Vector& p, const Vector& xi) {
  if (theta.beta.size() != x.cols()) throw DataError("beta length differs from the number of characteristics");
  if (xi.size() != p.size()) throw DataError("xi and p disagree on the number of products");
  return x * theta.beta - theta.alpha * p + xi;
}

/// Outside share first, then the J inside shares.
inline Vector choice_probabilities(const ParamTheta& theta, const MixingSpec& mixing, const Matrix& x,
                                   const Vector& p, const Vector& xi) {
  const ShareKernel k(build_quadrature(mixing, theta.lambda), x, p);
  KernelWorkspace ws;
  k.evaluate(mean_utility(theta, x, p, xi), ws);
  Vector out(p.size() + 1);
  out[0] = ws.outside;
  out.tail(p.size()) = ws.shares;
  return out;
}

inline Vector sigma(const Vector& delta, const Matrix& x, const Vector& p, const Vector& lambda,
                    const MixingSpec& mixing) {
  return ShareKernel(build_quadrature(mixing, lambda), x, p).sigma(delta);
}

inline Vector sigma_tilde(const Vector& delta, const Matrix& x, const Vector& p, const ParamTheta& theta,
                          const MixingSpec& mixing) {
  return ShareKernel(build_quadrature(mixing, theta.lambda), x, p).sigma_tilde(delta);
}

/// Every equilibrium object of one market at one (δ, α). Entry (j,k) of
/// `elasticity` is ∂ln s_j/∂ln p_k; `diversion(j,k)` is D_jk.
struct EquilibriumObjects {
  Vector shares;
  Matrix elasticity;
  Vector markup;
  Matrix diversion;
};

inline constexpr double kDegenerateShare = 1e-300;

/// Evaluates shares, elasticities, markups and diversion ratios on the
/// kernel's node set so all ratio formulas share one quadrature. Markups or
/// diversion ratios with a zero denominator are set to NaN; callers that
/// need them should check.
inline EquilibriumObjects equilibrium_objects(const ShareKernel& k, const Vector& delta, double alpha,
                                              const Vector& p) {
  const auto J = k.products(), R = k.nodes();
  const Matrix S = k.node_shares(delta);
  const Vector& w = k.weights();
  EquilibriumObjects out;
  out.shares = S.transpose() * w;
  // A(j,k) = Σ_r w_r (α+ν_r) s_rj s_rk, own term uses s_rj(1 − s_rj).
  Matrix A = Matrix::Zero(J, J);
  for (Eigen::Index r = 0; r < R; ++r) {
    const double a = w[r] * (alpha + k.nu()[r]);
    for (Eigen::Index j = 0; j < J; ++j)
      for (Eigen::Index l = 0; l < J; ++l)
        A(j, l) += a * S(r, j) * (j == l ? 1.0 - S(r, j) : S(r, l));
  }
  out.elasticity.resize(J, J);
  out.markup.resize(J);
  out.diversion.resize(J, J);
  for (Eigen::Index j = 0; j < J; ++j) {
    if (!(out.shares[j] > kDegenerateShare))
      throw SingularityError("share of product " + std::to_string(j + 1) + " is numerically zero");
  }
  for (Eigen::Index j = 0; j < J; ++j) {
    for (Eigen::Index l = 0; l < J; ++l) {
      out.elasticity(j, l) = j == l ? -p[j] * A(j, j) / out.shares[j] : p[l] * A(j, l) / out.shares[j];
      out.diversion(j, l) = j == l ? kNaN : (A(l, l) != 0.0 ? A(j, l) / A(l, l) : kNaN);
    }
    out.markup[j] = out.elasticity(j, j) != 0.0 ? -p[j] / out.elasticity(j, j) : kNaN;
  }
  return out;
}

namespace detail {
inline EquilibriumObjects objects_at(const ParamTheta& theta, const MixingSpec& mixing, const Matrix& x,
                                     const Vector& p, const Vector& xi) {
  const ShareKernel k(build_quadrature(mixing, theta.lambda), x, p);
  return equilibrium_objects(k, mean_utility(theta, x, p, xi), theta.alpha, p);
}

inline void check_product(Eigen::Index j, Eigen::Index J) {
  if (j < 0 || j >= J) throw ConfigError("product index out of range");
}
}  // namespace detail

// Product indices below are zero-based.

inline double elasticity_own(const ParamTheta& theta, const MixingSpec& mixing, const Matrix& x, const Vector& p,
                             const Vector& xi, Eigen::Index j) {
  detail::check_product(j, p.size());
  return detail::objects_at(theta, mixing, x, p, xi).elasticity(j, j);
}

inline double elasticity_cross(const ParamTheta& theta, const MixingSpec& mixing, const Matrix& x,
                               const Vector& p, const Vector& xi, Eigen::Index j, Eigen::Index k) {
  detail::check_product(j, p.size());
  detail::check_product(k, p.size());
  if (j == k) throw ConfigError("cross elasticity needs j != k");
  return detail::objects_at(theta, mixing, x, p, xi).elasticity(j, k);
}

inline double markup(const ParamTheta& theta, const MixingSpec& mixing, const Matrix& x, const Vector& p,
                     const Vector& xi, Eigen::Index j) {
  detail::check_product(j, p.size());
  const double m = detail::objects_at(theta, mixing, x, p, xi).markup[j];
  if (std::isnan(m)) throw SingularityError("own elasticity is zero, markup undefined");
  return m;
}

inline double diversion_ratio(const ParamTheta& theta, const MixingSpec& mixing, const Matrix& x,
                              const Vector& p, const Vector& xi, Eigen::Index j, Eigen::Index k) {
  detail::check_product(j, p.size());
  detail::check_product(k, p.size());
  if (j == k) throw ConfigError("diversion ratio needs j != k");
  const double d = detail::objects_at(theta, mixing, x, p, xi).diversion(j, k);
  if (std::isnan(d)) throw SingularityError("diversion denominator is zero");
  return d;
}

}  // namespace blpid
