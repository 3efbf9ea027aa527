#pragma once

// Berry inversion of σ at a full share vector (s₀, s_1..s_J), and demand
// shocks ξ = σ⁻¹(s) − xβ + αp.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "blpid/core.hpp"
#include "blpid/share_map.hpp"

namespace blpid {

struct InversionOptions {
  double tol = 1e-12;  // sup-norm on log shares
  int max_iter = 5000;
  // Accelerated mode tries a Newton step on ln σ(δ) = ln s each iteration
  // and keeps it only if the residual falls; otherwise it takes the
  // contraction step followed by a common shift of δ that matches the
  // outside share. The fixed point is unchanged. The plain contraction
  // (accelerate = false) slows to a crawl when s₀ is close to zero.
  bool accelerate = true;
  // Closed form ln(s_j/s₀) when the node set is a single point at zero.
  bool logit_fast_path = true;
  bool record_history = false;
};

struct InversionResult {
  Vector delta;
  int iterations = 0;
  double residual = 0.0;
  std::vector<double> history;  // residual before each update, when recorded
};

/// (s₀, s̃(1 − s₀)).
inline Vector assemble_shares(double s0, const Vector& inside_shares) {
  if (!(s0 > 0.0 && s0 < 1.0)) throw DataError("outside share must lie in (0,1)");
  Vector s(inside_shares.size() + 1);
  s[0] = s0;
  s.tail(inside_shares.size()) = inside_shares * (1.0 - s0);
  return s;
}

inline void validate_full_shares(const Vector& s_full, Eigen::Index J) {
  if (s_full.size() != J + 1) throw DataError("share vector must have J+1 entries (outside first)");
  for (Eigen::Index j = 0; j <= J; ++j)
    if (!(s_full[j] > 0.0) || !std::isfinite(s_full[j])) throw DataError("share vector has a nonpositive entry");
  if (std::abs(s_full.sum() - 1.0) > 1e-10) throw DataError("share vector does not sum to 1");
}

namespace detail {

/// Finds c with ln s₀(δ + c·1) = target by safeguarded Newton on a
/// decreasing function of c.
inline double outside_shift(const ShareKernel& k, const Vector& delta, double target, KernelWorkspace& ws) {
  const Vector& w = k.weights();
  const auto R = k.nodes();
  double c = 0.0, lo = -kInf, hi = kInf;
  for (int it = 0; it < 60; ++it) {
    k.evaluate(delta, ws, c);
    const double g = std::log(ws.outside) - target;
    if (std::abs(g) < 1e-14) break;
    if (g > 0.0)
      lo = c;  // outside share too large: raise δ
    else
      hi = c;
    double num = 0.0;
    for (Eigen::Index r = 0; r < R; ++r) num += w[r] * ws.node_outside[r] * (1.0 - ws.node_outside[r]);
    const double slope = -num / ws.outside;
    double next = slope < 0.0 ? c - g / slope : kNaN;
    if (!std::isfinite(next) || next <= lo || next >= hi) {
      if (std::isfinite(lo) && std::isfinite(hi))
        next = 0.5 * (lo + hi);
      else
        next = g > 0.0 ? c + 8.0 : c - 8.0;
    }
    next = std::clamp(next, c - 16.0, c + 16.0);
    if (next == c) break;
    c = next;
  }
  return c;
}

}  // namespace detail

/// Solves σ(δ) = s_inside for δ. `start` warm-starts the iteration.
inline InversionResult invert_sigma(const ShareKernel& k, const Vector& s_full,
                                    const InversionOptions& opts = {},
                                    const std::optional<Vector>& start = std::nullopt) {
  const auto J = k.products();
  validate_full_shares(s_full, J);
  const Vector log_target = s_full.tail(J).array().log();
  const double log_s0 = std::log(s_full[0]);

  InversionResult out;
  if (k.logit() && opts.logit_fast_path) {
    out.delta = log_target.array() - log_s0;
    return out;
  }

  Vector delta = start ? *start : Vector(log_target.array() - log_s0);
  if (delta.size() != J) throw ConfigError("warm start has the wrong length");
  KernelWorkspace ws, trial_ws;
  Vector step(J), trial_step(J);
  Matrix jac(J, J);
  const bool accelerate = opts.accelerate;
  if (accelerate) delta.array() += detail::outside_shift(k, delta, log_s0, ws);

  auto residual_at = [&](const Vector& d, KernelWorkspace& w, Vector& s) {
    k.evaluate(d, w);
    double r = 0.0;
    for (Eigen::Index j = 0; j < J; ++j) {
      s[j] = log_target[j] - std::log(w.shares[j]);
      r = std::max(r, std::abs(s[j]));
    }
    return r;
  };

  double res = residual_at(delta, ws, step);
  for (int it = 0;; ++it) {
    if (!std::isfinite(res)) throw NumericalError("non-finite residual in share inversion");
    if (opts.record_history) out.history.push_back(res);
    out.iterations = it;
    out.residual = res;
    if (res <= opts.tol) {
      out.delta = delta;
      return out;
    }
    if (it == opts.max_iter) break;
    if (accelerate) {
      // ∂ln σ_j/∂δ_l = Σ_r w_r s_rj (1{j=l} − s_rl) / σ_j
      const Vector& w = k.weights();
      jac.setZero();
      for (Eigen::Index r = 0; r < k.nodes(); ++r)
        for (Eigen::Index j = 0; j < J; ++j) {
          const double a = w[r] * ws.node_shares(r, j);
          for (Eigen::Index l = 0; l < J; ++l) jac(j, l) -= a * ws.node_shares(r, l);
          jac(j, j) += a;
        }
      for (Eigen::Index j = 0; j < J; ++j) jac.row(j) /= ws.shares[j];
      Vector newton = jac.partialPivLu().solve(step);
      const double size = newton.cwiseAbs().maxCoeff();
      if (std::isfinite(size)) {
        if (size > 4.0) newton *= 4.0 / size;
        const Vector trial = delta + newton;
        const double trial_res = residual_at(trial, trial_ws, trial_step);
        if (trial_res < res) {
          delta = trial;
          std::swap(ws, trial_ws);
          std::swap(step, trial_step);
          res = trial_res;
          continue;
        }
      }
      delta += step;
      delta.array() += detail::outside_shift(k, delta, log_s0, ws);
    } else {
      delta += step;
    }
    res = residual_at(delta, ws, step);
  }
  throw ConvergenceError("share inversion did not converge after " + std::to_string(opts.max_iter) +
                             " iterations (residual " + std::to_string(out.residual) + ")",
                         out.residual, out.iterations);
}

inline InversionResult invert_sigma(const Vector& s_full, const Matrix& x, const Vector& p, const Vector& lambda,
                                    const MixingSpec& mixing, const InversionOptions& opts = {}) {
  return invert_sigma(ShareKernel(build_quadrature(mixing, lambda), x, p), s_full, opts);
}

/// ξ_j = σ⁻¹_j(s) − β'x_j + αp_j.
inline Vector demand_shocks(const Vector& s_full, const Matrix& x, const Vector& p, const ParamTheta& theta,
                            const MixingSpec& mixing, const InversionOptions& opts = {}) {
  if (theta.beta.size() != x.cols()) throw DataError("beta length differs from the number of characteristics");
  const Vector delta = invert_sigma(s_full, x, p, theta.lambda, mixing, opts).delta;
  return delta - x * theta.beta + theta.alpha * p;
}

}  // namespace blpid
