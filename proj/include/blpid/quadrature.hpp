#pragma once

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <vector>

#include "blpid/core.hpp"

namespace blpid {

/// Weighted nodes realizing ∫ · f(ζ, ν; λ) d(ζ, ν). Row r of `zeta` pairs
/// with `nu[r]` and `weights[r]`; weights sum to one.
struct Quadrature {
  Matrix zeta;  // nodes × d_X (zero columns when no characteristic is random)
  Vector nu;
  Vector weights;

  std::size_t size() const noexcept { return static_cast<std::size_t>(weights.size()); }

  /// True when every node sits at the origin (plain logit).
  bool degenerate() const noexcept {
    return size() == 1 && (zeta.size() == 0 || zeta.isZero(0.0)) && nu[0] == 0.0;
  }
};

namespace detail {

/// Probabilists' Gauss-Hermite rule (weight e^{-t²/2}/√(2π)) via Golub-Welsch.
struct HermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline HermiteRule gauss_hermite_rule(int n) {
  HermiteRule rule;
  if (n == 1) {
    rule.nodes = {0.0};
    rule.weights = {1.0};
    return rule;
  }
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(n - 1);
  for (int k = 1; k < n; ++k) sub[k - 1] = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw NumericalError("Gauss-Hermite eigen-solve failed");
  rule.nodes.resize(n);
  rule.weights.resize(n);
  double total = 0.0;
  for (int k = 0; k < n; ++k) {
    // Symmetrize: nodes come in ± pairs, the middle one is exactly zero.
    rule.nodes[k] = solver.eigenvalues()[k];
    const double v0 = solver.eigenvectors()(0, k);
    rule.weights[k] = v0 * v0;
    total += rule.weights[k];
  }
  for (int k = 0; k < n / 2; ++k) {
    const double a = 0.5 * (rule.nodes[n - 1 - k] - rule.nodes[k]);
    rule.nodes[k] = -a;
    rule.nodes[n - 1 - k] = a;
    const double w = 0.5 * (rule.weights[k] + rule.weights[n - 1 - k]);
    rule.weights[k] = rule.weights[n - 1 - k] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  total = 0.0;
  for (double w : rule.weights) total += w;
  for (double& w : rule.weights) w /= total;
  return rule;
}

inline double sd_for(int index, const Vector& lambda) {
  if (index < 0) return 0.0;
  if (index >= lambda.size()) throw ConfigError("mixing refers to lambda entry beyond its length");
  const double sd = lambda[index];
  if (!std::isfinite(sd)) throw ConfigError("non-finite lambda entry");
  if (sd < 0.0) throw ConfigError("negative standard deviation in lambda");
  return sd;
}

}  // namespace detail

/// Builds the node set for `mixing` at parameter `lambda`. Coordinates with
/// a zero standard deviation collapse to one node at the origin.
inline Quadrature build_quadrature(const MixingSpec& mixing, const Vector& lambda) {
  const auto dx = static_cast<Eigen::Index>(mixing.zeta_sd_index.size());
  Quadrature q;
  if (mixing.family == MixingFamily::kDegenerate) {
    q.zeta = Matrix::Zero(1, dx);
    q.nu = Vector::Zero(1);
    q.weights = Vector::Ones(1);
    return q;
  }
  if (mixing.nodes < 1) throw ConfigError("quadrature node count must be at least 1");

  // sds in the order (ζ_1..ζ_dX, ν)
  std::vector<double> sd(static_cast<std::size_t>(dx) + 1);
  for (Eigen::Index k = 0; k < dx; ++k) sd[k] = detail::sd_for(mixing.zeta_sd_index[k], lambda);
  sd[dx] = detail::sd_for(mixing.nu_sd_index, lambda);

  if (mixing.rule == QuadratureRule::kMonteCarlo) {
    const int n = mixing.nodes;
    std::mt19937_64 rng(mixing.seed);
    std::normal_distribution<double> normal;
    q.zeta = Matrix::Zero(n, dx);
    q.nu = Vector::Zero(n);
    q.weights = Vector::Constant(n, 1.0 / n);
    for (int r = 0; r < n; ++r) {
      for (Eigen::Index k = 0; k <= dx; ++k) {
        const double draw = normal(rng);
        if (k < dx)
          q.zeta(r, k) = sd[k] * draw;
        else
          q.nu[r] = sd[k] * draw;
      }
    }
    return q;
  }

  const auto rule = detail::gauss_hermite_rule(mixing.nodes);
  std::vector<int> counts(sd.size());
  std::size_t total = 1;
  for (std::size_t k = 0; k < sd.size(); ++k) {
    counts[k] = sd[k] > 0.0 ? mixing.nodes : 1;
    total *= static_cast<std::size_t>(counts[k]);
  }
  const auto n = static_cast<Eigen::Index>(total);
  q.zeta = Matrix::Zero(n, dx);
  q.nu = Vector::Zero(n);
  q.weights = Vector::Ones(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    auto rest = static_cast<std::size_t>(r);
    for (std::size_t k = 0; k < sd.size(); ++k) {
      const auto c = static_cast<std::size_t>(counts[k]);
      const std::size_t i = rest % c;
      rest /= c;
      const double node = counts[k] == 1 ? 0.0 : sd[k] * rule.nodes[i];
      const double w = counts[k] == 1 ? 1.0 : rule.weights[i];
      if (k < static_cast<std::size_t>(dx))
        q.zeta(r, static_cast<Eigen::Index>(k)) = node;
      else
        q.nu[r] = node;
      q.weights[r] *= w;
    }
  }
  q.weights /= q.weights.sum();
  return q;
}

}  // namespace blpid
