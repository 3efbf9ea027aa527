#pragma once

// Small fixtures shared by the unit tests.

#include <random>
#include <vector>

#include "blpid/blpid.hpp"

namespace blpid::testing {

/// Dirichlet(1) draw of length n, bounded away from zero.
inline Vector random_simplex(std::mt19937_64& rng, Eigen::Index n, double floor = 1e-3) {
  std::exponential_distribution<double> e(1.0);
  Vector v(n);
  for (;;) {
    for (Eigen::Index k = 0; k < n; ++k) v[k] = e(rng);
    v /= v.sum();
    if (v.minCoeff() >= floor) return v;
  }
}

inline ParamTheta theta(double alpha, double beta, double lambda) {
  ParamTheta t;
  t.alpha = alpha;
  t.beta = Vector::Constant(1, beta);
  t.lambda = Vector::Constant(1, lambda);
  return t;
}

inline ParamTheta logit_theta(double alpha, Vector beta) {
  ParamTheta t;
  t.alpha = alpha;
  t.beta = std::move(beta);
  return t;
}

inline MarketObservation market(Vector tilde, Vector p, Matrix x, Vector z, std::optional<double> s0 = {},
                                std::string id = "m") {
  MarketObservation m;
  m.market_id = std::move(id);
  m.inside_shares = std::move(tilde);
  m.prices = std::move(p);
  m.x = std::move(x);
  m.z = std::move(z);
  m.outside_share_ref = s0;
  return m;
}

/// Three two-product markets with x = 1 and one discrete instrument.
inline Dataset toy_dataset() {
  std::vector<MarketObservation> ms;
  ms.push_back(market((Vector(2) << 0.35, 0.65).finished(), (Vector(2) << 2.0, 1.0).finished(), Matrix::Ones(2, 1),
                      Vector::Constant(1, 1.0), 0.40, "a"));
  ms.push_back(market((Vector(2) << 0.30, 0.70).finished(), (Vector(2) << 3.0, 0.9).finished(), Matrix::Ones(2, 1),
                      Vector::Constant(1, 2.0), 0.45, "b"));
  ms.push_back(market((Vector(2) << 0.25, 0.75).finished(), (Vector(2) << 4.0, 1.2).finished(), Matrix::Ones(2, 1),
                      Vector::Constant(1, 3.0), 0.50, "c"));
  return Dataset(std::move(ms));
}

}  // namespace blpid::testing
