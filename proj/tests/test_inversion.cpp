#include <gtest/gtest.h>

#include "support.hpp"

using namespace blpid;
using namespace blpid::testing;

namespace {

ShareKernel rc_kernel(const Vector& p, double lambda, int nodes = 15) {
  return ShareKernel(build_quadrature(MixingSpec::price_coefficient(1, 0, nodes), Vector::Constant(1, lambda)),
                     Matrix::Ones(p.size(), 1), p);
}

}  // namespace

TEST(Inversion, LogitContractionMatchesLogRatio) {
  std::mt19937_64 rng(1);
  InversionOptions plain;
  plain.logit_fast_path = false;
  plain.accelerate = false;
  plain.max_iter = 200000;
  InversionOptions accel;
  accel.logit_fast_path = false;
  for (int t = 0; t < 200; ++t) {
    const int J = 2 + t % 5;
    const Vector s = random_simplex(rng, J + 1, 0.01);
    const ShareKernel k(build_quadrature(MixingSpec::degenerate(), {}), Matrix::Zero(J, 1), Vector::Zero(J));
    const Vector oracle = (s.tail(J).array() / s[0]).log();
    EXPECT_LT((invert_sigma(k, s, plain).delta - oracle).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((invert_sigma(k, s, accel).delta - oracle).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((invert_sigma(k, s).delta - oracle).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Inversion, GaussianRoundTrip) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.3, 3.0);
  for (int t = 0; t < 100; ++t) {
    const int J = 2 + t % 4;
    Vector p(J);
    for (int j = 0; j < J; ++j) p[j] = u(rng);
    const Vector s = random_simplex(rng, J + 1);
    const auto k = rc_kernel(p, u(rng));
    const auto r = invert_sigma(k, s);
    EXPECT_LT((k.sigma(r.delta) - s.tail(J)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Inversion, AcceleratedAndPlainAgree) {
  const Vector p = (Vector(2) << 2.5, 1.0).finished();
  const auto k = rc_kernel(p, 1.5);
  InversionOptions plain;
  plain.accelerate = false;
  plain.max_iter = 100000;
  for (double s0 : {0.05, 0.3, 0.8}) {
    const Vector s = assemble_shares(s0, (Vector(2) << 0.3, 0.7).finished());
    const auto a = invert_sigma(k, s), b = invert_sigma(k, s, plain);
    EXPECT_LT((a.delta - b.delta).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE(a.iterations, b.iterations);
  }
}

TEST(Inversion, PlainContractionResidualNeverIncreases) {
  InversionOptions plain;
  plain.accelerate = false;
  plain.record_history = true;
  plain.max_iter = 100000;
  const auto k = rc_kernel((Vector(3) << 1.0, 2.0, 3.0).finished(), 2.0);
  const auto r = invert_sigma(k, (Vector(4) << 0.2, 0.3, 0.25, 0.25).finished(), plain);
  ASSERT_GT(r.history.size(), 5u);
  for (std::size_t i = 1; i < r.history.size(); ++i) EXPECT_LE(r.history[i], r.history[i - 1] * (1.0 + 1e-12));
}

TEST(Inversion, WarmStartDoesNotChangeTheFixedPoint) {
  const auto k = rc_kernel((Vector(2) << 3.0, 1.0).finished(), 1.0);
  const Vector s = assemble_shares(0.2, (Vector(2) << 0.4, 0.6).finished());
  const auto cold = invert_sigma(k, s);
  const auto warm = invert_sigma(k, s, {}, Vector(cold.delta.array() + 0.5));
  EXPECT_LT((cold.delta - warm.delta).cwiseAbs().maxCoeff(), 1e-11);
}

TEST(Inversion, TinyOutsideShareConverges) {
  const auto k = rc_kernel((Vector(2) << 3.0, 1.0).finished(), 4.0);
  for (double s0 : {1e-4, 0.9999}) {
    const Vector s = assemble_shares(s0, (Vector(2) << 0.3, 0.7).finished());
    const auto r = invert_sigma(k, s);
    EXPECT_LT(r.residual, 1e-12);
    EXPECT_NEAR(k.outside_share(r.delta), s0, 1e-12 * std::max(1.0, s0 * 10));
  }
}

TEST(Inversion, ReportsNonConvergence) {
  InversionOptions plain;
  plain.accelerate = false;
  plain.max_iter = 3;
  const auto k = rc_kernel((Vector(2) << 3.0, 1.0).finished(), 1.0);
  try {
    invert_sigma(k, assemble_shares(1e-3, (Vector(2) << 0.3, 0.7).finished()), plain);
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_EQ(e.iterations(), 3);
    EXPECT_GT(e.residual(), 1e-12);
  }
}

TEST(Inversion, RejectsInvalidShareVectors) {
  const auto k = rc_kernel((Vector(2) << 3.0, 1.0).finished(), 1.0);
  EXPECT_THROW(invert_sigma(k, (Vector(3) << 0.0, 0.5, 0.5).finished()), DataError);
  EXPECT_THROW(invert_sigma(k, (Vector(3) << 0.2, 0.5, 0.5).finished()), DataError);
  EXPECT_THROW(invert_sigma(k, (Vector(2) << 0.5, 0.5).finished()), DataError);
  EXPECT_THROW(assemble_shares(1.0, (Vector(2) << 0.5, 0.5).finished()), DataError);
}

TEST(DemandShocks, RecoverTheShocksThatGeneratedTheShares) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  const auto mix = MixingSpec::price_coefficient(1, 0, 15);
  for (int t = 0; t < 50; ++t) {
    const auto th = theta(1.0 + 0.3 * n(rng), n(rng), std::abs(n(rng)));
    const Vector p = (Vector(2) << 2.0 + n(rng), 1.0 + 0.5 * n(rng)).finished();
    const Vector xi = (Vector(2) << n(rng), n(rng)).finished();
    const Matrix x = Matrix::Ones(2, 1);
    const Vector s = choice_probabilities(th, mix, x, p, xi);
    EXPECT_LT((demand_shocks(s, x, p, th, mix) - xi).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Inversion, SymmetricLogitIsZero) {
  const ShareKernel k(build_quadrature(MixingSpec::degenerate(), {}), Matrix::Zero(2, 1), Vector::Zero(2));
  InversionOptions slow;
  slow.logit_fast_path = false;
  for (const auto& o : {InversionOptions{}, slow})
    EXPECT_LT(invert_sigma(k, Vector::Constant(3, 1.0 / 3.0), o).delta.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DemandShocks, PlainLogitClosedForm) {
  const Vector s = (Vector(3) << 0.25, 0.45, 0.30).finished();
  const Matrix x = (Matrix(2, 2) << 1.0, 0.5, 1.0, -1.5).finished();
  const Vector p = (Vector(2) << 1.7, 0.6).finished();
  const auto th = logit_theta(0.8, (Vector(2) << 0.3, -0.2).finished());
  const Vector xi = demand_shocks(s, x, p, th, MixingSpec::degenerate());
  for (int j = 0; j < 2; ++j)
    EXPECT_NEAR(xi[j], std::log(s[j + 1] / s[0]) - x.row(j).dot(th.beta) + 0.8 * p[j], 1e-14);
  EXPECT_LT(demand_shocks(Vector::Constant(3, 1.0 / 3.0), x, p, logit_theta(0.0, Vector::Zero(2)),
                          MixingSpec::degenerate())
                .cwiseAbs()
                .maxCoeff(),
            1e-15);
}
