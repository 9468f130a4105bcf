#include <cmath>

#include <gtest/gtest.h>

#include "emm/error.hpp"
#include "emm/manifold.hpp"
#include "oracles.hpp"

using namespace emm;

TEST(Lyapunov, IdentityHalvesTheRightHandSide) {
  std::mt19937_64 gen(1);
  const MatrixXd c = oracle::random_symmetric(4, gen);
  const PdPoint id(MatrixXd::Identity(4, 4));
  EXPECT_LT((lyapunov_solve(id, c) - 0.5 * c).norm(), 1e-14);
}

TEST(Lyapunov, DiagonalExample) {
  MatrixXd a = MatrixXd::Zero(2, 2);
  a.diagonal() << 1.0, 3.0;
  MatrixXd c(2, 2);
  c << 2.0, 4.0, 4.0, 6.0;
  // B_ij = C_ij / (a_i + a_j).
  MatrixXd expected(2, 2);
  expected << 1.0, 1.0, 1.0, 1.0;
  EXPECT_LT((lyapunov_solve(PdPoint(a), c) - expected).norm(), 1e-14);
}

TEST(Lyapunov, ResidualAndLinearity) {
  std::mt19937_64 gen(2);
  for (int m : {1, 3, 7}) {
    const MatrixXd a = oracle::random_spd(m, gen, 0.1, 5.0);
    const MatrixXd c1 = oracle::random_symmetric(m, gen), c2 = oracle::random_symmetric(m, gen);
    const PdPoint p(a);
    const MatrixXd b = lyapunov_solve(p, c1);
    EXPECT_LT((a * b + b * a - c1).norm(), 1e-12 * c1.norm());
    EXPECT_LT((lyapunov_solve(p, 2.0 * c1 - c2) - (2.0 * b - lyapunov_solve(p, c2))).norm(), 1e-12);
  }
}

TEST(PdPoint, RejectsIndefiniteMatrices) {
  MatrixXd a(2, 2);
  a << 1.0, 0.0, 0.0, -1e-3;
  EXPECT_THROW(PdPoint{a}, Error);
}

TEST(RiemGrad, SymmetricProductForm) {
  MatrixXd sigma = MatrixXd::Zero(2, 2);
  sigma.diagonal() << 2.0, 1.0;
  MatrixXd egrad(2, 2);
  egrad << 1.0, 0.5, 0.5, -1.0;
  MatrixXd expected(2, 2);
  expected << 4.0, 1.5, 1.5, -2.0;
  EXPECT_LT((riem_grad_sigma(PdPoint(sigma), egrad) - expected).norm(), 1e-15);
}

TEST(RiemGrad, MetricDuality) {
  // ⟨grad, V⟩_Σ = ½ tr(egrad·V) for every symmetric V.
  std::mt19937_64 gen(3);
  for (int m : {1, 2, 5}) {
    const PdPoint sigma(oracle::random_spd(m, gen));
    const MatrixXd egrad = oracle::random_symmetric(m, gen);
    const MatrixXd grad = riem_grad_sigma(sigma, egrad);
    for (int rep = 0; rep < 3; ++rep) {
      const MatrixXd v = oracle::random_symmetric(m, gen);
      EXPECT_NEAR(metric_sigma(sigma, grad, v), 0.5 * (egrad * v).trace(), 1e-11);
    }
  }
}

TEST(Metric, SymmetricPositiveDefinite) {
  std::mt19937_64 gen(4);
  const PdPoint sigma(oracle::random_spd(3, gen));
  for (int rep = 0; rep < 10; ++rep) {
    const MatrixXd u = oracle::random_symmetric(3, gen), v = oracle::random_symmetric(3, gen);
    EXPECT_GT(metric_sigma(sigma, u, u), 0.0);
    EXPECT_NEAR(metric_sigma(sigma, u, v), metric_sigma(sigma, v, u), 1e-12);
  }
  EXPECT_EQ(metric_sigma(sigma, MatrixXd::Zero(3, 3), MatrixXd::Zero(3, 3)), 0.0);
}

TEST(Metric, ProductSumsBlocks) {
  std::mt19937_64 gen(5);
  const std::vector<PdPoint> sigmas = {PdPoint(oracle::random_spd(2, gen)), PdPoint(oracle::random_spd(2, gen))};
  TangentUpdate a{Eigen::Vector2d(1.0, 2.0), {Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 3)},
                  {oracle::random_symmetric(2, gen), oracle::random_symmetric(2, gen)}};
  TangentUpdate b{Eigen::Vector2d(-1.0, 0.5), {Eigen::Vector2d(2, 2), Eigen::Vector2d(1, 1)},
                  {oracle::random_symmetric(2, gen), oracle::random_symmetric(2, gen)}};
  const double expected = a.d_sqrtpi.dot(b.d_sqrtpi) + a.d_mu[0].dot(b.d_mu[0]) + a.d_mu[1].dot(b.d_mu[1]) +
                          metric_sigma(sigmas[0], a.d_sigma[0], b.d_sigma[0]) +
                          metric_sigma(sigmas[1], a.d_sigma[1], b.d_sigma[1]);
  EXPECT_NEAR(metric(sigmas, a, b), expected, 1e-12);
}

TEST(ExpSigma, ScalarCase) {
  // (step/(2σ) + 1)² σ with σ = 1, step = −0.2.
  const PdPoint one(MatrixXd::Ones(1, 1));
  EXPECT_NEAR(exp_sigma(one, MatrixXd::Constant(1, 1, -0.2)).matrix()(0, 0), 0.81, 1e-15);
}

TEST(ExpSigma, ZeroStepIsIdentity) {
  std::mt19937_64 gen(6);
  const MatrixXd s = oracle::random_spd(4, gen);
  EXPECT_LT((exp_sigma(PdPoint(s), MatrixXd::Zero(4, 4)).matrix() - s).norm(), 1e-14);
}

TEST(ExpSigma, FirstOrderRetraction) {
  // ‖Exp(tV) − (Σ + tV)‖ = O(t²).
  std::mt19937_64 gen(7);
  const PdPoint sigma(oracle::random_spd(3, gen));
  const MatrixXd v = oracle::random_symmetric(3, gen);
  std::vector<double> err;
  const std::vector<double> ts = {1e-1, 1e-2, 1e-3};
  for (double t : ts)
    err.push_back((exp_sigma_matrix(sigma, t * v) - (sigma.matrix() + t * v)).norm());
  for (std::size_t i = 0; i + 1 < ts.size(); ++i)
    EXPECT_GE(std::log(err[i] / err[i + 1]) / std::log(ts[i] / ts[i + 1]), 1.9);
}

TEST(ExpSigma, LargeStepLeavingTheConeThrows) {
  const PdPoint one(MatrixXd::Ones(1, 1));
  // (−2/2 + 1)² = 0.
  try {
    (void)exp_sigma(one, MatrixXd::Constant(1, 1, -2.0));
    FAIL() << "expected StepTooLarge";
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::StepTooLarge);
  }
}

TEST(ExpSigma, StaysSymmetric) {
  std::mt19937_64 gen(8);
  const PdPoint sigma(oracle::random_spd(5, gen));
  const MatrixXd out = exp_sigma(sigma, 0.1 * oracle::random_symmetric(5, gen)).matrix();
  EXPECT_EQ(out, out.transpose());
}

TEST(ExpSphere, GreatCircleStep) {
  const SpherePoint s{Eigen::Vector2d(1.0, 0.0)};
  const SpherePoint out = exp_sphere(s, Eigen::Vector2d(0.0, -0.1));
  EXPECT_NEAR(out.s(0), std::cos(0.1), 1e-15);
  EXPECT_NEAR(out.s(1), std::sin(0.1), 1e-15);
}

TEST(ExpSphere, PreservesNorm) {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> normal;
  VectorXd s(6), g(6);
  for (int i = 0; i < 6; ++i) {
    s(i) = normal(gen);
    g(i) = 3.0 * normal(gen);
  }
  s.normalize();
  const SpherePoint p{s};
  const VectorXd t = project_sphere_grad(p, g);
  EXPECT_NEAR(exp_sphere(p, t).s.norm(), 1.0, 1e-12);
  EXPECT_EQ(exp_sphere(p, VectorXd::Zero(6)).s, s);
}

TEST(ProjectSphereGrad, RemovesNormalComponent) {
  const SpherePoint p{Eigen::Vector3d(0.0, 0.6, 0.8)};
  const VectorXd t = project_sphere_grad(p, Eigen::Vector3d(1.0, 2.0, 3.0));
  EXPECT_NEAR(t.dot(p.s), 0.0, 1e-15);
  // egrad − (sᵀegrad)s with sᵀegrad = 3.6.
  EXPECT_NEAR(t(0), 1.0, 1e-15);
  EXPECT_NEAR(t(1), 2.0 - 3.6 * 0.6, 1e-15);
  EXPECT_NEAR(t(2), 3.0 - 3.6 * 0.8, 1e-15);
}

TEST(ClampSphere, FloorsAndRenormalizes) {
  const SpherePoint out = clamp_sphere({Eigen::Vector3d(1.0, 0.0, -1e-9)}, 1e-3);
  EXPECT_NEAR(out.s.norm(), 1.0, 1e-15);
  EXPECT_GT(out.s.minCoeff(), 0.0);
}

TEST(TransportSigma, IdentityWhenPointsCoincide) {
  std::mt19937_64 gen(10);
  const PdPoint s(oracle::random_spd(3, gen));
  const MatrixXd u = oracle::random_symmetric(3, gen);
  EXPECT_LT((transport_sigma(s, s, u) - u).norm(), 1e-12);
}

TEST(TransportSigma, ScalarRatio) {
  const PdPoint a(MatrixXd::Constant(1, 1, 2.0)), b(MatrixXd::Constant(1, 1, 5.0));
  EXPECT_NEAR(transport_sigma(a, b, MatrixXd::Constant(1, 1, 0.7))(0, 0), 0.7 * 5.0 / 2.0, 1e-15);
}

TEST(TransportSigma, OutputIsSymmetric) {
  std::mt19937_64 gen(11);
  const PdPoint a(oracle::random_spd(4, gen)), b(oracle::random_spd(4, gen));
  const MatrixXd out = transport_sigma(a, b, oracle::random_symmetric(4, gen));
  EXPECT_LT((out - out.transpose()).norm(), 1e-14);
}
