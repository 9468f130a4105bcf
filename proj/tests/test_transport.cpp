#include <algorithm>
#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "emm/error.hpp"
#include "emm/transport.hpp"
#include "oracles.hpp"

using namespace emm;

namespace {

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = a + (b - a) * i / (n - 1);
  return out;
}

MixtureModel normal_1d(double mu, double var) {
  return {EllipticalFamily::gaussian(1), VectorXd::Ones(1), {VectorXd::Constant(1, mu)},
          {MatrixXd::Constant(1, 1, var)}};
}

double normal_density(double y) { return std::exp(-0.5 * y * y) / std::sqrt(2.0 * std::numbers::pi); }

// W2² between N(mu, s²) and the uniform measure on sorted points x by
// quantile coupling: sample x_j receives the quantile slab
// [F⁻¹((j−1)/n), F⁻¹(j/n)], integrated in closed form.
double quantile_w2_normal(double mu, double s, const std::vector<double> &x) {
  const double n = static_cast<double>(x.size());
  double total = 0.0;
  const double inf = std::numeric_limits<double>::infinity();
  double a = -inf;
  for (std::size_t j = 0; j < x.size(); ++j) {
    double b = inf;
    if (j + 1 < x.size()) {
      // Invert the standard normal CDF by bisection.
      const double level = (j + 1.0) / n;
      double lo = -40.0, hi = 40.0;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (oracle::normal_cdf(mid) < level ? lo : hi) = mid;
      }
      b = 0.5 * (lo + hi);
    }
    // With y = mu + s z and c = (x_j − mu)/s:
    // s² ∫ (z − c)² φ(z) dz = s² [M2 − 2c M1 + c² M0] over [a, b].
    const double c = (x[j] - mu) / s;
    const double m0 = oracle::normal_cdf(b) - oracle::normal_cdf(a);
    const double m1 = normal_density(a) - normal_density(b);
    auto zphi = [](double z) { return std::isfinite(z) ? z * normal_density(z) : 0.0; };
    const double m2 = m0 - (zphi(b) - zphi(a));
    total += s * s * (m2 - 2.0 * c * m1 + c * c * m0);
    a = b;
  }
  return total;
}

std::vector<double> normal_draws(std::uint64_t seed, int n, double mu = 0.0, double s = 1.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(mu, s);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (auto &v : out)
    v = normal(gen);
  std::sort(out.begin(), out.end());
  return out;
}

} // namespace

TEST(W2Elliptical, IsotropicScatterExample) {
  const auto g = EllipticalFamily::gaussian(2);
  const EllipticalComponent a(g, VectorXd::Zero(2), MatrixXd::Identity(2, 2));
  const EllipticalComponent b(g, VectorXd::Zero(2), 4.0 * MatrixXd::Identity(2, 2));
  // tr(I + 4I − 2·2I) = 2.
  EXPECT_NEAR(w2_elliptical(a, b), 2.0, 1e-14);
}

TEST(W2Elliptical, MatchesNewtonSquareRootOracle) {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> normal;
  for (int m : {2, 3, 6}) {
    const MatrixXd s1 = oracle::random_spd(m, gen), s2 = oracle::random_spd(m, gen);
    VectorXd mu(m);
    for (int i = 0; i < m; ++i)
      mu(i) = normal(gen);
    const auto g = EllipticalFamily::gaussian(m);
    const EllipticalComponent a(g, VectorXd::Zero(m), s1), b(g, mu, s2);
    const double expected = mu.squaredNorm() + oracle::bures_newton(s1, s2);
    EXPECT_NEAR(w2_elliptical(a, b), expected, 1e-10 * expected);
    EXPECT_EQ(w2_elliptical(a, b), w2_elliptical(b, a));
  }
}

TEST(W2Elliptical, ScatterTermWeightedBySecondMoment) {
  std::mt19937_64 gen(2);
  const MatrixXd s1 = oracle::random_spd(3, gen), s2 = oracle::random_spd(3, gen);
  const VectorXd mu = VectorXd::Constant(3, 0.5);
  const auto t = EllipticalFamily::student_t(3, 5.0); // E[R²]/m = 5/3
  const EllipticalComponent a(t, VectorXd::Zero(3), s1), b(t, mu, s2);
  const double bures = oracle::bures_newton(s1, s2);
  EXPECT_NEAR(w2_elliptical(a, b), mu.squaredNorm() + 5.0 / 3.0 * bures, 1e-10);
  EXPECT_NEAR(w2_elliptical(a, b, true), mu.squaredNorm() + bures, 1e-10);
}

TEST(W2Elliptical, HeavyTailWithoutUnitWeightIsUnavailable) {
  const auto c = EllipticalFamily::cauchy(2);
  const EllipticalComponent a(c, VectorXd::Zero(2), MatrixXd::Identity(2, 2));
  try {
    (void)w2_elliptical(a, a);
    FAIL() << "expected Unavailable";
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::Unavailable);
  }
  EXPECT_EQ(w2_elliptical(a, a, true), 0.0);
}

TEST(W2Elliptical, QuadraticScalingUnderDilation) {
  std::mt19937_64 gen(3);
  const MatrixXd s1 = oracle::random_spd(3, gen), s2 = oracle::random_spd(3, gen);
  const auto g = EllipticalFamily::gaussian(3);
  const VectorXd mu = VectorXd::LinSpaced(3, -1.0, 2.0);
  const double c = 3.0;
  const double base = w2_elliptical({g, VectorXd::Zero(3), s1}, {g, mu, s2});
  const double scaled = w2_elliptical({g, VectorXd::Zero(3), c * c * s1}, {g, c * mu, c * c * s2});
  EXPECT_NEAR(scaled, c * c * base, 1e-10 * scaled);
}

TEST(DU, IdentityIsZero) {
  Rng rng(4);
  const Dataset data = generate_synthetic(3, 4, 10, 10.0, 5.0, rng);
  const TransportPlan plan = d_u(*data.truth, *data.truth);
  EXPECT_EQ(plan.value(), 0.0);
  EXPECT_TRUE(plan.exact);
  EXPECT_EQ(plan.gamma, (std::vector<int>{0, 1, 2, 3}));
}

TEST(DU, SingleComponentReducesToW2) {
  const MixtureModel a = normal_1d(0.0, 1.0), b = normal_1d(2.0, 4.0);
  // (2)² + (1 + 4 − 2·2) = 5.
  EXPECT_NEAR(d_u(a, b).value(), 5.0, 1e-14);
}

TEST(DU, FindsCrossedMatching) {
  const auto g = EllipticalFamily::gaussian(2);
  const MatrixXd i2 = MatrixXd::Identity(2, 2);
  const MixtureModel a(g, Eigen::Vector2d(0.4, 0.6), {Eigen::Vector2d(0, 0), Eigen::Vector2d(10, 0)}, {i2, 2 * i2});
  const MixtureModel b(g, Eigen::Vector2d(0.6, 0.4), {Eigen::Vector2d(10, 0), Eigen::Vector2d(0, 0)}, {2 * i2, i2});
  const TransportPlan plan = d_u(a, b);
  EXPECT_EQ(plan.gamma, (std::vector<int>{1, 0}));
  EXPECT_EQ(plan.cost, 0.0);
  EXPECT_NEAR(plan.probability_term, 0.0, 1e-7);
}

TEST(DU, ProbabilityTermIsArccosOfBhattacharyya) {
  const auto g = EllipticalFamily::gaussian(1);
  const MatrixXd one = MatrixXd::Ones(1, 1);
  const std::vector<VectorXd> mu = {VectorXd::Constant(1, 0.0), VectorXd::Constant(1, 50.0)};
  const MixtureModel a(g, Eigen::Vector2d(0.2, 0.8), mu, {one, one});
  const MixtureModel b(g, Eigen::Vector2d(0.5, 0.5), mu, {one, one});
  const TransportPlan plan = d_u(a, b);
  EXPECT_EQ(plan.gamma, (std::vector<int>{0, 1}));
  EXPECT_NEAR(plan.probability_term, std::acos(std::sqrt(0.1) + std::sqrt(0.4)), 1e-14);
}

TEST(DU, SymmetricAndNonnegative) {
  for (int k : {2, 3, 5}) {
    Rng r1(child_seed(5, 1, static_cast<std::uint64_t>(k))), r2(child_seed(5, 2, static_cast<std::uint64_t>(k)));
    const MixtureModel a = *generate_synthetic(2, k, 10, 5.0, 3.0, r1).truth;
    const MixtureModel b = *generate_synthetic(2, k, 10, 5.0, 3.0, r2).truth;
    const double ab = d_u(a, b).value(), ba = d_u(b, a).value();
    EXPECT_GT(ab, 0.0);
    EXPECT_NEAR(ab, ba, 1e-12 * ab);
  }
}

TEST(DU, LargeKFallsBackToAssignment) {
  Rng r1(6), r2(7);
  const MixtureModel a = *generate_synthetic(2, 10, 10, 3.0, 3.0, r1).truth;
  const MixtureModel b = *generate_synthetic(2, 10, 10, 3.0, 3.0, r2).truth;
  const TransportPlan plan = d_u(a, b);
  EXPECT_FALSE(plan.exact);
  std::vector<int> sorted = plan.gamma;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 10; ++i)
    EXPECT_EQ(sorted[static_cast<std::size_t>(i)], i);
  EXPECT_EQ(d_u(a, a).value(), 0.0);
}

TEST(SemiDiscrete, MatchesQuantileCouplingForNormalModel) {
  for (auto [mu, s, n] : {std::tuple{0.0, 1.0, 1}, std::tuple{0.0, 1.0, 50}, std::tuple{1.0, 2.0, 300}}) {
    const auto xs = normal_draws(static_cast<std::uint64_t>(n), n, 0.5, 1.5);
    const auto grid = linspace(mu - 12.0 * s, mu + 12.0 * s, 8001);
    const ProjectionContext ctx = ProjectionContext::with_grid(xs, grid);
    const double cost = w2_1d_semidiscrete(ctx, projected_density(normal_1d(mu, s * s), ctx));
    EXPECT_NEAR(cost, quantile_w2_normal(mu, s, xs), 1e-5) << "n=" << n;
  }
}

TEST(SemiDiscrete, PointMassTargetGivesSecondMoment) {
  // Every sample at 2, model N(0, 1): E(Y − 2)² = 1 + 4.
  const std::vector<double> xs(40, 2.0);
  const ProjectionContext ctx = ProjectionContext::with_grid(xs, linspace(-12.0, 12.0, 4001));
  const auto density = projected_density(normal_1d(0.0, 1.0), ctx);
  const SemiDiscreteSolution sol = solve_semidiscrete(ctx, density);
  EXPECT_NEAR(sol.cost, 5.0, 1e-5);
  // Every point moves to 2, so φ(y) = (y − 2)² − (y₀ − 2)².
  const double y0 = ctx.grid.front();
  for (std::size_t k = 0; k < ctx.grid.size(); k += 250) {
    const double y = ctx.grid[k];
    EXPECT_NEAR(sol.phi[k], (y - 2.0) * (y - 2.0) - (y0 - 2.0) * (y0 - 2.0), 1e-9);
  }
}

TEST(SemiDiscrete, SelfSampleCostIsSmall) {
  const auto xs = normal_draws(8, 20000);
  const ProjectionContext ctx = ProjectionContext::from_projected(xs);
  EXPECT_LT(w2_1d_semidiscrete(ctx, projected_density(normal_1d(0.0, 1.0), ctx)), 2e-3);
}

TEST(SemiDiscrete, MapIsMonotoneAndPotentialSlopeMatches) {
  const auto xs = normal_draws(9, 200, 1.0, 2.0);
  const ProjectionContext ctx = ProjectionContext::from_projected(xs, 2048);
  const auto density = projected_density(normal_1d(0.0, 1.0), ctx);
  const auto t = transport_map(ctx, density);
  const auto phi = kantorovich_potential(ctx, density);
  EXPECT_EQ(phi.front(), 0.0);
  for (std::size_t k = 0; k + 1 < t.size(); ++k) {
    EXPECT_LE(t[k], t[k + 1]);
    // Inside one cell φ′(y) = 2(y − T(y)); check the secant where T is constant.
    if (t[k] == t[k + 1]) {
      const double h = ctx.grid[k + 1] - ctx.grid[k];
      const double mid = 0.5 * (ctx.grid[k] + ctx.grid[k + 1]);
      EXPECT_NEAR((phi[k + 1] - phi[k]) / h, 2.0 * (mid - t[k]), 1e-8 * (1.0 + std::abs(mid)));
    }
  }
}

TEST(SemiDiscrete, SensitivityMatchesFiniteDifferences) {
  const auto xs = normal_draws(10, 30, 0.3, 1.2);
  const ProjectionContext ctx = ProjectionContext::from_projected(xs, 257);
  const MixtureModel model(EllipticalFamily::student_t(1, 4.0), Eigen::Vector2d(0.4, 0.6),
                           {VectorXd::Constant(1, -1.0), VectorXd::Constant(1, 1.5)},
                           {MatrixXd::Constant(1, 1, 0.5), MatrixXd::Constant(1, 1, 1.0)});
  const auto density = projected_density(model, ctx);
  const auto sens = solve_semidiscrete(ctx, density).density_sensitivity(ctx);
  for (std::size_t k = 3; k < density.size(); k += 23) {
    const double h = 1e-6 * std::max(density[k], 1e-3);
    auto plus = density, minus = density;
    plus[k] += h;
    minus[k] -= h;
    const double fd = (w2_1d_semidiscrete(ctx, plus) - w2_1d_semidiscrete(ctx, minus)) / (2.0 * h);
    EXPECT_NEAR(sens[k], fd, 1e-6 * (1.0 + std::abs(fd))) << "node " << k;
  }
}

TEST(SemiDiscrete, RejectsBadInput) {
  const ProjectionContext ctx = ProjectionContext::from_projected({0.0, 1.0}, 16);
  EXPECT_THROW((void)w2_1d_semidiscrete(ctx, std::vector<double>(16, 0.0)), Error);
  EXPECT_THROW((void)w2_1d_semidiscrete(ctx, std::vector<double>(15, 1.0)), Error);
  std::vector<double> negative(16, 1.0);
  negative[3] = -1.0;
  EXPECT_THROW((void)w2_1d_semidiscrete(ctx, negative), Error);
  EXPECT_THROW((void)ProjectionContext::from_projected({1.0, 1.0, 1.0}), Error);
}

TEST(SlicedCost, FirstAxisProjectionIsTheMarginalProblem) {
  Rng rng(11);
  const Dataset data = generate_synthetic(3, 2, 300, 4.0, 3.0, rng);
  const MixtureModel &truth = *data.truth;
  const MixtureModel marginal(EllipticalFamily::gaussian(1), truth.weights(),
                              {truth.mu(0).head(1), truth.mu(1).head(1)},
                              {truth.sigma(0).topLeftCorner(1, 1), truth.sigma(1).topLeftCorner(1, 1)});
  const VectorXd e1 = VectorXd::Unit(3, 0);
  const ProjectionContext ctx = ProjectionContext::from_projected(
      std::vector<double>(data.samples.col(0).data(), data.samples.col(0).data() + data.n()));
  EXPECT_NEAR(sliced_cost(truth, data.samples, {e1}),
              w2_1d_semidiscrete(ctx, projected_density(marginal, ctx)), 1e-12);
}

TEST(SlicedCost, RequiresUnitDirections) {
  const MixtureModel model = normal_1d(0.0, 1.0);
  EXPECT_THROW((void)sliced_cost(model, MatrixXd::Random(10, 1), {VectorXd::Constant(1, 2.0)}), Error);
  EXPECT_THROW((void)sliced_cost(model, MatrixXd::Random(10, 1), {}), Error);
}

TEST(RepairNonfinite, AveragesNeighbours) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> v = {inf, 2.0, inf, inf, 6.0, std::nan("")};
  repair_nonfinite(v);
  EXPECT_EQ(v, (std::vector<double>{2.0, 2.0, 4.0, 4.0, 6.0, 6.0}));
  std::vector<double> bad = {inf, inf};
  EXPECT_THROW(repair_nonfinite(bad), Error);
}

TEST(Assignment, MatchesBruteForce) {
  std::mt19937_64 gen(12);
  std::uniform_real_distribution<double> unif(0.0, 10.0);
  for (int n : {1, 3, 6}) {
    MatrixXd cost(n, n);
    for (Eigen::Index i = 0; i < cost.size(); ++i)
      cost.data()[i] = unif(gen);
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
      double c = 0.0;
      for (int i = 0; i < n; ++i)
        c += cost(i, perm[static_cast<std::size_t>(i)]);
      best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    const auto assigned = solve_assignment(cost);
    double got = 0.0;
    for (int i = 0; i < n; ++i)
      got += cost(i, assigned[static_cast<std::size_t>(i)]);
    EXPECT_NEAR(got, best, 1e-12);
  }
}

TEST(EmpiricalW2, PointMasses) {
  Rng rng(1);
  const auto r = empirical_w2(MatrixXd::Zero(1, 1), MatrixXd::Constant(1, 1, 3.0), rng);
  EXPECT_EQ(r.value, 9.0);
  EXPECT_EQ(r.method, "sorted");
  const MatrixXd x = MatrixXd::Random(50, 3);
  const auto same = empirical_w2(x, x, rng);
  EXPECT_NEAR(same.value, 0.0, 1e-15);
  EXPECT_EQ(same.method, "assignment");
}

TEST(EmpiricalW2, AssignmentCloudsApproachClosedForm) {
  std::mt19937_64 gen(13);
  const MatrixXd s2 = oracle::random_spd(2, gen, 0.5, 2.0);
  const auto g = EllipticalFamily::gaussian(2);
  const MixtureModel a(g, VectorXd::Ones(1), {VectorXd::Zero(2)}, {MatrixXd::Identity(2, 2)});
  const MixtureModel b(g, VectorXd::Ones(1), {Eigen::Vector2d(3.0, 0.0)}, {s2});
  Rng rng(14);
  const EmpiricalW2 r = mc_mixture_w2(a, b, rng, 1024);
  EXPECT_EQ(r.method, "assignment");
  const double exact = w2_elliptical(a.component(0), b.component(0));
  EXPECT_NEAR(r.value, exact, 0.05 * exact);
}

// m·(pᵀΔ)² has mean ‖Δ‖²; with 512 directions in 3-D its relative
// standard error is about 4%.
TEST(EmpiricalW2, SlicedBranchIsExactForTranslationsInExpectation) {
  Rng rng(15);
  const int n = 4096;
  MatrixXd x(n, 3);
  std::normal_distribution<double> normal;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    x.data()[i] = normal(rng);
  const Eigen::RowVector3d shift(2.0, -1.0, 0.5);
  const MatrixXd y = x.rowwise() + shift;
  const EmpiricalW2 r = empirical_w2(x, y, rng);
  EXPECT_EQ(r.method, "sliced");
  EXPECT_NEAR(r.value, shift.squaredNorm(), 0.15 * shift.squaredNorm());
}

TEST(EmpiricalW2, ModelAgainstItsOwnSampleIsSmall) {
  const MixtureModel model = normal_1d(1.0, 2.0);
  Rng rng(16);
  const Dataset data = sample_mixture(model, rng, 5000);
  const EmpiricalW2 r = mc_mixture_w2(model, data.samples, rng);
  EXPECT_EQ(r.method, "sorted");
  EXPECT_LT(r.value, 0.01);
}

TEST(ProjectedBound, SlicedCostBelowComponentBound) {
  // For one direction, W2² between projected laws is bounded by the full W2²
  // of the same coupling; with a single Gaussian component the projected
  // model against an exact quantile sample has cost near zero while the
  // unprojected elliptical distance to a shifted model bounds the shifted cost.
  const auto g = EllipticalFamily::gaussian(2);
  std::mt19937_64 gen(17);
  const MatrixXd s1 = oracle::random_spd(2, gen), s2 = oracle::random_spd(2, gen);
  const MixtureModel a(g, VectorXd::Ones(1), {VectorXd::Zero(2)}, {s1});
  const MixtureModel b(g, VectorXd::Ones(1), {Eigen::Vector2d(1.0, -2.0)}, {s2});
  Rng rng(18);
  const MatrixXd xb = sample_stratified(b, rng, 20000);
  const double bound = w2_elliptical(a.component(0), b.component(0));
  for (const VectorXd &p : random_projections(rng, 2, 16)) {
    const double projected_exact = std::pow(p.dot(b.mu(0)), 2) +
                                   std::pow(std::sqrt(p.dot(s1 * p)) - std::sqrt(p.dot(s2 * p)), 2);
    const double sliced = sliced_cost(a, xb, {p});
    EXPECT_LE(projected_exact, bound + 1e-12);
    EXPECT_NEAR(sliced, projected_exact, 0.02 * (1.0 + projected_exact));
  }
}
