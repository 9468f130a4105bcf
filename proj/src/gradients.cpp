#include "emm/gradients.hpp"

#include <cmath>

#include "emm/error.hpp"

namespace emm {

EuclideanGrad euclidean_grad(const MixtureParams &params, const ProjectionContext &ctx,
                             const SemiDiscreteSolution &solution) {
  if (!params.family.has_generator_derivative())
    throw Error(ErrorCode::UnsupportedGradient,
                "family '" + params.family.name() + "' has no closed-form g'");
  if (ctx.p.size() != params.dim())
    throw Error(ErrorCode::Mismatch, "projection and model dimensions differ");
  const std::vector<double> sens = solution.density_sensitivity(ctx);
  const std::size_t nodes = ctx.grid.size();
  const int k = params.k();
  const MatrixXd ppt = ctx.p * ctx.p.transpose();

  EuclideanGrad out;
  out.g_sqrtpi = VectorXd::Zero(k);
  std::vector<double> g(nodes), dg(nodes);
  for (int i = 0; i < k; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    const double loc = ctx.p.dot(params.mu[ii]);
    const double q = ctx.p.dot(params.sigma[ii] * ctx.p);
    if (!(q > 0.0))
      throw Error(ErrorCode::NotPositiveDefinite, "projected scatter is not positive");
    for (std::size_t n = 0; n < nodes; ++n) {
      const double d = ctx.grid[n] - loc;
      const double t = d * d / q;
      g[n] = params.family.generator(t);
      dg[n] = params.family.generator_derivative(t);
    }
    repair_nonfinite(g);
    repair_nonfinite(dg);

    const double root = params.sqrt_pi(i);
    const double pi = root * root;
    const double sd = std::sqrt(q);
    double a_pi = 0.0, a_mu = 0.0, a_sigma = 0.0;
    for (std::size_t n = 0; n < nodes; ++n) {
      const double d = ctx.grid[n] - loc;
      const double t = d * d / q;
      a_pi += sens[n] * g[n];
      a_mu += sens[n] * dg[n] * d;
      a_sigma += sens[n] * (0.5 * g[n] + dg[n] * t);
    }
    out.g_sqrtpi(i) = 2.0 * root / sd * a_pi;
    out.g_mu.push_back((-2.0 * pi / (sd * q) * a_mu) * ctx.p);
    const double w = -pi / (sd * q) * a_sigma;
    out.w_sigma.push_back(w);
    out.g_sigma.push_back(w * ppt);
  }
  return out;
}

ProjectedObjective projected_objective(const MixtureParams &params, const ProjectionContext &ctx) {
  if (!params.family.has_generator_derivative())
    throw Error(ErrorCode::UnsupportedGradient,
                "family '" + params.family.name() + "' has no closed-form g'");
  const SemiDiscreteSolution sol = solve_semidiscrete(ctx, projected_density(params, ctx));
  return {sol.cost, euclidean_grad(params, ctx, sol)};
}

} // namespace emm
