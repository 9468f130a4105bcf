#pragma once

#include <vector>

#include "emm/transport.hpp"

namespace emm {

/// Euclidean gradient of the per-projection cost J(θ, p). Every Σ gradient is
/// rank one, w_sigma[i]·ppᵀ.
struct EuclideanGrad {
  VectorXd g_sqrtpi;
  std::vector<VectorXd> g_mu;
  std::vector<MatrixXd> g_sigma;
  std::vector<double> w_sigma;
};

/// Gradient together with the cost it differentiates.
struct ProjectedObjective {
  double cost = 0.0;
  EuclideanGrad grad;
};

/// Integrates the density derivatives of each parameter against the node
/// sensitivities dJ/dρ_k of `solution`. The integrands are those of the
/// projected density Σ π_i c_m σ_i⁻¹ g(t); √π is taken unconstrained, so the
/// result is the gradient of J through the mass-normalized density.
/// Throws UnsupportedGradient for families without g′.
[[nodiscard]] EuclideanGrad euclidean_grad(const MixtureParams &params,
                                           const ProjectionContext &ctx,
                                           const SemiDiscreteSolution &solution);

/// Builds the density on ctx, solves the 1-D problem and differentiates.
[[nodiscard]] ProjectedObjective projected_objective(const MixtureParams &params,
                                                     const ProjectionContext &ctx);

} // namespace emm
