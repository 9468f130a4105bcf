#pragma once

#include <string>
#include <vector>

#include "emm/mixture.hpp"

namespace emm {

/// Squared 2-Wasserstein distance between two elliptical laws of one family:
/// ‖Δμ‖² + w·tr(Σ₁ + Σ₂ − 2(Σ₁^{1/2}Σ₂Σ₁^{1/2})^{1/2}) with w = E[R²]/m, or
/// w = 1 when `unit_weight` is set. Throws Unavailable when E[R²] is
/// infinite and unit_weight is false. Symmetric in its arguments bit for bit.
[[nodiscard]] double w2_elliptical(const EllipticalComponent &c1, const EllipticalComponent &c2,
                                   bool unit_weight = false);

struct TransportPlan {
  std::vector<int> gamma;        ///< component i of the first model maps to gamma[i]
  double cost = 0.0;             ///< (1/k) Σ_i W2²(X_i, X'_{gamma[i]})
  double probability_term = 0.0; ///< arccos(Σ_i sqrt(π_i π'_{gamma[i]}))
  bool exact = true;             ///< false when found by assignment + swaps

  [[nodiscard]] double value() const noexcept { return cost + probability_term; }
};

/// Permutation count up to which d_u enumerates every plan.
inline constexpr int kExactPermutationLimit = 8;

/// Approximate mixture distance: minimum over component bijections of the
/// averaged component W2² plus the arccos weight term.
[[nodiscard]] TransportPlan d_u(const MixtureModel &a, const MixtureModel &b,
                                bool unit_weight = false);

/// One random projection together with the sorted projected data and the
/// quadrature grid the projected model density lives on.
struct ProjectionContext {
  VectorXd p;
  std::vector<double> projected; ///< ascending
  std::vector<double> grid;      ///< strictly increasing nodes
  std::vector<double> weights;   ///< trapezoid weights of the grid

  static constexpr int kDefaultNodes = 1024;

  /// Projects `samples` on p (normalized here) and spans the grid over
  /// [min − 4σ̂, max + 4σ̂]. Throws DegenerateGrid when the projected
  /// samples have zero spread.
  [[nodiscard]] static ProjectionContext build(const MatrixXd &samples, const VectorXd &p,
                                               int nodes = kDefaultNodes);
  /// Same, from already projected values (any order).
  [[nodiscard]] static ProjectionContext from_projected(std::vector<double> projected,
                                                        int nodes = kDefaultNodes);
  /// Explicit grid; used by tests that need a specific discretization.
  [[nodiscard]] static ProjectionContext with_grid(std::vector<double> projected,
                                                   std::vector<double> grid);
};

/// Projected mixture density of the parameters on the context grid:
/// Σ π_i c_m σ_i⁻¹ g((y − pᵀμ_i)²/σ_i²) with σ_i² = pᵀΣ_ip. Nodes where the
/// generator is singular take the average of their finite neighbours.
[[nodiscard]] std::vector<double> projected_density(const MixtureParams &params,
                                                    const ProjectionContext &ctx);
[[nodiscard]] std::vector<double> projected_density(const MixtureModel &model,
                                                    const ProjectionContext &ctx);

/// Solution of the 1-D semi-discrete problem between the piecewise-linear
/// model density (normalized by its grid mass) and the uniform empirical
/// measure on the projected samples.
struct SemiDiscreteSolution {
  double cost = 0.0;                ///< ∫ (y − T(y))² ρ̂(y) dy
  double mass = 0.0;                ///< grid mass of the unnormalized density
  std::vector<double> boundaries;   ///< cell edges b_0..b_n of T's level sets
  std::vector<double> phi;          ///< potential at the grid nodes, φ(grid[0]) = 0
  std::vector<double> phi_hat;      ///< ∫ φ·hat_k dy for each node's hat function
  double phi_mean = 0.0;            ///< ∫ φ ρ̂ dy

  /// dJ/dρ_k for the unnormalized node values: (phi_hat_k − phi_mean·w_k)/mass.
  [[nodiscard]] std::vector<double> density_sensitivity(const ProjectionContext &ctx) const;
};

[[nodiscard]] SemiDiscreteSolution solve_semidiscrete(const ProjectionContext &ctx,
                                                      const std::vector<double> &density);

[[nodiscard]] double w2_1d_semidiscrete(const ProjectionContext &ctx,
                                        const std::vector<double> &density);
[[nodiscard]] std::vector<double> kantorovich_potential(const ProjectionContext &ctx,
                                                        const std::vector<double> &density);
/// The monotone map T evaluated at the grid nodes.
[[nodiscard]] std::vector<double> transport_map(const ProjectionContext &ctx,
                                                const std::vector<double> &density);

/// Average of w2_1d_semidiscrete over the given projections.
[[nodiscard]] double sliced_cost(const MixtureModel &model, const MatrixXd &samples,
                                 const std::vector<VectorXd> &projections);
[[nodiscard]] double sliced_cost(const MixtureParams &params, const MatrixXd &samples,
                                 const std::vector<VectorXd> &projections);

/// Average over prebuilt contexts (fixed projections, data already sorted).
[[nodiscard]] double sliced_cost(const MixtureParams &params,
                                 const std::vector<ProjectionContext> &contexts);

/// Replaces non-finite entries by the mean of the nearest finite neighbours
/// on each side (or the single available one). All-non-finite input throws
/// DegenerateGrid.
void repair_nonfinite(std::vector<double> &values);

/// `count` independent uniform directions on the unit sphere.
[[nodiscard]] std::vector<VectorXd> random_projections(Rng &rng, int m, int count);

struct EmpiricalW2 {
  double value = 0.0;
  std::string method; ///< "sorted", "assignment" or "sliced"
};

inline constexpr int kAssignmentLimit = 2048;
inline constexpr int kSlicedProjections = 512;

/// Squared W2 between two equal-size sample sets: sorted matching in 1-D,
/// exact assignment for n ≤ 2048, otherwise m times the sliced W2² over 512
/// random directions (exact for translations and isotropic rescalings).
[[nodiscard]] EmpiricalW2 empirical_w2(const MatrixXd &x, const MatrixXd &y, Rng &rng);

/// Model against data: n = data rows stratified model draws versus the data.
[[nodiscard]] EmpiricalW2 mc_mixture_w2(const MixtureModel &model, const MatrixXd &data,
                                        Rng &rng);
/// Model against model: n stratified draws from each.
[[nodiscard]] EmpiricalW2 mc_mixture_w2(const MixtureModel &a, const MixtureModel &b, Rng &rng,
                                        std::size_t n);

/// Minimum-cost perfect matching on a square cost matrix; returns the column
/// assigned to each row.
[[nodiscard]] std::vector<int> solve_assignment(const MatrixXd &cost);

} // namespace emm
