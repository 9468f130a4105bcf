#pragma once

#include <vector>

#include "emm/linalg.hpp"

namespace emm {

/// Symmetric positive-definite matrix with its eigendecomposition, reused by
/// the Lyapunov solves of one iteration.
class PdPoint {
public:
  /// Throws NotPositiveDefinite when λ_min ≤ kPdFloor·tr/m.
  explicit PdPoint(const MatrixXd &sigma);

  [[nodiscard]] const MatrixXd &matrix() const noexcept { return sigma_; }
  [[nodiscard]] const MatrixXd &eigenvectors() const noexcept { return q_; }
  [[nodiscard]] const VectorXd &eigenvalues() const noexcept { return lambda_; }
  [[nodiscard]] int dim() const noexcept { return static_cast<int>(sigma_.rows()); }

private:
  MatrixXd sigma_;
  MatrixXd q_;
  VectorXd lambda_;
};

/// Unit vector of square-rooted mixture weights.
struct SpherePoint {
  VectorXd s;
};

/// Riemannian gradient triple on the product manifold.
struct TangentUpdate {
  VectorXd d_sqrtpi;
  std::vector<VectorXd> d_mu;
  std::vector<MatrixXd> d_sigma;
};

/// B with aB + Ba = c, solved in the eigenbasis of a.
[[nodiscard]] MatrixXd lyapunov_solve(const PdPoint &a, const MatrixXd &c);

/// egrad·Σ + Σ·egrad.
[[nodiscard]] MatrixXd riem_grad_sigma(const PdPoint &sigma, const MatrixXd &egrad);

/// (L_Σ[step] + I) Σ (L_Σ[step] + I) for an already scaled tangent `step`.
/// Throws StepTooLarge when the result falls below the PD floor.
[[nodiscard]] PdPoint exp_sigma(const PdPoint &sigma, const MatrixXd &step);

/// Same map, returning the raw matrix without the PD check.
[[nodiscard]] MatrixXd exp_sigma_matrix(const PdPoint &sigma, const MatrixXd &step);

/// Great-circle step cos‖t‖·s − sin‖t‖/‖t‖·t.
[[nodiscard]] SpherePoint exp_sphere(const SpherePoint &s, const VectorXd &tangent);

/// egrad − (sᵀegrad)s.
[[nodiscard]] VectorXd project_sphere_grad(const SpherePoint &s, const VectorXd &egrad);

/// L_from[u]·to + to·L_from[u].
[[nodiscard]] MatrixXd transport_sigma(const PdPoint &from, const PdPoint &to, const MatrixXd &u);

/// ⟨U, V⟩ = tr(L_Σ[U] Σ L_Σ[V]) on the PD factor (E[R²]/m weight omitted).
[[nodiscard]] double metric_sigma(const PdPoint &sigma, const MatrixXd &u, const MatrixXd &v);

/// Product-manifold inner product: sphere and Euclidean parts use the dot
/// product, the PD parts metric_sigma.
[[nodiscard]] double metric(const std::vector<PdPoint> &sigmas, const TangentUpdate &a,
                            const TangentUpdate &b);

/// Clamps entries below `floor` and renormalizes to unit length.
[[nodiscard]] SpherePoint clamp_sphere(const SpherePoint &s, double floor = 1e-6);

} // namespace emm
