#pragma once

#include <Eigen/Dense>

namespace emm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Scatter matrices are accepted when the smallest eigenvalue exceeds
/// kPdFloor * trace / m.
inline constexpr double kPdFloor = 1e-10;

[[nodiscard]] inline MatrixXd symmetrized(const MatrixXd &a) {
  return 0.5 * (a + a.transpose());
}

[[nodiscard]] bool is_symmetric(const MatrixXd &a, double tol = 1e-10);

/// True when `a` is symmetric and its smallest eigenvalue is above the
/// relative floor.
[[nodiscard]] bool is_positive_definite(const MatrixXd &a,
                                        double floor = kPdFloor);

/// Throws NotPositiveDefinite with `what` as context unless `a` passes
/// is_positive_definite.
void require_positive_definite(const MatrixXd &a, const char *what);

/// Principal square root of a symmetric PSD matrix via eigendecomposition.
[[nodiscard]] MatrixXd sqrtm_psd(const MatrixXd &a);

/// Squared Bures term tr(A + B - 2 (A^1/2 B A^1/2)^1/2).
[[nodiscard]] double bures_squared(const MatrixXd &a, const MatrixXd &b);

} // namespace emm
