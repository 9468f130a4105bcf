#include "emm/linalg.hpp"

#include <cmath>

#include "emm/error.hpp"

namespace emm {

bool is_symmetric(const MatrixXd &a, double tol) {
  if (a.rows() != a.cols())
    return false;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

bool is_positive_definite(const MatrixXd &a, double floor) {
  if (a.rows() == 0 || !a.allFinite() || !is_symmetric(a))
    return false;
  const double m = static_cast<double>(a.rows());
  const double trace = a.trace();
  if (!(trace > 0.0))
    return false;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(symmetrized(a), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() > floor * trace / m;
}

void require_positive_definite(const MatrixXd &a, const char *what) {
  if (!is_positive_definite(a))
    throw Error(ErrorCode::NotPositiveDefinite, what);
}

MatrixXd sqrtm_psd(const MatrixXd &a) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(symmetrized(a));
  const VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

double bures_squared(const MatrixXd &a, const MatrixXd &b) {
  const MatrixXd ra = sqrtm_psd(a);
  const MatrixXd cross = symmetrized(ra * b * ra);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cross, Eigen::EigenvaluesOnly);
  const double cross_trace = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  return std::max(0.0, a.trace() + b.trace() - 2.0 * cross_trace);
}

} // namespace emm
