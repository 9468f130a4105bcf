#include "emm/manifold.hpp"

#include <cmath>

#include "emm/error.hpp"

namespace emm {

PdPoint::PdPoint(const MatrixXd &sigma) : sigma_(symmetrized(sigma)) {
  if (sigma_.rows() == 0 || sigma_.rows() != sigma_.cols() || !sigma_.allFinite())
    throw Error(ErrorCode::NotPositiveDefinite, "scatter must be a finite square matrix");
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sigma_);
  q_ = eig.eigenvectors();
  lambda_ = eig.eigenvalues();
  const double m = static_cast<double>(sigma_.rows());
  const double trace = sigma_.trace();
  if (!(trace > 0.0) || !(lambda_.minCoeff() > kPdFloor * trace / m))
    throw Error(ErrorCode::NotPositiveDefinite, "matrix is below the positive-definite floor");
}

MatrixXd lyapunov_solve(const PdPoint &a, const MatrixXd &c) {
  const MatrixXd &q = a.eigenvectors();
  const VectorXd &lambda = a.eigenvalues();
  MatrixXd ct = q.transpose() * c * q;
  const auto m = ct.rows();
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      ct(i, j) /= lambda(i) + lambda(j);
  return q * ct * q.transpose();
}

MatrixXd riem_grad_sigma(const PdPoint &sigma, const MatrixXd &egrad) {
  return egrad * sigma.matrix() + sigma.matrix() * egrad;
}

MatrixXd exp_sigma_matrix(const PdPoint &sigma, const MatrixXd &step) {
  const auto m = sigma.dim();
  const MatrixXd factor = lyapunov_solve(sigma, step) + MatrixXd::Identity(m, m);
  return symmetrized(factor * sigma.matrix() * factor.transpose());
}

PdPoint exp_sigma(const PdPoint &sigma, const MatrixXd &step) {
  const MatrixXd next = exp_sigma_matrix(sigma, step);
  try {
    return PdPoint(next);
  } catch (const Error &) {
    throw Error(ErrorCode::StepTooLarge, "exponential map left the positive-definite cone");
  }
}

SpherePoint exp_sphere(const SpherePoint &s, const VectorXd &tangent) {
  const double norm = tangent.norm();
  if (norm == 0.0)
    return s;
  VectorXd next = std::cos(norm) * s.s - (std::sin(norm) / norm) * tangent;
  return {next / next.norm()};
}

VectorXd project_sphere_grad(const SpherePoint &s, const VectorXd &egrad) {
  return egrad - s.s.dot(egrad) * s.s;
}

MatrixXd transport_sigma(const PdPoint &from, const PdPoint &to, const MatrixXd &u) {
  const MatrixXd l = lyapunov_solve(from, u);
  return l * to.matrix() + to.matrix() * l;
}

double metric_sigma(const PdPoint &sigma, const MatrixXd &u, const MatrixXd &v) {
  return (lyapunov_solve(sigma, u) * sigma.matrix() * lyapunov_solve(sigma, v)).trace();
}

double metric(const std::vector<PdPoint> &sigmas, const TangentUpdate &a, const TangentUpdate &b) {
  double total = a.d_sqrtpi.dot(b.d_sqrtpi);
  for (std::size_t i = 0; i < a.d_mu.size(); ++i)
    total += a.d_mu[i].dot(b.d_mu[i]);
  for (std::size_t i = 0; i < a.d_sigma.size(); ++i)
    total += metric_sigma(sigmas[i], a.d_sigma[i], b.d_sigma[i]);
  return total;
}

SpherePoint clamp_sphere(const SpherePoint &s, double floor) {
  VectorXd v = s.s.cwiseMax(floor);
  return {v / v.norm()};
}

} // namespace emm
