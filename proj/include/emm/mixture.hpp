#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "emm/elliptical.hpp"

namespace emm {

/// Finite mixture of elliptical components sharing one family.
class MixtureModel {
public:
  /// Validates the simplex constraint (|Σπ - 1| ≤ 1e-12, π ≥ 0), shapes and
  /// PD scatter matrices.
  MixtureModel(EllipticalFamily family, VectorXd pi, std::vector<VectorXd> mu,
               std::vector<MatrixXd> sigma);

  [[nodiscard]] const EllipticalFamily &family() const noexcept { return family_; }
  [[nodiscard]] int k() const noexcept { return static_cast<int>(pi_.size()); }
  [[nodiscard]] int dim() const noexcept { return family_.dim(); }
  [[nodiscard]] const VectorXd &weights() const noexcept { return pi_; }
  [[nodiscard]] double weight(int i) const { return pi_(i); }
  [[nodiscard]] const VectorXd &mu(int i) const { return mu_[static_cast<std::size_t>(i)]; }
  [[nodiscard]] const MatrixXd &sigma(int i) const { return sigma_[static_cast<std::size_t>(i)]; }
  [[nodiscard]] const std::vector<VectorXd> &mus() const noexcept { return mu_; }
  [[nodiscard]] const std::vector<MatrixXd> &sigmas() const noexcept { return sigma_; }
  [[nodiscard]] EllipticalComponent component(int i) const;

  /// log p(x) by log-sum-exp over components. Throws Unavailable for families
  /// without a normalized density.
  [[nodiscard]] double log_pdf(const VectorXd &x) const;
  [[nodiscard]] double pdf(const VectorXd &x) const { return std::exp(log_pdf(x)); }

  /// Row-wise log densities with Cholesky factors computed once.
  [[nodiscard]] VectorXd log_pdf_rows(const MatrixXd &x) const;

  /// Same parameters rescaled by x -> c x.
  [[nodiscard]] MixtureModel scaled(double c) const;

private:
  EllipticalFamily family_;
  VectorXd pi_;
  std::vector<VectorXd> mu_;
  std::vector<MatrixXd> sigma_;
};

/// Unconstrained parametrization θ = (√π, μ_i, Σ_i) used by the gradient code
/// and the fit loop. No simplex or PD checks, so finite-difference probes may
/// leave the sphere.
struct MixtureParams {
  EllipticalFamily family;
  VectorXd sqrt_pi;
  std::vector<VectorXd> mu;
  std::vector<MatrixXd> sigma;

  [[nodiscard]] static MixtureParams from_model(const MixtureModel &model);
  /// Builds the validated model with π = sqrt_pi² / ‖sqrt_pi‖².
  [[nodiscard]] MixtureModel to_model() const;
  [[nodiscard]] int k() const noexcept { return static_cast<int>(sqrt_pi.size()); }
  [[nodiscard]] int dim() const noexcept { return family.dim(); }
};

struct Dataset {
  MatrixXd samples; ///< n x m, one sample per row
  std::optional<MixtureModel> truth;
  std::uint64_t seed = 0;

  [[nodiscard]] Eigen::Index n() const noexcept { return samples.rows(); }
  [[nodiscard]] int dim() const noexcept { return static_cast<int>(samples.cols()); }
};

/// Average negative log-likelihood -(1/n) Σ log p(x_j).
[[nodiscard]] double nll(const MixtureModel &model, const MatrixXd &samples);
[[nodiscard]] inline double nll(const MixtureModel &model, const Dataset &data) {
  return nll(model, data.samples);
}

/// Categorical component choice per draw, then the component's stochastic
/// representation.
[[nodiscard]] Dataset sample_mixture(const MixtureModel &model, Rng &rng, std::size_t n);

/// Samples with exactly round(n π_i) draws from component i (largest
/// remainder), rows grouped by component. Used for low-variance evaluation.
[[nodiscard]] MatrixXd sample_stratified(const MixtureModel &model, Rng &rng, std::size_t n);

/// Random well-separated Gaussian mixture: eigenvalues log-uniform in
/// [1/eccentricity², 1] with a random rotation, means spread so every pair is
/// at least separation·sqrt(max trace Σ) apart. Returns the samples together
/// with the ground truth.
[[nodiscard]] Dataset generate_synthetic(int m, int k, std::size_t n, double eccentricity,
                                         double separation, Rng &rng);

/// Headerless comma-separated floats, one sample per row.
[[nodiscard]] MatrixXd read_csv(const std::string &path);
void write_csv(const std::string &path, const MatrixXd &samples);

} // namespace emm
