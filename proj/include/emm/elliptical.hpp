#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emm/linalg.hpp"
#include "emm/rng.hpp"

namespace emm {

enum class FamilyKind { Kotz, PearsonVII, Hyperbolic, Logistic, AlphaStable, PearsonII };

/// An elliptical family in dimension m, identified by its density generator.
///
/// The generator is stored already normalized: `log_generator(t)` returns
/// log(c_m g(t)) so that a component with location mu and scatter Sigma has
/// density det(Sigma)^{-1/2} exp(log_generator(t)), t the squared Mahalanobis
/// distance. Families are immutable after construction.
class EllipticalFamily {
public:
  /// Kotz type: g(t) ∝ t^{a-1} exp(-b t^s). Gaussian is (a, b, s) = (1, 1/2, 1).
  static EllipticalFamily kotz(int m, double a, double b, double s);
  static EllipticalFamily gaussian(int m) { return kotz(m, 1.0, 0.5, 1.0); }
  /// Pearson type VII: g(t) ∝ (1 + t/v)^{-s}.
  static EllipticalFamily pearson7(int m, double v, double s);
  static EllipticalFamily student_t(int m, double dof) {
    return pearson7(m, dof, 0.5 * (m + dof));
  }
  static EllipticalFamily cauchy(int m) { return pearson7(m, 1.0, 0.5 * (m + 1)); }
  /// Hyperbolic type with GIG(v, a, lambda) mixing. a == 0 selects the a -> 0
  /// limit branch (Laplace, K-distribution), which requires lambda > 0.
  static EllipticalFamily hyperbolic(int m, double v, double a, double lambda);
  static EllipticalFamily logistic(int m);
  /// Sub-Gaussian symmetric alpha-stable, index a in (0, 2). Sampling only.
  static EllipticalFamily alpha_stable(int m, double a);
  /// Pearson type II: g(t) ∝ (1 - t)^{s-1} on [0, 1].
  static EllipticalFamily pearson2(int m, double s);

  /// Build from a CLI-style name and key/value map, e.g. ("kotz", {a,b,s}).
  static EllipticalFamily from_spec(const std::string &name,
                                    const std::map<std::string, double> &params,
                                    int m);

  [[nodiscard]] FamilyKind kind() const noexcept { return kind_; }
  [[nodiscard]] int dim() const noexcept { return m_; }
  [[nodiscard]] const std::string &name() const noexcept;
  /// Parameter keys as used by from_spec.
  [[nodiscard]] std::map<std::string, double> params() const;
  [[nodiscard]] bool is_hyperbolic_limit() const noexcept { return limit_; }
  [[nodiscard]] bool is_gaussian() const noexcept;

  /// Same parameters in another dimension (constraints re-checked).
  [[nodiscard]] EllipticalFamily with_dim(int m) const;

  [[nodiscard]] bool has_density() const noexcept {
    return kind_ != FamilyKind::AlphaStable;
  }
  [[nodiscard]] bool has_generator_derivative() const noexcept {
    return has_density();
  }

  /// log(c_m g(t)). Returns -inf outside the support and +inf at integrable
  /// singularities (Kotz a < 1 at t = 0). Throws Unavailable for alpha-stable.
  [[nodiscard]] double log_generator(double t) const;
  [[nodiscard]] double generator(double t) const;
  /// d/dt (c_m g(t)); may be non-finite at boundary singularities, which
  /// callers doing quadrature treat as "skip this node".
  [[nodiscard]] double generator_derivative(double t) const;

  /// E[R^2] when finite; nullopt for heavy tails without a second moment.
  [[nodiscard]] std::optional<double> expected_r_squared() const;

  [[nodiscard]] double sample_r_squared(Rng &rng) const;
  [[nodiscard]] std::vector<double> sample_r_squared(Rng &rng, std::size_t n) const;

  friend bool operator==(const EllipticalFamily &, const EllipticalFamily &) = default;

private:
  EllipticalFamily(FamilyKind kind, int m) : kind_(kind), m_(m) {}
  void validate_and_prepare();

  FamilyKind kind_;
  int m_;
  double a_ = 0.0;
  double b_ = 0.0;
  double s_ = 0.0;
  double v_ = 0.0;
  double lambda_ = 0.0;
  bool limit_ = false;
  double log_c_ = 0.0; // log of the closed-form or cached normalizer
};

/// Checked free-function form: throws OutOfSupport for t outside the support
/// and InvalidArgument for t < 0.
[[nodiscard]] double log_density_generator(const EllipticalFamily &family, double t);
[[nodiscard]] double density_generator_derivative(const EllipticalFamily &family, double t);

/// One elliptical law: location, scatter and the shared family.
struct EllipticalComponent {
  EllipticalFamily family;
  VectorXd mu;
  MatrixXd sigma;

  /// Validates dimensions and positive definiteness.
  EllipticalComponent(EllipticalFamily fam, VectorXd location, MatrixXd scatter);

  [[nodiscard]] int dim() const noexcept { return family.dim(); }
  /// log density at x (requires family.has_density()).
  [[nodiscard]] double log_pdf(const VectorXd &x) const;
};

/// n draws of mu + R L S, one per row.
[[nodiscard]] MatrixXd sample(const EllipticalComponent &component, Rng &rng,
                              std::size_t n);

namespace sampling {
/// Gamma with shape/rate parametrization.
[[nodiscard]] double gamma(Rng &rng, double shape, double rate);
[[nodiscard]] double beta(Rng &rng, double a, double b);
/// GIG with density ∝ x^{lambda-1} exp(-(psi x + chi / x) / 2); Devroye (2014)
/// rejection on the standardized law.
[[nodiscard]] double gig(Rng &rng, double psi, double chi, double lambda);
/// Positive stable with Laplace transform exp(-s^index), index in (0, 1).
[[nodiscard]] double positive_stable(Rng &rng, double index);
/// Uniform direction on the unit sphere in R^m.
[[nodiscard]] VectorXd unit_sphere(Rng &rng, int m);
} // namespace sampling

} // namespace emm
