#include <cmath>
#include <numbers>
#include <random>

#include "emm/elliptical.hpp"
#include "emm/error.hpp"

namespace emm::sampling {

double gamma(Rng &rng, double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw Error(ErrorCode::InvalidArgument, "gamma needs positive shape and rate");
  std::gamma_distribution<double> dist(shape, 1.0 / rate);
  return dist(rng);
}

double beta(Rng &rng, double a, double b) {
  const double x = gamma(rng, a, 1.0);
  const double y = gamma(rng, b, 1.0);
  return x / (x + y);
}

namespace {

// Devroye's rejection sampler for the standardized GIG with density
// ∝ x^{lambda-1} exp(-omega (x + 1/x) / 2), lambda >= 0.
class StandardGig {
public:
  StandardGig(double omega, double lambda) : omega_(omega), lambda_(lambda) {
    alpha_ = std::sqrt(omega * omega + lambda * lambda) - lambda;
    double tmp = -psi(1.0);
    if (tmp < 0.5)
      t_ = std::log(4.0 / (alpha_ + 2.0 * lambda));
    else if (tmp <= 2.0)
      t_ = 1.0;
    else
      t_ = std::sqrt(2.0 / (alpha_ + lambda));

    tmp = -psi(-1.0);
    if (tmp < 0.5) {
      const double inv = 1.0 / alpha_;
      s_ = std::log(1.0 + inv + std::sqrt(inv * (inv + 2.0)));
      if (lambda > 0.0)
        s_ = std::min(s_, 1.0 / lambda);
    } else if (tmp <= 2.0) {
      s_ = 1.0;
    } else {
      s_ = std::sqrt(4.0 / (alpha_ * std::cosh(1.0) + lambda));
    }

    eta_ = -psi(t_);
    zeta_ = -psi1(t_);
    theta_ = -psi(-s_);
    xi_ = psi1(-s_);
    p_ = 1.0 / xi_;
    r_ = 1.0 / zeta_;
    t1_ = t_ - r_ * eta_;
    s1_ = s_ - p_ * theta_;
    q_ = t1_ + s1_;
    fq_ = q_ / (p_ + q_ + r_);
    fqr_ = (q_ + r_) / (p_ + q_ + r_);
  }

  double operator()(Rng &rng) const {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double x = 0.0;
    for (;;) {
      const double u = unif(rng);
      const double v = 1.0 - unif(rng); // in (0, 1]
      const double w = unif(rng);
      if (u < fq_)
        x = -s1_ + q_ * v;
      else if (u < fqr_)
        x = t1_ - r_ * std::log(v);
      else
        x = -s1_ + p_ * std::log(v);

      double hat = 1.0;
      if (x < -s1_)
        hat = std::exp(-theta_ + xi_ * (x + s_));
      else if (x > t1_)
        hat = std::exp(-eta_ - zeta_ * (x - t_));
      if (w * hat <= std::exp(psi(x)))
        break;
    }
    const double c = lambda_ / omega_;
    return (c + std::sqrt(1.0 + c * c)) * std::exp(x);
  }

private:
  double psi(double x) const {
    return -alpha_ * (std::cosh(x) - 1.0) - lambda_ * (std::exp(x) - x - 1.0);
  }
  double psi1(double x) const { return -alpha_ * std::sinh(x) - lambda_ * (std::exp(x) - 1.0); }

  double omega_, lambda_, alpha_;
  double t_ = 0, s_ = 0, eta_ = 0, zeta_ = 0, theta_ = 0, xi_ = 0;
  double p_ = 0, r_ = 0, t1_ = 0, s1_ = 0, q_ = 0, fq_ = 0, fqr_ = 0;
};

} // namespace

double gig(Rng &rng, double psi, double chi, double lambda) {
  if (!(psi > 0.0) || !(chi > 0.0))
    throw Error(ErrorCode::InvalidArgument, "GIG needs psi > 0 and chi > 0");
  const double omega = std::sqrt(psi * chi);
  const double scale = std::sqrt(chi / psi);
  const StandardGig standard(omega, std::abs(lambda));
  const double x = standard(rng);
  // GIG(lambda) and 1/GIG(-lambda) coincide on the standardized scale.
  return scale * (lambda < 0.0 ? 1.0 / x : x);
}

double positive_stable(Rng &rng, double index) {
  if (!(index > 0.0 && index < 1.0))
    throw Error(ErrorCode::InvalidArgument, "positive stable index must lie in (0, 1)");
  std::uniform_real_distribution<double> unif(0.0, std::numbers::pi);
  std::exponential_distribution<double> expo(1.0);
  double u = unif(rng);
  while (u == 0.0)
    u = unif(rng);
  const double e = expo(rng);
  const double a = index;
  // Kanter's representation
  return std::sin(a * u) / std::pow(std::sin(u), 1.0 / a) *
         std::pow(std::sin((1.0 - a) * u) / e, (1.0 - a) / a);
}

VectorXd unit_sphere(Rng &rng, int m) {
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd z(m);
  double norm = 0.0;
  do {
    for (int i = 0; i < m; ++i)
      z(i) = normal(rng);
    norm = z.norm();
  } while (norm == 0.0);
  return z / norm;
}

} // namespace emm::sampling
