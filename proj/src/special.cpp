#include "emm/special.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace emm::special {
namespace {

// Hankel expansion of K_nu for large z; four terms suffice for z >= 500.
double log_bessel_k_large(double nu, double z) {
  const double mu = 4.0 * nu * nu;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k <= 6; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= (mu - odd * odd) / (k * 8.0 * z);
    sum += term;
  }
  return 0.5 * std::log(std::numbers::pi / (2.0 * z)) - z + std::log(sum);
}

} // namespace

double log_bessel_k(double nu, double z) {
  nu = std::fabs(nu);
  if (!(z > 0.0))
    return std::numeric_limits<double>::infinity();
  if (z >= 500.0)
    return log_bessel_k_large(nu, z);
  const double k = std::cyl_bessel_k(nu, z);
  if (k > 0.0 && std::isfinite(k))
    return std::log(k);
  if (nu > 0.0) // small-z overflow: K_nu(z) ~ Gamma(nu) 2^{nu-1} z^{-nu}
    return std::lgamma(nu) + (nu - 1.0) * std::log(2.0) - nu * std::log(z);
  return std::log(-std::log(0.5 * z) - 0.5772156649015329);
}

double bessel_k_ratio(double nu, double z) {
  return std::exp(log_bessel_k(nu - 1.0, z) - log_bessel_k(nu, z));
}

} // namespace emm::special
