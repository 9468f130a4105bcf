#pragma once

namespace emm::special {

/// log K_nu(z) for z > 0, with asymptotic branches where the direct
/// evaluation under- or overflows.
[[nodiscard]] double log_bessel_k(double nu, double z);

/// K_{nu-1}(z) / K_nu(z), evaluated in log space.
[[nodiscard]] double bessel_k_ratio(double nu, double z);

} // namespace emm::special
