#include "emm/elliptical.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>

#include "emm/error.hpp"
#include "emm/special.hpp"

namespace emm {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kLogPi = std::log(std::numbers::pi);
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

[[noreturn]] void invalid(const std::string &what) {
  throw Error(ErrorCode::InvalidFamily, what);
}

double logistic_kernel(double t) {
  // e^{-t} / (1 + e^{-t})^2, written to stay finite for large t
  const double e = std::exp(-t);
  return e / ((1.0 + e) * (1.0 + e));
}

// Radial moments of the logistic kernel: ∫_0^∞ w^{p} g(w^2) dw.
double logistic_radial_moment(int p) {
  boost::math::quadrature::exp_sinh<double> integrator;
  auto f = [p](double w) {
    const double t = w * w;
    return t > 700.0 ? 0.0 : std::pow(w, p) * logistic_kernel(t);
  };
  return integrator.integrate(f, 1e-13);
}

struct LogisticConstants {
  double log_c;
  double mean_r2;
};

// Normalizers have no closed form we rely on; computed once per dimension.
const LogisticConstants &logistic_constants(int m) {
  static std::mutex mutex;
  static std::map<int, LogisticConstants> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(m);
  if (it != cache.end())
    return it->second;
  const double half = 0.5 * m;
  const double base = logistic_radial_moment(m - 1);
  const double log_mass = std::log(2.0) + half * kLogPi - std::lgamma(half) + std::log(base);
  const double mean = logistic_radial_moment(m + 1) / base;
  return cache.emplace(m, LogisticConstants{-log_mass, mean}).first->second;
}

} // namespace

EllipticalFamily EllipticalFamily::kotz(int m, double a, double b, double s) {
  EllipticalFamily f(FamilyKind::Kotz, m);
  f.a_ = a;
  f.b_ = b;
  f.s_ = s;
  f.validate_and_prepare();
  return f;
}

EllipticalFamily EllipticalFamily::pearson7(int m, double v, double s) {
  EllipticalFamily f(FamilyKind::PearsonVII, m);
  f.v_ = v;
  f.s_ = s;
  f.validate_and_prepare();
  return f;
}

EllipticalFamily EllipticalFamily::hyperbolic(int m, double v, double a, double lambda) {
  EllipticalFamily f(FamilyKind::Hyperbolic, m);
  f.v_ = v;
  f.a_ = a;
  f.lambda_ = lambda;
  f.limit_ = (a == 0.0);
  f.validate_and_prepare();
  return f;
}

EllipticalFamily EllipticalFamily::logistic(int m) {
  EllipticalFamily f(FamilyKind::Logistic, m);
  f.validate_and_prepare();
  return f;
}

EllipticalFamily EllipticalFamily::alpha_stable(int m, double a) {
  EllipticalFamily f(FamilyKind::AlphaStable, m);
  f.a_ = a;
  f.validate_and_prepare();
  return f;
}

EllipticalFamily EllipticalFamily::pearson2(int m, double s) {
  EllipticalFamily f(FamilyKind::PearsonII, m);
  f.s_ = s;
  f.validate_and_prepare();
  return f;
}

EllipticalFamily EllipticalFamily::from_spec(const std::string &name,
                                             const std::map<std::string, double> &params,
                                             int m) {
  auto get = [&](const char *key) {
    auto it = params.find(key);
    if (it == params.end())
      invalid("family '" + name + "' needs parameter '" + key + "'");
    return it->second;
  };
  auto check_keys = [&](std::initializer_list<const char *> allowed) {
    for (const auto &[key, value] : params) {
      bool ok = false;
      for (const char *a : allowed)
        ok = ok || key == a;
      if (!ok)
        invalid("unknown parameter '" + key + "' for family '" + name + "'");
    }
  };
  if (name == "kotz" || name == "gaussian") {
    if (name == "gaussian" && params.empty())
      return gaussian(m);
    check_keys({"a", "b", "s"});
    return kotz(m, get("a"), get("b"), get("s"));
  }
  if (name == "pearson7") {
    check_keys({"v", "s"});
    return pearson7(m, get("v"), get("s"));
  }
  if (name == "hyperbolic") {
    check_keys({"v", "a", "lambda"});
    return hyperbolic(m, get("v"), get("a"), get("lambda"));
  }
  if (name == "logistic") {
    check_keys({});
    return logistic(m);
  }
  if (name == "alphastable") {
    check_keys({"a"});
    return alpha_stable(m, get("a"));
  }
  if (name == "pearson2") {
    check_keys({"s"});
    return pearson2(m, get("s"));
  }
  invalid("unknown family '" + name + "'");
}

const std::string &EllipticalFamily::name() const noexcept {
  static const std::string names[] = {"kotz",     "pearson7",    "hyperbolic",
                                      "logistic", "alphastable", "pearson2"};
  return names[static_cast<int>(kind_)];
}

std::map<std::string, double> EllipticalFamily::params() const {
  switch (kind_) {
  case FamilyKind::Kotz: return {{"a", a_}, {"b", b_}, {"s", s_}};
  case FamilyKind::PearsonVII: return {{"v", v_}, {"s", s_}};
  case FamilyKind::Hyperbolic: return {{"v", v_}, {"a", a_}, {"lambda", lambda_}};
  case FamilyKind::Logistic: return {};
  case FamilyKind::AlphaStable: return {{"a", a_}};
  case FamilyKind::PearsonII: return {{"s", s_}};
  }
  return {};
}

bool EllipticalFamily::is_gaussian() const noexcept {
  return kind_ == FamilyKind::Kotz && a_ == 1.0 && b_ == 0.5 && s_ == 1.0;
}

EllipticalFamily EllipticalFamily::with_dim(int m) const {
  EllipticalFamily f = *this;
  f.m_ = m;
  f.validate_and_prepare();
  return f;
}

void EllipticalFamily::validate_and_prepare() {
  if (m_ < 1)
    invalid("dimension must be positive");
  const double m = m_;
  const double half = 0.5 * m;
  switch (kind_) {
  case FamilyKind::Kotz: {
    if (!(a_ > 1.0 - half) || !(b_ > 0.0) || !(s_ > 0.0))
      invalid("Kotz needs a > 1 - m/2, b > 0, s > 0");
    const double k = (2.0 * a_ + m - 2.0) / (2.0 * s_);
    log_c_ = std::lgamma(half) + std::log(s_) + k * std::log(b_) - std::lgamma(k) - half * kLogPi;
    break;
  }
  case FamilyKind::PearsonVII:
    if (!(v_ > 0.0) || !(s_ > half))
      invalid("Pearson VII needs v > 0, s > m/2");
    log_c_ = -half * std::log(std::numbers::pi * v_) + std::lgamma(s_) - std::lgamma(s_ - half);
    break;
  case FamilyKind::Hyperbolic:
    if (!(v_ > 0.0) || !(a_ >= 0.0) || !std::isfinite(lambda_))
      invalid("hyperbolic needs v > 0, a >= 0, finite lambda");
    if (limit_) {
      if (!(lambda_ > 0.0))
        invalid("hyperbolic a -> 0 limit needs lambda > 0");
      log_c_ = std::log(2.0) + lambda_ * std::log(0.5 * v_) - std::lgamma(lambda_) - half * kLog2Pi;
    } else {
      log_c_ = 0.5 * lambda_ * std::log(v_ / a_) - half * kLog2Pi -
               special::log_bessel_k(lambda_, std::sqrt(a_ * v_));
    }
    break;
  case FamilyKind::Logistic:
    log_c_ = logistic_constants(m_).log_c;
    break;
  case FamilyKind::AlphaStable:
    if (!(a_ > 0.0 && a_ < 2.0))
      invalid("alpha-stable needs a in (0, 2)");
    log_c_ = std::numeric_limits<double>::quiet_NaN();
    break;
  case FamilyKind::PearsonII:
    if (!(s_ > 1.0))
      invalid("Pearson II needs s > 1");
    log_c_ = std::lgamma(half + s_) - half * kLogPi - std::lgamma(s_);
    break;
  }
}

double EllipticalFamily::log_generator(double t) const {
  switch (kind_) {
  case FamilyKind::Kotz:
    if (t == 0.0)
      return a_ == 1.0 ? log_c_ : (a_ > 1.0 ? -kInf : kInf);
    return log_c_ + (a_ - 1.0) * std::log(t) - b_ * std::pow(t, s_);
  case FamilyKind::PearsonVII:
    return log_c_ - s_ * std::log1p(t / v_);
  case FamilyKind::Hyperbolic: {
    const double nu = lambda_ - 0.5 * m_;
    const double z = std::sqrt(v_ * (a_ + t));
    if (z == 0.0) {
      if (nu <= 0.0)
        return kInf;
      // z^nu K_nu(z) -> Gamma(nu) 2^{nu-1}
      return log_c_ - nu * std::log(v_) + std::lgamma(nu) + (nu - 1.0) * std::log(2.0);
    }
    return log_c_ - nu * std::log(v_) + nu * std::log(z) + special::log_bessel_k(nu, z);
  }
  case FamilyKind::Logistic:
    return log_c_ - t - 2.0 * std::log1p(std::exp(-t));
  case FamilyKind::AlphaStable:
    throw Error(ErrorCode::Unavailable, "alpha-stable density generator has no closed form");
  case FamilyKind::PearsonII:
    if (t >= 1.0)
      return -kInf;
    return log_c_ + (s_ - 1.0) * std::log1p(-t);
  }
  return -kInf;
}

double EllipticalFamily::generator(double t) const { return std::exp(log_generator(t)); }

double EllipticalFamily::generator_derivative(double t) const {
  switch (kind_) {
  case FamilyKind::Kotz: {
    if (t == 0.0) {
      if (a_ < 1.0)
        return -kInf;
      if (a_ == 1.0) {
        if (s_ == 1.0)
          return -b_ * std::exp(log_c_);
        return s_ > 1.0 ? 0.0 : -kInf;
      }
      if (a_ == 2.0)
        return std::exp(log_c_);
      return a_ > 2.0 ? 0.0 : kInf;
    }
    const double base = std::exp(log_c_ - b_ * std::pow(t, s_));
    return base * ((a_ - 1.0) * std::pow(t, a_ - 2.0) - b_ * s_ * std::pow(t, a_ + s_ - 2.0));
  }
  case FamilyKind::PearsonVII:
    return -s_ / (v_ + t) * generator(t);
  case FamilyKind::Hyperbolic: {
    const double nu = lambda_ - 0.5 * m_;
    const double z = std::sqrt(v_ * (a_ + t));
    if (z == 0.0) {
      if (nu <= 1.0)
        return -kInf;
      // -(C v^{1-nu} / 2) z^{nu-1} K_{nu-1}(z) at z -> 0
      return -0.5 * std::exp(log_c_ + (1.0 - nu) * std::log(v_) + std::lgamma(nu - 1.0) +
                             (nu - 2.0) * std::log(2.0));
    }
    // h'(t) = -(v / 2z) K_{nu-1}(z) / K_nu(z) h(t)
    return -(v_ / (2.0 * z)) * special::bessel_k_ratio(nu, z) * generator(t);
  }
  case FamilyKind::Logistic:
    return -std::tanh(0.5 * t) * generator(t);
  case FamilyKind::AlphaStable:
    throw Error(ErrorCode::UnsupportedGradient, "alpha-stable generator has no closed-form derivative");
  case FamilyKind::PearsonII: {
    if (t > 1.0)
      return 0.0;
    if (t == 1.0)
      return s_ > 2.0 ? 0.0 : (s_ == 2.0 ? -std::exp(log_c_) : -kInf);
    return -(s_ - 1.0) * std::exp(log_c_ + (s_ - 2.0) * std::log1p(-t));
  }
  }
  return 0.0;
}

std::optional<double> EllipticalFamily::expected_r_squared() const {
  const double m = m_;
  switch (kind_) {
  case FamilyKind::Kotz: {
    const double k = (2.0 * a_ + m - 2.0) / (2.0 * s_);
    return std::exp(std::lgamma(k + 1.0 / s_) - std::lgamma(k) - std::log(b_) / s_);
  }
  case FamilyKind::PearsonVII:
    if (!(s_ > 0.5 * m + 1.0))
      return std::nullopt;
    return m * v_ / (2.0 * s_ - m - 2.0);
  case FamilyKind::Hyperbolic:
    if (limit_)
      return m * 2.0 * lambda_ / v_;
    {
      const double w = std::sqrt(a_ * v_);
      return m * std::sqrt(a_ / v_) *
             std::exp(special::log_bessel_k(lambda_ + 1.0, w) - special::log_bessel_k(lambda_, w));
    }
  case FamilyKind::Logistic:
    return logistic_constants(m_).mean_r2;
  case FamilyKind::AlphaStable:
    return std::nullopt;
  case FamilyKind::PearsonII:
    return 0.5 * m / (0.5 * m + s_);
  }
  return std::nullopt;
}

double EllipticalFamily::sample_r_squared(Rng &rng) const {
  const double half = 0.5 * m_;
  switch (kind_) {
  case FamilyKind::Kotz: {
    const double k = (2.0 * a_ + m_ - 2.0) / (2.0 * s_);
    return std::pow(sampling::gamma(rng, k, b_), 1.0 / s_);
  }
  case FamilyKind::PearsonVII: {
    const double g = sampling::gamma(rng, half, 0.5);
    return g / sampling::gamma(rng, s_ - half, 0.5 * v_);
  }
  case FamilyKind::Hyperbolic: {
    const double g = sampling::gamma(rng, half, 0.5);
    const double k = limit_ ? sampling::gamma(rng, lambda_, 0.5 * v_)
                            : sampling::gig(rng, v_, a_, lambda_);
    return g * k;
  }
  case FamilyKind::Logistic: {
    // Gamma(m/2, 1) proposal; the remaining factor 1/(1+e^{-u})^2 is in [1/4, 1].
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (;;) {
      const double u = sampling::gamma(rng, half, 1.0);
      const double accept = 1.0 / ((1.0 + std::exp(-u)) * (1.0 + std::exp(-u)));
      if (unif(rng) < accept)
        return u;
    }
  }
  case FamilyKind::AlphaStable: {
    const double g = sampling::gamma(rng, half, 0.5);
    return g * 2.0 * sampling::positive_stable(rng, 0.5 * a_);
  }
  case FamilyKind::PearsonII:
    return sampling::beta(rng, half, s_);
  }
  return 0.0;
}

std::vector<double> EllipticalFamily::sample_r_squared(Rng &rng, std::size_t n) const {
  std::vector<double> out(n);
  for (auto &x : out)
    x = sample_r_squared(rng);
  return out;
}

double log_density_generator(const EllipticalFamily &family, double t) {
  if (!(t >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "generator argument must be nonnegative");
  if (family.kind() == FamilyKind::PearsonII && t > 1.0)
    throw Error(ErrorCode::OutOfSupport, "Pearson II generator is supported on [0, 1]");
  return family.log_generator(t);
}

double density_generator_derivative(const EllipticalFamily &family, double t) {
  if (!(t >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "generator argument must be nonnegative");
  if (family.kind() == FamilyKind::PearsonII && t > 1.0)
    throw Error(ErrorCode::OutOfSupport, "Pearson II generator is supported on [0, 1]");
  return family.generator_derivative(t);
}

EllipticalComponent::EllipticalComponent(EllipticalFamily fam, VectorXd location, MatrixXd scatter)
    : family(std::move(fam)), mu(std::move(location)), sigma(std::move(scatter)) {
  const int m = family.dim();
  if (mu.size() != m || sigma.rows() != m || sigma.cols() != m)
    throw Error(ErrorCode::Mismatch, "component dimensions do not match the family");
  require_positive_definite(sigma, "component scatter matrix");
}

double EllipticalComponent::log_pdf(const VectorXd &x) const {
  Eigen::LLT<MatrixXd> llt(sigma);
  const VectorXd z = llt.matrixL().solve(x - mu);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * log_det + family.log_generator(z.squaredNorm());
}

MatrixXd sample(const EllipticalComponent &component, Rng &rng, std::size_t n) {
  const int m = component.dim();
  Eigen::LLT<MatrixXd> llt(component.sigma);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorCode::NotPositiveDefinite, "Cholesky factorization of the scatter failed");
  const MatrixXd lower = llt.matrixL();
  MatrixXd out(static_cast<Eigen::Index>(n), m);
  for (std::size_t i = 0; i < n; ++i) {
    const VectorXd dir = sampling::unit_sphere(rng, m);
    const double r = std::sqrt(component.family.sample_r_squared(rng));
    out.row(static_cast<Eigen::Index>(i)) = (component.mu + r * (lower * dir)).transpose();
  }
  return out;
}

} // namespace emm
