#include "emm/mixture.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "emm/error.hpp"

namespace emm {
namespace {

struct Factor {
  MatrixXd lower;
  double log_det;
};

Factor cholesky(const MatrixXd &sigma) {
  Eigen::LLT<MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorCode::NotPositiveDefinite, "Cholesky factorization failed");
  Factor f{llt.matrixL(), 0.0};
  f.log_det = 2.0 * f.lower.diagonal().array().log().sum();
  return f;
}

double log_sum_exp(const VectorXd &v) {
  const double top = v.maxCoeff();
  if (!std::isfinite(top))
    return top;
  return top + std::log((v.array() - top).exp().sum());
}

MatrixXd random_orthogonal(Rng &rng, int m) {
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd g(m, m);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i)
      g(i, j) = normal(rng);
  Eigen::HouseholderQR<MatrixXd> qr(g);
  MatrixXd q = qr.householderQ();
  const MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  // Sign fix makes Q Haar distributed.
  for (int j = 0; j < m; ++j)
    if (r(j, j) < 0.0)
      q.col(j) = -q.col(j);
  return q;
}

} // namespace

MixtureModel::MixtureModel(EllipticalFamily family, VectorXd pi, std::vector<VectorXd> mu,
                           std::vector<MatrixXd> sigma)
    : family_(std::move(family)), pi_(std::move(pi)), mu_(std::move(mu)),
      sigma_(std::move(sigma)) {
  const auto k = static_cast<std::size_t>(pi_.size());
  if (k == 0)
    throw Error(ErrorCode::InvalidArgument, "mixture needs at least one component");
  if (mu_.size() != k || sigma_.size() != k)
    throw Error(ErrorCode::Mismatch, "weights, locations and scatters differ in count");
  if (!pi_.allFinite() || pi_.minCoeff() < 0.0 || std::abs(pi_.sum() - 1.0) > 1e-12)
    throw Error(ErrorCode::InvalidArgument, "mixture weights must lie on the simplex");
  const int m = family_.dim();
  for (std::size_t i = 0; i < k; ++i) {
    if (mu_[i].size() != m || sigma_[i].rows() != m || sigma_[i].cols() != m)
      throw Error(ErrorCode::Mismatch, "component dimension differs from the family");
    if (!mu_[i].allFinite())
      throw Error(ErrorCode::InvalidArgument, "non-finite component location");
    require_positive_definite(sigma_[i], "mixture scatter matrix");
  }
}

EllipticalComponent MixtureModel::component(int i) const {
  return {family_, mu(i), sigma(i)};
}

double MixtureModel::log_pdf(const VectorXd &x) const {
  if (x.size() != dim())
    throw Error(ErrorCode::Mismatch, "point dimension differs from the model");
  MatrixXd row = x.transpose();
  return log_pdf_rows(row)(0);
}

VectorXd MixtureModel::log_pdf_rows(const MatrixXd &x) const {
  if (!family_.has_density())
    throw Error(ErrorCode::Unavailable, "family '" + family_.name() + "' has no normalized density");
  if (x.cols() != dim())
    throw Error(ErrorCode::Mismatch, "sample dimension differs from the model");
  const Eigen::Index n = x.rows();
  MatrixXd terms(n, k());
  for (int i = 0; i < k(); ++i) {
    const Factor f = cholesky(sigma(i));
    const MatrixXd centered = (x.rowwise() - mu(i).transpose()).transpose();
    const MatrixXd z = f.lower.triangularView<Eigen::Lower>().solve(centered);
    const VectorXd t = z.colwise().squaredNorm().transpose();
    const double base = std::log(pi_(i)) - 0.5 * f.log_det;
    for (Eigen::Index j = 0; j < n; ++j)
      terms(j, i) = base + family_.log_generator(t(j));
  }
  VectorXd out(n);
  for (Eigen::Index j = 0; j < n; ++j)
    out(j) = log_sum_exp(terms.row(j).transpose());
  return out;
}

MixtureModel MixtureModel::scaled(double c) const {
  std::vector<VectorXd> mu = mu_;
  std::vector<MatrixXd> sigma = sigma_;
  for (auto &v : mu)
    v *= c;
  for (auto &s : sigma)
    s *= c * c;
  return {family_, pi_, std::move(mu), std::move(sigma)};
}

double nll(const MixtureModel &model, const MatrixXd &samples) {
  if (samples.rows() == 0)
    throw Error(ErrorCode::InvalidArgument, "NLL of an empty sample");
  return -model.log_pdf_rows(samples).mean();
}

Dataset sample_mixture(const MixtureModel &model, Rng &rng, std::size_t n) {
  const int m = model.dim();
  std::vector<MatrixXd> lower;
  for (int i = 0; i < model.k(); ++i)
    lower.push_back(cholesky(model.sigma(i)).lower);
  const VectorXd &pi = model.weights();
  std::discrete_distribution<int> pick(pi.data(), pi.data() + pi.size());
  Dataset out;
  out.samples.resize(static_cast<Eigen::Index>(n), m);
  for (std::size_t j = 0; j < n; ++j) {
    const int i = pick(rng);
    const VectorXd dir = sampling::unit_sphere(rng, m);
    const double r = std::sqrt(model.family().sample_r_squared(rng));
    out.samples.row(static_cast<Eigen::Index>(j)) =
        (model.mu(i) + r * (lower[static_cast<std::size_t>(i)] * dir)).transpose();
  }
  out.truth = model;
  return out;
}

MatrixXd sample_stratified(const MixtureModel &model, Rng &rng, std::size_t n) {
  const int k = model.k();
  std::vector<std::size_t> counts(static_cast<std::size_t>(k));
  std::vector<std::pair<double, int>> remainders;
  std::size_t assigned = 0;
  for (int i = 0; i < k; ++i) {
    const double exact = model.weight(i) * static_cast<double>(n);
    counts[static_cast<std::size_t>(i)] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[static_cast<std::size_t>(i)];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto &a, const auto &b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < n; ++r, ++assigned)
    ++counts[static_cast<std::size_t>(remainders[r % remainders.size()].second)];

  MatrixXd out(static_cast<Eigen::Index>(n), model.dim());
  Eigen::Index row = 0;
  for (int i = 0; i < k; ++i) {
    const auto c = counts[static_cast<std::size_t>(i)];
    if (c == 0)
      continue;
    out.middleRows(row, static_cast<Eigen::Index>(c)) = sample(model.component(i), rng, c);
    row += static_cast<Eigen::Index>(c);
  }
  return out;
}

Dataset generate_synthetic(int m, int k, std::size_t n, double eccentricity, double separation,
                           Rng &rng) {
  if (m < 1 || k < 1 || n < 1)
    throw Error(ErrorCode::InvalidArgument, "m, k and n must be positive");
  if (!(eccentricity >= 1.0) || !(separation > 0.0))
    throw Error(ErrorCode::InvalidArgument, "need eccentricity >= 1 and separation > 0");

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double log_low = -2.0 * std::log(eccentricity);
  std::vector<MatrixXd> sigma;
  double max_trace = 0.0;
  for (int i = 0; i < k; ++i) {
    const MatrixXd q = random_orthogonal(rng, m);
    VectorXd lambda(m);
    for (int j = 0; j < m; ++j)
      lambda(j) = std::exp(log_low * unif(rng));
    sigma.push_back(symmetrized(q * lambda.asDiagonal() * q.transpose()));
    max_trace = std::max(max_trace, lambda.sum());
  }

  std::vector<VectorXd> mu(static_cast<std::size_t>(k), VectorXd::Zero(m));
  if (k > 1) {
    const double target = separation * std::sqrt(max_trace);
    constexpr int kMaxAttempts = 1000;
    bool placed = false;
    for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
      for (auto &v : mu) {
        const VectorXd dir = sampling::unit_sphere(rng, m);
        v = std::pow(unif(rng), 1.0 / m) * dir;
      }
      double dmin = std::numeric_limits<double>::infinity();
      double dmax = 0.0;
      for (int a = 0; a < k; ++a)
        for (int b = a + 1; b < k; ++b) {
          const double d = (mu[static_cast<std::size_t>(a)] - mu[static_cast<std::size_t>(b)]).norm();
          dmin = std::min(dmin, d);
          dmax = std::max(dmax, d);
        }
      // Reject nearly coincident draws so the rescaled layout stays compact.
      if (dmin < 0.2 * dmax)
        continue;
      for (auto &v : mu)
        v *= target / dmin;
      placed = true;
    }
    if (!placed)
      throw Error(ErrorCode::GenerationFailed, "could not place well-separated means");
  }

  VectorXd pi(k);
  for (int i = 0; i < k; ++i)
    pi(i) = 0.5 + unif(rng);
  pi /= pi.sum();
  pi(k - 1) = 1.0 - (pi.sum() - pi(k - 1));

  const MixtureModel truth(EllipticalFamily::gaussian(m), pi, std::move(mu), std::move(sigma));
  return sample_mixture(truth, rng, n);
}

MatrixXd read_csv(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  std::vector<double> values;
  Eigen::Index cols = -1;
  Eigen::Index rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos)
      continue;
    std::stringstream ss(line);
    std::string cell;
    Eigen::Index count = 0;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception &) {
        throw Error(ErrorCode::Io, "bad number '" + cell + "' in '" + path + "'");
      }
      if (cell.find_first_not_of(" \t", used) != std::string::npos || !std::isfinite(v))
        throw Error(ErrorCode::Io, "bad number '" + cell + "' in '" + path + "'");
      values.push_back(v);
      ++count;
    }
    if (cols < 0)
      cols = count;
    else if (count != cols)
      throw Error(ErrorCode::Io, "ragged row in '" + path + "'");
    ++rows;
  }
  if (rows == 0)
    throw Error(ErrorCode::Io, "'" + path + "' contains no samples");
  return Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), rows, cols);
}

void write_csv(const std::string &path, const MatrixXd &samples) {
  std::ofstream out(path);
  if (!out)
    throw Error(ErrorCode::Io, "cannot write '" + path + "'");
  char buf[32];
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    for (Eigen::Index j = 0; j < samples.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", samples(i, j));
      if (j > 0)
        out << ',';
      out << buf;
    }
    out << '\n';
  }
  if (!out)
    throw Error(ErrorCode::Io, "write to '" + path + "' failed");
}

} // namespace emm

namespace emm {

MixtureParams MixtureParams::from_model(const MixtureModel &model) {
  return {model.family(), model.weights().cwiseSqrt(), model.mus(), model.sigmas()};
}

MixtureModel MixtureParams::to_model() const {
  const VectorXd pi = sqrt_pi.array().square().matrix() / sqrt_pi.squaredNorm();
  std::vector<MatrixXd> sym;
  sym.reserve(sigma.size());
  for (const auto &s : sigma)
    sym.push_back(symmetrized(s));
  return {family, pi, mu, std::move(sym)};
}

} // namespace emm
