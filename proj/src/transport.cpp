#include "emm/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "emm/error.hpp"

namespace emm {
namespace {

double component_weight(const EllipticalFamily &family, bool unit_weight) {
  if (unit_weight)
    return 1.0;
  const auto r2 = family.expected_r_squared();
  if (!r2)
    throw Error(ErrorCode::Unavailable,
                "E[R^2] is infinite for family '" + family.name() + "'; use the unit weight");
  return *r2 / family.dim();
}

double sorted_sum(std::vector<double> &terms) {
  std::sort(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms)
    s += t;
  return s;
}

// Sums are taken over sorted terms so that d_u(A, B) and d_u(B, A) see the
// same floating-point operations.
TransportPlan evaluate_plan(const MatrixXd &w2, const VectorXd &pa, const VectorXd &pb,
                            const std::vector<int> &gamma) {
  const auto k = static_cast<int>(gamma.size());
  std::vector<double> transport(static_cast<std::size_t>(k));
  std::vector<double> chord(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const int j = gamma[static_cast<std::size_t>(i)];
    transport[static_cast<std::size_t>(i)] = w2(i, j);
    const double d = std::sqrt(pa(i)) - std::sqrt(pb(j));
    chord[static_cast<std::size_t>(i)] = d * d;
  }
  TransportPlan plan;
  plan.gamma = gamma;
  plan.cost = sorted_sum(transport) / k;
  // arccos(Σ √(π_i π'_γ(i))) written as the angle subtended by the chord
  // between the two unit vectors, which stays accurate near zero.
  plan.probability_term = 2.0 * std::asin(std::min(1.0, 0.5 * std::sqrt(sorted_sum(chord))));
  return plan;
}

double simpson(double l, double r, double fl, double fm, double fr) {
  return (r - l) / 6.0 * (fl + 4.0 * fm + fr);
}

std::vector<double> trapezoid_weights(const std::vector<double> &grid) {
  const std::size_t n = grid.size();
  std::vector<double> w(n, 0.0);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double h = grid[k + 1] - grid[k];
    w[k] += 0.5 * h;
    w[k + 1] += 0.5 * h;
  }
  return w;
}

double mean_squared_sorted_gap(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

std::vector<double> column(const MatrixXd &x, const VectorXd &p) {
  const VectorXd proj = x * p;
  return {proj.data(), proj.data() + proj.size()};
}

} // namespace

double w2_elliptical(const EllipticalComponent &c1, const EllipticalComponent &c2,
                     bool unit_weight) {
  if (!(c1.family == c2.family))
    throw Error(ErrorCode::Mismatch, "components belong to different families");
  const double weight = component_weight(c1.family, unit_weight);
  const double location = (c1.mu - c2.mu).squaredNorm();
  if (c1.sigma == c2.sigma)
    return location;
  const double bures = 0.5 * (bures_squared(c1.sigma, c2.sigma) + bures_squared(c2.sigma, c1.sigma));
  return location + weight * bures;
}

TransportPlan d_u(const MixtureModel &a, const MixtureModel &b, bool unit_weight) {
  if (a.k() != b.k() || a.dim() != b.dim() || !(a.family() == b.family()))
    throw Error(ErrorCode::Mismatch, "d_u needs equal k, m and family");
  const int k = a.k();
  MatrixXd w2(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      w2(i, j) = w2_elliptical(a.component(i), b.component(j), unit_weight);

  std::vector<int> gamma(static_cast<std::size_t>(k));
  std::iota(gamma.begin(), gamma.end(), 0);
  if (k <= kExactPermutationLimit) {
    TransportPlan best = evaluate_plan(w2, a.weights(), b.weights(), gamma);
    while (std::next_permutation(gamma.begin(), gamma.end())) {
      TransportPlan plan = evaluate_plan(w2, a.weights(), b.weights(), gamma);
      if (plan.value() < best.value())
        best = std::move(plan);
    }
    return best;
  }

  // Assignment on the separable part, then pairwise swaps on the full
  // objective since the arccos term couples all matches.
  TransportPlan best = evaluate_plan(w2, a.weights(), b.weights(), solve_assignment(w2));
  bool improved = true;
  while (improved) {
    improved = false;
    for (int i = 0; i < k && !improved; ++i)
      for (int j = i + 1; j < k && !improved; ++j) {
        std::vector<int> trial = best.gamma;
        std::swap(trial[static_cast<std::size_t>(i)], trial[static_cast<std::size_t>(j)]);
        TransportPlan plan = evaluate_plan(w2, a.weights(), b.weights(), trial);
        if (plan.value() < best.value() - 1e-15) {
          best = std::move(plan);
          improved = true;
        }
      }
  }
  best.exact = false;
  return best;
}

ProjectionContext ProjectionContext::build(const MatrixXd &samples, const VectorXd &p, int nodes) {
  if (p.size() != samples.cols())
    throw Error(ErrorCode::Mismatch, "projection and sample dimensions differ");
  const double norm = p.norm();
  if (!(norm > 0.0))
    throw Error(ErrorCode::InvalidArgument, "projection direction must be nonzero");
  const VectorXd unit = p / norm;
  ProjectionContext ctx = from_projected(column(samples, unit), nodes);
  ctx.p = unit;
  return ctx;
}

ProjectionContext ProjectionContext::from_projected(std::vector<double> projected, int nodes) {
  if (projected.empty())
    throw Error(ErrorCode::DegenerateGrid, "no samples to project");
  if (nodes < 2)
    throw Error(ErrorCode::InvalidArgument, "grid needs at least two nodes");
  std::sort(projected.begin(), projected.end());
  const double n = static_cast<double>(projected.size());
  const double mean = std::accumulate(projected.begin(), projected.end(), 0.0) / n;
  double var = 0.0;
  for (double y : projected)
    var += (y - mean) * (y - mean);
  const double sd = std::sqrt(var / n);
  if (!(sd > 0.0) || !std::isfinite(sd))
    throw Error(ErrorCode::DegenerateGrid, "projected samples have zero spread");
  const double lo = projected.front() - 4.0 * sd;
  const double hi = projected.back() + 4.0 * sd;
  std::vector<double> grid(static_cast<std::size_t>(nodes));
  const double h = (hi - lo) / (nodes - 1);
  for (int i = 0; i < nodes; ++i)
    grid[static_cast<std::size_t>(i)] = lo + h * i;
  grid.back() = hi;
  ProjectionContext ctx;
  ctx.p = VectorXd::Ones(1);
  ctx.projected = std::move(projected);
  ctx.weights = trapezoid_weights(grid);
  ctx.grid = std::move(grid);
  return ctx;
}

ProjectionContext ProjectionContext::with_grid(std::vector<double> projected,
                                               std::vector<double> grid) {
  if (projected.empty() || grid.size() < 2)
    throw Error(ErrorCode::DegenerateGrid, "need samples and at least two grid nodes");
  for (std::size_t i = 0; i + 1 < grid.size(); ++i)
    if (!(grid[i + 1] > grid[i]))
      throw Error(ErrorCode::DegenerateGrid, "grid nodes must increase strictly");
  std::sort(projected.begin(), projected.end());
  if (projected.front() < grid.front() || projected.back() > grid.back())
    throw Error(ErrorCode::DegenerateGrid, "samples fall outside the grid");
  ProjectionContext ctx;
  ctx.p = VectorXd::Ones(1);
  ctx.projected = std::move(projected);
  ctx.weights = trapezoid_weights(grid);
  ctx.grid = std::move(grid);
  return ctx;
}

void repair_nonfinite(std::vector<double> &values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(values[i]))
      bad.push_back(i);
  if (bad.empty())
    return;
  if (bad.size() == n)
    throw Error(ErrorCode::DegenerateGrid, "no finite values on the grid");
  const std::vector<double> original = values;
  for (std::size_t i : bad) {
    double sum = 0.0;
    int count = 0;
    for (std::size_t l = i; l-- > 0;)
      if (std::isfinite(original[l])) {
        sum += original[l];
        ++count;
        break;
      }
    for (std::size_t r = i + 1; r < n; ++r)
      if (std::isfinite(original[r])) {
        sum += original[r];
        ++count;
        break;
      }
    values[i] = sum / count;
  }
}

std::vector<double> projected_density(const MixtureParams &params, const ProjectionContext &ctx) {
  if (ctx.p.size() != params.dim())
    throw Error(ErrorCode::Mismatch, "projection and model dimensions differ");
  const std::size_t nodes = ctx.grid.size();
  std::vector<double> total(nodes, 0.0);
  std::vector<double> g(nodes);
  for (int i = 0; i < params.k(); ++i) {
    const auto ii = static_cast<std::size_t>(i);
    const double loc = ctx.p.dot(params.mu[ii]);
    const double q = ctx.p.dot(params.sigma[ii] * ctx.p);
    if (!(q > 0.0))
      throw Error(ErrorCode::NotPositiveDefinite, "projected scatter is not positive");
    const double pi = params.sqrt_pi(i) * params.sqrt_pi(i);
    const double inv_sd = 1.0 / std::sqrt(q);
    for (std::size_t k = 0; k < nodes; ++k) {
      const double d = ctx.grid[k] - loc;
      g[k] = params.family.generator(d * d / q);
    }
    repair_nonfinite(g);
    for (std::size_t k = 0; k < nodes; ++k)
      total[k] += pi * inv_sd * g[k];
  }
  return total;
}

std::vector<double> projected_density(const MixtureModel &model, const ProjectionContext &ctx) {
  return projected_density(MixtureParams::from_model(model), ctx);
}

SemiDiscreteSolution solve_semidiscrete(const ProjectionContext &ctx,
                                        const std::vector<double> &density) {
  const std::vector<double> &x = ctx.grid;
  const std::size_t nodes = x.size();
  const std::vector<double> &s = ctx.projected;
  const std::size_t n = s.size();
  if (density.size() != nodes)
    throw Error(ErrorCode::Mismatch, "density and grid sizes differ");
  if (n == 0 || nodes < 2)
    throw Error(ErrorCode::DegenerateGrid, "empty samples or grid");

  SemiDiscreteSolution sol;
  double mass = 0.0;
  for (std::size_t k = 0; k < nodes; ++k) {
    if (!(density[k] >= 0.0) || !std::isfinite(density[k]))
      throw Error(ErrorCode::InvalidArgument, "density values must be finite and nonnegative");
    mass += ctx.weights[k] * density[k];
  }
  if (!(mass > 0.0))
    throw Error(ErrorCode::DegenerateGrid, "model density has zero mass on the grid");
  sol.mass = mass;
  std::vector<double> r(nodes);
  for (std::size_t k = 0; k < nodes; ++k)
    r[k] = density[k] / mass;

  std::vector<double> cdf(nodes, 0.0);
  for (std::size_t k = 0; k + 1 < nodes; ++k)
    cdf[k + 1] = cdf[k] + 0.5 * (x[k + 1] - x[k]) * (r[k] + r[k + 1]);
  const double total = cdf.back();

  // Cell j (0-based) of the monotone map is [b_j, b_{j+1}] and carries mass 1/n.
  sol.boundaries.assign(n + 1, x.front());
  sol.boundaries.back() = x.back();
  std::size_t k = 0;
  for (std::size_t j = 1; j < n; ++j) {
    const double level = total * static_cast<double>(j) / static_cast<double>(n);
    while (k + 2 < nodes && cdf[k + 1] < level)
      ++k;
    const double h = x[k + 1] - x[k];
    const double qa = 0.5 * (r[k + 1] - r[k]) * h;
    const double qb = r[k] * h;
    const double rhs = std::max(0.0, level - cdf[k]);
    const double disc = std::sqrt(std::max(0.0, qb * qb + 4.0 * qa * rhs));
    const double denom = qb + disc;
    double tau = denom > 0.0 ? 2.0 * rhs / denom : 0.0;
    tau = std::clamp(tau, 0.0, 1.0);
    sol.boundaries[j] = std::max(sol.boundaries[j - 1], x[k] + tau * h);
  }

  sol.phi.assign(nodes, 0.0);
  sol.phi_hat.assign(nodes, 0.0);
  double cost = 0.0;
  double phi_left = 0.0;
  double left = x.front();
  std::size_t cell = 0;
  k = 0;
  while (k + 1 < nodes) {
    const double node_right = x[k + 1];
    const double cell_right = cell + 1 < n ? sol.boundaries[cell + 1] : x.back();
    const double right = std::min(node_right, cell_right);
    if (right > left) {
      const double target = s[cell];
      const double h = x[k + 1] - x[k];
      auto rho = [&](double y) { return r[k] + (r[k + 1] - r[k]) * (y - x[k]) / h; };
      auto phi = [&](double y) {
        return phi_left + (y - target) * (y - target) - (left - target) * (left - target);
      };
      const double mid = 0.5 * (left + right);
      auto sq = [&](double y) { return (y - target) * (y - target); };
      cost += simpson(left, right, sq(left) * rho(left), sq(mid) * rho(mid), sq(right) * rho(right));
      auto hat_l = [&](double y) { return (x[k + 1] - y) / h; };
      auto hat_r = [&](double y) { return (y - x[k]) / h; };
      const double pl = phi(left), pm = phi(mid), pr = phi(right);
      sol.phi_hat[k] += simpson(left, right, pl * hat_l(left), pm * hat_l(mid), pr * hat_l(right));
      sol.phi_hat[k + 1] +=
          simpson(left, right, pl * hat_r(left), pm * hat_r(mid), pr * hat_r(right));
      phi_left = pr;
      left = right;
    }
    if (right >= node_right) {
      sol.phi[k + 1] = phi_left;
      ++k;
    }
    if (right >= cell_right && cell + 1 < n)
      ++cell;
  }
  sol.cost = std::max(0.0, cost);
  double mean = 0.0;
  for (std::size_t i = 0; i < nodes; ++i)
    mean += r[i] * sol.phi_hat[i];
  sol.phi_mean = mean;
  return sol;
}

std::vector<double> SemiDiscreteSolution::density_sensitivity(const ProjectionContext &ctx) const {
  std::vector<double> out(phi_hat.size());
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = (phi_hat[k] - phi_mean * ctx.weights[k]) / mass;
  return out;
}

double w2_1d_semidiscrete(const ProjectionContext &ctx, const std::vector<double> &density) {
  return solve_semidiscrete(ctx, density).cost;
}

std::vector<double> kantorovich_potential(const ProjectionContext &ctx,
                                          const std::vector<double> &density) {
  return solve_semidiscrete(ctx, density).phi;
}

std::vector<double> transport_map(const ProjectionContext &ctx,
                                  const std::vector<double> &density) {
  const SemiDiscreteSolution sol = solve_semidiscrete(ctx, density);
  const std::size_t n = ctx.projected.size();
  std::vector<double> out(ctx.grid.size());
  std::size_t cell = 0;
  for (std::size_t k = 0; k < ctx.grid.size(); ++k) {
    while (cell + 1 < n && ctx.grid[k] > sol.boundaries[cell + 1])
      ++cell;
    out[k] = ctx.projected[cell];
  }
  return out;
}

double sliced_cost(const MixtureParams &params, const std::vector<ProjectionContext> &contexts) {
  if (contexts.empty())
    throw Error(ErrorCode::InvalidArgument, "sliced cost needs at least one projection");
  double total = 0.0;
  for (const auto &ctx : contexts)
    total += w2_1d_semidiscrete(ctx, projected_density(params, ctx));
  return total / static_cast<double>(contexts.size());
}

double sliced_cost(const MixtureParams &params, const MatrixXd &samples,
                   const std::vector<VectorXd> &projections) {
  if (projections.empty())
    throw Error(ErrorCode::InvalidArgument, "sliced cost needs at least one projection");
  double total = 0.0;
  for (const auto &p : projections) {
    if (std::abs(p.norm() - 1.0) > 1e-12)
      throw Error(ErrorCode::InvalidArgument, "projections must have unit norm");
    const ProjectionContext ctx = ProjectionContext::build(samples, p);
    total += w2_1d_semidiscrete(ctx, projected_density(params, ctx));
  }
  return total / static_cast<double>(projections.size());
}

double sliced_cost(const MixtureModel &model, const MatrixXd &samples,
                   const std::vector<VectorXd> &projections) {
  return sliced_cost(MixtureParams::from_model(model), samples, projections);
}

std::vector<VectorXd> random_projections(Rng &rng, int m, int count) {
  std::vector<VectorXd> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    out.push_back(sampling::unit_sphere(rng, m));
  return out;
}

std::vector<int> solve_assignment(const MatrixXd &cost) {
  // Shortest augmenting path with potentials, 1-based internally.
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n)
    throw Error(ErrorCode::InvalidArgument, "assignment needs a square cost matrix");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<int> match(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
  std::vector<double> minv(static_cast<std::size_t>(n + 1));
  std::vector<char> used(static_cast<std::size_t>(n + 1));
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = match[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        const auto jj = static_cast<std::size_t>(j);
        if (used[jj])
          continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[jj];
        if (cur < minv[jj]) {
          minv[jj] = cur;
          way[jj] = j0;
        }
        if (minv[jj] < delta) {
          delta = minv[jj];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        const auto jj = static_cast<std::size_t>(j);
        if (used[jj]) {
          u[static_cast<std::size_t>(match[jj])] += delta;
          v[jj] -= delta;
        } else {
          minv[jj] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> out(static_cast<std::size_t>(n));
  for (int j = 1; j <= n; ++j)
    out[static_cast<std::size_t>(match[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return out;
}

EmpiricalW2 empirical_w2(const MatrixXd &x, const MatrixXd &y, Rng &rng) {
  if (x.rows() != y.rows() || x.cols() != y.cols())
    throw Error(ErrorCode::Mismatch, "sample sets must have equal size and dimension");
  if (x.rows() == 0)
    throw Error(ErrorCode::InvalidArgument, "empty sample sets");
  const auto n = x.rows();
  const auto m = static_cast<int>(x.cols());
  if (m == 1) {
    const VectorXd one = VectorXd::Ones(1);
    return {mean_squared_sorted_gap(column(x, one), column(y, one)), "sorted"};
  }
  if (n <= kAssignmentLimit) {
    MatrixXd cost(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      cost.row(i) = (y.rowwise() - x.row(i)).rowwise().squaredNorm().transpose();
    const std::vector<int> match = solve_assignment(cost);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      total += cost(i, match[static_cast<std::size_t>(i)]);
    return {total / static_cast<double>(n), "assignment"};
  }
  double total = 0.0;
  for (const VectorXd &p : random_projections(rng, m, kSlicedProjections))
    total += mean_squared_sorted_gap(column(x, p), column(y, p));
  return {m * total / kSlicedProjections, "sliced"};
}

EmpiricalW2 mc_mixture_w2(const MixtureModel &model, const MatrixXd &data, Rng &rng) {
  if (data.cols() != model.dim())
    throw Error(ErrorCode::Mismatch, "data and model dimensions differ");
  const MatrixXd draws = sample_stratified(model, rng, static_cast<std::size_t>(data.rows()));
  return empirical_w2(draws, data, rng);
}

EmpiricalW2 mc_mixture_w2(const MixtureModel &a, const MixtureModel &b, Rng &rng, std::size_t n) {
  if (a.dim() != b.dim())
    throw Error(ErrorCode::Mismatch, "model dimensions differ");
  if (n < 2)
    throw Error(ErrorCode::InvalidArgument, "need at least two draws");
  const MatrixXd x = sample_stratified(a, rng, n);
  const MatrixXd y = sample_stratified(b, rng, n);
  return empirical_w2(x, y, rng);
}

} // namespace emm
