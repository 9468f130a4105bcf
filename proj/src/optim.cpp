#include "emm/optim.hpp"

#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <numeric>

#include "emm/error.hpp"

namespace emm {
namespace {

using Clock = std::chrono::steady_clock;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

// Power of two nearest to 1/sd, so that rescaling and undoing it is exact.
double standardizing_scale(const MatrixXd &data) {
  const MatrixXd centered = data.rowwise() - data.colwise().mean();
  const double var = centered.squaredNorm() / (static_cast<double>(data.rows()) * data.cols());
  if (!(var > 0.0) || !std::isfinite(var))
    return 1.0;
  return std::exp2(-std::round(0.5 * std::log2(var)));
}

MatrixXd data_covariance(const MatrixXd &data) {
  const MatrixXd centered = data.rowwise() - data.colwise().mean();
  return centered.transpose() * centered / static_cast<double>(data.rows());
}

double safe_nll(const MixtureModel &model, const MatrixXd &data) {
  if (!model.family().has_density())
    return kNaN;
  return nll(model, data);
}

struct GradientSample {
  double cost = 0.0;
  EuclideanGrad grad;
  std::vector<VectorXd> directions;
};

struct StepOutcome {
  PdPoint point;
  bool moved;
};

class RiemannianFit {
public:
  RiemannianFit(const MixtureModel &model0, const MatrixXd &data, const OptimizerConfig &cfg)
      : cfg_(cfg), scale_(standardizing_scale(data)), data_(data * scale_),
        params_(MixtureParams::from_model(model0.scaled(scale_))),
        rng_(child_seed(cfg.seed, stream_id("projections"))) {
    if (!model0.family().has_generator_derivative())
      throw Error(ErrorCode::UnsupportedGradient,
                  "family '" + model0.family().name() + "' cannot be fitted by gradients");
    if (data.cols() != model0.dim())
      throw Error(ErrorCode::Mismatch, "data and model dimensions differ");
    if (!(cfg.alpha >= 0.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0) || cfg.max_iters < 1 ||
        cfg.projection_batch < 1)
      throw Error(ErrorCode::InvalidArgument, "invalid optimizer configuration");
    report_.method = to_string(cfg.method);
    report_.initial_model = model0;
    for (int i = 0; i < params_.k(); ++i)
      sigma_.emplace_back(params_.sigma[static_cast<std::size_t>(i)]);

    std::vector<VectorXd> dirs = cfg.eval_projections;
    if (dirs.empty()) {
      Rng eval_rng(child_seed(cfg.seed, stream_id("evaluation")));
      dirs = random_projections(eval_rng, model0.dim(), cfg.eval_projection_count);
    }
    for (const auto &p : dirs)
      eval_contexts_.push_back(ProjectionContext::build(data_, p, cfg.grid_nodes));
    init_state();
  }

  FitReport run(const MatrixXd &original_data) {
    report_.initial_cost = evaluate_cost();
    report_.initial_nll = safe_nll(*report_.initial_model, original_data);
    std::deque<double> window;
    double window_sum = 0.0, previous_average = kNaN;
    double total_ms = 0.0;
    for (int h = 1; h <= cfg_.max_iters; ++h) {
      const auto start = Clock::now();
      GradientSample sample;
      try {
        sample = gradient_sample();
      } catch (const Error &e) {
        fail(std::string("gradient evaluation failed: ") + e.what());
        break;
      }
      if (!std::isfinite(sample.cost) || !finite(sample.grad)) {
        fail("non-finite cost or gradient");
        break;
      }
      try {
        step(h, sample);
      } catch (const Error &e) {
        fail(std::string("update failed: ") + e.what());
        break;
      }
      track_constraints();

      TraceEntry entry;
      entry.iteration = h;
      entry.sliced_cost = sample.cost / (scale_ * scale_);
      entry.nll = kNaN;
      const bool last = h == cfg_.max_iters;
      if (cfg_.eval_every > 0 && h % cfg_.eval_every == 0 && !last) {
        entry.sliced_cost = evaluate_cost();
        entry.evaluated = true;
      }
      if (cfg_.nll_every > 0 && h % cfg_.nll_every == 0)
        entry.nll = safe_nll(current_model(), original_data);
      entry.wall_ms = elapsed_ms(start);
      total_ms += entry.wall_ms;
      report_.trace.push_back(entry);
      report_.iterations = h;

      if (cfg_.early_stop_tol > 0.0) {
        window.push_back(sample.cost);
        window_sum += sample.cost;
        if (window.size() > 100) {
          window_sum -= window.front();
          window.pop_front();
        }
        if (window.size() == 100 && h % 100 == 0) {
          const double average = window_sum / 100.0;
          if (std::isfinite(previous_average) && previous_average - average < cfg_.early_stop_tol)
            break;
          previous_average = average;
        }
      }
    }
    report_.final_model = current_model();
    report_.final_cost = evaluate_cost();
    report_.final_nll = safe_nll(*report_.final_model, original_data);
    if (!report_.trace.empty()) {
      TraceEntry &back = report_.trace.back();
      back.sliced_cost = report_.final_cost;
      back.evaluated = true;
      back.nll = report_.final_nll;
    }
    if (!std::isfinite(report_.final_cost) && !report_.failed)
      fail("non-finite final cost");
    report_.ms_per_iteration = report_.iterations > 0 ? total_ms / report_.iterations : 0.0;
    report_.state = state_;
    return report_;
  }

private:
  void init_state() {
    const int k = params_.k();
    const int m = params_.dim();
    state_.u.assign(static_cast<std::size_t>(k), MatrixXd::Zero(m, m));
    state_.v.assign(static_cast<std::size_t>(k), MatrixXd::Zero(m, m));
    state_.adp.assign(static_cast<std::size_t>(k), 0.0);
    state_.m_sqrtpi = VectorXd::Zero(k);
    state_.v_sqrtpi = VectorXd::Zero(1);
    state_.m_mu.assign(static_cast<std::size_t>(k), VectorXd::Zero(m));
    state_.v_mu.assign(static_cast<std::size_t>(k), VectorXd::Zero(m));
  }

  static bool finite(const EuclideanGrad &g) {
    if (!g.g_sqrtpi.allFinite())
      return false;
    for (const auto &v : g.g_mu)
      if (!v.allFinite())
        return false;
    for (const auto &s : g.g_sigma)
      if (!s.allFinite())
        return false;
    return true;
  }

  void fail(const std::string &reason) {
    if (!report_.failed) {
      report_.failed = true;
      report_.failure_reason = reason;
    }
  }

  MixtureModel current_model() const { return params_.to_model().scaled(1.0 / scale_); }

  double evaluate_cost() const {
    try {
      return sliced_cost(params_, eval_contexts_) / (scale_ * scale_);
    } catch (const Error &) {
      return std::numeric_limits<double>::infinity();
    }
  }

  GradientSample gradient_sample() {
    GradientSample out;
    const int b = cfg_.projection_batch;
    for (int j = 0; j < b; ++j) {
      VectorXd p = sampling::unit_sphere(rng_, params_.dim());
      const ProjectionContext ctx = ProjectionContext::build(data_, p, cfg_.grid_nodes);
      ProjectedObjective obj = projected_objective(params_, ctx);
      out.directions.push_back(ctx.p);
      if (j == 0) {
        out.cost = obj.cost;
        out.grad = std::move(obj.grad);
        continue;
      }
      out.cost += obj.cost;
      out.grad.g_sqrtpi += obj.grad.g_sqrtpi;
      for (std::size_t i = 0; i < out.grad.g_mu.size(); ++i) {
        out.grad.g_mu[i] += obj.grad.g_mu[i];
        out.grad.g_sigma[i] += obj.grad.g_sigma[i];
      }
    }
    if (b > 1) {
      out.cost /= b;
      out.grad.g_sqrtpi /= b;
      for (std::size_t i = 0; i < out.grad.g_mu.size(); ++i) {
        out.grad.g_mu[i] /= b;
        out.grad.g_sigma[i] /= b;
      }
    }
    return out;
  }

  // Retraction with step halving; an exhausted budget leaves Σ unchanged.
  StepOutcome retract(std::size_t i, MatrixXd step) {
    for (int attempt = 0; attempt <= cfg_.pd_retries; ++attempt) {
      try {
        return {exp_sigma(sigma_[i], step), true};
      } catch (const Error &e) {
        if (e.code() != ErrorCode::StepTooLarge)
          throw;
        step *= 0.5;
        ++report_.step_halvings;
      }
    }
    ++report_.pd_failures;
    return {sigma_[i], false};
  }

  void set_sigma(std::size_t i, PdPoint point) {
    params_.sigma[i] = point.matrix();
    sigma_[i] = std::move(point);
  }

  double beta1(int h) const { return cfg_.beta1_schedule ? cfg_.beta1_schedule(h) : cfg_.beta1; }

  void plain_sphere_step(const EuclideanGrad &g) {
    const SpherePoint s{params_.sqrt_pi};
    const VectorXd rg = project_sphere_grad(s, g.g_sqrtpi);
    params_.sqrt_pi = clamp_sphere(exp_sphere(s, alpha_ * rg)).s;
  }

  void plain_mu_step(const EuclideanGrad &g) {
    for (std::size_t i = 0; i < params_.mu.size(); ++i)
      params_.mu[i] -= alpha_ * g.g_mu[i];
  }

  void adam_mu_step(int h, const EuclideanGrad &g, double b1, bool adaptive) {
    const double c1 = 1.0 - std::pow(b1, h);
    const double c2 = 1.0 - std::pow(cfg_.beta2, h);
    for (std::size_t i = 0; i < params_.mu.size(); ++i) {
      VectorXd &m = state_.m_mu[i];
      VectorXd &v = state_.v_mu[i];
      m = b1 * m + (1.0 - b1) * g.g_mu[i];
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.g_mu[i].cwiseAbs2();
      const VectorXd mhat = m / c1;
      if (adaptive) {
        const VectorXd denom = (v / c2).cwiseSqrt().array() + cfg_.eps_adam;
        params_.mu[i] -= alpha_ * mhat.cwiseQuotient(denom);
      } else {
        params_.mu[i] -= alpha_ * mhat;
      }
    }
  }

  void step(int h, const GradientSample &sample) {
    alpha_ = cfg_.stepsize(h);
    switch (cfg_.method) {
    case Method::Vanilla: vanilla_step(sample.grad); break;
    case Method::Radam: radam_step(h, sample.grad); break;
    case Method::Dadam: dadam_step(h, sample); break;
    case Method::Em: throw Error(ErrorCode::InvalidArgument, "EM is not a gradient method");
    }
  }

  void vanilla_step(const EuclideanGrad &g) {
    if (cfg_.update_pi)
      plain_sphere_step(g);
    if (cfg_.update_mu)
      plain_mu_step(g);
    if (cfg_.update_sigma)
      for (std::size_t i = 0; i < sigma_.size(); ++i) {
        const MatrixXd rg = riem_grad_sigma(sigma_[i], g.g_sigma[i]);
        set_sigma(i, retract(i, -alpha_ * rg).point);
      }
  }

  void radam_step(int h, const EuclideanGrad &g) {
    const double b1 = beta1(h);
    const double b2 = cfg_.beta2;
    const double c1 = 1.0 - std::pow(b1, h);
    const double c2 = 1.0 - std::pow(b2, h);
    const bool adaptive = cfg_.radam_adaptive;
    if (cfg_.update_pi) {
      const SpherePoint s{params_.sqrt_pi};
      const VectorXd rg = project_sphere_grad(s, g.g_sqrtpi);
      VectorXd &m = state_.m_sqrtpi;
      double &v = state_.v_sqrtpi(0);
      m = b1 * m + (1.0 - b1) * rg;
      v = b2 * v + (1.0 - b2) * rg.squaredNorm();
      const double denom = adaptive ? std::sqrt(v / c2) + cfg_.eps_adam : 1.0;
      const SpherePoint next = clamp_sphere(exp_sphere(s, alpha_ * (m / c1) / denom));
      m = project_sphere_grad(next, m);
      params_.sqrt_pi = next.s;
    }
    if (cfg_.update_mu)
      adam_mu_step(h, g, b1, adaptive);
    if (cfg_.update_sigma)
      for (std::size_t i = 0; i < sigma_.size(); ++i) {
        const MatrixXd rg = riem_grad_sigma(sigma_[i], g.g_sigma[i]);
        MatrixXd &m = state_.u[i];
        MatrixXd &v = state_.v[i];
        m = b1 * m + (1.0 - b1) * rg;
        v = b2 * v + (1.0 - b2) * rg.cwiseAbs2();
        MatrixXd dir = m / c1;
        if (adaptive)
          dir = dir.cwiseQuotient(((v / c2).cwiseSqrt().array() + cfg_.eps_adam).matrix());
        StepOutcome out = retract(i, -alpha_ * symmetrized(dir));
        m = transport_sigma(sigma_[i], out.point, m);
        set_sigma(i, std::move(out.point));
      }
  }

  void dadam_step(int h, const GradientSample &sample) {
    const EuclideanGrad &g = sample.grad;
    const double b1 = beta1(h);
    if (cfg_.update_pi)
      plain_sphere_step(g);
    if (cfg_.update_mu) {
      if (cfg_.adaptive_mu)
        adam_mu_step(h, g, b1, true);
      else
        plain_mu_step(g);
    }
    if (!cfg_.update_sigma)
      return;
    const double c1 = cfg_.bias_correction ? 1.0 - std::pow(b1, h) : 1.0;
    const double c2 = cfg_.bias_correction ? 1.0 - std::pow(cfg_.beta2, h) : 1.0;
    for (std::size_t i = 0; i < sigma_.size(); ++i) {
      const MatrixXd rg = riem_grad_sigma(sigma_[i], g.g_sigma[i]);
      MatrixXd &u = state_.u[i];
      MatrixXd &v = state_.v[i];
      u = b1 * u + (1.0 - b1) * rg;
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * (g.g_sigma[i] * g.g_sigma[i].transpose());
      double directional = 0.0;
      for (const auto &p : sample.directions)
        directional = std::max(directional, p.dot(v * p) / c2);
      const double previous = state_.adp[i];
      state_.adp[i] = std::max(directional, previous);
      if (state_.adp[i] < previous)
        report_.adp_nondecreasing = false;
      const MatrixXd step = -alpha_ * (u / c1) / std::sqrt(state_.adp[i] + cfg_.eps_adp);
      StepOutcome out = retract(i, step);
      u = transport_sigma(sigma_[i], out.point, u);
      set_sigma(i, std::move(out.point));
    }
  }

  void track_constraints() {
    const double err = std::abs(params_.sqrt_pi.squaredNorm() - 1.0);
    report_.max_simplex_error = std::max(report_.max_simplex_error, err);
    for (const auto &s : params_.sigma)
      if (!is_positive_definite(s))
        report_.all_pd = false;
  }

  const OptimizerConfig &cfg_;
  double alpha_ = 0.0;
  double scale_;
  MatrixXd data_;
  MixtureParams params_;
  std::vector<PdPoint> sigma_;
  Rng rng_;
  std::vector<ProjectionContext> eval_contexts_;
  OptimizerState state_;
  FitReport report_;
};

FitReport run_gradient_fit(const MixtureModel &model0, const MatrixXd &data,
                           const OptimizerConfig &cfg, Method expected) {
  if (cfg.method != expected)
    throw Error(ErrorCode::InvalidArgument, "optimizer method does not match the entry point");
  RiemannianFit fit(model0, data, cfg);
  return fit.run(data);
}

VectorXd log_gaussian_rows(const MatrixXd &x, const VectorXd &mu, const MatrixXd &sigma) {
  Eigen::LLT<MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorCode::NotPositiveDefinite, "EM covariance lost positive definiteness");
  const MatrixXd lower = llt.matrixL();
  const MatrixXd z = lower.triangularView<Eigen::Lower>().solve((x.rowwise() - mu.transpose()).transpose());
  const double m = static_cast<double>(x.cols());
  const double log_det = 2.0 * lower.diagonal().array().log().sum();
  const double base = -0.5 * (m * std::log(2.0 * std::numbers::pi) + log_det);
  return (base - 0.5 * z.colwise().squaredNorm().array()).matrix().transpose();
}

} // namespace

const char *to_string(Method method) noexcept {
  switch (method) {
  case Method::Vanilla: return "vanilla";
  case Method::Radam: return "radam";
  case Method::Dadam: return "dadam";
  case Method::Em: return "em";
  }
  return "unknown";
}

const char *to_string(Schedule schedule) noexcept {
  switch (schedule) {
  case Schedule::Constant: return "constant";
  case Schedule::InvSqrt: return "invsqrt";
  case Schedule::Cosine: return "cosine";
  }
  return "unknown";
}

Schedule parse_schedule(const std::string &name) {
  if (name == "constant")
    return Schedule::Constant;
  if (name == "invsqrt")
    return Schedule::InvSqrt;
  if (name == "cosine")
    return Schedule::Cosine;
  throw Error(ErrorCode::InvalidArgument, "unknown stepsize schedule '" + name + "'");
}

double OptimizerConfig::stepsize(int h) const {
  switch (schedule) {
  case Schedule::Constant: return alpha;
  case Schedule::InvSqrt: return alpha / std::sqrt(static_cast<double>(h));
  case Schedule::Cosine:
    return 0.5 * alpha * (1.0 + std::cos(std::numbers::pi * (h - 1) / max_iters));
  }
  return alpha;
}

Method parse_method(const std::string &name) {
  if (name == "vanilla")
    return Method::Vanilla;
  if (name == "radam")
    return Method::Radam;
  if (name == "dadam")
    return Method::Dadam;
  if (name == "em")
    return Method::Em;
  throw Error(ErrorCode::InvalidArgument, "unknown optimizer '" + name + "'");
}

InitStrategy parse_init(const std::string &name) {
  if (name == "random")
    return InitStrategy::Random;
  if (name == "kmeanspp-lite")
    return InitStrategy::KmeansppLite;
  throw Error(ErrorCode::InvalidArgument, "unknown init strategy '" + name + "'");
}

FitReport fit_vanilla(const MixtureModel &model0, const MatrixXd &data, const OptimizerConfig &cfg) {
  return run_gradient_fit(model0, data, cfg, Method::Vanilla);
}

FitReport fit_radam(const MixtureModel &model0, const MatrixXd &data, const OptimizerConfig &cfg) {
  return run_gradient_fit(model0, data, cfg, Method::Radam);
}

FitReport fit_dadam(const MixtureModel &model0, const MatrixXd &data, const OptimizerConfig &cfg) {
  return run_gradient_fit(model0, data, cfg, Method::Dadam);
}

FitReport fit_em_gmm(const MixtureModel &model0, const MatrixXd &data, const OptimizerConfig &cfg) {
  if (!model0.family().is_gaussian())
    throw Error(ErrorCode::InvalidFamily, "EM baseline requires the Gaussian family");
  if (data.cols() != model0.dim())
    throw Error(ErrorCode::Mismatch, "data and model dimensions differ");
  if (cfg.max_iters < 1)
    throw Error(ErrorCode::InvalidArgument, "max_iters must be positive");
  const Eigen::Index n = data.rows();
  const int k = model0.k();
  const int m = model0.dim();
  const MatrixXd cov = data_covariance(data);
  const double floor = 1e-6 * cov.trace() / m;
  Rng rng(child_seed(cfg.seed, stream_id("em")));
  std::uniform_int_distribution<Eigen::Index> pick_row(0, n - 1);

  FitReport report;
  report.method = "em";
  report.initial_model = model0;
  report.initial_nll = nll(model0, data);

  std::vector<VectorXd> eval_dirs = cfg.eval_projections;
  if (eval_dirs.empty()) {
    Rng eval_rng(child_seed(cfg.seed, stream_id("evaluation")));
    eval_dirs = random_projections(eval_rng, m, cfg.eval_projection_count);
  }
  std::vector<ProjectionContext> contexts;
  for (const auto &p : eval_dirs)
    contexts.push_back(ProjectionContext::build(data, p, cfg.grid_nodes));
  auto eval_cost = [&](const MixtureModel &model) {
    try {
      return sliced_cost(MixtureParams::from_model(model), contexts);
    } catch (const Error &) {
      return std::numeric_limits<double>::infinity();
    }
  };
  report.initial_cost = eval_cost(model0);

  VectorXd pi = model0.weights();
  std::vector<VectorXd> mu = model0.mus();
  std::vector<MatrixXd> sigma = model0.sigmas();
  double previous = report.initial_nll;
  double total_ms = 0.0;
  MatrixXd logr(n, k);
  for (int h = 1; h <= cfg.max_iters; ++h) {
    const auto start = Clock::now();
    try {
      for (int i = 0; i < k; ++i)
        logr.col(i) = log_gaussian_rows(data, mu[static_cast<std::size_t>(i)],
                                        sigma[static_cast<std::size_t>(i)]).array() +
                      std::log(pi(i));
    } catch (const Error &e) {
      report.failed = true;
      report.failure_reason = e.what();
      break;
    }
    const VectorXd top = logr.rowwise().maxCoeff();
    const VectorXd lse =
        top.array() + (logr.colwise() - top).array().exp().rowwise().sum().log();
    const MatrixXd resp = (logr.colwise() - lse).array().exp();

    for (int i = 0; i < k; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      const double mass = resp.col(i).sum();
      if (mass < 1e-8) {
        mu[ii] = data.row(pick_row(rng)).transpose();
        sigma[ii] = (cov.trace() / m) * MatrixXd::Identity(m, m);
        pi(i) = 1.0 / k;
        ++report.reseeds;
        continue;
      }
      pi(i) = mass / static_cast<double>(n);
      mu[ii] = (data.transpose() * resp.col(i)) / mass;
      const MatrixXd centered = data.rowwise() - mu[ii].transpose();
      MatrixXd s = centered.transpose() * resp.col(i).asDiagonal() * centered / mass;
      Eigen::SelfAdjointEigenSolver<MatrixXd> eig(symmetrized(s));
      const VectorXd lambda = eig.eigenvalues().cwiseMax(floor);
      sigma[ii] = symmetrized(eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose());
    }
    pi /= pi.sum();

    TraceEntry entry;
    entry.iteration = h;
    entry.nll = kNaN;
    double current = kNaN;
    try {
      const MixtureModel model(model0.family(), pi, mu, sigma);
      current = nll(model, data);
      entry.nll = current;
      entry.sliced_cost = kNaN;
      if (cfg.eval_every > 0 && h % cfg.eval_every == 0) {
        entry.sliced_cost = eval_cost(model);
        entry.evaluated = true;
      }
    } catch (const Error &e) {
      report.failed = true;
      report.failure_reason = e.what();
    }
    report.max_simplex_error = std::max(report.max_simplex_error, std::abs(pi.sum() - 1.0));
    entry.wall_ms = elapsed_ms(start);
    total_ms += entry.wall_ms;
    report.trace.push_back(entry);
    report.iterations = h;
    if (report.failed)
      break;
    if (!std::isfinite(current)) {
      report.failed = true;
      report.failure_reason = "non-finite NLL";
      break;
    }
    if (std::abs(previous - current) < cfg.em_tolerance)
      break;
    previous = current;
  }
  const MixtureModel final_model(model0.family(), pi, mu, sigma);
  report.final_model = final_model;
  report.final_nll = nll(final_model, data);
  report.final_cost = eval_cost(final_model);
  if (!report.trace.empty()) {
    report.trace.back().sliced_cost = report.final_cost;
    report.trace.back().evaluated = true;
  }
  report.ms_per_iteration = report.iterations > 0 ? total_ms / report.iterations : 0.0;
  if (!std::isfinite(report.final_nll) && !report.failed) {
    report.failed = true;
    report.failure_reason = "non-finite final NLL";
  }
  return report;
}

FitReport fit(const MixtureModel &model0, const MatrixXd &data, const OptimizerConfig &cfg) {
  switch (cfg.method) {
  case Method::Vanilla: return fit_vanilla(model0, data, cfg);
  case Method::Radam: return fit_radam(model0, data, cfg);
  case Method::Dadam: return fit_dadam(model0, data, cfg);
  case Method::Em: return fit_em_gmm(model0, data, cfg);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown optimizer");
}

MixtureModel initialize(const MatrixXd &data, int k, const EllipticalFamily &family,
                        InitStrategy strategy, Rng &rng) {
  const Eigen::Index n = data.rows();
  const int m = static_cast<int>(data.cols());
  if (k < 1)
    throw Error(ErrorCode::InvalidArgument, "k must be positive");
  if (n < k)
    throw Error(ErrorCode::InvalidArgument, "fewer samples than components");
  if (family.dim() != m)
    throw Error(ErrorCode::Mismatch, "family dimension differs from the data");

  VectorXd pi(k);
  for (int i = 0; i < k; ++i)
    pi(i) = sampling::gamma(rng, 1.0, 1.0);
  pi /= pi.sum();
  pi(k - 1) = 1.0 - (pi.sum() - pi(k - 1));

  const double iso = data_covariance(data).trace() / m;
  std::vector<MatrixXd> sigma(static_cast<std::size_t>(k), iso * MatrixXd::Identity(m, m));
  std::vector<VectorXd> mu;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (strategy == InitStrategy::Random) {
    const VectorXd lo = data.colwise().minCoeff();
    const VectorXd hi = data.colwise().maxCoeff();
    for (int i = 0; i < k; ++i) {
      VectorXd v(m);
      for (int j = 0; j < m; ++j)
        v(j) = lo(j) + unif(rng) * (hi(j) - lo(j));
      mu.push_back(v);
    }
  } else {
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    mu.push_back(data.row(pick(rng)).transpose());
    VectorXd d2 = (data.rowwise() - mu.back().transpose()).rowwise().squaredNorm();
    for (int i = 1; i < k; ++i) {
      std::discrete_distribution<Eigen::Index> weighted(d2.data(), d2.data() + d2.size());
      const Eigen::Index row = d2.sum() > 0.0 ? weighted(rng) : pick(rng);
      mu.push_back(data.row(row).transpose());
      d2 = d2.cwiseMin((data.rowwise() - mu.back().transpose()).rowwise().squaredNorm());
    }
  }
  return {family, pi, std::move(mu), std::move(sigma)};
}

SweepResult sweep_stepsize(const std::vector<std::pair<MixtureModel, const MatrixXd *>> &problems,
                           const OptimizerConfig &base, const std::vector<double> &alphas) {
  if (problems.empty() || alphas.empty())
    throw Error(ErrorCode::InvalidArgument, "sweep needs problems and step sizes");
  SweepResult out;
  out.alphas = alphas;
  double best = std::numeric_limits<double>::infinity();
  out.best_alpha = alphas.front();
  for (double alpha : alphas) {
    OptimizerConfig cfg = base;
    cfg.alpha = alpha;
    double total = 0.0;
    for (const auto &[model0, data] : problems) {
      const FitReport r = fit(model0, *data, cfg);
      total += r.failed ? std::numeric_limits<double>::infinity() : r.final_cost;
    }
    const double score = total / static_cast<double>(problems.size());
    out.scores.push_back(score);
    if (score < best) {
      best = score;
      out.best_alpha = alpha;
    }
  }
  return out;
}

} // namespace emm
