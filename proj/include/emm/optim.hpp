#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "emm/gradients.hpp"
#include "emm/manifold.hpp"

namespace emm {

enum class Method { Vanilla, Radam, Dadam, Em };

[[nodiscard]] const char *to_string(Method method) noexcept;
/// Accepts "vanilla", "radam", "dadam" and "em".
[[nodiscard]] Method parse_method(const std::string &name);

/// Stepsize sequence α^h: constant, α/√h, or cosine annealing to zero at H.
enum class Schedule { Constant, InvSqrt, Cosine };

[[nodiscard]] const char *to_string(Schedule schedule) noexcept;
[[nodiscard]] Schedule parse_schedule(const std::string &name);

struct OptimizerConfig {
  Method method = Method::Dadam;
  double alpha = 0.01;
  Schedule schedule = Schedule::Cosine;
  double beta1 = 0.9;
  /// Per-iteration β₁ (iteration h starts at 1). Overrides beta1 when set.
  std::function<double(int)> beta1_schedule;
  double beta2 = 0.999;
  int max_iters = 2000;
  std::uint64_t seed = 0;
  /// Projections averaged per iteration.
  int projection_batch = 1;
  int pd_retries = 20;
  int grid_nodes = ProjectionContext::kDefaultNodes;

  /// Dadam: divide u and v by (1 − β^h). Off by default.
  bool bias_correction = false;
  /// Dadam: element-wise adaptive moments for μ instead of a plain step.
  bool adaptive_mu = false;
  /// Radam: with false the denominator is 1, leaving transported momentum only.
  bool radam_adaptive = true;
  double eps_adp = 1e-12;
  double eps_adam = 1e-8;

  /// Which parameter blocks move; the others stay at their initial values.
  bool update_pi = true;
  bool update_mu = true;
  bool update_sigma = true;

  /// Fixed directions for the reported sliced cost. When empty, 64 directions
  /// are drawn from the seed. eval_every = 0 evaluates only at the start and
  /// the end; otherwise every eval_every iterations as well.
  std::vector<VectorXd> eval_projections;
  int eval_projection_count = 64;
  int eval_every = 0;
  /// Record NLL every nll_every iterations (0 = start and end only).
  int nll_every = 0;

  /// Stop once the 100-iteration moving average of the per-iteration cost
  /// improves by less than early_stop_tol (0 disables).
  double early_stop_tol = 0.0;

  /// EM: stop when |ΔNLL| falls below this.
  double em_tolerance = 1e-8;

  /// α^h for iteration h = 1..max_iters.
  [[nodiscard]] double stepsize(int h) const;
};

struct TraceEntry {
  int iteration = 0;
  /// Sliced cost on the fixed evaluation directions when evaluated at this
  /// iteration, otherwise the cost on this iteration's random projection.
  double sliced_cost = 0.0;
  bool evaluated = false;
  double nll = 0.0; ///< NaN when not computed
  double wall_ms = 0.0;
};

/// Per-component optimizer state after the last iteration.
struct OptimizerState {
  std::vector<MatrixXd> u;         ///< first moments on the PD factor
  std::vector<MatrixXd> v;         ///< second moments (matrix for dadam, element-wise for radam)
  std::vector<double> adp;         ///< dadam directional accumulators
  VectorXd m_sqrtpi, v_sqrtpi;     ///< radam sphere moments (v has one entry)
  std::vector<VectorXd> m_mu, v_mu;
};

struct FitReport {
  std::string method;
  std::vector<TraceEntry> trace;
  std::optional<MixtureModel> initial_model;
  std::optional<MixtureModel> final_model;
  OptimizerState state;

  int iterations = 0;
  double initial_cost = 0.0; ///< sliced cost on the evaluation directions
  double final_cost = 0.0;
  double initial_nll = 0.0;  ///< NaN for families without a density
  double final_nll = 0.0;
  double ms_per_iteration = 0.0;

  bool failed = false;
  std::string failure_reason;
  int pd_failures = 0;    ///< steps that exhausted the halving budget
  int step_halvings = 0;
  int reseeds = 0;        ///< EM component re-seeding events
  double max_simplex_error = 0.0; ///< max over iterates of |Σπ − 1|
  bool all_pd = true;
  bool adp_nondecreasing = true;
};

[[nodiscard]] FitReport fit_vanilla(const MixtureModel &model0, const MatrixXd &data,
                                    const OptimizerConfig &cfg);
[[nodiscard]] FitReport fit_radam(const MixtureModel &model0, const MatrixXd &data,
                                  const OptimizerConfig &cfg);
[[nodiscard]] FitReport fit_dadam(const MixtureModel &model0, const MatrixXd &data,
                                  const OptimizerConfig &cfg);
/// Gaussian family only. Eigenvalue floor 1e−6·tr(cov)/m; components whose
/// responsibility mass drops below 1e−8 are re-seeded at a random sample.
[[nodiscard]] FitReport fit_em_gmm(const MixtureModel &model0, const MatrixXd &data,
                                   const OptimizerConfig &cfg);
/// Dispatches on cfg.method.
[[nodiscard]] FitReport fit(const MixtureModel &model0, const MatrixXd &data,
                            const OptimizerConfig &cfg);

enum class InitStrategy { Random, KmeansppLite };
[[nodiscard]] InitStrategy parse_init(const std::string &name);

/// random: π ~ Dirichlet(1), μ_i uniform in the data bounding box,
/// Σ_i = tr(cov)/m · I. kmeanspp-lite picks μ_i by D² sampling from the data.
[[nodiscard]] MixtureModel initialize(const MatrixXd &data, int k, const EllipticalFamily &family,
                                      InitStrategy strategy, Rng &rng);

/// The stepsize grid searched by sweeps.
inline const std::vector<double> kStepsizeGrid = {0.001, 0.003, 0.01, 0.03, 0.1, 0.3};

struct SweepResult {
  double best_alpha = 0.0;
  std::vector<double> alphas;
  std::vector<double> scores; ///< mean final sliced cost per alpha (inf if any run failed)
};

/// Runs every (alpha, problem) pair and picks the alpha with the lowest mean
/// final sliced cost. Each problem is an initial model and its data.
[[nodiscard]] SweepResult sweep_stepsize(
    const std::vector<std::pair<MixtureModel, const MatrixXd *>> &problems,
    const OptimizerConfig &base, const std::vector<double> &alphas = kStepsizeGrid);

} // namespace emm
