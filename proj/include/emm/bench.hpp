#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "emm/io.hpp"

namespace emm {

struct Shape {
  int m = 2;
  int k = 3;

  [[nodiscard]] std::string id() const { return "m" + std::to_string(m) + "k" + std::to_string(k); }
};

/// Parses "2x3" into {m = 2, k = 3}.
[[nodiscard]] Shape parse_shape(const std::string &text);

/// A benchmark sweep over synthetic Gaussian-mixture datasets. Gradient
/// methods first pick α from `alphas` on the first `sweep_inits` inits of
/// every dataset (lowest mean final sliced cost), then run every
/// (dataset, init) pair at that α. EM ignores α.
struct BenchSpec {
  std::vector<Shape> shapes{{2, 3}};
  int datasets = 5;
  int inits = 10;
  std::vector<Method> methods{Method::Dadam, Method::Em};
  std::vector<double> alphas = kStepsizeGrid;
  int sweep_inits = 1;
  std::size_t n = 10000;
  int iters = 2000;
  int em_iters = 500;
  double eccentricity = 10.0;
  double separation = 10.0;
  std::uint64_t seed = 1;
  InitStrategy init = InitStrategy::KmeansppLite;
  /// Template for every gradient run; method, alpha, max_iters and seed are
  /// overwritten per run.
  OptimizerConfig base;
  int threads = 1;
  bool keep_traces = false;
  /// Called once per finished run with a short description (may be empty).
  std::function<void(const std::string &)> progress;
};

struct RunRecord {
  std::string cell; ///< "<method>/<shape id>"
  Shape shape;
  Method method = Method::Dadam;
  int dataset = 0;
  int init = 0;
  double alpha = 0.0;
  double wass = 0.0;
  std::string wass_method;
  double nll = 0.0;
  double truth_nll = 0.0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  bool failed = false;
  std::string failure_reason;
  int iterations = 0;
  int pd_failures = 0;
  double max_simplex_error = 0.0;
  bool all_pd = true;
  double ms_per_iteration = 0.0;
  std::vector<TraceEntry> trace; ///< only with keep_traces
};

struct CellSummary {
  std::string id;
  Shape shape;
  Method method = Method::Dadam;
  double alpha = 0.0;
  std::vector<double> sweep_alphas;
  std::vector<double> sweep_scores;
  int runs = 0;
  int failures = 0;
  double wass_mean = 0.0;
  double wass_std = 0.0; ///< sample standard deviation
  double nll_mean = 0.0;
  double nll_std = 0.0;
  double max_abs_nll_gap = 0.0; ///< max |NLL − ground-truth NLL| over runs
  double fail_ratio = 0.0;
  double ms_per_iteration = 0.0;
};

struct BenchResult {
  std::vector<RunRecord> runs;  ///< main runs only, ordered by (shape, method, dataset, init)
  std::vector<CellSummary> cells;
};

[[nodiscard]] BenchResult run_bench(const BenchSpec &spec);

/// Mean and sample standard deviation; non-finite values are skipped.
[[nodiscard]] std::pair<double, double> mean_std(const std::vector<double> &values);

/// Aggregate over runs: per cell Wass and NLL mean±std, fail ratio, chosen
/// α and the sweep scores. Contains no wall-clock data, so it is identical
/// across re-runs with the same spec.
[[nodiscard]] Json aggregate_json(const BenchResult &result, const BenchSpec &spec);
/// Per-cell ms/iteration.
[[nodiscard]] Json timing_json(const BenchResult &result);
/// One row per run.
void write_runs_csv(const std::string &path, const BenchResult &result);

/// Number of worker threads: EMMFIT_THREADS when set and positive, else 1.
[[nodiscard]] int threads_from_env();

} // namespace emm
