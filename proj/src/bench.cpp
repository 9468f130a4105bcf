#include "emm/bench.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

#include "emm/error.hpp"

namespace emm {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Job {
  std::size_t shape = 0;
  Method method = Method::Dadam;
  int dataset = 0;
  int init = 0;
  double alpha = 0.0;
};

struct Problem {
  Dataset data;
  double truth_nll = 0.0;
  std::vector<MixtureModel> inits;
};

std::uint64_t run_index(int dataset, int init) {
  return static_cast<std::uint64_t>(dataset) * 100000u + static_cast<std::uint64_t>(init);
}

// Runs fn(i) for i in [0, count) on up to `threads` workers. Results are
// written by index, so the outcome does not depend on scheduling.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)> &fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i)
      fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, count); ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error)
            error = std::current_exception();
        }
      }
    });
  for (auto &t : pool)
    t.join();
  if (error)
    std::rethrow_exception(error);
}

} // namespace

Shape parse_shape(const std::string &text) {
  const auto x = text.find('x');
  try {
    if (x == std::string::npos)
      throw std::invalid_argument("no separator");
    std::size_t used_m = 0, used_k = 0;
    const int m = std::stoi(text.substr(0, x), &used_m);
    const int k = std::stoi(text.substr(x + 1), &used_k);
    if (used_m != x || used_k != text.size() - x - 1 || m < 1 || k < 1)
      throw std::invalid_argument("bad numbers");
    return {m, k};
  } catch (const std::exception &) {
    throw Error(ErrorCode::InvalidArgument, "shape '" + text + "' is not of the form <m>x<k>");
  }
}

std::pair<double, double> mean_std(const std::vector<double> &values) {
  double sum = 0.0;
  int count = 0;
  for (double v : values)
    if (std::isfinite(v)) {
      sum += v;
      ++count;
    }
  if (count == 0)
    return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  const double mean = sum / count;
  if (count == 1)
    return {mean, 0.0};
  double ss = 0.0;
  for (double v : values)
    if (std::isfinite(v))
      ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (count - 1))};
}

int threads_from_env() {
  const char *env = std::getenv("EMMFIT_THREADS");
  if (env == nullptr)
    return 1;
  char *end = nullptr;
  const long value = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || value < 1)
    return 1;
  return static_cast<int>(std::min<long>(value, 256));
}

BenchResult run_bench(const BenchSpec &spec) {
  if (spec.shapes.empty() || spec.methods.empty() || spec.datasets < 1 || spec.inits < 1 ||
      spec.alphas.empty() || spec.sweep_inits < 1 || spec.n < 1 || spec.iters < 1)
    throw Error(ErrorCode::InvalidArgument, "bench spec has an empty dimension");

  std::vector<std::vector<Problem>> problems(spec.shapes.size());
  for (std::size_t s = 0; s < spec.shapes.size(); ++s) {
    const Shape shape = spec.shapes[s];
    const EllipticalFamily family = EllipticalFamily::gaussian(shape.m);
    for (int d = 0; d < spec.datasets; ++d) {
      Rng data_rng(child_seed(spec.seed, stream_id("data/" + shape.id()), static_cast<std::uint64_t>(d)));
      Problem p;
      p.data = generate_synthetic(shape.m, shape.k, spec.n, spec.eccentricity, spec.separation, data_rng);
      p.truth_nll = nll(*p.data.truth, p.data.samples);
      for (int i = 0; i < spec.inits; ++i) {
        Rng init_rng(child_seed(spec.seed, stream_id("init/" + shape.id()), run_index(d, i)));
        p.inits.push_back(initialize(p.data.samples, shape.k, family, spec.init, init_rng));
      }
      problems[s].push_back(std::move(p));
    }
  }

  auto execute = [&](const Job &job) {
    const Shape shape = spec.shapes[job.shape];
    const Problem &problem = problems[job.shape][static_cast<std::size_t>(job.dataset)];
    OptimizerConfig cfg = spec.base;
    cfg.method = job.method;
    cfg.alpha = job.alpha;
    cfg.max_iters = job.method == Method::Em ? spec.em_iters : spec.iters;
    cfg.seed = child_seed(spec.seed, stream_id("fit/" + shape.id()), run_index(job.dataset, job.init));

    RunRecord r;
    r.cell = std::string(to_string(job.method)) + "/" + shape.id();
    r.shape = shape;
    r.method = job.method;
    r.dataset = job.dataset;
    r.init = job.init;
    r.alpha = job.alpha;
    r.truth_nll = problem.truth_nll;
    FitReport report;
    try {
      report = fit(problem.inits[static_cast<std::size_t>(job.init)], problem.data.samples, cfg);
    } catch (const Error &e) {
      report.failed = true;
      report.failure_reason = e.what();
    }
    r.failed = report.failed;
    r.failure_reason = report.failure_reason;
    r.iterations = report.iterations;
    r.pd_failures = report.pd_failures;
    r.max_simplex_error = report.max_simplex_error;
    r.all_pd = report.all_pd;
    r.ms_per_iteration = report.ms_per_iteration;
    r.initial_cost = report.initial_cost;
    r.final_cost = report.final_cost;
    r.wass = kInf;
    r.nll = kInf;
    if (report.final_model) {
      Rng wass_rng(child_seed(spec.seed, stream_id("wass/" + shape.id()), run_index(job.dataset, job.init)));
      const EmpiricalW2 w = mc_mixture_w2(*report.final_model, problem.data.samples, wass_rng);
      r.wass = w.value;
      r.wass_method = w.method;
      r.nll = nll(*report.final_model, problem.data.samples);
    }
    // A run whose metrics are not finite counts as a failure.
    if (!std::isfinite(r.wass) || !std::isfinite(r.nll) || r.pd_failures > 0) {
      if (!r.failed)
        r.failure_reason = r.pd_failures > 0 ? "positive-definite safeguard exhausted"
                                             : "non-finite metrics";
      r.failed = true;
    }
    if (spec.keep_traces)
      r.trace = std::move(report.trace);
    if (spec.progress) {
      char line[160];
      std::snprintf(line, sizeof line, "%s d%d i%d alpha=%g wass=%.4g nll=%.4f%s", r.cell.c_str(),
                    r.dataset, r.init, r.alpha, r.wass, r.nll, r.failed ? " FAILED" : "");
      spec.progress(line);
    }
    return r;
  };

  // Step-size sweep. Every sweep run is kept so that the main phase can reuse
  // the ones at the chosen α.
  std::map<std::tuple<std::size_t, Method, int, int, double>, RunRecord> cache;
  std::map<std::pair<std::size_t, Method>, std::pair<double, std::vector<double>>> chosen;
  {
    std::vector<Job> jobs;
    for (std::size_t s = 0; s < spec.shapes.size(); ++s)
      for (Method method : spec.methods) {
        if (method == Method::Em || spec.alphas.size() == 1)
          continue;
        for (double alpha : spec.alphas)
          for (int d = 0; d < spec.datasets; ++d)
            for (int i = 0; i < std::min(spec.sweep_inits, spec.inits); ++i)
              jobs.push_back({s, method, d, i, alpha});
      }
    std::vector<RunRecord> done(jobs.size());
    parallel_for(jobs.size(), spec.threads, [&](std::size_t j) { done[j] = execute(jobs[j]); });
    for (std::size_t j = 0; j < jobs.size(); ++j)
      cache[{jobs[j].shape, jobs[j].method, jobs[j].dataset, jobs[j].init, jobs[j].alpha}] = done[j];

    for (std::size_t s = 0; s < spec.shapes.size(); ++s)
      for (Method method : spec.methods) {
        if (method == Method::Em) {
          chosen[{s, method}] = {0.0, {}};
          continue;
        }
        if (spec.alphas.size() == 1) {
          chosen[{s, method}] = {spec.alphas.front(), {}};
          continue;
        }
        std::vector<double> scores;
        double best = kInf, best_alpha = spec.alphas.front();
        for (double alpha : spec.alphas) {
          double total = 0.0;
          int count = 0;
          for (int d = 0; d < spec.datasets; ++d)
            for (int i = 0; i < std::min(spec.sweep_inits, spec.inits); ++i) {
              const RunRecord &r = cache.at({s, method, d, i, alpha});
              total += r.failed ? kInf : r.final_cost;
              ++count;
            }
          const double score = total / count;
          scores.push_back(score);
          if (score < best) {
            best = score;
            best_alpha = alpha;
          }
        }
        chosen[{s, method}] = {best_alpha, scores};
      }
  }

  BenchResult result;
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < spec.shapes.size(); ++s)
    for (Method method : spec.methods)
      for (int d = 0; d < spec.datasets; ++d)
        for (int i = 0; i < spec.inits; ++i)
          jobs.push_back({s, method, d, i, chosen.at({s, method}).first});
  result.runs.resize(jobs.size());
  parallel_for(jobs.size(), spec.threads, [&](std::size_t j) {
    const Job &job = jobs[j];
    const auto hit = cache.find({job.shape, job.method, job.dataset, job.init, job.alpha});
    result.runs[j] = hit != cache.end() ? hit->second : execute(job);
  });

  for (std::size_t s = 0; s < spec.shapes.size(); ++s)
    for (Method method : spec.methods) {
      CellSummary c;
      c.shape = spec.shapes[s];
      c.method = method;
      c.id = std::string(to_string(method)) + "/" + c.shape.id();
      c.alpha = chosen.at({s, method}).first;
      if (!chosen.at({s, method}).second.empty()) {
        c.sweep_alphas = spec.alphas;
        c.sweep_scores = chosen.at({s, method}).second;
      }
      std::vector<double> wass, nlls;
      double ms = 0.0;
      for (const RunRecord &r : result.runs) {
        if (r.cell != c.id)
          continue;
        ++c.runs;
        c.failures += r.failed ? 1 : 0;
        wass.push_back(r.wass);
        nlls.push_back(r.nll);
        if (std::isfinite(r.nll))
          c.max_abs_nll_gap = std::max(c.max_abs_nll_gap, std::abs(r.nll - r.truth_nll));
        ms += r.ms_per_iteration;
      }
      std::tie(c.wass_mean, c.wass_std) = mean_std(wass);
      std::tie(c.nll_mean, c.nll_std) = mean_std(nlls);
      c.fail_ratio = c.runs > 0 ? static_cast<double>(c.failures) / c.runs : 0.0;
      c.ms_per_iteration = c.runs > 0 ? ms / c.runs : 0.0;
      result.cells.push_back(c);
    }
  return result;
}

namespace {

Json finite_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

} // namespace

Json aggregate_json(const BenchResult &result, const BenchSpec &spec) {
  Json shapes = Json::array();
  for (const Shape &s : spec.shapes)
    shapes.push_back(s.id());
  Json methods = Json::array();
  for (Method m : spec.methods)
    methods.push_back(to_string(m));
  Json cells = Json::array();
  for (const CellSummary &c : result.cells) {
    Json sweep = Json::array();
    for (std::size_t i = 0; i < c.sweep_alphas.size(); ++i)
      sweep.push_back({{"alpha", c.sweep_alphas[i]}, {"score", finite_or_null(c.sweep_scores[i])}});
    cells.push_back({{"id", c.id},
                     {"method", to_string(c.method)},
                     {"shape", c.shape.id()},
                     {"m", c.shape.m},
                     {"k", c.shape.k},
                     {"alpha", c.alpha},
                     {"runs", c.runs},
                     {"wass_mean", finite_or_null(c.wass_mean)},
                     {"wass_std", finite_or_null(c.wass_std)},
                     {"nll_mean", finite_or_null(c.nll_mean)},
                     {"nll_std", finite_or_null(c.nll_std)},
                     {"max_abs_nll_gap", finite_or_null(c.max_abs_nll_gap)},
                     {"fail_ratio", c.fail_ratio},
                     {"sweep", sweep}});
  }
  return {{"schema_version", kSchemaVersion},
          {"kind", "bench_aggregate"},
          {"seed", spec.seed},
          {"datasets", spec.datasets},
          {"inits", spec.inits},
          {"n", spec.n},
          {"iters", spec.iters},
          {"schedule", to_string(spec.base.schedule)},
          {"init", spec.init == InitStrategy::Random ? "random" : "kmeanspp-lite"},
          {"shapes", shapes},
          {"methods", methods},
          {"cells", cells}};
}

Json timing_json(const BenchResult &result) {
  Json cells = Json::array();
  for (const CellSummary &c : result.cells)
    cells.push_back({{"id", c.id}, {"ms_per_iteration", c.ms_per_iteration}});
  return {{"schema_version", kSchemaVersion}, {"kind", "bench_timing"}, {"cells", cells}};
}

void write_runs_csv(const std::string &path, const BenchResult &result) {
  std::unique_ptr<std::FILE, int (*)(std::FILE *)> file(std::fopen(path.c_str(), "w"), &std::fclose);
  if (!file)
    throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
  std::fputs("cell,dataset,init,alpha,wass,nll,truth_nll,initial_cost,final_cost,iterations,failed\n",
             file.get());
  for (const RunRecord &r : result.runs)
    std::fprintf(file.get(), "%s,%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d\n", r.cell.c_str(),
                 r.dataset, r.init, r.alpha, r.wass, r.nll, r.truth_nll, r.initial_cost,
                 r.final_cost, r.iterations, r.failed ? 1 : 0);
  if (std::ferror(file.get()))
    throw Error(ErrorCode::Io, "write to '" + path + "' failed");
}

} // namespace emm
