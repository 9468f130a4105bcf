// emmfit: generate synthetic mixtures, fit elliptical mixture models, evaluate
// fits and run benchmark sweeps.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>

#include "emm/bench.hpp"
#include "emm/error.hpp"
#include "emm/io.hpp"

namespace fs = std::filesystem;
using namespace emm;

namespace {

// "--family kotz a=1 b=0.5 s=1" arrives as {"kotz", "a=1", "b=0.5", "s=1"}.
EllipticalFamily parse_family(const std::vector<std::string> &tokens, int m) {
  if (tokens.empty())
    return EllipticalFamily::gaussian(m);
  std::map<std::string, double> params;
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    const auto eq = tokens[i].find('=');
    if (eq == std::string::npos || eq == 0)
      throw Error(ErrorCode::InvalidArgument, "family parameter '" + tokens[i] + "' is not key=value");
    const std::string key = tokens[i].substr(0, eq);
    const std::string text = tokens[i].substr(eq + 1);
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(text, &used);
    } catch (const std::exception &) {
      used = 0;
    }
    if (used != text.size() || text.empty())
      throw Error(ErrorCode::InvalidArgument, "family parameter '" + key + "' has a non-numeric value");
    if (!params.emplace(key, value).second)
      throw Error(ErrorCode::InvalidArgument, "family parameter '" + key + "' given twice");
  }
  return EllipticalFamily::from_spec(tokens.front(), params, m);
}

struct GenOptions {
  int m = 2, k = 3;
  std::size_t n = 10000;
  double ecc = 10.0, sep = 10.0;
  std::uint64_t seed = 1;
  std::string out = "data.csv";
  std::string truth = "truth.json";
};

int cmd_gen(const GenOptions &o) {
  Rng rng(child_seed(o.seed, stream_id("gen")));
  const Dataset d = generate_synthetic(o.m, o.k, o.n, o.ecc, o.sep, rng);
  write_csv(o.out, d.samples);
  write_json(o.truth, model_to_json(*d.truth));
  fmt::print("seed {}\n", o.seed);
  return 0;
}

struct FitOptions {
  std::string data;
  std::vector<std::string> family;
  int k = 3;
  std::string opt = "dadam";
  double lr = 0.01;
  std::string schedule = "cosine";
  double beta1 = 0.9, beta2 = 0.999;
  int iters = 2000;
  std::uint64_t seed = 1;
  int batch = 1;
  std::string init = "kmeanspp-lite";
  std::string init_model;
  bool bias_correction = false, adaptive_mu = false;
  int eval_every = 0, nll_every = 0, trace_every = 0;
  std::string out_model = "model.json";
  std::string out_report = "report.json";
  std::string out_trace = "trace.csv";
};

int cmd_fit(const FitOptions &o) {
  const MatrixXd data = read_csv(o.data);
  const int m = static_cast<int>(data.cols());
  const EllipticalFamily family = parse_family(o.family, m);

  OptimizerConfig cfg;
  cfg.method = parse_method(o.opt);
  cfg.alpha = o.lr;
  cfg.schedule = parse_schedule(o.schedule);
  cfg.beta1 = o.beta1;
  cfg.beta2 = o.beta2;
  cfg.max_iters = o.iters;
  cfg.seed = o.seed;
  cfg.projection_batch = o.batch;
  cfg.bias_correction = o.bias_correction;
  cfg.adaptive_mu = o.adaptive_mu;
  cfg.eval_every = o.eval_every;
  cfg.nll_every = o.nll_every;

  MixtureModel model0 = [&] {
    if (!o.init_model.empty())
      return model_from_json(read_json(o.init_model));
    Rng rng(child_seed(o.seed, stream_id("init")));
    return initialize(data, o.k, family, parse_init(o.init), rng);
  }();
  if (!(model0.family() == family) && o.init_model.empty())
    throw Error(ErrorCode::Mismatch, "initial model family differs from --family");

  const FitReport report = fit(model0, data, cfg);
  const int every = o.trace_every > 0 ? o.trace_every : std::max(1, o.iters / 10000);
  if (report.final_model)
    write_json(o.out_model, model_to_json(*report.final_model));
  write_json(o.out_report, report_to_json(report, cfg));
  write_trace_csv(o.out_trace, report, every);
  fmt::print("{} iterations, sliced cost {:.6g} -> {:.6g}, NLL {:.6g} -> {:.6g}\n", report.iterations,
             report.initial_cost, report.final_cost, report.initial_nll, report.final_nll);
  if (report.failed) {
    fmt::print(stderr, "fit failed: {}\n", report.failure_reason);
    return 1;
  }
  return 0;
}

struct EvalOptions {
  std::vector<std::string> models;
  std::string data;
  std::string model2;
  bool unit_weight = false;
  std::uint64_t seed = 1;
  std::string out;
};

// Accepts either a model document or a fit report carrying one.
std::pair<std::optional<MixtureModel>, bool> load_fitted(const std::string &path) {
  const Json j = read_json(path);
  if (j.contains("kind") && j.at("kind") == "fit_report") {
    const bool failed = j.value("failed", true);
    if (j.at("final_model").is_null())
      return {std::nullopt, true};
    return {model_from_json(j.at("final_model")), failed};
  }
  return {model_from_json(j), false};
}

Json eval_model_model(const MixtureModel &a, const MixtureModel &b, bool unit_weight) {
  if (!(a.family() == b.family()))
    throw Error(ErrorCode::Mismatch, "models belong to different families");
  const TransportPlan plan = d_u(a, b, unit_weight);
  Json gamma = Json::array();
  for (int g : plan.gamma)
    gamma.push_back(g);
  Json table = Json::array();
  for (int i = 0; i < a.k(); ++i) {
    Json row = Json::array();
    for (int j = 0; j < b.k(); ++j)
      row.push_back(w2_elliptical(a.component(i), b.component(j), unit_weight));
    table.push_back(row);
  }
  return {{"schema_version", kSchemaVersion},
          {"kind", "eval_models"},
          {"d_u", plan.value()},
          {"transport_term", plan.cost},
          {"probability_term", plan.probability_term},
          {"plan", gamma},
          {"exact", plan.exact},
          {"pairwise_w2", table}};
}

int cmd_eval(const EvalOptions &o) {
  Json out;
  bool any_failed = false;
  if (!o.model2.empty()) {
    if (o.models.size() != 1)
      throw Error(ErrorCode::InvalidArgument, "model-vs-model evaluation takes exactly one --model");
    out = eval_model_model(model_from_json(read_json(o.models.front())),
                           model_from_json(read_json(o.model2)), o.unit_weight);
  } else {
    if (o.data.empty())
      throw Error(ErrorCode::InvalidArgument, "eval needs --data or --model2");
    const MatrixXd data = read_csv(o.data);
    Json entries = Json::array();
    std::vector<double> wass, nlls;
    int failures = 0;
    for (std::size_t i = 0; i < o.models.size(); ++i) {
      auto [model, failed] = load_fitted(o.models[i]);
      Json e = {{"path", o.models[i]}};
      double w = std::numeric_limits<double>::infinity(), l = w;
      if (model) {
        if (model->dim() != data.cols())
          throw Error(ErrorCode::Mismatch, "'" + o.models[i] + "' has a different dimension than the data");
        Rng rng(child_seed(o.seed, stream_id("eval"), i));
        const EmpiricalW2 ew = mc_mixture_w2(*model, data, rng);
        w = ew.value;
        e["wass_method"] = ew.method;
        if (model->family().has_density())
          l = nll(*model, data);
      }
      failed = failed || !std::isfinite(w);
      failures += failed ? 1 : 0;
      e["wass"] = std::isfinite(w) ? Json(w) : Json(nullptr);
      e["nll"] = std::isfinite(l) ? Json(l) : Json(nullptr);
      e["failed"] = failed;
      wass.push_back(w);
      nlls.push_back(l);
      entries.push_back(e);
    }
    const auto [wm, ws] = mean_std(wass);
    const auto [nm, ns] = mean_std(nlls);
    auto num = [](double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); };
    out = {{"schema_version", kSchemaVersion},
           {"kind", "eval_data"},
           {"models", entries},
           {"wass_mean", num(wm)},
           {"wass_std", num(ws)},
           {"nll_mean", num(nm)},
           {"nll_std", num(ns)},
           {"fail_ratio", static_cast<double>(failures) / static_cast<double>(o.models.size())}};
    any_failed = failures > 0;
  }
  if (o.out.empty())
    fmt::print("{}\n", out.dump(2));
  else
    write_json(o.out, out);
  return any_failed ? 1 : 0;
}

struct BenchOptions {
  std::vector<std::string> shapes{"2x3"};
  int datasets = 5, inits = 10, sweep_inits = 1;
  std::vector<std::string> opts{"dadam", "em"};
  std::vector<double> alphas = kStepsizeGrid;
  std::size_t n = 10000;
  int iters = 2000, em_iters = 500;
  double ecc = 10.0, sep = 10.0;
  std::uint64_t seed = 1;
  std::string init = "kmeanspp-lite";
  std::string schedule = "cosine";
  std::string out = "bench";
  bool traces = false, quiet = false;
};

int cmd_bench(const BenchOptions &o) {
  BenchSpec spec;
  spec.shapes.clear();
  for (const auto &s : o.shapes)
    spec.shapes.push_back(parse_shape(s));
  spec.methods.clear();
  for (const auto &name : o.opts)
    spec.methods.push_back(parse_method(name));
  spec.datasets = o.datasets;
  spec.inits = o.inits;
  spec.sweep_inits = o.sweep_inits;
  spec.alphas = o.alphas;
  spec.n = o.n;
  spec.iters = o.iters;
  spec.em_iters = o.em_iters;
  spec.eccentricity = o.ecc;
  spec.separation = o.sep;
  spec.seed = o.seed;
  spec.init = parse_init(o.init);
  spec.base.schedule = parse_schedule(o.schedule);
  spec.threads = threads_from_env();
  spec.keep_traces = o.traces;
  if (!o.quiet)
    spec.progress = [](const std::string &line) { fmt::print(stderr, "{}\n", line); };

  const BenchResult result = run_bench(spec);
  fs::create_directories(o.out);
  write_json((fs::path(o.out) / "aggregate.json").string(), aggregate_json(result, spec));
  write_json((fs::path(o.out) / "timing.json").string(), timing_json(result));
  write_runs_csv((fs::path(o.out) / "runs.csv").string(), result);
  if (o.traces) {
    const fs::path dir = fs::path(o.out) / "traces";
    fs::create_directories(dir);
    for (const RunRecord &r : result.runs) {
      FitReport shell;
      shell.trace = r.trace;
      std::string name = r.cell;
      std::replace(name.begin(), name.end(), '/', '_');
      write_trace_csv((dir / fmt::format("{}_d{}_i{}.csv", name, r.dataset, r.init)).string(), shell);
    }
  }
  bool failed = false;
  for (const CellSummary &c : result.cells) {
    fmt::print("{:<14} alpha={:<6g} wass {:.4g} ± {:.4g}  nll {:.4f} ± {:.4f}  failR {:.2f}  {:.2f} ms/it\n",
               c.id, c.alpha, c.wass_mean, c.wass_std, c.nll_mean, c.nll_std, c.fail_ratio,
               c.ms_per_iteration);
    failed = failed || c.failures > 0;
  }
  return failed ? 1 : 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Fit elliptical mixture models by Riemannian stochastic gradient descent"};
  app.require_subcommand(1);

  GenOptions gen;
  auto *g = app.add_subcommand("gen", "Generate a synthetic Gaussian mixture dataset");
  g->add_option("--m", gen.m, "Dimension")->check(CLI::PositiveNumber);
  g->add_option("--k", gen.k, "Number of components")->check(CLI::PositiveNumber);
  g->add_option("--n", gen.n, "Number of samples")->check(CLI::PositiveNumber);
  g->add_option("--ecc", gen.ecc, "Eigenvalue ratio bound (eccentricity)")->check(CLI::Range(1.0, 1e12));
  g->add_option("--sep", gen.sep, "Separation in units of sqrt(max trace)")->check(CLI::NonNegativeNumber);
  g->add_option("--seed", gen.seed, "Master seed");
  g->add_option("--out", gen.out, "Sample CSV path");
  g->add_option("--truth", gen.truth, "Ground-truth model JSON path");

  FitOptions fo;
  auto *f = app.add_subcommand("fit", "Fit a mixture to a CSV dataset");
  f->add_option("data", fo.data, "Headerless CSV, one sample per row")->required()->check(CLI::ExistingFile);
  f->add_option("--family", fo.family, "Family name followed by key=value parameters")->expected(1, -1);
  f->add_option("--k", fo.k, "Number of components")->check(CLI::PositiveNumber);
  f->add_option("--opt", fo.opt, "vanilla, radam, dadam or em");
  f->add_option("--lr", fo.lr, "Step size alpha")->check(CLI::NonNegativeNumber);
  f->add_option("--schedule", fo.schedule, "constant, invsqrt or cosine");
  f->add_option("--beta1", fo.beta1)->check(CLI::Range(0.0, 0.999999));
  f->add_option("--beta2", fo.beta2)->check(CLI::Range(0.0, 0.999999));
  f->add_option("--iters", fo.iters, "Iterations H")->check(CLI::PositiveNumber);
  f->add_option("--seed", fo.seed, "Seed for initialization and projections");
  f->add_option("--batch", fo.batch, "Projections averaged per iteration")->check(CLI::PositiveNumber);
  f->add_option("--init", fo.init, "random or kmeanspp-lite");
  f->add_option("--init-model", fo.init_model, "Start from this model JSON")->check(CLI::ExistingFile);
  f->add_flag("--bias-correction", fo.bias_correction, "Dadam: bias-correct the moments");
  f->add_flag("--adaptive-mu", fo.adaptive_mu, "Dadam: adaptive moments for the means");
  f->add_option("--eval-every", fo.eval_every, "Evaluate the fixed-direction sliced cost every N iterations");
  f->add_option("--nll-every", fo.nll_every, "Record NLL every N iterations");
  f->add_option("--trace-every", fo.trace_every, "Write every N-th trace row");
  f->add_option("--out-model", fo.out_model);
  f->add_option("--out-report", fo.out_report);
  f->add_option("--out-trace", fo.out_trace);

  EvalOptions eo;
  auto *e = app.add_subcommand("eval", "Evaluate models against data or against each other");
  e->add_option("--model", eo.models, "Model or fit report JSON (repeatable)")->required()->check(CLI::ExistingFile);
  e->add_option("--data", eo.data, "Dataset CSV")->check(CLI::ExistingFile);
  e->add_option("--model2", eo.model2, "Second model for model-vs-model evaluation")->check(CLI::ExistingFile);
  e->add_flag("--unit-weight", eo.unit_weight, "Use unit weight on the Bures term");
  e->add_option("--seed", eo.seed, "Seed for Monte Carlo draws");
  e->add_option("--out", eo.out, "Write JSON here instead of stdout");

  BenchOptions bo;
  auto *b = app.add_subcommand("bench", "Benchmark sweep over synthetic datasets");
  b->add_option("--shapes", bo.shapes, "Shapes as <m>x<k>")->delimiter(',');
  b->add_option("--datasets", bo.datasets)->check(CLI::PositiveNumber);
  b->add_option("--inits", bo.inits)->check(CLI::PositiveNumber);
  b->add_option("--sweep-inits", bo.sweep_inits, "Inits per dataset used for the step-size sweep")->check(CLI::PositiveNumber);
  b->add_option("--opts", bo.opts, "Optimizers")->delimiter(',');
  b->add_option("--alphas", bo.alphas, "Step-size grid")->delimiter(',');
  b->add_option("--n", bo.n)->check(CLI::PositiveNumber);
  b->add_option("--iters", bo.iters)->check(CLI::PositiveNumber);
  b->add_option("--em-iters", bo.em_iters)->check(CLI::PositiveNumber);
  b->add_option("--ecc", bo.ecc)->check(CLI::Range(1.0, 1e12));
  b->add_option("--sep", bo.sep)->check(CLI::NonNegativeNumber);
  b->add_option("--seed", bo.seed, "Master seed");
  b->add_option("--init", bo.init, "random or kmeanspp-lite");
  b->add_option("--schedule", bo.schedule, "constant, invsqrt or cosine");
  b->add_option("--out", bo.out, "Output directory");
  b->add_flag("--traces", bo.traces, "Write per-run trace CSVs");
  b->add_flag("--quiet", bo.quiet, "No per-run progress lines");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &err) {
    return app.exit(err) == 0 ? 0 : 2;
  }

  try {
    if (*g)
      return cmd_gen(gen);
    if (*f)
      return cmd_fit(fo);
    if (*e)
      return cmd_eval(eo);
    return cmd_bench(bo);
  } catch (const Error &err) {
    fmt::print(stderr, "error: {}\n", err.what());
    return 2;
  } catch (const std::exception &err) {
    fmt::print(stderr, "error: {}\n", err.what());
    return 2;
  }
}
