#include "emm/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include "emm/error.hpp"

namespace emm {
namespace {

[[noreturn]] void malformed(const std::string &what) {
  throw Error(ErrorCode::InvalidArgument, "malformed model document: " + what);
}

// JSON has no NaN or infinity; those become null.
Json number(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

Json vector_json(const VectorXd &v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    out.push_back(v(i));
  return out;
}

Json matrix_json(const MatrixXd &a) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    out.push_back(vector_json(a.row(r).transpose()));
  return out;
}

VectorXd vector_from(const Json &j, Eigen::Index size) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != size)
    malformed("expected an array of length " + std::to_string(size));
  VectorXd v(size);
  for (Eigen::Index i = 0; i < size; ++i) {
    if (!j[static_cast<std::size_t>(i)].is_number())
      malformed("non-numeric entry");
    v(i) = j[static_cast<std::size_t>(i)].get<double>();
  }
  return v;
}

MatrixXd matrix_from(const Json &j, Eigen::Index m) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != m)
    malformed("expected " + std::to_string(m) + " matrix rows");
  MatrixXd a(m, m);
  for (Eigen::Index r = 0; r < m; ++r)
    a.row(r) = vector_from(j[static_cast<std::size_t>(r)], m).transpose();
  return a;
}

const Json &field(const Json &j, const char *key) {
  if (!j.is_object() || !j.contains(key))
    malformed(std::string("missing field '") + key + "'");
  return j.at(key);
}

} // namespace

Json family_to_json(const EllipticalFamily &family) {
  Json params = Json::object();
  for (const auto &[key, value] : family.params())
    params[key] = value;
  return {{"name", family.name()}, {"dim", family.dim()}, {"params", params}};
}

EllipticalFamily family_from_json(const Json &j) {
  const Json &name = field(j, "name");
  const Json &dim = field(j, "dim");
  if (!name.is_string() || !dim.is_number_integer())
    malformed("family needs a string name and an integer dim");
  std::map<std::string, double> params;
  if (j.contains("params")) {
    if (!j.at("params").is_object())
      malformed("family params must be an object");
    for (const auto &[key, value] : j.at("params").items()) {
      if (!value.is_number())
        malformed("family parameter '" + key + "' is not a number");
      params[key] = value.get<double>();
    }
  }
  return EllipticalFamily::from_spec(name.get<std::string>(), params, dim.get<int>());
}

Json model_to_json(const MixtureModel &model) {
  Json params = Json::object();
  for (const auto &[key, value] : model.family().params())
    params[key] = value;
  Json mu = Json::array(), sigma = Json::array();
  for (int i = 0; i < model.k(); ++i) {
    mu.push_back(vector_json(model.mu(i)));
    sigma.push_back(matrix_json(model.sigma(i)));
  }
  return {{"schema_version", kSchemaVersion},
          {"kind", "model"},
          {"family", model.family().name()},
          {"params", params},
          {"k", model.k()},
          {"m", model.dim()},
          {"pi", vector_json(model.weights())},
          {"mu", mu},
          {"sigma", sigma}};
}

MixtureModel model_from_json(const Json &j) {
  const Json &version = field(j, "schema_version");
  if (!version.is_number_integer() || version.get<int>() != kSchemaVersion)
    malformed("unsupported schema_version");
  const Json &k_field = field(j, "k");
  const Json &m_field = field(j, "m");
  if (!k_field.is_number_integer() || !m_field.is_number_integer() || k_field.get<int>() < 1 ||
      m_field.get<int>() < 1)
    malformed("k and m must be positive integers");
  const EllipticalFamily family = family_from_json(
      {{"name", field(j, "family")}, {"dim", m_field}, {"params", j.value("params", Json::object())}});
  const int k = k_field.get<int>();
  const int m = m_field.get<int>();
  const VectorXd pi = vector_from(field(j, "pi"), k);
  const Json &mu_json = field(j, "mu");
  const Json &sigma_json = field(j, "sigma");
  if (!mu_json.is_array() || !sigma_json.is_array() || static_cast<int>(mu_json.size()) != k ||
      static_cast<int>(sigma_json.size()) != k)
    malformed("mu and sigma need k entries");
  std::vector<VectorXd> mu;
  std::vector<MatrixXd> sigma;
  for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
    mu.push_back(vector_from(mu_json[i], m));
    sigma.push_back(matrix_from(sigma_json[i], m));
  }
  return {family, pi, std::move(mu), std::move(sigma)};
}

Json report_to_json(const FitReport &report, const OptimizerConfig &cfg, bool with_timing) {
  Json config = {{"method", to_string(cfg.method)},
                 {"alpha", cfg.alpha},
                 {"schedule", to_string(cfg.schedule)},
                 {"beta1", cfg.beta1},
                 {"beta2", cfg.beta2},
                 {"max_iters", cfg.max_iters},
                 {"seed", cfg.seed},
                 {"projection_batch", cfg.projection_batch},
                 {"grid_nodes", cfg.grid_nodes},
                 {"bias_correction", cfg.bias_correction},
                 {"adaptive_mu", cfg.adaptive_mu}};
  Json out = {{"schema_version", kSchemaVersion},
              {"kind", "fit_report"},
              {"method", report.method},
              {"config", config},
              {"iterations", report.iterations},
              {"initial_cost", number(report.initial_cost)},
              {"final_cost", number(report.final_cost)},
              {"initial_nll", number(report.initial_nll)},
              {"final_nll", number(report.final_nll)},
              {"failed", report.failed},
              {"failure_reason", report.failure_reason},
              {"pd_failures", report.pd_failures},
              {"step_halvings", report.step_halvings},
              {"reseeds", report.reseeds},
              {"max_simplex_error", report.max_simplex_error},
              {"all_pd", report.all_pd},
              {"adp_nondecreasing", report.adp_nondecreasing}};
  if (with_timing)
    out["ms_per_iteration"] = report.ms_per_iteration;
  out["final_model"] = report.final_model ? model_to_json(*report.final_model) : Json(nullptr);
  return out;
}

void write_trace_csv(const std::string &path, const FitReport &report, int every) {
  if (every < 1)
    throw Error(ErrorCode::InvalidArgument, "trace stride must be positive");
  std::unique_ptr<std::FILE, int (*)(std::FILE *)> file(std::fopen(path.c_str(), "w"), &std::fclose);
  if (!file)
    throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
  std::fputs("iteration,sliced_cost,evaluated,nll,wall_ms\n", file.get());
  for (std::size_t i = 0; i < report.trace.size(); ++i) {
    const TraceEntry &e = report.trace[i];
    if (e.iteration % every != 0 && i + 1 != report.trace.size())
      continue;
    std::fprintf(file.get(), "%d,%.17g,%d,%.17g,%.6f\n", e.iteration, e.sliced_cost,
                 e.evaluated ? 1 : 0, e.nll, e.wall_ms);
  }
  if (std::ferror(file.get()))
    throw Error(ErrorCode::Io, "write to '" + path + "' failed");
}

Json read_json(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::InvalidArgument, "'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_json(const std::string &path, const Json &j) {
  std::ofstream out(path);
  if (!out)
    throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out)
    throw Error(ErrorCode::Io, "write to '" + path + "' failed");
}

} // namespace emm
