#pragma once

#include <string>

#include <json.hpp>

#include "emm/optim.hpp"

namespace emm {

using Json = nlohmann::ordered_json;

/// Bumped whenever a field is renamed or removed from any written document.
inline constexpr int kSchemaVersion = 1;

[[nodiscard]] Json family_to_json(const EllipticalFamily &family);
[[nodiscard]] EllipticalFamily family_from_json(const Json &j);

[[nodiscard]] Json model_to_json(const MixtureModel &model);
/// Validates the document shape and rebuilds the model (which re-checks the
/// simplex and PD constraints). Throws InvalidArgument on malformed input.
[[nodiscard]] MixtureModel model_from_json(const Json &j);

/// Summary of a fit: configuration, metrics, constraint tracking, final
/// model. Wall-clock fields are included only when `with_timing` is set.
[[nodiscard]] Json report_to_json(const FitReport &report, const OptimizerConfig &cfg,
                                  bool with_timing = true);

/// Columns: iteration,sliced_cost,evaluated,nll,wall_ms. Every `every`-th
/// entry is written, plus the last one.
void write_trace_csv(const std::string &path, const FitReport &report, int every = 1);

[[nodiscard]] Json read_json(const std::string &path);
/// Pretty-printed with a trailing newline.
void write_json(const std::string &path, const Json &j);

} // namespace emm
