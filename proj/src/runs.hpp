#pragma once

#include <string>

#include "config.hpp"
#include "limit_harness.hpp"

namespace vpb {

/// Transport coefficients, residuals and operator diagnostics as a JSON document.
std::string coefficients_json(const VelocityModel& model);

/// CSV table (radius, alpha, beta, spreads) on an even radius grid in (0, r_max].
void write_alpha_beta_table(const VelocityModel& model, const std::string& path, int samples = 40, double r_max = 5.0);

struct RunOutputs {
  std::string csv;
  std::string json;
  std::string summary;  // JSON text also written to the json path
};

/// One kinetic run from the flat configuration. Writes kinetic.csv and kinetic_summary.json
/// into out_dir; honours restart_from / checkpoint_out keys.
RunOutputs simulate(std::shared_ptr<const VelocityModel> model, const KeyValueConfig& kv, const std::string& out_dir);

/// One fluid reference run. Writes fluid.csv, fluid_summary.json and fluid_fields.bin.
RunOutputs fluid_run(std::shared_ptr<const VelocityModel> model, const KeyValueConfig& kv, const std::string& out_dir);

/// Full epsilon sweep; writes the report files and returns the JSON summary text.
RunOutputs sweep(std::shared_ptr<const VelocityModel> model, const KeyValueConfig& kv, const std::string& out_dir,
                 int threads);

/// Fast property suite over the velocity model and both solvers. Returns a JSON
/// report; failures counts failed checks.
std::string selftest(std::shared_ptr<const VelocityModel> model, int& failures);

/// Rejects configuration keys that no getter consumed.
void reject_unused(const KeyValueConfig& kv);

}  // namespace vpb
