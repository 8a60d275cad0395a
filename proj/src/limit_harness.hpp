#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "config.hpp"
#include "fluid_solver.hpp"
#include "kinetic_solver.hpp"

namespace vpb {

/// Velocity-side settings shared by every run.
struct ModelSettings {
  int K = 4;
  int quad_order = 16;
  double cross_section = 1.0;
  std::string cache_dir;
};

/// Smooth default profile on the first x-axis:
/// u0 = (0, A sin x, 0), theta0 = A cos x, rho0 = -theta0, phi0 = A_phi cos x (n0 = Delta phi0).
struct ProfileSettings {
  double amplitude = 1e-3;
  double amplitude_phi = 1e-3;
};

/// Kinetic defaults for sweeps: acoustic-free initial data and the second-order scheme,
/// so that the time-discretization gap to the fluid run stays below the epsilon effects.
inline KineticConfig sweep_kinetic_defaults() {
  KineticConfig k;
  k.init = InitMode::SlowManifold;
  k.scheme = TimeScheme::Ars222;
  return k;
}

struct SweepConfig {
  ModelSettings model;
  ProfileSettings profile;
  KineticConfig kinetic = sweep_kinetic_defaults();  // epsilon is overridden per sweep entry
  std::vector<double> epsilons{0.5, 0.25, 0.125, 0.0625};
  int sobolev_s = 1;
  int threads = 1;
};

FluidProfile make_profile(const SpectralGrid& grid, const ProfileSettings& p);

ModelSettings model_settings_from(const KeyValueConfig& kv);
KineticConfig kinetic_config_from(const KeyValueConfig& kv, const KineticConfig& defaults = {});
ProfileSettings profile_settings_from(const KeyValueConfig& kv);
SweepConfig sweep_config_from(const KeyValueConfig& kv);

std::map<std::string, std::string> to_key_values(const ModelSettings& m);
std::map<std::string, std::string> to_key_values(const KineticConfig& k);
std::map<std::string, std::string> to_key_values(const FluidConfig& f);
std::map<std::string, std::string> to_key_values(const SweepConfig& s);

/// Fluid configuration matched to a kinetic one, with the transport coefficients of the limit.
FluidConfig matched_fluid_config(const KineticConfig& k, const TransportCoefficients& tc);

std::shared_ptr<const VelocityModel> build_model(const ModelSettings& m);

/// Names of the tracked norms, in CSV column order within each epsilon block.
const std::vector<std::string>& tracked_norms();

struct EpsilonResult {
  double epsilon = 0.0;
  bool failed = false;
  std::string error;
  std::vector<std::vector<double>> series;  // [norm][time]
  double wall_seconds = 0.0;
};

struct SweepReport {
  std::vector<double> times;
  std::vector<EpsilonResult> results;
  std::map<std::string, double> slopes;  // NaN when fewer than two usable points
  std::string kinetic_hash;
  std::string fluid_hash;
  std::map<std::string, std::string> config_echo;
  double mu = 0.0, kappa = 0.0, sigma = 0.0;
  double fluid_wall_seconds = 0.0;

  /// Final-time value of a tracked norm for result e.
  double final_value(std::size_t e, const std::string& norm) const;
};

SweepReport run_sweep(std::shared_ptr<const VelocityModel> model, const SweepConfig& cfg);

/// Least-squares slope of log(value) against log(epsilon), skipping the largest
/// epsilon and non-positive or failed entries.
double fit_slope(const std::vector<double>& epsilons, const std::vector<double>& values);

struct ReportPaths {
  std::string csv;
  std::string json;
  std::string digest;
};
ReportPaths default_report_paths(const std::string& out_dir);

void emit_report(const SweepReport& report, const ReportPaths& paths);
std::string report_csv(const SweepReport& report);
std::string report_json(const SweepReport& report);
std::string report_digest(const SweepReport& report);
SweepReport report_from_json(const std::string& text);
bool operator==(const SweepReport& a, const SweepReport& b);

}  // namespace vpb
