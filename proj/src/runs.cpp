#include "runs.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <omp.h>
#include <sstream>

#include "error.hpp"

namespace vpb {

namespace {

namespace fs = std::filesystem;

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir.empty() ? "." : dir) / name).string();
}

void write_text(const std::string& path, const std::string& text) {
  const fs::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) io_error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) io_error("write failed for '" + path + "'");
}

nlohmann::json num(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); }

nlohmann::json coefficient_block(const TransportCoefficients& tc) {
  return {{"mu", tc.mu},       {"kappa", tc.kappa},          {"sigma", tc.sigma},
          {"mu_limit", tc.mu_limit}, {"sigma_limit", tc.sigma_limit}};
}

}  // namespace

void reject_unused(const KeyValueConfig& kv) {
  const auto unused = kv.unused_keys();
  if (unused.empty()) return;
  std::string list;
  for (const auto& k : unused) list += (list.empty() ? "" : ", ") + k;
  usage_error("unknown configuration keys: " + list);
}

std::string coefficients_json(const VelocityModel& m) {
  const auto& tc = m.transport;
  const double d1 = coercivity_constant(*m.ops, m.proj, WhichL::L1);
  const double d2 = coercivity_constant(*m.ops, m.proj, WhichL::L2);
  const NuBounds nb = fit_nu_bounds(m.basis->grid());
  nlohmann::json j = coefficient_block(tc);
  j["K"] = m.basis->degree_cutoff();
  j["quad_order"] = m.basis->quad_order();
  j["dim"] = m.basis->dim();
  j["cross_section"] = m.ops->config().cross_section;
  j["sigma_components"] = tc.sigma_components;
  j["residuals"] = {{"A_hat", tc.residual_A}, {"B_hat", tc.residual_B}, {"Phi_hat", tc.residual_Phi},
                    {"Psi_hat", tc.residual_Psi}};
  j["coercivity"] = {{"delta_L1", d1}, {"delta_L2", d2}};
  j["kernel_dimension"] = {{"L1", m.ops->kernel_dimension(m.ops->L1())}, {"L2", m.ops->kernel_dimension(m.ops->L2())}};
  j["nu_bounds"] = {{"c1", nb.c1}, {"c2", nb.c2}};
  j["sphere_rule"] = m.ops->sphere_rule_description();
  j["certification_change"] = m.ops->certification_change();
  return j.dump(2) + "\n";
}

void write_alpha_beta_table(const VelocityModel& m, const std::string& path, int samples, double r_max) {
  if (samples < 1 || !(r_max > 0.0)) usage_error("alpha-beta table needs samples >= 1 and r_max > 0");
  std::vector<double> radii;
  for (int i = 1; i <= samples; ++i) radii.push_back(r_max * i / samples);
  const auto rows = compute_alpha_beta(*m.basis, m.transport, radii);
  std::ostringstream out;
  out << "radius,alpha,beta,alpha_spread,beta_spread,beta_valid\n";
  for (const auto& r : rows)
    out << format_double(r.radius) << "," << format_double(r.alpha) << "," << format_double(r.beta) << ","
        << format_double(r.alpha_spread) << "," << format_double(r.beta_spread) << "," << (r.beta_valid ? 1 : 0)
        << "\n";
  write_text(path, out.str());
}

RunOutputs simulate(std::shared_ptr<const VelocityModel> model, const KeyValueConfig& kv, const std::string& out_dir) {
  const KineticConfig kc = kinetic_config_from(kv);
  const ProfileSettings ps = profile_settings_from(kv);
  const std::string restart = kv.get_string("restart_from", "");
  const std::string checkpoint = kv.get_string("checkpoint_out", "");
  model_settings_from(kv);  // consumed by the caller when building the model
  omp_set_num_threads(std::max(1, kv.get_int("threads", 1)));
  reject_unused(kv);
  KineticSolver ks(model, kc);
  const KineticState initial = restart.empty() ? ks.init_well_prepared(make_profile(ks.grid(), ps)) : ks.load_checkpoint(restart);
  const KineticRun run = ks.run(initial);
  if (!checkpoint.empty()) ks.save_checkpoint(run.final_state, checkpoint);

  std::ostringstream csv;
  csv << "t,E,D,rho_l2,u_l2,theta_l2,n_l2,j_l2,w_l2,res_mass,res_momentum,res_energy,res_charge,gauss,positivity_min,"
         "picard_iters\n";
  for (const auto& s : run.snapshots) {
    const auto& r = s.residuals;
    for (double x : {s.t, s.E, s.D, s.rho_l2, s.u_l2, s.theta_l2, s.n_l2, s.j_l2, s.w_l2, r.mass, r.momentum, r.energy,
                     r.charge, s.gauss, s.positivity_min})
      csv << format_double(x) << ",";
    csv << s.picard_iters << "\n";
  }
  double max_increase = 0.0;
  for (std::size_t i = 1; i < run.energy_trace.size(); ++i)
    max_increase = std::max(max_increase, run.energy_trace[i].second - run.energy_trace[i - 1].second);
  auto echo = to_key_values(kc);
  for (const auto& [k, v] : to_key_values(model_settings_from(kv))) echo[k] = v;
  echo["amplitude"] = format_double(ps.amplitude);
  echo["amplitude_phi"] = format_double(ps.amplitude_phi);
  const auto& last = run.snapshots.back();
  nlohmann::json j;
  j["config"] = echo;
  j["config_hash"] = config_hash(echo);
  j["steps"] = run.steps;
  j["wall_seconds"] = run.wall_seconds;
  j["t_final"] = last.t;
  j["E_initial"] = run.energy_trace.front().second;
  j["E_final"] = last.E;
  j["max_E_increase"] = max_increase;
  j["dissipation_integral"] = run.dissipation_integral;
  j["final_norms"] = {{"rho", last.rho_l2}, {"u", last.u_l2}, {"theta", last.theta_l2},
                      {"n", last.n_l2},     {"j", last.j_l2}, {"w", last.w_l2}};
  j["final_residuals"] = {{"mass", num(last.residuals.mass)},
                          {"momentum", num(last.residuals.momentum)},
                          {"energy", num(last.residuals.energy)},
                          {"charge", num(last.residuals.charge)},
                          {"gauss", last.gauss}};
  j["positivity_min"] = last.positivity_min;
  j["coefficients"] = coefficient_block(model->transport);
  if (!restart.empty()) j["restarted_from"] = restart;
  if (!checkpoint.empty()) j["checkpoint"] = checkpoint;
  RunOutputs out{join(out_dir, "kinetic.csv"), join(out_dir, "kinetic_summary.json"), j.dump(2) + "\n"};
  write_text(out.csv, csv.str());
  write_text(out.json, out.summary);
  return out;
}

RunOutputs fluid_run(std::shared_ptr<const VelocityModel> model, const KeyValueConfig& kv, const std::string& out_dir) {
  const KineticConfig kc = kinetic_config_from(kv);
  const ProfileSettings ps = profile_settings_from(kv);
  FluidConfig fc = matched_fluid_config(kc, model->transport);
  fc.mu = kv.get_double("mu", fc.mu);
  fc.kappa = kv.get_double("kappa", fc.kappa);
  fc.sigma = kv.get_double("sigma", fc.sigma);
  model_settings_from(kv);
  omp_set_num_threads(std::max(1, kv.get_int("threads", 1)));
  kv.get_string("restart_from", "");
  kv.get_string("checkpoint_out", "");
  reject_unused(kv);
  const FluidSolver solver(fc);
  const FluidRun run = solver.run(solver.initial_state(make_profile(solver.grid(), ps)));
  std::ostringstream csv;
  csv << "t,u_l2,theta_l2,n_l2,j_l2,max_divergence,boussinesq\n";
  for (const auto& s : run.snapshots) {
    csv << format_double(s.t) << "," << format_double(s.u_l2) << "," << format_double(s.theta_l2) << ","
        << format_double(s.n_l2) << "," << format_double(s.j_l2) << "," << format_double(s.max_divergence) << ","
        << format_double(s.boussinesq) << "\n";
  }
  auto echo = to_key_values(fc);
  echo["amplitude"] = format_double(ps.amplitude);
  echo["amplitude_phi"] = format_double(ps.amplitude_phi);
  const auto& last = run.snapshots.back();
  nlohmann::json j;
  j["config"] = echo;
  j["config_hash"] = config_hash(echo);
  j["steps"] = run.steps;
  j["wall_seconds"] = run.wall_seconds;
  j["t_final"] = last.t;
  j["final_norms"] = {{"u", last.u_l2}, {"theta", last.theta_l2}, {"n", last.n_l2}, {"j", last.j_l2}};
  j["max_divergence"] = last.max_divergence;
  const std::string fields = join(out_dir, "fluid_fields.bin");
  j["fields_file"] = fields;
  RunOutputs out{join(out_dir, "fluid.csv"), join(out_dir, "fluid_summary.json"), j.dump(2) + "\n"};
  write_text(out.csv, csv.str());
  write_text(out.json, out.summary);
  solver.write_fields(run.final_state, fields);
  return out;
}

RunOutputs sweep(std::shared_ptr<const VelocityModel> model, const KeyValueConfig& kv, const std::string& out_dir,
                 int threads) {
  SweepConfig sc = sweep_config_from(kv);
  if (threads > 0) sc.threads = threads;
  kv.get_string("restart_from", "");
  kv.get_string("checkpoint_out", "");
  reject_unused(kv);
  const SweepReport rep = run_sweep(std::move(model), sc);
  const ReportPaths paths = default_report_paths(out_dir);
  emit_report(rep, paths);
  return {paths.csv, paths.json, report_json(rep)};
}

std::string selftest(std::shared_ptr<const VelocityModel> model, int& failures) {
  nlohmann::json checks = nlohmann::json::array();
  failures = 0;
  auto record = [&](const std::string& name, bool ok, double value) {
    checks.push_back({{"name", name}, {"pass", ok}, {"value", num(value)}});
    if (!ok) ++failures;
  };
  const VelocityModel& m = *model;
  const Eigen::MatrixXd L1 = m.ops->L1(), L2 = m.ops->L2();
  record("L1 kernel dimension is 5", m.ops->kernel_dimension(L1) == 5, m.ops->kernel_dimension(L1));
  record("L2 kernel dimension is 1", m.ops->kernel_dimension(L2) == 1, m.ops->kernel_dimension(L2));
  const double asym = std::max((L1 - L1.transpose()).cwiseAbs().maxCoeff(), (L2 - L2.transpose()).cwiseAbs().maxCoeff());
  record("L1, L2 symmetric within 1e-9", asym < 1e-9, asym);
  if (m.ops->has_tensor()) {
    Eigen::VectorXd f = Eigen::VectorXd::LinSpaced(m.basis->dim(), -1.0, 1.0).array().sin();
    const Eigen::VectorXd q = m.ops->apply_Q(f, f);
    double worst = std::abs(m.moments.one.dot(q)) + std::abs(m.moments.v_sq.dot(q));
    for (int d = 0; d < 3; ++d) worst += std::abs(m.moments.v[d].dot(q));
    record("collision invariants annihilate Q(f,f)", worst < 1e-7, worst);
  }
  const double d1 = coercivity_constant(*m.ops, m.proj, WhichL::L1);
  const double d2 = coercivity_constant(*m.ops, m.proj, WhichL::L2);
  record("coercivity delta(L1) > 0", d1 > 0, d1);
  record("coercivity delta(L2) > 0", d2 > 0, d2);
  const auto& tc = m.transport;
  record("mu > 0", tc.mu > 0, tc.mu);
  record("kappa > 0", tc.kappa > 0, tc.kappa);
  record("sigma > 0", tc.sigma > 0, tc.sigma);
  {
    KineticConfig kc;
    kc.modes = 16;
    kc.epsilon = 0.1;
    kc.dt = 1e-3;
    kc.t_final = 0.01;
    kc.snapshot_every = 1;
    kc.init = InitMode::ChapmanEnskog;
    KineticSolver ks(model, kc);
    ProfileSettings ps;
    const KineticRun run = ks.run(ks.init_well_prepared(make_profile(ks.grid(), ps)));
    double gauss = 0.0, charge = 0.0, inc = 0.0;
    for (const auto& s : run.snapshots) gauss = std::max(gauss, s.gauss);
    for (std::size_t i = 1; i < run.snapshots.size(); ++i) charge = std::max(charge, run.snapshots[i].residuals.charge);
    for (std::size_t i = 1; i < run.energy_trace.size(); ++i)
      inc = std::max(inc, run.energy_trace[i].second - run.energy_trace[i - 1].second);
    record("Gauss law after every step within 1e-9", gauss < 1e-9, gauss);
    record("charge law residual below 1e-8", charge < 1e-8, charge);
    record("E_N nonincreasing within 1e-8", inc <= 1e-8, inc);
  }
  {
    FluidConfig fc = matched_fluid_config(KineticConfig{}, tc);
    fc.modes = 16;
    fc.t_final = 0.05;
    const FluidSolver fsol(fc);
    FluidProfile p;
    p.n = Field::Zero(fsol.grid().n_cmodes());
    p.n(1) = 0.5;
    const FluidRun run = fsol.run(fsol.initial_state(p));
    const double exact = 0.5 * std::exp(-fc.sigma * 1.5 * fc.t_final);
    const double rel = std::abs(run.final_state.n(1) - exact) / exact;
    record("fluid single-mode charge decay matches the exponential within 1e-6", rel < 1e-6, rel);
  }
  nlohmann::json j;
  j["checks"] = checks;
  j["failures"] = failures;
  return j.dump(2) + "\n";
}

}  // namespace vpb
