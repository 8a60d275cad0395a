#include "limit_harness.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <sstream>

#include "error.hpp"

namespace vpb {

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string scheme_name(TimeScheme s) { return s == TimeScheme::Ars222 ? "ars222" : "imex_euler"; }
std::string form_name(CollisionForm f) { return f == CollisionForm::Physical ? "physical" : "symmetrized"; }
std::string init_name(InitMode m) {
  if (m == InitMode::ChapmanEnskog) return "chapman_enskog";
  return m == InitMode::SlowManifold ? "slow_manifold" : "minimal";
}
std::string bool_name(bool b) { return b ? "true" : "false"; }

std::string list_text(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
  return out;
}

double hs_norm(const SpectralGrid& gr, const Field& a, int s) { return std::sqrt(gr.hs_sq(a, s)); }

double hs_norm(const SpectralGrid& gr, const std::array<Field, 3>& a, int s) { return std::sqrt(hs_sq(gr, a, s)); }

void write_text(const std::string& path, const std::string& text) {
  namespace fs = std::filesystem;
  const fs::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) io_error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) io_error("write failed for '" + path + "'");
}

nlohmann::json number_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); }

double number_from(const nlohmann::json& j) { return j.is_null() ? kNaN : j.get<double>(); }

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

}  // namespace

FluidProfile make_profile(const SpectralGrid& gr, const ProfileSettings& p) {
  const int ncm = gr.n_cmodes(), c1 = gr.index_of(1, 0);
  FluidProfile out;
  out.theta = Field::Zero(ncm);
  out.n = Field::Zero(ncm);
  out.u[1] = Field::Zero(ncm);
  out.theta(c1) = p.amplitude / 2;
  out.u[1](c1) = std::complex<double>(0.0, -p.amplitude / 2);
  out.n(c1) = -p.amplitude_phi / 2;  // Delta (A_phi cos x) = -A_phi cos x
  out.rho = -out.theta;
  return out;
}

ModelSettings model_settings_from(const KeyValueConfig& kv) {
  ModelSettings m;
  m.K = kv.get_int("K", m.K);
  m.quad_order = kv.get_int("quad_order", m.quad_order);
  m.cross_section = kv.get_double("cross_section", m.cross_section);
  m.cache_dir = kv.get_string("cache", m.cache_dir);
  return m;
}

KineticConfig kinetic_config_from(const KeyValueConfig& kv, const KineticConfig& defaults) {
  KineticConfig k = defaults;
  k.x_dims = kv.get_int("x_dims", k.x_dims);
  k.modes = kv.get_int("modes", k.modes);
  k.length = kv.get_double("length", k.length);
  k.epsilon = kv.get_double("epsilon", k.epsilon);
  k.dt = kv.get_double("dt", k.dt);
  k.t_final = kv.get_double("t_final", k.t_final);
  k.collisions = kv.get_bool("collisions", k.collisions);
  k.fields = kv.get_bool("fields", k.fields);
  k.nonlinear = kv.get_bool("nonlinear", k.nonlinear);
  k.picard = kv.get_bool("picard", k.picard);
  k.picard_max_iters = kv.get_int("picard_max_iters", k.picard_max_iters);
  k.picard_tol = kv.get_double("picard_tol", k.picard_tol);
  const std::string scheme = kv.get_string("scheme", scheme_name(k.scheme));
  if (scheme == "imex_euler")
    k.scheme = TimeScheme::ImexEuler;
  else if (scheme == "ars222")
    k.scheme = TimeScheme::Ars222;
  else
    usage_error("scheme must be imex_euler or ars222, got '" + scheme + "'");
  const std::string form = kv.get_string("collision_form", form_name(k.collision_form));
  if (form == "symmetrized")
    k.collision_form = CollisionForm::Symmetrized;
  else if (form == "physical")
    k.collision_form = CollisionForm::Physical;
  else
    usage_error("collision_form must be symmetrized or physical, got '" + form + "'");
  const std::string init = kv.get_string("init", init_name(k.init));
  if (init == "minimal")
    k.init = InitMode::Minimal;
  else if (init == "chapman_enskog")
    k.init = InitMode::ChapmanEnskog;
  else if (init == "slow_manifold")
    k.init = InitMode::SlowManifold;
  else
    usage_error("init must be minimal, chapman_enskog or slow_manifold, got '" + init + "'");
  k.blowup_factor = kv.get_double("blowup_factor", k.blowup_factor);
  k.snapshot_every = kv.get_int("snapshot_every", k.snapshot_every);
  k.n_diag = kv.get_int("n_diag", k.n_diag);
  k.norm_tol = kv.get_double("norm_tol", k.norm_tol);
  return k;
}

ProfileSettings profile_settings_from(const KeyValueConfig& kv) {
  ProfileSettings p;
  p.amplitude = kv.get_double("amplitude", p.amplitude);
  p.amplitude_phi = kv.get_double("amplitude_phi", p.amplitude_phi);
  return p;
}

SweepConfig sweep_config_from(const KeyValueConfig& kv) {
  SweepConfig s;
  s.model = model_settings_from(kv);
  s.profile = profile_settings_from(kv);
  s.kinetic = kinetic_config_from(kv, sweep_kinetic_defaults());
  s.epsilons = kv.get_doubles("epsilons", s.epsilons);
  s.sobolev_s = kv.get_int("sobolev_s", s.sobolev_s);
  s.threads = kv.get_int("threads", s.threads);
  return s;
}

std::map<std::string, std::string> to_key_values(const ModelSettings& m) {
  return {{"K", std::to_string(m.K)},
          {"quad_order", std::to_string(m.quad_order)},
          {"cross_section", format_double(m.cross_section)}};
}

std::map<std::string, std::string> to_key_values(const KineticConfig& k) {
  return {{"x_dims", std::to_string(k.x_dims)},
          {"modes", std::to_string(k.modes)},
          {"length", format_double(k.length)},
          {"epsilon", format_double(k.epsilon)},
          {"dt", format_double(k.dt)},
          {"t_final", format_double(k.t_final)},
          {"collisions", bool_name(k.collisions)},
          {"fields", bool_name(k.fields)},
          {"nonlinear", bool_name(k.nonlinear)},
          {"picard", bool_name(k.picard)},
          {"picard_max_iters", std::to_string(k.picard_max_iters)},
          {"picard_tol", format_double(k.picard_tol)},
          {"scheme", scheme_name(k.scheme)},
          {"collision_form", form_name(k.collision_form)},
          {"init", init_name(k.init)},
          {"blowup_factor", format_double(k.blowup_factor)},
          {"snapshot_every", std::to_string(k.snapshot_every)},
          {"n_diag", std::to_string(k.n_diag)},
          {"norm_tol", format_double(k.norm_tol)}};
}

std::map<std::string, std::string> to_key_values(const FluidConfig& f) {
  return {{"x_dims", std::to_string(f.x_dims)},
          {"modes", std::to_string(f.modes)},
          {"length", format_double(f.length)},
          {"dt", format_double(f.dt)},
          {"t_final", format_double(f.t_final)},
          {"mu", format_double(f.mu)},
          {"kappa", format_double(f.kappa)},
          {"sigma", format_double(f.sigma)},
          {"snapshot_every", std::to_string(f.snapshot_every)},
          {"blowup_factor", format_double(f.blowup_factor)}};
}

std::map<std::string, std::string> to_key_values(const SweepConfig& s) {
  auto kv = to_key_values(s.kinetic);
  kv.erase("epsilon");
  for (const auto& [k, v] : to_key_values(s.model)) kv[k] = v;
  kv["amplitude"] = format_double(s.profile.amplitude);
  kv["amplitude_phi"] = format_double(s.profile.amplitude_phi);
  kv["epsilons"] = list_text(s.epsilons);
  kv["sobolev_s"] = std::to_string(s.sobolev_s);
  return kv;
}

FluidConfig matched_fluid_config(const KineticConfig& k, const TransportCoefficients& tc) {
  FluidConfig f;
  f.x_dims = k.x_dims;
  f.modes = k.modes;
  f.length = k.length;
  f.dt = k.dt;
  f.t_final = k.t_final;
  f.snapshot_every = k.snapshot_every;
  f.blowup_factor = k.blowup_factor;
  f.mu = tc.mu_limit;
  f.kappa = tc.kappa;
  f.sigma = tc.sigma_limit;
  return f;
}

std::shared_ptr<const VelocityModel> build_model(const ModelSettings& m) {
  CollisionConfig cc;
  cc.cross_section = m.cross_section;
  return VelocityModel::build(m.K, m.quad_order, cc, m.cache_dir);
}

const std::vector<std::string>& tracked_norms() {
  static const std::vector<std::string> names{"rho", "u", "theta", "n", "j", "w", "div_u", "boussinesq", "ohm"};
  return names;
}

double SweepReport::final_value(std::size_t e, const std::string& norm) const {
  const auto& names = tracked_norms();
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == norm) {
      const auto& s = results.at(e).series;
      return s.empty() || s[i].empty() ? kNaN : s[i].back();
    }
  usage_error("unknown tracked norm '" + norm + "'");
}

double fit_slope(const std::vector<double>& eps, const std::vector<double>& values) {
  if (eps.size() != values.size()) usage_error("fit_slope: size mismatch");
  std::size_t largest = 0;
  for (std::size_t i = 1; i < eps.size(); ++i)
    if (eps[i] > eps[largest]) largest = i;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (i == largest || !(values[i] > 0.0) || !std::isfinite(values[i])) continue;
    xs.push_back(std::log(eps[i]));
    ys.push_back(std::log(values[i]));
  }
  if (xs.size() < 2) return kNaN;
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i] / n;
    my += ys[i] / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxx > 0 ? sxy / sxx : kNaN;
}

SweepReport run_sweep(std::shared_ptr<const VelocityModel> model, const SweepConfig& cfg) {
  if (!model) usage_error("sweep needs a velocity model");
  if (cfg.threads < 1) usage_error("threads must be >= 1");
  if (cfg.sobolev_s < 0) usage_error("sobolev_s must be >= 0");
  for (double e : cfg.epsilons)
    if (!(e > 0.0) || e > 1.0) usage_error("every sweep epsilon must lie in (0, 1]");
  const TransportCoefficients& tc = model->transport;
  const FluidConfig fc = matched_fluid_config(cfg.kinetic, tc);

  SweepReport rep;
  rep.mu = fc.mu;
  rep.kappa = fc.kappa;
  rep.sigma = fc.sigma;
  rep.config_echo = to_key_values(cfg);
  rep.kinetic_hash = config_hash([&] {
    auto kv = to_key_values(cfg.kinetic);
    kv.erase("epsilon");
    for (const auto& [k, v] : to_key_values(cfg.model)) kv[k] = v;
    return kv;
  }());
  rep.fluid_hash = config_hash(to_key_values(fc));
  rep.results.resize(cfg.epsilons.size());
  if (cfg.epsilons.empty()) return rep;

  // Fluid reference, computed once.
  const FluidSolver fluid(fc);
  const FluidProfile profile = make_profile(fluid.grid(), cfg.profile);
  const FluidRun fref = fluid.run(fluid.initial_state(profile), true);
  rep.fluid_wall_seconds = fref.wall_seconds;
  for (const auto& sn : fref.snapshots) rep.times.push_back(sn.t);
  const SpectralGrid& gr = fluid.grid();
  const int s = cfg.sobolev_s;
  const double sigma = fc.sigma;
  const std::size_t nnorm = tracked_norms().size();

  auto run_one = [&](std::size_t e) {
    EpsilonResult& r = rep.results[e];
    r.epsilon = cfg.epsilons[e];
    const auto t0 = std::chrono::steady_clock::now();
    try {
      KineticConfig kc = cfg.kinetic;
      kc.epsilon = r.epsilon;
      KineticSolver ks(model, kc);
      const KineticRun run = ks.run(ks.init_well_prepared(profile), true);
      if (run.snapshots.size() != rep.times.size()) numerical_error("kinetic and fluid snapshot counts differ");
      r.series.assign(nnorm, std::vector<double>(rep.times.size(), 0.0));
      for (std::size_t t = 0; t < rep.times.size(); ++t) {
        if (run.snapshots[t].t != rep.times[t]) numerical_error("kinetic and fluid snapshot times differ");
        const MomentFields& km = run.moments[t];
        const MomentFields& fm = fref.moments[t];
        const auto pu = leray_project(gr, km.u);
        std::array<Field, 3> du, dj, ohm;
        const auto gn = gradient(gr, km.n);
        for (int d = 0; d < 3; ++d) {
          du[d] = pu[d] - fm.u[d];
          dj[d] = km.j[d] - fm.j[d];
          ohm[d] = km.j[d] - (multiply(gr, km.n, pu[d]) + sigma * (km.grad_phi[d] - 0.5 * gn[d]));
        }
        r.series[0][t] = hs_norm(gr, km.rho - fm.rho, s);
        r.series[1][t] = hs_norm(gr, du, s);
        r.series[2][t] = hs_norm(gr, km.theta - fm.theta, s);
        r.series[3][t] = hs_norm(gr, km.n - fm.n, s);
        r.series[4][t] = hs_norm(gr, dj, s);
        r.series[5][t] = hs_norm(gr, km.w - fm.w, s);
        r.series[6][t] = hs_norm(gr, divergence(gr, km.u), s);
        r.series[7][t] = hs_norm(gr, km.rho + km.theta, s);
        r.series[8][t] = hs_norm(gr, ohm, s);
      }
    } catch (const std::exception& ex) {
      r.failed = true;
      r.error = ex.what();
      r.series.assign(nnorm, std::vector<double>(rep.times.size(), kNaN));
    }
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

#pragma omp parallel num_threads(cfg.threads)
#pragma omp single
  for (std::size_t e = 0; e < cfg.epsilons.size(); ++e) {
#pragma omp task firstprivate(e)
    run_one(e);
  }

  for (const auto& name : tracked_norms()) {
    std::vector<double> finals;
    for (std::size_t e = 0; e < rep.results.size(); ++e) finals.push_back(rep.final_value(e, name));
    rep.slopes[name] = fit_slope(cfg.epsilons, finals);
  }
  return rep;
}

ReportPaths default_report_paths(const std::string& out_dir) {
  const std::filesystem::path d(out_dir.empty() ? "." : out_dir);
  return {(d / "sweep.csv").string(), (d / "sweep_summary.json").string(), (d / "sweep_digest.txt").string()};
}

std::string report_csv(const SweepReport& rep) {
  std::ostringstream out;
  out << "t";
  for (const auto& r : rep.results)
    for (const auto& name : tracked_norms()) out << ",eps=" << format_double(r.epsilon) << ":" << name;
  out << "\n";
  for (std::size_t t = 0; t < rep.times.size(); ++t) {
    out << format_double(rep.times[t]);
    for (const auto& r : rep.results)
      for (std::size_t i = 0; i < tracked_norms().size(); ++i) out << "," << format_double(r.series[i][t]);
    out << "\n";
  }
  return out.str();
}

std::string report_json(const SweepReport& rep) {
  nlohmann::json j;
  j["times"] = rep.times;
  j["kinetic_config_hash"] = rep.kinetic_hash;
  j["fluid_config_hash"] = rep.fluid_hash;
  j["config"] = rep.config_echo;
  j["coefficients"] = {{"mu", rep.mu}, {"kappa", rep.kappa}, {"sigma", rep.sigma}};
  j["fluid_wall_seconds"] = rep.fluid_wall_seconds;
  j["norms"] = tracked_norms();
  nlohmann::json slopes = nlohmann::json::object();
  for (const auto& [k, v] : rep.slopes) slopes[k] = number_or_null(v);
  j["slopes"] = slopes;
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : rep.results) {
    nlohmann::json rj;
    rj["epsilon"] = r.epsilon;
    rj["failed"] = r.failed;
    rj["error"] = r.error;
    rj["wall_seconds"] = r.wall_seconds;
    nlohmann::json series = nlohmann::json::object();
    for (std::size_t i = 0; i < r.series.size(); ++i) {
      nlohmann::json vals = nlohmann::json::array();
      for (double v : r.series[i]) vals.push_back(number_or_null(v));
      series[tracked_norms()[i]] = vals;
    }
    rj["series"] = series;
    runs.push_back(rj);
  }
  j["runs"] = runs;
  return j.dump(2) + "\n";
}

SweepReport report_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& ex) {
    io_error(std::string("malformed sweep summary: ") + ex.what());
  }
  SweepReport rep;
  try {
    rep.times = j.at("times").get<std::vector<double>>();
    rep.kinetic_hash = j.at("kinetic_config_hash").get<std::string>();
    rep.fluid_hash = j.at("fluid_config_hash").get<std::string>();
    rep.config_echo = j.at("config").get<std::map<std::string, std::string>>();
    rep.mu = j.at("coefficients").at("mu").get<double>();
    rep.kappa = j.at("coefficients").at("kappa").get<double>();
    rep.sigma = j.at("coefficients").at("sigma").get<double>();
    rep.fluid_wall_seconds = j.at("fluid_wall_seconds").get<double>();
    for (const auto& [k, v] : j.at("slopes").items()) rep.slopes[k] = number_from(v);
    for (const auto& rj : j.at("runs")) {
      EpsilonResult r;
      r.epsilon = rj.at("epsilon").get<double>();
      r.failed = rj.at("failed").get<bool>();
      r.error = rj.at("error").get<std::string>();
      r.wall_seconds = rj.at("wall_seconds").get<double>();
      for (const auto& name : tracked_norms()) {
        std::vector<double> vals;
        for (const auto& v : rj.at("series").at(name)) vals.push_back(number_from(v));
        r.series.push_back(vals);
      }
      rep.results.push_back(r);
    }
  } catch (const nlohmann::json::exception& ex) {
    io_error(std::string("sweep summary is missing fields: ") + ex.what());
  }
  return rep;
}

std::string report_digest(const SweepReport& rep) {
  std::ostringstream out;
  out << "epsilon sweep: " << rep.results.size() << " runs, " << rep.times.size() << " snapshot times";
  if (!rep.times.empty()) out << ", T=" << rep.times.back();
  out << "\nlimit coefficients: mu=" << rep.mu << " kappa=" << rep.kappa << " sigma=" << rep.sigma << "\n";
  out << "config hashes: kinetic " << rep.kinetic_hash << ", fluid " << rep.fluid_hash << "\n\n";
  out << "final-time norms\n";
  out << "epsilon";
  for (const auto& name : tracked_norms()) out << "\t" << name;
  out << "\n";
  for (std::size_t e = 0; e < rep.results.size(); ++e) {
    const auto& r = rep.results[e];
    out << r.epsilon;
    if (r.failed) {
      out << "\tFAILED: " << r.error << "\n";
      continue;
    }
    for (const auto& name : tracked_norms()) out << "\t" << rep.final_value(e, name);
    out << "\n";
  }
  out << "\nlog-log slopes (largest epsilon excluded)\n";
  for (const auto& name : tracked_norms()) {
    const auto it = rep.slopes.find(name);
    out << name << "\t" << (it == rep.slopes.end() || std::isnan(it->second) ? std::string("n/a") : format_double(it->second))
        << "\n";
  }
  return out.str();
}

void emit_report(const SweepReport& rep, const ReportPaths& paths) {
  write_text(paths.csv, report_csv(rep));
  write_text(paths.json, report_json(rep));
  write_text(paths.digest, report_digest(rep));
}

bool operator==(const SweepReport& a, const SweepReport& b) {
  if (a.times != b.times || a.kinetic_hash != b.kinetic_hash || a.fluid_hash != b.fluid_hash ||
      a.config_echo != b.config_echo || a.mu != b.mu || a.kappa != b.kappa || a.sigma != b.sigma ||
      a.fluid_wall_seconds != b.fluid_wall_seconds || a.results.size() != b.results.size() ||
      a.slopes.size() != b.slopes.size())
    return false;
  for (const auto& [k, v] : a.slopes) {
    const auto it = b.slopes.find(k);
    if (it == b.slopes.end() || !same(v, it->second)) return false;
  }
  for (std::size_t e = 0; e < a.results.size(); ++e) {
    const auto &x = a.results[e], &y = b.results[e];
    if (x.epsilon != y.epsilon || x.failed != y.failed || x.error != y.error || x.wall_seconds != y.wall_seconds ||
        x.series.size() != y.series.size())
      return false;
    for (std::size_t i = 0; i < x.series.size(); ++i) {
      if (x.series[i].size() != y.series[i].size()) return false;
      for (std::size_t t = 0; t < x.series[i].size(); ++t)
        if (!same(x.series[i][t], y.series[i][t])) return false;
    }
  }
  return true;
}

}  // namespace vpb
