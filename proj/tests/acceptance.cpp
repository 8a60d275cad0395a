// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <Eigen/Eigenvalues>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <random>
#include <sstream>
#include <string>

#include "error.hpp"
#include "limit_harness.hpp"

using namespace vpb;
using cd = std::complex<double>;

namespace {

// Tolerances, fixed here and nowhere else.
constexpr double kKernelRelThreshold = 1e-7;
constexpr double kSymmetryTol = 1e-9;
constexpr double kPsdTol = -1e-9;
constexpr int kRandomQSamples = 100;
constexpr double kQMomentTol = 1e-7;
constexpr double kRelaxationSlack = 0.10;
constexpr double kCoefficientDrift = 0.05;
constexpr double kGoldenRelTol = 1e-9;
constexpr double kEnergyInitialMax = 1e-3;
constexpr double kEnergySlack = 1e-8;
constexpr double kDissipationConstant = 10.0;
constexpr double kResidualOrder = 0.9;
constexpr double kResidualFloor = 1e-12;
constexpr double kChargeTol = 1e-8;
constexpr double kOhmReduction = 0.5;
constexpr double kFluidDecayRelTol = 1e-6;
constexpr double kDivergenceTol = 1e-12;
constexpr double kPicardOrder = 1.9;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string cache_dir() { return VPB_ACCEPTANCE_CACHE; }

std::shared_ptr<const VelocityModel> model() {
  static const auto m = [] {
    ModelSettings ms;
    ms.cache_dir = cache_dir();
    return build_model(ms);
  }();
  return m;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Kernel dimension, asymmetry and smallest eigenvalue by a dense symmetric solve.
struct Structure {
  int kernel = 0;
  double asym = 0.0, min_eig = 0.0;
};

Structure structure(const Eigen::MatrixXd& L) {
  Structure s;
  s.asym = (L - L.transpose()).cwiseAbs().maxCoeff();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (L + L.transpose()), Eigen::EigenvaluesOnly);
  const Eigen::VectorXd ev = es.eigenvalues();
  const double scale = ev.cwiseAbs().maxCoeff();
  for (int i = 0; i < ev.size(); ++i)
    if (std::abs(ev(i)) <= kKernelRelThreshold * scale) ++s.kernel;
  s.min_eig = ev.minCoeff();
  return s;
}

Outcome c1_operator_structure() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& ops = *model()->ops;
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const Structure a = structure(ops.L1()), b = structure(ops.L2());
  const bool ok = a.kernel == 5 && b.kernel == 1 && a.asym <= kSymmetryTol && b.asym <= kSymmetryTol &&
                  a.min_eig >= kPsdTol && b.min_eig >= kPsdTol;
  return {ok, fmt("ker L1=%d ker L2=%d asym=%.2e/%.2e min eig=%.2e/%.2e model ready in %.1fs", a.kernel, b.kernel,
                  a.asym, b.asym, a.min_eig, b.min_eig, secs)};
}

Outcome c2_collision_conservation() {
  const auto& m = *model();
  std::mt19937 rng(2024);
  std::normal_distribution<double> nd;
  double worst = 0.0;
  for (int s = 0; s < kRandomQSamples; ++s) {
    Eigen::VectorXd f(m.basis->dim());
    for (int i = 0; i < f.size(); ++i) f(i) = nd(rng);
    const Eigen::VectorXd q = m.ops->apply_Q(f, f);
    worst = std::max(worst, std::abs(m.moments.one.dot(q)));
    worst = std::max(worst, std::abs(m.moments.v_sq.dot(q)));
    for (int d = 0; d < 3; ++d) worst = std::max(worst, std::abs(m.moments.v[d].dot(q)));
  }
  return {worst < kQMomentTol, fmt("max |<Q(f,f),psi>| = %.2e over %d samples", worst, kRandomQSamples)};
}

Outcome c3_coercivity() {
  const auto mp = model();
  const double d1 = coercivity_constant(*mp->ops, mp->proj, WhichL::L1);
  const double d2 = coercivity_constant(*mp->ops, mp->proj, WhichL::L2);
  bool ok = d1 > 0 && d2 > 0;
  std::string detail = fmt("delta(L1)=%.4f delta(L2)=%.4f", d1, d2);
  for (double eps : {1.0, 0.1}) {
    KineticConfig kc;
    kc.modes = 4;
    kc.epsilon = eps;
    kc.fields = false;
    kc.nonlinear = false;
    kc.scheme = TimeScheme::Ars222;
    KineticSolver ks(mp, kc);
    std::mt19937 rng(11);
    std::normal_distribution<double> nd;
    KineticState s = ks.zero_state();
    for (int i = 0; i < ks.dim(); ++i) s.f(i, 0) = nd(rng);
    const Eigen::MatrixXd& nu = mp->ops->nu_gram();
    auto kinetic_norm = [&](const KineticState& st) {
      const Eigen::VectorXd f = st.f.col(0).real();
      const Eigen::VectorXd h = f - mp->proj.P1 * f;
      return std::sqrt(h.dot(nu * h));
    };
    const double n0 = kinetic_norm(s);
    const double dt = 2e-3 * eps * eps;
    double t_efold = -1.0;
    for (int n = 1; n <= 1000 && t_efold < 0; ++n) {
      s = ks.step(s, dt);
      if (kinetic_norm(s) <= n0 / std::exp(1.0)) t_efold = n * dt;
    }
    const double bound = 2 * d1 / (eps * eps);
    const double rate = t_efold > 0 ? 1.0 / t_efold : 0.0;
    ok = ok && rate >= bound * (1.0 - kRelaxationSlack);
    detail += fmt("; eps=%g e-fold rate %.3g vs 2delta/eps^2 %.3g", eps, rate, bound);
  }
  return {ok, detail};
}

Outcome c4_transport() {
  const auto& tc = model()->transport;
  std::ifstream in(VPB_TEST_DATA_DIR "/transport_golden.json");
  if (!in) return {false, "golden file missing"};
  const auto g = nlohmann::json::parse(in);
  bool ok = tc.mu > 0 && tc.kappa > 0 && tc.sigma > 0 && g.contains("provenance");
  auto rel = [](double a, double b) { return std::abs(a - b) / std::abs(b); };
  const double golden4 = std::max({rel(tc.mu, g["K4"]["mu"]), rel(tc.kappa, g["K4"]["kappa"]),
                                   rel(tc.sigma, g["K4"]["sigma"])});
  // Live refinements: doubled sphere rules and doubled velocity quadrature.
  CollisionConfig fine;
  fine.linear_only = true;
  fine.sphere_degree_u = 16;
  fine.sphere_degree_sigma = 8;
  const HermiteBasis b4(4, 16);
  const CollisionOperators ops_s(b4, fine);
  const TransportCoefficients ts = compute_transport(ops_s, make_projections(b4), thirteen_moments(b4));
  CollisionConfig lin;
  lin.linear_only = true;
  const HermiteBasis b4q(4, 32);
  const CollisionOperators ops_q(b4q, lin);
  const TransportCoefficients tq = compute_transport(ops_q, make_projections(b4q), thirteen_moments(b4q));
  const HermiteBasis b6(6, 12);
  const CollisionOperators ops6(b6, lin);
  const TransportCoefficients t6 = compute_transport(ops6, make_projections(b6), thirteen_moments(b6));
  double drift = 0.0;
  for (const auto* t : {&ts, &tq, &t6})
    drift = std::max({drift, rel(t->mu, tc.mu), rel(t->kappa, tc.kappa), rel(t->sigma, tc.sigma)});
  const double golden6 = std::max(rel(t6.mu, g["K6"]["mu"]), rel(t6.kappa, g["K6"]["kappa"]));
  ok = ok && golden4 <= kGoldenRelTol && golden6 <= kGoldenRelTol && drift <= kCoefficientDrift;
  return {ok, fmt("mu=%.6f kappa=%.6f sigma=%.6f; max drift (sphere x2, quadrature x2, K=6) %.2f%%; golden K4 "
                  "rel %.1e, K6 rel %.1e",
                  tc.mu, tc.kappa, tc.sigma, 100 * drift, golden4, golden6)};
}

Outcome c5_energy() {
  bool ok = true;
  std::string detail;
  for (double eps : {1.0, 0.1}) {
    KineticConfig kc;
    kc.epsilon = eps;
    kc.init = InitMode::ChapmanEnskog;
    KineticSolver ks(model(), kc);
    ProfileSettings ps;
    ps.amplitude = 2e-3;
    ps.amplitude_phi = 2e-3;
    const KineticRun run = ks.run(ks.init_well_prepared(make_profile(ks.grid(), ps)));
    const double E0 = run.energy_trace.front().second;
    double rise = 0.0;
    for (std::size_t i = 1; i < run.energy_trace.size(); ++i)
      rise = std::max(rise, run.energy_trace[i].second - run.energy_trace[i - 1].second);
    const double C = run.dissipation_integral / E0;
    ok = ok && E0 <= kEnergyInitialMax && rise <= kEnergySlack && C < kDissipationConstant;
    detail += fmt("%seps=%g E0=%.3e max rise %.1e int D / E0 = %.3f", detail.empty() ? "" : "; ", eps, E0, rise, C);
  }
  return {ok, detail + " (chapman_enskog init)"};
}

Outcome c6_conservation() {
  KineticConfig kc;
  kc.t_final = 0.02;
  KineticSolver ks(model(), kc);
  ProfileSettings ps;
  ps.amplitude = 1e-2;
  ps.amplitude_phi = 1e-2;
  const KineticState s0 = ks.init_well_prepared(make_profile(ks.grid(), ps));
  auto last_residual = [&](double dt) {
    KineticState a = s0, b = s0;
    for (long n = 0; n < std::lround(kc.t_final / dt); ++n) {
      a = b;
      b = ks.step(a, dt);
    }
    return ks.conservation_residuals(a, b);
  };
  const ConservationResiduals r1 = last_residual(2e-3), r2 = last_residual(1e-3), r3 = last_residual(5e-4);
  bool ok = true;
  std::string detail;
  const std::pair<const char*, std::array<double, 3>> laws[] = {{"mass", {r1.mass, r2.mass, r3.mass}},
                                                               {"momentum", {r1.momentum, r2.momentum, r3.momentum}},
                                                               {"energy", {r1.energy, r2.energy, r3.energy}},
                                                               {"charge", {r1.charge, r2.charge, r3.charge}}};
  for (const auto& [name, r] : laws) {
    for (int i = 0; i < 2; ++i) {
      if (r[i + 1] <= kResidualFloor) continue;
      ok = ok && std::log2(r[i] / r[i + 1]) >= kResidualOrder;
    }
    const bool floor = r[2] <= kResidualFloor;
    detail += fmt("%s%s", detail.empty() ? "" : "; ", name) +
              (floor ? fmt(" at floor (%.1e)", r[2])
                     : fmt(" orders %.2f %.2f", std::log2(r[0] / r[1]), std::log2(r[1] / r[2])));
  }
  // Charge law over a full default run.
  KineticSolver def(model(), KineticConfig{});
  const KineticRun run = def.run(def.init_well_prepared(make_profile(def.grid(), ProfileSettings{})));
  double charge = 0.0;
  for (std::size_t i = 1; i < run.snapshots.size(); ++i) charge = std::max(charge, run.snapshots[i].residuals.charge);
  ok = ok && charge < kChargeTol;
  return {ok, detail + fmt("; default-run charge residual %.1e", charge)};
}

Outcome c7_limit() {
  SweepConfig sc;
  sc.model.cache_dir = cache_dir();
  const auto t0 = std::chrono::steady_clock::now();
  const SweepReport rep = run_sweep(model(), sc);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  bool ok = rep.results.size() == 4;
  for (const auto& r : rep.results) ok = ok && !r.failed;
  std::string detail;
  if (ok) {
    for (const auto& name : tracked_norms()) {
      bool mono = true;
      for (std::size_t e = 1; e < rep.results.size(); ++e)
        mono = mono && rep.final_value(e, name) < rep.final_value(e - 1, name);
      ok = ok && mono;
      detail += fmt("%s%s %s", detail.empty() ? "" : ", ", name.c_str(), mono ? "dec" : "NOT dec");
    }
    const double first = rep.final_value(0, "ohm"), last = rep.final_value(rep.results.size() - 1, "ohm");
    ok = ok && last <= kOhmReduction * first;
    detail += fmt("; ohm %.2e -> %.2e; %.1fs", first, last, secs);
  } else {
    detail = "sweep incomplete";
  }
  return {ok, detail};
}

Outcome c8_fluid() {
  const auto& tc = model()->transport;
  FluidConfig fc = matched_fluid_config(KineticConfig{}, tc);
  fc.dt = 1e-3;
  fc.t_final = 0.1;
  const FluidSolver fs(fc);
  const int c1 = fs.grid().index_of(1);
  FluidProfile p;
  p.theta = Field::Zero(fs.grid().n_cmodes());
  p.theta(c1) = 0.5;
  p.n = Field::Zero(fs.grid().n_cmodes());
  p.n(c1) = 0.25;
  const FluidState end = fs.run(fs.initial_state(p)).final_state;
  const double k2 = fs.grid().k2(c1), T = fc.t_final;
  const double e_theta = std::abs(end.theta(c1) - 0.5 * std::exp(-fc.kappa * k2 * T)) / (0.5 * std::exp(-fc.kappa * k2 * T));
  const double exact_n = 0.25 * std::exp(-fc.sigma * (1 + 0.5 * k2) * T);
  const double e_n = std::abs(end.n(c1) - exact_n) / exact_n;

  // Nonlinear 2D run from a random divergence-free field, checked after every step.
  FluidConfig f2 = fc;
  f2.x_dims = 2;
  f2.modes = 16;
  f2.t_final = 0.02;
  const FluidSolver fs2(f2);
  std::mt19937 rng(5);
  std::normal_distribution<double> nd;
  FluidProfile q;
  const auto& gr = fs2.grid();
  for (int d = 0; d < 2; ++d) {
    q.u[d] = Field::Zero(gr.n_cmodes());
    for (int c = 1; c < gr.n_cmodes(); ++c)
      if (gr.active(c)) q.u[d](c) = 0.05 * cd(nd(rng), nd(rng)) / (1.0 + gr.k2(c));
  }
  q.theta = q.u[0];
  FluidState s = fs2.initial_state(q);
  double div = max_divergence(gr, s.u);
  for (int n = 0; n < 20; ++n) {
    s = fs2.step_fluid(s, f2.dt);
    div = std::max(div, max_divergence(gr, s.u));
  }
  const bool ok = e_theta <= kFluidDecayRelTol && e_n <= kFluidDecayRelTol && div <= kDivergenceTol;
  return {ok, fmt("theta rel %.1e, n rel %.1e, max per-mode divergence %.1e", e_theta, e_n, div)};
}

Outcome c9_picard() {
  KineticConfig kc;
  kc.modes = 16;
  kc.epsilon = 0.5;
  KineticSolver ks(model(), kc);
  ProfileSettings ps;
  ps.amplitude = 0.05;
  ps.amplitude_phi = 0.05;
  const KineticState s0 = ks.init_well_prepared(make_profile(ks.grid(), ps));
  std::vector<double> diffs;
  for (double dt : {5e-4, 2.5e-4, 1.25e-4}) {
    const KineticState a = ks.step(s0, dt);
    const KineticState b = ks.picard_step(s0, dt, 50, 1e-14);
    diffs.push_back(std::sqrt((a.f - b.f).squaredNorm() + (a.g - b.g).squaredNorm()));
  }
  const double o1 = std::log2(diffs[0] / diffs[1]), o2 = std::log2(diffs[1] / diffs[2]);
  return {o1 >= kPicardOrder && o2 >= kPicardOrder, fmt("one-step differences %.2e %.2e %.2e, orders %.2f %.2f",
                                                         diffs[0], diffs[1], diffs[2], o1, o2)};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"C1 operator structure", c1_operator_structure},
      {"C2 collision conservation", c2_collision_conservation},
      {"C3 coercivity and relaxation rate", c3_coercivity},
      {"C4 transport coefficients", c4_transport},
      {"C5 energy monotonicity", c5_energy},
      {"C6 conservation residuals", c6_conservation},
      {"C7 hydrodynamic limit sweep", c7_limit},
      {"C8 fluid solver verification", c8_fluid},
      {"C9 Picard vs IMEX", c9_picard},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
  return failed == 0 ? 0 : 1;
}
