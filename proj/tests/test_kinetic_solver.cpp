#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdio>
#include <random>

#include "error.hpp"
#include "kinetic_solver.hpp"

using namespace vpb;
using cd = std::complex<double>;

namespace {

std::shared_ptr<const VelocityModel> model() {
  static const auto m = VelocityModel::build(4, 16, CollisionConfig{});
  return m;
}

KineticConfig small_config(double eps) {
  KineticConfig kc;
  kc.modes = 16;
  kc.epsilon = eps;
  kc.dt = 1e-3;
  kc.t_final = 0.02;
  return kc;
}

// rho0 = -theta0, theta0 = A cos x, u0 = (0, A sin x, 0), n0 = A cos x
FluidProfile cosine_profile(const SpectralGrid& gr, double A) {
  const int ncm = gr.n_cmodes(), c1 = gr.index_of(1);
  FluidProfile p;
  p.theta = Field::Zero(ncm);
  p.theta(c1) = A / 2;
  p.rho = -p.theta;
  p.u[1] = Field::Zero(ncm);
  p.u[1](c1) = cd(0, -A / 2);
  p.n = Field::Zero(ncm);
  p.n(c1) = A / 2;
  return p;
}

double nu_norm(const Eigen::VectorXd& h) { return std::sqrt(h.dot(model()->ops->nu_gram() * h)); }

Eigen::VectorXd kinetic_part_f(const KineticState& s) {
  const Eigen::VectorXd f = s.f.col(0).real();
  return f - model()->proj.P1 * f;
}

// Random homogeneous f with a kinetic part, zero g.
KineticState random_homogeneous(const KineticSolver& ks, unsigned seed, double scale) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd;
  KineticState s = ks.zero_state();
  for (int i = 0; i < ks.dim(); ++i) s.f(i, 0) = scale * nd(rng);
  return s;
}

KineticState random_state(KineticSolver& ks, unsigned seed, double scale) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd;
  KineticState s = ks.zero_state();
  const auto& gr = ks.grid();
  for (int c = 1; c < gr.n_cmodes(); ++c) {
    if (!gr.active(c) || std::abs(gr.m(c)[0]) > 3) continue;
    const double damp = scale / (1.0 + gr.k2(c));
    for (int i = 0; i < ks.dim(); ++i) {
      s.f(i, c) = damp * cd(nd(rng), nd(rng));
      s.g(i, c) = damp * cd(nd(rng), nd(rng));
    }
  }
  for (int i = 0; i < ks.dim(); ++i) s.f(i, 0) = scale * nd(rng);
  ks.solve_poisson(s);
  return s;
}

}  // namespace

TEST_CASE("well-prepared initialization") {
  KineticSolver ks(model(), small_config(0.5));
  const auto& gr = ks.grid();
  SUBCASE("zero profile gives the zero state") {
    const KineticState s = ks.init_well_prepared(FluidProfile{});
    CHECK(s.f.cwiseAbs().maxCoeff() == 0.0);
    CHECK(s.g.cwiseAbs().maxCoeff() == 0.0);
    CHECK(s.phi.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("fluid moments of f reproduce the profile") {
    const double tb = 0.3;
    FluidProfile p;
    p.theta = Field::Zero(gr.n_cmodes());
    p.theta(gr.index_of(1)) = tb / 2;
    p.rho = Field::Zero(gr.n_cmodes());
    p.rho(0) = -tb;
    const MomentFields m = ks.extract_moments(ks.init_well_prepared(p));
    CHECK((m.rho - p.rho).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((m.theta - p.theta).cwiseAbs().maxCoeff() < 1e-10);
    for (int d = 0; d < 3; ++d) CHECK(m.u[d].cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("Gauss law, Ohm current and Leray projection at t=0") {
    FluidProfile p = cosine_profile(gr, 1e-2);
    p.u[0] = Field::Zero(gr.n_cmodes());
    p.u[0](gr.index_of(2)) = 0.01;  // pure gradient, removed by the projection
    for (InitMode mode : {InitMode::Minimal, InitMode::ChapmanEnskog}) {
      KineticConfig kc = small_config(0.5);
      kc.init = mode;
      KineticSolver k2(model(), kc);
      const KineticState s = k2.init_well_prepared(p);
      CHECK(k2.gauss_residual(s) < 1e-12);
      const MomentFields m = k2.extract_moments(s);
      if (mode == InitMode::Minimal) {
        CHECK(m.u[0].cwiseAbs().maxCoeff() < 1e-14);
      } else {
        // compressive correction: div u = eps (kappa Delta theta - u . grad theta); here u . grad theta = 0
        const double kappa = model()->transport.kappa;
        const Field div = divergence(gr, m.u);
        const int c1 = gr.index_of(1);
        CHECK(std::abs(div(c1) - 0.5 * (-kappa * 0.5e-2)) < 1e-15);
        CHECK(std::abs(div(gr.index_of(2))) < 1e-15);
      }
      CHECK((m.n - p.n).cwiseAbs().maxCoeff() < 1e-14);
      // j0 = n0 u0 + sigma (grad phi0 - grad n0 / 2); with n0 = A cos x the linear part is
      // sigma (3/2) A sin x e1, i.e. mode 1 coefficient -i (3/4) sigma A.
      const double sig = model()->transport.sigma_limit;
      CHECK(std::abs(m.j[0](gr.index_of(1)) - cd(0, -0.75 * sig * 1e-2)) < 1e-12);
    }
  }
  SUBCASE("slow-manifold data carry no acoustic oscillation") {
    // Linear, field-free dynamics: the pressure rho + theta of acoustic-free data stays O(eps^2),
    // while the minimal data launch sound waves of amplitude O(eps).
    const double eps = 0.05;
    auto pressure_after = [&](InitMode mode) {
      KineticConfig kc = small_config(eps);
      kc.init = mode;
      kc.fields = false;
      kc.nonlinear = false;
      kc.scheme = TimeScheme::Ars222;
      KineticSolver k2(model(), kc);
      KineticState s = k2.init_well_prepared(cosine_profile(k2.grid(), 1e-2));
      double worst = 0.0;
      for (int n = 0; n < 40; ++n) {
        s = k2.step(s, 5e-4);
        const MomentFields m = k2.extract_moments(s);
        worst = std::max(worst, std::sqrt(k2.grid().l2_sq(m.rho + m.theta)));
      }
      return worst;
    };
    const double slow = pressure_after(InitMode::SlowManifold), minimal = pressure_after(InitMode::Minimal);
    MESSAGE("max |rho+theta|: slow manifold " << slow << ", minimal " << minimal);
    CHECK(slow < 1e-2 * minimal);
    // fluid moments move by O(eps) only
    KineticConfig kc = small_config(eps);
    kc.init = InitMode::SlowManifold;
    KineticSolver k3(model(), kc);
    const FluidProfile p = cosine_profile(k3.grid(), 1e-2);
    const MomentFields m = k3.extract_moments(k3.init_well_prepared(p));
    CHECK(std::sqrt(k3.grid().l2_sq(m.theta - p.theta)) < eps * 1e-2);
    CHECK(std::sqrt(k3.grid().l2_sq(m.n - p.n)) < eps * 1e-2);
    kc.collisions = false;
    KineticSolver k4(model(), kc);
    CHECK_THROWS_AS(k4.init_well_prepared(p), Error);
  }
  SUBCASE("non-neutral charge is rejected") {
    FluidProfile p;
    p.n = Field::Zero(gr.n_cmodes());
    p.n(0) = 0.1;
    CHECK_THROWS_AS(ks.init_well_prepared(p), Error);
  }
}

TEST_CASE("configuration validation") {
  KineticConfig kc = small_config(1.0);
  kc.epsilon = 0.0;
  CHECK_THROWS_AS(KineticSolver(model(), kc), Error);
  kc.epsilon = 1.5;
  CHECK_THROWS_AS(KineticSolver(model(), kc), Error);
  kc = small_config(1.0);
  kc.dt = -1.0;
  CHECK_THROWS_AS(KineticSolver(model(), kc), Error);
  kc = small_config(1.0);
  KineticSolver ks(model(), kc);
  CHECK_THROWS_AS(ks.step(ks.zero_state(), 0.0), Error);
}

TEST_CASE("fixed points") {
  KineticSolver ks(model(), small_config(0.1));
  SUBCASE("zero state") {
    const KineticState s = ks.step(ks.zero_state(), 1e-3);
    CHECK(s.f.cwiseAbs().maxCoeff() == 0.0);
    CHECK(s.g.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("homogeneous kernel state, linear dynamics") {
    KineticConfig kc = small_config(0.1);
    kc.nonlinear = false;
    KineticSolver lin(model(), kc);
    KineticState s = lin.zero_state();
    const auto& m = model()->moments;
    s.f.col(0) = (0.3 * m.one + 0.2 * m.v[0] - 0.1 * m.v[2] + 0.05 * m.v_sq).cast<cd>();
    KineticState out = s;
    for (int n = 0; n < 20; ++n) out = lin.step(out, 1e-3);
    CHECK((out.f - s.f).cwiseAbs().maxCoeff() < 1e-13);
    CHECK(out.g.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("homogeneous constant state with nonlinear collisions") {
    KineticState s = ks.zero_state();
    s.f(0, 0) = 0.4;
    const KineticState out = ks.step(s, 1e-3);
    CHECK((out.f - s.f).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("transport-only dynamics is skew: L2 loss comes only from implicit Euler damping") {
  KineticConfig kc = small_config(1.0);
  kc.collisions = false;
  kc.fields = false;
  kc.nonlinear = false;
  KineticSolver ks(model(), kc);
  const KineticState s0 = random_state(ks, 7, 1.0);
  auto norm2 = [&](const KineticState& s) {
    double acc = 0.0;
    for (int c = 0; c < ks.grid().n_cmodes(); ++c)
      acc += ks.grid().parseval_weight(c) * (s.f.col(c).squaredNorm() + s.g.col(c).squaredNorm());
    return acc;
  };
  auto loss = [&](double dt) {
    KineticState s = s0;
    const int steps = static_cast<int>(std::lround(0.05 / dt));
    double prev = norm2(s);
    for (int n = 0; n < steps; ++n) {
      s = ks.step(s, dt);
      const double cur = norm2(s);
      CHECK(cur <= prev * (1 + 1e-14));
      prev = cur;
    }
    return norm2(s0) - prev;
  };
  const double l1 = loss(2e-3), l2 = loss(1e-3);
  CHECK(l1 / norm2(s0) < 1e-2);
  CHECK(std::log2(l1 / l2) == doctest::Approx(1.0).epsilon(0.05));
  // per mode, the exact flow is unitary: the dense exponential keeps the amplitude to roundoff
  const auto& b = *model()->basis;
  const int c = ks.grid().index_of(2);
  const Eigen::MatrixXcd K = cd(0, 2.0) * b.mult(0).cast<cd>();
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(K);
  const Eigen::VectorXcd ev = (-0.05 * es.eigenvalues().array()).exp();
  const Eigen::VectorXcd x = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().inverse() * s0.f.col(c);
  CHECK(x.norm() == doctest::Approx(s0.f.col(c).norm()).epsilon(1e-12));
}

TEST_CASE("pure relaxation follows the exponential of L1 and decays at least at 2 delta / eps^2") {
  const double delta = coercivity_constant(*model()->ops, model()->proj, WhichL::L1);
  const Eigen::MatrixXd L1 = model()->ops->L1();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (L1 + L1.transpose()));
  for (double eps : {1.0, 0.1}) {
    KineticConfig kc = small_config(eps);
    kc.modes = 4;
    kc.fields = false;
    kc.nonlinear = false;
    kc.scheme = TimeScheme::Ars222;
    KineticSolver ks(model(), kc);
    KineticState s = random_homogeneous(ks, 11, 1.0);
    const Eigen::VectorXd h0 = kinetic_part_f(s);
    const double n0 = nu_norm(h0);
    const double rate_scale = 1.0 / (eps * eps);
    const double dt = 2e-3 / rate_scale;
    double prev = n0, t_efold = -1.0, max_rel = 0.0;
    for (int n = 1; n <= 200; ++n) {
      s = ks.step(s, dt);
      const Eigen::VectorXd h = kinetic_part_f(s);
      const double cur = nu_norm(h);
      CHECK(cur < prev);
      prev = cur;
      const Eigen::VectorXd ex =
          es.eigenvectors() * (-(n * dt * rate_scale) * es.eigenvalues().array()).exp().matrix().asDiagonal() *
          es.eigenvectors().transpose() * h0;
      max_rel = std::max(max_rel, (h - ex).norm() / h0.norm());
      if (t_efold < 0 && cur <= n0 / std::exp(1.0)) t_efold = n * dt;
    }
    REQUIRE(t_efold > 0);
    const double rate = 1.0 / t_efold;
    MESSAGE("eps=" << eps << " e-fold rate " << rate << " vs 2delta/eps^2 " << 2 * delta * rate_scale);
    CHECK(rate >= 2 * delta * rate_scale * 0.9);
    CHECK(max_rel < 1e-3);
  }
}

TEST_CASE("moment extraction") {
  const double eps = 0.25;
  KineticSolver ks(model(), small_config(eps));
  const auto& gr = ks.grid();
  SUBCASE("g = eps v1 gives a unit current") {
    KineticState s = ks.zero_state();
    s.g.col(0) = (eps * model()->moments.v[0]).cast<cd>();
    const MomentFields m = ks.extract_moments(s);
    CHECK(std::abs(m.j[0](0) - 1.0) < 1e-14);
    CHECK(m.j[0].tail(gr.n_cmodes() - 1).cwiseAbs().maxCoeff() == 0.0);
    CHECK(std::abs(m.j[1](0)) < 1e-14);
    CHECK(std::abs(m.j[2](0)) < 1e-14);
  }
  SUBCASE("kernel f and constant g carry no current") {
    KineticState s = ks.zero_state();
    s.f.col(3) = (model()->moments.one + model()->moments.v_sq).cast<cd>();
    s.g.col(3) = model()->moments.one.cast<cd>();
    const MomentFields m = ks.extract_moments(s);
    for (int d = 0; d < 3; ++d) CHECK(m.j[d].cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("random state against quadrature in v") {
    KineticSolver k2(model(), small_config(eps));
    const KineticState s = random_state(k2, 3, 1.0);
    const MomentFields m = k2.extract_moments(s);
    const auto& basis = *model()->basis;
    const auto& q = basis.grid();
    const Eigen::MatrixXd& V = basis.values_at_nodes();
    for (int c : {0, 1, 2, gr.index_of(3)}) {
      const Eigen::VectorXcd fq = V.transpose().cast<cd>() * s.f.col(c);
      const Eigen::VectorXcd gq = V.transpose().cast<cd>() * s.g.col(c);
      cd rho = 0, theta = 0, n = 0, w = 0;
      std::array<cd, 3> u{}, j{};
      for (std::size_t p = 0; p < q.size(); ++p) {
        const auto& v = q.nodes[p];
        const double wt = q.weights[p], v2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        rho += wt * fq(p) / 2.0;
        theta += wt * fq(p) / 2.0 * (v2 / 3 - 1);
        n += wt * gq(p);
        w += wt * gq(p) * (v2 / 3 - 1) / eps;
        for (int d = 0; d < 3; ++d) {
          u[d] += wt * fq(p) / 2.0 * v[d];
          j[d] += wt * gq(p) * v[d] / eps;
        }
      }
      CHECK(std::abs(m.rho(c) - rho) < 1e-10);
      CHECK(std::abs(m.theta(c) - theta) < 1e-10);
      CHECK(std::abs(m.n(c) - n) < 1e-10);
      CHECK(std::abs(m.w(c) - w) < 1e-10);
      for (int d = 0; d < 3; ++d) {
        CHECK(std::abs(m.u[d](c) - u[d]) < 1e-10);
        CHECK(std::abs(m.j[d](c) - j[d]) < 1e-10);
      }
    }
  }
}

TEST_CASE("energy functionals") {
  KineticSolver ks(model(), small_config(0.5));
  const auto& gr = ks.grid();
  SUBCASE("zero state") {
    const EnergyPair e = ks.energy_functionals(ks.zero_state(), 2);
    CHECK(e.E == 0.0);
    CHECK(e.D == 0.0);
  }
  SUBCASE("pure fluid state: only the fluid-gradient dissipation remains") {
    KineticState s = ks.zero_state();
    const auto& m = model()->moments;
    const int c = gr.index_of(2);
    s.f.col(c) = (cd(0.1, 0.2) * m.one + cd(0.0, 0.3) * m.v[1] + cd(0.05, 0) * m.v_sq).cast<cd>();
    s.g.col(c) = (cd(0.2, -0.1) * m.one).cast<cd>();
    ks.solve_poisson(s);
    for (int N : {1, 2, 3}) {
      const EnergyPair e = ks.energy_functionals(s, N);
      // fluid term: sum_{a<=N-1} k^{2a} k^2 (|f|^2 + |g|^2) over the pair of conjugate modes
      double w = 0.0;
      for (int a = 0; a <= N - 1; ++a) w += std::pow(4.0, a);
      const double oracle = 2.0 * gr.volume() * w * 4.0 * (s.f.col(c).squaredNorm() + s.g.col(c).squaredNorm());
      CHECK(e.D == doctest::Approx(oracle).epsilon(1e-12));
      double we = 0.0;
      for (int a = 0; a <= N; ++a) we += std::pow(4.0, a);
      const double eo = 2.0 * gr.volume() * we *
                        (s.f.col(c).squaredNorm() + s.g.col(c).squaredNorm() + 4.0 * std::norm(s.phi(c)));
      CHECK(e.E == doctest::Approx(eo).epsilon(1e-12));
    }
  }
  SUBCASE("nonnegative on random states, invalid orders rejected") {
    const KineticState s = random_state(ks, 5, 1.0);
    for (int N = 1; N <= 4; ++N) {
      const EnergyPair e = ks.energy_functionals(s, N);
      CHECK(e.E > 0.0);
      CHECK(e.D > 0.0);
    }
    CHECK_THROWS_AS(ks.energy_functionals(s, 0), Error);
    CHECK_THROWS_AS(ks.energy_functionals(s, 5), Error);
  }
}

TEST_CASE("conservation residuals") {
  SUBCASE("kernel steady state") {
    KineticConfig kc = small_config(0.5);
    kc.nonlinear = false;
    KineticSolver ks(model(), kc);
    KineticState s = ks.zero_state();
    s.f.col(0) = (0.2 * model()->moments.one + 0.1 * model()->moments.v_sq).cast<cd>();
    const KineticState b = ks.step(s, 1e-3);
    const ConservationResiduals r = ks.conservation_residuals(s, b);
    CHECK(r.mass < 1e-10);
    CHECK(r.momentum < 1e-10);
    CHECK(r.energy < 1e-10);
    CHECK(r.charge < 1e-10);
    CHECK_THROWS_AS(ks.conservation_residuals(std::vector<KineticState>{s}), Error);
  }
  SUBCASE("first-order convergence under dt-halving, charge law at roundoff for every eps") {
    std::vector<double> charge;
    for (double eps : {1.0, 0.5, 0.1}) {
      KineticConfig kc = small_config(eps);
      KineticSolver ks(model(), kc);
      const KineticState s0 = ks.init_well_prepared(cosine_profile(ks.grid(), 1e-2));
      auto final_residual = [&](double dt) {
        KineticState a = s0;
        KineticState b = a;
        for (int n = 0; n < static_cast<int>(std::lround(0.02 / dt)); ++n) {
          a = b;
          b = ks.step(a, dt);
        }
        return ks.conservation_residuals(a, b);
      };
      const ConservationResiduals r1 = final_residual(2e-3), r2 = final_residual(1e-3);
      for (auto [x1, x2] : {std::pair{r1.momentum, r2.momentum}, std::pair{r1.energy, r2.energy}}) {
        if (x2 > 1e-12) CHECK(std::log2(x1 / x2) >= 0.9);
      }
      CHECK(r2.mass < 1e-12);
      CHECK(r2.charge < 1e-12);
      charge.push_back(r2.charge);
    }
    for (double c : charge) CHECK(c < 1e-12);
  }
}

TEST_CASE("Picard step") {
  KineticConfig kc = small_config(0.5);
  KineticSolver ks(model(), kc);
  SUBCASE("zero state converges in one iteration") {
    int iters = 0;
    const KineticState s = ks.picard_step(ks.zero_state(), 1e-3, 5, 1e-13, &iters);
    CHECK(iters == 1);
    CHECK(s.f.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("agrees with the IMEX step to second order in one step") {
    const KineticState s0 = ks.init_well_prepared(cosine_profile(ks.grid(), 0.05));
    std::vector<double> diffs;
    for (double dt : {5e-4, 2.5e-4, 1.25e-4}) {
      const KineticState a = ks.step(s0, dt);
      const KineticState b = ks.picard_step(s0, dt, 50, 1e-14);
      diffs.push_back(std::sqrt((a.f - b.f).squaredNorm() + (a.g - b.g).squaredNorm()));
    }
    MESSAGE("one-step Picard/IMEX differences " << diffs[0] << " " << diffs[1] << " " << diffs[2]);
    CHECK(std::log2(diffs[0] / diffs[1]) >= 1.9);
    CHECK(std::log2(diffs[1] / diffs[2]) >= 1.9);
  }
  SUBCASE("non-convergence is reported") {
    const KineticState s0 = ks.init_well_prepared(cosine_profile(ks.grid(), 0.05));
    CHECK_THROWS_AS(ks.picard_step(s0, 1e-3, 1, 1e-30), Error);
  }
  SUBCASE("iterates stay bounded by twice the initial energy on small data") {
    kc.picard = true;
    kc.t_final = 0.01;
    KineticSolver kp(model(), kc);
    const KineticState s0 = kp.init_well_prepared(cosine_profile(kp.grid(), 1e-2));
    const KineticRun run = kp.run(s0);
    for (const auto& [t, E] : run.energy_trace) CHECK(E <= 2.0 * run.energy_trace.front().second);
    CHECK(run.snapshots.back().picard_iters >= 1);
  }
}

TEST_CASE("uniform stability in eps and Gauss law after every step") {
  for (double eps : {1.0, 0.1, 0.01}) {
    KineticConfig kc = small_config(eps);
    kc.dt = 1e-2;
    kc.t_final = 0.2;
    kc.snapshot_every = 1;
    KineticSolver ks(model(), kc);
    const KineticState s0 = ks.init_well_prepared(cosine_profile(ks.grid(), 1e-2));
    const KineticRun run = ks.run(s0);
    CHECK(run.steps == 20);
    const double E0 = run.energy_trace.front().second;
    for (const auto& [t, E] : run.energy_trace) CHECK(E <= 1.5 * E0);
    for (const auto& sn : run.snapshots) {
      CHECK(sn.gauss < 1e-9);
      CHECK(sn.E >= 0.0);
      CHECK(sn.D >= 0.0);
    }
    CHECK(std::abs(run.final_state.g(0, 0)) < 1e-15);
  }
}

TEST_CASE("blow-up guard") {
  KineticConfig kc = small_config(1.0);
  kc.blowup_factor = 1.0 + 1e-12;
  kc.collisions = false;
  kc.nonlinear = true;
  KineticSolver ks(model(), kc);
  KineticState s = random_state(ks, 9, 5.0);
  CHECK_THROWS_AS(
      {
        for (int n = 0; n < 50; ++n) s = ks.step(s, 0.05);
      },
      Error);
}

TEST_CASE("spectral accuracy: halving the mode count leaves band-limited moments unchanged") {
  KineticConfig a = small_config(0.5), b = a;
  a.modes = 32;
  b.modes = 16;
  KineticSolver ka(model(), a), kb(model(), b);
  KineticState sa = ka.init_well_prepared(cosine_profile(ka.grid(), 1e-2));
  KineticState sb = kb.init_well_prepared(cosine_profile(kb.grid(), 1e-2));
  for (int n = 0; n < 10; ++n) {
    sa = ka.step(sa, 1e-3);
    sb = kb.step(sb, 1e-3);
  }
  const MomentFields ma = ka.extract_moments(sa), mb = kb.extract_moments(sb);
  for (int m = 0; m <= 3; ++m) {
    const int ca = ka.grid().index_of(m), cb = kb.grid().index_of(m);
    CHECK(std::abs(ma.theta(ca) - mb.theta(cb)) < 1e-12);
    CHECK(std::abs(ma.n(ca) - mb.n(cb)) < 1e-12);
    CHECK(std::abs(ma.u[1](ca) - mb.u[1](cb)) < 1e-12);
  }
}

TEST_CASE("two-dimensional torus and the second-order scheme") {
  KineticConfig kc = small_config(0.5);
  kc.x_dims = 2;
  kc.modes = 8;
  kc.scheme = TimeScheme::Ars222;
  KineticSolver ks(model(), kc);
  const auto& gr = ks.grid();
  FluidProfile p;
  p.n = Field::Zero(gr.n_cmodes());
  p.n(gr.index_of(1, 1)) = 5e-3;
  p.u[0] = Field::Zero(gr.n_cmodes());
  p.u[0](gr.index_of(0, 1)) = 5e-3;
  const KineticState s0 = ks.init_well_prepared(p);
  auto final_at = [&](double dt) {
    KineticState s = s0;
    for (int n = 0; n < static_cast<int>(std::lround(0.04 / dt)); ++n) s = ks.step(s, dt);
    return s;
  };
  const KineticState r1 = final_at(4e-3), r2 = final_at(2e-3), r3 = final_at(1e-3);
  const double e12 = (r1.f - r2.f).norm() + (r1.g - r2.g).norm();
  const double e23 = (r2.f - r3.f).norm() + (r2.g - r3.g).norm();
  CHECK(std::log2(e12 / e23) >= 1.8);
  CHECK(ks.gauss_residual(r3) < 1e-12);
}

TEST_CASE("checkpoint round trip") {
  KineticSolver ks(model(), small_config(0.5));
  KineticState s = random_state(ks, 13, 1.0);
  s.t = 0.125;
  const std::string path = "kinetic_checkpoint_test.bin";
  ks.save_checkpoint(s, path);
  const KineticState r = ks.load_checkpoint(path);
  CHECK(r.t == s.t);
  CHECK(r.epsilon == s.epsilon);
  CHECK(r.f == s.f);
  CHECK(r.g == s.g);
  CHECK(r.phi == s.phi);
  KineticConfig other = small_config(0.5);
  other.modes = 32;
  KineticSolver k2(model(), other);
  CHECK_THROWS_AS(k2.load_checkpoint(path), Error);
  CHECK_THROWS_AS(ks.load_checkpoint("does_not_exist.bin"), Error);
  std::remove(path.c_str());
}
