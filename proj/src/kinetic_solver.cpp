#include "kinetic_solver.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "binary_io.hpp"
#include "error.hpp"

namespace vpb {

namespace {

constexpr char kStateMagic[4] = {'V', 'P', 'B', 'S'};
constexpr std::uint32_t kStateVersion = 1;
const std::complex<double> I1(0.0, 1.0);

Eigen::MatrixXd kernel_exact(const Eigen::MatrixXd& L, const Eigen::MatrixXd& P) {
  const Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(L.rows(), L.cols()) - P;
  return Q * (0.5 * (L + L.transpose())) * Q;
}

}  // namespace

KineticSolver::KineticSolver(std::shared_ptr<const VelocityModel> model, const KineticConfig& config)
    : model_(std::move(model)), cfg_(config) {
  if (!model_) usage_error("kinetic solver needs a velocity model");
  if (!(cfg_.epsilon > 0.0) || cfg_.epsilon > 1.0) usage_error("epsilon must lie in (0, 1]");
  if (!(cfg_.dt > 0.0)) usage_error("dt must be positive");
  if (cfg_.t_final < 0.0) usage_error("t_final must be non-negative");
  if (cfg_.snapshot_every < 1) usage_error("snapshot_every must be >= 1");
  if (cfg_.nonlinear && cfg_.collisions && !model_->ops->has_tensor())
    usage_error("nonlinear collisions need the full collision tensor");
  grid_ = std::make_unique<SpectralGrid>(cfg_.x_dims, cfg_.modes, cfg_.length);
  const HermiteBasis& b = *model_->basis;
  dim_ = b.dim();
  L1_ = kernel_exact(model_->ops->L1(), model_->proj.P1);
  L2_ = kernel_exact(model_->ops->L2(), model_->proj.P2);
  for (int d = 0; d < 3; ++d) raise_[d] = b.mult(d) - b.deriv(d);
  for (int c = 0; c < grid_->n_cmodes(); ++c)
    if (grid_->active(c)) active_modes_.push_back(c);

  const MomentVectors& m = model_->moments;
  one_row_ = m.one.transpose();
  theta_row_ = m.theta_test.transpose();
  for (int d = 0; d < 3; ++d) {
    v_row_[d] = m.v[d].transpose();
    vvsq_row_[d] = m.v_vsq[d].transpose();
    std::array<int, 3> e{0, 0, 0};
    e[d] = 1;
    v_index_[d] = b.index_of(e);
    for (int i = 0; i < 3; ++i) {
      std::array<int, 3> p{0, 0, 0};
      p[d] += 1;
      p[i] += 1;
      vv_row_[d][i] = b.monomial(p).transpose();
    }
  }
  const int K = b.degree_cutoff();
  for (int j = 0; j <= K; ++j) {
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(dim_, dim_), Sn = S;
    for (int b0 = 0; b0 <= j; ++b0)
      for (int b1 = 0; b0 + b1 <= j; ++b1) {
        const int b2 = j - b0 - b1;
        Eigen::MatrixXd Db = Eigen::MatrixXd::Identity(dim_, dim_);
        for (int r = 0; r < b0; ++r) Db = b.deriv(0) * Db;
        for (int r = 0; r < b1; ++r) Db = b.deriv(1) * Db;
        for (int r = 0; r < b2; ++r) Db = b.deriv(2) * Db;
        S += Db.transpose() * Db;
        Sn += Db.transpose() * model_->ops->nu_gram() * Db;
      }
    S_.push_back(S);
    Snu_.push_back(Sn);
  }
}

KineticState KineticSolver::zero_state() const {
  KineticState s;
  s.epsilon = cfg_.epsilon;
  s.f = Eigen::MatrixXcd::Zero(dim_, grid_->n_cmodes());
  s.g = s.f;
  s.phi = Field::Zero(grid_->n_cmodes());
  return s;
}

void KineticSolver::solve_poisson(KineticState& s) const {
  if (!cfg_.fields) {
    s.phi = Field::Zero(grid_->n_cmodes());
    return;
  }
  s.phi = vpb::solve_poisson(*grid_, s.g.row(0).transpose());
}

KineticState KineticSolver::init_well_prepared(const FluidProfile& p) const {
  const SpectralGrid& gr = *grid_;
  const int ncm = gr.n_cmodes();
  auto sized = [&](const Field& x) { return x.size() == 0 ? Field(Field::Zero(ncm)) : x; };
  Field rho = sized(p.rho), theta = sized(p.theta), n = sized(p.n);
  std::array<Field, 3> u;
  for (int d = 0; d < 3; ++d) u[d] = sized(p.u[d]);
  for (const Field* x : {&rho, &theta, &n, &u[0], &u[1], &u[2]})
    if (x->size() != ncm) usage_error("profile field size does not match the grid");
  if (std::abs(n(0)) > 1e-12) usage_error("initial charge n0 must have zero mean (global neutrality)");
  // Leray projection of u0
  for (int c = 1; c < ncm; ++c) {
    const double k2 = gr.k2(c);
    std::complex<double> kd = 0.0;
    for (int d = 0; d < 3; ++d) kd += gr.k(c)[d] * u[d](c);
    for (int d = 0; d < 3; ++d) u[d](c) -= gr.k(c)[d] * kd / k2;
  }
  for (Field* x : {&rho, &theta, &n, &u[0], &u[1], &u[2]}) gr.dealias(*x);
  const double eps = cfg_.epsilon;
  const MomentVectors& m = model_->moments;
  const TransportCoefficients& tc = model_->transport;
  const Field phi = cfg_.fields ? vpb::solve_poisson(gr, n) : Field(Field::Zero(ncm));
  const auto gphi = gradient(gr, phi);
  const auto gn = gradient(gr, n);
  const auto gu0 = gradient(gr, u[0]), gu1 = gradient(gr, u[1]), gu2 = gradient(gr, u[2]);
  const std::array<std::array<Field, 3>, 3> grad_u{gu0, gu1, gu2};  // grad_u[j][i] = d_i u_j
  const auto gtheta = gradient(gr, theta);
  const Field w0 = multiply(gr, n, theta);
  // First-order slow-manifold velocity: div u = -eps d_t rho = eps (kappa Delta theta - u . grad theta)
  std::array<Field, 3> grad_q;
  for (auto& x : grad_q) x = Field::Zero(ncm);
  if (cfg_.init != InitMode::Minimal) {
    Field rhs = Field::Zero(ncm);
    for (int d = 0; d < gr.x_dims(); ++d) rhs -= multiply(gr, u[d], gtheta[d]);
    for (int c = 0; c < ncm; ++c) rhs(c) -= tc.kappa * gr.k2(c) * theta(c);
    grad_q = gradient(gr, vpb::solve_poisson(gr, rhs));
  }

  KineticState s = zero_state();
  for (int c = 0; c < ncm; ++c) {
    Eigen::VectorXcd f = 2.0 * (rho(c) * m.one + theta(c) * m.psi).cast<std::complex<double>>();
    for (int d = 0; d < 3; ++d) f += 2.0 * (u[d](c) + eps * grad_q[d](c)) * m.v[d].cast<std::complex<double>>();
    Eigen::VectorXcd g = n(c) * m.one.cast<std::complex<double>>() + eps * w0(c) * m.psi.cast<std::complex<double>>();
    if (cfg_.init == InitMode::Minimal) {
      // j0 from Ohm's law with the conductivity the kinetic system relaxes to
      for (int d = 0; d < 3; ++d) {
        const std::complex<double> j0 = tc.sigma_limit * (gphi[d](c) - 0.5 * gn[d](c));
        g += eps * j0 * m.v[d].cast<std::complex<double>>();
      }
    } else {
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) f -= 2.0 * eps * grad_u[j][i](c) * tc.A_hat[i][j].cast<std::complex<double>>();
        f -= 2.0 * eps * gtheta[i](c) * tc.B_hat[i].cast<std::complex<double>>();
        g += eps * (2.0 * gphi[i](c) - gn[i](c)) * tc.Phi_hat[i].cast<std::complex<double>>();
      }
    }
    s.f.col(c) = f;
    s.g.col(c) = g;
  }
  // add the nonlinear part of j0 = n u0 + ... for the minimal choice
  if (cfg_.init == InitMode::Minimal) {
    for (int d = 0; d < 3; ++d) {
      const Field nu = multiply(gr, n, u[d]);
      for (int c = 0; c < ncm; ++c) s.g.col(c) += eps * nu(c) * m.v[d].cast<std::complex<double>>();
    }
  }
  if (cfg_.init == InitMode::SlowManifold) project_slow(s);
  gr.dealias_rows(s.f);
  gr.dealias_rows(s.g);
  gr.enforce_reality_rows(s.f);
  gr.enforce_reality_rows(s.g);
  solve_poisson(s);
  return s;
}

void KineticSolver::project_slow(KineticState& s) const {
  if (!cfg_.collisions) usage_error("the slow-manifold initialization needs collisions enabled");
  // Keep the eigen-directions continuing the collision kernel, minus the two acoustic
  // ones (largest imaginary parts) when k != 0.
  auto project = [](const Eigen::MatrixXcd& A, Eigen::Ref<Eigen::VectorXcd> x, int keep, int drop_oscillatory) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(A);
    if (es.info() != Eigen::Success) numerical_error("eigen-decomposition failed in slow-manifold projection");
    const Eigen::VectorXcd lam = es.eigenvalues();
    std::vector<int> idx(lam.size());
    for (int i = 0; i < lam.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return std::abs(lam(a)) < std::abs(lam(b)); });
    idx.resize(keep);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return std::abs(lam(a).imag()) < std::abs(lam(b).imag()); });
    idx.resize(keep - drop_oscillatory);
    const Eigen::VectorXcd coef = es.eigenvectors().partialPivLu().solve(Eigen::VectorXcd(x));
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(x.size());
    for (int i : idx) out += coef(i) * es.eigenvectors().col(i);
    x = out;
  };
  for (int c : active_modes_) {
    const bool zero = grid_->k2(c) == 0.0;
    project(operator_f(c), s.f.col(c), 5, zero ? 0 : 2);
    project(operator_g(c), s.g.col(c), 1, 0);
  }
}

Eigen::MatrixXcd KineticSolver::operator_f(int c) const {
  const HermiteBasis& b = *model_->basis;
  const double eps = cfg_.epsilon;
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(dim_, dim_);
  for (int d = 0; d < grid_->x_dims(); ++d) A += (I1 * grid_->k(c)[d] / eps) * b.mult(d).cast<std::complex<double>>();
  if (cfg_.collisions) A += (L1_ / (eps * eps)).cast<std::complex<double>>();
  return A;
}

Eigen::MatrixXcd KineticSolver::operator_g(int c) const {
  const HermiteBasis& b = *model_->basis;
  const double eps = cfg_.epsilon;
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(dim_, dim_);
  for (int d = 0; d < grid_->x_dims(); ++d) A += (I1 * grid_->k(c)[d] / eps) * b.mult(d).cast<std::complex<double>>();
  if (cfg_.collisions) A += (L2_ / (eps * eps)).cast<std::complex<double>>();
  const double k2 = grid_->k2(c);
  if (cfg_.fields && k2 > 0.0)
    for (int d = 0; d < grid_->x_dims(); ++d) A(v_index_[d], 0) += 2.0 * I1 * grid_->k(c)[d] / (eps * k2);
  return A;
}

const KineticSolver::Factorizations& KineticSolver::factors(double scaled_dt) {
  auto it = fac_cache_.find(scaled_dt);
  if (it != fac_cache_.end()) return it->second;
  if (fac_cache_.size() > 8) fac_cache_.clear();
  Factorizations fac;
  const int ncm = grid_->n_cmodes();
  fac.f.resize(ncm);
  fac.g.resize(ncm);
  const Eigen::MatrixXcd Id = Eigen::MatrixXcd::Identity(dim_, dim_);
  const int na = static_cast<int>(active_modes_.size());
  bool ok = true;
#pragma omp parallel for schedule(static) reduction(&& : ok)
  for (int a = 0; a < na; ++a) {
    const int c = active_modes_[a];
    fac.f[c].compute(Id + scaled_dt * operator_f(c));
    fac.g[c].compute(Id + scaled_dt * operator_g(c));
    const double rf = fac.f[c].rcond(), rg = fac.g[c].rcond();
    ok = ok && std::isfinite(rf) && std::isfinite(rg) && rf > 1e-14 && rg > 1e-14;
  }
  if (!ok) numerical_error("implicit block factorization failed (singular or ill-conditioned)");
  return fac_cache_.emplace(scaled_dt, std::move(fac)).first->second;
}

void KineticSolver::implicit_solve(const Factorizations& fac, Eigen::MatrixXcd& f, Eigen::MatrixXcd& g) const {
  const int na = static_cast<int>(active_modes_.size());
#pragma omp parallel for schedule(static)
  for (int a = 0; a < na; ++a) {
    const int c = active_modes_[a];
    f.col(c) = fac.f[c].solve(f.col(c));
    g.col(c) = fac.g[c].solve(g.col(c));
  }
  grid_->dealias_rows(f);
  grid_->dealias_rows(g);
  grid_->enforce_reality_rows(f);
  grid_->enforce_reality_rows(g);
}

std::pair<Eigen::MatrixXcd, Eigen::MatrixXcd> KineticSolver::apply_stiff(const Eigen::MatrixXcd& f,
                                                                         const Eigen::MatrixXcd& g) const {
  Eigen::MatrixXcd af = Eigen::MatrixXcd::Zero(f.rows(), f.cols()), ag = af;
  const int na = static_cast<int>(active_modes_.size());
#pragma omp parallel for schedule(static)
  for (int a = 0; a < na; ++a) {
    const int c = active_modes_[a];
    af.col(c) = operator_f(c) * f.col(c);
    ag.col(c) = operator_g(c) * g.col(c);
  }
  return {af, ag};
}

std::pair<Eigen::MatrixXcd, Eigen::MatrixXcd> KineticSolver::explicit_terms(const KineticState& s) const {
  const int ncm = grid_->n_cmodes();
  Eigen::MatrixXcd nf = Eigen::MatrixXcd::Zero(dim_, ncm), ng = nf;
  const bool coll = cfg_.nonlinear && cfg_.collisions;
  const bool force = cfg_.nonlinear && cfg_.fields;
  if (!coll && !force) return {nf, ng};
  const SpectralGrid& gr = *grid_;
  const Eigen::MatrixXd F = gr.backward_rows(s.f);
  const Eigen::MatrixXd G = gr.backward_rows(s.g);
  Eigen::MatrixXd NF = Eigen::MatrixXd::Zero(dim_, gr.n_points()), NG = NF;
  if (coll) {
    const CollisionOperators& ops = *model_->ops;
    const double ie = 1.0 / cfg_.epsilon;
    const Eigen::MatrixXd Bff = ops.apply_B_columns(F, F);
    const Eigen::MatrixXd Bgf = ops.apply_B_columns(G, F);
    if (cfg_.collision_form == CollisionForm::Symmetrized) {
      NF += (2.0 * ie) * Bff;
      NG += ie * (Bgf + ops.apply_B_columns(F, G));
    } else {
      NF += ie * Bff;
      NG += ie * Bgf;
    }
  }
  if (force) {
    const auto E = gradient(gr, s.phi);
    for (int d = 0; d < gr.x_dims(); ++d) {
      const Eigen::VectorXd Ed = gr.backward(E[d]);
      NF += (raise_[d] * G) * Ed.asDiagonal();
      NG += (raise_[d] * F) * Ed.asDiagonal();
    }
  }
  nf = gr.forward_rows(NF);
  ng = gr.forward_rows(NG);
  gr.dealias_rows(nf);
  gr.dealias_rows(ng);
  gr.enforce_reality_rows(nf);
  gr.enforce_reality_rows(ng);
  return {nf, ng};
}

double KineticSolver::state_norm(const KineticState& s) const {
  return std::sqrt(s.f.squaredNorm() + s.g.squaredNorm());
}

void KineticSolver::check_blowup(const KineticState& before, const KineticState& after) const {
  const double a = state_norm(before), b = state_norm(after);
  if (!std::isfinite(b) || (b > cfg_.blowup_factor * a && b > 1e-300)) {
    std::ostringstream msg;
    msg << "blow-up detected at t=" << after.t << ": state norm grew from " << a << " to " << b << " in one step";
    numerical_error(msg.str());
  }
}

KineticState KineticSolver::step_imex_euler(const KineticState& s, double dt) {
  if (!(dt > 0.0)) usage_error("dt must be positive");
  const auto& fac = factors(dt);
  auto [nf, ng] = explicit_terms(s);
  KineticState out = s;
  out.f = s.f + dt * nf;
  out.g = s.g + dt * ng;
  implicit_solve(fac, out.f, out.g);
  out.t = s.t + dt;
  solve_poisson(out);
  check_blowup(s, out);
  return out;
}

KineticState KineticSolver::step_ars222(const KineticState& s, double dt) {
  if (!(dt > 0.0)) usage_error("dt must be positive");
  const double gamma = 1.0 - 1.0 / std::sqrt(2.0);
  const double delta = 1.0 - 1.0 / (2.0 * gamma);
  const auto& fac = factors(gamma * dt);
  auto [n1f, n1g] = explicit_terms(s);
  KineticState y2 = s;
  y2.f = s.f + gamma * dt * n1f;
  y2.g = s.g + gamma * dt * n1g;
  implicit_solve(fac, y2.f, y2.g);
  solve_poisson(y2);
  auto [n2f, n2g] = explicit_terms(y2);
  auto [a2f, a2g] = apply_stiff(y2.f, y2.g);
  KineticState out = s;
  out.f = s.f - (1.0 - gamma) * dt * a2f + dt * (delta * n1f + (1.0 - delta) * n2f);
  out.g = s.g - (1.0 - gamma) * dt * a2g + dt * (delta * n1g + (1.0 - delta) * n2g);
  implicit_solve(fac, out.f, out.g);
  out.t = s.t + dt;
  solve_poisson(out);
  check_blowup(s, out);
  return out;
}

KineticState KineticSolver::picard_step(const KineticState& s, double dt, int max_iters, double tol, int* iters) {
  if (!(dt > 0.0)) usage_error("dt must be positive");
  if (max_iters < 1) usage_error("picard max_iters must be >= 1");
  const auto& fac = factors(dt);
  KineticState cur = s;
  for (int it = 1; it <= max_iters; ++it) {
    auto [nf, ng] = explicit_terms(cur);
    KineticState next = s;
    next.f = s.f + dt * nf;
    next.g = s.g + dt * ng;
    implicit_solve(fac, next.f, next.g);
    next.t = s.t + dt;
    solve_poisson(next);
    const double diff = std::max((next.f - cur.f).cwiseAbs().maxCoeff(), (next.g - cur.g).cwiseAbs().maxCoeff());
    const double scale = std::max(1.0, std::max(next.f.cwiseAbs().maxCoeff(), next.g.cwiseAbs().maxCoeff()));
    cur = std::move(next);
    if (!std::isfinite(diff)) break;
    if (diff <= tol * scale) {
      if (iters) *iters = it;
      check_blowup(s, cur);
      return cur;
    }
  }
  std::ostringstream msg;
  msg << "Picard iteration did not converge in " << max_iters << " iterations at t=" << s.t;
  numerical_error(msg.str());
}

KineticState KineticSolver::step(const KineticState& s, double dt) {
  if (cfg_.picard) return picard_step(s, dt, cfg_.picard_max_iters, cfg_.picard_tol);
  return cfg_.scheme == TimeScheme::Ars222 ? step_ars222(s, dt) : step_imex_euler(s, dt);
}

MomentFields KineticSolver::extract_moments(const KineticState& s) const {
  const int ncm = grid_->n_cmodes();
  MomentFields m = MomentFields::zeros(ncm);
  const double ie = 1.0 / s.epsilon;
  for (int c = 0; c < ncm; ++c) {
    const auto fc = s.f.col(c);
    const auto gc = s.g.col(c);
    m.rho(c) = 0.5 * (one_row_.cast<std::complex<double>>() * fc)(0);
    m.theta(c) = 0.5 * (theta_row_.cast<std::complex<double>>() * fc)(0);
    m.n(c) = (one_row_.cast<std::complex<double>>() * gc)(0);
    m.w(c) = ie * (theta_row_.cast<std::complex<double>>() * gc)(0);
    for (int d = 0; d < 3; ++d) {
      m.u[d](c) = 0.5 * (v_row_[d].cast<std::complex<double>>() * fc)(0);
      m.j[d](c) = ie * (v_row_[d].cast<std::complex<double>>() * gc)(0);
    }
  }
  m.phi = s.phi;
  m.grad_phi = gradient(*grid_, s.phi);
  return m;
}

EnergyPair KineticSolver::energy_functionals(const KineticState& s, int N) const {
  const int K = model_->basis->degree_cutoff();
  if (N < 1 || N > K) {
    std::ostringstream msg;
    msg << "N_diag=" << N << " is outside [1, K=" << K << "]: v-derivatives of that order are not representable";
    usage_error(msg.str());
  }
  const SpectralGrid& gr = *grid_;
  const Eigen::MatrixXcd P1 = model_->proj.P1.cast<std::complex<double>>();
  const Eigen::MatrixXcd P2 = model_->proj.P2.cast<std::complex<double>>();
  double E = 0.0, Dk = 0.0, Df = 0.0;
  for (int c = 0; c < gr.n_cmodes(); ++c) {
    const double pw = gr.parseval_weight(c);
    const Eigen::VectorXcd pf = P1 * s.f.col(c), pg = P2 * s.g.col(c);
    const Eigen::VectorXcd hf = s.f.col(c) - pf, hg = s.g.col(c) - pg;
    std::vector<double> W(N + 1);
    for (int a = 0; a <= N; ++a) W[a] = gr.derivative_weight(c, a);
    const double g2 = s.f.col(c).squaredNorm() + s.g.col(c).squaredNorm();
    const double phi2 = gr.k2(c) * std::norm(s.phi(c));
    const double p2 = pf.squaredNorm() + pg.squaredNorm();
    std::vector<double> hs(N + 1), hn(N + 1);
    for (int b = 0; b <= N; ++b) {
      hs[b] = (hf.dot(S_[b].cast<std::complex<double>>() * hf)).real() + (hg.dot(S_[b].cast<std::complex<double>>() * hg)).real();
      hn[b] = (hf.dot(Snu_[b].cast<std::complex<double>>() * hf)).real() + (hg.dot(Snu_[b].cast<std::complex<double>>() * hg)).real();
    }
    double e = 0.0, dk = 0.0, df = 0.0;
    for (int a = 0; a <= N; ++a) {
      e += W[a] * (g2 + phi2);
      for (int b = 0; a + b <= N; ++b) {
        e += W[a] * hs[b];
        dk += W[a] * hn[b];
      }
      if (a <= N - 1) df += W[a] * gr.k2(c) * p2;
    }
    E += pw * e;
    Dk += pw * dk;
    Df += pw * df;
  }
  const double vol = gr.volume();
  return {E * vol, (Dk / (s.epsilon * s.epsilon) + Df) * vol};
}

ConservationResiduals KineticSolver::conservation_residuals(const KineticState& a, const KineticState& b) const {
  const SpectralGrid& gr = *grid_;
  const double dt = b.t - a.t;
  if (!(dt > 0.0)) usage_error("conservation residuals need increasing snapshot times");
  const double eps = b.epsilon;
  const MomentFields ma = extract_moments(a), mb = extract_moments(b);
  const int ncm = gr.n_cmodes();
  ConservationResiduals r;
  r.t = b.t;
  Field mass = (mb.rho - ma.rho) / dt + divergence(gr, mb.u) / eps;
  Field charge = (mb.n - ma.n) / dt + divergence(gr, mb.j);
  // momentum: du/dt + (1/eps) div <f/2, v (x) v> - (1/2) n grad phi
  double mom2 = 0.0;
  for (int i = 0; i < 3; ++i) {
    Field flux = Field::Zero(ncm);
    for (int c = 0; c < ncm; ++c)
      for (int d = 0; d < gr.x_dims(); ++d)
        flux(c) += I1 * gr.k(c)[d] * 0.5 * (vv_row_[d][i].cast<std::complex<double>>() * b.f.col(c))(0);
    Field res = (mb.u[i] - ma.u[i]) / dt + flux / eps;
    if (cfg_.fields) res -= 0.5 * multiply(gr, mb.n, mb.grad_phi[i]);
    mom2 += gr.l2_sq(res);
  }
  // energy: dtheta/dt + (1/(6 eps)) div <f, v|v|^2> - (1/eps) div u - (eps/3) j . grad phi
  Field heat = Field::Zero(ncm);
  for (int c = 0; c < ncm; ++c)
    for (int d = 0; d < gr.x_dims(); ++d)
      heat(c) += I1 * gr.k(c)[d] * (vvsq_row_[d].cast<std::complex<double>>() * b.f.col(c))(0);
  Field energy = (mb.theta - ma.theta) / dt + heat / (6.0 * eps) - divergence(gr, mb.u) / eps;
  if (cfg_.fields)
    for (int d = 0; d < 3; ++d) energy -= (eps / 3.0) * multiply(gr, mb.j[d], mb.grad_phi[d]);
  r.mass = std::sqrt(gr.l2_sq(mass));
  r.momentum = std::sqrt(mom2);
  r.energy = std::sqrt(gr.l2_sq(energy));
  r.charge = std::sqrt(gr.l2_sq(charge));
  return r;
}

std::vector<ConservationResiduals> KineticSolver::conservation_residuals(const std::vector<KineticState>& h) const {
  if (h.size() < 2) usage_error("conservation residuals need at least two snapshots");
  std::vector<ConservationResiduals> out;
  for (std::size_t i = 1; i < h.size(); ++i) out.push_back(conservation_residuals(h[i - 1], h[i]));
  return out;
}

double KineticSolver::gauss_residual(const KineticState& s) const {
  if (!cfg_.fields) return 0.0;
  double r = std::abs(s.g(0, 0));
  for (int c = 1; c < grid_->n_cmodes(); ++c) r = std::max(r, std::abs(-grid_->k2(c) * s.phi(c) - s.g(0, c)));
  return r;
}

double KineticSolver::positivity_min(const KineticState& s) const {
  const Eigen::MatrixXd F = grid_->backward_rows(s.f), G = grid_->backward_rows(s.g);
  const Eigen::MatrixXd& V = model_->basis->values_at_nodes();
  const Eigen::MatrixXd gp = V.transpose() * (0.5 * (F + G));
  const Eigen::MatrixXd gm = V.transpose() * (0.5 * (F - G));
  return 1.0 + s.epsilon * std::min(gp.minCoeff(), gm.minCoeff());
}

KineticRun KineticSolver::run(const KineticState& initial, bool keep_moments) {
  const auto t0 = std::chrono::steady_clock::now();
  KineticRun out;
  // t_final is absolute, so a restarted state only runs the remaining span.
  const double T = cfg_.t_final;
  const double span = T - initial.t;
  if (span < -1e-12 * std::max(1.0, T)) usage_error("t_final lies before the initial state's time");
  const long steps = span > 0.0 ? std::max(1L, std::lround(span / cfg_.dt)) : 0;
  const double dt = steps > 0 ? span / static_cast<double>(steps) : cfg_.dt;
  KineticState cur = initial;
  cur.epsilon = cfg_.epsilon;
  auto snapshot = [&](const KineticState& s, const KineticState* prev, int picard_iters) {
    Snapshot sn;
    sn.t = s.t;
    const EnergyPair e = energy_functionals(s, cfg_.n_diag);
    sn.E = e.E;
    sn.D = e.D;
    const MomentFields m = extract_moments(s);
    const SpectralGrid& gr = *grid_;
    sn.rho_l2 = std::sqrt(gr.l2_sq(m.rho));
    sn.theta_l2 = std::sqrt(gr.l2_sq(m.theta));
    sn.n_l2 = std::sqrt(gr.l2_sq(m.n));
    sn.w_l2 = std::sqrt(gr.l2_sq(m.w));
    sn.u_l2 = std::sqrt(hs_sq(gr, m.u, 0));
    sn.j_l2 = std::sqrt(hs_sq(gr, m.j, 0));
    if (prev) {
      sn.residuals = conservation_residuals(*prev, s);
    } else {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      sn.residuals = {s.t, nan, nan, nan, nan};
    }
    sn.gauss = gauss_residual(s);
    sn.positivity_min = positivity_min(s);
    sn.picard_iters = picard_iters;
    out.snapshots.push_back(sn);
    if (keep_moments) out.moments.push_back(m);
  };
  snapshot(cur, nullptr, 0);
  EnergyPair e_prev = energy_functionals(cur, cfg_.n_diag);
  out.energy_trace.emplace_back(cur.t, e_prev.E);
  for (long n = 1; n <= steps; ++n) {
    KineticState prev = cur;
    int iters = 0;
    if (cfg_.picard)
      cur = picard_step(prev, dt, cfg_.picard_max_iters, cfg_.picard_tol, &iters);
    else
      cur = step(prev, dt);
    if (n == steps) cur.t = T;
    const EnergyPair e = energy_functionals(cur, cfg_.n_diag);
    out.dissipation_integral += 0.5 * dt * (e.D + e_prev.D);
    out.energy_trace.emplace_back(cur.t, e.E);
    e_prev = e;
    if (n % cfg_.snapshot_every == 0 || n == steps) snapshot(cur, &prev, iters);
  }
  out.steps = static_cast<int>(steps);
  out.final_state = cur;
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

void KineticSolver::save_checkpoint(const KineticState& s, const std::string& path) const {
  BinaryWriter header;
  header.put<double>(s.t);
  header.put<double>(s.epsilon);
  header.put<std::int32_t>(cfg_.x_dims);
  header.put<std::int32_t>(cfg_.modes);
  header.put<std::int32_t>(dim_);
  header.put<double>(cfg_.length);
  BinaryWriter payload;
  payload.put_matrix(s.f);
  payload.put_matrix(s.g);
  payload.put_matrix(Eigen::MatrixXcd(s.phi));
  write_versioned_file(path, kStateMagic, kStateVersion, header, payload);
}

KineticState KineticSolver::load_checkpoint(const std::string& path) const {
  VersionedFile file = read_versioned_file(path, kStateMagic);
  if (file.version != kStateVersion) io_error("'" + path + "' has unsupported checkpoint version");
  KineticState s;
  s.t = file.header.get<double>();
  s.epsilon = file.header.get<double>();
  const int xd = file.header.get<std::int32_t>(), modes = file.header.get<std::int32_t>(),
            dim = file.header.get<std::int32_t>();
  const double length = file.header.get<double>();
  if (xd != cfg_.x_dims || modes != cfg_.modes || dim != dim_ || length != cfg_.length)
    io_error("'" + path + "' does not match the solver discretization");
  s.f = file.payload.get_cmatrix();
  s.g = file.payload.get_cmatrix();
  s.phi = file.payload.get_cmatrix().col(0);
  return s;
}

}  // namespace vpb
