#include "fluid_solver.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "binary_io.hpp"
#include "error.hpp"

namespace vpb {

namespace {

constexpr char kFieldMagic[4] = {'V', 'P', 'B', 'F'};
const std::complex<double> I1(0.0, 1.0);

// (1 - e^{-z}) / z, with the series near zero
double phi1(double z) {
  if (std::abs(z) < 1e-8) return 1.0 - 0.5 * z;
  return -std::expm1(-z) / z;
}

double total_norm(const FluidState& s) {
  double acc = s.theta.squaredNorm() + s.n.squaredNorm();
  for (const auto& c : s.u) acc += c.squaredNorm();
  return std::sqrt(acc);
}

}  // namespace

std::array<Field, 3> leray_project(const SpectralGrid& gr, const std::array<Field, 3>& u) {
  std::array<Field, 3> out = u;
  for (int c = 1; c < gr.n_cmodes(); ++c) {
    const auto& k = gr.k(c);
    std::complex<double> kd = 0.0;
    for (int d = 0; d < 3; ++d) kd += k[d] * u[d](c);
    for (int d = 0; d < 3; ++d) out[d](c) -= k[d] * kd / gr.k2(c);
  }
  return out;
}

double max_divergence(const SpectralGrid& gr, const std::array<Field, 3>& u) {
  double m = 0.0;
  for (int c = 0; c < gr.n_cmodes(); ++c) {
    std::complex<double> kd = 0.0;
    for (int d = 0; d < 3; ++d) kd += gr.k(c)[d] * u[d](c);
    m = std::max(m, std::abs(kd));
  }
  return m;
}

FluidSolver::FluidSolver(const FluidConfig& config) : cfg_(config) {
  if (!(cfg_.dt > 0.0)) usage_error("dt must be positive");
  if (cfg_.t_final < 0.0) usage_error("t_final must be non-negative");
  if (cfg_.mu < 0.0 || cfg_.kappa < 0.0 || cfg_.sigma < 0.0) usage_error("transport coefficients must be non-negative");
  if (cfg_.snapshot_every < 1) usage_error("snapshot_every must be >= 1");
  grid_ = std::make_unique<SpectralGrid>(cfg_.x_dims, cfg_.modes, cfg_.length);
}

void FluidSolver::finalize(FluidState& s) const {
  s.rho = -s.theta;
  s.phi = solve_poisson(*grid_, s.n);
  s.j = ohms_law(s);
  s.w = multiply(*grid_, s.n, s.theta);
}

FluidState FluidSolver::initial_state(const FluidProfile& p) const {
  const SpectralGrid& gr = *grid_;
  const int ncm = gr.n_cmodes();
  auto sized = [&](const Field& x) {
    const Field out = x.size() == 0 ? Field(Field::Zero(ncm)) : x;
    if (out.size() != ncm) usage_error("profile field size does not match the grid");
    return out;
  };
  FluidState s;
  s.theta = sized(p.theta);
  s.n = sized(p.n);
  if (std::abs(s.n(0)) > 1e-12) usage_error("initial charge n0 must have zero mean (global neutrality)");
  std::array<Field, 3> u;
  for (int d = 0; d < 3; ++d) u[d] = sized(p.u[d]);
  s.u = leray_project(gr, u);
  gr.dealias(s.theta);
  gr.dealias(s.n);
  for (auto& c : s.u) gr.dealias(c);
  finalize(s);
  return s;
}

std::array<Field, 3> FluidSolver::ohms_law(const FluidState& s) const {
  const SpectralGrid& gr = *grid_;
  const auto gphi = gradient(gr, s.phi);
  const auto gn = gradient(gr, s.n);
  std::array<Field, 3> j;
  for (int d = 0; d < 3; ++d) j[d] = multiply(gr, s.n, s.u[d]) + cfg_.sigma * (gphi[d] - 0.5 * gn[d]);
  return j;
}

Field FluidSolver::charge_rate(const FluidState& s) const {
  const SpectralGrid& gr = *grid_;
  const auto gn = gradient(gr, s.n);
  Field adv = Field::Zero(gr.n_cmodes());
  for (int d = 0; d < gr.x_dims(); ++d) adv += multiply(gr, s.u[d], gn[d]);
  Field rate = -adv - cfg_.sigma * s.n;
  for (int c = 0; c < gr.n_cmodes(); ++c) rate(c) -= 0.5 * cfg_.sigma * gr.k2(c) * s.n(c);
  return rate;
}

Field FluidSolver::pressure(const FluidState& s) const {
  const SpectralGrid& gr = *grid_;
  const auto gphi = gradient(gr, s.phi);
  std::array<Field, 3> F;
  for (int i = 0; i < 3; ++i) {
    const auto gu = gradient(gr, s.u[i]);
    F[i] = 0.5 * multiply(gr, s.n, gphi[i]);
    for (int d = 0; d < gr.x_dims(); ++d) F[i] -= multiply(gr, s.u[d], gu[d]);
  }
  // Delta p = div F
  return solve_poisson(gr, divergence(gr, F));
}

FluidState FluidSolver::step_fluid(const FluidState& s, double dt) const {
  if (!(dt > 0.0)) usage_error("dt must be positive");
  const SpectralGrid& gr = *grid_;
  const int ncm = gr.n_cmodes();
  const auto gphi = gradient(gr, s.phi);
  const auto gtheta = gradient(gr, s.theta);
  const auto gn = gradient(gr, s.n);
  std::array<Field, 3> Nu;
  for (int i = 0; i < 3; ++i) {
    const auto gu = gradient(gr, s.u[i]);
    Nu[i] = 0.5 * multiply(gr, s.n, gphi[i]);
    for (int d = 0; d < gr.x_dims(); ++d) Nu[i] -= multiply(gr, s.u[d], gu[d]);
  }
  Nu = leray_project(gr, Nu);
  Field Ntheta = Field::Zero(ncm), Nn = Field::Zero(ncm);
  for (int d = 0; d < gr.x_dims(); ++d) {
    Ntheta -= multiply(gr, s.u[d], gtheta[d]);
    Nn -= multiply(gr, s.u[d], gn[d]);
  }
  FluidState out;
  out.t = s.t + dt;
  out.theta = Field::Zero(ncm);
  out.n = Field::Zero(ncm);
  for (auto& c : out.u) c = Field::Zero(ncm);
  for (int c = 0; c < ncm; ++c) {
    if (!gr.active(c)) continue;
    const double k2 = gr.k2(c);
    auto etd = [&](double rate, std::complex<double> x, std::complex<double> nl) {
      return std::exp(-rate * dt) * x + dt * phi1(rate * dt) * nl;
    };
    for (int d = 0; d < 3; ++d) out.u[d](c) = etd(cfg_.mu * k2, s.u[d](c), Nu[d](c));
    out.theta(c) = etd(cfg_.kappa * k2, s.theta(c), Ntheta(c));
    out.n(c) = etd(cfg_.sigma * (1.0 + 0.5 * k2), s.n(c), Nn(c));
  }
  finalize(out);
  const double a = total_norm(s), b = total_norm(out);
  if (!std::isfinite(b) || (b > cfg_.blowup_factor * a && b > 1e-300)) {
    std::ostringstream msg;
    msg << "fluid blow-up detected at t=" << out.t << ": norm grew from " << a << " to " << b;
    numerical_error(msg.str());
  }
  return out;
}

MomentFields FluidSolver::moments(const FluidState& s) const {
  MomentFields m = MomentFields::zeros(grid_->n_cmodes());
  m.rho = s.rho;
  m.theta = s.theta;
  m.n = s.n;
  m.w = s.w;
  m.phi = s.phi;
  m.u = s.u;
  m.j = s.j;
  m.grad_phi = gradient(*grid_, s.phi);
  return m;
}

FluidSnapshot FluidSolver::snapshot(const FluidState& s) const {
  const SpectralGrid& gr = *grid_;
  FluidSnapshot sn;
  sn.t = s.t;
  sn.u_l2 = std::sqrt(hs_sq(gr, s.u, 0));
  sn.theta_l2 = std::sqrt(gr.l2_sq(s.theta));
  sn.n_l2 = std::sqrt(gr.l2_sq(s.n));
  sn.j_l2 = std::sqrt(hs_sq(gr, s.j, 0));
  sn.max_divergence = max_divergence(gr, s.u);
  sn.boussinesq = (s.rho + s.theta).cwiseAbs().maxCoeff();
  return sn;
}

FluidRun FluidSolver::run(const FluidState& initial, bool keep_moments) const {
  const auto t0 = std::chrono::steady_clock::now();
  FluidRun out;
  const double T = cfg_.t_final;
  const long steps = T > 0.0 ? std::max(1L, std::lround(T / cfg_.dt)) : 0;
  const double dt = steps > 0 ? T / static_cast<double>(steps) : cfg_.dt;
  FluidState cur = initial;
  out.snapshots.push_back(snapshot(cur));
  if (keep_moments) out.moments.push_back(moments(cur));
  for (long n = 1; n <= steps; ++n) {
    cur = step_fluid(cur, dt);
    if (n == steps) cur.t = T;
    if (n % cfg_.snapshot_every == 0 || n == steps) {
      out.snapshots.push_back(snapshot(cur));
      if (keep_moments) out.moments.push_back(moments(cur));
    }
  }
  out.final_state = cur;
  out.steps = static_cast<int>(steps);
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

void FluidSolver::write_fields(const FluidState& s, const std::string& path) const {
  const SpectralGrid& gr = *grid_;
  BinaryWriter header;
  header.put<double>(s.t);
  header.put<std::int32_t>(gr.x_dims());
  header.put<std::int32_t>(gr.n());
  header.put<double>(gr.length());
  // rho, u1, u2, u3, theta, n, phi, j1, j2, j3, w
  header.put<std::int32_t>(11);
  Eigen::MatrixXd data(11, gr.n_points());
  const std::array<const Field*, 11> fields{&s.rho, &s.u[0], &s.u[1], &s.u[2], &s.theta, &s.n,
                                            &s.phi, &s.j[0], &s.j[1], &s.j[2], &s.w};
  for (int r = 0; r < 11; ++r) data.row(r) = gr.backward(*fields[r]).transpose();
  BinaryWriter payload;
  payload.put_matrix(data);
  write_versioned_file(path, kFieldMagic, 1, header, payload);
}

}  // namespace vpb
