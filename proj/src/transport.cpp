#include "transport.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "error.hpp"
#include "quadrature.hpp"

namespace vpb {

Eigen::VectorXd invert_L(const Eigen::MatrixXd& L, const Eigen::MatrixXd& P_kernel, const Eigen::VectorXd& target,
                         const InverseOptions& opt, const std::optional<Eigen::VectorXd>& initial_guess) {
  const double tnorm = target.norm();
  const Eigen::VectorXd ker = P_kernel * target;
  if (ker.norm() > opt.kernel_tol * std::max(1.0, tnorm)) {
    std::ostringstream msg;
    msg << "target has a kernel component of norm " << ker.norm() << " and is not in the range of the operator";
    usage_error(msg.str());
  }
  const Eigen::VectorXd rhs = target - ker;
  // L + P is invertible and acts as the identity on the kernel.
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(L + P_kernel);
  const Eigen::MatrixXd Pc = Eigen::MatrixXd::Identity(L.rows(), L.cols()) - P_kernel;
  Eigen::VectorXd x = initial_guess ? Eigen::VectorXd(Pc * (*initial_guess)) : Eigen::VectorXd(lu.solve(rhs));
  for (int it = 0; it < opt.refinement_steps; ++it) x += lu.solve(rhs - L * x);
  x = Pc * x;
  const double res = (L * x - rhs).norm();
  if (res > opt.residual_tol * std::max(tnorm, std::numeric_limits<double>::min()) && res > 0.0) {
    std::ostringstream msg;
    msg << "constrained solve residual " << res << " exceeds tolerance";
    numerical_error(msg.str());
  }
  return x;
}

Eigen::VectorXd invert_L1(const CollisionOperators& ops, const Projections& proj, const Eigen::VectorXd& target,
                          const InverseOptions& opt, const std::optional<Eigen::VectorXd>& initial_guess) {
  return invert_L(ops.L1(), proj.P1, target, opt, initial_guess);
}

Eigen::VectorXd invert_L2(const CollisionOperators& ops, const Projections& proj, const Eigen::VectorXd& target,
                          const InverseOptions& opt, const std::optional<Eigen::VectorXd>& initial_guess) {
  return invert_L(ops.L2(), proj.P2, target, opt, initial_guess);
}

namespace {

double relative_residual(const Eigen::MatrixXd& L, const Eigen::VectorXd& x, const Eigen::VectorXd& t) {
  const double n = t.norm();
  return n > 0.0 ? (L * x - t).norm() / n : (L * x).norm();
}

}  // namespace

TransportCoefficients compute_transport(const CollisionOperators& ops, const Projections& proj,
                                        const MomentVectors& m, const InverseOptions& opt) {
  TransportCoefficients tc;
  double sumA = 0.0, sumB = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      tc.A_hat[i][j] = invert_L1(ops, proj, m.A[i][j], opt);
      tc.residual_A = std::max(tc.residual_A, relative_residual(ops.L1(), tc.A_hat[i][j], m.A[i][j]));
      sumA += m.A[i][j].dot(tc.A_hat[i][j]);
    }
    tc.B_hat[i] = invert_L1(ops, proj, m.B[i], opt);
    tc.residual_B = std::max(tc.residual_B, relative_residual(ops.L1(), tc.B_hat[i], m.B[i]));
    sumB += m.B[i].dot(tc.B_hat[i]);
    tc.Phi_hat[i] = invert_L2(ops, proj, m.v[i], opt);
    tc.residual_Phi = std::max(tc.residual_Phi, relative_residual(ops.L2(), tc.Phi_hat[i], m.v[i]));
  }
  tc.Psi_hat = invert_L2(ops, proj, m.psi, opt);
  tc.residual_Psi = relative_residual(ops.L2(), tc.Psi_hat, m.psi);

  tc.mu = sumA / 15.0;
  tc.kappa = 2.0 * sumB / 15.0;
  tc.mu_limit = sumA / 10.0;
  if (!(tc.mu > 0.0) || !(tc.kappa > 0.0)) numerical_error("viscosity or heat conductivity is not positive");

  double integral = 0.0;
  for (int i = 0; i < 3; ++i) {
    tc.sigma_components[i] = m.v[i].dot(ops.L1_two_arg(m.v[i], -m.v[i]));
    integral += tc.sigma_components[i];
  }
  if (!(integral > 0.0)) numerical_error("conductivity integral <v, L1(v,-v)> is not positive");
  tc.sigma = 1.0 / (0.5 * integral);
  tc.sigma_limit = 2.0 * m.v[0].dot(tc.Phi_hat[0]);
  return tc;
}

std::pair<double, double> compute_mu_kappa(const CollisionOperators& ops, const Projections& proj,
                                           const MomentVectors& m) {
  const TransportCoefficients tc = compute_transport(ops, proj, m);
  return {tc.mu, tc.kappa};
}

double compute_sigma(const CollisionOperators& ops, const MomentVectors& m) {
  double integral = 0.0;
  for (int i = 0; i < 3; ++i) integral += m.v[i].dot(ops.L1_two_arg(m.v[i], -m.v[i]));
  if (!(integral > 0.0)) numerical_error("conductivity integral <v, L1(v,-v)> is not positive");
  return 1.0 / (0.5 * integral);
}

std::vector<AlphaBetaSample> compute_alpha_beta(const HermiteBasis& basis, const TransportCoefficients& tc,
                                                const std::vector<double>& radii) {
  const SphereRule dirs = sphere_rule(9);
  std::vector<AlphaBetaSample> out;
  Eigen::VectorXd e(basis.dim());
  for (double r : radii) {
    if (r <= 0.0) usage_error("alpha/beta radii must be positive");
    AlphaBetaSample s;
    s.radius = r;
    const double psi = 0.5 * r * r - 1.5;
    s.beta_valid = std::abs(psi) >= 1e-6;
    double amin = std::numeric_limits<double>::infinity(), amax = -amin, asum = 0.0;
    double bmin = amin, bmax = -amin, bsum = 0.0;
    int na = 0;
    for (std::size_t q = 0; q < dirs.size(); ++q) {
      const auto& d = dirs.points[q];
      const Vec3 v{r * d[0], r * d[1], r * d[2]};
      basis.evaluate_into(v, e.data());
      double dot = 0.0;
      for (int i = 0; i < 3; ++i) dot += tc.Phi_hat[i].dot(e) * v[i];
      asum += dot / (r * r);
      if (std::abs(v[0]) > 0.1 * r) {
        const double ratio = tc.Phi_hat[0].dot(e) / v[0];
        amin = std::min(amin, ratio);
        amax = std::max(amax, ratio);
        ++na;
      }
      if (s.beta_valid) {
        const double b = tc.Psi_hat.dot(e) / psi;
        bmin = std::min(bmin, b);
        bmax = std::max(bmax, b);
        bsum += b;
      }
    }
    s.alpha = asum / static_cast<double>(dirs.size());
    s.alpha_spread = na > 0 ? (amax - amin) / std::abs(s.alpha) : 0.0;
    if (s.beta_valid) {
      s.beta = bsum / static_cast<double>(dirs.size());
      s.beta_spread = (bmax - bmin) / std::abs(s.beta);
    } else {
      s.beta = std::numeric_limits<double>::quiet_NaN();
    }
    out.push_back(s);
  }
  return out;
}

double fit_alpha_beta_growth(const std::vector<AlphaBetaSample>& samples) {
  double c = 0.0;
  for (const auto& s : samples) {
    const double b = s.beta_valid ? std::abs(s.beta) : 0.0;
    c = std::max(c, (std::abs(s.alpha) + b) / (1.0 + s.radius));
  }
  return c;
}

}  // namespace vpb
