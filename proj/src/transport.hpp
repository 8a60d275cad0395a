#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <vector>

#include "collision_ops.hpp"
#include "velocity_basis.hpp"

namespace vpb {

/// Solves L x = target with x orthogonal to ker L, for L in {L1, L2}.
/// The kernel projector is the analytic one (P1 for L1, P2 for L2).
struct InverseOptions {
  double kernel_tol = 1e-8;      // allowed kernel component of the target (relative to |target|, floor 1)
  double residual_tol = 1e-9;    // |L x - target| / |target|
  int refinement_steps = 2;
};

Eigen::VectorXd invert_L(const Eigen::MatrixXd& L, const Eigen::MatrixXd& P_kernel, const Eigen::VectorXd& target,
                         const InverseOptions& opt = {},
                         const std::optional<Eigen::VectorXd>& initial_guess = std::nullopt);
Eigen::VectorXd invert_L1(const CollisionOperators& ops, const Projections& proj, const Eigen::VectorXd& target,
                          const InverseOptions& opt = {},
                          const std::optional<Eigen::VectorXd>& initial_guess = std::nullopt);
Eigen::VectorXd invert_L2(const CollisionOperators& ops, const Projections& proj, const Eigen::VectorXd& target,
                          const InverseOptions& opt = {},
                          const std::optional<Eigen::VectorXd>& initial_guess = std::nullopt);

struct AlphaBetaSample {
  double radius = 0.0;
  double alpha = 0.0;   // Phi_hat(v) . v / |v|^2
  double beta = 0.0;    // Psi_hat(v) / Psi(v); NaN when |Psi| < 1e-6
  double alpha_spread = 0.0;  // max-min of Phi_hat_1(v)/v_1 over directions, relative to |alpha|
  double beta_spread = 0.0;
  bool beta_valid = false;
};

struct TransportCoefficients {
  /// mu = (1/15) sum_ij <A_ij, A_hat_ij>, kappa = (2/15) sum_i <B_i, B_hat_i>,
  /// 1/sigma = (1/2) <v, L1(v, -v)>.
  double mu = 0.0;
  double kappa = 0.0;
  double sigma = 0.0;
  /// Coefficients that the discrete kinetic system actually relaxes to:
  /// mu_limit = (1/10) sum_ij <A_ij, A_hat_ij>, sigma_limit = 2 <v_1, Phi_hat_1>.
  double mu_limit = 0.0;
  double sigma_limit = 0.0;
  std::array<double, 3> sigma_components{};  // <v_i, L1(v_i, -v_i)>
  std::array<std::array<Eigen::VectorXd, 3>, 3> A_hat;
  std::array<Eigen::VectorXd, 3> B_hat;
  std::array<Eigen::VectorXd, 3> Phi_hat;
  Eigen::VectorXd Psi_hat;
  double residual_A = 0.0;
  double residual_B = 0.0;
  double residual_Phi = 0.0;
  double residual_Psi = 0.0;
};

TransportCoefficients compute_transport(const CollisionOperators& ops, const Projections& proj,
                                        const MomentVectors& moments, const InverseOptions& opt = {});

std::pair<double, double> compute_mu_kappa(const CollisionOperators& ops, const Projections& proj,
                                           const MomentVectors& moments);
double compute_sigma(const CollisionOperators& ops, const MomentVectors& moments);

/// Samples alpha(|v|) and beta(|v|) on spheres of the given radii.
std::vector<AlphaBetaSample> compute_alpha_beta(const HermiteBasis& basis, const TransportCoefficients& tc,
                                                const std::vector<double>& radii);

/// Smallest C with |alpha| + |beta| <= C (1 + r) over the valid samples.
double fit_alpha_beta_growth(const std::vector<AlphaBetaSample>& samples);

}  // namespace vpb
