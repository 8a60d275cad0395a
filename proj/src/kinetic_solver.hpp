#pragma once

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "fields.hpp"
#include "model.hpp"
#include "spectral.hpp"

namespace vpb {

enum class InitMode { Minimal, ChapmanEnskog, SlowManifold };
enum class CollisionForm { Symmetrized, Physical };
enum class TimeScheme { ImexEuler, Ars222 };

struct KineticConfig {
  int x_dims = 1;
  int modes = 64;
  double length = 2.0 * 3.14159265358979323846;
  double epsilon = 1.0;
  double dt = 1e-3;
  double t_final = 0.1;
  bool collisions = true;
  bool fields = true;
  bool nonlinear = true;
  bool picard = false;
  int picard_max_iters = 50;
  double picard_tol = 1e-13;
  TimeScheme scheme = TimeScheme::ImexEuler;
  CollisionForm collision_form = CollisionForm::Physical;
  InitMode init = InitMode::Minimal;
  double blowup_factor = 10.0;
  int snapshot_every = 10;
  int n_diag = 2;
  double norm_tol = 1e-8;
};

/// Perturbations f = g+ + g- and g = g+ - g- stored as (Hermite index) x
/// (half-spectrum mode) coefficient matrices, plus the potential.
struct KineticState {
  double t = 0.0;
  double epsilon = 1.0;
  Eigen::MatrixXcd f;
  Eigen::MatrixXcd g;
  Field phi;
};

struct EnergyPair {
  double E = 0.0;
  double D = 0.0;
};

/// H^0_x norms of the finite-difference residuals of the local laws between two states.
struct ConservationResiduals {
  double t = 0.0;
  double mass = 0.0;
  double momentum = 0.0;
  double energy = 0.0;
  double charge = 0.0;
};

struct Snapshot {
  double t = 0.0;
  double E = 0.0;
  double D = 0.0;
  double rho_l2 = 0.0, u_l2 = 0.0, theta_l2 = 0.0, n_l2 = 0.0, j_l2 = 0.0, w_l2 = 0.0;
  ConservationResiduals residuals;
  double gauss = 0.0;
  double positivity_min = 1.0;
  int picard_iters = 0;
};

struct KineticRun {
  std::vector<Snapshot> snapshots;
  std::vector<MomentFields> moments;  // filled when requested, aligned with snapshots
  KineticState final_state;
  std::vector<std::pair<double, double>> energy_trace;  // (t, E) at every step
  double dissipation_integral = 0.0;  // trapezoid in time of D at every step
  double wall_seconds = 0.0;
  int steps = 0;
};

class KineticSolver {
 public:
  KineticSolver(std::shared_ptr<const VelocityModel> model, const KineticConfig& config);

  const SpectralGrid& grid() const { return *grid_; }
  const KineticConfig& config() const { return cfg_; }
  const VelocityModel& model() const { return *model_; }
  int dim() const { return dim_; }

  KineticState zero_state() const;
  /// Well-prepared data: f = 2(rho + u.v + theta Psi) and g = n + eps(...) per init mode.
  /// Minimal sets the remaining components to zero; ChapmanEnskog adds the first-order
  /// corrections (including the compressive velocity eps grad q with div u = -eps d_t rho);
  /// SlowManifold then removes, mode by mode, the acoustic and kinetic eigen-components of
  /// the linear stiff operator.
  KineticState init_well_prepared(const FluidProfile& profile) const;

  KineticState step(const KineticState& s, double dt);
  KineticState step_imex_euler(const KineticState& s, double dt);
  KineticState step_ars222(const KineticState& s, double dt);
  /// Implicit Euler solved by fixed-point iteration with the nonlinear and force terms lagged.
  KineticState picard_step(const KineticState& s, double dt, int max_iters, double tol, int* iters = nullptr);

  MomentFields extract_moments(const KineticState& s) const;
  EnergyPair energy_functionals(const KineticState& s, int n_diag) const;
  ConservationResiduals conservation_residuals(const KineticState& a, const KineticState& b) const;
  std::vector<ConservationResiduals> conservation_residuals(const std::vector<KineticState>& history) const;
  /// max_k | -|k|^2 phi(k) - <g(k), 1> | over nonzero modes, plus |<g(0),1>|.
  double gauss_residual(const KineticState& s) const;
  /// min over x and quadrature nodes of 1 + eps g+- (negative means F+- < 0 somewhere).
  double positivity_min(const KineticState& s) const;
  void solve_poisson(KineticState& s) const;

  /// Integrates to cfg.t_final from the initial state.
  KineticRun run(const KineticState& initial, bool keep_moments = false);

  void save_checkpoint(const KineticState& s, const std::string& path) const;
  KineticState load_checkpoint(const std::string& path) const;

 private:
  struct Factorizations {
    std::vector<Eigen::PartialPivLU<Eigen::MatrixXcd>> f, g;
  };
  const Factorizations& factors(double scaled_dt);
  void project_slow(KineticState& s) const;
  Eigen::MatrixXcd operator_f(int c) const;
  Eigen::MatrixXcd operator_g(int c) const;
  /// Explicit part N(f, g) in modal form, dealiased.
  std::pair<Eigen::MatrixXcd, Eigen::MatrixXcd> explicit_terms(const KineticState& s) const;
  /// Applies the stiff operator A to (f, g) modewise.
  std::pair<Eigen::MatrixXcd, Eigen::MatrixXcd> apply_stiff(const Eigen::MatrixXcd& f,
                                                            const Eigen::MatrixXcd& g) const;
  void implicit_solve(const Factorizations& fac, Eigen::MatrixXcd& f, Eigen::MatrixXcd& g) const;
  void check_blowup(const KineticState& before, const KineticState& after) const;
  double state_norm(const KineticState& s) const;

  std::shared_ptr<const VelocityModel> model_;
  KineticConfig cfg_;
  std::unique_ptr<SpectralGrid> grid_;
  int dim_;
  Eigen::MatrixXd L1_, L2_;                 // kernel-exact copies
  std::array<Eigen::MatrixXd, 3> raise_;    // V_d - D_d
  std::vector<int> active_modes_;
  std::map<double, Factorizations> fac_cache_;
  // velocity-side rows for moments and residuals
  Eigen::RowVectorXd one_row_, theta_row_;
  std::array<Eigen::RowVectorXd, 3> v_row_;
  std::array<std::array<Eigen::RowVectorXd, 3>, 3> vv_row_;
  std::array<Eigen::RowVectorXd, 3> vvsq_row_;
  std::vector<Eigen::MatrixXd> S_, Snu_;  // sum over |beta| = j of (D^beta)^T [G] D^beta
  std::array<int, 3> v_index_{};
};

}  // namespace vpb
