#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "fields.hpp"
#include "spectral.hpp"

namespace vpb {

struct FluidConfig {
  int x_dims = 1;
  int modes = 64;
  double length = 2.0 * 3.14159265358979323846;
  double dt = 1e-3;
  double t_final = 0.1;
  double mu = 0.0;
  double kappa = 0.0;
  double sigma = 0.0;
  int snapshot_every = 10;
  double blowup_factor = 10.0;
};

/// Incompressible two-fluid state in half-spectrum form. j and w are kept in sync
/// with the primary fields by FluidSolver::finalize.
struct FluidState {
  double t = 0.0;
  Field rho, theta, n, phi;
  std::array<Field, 3> u, j;
  Field w;
};

struct FluidSnapshot {
  double t = 0.0;
  double u_l2 = 0.0, theta_l2 = 0.0, n_l2 = 0.0, j_l2 = 0.0;
  double max_divergence = 0.0;
  double boussinesq = 0.0;
};

struct FluidRun {
  std::vector<FluidSnapshot> snapshots;
  std::vector<MomentFields> moments;  // filled when requested, aligned with snapshots
  FluidState final_state;
  double wall_seconds = 0.0;
  int steps = 0;
};

/// Removes the gradient part of u mode by mode; mode 0 is left unchanged.
std::array<Field, 3> leray_project(const SpectralGrid& grid, const std::array<Field, 3>& u);

/// max over modes of |k . u(k)|.
double max_divergence(const SpectralGrid& grid, const std::array<Field, 3>& u);

/// Reference solver for the incompressible Navier-Stokes-Fourier-Poisson system with
/// Ohm's law. Diffusion and damping are integrated exactly per mode, advection and the
/// electric force explicitly (exponential Euler).
class FluidSolver {
 public:
  explicit FluidSolver(const FluidConfig& config);

  const SpectralGrid& grid() const { return *grid_; }
  const FluidConfig& config() const { return cfg_; }

  /// Projects u0, sets rho = -theta, solves for phi. Rejects non-neutral n0.
  FluidState initial_state(const FluidProfile& profile) const;
  FluidState step_fluid(const FluidState& s, double dt) const;
  /// j = n u + sigma (grad phi - grad n / 2)
  std::array<Field, 3> ohms_law(const FluidState& s) const;
  /// dn/dt from the charge equation right-hand side.
  Field charge_rate(const FluidState& s) const;
  /// Pressure reconstructed from the divergence of the momentum equation.
  Field pressure(const FluidState& s) const;
  MomentFields moments(const FluidState& s) const;

  FluidRun run(const FluidState& initial, bool keep_moments = false) const;

  /// Flat binary dump of the physical-space fields with a shape header.
  void write_fields(const FluidState& s, const std::string& path) const;

 private:
  void finalize(FluidState& s) const;
  FluidSnapshot snapshot(const FluidState& s) const;

  FluidConfig cfg_;
  std::unique_ptr<SpectralGrid> grid_;
};

}  // namespace vpb
