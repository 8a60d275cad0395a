#pragma once

#include <array>

#include "spectral.hpp"

namespace vpb {

/// Fluid-variable fields on a SpectralGrid, all in half-spectrum form.
struct MomentFields {
  Field rho, theta, n, w, phi;
  std::array<Field, 3> u, j, grad_phi;

  static MomentFields zeros(int ncm) {
    MomentFields m;
    for (Field* f : {&m.rho, &m.theta, &m.n, &m.w, &m.phi}) *f = Field::Zero(ncm);
    for (int d = 0; d < 3; ++d) m.u[d] = m.j[d] = m.grad_phi[d] = Field::Zero(ncm);
    return m;
  }
};

/// Initial fluid profile (rho0, u0, theta0, n0). Empty fields are read as zero;
/// n0 must have zero mean so that -Delta phi0 = n0 is solvable.
struct FluidProfile {
  Field rho, theta, n;
  std::array<Field, 3> u;
};

}  // namespace vpb
