#pragma once

#include <memory>
#include <string>

#include "collision_ops.hpp"
#include "transport.hpp"
#include "velocity_basis.hpp"

namespace vpb {

/// Everything velocity-side that a solver needs, built once and shared read-only.
struct VelocityModel {
  std::shared_ptr<const HermiteBasis> basis;
  std::shared_ptr<const CollisionOperators> ops;
  Projections proj;
  MomentVectors moments;
  TransportCoefficients transport;

  /// cache_dir may be empty (no caching). Basis and operator caches are keyed by
  /// (K, quad_order) and the sphere rules respectively.
  static std::shared_ptr<const VelocityModel> build(int K, int quad_order, const CollisionConfig& cfg,
                                                    const std::string& cache_dir = "");
};

}  // namespace vpb
