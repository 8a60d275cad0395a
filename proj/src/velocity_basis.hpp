#pragma once

#include <Eigen/Dense>
#include <array>
#include <map>
#include <string>
#include <vector>

namespace vpb {

using Vec3 = std::array<double, 3>;

/// Tensor-product Gauss-Hermite grid for integrals against the normalized
/// Maxwellian: sum_q weights[q] * h(nodes[q]) ~ int h(v) M(v) dv.
struct QuadratureGrid {
  std::vector<Vec3> nodes;
  std::vector<double> weights;
  int order_per_axis = 0;
  std::size_t size() const { return nodes.size(); }
};

QuadratureGrid make_quadrature_grid(int order_per_axis);

/// (2 pi)^{-3/2} exp(-|v|^2 / 2)
double maxwellian(const Vec3& v);

/// nu(v) = int |v - w| M(w) dw, hard-sphere collision frequency (radial closed form).
double collision_frequency(const Vec3& v);

/// Fitted constants C1 <= nu(v) / (1 + |v|) <= C2 over a set of velocities.
struct NuBounds {
  double c1 = 0.0;
  double c2 = 0.0;
};
NuBounds fit_nu_bounds(const QuadratureGrid& grid);

/// Total-degree-K Hermite system orthonormal in L^2(M dv). Index 0 is the
/// constant function; indices are grouped by total degree.
class HermiteBasis {
 public:
  HermiteBasis(int degree_cutoff, int quad_order);

  int degree_cutoff() const { return K_; }
  int quad_order() const { return grid_.order_per_axis; }
  int dim() const { return static_cast<int>(index_map_.size()); }

  const std::array<int, 3>& multi_index(int i) const { return index_map_[i]; }
  /// Returns -1 when the multi-degree is outside the truncation.
  int index_of(const std::array<int, 3>& k) const;
  int total_degree(int i) const;

  /// Multiplication by v_axis in coefficient space (Galerkin-truncated, symmetric).
  const Eigen::MatrixXd& mult(int axis) const { return mult_[axis]; }
  /// D(b, a) = < d/dv_axis e_a, e_b >.
  const Eigen::MatrixXd& deriv(int axis) const { return deriv_[axis]; }
  /// < nu e_i, e_j >, tabulated by quadrature.
  const Eigen::MatrixXd& nu_gram() const { return nu_gram_; }

  const QuadratureGrid& grid() const { return grid_; }
  /// values(i, q) = e_i(grid.nodes[q])
  const Eigen::MatrixXd& values_at_nodes() const { return values_; }

  /// e_i(v) for all i.
  Eigen::VectorXd evaluate(const Vec3& v) const;
  /// Writes e_i(v) into out (length dim) without allocating.
  void evaluate_into(const Vec3& v, double* out) const;

  /// Coefficients of the monomial v1^p1 v2^p2 v3^p3 (requires p1+p2+p3 <= K).
  Eigen::VectorXd monomial(const std::array<int, 3>& powers) const;

  /// Gram matrix of the basis computed by quadrature (identity up to rounding).
  Eigen::MatrixXd quadrature_gram() const;

  /// Binary cache keyed by (K, quad_order).
  void save(const std::string& path) const;
  static HermiteBasis load(const std::string& path);

  bool operator==(const HermiteBasis& other) const;

 private:
  HermiteBasis() = default;
  void build_index();
  void assemble();

  int K_ = 0;
  std::vector<std::array<int, 3>> index_map_;
  std::map<std::array<int, 3>, int> lookup_;
  std::array<Eigen::MatrixXd, 3> mult_;
  std::array<Eigen::MatrixXd, 3> deriv_;
  Eigen::MatrixXd nu_gram_;
  QuadratureGrid grid_;
  Eigen::MatrixXd values_;
};

/// Named moment functions and the orthonormalized thirteen-moments family.
struct MomentVectors {
  Eigen::VectorXd one;
  std::array<Eigen::VectorXd, 3> v;
  Eigen::VectorXd v_sq;           // |v|^2
  Eigen::VectorXd psi;            // |v|^2/2 - 3/2
  Eigen::VectorXd theta_test;     // |v|^2/3 - 1
  std::array<std::array<Eigen::VectorXd, 3>, 3> A;  // v_i v_j - |v|^2/3 delta_ij
  std::array<Eigen::VectorXd, 3> B;                 // (|v|^2/2 - 5/2) v_i
  std::array<Eigen::VectorXd, 3> v_vsq;             // v_i |v|^2
  Eigen::MatrixXd thirteen;       // dim x 13, orthonormal columns
  Eigen::MatrixXd thirteen_raw;   // dim x 13, {1, v_i, v_i^2, v_i|v|^2, v_iv_j}
};

/// Requires K >= 3 so that v_i |v|^2 is representable.
MomentVectors thirteen_moments(const HermiteBasis& basis);

}  // namespace vpb
