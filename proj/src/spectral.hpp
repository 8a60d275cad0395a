#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <memory>
#include <vector>

namespace vpb {

using Field = Eigen::VectorXcd;  // half-spectrum coefficients of a real periodic field

/// Periodic torus [0, L)^d, d in {1, 2}, with n points per axis and real-to-complex
/// FFTs. Coefficients are normalized as c_m = (1/n^d) sum_x u(x) e^{-i k_m x}.
class SpectralGrid {
 public:
  SpectralGrid(int x_dims, int n, double length);
  ~SpectralGrid();
  SpectralGrid(const SpectralGrid&) = delete;
  SpectralGrid& operator=(const SpectralGrid&) = delete;

  int x_dims() const { return dims_; }
  int n() const { return n_; }
  double length() const { return length_; }
  double volume() const;
  int n_points() const { return npts_; }
  int n_cmodes() const { return ncm_; }

  /// Wave vector of half-spectrum mode c (third component always 0).
  const std::array<double, 3>& k(int c) const { return k_[c]; }
  double k2(int c) const { return k_[c][0] * k_[c][0] + k_[c][1] * k_[c][1]; }
  /// Integer mode numbers (m0, m1).
  const std::array<int, 2>& m(int c) const { return m_[c]; }
  /// True for modes kept by the 2/3 rule (|m_d| <= n/3 on every axis).
  bool active(int c) const { return active_[c]; }
  /// Weight of mode c in Parseval sums over the half spectrum.
  double parseval_weight(int c) const { return pw_[c]; }
  /// Index of the mode with integer numbers (m0, m1), or -1 if not stored.
  int index_of(int m0, int m1 = 0) const;
  /// Physical coordinate of grid point p.
  std::array<double, 2> x(int p) const;

  Field forward(const Eigen::VectorXd& u) const;
  Eigen::VectorXd backward(const Field& c) const;
  /// Row-wise transforms: rows are independent fields.
  Eigen::MatrixXcd forward_rows(const Eigen::MatrixXd& U) const;
  Eigen::MatrixXd backward_rows(const Eigen::MatrixXcd& C) const;

  /// Zero inactive modes.
  void dealias(Field& c) const;
  void dealias_rows(Eigen::MatrixXcd& C) const;
  /// Restore exact Hermitian symmetry on the self-conjugate line of the half spectrum.
  void enforce_reality_rows(Eigen::MatrixXcd& C) const;

  /// int |u|^2 dx from half-spectrum coefficients.
  double l2_sq(const Field& c) const;
  /// int conj(a) b dx, real part.
  double inner(const Field& a, const Field& b) const;
  /// Discrete H^s norm squared: int sum_{|alpha|<=s} |d^alpha u|^2 dx.
  double hs_sq(const Field& c, int s) const;
  /// Derivative multiplier sum_{|alpha|=j} k^{2 alpha} for mode c.
  double derivative_weight(int c, int j) const;

 private:
  int dims_, n_, npts_, ncm_;
  double length_;
  std::vector<std::array<double, 3>> k_;
  std::vector<std::array<int, 2>> m_;
  std::vector<bool> active_;
  std::vector<double> pw_;
  struct Plans;
  std::unique_ptr<Plans> plans_;
};

/// Gradient of a scalar field, one Field per x-axis (third axis zero).
std::array<Field, 3> gradient(const SpectralGrid& grid, const Field& c);
/// Divergence of a 3-vector field (only the first x_dims components are differentiated).
Field divergence(const SpectralGrid& grid, const std::array<Field, 3>& u);
/// Solve Delta phi = rhs with zero mean; mode 0 of rhs is ignored.
Field solve_poisson(const SpectralGrid& grid, const Field& rhs);
/// Dealiased pointwise product of two fields.
Field multiply(const SpectralGrid& grid, const Field& a, const Field& b);
/// Sum over axes of H^s norms squared of the components.
double hs_sq(const SpectralGrid& grid, const std::array<Field, 3>& u, int s);

}  // namespace vpb
