#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "velocity_basis.hpp"

namespace vpb {

struct CollisionConfig {
  /// Scale of the hard-sphere kernel |(v - v_*) . omega|.
  double cross_section = 1.0;
  /// Angular degrees; 0 picks the smallest degree that is exact for the basis.
  int sphere_degree_u = 0;
  int sphere_degree_sigma = 0;
  /// Assemble only the slices needed by L1, L2 and Lc (skips the full tensor).
  bool linear_only = false;
  /// Re-assemble with doubled angular degrees and compare.
  bool certify = true;
  double certify_tol = 1e-10;  // relative to the largest tensor entry
  double kernel_threshold = 1e-7;
};

/// Hard-sphere collision operators in the coefficient space of a HermiteBasis.
///
/// B(k, i, j) = < (1/M) B(M e_i, M e_j), e_k >, the weak form with the
/// unnormalized surface measure on S^2. Everything else is derived from it:
///   Q(k, i, j)  = B(k, i, j) + B(k, j, i)
///   L2(k, i)    = -2 B(k, i, 0)
///   Lc(k, i)    = -2 B(k, 0, i)
///   L1          = L2 + Lc
/// and the two-argument form L1(f, g) = L2 f + Lc g.
class CollisionOperators {
 public:
  CollisionOperators(const HermiteBasis& basis, const CollisionConfig& config = {});

  int dim() const { return dim_; }
  int degree_cutoff() const { return K_; }
  bool has_tensor() const { return !tensor_.empty(); }
  const CollisionConfig& config() const { return config_; }
  std::string sphere_rule_description() const;
  /// Largest entry change observed by the doubling certification (-1 if skipped).
  double certification_change() const { return cert_change_; }

  double B(int k, int i, int j) const { return tensor_[(static_cast<std::size_t>(i) * dim_ + j) * dim_ + k]; }
  double Q(int k, int i, int j) const { return B(k, i, j) + B(k, j, i); }

  /// (1/M) B(M f, M g) in coefficient space.
  Eigen::VectorXd apply_B(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const;
  /// Q(f, g) = (1/M)[B(Mf, Mg) + B(Mg, Mf)].
  Eigen::VectorXd apply_Q(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const;
  /// Batched apply_B over columns: out.col(p) = B(F.col(p), G.col(p)).
  Eigen::MatrixXd apply_B_columns(const Eigen::MatrixXd& F, const Eigen::MatrixXd& G) const;

  const Eigen::MatrixXd& L1() const { return L1_; }
  const Eigen::MatrixXd& L2() const { return L2_; }
  const Eigen::MatrixXd& L1_cross() const { return Lc_; }
  Eigen::VectorXd L1_two_arg(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const { return L2_ * f + Lc_ * g; }
  const Eigen::MatrixXd& nu_gram() const { return nu_gram_; }

  /// Number of eigenvalues below kernel_threshold * largest eigenvalue.
  int kernel_dimension(const Eigen::MatrixXd& L) const;

  void save(const std::string& path) const;
  static CollisionOperators load(const std::string& path, const HermiteBasis& basis);
  /// Loads from cache_dir when a matching file exists, otherwise assembles and stores.
  static CollisionOperators cached(const HermiteBasis& basis, const CollisionConfig& config,
                                   const std::string& cache_dir);
  std::string cache_key() const;

 private:
  CollisionOperators() = default;
  void assemble(const HermiteBasis& basis, int deg_u, int deg_sigma, std::vector<double>& out) const;
  void derive_linear(const HermiteBasis& basis);

  int K_ = 0;
  int dim_ = 0;
  int quad_order_ = 0;
  int deg_u_ = 0;
  int deg_sigma_ = 0;
  CollisionConfig config_;
  double cert_change_ = -1.0;
  // Full mode: dim^3 entries, layout ((i * dim + j) * dim + k).
  // Linear-only mode: empty; slices live in L2_/Lc_.
  std::vector<double> tensor_;
  Eigen::MatrixXd L1_, L2_, Lc_, nu_gram_;
};

/// Macro-micro projections and moment extraction rows.
struct Projections {
  Eigen::MatrixXd P1;          // onto span{1, v, |v|^2}
  Eigen::MatrixXd P2;          // onto span{1}
  Eigen::RowVectorXd a_row;    // < f, 5/2 - |v|^2/2 >
  std::array<Eigen::RowVectorXd, 3> b_rows;  // < f, v_i >
  Eigen::RowVectorXd c_row;    // < f, |v|^2/6 - 1/2 >
  Eigen::RowVectorXd d_row;    // < g, 1 >
};

Projections make_projections(const HermiteBasis& basis);

struct P1Result {
  double a = 0.0;
  Vec3 b{};
  double c = 0.0;
  Eigen::VectorXd fluid;
  Eigen::VectorXd kinetic;
};
P1Result project_P1(const Projections& p, const Eigen::VectorXd& f);

struct P2Result {
  double d = 0.0;
  Eigen::VectorXd fluid;
  Eigen::VectorXd kinetic;
};
P2Result project_P2(const Projections& p, const Eigen::VectorXd& g);

enum class WhichL { L1, L2 };

/// delta = lambda_min / 2 for L restricted to range(I - P), measured in the nu-weighted Gram.
double coercivity_constant(const CollisionOperators& ops, const Projections& proj, WhichL which);

/// Writes "index,L1,L2" eigenvalue spectra (ascending) as CSV.
void write_spectra_csv(const CollisionOperators& ops, const std::string& path);

}  // namespace vpb
