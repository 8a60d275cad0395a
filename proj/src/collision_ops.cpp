#include "collision_ops.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "binary_io.hpp"
#include "error.hpp"
#include "quadrature.hpp"

namespace vpb {

namespace {

constexpr char kOpsMagic[4] = {'V', 'P', 'B', 'C'};
constexpr std::uint32_t kOpsVersion = 1;
// Fixed partition of the center-of-mass grid; partial sums are reduced in
// block order so the result does not depend on the thread count.
constexpr int kBlocks = 8;

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

// Center-of-mass / relative coordinates w = (v + v_*)/2, u = v - v_* = r u_hat.
// For hard spheres the omega integral becomes
//   int F(v') |u . omega| d omega = (|u| / 2) int_{S^2} F(w + r sigma / 2) d sigma,
// and with s = r^2/4 the measure M M_* dv dv_* (r/2) turns into
//   (2 pi)^{-3} e^{-|w|^2} dw * 4 s e^{-s} ds * du_hat.
// Every factor is a polynomial against a Gauss weight, so product Gauss rules
// integrate the tensor exactly.
void CollisionOperators::assemble(const HermiteBasis& basis, int deg_u, int deg_sigma,
                                  std::vector<double>& out) const {
  const int d = dim_;
  const int nw = (3 * K_ + 2) / 2;
  const int ns = (3 * K_ / 2 + 2) / 2;
  const GaussRule w1 = gauss_hermite_phys(nw);
  const GaussRule sr = gauss_laguerre(ns, 1.0);
  const SphereRule su = sphere_rule(deg_u);
  const SphereRule ss = sphere_rule(deg_sigma);
  const double norm = std::pow(2.0 * std::numbers::pi, -3.0) * 4.0 * config_.cross_section;
  const double four_pi = 4.0 * std::numbers::pi;
  const bool linear = config_.linear_only;
  const int ncols = linear ? 2 * d : d * d;

  const int nw3 = nw * nw * nw;
  const int nu = static_cast<int>(su.size());
  std::vector<RowMajor> partial(kBlocks, RowMajor::Zero(ncols, d));

#pragma omp parallel for schedule(dynamic, 1)
  for (int blk = 0; blk < kBlocks; ++blk) {
    RowMajor& acc = partial[blk];
    Eigen::MatrixXd H(nu, ncols);
    Eigen::MatrixXd Eloss(nu, d);
    Eigen::VectorXd ev(d), es(d), ep(d), gain(d);
    for (int iw = blk; iw < nw3; iw += kBlocks) {
      const int a = iw / (nw * nw), b = (iw / nw) % nw, c = iw % nw;
      const Vec3 w{w1.nodes[a], w1.nodes[b], w1.nodes[c]};
      const double ww = w1.weights[a] * w1.weights[b] * w1.weights[c];
      for (int is = 0; is < ns; ++is) {
        const double r = 2.0 * std::sqrt(sr.nodes[is]);
        const double wt = norm * ww * sr.weights[is];
        gain.setZero();
        for (std::size_t q = 0; q < ss.size(); ++q) {
          const auto& sg = ss.points[q];
          basis.evaluate_into({w[0] + 0.5 * r * sg[0], w[1] + 0.5 * r * sg[1], w[2] + 0.5 * r * sg[2]}, ep.data());
          gain += ss.weights[q] * ep;
        }
        for (int q = 0; q < nu; ++q) {
          const auto& uh = su.points[q];
          const Vec3 v{w[0] + 0.5 * r * uh[0], w[1] + 0.5 * r * uh[1], w[2] + 0.5 * r * uh[2]};
          const Vec3 vs{w[0] - 0.5 * r * uh[0], w[1] - 0.5 * r * uh[1], w[2] - 0.5 * r * uh[2]};
          basis.evaluate_into(v, ev.data());
          basis.evaluate_into(vs, es.data());
          const double wq = wt * su.weights[q];
          if (linear) {
            // columns: (i, 0) pairs then (0, j) pairs
            H.row(q).head(d) = wq * ev.transpose();
            H.row(q).tail(d) = wq * es.transpose();
          } else {
            for (int i = 0; i < d; ++i) H.row(q).segment(i * d, d) = (wq * ev(i)) * es.transpose();
          }
          Eloss.row(q) = ev.transpose();
        }
        acc.noalias() += H.colwise().sum().transpose() * gain.transpose();
        acc.noalias() -= four_pi * H.transpose() * Eloss;
      }
    }
  }
  RowMajor total = RowMajor::Zero(ncols, d);
  for (const auto& p : partial) total += p;
  out.assign(total.data(), total.data() + total.size());
}

CollisionOperators::CollisionOperators(const HermiteBasis& basis, const CollisionConfig& config)
    : K_(basis.degree_cutoff()), dim_(basis.dim()), quad_order_(basis.quad_order()), config_(config) {
  if (config.cross_section <= 0.0) usage_error("cross_section must be positive");
  const int exact_u = config.linear_only ? 2 * K_ : 3 * K_;
  deg_u_ = config.sphere_degree_u > 0 ? config.sphere_degree_u : exact_u;
  deg_sigma_ = config.sphere_degree_sigma > 0 ? config.sphere_degree_sigma : K_;

  std::vector<double> raw;
  assemble(basis, deg_u_, deg_sigma_, raw);
  if (config.certify) {
    std::vector<double> fine;
    assemble(basis, 2 * deg_u_, 2 * deg_sigma_, fine);
    double scale = 0.0, diff = 0.0;
    for (std::size_t n = 0; n < raw.size(); ++n) {
      scale = std::max(scale, std::abs(fine[n]));
      diff = std::max(diff, std::abs(fine[n] - raw[n]));
    }
    cert_change_ = scale > 0.0 ? diff / scale : 0.0;
    if (cert_change_ > config.certify_tol) {
      std::ostringstream msg;
      msg << "collision tensor not converged: doubling the sphere rule changed entries by " << cert_change_
          << " (relative), tolerance " << config.certify_tol;
      numerical_error(msg.str());
    }
  }

  const int d = dim_;
  L2_.resize(d, d);
  Lc_.resize(d, d);
  if (config.linear_only) {
    // raw rows 0..d-1 hold (i, 0), rows d..2d-1 hold (0, j); columns k
    for (int i = 0; i < d; ++i)
      for (int k = 0; k < d; ++k) {
        L2_(k, i) = -2.0 * raw[static_cast<std::size_t>(i) * d + k];
        Lc_(k, i) = -2.0 * raw[static_cast<std::size_t>(d + i) * d + k];
      }
  } else {
    tensor_ = std::move(raw);
  }
  derive_linear(basis);
}

void CollisionOperators::derive_linear(const HermiteBasis& basis) {
  const int d = dim_;
  if (has_tensor()) {
    L2_.resize(d, d);
    Lc_.resize(d, d);
    for (int i = 0; i < d; ++i)
      for (int k = 0; k < d; ++k) {
        L2_(k, i) = -2.0 * B(k, i, 0);
        Lc_(k, i) = -2.0 * B(k, 0, i);
      }
  }
  L1_ = L2_ + Lc_;
  nu_gram_ = config_.cross_section * basis.nu_gram();
}

std::string CollisionOperators::sphere_rule_description() const {
  std::ostringstream s;
  s << "product Gauss-Legendre x trapezoid; relative-direction degree " << deg_u_ << " ("
    << sphere_rule(deg_u_).size() << " points), scattering degree " << deg_sigma_ << " ("
    << sphere_rule(deg_sigma_).size() << " points)";
  return s.str();
}

Eigen::VectorXd CollisionOperators::apply_B(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const {
  Eigen::MatrixXd F = f, G = g;
  return apply_B_columns(F, G).col(0);
}

Eigen::VectorXd CollisionOperators::apply_Q(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const {
  return apply_B(f, g) + apply_B(g, f);
}

Eigen::MatrixXd CollisionOperators::apply_B_columns(const Eigen::MatrixXd& F, const Eigen::MatrixXd& G) const {
  if (!has_tensor()) usage_error("collision operators were assembled without the bilinear tensor");
  const int d = dim_;
  const auto np = F.cols();
  Eigen::Map<const RowMajor> T(tensor_.data(), static_cast<Eigen::Index>(d) * d, d);
  // out_k = sum_i F_i sum_j T[(i,j), k] G_j, one i-slice at a time
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, np);
  for (int i = 0; i < d; ++i) {
    // T_i is d(j) x d(k)
    const auto Ti = T.middleRows(static_cast<Eigen::Index>(i) * d, d);
    out.noalias() += (Ti.transpose() * G) * F.row(i).asDiagonal();
  }
  return out;
}

int CollisionOperators::kernel_dimension(const Eigen::MatrixXd& L) const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (L + L.transpose()), Eigen::EigenvaluesOnly);
  const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
  int n = 0;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i)
    if (std::abs(eig.eigenvalues()(i)) < config_.kernel_threshold * top) ++n;
  return n;
}

std::string CollisionOperators::cache_key() const {
  std::ostringstream s;
  s << "ops_K" << K_ << "_q" << quad_order_ << "_u" << deg_u_ << "_s" << deg_sigma_ << (config_.linear_only ? "_lin" : "_full")
    << "_x" << std::setprecision(17) << config_.cross_section << ".bin";
  return s.str();
}

void CollisionOperators::save(const std::string& path) const {
  BinaryWriter header;
  header.put<std::int32_t>(K_);
  header.put<std::int32_t>(quad_order_);
  header.put<std::int32_t>(deg_u_);
  header.put<std::int32_t>(deg_sigma_);
  header.put<std::int32_t>(config_.linear_only ? 1 : 0);
  header.put<double>(config_.cross_section);
  header.put<double>(cert_change_);
  BinaryWriter payload;
  payload.put_vector(tensor_);
  payload.put_matrix(L2_);
  payload.put_matrix(Lc_);
  write_versioned_file(path, kOpsMagic, kOpsVersion, header, payload);
}

CollisionOperators CollisionOperators::load(const std::string& path, const HermiteBasis& basis) {
  VersionedFile file = read_versioned_file(path, kOpsMagic);
  if (file.version != kOpsVersion) io_error("'" + path + "' has unsupported operator cache version");
  CollisionOperators ops;
  ops.K_ = file.header.get<std::int32_t>();
  ops.quad_order_ = file.header.get<std::int32_t>();
  ops.deg_u_ = file.header.get<std::int32_t>();
  ops.deg_sigma_ = file.header.get<std::int32_t>();
  ops.config_.linear_only = file.header.get<std::int32_t>() != 0;
  ops.config_.cross_section = file.header.get<double>();
  ops.cert_change_ = file.header.get<double>();
  ops.config_.sphere_degree_u = ops.deg_u_;
  ops.config_.sphere_degree_sigma = ops.deg_sigma_;
  if (ops.K_ != basis.degree_cutoff() || ops.quad_order_ != basis.quad_order())
    io_error("'" + path + "' was built for a different basis");
  ops.dim_ = basis.dim();
  ops.tensor_ = file.payload.get_vector();
  ops.L2_ = file.payload.get_matrix();
  ops.Lc_ = file.payload.get_matrix();
  const auto d = static_cast<std::size_t>(ops.dim_);
  if ((!ops.tensor_.empty() && ops.tensor_.size() != d * d * d) || ops.L2_.rows() != ops.dim_ ||
      ops.Lc_.rows() != ops.dim_)
    io_error("'" + path + "' is inconsistent with its header");
  ops.derive_linear(basis);
  return ops;
}

CollisionOperators CollisionOperators::cached(const HermiteBasis& basis, const CollisionConfig& config,
                                              const std::string& cache_dir) {
  if (cache_dir.empty()) return CollisionOperators(basis, config);
  // Probe the key without assembling: build a shell with the resolved degrees.
  CollisionOperators probe;
  probe.K_ = basis.degree_cutoff();
  probe.quad_order_ = basis.quad_order();
  probe.config_ = config;
  probe.deg_u_ = config.sphere_degree_u > 0 ? config.sphere_degree_u : (config.linear_only ? 2 : 3) * probe.K_;
  probe.deg_sigma_ = config.sphere_degree_sigma > 0 ? config.sphere_degree_sigma : probe.K_;
  const auto path = (std::filesystem::path(cache_dir) / probe.cache_key()).string();
  if (std::filesystem::exists(path)) {
    CollisionOperators ops = load(path, basis);
    ops.config_.kernel_threshold = config.kernel_threshold;
    ops.config_.certify = config.certify;
    ops.config_.certify_tol = config.certify_tol;
    return ops;
  }
  CollisionOperators ops(basis, config);
  std::error_code ec;
  std::filesystem::create_directories(cache_dir, ec);
  if (ec) io_error("cannot create cache directory '" + cache_dir + "': " + ec.message());
  ops.save(path);
  return ops;
}

Projections make_projections(const HermiteBasis& basis) {
  const int d = basis.dim();
  Projections p;
  const Eigen::VectorXd one = basis.monomial({0, 0, 0});
  std::array<Eigen::VectorXd, 3> v;
  for (int i = 0; i < 3; ++i) {
    std::array<int, 3> e{0, 0, 0};
    e[i] = 1;
    v[i] = basis.monomial(e);
  }
  const Eigen::VectorXd vsq = basis.monomial({2, 0, 0}) + basis.monomial({0, 2, 0}) + basis.monomial({0, 0, 2});
  const Eigen::VectorXd energy = (vsq - 3.0 * one) / std::sqrt(6.0);
  p.P1 = one * one.transpose() + energy * energy.transpose();
  for (int i = 0; i < 3; ++i) p.P1 += v[i] * v[i].transpose();
  p.P2 = one * one.transpose();
  p.a_row = (2.5 * one - 0.5 * vsq).transpose();
  for (int i = 0; i < 3; ++i) p.b_rows[i] = v[i].transpose();
  p.c_row = (vsq / 6.0 - 0.5 * one).transpose();
  p.d_row = one.transpose();
  (void)d;
  return p;
}

P1Result project_P1(const Projections& p, const Eigen::VectorXd& f) {
  P1Result r;
  r.a = p.a_row.dot(f);
  for (int i = 0; i < 3; ++i) r.b[i] = p.b_rows[i].dot(f);
  r.c = p.c_row.dot(f);
  r.fluid = p.P1 * f;
  r.kinetic = f - r.fluid;
  return r;
}

P2Result project_P2(const Projections& p, const Eigen::VectorXd& g) {
  P2Result r;
  r.d = p.d_row.dot(g);
  r.fluid = p.P2 * g;
  r.kinetic = g - r.fluid;
  return r;
}

double coercivity_constant(const CollisionOperators& ops, const Projections& proj, WhichL which) {
  const Eigen::MatrixXd& L = which == WhichL::L1 ? ops.L1() : ops.L2();
  const Eigen::MatrixXd& P = which == WhichL::L1 ? proj.P1 : proj.P2;
  const int d = ops.dim();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> pe(Eigen::MatrixXd::Identity(d, d) - P);
  std::vector<int> cols;
  for (int i = 0; i < d; ++i)
    if (pe.eigenvalues()(i) > 0.5) cols.push_back(i);
  Eigen::MatrixXd Z(d, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) Z.col(static_cast<Eigen::Index>(c)) = pe.eigenvectors().col(cols[c]);
  const Eigen::MatrixXd A = Z.transpose() * (0.5 * (L + L.transpose())) * Z;
  const Eigen::MatrixXd Bm = Z.transpose() * ops.nu_gram() * Z;
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ge(A, Bm, Eigen::EigenvaluesOnly);
  if (ge.info() != Eigen::Success) numerical_error("coercivity eigenproblem failed");
  const double delta = 0.5 * ge.eigenvalues().minCoeff();
  if (!(delta > 0.0)) {
    std::ostringstream msg;
    msg << "coercivity constant is not positive (" << delta << "); operator assembly is inconsistent";
    numerical_error(msg.str());
  }
  return delta;
}

void write_spectra_csv(const CollisionOperators& ops, const std::string& path) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e1(0.5 * (ops.L1() + ops.L1().transpose()), Eigen::EigenvaluesOnly);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e2(0.5 * (ops.L2() + ops.L2().transpose()), Eigen::EigenvaluesOnly);
  std::ofstream out(path);
  if (!out) io_error("cannot open '" + path + "' for writing");
  out << "index,L1,L2\n" << std::setprecision(17);
  for (int i = 0; i < ops.dim(); ++i) out << i << ',' << e1.eigenvalues()(i) << ',' << e2.eigenvalues()(i) << '\n';
  if (!out) io_error("write failed for '" + path + "'");
}

}  // namespace vpb
