#include "velocity_basis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "binary_io.hpp"
#include "error.hpp"
#include "quadrature.hpp"

namespace vpb {

namespace {

constexpr char kBasisMagic[4] = {'V', 'P', 'B', 'H'};
constexpr std::uint32_t kBasisVersion = 1;

double norm3(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

}  // namespace

QuadratureGrid make_quadrature_grid(int order_per_axis) {
  if (order_per_axis < 1) usage_error("quadrature order must be positive");
  const GaussRule rule = gauss_hermite_prob(order_per_axis);
  QuadratureGrid grid;
  grid.order_per_axis = order_per_axis;
  const std::size_t n = rule.size();
  grid.nodes.reserve(n * n * n);
  grid.weights.reserve(n * n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k) {
        grid.nodes.push_back({rule.nodes[i], rule.nodes[j], rule.nodes[k]});
        grid.weights.push_back(rule.weights[i] * rule.weights[j] * rule.weights[k]);
      }
  return grid;
}

double maxwellian(const Vec3& v) {
  const double r2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
  return std::exp(-0.5 * r2) / std::pow(2.0 * std::numbers::pi, 1.5);
}

double collision_frequency(const Vec3& v) {
  const double r = norm3(v);
  const double s = std::sqrt(2.0 / std::numbers::pi);
  if (r < 1e-8) return 2.0 * s;
  return s * std::exp(-0.5 * r * r) + (r + 1.0 / r) * std::erf(r / std::numbers::sqrt2);
}

NuBounds fit_nu_bounds(const QuadratureGrid& grid) {
  NuBounds b{std::numeric_limits<double>::infinity(), 0.0};
  for (const auto& v : grid.nodes) {
    const double ratio = collision_frequency(v) / (1.0 + norm3(v));
    b.c1 = std::min(b.c1, ratio);
    b.c2 = std::max(b.c2, ratio);
  }
  return b;
}

HermiteBasis::HermiteBasis(int degree_cutoff, int quad_order) : K_(degree_cutoff) {
  if (degree_cutoff < 2) usage_error("degree cutoff K must be >= 2");
  if (quad_order < degree_cutoff + 2)
    usage_error("quad_order " + std::to_string(quad_order) +
                " cannot integrate degree-2K polynomials exactly for K=" + std::to_string(degree_cutoff) +
                " (need quad_order >= K+2)");
  grid_ = make_quadrature_grid(quad_order);
  build_index();
  assemble();
}

void HermiteBasis::build_index() {
  index_map_.clear();
  lookup_.clear();
  for (int deg = 0; deg <= K_; ++deg)
    for (int a = deg; a >= 0; --a)
      for (int b = deg - a; b >= 0; --b) {
        const int c = deg - a - b;
        lookup_[{a, b, c}] = static_cast<int>(index_map_.size());
        index_map_.push_back({a, b, c});
      }
}

int HermiteBasis::index_of(const std::array<int, 3>& k) const {
  if (k[0] < 0 || k[1] < 0 || k[2] < 0) return -1;
  auto it = lookup_.find(k);
  return it == lookup_.end() ? -1 : it->second;
}

int HermiteBasis::total_degree(int i) const {
  const auto& k = index_map_[i];
  return k[0] + k[1] + k[2];
}

void HermiteBasis::evaluate_into(const Vec3& v, double* out) const {
  // per-axis orthonormal Hermite values h_0..h_K
  double h[3][32];
  for (int ax = 0; ax < 3; ++ax) {
    h[ax][0] = 1.0;
    if (K_ >= 1) h[ax][1] = v[ax];
    for (int n = 1; n < K_; ++n)
      h[ax][n + 1] = (v[ax] * h[ax][n] - std::sqrt(static_cast<double>(n)) * h[ax][n - 1]) / std::sqrt(n + 1.0);
  }
  const int d = dim();
  for (int i = 0; i < d; ++i) {
    const auto& k = index_map_[i];
    out[i] = h[0][k[0]] * h[1][k[1]] * h[2][k[2]];
  }
}

Eigen::VectorXd HermiteBasis::evaluate(const Vec3& v) const {
  Eigen::VectorXd out(dim());
  evaluate_into(v, out.data());
  return out;
}

void HermiteBasis::assemble() {
  if (K_ > 30) usage_error("degree cutoff K too large");
  const int d = dim();
  for (int ax = 0; ax < 3; ++ax) {
    mult_[ax] = Eigen::MatrixXd::Zero(d, d);
    deriv_[ax] = Eigen::MatrixXd::Zero(d, d);
    for (int a = 0; a < d; ++a) {
      auto up = index_map_[a];
      const int n = up[ax];
      up[ax] = n + 1;
      if (int b = index_of(up); b >= 0) mult_[ax](b, a) = std::sqrt(n + 1.0);
      if (n > 0) {
        auto down = index_map_[a];
        down[ax] = n - 1;
        const int b = index_of(down);
        mult_[ax](b, a) = std::sqrt(static_cast<double>(n));
        deriv_[ax](b, a) = std::sqrt(static_cast<double>(n));
      }
    }
  }
  const auto nq = static_cast<Eigen::Index>(grid_.size());
  values_.resize(d, nq);
  Eigen::VectorXd nu_w(nq);
  for (Eigen::Index q = 0; q < nq; ++q) {
    evaluate_into(grid_.nodes[q], values_.col(q).data());
    nu_w(q) = grid_.weights[q] * collision_frequency(grid_.nodes[q]);
  }
  nu_gram_ = values_ * nu_w.asDiagonal() * values_.transpose();
  nu_gram_ = 0.5 * (nu_gram_ + nu_gram_.transpose()).eval();
}

Eigen::VectorXd HermiteBasis::monomial(const std::array<int, 3>& powers) const {
  if (powers[0] + powers[1] + powers[2] > K_) usage_error("monomial degree exceeds basis cutoff");
  Eigen::VectorXd c = Eigen::VectorXd::Zero(dim());
  c(0) = 1.0;
  for (int ax = 0; ax < 3; ++ax)
    for (int p = 0; p < powers[ax]; ++p) c = mult_[ax] * c;
  return c;
}

Eigen::MatrixXd HermiteBasis::quadrature_gram() const {
  Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(grid_.weights.data(), grid_.weights.size());
  return values_ * w.asDiagonal() * values_.transpose();
}

void HermiteBasis::save(const std::string& path) const {
  BinaryWriter header;
  header.put<std::int32_t>(K_);
  header.put<std::int32_t>(grid_.order_per_axis);
  BinaryWriter payload;
  for (int ax = 0; ax < 3; ++ax) payload.put_matrix(mult_[ax]);
  for (int ax = 0; ax < 3; ++ax) payload.put_matrix(deriv_[ax]);
  payload.put_matrix(nu_gram_);
  write_versioned_file(path, kBasisMagic, kBasisVersion, header, payload);
}

HermiteBasis HermiteBasis::load(const std::string& path) {
  VersionedFile file = read_versioned_file(path, kBasisMagic);
  if (file.version != kBasisVersion) io_error("'" + path + "' has unsupported basis cache version");
  HermiteBasis b;
  b.K_ = file.header.get<std::int32_t>();
  const int order = file.header.get<std::int32_t>();
  if (b.K_ < 2 || order < b.K_ + 2) io_error("'" + path + "' has an invalid basis header");
  b.grid_ = make_quadrature_grid(order);
  b.build_index();
  for (int ax = 0; ax < 3; ++ax) b.mult_[ax] = file.payload.get_matrix();
  for (int ax = 0; ax < 3; ++ax) b.deriv_[ax] = file.payload.get_matrix();
  b.nu_gram_ = file.payload.get_matrix();
  if (b.nu_gram_.rows() != b.dim()) io_error("'" + path + "' does not match its header");
  const auto nq = static_cast<Eigen::Index>(b.grid_.size());
  b.values_.resize(b.dim(), nq);
  for (Eigen::Index q = 0; q < nq; ++q) b.evaluate_into(b.grid_.nodes[q], b.values_.col(q).data());
  return b;
}

bool HermiteBasis::operator==(const HermiteBasis& o) const {
  if (K_ != o.K_ || grid_.order_per_axis != o.grid_.order_per_axis) return false;
  for (int ax = 0; ax < 3; ++ax)
    if (mult_[ax] != o.mult_[ax] || deriv_[ax] != o.deriv_[ax]) return false;
  return nu_gram_ == o.nu_gram_;
}

MomentVectors thirteen_moments(const HermiteBasis& basis) {
  if (basis.degree_cutoff() < 3) usage_error("thirteen moments need K >= 3");
  MomentVectors m;
  const int d = basis.dim();
  m.one = basis.monomial({0, 0, 0});
  for (int i = 0; i < 3; ++i) {
    std::array<int, 3> p{0, 0, 0};
    p[i] = 1;
    m.v[i] = basis.monomial(p);
  }
  m.v_sq = basis.monomial({2, 0, 0}) + basis.monomial({0, 2, 0}) + basis.monomial({0, 0, 2});
  m.psi = 0.5 * m.v_sq - 1.5 * m.one;
  m.theta_test = m.v_sq / 3.0 - m.one;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      std::array<int, 3> p{0, 0, 0};
      p[i] += 1;
      p[j] += 1;
      m.A[i][j] = basis.monomial(p);
      if (i == j) m.A[i][j] -= m.v_sq / 3.0;
    }
    m.v_vsq[i] = basis.mult(i) * m.v_sq;
    m.B[i] = 0.5 * m.v_vsq[i] - 2.5 * m.v[i];
  }
  m.thirteen_raw.resize(d, 13);
  int col = 0;
  m.thirteen_raw.col(col++) = m.one;
  for (int i = 0; i < 3; ++i) m.thirteen_raw.col(col++) = m.v[i];
  for (int i = 0; i < 3; ++i) {
    std::array<int, 3> p{0, 0, 0};
    p[i] = 2;
    m.thirteen_raw.col(col++) = basis.monomial(p);
  }
  for (int i = 0; i < 3; ++i) m.thirteen_raw.col(col++) = m.v_vsq[i];
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) m.thirteen_raw.col(col++) = m.A[i][j];
  // modified Gram-Schmidt, twice for stability
  m.thirteen = m.thirteen_raw;
  for (int pass = 0; pass < 2; ++pass)
    for (int c = 0; c < 13; ++c) {
      for (int p = 0; p < c; ++p) m.thirteen.col(c) -= m.thirteen.col(p).dot(m.thirteen.col(c)) * m.thirteen.col(p);
      const double n = m.thirteen.col(c).norm();
      if (n < 1e-12) numerical_error("thirteen-moments family is rank deficient");
      m.thirteen.col(c) /= n;
    }
  return m;
}

}  // namespace vpb
