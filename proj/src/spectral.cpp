#include "spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <mutex>
#include <numbers>

#include "error.hpp"

namespace vpb {

namespace {
// FFTW's planner is not thread-safe; execution with the new-array interface is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

struct SpectralGrid::Plans {
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
  int nreal = 0;
  int ncplx = 0;
};

SpectralGrid::SpectralGrid(int x_dims, int n, double length) : dims_(x_dims), n_(n), length_(length) {
  if (x_dims != 1 && x_dims != 2) usage_error("x_dims must be 1 or 2");
  if (n < 4 || n % 2 != 0) usage_error("modes must be an even integer >= 4");
  if (!(length > 0.0)) usage_error("domain length must be positive");
  const int nh = n / 2 + 1;
  npts_ = dims_ == 1 ? n : n * n;
  ncm_ = dims_ == 1 ? nh : n * nh;
  const double k0 = 2.0 * std::numbers::pi / length;
  const int cut = n / 3;
  k_.resize(ncm_);
  m_.resize(ncm_);
  active_.resize(ncm_);
  pw_.resize(ncm_);
  for (int c = 0; c < ncm_; ++c) {
    int m0, m1;
    if (dims_ == 1) {
      m0 = c;
      m1 = 0;
    } else {
      const int i0 = c / nh;
      m1 = c % nh;
      m0 = i0 <= n / 2 ? i0 : i0 - n;
    }
    m_[c] = {m0, m1};
    k_[c] = {k0 * m0, k0 * m1, 0.0};
    active_[c] = std::abs(m0) <= cut && std::abs(m1) <= cut;
    const int last = dims_ == 1 ? m0 : m1;
    pw_[c] = (last == 0 || last == n / 2) ? 1.0 : 2.0;
  }
  plans_ = std::make_unique<Plans>();
  plans_->nreal = npts_;
  plans_->ncplx = ncm_;
  std::lock_guard<std::mutex> lock(planner_mutex());
  double* in = fftw_alloc_real(npts_);
  fftw_complex* out = fftw_alloc_complex(ncm_);
  if (dims_ == 1) {
    plans_->r2c = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
    plans_->c2r = fftw_plan_dft_c2r_1d(n, out, in, FFTW_ESTIMATE);
  } else {
    plans_->r2c = fftw_plan_dft_r2c_2d(n, n, in, out, FFTW_ESTIMATE);
    plans_->c2r = fftw_plan_dft_c2r_2d(n, n, out, in, FFTW_ESTIMATE);
  }
  fftw_free(in);
  fftw_free(out);
  if (!plans_->r2c || !plans_->c2r) numerical_error("FFTW plan creation failed");
}

SpectralGrid::~SpectralGrid() {
  if (!plans_) return;
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(plans_->r2c);
  fftw_destroy_plan(plans_->c2r);
}

double SpectralGrid::volume() const { return std::pow(length_, dims_); }

int SpectralGrid::index_of(int m0, int m1) const {
  const int nh = n_ / 2 + 1;
  if (dims_ == 1) {
    if (m1 != 0) return -1;
    if (m0 < 0 || m0 > n_ / 2) return -1;
    return m0;
  }
  if (m1 < 0 || m1 > n_ / 2 || std::abs(m0) > n_ / 2) return -1;
  const int i0 = m0 >= 0 ? m0 : m0 + n_;
  return i0 * nh + m1;
}

std::array<double, 2> SpectralGrid::x(int p) const {
  const double h = length_ / n_;
  if (dims_ == 1) return {h * p, 0.0};
  return {h * (p / n_), h * (p % n_)};
}

Field SpectralGrid::forward(const Eigen::VectorXd& u) const {
  if (u.size() != npts_) usage_error("field size does not match grid");
  double* in = fftw_alloc_real(npts_);
  fftw_complex* out = fftw_alloc_complex(ncm_);
  std::memcpy(in, u.data(), sizeof(double) * npts_);
  fftw_execute_dft_r2c(plans_->r2c, in, out);
  Field c(ncm_);
  const double s = 1.0 / npts_;
  for (int i = 0; i < ncm_; ++i) c(i) = std::complex<double>(out[i][0] * s, out[i][1] * s);
  fftw_free(in);
  fftw_free(out);
  return c;
}

Eigen::VectorXd SpectralGrid::backward(const Field& c) const {
  if (c.size() != ncm_) usage_error("coefficient size does not match grid");
  double* outr = fftw_alloc_real(npts_);
  fftw_complex* in = fftw_alloc_complex(ncm_);
  for (int i = 0; i < ncm_; ++i) {
    in[i][0] = c(i).real();
    in[i][1] = c(i).imag();
  }
  fftw_execute_dft_c2r(plans_->c2r, in, outr);
  Eigen::VectorXd u = Eigen::Map<Eigen::VectorXd>(outr, npts_);
  fftw_free(outr);
  fftw_free(in);
  return u;
}

Eigen::MatrixXcd SpectralGrid::forward_rows(const Eigen::MatrixXd& U) const {
  Eigen::MatrixXcd C(U.rows(), ncm_);
  for (Eigen::Index r = 0; r < U.rows(); ++r) C.row(r) = forward(U.row(r).transpose()).transpose();
  return C;
}

Eigen::MatrixXd SpectralGrid::backward_rows(const Eigen::MatrixXcd& C) const {
  Eigen::MatrixXd U(C.rows(), npts_);
  for (Eigen::Index r = 0; r < C.rows(); ++r) U.row(r) = backward(C.row(r).transpose()).transpose();
  return U;
}

void SpectralGrid::dealias(Field& c) const {
  for (int i = 0; i < ncm_; ++i)
    if (!active_[i]) c(i) = 0.0;
}

void SpectralGrid::dealias_rows(Eigen::MatrixXcd& C) const {
  for (int i = 0; i < ncm_; ++i)
    if (!active_[i]) C.col(i).setZero();
}

void SpectralGrid::enforce_reality_rows(Eigen::MatrixXcd& C) const {
  C.col(0) = C.col(0).real().cast<std::complex<double>>();
  if (dims_ == 1) return;
  for (int m0 = 1; m0 < n_ / 2; ++m0) {
    const int a = index_of(m0, 0), b = index_of(-m0, 0);
    const Eigen::VectorXcd avg = 0.5 * (C.col(a) + C.col(b).conjugate());
    C.col(a) = avg;
    C.col(b) = avg.conjugate();
  }
}

double SpectralGrid::l2_sq(const Field& c) const {
  double s = 0.0;
  for (int i = 0; i < ncm_; ++i) s += pw_[i] * std::norm(c(i));
  return s * volume();
}

double SpectralGrid::inner(const Field& a, const Field& b) const {
  double s = 0.0;
  for (int i = 0; i < ncm_; ++i) s += pw_[i] * (std::conj(a(i)) * b(i)).real();
  return s * volume();
}

double SpectralGrid::derivative_weight(int c, int j) const {
  // complete homogeneous symmetric polynomial of degree j in (k0^2, k1^2)
  const double a = k_[c][0] * k_[c][0], b = k_[c][1] * k_[c][1];
  double s = 0.0;
  for (int p = 0; p <= j; ++p) s += std::pow(a, p) * std::pow(b, j - p);
  return s;
}

double SpectralGrid::hs_sq(const Field& c, int s) const {
  double acc = 0.0;
  for (int i = 0; i < ncm_; ++i) {
    double w = 0.0;
    for (int j = 0; j <= s; ++j) w += derivative_weight(i, j);
    acc += pw_[i] * w * std::norm(c(i));
  }
  return acc * volume();
}

std::array<Field, 3> gradient(const SpectralGrid& grid, const Field& c) {
  std::array<Field, 3> g;
  const std::complex<double> I(0.0, 1.0);
  for (int d = 0; d < 3; ++d) {
    g[d] = Field::Zero(c.size());
    if (d >= grid.x_dims()) continue;
    for (int i = 0; i < grid.n_cmodes(); ++i) g[d](i) = I * grid.k(i)[d] * c(i);
  }
  return g;
}

Field divergence(const SpectralGrid& grid, const std::array<Field, 3>& u) {
  const std::complex<double> I(0.0, 1.0);
  Field out = Field::Zero(grid.n_cmodes());
  for (int d = 0; d < grid.x_dims(); ++d)
    for (int i = 0; i < grid.n_cmodes(); ++i) out(i) += I * grid.k(i)[d] * u[d](i);
  return out;
}

Field solve_poisson(const SpectralGrid& grid, const Field& rhs) {
  Field phi = Field::Zero(grid.n_cmodes());
  for (int i = 1; i < grid.n_cmodes(); ++i) {
    const double k2 = grid.k2(i);
    if (k2 > 0.0) phi(i) = -rhs(i) / k2;
  }
  return phi;
}

Field multiply(const SpectralGrid& grid, const Field& a, const Field& b) {
  Field aa = a, bb = b;
  grid.dealias(aa);
  grid.dealias(bb);
  Field out = grid.forward(grid.backward(aa).cwiseProduct(grid.backward(bb)));
  grid.dealias(out);
  return out;
}

double hs_sq(const SpectralGrid& grid, const std::array<Field, 3>& u, int s) {
  double acc = 0.0;
  for (const auto& c : u) acc += grid.hs_sq(c, s);
  return acc;
}

}  // namespace vpb
