#include "quadrature.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "error.hpp"

namespace vpb {

namespace {

// Golub-Welsch: nodes are eigenvalues of the Jacobi matrix, weights are
// mu0 times the squared first eigenvector components.
GaussRule golub_welsch(const Eigen::VectorXd& diag, const Eigen::VectorXd& offdiag, double mu0) {
  const auto n = diag.size();
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    jacobi(i, i) = diag(i);
    if (i + 1 < n) {
      jacobi(i, i + 1) = offdiag(i);
      jacobi(i + 1, i) = offdiag(i);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  if (eig.info() != Eigen::Success) numerical_error("Golub-Welsch eigensolve failed");
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    rule.nodes[i] = eig.eigenvalues()(i);
    const double v0 = eig.eigenvectors()(0, i);
    rule.weights[i] = mu0 * v0 * v0;
  }
  return rule;
}

// One Newton polish of Hermite (probabilists') nodes using the three-term
// recurrence; weights recomputed from the derivative of the orthonormal
// polynomial for full double accuracy.
void polish_hermite_prob(GaussRule& rule) {
  const int n = static_cast<int>(rule.size());
  for (int i = 0; i < n; ++i) {
    double x = rule.nodes[i];
    double hn = 0.0, hn1 = 0.0;
    for (int iter = 0; iter < 3; ++iter) {
      // orthonormal h_k: h_{k+1} = (x h_k - sqrt(k) h_{k-1}) / sqrt(k+1)
      double hm1 = 0.0, h = 1.0;
      for (int k = 0; k < n; ++k) {
        const double next = (x * h - std::sqrt(static_cast<double>(k)) * hm1) / std::sqrt(k + 1.0);
        hm1 = h;
        h = next;
      }
      hn = h;     // h_n
      hn1 = hm1;  // h_{n-1}
      // h_n' = sqrt(n) h_{n-1}
      const double d = std::sqrt(static_cast<double>(n)) * hn1;
      x -= hn / d;
    }
    rule.nodes[i] = x;
    // w_i = 1 / (n h_{n-1}(x_i)^2) for the normalized weight
    double hm1 = 0.0, h = 1.0;
    for (int k = 0; k < n - 1; ++k) {
      const double next = (x * h - std::sqrt(static_cast<double>(k)) * hm1) / std::sqrt(k + 1.0);
      hm1 = h;
      h = next;
    }
    rule.weights[i] = 1.0 / (n * h * h);
  }
}

}  // namespace

GaussRule gauss_hermite_prob(int n) {
  if (n < 1) usage_error("gauss_hermite_prob: n must be positive");
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd off(std::max(n - 1, 0));
  for (int i = 0; i + 1 < n; ++i) off(i) = std::sqrt(i + 1.0);
  GaussRule rule = golub_welsch(diag, off, 1.0);
  polish_hermite_prob(rule);
  return rule;
}

GaussRule gauss_hermite_phys(int n) {
  GaussRule rule = gauss_hermite_prob(n);
  const double scale = std::sqrt(std::numbers::pi);
  for (std::size_t i = 0; i < rule.size(); ++i) {
    rule.nodes[i] /= std::numbers::sqrt2;
    rule.weights[i] *= scale;
  }
  return rule;
}

GaussRule gauss_laguerre(int n, double alpha) {
  if (n < 1) usage_error("gauss_laguerre: n must be positive");
  if (alpha <= -1.0) usage_error("gauss_laguerre: alpha must exceed -1");
  Eigen::VectorXd diag(n);
  Eigen::VectorXd off(std::max(n - 1, 0));
  for (int i = 0; i < n; ++i) diag(i) = 2.0 * i + alpha + 1.0;
  for (int i = 0; i + 1 < n; ++i) off(i) = std::sqrt((i + 1.0) * (i + 1.0 + alpha));
  return golub_welsch(diag, off, std::tgamma(alpha + 1.0));
}

GaussRule gauss_legendre(int n, double a, double b) {
  if (n < 1) usage_error("gauss_legendre: n must be positive");
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd off(std::max(n - 1, 0));
  for (int i = 0; i + 1 < n; ++i) {
    const double k = i + 1.0;
    off(i) = k / std::sqrt(4.0 * k * k - 1.0);
  }
  GaussRule rule = golub_welsch(diag, off, 2.0);
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (b + a);
  for (std::size_t i = 0; i < rule.size(); ++i) {
    rule.nodes[i] = mid + half * rule.nodes[i];
    rule.weights[i] *= half;
  }
  return rule;
}

SphereRule sphere_rule(int degree) {
  if (degree < 0) usage_error("sphere_rule: degree must be non-negative");
  const int n_theta = degree / 2 + 1;  // Gauss-Legendre exact to 2n-1 >= degree
  const int n_phi = degree + 1;        // trapezoid exact for trig degree <= degree
  const GaussRule gl = gauss_legendre(n_theta);
  SphereRule rule;
  rule.degree = degree;
  rule.points.reserve(static_cast<std::size_t>(n_theta) * n_phi);
  rule.weights.reserve(static_cast<std::size_t>(n_theta) * n_phi);
  const double dphi = 2.0 * std::numbers::pi / n_phi;
  for (int it = 0; it < n_theta; ++it) {
    const double c = gl.nodes[it];
    const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
    for (int ip = 0; ip < n_phi; ++ip) {
      const double phi = (ip + 0.5) * dphi;
      rule.points.push_back({s * std::cos(phi), s * std::sin(phi), c});
      rule.weights.push_back(gl.weights[it] * dphi);
    }
  }
  return rule;
}

}  // namespace vpb
