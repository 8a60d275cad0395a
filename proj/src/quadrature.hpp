#pragma once

#include <array>
#include <vector>

namespace vpb {

/// One-dimensional Gauss rule: nodes and weights.
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  std::size_t size() const { return nodes.size(); }
};

/// Gauss rule for the probabilists' weight exp(-x^2/2)/sqrt(2*pi); weights sum to 1.
GaussRule gauss_hermite_prob(int n);

/// Gauss rule for the physicists' weight exp(-x^2); weights sum to sqrt(pi).
GaussRule gauss_hermite_phys(int n);

/// Generalized Gauss-Laguerre rule for x^alpha exp(-x) on [0, inf).
GaussRule gauss_laguerre(int n, double alpha);

/// Gauss-Legendre rule on [a, b].
GaussRule gauss_legendre(int n, double a = -1.0, double b = 1.0);

/// Product rule on the unit sphere S^2 (Gauss-Legendre in cos(theta) times
/// trapezoid in phi). Weights sum to 4*pi.
struct SphereRule {
  std::vector<std::array<double, 3>> points;
  std::vector<double> weights;
  int degree = 0;  // integrates every polynomial of this total degree exactly
  std::size_t size() const { return points.size(); }
};

SphereRule sphere_rule(int degree);

}  // namespace vpb
