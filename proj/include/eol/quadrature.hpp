#pragma once

#include "eol/common.hpp"

#include <cmath>
#include <functional>

namespace eol {

/// A fixed quadrature rule: integral ~= weights.dot(f(nodes)).
struct QuadratureRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;

  template <typename F>
  double integrate(F&& f) const {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < nodes.size(); ++i) sum += weights[i] * f(nodes[i]);
    return sum;
  }
};

/// Gauss-Hermite rule for the standard normal weight: sum(weights) == 1 and
/// the rule is exact for polynomials of degree <= 2n-1 against N(0,1).
const QuadratureRule& gauss_hermite(int n);

/// Gauss-Legendre rule on [a, b].
QuadratureRule gauss_legendre(int n, double a = -1.0, double b = 1.0);

/// Composite Gauss-Legendre: `panels` equal panels of `order` nodes each.
QuadratureRule composite_gauss_legendre(int panels, int order, double a, double b);

/// Periodic trapezoid rule on [0, period): n equispaced nodes, weight 1/n
/// (integrates against the normalized uniform measure).
QuadratureRule periodic_trapezoid(int n, double period = kTwoPi);

/// Adaptive Simpson with Richardson correction. Throws DivergentIntegral
/// when the recursion depth is exhausted without meeting the tolerance.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                        int max_depth = 50);

}  // namespace eol
