#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

namespace eol {

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Inverse of the standard normal CDF. Acklam's rational approximation
/// followed by one Halley step; accurate to a few ulps on (0, 1).
double normal_quantile(double u);

/// Normalized probabilists' Hermite functions h_k = He_k / sqrt(k!)
/// for k = 0..n at x, via the three-term recurrence
///   h_{k+1} = (x h_k - sqrt(k) h_{k-1}) / sqrt(k+1).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> hermite_normalized(int n, Scalar x) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> h(n + 1);
  h[0] = Scalar(1);
  if (n >= 1) h[1] = x;
  for (int k = 1; k < n; ++k) {
    using std::sqrt;
    h[k + 1] = (x * h[k] - sqrt(Scalar(k)) * h[k - 1]) / sqrt(Scalar(k + 1));
  }
  return h;
}

/// Sum_{k>=1} a_k h_k(x) where a(0) holds the coefficient of h_1.
double hermite_series(const Eigen::Ref<const Eigen::VectorXd>& a, double x);

/// Riemann zeta at integer s >= 2 (direct sum plus Euler-Maclaurin tail).
double zeta(int s);

/// Jacobi theta sum  sum_{k in Z} exp(-k^2 t),  t > 0.
double theta3(double t);

/// One-sided sum  sum_{k >= 0} exp(-a k^2),  a > 0.
double half_theta(double a);

}  // namespace eol
