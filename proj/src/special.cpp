#include "eol/special.hpp"

#include "eol/common.hpp"

#include <limits>

namespace eol {

double normal_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) {
    if (u == 0.0) return -std::numeric_limits<double>::infinity();
    if (u == 1.0) return std::numeric_limits<double>::infinity();
    throw InvalidArgument("normal_quantile: argument outside [0, 1]");
  }
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double lo = 0.02425, hi = 1.0 - lo;
  double x;
  if (u < lo) {
    const double q = std::sqrt(-2.0 * std::log(u));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (u <= hi) {
    const double q = u - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-u));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement; use the upper tail for u > 1/2 to keep precision.
  const double e = (u > 0.5) ? (u - 1.0) + 0.5 * std::erfc(x / std::numbers::sqrt2)
                             : normal_cdf(x) - u;
  const double step = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - step / (1.0 + 0.5 * x * step);
}

double hermite_series(const Eigen::Ref<const Eigen::VectorXd>& a, double x) {
  const int n = static_cast<int>(a.size());
  if (n == 0) return 0.0;
  double hm1 = 1.0, h = x, sum = a[0] * x;
  for (int k = 1; k < n; ++k) {
    const double next = (x * h - std::sqrt(double(k)) * hm1) / std::sqrt(double(k + 1));
    hm1 = h;
    h = next;
    sum += a[k] * h;
  }
  return sum;
}

double zeta(int s) {
  if (s < 2) throw InvalidArgument("zeta: s must be >= 2");
  constexpr int n = 64;
  double sum = 0.0;
  for (int k = n - 1; k >= 1; --k) sum += std::pow(double(k), -s);
  // Euler-Maclaurin tail from n: n^{1-s}/(s-1) + n^{-s}/2 + s n^{-s-1}/12 - ...
  const double nd = n;
  sum += std::pow(nd, 1 - s) / (s - 1) + 0.5 * std::pow(nd, -s) + s * std::pow(nd, -s - 1) / 12.0 -
         s * (s + 1.0) * (s + 2.0) * std::pow(nd, -s - 3) / 720.0;
  return sum;
}

double theta3(double t) {
  if (!(t > 0.0)) throw InvalidArgument("theta3: t must be positive");
  if (t >= 1.0) {
    double sum = 0.0;
    for (int k = 30; k >= 1; --k) sum += std::exp(-double(k) * k * t);
    return 1.0 + 2.0 * sum;
  }
  // Jacobi imaginary transformation: theta(t) = sqrt(pi/t) theta(pi^2/t).
  const double s = std::numbers::pi * std::numbers::pi / t;
  double sum = 0.0;
  for (int k = 10; k >= 1; --k) sum += std::exp(-double(k) * k * s);
  return std::sqrt(std::numbers::pi / t) * (1.0 + 2.0 * sum);
}

double half_theta(double a) { return 0.5 * (theta3(a) + 1.0); }

}  // namespace eol
