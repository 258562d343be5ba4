#include "eol/quadrature.hpp"

#include "eol/special.hpp"

#include <map>
#include <mutex>

namespace eol {

namespace {

// Golub-Welsch for the nodes, then Newton polishing on the orthonormal
// polynomial and Christoffel weights 1 / sum_k p_k(x)^2 for full accuracy.
template <typename Recurrence>
QuadratureRule golub_welsch(int n, const Eigen::VectorXd& offdiag, Recurrence&& eval) {
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k + 1 < n; ++k) jacobi(k, k + 1) = jacobi(k + 1, k) = offdiag[k];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi, Eigen::EigenvaluesOnly);
  QuadratureRule rule{solver.eigenvalues(), Eigen::VectorXd(n)};
  for (int i = 0; i < n; ++i) {
    double x = rule.nodes[i];
    for (int it = 0; it < 3; ++it) {
      double pn, dpn, sumsq;
      eval(x, pn, dpn, sumsq);
      if (dpn == 0.0) break;
      x -= pn / dpn;
    }
    double pn, dpn, sumsq;
    eval(x, pn, dpn, sumsq);
    rule.nodes[i] = x;
    rule.weights[i] = 1.0 / sumsq;
  }
  return rule;
}

QuadratureRule build_hermite(int n) {
  Eigen::VectorXd off(n);
  for (int k = 0; k < n; ++k) off[k] = std::sqrt(double(k + 1));
  auto eval = [n](double x, double& pn, double& dpn, double& sumsq) {
    const Eigen::VectorXd h = hermite_normalized(n, x);
    pn = h[n];
    dpn = std::sqrt(double(n)) * h[n - 1];
    sumsq = h.head(n).squaredNorm();
  };
  return golub_welsch(n, off, eval);
}

}  // namespace

const QuadratureRule& gauss_hermite(int n) {
  if (n < 1) throw InvalidArgument("gauss_hermite: n must be positive");
  static std::mutex mutex;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, build_hermite(n)).first;
  return it->second;
}

QuadratureRule gauss_legendre(int n, double a, double b) {
  if (n < 1) throw InvalidArgument("gauss_legendre: n must be positive");
  Eigen::VectorXd off(n);
  for (int k = 0; k < n; ++k) {
    const double m = k + 1;
    off[k] = m / std::sqrt(4.0 * m * m - 1.0);
  }
  // Orthonormal Legendre: P~_k = sqrt(2k+1) P_k, normalized for weight 1/2 on [-1,1].
  auto eval = [n](double x, double& pn, double& dpn, double& sumsq) {
    double pm1 = 0.0, p = 1.0;
    sumsq = 0.0;
    for (int k = 0; k < n; ++k) {
      sumsq += (2.0 * k + 1.0) * p * p;
      const double next = ((2.0 * k + 1.0) * x * p - k * pm1) / (k + 1.0);
      pm1 = p;
      p = next;
    }
    pn = p;
    dpn = n * (x * p - pm1) / (x * x - 1.0);
  };
  QuadratureRule rule = golub_welsch(n, off, eval);
  // Christoffel weights above integrate against dx/2; rescale to [a, b].
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  rule.nodes = (rule.nodes.array() * half + mid).matrix();
  rule.weights *= (b - a);
  return rule;
}

QuadratureRule composite_gauss_legendre(int panels, int order, double a, double b) {
  const QuadratureRule base = gauss_legendre(order, 0.0, 1.0);
  QuadratureRule rule{Eigen::VectorXd(panels * order), Eigen::VectorXd(panels * order)};
  const double width = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    rule.nodes.segment(p * order, order) = (base.nodes.array() * width + (a + p * width)).matrix();
    rule.weights.segment(p * order, order) = base.weights * width;
  }
  return rule;
}

QuadratureRule periodic_trapezoid(int n, double period) {
  QuadratureRule rule{Eigen::VectorXd(n), Eigen::VectorXd::Constant(n, 1.0 / n)};
  for (int i = 0; i < n; ++i) rule.nodes[i] = period * i / n;
  return rule;
}

namespace {

double simpson_step(const std::function<double(double)>& f, double a, double fa, double m,
                    double fm, double b, double fb, double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (!std::isfinite(delta)) throw DivergentIntegral("adaptive_simpson: non-finite integrand");
  if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  if (depth <= 0) throw DivergentIntegral("adaptive_simpson: tolerance not reached");
  return simpson_step(f, a, fa, lm, flm, m, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, fm, rm, frm, b, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                        int max_depth) {
  if (a == b) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_step(f, a, fa, m, fm, b, fb, whole, tol, max_depth);
}

}  // namespace eol
