#pragma once

#include "eol/common.hpp"

#include <cmath>
#include <string>

namespace eol {

enum class DomainKind { free_euclidean, torus, reflected_box };

/// Flat state space: R^d, the torus [0, 2pi)^d, or a box with reflecting faces.
struct DomainSpec {
  DomainKind kind = DomainKind::free_euclidean;
  int d = 1;
  double period = kTwoPi;  // torus only
  Eigen::VectorXd lower;   // box only
  Eigen::VectorXd upper;

  static DomainSpec euclidean(int d);
  static DomainSpec torus(int d);
  static DomainSpec box(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);

  bool compact() const { return kind != DomainKind::free_euclidean; }
  std::string name() const;

  /// Maps an arbitrary point back into the domain (wrap or mirror-fold).
  void project(Eigen::Ref<Eigen::VectorXd> x) const;

  /// Returns true when x lies in the closed domain.
  bool contains(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

/// Per-coordinate displacement under the domain metric.
template <typename Scalar>
Scalar coordinate_gap(const DomainSpec& dom, Scalar a, Scalar b) {
  using std::abs;
  using std::fmod;
  Scalar diff = abs(a - b);
  if (dom.kind == DomainKind::torus) {
    diff = fmod(diff, Scalar(dom.period));
    if (diff > Scalar(dom.period) / 2) diff = Scalar(dom.period) - diff;
  }
  return diff;
}

/// Squared geodesic distance rho(x, y)^2.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar squared_distance(const DomainSpec& dom, const Eigen::MatrixBase<DerivedA>& x,
                                           const Eigen::MatrixBase<DerivedB>& y) {
  using Scalar = typename DerivedA::Scalar;
  if (dom.kind != DomainKind::torus) return (x - y).squaredNorm();
  Scalar sum(0);
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const Scalar g = coordinate_gap(dom, x[k], y[k]);
    sum += g * g;
  }
  return sum;
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar distance(const DomainSpec& dom, const Eigen::MatrixBase<DerivedA>& x,
                                   const Eigen::MatrixBase<DerivedB>& y) {
  using std::sqrt;
  return sqrt(squared_distance(dom, x, y));
}

}  // namespace eol
