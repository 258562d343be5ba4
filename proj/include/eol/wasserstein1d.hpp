#pragma once

#include "eol/model.hpp"
#include "eol/simulate.hpp"

#include <memory>

namespace eol {

/// A probability law on the real line with enough structure for exact
/// quantile-coupling computations.
class Distribution1D {
 public:
  virtual ~Distribution1D() = default;

  virtual double pdf(double x) const = 0;
  virtual double cdf(double x) const = 0;
  virtual double survival(double x) const { return 1.0 - cdf(x); }
  /// int_{-inf}^{x} y^k dF(y) for k in {0, 1, 2}; x may be infinite.
  virtual double partial_moment(int k, double x) const = 0;
  /// Generalized inverse of the CDF. Safeguarded Newton by default.
  virtual double quantile(double u) const;

  double moment(int k) const;

 protected:
  /// A point near the bulk used to start the quantile search.
  virtual double center() const { return 0.0; }
  virtual double spread() const { return 1.0; }
};

class GaussianDistribution final : public Distribution1D {
 public:
  GaussianDistribution(double mean, double sd);
  double pdf(double x) const override;
  double cdf(double x) const override;
  double survival(double x) const override;
  double partial_moment(int k, double x) const override;
  double quantile(double u) const override;

 private:
  double m_, s_;
};

/// Density f = 1 + sum_{n>=1} a_n h_n(x / sigma) relative to N(0, sigma^2),
/// with h_n the normalized Hermite polynomials. `a(0)` is the coefficient of
/// h_1. The CDF and partial moments are closed-form; f must be nonnegative.
class HermiteDensity final : public Distribution1D {
 public:
  explicit HermiteDensity(const Eigen::Ref<const Eigen::VectorXd>& a, double sigma = 1.0);

  double pdf(double x) const override;
  double cdf(double x) const override;
  double survival(double x) const override;
  double partial_moment(int k, double x) const override;
  /// The relative density f at x.
  double relative_density(double x) const;

 protected:
  double spread() const override { return sigma_; }

 private:
  // Integral of sum_m c_m h_m against N(0,1) over (-inf, z].
  double lower_integral(const Eigen::VectorXd& c, double z) const;
  // sum_{m>=1} c_m h_{m-1}(z) / sqrt(m)
  double tail_sum(const Eigen::VectorXd& c, double z) const;
  double sigma_;
  Eigen::VectorXd coef_[3];  // coefficients of y^k f(y) in the h_m basis
};

/// Continuous piecewise-linear density through (nodes_k, values_k), zero
/// outside [nodes_0, nodes_K]; renormalized to unit mass.
class PiecewiseLinearDensity final : public Distribution1D {
 public:
  PiecewiseLinearDensity(Eigen::VectorXd nodes, Eigen::VectorXd values);

  double pdf(double x) const override;
  double cdf(double x) const override;
  double partial_moment(int k, double x) const override;
  double quantile(double u) const override;

 private:
  Eigen::Index cell_of(double x) const;
  double cell_moment(int k, Eigen::Index cell, double delta) const;
  Eigen::VectorXd x_, v_;
  Eigen::VectorXd cum_[3];  // partial moments at the nodes
};

/// Invariant law of a one-dimensional line model (OU, power, box).
std::unique_ptr<Distribution1D> model_distribution_1d(const DiffusionModel& model);

/// Law of f mu with f = 1 + sum_i c_i phi_i on a one-dimensional OU basis.
/// Densities that go negative are clipped at zero and renormalized;
/// `clipped_mass` receives the removed negative mass (0 without clipping).
std::unique_ptr<Distribution1D> spectral_density_distribution(const SpectralBasis& basis,
                                                              const Eigen::VectorXd& c,
                                                              double* clipped_mass = nullptr);

/// Law of f_{eps,t} mu for a one-dimensional OU model. Densities that go
/// negative are clipped at zero and renormalized; `clipped_mass` receives
/// the removed negative mass (0 when no clipping was needed).
std::unique_ptr<Distribution1D> modified_density_distribution(const ModifiedDensity& md,
                                                              double* clipped_mass = nullptr);

/// Sorted atoms and weights of a one-dimensional measure.
struct Atoms1D {
  Eigen::VectorXd x;
  Eigen::VectorXd w;
};
Atoms1D sorted_atoms(const EmpiricalMeasure& m);

/// int_0^1 |Q_a(u) - Q_b(u)|^p du between two discrete measures.
double wp_power_1d(const EmpiricalMeasure& a, const EmpiricalMeasure& b, double p = 2.0);
/// W_2^2 between a discrete measure and a continuous law (exact).
double w2_squared_1d(const EmpiricalMeasure& a, const Distribution1D& b);
/// int_0^1 |Q_a - Q_b|^p du by graded composite Gauss-Legendre in u.
double wp_power_1d(const Distribution1D& a, const Distribution1D& b, double p = 2.0);

/// W_2 on the line via the quantile coupling.
double w2_exact_1d(const EmpiricalMeasure& a, const EmpiricalMeasure& b);
double w2_exact_1d(const EmpiricalMeasure& a, const DiffusionModel& model);
double w2_exact_1d(const ModifiedDensity& md, const DiffusionModel& model,
                   double* clipped_mass = nullptr);

/// W_2^2 between a measure on the circle [0, period) and the uniform law.
double w2_squared_circle_uniform(const EmpiricalMeasure& a, double period = kTwoPi);

/// n equal-mass atoms placed at the conditional means of the quantile
/// cells [k/n, (k+1)/n]. W_p between two such discretizations never
/// exceeds W_p between the originals.
EmpiricalMeasure quantile_centroids(const Distribution1D& law, Eigen::Index n);
/// The same construction applied to a discrete measure.
EmpiricalMeasure compress_quantiles(const EmpiricalMeasure& m, Eigen::Index n);

}  // namespace eol
