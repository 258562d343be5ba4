#pragma once

#include "eol/model.hpp"
#include "eol/spectral.hpp"

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace eol {

using RateFunction = std::function<double(double)>;

struct GammaValue {
  double value = 0.0;  // 1 + sum_{i<=N} e^{-lambda_i t}
  double tail = 0.0;   // neglected part of the full trace
  bool warning = false;  // tail > 1e-8
};

/// Heat-kernel trace from a truncated basis, with the neglected tail taken
/// from the closed-form trace of the model.
GammaValue gamma_spectral(const SpectralBasis& basis, double t);

/// gamma(t) = int p_t(x, x) mu(dx) = 1 + sum_i e^{-lambda_i t}, closed form.
RateFunction gamma_function(const DiffusionModel& model);

/// c t^{-a}.
struct PowerLaw {
  double c = 1.0;
  double a = 0.0;
  double operator()(double t) const { return c * std::pow(t, -a); }
};

/// beta(eps) = 1 + int_eps^1 ds int_s^1 gamma(r) dr, evaluated as
/// 1 + int_eps^1 (r - eps) gamma(r) dr in the variable log r with relative
/// tolerance `tol` per unit panel. eps = 0 is allowed; throws
/// DivergentIntegral when the integral does not settle.
double beta_fn(const RateFunction& gamma, double eps, double tol = 1e-9);

/// Closed form for gamma = c t^{-a}. Throws DivergentIntegral at eps = 0
/// when a >= 2.
double beta_fn(const PowerLaw& gamma, double eps);

/// The literal nested double integral; slow, used as a cross-check.
double beta_nested(const RateFunction& gamma, double eps, double tol = 1e-9);

enum class AlphaMethod { automatic, analytic, monte_carlo };

struct AlphaOptions {
  AlphaMethod method = AlphaMethod::automatic;
  int replicas = 4000;
  std::uint64_t seed = 0;
  int threads = 0;
  double max_step = 1e-3;  // Euler step bound for models with a drift
};

struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
};

/// alpha(eps) = E^mu[rho(X_0, X_eps)^2]. Analytic for OU-type models
/// (2d(1 - e^{-c eps}) / c) and the torus (wrapped-Gaussian quadrature);
/// otherwise Monte-Carlo from a stationary start, one exact step when V = 0
/// and Euler substeps otherwise.
Estimate alpha_fn(const DiffusionModel& model, double eps, const AlphaOptions& options = {});

struct UpperBound {
  double eps = 0.0;
  double value = 0.0;
};

/// min over eps in [eps_min, 1] of c_alpha alpha(eps) + c_beta beta(eps) / t:
/// 64 log-spaced grid points, then 40 golden-section steps in log eps
/// around the best grid point.
UpperBound upper_bound_opt(const RateFunction& alpha, const RateFunction& beta, double t,
                           double c_alpha = 1.0, double c_beta = 1.0, double eps_min = 1e-6);

struct GammaTildeOptions {
  int n_outer = 4000;  // mu-samples (Monte-Carlo path only)
  int n_ball = 2000;   // uniform points per ball (Monte-Carlo path only)
  std::uint64_t seed = 0;
};

struct GammaTilde {
  double value = 0.0;
  double stderr_ = 0.0;
  long excluded = 0;   // outer points whose ball-mass estimate vanished
  long evaluated = 0;
  std::string method;  // "exact", "quadrature" or "monte-carlo"
};

/// gamma~(t) = int mu(dx) / mu(B(x, sqrt t)) with B(x, r) = {rho ^ 1 <= r}.
/// Exact on the torus, deterministic quadrature for one-dimensional line
/// and interval models, Monte-Carlo with uniform-ball importance sampling
/// otherwise.
GammaTilde gamma_tilde(const DiffusionModel& model, double t, const GammaTildeOptions& options = {});

/// beta~(eps) built from a gamma~ function exactly as beta_fn.
inline double beta_tilde(const RateFunction& gamma_tilde_fn, double eps, double tol = 1e-9) {
  return beta_fn(gamma_tilde_fn, eps, tol);
}

/// Predicted decay exponents e (statistic ~ t^{-e}) for the power model
/// V = -kappa |x|^p in dimension d.
struct RateExponents {
  double upper = 0.0;
  bool log_factor = false;  // upper rate carries an extra log(1 + t)
  double lower = 0.0;
  double gamma_tilde = 0.0;  // a = pd / (2(p - 1)) with gamma~(t) <= c t^{-a}
};
RateExponents rate_exponent_prediction(int d, double p);

/// E[W_2(mu_t, mu)^2] on a compact manifold: t^{-1} for d <= 3,
/// t^{-1} log t for d = 4, t^{-2/(d-2)} for d >= 5.
RateExponents compact_rate_prediction(int d);

struct SpectralSum {
  double value = 0.0;
  double error = 0.0;  // certified bound on |value - exact|
};

/// sum_i c / lambda_i^2 over all nonzero eigenvalues with multiplicity.
/// One-dimensional models by partial sum plus integral-test tail; the
/// torus in d = 2, 3 by a theta-function integral. Throws
/// NonSummableSpectrum when the series diverges (OU d >= 2, torus d >= 4).
SpectralSum spectral_sum(const DiffusionModel& model, double c);

/// The truncated sum over the modes of a basis.
double spectral_sum_partial(const SpectralBasis& basis, double c);

/// Var of xi(t) = (1/t) int_0^t phi(X_s) ds under the stationary law for an
/// eigenfunction with eigenvalue lambda:
/// 2/(lambda t) - 2(1 - e^{-lambda t}) / (lambda t)^2.
double xi_variance_exact(double lambda, double t);

/// Var of (1/t) int_0^t f(X_s) ds for f = sum_i a_i phi_i, as the double
/// integral (1/t^2) int int sum_i a_i^2 e^{-lambda_i |s1 - s2|} ds1 ds2
/// evaluated by nested adaptive quadrature.
double xi_variance_quadrature(const Eigen::Ref<const Eigen::VectorXd>& a,
                              const Eigen::Ref<const Eigen::VectorXd>& lambda, double t,
                              double tol = 1e-12);

struct FitOptions {
  /// Predicted exponent e (slope -e); NaN when there is no prediction.
  double predicted_exponent = std::numeric_limits<double>::quiet_NaN();
  bool log_factor = false;      // prediction carries log(1 + t)
  bool log_correction = false;  // divide the values by log(1 + t) before fitting
  double tolerance = 0.0;       // widening of the CI for the verdict
  double confidence = 0.95;
};

struct RateReport {
  std::vector<double> horizons;
  std::vector<double> values;
  std::vector<double> stderrs;
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double predicted_slope = std::numeric_limits<double>::quiet_NaN();
  bool log_factor = false;
  bool log_corrected = false;
  double tolerance = 0.0;
  bool pass = false;
  std::string verdict;  // "pass", "fail" or "no prediction"
};

/// Weighted least squares of log value on log t. Weights are
/// (value / stderr)^2 when every stderr is positive, uniform otherwise. The
/// CI uses the Student t quantile with K - 2 degrees of freedom.
RateReport fit_rate(const std::vector<double>& horizons, const std::vector<double>& values,
                    const std::vector<double>& stderrs = {}, const FitOptions& options = {});

}  // namespace eol
