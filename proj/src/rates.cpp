#include "eol/rates.hpp"

#include "eol/quadrature.hpp"
#include "eol/simulate.hpp"
#include "eol/special.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace eol {

namespace {

constexpr double kPi = std::numbers::pi;

// Integral of g over [a, b] with relative tolerance: a 16-point Gauss-Legendre
// estimate sets the scale for the adaptive Simpson pass.
double integrate_relative(const std::function<double(double)>& g, double a, double b, double rel) {
  const double coarse = gauss_legendre(16, a, b).integrate(g);
  const double tol = std::max(rel * std::abs(coarse), 1e-300);
  return adaptive_simpson(g, a, b, tol);
}

}  // namespace

GammaValue gamma_spectral(const SpectralBasis& basis, double t) {
  if (!(t > 0.0)) throw InvalidArgument("gamma_spectral: t must be positive");
  GammaValue out;
  out.value = 1.0 + (-t * basis.eigenvalues().array()).exp().sum();
  out.tail = std::max(heat_trace(basis.model(), t) - out.value, 0.0);
  out.warning = out.tail > 1e-8;
  return out;
}

RateFunction gamma_function(const DiffusionModel& model) {
  return [model](double t) { return heat_trace(model, t); };
}

double beta_fn(const RateFunction& gamma, double eps, double tol) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw InvalidArgument("beta_fn: eps must lie in [0, 1]");
  if (eps == 1.0) return 1.0;
  // r = e^u: int (r - eps) gamma(r) dr = int (e^u - eps) gamma(e^u) e^u du.
  const auto integrand = [&](double u) {
    const double r = std::exp(u);
    return (r - eps) * gamma(r) * r;
  };
  double sum = 0.0;
  if (eps > 0.0) {
    const double lo = std::log(eps);
    for (double b = 0.0; b > lo; b -= 1.0) sum += integrate_relative(integrand, std::max(b - 1.0, lo), b, tol);
    return 1.0 + sum;
  }
  // eps = 0: add unit panels towards u = -inf until they stop contributing.
  int quiet = 0;
  for (int k = 0; k < 700; ++k) {
    double piece = 0.0;
    try {
      piece = integrate_relative(integrand, -k - 1.0, -static_cast<double>(k), tol);
    } catch (const DivergentIntegral&) {
      break;
    }
    if (!std::isfinite(piece)) break;
    sum += piece;
    quiet = std::abs(piece) <= 1e-14 * std::abs(sum) ? quiet + 1 : 0;
    if (quiet >= 5) return 1.0 + sum;
  }
  throw DivergentIntegral("beta_fn: int_0^1 r gamma(r) dr diverges");
}

double beta_fn(const PowerLaw& gamma, double eps) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw InvalidArgument("beta_fn: eps must lie in [0, 1]");
  const double a = gamma.a;
  if (eps == 0.0 && a >= 2.0) throw DivergentIntegral("beta_fn: c t^{-a} with a >= 2 at eps = 0");
  // int_eps^1 r^{1-a} dr - eps int_eps^1 r^{-a} dr
  const auto power_integral = [eps](double q) {  // int_eps^1 r^q dr
    if (std::abs(q + 1.0) < 1e-14) return -std::log(eps);
    return (1.0 - std::pow(eps, q + 1.0)) / (q + 1.0);
  };
  const double first = power_integral(1.0 - a);
  const double second = eps == 0.0 ? 0.0 : eps * power_integral(-a);
  return 1.0 + gamma.c * (first - second);
}

double beta_nested(const RateFunction& gamma, double eps, double tol) {
  if (!(eps > 0.0 && eps <= 1.0)) throw InvalidArgument("beta_nested: eps must lie in (0, 1]");
  if (eps == 1.0) return 1.0;
  // G(s) = int_s^1 gamma(r) dr in log r, then int_eps^1 G(s) ds in log s.
  const auto inner = [&](double v) {
    const auto g = [&](double u) { return gamma(std::exp(u)) * std::exp(u); };
    double sum = 0.0;
    for (double b = 0.0; b > v; b -= 1.0) sum += integrate_relative(g, std::max(b - 1.0, v), b, tol);
    return sum;
  };
  const auto outer = [&](double v) { return inner(v) * std::exp(v); };
  double sum = 0.0;
  const double lo = std::log(eps);
  for (double b = 0.0; b > lo; b -= 1.0) sum += integrate_relative(outer, std::max(b - 1.0, lo), b, tol);
  return 1.0 + sum;
}

Estimate alpha_fn(const DiffusionModel& model, double eps, const AlphaOptions& options) {
  if (!(eps > 0.0 && eps <= 1.0)) throw InvalidArgument("alpha_fn: eps must lie in (0, 1]");
  const bool ou = model.kind() == ModelKind::ou;
  const bool torus = model.kind() == ModelKind::torus;
  AlphaMethod method = options.method;
  if (method == AlphaMethod::automatic)
    method = ou || torus ? AlphaMethod::analytic : AlphaMethod::monte_carlo;
  if (method == AlphaMethod::analytic) {
    if (ou) {
      const double c = model.ou_rate();
      return {-2.0 * model.dim() * std::expm1(-c * eps) / c, 0.0};
    }
    if (!torus) throw InvalidArgument("alpha_fn: no closed form for " + model.id());
    // Per coordinate: E[gap^2] for a wrapped N(0, 2 eps) increment.
    const double period = model.domain().period;
    const double sd = std::sqrt(2.0 * eps);
    const int images = static_cast<int>(std::ceil(8.0 * sd / period)) + 1;
    const double per_coord =
        composite_gauss_legendre(8, 32, -0.5 * period, 0.5 * period).integrate([&](double x) {
          double dens = 0.0;
          for (int n = -images; n <= images; ++n) dens += normal_pdf((x + n * period) / sd) / sd;
          return x * x * dens;
        });
    return {model.dim() * per_coord, 0.0};
  }
  if (options.replicas < 2) throw InvalidArgument("alpha_fn: need at least two replicas");
  // V = 0 (torus, box): a single Gaussian step, wrapped or folded, is exact.
  const bool flat = model.kind() == ModelKind::torus || model.kind() == ModelKind::box;
  const double steps = flat ? 1.0 : std::ceil(eps / options.max_step);
  const double h = eps / steps;
  const auto replica = [&](std::uint64_t r) {
    const Trajectory path =
        simulate_path(model, InitialDistribution::stationary(), eps, h, options.seed, r);
    return squared_distance(model.domain(), path.states.col(0), path.states.col(path.steps()));
  };
  const MonteCarloResult mc = monte_carlo(std::function<double(std::uint64_t)>(replica),
                                          options.replicas, {options.threads, nullptr});
  return {mc.mean[0], mc.stderr_[0]};
}

UpperBound upper_bound_opt(const RateFunction& alpha, const RateFunction& beta, double t,
                           double c_alpha, double c_beta, double eps_min) {
  if (!(t > 0.0)) throw InvalidArgument("upper_bound_opt: t must be positive");
  if (!(eps_min > 0.0 && eps_min < 1.0)) throw InvalidArgument("upper_bound_opt: eps_min in (0, 1)");
  const auto objective = [&](double u) {
    const double eps = std::exp(u);
    return c_alpha * alpha(eps) + c_beta * beta(eps) / t;
  };
  constexpr int kGrid = 64;
  const double lo = std::log(eps_min);
  const double du = -lo / (kGrid - 1);
  int best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kGrid; ++i) {
    const double v = objective(lo + i * du);
    if (v < best_value) {
      best_value = v;
      best = i;
    }
  }
  double a = lo + std::max(best - 1, 0) * du;
  double b = lo + std::min(best + 1, kGrid - 1) * du;
  UpperBound out{std::exp(lo + best * du), best_value};
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - ratio * (b - a), x2 = a + ratio * (b - a);
  double f1 = objective(x1), f2 = objective(x2);
  for (int it = 0; it < 40; ++it) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - ratio * (b - a);
      f1 = objective(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + ratio * (b - a);
      f2 = objective(x2);
    }
  }
  const double u = f1 < f2 ? x1 : x2;
  const double v = std::min(f1, f2);
  if (v < out.value) out = {std::exp(u), v};
  return out;
}

namespace {

// int dx / int_{B(x, r)} e^{V(y) - V(x)} dy for a one-dimensional model.
double gamma_tilde_line(const DiffusionModel& model, double r) {
  const DomainSpec& dom = model.domain();
  const bool box = dom.kind == DomainKind::reflected_box;
  const double lower = box ? dom.lower[0] : -std::numeric_limits<double>::infinity();
  const double upper = box ? dom.upper[0] : std::numeric_limits<double>::infinity();
  Eigen::VectorXd x1(1), y1(1);
  const auto inverse_mass = [&](double x) {
    x1[0] = x;
    const double vx = model.potential(x1);
    const double a = std::max(x - r, lower), b = std::min(x + r, upper);
    // Composite rule: the relative density may vary exponentially over the ball.
    const QuadratureRule rule = composite_gauss_legendre(8, 16, a, b);
    const double mass = rule.integrate([&](double y) {
      y1[0] = y;
      return std::exp(model.potential(y1) - vx);
    });
    return 1.0 / mass;
  };
  if (box) {
    // Kinks of the ball length at lower + r and upper - r.
    std::vector<double> cuts{lower, upper};
    for (double c : {lower + r, upper - r})
      if (c > lower && c < upper) cuts.push_back(c);
    std::sort(cuts.begin(), cuts.end());
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
      sum += composite_gauss_legendre(16, 16, cuts[k], cuts[k + 1]).integrate(inverse_mass);
    return sum;
  }
  // Whole line: geometrically growing panels on both sides of the origin.
  double sum = 0.0;
  for (double side : {1.0, -1.0}) {
    double a = 0.0, width = 0.5;
    int quiet = 0;
    for (int k = 0; k < 80 && quiet < 3; ++k) {
      const double b = a + width;
      const double piece = composite_gauss_legendre(4, 16, a, b).integrate(
          [&](double s) { return inverse_mass(side * s); });
      sum += piece;
      quiet = piece <= 1e-15 * sum ? quiet + 1 : 0;
      a = b;
      width *= 1.5;
    }
  }
  return sum;
}

double unit_ball_volume(int d) {
  return std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

}  // namespace

GammaTilde gamma_tilde(const DiffusionModel& model, double t, const GammaTildeOptions& options) {
  if (!(t > 0.0)) throw InvalidArgument("gamma_tilde: t must be positive");
  const double r = std::sqrt(t);
  GammaTilde out;
  // B(x, r) is everything once r >= 1 (the metric is truncated at 1).
  if (r >= 1.0) {
    out.value = 1.0;
    out.method = "exact";
    return out;
  }
  const int d = model.dim();
  if (model.kind() == ModelKind::torus) {
    const double mass = unit_ball_volume(d) * std::pow(r, d) / std::pow(model.domain().period, d);
    out.value = 1.0 / mass;
    out.method = "exact";
    return out;
  }
  if (d == 1) {
    out.value = gamma_tilde_line(model, r);
    out.method = "quadrature";
    return out;
  }
  if (options.n_outer < 2 || options.n_ball < 1) throw InvalidArgument("gamma_tilde: sample sizes");
  const StateMatrix xs = model.sample_mu(options.n_outer, options.seed, 0, Stream::mu_sample);
  const double ball_volume = unit_ball_volume(d) * std::pow(r, d);
  std::vector<double> inv;
  inv.reserve(options.n_outer);
  Eigen::VectorXd y(d), dir(d);
  for (int i = 0; i < options.n_outer; ++i) {
    RngCursor rng(CounterRng(options.seed, static_cast<std::uint64_t>(i), Stream::ball_mass));
    double acc = 0.0;
    for (int j = 0; j < options.n_ball; ++j) {
      for (int k = 0; k < d; ++k) dir[k] = rng.normal();
      const double radius = r * std::pow(rng.uniform(), 1.0 / d);
      y = xs.col(i) + radius / dir.norm() * dir;
      if (model.domain().contains(y)) acc += model.density(y);
    }
    const double mass = ball_volume * acc / options.n_ball;
    ++out.evaluated;
    if (!(mass > 1e-300)) {
      ++out.excluded;
      continue;
    }
    inv.push_back(1.0 / mass);
  }
  if (inv.size() < 2) throw SamplerFailure("gamma_tilde: every ball-mass estimate vanished");
  const Eigen::Map<const Eigen::VectorXd> v(inv.data(), static_cast<Eigen::Index>(inv.size()));
  out.value = v.mean();
  out.stderr_ = std::sqrt((v.array() - out.value).square().sum() / (v.size() - 1) / v.size());
  out.method = "monte-carlo";
  return out;
}

RateExponents rate_exponent_prediction(int d, double p) {
  if (d < 1 || !(p > 1.0)) throw InvalidArgument("rate_exponent_prediction: need d >= 1, p > 1");
  RateExponents out;
  const double lhs = 4.0 * (p - 1.0), rhs = d * p;
  out.gamma_tilde = d * p / (2.0 * (p - 1.0));
  if (std::abs(lhs - rhs) <= 1e-12 * rhs) {
    out.upper = 1.0;
    out.log_factor = true;
  } else if (lhs < rhs) {
    out.upper = 2.0 * (p - 1.0) / ((d - 2.0) * p + 2.0);
  } else {
    out.upper = 1.0;
  }
  out.lower = 2.0 / std::max(2.0, d - 2.0);
  return out;
}

RateExponents compact_rate_prediction(int d) {
  if (d < 1) throw InvalidArgument("compact_rate_prediction: d must be positive");
  RateExponents out;
  out.upper = d <= 4 ? 1.0 : 2.0 / (d - 2.0);
  out.log_factor = d == 4;
  out.lower = out.upper;
  out.gamma_tilde = 0.5 * d;
  return out;
}

namespace {

// sum_{i>=1} mult / (scale i^q)^2 with an integral-test bracket on the tail.
SpectralSum power_spectrum_sum(double mult, double scale, double q) {
  constexpr long kTerms = 200000;
  double partial = 0.0;
  for (long i = kTerms; i >= 1; --i) partial += std::pow(static_cast<double>(i), -2.0 * q);
  const double e = 2.0 * q - 1.0;  // int_N^inf x^{-2q} dx = N^{-e} / e
  const double hi = std::pow(static_cast<double>(kTerms), -e) / e;
  const double lo = std::pow(static_cast<double>(kTerms + 1), -e) / e;
  const double factor = mult / (scale * scale);
  const double rounding = 1e-15 * partial * kTerms / 1000.0;
  return {factor * (partial + 0.5 * (lo + hi)), factor * (0.5 * (hi - lo) + rounding)};
}

// sum_{k in Z^d \ 0} |k|^{-4} for d = 2, 3 via the Mellin transform of the
// theta function, split at x = 1 with the Jacobi identity on (0, 1).
SpectralSum torus_lattice_sum(int d) {
  const auto s = [](double a) { return half_theta(a) - 1.0; };  // sum_{k>=1} e^{-a k^2}
  const double tol = 1e-13;
  const auto far = [&](double x) { return x * (std::pow(1.0 + 2.0 * s(x), d) - 1.0); };
  const auto near = [&](double x) {
    if (x <= 0.0) return 0.0;
    return x * std::pow(kPi / x, 0.5 * d) * (std::pow(1.0 + 2.0 * s(kPi * kPi / x), d) - 1.0);
  };
  double sum = std::pow(kPi, 0.5 * d) / (2.0 - 0.5 * d) - 0.5;
  sum += adaptive_simpson(near, 0.0, 1.0, tol);
  for (double a = 1.0; a < 64.0; a += 1.0) sum += adaptive_simpson(far, a, a + 1.0, tol);
  return {sum, 1e-9};
}

}  // namespace

SpectralSum spectral_sum(const DiffusionModel& model, double c) {
  const int d = model.dim();
  SpectralSum base;
  switch (model.kind()) {
    case ModelKind::ou:
      if (d > 1) throw NonSummableSpectrum("sum 1/lambda_i^2 diverges for OU in d >= 2");
      base = power_spectrum_sum(1.0, model.ou_rate(), 1.0);
      break;
    case ModelKind::torus:
      if (d > 3) throw NonSummableSpectrum("sum 1/lambda_i^2 diverges on the torus in d >= 4");
      base = d == 1 ? power_spectrum_sum(2.0, 1.0, 2.0) : torus_lattice_sum(d);
      break;
    case ModelKind::box: {
      if (d > 1) throw NoClosedFormSpectrum("spectral_sum: box models only in d = 1");
      const double len = model.domain().upper[0] - model.domain().lower[0];
      base = power_spectrum_sum(1.0, std::pow(kPi / len, 2), 2.0);
      break;
    }
    case ModelKind::power:
      throw NoClosedFormSpectrum("spectral_sum: " + model.id() + " has no closed-form spectrum");
  }
  return {c * base.value, std::abs(c) * base.error};
}

double spectral_sum_partial(const SpectralBasis& basis, double c) {
  return c * basis.eigenvalues().array().square().inverse().sum();
}

double xi_variance_exact(double lambda, double t) {
  if (!(lambda > 0.0 && t > 0.0)) throw InvalidArgument("xi_variance_exact: need lambda, t > 0");
  const double x = lambda * t;
  if (x < 1e-3) {
    // 2 sum_{k>=2} (-x)^{k-2} / k!
    double term = 0.5, sum = 0.0;
    for (int k = 2; k < 12; ++k) {
      sum += term;
      term *= -x / (k + 1);
    }
    return 2.0 * sum;
  }
  return 2.0 * (x + std::expm1(-x)) / (x * x);
}

double xi_variance_quadrature(const Eigen::Ref<const Eigen::VectorXd>& a,
                              const Eigen::Ref<const Eigen::VectorXd>& lambda, double t, double tol) {
  if (a.size() != lambda.size()) throw InvalidArgument("xi_variance_quadrature: size mismatch");
  if (!(t > 0.0)) throw InvalidArgument("xi_variance_quadrature: t must be positive");
  const Eigen::ArrayXd a2 = a.array().square();
  const Eigen::ArrayXd lam = lambda.array();
  const auto autocov = [&](double u) { return (a2 * (-lam * u).exp()).sum(); };
  const double scale = std::max(a2.sum(), 1e-300);
  const auto inner = [&](double s1) {
    if (s1 >= t) return 0.0;
    return adaptive_simpson([&](double s2) { return autocov(s2 - s1); }, s1, t, tol * scale * t);
  };
  return 2.0 * adaptive_simpson(inner, 0.0, t, tol * scale * t * t) / (t * t);
}

RateReport fit_rate(const std::vector<double>& horizons, const std::vector<double>& values,
                    const std::vector<double>& stderrs, const FitOptions& options) {
  const std::size_t k = horizons.size();
  if (k < 3) throw InvalidArgument("fit_rate: need at least three horizons");
  if (values.size() != k || (!stderrs.empty() && stderrs.size() != k))
    throw InvalidArgument("fit_rate: size mismatch");
  for (std::size_t i = 0; i < k; ++i) {
    if (!(values[i] > 0.0)) throw InvalidArgument("fit_rate: values must be positive");
    if (!(horizons[i] > 0.0)) throw InvalidArgument("fit_rate: horizons must be positive");
    if (options.log_correction && !(horizons[i] > 0.0 && std::log1p(horizons[i]) > 0.0))
      throw InvalidArgument("fit_rate: log correction needs t > 0");
  }
  bool weighted = !stderrs.empty();
  for (double s : stderrs) weighted = weighted && s > 0.0;

  Eigen::ArrayXd x(k), y(k), w(k);
  for (std::size_t i = 0; i < k; ++i) {
    x[i] = std::log(horizons[i]);
    y[i] = std::log(values[i]);
    if (options.log_correction) y[i] -= std::log(std::log1p(horizons[i]));
    w[i] = weighted ? std::pow(values[i] / stderrs[i], 2) : 1.0;
  }
  w /= w.sum();
  const double xm = (w * x).sum(), ym = (w * y).sum();
  const double sxx = (w * (x - xm).square()).sum();
  if (!(sxx > 0.0)) throw InvalidArgument("fit_rate: horizons must not all coincide");
  RateReport out;
  out.horizons = horizons;
  out.values = values;
  out.stderrs = stderrs;
  out.slope = (w * (x - xm) * (y - ym)).sum() / sxx;
  out.intercept = ym - out.slope * xm;
  const Eigen::ArrayXd resid = y - out.intercept - out.slope * x;
  const double dof = static_cast<double>(k) - 2.0;
  const double s2 = (w * resid.square()).sum() / dof;
  out.slope_stderr = std::sqrt(s2 / sxx);
  const boost::math::students_t dist(dof);
  const double q = boost::math::quantile(dist, 0.5 + 0.5 * options.confidence);
  out.ci_low = out.slope - q * out.slope_stderr;
  out.ci_high = out.slope + q * out.slope_stderr;
  out.log_factor = options.log_factor;
  out.log_corrected = options.log_correction;
  out.tolerance = options.tolerance;
  if (std::isnan(options.predicted_exponent)) {
    out.verdict = "no prediction";
    return out;
  }
  out.predicted_slope = -options.predicted_exponent;
  out.pass = out.predicted_slope >= out.ci_low - options.tolerance &&
             out.predicted_slope <= out.ci_high + options.tolerance;
  out.verdict = out.pass ? "pass" : "fail";
  return out;
}

}  // namespace eol
