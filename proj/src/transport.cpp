#include "eol/transport.hpp"

#include "eol/wasserstein1d.hpp"

#include <cmath>
#include <ostream>

namespace eol {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr Eigen::Index kMaxExactAtoms = 4096;

bool is_line_model(const DiffusionModel& model) {
  return model.dim() == 1 && model.domain().kind != DomainKind::torus;
}

// Systematic resampling: n equal-weight atoms at cumulative positions
// (j + u) / n. On a uniform path measure this keeps evenly spaced times.
EmpiricalMeasure thin(const EmpiricalMeasure& emp, Eigen::Index n, double u) {
  StateMatrix atoms(emp.dim(), n);
  const double total = emp.weights.sum();
  double cum = emp.weights[0];
  Eigen::Index i = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double target = (double(j) + u) / double(n) * total;
    while (cum < target && i + 1 < emp.size()) cum += emp.weights[++i];
    atoms.col(j) = emp.atoms.col(i);
  }
  return EmpiricalMeasure::uniform(std::move(atoms));
}

}  // namespace

CostSpec CostSpec::rho_power(double p) {
  if (!(p >= 1.0)) throw InvalidArgument("CostSpec: p must be >= 1");
  return {CostKind::rho_power, p};
}

CostSpec CostSpec::truncated() { return {CostKind::truncated_rho, 1.0}; }

double CostSpec::operator()(const DomainSpec& dom, const Eigen::Ref<const Eigen::VectorXd>& x,
                            const Eigen::Ref<const Eigen::VectorXd>& y) const {
  const double sq = squared_distance(dom, x, y);
  if (kind == CostKind::truncated_rho) return std::min(1.0, std::sqrt(sq));
  return p == 2.0 ? sq : std::pow(sq, p / 2.0);
}

double CostSpec::distance_from_cost(double cost) const {
  if (kind == CostKind::truncated_rho) return cost;
  return p == 2.0 ? std::sqrt(std::max(cost, 0.0)) : std::pow(std::max(cost, 0.0), 1.0 / p);
}

std::string CostSpec::name() const {
  if (kind == CostKind::truncated_rho) return "truncated_rho";
  std::string s = std::to_string(p);
  s.erase(s.find_last_not_of('0') + 1);
  if (s.back() == '.') s.pop_back();
  return "rho_power_" + s;
}

Eigen::MatrixXd cost_matrix(const DomainSpec& dom, const StateMatrix& x, const StateMatrix& y,
                            const CostSpec& cost) {
  if (x.rows() != y.rows() || x.rows() != dom.d)
    throw InvalidArgument("cost_matrix: atom dimension does not match the domain");
  Eigen::MatrixXd c(x.cols(), y.cols());
  for (Eigen::Index j = 0; j < y.cols(); ++j)
    for (Eigen::Index i = 0; i < x.cols(); ++i) c(i, j) = cost(dom, x.col(i), y.col(j));
  return c;
}

DistanceResult wp_discrete(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                           const DomainSpec& dom, const CostSpec& cost) {
  if (a.size() > kMaxExactAtoms || b.size() > kMaxExactAtoms)
    throw InvalidArgument("wp_discrete: at most 4096 atoms per side");
  if (std::abs(a.weights.sum() - 1.0) > 1e-9 || std::abs(b.weights.sum() - 1.0) > 1e-9)
    throw InfeasibleMarginals("wp_discrete: weights must sum to one");
  const Eigen::MatrixXd c = cost_matrix(dom, a.atoms, b.atoms, cost);
  NetworkSimplexResult ns = network_simplex(a.weights, b.weights, c);
  DistanceResult out;
  out.cost = ns.cost;
  out.value = cost.distance_from_cost(ns.cost);
  out.plan = std::move(ns.plan);
  out.solver = "network_simplex";
  out.iterations = ns.iterations;
  return out;
}

DistanceResult wp_sinkhorn(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                           const DomainSpec& dom, const CostSpec& cost,
                           const AnnealOptions& options) {
  const Eigen::MatrixXd c = cost_matrix(dom, a.atoms, b.atoms, cost);
  const SinkhornResult sk = sinkhorn_annealed(a.weights, b.weights, c, options);
  DistanceResult out;
  out.cost = sk.value;
  out.value = cost.distance_from_cost(sk.value);
  out.solver = "sinkhorn";
  out.reg = sk.reg;
  out.iterations = sk.iterations;
  out.plan.marginal_residual = sk.residual;
  for (Eigen::Index j = 0; j < sk.plan.cols(); ++j)
    for (Eigen::Index i = 0; i < sk.plan.rows(); ++i)
      if (sk.plan(i, j) > 0.0)
        out.plan.entries.push_back({static_cast<int>(i), static_cast<int>(j), sk.plan(i, j)});
  return out;
}

MuDistance distance_to_mu(const EmpiricalMeasure& emp, const DiffusionModel& model,
                          const CostSpec& cost, const MuDistanceOptions& options,
                          std::uint64_t seed, std::uint64_t replica) {
  if (options.m < 1) throw InvalidArgument("distance_to_mu: m must be >= 1");
  if (options.resamples < 1) throw InvalidArgument("distance_to_mu: resamples must be >= 1");
  if (emp.dim() != model.dim()) throw InvalidArgument("distance_to_mu: dimension mismatch");
  emp.validate(1e-9);
  const Eigen::Index n = options.n > 0 ? options.n : options.m;

  OtSolver solver = options.solver;
  const bool quantile = solver == OtSolver::automatic && is_line_model(model) &&
                        cost.kind == CostKind::rho_power;
  if (solver == OtSolver::automatic && !quantile)
    solver = std::max(n, options.m) <= kMaxExactAtoms ? OtSolver::network_simplex
                                                      : OtSolver::sinkhorn;
  auto transport_cost = [&](const EmpiricalMeasure& x, const EmpiricalMeasure& y) {
    if (quantile) return wp_power_1d(x, y, cost.p);
    if (solver == OtSolver::sinkhorn)
      return wp_sinkhorn(x, y, model.domain(), cost, options.anneal).cost;
    return wp_discrete(x, y, model.domain(), cost).cost;
  };

  MuDistance out;
  out.m = options.m;
  out.resamples = options.resamples;
  out.solver = quantile ? "quantile"
               : solver == OtSolver::sinkhorn ? "sinkhorn"
                                              : "network_simplex";
  Eigen::VectorXd est(options.resamples);
  for (int k = 0; k < options.resamples; ++k) {
    const std::uint64_t stream_replica = replica * std::uint64_t(options.resamples) + std::uint64_t(k);
    const EmpiricalMeasure mu = EmpiricalMeasure::uniform(model.sample_mu(options.m, seed, stream_replica));
    EmpiricalMeasure sub;
    if (emp.size() > n) {
      RngCursor rng(CounterRng(seed, stream_replica, Stream::subsample));
      sub = thin(emp, n, rng.uniform());
    } else {
      sub = emp;
    }
    out.n = sub.size();
    const double raw = transport_cost(sub, mu);
    double control = 0.0;
    if (options.control) {
      const EmpiricalMeasure iid = EmpiricalMeasure::uniform(
          model.sample_mu(sub.size(), seed, stream_replica, Stream::control_sample));
      control = transport_cost(iid, mu);
    }
    out.raw += raw / options.resamples;
    out.control += control / options.resamples;
    // Independent fluctuations add in quadrature: W_raw^2 = W^2 + W_control^2
    // in distance units (for rho^2 this is raw - control in cost units).
    const double dr = cost.distance_from_cost(raw), dc = cost.distance_from_cost(control);
    // The signed power keeps the estimate unbiased for rho^2 and symmetric
    // about zero otherwise.
    const double sq = dr * dr - dc * dc;
    const double power = cost.kind == CostKind::truncated_rho ? 1.0 : cost.p;
    est[k] = std::copysign(std::pow(std::abs(sq), 0.5 * power), sq);
  }
  out.estimate = est.mean();
  if (options.resamples > 1)
    out.stderr_ = std::sqrt((est.array() - out.estimate).square().sum() /
                            (options.resamples - 1) / options.resamples);
  return out;
}

// ---------------------------------------------------------------------------

QuadratureRule invariant_quadrature(const DiffusionModel& model) {
  if (model.dim() != 1) throw InvalidArgument("invariant_quadrature: one-dimensional models only");
  switch (model.kind()) {
    case ModelKind::ou: {
      QuadratureRule rule = gauss_hermite(256);
      rule.nodes /= std::sqrt(model.ou_rate());
      return rule;
    }
    case ModelKind::torus: return periodic_trapezoid(4096, model.domain().period);
    case ModelKind::box: {
      const double lo = model.domain().lower[0], hi = model.domain().upper[0];
      QuadratureRule rule = gauss_legendre(512, lo, hi);
      rule.weights /= hi - lo;
      return rule;
    }
    case ModelKind::power: break;
  }
  throw NoClosedFormSpectrum("invariant_quadrature: no rule for the power model");
}

double dual_lower_bound(const EmpiricalMeasure& emp, const DiffusionModel& model,
                        const TestFunction& f, std::uint64_t seed) {
  if (!f.value || !f.gradient) throw InvalidArgument("dual_lower_bound: test function incomplete");
  emp.validate(1e-9);
  constexpr double slack = 1e-9;
  auto check = [&](const Eigen::VectorXd& x) {
    if (std::abs(f.value(x)) > 1.0 + slack)
      throw InvalidArgument("dual_lower_bound: |f| exceeds 1");
    if (f.gradient(x).norm() > 1.0 + slack)
      throw InvalidArgument("dual_lower_bound: |grad f| exceeds 1");
  };
  for (Eigen::Index i = 0; i < std::min<Eigen::Index>(emp.size(), 4096); ++i) check(emp.atoms.col(i));
  const StateMatrix probe = model.sample_mu(4096, seed, 0, Stream::control_sample);
  for (Eigen::Index i = 0; i < probe.cols(); ++i) check(probe.col(i));

  // Centering: exact quadrature in 1-D, otherwise a 5-sigma Monte-Carlo test.
  if (model.dim() == 1 && model.kind() != ModelKind::power) {
    const QuadratureRule rule = invariant_quadrature(model);
    Eigen::VectorXd x(1);
    double mean = 0.0;
    for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) {
      x[0] = rule.nodes[i];
      check(x);
      mean += rule.weights[i] * f.value(x);
    }
    if (std::abs(mean) > 1e-8) throw InvalidArgument("dual_lower_bound: mu(f) != 0");
  } else {
    const StateMatrix s = model.sample_mu(100000, seed, 1, Stream::control_sample);
    Eigen::VectorXd v(s.cols());
    for (Eigen::Index i = 0; i < s.cols(); ++i) v[i] = f.value(s.col(i));
    const double mean = v.mean();
    const double sd = std::sqrt((v.array() - mean).square().mean());
    if (std::abs(mean) > 5.0 * sd / std::sqrt(double(v.size())) + 1e-12)
      throw InvalidArgument("dual_lower_bound: mu(f) != 0");
  }
  return std::abs(emp.integrate([&](const auto& x) { return f.value(x); }));
}

double ledoux_bound(const Eigen::Ref<const Eigen::VectorXd>& a, const SpectralBasis& basis) {
  if (a.size() > basis.size()) throw InvalidArgument("ledoux_bound: more coefficients than modes");
  const auto lambda = basis.eigenvalues().head(a.size()).array();
  return 4.0 * (a.array().square() / lambda).sum();
}

double spectral_w2_bound(const ModifiedDensity& md) {
  if (!md.basis) throw InvalidArgument("spectral_w2_bound: no basis");
  if (md.xi.size() > md.basis->size()) throw InvalidArgument("spectral_w2_bound: xi too long");
  const auto lambda = md.basis->eigenvalues().head(md.xi.size()).array();
  return 4.0 * ((-2.0 * md.eps * lambda).exp() * md.xi.array().square() / lambda).sum();
}

double interpolation_weight(double a, double b, double p) {
  if (a < 0.0 || b < 0.0) throw InvalidArgument("interpolation_weight: arguments must be >= 0");
  if (a > b) std::swap(a, b);
  if (b == 0.0) return kInf;
  if (a == 0.0) return p < 2.0 ? std::pow(b, 1.0 - p) / (2.0 - p) : kInf;
  const double r = b / a - 1.0;
  if (r < 1e-6) {
    // Series in r = b/a - 1 around the diagonal.
    return std::pow(a, 1.0 - p) * (1.0 + (1.0 - p) * r / 2.0 + (1.0 - p) * (-p) * r * r / 6.0);
  }
  if (p == 2.0) return std::log1p(r) / (b - a);
  return (std::pow(b, 2.0 - p) - std::pow(a, 2.0 - p)) / ((2.0 - p) * (b - a));
}

double mp_mean(double a, double b, double p) {
  if (a < 0.0 || b < 0.0) throw InvalidArgument("mp_mean: arguments must be >= 0");
  if (!(a > 0.0 && b > 0.0)) return 0.0;
  return interpolation_weight(a, b, p);
}

namespace {

struct PairNodes {
  Eigen::VectorXd w, f1, f2, grad;  // weights, densities and |grad g| at the nodes
};

PairNodes pair_nodes(const DensityPair& pair) {
  if (!pair.basis) throw InvalidArgument("DensityPair: no basis");
  const SpectralBasis& basis = *pair.basis;
  if (basis.model().dim() != 1) throw InvalidArgument("wp_density_bounds: one-dimensional bases only");
  if (pair.c1.size() != basis.size() || pair.c2.size() != basis.size())
    throw InvalidArgument("DensityPair: coefficient length must match the basis");
  const QuadratureRule rule = invariant_quadrature(basis.model());
  const Eigen::VectorXd g = ((pair.c2 - pair.c1).array() / basis.eigenvalues().array()).matrix();
  PairNodes out;
  const Eigen::Index n = rule.nodes.size();
  out.w = rule.weights;
  out.f1.resize(n);
  out.f2.resize(n);
  out.grad.resize(n);
  Eigen::VectorXd x(1), phi(basis.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    x[0] = rule.nodes[i];
    basis.eval_all(x, phi);
    out.f1[i] = 1.0 + pair.c1.dot(phi);
    out.f2[i] = 1.0 + pair.c2.dot(phi);
    out.grad[i] = (basis.grad_all(x) * g).norm();
    if (out.f1[i] < 0.0 || out.f2[i] < 0.0)
      throw InvalidArgument("DensityPair: densities must be nonnegative");
    if (!(std::max(out.f1[i], out.f2[i]) > 0.0))
      throw InvalidArgument("DensityPair: f1 v f2 must be positive");
  }
  return out;
}

}  // namespace

WpBounds wp_density_bounds(const DensityPair& pair, double p) {
  if (!(p > 1.0)) throw InvalidArgument("wp_density_bounds: p must be > 1");
  const PairNodes nodes = pair_nodes(pair);
  const double pp = std::pow(p, p);
  WpBounds out;
  for (Eigen::Index i = 0; i < nodes.w.size(); ++i) {
    const double w = nodes.w[i], gp = std::pow(nodes.grad[i], p), g2 = nodes.grad[i] * nodes.grad[i];
    const double a = nodes.f1[i], b = nodes.f2[i];
    if (gp == 0.0) continue;
    out.bound_sym += w * pp * std::pow(2.0, p - 1.0) * gp / std::pow(a + b, p - 1.0);
    out.bound_f1 += a > 0.0 ? w * pp * gp / std::pow(a, p - 1.0) : kInf;
    out.bound_Mp += w * gp * interpolation_weight(a, b, p);
    const double m = mp_mean(a, b, p);
    out.reciprocal_Mp += m > 0.0 ? w * g2 / m : kInf;
  }
  out.min = std::min({out.bound_sym, out.bound_f1, out.bound_Mp});
  return out;
}

double mp_bound_by_interpolation(const DensityPair& pair, double p, int s_nodes) {
  const PairNodes nodes = pair_nodes(pair);
  // Panels shrink geometrically toward s = 0, where the integrand peaks once
  // the arguments are ordered so that a <= b.
  std::vector<double> breaks{0.0};
  for (int k = 40; k >= 1; --k) breaks.push_back(std::ldexp(1.0, -k));
  breaks.push_back(1.0);
  const QuadratureRule ref = gauss_legendre(s_nodes, 0.0, 1.0);
  double total = 0.0;
  for (Eigen::Index i = 0; i < nodes.w.size(); ++i) {
    const double a = std::min(nodes.f1[i], nodes.f2[i]), b = std::max(nodes.f1[i], nodes.f2[i]);
    double weight = 0.0;
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
      const double lo = breaks[k], len = breaks[k + 1] - breaks[k];
      for (Eigen::Index j = 0; j < ref.nodes.size(); ++j)
        weight += len * ref.weights[j] * std::pow(a + (lo + len * ref.nodes[j]) * (b - a), 1.0 - p);
    }
    total += nodes.w[i] * std::pow(nodes.grad[i], p) * weight;
  }
  return total;
}

Eigen::VectorXd random_density_coefficients(const SpectralBasis& basis, int k, double floor,
                                            RngCursor& rng) {
  if (k < 1 || k > basis.size()) throw InvalidArgument("random_density_coefficients: bad k");
  if (!(floor >= 0.0 && floor < 1.0)) throw InvalidArgument("random_density_coefficients: floor in [0, 1)");
  const QuadratureRule rule = invariant_quadrature(basis.model());
  Eigen::VectorXd b(k + 1);
  for (Eigen::Index i = 0; i <= k; ++i) b[i] = rng.normal();
  const Eigen::Index n = rule.nodes.size();
  Eigen::MatrixXd phi(basis.size(), n);
  Eigen::VectorXd q(n), x(1);
  for (Eigen::Index j = 0; j < n; ++j) {
    x[0] = rule.nodes[j];
    phi.col(j) = basis.eval_all(x);
    q[j] = b[0] + b.tail(k).dot(phi.col(j).head(k));
  }
  const double norm = rule.weights.dot(q.cwiseProduct(q).matrix());
  const Eigen::VectorXd f = (floor + (1.0 - floor) * q.array().square() / norm).matrix();
  const Eigen::VectorXd c = phi * rule.weights.cwiseProduct(f);
  const double err = ((phi.transpose() * c).array() + 1.0 - f.array()).abs().maxCoeff();
  if (err > 1e-8 * f.maxCoeff())
    throw InvalidArgument("random_density_coefficients: basis too small for q^2");
  return c;
}

void write_plan_csv(std::ostream& os, const TransportPlan& plan) {
  os << "i,j,weight\n";
  os.precision(17);
  for (const PlanEntry& e : plan.entries) os << e.i << ',' << e.j << ',' << e.weight << '\n';
}

}  // namespace eol
