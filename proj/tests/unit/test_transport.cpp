#include "eol/transport.hpp"
#include "eol/experiment.hpp"
#include "eol/network_simplex.hpp"
#include "eol/quadrature.hpp"
#include "eol/simulate.hpp"
#include "eol/sinkhorn.hpp"
#include "eol/spectral.hpp"
#include "eol/wasserstein1d.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>

namespace {

using eol::CostSpec;
using eol::EmpiricalMeasure;
using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

EmpiricalMeasure points_1d(std::initializer_list<double> x) {
  MatrixXd atoms(1, static_cast<Eigen::Index>(x.size()));
  atoms.row(0) = vec(x).transpose();
  return EmpiricalMeasure::uniform(atoms);
}

EmpiricalMeasure random_measure(eol::RngCursor& rng, int d, int n, double scale, bool random_weights) {
  MatrixXd atoms(d, n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k) atoms(k, i) = scale * rng.normal();
  EmpiricalMeasure m = EmpiricalMeasure::uniform(atoms);
  if (random_weights) {
    for (int i = 0; i < n; ++i) m.weights[i] = 0.1 + rng.uniform();
    m.weights /= m.weights.sum();
  }
  return m;
}

const eol::DomainSpec kLine = eol::DomainSpec::euclidean(1);
const eol::DomainSpec kPlane = eol::DomainSpec::euclidean(2);

TEST(W2Exact1d, ElementaryCases) {
  const auto a = points_1d({0.3, -1.0, 2.0});
  EXPECT_EQ(eol::w2_exact_1d(a, a), 0.0);
  EXPECT_DOUBLE_EQ(eol::w2_exact_1d(points_1d({0.0}), points_1d({1.0})), 1.0);
  EXPECT_NEAR(eol::w2_exact_1d(points_1d({0.0}), eol::ou_model(1)), 1.0, 1e-12);
  EXPECT_THROW(eol::w2_exact_1d(points_1d({0.0}), eol::torus_model(1)), eol::InvalidArgument);
}

TEST(W2Exact1d, AgreesWithNetworkSimplexOnSharedAtoms) {
  eol::RngCursor rng(eol::CounterRng(1, 0, eol::Stream::synthetic));
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + trial * 2, m = 64 - trial;
    const auto a = random_measure(rng, 1, n, 1.0, true);
    const auto b = random_measure(rng, 1, m, 1.5, true);
    const double quantile = eol::w2_exact_1d(a, b);
    const auto lp = eol::wp_discrete(a, b, kLine, CostSpec::rho_power(2.0));
    EXPECT_NEAR(quantile, lp.value, 1e-8 * lp.value) << trial;
  }
}

TEST(W2Exact1d, HermiteDensityAgainstQuadrature) {
  // W_2^2 between f mu and mu through quantiles versus the distribution-level
  // routine, for a density close to the Gaussian.
  auto basis = std::make_shared<const eol::SpectralBasis>(eol::eigen_pairs(eol::ou_model(1), 4));
  eol::ModifiedDensity md{basis, vec({0.2, 0.1, 0.0, 0.0}), 0.0};
  double clipped = -1.0;
  const double w = eol::w2_exact_1d(md, eol::ou_model(1), &clipped);
  EXPECT_EQ(clipped, 0.0);
  const eol::GaussianDistribution g(0.0, 1.0);
  const auto law = eol::modified_density_distribution(md);
  EXPECT_NEAR(w * w, eol::wp_power_1d(*law, g, 2.0), 1e-10);
  EXPECT_GT(w, 0.0);
  EXPECT_LE(w * w, eol::ledoux_bound(md.xi, *basis));
}

TEST(WpDiscrete, ElementaryCases) {
  const auto a = points_1d({0.0, 1.0});
  EXPECT_EQ(eol::wp_discrete(a, a, kLine, CostSpec::rho_power(2.0)).value, 0.0);

  const auto shifted = eol::wp_discrete(a, points_1d({0.5, 1.5}), kLine, CostSpec::rho_power(2.0));
  EXPECT_NEAR(shifted.value * shifted.value, 0.25, 1e-14);
  // Brute force over both bijections.
  const double id = (0.25 + 0.25) / 2.0, swap = (2.25 + 0.25) / 2.0;
  EXPECT_NEAR(shifted.cost, std::min(id, swap), 1e-14);

  const VectorXd w = vec({0.5, 0.5});
  MatrixXd c(2, 2);
  c << 0, 1, 1, 0;
  const auto ns = eol::network_simplex(w, w, c);
  EXPECT_EQ(ns.cost, 0.0);
  const MatrixXd plan = ns.plan.dense(2, 2);
  EXPECT_EQ(plan(0, 0), 0.5);
  EXPECT_EQ(plan(1, 1), 0.5);
  EXPECT_EQ(plan(0, 1), 0.0);
}

TEST(WpDiscrete, InfeasibleMarginalsRejected) {
  const VectorXd a = vec({0.5, 0.5}), b = vec({0.5, 0.6});
  EXPECT_THROW(eol::network_simplex(a, b, MatrixXd::Ones(2, 2)), eol::InfeasibleMarginals);
  const VectorXd neg = vec({1.5, -0.5});
  EXPECT_THROW(eol::network_simplex(neg, a, MatrixXd::Ones(2, 2)), eol::InfeasibleMarginals);
}

TEST(WpDiscrete, PlanMarginalsAndCost) {
  eol::RngCursor rng(eol::CounterRng(2, 0, eol::Stream::synthetic));
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_measure(rng, 2, 40 + trial, 1.0, true);
    const auto b = random_measure(rng, 2, 55, 1.0, true);
    for (const auto& cost : {CostSpec::rho_power(1.0), CostSpec::rho_power(2.0), CostSpec::truncated()}) {
      const auto r = eol::wp_discrete(a, b, kPlane, cost);
      EXPECT_LE(r.plan.marginal_residual, 1e-9);
      const MatrixXd c = eol::cost_matrix(kPlane, a.atoms, b.atoms, cost);
      double total = 0.0;
      VectorXd rows = VectorXd::Zero(a.size()), cols = VectorXd::Zero(b.size());
      for (const auto& e : r.plan.entries) {
        EXPECT_GE(e.weight, 0.0);
        total += e.weight * c(e.i, e.j);
        rows[e.i] += e.weight;
        cols[e.j] += e.weight;
      }
      EXPECT_NEAR(total, r.cost, 1e-12);
      EXPECT_NEAR(cost.distance_from_cost(r.cost), r.value, 1e-14);
      EXPECT_LE((rows - a.weights).cwiseAbs().maxCoeff(), 1e-9);
      EXPECT_LE((cols - b.weights).cwiseAbs().maxCoeff(), 1e-9);
    }
  }
}

TEST(WpDiscrete, MetricSuites) {
  eol::RngCursor rng(eol::CounterRng(3, 0, eol::Stream::synthetic));
  const auto torus = eol::DomainSpec::torus(2);
  int violations = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto& dom = trial % 2 ? kPlane : torus;
    const auto a = random_measure(rng, 2, 6 + trial % 5, 2.0, true);
    const auto b = random_measure(rng, 2, 7, 2.0, true);
    const auto c = random_measure(rng, 2, 5 + trial % 3, 2.0, true);
    for (const auto& cost : {CostSpec::rho_power(2.0), CostSpec::truncated()}) {
      const double ab = eol::wp_discrete(a, b, dom, cost).value;
      const double ba = eol::wp_discrete(b, a, dom, cost).value;
      const double ac = eol::wp_discrete(a, c, dom, cost).value;
      const double cb = eol::wp_discrete(c, b, dom, cost).value;
      EXPECT_NEAR(ab, ba, 1e-10);
      if (ab > ac + cb + 1e-12) ++violations;
    }
  }
  EXPECT_EQ(violations, 0);
}

TEST(WpDiscrete, TruncatedBelowW1BelowW2) {
  eol::RngCursor rng(eol::CounterRng(4, 0, eol::Stream::synthetic));
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_measure(rng, 2, 30, 1.0 + trial * 0.05, true);
    const auto b = random_measure(rng, 2, 25, 1.0, true);
    const double w1t = eol::wp_discrete(a, b, kPlane, CostSpec::truncated()).value;
    const double w1 = eol::wp_discrete(a, b, kPlane, CostSpec::rho_power(1.0)).value;
    const double w2 = eol::wp_discrete(a, b, kPlane, CostSpec::rho_power(2.0)).value;
    EXPECT_LE(w1t, w1 + 1e-12);
    EXPECT_LE(w1, w2 + 1e-12);
  }
}

TEST(Sinkhorn, IdenticalMeasures) {
  eol::RngCursor rng(eol::CounterRng(5, 0, eol::Stream::synthetic));
  const auto a = random_measure(rng, 2, 32, 1.0, false);
  const MatrixXd c = eol::cost_matrix(kPlane, a.atoms, a.atoms, CostSpec::rho_power(2.0));
  const auto r = eol::sinkhorn_annealed(a.weights, a.weights, c);
  EXPECT_TRUE(r.converged);
  // Entropic bias at the final regularization is tiny; mass sits on the diagonal.
  EXPECT_LT(r.value, 1e-3);
  EXPECT_GT(r.plan.diagonal().sum(), 0.99);
}

TEST(Sinkhorn, MatchesLinearProgramOnGaussianClouds) {
  eol::RngCursor rng(eol::CounterRng(6, 0, eol::Stream::synthetic));
  for (int trial = 0; trial < 10; ++trial) {
    auto a = random_measure(rng, 2, 64, 1.0, false);
    auto b = random_measure(rng, 2, 64, 1.0, false);
    b.atoms.row(0).array() += 0.5;
    const double lp = eol::wp_discrete(a, b, kPlane, CostSpec::rho_power(2.0)).cost;
    const auto sk = eol::wp_sinkhorn(a, b, kPlane, CostSpec::rho_power(2.0));
    EXPECT_LE(std::abs(sk.cost - lp) / lp, 1e-3) << trial;
  }
}

TEST(Sinkhorn, AnnealApproachesLinearProgram) {
  eol::RngCursor rng(eol::CounterRng(7, 0, eol::Stream::synthetic));
  const auto a = random_measure(rng, 2, 48, 1.0, false);
  const auto b = random_measure(rng, 2, 48, 1.3, false);
  const MatrixXd c = eol::cost_matrix(kPlane, a.atoms, b.atoms, CostSpec::rho_power(2.0));
  const double lp = eol::network_simplex(a.weights, b.weights, c).cost;
  const auto r = eol::sinkhorn_annealed(a.weights, b.weights, c);
  ASSERT_GE(r.stage_values.size(), 2u);
  // Gap to the LP shrinks stage by stage (up to the convergence tolerance).
  for (std::size_t s = 1; s < r.stage_values.size(); ++s)
    EXPECT_LE(std::abs(r.stage_values[s] - lp), std::abs(r.stage_values[s - 1] - lp) + 1e-6) << s;
  EXPECT_LT(r.residual, 1e-8);
}

TEST(Sinkhorn, NonConvergenceIsReported) {
  eol::RngCursor rng(eol::CounterRng(8, 0, eol::Stream::synthetic));
  const auto a = random_measure(rng, 2, 40, 1.0, false);
  const auto b = random_measure(rng, 2, 40, 1.0, false);
  const MatrixXd c = eol::cost_matrix(kPlane, a.atoms, b.atoms, CostSpec::rho_power(2.0));
  eol::AnnealOptions opts;
  opts.max_iter = 2;
  opts.newton = false;
  opts.tol = 1e-14;
  EXPECT_THROW(eol::sinkhorn_annealed(a.weights, b.weights, c, opts), eol::SolverError);
  opts.throw_on_failure = false;
  const auto r = eol::sinkhorn_annealed(a.weights, b.weights, c, opts);
  EXPECT_FALSE(r.converged);
  EXPECT_GT(r.residual, 0.0);
}

TEST(DistanceToMu, SelfSampleIsZero) {
  const auto m = eol::torus_model(2);
  eol::MuDistanceOptions opts;
  opts.m = 256;
  opts.control = false;
  const auto emp = EmpiricalMeasure::uniform(m.sample_mu(256, 13, 0));
  const auto r = eol::distance_to_mu(emp, m, CostSpec::rho_power(2.0), opts, 13, 0);
  EXPECT_NEAR(r.estimate, 0.0, 1e-12);
  EXPECT_EQ(r.m, 256);
}

TEST(DistanceToMu, OuAgreesWithExactQuantileCoupling) {
  const auto m = eol::ou_model(1);
  const auto traj = eol::simulate_path(m, eol::InitialDistribution::stationary(), 20.0, 0.01, 8);
  const auto emp = eol::empirical_measure(traj, 20.0);
  const double w = eol::w2_exact_1d(emp, m);
  eol::MuDistanceOptions opts;
  opts.m = 4096;
  opts.resamples = 8;
  const auto r = eol::distance_to_mu(emp, m, CostSpec::rho_power(2.0), opts, 5, 0);
  EXPECT_EQ(r.resamples, 8);
  EXPECT_GT(r.stderr_, 0.0);
  // One-sample bias in d = 1 is of order 1/m for W_2^2 of nearby measures.
  const double bias = 4.0 / 4096.0;
  EXPECT_NEAR(r.estimate, w * w, 3.0 * (r.stderr_ + bias));
}

TEST(DistanceToMu, TorusGridAlignment) {
  const auto m = eol::torus_model(1);
  const int n = 512;
  MatrixXd grid(1, n);
  for (int i = 0; i < n; ++i) grid(0, i) = eol::kTwoPi * (i + 0.5) / n;
  const auto emp = EmpiricalMeasure::uniform(grid);
  EXPECT_LT(eol::w2_squared_circle_uniform(emp), 1e-4);
  // The exact circle routine decays like n^{-2} on aligned grids.
  MatrixXd fine(1, 4 * n);
  for (int i = 0; i < 4 * n; ++i) fine(0, i) = eol::kTwoPi * (i + 0.5) / (4 * n);
  EXPECT_LT(eol::w2_squared_circle_uniform(EmpiricalMeasure::uniform(fine)),
            eol::w2_squared_circle_uniform(emp) / 10.0);
}

TEST(DualLowerBound, DiracAndAdmissibility) {
  const auto m = eol::torus_model(1);
  eol::TestFunction f{[](const VectorXd& x) { return std::sin(x[0]); },
                      [](const VectorXd& x) { return vec({std::cos(x[0])}); }};
  const auto delta = points_1d({1.0});
  EXPECT_NEAR(eol::dual_lower_bound(delta, m, f), std::sin(1.0), 1e-15);

  eol::TestFunction steep{[](const VectorXd& x) { return 0.5 * std::sin(3.0 * x[0]); },
                          [](const VectorXd& x) { return vec({1.5 * std::cos(3.0 * x[0])}); }};
  EXPECT_THROW(eol::dual_lower_bound(delta, m, steep), eol::InvalidArgument);
  eol::TestFunction uncentred{[](const VectorXd& x) { return 0.5 + 0.5 * std::sin(x[0]); },
                              [](const VectorXd& x) { return vec({0.5 * std::cos(x[0])}); }};
  EXPECT_THROW(eol::dual_lower_bound(delta, m, uncentred), eol::InvalidArgument);
}

TEST(DualLowerBound, BelowTruncatedLinearProgram) {
  const auto m = eol::torus_model(1);
  const auto torus = m.domain();
  eol::TestFunction f{[](const VectorXd& x) { return std::sin(x[0]); },
                      [](const VectorXd& x) { return vec({std::cos(x[0])}); }};
  // |f| <= 1 and |grad f| <= 1 make f 2-Lipschitz for the cost 1 ^ rho, so
  // duality gives |emp(f) - mu(f)| <= 2 W~1. A 4096-point mu-sample stands
  // in for mu; its own |emp(f)| is the slack.
  const auto mu_sample = EmpiricalMeasure::uniform(m.sample_mu(4096, 1));
  const double slack = std::abs(mu_sample.integrate([&](const auto& x) { return f.value(x); }));
  eol::RngCursor rng(eol::CounterRng(10, 0, eol::Stream::synthetic));
  for (int trial = 0; trial < 100; ++trial) {
    MatrixXd atoms(1, 64);
    const double centre = eol::kTwoPi * rng.uniform(), spread = 0.2 + 3.0 * rng.uniform();
    for (int i = 0; i < 64; ++i) atoms(0, i) = centre + spread * (rng.uniform() - 0.5);
    EmpiricalMeasure emp = EmpiricalMeasure::uniform(atoms);
    for (int i = 0; i < 64; ++i) torus.project(emp.atoms.col(i));
    const double lower = eol::dual_lower_bound(emp, m, f);
    const double w1t = eol::wp_discrete(emp, mu_sample, torus, CostSpec::truncated()).value;
    EXPECT_LE(lower, 2.0 * w1t + slack + 1e-12) << trial;
  }
}

TEST(LedouxBound, ClosedForms) {
  const auto basis = eol::eigen_pairs(eol::ou_model(1), 5);
  EXPECT_EQ(eol::ledoux_bound(VectorXd::Zero(5), basis), 0.0);
  EXPECT_DOUBLE_EQ(eol::ledoux_bound(vec({0.3}), basis), 4.0 * 0.09);
  EXPECT_DOUBLE_EQ(eol::ledoux_bound(vec({0.0, 0.4}), basis), 4.0 * 0.16 / 2.0);
}

TEST(LedouxBound, DominatesExactW2OnRandomDensities) {
  eol::SuiteOptions opts;
  opts.trials = 40;
  const auto res = eol::ledoux_check(opts);
  EXPECT_EQ(res.cases, 40);
  EXPECT_EQ(res.violations, 0);
  EXPECT_GE(res.min_ratio, 1.0);
}

TEST(SpectralW2Bound, ReducesToLedoux) {
  auto basis = std::make_shared<const eol::SpectralBasis>(eol::eigen_pairs(eol::ou_model(1), 4));
  eol::ModifiedDensity md{basis, VectorXd::Zero(4), 0.0};
  EXPECT_EQ(eol::spectral_w2_bound(md), 0.0);
  md.xi = vec({0.1, -0.3, 0.2, 0.05});
  EXPECT_DOUBLE_EQ(eol::spectral_w2_bound(md), eol::ledoux_bound(md.xi, *basis));
  md.eps = 0.5;
  EXPECT_LT(eol::spectral_w2_bound(md), eol::ledoux_bound(md.xi, *basis));
}

TEST(SpectralW2Bound, DominatesClippedExactDistance) {
  const auto m = eol::ou_model(1);
  auto basis = std::make_shared<const eol::SpectralBasis>(eol::eigen_pairs(m, 12));
  for (int r = 0; r < 100; ++r) {
    const auto traj = eol::simulate_path(m, eol::InitialDistribution::stationary(), 50.0, 0.01, 40, r);
    eol::ModifiedDensity md{basis, eol::xi_coefficients(traj, *basis, 50.0), 0.1};
    double clipped = 0.0;
    const double w = eol::w2_exact_1d(md, m, &clipped);
    EXPECT_LE(w * w - 4.0 * clipped, eol::spectral_w2_bound(md)) << r;
  }
}

TEST(MpMean, LimitCases) {
  EXPECT_DOUBLE_EQ(eol::mp_mean(2.0, 2.0, 3.0), 0.25);
  for (double p : {1.2, 2.0, 3.0}) {
    EXPECT_EQ(eol::mp_mean(1.0, 0.0, p), 0.0);
    EXPECT_EQ(eol::mp_mean(0.0, 0.0, p), 0.0);
  }
  EXPECT_NEAR(eol::mp_mean(4.0, 1.0, 2.0), std::log(4.0) / 3.0, 1e-15);
  EXPECT_NEAR(eol::mp_mean(4.0, 1.0, 2.0), 0.46209812037329684, 1e-15);
  // The general formula tends to the logarithmic mean as p -> 2.
  EXPECT_NEAR(eol::mp_mean(4.0, 1.0, 2.0 + 1e-7), eol::mp_mean(4.0, 1.0, 2.0), 1e-7);
  EXPECT_NEAR(eol::mp_mean(4.0, 1.0, 2.0 - 1e-7), eol::mp_mean(4.0, 1.0, 2.0), 1e-7);
  EXPECT_DOUBLE_EQ(eol::mp_mean(4.0, 1.0, 3.0), (1.0 / 4.0 - 1.0) / (-1.0 * 3.0));
  EXPECT_EQ(eol::mp_mean(3.0, 5.0, 1.5), eol::mp_mean(5.0, 3.0, 1.5));
  // Near the diagonal the value is continuous.
  EXPECT_NEAR(eol::mp_mean(2.0, 2.0 + 1e-9, 3.0), 0.25, 1e-9);
}

TEST(WpDensityBounds, EqualDensitiesGiveZero) {
  auto basis = std::make_shared<const eol::SpectralBasis>(eol::eigen_pairs(eol::ou_model(1), 8));
  eol::DensityPair pair{basis, vec({0.2, 0.1, 0, 0, 0, 0, 0, 0}), vec({0.2, 0.1, 0, 0, 0, 0, 0, 0})};
  for (double p : {1.5, 2.0, 3.0}) {
    const auto b = eol::wp_density_bounds(pair, p);
    EXPECT_EQ(b.bound_sym, 0.0);
    EXPECT_EQ(b.bound_f1, 0.0);
    EXPECT_EQ(b.bound_Mp, 0.0);
    EXPECT_EQ(b.min, 0.0);
  }
}

TEST(WpDensityBounds, ClosedFormAgreesWithInterpolationQuadrature) {
  const auto basis = std::make_shared<const eol::SpectralBasis>(eol::eigen_pairs(eol::ou_model(1), 8));
  eol::RngCursor rng(eol::CounterRng(12, 0, eol::Stream::density_draw));
  for (int trial = 0; trial < 10; ++trial) {
    eol::DensityPair pair{basis, VectorXd::Zero(8), eol::random_density_coefficients(*basis, 4, 0.05, rng)};
    const auto b = eol::wp_density_bounds(pair, 2.0);
    EXPECT_NEAR(b.bound_Mp, eol::mp_bound_by_interpolation(pair, 2.0), 1e-8 * std::max(1.0, b.bound_Mp));
    // f1 = 1: the first two bounds differ only by the constants and weights.
    EXPECT_LE(b.min, b.bound_f1);
    EXPECT_LE(b.min, b.bound_sym);
    EXPECT_LE(b.min, b.bound_Mp);
  }
}

TEST(WpDensityBounds, DominateExactDiscreteCost) {
  eol::SuiteOptions opts;
  opts.trials = 12;
  const auto res = eol::appendix_check(opts);
  EXPECT_EQ(res.cases, 36);
  EXPECT_EQ(res.violations, 0) << (res.failures.empty() ? "" : res.failures.front());
  EXPECT_LT(res.max_check_error, 1e-8);
}

TEST(QuantileCentroids, ContractW2) {
  const eol::GaussianDistribution g(0.0, 1.0);
  const auto c = eol::quantile_centroids(g, 256);
  EXPECT_EQ(c.size(), 256);
  EXPECT_NEAR(c.atoms.row(0).mean(), 0.0, 1e-12);
  EXPECT_LT(c.atoms.row(0).array().square().mean(), 1.0);
  eol::RngCursor rng(eol::CounterRng(13, 0, eol::Stream::synthetic));
  const auto a = random_measure(rng, 1, 2000, 1.0, false);
  const auto b = random_measure(rng, 1, 1500, 1.2, false);
  const double full = eol::w2_exact_1d(a, b);
  const double compressed = eol::w2_exact_1d(eol::compress_quantiles(a, 100), eol::compress_quantiles(b, 100));
  EXPECT_LE(compressed, full + 1e-12);
}

TEST(TransportPlan, CsvExport) {
  const auto r = eol::wp_discrete(points_1d({0.0, 1.0}), points_1d({0.5, 1.5}), kLine, CostSpec::rho_power(2.0));
  std::ostringstream os;
  eol::write_plan_csv(os, r.plan);
  EXPECT_EQ(os.str().rfind("i,j,weight", 0), 0u);
  EXPECT_NE(os.str().find("0,0,0.5"), std::string::npos);
}

}  // namespace
