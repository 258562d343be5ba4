#include "eol/simulate.hpp"
#include "eol/quadrature.hpp"
#include "eol/rates.hpp"
#include "eol/spectral.hpp"
#include "eol/wasserstein1d.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <stdexcept>

namespace {

using eol::InitialDistribution;
using Eigen::VectorXd;

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

TEST(SimulatePath, OneEulerStepFromOrigin) {
  const auto m = eol::ou_model(1);
  const double h = 0.01;
  double sum = 0.0, sum2 = 0.0;
  const int R = 4000;
  for (int r = 0; r < R; ++r) {
    const auto traj = eol::simulate_path(m, InitialDistribution::dirac(vec({0.0})), h, h, 3, r);
    ASSERT_EQ(traj.states.cols(), 2);
    VectorXd z(1);
    eol::CounterRng(3, r, eol::Stream::path_noise).fill_normal(0, z);
    EXPECT_DOUBLE_EQ(traj.states(0, 1), std::sqrt(2.0 * h) * z[0]);
    const double x2 = traj.states(0, 1) * traj.states(0, 1);
    sum += x2;
    sum2 += x2 * x2;
  }
  const double mean = sum / R;
  const double se = std::sqrt((sum2 / R - mean * mean) / (R - 1));
  EXPECT_NEAR(mean, 2.0 * h, 4.0 * se);
}

TEST(SimulatePath, LengthAndGrid) {
  const auto traj = eol::simulate_path(eol::ou_model(2), InitialDistribution::stationary(), 1.005, 0.01, 1);
  EXPECT_EQ(traj.states.rows(), 2);
  EXPECT_EQ(traj.states.cols(), 101);
  EXPECT_NEAR(traj.t_end(), 1.0, 1e-12);
  EXPECT_THROW(eol::simulate_path(eol::ou_model(1), InitialDistribution::stationary(), 0.001, 0.01, 1),
               eol::InvalidArgument);
  EXPECT_THROW(eol::simulate_path(eol::ou_model(1), InitialDistribution::stationary(), 1.0, 0.0, 1),
               eol::InvalidArgument);
}

TEST(SimulatePath, TorusWrapsIntoFundamentalDomain) {
  const auto traj =
      eol::simulate_path(eol::torus_model(1), InitialDistribution::dirac(vec({6.2})), 50.0, 0.05, 2);
  bool wrapped = false;
  for (Eigen::Index j = 0; j < traj.states.cols(); ++j) {
    const double x = traj.states(0, j);
    ASSERT_GE(x, 0.0);
    ASSERT_LT(x, eol::kTwoPi);
    if (j > 0 && traj.states(0, j - 1) > 5.5 && x < 1.0) wrapped = true;
  }
  EXPECT_TRUE(wrapped);
}

TEST(SimulatePath, BoxStaysInside) {
  const auto m = eol::model_from_id("box-2d");
  const auto traj = eol::simulate_path(m, InitialDistribution::stationary(), 20.0, 0.05, 4);
  for (Eigen::Index j = 0; j < traj.states.cols(); ++j) ASSERT_TRUE(m.domain().contains(traj.states.col(j)));
}

TEST(SimulatePath, BlowupIsReported) {
  // An explicit Euler step of size h on V = -|x|^4 diverges from far out.
  const auto m = eol::power_model(1, 1.0, 4.0);
  try {
    eol::simulate_path(m, InitialDistribution::dirac(vec({50.0})), 10.0, 0.5, 1);
    FAIL() << "expected NumericalBlowup";
  } catch (const eol::NumericalBlowup& e) {
    EXPECT_GE(e.step(), 0);
  }
}

TEST(SimulatePath, DeterministicInSeedAndReplica) {
  const auto m = eol::ou_model(2);
  const auto a = eol::simulate_path(m, InitialDistribution::stationary(), 5.0, 0.01, 9, 3);
  const auto b = eol::simulate_path(m, InitialDistribution::stationary(), 5.0, 0.01, 9, 3);
  const auto c = eol::simulate_path(m, InitialDistribution::stationary(), 5.0, 0.01, 9, 4);
  EXPECT_EQ(a.states, b.states);
  EXPECT_NE(a.states, c.states);
}

TEST(SimulatePath, StationaryVarianceOverSeeds) {
  // The time-averaged X^2 over [0, 50] has variance about 2/t = 0.04, so
  // its spread over seeds should be close to 0.2 and its mean close to the
  // Euler stationary variance 2/(2 - h).
  const auto m = eol::ou_model(1);
  const int R = 200;
  VectorXd v(R);
  for (int r = 0; r < R; ++r) {
    const auto traj = eol::simulate_path(m, InitialDistribution::stationary(), 50.0, 0.01, 12, r);
    const Eigen::ArrayXd x = traj.states.row(0).transpose().array();
    v[r] = (x - x.mean()).square().mean();
  }
  const double mean = v.mean();
  const double sd = std::sqrt((v.array() - mean).square().sum() / (R - 1));
  EXPECT_NEAR(mean, 2.0 / 1.99, 4.0 * sd / std::sqrt(R) + 0.02);
  EXPECT_NEAR(sd, 0.2, 0.05);
}

TEST(SimulatePath, StationarityPreservedAcrossGrid) {
  for (const auto& m : {eol::ou_model(1), eol::torus_model(1)}) {
    const int R = 2000;
    const double t_end = 5.0, h = 0.01;
    Eigen::MatrixXd x(R, 6);
    for (int r = 0; r < R; ++r) {
      const auto traj = eol::simulate_path(m, InitialDistribution::stationary(), t_end, h, 21, r);
      for (int k = 0; k < 6; ++k) x(r, k) = traj.states(0, k * 100);
    }
    const double mean_ref = m.kind() == eol::ModelKind::ou ? 0.0 : std::numbers::pi;
    const double var_ref = m.kind() == eol::ModelKind::ou ? 2.0 / 1.99 : std::numbers::pi * std::numbers::pi / 3.0;
    for (int k = 0; k < 6; ++k) {
      const Eigen::ArrayXd c = x.col(k).array();
      const double mean = c.mean();
      const double var = (c - mean).square().sum() / (R - 1);
      const Eigen::ArrayXd sq = (c - mean_ref).square();
      const double var_se = std::sqrt((sq - sq.mean()).square().sum() / (R - 1) / R);
      EXPECT_NEAR(mean, mean_ref, 4.0 * std::sqrt(var / R)) << m.id() << " k=" << k;
      EXPECT_NEAR(var, var_ref, 4.0 * var_se) << m.id() << " k=" << k;
    }
  }
}

TEST(EmpiricalMeasure, SingleAtomAndConstantPath) {
  const auto traj = eol::simulate_path(eol::ou_model(1), InitialDistribution::stationary(), 1.0, 0.01, 1);
  const auto one = eol::empirical_measure(traj, 0.01);
  ASSERT_EQ(one.size(), 1);
  EXPECT_EQ(one.weights[0], 1.0);
  EXPECT_EQ(one.atoms(0, 0), traj.states(0, 0));

  eol::Trajectory constant;
  constant.h = 0.1;
  constant.states = Eigen::MatrixXd::Constant(1, 51, 0.7);
  const auto delta = eol::empirical_measure(constant, 5.0);
  EXPECT_EQ(delta.size(), 50);
  EXPECT_NEAR(delta.weights.sum(), 1.0, 1e-12);
  EXPECT_NEAR(delta.integrate([](const auto& x) { return x[0]; }), 0.7, 1e-14);

  const auto window = eol::empirical_measure(traj, 0.5, 0.25);
  EXPECT_EQ(window.size(), 50);
  EXPECT_EQ(window.atoms(0, 0), traj.states(0, 25));
  EXPECT_THROW(eol::empirical_measure(traj, 0.9, 0.5), eol::InvalidArgument);
  EXPECT_NO_THROW(window.validate());
}

TEST(EmpiricalMeasure, OuSecondMomentWithinBatchMeansError) {
  const auto traj = eol::simulate_path(eol::ou_model(1), InitialDistribution::stationary(), 100.0, 0.01, 5);
  const auto mu_t = eol::empirical_measure(traj, 100.0);
  const VectorXd x2 = mu_t.atoms.row(0).transpose().array().square();
  const double est = mu_t.integrate([](const auto& x) { return x[0] * x[0]; });
  const double se = eol::batch_means_stderr(x2);
  EXPECT_GT(se, 0.0);
  EXPECT_NEAR(est, 2.0 / 1.99, 4.0 * se);
}

TEST(XiCoefficients, ConstantPathAndStationaryMean) {
  const auto basis = eol::eigen_pairs(eol::ou_model(1), 3);
  eol::Trajectory constant;
  constant.h = 0.1;
  constant.states = Eigen::MatrixXd::Constant(1, 101, 0.4);
  const VectorXd xi = eol::xi_coefficients(constant, basis, 10.0);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(xi[i], basis.eval(i, vec({0.4})), 1e-14);

  const int R = 300;
  Eigen::MatrixXd all(R, 3);
  for (int r = 0; r < R; ++r) {
    const auto traj = eol::simulate_path(eol::ou_model(1), InitialDistribution::stationary(), 10.0, 0.01, 31, r);
    all.row(r) = eol::xi_coefficients(traj, basis, 10.0).transpose();
  }
  for (int i = 0; i < 3; ++i) {
    const Eigen::ArrayXd c = all.col(i).array();
    const double mean = c.mean();
    const double var = (c - mean).square().sum() / (R - 1);
    EXPECT_NEAR(mean, 0.0, 4.0 * std::sqrt(var / R)) << i;
    // Variance against the closed form, normal-theory standard error.
    const double exact = eol::xi_variance_exact(basis.eigenvalue(i), 10.0);
    EXPECT_NEAR(var, exact, 4.0 * exact * std::sqrt(2.0 / (R - 1))) << i;
  }
}

TEST(ModifiedDensity, LimitsAndNormalization) {
  auto basis = std::make_shared<const eol::SpectralBasis>(eol::eigen_pairs(eol::ou_model(1), 6));
  eol::ModifiedDensity md{basis, VectorXd::Zero(6), 0.0};
  EXPECT_EQ(md.eval(vec({1.3})), 1.0);

  md.xi = vec({0.3, -0.2, 0.1, 0.05, -0.04, 0.02});
  md.eps = 60.0;
  EXPECT_NEAR(md.eval(vec({0.8})), 1.0, 1e-15);

  eol::RngCursor rng(eol::CounterRng(2, 0, eol::Stream::synthetic));
  const auto& rule = eol::gauss_hermite(64);
  for (int trial = 0; trial < 20; ++trial) {
    for (int i = 0; i < 6; ++i) md.xi[i] = rng.normal();
    md.eps = rng.uniform();
    EXPECT_NEAR(rule.integrate([&](double x) { return md.eval(vec({x})); }), 1.0, 1e-8);
    EXPECT_DOUBLE_EQ(md.coefficients()[0], std::exp(-md.eps) * md.xi[0]);
  }
}

TEST(MonteCarlo, ConstantStatisticHasZeroError) {
  const auto res = eol::monte_carlo([](std::uint64_t) { return 2.5; }, 10);
  EXPECT_EQ(res.mean[0], 2.5);
  EXPECT_EQ(res.stderr_[0], 0.0);
  EXPECT_EQ(res.completed, 10);
  EXPECT_THROW(eol::monte_carlo([](std::uint64_t) { return 0.0; }, 1), eol::InvalidArgument);
}

TEST(MonteCarlo, GaussianStderr) {
  auto draw = [](std::uint64_t r) { return eol::CounterRng(77, r, eol::Stream::synthetic).normal_pair(0)[0]; };
  const auto res = eol::monte_carlo(draw, 1000);
  EXPECT_NEAR(res.stderr_[0], 1.0 / std::sqrt(1000.0), 0.15 / std::sqrt(1000.0));
}

TEST(MonteCarlo, ThreadCountDoesNotChangeValues) {
  const auto m = eol::ou_model(1);
  auto stat = [&](std::uint64_t r) {
    const auto traj = eol::simulate_path(m, InitialDistribution::stationary(), 5.0, 0.01, 4, r);
    return eol::w2_exact_1d(eol::empirical_measure(traj, 5.0), m);
  };
  const auto one = eol::monte_carlo(stat, 24, {.threads = 1});
  const auto eight = eol::monte_carlo(stat, 24, {.threads = 8});
  EXPECT_EQ(one.values, eight.values);
  EXPECT_EQ(one.mean, eight.mean);
  EXPECT_EQ(one.stderr_, eight.stderr_);
}

TEST(MonteCarlo, FailureCarriesLowestReplicaIndex) {
  auto stat = [](std::uint64_t r) -> double {
    if (r == 7 || r == 11) throw std::runtime_error("boom");
    return 1.0;
  };
  try {
    eol::monte_carlo(stat, 16, {.threads = 4});
    FAIL() << "expected ReplicaFailure";
  } catch (const eol::ReplicaFailure& e) {
    EXPECT_EQ(e.replica(), 7);
  }
}

TEST(MonteCarlo, CancelledRunReportsPrefix) {
  std::atomic<bool> cancel{true};
  const auto res = eol::monte_carlo([](std::uint64_t) { return 1.0; }, 50, {.threads = 1, .cancel = &cancel});
  EXPECT_FALSE(res.complete);
  EXPECT_LT(res.completed, 50);
}

TEST(SimulatePath, HalvingStepSizeWithinMonteCarloError) {
  const auto m = eol::ou_model(1);
  const double t = 25.0;
  auto run = [&](double h) {
    return eol::monte_carlo(
        [&](std::uint64_t r) {
          const auto traj = eol::simulate_path(m, InitialDistribution::stationary(), t, h, 55, r);
          const double w = eol::w2_exact_1d(eol::empirical_measure(traj, t), m);
          return w * w;
        },
        200);
  };
  const auto coarse = run(0.01), fine = run(0.005);
  const double se = std::hypot(coarse.stderr_[0], fine.stderr_[0]);
  EXPECT_LT(std::abs(coarse.mean[0] - fine.mean[0]), 3.0 * se);
}

}  // namespace
