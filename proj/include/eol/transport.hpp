#pragma once

#include "eol/network_simplex.hpp"
#include "eol/quadrature.hpp"
#include "eol/simulate.hpp"
#include "eol/sinkhorn.hpp"
#include "eol/spectral.hpp"

#include <iosfwd>
#include <limits>

namespace eol {

enum class CostKind { rho_power, truncated_rho };

/// Ground cost built from the domain metric: rho^p, or the bounded 1 ^ rho
/// used by the modified L1 distance.
struct CostSpec {
  CostKind kind = CostKind::rho_power;
  double p = 2.0;

  static CostSpec rho_power(double p);
  static CostSpec truncated();

  double operator()(const DomainSpec& dom, const Eigen::Ref<const Eigen::VectorXd>& x,
                    const Eigen::Ref<const Eigen::VectorXd>& y) const;
  /// Converts an optimal cost int c dpi into the distance it defines.
  double distance_from_cost(double cost) const;
  std::string name() const;
};

Eigen::MatrixXd cost_matrix(const DomainSpec& dom, const StateMatrix& x, const StateMatrix& y,
                            const CostSpec& cost);

struct DistanceResult {
  double value = 0.0;  // W_p, or the truncated-cost distance
  double cost = 0.0;   // int c dpi of the returned plan
  TransportPlan plan;
  std::string solver;
  double reg = 0.0;    // final entropic regularization (Sinkhorn only)
  long iterations = 0;
};

/// Exact optimal transport between two weighted atom sets (network simplex).
/// At most 4096 atoms per side.
DistanceResult wp_discrete(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                           const DomainSpec& dom, const CostSpec& cost);

/// Annealed entropic approximation of wp_discrete. Needs strictly positive
/// weights; throws SolverError when the final stage does not converge.
DistanceResult wp_sinkhorn(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                           const DomainSpec& dom, const CostSpec& cost,
                           const AnnealOptions& options = {});

enum class OtSolver { automatic, network_simplex, sinkhorn };

struct MuDistanceOptions {
  Eigen::Index m = 2048;  // mu-sample size
  Eigen::Index n = 0;     // atoms kept from the empirical measure (0: same as m)
  int resamples = 1;      // independent mu-samples to average over
  bool control = true;    // subtract the same statistic for an i.i.d. n-sample
  OtSolver solver = OtSolver::automatic;
  AnnealOptions anneal;
};

/// Sample-based transport cost between an empirical measure and mu. All
/// fields are in cost units (W_p^p, or the truncated-cost distance).
struct MuDistance {
  /// Bias-corrected cost: with distances D = distance_from_cost(.) and
  /// S = D_raw^2 - D_control^2, the cost of the signed distance
  /// sign(S) sqrt|S|; for rho^2 this is raw - control. Equals raw without a
  /// control.
  double estimate = 0.0;
  double raw = 0.0;       // mean cost to the mu-samples
  double control = 0.0;   // mean cost of an i.i.d. n-sample to the same mu-samples
  double stderr_ = 0.0;   // over resamples (0 with a single resample)
  Eigen::Index m = 0;
  Eigen::Index n = 0;
  int resamples = 0;
  std::string solver;
};

/// Compares emp with m-point i.i.d. discretizations of mu. When emp has more
/// than n atoms it is thinned by systematic sampling at a random offset,
/// which for a path measure keeps evenly spaced times. The i.i.d. control
/// estimates the finite-sample bias that the raw value carries, which for
/// d >= 3 decays only like n^{-2/d}. Resample k of replica r draws
/// sample_mu(m, seed, r * resamples + k).
MuDistance distance_to_mu(const EmpiricalMeasure& emp, const DiffusionModel& model,
                          const CostSpec& cost, const MuDistanceOptions& options,
                          std::uint64_t seed, std::uint64_t replica = 0);

/// A bounded Lipschitz test function with its gradient.
struct TestFunction {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
};

/// |emp(f)| for f with |f| <= 1, |grad f| <= 1 and mu(f) = 0. Such f is
/// 2-Lipschitz for the cost 1 ^ rho, so the value is at most twice the
/// truncated-cost distance to mu. Admissibility is checked on the
/// atoms, on mu-samples and (d = 1) on a grid; throws InvalidArgument if f
/// is not admissible.
double dual_lower_bound(const EmpiricalMeasure& emp, const DiffusionModel& model,
                        const TestFunction& f, std::uint64_t seed = 0);

/// 4 sum_i a_i^2 / lambda_i for f - 1 = sum_i a_i phi_i.
double ledoux_bound(const Eigen::Ref<const Eigen::VectorXd>& a, const SpectralBasis& basis);

/// 4 sum_i lambda_i^{-1} e^{-2 lambda_i eps} xi_i^2.
double spectral_w2_bound(const ModifiedDensity& md);

/// M_p(a, b) = 1{a ^ b > 0} (a^{2-p} - b^{2-p}) / ((2-p)(a-b)), with the
/// logarithmic case at p = 2 and a^{1-p} on the diagonal.
double mp_mean(double a, double b, double p);

/// int_0^1 (a + s (b - a))^{1-p} ds. Equals mp_mean when a, b > 0; stays
/// finite with one argument zero when p < 2.
double interpolation_weight(double a, double b, double p);

/// Quadrature against mu for a one-dimensional spectral model: Gauss-Hermite
/// (256 nodes) for OU, 4096-point trapezoid for the circle, Gauss-Legendre
/// for the interval.
QuadratureRule invariant_quadrature(const DiffusionModel& model);

/// Two densities f_k = 1 + sum_i c_{k,i} phi_i against mu.
struct DensityPair {
  std::shared_ptr<const SpectralBasis> basis;
  Eigen::VectorXd c1;
  Eigen::VectorXd c2;

  double f1(const Eigen::Ref<const Eigen::VectorXd>& x) const { return 1.0 + basis->series(c1, x); }
  double f2(const Eigen::Ref<const Eigen::VectorXd>& x) const { return 1.0 + basis->series(c2, x); }
};

struct WpBounds {
  double bound_sym = 0.0;  // p^p 2^{p-1} int |grad g|^p / (f1 + f2)^{p-1}
  double bound_f1 = 0.0;   // p^p int |grad g|^p / f1^{p-1}; +inf where f1 vanishes
  double bound_Mp = 0.0;   // int |grad g|^p M_p(f1, f2)
  double min = 0.0;
  /// int |grad g|^2 / M_p(f1, f2), the reciprocal-weight variant of bound_Mp.
  /// Reported for comparison only; it is not an upper bound in general.
  double reciprocal_Mp = 0.0;
};

/// The three upper bounds on W_p(f1 mu, f2 mu)^p with g = (-L)^{-1}(f2 - f1)
/// applied spectrally. One-dimensional bases only.
WpBounds wp_density_bounds(const DensityPair& pair, double p);

/// bound_Mp computed by integrating the interpolation weight over s with
/// graded composite Gauss-Legendre (s_nodes per panel) instead of the closed
/// form. Used as an independent check.
double mp_bound_by_interpolation(const DensityPair& pair, double p, int s_nodes = 20);

/// Random density f = floor + (1 - floor) q^2 / mu(q^2) where q is a
/// Gaussian combination of the constant and the first k eigenfunctions.
/// Returns the coefficients of f - 1 in `basis`, which must contain every
/// mode of q^2 (checked at the quadrature nodes). One-dimensional bases.
Eigen::VectorXd random_density_coefficients(const SpectralBasis& basis, int k, double floor,
                                            RngCursor& rng);

/// Plan rows "i,j,weight" with a header line.
void write_plan_csv(std::ostream& os, const TransportPlan& plan);

}  // namespace eol
