#pragma once

#include "eol/model.hpp"
#include "eol/spectral.hpp"

#include <atomic>
#include <functional>
#include <memory>
#include <string>

namespace eol {

/// Law of X_0.
struct InitialDistribution {
  enum class Kind { dirac, stationary, density_bounded };
  Kind kind = Kind::stationary;
  Eigen::VectorXd x0;
  double k = 1.0;  // sup of the density h_nu relative to mu
  std::function<void(RngCursor&, Eigen::Ref<Eigen::VectorXd>)> sampler;

  static InitialDistribution dirac(const Eigen::VectorXd& x0);
  static InitialDistribution stationary();
  /// nu = h mu with sup h <= k; the sampler must draw from nu.
  static InitialDistribution density_bounded(
      double k, std::function<void(RngCursor&, Eigen::Ref<Eigen::VectorXd>)> sampler);
};

/// Euler-Maruyama path on the grid t_j = j h, j = 0..floor(t_end / h).
struct Trajectory {
  double h = 0.0;
  StateMatrix states;  // d x (steps + 1)
  std::string model_id;
  std::uint64_t seed = 0;
  std::uint64_t replica = 0;

  Eigen::Index steps() const { return states.cols() - 1; }
  double t_end() const { return h * static_cast<double>(steps()); }
  double time(Eigen::Index j) const { return h * static_cast<double>(j); }
};

/// X_{j+1} = X_j + grad V(X_j) h + sqrt(2h) xi_j, then wrapped (torus) or
/// mirror-folded (box). Noise for step j comes from counter j of the
/// (seed, replica, path_noise) stream.
Trajectory simulate_path(const DiffusionModel& model, const InitialDistribution& init, double t_end,
                         double h, std::uint64_t seed, std::uint64_t replica = 0);

/// Weighted atoms; weights sum to one.
struct EmpiricalMeasure {
  StateMatrix atoms;  // d x n
  Eigen::VectorXd weights;

  Eigen::Index size() const { return atoms.cols(); }
  int dim() const { return static_cast<int>(atoms.rows()); }

  static EmpiricalMeasure uniform(StateMatrix atoms);
  /// Throws InvalidArgument unless weights are nonnegative and sum to 1.
  void validate(double tol = 1e-12) const;
  /// Integral of f against the measure.
  template <typename F>
  double integrate(F&& f) const {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < size(); ++i) sum += weights[i] * f(atoms.col(i));
    return sum;
  }
};

/// Left-endpoint Riemann discretization of (1/t) int_{b}^{b+t} delta_{X_s} ds:
/// grid states with t_j in [burn_in, burn_in + t), uniform weights.
EmpiricalMeasure empirical_measure(const Trajectory& traj, double t, double burn_in = 0.0);

/// xi_i = (1/t) int phi_i(X_s) ds over the window, trapezoidal rule.
Eigen::VectorXd xi_coefficients(const Trajectory& traj, const SpectralBasis& basis, double t,
                                double burn_in = 0.0);

/// f_{eps,t} = 1 + sum_i e^{-lambda_i eps} xi_i phi_i.
struct ModifiedDensity {
  std::shared_ptr<const SpectralBasis> basis;
  Eigen::VectorXd xi;
  double eps = 0.0;

  /// Damped coefficients e^{-lambda_i eps} xi_i.
  Eigen::VectorXd coefficients() const;
  double eval(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

inline double modified_density_eval(const ModifiedDensity& md,
                                    const Eigen::Ref<const Eigen::VectorXd>& x) {
  return md.eval(x);
}

/// Standard error of the mean of a correlated series by non-overlapping batches.
double batch_means_stderr(const Eigen::Ref<const Eigen::VectorXd>& series, int batches = 20);

/// Worker count: explicit request, else EOL_THREADS, else hardware concurrency.
int resolve_threads(int requested);

struct MonteCarloOptions {
  int threads = 0;
  const std::atomic<bool>* cancel = nullptr;  // stop scheduling new replicas when set
};

struct MonteCarloResult {
  Eigen::VectorXd mean;
  Eigen::VectorXd stderr_;
  Eigen::MatrixXd values;  // R x K, row r from replica r
  int completed = 0;       // replicas in the reported prefix
  bool complete = true;
};

/// Runs `replica(r)` for r = 0..R-1, each returning K statistics. The
/// reduction is ordered, so results do not depend on the thread count.
/// A throwing replica aborts the run with ReplicaFailure (lowest index).
MonteCarloResult monte_carlo(const std::function<Eigen::VectorXd(std::uint64_t)>& replica, int R,
                             const MonteCarloOptions& options = {});

/// Scalar convenience wrapper.
MonteCarloResult monte_carlo(const std::function<double(std::uint64_t)>& replica, int R,
                             const MonteCarloOptions& options = {});

}  // namespace eol
