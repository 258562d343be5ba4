#pragma once

#include "eol/common.hpp"

#include <vector>

namespace eol {

struct SinkhornResult {
  double value = 0.0;       // <C, pi> of the final plan
  Eigen::MatrixXd plan;
  bool converged = false;
  double residual = 0.0;    // L1 violation of both marginals
  long iterations = 0;
  double reg = 0.0;         // final regularization
  std::vector<double> stage_values;  // <C, pi> after each anneal stage
};

/// Entropic OT at a fixed regularization: log-domain Sinkhorn scaling,
/// optionally finished by damped Newton steps on the dual (quadratic
/// convergence where plain scaling stalls at small reg). Starts from the
/// given dual potentials when their sizes match (warm start).
SinkhornResult sinkhorn(const Eigen::Ref<const Eigen::VectorXd>& a,
                        const Eigen::Ref<const Eigen::VectorXd>& b,
                        const Eigen::Ref<const Eigen::MatrixXd>& cost, double reg,
                        long max_iter = 100000, double tol = 1e-9,
                        Eigen::VectorXd* f = nullptr, Eigen::VectorXd* g = nullptr,
                        bool newton = true);

struct AnnealOptions {
  double start = 1.0;     // first regularization, relative to the median cost
  double floor = 2e-4;    // last regularization, relative to the median cost
  int stages = 18;        // geometric steps from start to floor
  long max_iter = 100000; // scaling iterations per stage
  double tol = 1e-9;
  bool newton = true;
  bool throw_on_failure = true;
};

/// Geometric epsilon-scaling with warm-started potentials. Throws
/// SolverError (with the residual) if the final stage does not converge.
SinkhornResult sinkhorn_annealed(const Eigen::Ref<const Eigen::VectorXd>& a,
                                 const Eigen::Ref<const Eigen::VectorXd>& b,
                                 const Eigen::Ref<const Eigen::MatrixXd>& cost,
                                 const AnnealOptions& options = {});

}  // namespace eol
