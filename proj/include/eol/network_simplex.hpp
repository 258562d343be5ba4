#pragma once

#include "eol/common.hpp"

#include <vector>

namespace eol {

struct PlanEntry {
  int i;
  int j;
  double weight;
};

/// Sparse coupling between two discrete measures.
struct TransportPlan {
  std::vector<PlanEntry> entries;
  double marginal_residual = 0.0;  // max |row/col sum - marginal|

  Eigen::MatrixXd dense(Eigen::Index n, Eigen::Index m) const;
};

struct NetworkSimplexResult {
  double cost = 0.0;  // sum of weight * cost over the plan
  TransportPlan plan;
  Eigen::VectorXd u;  // dual potentials, u_i + v_j <= C_ij
  Eigen::VectorXd v;
  long iterations = 0;
};

/// Exact balanced transport min <C, pi> over couplings of (a, b) by the
/// primal network simplex method with block-search pivoting. Weights must
/// be nonnegative with equal totals (InfeasibleMarginals otherwise).
NetworkSimplexResult network_simplex(const Eigen::Ref<const Eigen::VectorXd>& a,
                                     const Eigen::Ref<const Eigen::VectorXd>& b,
                                     const Eigen::Ref<const Eigen::MatrixXd>& cost,
                                     long max_iterations = -1);

}  // namespace eol
