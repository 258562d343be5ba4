#pragma once

#include "eol/model.hpp"

#include <vector>

namespace eol {

/// One eigenfunction label. OU: Hermite orders per coordinate. Torus: wave
/// vector with trig = 0 (cos) or 1 (sin). Box: cosine orders.
struct Mode {
  Eigen::VectorXi index;
  int trig = 0;
};

/// Nonzero eigenpairs of -L in ascending order (with multiplicity) for an
/// exactly solvable model. Eigenfunctions are orthonormal in L^2(mu) with
/// closed-form normalization constants.
class SpectralBasis {
 public:
  SpectralBasis(const DiffusionModel& model, std::vector<Mode> modes, Eigen::VectorXd eigenvalues);

  Eigen::Index size() const { return eigenvalues_.size(); }
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  double eigenvalue(Eigen::Index i) const { return eigenvalues_[i]; }
  double gap() const { return eigenvalues_[0]; }
  const std::vector<Mode>& modes() const { return modes_; }
  const DiffusionModel& model() const { return model_; }

  /// phi_i(x) for all i, written into `out` (size N).
  void eval_all(const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::Ref<Eigen::VectorXd> out) const;
  Eigen::VectorXd eval_all(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  double eval(Eigen::Index i, const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// Gradients of all eigenfunctions at x, one per column (d x N).
  Eigen::MatrixXd grad_all(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// Coefficient vector `a` evaluated as sum_i a_i phi_i(x).
  double series(const Eigen::Ref<const Eigen::VectorXd>& a,
                const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return a.dot(eval_all(x));
  }

 private:
  // Per-coordinate 1-D factor tables (value and derivative) up to max order.
  void coordinate_tables(const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::MatrixXd& val,
                         Eigen::MatrixXd& der) const;

  DiffusionModel model_;
  std::vector<Mode> modes_;
  Eigen::VectorXd eigenvalues_;
  int max_order_ = 0;
};

/// First N nonzero eigenpairs. Throws NoClosedFormSpectrum for power models
/// other than the Gaussian case.
SpectralBasis eigen_pairs(const DiffusionModel& model, Eigen::Index n);

/// All eigenpairs with eigenvalue <= lambda_max (capped at `cap` modes).
SpectralBasis eigen_pairs_below(const DiffusionModel& model, double lambda_max,
                                Eigen::Index cap = 200000);

/// Smallest N with exp(-lambda_N t_min) < tol.
Eigen::Index default_truncation(const DiffusionModel& model, double t_min, double tol = 1e-10,
                                Eigen::Index cap = 200000);

struct HeatKernelValue {
  double value = 0.0;       // truncated series
  double tail_bound = 0.0;  // bound on the neglected modes
  bool warning = false;     // tail_bound > 1e-6
};

/// p_t(x, y) = 1 + sum_{i<=N} e^{-lambda_i t} phi_i(x) phi_i(y).
HeatKernelValue heat_kernel(const SpectralBasis& basis, double t,
                            const Eigen::Ref<const Eigen::VectorXd>& x,
                            const Eigen::Ref<const Eigen::VectorXd>& y);

/// Exact (or upper-bounding, for the box) diagonal p_t(x, x) of the full series.
double heat_kernel_diagonal(const DiffusionModel& model, double t,
                            const Eigen::Ref<const Eigen::VectorXd>& x);

/// Full heat trace  1 + sum_i e^{-lambda_i t}  in closed form.
double heat_trace(const DiffusionModel& model, double t);

/// Mehler kernel  sum_n rho^n h_n(x) h_n(y)  for the unit OU process.
double mehler_kernel(double rho, double x, double y);

}  // namespace eol
