#include "eol/sinkhorn.hpp"

#include <algorithm>
#include <cmath>

namespace eol {

namespace {

// Row-wise log-sum-exp of a dense array.
Eigen::ArrayXd row_lse(const Eigen::ArrayXXd& s) {
  const Eigen::ArrayXd mx = s.rowwise().maxCoeff();
  return mx + (s.colwise() - mx).exp().rowwise().sum().log();
}

struct Marginals {
  Eigen::ArrayXXd plan;
  Eigen::ArrayXd rows, cols;
  double residual = 0.0;  // L1 violation of both marginals
};

Marginals evaluate(const Eigen::ArrayXXd& kernel, const Eigen::ArrayXd& f, const Eigen::ArrayXd& g,
                   double reg, const Eigen::ArrayXd& a, const Eigen::ArrayXd& b) {
  Marginals m;
  m.plan = ((kernel.colwise() + f / reg).rowwise() + (g / reg).transpose()).exp();
  m.rows = m.plan.rowwise().sum();
  m.cols = m.plan.colwise().sum().transpose();
  m.residual = (m.rows - a).abs().sum() + (m.cols - b).abs().sum();
  return m;
}

// One damped Newton step on the concave dual
//   F(f, g) = <a, f> + <b, g> - reg * sum exp((f_i + g_j - C_ij) / reg).
// The Hessian is singular along (1, -1), so the last g coordinate is pinned.
bool newton_step(const Eigen::ArrayXXd& kernel, Eigen::ArrayXd& f, Eigen::ArrayXd& g, double reg,
                 const Eigen::ArrayXd& a, const Eigen::ArrayXd& b, Marginals& cur) {
  const Eigen::Index m = g.size();
  const Eigen::VectorXd ga = (reg * (a - cur.rows)).matrix();
  const Eigen::VectorXd gb = (reg * (b - cur.cols)).matrix();
  const Eigen::MatrixXd scaled = (cur.plan.colwise() / cur.rows).matrix();  // D_r^{-1} P
  Eigen::MatrixXd schur = -cur.plan.matrix().transpose() * scaled;
  schur.diagonal() += cur.cols.matrix();
  const Eigen::VectorXd rhs = gb - scaled.transpose() * ga;
  const Eigen::Index k = m - 1;
  Eigen::VectorXd dg = Eigen::VectorXd::Zero(m);
  if (k > 0) {
    Eigen::MatrixXd s = schur.topLeftCorner(k, k);
    s.diagonal().array() += 1e-14 * s.diagonal().cwiseAbs().maxCoeff();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
    if (ldlt.info() != Eigen::Success) return false;
    dg.head(k) = ldlt.solve(rhs.head(k));
  }
  const Eigen::ArrayXd df = (ga - cur.plan.matrix() * dg).array() / cur.rows;
  for (double step = 1.0; step > 1e-4; step *= 0.5) {
    const Eigen::ArrayXd f_try = f + step * df, g_try = g + step * dg.array();
    Marginals next = evaluate(kernel, f_try, g_try, reg, a, b);
    if (std::isfinite(next.residual) && next.residual < cur.residual) {
      f = f_try;
      g = g_try;
      cur = std::move(next);
      return true;
    }
  }
  return false;
}

}  // namespace

SinkhornResult sinkhorn(const Eigen::Ref<const Eigen::VectorXd>& a,
                        const Eigen::Ref<const Eigen::VectorXd>& b,
                        const Eigen::Ref<const Eigen::MatrixXd>& cost, double reg, long max_iter,
                        double tol, Eigen::VectorXd* f_io, Eigen::VectorXd* g_io, bool newton) {
  if (!(reg > 0.0)) throw InvalidArgument("sinkhorn: regularization must be positive");
  if (cost.rows() != a.size() || cost.cols() != b.size())
    throw InvalidArgument("sinkhorn: cost shape does not match the marginals");
  if ((a.array() <= 0.0).any() || (b.array() <= 0.0).any())
    throw InvalidArgument("sinkhorn: marginals must be strictly positive");

  const Eigen::ArrayXd aa = a.array(), bb = b.array();
  const Eigen::ArrayXd log_a = aa.log(), log_b = bb.log();
  Eigen::ArrayXd f = Eigen::ArrayXd::Zero(a.size()), g = Eigen::ArrayXd::Zero(b.size());
  if (f_io && f_io->size() == a.size()) f = f_io->array();
  if (g_io && g_io->size() == b.size()) g = g_io->array();
  const Eigen::ArrayXXd kernel = -cost.array() / reg;

  auto scale_once = [&] {
    f = reg * (log_a - row_lse(kernel.rowwise() + (g / reg).transpose()));
    g = reg * (log_b - row_lse((kernel.colwise() + f / reg).transpose()));
  };

  // Matrix scaling until the marginals are roughly right; Newton takes over
  // from there when enabled.
  const double switch_tol = newton ? std::max(tol, 1e-3) : tol;
  Marginals cur = evaluate(kernel, f, g, reg, aa, bb);
  long it = 0;
  while (it < max_iter && cur.residual > switch_tol) {
    for (int s = 0; s < 10 && it < max_iter; ++s, ++it) scale_once();
    cur = evaluate(kernel, f, g, reg, aa, bb);
  }
  if (newton) {
    for (int k = 0; k < 200 && cur.residual > tol; ++k) {
      ++it;
      if (!newton_step(kernel, f, g, reg, aa, bb, cur)) {
        for (int s = 0; s < 50; ++s, ++it) scale_once();
        cur = evaluate(kernel, f, g, reg, aa, bb);
      }
    }
  }

  SinkhornResult out;
  out.reg = reg;
  out.iterations = it;
  out.residual = cur.residual;
  out.converged = cur.residual <= tol;
  out.value = (cur.plan * cost.array()).sum();
  out.plan = cur.plan.matrix();
  if (f_io) *f_io = f.matrix();
  if (g_io) *g_io = g.matrix();
  return out;
}

SinkhornResult sinkhorn_annealed(const Eigen::Ref<const Eigen::VectorXd>& a,
                                 const Eigen::Ref<const Eigen::VectorXd>& b,
                                 const Eigen::Ref<const Eigen::MatrixXd>& cost,
                                 const AnnealOptions& options) {
  if (options.stages < 1 || !(options.start >= options.floor) || !(options.floor > 0.0))
    throw InvalidArgument("sinkhorn_annealed: invalid schedule");
  std::vector<double> entries(cost.data(), cost.data() + cost.size());
  const auto mid = entries.begin() + static_cast<std::ptrdiff_t>(entries.size() / 2);
  std::nth_element(entries.begin(), mid, entries.end());
  double median = *mid;
  if (!(median > 0.0)) median = std::max(cost.maxCoeff(), 1e-300);

  Eigen::VectorXd f, g;
  SinkhornResult result;
  std::vector<double> values;
  long total = 0;
  for (int s = 0; s < options.stages; ++s) {
    const double frac = options.stages == 1 ? 1.0 : double(s) / (options.stages - 1);
    const double reg = median * options.start * std::pow(options.floor / options.start, frac);
    result = sinkhorn(a, b, cost, reg, options.max_iter, options.tol, &f, &g, options.newton);
    total += result.iterations;
    values.push_back(result.value);
  }
  result.iterations = total;
  result.stage_values = std::move(values);
  if (!result.converged && options.throw_on_failure)
    throw SolverError("sinkhorn did not converge at the final regularization", result.residual);
  return result;
}

}  // namespace eol
