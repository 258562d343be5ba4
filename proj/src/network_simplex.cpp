#include "eol/network_simplex.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

namespace eol {

Eigen::MatrixXd TransportPlan::dense(Eigen::Index n, Eigen::Index m) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, m);
  for (const auto& e : entries) out(e.i, e.j) += e.weight;
  return out;
}

namespace {

constexpr std::int8_t kLower = 1;
constexpr std::int8_t kTree = 0;
constexpr int kUp = 1;
constexpr int kDown = -1;

// Spanning-tree network simplex for an uncapacitated bipartite graph with
// an artificial root (thread / rev_thread / succ_num / last_succ tree
// representation).
class Solver {
 public:
  Solver(const Eigen::VectorXd& supply_a, const Eigen::VectorXd& supply_b,
         const Eigen::MatrixXd& cost)
      : n_(static_cast<int>(supply_a.size())),
        m_(static_cast<int>(supply_b.size())),
        node_num_(n_ + m_),
        arc_num_(static_cast<std::int64_t>(n_) * m_),
        all_arc_num_(arc_num_ + node_num_) {
    source_.resize(all_arc_num_);
    target_.resize(all_arc_num_);
    cost_.resize(all_arc_num_);
    flow_.assign(all_arc_num_, 0.0);
    state_.assign(all_arc_num_, kLower);

    double max_cost = 0.0;
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < m_; ++j) {
        const std::int64_t e = static_cast<std::int64_t>(i) * m_ + j;
        source_[e] = i;
        target_[e] = n_ + j;
        cost_[e] = cost(i, j);
        max_cost = std::max(max_cost, std::abs(cost_[e]));
      }
    eps_ = 1e-12 * std::max(max_cost, 1e-300);

    supply_.resize(node_num_ + 1);
    for (int i = 0; i < n_; ++i) supply_[i] = supply_a[i];
    for (int j = 0; j < m_; ++j) supply_[n_ + j] = -supply_b[j];

    const int all_nodes = node_num_ + 1;
    parent_.resize(all_nodes);
    pred_.resize(all_nodes);
    thread_.resize(all_nodes);
    rev_thread_.resize(all_nodes);
    succ_num_.resize(all_nodes);
    last_succ_.resize(all_nodes);
    pred_dir_.resize(all_nodes);
    pi_.resize(all_nodes);

    const double art_cost = (max_cost + 1.0) * node_num_;
    root_ = node_num_;
    parent_[root_] = -1;
    pred_[root_] = -1;
    thread_[root_] = 0;
    rev_thread_[0] = root_;
    succ_num_[root_] = node_num_ + 1;
    last_succ_[root_] = root_ - 1;
    supply_[root_] = 0.0;
    pi_[root_] = 0.0;

    for (int u = 0; u < node_num_; ++u) {
      const std::int64_t e = arc_num_ + u;
      parent_[u] = root_;
      pred_[u] = e;
      thread_[u] = u + 1;
      rev_thread_[u + 1] = u;
      succ_num_[u] = 1;
      last_succ_[u] = u;
      state_[e] = kTree;
      if (supply_[u] >= 0.0) {
        pred_dir_[u] = kUp;
        pi_[u] = 0.0;
        source_[e] = u;
        target_[e] = root_;
        flow_[e] = supply_[u];
        cost_[e] = 0.0;
      } else {
        pred_dir_[u] = kDown;
        pi_[u] = art_cost;
        source_[e] = root_;
        target_[e] = u;
        flow_[e] = -supply_[u];
        cost_[e] = art_cost;
      }
    }
    block_size_ = std::max<std::int64_t>(
        static_cast<std::int64_t>(std::sqrt(static_cast<double>(arc_num_))), 10);
  }

  long run(long max_iterations) {
    long it = 0;
    while (find_entering_arc()) {
      if (max_iterations >= 0 && it >= max_iterations)
        throw SolverError("network simplex iteration limit reached", static_cast<double>(it));
      find_join_node();
      if (!find_leaving_arc()) throw SolverError("network simplex: unbounded cycle", 0.0);
      change_flow();
      update_tree_structure();
      update_potential();
      ++it;
    }
    for (std::int64_t e = arc_num_; e < all_arc_num_; ++e)
      if (flow_[e] > 1e-9) throw InfeasibleMarginals("transport problem is infeasible");
    return it;
  }

  NetworkSimplexResult result(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    NetworkSimplexResult out;
    Eigen::VectorXd row = Eigen::VectorXd::Zero(n_), col = Eigen::VectorXd::Zero(m_);
    for (std::int64_t e = 0; e < arc_num_; ++e) {
      if (flow_[e] <= 0.0) continue;
      const int i = source_[e], j = target_[e] - n_;
      out.plan.entries.push_back({i, j, flow_[e]});
      out.cost += flow_[e] * cost_[e];
      row[i] += flow_[e];
      col[j] += flow_[e];
    }
    out.plan.marginal_residual =
        std::max((row - a).cwiseAbs().maxCoeff(), (col - b).cwiseAbs().maxCoeff());
    out.u.resize(n_);
    out.v.resize(m_);
    for (int i = 0; i < n_; ++i) out.u[i] = -pi_[i];
    for (int j = 0; j < m_; ++j) out.v[j] = pi_[n_ + j];
    return out;
  }

 private:
  double reduced(std::int64_t e) const {
    return state_[e] * (cost_[e] + pi_[source_[e]] - pi_[target_[e]]);
  }

  bool find_entering_arc() {
    double min = -eps_;
    std::int64_t cnt = block_size_;
    std::int64_t e;
    bool found = false;
    for (e = next_arc_; e != arc_num_; ++e) {
      const double c = reduced(e);
      if (c < min) {
        min = c;
        in_arc_ = e;
        found = true;
      }
      if (--cnt == 0) {
        if (found) goto search_end;
        cnt = block_size_;
      }
    }
    for (e = 0; e != next_arc_; ++e) {
      const double c = reduced(e);
      if (c < min) {
        min = c;
        in_arc_ = e;
        found = true;
      }
      if (--cnt == 0) {
        if (found) goto search_end;
        cnt = block_size_;
      }
    }
    if (!found) return false;
  search_end:
    next_arc_ = e;
    return true;
  }

  void find_join_node() {
    int u = source_[in_arc_], v = target_[in_arc_];
    while (u != v) {
      if (succ_num_[u] < succ_num_[v])
        u = parent_[u];
      else
        v = parent_[v];
    }
    join_ = u;
  }

  bool find_leaving_arc() {
    int first, second;
    if (state_[in_arc_] == kLower) {
      first = source_[in_arc_];
      second = target_[in_arc_];
    } else {
      first = target_[in_arc_];
      second = source_[in_arc_];
    }
    const double inf = std::numeric_limits<double>::infinity();
    delta_ = inf;
    int result = 0;
    for (int u = first; u != join_; u = parent_[u]) {
      const double d = pred_dir_[u] == kDown ? inf : flow_[pred_[u]];
      if (d < delta_) {
        delta_ = d;
        u_out_ = u;
        result = 1;
      }
    }
    for (int u = second; u != join_; u = parent_[u]) {
      const double d = pred_dir_[u] == kUp ? inf : flow_[pred_[u]];
      if (d <= delta_) {
        delta_ = d;
        u_out_ = u;
        result = 2;
      }
    }
    if (result == 1) {
      u_in_ = first;
      v_in_ = second;
    } else {
      u_in_ = second;
      v_in_ = first;
    }
    return result != 0;
  }

  void change_flow() {
    if (delta_ > 0.0) {
      const double val = state_[in_arc_] * delta_;
      flow_[in_arc_] += val;
      for (int u = source_[in_arc_]; u != join_; u = parent_[u]) {
        double& f = flow_[pred_[u]];
        f -= pred_dir_[u] * val;
        if (f < 0.0) f = 0.0;
      }
      for (int u = target_[in_arc_]; u != join_; u = parent_[u]) {
        double& f = flow_[pred_[u]];
        f += pred_dir_[u] * val;
        if (f < 0.0) f = 0.0;
      }
    }
    state_[in_arc_] = kTree;
    flow_[pred_[u_out_]] = 0.0;
    state_[pred_[u_out_]] = kLower;
  }

  void update_tree_structure() {
    const int old_rev_thread = rev_thread_[u_out_];
    const int old_succ_num = succ_num_[u_out_];
    const int old_last_succ = last_succ_[u_out_];
    v_out_ = parent_[u_out_];

    if (u_in_ == u_out_) {
      parent_[u_in_] = v_in_;
      pred_[u_in_] = in_arc_;
      pred_dir_[u_in_] = u_in_ == source_[in_arc_] ? kUp : kDown;
      if (thread_[v_in_] != u_out_) {
        int after = thread_[old_last_succ];
        thread_[old_rev_thread] = after;
        rev_thread_[after] = old_rev_thread;
        after = thread_[v_in_];
        thread_[v_in_] = u_out_;
        rev_thread_[u_out_] = v_in_;
        thread_[old_last_succ] = after;
        rev_thread_[after] = old_last_succ;
      }
    } else {
      const int thread_continue =
          old_rev_thread == v_in_ ? thread_[old_last_succ] : thread_[v_in_];

      int stem = u_in_;
      int par_stem = v_in_;
      int next_stem;
      int last = last_succ_[u_in_];
      int before, after = thread_[last];
      thread_[v_in_] = u_in_;
      dirty_revs_.clear();
      dirty_revs_.push_back(v_in_);
      while (stem != u_out_) {
        next_stem = parent_[stem];
        thread_[last] = next_stem;
        dirty_revs_.push_back(last);

        before = rev_thread_[stem];
        thread_[before] = after;
        rev_thread_[after] = before;

        parent_[stem] = par_stem;
        par_stem = stem;
        stem = next_stem;

        last = last_succ_[stem] == last_succ_[par_stem] ? rev_thread_[par_stem] : last_succ_[stem];
        after = thread_[last];
      }
      parent_[u_out_] = par_stem;
      thread_[last] = thread_continue;
      rev_thread_[thread_continue] = last;
      last_succ_[u_out_] = last;

      if (old_rev_thread != v_in_) {
        thread_[old_rev_thread] = after;
        rev_thread_[after] = old_rev_thread;
      }
      for (int u : dirty_revs_) rev_thread_[thread_[u]] = u;

      int tmp_sc = 0, tmp_ls = last_succ_[u_out_];
      for (int u = u_out_, p = parent_[u]; u != u_in_; u = p, p = parent_[u]) {
        pred_[u] = pred_[p];
        pred_dir_[u] = -pred_dir_[p];
        tmp_sc += succ_num_[u] - succ_num_[p];
        succ_num_[u] = tmp_sc;
        last_succ_[p] = tmp_ls;
      }
      pred_[u_in_] = in_arc_;
      pred_dir_[u_in_] = u_in_ == source_[in_arc_] ? kUp : kDown;
      succ_num_[u_in_] = old_succ_num;
    }

    const int up_limit_out = last_succ_[join_] == v_in_ ? join_ : -1;
    const int last_succ_out = last_succ_[u_out_];
    for (int u = v_in_; u != -1 && last_succ_[u] == v_in_; u = parent_[u])
      last_succ_[u] = last_succ_out;

    if (join_ != old_rev_thread && v_in_ != old_rev_thread) {
      for (int u = v_out_; u != up_limit_out && last_succ_[u] == old_last_succ; u = parent_[u])
        last_succ_[u] = old_rev_thread;
    } else if (last_succ_out != old_last_succ) {
      for (int u = v_out_; u != up_limit_out && last_succ_[u] == old_last_succ; u = parent_[u])
        last_succ_[u] = last_succ_out;
    }

    for (int u = v_in_; u != join_; u = parent_[u]) succ_num_[u] += old_succ_num;
    for (int u = v_out_; u != join_; u = parent_[u]) succ_num_[u] -= old_succ_num;
  }

  void update_potential() {
    const double sigma = pi_[v_in_] - pi_[u_in_] - pred_dir_[u_in_] * cost_[in_arc_];
    const int end = thread_[last_succ_[u_in_]];
    for (int u = u_in_; u != end; u = thread_[u]) pi_[u] += sigma;
  }

  int n_, m_, node_num_;
  std::int64_t arc_num_, all_arc_num_;
  std::vector<std::int32_t> source_, target_;
  std::vector<double> cost_, flow_;
  std::vector<std::int8_t> state_;
  std::vector<double> supply_, pi_;
  std::vector<int> parent_, thread_, rev_thread_, succ_num_, last_succ_, pred_dir_;
  std::vector<std::int64_t> pred_;
  std::vector<int> dirty_revs_;
  int root_ = 0;
  double eps_ = 0.0;
  std::int64_t block_size_ = 10, next_arc_ = 0, in_arc_ = 0;
  int join_ = 0, u_in_ = 0, v_in_ = 0, u_out_ = 0, v_out_ = 0;
  double delta_ = 0.0;
};

}  // namespace

NetworkSimplexResult network_simplex(const Eigen::Ref<const Eigen::VectorXd>& a,
                                     const Eigen::Ref<const Eigen::VectorXd>& b,
                                     const Eigen::Ref<const Eigen::MatrixXd>& cost,
                                     long max_iterations) {
  if (cost.rows() != a.size() || cost.cols() != b.size())
    throw InvalidArgument("network_simplex: cost shape does not match the marginals");
  if (a.size() == 0 || b.size() == 0) throw InvalidArgument("network_simplex: empty marginal");
  if ((a.array() < 0.0).any() || (b.array() < 0.0).any())
    throw InfeasibleMarginals("negative marginal weight");
  const double sa = a.sum(), sb = b.sum();
  if (std::abs(sa - sb) > 1e-9 * std::max(1.0, std::abs(sa)))
    throw InfeasibleMarginals("marginal totals differ");
  if (!cost.allFinite()) throw InvalidArgument("network_simplex: non-finite cost");

  // Drop zero-mass atoms; they never carry flow.
  std::vector<int> rows, cols;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (a[i] > 0.0) rows.push_back(static_cast<int>(i));
  for (Eigen::Index j = 0; j < b.size(); ++j)
    if (b[j] > 0.0) cols.push_back(static_cast<int>(j));
  if (rows.empty() || cols.empty()) throw InfeasibleMarginals("all marginal weights are zero");

  Eigen::VectorXd ra(rows.size()), rb(cols.size());
  Eigen::MatrixXd rc(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i) ra[i] = a[rows[i]];
  for (std::size_t j = 0; j < cols.size(); ++j) rb[j] = b[cols[j]];
  for (std::size_t j = 0; j < cols.size(); ++j)
    for (std::size_t i = 0; i < rows.size(); ++i) rc(i, j) = cost(rows[i], cols[j]);
  // Absorb the rounding-level imbalance into the largest sink.
  Eigen::Index jmax;
  rb.maxCoeff(&jmax);
  rb[jmax] += ra.sum() - rb.sum();

  Solver solver(ra, rb, rc);
  const long iterations = solver.run(max_iterations);
  NetworkSimplexResult reduced = solver.result(ra, rb);

  NetworkSimplexResult out;
  out.iterations = iterations;
  out.cost = reduced.cost;
  for (const auto& e : reduced.plan.entries)
    out.plan.entries.push_back({rows[static_cast<std::size_t>(e.i)], cols[static_cast<std::size_t>(e.j)], e.weight});
  Eigen::VectorXd row = Eigen::VectorXd::Zero(a.size()), col = Eigen::VectorXd::Zero(b.size());
  for (const auto& e : out.plan.entries) {
    row[e.i] += e.weight;
    col[e.j] += e.weight;
  }
  out.plan.marginal_residual =
      std::max((row - a).cwiseAbs().maxCoeff(), (col - b).cwiseAbs().maxCoeff());
  // Dual potentials for dropped atoms: the tightest feasible value.
  out.u = Eigen::VectorXd::Zero(a.size());
  out.v = Eigen::VectorXd::Zero(b.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out.u[rows[i]] = reduced.u[static_cast<Eigen::Index>(i)];
  for (std::size_t j = 0; j < cols.size(); ++j) out.v[cols[j]] = reduced.v[static_cast<Eigen::Index>(j)];
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (a[i] <= 0.0) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < cols.size(); ++j) best = std::min(best, cost(i, cols[j]) - out.v[cols[j]]);
      out.u[i] = best;
    }
  for (Eigen::Index j = 0; j < b.size(); ++j)
    if (b[j] <= 0.0) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < rows.size(); ++i) best = std::min(best, cost(rows[i], j) - out.u[rows[i]]);
      out.v[j] = best;
    }
  return out;
}

}  // namespace eol
