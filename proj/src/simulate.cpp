#include "eol/simulate.hpp"

#include <cmath>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace eol {

InitialDistribution InitialDistribution::dirac(const Eigen::VectorXd& x0) {
  InitialDistribution init;
  init.kind = Kind::dirac;
  init.x0 = x0;
  return init;
}

InitialDistribution InitialDistribution::stationary() { return {}; }

InitialDistribution InitialDistribution::density_bounded(
    double k, std::function<void(RngCursor&, Eigen::Ref<Eigen::VectorXd>)> sampler) {
  if (!(k >= 1.0)) throw InvalidArgument("density-bounded initial law needs k >= 1");
  if (!sampler) throw InvalidArgument("density-bounded initial law needs a sampler");
  InitialDistribution init;
  init.kind = Kind::density_bounded;
  init.k = k;
  init.sampler = std::move(sampler);
  return init;
}

Trajectory simulate_path(const DiffusionModel& model, const InitialDistribution& init, double t_end,
                         double h, std::uint64_t seed, std::uint64_t replica) {
  if (!(h > 0.0)) throw InvalidArgument("simulate_path: step must be positive");
  if (!(t_end >= h)) throw InvalidArgument("simulate_path: t_end must be >= h");
  const int d = model.dim();
  const auto steps = static_cast<Eigen::Index>(std::floor(t_end / h + 1e-9));

  Trajectory traj;
  traj.h = h;
  traj.model_id = model.id();
  traj.seed = seed;
  traj.replica = replica;
  traj.states.resize(d, steps + 1);

  Eigen::VectorXd x(d);
  switch (init.kind) {
    case InitialDistribution::Kind::dirac:
      if (init.x0.size() != d) throw InvalidArgument("initial point has wrong dimension");
      x = init.x0;
      model.domain().project(x);
      break;
    case InitialDistribution::Kind::stationary: {
      RngCursor rng(CounterRng(seed, replica, Stream::initial_state));
      model.draw(rng, x);
      break;
    }
    case InitialDistribution::Kind::density_bounded: {
      RngCursor rng(CounterRng(seed, replica, Stream::initial_state));
      init.sampler(rng, x);
      break;
    }
  }
  traj.states.col(0) = x;

  const CounterRng noise(seed, replica, Stream::path_noise);
  const double scale = std::sqrt(2.0 * h);
  Eigen::VectorXd drift(d), xi(d);
  for (Eigen::Index j = 0; j < steps; ++j) {
    model.grad_potential(x, drift);
    noise.fill_normal(static_cast<std::uint64_t>(j), xi);
    x += h * drift + scale * xi;
    if (!x.allFinite()) throw NumericalBlowup(j + 1, x.norm());
    model.domain().project(x);
    traj.states.col(j + 1) = x;
  }
  return traj;
}

EmpiricalMeasure EmpiricalMeasure::uniform(StateMatrix atoms) {
  if (atoms.cols() < 1) throw InvalidArgument("empirical measure needs at least one atom");
  EmpiricalMeasure m;
  const auto n = atoms.cols();
  m.atoms = std::move(atoms);
  m.weights = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  return m;
}

void EmpiricalMeasure::validate(double tol) const {
  if (size() < 1) throw InvalidArgument("empirical measure has no atoms");
  if (weights.size() != size()) throw InvalidArgument("weights and atoms differ in length");
  if ((weights.array() < 0.0).any()) throw InvalidArgument("negative weight");
  if (std::abs(weights.sum() - 1.0) > tol) throw InvalidArgument("weights do not sum to one");
}

namespace {

struct Window {
  Eigen::Index first;
  Eigen::Index count;  // number of steps in the window
};

Window window_of(const Trajectory& traj, double t, double burn_in) {
  if (!(t > 0.0) || !(burn_in >= 0.0)) throw InvalidArgument("window needs t > 0, burn_in >= 0");
  const auto first = static_cast<Eigen::Index>(std::llround(burn_in / traj.h));
  const auto count = static_cast<Eigen::Index>(std::llround(t / traj.h));
  if (count < 1) throw InvalidArgument("empty empirical window");
  if (first + count > traj.steps())
    throw InvalidArgument("window exceeds the trajectory span");
  return {first, count};
}

}  // namespace

EmpiricalMeasure empirical_measure(const Trajectory& traj, double t, double burn_in) {
  const Window w = window_of(traj, t, burn_in);
  return EmpiricalMeasure::uniform(traj.states.middleCols(w.first, w.count));
}

Eigen::VectorXd xi_coefficients(const Trajectory& traj, const SpectralBasis& basis, double t,
                                double burn_in) {
  const Window w = window_of(traj, t, burn_in);
  const Eigen::Index last = w.first + w.count;
  const Eigen::Index n = w.count;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(basis.size()), phi(basis.size());
  for (Eigen::Index j = w.first; j <= last; ++j) {
    basis.eval_all(traj.states.col(j), phi);
    const double weight = (j == w.first || j == last) ? 0.5 : 1.0;
    acc += weight * phi;
  }
  return acc / static_cast<double>(n);
}

Eigen::VectorXd ModifiedDensity::coefficients() const {
  return ((-eps * basis->eigenvalues().array()).exp() * xi.array()).matrix();
}

double ModifiedDensity::eval(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return 1.0 + coefficients().dot(basis->eval_all(x));
}

double batch_means_stderr(const Eigen::Ref<const Eigen::VectorXd>& series, int batches) {
  const Eigen::Index len = series.size() / batches;
  if (batches < 2 || len < 1) throw InvalidArgument("batch_means_stderr: series too short");
  Eigen::VectorXd means(batches);
  for (int b = 0; b < batches; ++b) means[b] = series.segment(b * len, len).mean();
  const double var = (means.array() - means.mean()).square().sum() / (batches - 1);
  return std::sqrt(var / batches);
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("EOL_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

MonteCarloResult monte_carlo(const std::function<Eigen::VectorXd(std::uint64_t)>& replica, int R,
                             const MonteCarloOptions& options) {
  if (R < 2) throw InvalidArgument("monte_carlo: R must be >= 2");
  const int threads = std::min(resolve_threads(options.threads), R);

  std::vector<Eigen::VectorXd> rows(static_cast<std::size_t>(R));
  std::vector<char> done(static_cast<std::size_t>(R), 0);
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  int error_replica = R;
  std::string error_what;

  auto worker = [&] {
    while (!failed.load()) {
      if (options.cancel && options.cancel->load()) return;
      const int r = next.fetch_add(1);
      if (r >= R) return;
      try {
        rows[static_cast<std::size_t>(r)] = replica(static_cast<std::uint64_t>(r));
        done[static_cast<std::size_t>(r)] = 1;
      } catch (const std::exception& e) {
        std::lock_guard lock(error_mutex);
        if (r < error_replica) {
          error_replica = r;
          error_what = e.what();
        }
        failed.store(true);
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failed.load()) throw ReplicaFailure(error_replica, error_what);

  int prefix = 0;
  while (prefix < R && done[static_cast<std::size_t>(prefix)]) ++prefix;
  MonteCarloResult out;
  out.completed = prefix;
  out.complete = prefix == R;
  if (prefix == 0) return out;
  const Eigen::Index k = rows[0].size();
  out.values.resize(prefix, k);
  for (int r = 0; r < prefix; ++r) {
    if (rows[static_cast<std::size_t>(r)].size() != k)
      throw ReplicaFailure(r, "replica returned a statistic vector of inconsistent length");
    out.values.row(r) = rows[static_cast<std::size_t>(r)].transpose();
  }
  out.mean = out.values.colwise().mean().transpose();
  out.stderr_ = Eigen::VectorXd::Zero(k);
  if (prefix >= 2) {
    for (Eigen::Index c = 0; c < k; ++c) {
      const double var =
          (out.values.col(c).array() - out.mean[c]).square().sum() / (prefix - 1);
      out.stderr_[c] = std::sqrt(var / prefix);
    }
  }
  return out;
}

MonteCarloResult monte_carlo(const std::function<double(std::uint64_t)>& replica, int R,
                             const MonteCarloOptions& options) {
  return monte_carlo(
      std::function<Eigen::VectorXd(std::uint64_t)>(
          [&](std::uint64_t r) { return Eigen::VectorXd::Constant(1, replica(r)); }),
      R, options);
}

}  // namespace eol
