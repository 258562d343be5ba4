#include "eol/spectral.hpp"

#include "eol/special.hpp"

#include <algorithm>
#include <numbers>
#include <numeric>

namespace eol {

namespace {

struct Candidate {
  double lambda;
  Mode mode;
};

bool candidate_less(const Candidate& a, const Candidate& b) {
  if (a.lambda != b.lambda) return a.lambda < b.lambda;
  for (Eigen::Index k = 0; k < a.mode.index.size(); ++k)
    if (a.mode.index[k] != b.mode.index[k]) return a.mode.index[k] < b.mode.index[k];
  return a.mode.trig < b.mode.trig;
}

// Visits every integer vector in [lo, hi]^d.
template <typename F>
void for_each_index(int d, int lo, int hi, F&& f) {
  Eigen::VectorXi idx = Eigen::VectorXi::Constant(d, lo);
  while (true) {
    f(idx);
    int k = d - 1;
    while (k >= 0 && idx[k] == hi) idx[k--] = lo;
    if (k < 0) return;
    ++idx[k];
  }
}

std::vector<Candidate> enumerate_below(const DiffusionModel& model, double lambda_max,
                                       Eigen::Index cap) {
  const int d = model.dim();
  std::vector<Candidate> out;
  auto push = [&](double lambda, const Eigen::VectorXi& idx, int trig) {
    if (static_cast<Eigen::Index>(out.size()) >= cap)
      throw InvalidArgument("spectral enumeration exceeds the mode cap");
    out.push_back({lambda, Mode{idx, trig}});
  };
  switch (model.kind()) {
    case ModelKind::ou: {
      const double c = model.ou_rate();
      const int top = static_cast<int>(std::floor(lambda_max / c + 1e-12));
      if (top < 1) break;
      for_each_index(d, 0, top, [&](const Eigen::VectorXi& idx) {
        const int order = idx.sum();
        if (order >= 1 && order <= top) push(c * order, idx, 0);
      });
      break;
    }
    case ModelKind::torus: {
      const int top = static_cast<int>(std::floor(std::sqrt(lambda_max) + 1e-12));
      if (top < 1) break;
      for_each_index(d, -top, top, [&](const Eigen::VectorXi& idx) {
        const int sq = idx.squaredNorm();
        if (sq < 1 || sq > lambda_max + 1e-12) return;
        int first = 0;
        while (idx[first] == 0) ++first;
        if (idx[first] < 0) return;  // one representative per +-k pair
        push(sq, idx, 0);
        push(sq, idx, 1);
      });
      break;
    }
    case ModelKind::box: {
      const Eigen::ArrayXd scale =
          std::numbers::pi / (model.domain().upper - model.domain().lower).array();
      const int top = static_cast<int>(std::floor(std::sqrt(lambda_max) / scale.minCoeff() + 1e-12));
      if (top < 1) break;
      for_each_index(d, 0, top, [&](const Eigen::VectorXi& idx) {
        if (idx.sum() == 0) return;
        const double lambda = (idx.cast<double>().array() * scale).square().sum();
        if (lambda <= lambda_max * (1 + 1e-12)) push(lambda, idx, 0);
      });
      break;
    }
    case ModelKind::power:
      throw NoClosedFormSpectrum("model " + model.id() + " has no closed-form spectrum");
  }
  std::sort(out.begin(), out.end(), candidate_less);
  return out;
}

SpectralBasis make_basis(const DiffusionModel& model, std::vector<Candidate> cand) {
  std::vector<Mode> modes;
  Eigen::VectorXd lambda(static_cast<Eigen::Index>(cand.size()));
  modes.reserve(cand.size());
  for (std::size_t i = 0; i < cand.size(); ++i) {
    lambda[static_cast<Eigen::Index>(i)] = cand[i].lambda;
    modes.push_back(std::move(cand[i].mode));
  }
  return SpectralBasis(model, std::move(modes), std::move(lambda));
}

}  // namespace

SpectralBasis::SpectralBasis(const DiffusionModel& model, std::vector<Mode> modes,
                             Eigen::VectorXd eigenvalues)
    : model_(model), modes_(std::move(modes)), eigenvalues_(std::move(eigenvalues)) {
  if (eigenvalues_.size() == 0) throw InvalidArgument("spectral basis must be non-empty");
  for (const Mode& m : modes_) max_order_ = std::max(max_order_, m.index.cwiseAbs().maxCoeff());
}

void SpectralBasis::coordinate_tables(const Eigen::Ref<const Eigen::VectorXd>& x,
                                      Eigen::MatrixXd& val, Eigen::MatrixXd& der) const {
  const int d = model_.dim();
  val.resize(max_order_ + 1, d);
  der.resize(max_order_ + 1, d);
  if (model_.kind() == ModelKind::ou) {
    const double s = std::sqrt(model_.ou_rate());
    for (int j = 0; j < d; ++j) {
      val.col(j) = hermite_normalized(max_order_, s * x[j]);
      der(0, j) = 0.0;
      for (int n = 1; n <= max_order_; ++n) der(n, j) = s * std::sqrt(double(n)) * val(n - 1, j);
    }
  } else {  // box: sqrt(2) cos(k pi (x - a) / L)
    for (int j = 0; j < d; ++j) {
      const double len = model_.domain().upper[j] - model_.domain().lower[j];
      const double u = std::numbers::pi * (x[j] - model_.domain().lower[j]) / len;
      val(0, j) = 1.0;
      der(0, j) = 0.0;
      for (int n = 1; n <= max_order_; ++n) {
        val(n, j) = std::numbers::sqrt2 * std::cos(n * u);
        der(n, j) = -std::numbers::sqrt2 * std::sin(n * u) * n * std::numbers::pi / len;
      }
    }
  }
}

void SpectralBasis::eval_all(const Eigen::Ref<const Eigen::VectorXd>& x,
                             Eigen::Ref<Eigen::VectorXd> out) const {
  const int d = model_.dim();
  const Eigen::Index n = size();
  if (model_.kind() == ModelKind::torus) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double phase = modes_[i].index.cast<double>().dot(x);
      out[i] = std::numbers::sqrt2 * (modes_[i].trig == 0 ? std::cos(phase) : std::sin(phase));
    }
    return;
  }
  Eigen::MatrixXd val, der;
  coordinate_tables(x, val, der);
  for (Eigen::Index i = 0; i < n; ++i) {
    double prod = 1.0;
    for (int j = 0; j < d; ++j) prod *= val(modes_[i].index[j], j);
    out[i] = prod;
  }
}

Eigen::VectorXd SpectralBasis::eval_all(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  Eigen::VectorXd out(size());
  eval_all(x, out);
  return out;
}

double SpectralBasis::eval(Eigen::Index i, const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return eval_all(x)[i];
}

Eigen::MatrixXd SpectralBasis::grad_all(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const int d = model_.dim();
  const Eigen::Index n = size();
  Eigen::MatrixXd g(d, n);
  if (model_.kind() == ModelKind::torus) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::VectorXd k = modes_[i].index.cast<double>();
      const double phase = k.dot(x);
      const double s = modes_[i].trig == 0 ? -std::sin(phase) : std::cos(phase);
      g.col(i) = std::numbers::sqrt2 * s * k;
    }
    return g;
  }
  Eigen::MatrixXd val, der;
  coordinate_tables(x, val, der);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) {
      double prod = der(modes_[i].index[j], j);
      for (int l = 0; l < d; ++l)
        if (l != j) prod *= val(modes_[i].index[l], l);
      g(j, i) = prod;
    }
  }
  return g;
}

SpectralBasis eigen_pairs_below(const DiffusionModel& model, double lambda_max, Eigen::Index cap) {
  auto cand = enumerate_below(model, lambda_max, cap);
  if (cand.empty()) throw InvalidArgument("no eigenvalues below the requested level");
  return make_basis(model, std::move(cand));
}

SpectralBasis eigen_pairs(const DiffusionModel& model, Eigen::Index n) {
  if (n < 1) throw InvalidArgument("eigen_pairs: N must be >= 1");
  if (!model.has_spectrum())
    throw NoClosedFormSpectrum("model " + model.id() + " has no closed-form spectrum");
  double level = model.spectral_gap();
  std::vector<Candidate> cand;
  while (true) {
    cand = enumerate_below(model, level, std::max<Eigen::Index>(4 * n + 1024, 200000));
    if (static_cast<Eigen::Index>(cand.size()) >= n) break;
    level *= 1.5;
  }
  cand.resize(static_cast<std::size_t>(n));
  return make_basis(model, std::move(cand));
}

Eigen::Index default_truncation(const DiffusionModel& model, double t_min, double tol,
                                Eigen::Index cap) {
  if (!(t_min > 0.0) || !(tol > 0.0 && tol < 1.0))
    throw InvalidArgument("default_truncation: need t_min > 0 and tol in (0, 1)");
  const double level = std::log(1.0 / tol) / t_min;
  const auto cand = enumerate_below(model, level, cap);
  return static_cast<Eigen::Index>(cand.size()) + 1;
}

double mehler_kernel(double rho, double x, double y) {
  const double r2 = rho * rho;
  return std::exp((2.0 * rho * x * y - r2 * (x * x + y * y)) / (2.0 * (1.0 - r2))) /
         std::sqrt(1.0 - r2);
}

double heat_kernel_diagonal(const DiffusionModel& model, double t,
                            const Eigen::Ref<const Eigen::VectorXd>& x) {
  switch (model.kind()) {
    case ModelKind::ou: {
      const double c = model.ou_rate(), s = std::sqrt(c), rho = std::exp(-c * t);
      double prod = 1.0;
      for (Eigen::Index j = 0; j < x.size(); ++j) prod *= mehler_kernel(rho, s * x[j], s * x[j]);
      return prod;
    }
    case ModelKind::torus: return std::pow(theta3(t), model.dim());
    case ModelKind::box: {
      double prod = 1.0;
      for (int j = 0; j < model.dim(); ++j) {
        const double len = model.domain().upper[j] - model.domain().lower[j];
        prod *= theta3(std::pow(std::numbers::pi / len, 2) * t);
      }
      return prod;
    }
    case ModelKind::power: break;
  }
  throw NoClosedFormSpectrum("heat kernel of " + model.id() + " has no closed form");
}

HeatKernelValue heat_kernel(const SpectralBasis& basis, double t,
                            const Eigen::Ref<const Eigen::VectorXd>& x,
                            const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (!(t > 0.0)) throw InvalidArgument("heat_kernel: t must be positive");
  const Eigen::VectorXd decay = (-t * basis.eigenvalues().array()).exp().matrix();
  const Eigen::VectorXd px = basis.eval_all(x), py = basis.eval_all(y);
  HeatKernelValue out;
  out.value = 1.0 + decay.dot(px.cwiseProduct(py));
  // Cauchy-Schwarz on the neglected modes, using the closed-form diagonal.
  const double rx = heat_kernel_diagonal(basis.model(), t, x) - 1.0 - decay.dot(px.cwiseAbs2());
  const double ry = heat_kernel_diagonal(basis.model(), t, y) - 1.0 - decay.dot(py.cwiseAbs2());
  out.tail_bound = std::sqrt(std::max(rx, 0.0) * std::max(ry, 0.0));
  out.warning = out.tail_bound > 1e-6;
  return out;
}

double heat_trace(const DiffusionModel& model, double t) {
  if (!(t > 0.0)) throw InvalidArgument("heat_trace: t must be positive");
  switch (model.kind()) {
    case ModelKind::ou: return std::pow(-1.0 / std::expm1(-model.ou_rate() * t), model.dim());
    case ModelKind::torus: return std::pow(theta3(t), model.dim());
    case ModelKind::box: {
      double prod = 1.0;
      for (int j = 0; j < model.dim(); ++j) {
        const double len = model.domain().upper[j] - model.domain().lower[j];
        prod *= half_theta(std::pow(std::numbers::pi / len, 2) * t);
      }
      return prod;
    }
    case ModelKind::power: break;
  }
  throw NoClosedFormSpectrum("heat trace of " + model.id() + " has no closed form");
}

}  // namespace eol
