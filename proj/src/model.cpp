#include "eol/model.hpp"

#include "eol/quadrature.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <numbers>
#include <regex>

namespace eol {

namespace {

double log_sphere_area(int d) {
  // |S^{d-1}| = 2 pi^{d/2} / Gamma(d/2); equals 2 for d = 1.
  return std::log(2.0) + 0.5 * d * std::log(std::numbers::pi) - std::lgamma(0.5 * d);
}

constexpr int kMaxAttempts = 10000;

}  // namespace

// ---------------------------------------------------------------- sampler

RadialSampler::RadialSampler(int d, double kappa, double p, double g)
    : d_(d), kappa_(kappa), p_(p), g_(g) {
  auto slope = [&](double r) { return (d_ - 1) / r - kappa_ * p_ * std::pow(r, p_ - 1.0) + g_; };
  double lo = 1e-12, hi = 1.0;
  if (slope(lo) <= 0.0) {
    mode_ = 0.0;
  } else {
    while (slope(hi) > 0.0) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (slope(mid) > 0.0 ? lo : hi) = mid;
    }
    mode_ = 0.5 * (lo + hi);
  }
  log_peak_ = (d_ == 1 && mode_ == 0.0) ? 0.0 : log_target(mode_);

  r_max_ = std::max(mode_, 1.0);
  while (log_target(r_max_) > log_peak_ - 45.0) r_max_ *= 1.25;

  constexpr int kBins = 4096;
  edges_ = Eigen::VectorXd::LinSpaced(kBins + 1, 0.0, r_max_);
  bin_max_.resize(kBins);
  cumulative_.resize(kBins);
  double acc = 0.0;
  for (int k = 0; k < kBins; ++k) {
    const double a = edges_[k], b = edges_[k + 1];
    double top = std::max(log_target(a), log_target(b));
    if (mode_ > a && mode_ < b) top = log_peak_;
    bin_max_[k] = std::exp(top - log_peak_);
    // Envelope check: log-concavity makes this hold; verify anyway.
    for (double frac : {0.25, 0.5, 0.75}) {
      const double v = std::exp(log_target(a + frac * (b - a)) - log_peak_);
      if (v > bin_max_[k] * (1.0 + 1e-9))
        throw SamplerFailure("radial envelope does not dominate the target");
    }
    acc += bin_max_[k] * (b - a);
    cumulative_[k] = acc;
  }

  const QuadratureRule rule = composite_gauss_legendre(512, 16, 0.0, r_max_);
  const double mass = rule.integrate([&](double r) { return std::exp(log_target(r) - log_peak_); });
  log_mass_ = log_peak_ + std::log(mass);
}

double RadialSampler::log_target(double r) const {
  if (r <= 0.0) return d_ == 1 ? 0.0 : -std::numeric_limits<double>::infinity();
  return (d_ - 1) * std::log(r) - kappa_ * std::pow(r, p_) + g_ * r;
}

double RadialSampler::draw(RngCursor& rng) const {
  const double total = cumulative_[cumulative_.size() - 1];
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const double target = rng.uniform() * total;
    const auto* begin = cumulative_.data();
    const auto* end = begin + cumulative_.size();
    const Eigen::Index k = std::min<Eigen::Index>(std::upper_bound(begin, end, target) - begin,
                                                  cumulative_.size() - 1);
    const double r = edges_[k] + rng.uniform() * (edges_[k + 1] - edges_[k]);
    if (rng.uniform() * bin_max_[k] <= std::exp(log_target(r) - log_peak_)) return r;
  }
  throw SamplerFailure("radial sampler exceeded the attempt budget");
}

// ---------------------------------------------------------------- model

double DiffusionModel::potential(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  switch (kind_) {
    case ModelKind::ou: return -kappa_ * x.squaredNorm();
    case ModelKind::torus:
    case ModelKind::box: return 0.0;
    case ModelKind::power: {
      double v = -kappa_ * std::pow(x.norm(), p_);
      if (!w_.empty()) v += w_.value(x);
      return v;
    }
  }
  return 0.0;
}

void DiffusionModel::grad_potential(const Eigen::Ref<const Eigen::VectorXd>& x,
                                    Eigen::Ref<Eigen::VectorXd> out) const {
  switch (kind_) {
    case ModelKind::ou: out = -2.0 * kappa_ * x; return;
    case ModelKind::torus:
    case ModelKind::box: out.setZero(); return;
    case ModelKind::power: {
      const double r = x.norm();
      if (r == 0.0)
        out.setZero();  // singular for p < 2; zero by convention
      else
        out = (-kappa_ * p_ * std::pow(r, p_ - 2.0)) * x;
      if (!w_.empty()) out += w_.gradient(x);
      return;
    }
  }
}

Eigen::VectorXd DiffusionModel::grad_potential(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  Eigen::VectorXd g(x.size());
  grad_potential(x, g);
  return g;
}

bool DiffusionModel::has_spectrum() const { return kind_ != ModelKind::power; }

double DiffusionModel::spectral_gap() const {
  switch (kind_) {
    case ModelKind::ou: return ou_rate();
    case ModelKind::torus: return 1.0;
    case ModelKind::box: {
      const double longest = (domain_.upper - domain_.lower).maxCoeff();
      return std::pow(std::numbers::pi / longest, 2);
    }
    case ModelKind::power: break;
  }
  throw NoClosedFormSpectrum("spectral gap of " + id_ + " has no closed form");
}

void DiffusionModel::draw(RngCursor& rng, Eigen::Ref<Eigen::VectorXd> out) const {
  const int d = dim();
  switch (kind_) {
    case ModelKind::ou: {
      const double sd = 1.0 / std::sqrt(ou_rate());
      for (int k = 0; k < d; ++k) out[k] = sd * rng.normal();
      return;
    }
    case ModelKind::torus:
      for (int k = 0; k < d; ++k) out[k] = domain_.period * rng.uniform();
      return;
    case ModelKind::box:
      for (int k = 0; k < d; ++k)
        out[k] = domain_.lower[k] + (domain_.upper[k] - domain_.lower[k]) * rng.uniform();
      return;
    case ModelKind::power: {
      const double w0 = w_.empty() ? 0.0 : w_.value(Eigen::VectorXd::Zero(d));
      for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        const double r = radial_->draw(rng);
        if (d == 1) {
          out[0] = rng.uniform() < 0.5 ? -r : r;
        } else {
          for (int k = 0; k < d; ++k) out[k] = rng.normal();
          out *= r / out.norm();
        }
        if (w_.empty()) return;
        const double log_accept = w_.value(out) - w0 - w_.gradient_bound * r;
        if (std::log(rng.uniform()) <= log_accept) return;
      }
      throw SamplerFailure("perturbation rejection exceeded the attempt budget");
    }
  }
}

StateMatrix DiffusionModel::sample_mu(Eigen::Index n, std::uint64_t seed, std::uint64_t replica,
                                      Stream stream) const {
  if (n < 1) throw InvalidArgument("sample_mu: n must be >= 1");
  StateMatrix out(dim(), n);
  RngCursor rng(CounterRng(seed, replica, stream));
  for (Eigen::Index i = 0; i < n; ++i) draw(rng, out.col(i));
  return out;
}

// ---------------------------------------------------------------- catalogue

DiffusionModel ou_model(int d) {
  DiffusionModel m;
  m.kind_ = ModelKind::ou;
  m.domain_ = DomainSpec::euclidean(d);
  m.id_ = "ou-" + std::to_string(d) + "d";
  m.kappa_ = 0.5;
  m.p_ = 2.0;
  m.log_z_ = 0.5 * d * std::log(2.0 * std::numbers::pi);
  return m;
}

DiffusionModel torus_model(int d) {
  DiffusionModel m;
  m.kind_ = ModelKind::torus;
  m.domain_ = DomainSpec::torus(d);
  m.id_ = "torus-" + std::to_string(d) + "d";
  m.kappa_ = 0.0;
  m.p_ = 0.0;
  m.log_z_ = d * std::log(kTwoPi);
  return m;
}

DiffusionModel box_model(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  DiffusionModel m;
  m.kind_ = ModelKind::box;
  m.domain_ = DomainSpec::box(lower, upper);
  m.id_ = "box-" + std::to_string(lower.size()) + "d";
  m.kappa_ = 0.0;
  m.p_ = 0.0;
  m.log_z_ = (upper - lower).array().log().sum();
  return m;
}

DiffusionModel power_model(int d, double kappa, double p, Perturbation w) {
  if (!(kappa > 0.0)) throw InvalidArgument("power_model: kappa must be positive");
  if (!(p > 1.0)) throw InvalidArgument("power_model: p must exceed 1");
  if (!w.empty() && (!w.gradient || !(w.gradient_bound >= 0.0) || !std::isfinite(w.gradient_bound)))
    throw InvalidArgument("power_model: perturbation needs a gradient and a finite gradient bound");
  DiffusionModel m;
  m.domain_ = DomainSpec::euclidean(d);
  m.kappa_ = kappa;
  m.p_ = p;
  {
    char buf[96];
    std::snprintf(buf, sizeof buf, "power-d%d-k%g-p%g", d, kappa, p);
    m.id_ = buf;
  }
  if (p == 2.0 && w.empty()) {
    // Gaussian case: an OU process with rate 2 kappa.
    m.kind_ = ModelKind::ou;
    m.log_z_ = 0.5 * d * std::log(std::numbers::pi / kappa);
    return m;
  }
  m.kind_ = ModelKind::power;
  m.w_ = std::move(w);
  m.radial_ = std::make_shared<RadialSampler>(d, kappa, p, m.w_.empty() ? 0.0 : m.w_.gradient_bound);
  if (m.w_.empty()) {
    m.log_z_ = log_sphere_area(d) + std::lgamma(d / p) - std::log(p) - (d / p) * std::log(kappa);
  } else if (d == 1) {
    double r = 1.0;
    while (kappa * std::pow(r, p) - m.w_.gradient_bound * r < 60.0) r *= 1.25;
    const double w0 = m.w_.value(Eigen::VectorXd::Zero(1));
    const QuadratureRule rule = composite_gauss_legendre(1024, 16, -r, r);
    Eigen::VectorXd x(1);
    const double z = rule.integrate([&](double s) {
      x[0] = s;
      return std::exp(-kappa * std::pow(std::abs(s), p) + m.w_.value(x) - w0);
    });
    m.log_z_ = w0 + std::log(z);
  } else {
    // Z = e^{W(0)} |S^{d-1}| * radial mass * P(accept); acceptance by a
    // fixed-seed Monte-Carlo run.
    const double w0 = m.w_.value(Eigen::VectorXd::Zero(d));
    RngCursor rng(CounterRng(0x5eedULL, 0, Stream::synthetic));
    constexpr int kDraws = 200000;
    double accept = 0.0;
    Eigen::VectorXd x(d);
    for (int i = 0; i < kDraws; ++i) {
      const double r = m.radial_->draw(rng);
      for (int k = 0; k < d; ++k) x[k] = rng.normal();
      x *= r / x.norm();
      accept += std::exp(m.w_.value(x) - w0 - m.w_.gradient_bound * r);
    }
    m.log_z_ = w0 + log_sphere_area(d) + m.radial_->log_mass() + std::log(accept / kDraws);
  }
  return m;
}

DiffusionModel model_from_id(const std::string& id) {
  static const std::regex simple(R"(^(ou|torus|box)-(\d+)d$)");
  static const std::regex power(R"(^power-d(\d+)-k([0-9]*\.?[0-9]+)-p([0-9]*\.?[0-9]+)$)");
  std::smatch match;
  if (std::regex_match(id, match, simple)) {
    const int d = std::stoi(match[2]);
    if (d < 1) throw InvalidArgument("model id '" + id + "': dimension must be >= 1");
    if (match[1] == "ou") return ou_model(d);
    if (match[1] == "torus") return torus_model(d);
    return box_model(Eigen::VectorXd::Zero(d), Eigen::VectorXd::Constant(d, std::numbers::pi));
  }
  if (std::regex_match(id, match, power))
    return power_model(std::stoi(match[1]), std::stod(match[2]), std::stod(match[3]));
  throw InvalidArgument("unknown model id '" + id + "'");
}

}  // namespace eol
