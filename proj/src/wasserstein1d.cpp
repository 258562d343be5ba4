#include "eol/wasserstein1d.hpp"

#include "eol/quadrature.hpp"
#include "eol/special.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace eol {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Smallest value of 1 + sum a_n h_n on a grid covering |z| <= 10.
double grid_min(const Eigen::Ref<const Eigen::VectorXd>& a) {
  double lo = kInf;
  for (int i = 0; i <= 4000; ++i) lo = std::min(lo, 1.0 + hermite_series(a, -10.0 + 0.005 * i));
  return lo;
}

// Coefficients of z * sum c_m h_m: z h_n = sqrt(n+1) h_{n+1} + sqrt(n) h_{n-1}.
Eigen::VectorXd times_z(const Eigen::VectorXd& c) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(c.size() + 1);
  for (Eigen::Index n = 0; n < c.size(); ++n) {
    out[n + 1] += std::sqrt(double(n + 1)) * c[n];
    if (n > 0) out[n - 1] += std::sqrt(double(n)) * c[n];
  }
  return out;
}

// Composite Gauss-Legendre on [0, 1], uniform in the bulk and graded
// geometrically toward both endpoints where quantiles are singular.
const QuadratureRule& unit_interval_rule() {
  static const QuadratureRule rule = [] {
    constexpr int order = 16;
    std::vector<double> breaks{0.0};
    for (int k = 53; k >= 5; --k) breaks.push_back(std::ldexp(1.0, -k));
    for (int i = 0; i <= 256; ++i) breaks.push_back(1.0 / 16 + i * (14.0 / 16) / 256);
    for (int k = 5; k <= 53; ++k) breaks.push_back(1.0 - std::ldexp(1.0, -k));
    breaks.push_back(1.0);
    const QuadratureRule ref = gauss_legendre(order, 0.0, 1.0);
    QuadratureRule out;
    const Eigen::Index panels = static_cast<Eigen::Index>(breaks.size()) - 1;
    out.nodes.resize(panels * order);
    out.weights.resize(panels * order);
    for (Eigen::Index p = 0; p < panels; ++p) {
      const double a = breaks[p], len = breaks[p + 1] - breaks[p];
      out.nodes.segment(p * order, order) = (a + len * ref.nodes.array()).matrix();
      out.weights.segment(p * order, order) = len * ref.weights;
    }
    return out;
  }();
  return rule;
}

void require_line(const EmpiricalMeasure& m, const char* who) {
  if (m.dim() != 1) throw InvalidArgument(std::string(who) + ": measure must be one-dimensional");
  m.validate(1e-9);
}

}  // namespace

// ---------------------------------------------------------------------------

double Distribution1D::moment(int k) const { return partial_moment(k, kInf); }

double Distribution1D::quantile(double u) const {
  if (!(u > 0.0)) return -kInf;
  if (!(u < 1.0)) return kInf;
  const bool upper = u > 0.5;
  const double v = 1.0 - u;
  // Increasing in x, zero at the quantile; survival for the upper half keeps precision.
  auto g = [&](double x) { return upper ? v - survival(x) : cdf(x) - u; };

  double x = center() + spread() * normal_quantile(u);
  double lo = x - spread(), hi = x + spread();
  for (double step = spread(); g(lo) > 0.0; step *= 2.0) lo -= step;
  for (double step = spread(); g(hi) < 0.0; step *= 2.0) hi += step;
  x = std::clamp(x, lo, hi);
  for (int it = 0; it < 200; ++it) {
    const double gx = g(x);
    if (gx == 0.0) return x;
    (gx > 0.0 ? hi : lo) = x;
    const double dens = pdf(x);
    double next = dens > 0.0 ? x - gx / dens : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-15 * (1.0 + std::abs(x)) || hi - lo <= 1e-15 * (1.0 + std::abs(x)))
      return next;
    x = next;
  }
  return x;
}

// ---------------------------------------------------------------------------

GaussianDistribution::GaussianDistribution(double mean, double sd) : m_(mean), s_(sd) {
  if (!(sd > 0.0)) throw InvalidArgument("GaussianDistribution: sd must be positive");
}

double GaussianDistribution::pdf(double x) const { return normal_pdf((x - m_) / s_) / s_; }
double GaussianDistribution::cdf(double x) const { return normal_cdf((x - m_) / s_); }
double GaussianDistribution::survival(double x) const { return normal_cdf((m_ - x) / s_); }
double GaussianDistribution::quantile(double u) const {
  if (!(u > 0.0)) return -kInf;
  if (!(u < 1.0)) return kInf;
  return m_ + s_ * normal_quantile(u);
}

double GaussianDistribution::partial_moment(int k, double x) const {
  const double z = (x - m_) / s_;
  const double Phi = normal_cdf(z);
  const double phi = std::isfinite(z) ? normal_pdf(z) : 0.0;
  const double zphi = std::isfinite(z) ? z * phi : 0.0;
  switch (k) {
    case 0: return Phi;
    case 1: return m_ * Phi - s_ * phi;
    case 2: return (m_ * m_ + s_ * s_) * Phi - 2.0 * m_ * s_ * phi - s_ * s_ * zphi;
    default: throw InvalidArgument("partial_moment: k must be 0, 1 or 2");
  }
}

// ---------------------------------------------------------------------------

HermiteDensity::HermiteDensity(const Eigen::Ref<const Eigen::VectorXd>& a, double sigma)
    : sigma_(sigma) {
  if (!(sigma > 0.0)) throw InvalidArgument("HermiteDensity: sigma must be positive");
  if (!a.allFinite()) throw InvalidArgument("HermiteDensity: non-finite coefficient");
  if (grid_min(a) < -1e-12) throw InvalidArgument("HermiteDensity: density is negative");
  coef_[0].resize(a.size() + 1);
  coef_[0] << 1.0, a;
  coef_[1] = times_z(coef_[0]);
  coef_[2] = times_z(coef_[1]);
}

double HermiteDensity::relative_density(double x) const {
  return 1.0 + hermite_series(coef_[0].tail(coef_[0].size() - 1), x / sigma_);
}

double HermiteDensity::pdf(double x) const {
  const double z = x / sigma_;
  return std::max(relative_density(x), 0.0) * normal_pdf(z) / sigma_;
}

double HermiteDensity::tail_sum(const Eigen::VectorXd& c, double z) const {
  const Eigen::Index top = c.size() - 1;
  const Eigen::VectorXd h =
      hermite_normalized(static_cast<int>(std::max<Eigen::Index>(top - 1, 0)), z);
  double s = 0.0;
  for (Eigen::Index m = 1; m <= top; ++m) s += c[m] * h[m - 1] / std::sqrt(double(m));
  return s;
}

double HermiteDensity::lower_integral(const Eigen::VectorXd& c, double z) const {
  if (z == -kInf) return 0.0;
  if (z == kInf) return c[0];
  return c[0] * normal_cdf(z) - normal_pdf(z) * tail_sum(c, z);
}

double HermiteDensity::cdf(double x) const { return lower_integral(coef_[0], x / sigma_); }

double HermiteDensity::survival(double x) const {
  const double z = x / sigma_;
  if (z == -kInf) return 1.0;
  if (z == kInf) return 0.0;
  // The h_m with m >= 1 integrate to zero, so the upper tail flips their sign.
  return coef_[0][0] * normal_cdf(-z) + normal_pdf(z) * tail_sum(coef_[0], z);
}

double HermiteDensity::partial_moment(int k, double x) const {
  if (k < 0 || k > 2) throw InvalidArgument("partial_moment: k must be 0, 1 or 2");
  return std::pow(sigma_, k) * lower_integral(coef_[k], x / sigma_);
}

// ---------------------------------------------------------------------------

PiecewiseLinearDensity::PiecewiseLinearDensity(Eigen::VectorXd nodes, Eigen::VectorXd values)
    : x_(std::move(nodes)), v_(std::move(values)) {
  const Eigen::Index n = x_.size();
  if (n < 2 || v_.size() != n) throw InvalidArgument("PiecewiseLinearDensity: bad node table");
  for (Eigen::Index i = 1; i < n; ++i)
    if (!(x_[i] > x_[i - 1])) throw InvalidArgument("PiecewiseLinearDensity: nodes must increase");
  if ((v_.array() < 0.0).any() || !v_.allFinite())
    throw InvalidArgument("PiecewiseLinearDensity: values must be finite and nonnegative");
  double mass = 0.0;
  for (Eigen::Index i = 0; i + 1 < n; ++i) mass += 0.5 * (v_[i] + v_[i + 1]) * (x_[i + 1] - x_[i]);
  if (!(mass > 0.0)) throw InvalidArgument("PiecewiseLinearDensity: zero mass");
  v_ /= mass;
  for (int k = 0; k < 3; ++k) {
    cum_[k].resize(n);
    cum_[k][0] = 0.0;
    for (Eigen::Index i = 0; i + 1 < n; ++i)
      cum_[k][i + 1] = cum_[k][i] + cell_moment(k, i, x_[i + 1] - x_[i]);
  }
}

double PiecewiseLinearDensity::cell_moment(int k, Eigen::Index c, double d) const {
  const double a = x_[c], v = v_[c], s = (v_[c + 1] - v_[c]) / (x_[c + 1] - x_[c]);
  const double i0 = v * d + s * d * d / 2;                 // int (v + s u) du
  const double i1 = v * d * d / 2 + s * d * d * d / 3;     // int u (v + s u) du
  const double i2 = v * d * d * d / 3 + s * d * d * d * d / 4;
  switch (k) {
    case 0: return i0;
    case 1: return a * i0 + i1;
    default: return a * a * i0 + 2.0 * a * i1 + i2;
  }
}

Eigen::Index PiecewiseLinearDensity::cell_of(double x) const {
  const auto it = std::upper_bound(x_.data(), x_.data() + x_.size(), x);
  return std::clamp<Eigen::Index>(it - x_.data() - 1, 0, x_.size() - 2);
}

double PiecewiseLinearDensity::pdf(double x) const {
  if (x < x_[0] || x > x_[x_.size() - 1]) return 0.0;
  const Eigen::Index c = cell_of(x);
  const double t = (x - x_[c]) / (x_[c + 1] - x_[c]);
  return (1.0 - t) * v_[c] + t * v_[c + 1];
}

double PiecewiseLinearDensity::partial_moment(int k, double x) const {
  if (k < 0 || k > 2) throw InvalidArgument("partial_moment: k must be 0, 1 or 2");
  if (x <= x_[0]) return 0.0;
  if (x >= x_[x_.size() - 1]) return cum_[k][x_.size() - 1];
  const Eigen::Index c = cell_of(x);
  return cum_[k][c] + cell_moment(k, c, x - x_[c]);
}

double PiecewiseLinearDensity::cdf(double x) const { return partial_moment(0, x); }

double PiecewiseLinearDensity::quantile(double u) const {
  const Eigen::Index n = x_.size();
  if (!(u > 0.0)) return x_[0];
  if (!(u < cum_[0][n - 1])) return x_[n - 1];
  const auto it = std::upper_bound(cum_[0].data(), cum_[0].data() + n, u);
  const Eigen::Index c = std::clamp<Eigen::Index>(it - cum_[0].data() - 1, 0, n - 2);
  const double r = u - cum_[0][c];
  const double v = v_[c], s = (v_[c + 1] - v_[c]) / (x_[c + 1] - x_[c]);
  // Root of v d + s d^2 / 2 = r in the stable form.
  const double den = v + std::sqrt(std::max(v * v + 2.0 * s * r, 0.0));
  if (!(den > 0.0)) return x_[c];
  return std::min(x_[c] + 2.0 * r / den, x_[c + 1]);
}

// ---------------------------------------------------------------------------

std::unique_ptr<Distribution1D> model_distribution_1d(const DiffusionModel& model) {
  if (model.dim() != 1) throw InvalidArgument("model_distribution_1d: model must be one-dimensional");
  switch (model.kind()) {
    case ModelKind::ou:
      return std::make_unique<GaussianDistribution>(0.0, 1.0 / std::sqrt(model.ou_rate()));
    case ModelKind::box: {
      const auto& dom = model.domain();
      return std::make_unique<PiecewiseLinearDensity>(Eigen::Vector2d(dom.lower[0], dom.upper[0]),
                                                      Eigen::Vector2d(1.0, 1.0));
    }
    case ModelKind::torus:
      throw InvalidArgument("model_distribution_1d: the circle is not a line model");
    case ModelKind::power: break;
  }
  // Tabulate e^V on a window outside of which the density is below e^-60
  // of its peak.
  Eigen::VectorXd x(1);
  auto V = [&](double s) {
    x[0] = s;
    return model.potential(x);
  };
  double peak = V(0.0);
  for (int i = -400; i <= 400; ++i) peak = std::max(peak, V(0.01 * i));
  double lo = -1.0, hi = 1.0;
  while (V(lo) - peak > -60.0) lo *= 1.25;
  while (V(hi) - peak > -60.0) hi *= 1.25;
  constexpr Eigen::Index kNodes = 20001;
  const Eigen::VectorXd nodes = Eigen::VectorXd::LinSpaced(kNodes, lo, hi);
  Eigen::VectorXd values(kNodes);
  for (Eigen::Index i = 0; i < kNodes; ++i) values[i] = std::exp(V(nodes[i]) - peak);
  return std::make_unique<PiecewiseLinearDensity>(nodes, values);
}

std::unique_ptr<Distribution1D> modified_density_distribution(const ModifiedDensity& md,
                                                              double* clipped_mass) {
  if (!md.basis) throw InvalidArgument("modified density has no basis");
  return spectral_density_distribution(*md.basis, md.coefficients(), clipped_mass);
}

std::unique_ptr<Distribution1D> spectral_density_distribution(const SpectralBasis& basis,
                                                              const Eigen::VectorXd& c,
                                                              double* clipped_mass) {
  const DiffusionModel& model = basis.model();
  if (model.kind() != ModelKind::ou || model.dim() != 1)
    throw InvalidArgument("spectral_density_distribution: needs a one-dimensional OU basis");
  if (c.size() > basis.size()) throw InvalidArgument("spectral_density_distribution: too many coefficients");
  int top = 0;
  for (Eigen::Index i = 0; i < c.size(); ++i) top = std::max(top, basis.modes()[std::size_t(i)].index[0]);
  Eigen::VectorXd a = Eigen::VectorXd::Zero(top);
  for (Eigen::Index i = 0; i < c.size(); ++i) a[basis.modes()[std::size_t(i)].index[0] - 1] += c[i];
  const double sigma = 1.0 / std::sqrt(model.ou_rate());

  if (grid_min(a) >= 0.0) {
    if (clipped_mass) *clipped_mass = 0.0;
    return std::make_unique<HermiteDensity>(a, sigma);
  }
  constexpr Eigen::Index kNodes = 24001;
  const Eigen::VectorXd z = Eigen::VectorXd::LinSpaced(kNodes, -12.0, 12.0);
  Eigen::VectorXd values(kNodes);
  double negative = 0.0;
  for (Eigen::Index i = 0; i < kNodes; ++i) {
    const double f = 1.0 + hermite_series(a, z[i]);
    const double w = normal_pdf(z[i]) * (i == 0 || i == kNodes - 1 ? 0.5 : 1.0) * (z[1] - z[0]);
    if (f < 0.0) negative -= f * w;
    values[i] = std::max(f, 0.0) * normal_pdf(z[i]);
  }
  if (clipped_mass) *clipped_mass = negative;
  return std::make_unique<PiecewiseLinearDensity>(sigma * z, values);
}

// ---------------------------------------------------------------------------

Atoms1D sorted_atoms(const EmpiricalMeasure& m) {
  if (m.dim() != 1) throw InvalidArgument("sorted_atoms: measure must be one-dimensional");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index i, Eigen::Index j) { return m.atoms(0, i) < m.atoms(0, j); });
  Atoms1D out;
  out.x.resize(m.size());
  out.w.resize(m.size());
  for (Eigen::Index k = 0; k < m.size(); ++k) {
    out.x[k] = m.atoms(0, order[static_cast<std::size_t>(k)]);
    out.w[k] = m.weights[order[static_cast<std::size_t>(k)]];
  }
  return out;
}

double wp_power_1d(const EmpiricalMeasure& a, const EmpiricalMeasure& b, double p) {
  require_line(a, "wp_power_1d");
  require_line(b, "wp_power_1d");
  if (!(p >= 1.0)) throw InvalidArgument("wp_power_1d: p must be >= 1");
  const Atoms1D sa = sorted_atoms(a), sb = sorted_atoms(b);
  Eigen::Index i = 0, j = 0;
  double ra = sa.w[0], rb = sb.w[0], total = 0.0;
  while (i < sa.x.size() && j < sb.x.size()) {
    const double mass = std::min(ra, rb);
    total += mass * std::pow(std::abs(sa.x[i] - sb.x[j]), p);
    ra -= mass;
    rb -= mass;
    if (ra <= 0.0 && ++i < sa.x.size()) ra = sa.w[i];
    if (rb <= 0.0 && ++j < sb.x.size()) rb = sb.w[j];
  }
  return total;
}

double w2_squared_1d(const EmpiricalMeasure& a, const Distribution1D& b) {
  require_line(a, "w2_squared_1d");
  const Atoms1D s = sorted_atoms(a);
  const double mass = s.w.sum();
  double cum = 0.0, total = 0.0;
  double m1_lo = 0.0, m2_lo = 0.0;  // partial moments at the previous quantile
  for (Eigen::Index i = 0; i < s.x.size(); ++i) {
    cum += s.w[i];
    const bool last = i + 1 == s.x.size();
    const double q = last ? kInf : b.quantile(cum / mass);
    const double m1 = b.partial_moment(1, q), m2 = b.partial_moment(2, q);
    const double x = s.x[i];
    total += std::max(s.w[i] / mass * x * x - 2.0 * x * (m1 - m1_lo) + (m2 - m2_lo), 0.0);
    m1_lo = m1;
    m2_lo = m2;
  }
  return total;
}

double wp_power_1d(const Distribution1D& a, const Distribution1D& b, double p) {
  if (!(p >= 1.0)) throw InvalidArgument("wp_power_1d: p must be >= 1");
  const QuadratureRule& rule = unit_interval_rule();
  double total = 0.0;
  for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) {
    const double u = rule.nodes[i];
    const double gap = std::abs(a.quantile(u) - b.quantile(u));
    if (std::isfinite(gap)) total += rule.weights[i] * std::pow(gap, p);
  }
  return total;
}

double w2_exact_1d(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  return std::sqrt(wp_power_1d(a, b, 2.0));
}

double w2_exact_1d(const EmpiricalMeasure& a, const DiffusionModel& model) {
  if (model.kind() == ModelKind::torus)
    throw InvalidArgument("w2_exact_1d: torus domain (use w2_squared_circle_uniform)");
  return std::sqrt(w2_squared_1d(a, *model_distribution_1d(model)));
}

double w2_exact_1d(const ModifiedDensity& md, const DiffusionModel& model, double* clipped_mass) {
  if (model.kind() == ModelKind::torus)
    throw InvalidArgument("w2_exact_1d: torus domain");
  const auto law = modified_density_distribution(md, clipped_mass);
  return std::sqrt(wp_power_1d(*law, *model_distribution_1d(model), 2.0));
}

double w2_squared_circle_uniform(const EmpiricalMeasure& a, double period) {
  require_line(a, "w2_squared_circle_uniform");
  EmpiricalMeasure wrapped = a;
  for (Eigen::Index i = 0; i < wrapped.size(); ++i) {
    double& x = wrapped.atoms(0, i);
    x = std::fmod(x, period);
    if (x < 0.0) x += period;
  }
  const Atoms1D s = sorted_atoms(wrapped);
  const double mass = s.w.sum();
  // W2^2 = Var_u(Q(u) - L u) over u uniform on [0, 1].
  double cum = 0.0, second = 0.0, first = 0.0;
  for (Eigen::Index i = 0; i < s.x.size(); ++i) {
    const double w = s.w[i] / mass;
    const double A = s.x[i] - period * cum;
    cum += w;
    const double B = s.x[i] - period * cum;
    second += w * (A * A + A * B + B * B) / 3.0;
    first += w * s.x[i];
  }
  const double mean = first - period / 2.0;
  return std::max(second - mean * mean, 0.0);
}

EmpiricalMeasure quantile_centroids(const Distribution1D& law, Eigen::Index n) {
  if (n < 1) throw InvalidArgument("quantile_centroids: n must be positive");
  StateMatrix atoms(1, n);
  double m_lo = law.partial_moment(1, law.quantile(0.0));
  for (Eigen::Index k = 0; k < n; ++k) {
    const double u = double(k + 1) / double(n);
    const double m_hi = law.partial_moment(1, k + 1 == n ? kInf : law.quantile(u));
    atoms(0, k) = double(n) * (m_hi - m_lo);
    m_lo = m_hi;
  }
  return EmpiricalMeasure::uniform(std::move(atoms));
}

EmpiricalMeasure compress_quantiles(const EmpiricalMeasure& m, Eigen::Index n) {
  require_line(m, "compress_quantiles");
  if (n < 1) throw InvalidArgument("compress_quantiles: n must be positive");
  const Atoms1D s = sorted_atoms(m);
  const double mass = s.w.sum(), cell = mass / double(n);
  StateMatrix atoms(1, n);
  Eigen::Index k = 0;
  double filled = 0.0, moment = 0.0;
  for (Eigen::Index i = 0; i < s.x.size(); ++i) {
    double left = s.w[i];
    while (left > 0.0) {
      const double take = (k + 1 == n) ? left : std::min(left, cell - filled);
      filled += take;
      moment += take * s.x[i];
      left -= take;
      if (k + 1 < n && filled >= cell * (1.0 - 1e-12)) {
        atoms(0, k++) = moment / filled;
        filled = moment = 0.0;
        if (left < cell * 1e-12) left = 0.0;
      }
    }
  }
  for (; k < n; ++k) atoms(0, k) = filled > 0.0 ? moment / filled : s.x[s.x.size() - 1];
  return EmpiricalMeasure::uniform(std::move(atoms));
}

}  // namespace eol
