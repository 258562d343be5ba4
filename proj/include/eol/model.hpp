#pragma once

#include "eol/common.hpp"
#include "eol/domain.hpp"
#include "eol/rng.hpp"

#include <functional>
#include <memory>
#include <string>

namespace eol {

enum class ModelKind { ou, torus, power, box };

/// Lipschitz perturbation W added to the power potential.
struct Perturbation {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  double gradient_bound = 0.0;  // sup |grad W|

  bool empty() const { return !value; }
};

class RadialSampler;

/// Diffusion generated by L = Delta + grad V . grad with invariant measure
/// mu(dx) = e^{V(x)} dx / Z_V. Immutable and shareable across threads.
class DiffusionModel {
 public:
  ModelKind kind() const { return kind_; }
  const DomainSpec& domain() const { return domain_; }
  int dim() const { return domain_.d; }
  const std::string& id() const { return id_; }

  /// Power-family parameters (OU models report kappa = rate/2, p = 2).
  double kappa() const { return kappa_; }
  double exponent() const { return p_; }
  const Perturbation& perturbation() const { return w_; }
  /// Drift coefficient c of an OU-type model (V = -c|x|^2/2).
  double ou_rate() const { return 2.0 * kappa_; }

  double potential(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  void grad_potential(const Eigen::Ref<const Eigen::VectorXd>& x,
                      Eigen::Ref<Eigen::VectorXd> out) const;
  Eigen::VectorXd grad_potential(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// log of the unnormalized density e^V, i.e. V itself.
  double log_density(const Eigen::Ref<const Eigen::VectorXd>& x) const { return potential(x); }
  double log_normalizer() const { return log_z_; }
  /// Normalized Lebesgue density of mu.
  double density(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return std::exp(potential(x) - log_z_);
  }

  /// True for the exactly solvable models (OU-type, torus, box).
  bool has_spectrum() const;
  double spectral_gap() const;

  /// One draw from mu using the cursor's stream.
  void draw(RngCursor& rng, Eigen::Ref<Eigen::VectorXd> out) const;

  /// n i.i.d. draws from mu, one per column. Deterministic in its arguments.
  StateMatrix sample_mu(Eigen::Index n, std::uint64_t seed, std::uint64_t replica = 0,
                        Stream stream = Stream::mu_sample) const;

  friend DiffusionModel ou_model(int d);
  friend DiffusionModel torus_model(int d);
  friend DiffusionModel power_model(int d, double kappa, double p, Perturbation w);
  friend DiffusionModel box_model(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);

 private:
  DiffusionModel() = default;

  ModelKind kind_ = ModelKind::ou;
  DomainSpec domain_;
  std::string id_;
  double kappa_ = 0.5;
  double p_ = 2.0;
  Perturbation w_;
  double log_z_ = 0.0;
  std::shared_ptr<const RadialSampler> radial_;
};

DiffusionModel ou_model(int d);
DiffusionModel torus_model(int d);
/// V(x) = -kappa |x|^p + W(x) on R^d.
DiffusionModel power_model(int d, double kappa, double p, Perturbation w = {});
/// Reflected Brownian motion in a box (V = 0, uniform mu).
DiffusionModel box_model(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);

/// Resolves catalogue identifiers such as "ou-1d", "torus-3d", "box-2d"
/// ([0, pi]^d) and "power-d2-k1-p4" (kappa and p may be decimals).
DiffusionModel model_from_id(const std::string& id);

/// Exact tabulated sampler for radial densities r^{d-1} exp(-kappa r^p + g r).
/// Piecewise-constant envelope over a log-concave target; exact by rejection.
class RadialSampler {
 public:
  RadialSampler(int d, double kappa, double p, double g);
  double draw(RngCursor& rng) const;
  /// log of  int_0^inf r^{d-1} exp(-kappa r^p + g r) dr.
  double log_mass() const { return log_mass_; }
  double log_target(double r) const;

 private:
  int d_;
  double kappa_, p_, g_;
  double r_max_ = 0.0, mode_ = 0.0, log_peak_ = 0.0, log_mass_ = 0.0;
  Eigen::VectorXd edges_;      // bin edges, size K + 1
  Eigen::VectorXd bin_max_;    // envelope height relative to the peak
  Eigen::VectorXd cumulative_; // cumulative envelope mass, size K
};

}  // namespace eol
