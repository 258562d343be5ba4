#include "eol/domain.hpp"

namespace eol {

DomainSpec DomainSpec::euclidean(int d) {
  if (d < 1) throw InvalidArgument("domain dimension must be >= 1");
  DomainSpec s;
  s.kind = DomainKind::free_euclidean;
  s.d = d;
  return s;
}

DomainSpec DomainSpec::torus(int d) {
  DomainSpec s = euclidean(d);
  s.kind = DomainKind::torus;
  return s;
}

DomainSpec DomainSpec::box(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  if (lower.size() < 1 || lower.size() != upper.size())
    throw InvalidArgument("box bounds must be non-empty and of equal length");
  if (((upper - lower).array() <= 0.0).any())
    throw InvalidArgument("box must have positive volume");
  DomainSpec s = euclidean(static_cast<int>(lower.size()));
  s.kind = DomainKind::reflected_box;
  s.lower = lower;
  s.upper = upper;
  return s;
}

std::string DomainSpec::name() const {
  switch (kind) {
    case DomainKind::free_euclidean: return "R^" + std::to_string(d);
    case DomainKind::torus: return "T^" + std::to_string(d);
    case DomainKind::reflected_box: return "box^" + std::to_string(d);
  }
  return "?";
}

void DomainSpec::project(Eigen::Ref<Eigen::VectorXd> x) const {
  if (kind == DomainKind::torus) {
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      double v = std::fmod(x[k], period);
      if (v < 0.0) v += period;
      if (v >= period) v -= period;  // fmod of tiny negatives can round up
      x[k] = v;
    }
  } else if (kind == DomainKind::reflected_box) {
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      const double len = upper[k] - lower[k];
      // Mirror-fold onto [0, len): reflect across faces as often as needed.
      double v = std::fmod(x[k] - lower[k], 2.0 * len);
      if (v < 0.0) v += 2.0 * len;
      if (v > len) v = 2.0 * len - v;
      x[k] = lower[k] + v;
    }
  }
}

bool DomainSpec::contains(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != d) return false;
  if (!x.allFinite()) return false;
  switch (kind) {
    case DomainKind::free_euclidean: return true;
    case DomainKind::torus: return (x.array() >= 0.0).all() && (x.array() < period).all();
    case DomainKind::reflected_box:
      return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
  }
  return false;
}

}  // namespace eol
