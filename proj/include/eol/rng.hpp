#pragma once

#include "eol/common.hpp"

#include <array>
#include <cmath>
#include <cstdint>

namespace eol {

/// Philox4x32-10 block function (Salmon et al., Random123).
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

/// Named sub-streams; every consumer of randomness owns one.
enum class Stream : std::uint32_t {
  path_noise = 1,
  initial_state = 2,
  mu_sample = 3,
  subsample = 4,
  control_sample = 5,
  ball_mass = 6,
  synthetic = 7,
  density_draw = 8,
};

/// Counter-based generator keyed by (seed, replica, stream). Stateless:
/// the value at (index, block) never depends on call order or threads.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t replica, Stream stream)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        replica_(replica),
        stream_(static_cast<std::uint32_t>(stream)) {}

  std::array<std::uint32_t, 4> bits(std::uint64_t index, std::uint32_t block = 0) const {
    return philox4x32({static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                       static_cast<std::uint32_t>(replica_),
                       (stream_ << 24) ^ (static_cast<std::uint32_t>(replica_ >> 32) << 16) ^ block},
                      key_);
  }

  /// Two doubles in the open interval (0, 1).
  std::array<double, 2> uniform_pair(std::uint64_t index, std::uint32_t block = 0) const {
    const auto b = bits(index, block);
    return {to_unit(b[0], b[1]), to_unit(b[2], b[3])};
  }

  /// Two independent standard normals (Box-Muller).
  std::array<double, 2> normal_pair(std::uint64_t index, std::uint32_t block = 0) const {
    const auto u = uniform_pair(index, block);
    const double r = std::sqrt(-2.0 * std::log(u[0]));
    const double theta = kTwoPi * u[1];
    return {r * std::cos(theta), r * std::sin(theta)};
  }

  /// Fills `out` with standard normals attached to counter `index`.
  void fill_normal(std::uint64_t index, Eigen::Ref<Eigen::VectorXd> out) const {
    const Eigen::Index n = out.size();
    for (Eigen::Index k = 0; k < n; k += 2) {
      const auto z = normal_pair(index, static_cast<std::uint32_t>(k / 2));
      out[k] = z[0];
      if (k + 1 < n) out[k + 1] = z[1];
    }
  }

  static double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t x = ((std::uint64_t{hi} << 32) | lo) >> 11;
    return (static_cast<double>(x) + 0.5) * 0x1.0p-53;
  }

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint64_t replica_;
  std::uint32_t stream_;
};

/// Sequential view over a CounterRng for code that draws an unknown
/// number of variates (rejection samplers, resampling).
class RngCursor {
 public:
  explicit RngCursor(const CounterRng& rng, std::uint64_t start = 0) : rng_(rng), next_(start) {}

  double uniform() {
    if (have_uniform_) {
      have_uniform_ = false;
      return spare_uniform_;
    }
    const auto u = rng_.uniform_pair(next_++);
    spare_uniform_ = u[1];
    have_uniform_ = true;
    return u[0];
  }

  double normal() {
    if (have_normal_) {
      have_normal_ = false;
      return spare_normal_;
    }
    const auto z = rng_.normal_pair(next_++, 1);
    spare_normal_ = z[1];
    have_normal_ = true;
    return z[0];
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    return std::min<std::uint64_t>(static_cast<std::uint64_t>(uniform() * static_cast<double>(n)),
                                   n - 1);
  }

 private:
  CounterRng rng_;
  std::uint64_t next_;
  double spare_uniform_ = 0.0;
  double spare_normal_ = 0.0;
  bool have_uniform_ = false;
  bool have_normal_ = false;
};

}  // namespace eol
