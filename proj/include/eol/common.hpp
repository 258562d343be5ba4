#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace eol {

using State = Eigen::VectorXd;
using StateMatrix = Eigen::MatrixXd;  // one state per column

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Non-finite state produced by the integrator.
class NumericalBlowup : public Error {
 public:
  NumericalBlowup(std::int64_t step, double norm)
      : Error("numerical blowup at step " + std::to_string(step) +
              " (state norm " + std::to_string(norm) + ")"),
        step_(step),
        norm_(norm) {}
  std::int64_t step() const { return step_; }
  double norm() const { return norm_; }

 private:
  std::int64_t step_;
  double norm_;
};

class NoClosedFormSpectrum : public Error {
 public:
  using Error::Error;
};

class NonSummableSpectrum : public Error {
 public:
  using Error::Error;
};

class DivergentIntegral : public Error {
 public:
  using Error::Error;
};

class InfeasibleMarginals : public Error {
 public:
  using Error::Error;
};

/// Iterative solver stopped without meeting its tolerance.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual)
      : Error(what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class SamplerFailure : public Error {
 public:
  using Error::Error;
};

/// A Monte-Carlo replica threw; carries the replica index.
class ReplicaFailure : public Error {
 public:
  ReplicaFailure(std::int64_t replica, const std::string& what)
      : Error("replica " + std::to_string(replica) + ": " + what),
        replica_(replica) {}
  std::int64_t replica() const { return replica_; }

 private:
  std::int64_t replica_;
};

}  // namespace eol
