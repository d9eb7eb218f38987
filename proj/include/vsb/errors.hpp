#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vsb {

/// Invalid configuration, unknown problem names, out-of-domain arguments.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Non-finite values or violated internal consistency checks.
struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Integration failure (step-size underflow or blow-up).
struct IntegrationError : std::runtime_error {
  IntegrationError(const std::string& what, double t)
      : std::runtime_error(what), last_good_time(t) {}
  double last_good_time;
};

/// Newton-type iteration did not converge.
struct NewtonError : std::runtime_error {
  NewtonError(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), residual_history(std::move(history)) {}
  std::vector<double> residual_history;
};

/// A linear operator the theory requires to be invertible is (near) singular.
struct SingularOperatorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A required derivative oracle or mode is not available.
struct CapabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A pairing or projector normalization that must equal one does not.
struct NormalizationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Riesz contour placement or enclosed-eigenvalue multiplicity problem.
struct ContourError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Hypothesis audit failure while assembling a scaled problem.
struct AssemblyError : std::runtime_error {
  AssemblyError(const std::string& what, std::string hyp, double res)
      : std::runtime_error(what), hypothesis(std::move(hyp)), residual(res) {}
  std::string hypothesis;
  double residual;
};

}  // namespace vsb
