#pragma once

#include <stdexcept>
#include <string>

namespace margmc {

/// Malformed or inconsistent input (files, configuration, graph definitions).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runtime failure of a numerical routine or sampler.
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The iterative lambda -> P inversion failed to reach its tolerance.
class NonConvergence : public RuntimeError {
 public:
  using RuntimeError::RuntimeError;
};

/// A probability dropped below the floor before a logarithm was taken.
class NonPositiveProbability : public RuntimeError {
 public:
  using RuntimeError::RuntimeError;
};

/// The change-of-variables Jacobian is numerically singular.
class SingularJacobian : public RuntimeError {
 public:
  using RuntimeError::RuntimeError;
};

/// Sampler configuration that is valid syntactically but cannot run.
class SamplerError : public RuntimeError {
 public:
  using RuntimeError::RuntimeError;
};

}  // namespace margmc
