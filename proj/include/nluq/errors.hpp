#pragma once

#include <stdexcept>
#include <string>

namespace nluq {

// Base of every error the library throws on purpose. The CLI maps
// ConfigError to exit code 2 and everything else derived from Error to 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Mesh width not strictly below the kernel horizon.
class HorizonViolation : public Error {
 public:
  using Error::Error;
};

// Cholesky of the negated stiffness matrix broke down.
class CoercivityLoss : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// Particle population collapsed (all weights underflow or ESS < 2).
class DegenerateEnsemble : public Error {
 public:
  using Error::Error;
};

// Requested accuracy needs more levels than configured.
class InfeasibleSchedule : public Error {
 public:
  using Error::Error;
};

}  // namespace nluq
