#pragma once

#include <stdexcept>
#include <string>

namespace ccup {

// Base class for every domain error thrown by the library. Construction
// failures (bad distributions, mismatched alphabets) throw rather than
// returning invalid objects.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class AlphabetMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidDistribution : public Error {
 public:
  using Error::Error;
};

// KL(p || q) requested with q(x) = 0 < p(x).
class AbsoluteContinuityViolation : public Error {
 public:
  using Error::Error;
};

class ZeroMarginal : public Error {
 public:
  using Error::Error;
};

class MissingEmbedding : public Error {
 public:
  using Error::Error;
};

class ZeroLikelihood : public Error {
 public:
  using Error::Error;
};

class TransportNonConvergence : public Error {
 public:
  TransportNonConvergence(const std::string& msg, double residual, int iterations)
      : Error(msg), residual(residual), iterations(iterations) {}
  double residual;
  int iterations;
};

class NumericalUnderflow : public Error {
 public:
  using Error::Error;
};

class InstanceTooLarge : public Error {
 public:
  using Error::Error;
};

class IBNonConvergence : public Error {
 public:
  IBNonConvergence(const std::string& msg, double last_delta)
      : Error(msg), last_delta(last_delta) {}
  double last_delta;
};

class Infeasible : public Error {
 public:
  using Error::Error;
};

class ArityMismatch : public Error {
 public:
  using Error::Error;
};

class EmptySlot : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace ccup
