#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace conelab {

/// Base class for every domain error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid grid, region, scenario or solver parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A contracting cone slice was requested after it shrank to nothing.
class ConeVanishedError : public Error {
 public:
  using Error::Error;
};

/// Field/state shapes do not match what an operation expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf or runaway growth during time stepping.
class InstabilityError : public Error {
 public:
  InstabilityError(const std::string& what, std::size_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// An operation's precondition does not hold; carries the offending sites.
class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& what,
                             std::vector<std::size_t> sites = {})
      : Error(what), sites_(std::move(sites)) {}
  const std::vector<std::size_t>& sites() const noexcept { return sites_; }

 private:
  std::vector<std::size_t> sites_;
};

class QuadratureError : public Error {
 public:
  using Error::Error;
};

/// A Gaussian or Fock state that violates its physical constraints.
class InvalidStateError : public Error {
 public:
  using Error::Error;
};

}  // namespace conelab
