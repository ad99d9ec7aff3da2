#pragma once

#include <stdexcept>
#include <string>

namespace edgecache {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "error"; }
};

/// A precondition on the inputs was violated (bad sizes, out-of-range values).
class InvalidArgument : public Error {
public:
  using Error::Error;
  const char* kind() const noexcept override { return "invalid_argument"; }
};

/// The channel matrix is rank deficient or too badly conditioned for ZF.
class IllConditionedChannel : public Error {
public:
  IllConditionedChannel(const std::string& what, double condition_number)
      : Error(what), condition_number_(condition_number) {}
  const char* kind() const noexcept override { return "ill_conditioned_channel"; }
  double condition_number() const noexcept { return condition_number_; }

private:
  double condition_number_;
};

/// An optimization problem has no feasible point. `minimum_required` carries
/// the smallest resource (usually a power budget) that would make it feasible,
/// or a negative value when that is not known.
class Infeasible : public Error {
public:
  explicit Infeasible(const std::string& what, double minimum_required = -1.0)
      : Error(what), minimum_required_(minimum_required) {}
  const char* kind() const noexcept override { return "infeasible"; }
  double minimum_required() const noexcept { return minimum_required_; }

private:
  double minimum_required_;
};

/// The numerical solver failed to converge or produced an unusable result.
class SolverFailure : public Error {
public:
  using Error::Error;
  const char* kind() const noexcept override { return "solver_failure"; }
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace edgecache
