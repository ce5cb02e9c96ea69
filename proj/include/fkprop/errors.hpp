#pragma once

#include <stdexcept>
#include <string>

namespace fkprop {

// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid user-supplied configuration: bad schedules, non-probability weights,
// negative times, steps above the stability guard, malformed JSON, ...
struct ConfigError : Error {
  using Error::Error;
};

// Mismatched vector/matrix dimensions between model ingredients.
struct DimensionError : ConfigError {
  using ConfigError::ConfigError;
};

// A mathematical precondition failed (detailed balance, invariance, ...).
struct PreconditionError : Error {
  using Error::Error;
};

// The chain is reducible on the requested time window, so a variational
// constant is +infinity.
struct ReducibleChainError : Error {
  using Error::Error;
};

// A speed schedule satisfying the requested inequality cannot be built
// (e.g. because the constants it depends on are infinite).
struct PlanningError : Error {
  using Error::Error;
};

// Monte Carlo dominating rate was exceeded by the exact rate along a path.
struct DominatingRateError : Error {
  using Error::Error;
};

// The ODE solution drifted outside its mathematically guaranteed range
// (e.g. clearly negative propagator entries): step too large for the target
// accuracy.
struct SolverError : Error {
  using Error::Error;
};

// A requested subset is not invariant under the dynamics.
struct NotInvariantError : PreconditionError {
  using PreconditionError::PreconditionError;
};

}  // namespace fkprop
