#ifndef HORIZONOPT__ERRORS_HPP_
#define HORIZONOPT__ERRORS_HPP_

/**
 * @file
 * @brief Exception types thrown by the library.
 */

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace horizonopt {

/// Invalid mesh geometry or inconsistent node indicators.
struct MeshError : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

/// A standing assumption on the problem data is violated.
struct AssumptionError : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent configuration document.
struct ConfigError : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

/// Argument outside the domain of an operation (metric/tag mismatch, bad exponent, ...).
struct DomainError : std::invalid_argument
{
  using std::invalid_argument::invalid_argument;
};

/// Divergent improper integral in a tail norm.
struct DivergenceError : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

/**
 * @brief Failure of a time-stepping solve.
 *
 * Carries the time-step index where the failure happened and the Newton residual history of that
 * step (empty for linear solves).
 */
struct SolverError : std::runtime_error
{
  SolverError(const std::string & what, std::size_t step, std::vector<double> history = {})
      : std::runtime_error(what), step_index(step), residual_history(std::move(history))
  {}

  std::size_t step_index;
  std::vector<double> residual_history;
};

/// Backtracking could not find an acceptable step.
struct LineSearchError : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

}  // namespace horizonopt

#endif  // HORIZONOPT__ERRORS_HPP_
