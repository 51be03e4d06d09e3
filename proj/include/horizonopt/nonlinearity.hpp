#ifndef HORIZONOPT__NONLINEARITY_HPP_
#define HORIZONOPT__NONLINEARITY_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "errors.hpp"

namespace horizonopt {

/**
 * @brief The semilinear term f together with its first two derivatives and growth data.
 *
 * `monotonicity` is Lambda_f (a lower bound of f', non-positive), `growth_exponent` is q and
 * `growth_c1`, `growth_c2` are the constants of  |f^(j)(s)| <= C1 (|s|^q + 1)(C2 |f(s)| + 1).
 */
struct Nonlinearity
{
  std::string name{"zero"};
  std::function<double(double)> f{[](double) { return 0.0; }};
  std::function<double(double)> df{[](double) { return 0.0; }};
  std::function<double(double)> d2f{[](double) { return 0.0; }};
  double monotonicity{0.0};
  double growth_exponent{0.0};
  double growth_c1{1.0};
  double growth_c2{0.0};

  static Nonlinearity zero() { return {}; }

  /// f(s) = c s with c >= 0
  static Nonlinearity linear(double c)
  {
    if (c < 0.0) { throw AssumptionError("linear nonlinearity needs c ≥ 0"); }
    return {
      "linear",
      [c](double s) { return c * s; },
      [c](double) { return c; },
      [](double) { return 0.0; },
      0.0,
      0.0,
      std::max(c, 1.0),
      0.0};
  }

  static Nonlinearity cubic()
  {
    return {
      "cubic",
      [](double s) { return s * s * s; },
      [](double s) { return 3.0 * s * s; },
      [](double s) { return 6.0 * s; },
      0.0,
      2.0,
      3.0,
      0.0};
  }

  static Nonlinearity cubic_minus_linear()
  {
    return {
      "cubic_minus_linear",
      [](double s) { return s * s * s - s; },
      [](double s) { return 3.0 * s * s - 1.0; },
      [](double s) { return 6.0 * s; },
      -1.0,
      2.0,
      3.0,
      0.0};
  }

  /// f(s) = e^s - 1
  static Nonlinearity exponential()
  {
    return {
      "exponential",
      [](double s) { return std::expm1(s); },
      [](double s) { return std::exp(s); },
      [](double s) { return std::exp(s); },
      0.0,
      0.0,
      1.0,
      1.0};
  }
};

/// Catalog of the built-in nonlinearities (linear with c = 1).
inline std::vector<Nonlinearity> builtin_nonlinearities()
{
  return {
    Nonlinearity::zero(),
    Nonlinearity::linear(1.0),
    Nonlinearity::cubic(),
    Nonlinearity::cubic_minus_linear(),
    Nonlinearity::exponential()};
}

/// Look up a built-in by name; `coefficient` is used by "linear".
inline Nonlinearity make_nonlinearity(const std::string & name, double coefficient = 1.0)
{
  if (name == "zero") { return Nonlinearity::zero(); }
  if (name == "linear") { return Nonlinearity::linear(coefficient); }
  if (name == "cubic") { return Nonlinearity::cubic(); }
  if (name == "cubic_minus_linear") { return Nonlinearity::cubic_minus_linear(); }
  if (name == "exponential") { return Nonlinearity::exponential(); }
  throw ConfigError("unknown nonlinearity '" + name + "'");
}

}  // namespace horizonopt

#endif  // HORIZONOPT__NONLINEARITY_HPP_
