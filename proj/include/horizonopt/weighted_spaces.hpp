#ifndef HORIZONOPT__WEIGHTED_SPACES_HPP_
#define HORIZONOPT__WEIGHTED_SPACES_HPP_

/**
 * @file
 * @brief Time grids, trajectories and exponentially weighted space-time norms.
 *
 * Time integrals use the right-rectangle rule: weight dt at t_1..t_N and none at t_0.  This is the
 * quadrature that makes the transposed implicit Euler recursion the exact derivative of the
 * discrete cost.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "errors.hpp"
#include "operators.hpp"

namespace horizonopt {

/// Uniform grid t_i = i dt, i = 0..N, N dt = T.
struct TimeGrid
{
  double final_time{1.0};
  double step{0.1};
  std::size_t num_steps{10};

  static TimeGrid make(double T, double dt)
  {
    if (!(dt > 0.0) || !(T > 0.0)) { throw DomainError("time grid needs T > 0 and Δt > 0"); }
    const double ratio = T / dt;
    const double n = std::round(ratio);
    if (n < 1.0 || std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio)) {
      throw DomainError("T/Δt must be an integer");
    }
    return {T, dt, static_cast<std::size_t>(n)};
  }

  double time(std::size_t i) const { return static_cast<double>(i) * step; }
  std::size_t size() const { return num_steps + 1; }

  /// First `steps` steps of this grid.
  TimeGrid truncated(std::size_t steps) const { return {time(steps), step, steps}; }

  bool operator==(const TimeGrid & o) const { return num_steps == o.num_steps && step == o.step; }
};

enum class TrajectoryKind { state, adjoint, control, generic };

inline const char * to_string(TrajectoryKind k)
{
  switch (k) {
  case TrajectoryKind::state:
    return "state";
  case TrajectoryKind::adjoint:
    return "adjoint";
  case TrajectoryKind::control:
    return "control";
  case TrajectoryKind::generic:
    return "generic";
  }
  return "generic";
}

/// Nodal coefficient vectors at every grid time.  Control trajectories hold omega-node values.
struct Trajectory
{
  TimeGrid grid{};
  std::vector<Vector> values{};
  TrajectoryKind kind{TrajectoryKind::generic};

  static Trajectory zeros(const TimeGrid & grid, Eigen::Index dofs, TrajectoryKind kind)
  {
    return {grid, std::vector<Vector>(grid.size(), Vector::Zero(dofs)), kind};
  }

  std::size_t size() const { return values.size(); }
  Eigen::Index dofs() const { return values.empty() ? 0 : values.front().size(); }
  Vector & operator[](std::size_t i) { return values[i]; }
  const Vector & operator[](std::size_t i) const { return values[i]; }

  bool all_finite() const
  {
    return std::all_of(values.begin(), values.end(), [](const Vector & v) { return v.allFinite(); });
  }

  /// this += a * other
  Trajectory & axpy(double a, const Trajectory & other)
  {
    check_compatible(other);
    for (std::size_t i = 0; i < values.size(); ++i) { values[i] += a * other.values[i]; }
    return *this;
  }

  Trajectory & scale(double a)
  {
    for (auto & v : values) { v *= a; }
    return *this;
  }

  /// Restriction to the first `steps` steps.
  Trajectory truncated(std::size_t steps) const
  {
    if (steps + 1 > values.size()) { throw DomainError("truncation beyond trajectory length"); }
    Trajectory t{grid.truncated(steps), {values.begin(), values.begin() + static_cast<long>(steps) + 1}, kind};
    return t;
  }

  void check_compatible(const Trajectory & other) const
  {
    if (other.values.size() != values.size() || other.dofs() != dofs()) {
      throw DomainError("incompatible trajectories");
    }
  }
};

inline Trajectory operator+(Trajectory a, const Trajectory & b) { return std::move(a.axpy(1.0, b)); }
inline Trajectory operator-(Trajectory a, const Trajectory & b) { return std::move(a.axpy(-1.0, b)); }
inline Trajectory operator*(double s, Trajectory a) { return std::move(a.scale(s)); }

/// Spatial metric for the X-norm inside a weighted space-time norm.
enum class Metric {
  /// L2(Omega) through the consistent mass matrix
  mass,
  /// H1(Omega) through mass + gradient gram
  h1,
  /// L2(omega) through the diagonal control mass
  control
};

namespace detail {

inline void check_metric(const Trajectory & y, Metric metric, const Operators & ops)
{
  const bool control_tag = y.kind == TrajectoryKind::control;
  if (control_tag && metric != Metric::control) {
    throw DomainError("control trajectories must be measured with the control metric");
  }
  if (metric == Metric::control) {
    if (!control_tag && y.kind != TrajectoryKind::generic) {
      throw DomainError(std::string("control metric applied to a ") + to_string(y.kind) + " trajectory");
    }
    if (y.dofs() != ops.num_controls()) { throw DomainError("control metric: wrong number of dofs"); }
  } else if (y.dofs() != ops.num_nodes()) {
    throw DomainError("spatial metric: wrong number of dofs");
  }
}

inline double squared_norm(const Vector & v, Metric metric, const Operators & ops)
{
  switch (metric) {
  case Metric::mass:
    return v.dot(ops.mass * v);
  case Metric::h1:
    return v.dot(ops.mass * v) + v.dot(ops.gradient_gram * v);
  case Metric::control:
    return ops.control_norm_sq(v);
  }
  return 0.0;
}

inline double inner(const Vector & a, const Vector & b, Metric metric, const Operators & ops)
{
  switch (metric) {
  case Metric::mass:
    return a.dot(ops.mass * b);
  case Metric::h1:
    return a.dot(ops.mass * b) + a.dot(ops.gradient_gram * b);
  case Metric::control:
    return a.dot(ops.control_mass.cwiseProduct(b));
  }
  return 0.0;
}

}  // namespace detail

/// (sum_{i=1}^N dt e^{-lambda t_i} ||y_i||_X^p)^{1/p}
inline double norm_Lp_lambda(const Trajectory & y, double lambda, double p, Metric metric, const Operators & ops)
{
  if (!(p >= 1.0)) { throw DomainError("norm exponent must be ≥ 1"); }
  detail::check_metric(y, metric, ops);
  double sum = 0.0;
  for (std::size_t i = 1; i < y.size(); ++i) {
    const double nrm = std::sqrt(std::max(detail::squared_norm(y[i], metric, ops), 0.0));
    sum += y.grid.step * std::exp(-lambda * y.grid.time(i)) * std::pow(nrm, p);
  }
  return std::pow(sum, 1.0 / p);
}

/// sqrt(sum_{i=1}^N dt e^{-lambda t_i} ||y_i||_X^2)
inline double norm_L2_lambda(const Trajectory & y, double lambda, Metric metric, const Operators & ops)
{
  detail::check_metric(y, metric, ops);
  double sum = 0.0;
  for (std::size_t i = 1; i < y.size(); ++i) {
    sum += y.grid.step * std::exp(-lambda * y.grid.time(i)) * detail::squared_norm(y[i], metric, ops);
  }
  return std::sqrt(std::max(sum, 0.0));
}

/// sum_{i=1}^N dt e^{-lambda t_i} <a_i, b_i>_X
inline double inner_L2_lambda(
  const Trajectory & a, const Trajectory & b, double lambda, Metric metric, const Operators & ops)
{
  detail::check_metric(a, metric, ops);
  a.check_compatible(b);
  double sum = 0.0;
  for (std::size_t i = 1; i < a.size(); ++i) {
    sum += a.grid.step * std::exp(-lambda * a.grid.time(i)) * detail::inner(a[i], b[i], metric, ops);
  }
  return sum;
}

/// max_{0<=i<=N} e^{-lambda t_i / 2} ||y_i||_X (X = L2(Omega) unless a control trajectory)
inline double norm_C_lambda(const Trajectory & y, double lambda, const Operators & ops)
{
  const Metric metric = y.kind == TrajectoryKind::control ? Metric::control : Metric::mass;
  detail::check_metric(y, metric, ops);
  double m = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double nrm = std::sqrt(std::max(detail::squared_norm(y[i], metric, ops), 0.0));
    m = std::max(m, std::exp(-0.5 * lambda * y.grid.time(i)) * nrm);
  }
  return m;
}

/// max over nodes and times of e^{-lambda t_i / 2} |y(x_j, t_i)|
inline double norm_C_lambda_pointwise(const Trajectory & y, double lambda)
{
  double m = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    m = std::max(m, std::exp(-0.5 * lambda * y.grid.time(i)) * y[i].cwiseAbs().maxCoeff());
  }
  return m;
}

/// Norm in Y_lambda = C_lambda(L2) intersected with L2_lambda(H1).
inline double norm_Y_lambda(const Trajectory & y, double lambda, const Operators & ops)
{
  return norm_C_lambda(y, lambda, ops) + norm_L2_lambda(y, lambda, Metric::h1, ops);
}

}  // namespace horizonopt

#endif  // HORIZONOPT__WEIGHTED_SPACES_HPP_
