#ifndef HORIZONOPT__OBJECTIVE_HPP_
#define HORIZONOPT__OBJECTIVE_HPP_

/**
 * @file
 * @brief Discrete cost, adjoint gradient, Hessian forms and the ball-constraint multiplier.
 *
 * The discrete cost on the grid t_i = i dt is
 *
 *   J(u) = 1/2 sum_{i=1}^N dt e^{-sigma_s t_i} ||y_i - y_d(t_i)||^2_{M_obs}
 *        + nu/2 sum_{i=1}^N dt e^{-sigma_c t_i} ||u_i||^2_omega.
 *
 * Gradients are Riesz representatives in the e^{-sigma_c t}-weighted control inner product,
 * grad_i = e^{sigma_c t_i} phi_i|omega + nu u_i.
 */

#include <cmath>
#include <random>
#include <vector>

#include "admissible_set.hpp"
#include "errors.hpp"
#include "problem.hpp"
#include "solvers.hpp"
#include "weighted_spaces.hpp"

namespace horizonopt {

struct CostBreakdown
{
  double tracking{0.0};
  double control{0.0};
  double total{0.0};
};

/// Control together with its state and cost.
struct Evaluation
{
  Trajectory control;
  Trajectory state;
  CostBreakdown cost;
};

/// Cost of a control whose state is already known.
inline CostBreakdown cost_from_state(const DiscreteProblem & P, const Trajectory & y, const Trajectory & u)
{
  const auto & ops = P.ops();
  const auto & d = P.discounts();
  CostBreakdown c;
  for (std::size_t i = 1; i < y.size(); ++i) {
    const double t = P.grid().time(i);
    const Vector e = y[i] - P.target(i);
    c.tracking += 0.5 * P.grid().step * std::exp(-d.sigma_s * t) * e.dot(ops.observation_mass * e);
    c.control += 0.5 * P.nu() * P.grid().step * std::exp(-d.sigma_c * t) * ops.control_norm_sq(u[i]);
  }
  c.total = c.tracking + c.control;
  return c;
}

inline Evaluation evaluate(const DiscreteProblem & P, const Trajectory & u, const NewtonConfig & newton = {})
{
  Trajectory y = solve_forward(P, u, newton);
  CostBreakdown c = cost_from_state(P, y, u);
  return {u, std::move(y), c};
}

inline CostBreakdown cost(const DiscreteProblem & P, const Trajectory & u) { return evaluate(P, u).cost; }

/**
 * @brief J(a) - J(b) assembled from state and control differences.
 *
 * Uses  |p|^2 - |q|^2 = <p - q, p + q>  termwise, so the result keeps relative accuracy when the
 * two costs agree to many digits.
 */
inline double cost_difference(const DiscreteProblem & P, const Evaluation & a, const Evaluation & b)
{
  const auto & ops = P.ops();
  const auto & d = P.discounts();
  double diff = 0.0;
  for (std::size_t i = 1; i < a.state.size(); ++i) {
    const double t = P.grid().time(i);
    const Vector dy = a.state[i] - b.state[i];
    const Vector sy = a.state[i] + b.state[i] - 2.0 * P.target(i);
    diff += 0.5 * P.grid().step * std::exp(-d.sigma_s * t) * dy.dot(ops.observation_mass * sy);
    const Vector du = a.control[i] - b.control[i];
    const Vector su = a.control[i] + b.control[i];
    diff += 0.5 * P.nu() * P.grid().step * std::exp(-d.sigma_c * t) * du.dot(ops.control_mass.cwiseProduct(su));
  }
  return diff;
}

/// Riesz gradient from a known adjoint.
inline Trajectory gradient_from_adjoint(const DiscreteProblem & P, const Trajectory & u, const Trajectory & phi)
{
  const double sc = P.discounts().sigma_c;
  Trajectory g = Trajectory::zeros(P.grid(), P.ops().num_controls(), TrajectoryKind::control);
  for (std::size_t i = 1; i < g.size(); ++i) {
    g[i] = std::exp(sc * P.grid().time(i)) * P.ops().restrict(phi[i]) + P.nu() * u[i];
  }
  return g;
}

/// Evaluation plus adjoint and gradient.
struct GradientResult
{
  Evaluation eval;
  Trajectory adjoint;
  Trajectory gradient;
};

inline GradientResult gradient_full(const DiscreteProblem & P, const Trajectory & u, const NewtonConfig & newton = {})
{
  Evaluation e = evaluate(P, u, newton);
  Trajectory phi = solve_adjoint(P, e.state);
  Trajectory g = gradient_from_adjoint(P, u, phi);
  return {std::move(e), std::move(phi), std::move(g)};
}

inline GradientResult gradient_full(const DiscreteProblem & P, Evaluation e)
{
  Trajectory phi = solve_adjoint(P, e.state);
  Trajectory g = gradient_from_adjoint(P, e.control, phi);
  return {std::move(e), std::move(phi), std::move(g)};
}

/// Riesz gradient of J at u.
inline Trajectory gradient(const DiscreteProblem & P, const Trajectory & u) { return gradient_full(P, u).gradient; }

/// J'(u)v = <grad J(u), v>_{L2_{sigma_c}(Q_omega)}
inline double directional_derivative(const DiscreteProblem & P, const Trajectory & grad, const Trajectory & v)
{
  return inner_L2_lambda(grad, v, P.discounts().sigma_c, Metric::control, P.ops());
}

/**
 * @brief J'(u)v assembled through the linearized state z_v instead of the adjoint:
 *   sum dt e^{-sigma_s t} <y - y_d, z_v>_{M_obs} + nu sum dt e^{-sigma_c t} <u, v>_omega.
 */
inline double directional_derivative_by_sensitivity(
  const DiscreteProblem & P, const Evaluation & e, const Trajectory & v)
{
  const auto & ops = P.ops();
  const auto & d = P.discounts();
  const Trajectory z = solve_linearized(P, e.state, v, RhsOperator::control);
  double s = 0.0;
  for (std::size_t i = 1; i < z.size(); ++i) {
    const double t = P.grid().time(i);
    s += P.grid().step * std::exp(-d.sigma_s * t) * (e.state[i] - P.target(i)).dot(ops.observation_mass * z[i]);
    s += P.nu() * P.grid().step * std::exp(-d.sigma_c * t) * e.control[i].dot(ops.control_mass.cwiseProduct(v[i]));
  }
  return s;
}

namespace detail {

/// Second variation with an extra nonnegative weight `extra_i` on the control term.
inline double second_variation(
  const DiscreteProblem & P,
  const Trajectory & y,
  const Trajectory & phi,
  const Trajectory & v1,
  const Trajectory & v2,
  const std::vector<double> & extra)
{
  const auto & ops = P.ops();
  const auto & d = P.discounts();
  const Trajectory z1 = solve_linearized(P, y, v1, RhsOperator::control);
  const Trajectory z2 = solve_linearized(P, y, v2, RhsOperator::control);
  double s = 0.0;
  for (std::size_t i = 1; i < y.size(); ++i) {
    const double t = P.grid().time(i);
    const double dt = P.grid().step;
    const Vector fpp = map_nodal(y[i], P.f().d2f);
    s += dt * std::exp(-d.sigma_s * t) * z1[i].dot(ops.observation_mass * z2[i]);
    s -= dt * phi[i].dot(ops.lumped_mass.cwiseProduct(fpp).cwiseProduct(z1[i]).cwiseProduct(z2[i]));
    const double w = P.nu() * std::exp(-d.sigma_c * t) + (extra.empty() ? 0.0 : extra[i]);
    s += dt * w * v1[i].dot(ops.control_mass.cwiseProduct(v2[i]));
  }
  return s;
}

}  // namespace detail

/// J''(u)(v1, v2)
inline double hessian_vec(const DiscreteProblem & P, const Trajectory & u, const Trajectory & v1, const Trajectory & v2)
{
  const Evaluation e = evaluate(P, u);
  const Trajectory phi = solve_adjoint(P, e.state);
  return detail::second_variation(P, e.state, phi, v1, v2, {});
}

/// Activity of a time step with respect to the ball constraint.
enum class Activity { inactive, active_degenerate, active_strict };

/// Multiplier of the ball constraint, one value per time step.
struct Multiplier
{
  std::vector<double> values;
  std::vector<Activity> activity;
};

struct MultiplierOptions
{
  /// relative to gamma
  double activity_tolerance{1e-8};
  /// relative to max(1, max mu)
  double multiplier_tolerance{1e-8};
};

/**
 * @brief mu_i = ||phi_i + nu e^{-sigma_c t_i} u_i||_omega on active steps, 0 on inactive ones.
 *
 * Inactive steps carry no multiplier (the stationarity relation makes the norm vanish there up to
 * the optimizer tolerance).  Step 0 carries no weight and is reported inactive.
 */
inline Multiplier multiplier_and_cone(
  const DiscreteProblem & P, const Trajectory & u, const Trajectory & phi, const MultiplierOptions & opt = {})
{
  const auto & set = P.admissible();
  if (set.kind != AdmissibleSet::Kind::ball) { throw DomainError("multiplier is defined for the ball constraint"); }
  const auto & ops = P.ops();
  const double sc = P.discounts().sigma_c;
  Multiplier m;
  m.values.assign(u.size(), 0.0);
  m.activity.assign(u.size(), Activity::inactive);
  double max_mu = 0.0;
  for (std::size_t i = 1; i < u.size(); ++i) {
    const Vector r = ops.restrict(phi[i]) + P.nu() * std::exp(-sc * P.grid().time(i)) * u[i];
    const double nu_i = std::sqrt(ops.control_norm_sq(u[i]));
    if (nu_i >= set.gamma * (1.0 - opt.activity_tolerance)) {
      m.values[i] = std::sqrt(ops.control_norm_sq(r));
      max_mu = std::max(max_mu, m.values[i]);
      m.activity[i] = Activity::active_degenerate;
    }
  }
  const double thr = opt.multiplier_tolerance * std::max(1.0, max_mu);
  for (std::size_t i = 1; i < u.size(); ++i) {
    if (m.activity[i] != Activity::inactive && m.values[i] > thr) { m.activity[i] = Activity::active_strict; }
  }
  return m;
}

/// Second derivative of the Lagrangian:  J''(u)(v,v) + sum dt (mu_i / gamma) ||v_i||^2.
inline double lagrangian_hessian_vec(
  const DiscreteProblem & P, const Trajectory & u, const Multiplier & mu, const Trajectory & v)
{
  if (P.admissible().kind != AdmissibleSet::Kind::ball) {
    throw DomainError("Lagrangian form is defined for the ball constraint");
  }
  const Evaluation e = evaluate(P, u);
  const Trajectory phi = solve_adjoint(P, e.state);
  std::vector<double> extra(mu.values.size());
  for (std::size_t i = 0; i < extra.size(); ++i) { extra[i] = mu.values[i] / P.admissible().gamma; }
  return detail::second_variation(P, e.state, phi, v, v, extra);
}

struct CriticalDirectionOptions
{
  /// relative activity tolerance (gamma or beta - alpha)
  double activity_tolerance{1e-8};
  /// box: |grad| above this (relative to nu (beta - alpha)) marks a strongly active node
  double strong_tolerance{1e-6};
};

/// True when v lies in the critical cone at u (ball: multiplier needed; box: uses phi).
inline bool in_critical_cone(
  const DiscreteProblem & P,
  const Trajectory & u,
  const Trajectory & phi,
  const Multiplier * mu,
  const Trajectory & v,
  const CriticalDirectionOptions & opt = {})
{
  const auto & ops = P.ops();
  const auto & set = P.admissible();
  if (set.kind == AdmissibleSet::Kind::ball) {
    if (!mu) { throw DomainError("ball cone needs the multiplier"); }
    for (std::size_t i = 1; i < u.size(); ++i) {
      const double ip = u[i].dot(ops.control_mass.cwiseProduct(v[i]));
      const double scale = std::sqrt(ops.control_norm_sq(u[i]) * ops.control_norm_sq(v[i]));
      if (mu->activity[i] == Activity::active_strict && std::abs(ip) > 1e-12 * scale) { return false; }
      if (mu->activity[i] == Activity::active_degenerate && ip > 1e-12 * scale) { return false; }
    }
    return true;
  }
  const Trajectory g = gradient_from_adjoint(P, u, phi);
  const double tol = opt.activity_tolerance * set.scale();
  const double strong = opt.strong_tolerance * P.nu() * set.scale();
  for (std::size_t i = 1; i < u.size(); ++i) {
    for (Eigen::Index j = 0; j < u[i].size(); ++j) {
      const bool at_lower = u[i][j] <= set.alpha + tol;
      const bool at_upper = u[i][j] >= set.beta - tol;
      if ((at_lower || at_upper) && std::abs(g[i][j]) > strong && v[i][j] != 0.0) { return false; }
      if (at_lower && v[i][j] < 0.0) { return false; }
      if (at_upper && v[i][j] > 0.0) { return false; }
    }
  }
  return true;
}

/**
 * @brief Random directions in the critical cone at a stationary u.
 *
 * Ball: on strictly active steps v_i is made orthogonal to u_i; on degenerate active steps the
 * component along u_i is removed when it points outward.  Box: v is zeroed on strongly active
 * nodes and sign-clipped on weakly active ones, then corrected along the gradient on the free
 * nodes so that J'(u)v vanishes.  Directions that fail the cone test or collapse to zero are
 * dropped, so an empty result means the cone is trivial.
 */
inline std::vector<Trajectory> sample_critical_directions(
  const DiscreteProblem & P,
  const Trajectory & u,
  const Trajectory & phi,
  const Multiplier * mu,
  std::size_t count,
  std::uint64_t seed,
  const CriticalDirectionOptions & opt = {})
{
  const auto & ops = P.ops();
  const auto & set = P.admissible();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Trajectory g = gradient_from_adjoint(P, u, phi);
  const double tol = opt.activity_tolerance * set.scale();
  const double strong = opt.strong_tolerance * P.nu() * set.scale();

  std::vector<Trajectory> out;
  for (std::size_t k = 0; k < count; ++k) {
    Trajectory v = Trajectory::zeros(P.grid(), ops.num_controls(), TrajectoryKind::control);
    for (std::size_t i = 1; i < v.size(); ++i) {
      for (Eigen::Index j = 0; j < v[i].size(); ++j) { v[i][j] = normal(rng); }
    }

    if (set.kind == AdmissibleSet::Kind::ball) {
      if (!mu) { throw DomainError("ball cone needs the multiplier"); }
      for (std::size_t i = 1; i < v.size(); ++i) {
        if (mu->activity[i] == Activity::inactive) { continue; }
        const double uu = ops.control_norm_sq(u[i]);
        const double ip = u[i].dot(ops.control_mass.cwiseProduct(v[i]));
        if (mu->activity[i] == Activity::active_strict || ip > 0.0) { v[i] -= (ip / uu) * u[i]; }
      }
    } else {
      Trajectory free_grad = Trajectory::zeros(P.grid(), ops.num_controls(), TrajectoryKind::control);
      for (std::size_t i = 1; i < v.size(); ++i) {
        for (Eigen::Index j = 0; j < v[i].size(); ++j) {
          const bool at_lower = u[i][j] <= set.alpha + tol;
          const bool at_upper = u[i][j] >= set.beta - tol;
          if (at_lower || at_upper) {
            if (std::abs(g[i][j]) > strong) {
              v[i][j] = 0.0;
            } else if (at_lower) {
              v[i][j] = std::max(v[i][j], 0.0);
            } else {
              v[i][j] = std::min(v[i][j], 0.0);
            }
          } else {
            free_grad[i][j] = g[i][j];
          }
        }
      }
      const double gg = directional_derivative(P, free_grad, free_grad);
      if (gg > 0.0) { v.axpy(-directional_derivative(P, g, v) / gg, free_grad); }
    }

    if (norm_L2_lambda(v, P.discounts().sigma_c, Metric::control, ops) <= 1e-300) { continue; }
    if (in_critical_cone(P, u, phi, mu, v, opt)) { out.push_back(std::move(v)); }
  }
  return out;
}

}  // namespace horizonopt

#endif  // HORIZONOPT__OBJECTIVE_HPP_
