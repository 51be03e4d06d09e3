#ifndef HORIZONOPT__PROJECTION_HPP_
#define HORIZONOPT__PROJECTION_HPP_

/**
 * @file
 * @brief Pointwise-in-time projection onto U_ad and first-order optimality residuals.
 */

#include <cmath>
#include <string>
#include <vector>

#include "admissible_set.hpp"
#include "errors.hpp"
#include "problem.hpp"
#include "weighted_spaces.hpp"

namespace horizonopt {

/// Projects every time slice of a control trajectory onto K_ad.
inline Trajectory project_pointwise(const AdmissibleSet & set, const Trajectory & v, const Vector & control_mass)
{
  Trajectory out = v;
  for (auto & slice : out.values) { slice = set.project(slice, control_mass); }
  return out;
}

inline Trajectory project_pointwise(const DiscreteProblem & P, const Trajectory & v)
{
  return project_pointwise(P.admissible(), v, P.ops().control_mass);
}

/// ||u - P(u - grad / nu)||_{L2_{sigma_c}(Q_omega)}
inline double stationarity_residual(const DiscreteProblem & P, const Trajectory & u, const Trajectory & grad)
{
  Trajectory trial = u;
  trial.axpy(-1.0 / P.nu(), grad);
  Trajectory diff = u - project_pointwise(P, trial);
  return norm_L2_lambda(diff, P.discounts().sigma_c, Metric::control, P.ops());
}

/// Residual with an explicit step s: ||u - P(u - s grad)||_{sigma_c}.
inline double stationarity_residual(
  const DiscreteProblem & P, const Trajectory & u, const Trajectory & grad, double step)
{
  if (!(step > 0.0)) { throw DomainError("stationarity residual needs a positive step"); }
  Trajectory trial = u;
  trial.axpy(-step, grad);
  Trajectory diff = u - project_pointwise(P, trial);
  return norm_L2_lambda(diff, P.discounts().sigma_c, Metric::control, P.ops());
}

/// Which closed-form characterization applies at a time step.
enum class FormulaCase {
  /// ball, ||u_i|| < gamma: phi_i + nu e^{-sigma_c t_i} u_i = 0
  interior,
  /// ball, ||u_i|| = gamma: u_i = -gamma phi_i / ||phi_i||
  boundary,
  /// box: u_i = clamp(-e^{sigma_c t_i} phi_i / nu)
  clamp
};

inline const char * to_string(FormulaCase c)
{
  switch (c) {
  case FormulaCase::interior:
    return "interior";
  case FormulaCase::boundary:
    return "boundary";
  case FormulaCase::clamp:
    return "clamp";
  }
  return "?";
}

struct FormulaRecord
{
  std::size_t step{0};
  double t{0.0};
  FormulaCase which{FormulaCase::clamp};
  double residual{0.0};
};

struct FormulaReport
{
  std::vector<FormulaRecord> records;
  double max_residual{0.0};
  std::size_t worst_step{0};
};

/**
 * @brief Evaluates the applicable closed-form optimality relation at every step i >= 1.
 *
 * Residuals are L2(omega) norms per step; the report keeps their maximum over the steps.
 * interior: ||phi_i|omega + nu e^{-sigma_c t_i} u_i||_omega.
 * boundary: ||u_i + gamma phi_i / ||phi_i||||_omega, or | ||u_i|| - gamma | when phi_i vanishes.
 * clamp: ||u_i - clamp(-e^{sigma_c t_i} phi_i / nu)||_omega.
 */
inline FormulaReport check_projection_formulas(
  const DiscreteProblem & P, const Trajectory & u, const Trajectory & phi, double activity_tolerance = 1e-8)
{
  const auto & ops = P.ops();
  const auto & set = P.admissible();
  const double sc = P.discounts().sigma_c;
  FormulaReport rep;
  for (std::size_t i = 1; i < u.size(); ++i) {
    const double t = P.grid().time(i);
    const Vector p = ops.restrict(phi[i]);
    FormulaRecord r{i, t, FormulaCase::clamp, 0.0};
    if (set.kind == AdmissibleSet::Kind::box) {
      const Vector target = (-std::exp(sc * t) / P.nu() * p).cwiseMax(set.alpha).cwiseMin(set.beta);
      r.residual = std::sqrt(ops.control_norm_sq(u[i] - target));
    } else if (std::sqrt(ops.control_norm_sq(u[i])) < set.gamma * (1.0 - activity_tolerance)) {
      r.which = FormulaCase::interior;
      r.residual = std::sqrt(ops.control_norm_sq(p + P.nu() * std::exp(-sc * t) * u[i]));
    } else {
      r.which = FormulaCase::boundary;
      const double pn = std::sqrt(ops.control_norm_sq(p));
      if (pn > 0.0) {
        r.residual = std::sqrt(ops.control_norm_sq(u[i] + set.gamma / pn * p));
      } else {
        r.residual = std::abs(std::sqrt(ops.control_norm_sq(u[i])) - set.gamma);
      }
    }
    if (r.residual > rep.max_residual || rep.records.empty()) {
      rep.max_residual = std::max(rep.max_residual, r.residual);
      rep.worst_step = i;
    }
    rep.records.push_back(r);
  }
  return rep;
}

}  // namespace horizonopt

#endif  // HORIZONOPT__PROJECTION_HPP_
