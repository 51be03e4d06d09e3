#ifndef HORIZONOPT__OPTIMIZER_HPP_
#define HORIZONOPT__OPTIMIZER_HPP_

/**
 * @file
 * @brief Projected gradient with Armijo backtracking in the e^{-sigma_c t}-weighted control metric.
 */

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "errors.hpp"
#include "objective.hpp"
#include "problem.hpp"
#include "projection.hpp"

namespace horizonopt {

struct OptimizerConfig
{
  /// first trial step; 0 selects 1/nu
  double initial_step{0.0};
  double armijo_c1{1e-4};
  double backtrack{0.5};
  double tolerance{1e-9};
  std::size_t max_iterations{5000};
  /// when set, start from the projection of a seeded Gaussian control instead of P(0)
  std::optional<std::uint64_t> seed{};
  std::optional<Trajectory> warm_start{};
  double min_step{1e-14};
  double max_step{1e8};
  NewtonConfig newton{};

  void validate() const
  {
    if (!(initial_step >= 0.0) || !std::isfinite(initial_step)) { throw ConfigError("optimizer: initial_step must be ≥ 0"); }
    if (!(armijo_c1 > 0.0 && armijo_c1 < 1.0)) { throw ConfigError("optimizer: armijo_c1 must lie in (0,1)"); }
    if (!(backtrack > 0.0 && backtrack < 1.0)) { throw ConfigError("optimizer: backtrack must lie in (0,1)"); }
    if (!(tolerance > 0.0)) { throw ConfigError("optimizer: tolerance must be > 0"); }
    if (max_iterations == 0) { throw ConfigError("optimizer: max_iterations must be > 0"); }
    if (!(min_step > 0.0) || !(max_step > min_step)) { throw ConfigError("optimizer: need 0 < min_step < max_step"); }
  }
};

struct IterationRecord
{
  double cost{0.0};
  double residual{0.0};
  double step{0.0};
};

struct SolveReport
{
  std::size_t iterations{0};
  CostBreakdown cost{};
  double residual{0.0};
  bool converged{false};
  bool max_iterations_reached{false};
  std::vector<IterationRecord> history{};
  double wall_time{0.0};
};

struct OptimizeResult
{
  Trajectory control;
  Trajectory state;
  Trajectory adjoint;
  SolveReport report;
};

inline Trajectory initial_control(const DiscreteProblem & P, const OptimizerConfig & cfg)
{
  if (cfg.warm_start) {
    const Trajectory & w = *cfg.warm_start;
    if (w.size() != P.grid().size() || w.dofs() != P.ops().num_controls()) {
      throw DomainError("warm start does not match the problem grid");
    }
    Trajectory u = project_pointwise(P, w);
    u.grid = P.grid();
    u.kind = TrajectoryKind::control;
    return u;
  }
  Trajectory u = P.zero_control();
  if (cfg.seed) {
    std::mt19937_64 rng(*cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 1; i < u.size(); ++i) {
      for (Eigen::Index j = 0; j < u[i].size(); ++j) { u[i][j] = P.admissible().scale() * normal(rng); }
    }
  }
  return project_pointwise(P, u);
}

/**
 * @brief Armijo test  J(u+) - J(u) <= -(c1/s) ||u - u+||^2.
 *
 * The cost difference is assembled from state differences.  Once it falls to the rounding level
 * of the cost itself it is replaced by the trapezoid value 1/2 <g(u) + g(u+), u+ - u>, which is
 * exact for quadratic costs and built from gradients that keep their relative accuracy.
 */
inline bool sufficient_decrease(
  const DiscreteProblem & P, const GradientResult & cur, const GradientResult & trial, double dn2, double slope)
{
  double diff = cost_difference(P, trial.eval, cur.eval);
  const double noise = 1e4 * std::numeric_limits<double>::epsilon() * (cur.eval.cost.total + trial.eval.cost.total);
  if (std::abs(diff) <= noise) {
    const Trajectory du = trial.eval.control - cur.eval.control;
    diff = 0.5 * (directional_derivative(P, cur.gradient, du) + directional_derivative(P, trial.gradient, du));
  }
  return diff <= -slope * dn2;
}

/**
 * @brief Projected gradient method.
 *
 * Trial steps start from a clipped Barzilai-Borwein step and are halved until
 *   J(P(u - s g)) <= J(u) - (c1 / s) ||u - P(u - s g)||^2_{sigma_c}.
 * Iteration stops once stationarity_residual (step 1/nu) drops below the tolerance.
 */
inline OptimizeResult optimize(const DiscreteProblem & P, const OptimizerConfig & cfg = {})
{
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const double sc = P.discounts().sigma_c;
  const auto & ops = P.ops();

  GradientResult cur = gradient_full(P, initial_control(P, cfg), cfg.newton);
  SolveReport rep;
  rep.residual = stationarity_residual(P, cur.eval.control, cur.gradient);
  rep.history.push_back({cur.eval.cost.total, rep.residual, 0.0});

  double step = cfg.initial_step > 0.0 ? cfg.initial_step : 1.0 / P.nu();
  step = std::clamp(step, cfg.min_step, cfg.max_step);

  while (true) {
    if (rep.residual <= cfg.tolerance) {
      rep.converged = true;
      break;
    }
    if (rep.iterations >= cfg.max_iterations) {
      rep.max_iterations_reached = true;
      break;
    }

    std::optional<GradientResult> accepted;
    bool fixed_point = false;
    while (!accepted) {
      Trajectory trial = cur.eval.control;
      trial.axpy(-step, cur.gradient);
      trial = project_pointwise(P, trial);
      const Trajectory d = cur.eval.control - trial;
      const double dn2 = std::pow(norm_L2_lambda(d, sc, Metric::control, ops), 2);
      if (dn2 == 0.0) {
        if (step * P.nu() < 1.0) {
          // the step vanished in rounding; retry from the natural step
          step = 1.0 / P.nu();
          continue;
        }
        fixed_point = true;
        break;
      }
      try {
        GradientResult g = gradient_full(P, trial, cfg.newton);
        if (sufficient_decrease(P, cur, g, dn2, cfg.armijo_c1 / step)) {
          accepted = std::move(g);
          break;
        }
      } catch (const SolverError &) {
        // too long a step for Newton; shrink
      }
      step *= cfg.backtrack;
      if (step < cfg.min_step) {
        throw LineSearchError(
          "line search failed below minimal step at iteration " + std::to_string(rep.iterations) +
          " (residual " + std::to_string(rep.residual) + ")");
      }
    }
    if (fixed_point) {
      rep.residual = stationarity_residual(P, cur.eval.control, cur.gradient);
      if (rep.residual > cfg.tolerance) { throw LineSearchError("projected step is stationary but the residual is not"); }
      continue;
    }

    GradientResult next = std::move(*accepted);
    const Trajectory du = next.eval.control - cur.eval.control;
    const Trajectory dg = next.gradient - cur.gradient;
    const double uu = inner_L2_lambda(du, du, sc, Metric::control, ops);
    const double ug = inner_L2_lambda(du, dg, sc, Metric::control, ops);
    const double used = step;
    step = ug > 0.0 ? uu / ug : cfg.max_step;
    step = std::clamp(step, cfg.min_step, cfg.max_step);

    cur = std::move(next);
    ++rep.iterations;
    rep.residual = stationarity_residual(P, cur.eval.control, cur.gradient);
    rep.history.push_back({cur.eval.cost.total, rep.residual, used});
  }

  rep.cost = cur.eval.cost;
  rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(cur.eval.control), std::move(cur.eval.state), std::move(cur.adjoint), std::move(rep)};
}

struct GrowthReport
{
  double kappa{0.0};
  std::vector<double> margins{};
  std::vector<double> distances{};
};

/**
 * @brief Probes quadratic growth around u*.
 *
 * Draws u = P(u* + delta) with ||delta||_{sigma_c} uniform in (radius/4, radius] and reports the
 * minimum of 2 (J(u) - J(u*)) / ||u - u*||^2_{sigma_c}.
 */
inline GrowthReport verify_growth(
  const DiscreteProblem & P, const Trajectory & u_star, double radius, std::size_t samples, std::uint64_t seed)
{
  if (!(radius > 0.0) || samples == 0) { throw DomainError("growth check needs a positive radius and samples"); }
  const double sc = P.discounts().sigma_c;
  const auto & ops = P.ops();
  const Evaluation base = evaluate(P, u_star);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> length(0.25, 1.0);

  GrowthReport rep;
  rep.kappa = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < samples; ++k) {
    Trajectory delta = Trajectory::zeros(P.grid(), ops.num_controls(), TrajectoryKind::control);
    for (std::size_t i = 1; i < delta.size(); ++i) {
      for (Eigen::Index j = 0; j < delta[i].size(); ++j) { delta[i][j] = normal(rng); }
    }
    const double dn = norm_L2_lambda(delta, sc, Metric::control, ops);
    const double r = radius * length(rng);
    if (dn == 0.0) { continue; }
    delta.scale(r / dn);
    const Trajectory u = project_pointwise(P, u_star + delta);
    const double dist = norm_L2_lambda(u - u_star, sc, Metric::control, ops);
    if (!(dist > 0.0)) { continue; }
    const Evaluation e = evaluate(P, u);
    const double m = 2.0 * cost_difference(P, e, base) / (dist * dist);
    rep.margins.push_back(m);
    rep.distances.push_back(dist);
    rep.kappa = std::min(rep.kappa, m);
  }
  if (rep.margins.empty()) { throw DomainError("growth check produced no admissible perturbation"); }
  return rep;
}

}  // namespace horizonopt

#endif  // HORIZONOPT__OPTIMIZER_HPP_
