#ifndef HORIZONOPT__SOLVERS_HPP_
#define HORIZONOPT__SOLVERS_HPP_

/**
 * @file
 * @brief Implicit Euler solvers for the state, linearized, second-order and adjoint equations.
 *
 * Every step matrix has the form  M/dt + K + diag(M_L b)  with M_L the lumped mass, so the
 * semilinear term is evaluated nodally and its derivative is diagonal.  The adjoint recursion is
 * the exact transpose of the linearized one:
 *
 *   (M/dt + K + M_L f'(y_i)) phi_i = e^{-sigma t_i} M_obs w_i + M phi_{i+1} / dt,   phi_{N+1} = 0,
 *
 * which gives  sum_i dt e^{-sigma t_i} <w_i, z_i>_{M_obs} = sum_i dt <phi_i, B v_i>  for every
 * linearized response z to a control v.
 */

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/SparseCholesky>

#include "errors.hpp"
#include "problem.hpp"
#include "weighted_spaces.hpp"

namespace horizonopt {

struct NewtonConfig
{
  /// absolute tolerance on the residual in the dual lumped-mass norm
  double tolerance{1e-12};
  /// relative floor, scaled by the norm of the right-hand side
  double relative_tolerance{1e-14};
  int max_iterations{30};
  /// step reduction factor when the residual does not decrease
  double damping{0.5};
};

/// How the right-hand side of a linearized solve enters the step equation.
enum class RhsOperator {
  /// control values on omega through the control mass
  control,
  /// nodal field through the consistent mass
  mass,
  /// nodal field through the lumped mass
  lumped_mass
};

namespace detail {

/// Step matrix  M/dt + K + diag(d)  with a symbolic factorization shared across time steps.
class StepOperator
{
public:
  explicit StepOperator(const DiscreteProblem & P)
      : base_((1.0 / P.grid().step) * P.ops().mass + P.ops().stiffness)
  {
    base_.makeCompressed();
    matrix_ = base_;
    diag_.resize(base_.outerSize());
    for (Eigen::Index j = 0; j < base_.outerSize(); ++j) {
      diag_[j] = -1;
      for (Eigen::Index k = base_.outerIndexPtr()[j]; k < base_.outerIndexPtr()[j + 1]; ++k) {
        if (base_.innerIndexPtr()[k] == j) { diag_[j] = k; }
      }
    }
    solver_.analyzePattern(matrix_);
  }

  const SparseMatrix & base() const { return base_; }

  /// Factorize  base + diag(d); returns false on a numerically singular matrix.
  bool factorize(const Vector & d)
  {
    std::copy(base_.valuePtr(), base_.valuePtr() + base_.nonZeros(), matrix_.valuePtr());
    for (Eigen::Index j = 0; j < d.size(); ++j) { matrix_.valuePtr()[diag_[j]] += d[j]; }
    solver_.factorize(matrix_);
    if (solver_.info() != Eigen::Success) { return false; }
    const Vector piv = solver_.vectorD();
    return (piv.array().abs() > 1e-300).all() && piv.allFinite();
  }

  Vector solve(const Vector & b) const { return solver_.solve(b); }

private:
  SparseMatrix base_;
  SparseMatrix matrix_;
  std::vector<Eigen::Index> diag_;
  Eigen::SimplicialLDLT<SparseMatrix> solver_;
};

inline double dual_norm(const Vector & r, const Vector & lumped)
{
  return std::sqrt(r.cwiseAbs2().cwiseQuotient(lumped).sum());
}

inline Vector apply_rhs(const DiscreteProblem & P, const Vector & v, RhsOperator op)
{
  switch (op) {
  case RhsOperator::control:
    return P.ops().control_action(v);
  case RhsOperator::mass:
    return P.ops().mass * v;
  case RhsOperator::lumped_mass:
    return P.ops().lumped_mass.cwiseProduct(v);
  }
  return v;
}

inline Vector map_nodal(const Vector & y, const std::function<double(double)> & fn)
{
  Vector out(y.size());
  for (Eigen::Index k = 0; k < y.size(); ++k) { out[k] = fn(y[k]); }
  return out;
}

/**
 * Forward recursion  (M/dt + K + M_L b_i) z_i = M z_{i-1}/dt + load_i,  z_0 = 0.
 * `coefficient(i)` returns b_i and `load(i)` the assembled load vector.
 */
template<typename Coefficient, typename Load>
Trajectory linear_forward(const DiscreteProblem & P, Coefficient && coefficient, Load && load)
{
  const auto & ops = P.ops();
  const double dt = P.grid().step;
  StepOperator step(P);
  Trajectory z = Trajectory::zeros(P.grid(), ops.num_nodes(), TrajectoryKind::generic);
  for (std::size_t i = 1; i < z.size(); ++i) {
    if (!step.factorize(ops.lumped_mass.cwiseProduct(coefficient(i)))) {
      throw SolverError("singular step matrix in linearized solve", i);
    }
    z[i] = step.solve(ops.mass * z[i - 1] / dt + load(i));
    if (!z[i].allFinite()) { throw SolverError("non-finite value in linearized solve", i); }
  }
  return z;
}

}  // namespace detail

/**
 * @brief State trajectory for the control u.
 *
 * Each implicit Euler step solves  M(y_i - y_{i-1})/dt + K y_i + M_L f(y_i) = M g_i + B u_i  by
 * damped Newton starting from y_{i-1}.  Throws SolverError with the step index and residual
 * history when Newton fails.
 */
inline Trajectory solve_forward(const DiscreteProblem & P, const Trajectory & u, const NewtonConfig & cfg = {})
{
  const auto & ops = P.ops();
  const auto & f = P.f();
  const double dt = P.grid().step;
  if (u.size() != P.grid().size() || u.dofs() != ops.num_controls()) {
    throw DomainError("control trajectory does not match the problem grid");
  }

  detail::StepOperator step(P);
  const SparseMatrix & base = step.base();
  Trajectory y = Trajectory::zeros(P.grid(), ops.num_nodes(), TrajectoryKind::state);
  y[0] = P.spec().y0;

  for (std::size_t i = 1; i < y.size(); ++i) {
    const Vector rhs = ops.mass * y[i - 1] / dt + ops.mass * P.source(i) + ops.control_action(u[i]);
    const double threshold = cfg.tolerance + cfg.relative_tolerance * detail::dual_norm(rhs, ops.lumped_mass);
    const auto residual = [&](const Vector & v) {
      return Vector(base * v + ops.lumped_mass.cwiseProduct(detail::map_nodal(v, f.f)) - rhs);
    };

    Vector yi = y[i - 1];
    Vector res = residual(yi);
    double rn = detail::dual_norm(res, ops.lumped_mass);
    std::vector<double> history{rn};
    bool converged = rn <= threshold;
    for (int it = 0; it < cfg.max_iterations && !converged; ++it) {
      if (!step.factorize(ops.lumped_mass.cwiseProduct(detail::map_nodal(yi, f.df)))) {
        throw SolverError("singular Newton matrix", i, history);
      }
      const Vector delta = step.solve(-res);
      double theta = 1.0;
      Vector trial = yi + delta;
      Vector trial_res = residual(trial);
      double trial_rn = detail::dual_norm(trial_res, ops.lumped_mass);
      while ((!std::isfinite(trial_rn) || trial_rn > (1.0 - 1e-4 * theta) * rn) && theta > 1e-6) {
        theta *= cfg.damping;
        trial = yi + theta * delta;
        trial_res = residual(trial);
        trial_rn = detail::dual_norm(trial_res, ops.lumped_mass);
      }
      if (!std::isfinite(trial_rn) || trial_rn >= rn) {
        // no further decrease: accept only when already at the roundoff floor
        converged = rn <= 1e3 * threshold;
        break;
      }
      yi = trial;
      res = trial_res;
      rn = trial_rn;
      history.push_back(rn);
      converged = rn <= threshold;
    }
    if (!converged) { throw SolverError("Newton did not converge", i, history); }
    y[i] = yi;
  }
  return y;
}

/**
 * @brief Linearized response  z' + Az + f'(y)z = (rhs through `op`),  z(0) = 0.
 */
inline Trajectory solve_linearized(
  const DiscreteProblem & P, const Trajectory & base_state, const Trajectory & rhs, RhsOperator op)
{
  const auto & f = P.f();
  return detail::linear_forward(
    P,
    [&](std::size_t i) { return detail::map_nodal(base_state[i], f.df); },
    [&](std::size_t i) { return detail::apply_rhs(P, rhs[i], op); });
}

/**
 * @brief Same recursion with an arbitrary coefficient b (b >= Lambda_f) and a nodal source h
 * applied through the consistent mass.
 */
inline Trajectory solve_linear_coefficient(
  const DiscreteProblem & P, const Trajectory & coefficient, const Trajectory & h)
{
  return detail::linear_forward(
    P,
    [&](std::size_t i) { return coefficient[i]; },
    [&](std::size_t i) { return Vector(P.ops().mass * h[i]); });
}

/// Second-order sensitivity:  rhs_i = -f''(y_i) z1_i z2_i  through the lumped mass.
inline Trajectory solve_second_order(
  const DiscreteProblem & P, const Trajectory & base_state, const Trajectory & z1, const Trajectory & z2)
{
  const auto & f = P.f();
  return detail::linear_forward(
    P,
    [&](std::size_t i) { return detail::map_nodal(base_state[i], f.df); },
    [&](std::size_t i) {
      const Vector prod = -detail::map_nodal(base_state[i], f.d2f).cwiseProduct(z1[i]).cwiseProduct(z2[i]);
      return Vector(P.ops().lumped_mass.cwiseProduct(prod));
    });
}

/**
 * @brief Adjoint for the source  e^{-weight t} w  measured with the observation mass.
 *
 * Entries 1..N come from the transposed recursion (with phi_{N+1} = 0); entry 0 is one more
 * source-free backward step.
 */
inline Trajectory solve_adjoint_source(
  const DiscreteProblem & P, const Trajectory & base_state, const Trajectory & w, double weight)
{
  const auto & ops = P.ops();
  const auto & f = P.f();
  const double dt = P.grid().step;
  const std::size_t N = P.grid().num_steps;
  detail::StepOperator step(P);
  Trajectory phi = Trajectory::zeros(P.grid(), ops.num_nodes(), TrajectoryKind::adjoint);
  Vector next = Vector::Zero(ops.num_nodes());
  for (std::size_t i = N + 1; i-- > 0;) {
    if (!step.factorize(ops.lumped_mass.cwiseProduct(detail::map_nodal(base_state[i], f.df)))) {
      throw SolverError("singular step matrix in adjoint solve", i);
    }
    Vector b = ops.mass * next / dt;
    if (i > 0) { b += std::exp(-weight * P.grid().time(i)) * (ops.observation_mass * w[i]); }
    phi[i] = step.solve(b);
    if (!phi[i].allFinite()) { throw SolverError("non-finite value in adjoint solve", i); }
    next = phi[i];
  }
  return phi;
}

/// Adjoint of the tracking cost:  source e^{-sigma_s t}(y - y_d) on omega_obs.
inline Trajectory solve_adjoint(const DiscreteProblem & P, const Trajectory & state)
{
  Trajectory w = state;
  w.kind = TrajectoryKind::generic;
  for (std::size_t i = 0; i < w.size(); ++i) { w[i] -= P.target(i); }
  return solve_adjoint_source(P, state, w, P.discounts().sigma_s);
}

struct EstimateReport
{
  double lhs{0.0};
  double rhs{0.0};
  bool satisfied{false};
};

/// Right-hand side h = g + u chi_omega as a nodal trajectory.
inline Trajectory forcing(const DiscreteProblem & P, const Trajectory & u)
{
  Trajectory h = Trajectory::zeros(P.grid(), P.ops().num_nodes(), TrajectoryKind::generic);
  for (std::size_t i = 0; i < h.size(); ++i) { h[i] = P.source(i) + P.ops().extend(u[i]); }
  return h;
}

/**
 * @brief Discrete energy estimate for the state equation:
 *
 *   ||y||_{C_lambda} + sqrt(min(lambda/2 + Lambda_f, 2 Lambda_A)) ||y||_{L2_lambda(H1)}
 *       <= 2 ||y_0|| + 2 sqrt(2) / sqrt(lambda + 2 Lambda_f) ||h||_{L2_lambda}
 */
inline EstimateReport check_energy_estimate(
  const DiscreteProblem & P, const Trajectory & u, double lambda, double slack = 0.05)
{
  const double lf = P.f().monotonicity;
  if (!(lambda > -2.0 * lf)) { throw DomainError("energy estimate needs λ > −2Λ_f"); }
  const auto & ops = P.ops();
  const Trajectory y = solve_forward(P, u);
  const Trajectory h = forcing(P, u);
  const double c = std::sqrt(std::min(0.5 * lambda + lf, 2.0 * P.spec().form.ellipticity));
  EstimateReport r;
  r.lhs = norm_C_lambda(y, lambda, ops) + c * norm_L2_lambda(y, lambda, Metric::h1, ops);
  r.rhs = 2.0 * std::sqrt(P.spec().y0.dot(ops.mass * P.spec().y0)) +
          2.0 * std::sqrt(2.0) / std::sqrt(lambda + 2.0 * lf) * norm_L2_lambda(h, lambda, Metric::mass, ops);
  r.satisfied = r.lhs <= r.rhs * (1.0 + slack);
  return r;
}

/// K_1 = 2 / min(1, lambda/2, Lambda_A)
inline double linearized_constant(double lambda, double ellipticity)
{
  return 2.0 / std::min({1.0, 0.5 * lambda, ellipticity});
}

/// ||z||_{Y_lambda} <= K_1 ||h||_{L2_lambda} for the response z to the nodal source h.
inline EstimateReport check_linearized_estimate(
  const DiscreteProblem & P, const Trajectory & coefficient, const Trajectory & h, double lambda, double slack = 0.05)
{
  const double lf = P.f().monotonicity;
  if (!(lambda > -2.0 * lf) || !(lambda > 0.0)) { throw DomainError("linearized estimate needs λ > max(0, −2Λ_f)"); }
  const auto & ops = P.ops();
  const Trajectory z = solve_linear_coefficient(P, coefficient, h);
  EstimateReport r;
  r.lhs = norm_Y_lambda(z, lambda, ops);
  r.rhs = linearized_constant(lambda, P.spec().form.ellipticity) * norm_L2_lambda(h, lambda, Metric::mass, ops);
  r.satisfied = r.lhs <= r.rhs * (1.0 + slack);
  return r;
}

}  // namespace horizonopt

#endif  // HORIZONOPT__SOLVERS_HPP_
