#ifndef HORIZONOPT__HORIZON_HPP_
#define HORIZONOPT__HORIZON_HPP_

/**
 * @file
 * @brief Finite-horizon sweeps against a long-horizon reference solution.
 *
 * The infinite-horizon optimum is replaced by the solution on a reference horizon T_ref.  Every
 * horizon T_k is solved warm-started from the truncated reference; errors are measured on [0, T_k].
 */

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "objective.hpp"
#include "optimizer.hpp"
#include "problem.hpp"
#include "weighted_spaces.hpp"

namespace horizonopt {

/// Failure of one solve inside a sweep.
struct HorizonStudyError : std::runtime_error
{
  HorizonStudyError(const std::string & what, double T) : std::runtime_error(what), horizon(T) {}
  double horizon;
};

/// Control used after T when a finite-horizon solution is compared on the reference horizon.
enum class Extension { reference, zero };

inline const char * to_string(Extension e) { return e == Extension::zero ? "zero" : "reference"; }

struct HorizonStudyConfig
{
  std::vector<double> horizons{};
  /// defaults to twice the largest horizon
  std::optional<double> reference_horizon{};
  Extension extension{Extension::reference};
  OptimizerConfig optimizer{};
  /// 0: take HORIZONOPT_THREADS, else 1
  std::size_t threads{0};
  /// slack on the monotonicity of e_T
  double ripple{0.05};
  /// fraction of sigma_s / 2 the fitted decay rate may fall short by
  double rate_slack{0.3};
  double cost_tolerance{1e-10};

  double resolved_reference() const
  {
    if (reference_horizon) { return *reference_horizon; }
    if (horizons.empty()) { throw ConfigError("horizon study: empty horizon list"); }
    return 2.0 * *std::max_element(horizons.begin(), horizons.end());
  }

  void validate(double dt) const
  {
    if (horizons.empty()) { throw ConfigError("horizon study: empty horizon list"); }
    std::vector<double> h = horizons;
    std::sort(h.begin(), h.end());
    if (std::adjacent_find(h.begin(), h.end()) != h.end()) { throw ConfigError("horizon study: horizons must be distinct"); }
    const double ref = resolved_reference();
    if (!(h.back() < ref)) { throw ConfigError("horizon study: every horizon must be below T_ref"); }
    for (double T : h) { TimeGrid::make(T, dt); }
    TimeGrid::make(ref, dt);
    if (!(ripple >= 0.0) || !(rate_slack >= 0.0 && rate_slack < 1.0)) { throw ConfigError("horizon study: bad check slack"); }
  }
};

/// Number of worker threads: explicit request, else HORIZONOPT_THREADS, else 1.
inline std::size_t resolve_threads(std::size_t requested)
{
  if (requested > 0) { return requested; }
  if (const char * env = std::getenv("HORIZONOPT_THREADS")) {
    char * end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) { return static_cast<std::size_t>(v); }
    throw ConfigError(std::string("HORIZONOPT_THREADS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

/// Runs fn(k) for k < n on up to `threads` workers.  Exceptions are rethrown lowest index first.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn && fn)
{
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < n; k = next++) {
      try {
        fn(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const std::size_t count = std::max<std::size_t>(1, std::min(threads, n));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < count; ++w) { pool.emplace_back(worker); }
  worker();
  for (auto & t : pool) { t.join(); }
  for (auto & e : errors) {
    if (e) { std::rethrow_exception(e); }
  }
}

/// Right-hand side of the horizon error bound, split into its three terms.
struct BoundTerms
{
  /// e^{-sigma_s T/2} (||y_T(T)|| + 1), or without the 1 under zero extension
  double terminal{0.0};
  /// ||y_d||_{L2_{sigma_s}(Omega x (T, inf))}
  double target_tail{0.0};
  /// ||g||_{L2_{sigma_s}(Omega x (T, inf))}
  double source_tail{0.0};
  double total() const { return terminal + target_tail + source_tail; }
};

struct HorizonRecord
{
  double T{0.0};
  std::size_t steps{0};
  /// ||u_T - u_ref||_{L2_{sigma_c}(Q_{T,omega})}
  double control_error{0.0};
  /// same, over [0, T_ref] with u_T extended after T
  double extended_error{0.0};
  /// L2_{sigma_s}(0,T;H1) + C_{sigma_s}(0,T;L2) state error
  double state_error{0.0};
  /// nodal sup of e^{-sigma_s t/2} |y_T - y_ref| on [0, T]
  double state_error_sup{0.0};
  double terminal_state_norm{0.0};
  BoundTerms bound{};
  double cost{0.0};
  double reference_cost{0.0};
  /// J_T(u_T) - J_T(u_ref)
  double cost_gap{0.0};
  bool cost_check{false};
  SolveReport solve{};
};

enum class CheckStatus { pass, fail, outside_hypotheses, insufficient_data };

inline const char * to_string(CheckStatus s)
{
  switch (s) {
  case CheckStatus::pass:
    return "pass";
  case CheckStatus::fail:
    return "fail";
  case CheckStatus::outside_hypotheses:
    return "outside theorem hypotheses";
  case CheckStatus::insufficient_data:
    return "insufficient data";
  }
  return "?";
}

struct HorizonStudyReport
{
  double reference_horizon{0.0};
  Extension extension{Extension::reference};
  SolveReport reference_solve{};
  std::vector<HorizonRecord> records{};
  /// least-squares fit of log e_T = intercept + slope T over the largest half of the horizons
  double slope{std::numeric_limits<double>::quiet_NaN()};
  double intercept{std::numeric_limits<double>::quiet_NaN()};
  double rate_threshold{0.0};
  CheckStatus rate{CheckStatus::insufficient_data};
  bool monotone{false};
  /// first record from which J_T(u_T) <= J_T(u_ref) holds for every larger horizon
  std::optional<std::size_t> cost_check_from{};
  /// max over T of e_T / (bound terms)
  double bound_constant{0.0};
  std::vector<std::string> warnings{};
};

namespace detail {

/// Least squares y = a + b x; returns {a, b}.
inline std::pair<double, double> linear_fit(const std::vector<double> & x, const std::vector<double> & y)
{
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double den = n * sxx - sx * sx;
  if (!(std::abs(den) > 0.0)) { return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()}; }
  const double b = (n * sxy - sx * sy) / den;
  return {(sy - b * sx) / n, b};
}

inline double tail_norm(const SpaceTimeField & field, const SpatialMesh & mesh, double lambda, double T)
{
  if (!field.has_closed_form()) { return std::numeric_limits<double>::quiet_NaN(); }
  return tail_norm_closed_form(field.expression, mesh.domain(), lambda, T);
}

}  // namespace detail

/**
 * @brief Solves the reference problem and every finite horizon, then measures errors and fits the
 * exponential rate of e_T.
 */
inline HorizonStudyReport run_horizon_study(const ProblemSpec & spec, const HorizonStudyConfig & cfg)
{
  cfg.validate(spec.dt);
  HorizonStudyReport rep;
  rep.reference_horizon = cfg.resolved_reference();
  rep.extension = cfg.extension;

  ProblemSpec ref_spec = spec;
  ref_spec.horizon = rep.reference_horizon;
  const DiscreteProblem Pref(ref_spec);
  const auto & d = Pref.discounts();
  const auto & ops = Pref.ops();
  if (cfg.extension == Extension::zero && !Pref.admissible().contains(Vector::Zero(ops.num_controls()), ops.control_mass)) {
    throw ConfigError("zero extension needs 0 in the admissible set");
  }

  OptimizeResult ref;
  try {
    ref = optimize(Pref, cfg.optimizer);
  } catch (const std::exception & e) {
    throw HorizonStudyError("reference solve failed at T=" + std::to_string(rep.reference_horizon) + ": " + e.what(),
                            rep.reference_horizon);
  }
  rep.reference_solve = ref.report;

  std::vector<double> horizons = cfg.horizons;
  std::sort(horizons.begin(), horizons.end());
  rep.records.resize(horizons.size());

  parallel_for(horizons.size(), resolve_threads(cfg.threads), [&](std::size_t k) {
    const double T = horizons[k];
    HorizonRecord & r = rep.records[k];
    r.T = T;
    try {
      const DiscreteProblem P = Pref.with_horizon(T);
      const std::size_t N = P.grid().num_steps;
      r.steps = N;
      Trajectory u_ref = ref.control.truncated(N);
      OptimizerConfig oc = cfg.optimizer;
      oc.warm_start = u_ref;
      const OptimizeResult sol = optimize(P, oc);
      r.solve = sol.report;

      r.control_error = norm_L2_lambda(sol.control - u_ref, d.sigma_c, Metric::control, ops);
      Trajectory extended = ref.control;
      for (std::size_t i = 0; i < extended.size(); ++i) {
        if (i <= N) {
          extended[i] = sol.control[i];
        } else if (cfg.extension == Extension::zero) {
          extended[i].setZero();
        }
      }
      r.extended_error = norm_L2_lambda(extended - ref.control, d.sigma_c, Metric::control, ops);

      const Trajectory dy = sol.state - ref.state.truncated(N);
      r.state_error = norm_L2_lambda(dy, d.sigma_s, Metric::h1, ops) + norm_C_lambda(dy, d.sigma_s, ops);
      r.state_error_sup = norm_C_lambda_pointwise(dy, d.sigma_s);

      r.terminal_state_norm = std::sqrt(sol.state[N].dot(ops.mass * sol.state[N]));
      const double head = cfg.extension == Extension::zero ? r.terminal_state_norm : r.terminal_state_norm + 1.0;
      r.bound.terminal = std::exp(-0.5 * d.sigma_s * T) * head;
      r.bound.target_tail = detail::tail_norm(spec.target, spec.mesh, d.sigma_s, T);
      r.bound.source_tail = detail::tail_norm(spec.source, spec.mesh, d.sigma_s, T);

      const Evaluation e_sol{sol.control, sol.state, cost_from_state(P, sol.state, sol.control)};
      const Evaluation e_ref = evaluate(P, u_ref, oc.newton);
      r.cost = e_sol.cost.total;
      r.reference_cost = e_ref.cost.total;
      r.cost_gap = cost_difference(P, e_sol, e_ref);
      r.cost_check = r.cost_gap <= cfg.cost_tolerance;
    } catch (const HorizonStudyError &) {
      throw;
    } catch (const std::exception & e) {
      throw HorizonStudyError("solve failed at T=" + std::to_string(T) + ": " + e.what(), T);
    }
  });

  // assembly below is sequential in sorted T
  for (const auto & r : rep.records) {
    if (!r.solve.converged) {
      rep.warnings.push_back("T=" + std::to_string(r.T) + ": optimizer stopped at max iterations");
    }
    const double tail = r.bound.target_tail + r.bound.source_tail;
    if (std::isnan(tail)) {
      rep.warnings.push_back("T=" + std::to_string(r.T) + ": tail norms unavailable for sampled data");
    } else if (tail > r.bound.terminal) {
      rep.warnings.push_back("T=" + std::to_string(r.T) + ": data tail terms dominate the terminal term");
    }
    if (r.bound.total() > 0.0 && std::isfinite(r.bound.total())) {
      rep.bound_constant = std::max(rep.bound_constant, r.control_error / r.bound.total());
    }
  }

  rep.monotone = true;
  for (std::size_t k = 1; k < rep.records.size(); ++k) {
    if (rep.records[k].control_error > (1.0 + cfg.ripple) * rep.records[k - 1].control_error) { rep.monotone = false; }
  }

  for (std::size_t k = rep.records.size(); k-- > 0;) {
    if (!rep.records[k].cost_check) { break; }
    rep.cost_check_from = k;
  }

  const std::size_t K = rep.records.size();
  const std::size_t half = std::max<std::size_t>(2, (K + 1) / 2);
  std::vector<double> xs, ys;
  for (std::size_t k = K >= half ? K - half : 0; k < K; ++k) {
    if (rep.records[k].control_error > 0.0) {
      xs.push_back(rep.records[k].T);
      ys.push_back(std::log(rep.records[k].control_error));
    }
  }
  rep.rate_threshold = -0.5 * d.sigma_s * (1.0 - cfg.rate_slack);
  if (xs.size() >= 2) {
    std::tie(rep.intercept, rep.slope) = detail::linear_fit(xs, ys);
    if (d.sigma_c > d.lambda_c) {
      rep.rate = CheckStatus::outside_hypotheses;
    } else {
      rep.rate = rep.slope <= rep.rate_threshold ? CheckStatus::pass : CheckStatus::fail;
    }
  } else if (d.sigma_c > d.lambda_c) {
    rep.rate = CheckStatus::outside_hypotheses;
  }
  return rep;
}

/// Observed power laws of the state errors against e_T.
struct StateBoundCheck
{
  /// fitted exponent of state_error ~ e_T^b
  double linear_exponent{std::numeric_limits<double>::quiet_NaN()};
  /// fitted exponent of state_error_sup ~ e_T^b
  double power_exponent{std::numeric_limits<double>::quiet_NaN()};
  double predicted_power_exponent{0.0};
  /// C_{3,M}: median of state_error / e_T
  double linear_constant{0.0};
  /// C_{2,M}: median of state_error_sup / e_T^{2/p} divided by (2 gamma_ad)^{(p-2)/p}
  double power_constant{0.0};
  double gamma_ad{0.0};
  std::vector<bool> per_horizon{};
  bool linear_pass{false};
  bool power_pass{false};
  bool passed() const { return linear_pass && power_pass; }
};

/**
 * @brief Fits state_error ~ e_T and state_error_sup ~ e_T^{2/p} on a log-log scale.
 *
 * A law passes when the observed exponent is at least the predicted one minus `slack`.  A
 * horizon passes when its ratio stays within a factor 3 of the median constant.
 */
inline StateBoundCheck check_state_error_bounds(
  const HorizonStudyReport & report, const DiscreteProblem & P, double slack = 0.2)
{
  if (report.records.size() < 3) { throw DomainError("state error check needs at least 3 horizons"); }
  StateBoundCheck c;
  const double p = P.discounts().p;
  c.predicted_power_exponent = 2.0 / p;
  c.gamma_ad = P.admissible().gamma_ad(P.omega_measure());

  std::vector<double> lx, ly, ls, r_lin, r_pow;
  for (const auto & r : report.records) {
    if (r.control_error > 0.0 && r.state_error > 0.0 && r.state_error_sup > 0.0) {
      lx.push_back(std::log(r.control_error));
      ly.push_back(std::log(r.state_error));
      ls.push_back(std::log(r.state_error_sup));
    }
    if (r.control_error > 0.0) {
      r_lin.push_back(r.state_error / r.control_error);
      r_pow.push_back(r.state_error_sup / std::pow(r.control_error, c.predicted_power_exponent));
    }
  }

  auto median = [](std::vector<double> v) {
    if (v.empty()) { return 0.0; }
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  };
  c.linear_constant = median(r_lin);
  const double pow_fit = median(r_pow);
  c.power_constant = pow_fit / std::pow(2.0 * c.gamma_ad, (p - 2.0) / p);

  for (const auto & r : report.records) {
    if (r.control_error == 0.0) {
      c.per_horizon.push_back(r.state_error == 0.0 && r.state_error_sup == 0.0);
      continue;
    }
    const bool lin = r.state_error <= 3.0 * c.linear_constant * r.control_error;
    const bool pw = r.state_error_sup <= 3.0 * pow_fit * std::pow(r.control_error, c.predicted_power_exponent);
    c.per_horizon.push_back(lin && pw);
  }

  if (lx.empty() && r_lin.empty()) {
    // all gaps vanish
    c.linear_pass = c.power_pass = true;
    return c;
  }
  if (lx.size() < 2) { throw DomainError("state error check: fewer than two nonzero errors"); }
  c.linear_exponent = detail::linear_fit(lx, ly).second;
  c.power_exponent = detail::linear_fit(lx, ls).second;
  c.linear_pass = c.linear_exponent >= 1.0 - slack;
  c.power_pass = c.power_exponent >= c.predicted_power_exponent - slack;
  return c;
}

}  // namespace horizonopt

#endif  // HORIZONOPT__HORIZON_HPP_
