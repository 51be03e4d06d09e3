#ifndef HORIZONOPT__COMMANDS_HPP_
#define HORIZONOPT__COMMANDS_HPP_

/**
 * @file
 * @brief Subcommands of the horizonopt tool, callable without a process boundary.
 *
 * Exit codes: 0 success, 1 a check or assumption failed, 2 unusable input (parse/config errors),
 * 3 numerical failure.
 */

#include <chrono>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "horizon.hpp"
#include "io.hpp"
#include "objective.hpp"
#include "optimizer.hpp"
#include "problem.hpp"
#include "projection.hpp"

namespace horizonopt {

struct CommandOptions
{
  std::filesystem::path config{};
  std::vector<std::string> overrides{};
  std::filesystem::path out{"out"};
  std::optional<std::uint64_t> seed{};
  /// 0: HORIZONOPT_THREADS or 1
  std::size_t threads{0};
  std::optional<std::vector<double>> epsilons{};
  /// gradient-check: evaluate at u = 0 instead of a random control
  bool zero_control{false};
  bool svg{true};
};

namespace detail {

class Stopwatch
{
public:
  double lap()
  {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

private:
  std::chrono::steady_clock::time_point last_{std::chrono::steady_clock::now()};
};

/// Loads the config; reports and maps errors to exit code 2.
inline std::optional<RunConfig> load(const CommandOptions & o, std::ostream & err)
{
  try {
    RunConfig rc = load_config(o.config, o.overrides);
    if (o.seed) { rc.seed = *o.seed; }
    return rc;
  } catch (const ConfigError & e) {
    err << "error: " << e.what() << "\n";
  } catch (const DomainError & e) {
    err << "error: " << o.config.string() << ": " << e.what() << "\n";
  }
  return std::nullopt;
}

/// Builds the discrete problem; an assumption failure is reported with exit code 1.
inline std::optional<DiscreteProblem> build(const RunConfig & rc, std::ostream & err, int & code)
{
  const ValidationReport v = validate_assumptions(rc.spec);
  if (!v.passed()) {
    err << v.summary();
    err << "error: mandatory assumptions violated\n";
    code = 1;
    return std::nullopt;
  }
  try {
    return DiscreteProblem(rc.spec);
  } catch (const std::exception & e) {
    err << "error: " << e.what() << "\n";
    code = 2;
  }
  return std::nullopt;
}

inline Trajectory random_control(const DiscreteProblem & P, std::mt19937_64 & rng, double scale)
{
  std::normal_distribution<double> normal(0.0, 1.0);
  Trajectory u = P.zero_control();
  for (std::size_t i = 1; i < u.size(); ++i) {
    for (Eigen::Index j = 0; j < u[i].size(); ++j) { u[i][j] = scale * normal(rng); }
  }
  return u;
}

inline void prepare_out(const std::filesystem::path & out) { std::filesystem::create_directories(out); }

}  // namespace detail

/// Prints the assumption report.  0: all mandatory checks pass, 1: some fail, 2: unusable document.
inline int cmd_validate(const CommandOptions & o, std::ostream & out, std::ostream & err)
{
  const auto rc = detail::load(o, err);
  if (!rc) { return 2; }
  const ValidationReport v = validate_assumptions(rc->spec);
  out << v.summary();
  if (!v.passed()) {
    for (const auto & c : v.failures()) { err << "violated: " << c.inequality << " (" << c.name << ")\n"; }
    return 1;
  }
  out << "ok\n";
  return 0;
}

/// State of the projected zero control; writes state.csv and forward.json.
inline int cmd_solve_forward(const CommandOptions & o, std::ostream & out, std::ostream & err)
{
  const auto rc = detail::load(o, err);
  if (!rc) { return 2; }
  int code = 0;
  const auto P = detail::build(*rc, err, code);
  if (!P) { return code; }
  detail::prepare_out(o.out);
  RunManifest man(o.out, "solve-forward", *rc);
  detail::Stopwatch sw;
  try {
    const Trajectory u = project_pointwise(*P, P->zero_control());
    const Evaluation e = evaluate(*P, u, rc->optimizer.newton);
    man.timing("forward", sw.lap());
    write_trajectory_csv(o.out / "state.csv", e.state);
    man.output("state.csv");
    const auto d = P->discounts();
    json j{
      {"schema", "horizonopt.forward/1"},
      {"steps", P->grid().num_steps},
      {"dt", number(P->grid().step)},
      {"cost", to_json(e.cost)},
      {"state_norm_Y_sigma_s", number(norm_Y_lambda(e.state, d.sigma_s, P->ops()))}};
    write_json(o.out / "forward.json", j);
    man.output("forward.json");
    man.finish("complete");
    out << "cost " << format_double(e.cost.total) << "\n";
  } catch (const SolverError & e) {
    err << "error: " << e.what() << " (step " << e.step_index << ")\n";
    man.finish("failed");
    return 3;
  }
  return 0;
}

/// Central differences of J along a random direction against the adjoint gradient.
inline int cmd_gradient_check(const CommandOptions & o, std::ostream & out, std::ostream & err)
{
  const auto rc = detail::load(o, err);
  if (!rc) { return 2; }
  int code = 0;
  const auto P = detail::build(*rc, err, code);
  if (!P) { return code; }
  detail::prepare_out(o.out);
  RunManifest man(o.out, "gradient-check", *rc);
  const std::vector<double> eps = o.epsilons.value_or(rc->epsilons);
  try {
    std::mt19937_64 rng(rc->seed);
    const double scale = P->admissible().scale();
    Trajectory u = o.zero_control ? P->zero_control() : detail::random_control(*P, rng, 0.5 * scale);
    const Trajectory v = detail::random_control(*P, rng, 1.0);
    const Trajectory g = gradient(*P, u);
    const double adj = directional_derivative(*P, g, v);
    json records = json::array();
    double best = std::numeric_limits<double>::infinity();
    for (double e : eps) {
      Trajectory up = u, um = u;
      up.axpy(e, v);
      um.axpy(-e, v);
      const Evaluation ep = evaluate(*P, up, rc->optimizer.newton);
      const Evaluation em = evaluate(*P, um, rc->optimizer.newton);
      const double fd = cost_difference(*P, ep, em) / (2.0 * e);
      const double diff = std::abs(fd - adj);
      const double rel = diff == 0.0 ? 0.0 : diff / std::max(std::abs(adj), std::numeric_limits<double>::min());
      best = std::min(best, rel);
      records.push_back({{"epsilon", number(e)}, {"fd_value", number(fd)}, {"adjoint_value", number(adj)}, {"rel_error", number(rel)}});
    }
    json j{
      {"schema", "horizonopt.gradient_check/1"},
      {"seed", rc->seed},
      {"control", o.zero_control ? "zero" : "random"},
      {"gradient_norm", number(norm_L2_lambda(g, P->discounts().sigma_c, Metric::control, P->ops()))},
      {"records", records},
      {"best_rel_error", number(best)}};
    write_json(o.out / "gradient_check.json", j);
    man.output("gradient_check.json");
    man.finish("complete");
    out << "best relative error " << format_double(best) << "\n";
  } catch (const SolverError & e) {
    err << "error: " << e.what() << " (step " << e.step_index << ")\n";
    man.finish("failed");
    return 3;
  }
  return 0;
}

namespace detail {

inline json optimize_json(const DiscreteProblem & P, const OptimizeResult & r)
{
  const FormulaReport f = check_projection_formulas(P, r.control, r.adjoint);
  const Trajectory g = gradient_from_adjoint(P, r.control, r.adjoint);
  return {
    {"schema", "horizonopt.optimize/1"},
    {"admissible", P.admissible().describe()},
    {"solve", to_json(r.report)},
    {"stationarity_residual", number(stationarity_residual(P, r.control, g))},
    {"formulas", to_json(f)}};
}

}  // namespace detail

/// Solves the problem; writes u_star.csv, state.csv, adjoint.csv and report.json.
inline int cmd_optimize(const CommandOptions & o, std::ostream & out, std::ostream & err)
{
  const auto rc = detail::load(o, err);
  if (!rc) { return 2; }
  int code = 0;
  const auto P = detail::build(*rc, err, code);
  if (!P) { return code; }
  detail::prepare_out(o.out);
  RunManifest man(o.out, "optimize", *rc);
  detail::Stopwatch sw;
  try {
    const OptimizeResult r = optimize(*P, rc->optimizer);
    man.timing("optimize", sw.lap());
    write_trajectory_csv(o.out / "u_star.csv", r.control);
    write_trajectory_csv(o.out / "state.csv", r.state);
    write_trajectory_csv(o.out / "adjoint.csv", r.adjoint);
    write_json(o.out / "report.json", detail::optimize_json(*P, r));
    for (const char * f : {"u_star.csv", "state.csv", "adjoint.csv", "report.json"}) { man.output(f); }
    man.finish(r.report.converged ? "complete" : "max_iterations");
    out << "iterations " << r.report.iterations << ", cost " << format_double(r.report.cost.total) << ", residual "
        << format_double(r.report.residual) << "\n";
    return r.report.converged ? 0 : 1;
  } catch (const SolverError & e) {
    err << "error: " << e.what() << " (step " << e.step_index << ")\n";
  } catch (const LineSearchError & e) {
    err << "error: " << e.what() << "\n";
  }
  man.finish("failed");
  return 3;
}

/// Horizon sweep; writes sweep.csv, fit.json and rate.svg.
inline int cmd_horizon_study(const CommandOptions & o, std::ostream & out, std::ostream & err)
{
  const auto rc = detail::load(o, err);
  if (!rc) { return 2; }
  if (!rc->horizon_study) {
    err << "error: " << o.config.string() << ": missing field 'horizon_study'\n";
    return 2;
  }
  int code = 0;
  const auto P = detail::build(*rc, err, code);
  if (!P) { return code; }
  HorizonStudyConfig hc = *rc->horizon_study;
  try {
    hc.threads = resolve_threads(o.threads > 0 ? o.threads : hc.threads);
    hc.validate(rc->spec.dt);
  } catch (const std::exception & e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  detail::prepare_out(o.out);
  RunManifest man(o.out, "horizon-study", *rc);
  detail::Stopwatch sw;
  try {
    const HorizonStudyReport rep = run_horizon_study(rc->spec, hc);
    man.timing("sweep", sw.lap());
    write_sweep_csv(o.out / "sweep.csv", rep);
    json fit = to_json(rep);
    if (rep.records.size() >= 3) {
      const DiscreteProblem Pref = P->with_horizon(rep.reference_horizon);
      fit["state_bounds"] = to_json(check_state_error_bounds(rep, Pref));
    }
    write_json(o.out / "fit.json", fit);
    man.output("sweep.csv");
    man.output("fit.json");
    if (o.svg) {
      write_rate_svg(o.out / "rate.svg", rep);
      man.output("rate.svg");
    }
    man.set("threads", hc.threads);
    man.finish("complete");
    out << "slope " << format_double(rep.slope) << " (threshold " << format_double(rep.rate_threshold) << "): "
        << to_string(rep.rate) << ", monotone " << (rep.monotone ? "yes" : "no") << "\n";
    for (const auto & w : rep.warnings) { err << "warning: " << w << "\n"; }
    return rep.rate == CheckStatus::fail || !rep.monotone ? 1 : 0;
  } catch (const HorizonStudyError & e) {
    err << "error: " << e.what() << "\n";
  }
  man.finish("failed");
  return 3;
}

/// Second-order checks at the computed optimum; writes socheck.json.
inline int cmd_socheck(const CommandOptions & o, std::ostream & out, std::ostream & err)
{
  const auto rc = detail::load(o, err);
  if (!rc) { return 2; }
  int code = 0;
  const auto P = detail::build(*rc, err, code);
  if (!P) { return code; }
  detail::prepare_out(o.out);
  RunManifest man(o.out, "socheck", *rc);
  detail::Stopwatch sw;
  try {
    const OptimizeResult r = optimize(*P, rc->optimizer);
    man.timing("optimize", sw.lap());
    const bool ball = P->admissible().kind == AdmissibleSet::Kind::ball;
    std::optional<Multiplier> mu;
    if (ball) { mu = multiplier_and_cone(*P, r.control, r.adjoint); }
    const auto dirs =
      sample_critical_directions(*P, r.control, r.adjoint, mu ? &*mu : nullptr, rc->critical_directions, rc->seed);
    const double sc = P->discounts().sigma_c;
    json forms = json::array();
    double worst = std::numeric_limits<double>::infinity();
    for (const auto & v : dirs) {
      const double n2 = std::pow(norm_L2_lambda(v, sc, Metric::control, P->ops()), 2);
      const double q = ball ? lagrangian_hessian_vec(*P, r.control, *mu, v) : hessian_vec(*P, r.control, v, v);
      worst = std::min(worst, q / n2);
      forms.push_back(number(q / n2));
    }
    const bool forms_ok = dirs.empty() || worst >= -1e-6;
    const GrowthReport g = verify_growth(*P, r.control, rc->growth_radius, rc->growth_samples, rc->seed + 1);
    man.timing("checks", sw.lap());

    json j{
      {"schema", "horizonopt.socheck/1"},
      {"admissible", P->admissible().describe()},
      {"solve", to_json(r.report)},
      {"critical_directions", dirs.size()},
      {"normalized_forms", forms},
      {"min_normalized_form", dirs.empty() ? json(nullptr) : number(worst)},
      {"forms_nonnegative", forms_ok},
      {"kappa", number(g.kappa)},
      {"growth_margins", g.margins},
      {"growth_positive", g.kappa > 0.0}};
    if (mu) {
      json m = json::array();
      json act = json::array();
      for (std::size_t i = 0; i < mu->values.size(); ++i) {
        m.push_back(number(mu->values[i]));
        act.push_back(mu->activity[i] == Activity::inactive ? "inactive"
                      : mu->activity[i] == Activity::active_strict ? "strict" : "degenerate");
      }
      j["multiplier"] = m;
      j["activity"] = act;
    }
    write_json(o.out / "socheck.json", j);
    man.output("socheck.json");
    man.finish("complete");
    out << "min v'L''v/|v|^2 " << (dirs.empty() ? std::string("n/a") : format_double(worst)) << ", kappa "
        << format_double(g.kappa) << "\n";
    return forms_ok && g.kappa > 0.0 ? 0 : 1;
  } catch (const SolverError & e) {
    err << "error: " << e.what() << " (step " << e.step_index << ")\n";
  } catch (const std::exception & e) {
    err << "error: " << e.what() << "\n";
  }
  man.finish("failed");
  return 3;
}

}  // namespace horizonopt

#endif  // HORIZONOPT__COMMANDS_HPP_
