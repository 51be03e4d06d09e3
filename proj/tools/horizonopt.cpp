// Command-line front end: validate, solve-forward, gradient-check, optimize, horizon-study, socheck.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "horizonopt/commands.hpp"

int main(int argc, char ** argv)
{
  using namespace horizonopt;

  CLI::App app{"Discounted infinite-horizon optimal control of semilinear parabolic equations"};
  app.require_subcommand(1);

  CommandOptions opt;
  std::uint64_t seed = 0;
  std::vector<double> eps;

  auto common = [&](CLI::App * sub, bool with_out) {
    sub->add_option("--config,-c", opt.config, "configuration document")->required()->check(CLI::ExistingFile);
    sub->add_option("--set", opt.overrides, "override a scalar field, key=value (dotted path)");
    if (with_out) { sub->add_option("--out,-o", opt.out, "output directory")->capture_default_str(); }
    sub->add_option("--seed", seed, "seed override");
  };

  auto * validate = app.add_subcommand("validate", "check the standing assumptions");
  common(validate, false);
  auto * forward = app.add_subcommand("solve-forward", "state equation for the zero control");
  common(forward, true);
  auto * grad = app.add_subcommand("gradient-check", "adjoint gradient against central differences");
  common(grad, true);
  grad->add_option("--epsilons", eps, "finite-difference steps");
  grad->add_flag("--zero-control", opt.zero_control, "check at u = 0");
  auto * optimize = app.add_subcommand("optimize", "projected gradient solve");
  common(optimize, true);
  auto * horizon = app.add_subcommand("horizon-study", "finite-horizon sweep against a reference");
  common(horizon, true);
  horizon->add_option("--threads", opt.threads, "parallel solves (default: HORIZONOPT_THREADS or 1)");
  horizon->add_flag("!--no-svg", opt.svg, "skip the SVG plot");
  auto * so = app.add_subcommand("socheck", "second-order checks at the optimum");
  common(so, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  for (auto * sub : app.get_subcommands()) {
    if (sub->count("--seed") > 0) { opt.seed = seed; }
  }
  if (!eps.empty()) { opt.epsilons = eps; }

  try {
    if (validate->parsed()) { return cmd_validate(opt, std::cout, std::cerr); }
    if (forward->parsed()) { return cmd_solve_forward(opt, std::cout, std::cerr); }
    if (grad->parsed()) { return cmd_gradient_check(opt, std::cout, std::cerr); }
    if (optimize->parsed()) { return cmd_optimize(opt, std::cout, std::cerr); }
    if (horizon->parsed()) { return cmd_horizon_study(opt, std::cout, std::cerr); }
    if (so->parsed()) { return cmd_socheck(opt, std::cout, std::cerr); }
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
