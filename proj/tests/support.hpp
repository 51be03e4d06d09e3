#ifndef HORIZONOPT_TESTS_SUPPORT_HPP_
#define HORIZONOPT_TESTS_SUPPORT_HPP_

// Small problem builders shared by the test binaries.

#include <random>
#include <string>

#include "horizonopt/horizonopt.hpp"

namespace hzt {

using namespace horizonopt;

struct InstanceOptions
{
  int elements{20};
  double T{1.0};
  double dt{0.05};
  std::string nonlinearity{"zero"};
  double sigma_s{2.0};
  double sigma_c{0.5};
  std::optional<double> lambda_c{};
  double nu{0.1};
  double a0{0.0};
  AdmissibleSet admissible{AdmissibleSet::ball(1.0)};
  Region omega{{0.2, 0.0}, {0.7, 0.0}};
  std::optional<Region> omega_obs{};
  Expression y0{Expression::cos_mode(0.5, {1, 0}, 0.0)};
  Expression source{Expression::gauss_decay(1.0, {0.3, 0.0}, 0.1, 1.0)};
  Expression target{Expression::gauss_decay(0.8, {0.6, 0.0}, 0.15, 0.5)};
};

/// sigma_s large enough for every built-in nonlinearity at q = 2, Lambda_f = -1.
inline double safe_sigma_s(const std::string & name)
{
  return name == "cubic_minus_linear" ? 12.0 : 2.0;
}

inline ProblemSpec make_spec(const InstanceOptions & o)
{
  ProblemSpec s;
  s.mesh = SpatialMesh::interval(0.0, 1.0, o.elements, o.omega, o.omega_obs);
  s.form = EllipticForm::uniform(s.mesh, DiffusionTensor{}, o.a0);
  s.nonlinearity = make_nonlinearity(o.nonlinearity);
  s.discounts.sigma_s = o.sigma_s;
  s.discounts.sigma_c = o.sigma_c;
  s.discounts.lambda_c = o.lambda_c;
  s.y0 = SpaceTimeField::from(o.y0).sample(s.mesh, 0, 0.0);
  s.source = SpaceTimeField::from(o.source);
  s.target = SpaceTimeField::from(o.target);
  s.nu = o.nu;
  s.admissible = o.admissible;
  s.horizon = o.T;
  s.dt = o.dt;
  return s;
}

inline DiscreteProblem make_problem(const InstanceOptions & o) { return DiscreteProblem(make_spec(o)); }

/// Gaussian control trajectory (step 0 left at zero).
inline Trajectory random_control(const DiscreteProblem & P, std::mt19937_64 & rng, double scale = 1.0)
{
  std::normal_distribution<double> normal(0.0, 1.0);
  Trajectory u = P.zero_control();
  for (std::size_t i = 1; i < u.size(); ++i) {
    for (Eigen::Index j = 0; j < u[i].size(); ++j) { u[i][j] = scale * normal(rng); }
  }
  return u;
}

/// Gaussian trajectory on all nodes (generic tag).
inline Trajectory random_field(const DiscreteProblem & P, std::mt19937_64 & rng, double scale = 1.0)
{
  std::normal_distribution<double> normal(0.0, 1.0);
  Trajectory u = Trajectory::zeros(P.grid(), P.ops().num_nodes(), TrajectoryKind::generic);
  for (std::size_t i = 0; i < u.size(); ++i) {
    for (Eigen::Index j = 0; j < u[i].size(); ++j) { u[i][j] = scale * normal(rng); }
  }
  return u;
}

/// Best relative error of central differences of J along v over a sweep of steps.
inline double best_fd_error(
  const DiscreteProblem & P, const Trajectory & u, const Trajectory & v, const std::vector<double> & eps)
{
  const Trajectory g = gradient(P, u);
  const double adj = directional_derivative(P, g, v);
  double best = std::numeric_limits<double>::infinity();
  for (double e : eps) {
    Trajectory up = u, um = u;
    up.axpy(e, v);
    um.axpy(-e, v);
    const double fd = cost_difference(P, evaluate(P, up), evaluate(P, um)) / (2.0 * e);
    best = std::min(best, std::abs(fd - adj) / std::abs(adj));
  }
  return best;
}

}  // namespace hzt

#endif  // HORIZONOPT_TESTS_SUPPORT_HPP_
