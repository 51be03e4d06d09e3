#include <cmath>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace horizonopt;

namespace {

// With Neumann conditions, no reaction and spatially constant data the discrete state stays constant
// in space, and row-sum lumping makes each step the scalar equation (y_i - y_{i-1})/dt + f(y_i) = g_i.
hzt::InstanceOptions flat(const std::string & nl, double y0, double g, double rate)
{
  hzt::InstanceOptions o;
  o.elements = 12;
  o.nonlinearity = nl;
  o.sigma_s = hzt::safe_sigma_s(nl);
  if (nl == "cubic_minus_linear") { o.lambda_c = 2.2; }
  o.y0 = Expression::constant(y0);
  o.source = Expression::cos_mode(g, {0, 0}, rate);
  o.target = Expression::zero();
  return o;
}

double scalar_newton(const Nonlinearity & f, double prev, double dt, double g)
{
  double y = prev;
  for (int k = 0; k < 100; ++k) {
    const double r = (y - prev) / dt + f.f(y) - g;
    const double d = 1.0 / dt + f.df(y);
    const double step = r / d;
    y -= step;
    if (std::abs(step) < 1e-16 * (1.0 + std::abs(y))) { break; }
  }
  return y;
}

}  // namespace

TEST(Forward, MatchesScalarRecursion)
{
  for (const std::string nl : {"zero", "linear", "cubic", "cubic_minus_linear", "exponential"}) {
    const auto o = flat(nl, 0.8, 0.6, 0.7);
    const auto P = hzt::make_problem(o);
    const auto y = solve_forward(P, P.zero_control());
    double ys = 0.8;
    for (std::size_t i = 1; i < y.size(); ++i) {
      const double g = P.source(i)[0];
      ys = scalar_newton(P.f(), ys, P.grid().step, g);
      EXPECT_NEAR(y[i].maxCoeff(), ys, 1e-11) << nl << " step " << i;
      EXPECT_NEAR(y[i].minCoeff(), ys, 1e-11) << nl << " step " << i;
    }
  }
}

TEST(Forward, FirstOrderInTime)
{
  // y' = -y^3 + e^{-t} from y(0) = 1, reference by classical RK4 with a tiny step
  const auto rk4 = [](double T) {
    const auto rhs = [](double t, double y) { return -y * y * y + std::exp(-t); };
    const int n = 200000;
    const double h = T / n;
    double y = 1.0, t = 0.0;
    for (int k = 0; k < n; ++k) {
      const double k1 = rhs(t, y), k2 = rhs(t + h / 2, y + h / 2 * k1), k3 = rhs(t + h / 2, y + h / 2 * k2),
                   k4 = rhs(t + h, y + h * k3);
      y += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
      t += h;
    }
    return y;
  };
  const double exact = rk4(1.0);
  std::vector<double> errors;
  for (double dt : {0.05, 0.025, 0.0125}) {
    auto o = flat("cubic", 1.0, 1.0, 1.0);
    o.dt = dt;
    const auto P = hzt::make_problem(o);
    const auto y = solve_forward(P, P.zero_control());
    errors.push_back(std::abs(y[y.size() - 1][0] - exact));
  }
  EXPECT_NEAR(errors[0] / errors[1], 2.0, 0.15);
  EXPECT_NEAR(errors[1] / errors[2], 2.0, 0.1);
}

TEST(Forward, NewtonFailureReportsStep)
{
  auto o = flat("cubic", 2.0, 0.0, 0.0);
  const auto P = hzt::make_problem(o);
  NewtonConfig cfg;
  cfg.max_iterations = 1;
  cfg.tolerance = 1e-300;
  cfg.relative_tolerance = 0.0;
  try {
    solve_forward(P, P.zero_control(), cfg);
    FAIL() << "expected SolverError";
  } catch (const SolverError & e) {
    EXPECT_EQ(e.step_index, 1u);
  }
}

TEST(Adjoint, DualityIdentity)
{
  std::mt19937_64 rng(17);
  for (const std::string nl : {"zero", "cubic", "cubic_minus_linear", "exponential"}) {
    hzt::InstanceOptions o;
    o.nonlinearity = nl;
    o.sigma_s = hzt::safe_sigma_s(nl);
    if (nl == "cubic_minus_linear") { o.lambda_c = 2.2; }
    o.omega_obs = Region{{0.1, 0.0}, {0.9, 0.0}};
    const auto P = hzt::make_problem(o);
    const auto u = hzt::random_control(P, rng, 0.5);
    const auto y = solve_forward(P, u);
    const auto v = hzt::random_control(P, rng);
    const auto w = hzt::random_field(P, rng);
    const auto z = solve_linearized(P, y, v, RhsOperator::control);
    const auto phi = solve_adjoint_source(P, y, w, P.discounts().sigma_s);

    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 1; i < y.size(); ++i) {
      const double dt = P.grid().step;
      lhs += dt * std::exp(-P.discounts().sigma_s * P.grid().time(i)) * w[i].dot(P.ops().observation_mass * z[i]);
      rhs += dt * phi[i].dot(P.ops().control_action(v[i]));
    }
    EXPECT_LE(std::abs(lhs - rhs), 1e-10 * std::abs(lhs)) << nl;
  }
}

TEST(Adjoint, DirectionalDerivativesAgree)
{
  std::mt19937_64 rng(2);
  hzt::InstanceOptions o;
  o.nonlinearity = "cubic";
  const auto P = hzt::make_problem(o);
  const auto u = hzt::random_control(P, rng, 0.3);
  const auto v = hzt::random_control(P, rng);
  const auto G = gradient_full(P, u);
  const double a = directional_derivative(P, G.gradient, v);
  const double b = directional_derivative_by_sensitivity(P, G.eval, v);
  EXPECT_LE(std::abs(a - b), 1e-11 * std::abs(a));
}

TEST(Linearized, SecondOrderSensitivity)
{
  std::mt19937_64 rng(9);
  hzt::InstanceOptions o;
  o.nonlinearity = "cubic";
  const auto P = hzt::make_problem(o);
  const auto u = hzt::random_control(P, rng, 0.5);
  const auto v = hzt::random_control(P, rng);
  const auto y = solve_forward(P, u);
  const auto z = solve_linearized(P, y, v, RhsOperator::control);
  const auto w = solve_second_order(P, y, z, z);
  const double e = 1e-3;
  Trajectory up = u, um = u;
  up.axpy(e, v);
  um.axpy(-e, v);
  const auto yp = solve_forward(P, up), ym = solve_forward(P, um);
  double err = 0.0, scale = 0.0;
  for (std::size_t i = 1; i < y.size(); ++i) {
    const Vector fd = (yp[i] - 2.0 * y[i] + ym[i]) / (e * e);
    err = std::max(err, (fd - w[i]).cwiseAbs().maxCoeff());
    scale = std::max(scale, w[i].cwiseAbs().maxCoeff());
    // first derivative as a by-product
    EXPECT_LE((0.5 * (yp[i] - ym[i]) / e - z[i]).cwiseAbs().maxCoeff(), 1e-5 * (1.0 + z[i].cwiseAbs().maxCoeff()));
  }
  EXPECT_GT(scale, 0.0);
  EXPECT_LE(err, 1e-4 * scale);
}

TEST(Estimates, EnergyEstimateHolds)
{
  std::mt19937_64 rng(5);
  for (const std::string nl : {"zero", "cubic", "cubic_minus_linear", "exponential"}) {
    hzt::InstanceOptions o;
    o.nonlinearity = nl;
    o.sigma_s = hzt::safe_sigma_s(nl);
    if (nl == "cubic_minus_linear") { o.lambda_c = 2.2; }
    const auto P = hzt::make_problem(o);
    const auto d = P.discounts();
    for (double lambda : {d.sigma_s, d.lambda_c, 0.5 * (d.sigma_s + d.lambda_c)}) {
      const auto u = hzt::random_control(P, rng, 0.5);
      const auto r = check_energy_estimate(P, u, lambda, 0.0);
      EXPECT_TRUE(r.satisfied) << nl << " λ=" << lambda << " " << r.lhs << " > " << r.rhs;
      EXPECT_GT(r.lhs, 0.0);
    }
  }
}

TEST(Estimates, LinearizedEstimateHolds)
{
  std::mt19937_64 rng(6);
  hzt::InstanceOptions o;
  o.nonlinearity = "cubic_minus_linear";
  o.sigma_s = 12.0;
  o.lambda_c = 2.2;
  const auto P = hzt::make_problem(o);
  std::uniform_real_distribution<double> coef(-1.0, 3.0);
  for (double lambda : {12.0, 2.2, 7.1}) {
    auto b = Trajectory::zeros(P.grid(), P.ops().num_nodes(), TrajectoryKind::generic);
    for (auto & bi : b.values) {
      for (Eigen::Index j = 0; j < bi.size(); ++j) { bi[j] = coef(rng); }
    }
    const auto h = hzt::random_field(P, rng);
    const auto r = check_linearized_estimate(P, b, h, lambda, 0.0);
    EXPECT_TRUE(r.satisfied) << lambda << " " << r.lhs << " > " << r.rhs;
  }
  EXPECT_THROW(check_linearized_estimate(P, hzt::random_field(P, rng), hzt::random_field(P, rng), 1.5), DomainError);
  EXPECT_THROW(check_energy_estimate(P, P.zero_control(), 2.0), DomainError);
}

TEST(Estimates, ConstantMatchesDefinition)
{
  EXPECT_DOUBLE_EQ(linearized_constant(4.0, 1.0), 2.0);
  EXPECT_DOUBLE_EQ(linearized_constant(1.0, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(linearized_constant(4.0, 0.25), 8.0);
}
