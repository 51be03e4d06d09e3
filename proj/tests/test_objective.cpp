#include <cmath>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace horizonopt;

namespace {

const std::vector<double> sweep{1e-3, 1e-4, 1e-5, 1e-6};

double geometric(double lambda, double dt, std::size_t N)
{
  const double q = std::exp(-lambda * dt);
  return dt * q * (1.0 - std::pow(q, static_cast<double>(N))) / (1.0 - q);
}

hzt::InstanceOptions instance(const std::string & nl, bool box)
{
  hzt::InstanceOptions o;
  o.nonlinearity = nl;
  o.sigma_s = hzt::safe_sigma_s(nl);
  if (nl == "cubic_minus_linear") { o.lambda_c = 2.2; }
  if (box) { o.admissible = AdmissibleSet::box(-0.4, 0.6); }
  return o;
}

/// Synthetic ball point: active on even steps, interior on odd ones, degenerate on step 3.
struct BallPoint
{
  DiscreteProblem P;
  Trajectory u;
  Trajectory phi;
};

BallPoint ball_point()
{
  hzt::InstanceOptions o;
  o.admissible = AdmissibleSet::ball(0.3);
  DiscreteProblem P = hzt::make_problem(o);
  std::mt19937_64 rng(31);
  Trajectory phi = hzt::random_field(P, rng);
  Trajectory u = P.zero_control();
  const auto & ops = P.ops();
  const double gamma = 0.3, sc = P.discounts().sigma_c;
  for (std::size_t i = 1; i < u.size(); ++i) {
    const double t = P.grid().time(i);
    const Vector p = ops.restrict(phi[i]);
    const double pn = std::sqrt(ops.control_norm_sq(p));
    if (i % 2 == 0 || i == 3) {
      // active: scale phi so that ||phi_i|| exceeds nu gamma e^{-sigma_c t} (equal on step 3)
      const double target = (i == 3 ? 1.0 : 3.0) * P.nu() * gamma * std::exp(-sc * t);
      phi[i] *= target / pn;
      u[i] = -gamma * p / pn;
    } else {
      // interior: u_i = -e^{sigma_c t} phi_i / nu with norm gamma / 2
      const double s = 0.5 * gamma * P.nu() * std::exp(-sc * t) / pn;
      phi[i] *= s;
      u[i] = -std::exp(sc * t) * ops.restrict(phi[i]) / P.nu();
    }
  }
  return {std::move(P), std::move(u), std::move(phi)};
}

}  // namespace

TEST(Cost, ZeroStateAgainstConstantTarget)
{
  hzt::InstanceOptions o;
  o.y0 = Expression::zero();
  o.source = Expression::zero();
  o.target = Expression::cos_mode(0.6, {0, 0}, 0.0);
  o.nonlinearity = "cubic";
  const auto P = hzt::make_problem(o);
  const auto c = cost(P, P.zero_control());
  const double g = geometric(P.discounts().sigma_s, P.grid().step, P.grid().num_steps);
  EXPECT_NEAR(c.tracking, 0.5 * 0.36 * g, 1e-14);
  EXPECT_EQ(c.control, 0.0);
  EXPECT_DOUBLE_EQ(c.total, c.tracking);
}

TEST(Cost, ConstantControlTerm)
{
  hzt::InstanceOptions o;
  const auto P = hzt::make_problem(o);
  Trajectory u = P.zero_control();
  for (std::size_t i = 1; i < u.size(); ++i) { u[i].setConstant(0.7); }
  const auto c = cost(P, u);
  // |omega| = 0.5
  const double g = geometric(P.discounts().sigma_c, P.grid().step, P.grid().num_steps);
  EXPECT_NEAR(c.control, 0.5 * P.nu() * 0.49 * 0.5 * g, 1e-14);
}

TEST(Cost, DifferenceMatchesSubtraction)
{
  std::mt19937_64 rng(3);
  const auto P = hzt::make_problem(instance("cubic", false));
  const auto a = evaluate(P, hzt::random_control(P, rng, 0.5));
  const auto b = evaluate(P, hzt::random_control(P, rng, 0.5));
  EXPECT_NEAR(cost_difference(P, a, b), a.cost.total - b.cost.total, 1e-14);
  EXPECT_EQ(cost_difference(P, a, a), 0.0);
}

TEST(Gradient, CentralDifferences)
{
  std::mt19937_64 rng(11);
  for (const std::string nl : {"zero", "cubic", "cubic_minus_linear", "exponential"}) {
    for (bool box : {false, true}) {
      const auto P = hzt::make_problem(instance(nl, box));
      const auto u = hzt::random_control(P, rng, 0.5);
      const auto v = hzt::random_control(P, rng);
      EXPECT_LE(hzt::best_fd_error(P, u, v, sweep), 1e-7) << nl << (box ? " box" : " ball");
    }
  }
}

TEST(Gradient, RieszRepresentation)
{
  std::mt19937_64 rng(12);
  for (const std::string nl : {"zero", "cubic", "exponential"}) {
    const auto P = hzt::make_problem(instance(nl, false));
    const auto u = hzt::random_control(P, rng, 0.5);
    const auto G = gradient_full(P, u);
    // gradient -> derivative
    const auto v = hzt::random_control(P, rng);
    const double a = directional_derivative(P, G.gradient, v);
    const double b = directional_derivative_by_sensitivity(P, G.eval, v);
    EXPECT_LE(std::abs(a - b), 1e-10 * std::abs(a)) << nl;
    // derivative -> gradient: a unit impulse at (step i, node j) reads off one coefficient
    for (std::size_t i : {1ul, 7ul, 20ul}) {
      for (Eigen::Index j : {0, 5}) {
        Trajectory e = P.zero_control();
        e[i][j] = 1.0;
        const double w = P.grid().step * std::exp(-P.discounts().sigma_c * P.grid().time(i)) * P.ops().control_mass[j];
        const double coef = directional_derivative_by_sensitivity(P, G.eval, e) / w;
        EXPECT_LE(std::abs(coef - G.gradient[i][j]), 1e-10 * (1.0 + std::abs(coef))) << nl;
      }
    }
  }
}

TEST(Gradient, StepZeroIgnored)
{
  std::mt19937_64 rng(13);
  const auto P = hzt::make_problem(instance("cubic", false));
  auto u = hzt::random_control(P, rng, 0.5);
  const double c0 = cost(P, u).total;
  u[0].setConstant(5.0);
  EXPECT_EQ(cost(P, u).total, c0);
  EXPECT_EQ(gradient(P, u)[0].norm(), 0.0);
}

TEST(Hessian, SymmetricAndMatchesSecondDifference)
{
  std::mt19937_64 rng(14);
  for (const std::string nl : {"zero", "cubic", "cubic_minus_linear", "exponential"}) {
    const auto P = hzt::make_problem(instance(nl, false));
    const auto u = hzt::random_control(P, rng, 0.5);
    const auto v1 = hzt::random_control(P, rng);
    const auto v2 = hzt::random_control(P, rng);
    const double h12 = hessian_vec(P, u, v1, v2);
    const double h21 = hessian_vec(P, u, v2, v1);
    EXPECT_LE(std::abs(h12 - h21), 1e-10 * std::abs(h12)) << nl;

    const double h11 = hessian_vec(P, u, v1, v1);
    const double e = 1e-3;
    Trajectory up = u, um = u;
    up.axpy(e, v1);
    um.axpy(-e, v1);
    const auto E0 = evaluate(P, u), Ep = evaluate(P, up), Em = evaluate(P, um);
    const double second = (cost_difference(P, Ep, E0) + cost_difference(P, Em, E0)) / (e * e);
    EXPECT_LE(std::abs(second - h11), 1e-5 * std::abs(h11)) << nl;

    // mixed derivative through the gradient
    Trajectory wp = u, wm = u;
    wp.axpy(e, v2);
    wm.axpy(-e, v2);
    const double mixed =
      (directional_derivative(P, gradient(P, wp), v1) - directional_derivative(P, gradient(P, wm), v1)) / (2 * e);
    EXPECT_LE(std::abs(mixed - h12), 1e-5 * (std::abs(h12) + std::abs(h11))) << nl;
  }
}

TEST(Hessian, QuadraticModelExactForLinearState)
{
  std::mt19937_64 rng(15);
  const auto P = hzt::make_problem(instance("zero", false));
  const auto u = hzt::random_control(P, rng, 0.5);
  const auto v = hzt::random_control(P, rng);
  Trajectory w = u;
  w.axpy(1.0, v);
  const double lhs = cost_difference(P, evaluate(P, w), evaluate(P, u));
  const double rhs = directional_derivative(P, gradient(P, u), v) + 0.5 * hessian_vec(P, u, v, v);
  EXPECT_LE(std::abs(lhs - rhs), 1e-12 * std::abs(lhs));
}

TEST(Multiplier, SyntheticBallPoint)
{
  const auto B = ball_point();
  const auto & P = B.P;
  const auto m = multiplier_and_cone(P, B.u, B.phi);
  const double gamma = 0.3, sc = P.discounts().sigma_c;
  EXPECT_EQ(m.activity[0], Activity::inactive);
  for (std::size_t i = 1; i < B.u.size(); ++i) {
    const double t = P.grid().time(i);
    const double pn = std::sqrt(P.ops().control_norm_sq(P.ops().restrict(B.phi[i])));
    if (i % 2 == 0) {
      EXPECT_EQ(m.activity[i], Activity::active_strict) << i;
      EXPECT_NEAR(m.values[i], pn - P.nu() * gamma * std::exp(-sc * t), 1e-13) << i;
      EXPECT_GT(m.values[i], 0.0);
    } else if (i == 3) {
      EXPECT_EQ(m.activity[i], Activity::active_degenerate);
      EXPECT_NEAR(m.values[i], 0.0, 1e-14);
    } else {
      EXPECT_EQ(m.activity[i], Activity::inactive) << i;
      EXPECT_EQ(m.values[i], 0.0);
    }
  }
  // the synthetic point satisfies the projection formulas exactly
  EXPECT_LE(check_projection_formulas(P, B.u, B.phi).max_residual, 1e-14);
}

TEST(Multiplier, LagrangianAddsWeightedNorm)
{
  const auto B = ball_point();
  const auto & P = B.P;
  const auto m = multiplier_and_cone(P, B.u, B.phi);
  std::mt19937_64 rng(16);
  const auto v = hzt::random_control(P, rng);
  double extra = 0.0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    extra += P.grid().step * m.values[i] / 0.3 * P.ops().control_norm_sq(v[i]);
  }
  EXPECT_GT(extra, 0.0);
  EXPECT_NEAR(lagrangian_hessian_vec(P, B.u, m, v), hessian_vec(P, B.u, v, v) + extra, 1e-12);
}

TEST(Multiplier, BoxRejected)
{
  const auto P = hzt::make_problem(instance("zero", true));
  const auto u = P.zero_control();
  const auto phi = Trajectory::zeros(P.grid(), P.ops().num_nodes(), TrajectoryKind::adjoint);
  EXPECT_THROW(multiplier_and_cone(P, u, phi), DomainError);
  EXPECT_THROW(lagrangian_hessian_vec(P, u, Multiplier{}, u), DomainError);
}

TEST(CriticalCone, BallDirections)
{
  const auto B = ball_point();
  const auto & P = B.P;
  const auto m = multiplier_and_cone(P, B.u, B.phi);
  const auto dirs = sample_critical_directions(P, B.u, B.phi, &m, 20, 1);
  ASSERT_EQ(dirs.size(), 20u);
  for (const auto & v : dirs) {
    EXPECT_TRUE(in_critical_cone(P, B.u, B.phi, &m, v));
    for (std::size_t i = 2; i < v.size(); i += 2) {
      const double ip = B.u[i].dot(P.ops().control_mass.cwiseProduct(v[i]));
      EXPECT_LE(std::abs(ip), 1e-14);
    }
    EXPECT_LE(B.u[3].dot(P.ops().control_mass.cwiseProduct(v[3])), 1e-14);
  }
  // outward on a strictly active step leaves the cone
  Trajectory out = P.zero_control();
  out[2] = B.u[2];
  EXPECT_FALSE(in_critical_cone(P, B.u, B.phi, &m, out));
  // inward on the degenerate step stays inside, outward does not
  Trajectory in = P.zero_control();
  in[3] = -B.u[3];
  EXPECT_TRUE(in_critical_cone(P, B.u, B.phi, &m, in));
  in[3] = B.u[3];
  EXPECT_FALSE(in_critical_cone(P, B.u, B.phi, &m, in));
  EXPECT_THROW(in_critical_cone(P, B.u, B.phi, nullptr, out), DomainError);
}

TEST(CriticalCone, BoxDirectionsAtOptimum)
{
  auto o = instance("cubic", true);
  o.admissible = AdmissibleSet::box(-0.2, 0.2);
  o.nu = 0.02;
  const auto P = hzt::make_problem(o);
  const auto r = optimize(P);
  ASSERT_TRUE(r.report.converged);
  const auto g = gradient_from_adjoint(P, r.control, r.adjoint);
  const auto dirs = sample_critical_directions(P, r.control, r.adjoint, nullptr, 20, 2);
  ASSERT_FALSE(dirs.empty());
  std::size_t active = 0;
  for (std::size_t i = 1; i < r.control.size(); ++i) {
    for (Eigen::Index j = 0; j < r.control[i].size(); ++j) {
      if (std::abs(std::abs(r.control[i][j]) - 0.2) < 1e-12) { ++active; }
    }
  }
  EXPECT_GT(active, 0u);
  for (const auto & v : dirs) {
    const double vn = norm_L2_lambda(v, P.discounts().sigma_c, Metric::control, P.ops());
    EXPECT_LE(std::abs(directional_derivative(P, g, v)), 1e-6 * vn);
    for (std::size_t i = 1; i < v.size(); ++i) {
      for (Eigen::Index j = 0; j < v[i].size(); ++j) {
        if (r.control[i][j] >= 0.2 - 1e-12) { EXPECT_LE(v[i][j], 0.0); }
        if (r.control[i][j] <= -0.2 + 1e-12) { EXPECT_GE(v[i][j], 0.0); }
      }
    }
  }
}
