#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace horizonopt;

namespace {

double wnorm(const DiscreteProblem & P, const Trajectory & v)
{
  return norm_L2_lambda(v, P.discounts().sigma_c, Metric::control, P.ops());
}

}  // namespace

TEST(Projection, Examples)
{
  const Vector mass = Vector::Constant(4, 0.25);
  const auto ball = AdmissibleSet::ball(1.0);
  Vector v(4);
  v << 2.0, -2.0, 2.0, 2.0;  // norm 2
  EXPECT_LE((ball.project(v, mass) - 0.5 * v).norm(), 1e-15);
  Vector inside = 0.3 * v;
  EXPECT_EQ(ball.project(inside, mass), inside);

  const auto box = AdmissibleSet::box(-1.0, 1.0);
  Vector w(3);
  w << 3.0, -0.5, -7.0;
  Vector expect(3);
  expect << 1.0, -0.5, -1.0;
  EXPECT_EQ(box.project(w, Vector::Ones(3)), expect);
  EXPECT_TRUE(box.contains(expect, Vector::Ones(3)));
  EXPECT_FALSE(box.contains(w, Vector::Ones(3)));
}

TEST(Projection, SetParameters)
{
  EXPECT_THROW(AdmissibleSet::ball(0.0), DomainError);
  EXPECT_THROW(AdmissibleSet::ball(std::numeric_limits<double>::infinity()), DomainError);
  EXPECT_THROW(AdmissibleSet::box(0.5, 0.5), DomainError);
  EXPECT_DOUBLE_EQ(AdmissibleSet::box(-2.0, 1.0).gamma_ad(0.25), 1.0);
  EXPECT_DOUBLE_EQ(AdmissibleSet::ball(0.7).gamma_ad(0.25), 0.7);
}

TEST(Projection, IdempotentNonexpansiveOptimal)
{
  std::mt19937_64 rng(21);
  for (const auto & set : {AdmissibleSet::ball(0.4), AdmissibleSet::box(-0.3, 0.5)}) {
    hzt::InstanceOptions o;
    o.admissible = set;
    const auto P = hzt::make_problem(o);
    for (int k = 0; k < 20; ++k) {
      const auto a = hzt::random_control(P, rng);
      const auto b = hzt::random_control(P, rng);
      const auto pa = project_pointwise(P, a);
      const auto pb = project_pointwise(P, b);
      EXPECT_LE(wnorm(P, project_pointwise(P, pa) - pa), 1e-14 * wnorm(P, pa));
      EXPECT_LE(wnorm(P, pa - pb), wnorm(P, a - b) * (1.0 + 1e-14));
      for (std::size_t i = 1; i < pa.size(); ++i) {
        EXPECT_TRUE(set.contains(pa[i], P.ops().control_mass));
        // obtuse angle: <a - Pa, Pb - Pa> <= 0 for any admissible Pb
        const Vector r = a[i] - pa[i];
        EXPECT_LE(r.dot(P.ops().control_mass.cwiseProduct(pb[i] - pa[i])), 1e-13);
      }
    }
  }
}

TEST(Projection, CommutesWithTimePermutation)
{
  std::mt19937_64 rng(22);
  hzt::InstanceOptions o;
  o.admissible = AdmissibleSet::ball(0.2);
  const auto P = hzt::make_problem(o);
  const auto a = hzt::random_control(P, rng);
  auto shuffled = a;
  std::reverse(shuffled.values.begin() + 1, shuffled.values.end());
  auto back = project_pointwise(P, shuffled);
  std::reverse(back.values.begin() + 1, back.values.end());
  EXPECT_EQ(wnorm(P, back - project_pointwise(P, a)), 0.0);
}

TEST(Stationarity, Examples)
{
  std::mt19937_64 rng(23);
  hzt::InstanceOptions o;
  o.admissible = AdmissibleSet::ball(1e6);
  const auto P = hzt::make_problem(o);
  const auto u = hzt::random_control(P, rng, 0.1);
  // interior point with zero gradient
  EXPECT_EQ(stationarity_residual(P, u, P.zero_control()), 0.0);
  // the projection does nothing, so the unit-step residual is the gradient norm
  const auto g = hzt::random_control(P, rng);
  EXPECT_NEAR(stationarity_residual(P, u, g, 1.0), wnorm(P, g), 1e-14 * wnorm(P, g));
  EXPECT_NEAR(stationarity_residual(P, u, g), wnorm(P, g) / P.nu(), 1e-13 * wnorm(P, g));
  EXPECT_THROW(stationarity_residual(P, u, g, 0.0), DomainError);
}

TEST(Stationarity, FixedPointOfTheClampFormula)
{
  // u = clamp(-e^{sigma_c t} phi / nu) with phi from an independent state: the 1/nu step maps
  // u - grad / nu back onto the clamp argument, so the residual vanishes identically
  std::mt19937_64 rng(24);
  hzt::InstanceOptions o;
  o.nonlinearity = "cubic";
  o.admissible = AdmissibleSet::box(-0.5, 0.5);
  const auto P = hzt::make_problem(o);
  const auto phi = hzt::random_field(P, rng, 0.1);
  Trajectory u = P.zero_control();
  for (std::size_t i = 1; i < u.size(); ++i) {
    u[i] = (-std::exp(P.discounts().sigma_c * P.grid().time(i)) / P.nu() * P.ops().restrict(phi[i]))
             .cwiseMax(-0.5)
             .cwiseMin(0.5);
  }
  const auto g = gradient_from_adjoint(P, u, phi);
  EXPECT_LE(stationarity_residual(P, u, g), 1e-12);
  EXPECT_LE(check_projection_formulas(P, u, phi).max_residual, 1e-12);
}

TEST(Stationarity, BoxResidualsAgree)
{
  // with step 1/nu the box residual at step i is exactly the clamp-formula residual, so the
  // weighted sum of squared formula residuals reproduces the stationarity residual
  std::mt19937_64 rng(25);
  hzt::InstanceOptions o;
  o.nonlinearity = "exponential";
  o.admissible = AdmissibleSet::box(-0.2, 0.3);
  const auto P = hzt::make_problem(o);
  for (int k = 0; k < 5; ++k) {
    const auto u = project_pointwise(P, hzt::random_control(P, rng, 0.3));
    const auto G = gradient_full(P, u);
    const auto rep = check_projection_formulas(P, u, G.adjoint);
    double sum = 0.0;
    for (const auto & r : rep.records) {
      EXPECT_EQ(r.which, FormulaCase::clamp);
      sum += P.grid().step * std::exp(-P.discounts().sigma_c * r.t) * r.residual * r.residual;
    }
    EXPECT_NEAR(std::sqrt(sum), stationarity_residual(P, u, G.gradient), 1e-12 * std::sqrt(sum));
    EXPECT_EQ(rep.records.size(), P.grid().num_steps);
  }
}

TEST(Formulas, BallCases)
{
  std::mt19937_64 rng(26);
  hzt::InstanceOptions o;
  o.admissible = AdmissibleSet::ball(0.3);
  const auto P = hzt::make_problem(o);
  const auto phi = hzt::random_field(P, rng);
  Trajectory u = P.zero_control();
  const auto & ops = P.ops();
  for (std::size_t i = 1; i < u.size(); ++i) {
    const Vector p = ops.restrict(phi[i]);
    u[i] = (i % 2 == 0) ? Vector(-0.3 * p / std::sqrt(ops.control_norm_sq(p))) : Vector(0.05 * p);
  }
  const auto rep = check_projection_formulas(P, u, phi);
  for (const auto & r : rep.records) {
    const double t = r.t;
    const Vector p = ops.restrict(phi[r.step]);
    if (r.step % 2 == 0) {
      EXPECT_EQ(r.which, FormulaCase::boundary);
      EXPECT_LE(r.residual, 1e-15);
    } else {
      EXPECT_EQ(r.which, FormulaCase::interior);
      const Vector e = p + P.nu() * std::exp(-P.discounts().sigma_c * t) * u[r.step];
      EXPECT_NEAR(r.residual, std::sqrt(ops.control_norm_sq(e)), 1e-15);
    }
  }
  EXPECT_GT(rep.max_residual, 0.0);
  EXPECT_EQ(rep.worst_step % 2, 1u);
  EXPECT_STREQ(to_string(FormulaCase::boundary), "boundary");
}

TEST(Formulas, LargeWeightSweep)
{
  // at u = 0 the clamp residual is ||clamp(-e^{sigma_c t} phi / nu)||, which decays like 1/nu, and the
  // optimal control shrinks accordingly
  double prev_res = std::numeric_limits<double>::infinity();
  double prev_norm = std::numeric_limits<double>::infinity();
  for (double nu : {1.0, 10.0, 100.0, 1000.0}) {
    hzt::InstanceOptions o;
    o.nonlinearity = "cubic";
    o.admissible = AdmissibleSet::box(-1.0, 1.0);
    o.nu = nu;
    const auto P = hzt::make_problem(o);
    const auto u0 = P.zero_control();
    const auto G = gradient_full(P, u0);
    const auto rep = check_projection_formulas(P, u0, G.adjoint);
    double expect = 0.0;
    for (std::size_t i = 1; i < u0.size(); ++i) {
      const Vector c = (-std::exp(P.discounts().sigma_c * P.grid().time(i)) / nu * P.ops().restrict(G.adjoint[i]))
                         .cwiseMax(-1.0)
                         .cwiseMin(1.0);
      expect = std::max(expect, std::sqrt(P.ops().control_norm_sq(c)));
    }
    EXPECT_NEAR(rep.max_residual, expect, 1e-15);
    EXPECT_LT(rep.max_residual, prev_res);
    if (nu >= 100.0) { EXPECT_NEAR(rep.max_residual * nu, prev_res * nu / 10.0, 1e-12 + 1e-9 * prev_res * nu); }
    prev_res = rep.max_residual;

    const auto r = optimize(P);
    ASSERT_TRUE(r.report.converged);
    const double n = wnorm(P, r.control);
    EXPECT_LT(n, prev_norm);
    prev_norm = n;
  }
  EXPECT_LT(prev_norm, 1e-3);
}
