#ifndef HORIZONOPT__PROBLEM_HPP_
#define HORIZONOPT__PROBLEM_HPP_

/**
 * @file
 * @brief Problem data model, assumption checks and the discretized problem.
 */

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "admissible_set.hpp"
#include "errors.hpp"
#include "expression.hpp"
#include "mesh.hpp"
#include "nonlinearity.hpp"
#include "operators.hpp"
#include "weighted_spaces.hpp"

namespace horizonopt {

/**
 * @brief Discount exponents.
 *
 * `lambda_c` and `p` are optional; resolved() fills them with the defaults (midpoint of the
 * admissible interval for lambda_c, 2 in 1D and min(6, 4/(4-n)+1) otherwise for p).
 */
struct Discounts
{
  double sigma_s{1.0};
  double sigma_c{0.1};
  std::optional<double> lambda_c{};
  std::optional<double> p{};

  struct Resolved
  {
    double sigma_s;
    double sigma_c;
    double lambda_c;
    /// (q + 1) lambda_c
    double lambda_bar;
    double p;
    double q;
  };

  Resolved resolved(const Nonlinearity & f, int dimension) const
  {
    const double q = f.growth_exponent;
    const double lc = lambda_c.value_or(0.5 * (-2.0 * f.monotonicity + sigma_s / (q + 3.0)));
    const double pp = p.value_or(dimension == 1 ? 2.0 : std::min(6.0, 4.0 / (4.0 - dimension) + 1.0));
    return {sigma_s, sigma_c, lc, (q + 1.0) * lc, pp, q};
  }
};

/// Source or target: a closed-form descriptor, or samples on the time grid (t_i = i dt, i >= 0).
struct SpaceTimeField
{
  Expression expression{};
  std::optional<std::vector<Vector>> samples{};

  static SpaceTimeField from(Expression e) { return {std::move(e), std::nullopt}; }

  Vector sample(const SpatialMesh & mesh, std::size_t i, double t) const
  {
    if (samples) {
      if (i >= samples->size()) { throw DomainError("sampled field shorter than the time grid"); }
      return (*samples)[i];
    }
    const Domain dom = mesh.domain();
    Vector v(static_cast<Eigen::Index>(mesh.num_nodes()));
    for (std::size_t n = 0; n < mesh.num_nodes(); ++n) {
      v[static_cast<Eigen::Index>(n)] = expression(dom, mesh.nodes[n][0], mesh.nodes[n][1], t);
    }
    return v;
  }

  bool has_closed_form() const { return !samples.has_value(); }
};

/// Complete description of the discounted problem on the horizon [0, T].
struct ProblemSpec
{
  SpatialMesh mesh;
  EllipticForm form;
  Nonlinearity nonlinearity{};
  Discounts discounts{};
  /// nodal initial state
  Vector y0;
  SpaceTimeField source{};
  SpaceTimeField target{};
  /// control cost weight nu
  double nu{1.0};
  AdmissibleSet admissible{};
  double horizon{1.0};
  double dt{0.1};
  /// also require the second-order sufficiency inequality on sigma_c
  bool require_sosc{false};
};

/// Outcome of one assumption check.
struct AssumptionCheck
{
  std::string name;
  /// the inequality being checked, as cited in diagnostics
  std::string inequality;
  bool passed{false};
  bool mandatory{true};
  std::string detail;
};

struct ValidationReport
{
  std::vector<AssumptionCheck> checks;
  /// sampling grid used for the pointwise conditions on f
  double sample_lower{-50.0};
  double sample_upper{50.0};
  std::size_t sample_count{10000};

  bool passed() const
  {
    for (const auto & c : checks) {
      if (c.mandatory && !c.passed) { return false; }
    }
    return true;
  }

  std::vector<AssumptionCheck> failures() const
  {
    std::vector<AssumptionCheck> out;
    for (const auto & c : checks) {
      if (c.mandatory && !c.passed) { out.push_back(c); }
    }
    return out;
  }

  std::string summary() const
  {
    std::ostringstream os;
    for (const auto & c : checks) {
      os << (c.passed ? "[pass] " : (c.mandatory ? "[FAIL] " : "[warn] ")) << c.name << ": " << c.inequality;
      if (!c.detail.empty()) { os << " (" << c.detail << ")"; }
      os << '\n';
    }
    return os.str();
  }
};

namespace detail {

inline std::string fmt(double v)
{
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace detail

/**
 * @brief Check every standing assumption; failures are reported, never thrown.
 *
 * Pointwise conditions on f are sampled on [-50, 50] with 10^4 points.
 */
inline ValidationReport validate_assumptions(const ProblemSpec & spec)
{
  ValidationReport rep;
  auto add = [&rep](std::string name, std::string ineq, bool ok, std::string detail = {}, bool mandatory = true) {
    rep.checks.push_back({std::move(name), std::move(ineq), ok, mandatory, std::move(detail)});
  };

  const Nonlinearity & f = spec.nonlinearity;
  const double lf = f.monotonicity;
  const double q = f.growth_exponent;

  // f on a sampling grid
  {
    double min_df = std::numeric_limits<double>::infinity();
    double worst_growth = 0.0;
    bool finite = true;
    for (std::size_t k = 0; k < rep.sample_count; ++k) {
      const double s = rep.sample_lower +
                       (rep.sample_upper - rep.sample_lower) * static_cast<double>(k) /
                         static_cast<double>(rep.sample_count - 1);
      const double fs = f.f(s);
      const double d1 = f.df(s);
      const double d2 = f.d2f(s);
      finite = finite && std::isfinite(fs) && std::isfinite(d1) && std::isfinite(d2);
      min_df = std::min(min_df, d1);
      const double bound = f.growth_c1 * (std::pow(std::abs(s), q) + 1.0) * (f.growth_c2 * std::abs(fs) + 1.0);
      worst_growth = std::max({worst_growth, std::abs(d1) / bound, std::abs(d2) / bound});
    }
    add("f(0) = 0", "f(0) = 0", std::abs(f.f(0.0)) <= 1e-14, "f(0) = " + detail::fmt(f.f(0.0)));
    add("Λ_f ≤ 0", "Λ_f ≤ 0", lf <= 0.0, "Λ_f = " + detail::fmt(lf));
    add(
      "monotonicity of f",
      "f'(s) ≥ Λ_f",
      finite && min_df >= lf - 1e-12 * (1.0 + std::abs(lf)),
      "min sampled f' = " + detail::fmt(min_df) + ", Λ_f = " + detail::fmt(lf));
    add(
      "growth of f' and f''",
      "|f^(j)(s)| ≤ C_{f,1}(|s|^q + 1)(C_{f,2}|f(s)| + 1)",
      finite && worst_growth <= 1.0 + 1e-12,
      "max sampled ratio = " + detail::fmt(worst_growth));
  }

  // elliptic form
  {
    bool a0_ok = true;
    for (double a0 : spec.form.reaction) { a0_ok = a0_ok && a0 >= 0.0; }
    add("reaction sign", "a_0(x) ≥ 0", a0_ok);
    double worst = 0.0;
    const bool ell =
      spec.form.diffusion.size() == spec.mesh.num_elements() && detail::ellipticity_holds(spec.mesh, spec.form, &worst);
    add(
      "ellipticity",
      "Λ_A|ξ|² ≤ Σ a_ij ξ_i ξ_j",
      ell,
      "Λ_A = " + detail::fmt(spec.form.ellipticity) + ", min sampled form = " + detail::fmt(worst));
  }

  // discounts
  {
    const auto d = spec.discounts.resolved(f, spec.mesh.dimension);
    add("state discount positive", "σ_s > 0", d.sigma_s > 0.0, "σ_s = " + detail::fmt(d.sigma_s));
    add("control discount positive", "σ_c > 0", d.sigma_c > 0.0, "σ_c = " + detail::fmt(d.sigma_c));
    add(
      "state discount threshold",
      "σ_s > −2(q+3)Λ_f",
      d.sigma_s > -2.0 * (q + 3.0) * lf,
      "σ_s = " + detail::fmt(d.sigma_s) + ", −2(q+3)Λ_f = " + detail::fmt(-2.0 * (q + 3.0) * lf));
    add(
      "auxiliary exponent lower bound",
      "−2Λ_f < λ_c",
      -2.0 * lf < d.lambda_c,
      "λ_c = " + detail::fmt(d.lambda_c) + ", −2Λ_f = " + detail::fmt(-2.0 * lf));
    add(
      "auxiliary exponent upper bound",
      "λ_c < σ_s/(q+3)",
      d.lambda_c < d.sigma_s / (q + 3.0),
      "λ_c = " + detail::fmt(d.lambda_c) + ", σ_s/(q+3) = " + detail::fmt(d.sigma_s / (q + 3.0)));
    const int n = spec.mesh.dimension;
    const bool p_ok = n == 1 ? (d.p >= 2.0 && d.p <= 6.0) : (d.p > 4.0 / (4.0 - n) && d.p <= 6.0);
    add(
      "integrability exponent",
      n == 1 ? "2 ≤ p ≤ 6" : "4/(4−n) < p ≤ 6",
      p_ok,
      "p = " + detail::fmt(d.p));
    add(
      "second-order sufficiency",
      "σ_c < σ_s + Λ_f(q+2)",
      d.sigma_c < d.sigma_s + lf * (q + 2.0),
      "σ_c = " + detail::fmt(d.sigma_c) + ", σ_s + Λ_f(q+2) = " + detail::fmt(d.sigma_s + lf * (q + 2.0)),
      spec.require_sosc);
  }

  // problem data
  {
    add("control weight", "ν > 0", spec.nu > 0.0, "ν = " + detail::fmt(spec.nu));
    add("time step", "Δt > 0", spec.dt > 0.0, "Δt = " + detail::fmt(spec.dt));
    bool integral = false;
    if (spec.dt > 0.0 && spec.horizon > 0.0) {
      const double r = spec.horizon / spec.dt;
      integral = std::abs(r - std::round(r)) <= 1e-9 * std::max(1.0, r) && std::round(r) >= 1.0;
    }
    add("horizon grid", "T/Δt ∈ ℕ", integral);
    add(
      "initial state",
      "y_0 ∈ L^∞(Ω)",
      spec.y0.size() == static_cast<Eigen::Index>(spec.mesh.num_nodes()) && spec.y0.allFinite());
    bool set_ok = true;
    try {
      spec.admissible.validate();
    } catch (const DomainError &) {
      set_ok = false;
    }
    add("admissible set", spec.admissible.kind == AdmissibleSet::Kind::ball ? "γ > 0" : "α < β", set_ok);
  }
  return rep;
}

/**
 * @brief Problem discretized in space and time: assembled operators plus sampled data.
 *
 * Construction validates the assumptions and throws AssumptionError listing every failed
 * inequality.  Instances are immutable and safe to share between threads.
 */
class DiscreteProblem
{
public:
  explicit DiscreteProblem(ProblemSpec spec) : spec_(std::move(spec))
  {
    const auto report = validate_assumptions(spec_);
    if (!report.passed()) {
      std::string msg = "assumptions violated:";
      for (const auto & c : report.failures()) { msg += " [" + c.inequality + "]"; }
      throw AssumptionError(msg);
    }
    ops_ = assemble_operators(spec_.mesh, spec_.form);
    init_grid();
  }

  /// Same problem on another horizon (same dt); the operators are reused.
  DiscreteProblem with_horizon(double T) const
  {
    DiscreteProblem p(*this);
    p.spec_.horizon = T;
    p.init_grid();
    return p;
  }

  const ProblemSpec & spec() const { return spec_; }
  const Operators & ops() const { return ops_; }
  const TimeGrid & grid() const { return grid_; }
  const Discounts::Resolved & discounts() const { return discounts_; }
  const Nonlinearity & f() const { return spec_.nonlinearity; }
  double nu() const { return spec_.nu; }
  const AdmissibleSet & admissible() const { return spec_.admissible; }

  /// g sampled at t_i
  const Vector & source(std::size_t i) const { return source_[i]; }
  /// y_d sampled at t_i
  const Vector & target(std::size_t i) const { return target_[i]; }
  const std::vector<Vector> & target_samples() const { return target_; }

  /// |omega| as seen by the control mass
  double omega_measure() const { return ops_.control_mass.sum(); }

  Trajectory zero_control() const
  {
    return Trajectory::zeros(grid_, ops_.num_controls(), TrajectoryKind::control);
  }

  /// Trajectory of the target samples (generic tag, all nodes).
  Trajectory target_trajectory() const { return {grid_, target_, TrajectoryKind::generic}; }

private:
  void init_grid()
  {
    grid_ = TimeGrid::make(spec_.horizon, spec_.dt);
    discounts_ = spec_.discounts.resolved(spec_.nonlinearity, spec_.mesh.dimension);
    source_.clear();
    target_.clear();
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      source_.push_back(spec_.source.sample(spec_.mesh, i, grid_.time(i)));
      target_.push_back(spec_.target.sample(spec_.mesh, i, grid_.time(i)));
    }
  }

  ProblemSpec spec_;
  Operators ops_;
  TimeGrid grid_;
  Discounts::Resolved discounts_{};
  std::vector<Vector> source_;
  std::vector<Vector> target_;
};

}  // namespace horizonopt

#endif  // HORIZONOPT__PROBLEM_HPP_
