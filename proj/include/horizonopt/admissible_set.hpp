#ifndef HORIZONOPT__ADMISSIBLE_SET_HPP_
#define HORIZONOPT__ADMISSIBLE_SET_HPP_

#include <cmath>
#include <limits>
#include <string>

#include "errors.hpp"
#include "operators.hpp"

namespace horizonopt {

/// K_ad: the ball of radius gamma in L2(omega), or the box [alpha, beta].
struct AdmissibleSet
{
  enum class Kind { ball, box };

  Kind kind{Kind::ball};
  double gamma{1.0};
  double alpha{-1.0};
  double beta{1.0};

  static AdmissibleSet ball(double gamma)
  {
    AdmissibleSet s;
    s.kind = Kind::ball;
    s.gamma = gamma;
    s.validate();
    return s;
  }

  static AdmissibleSet box(double alpha, double beta)
  {
    AdmissibleSet s;
    s.kind = Kind::box;
    s.alpha = alpha;
    s.beta = beta;
    s.validate();
    return s;
  }

  void validate() const
  {
    if (kind == Kind::ball) {
      if (!std::isfinite(gamma) || !(gamma > 0.0)) { throw DomainError("ball radius needs 0 < γ < ∞"); }
    } else if (!std::isfinite(alpha) || !std::isfinite(beta) || !(alpha < beta)) {
      throw DomainError("box bounds need finite α < β");
    }
  }

  /// Scale for activity tolerances: gamma (ball) or beta - alpha (box).
  double scale() const { return kind == Kind::ball ? gamma : beta - alpha; }

  /// sup of ||v||_{L2} over K_ad
  double gamma_ad(double omega_measure) const
  {
    if (kind == Kind::ball) { return gamma; }
    return std::max(std::abs(alpha), std::abs(beta)) * std::sqrt(omega_measure);
  }

  /**
   * @brief Projection of one time slice onto K_ad.
   *
   * Ball: radial scaling in the control-mass norm.  Box: nodal clamp, which is the metric
   * projection because the control mass is diagonal.
   */
  Vector project(const Vector & v, const Vector & control_mass) const
  {
    if (kind == Kind::box) { return v.cwiseMax(alpha).cwiseMin(beta); }
    const double nrm = std::sqrt(v.dot(control_mass.cwiseProduct(v)));
    if (nrm <= gamma) { return v; }
    return v * (gamma / nrm);
  }

  bool contains(const Vector & v, const Vector & control_mass, double tol = 1e-14) const
  {
    if (kind == Kind::box) {
      return (v.array() >= alpha - tol * scale()).all() && (v.array() <= beta + tol * scale()).all();
    }
    return std::sqrt(v.dot(control_mass.cwiseProduct(v))) <= gamma * (1.0 + tol);
  }

  std::string describe() const
  {
    if (kind == Kind::ball) { return "ball(γ=" + std::to_string(gamma) + ")"; }
    return "box[" + std::to_string(alpha) + "," + std::to_string(beta) + "]";
  }
};

}  // namespace horizonopt

#endif  // HORIZONOPT__ADMISSIBLE_SET_HPP_
