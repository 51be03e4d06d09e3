#ifndef HORIZONOPT__EXPRESSION_HPP_
#define HORIZONOPT__EXPRESSION_HPP_

/**
 * @file
 * @brief Closed-form space-time fields used for the source g, the target y_d and the initial state.
 *
 * A field is a finite sum of separable terms  a_k * S_k(x) * tau_k(t).  Keeping the time factor in
 * closed form is what makes norms over the unbounded tail (T, inf) computable.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "errors.hpp"

namespace horizonopt {

/// Axis-aligned domain: an interval (dimension 1) or a rectangle (dimension 2).
struct Domain
{
  int dimension{1};
  std::array<double, 2> lower{0.0, 0.0};
  std::array<double, 2> upper{1.0, 1.0};

  double measure() const
  {
    double m = upper[0] - lower[0];
    if (dimension == 2) { m *= upper[1] - lower[1]; }
    return m;
  }
};

/// Spatial factor S(x).
struct SpatialProfile
{
  enum class Kind { constant, gauss, cosine, indicator };

  Kind kind{Kind::constant};
  /// gauss: center; indicator: lower corner
  std::array<double, 2> center{0.0, 0.0};
  /// indicator: upper corner
  std::array<double, 2> upper{0.0, 0.0};
  /// gauss: standard deviation
  double width{1.0};
  /// cosine: cos(k0 pi (x-x0)/Lx) cos(k1 pi (y-y0)/Ly) on the domain
  std::array<int, 2> modes{1, 0};

  double operator()(const Domain & dom, double x, double y) const
  {
    switch (kind) {
    case Kind::constant:
      return 1.0;
    case Kind::gauss: {
      double r2 = (x - center[0]) * (x - center[0]);
      if (dom.dimension == 2) { r2 += (y - center[1]) * (y - center[1]); }
      return std::exp(-0.5 * r2 / (width * width));
    }
    case Kind::cosine: {
      using std::numbers::pi;
      double v = std::cos(modes[0] * pi * (x - dom.lower[0]) / (dom.upper[0] - dom.lower[0]));
      if (dom.dimension == 2) {
        v *= std::cos(modes[1] * pi * (y - dom.lower[1]) / (dom.upper[1] - dom.lower[1]));
      }
      return v;
    }
    case Kind::indicator: {
      bool in = x >= center[0] && x <= upper[0];
      if (dom.dimension == 2) { in = in && y >= center[1] && y <= upper[1]; }
      return in ? 1.0 : 0.0;
    }
    }
    return 0.0;
  }
};

/// Time factor tau(t).
struct TimeProfile
{
  enum class Kind { constant, exponential, window, sine_window };

  Kind kind{Kind::constant};
  /// exponential: tau = exp(-rate t); a negative rate grows
  double rate{0.0};
  double t_on{0.0};
  double t_off{0.0};

  double operator()(double t) const
  {
    switch (kind) {
    case Kind::constant:
      return 1.0;
    case Kind::exponential:
      return std::exp(-rate * t);
    case Kind::window:
      return (t >= t_on && t <= t_off) ? 1.0 : 0.0;
    case Kind::sine_window:
      if (t < t_on || t > t_off) { return 0.0; }
      return std::sin(std::numbers::pi * (t - t_on) / (t_off - t_on));
    }
    return 0.0;
  }

  bool compact() const { return kind == Kind::window || kind == Kind::sine_window; }

  /// Exponent r with |tau(t)| <= C e^{r t} for large t (only meaningful when not compact).
  double growth_rate() const { return kind == Kind::exponential ? -rate : 0.0; }
};

struct ExpressionTerm
{
  double amplitude{0.0};
  SpatialProfile space{};
  TimeProfile time{};
};

/// Separable space-time field  sum_k a_k S_k(x) tau_k(t).
struct Expression
{
  std::vector<ExpressionTerm> terms{};
  /// Template name the expression was built from (informational).
  std::string name{"zero"};

  double operator()(const Domain & dom, double x, double y, double t) const
  {
    double v = 0.0;
    for (const auto & term : terms) { v += term.amplitude * term.space(dom, x, y) * term.time(t); }
    return v;
  }

  bool is_zero() const
  {
    return std::all_of(terms.begin(), terms.end(), [](const auto & t) { return t.amplitude == 0.0; });
  }

  static Expression zero() { return {}; }

  static Expression constant(double value)
  {
    Expression e;
    e.name = "constant";
    e.terms.push_back({value, {}, {}});
    return e;
  }

  /// a * exp(-|x-c|^2 / (2 w^2)) * exp(-rate t)
  static Expression gauss_decay(double amplitude, std::array<double, 2> center, double width, double rate)
  {
    Expression e;
    e.name = "gauss_decay";
    SpatialProfile s;
    s.kind = SpatialProfile::Kind::gauss;
    s.center = center;
    s.width = width;
    TimeProfile tp;
    tp.kind = TimeProfile::Kind::exponential;
    tp.rate = rate;
    e.terms.push_back({amplitude, s, tp});
    return e;
  }

  /// a * exp(-|x-c|^2 / (2 w^2)) * sin(pi (t - t_on)/(t_off - t_on)) on [t_on, t_off], zero outside
  static Expression gauss_window(
    double amplitude, std::array<double, 2> center, double width, double t_on, double t_off)
  {
    Expression e;
    e.name = "gauss_window";
    SpatialProfile s;
    s.kind = SpatialProfile::Kind::gauss;
    s.center = center;
    s.width = width;
    TimeProfile tp;
    tp.kind = TimeProfile::Kind::sine_window;
    tp.t_on = t_on;
    tp.t_off = t_off;
    e.terms.push_back({amplitude, s, tp});
    return e;
  }

  /// a * cos(k pi x / L) * exp(-rate t)
  static Expression cos_mode(double amplitude, std::array<int, 2> modes, double rate)
  {
    Expression e;
    e.name = "cos_mode";
    SpatialProfile s;
    s.kind = SpatialProfile::Kind::cosine;
    s.modes = modes;
    TimeProfile tp;
    tp.kind = TimeProfile::Kind::exponential;
    tp.rate = rate;
    e.terms.push_back({amplitude, s, tp});
    return e;
  }
};

namespace detail {

/// Composite Gauss-Legendre (5 points per cell) approximation of the L2(domain) inner product.
inline double spatial_inner(const Domain & dom, const SpatialProfile & a, const SpatialProfile & b)
{
  static constexpr std::array<double, 5> xg{
    -0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831, 0.9061798459386640};
  static constexpr std::array<double, 5> wg{
    0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665, 0.2369268850561891};

  const int cells_x = dom.dimension == 1 ? 2000 : 200;
  const int cells_y = dom.dimension == 1 ? 1 : 200;
  const double hx = (dom.upper[0] - dom.lower[0]) / cells_x;
  const double hy = dom.dimension == 1 ? 1.0 : (dom.upper[1] - dom.lower[1]) / cells_y;

  double sum = 0.0;
  for (int i = 0; i < cells_x; ++i) {
    const double cx = dom.lower[0] + (i + 0.5) * hx;
    for (std::size_t p = 0; p < xg.size(); ++p) {
      const double x = cx + 0.5 * hx * xg[p];
      if (dom.dimension == 1) {
        sum += 0.5 * hx * wg[p] * a(dom, x, 0.0) * b(dom, x, 0.0);
        continue;
      }
      for (int j = 0; j < cells_y; ++j) {
        const double cy = dom.lower[1] + (j + 0.5) * hy;
        for (std::size_t r = 0; r < xg.size(); ++r) {
          const double y = cy + 0.5 * hy * xg[r];
          sum += 0.25 * hx * hy * wg[p] * wg[r] * a(dom, x, y) * b(dom, x, y);
        }
      }
    }
  }
  return sum;
}

/// int_T^inf e^{-lambda t} tau_a(t) tau_b(t) dt
inline double tail_time_integral(const TimeProfile & a, const TimeProfile & b, double lambda, double T)
{
  double upper = std::numeric_limits<double>::infinity();
  if (a.compact()) { upper = std::min(upper, a.t_off); }
  if (b.compact()) { upper = std::min(upper, b.t_off); }
  if (upper <= T) { return 0.0; }

  if (!std::isfinite(upper)) {
    const double r = a.growth_rate() + b.growth_rate() - lambda;
    if (r >= 0.0) {
      throw DivergenceError(
        "tail integral diverges: time profile does not decay faster than e^{lambda t / 2}");
    }
    // e^{r (T_cut - T)} < 1e-16 relative to the value at T
    upper = T + 16.0 * std::log(10.0) / (-r);
  }

  std::vector<double> breaks{T};
  for (const auto * tp : {&a, &b}) {
    if (tp->compact()) {
      for (double c : {tp->t_on, tp->t_off}) {
        if (c > T && c < upper) { breaks.push_back(c); }
      }
    }
  }
  breaks.push_back(upper);
  std::sort(breaks.begin(), breaks.end());

  const auto integrand = [&](double t) { return std::exp(-lambda * t) * a(t) * b(t); };
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    if (breaks[k + 1] <= breaks[k]) { continue; }
    total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      integrand, breaks[k], breaks[k + 1], 20, 1e-13);
  }
  return total;
}

}  // namespace detail

/**
 * @brief Norm of a closed-form field over the tail  Omega x (T, inf)  in L2 with weight e^{-lambda t}.
 *
 * Cross terms between the separable pieces are included, so the result is the norm of the sum and
 * not a sum of norms.  Throws DivergenceError when a non-compact time profile does not decay fast
 * enough for the weighted integral to exist.
 */
inline double tail_norm_closed_form(const Expression & expr, const Domain & dom, double lambda, double T)
{
  double sum = 0.0;
  const auto & terms = expr.terms;
  for (std::size_t k = 0; k < terms.size(); ++k) {
    for (std::size_t l = k; l < terms.size(); ++l) {
      const double amp = terms[k].amplitude * terms[l].amplitude;
      if (amp == 0.0) { continue; }
      const double time = detail::tail_time_integral(terms[k].time, terms[l].time, lambda, T);
      if (time == 0.0) { continue; }
      const double space = detail::spatial_inner(dom, terms[k].space, terms[l].space);
      sum += (k == l ? 1.0 : 2.0) * amp * space * time;
    }
  }
  return std::sqrt(std::max(sum, 0.0));
}

}  // namespace horizonopt

#endif  // HORIZONOPT__EXPRESSION_HPP_
