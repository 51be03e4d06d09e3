#ifndef HORIZONOPT__MESH_HPP_
#define HORIZONOPT__MESH_HPP_

/**
 * @file
 * @brief Tensor-grid meshes of an interval or a rectangle, and the elliptic form a(.,.).
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "expression.hpp"

namespace horizonopt {

/// Axis-aligned sub-region used for the control set omega and the observation set omega_obs.
struct Region
{
  std::array<double, 2> lower{0.0, 0.0};
  std::array<double, 2> upper{0.0, 0.0};

  bool contains(int dimension, const std::array<double, 2> & p, double tol) const
  {
    bool in = p[0] >= lower[0] - tol && p[0] <= upper[0] + tol;
    if (dimension == 2) { in = in && p[1] >= lower[1] - tol && p[1] <= upper[1] + tol; }
    return in;
  }
};

/**
 * @brief P1 (1D) or bilinear tensor (2D) mesh with node indicators for omega and omega_obs.
 *
 * 2D nodes are numbered row by row: node(i, j) = j * (nx + 1) + i.  Elements store their nodes
 * counter-clockwise starting at the lower-left corner.
 */
struct SpatialMesh
{
  int dimension{1};
  std::vector<double> x_lines{};
  std::vector<double> y_lines{};
  std::vector<std::array<double, 2>> nodes{};
  std::vector<std::vector<int>> elements{};
  std::vector<char> in_omega{};
  /// empty means omega_obs = Omega
  std::vector<char> in_omega_obs{};

  std::size_t num_nodes() const { return nodes.size(); }
  std::size_t num_elements() const { return elements.size(); }
  bool has_observation_region() const { return !in_omega_obs.empty(); }

  Domain domain() const
  {
    Domain d;
    d.dimension = dimension;
    d.lower = {x_lines.front(), dimension == 2 ? y_lines.front() : 0.0};
    d.upper = {x_lines.back(), dimension == 2 ? y_lines.back() : 0.0};
    return d;
  }

  /// Element nodes all inside omega (or omega_obs when `observation` is set).
  bool element_in(std::size_t e, bool observation) const
  {
    const auto & flags = observation ? in_omega_obs : in_omega;
    if (observation && flags.empty()) { return true; }
    return std::all_of(elements[e].begin(), elements[e].end(), [&](int n) { return flags[n] != 0; });
  }

  /// Throws MeshError when an invariant is violated.
  void validate() const
  {
    if (dimension != 1 && dimension != 2) { throw MeshError("mesh dimension must be 1 or 2"); }
    const auto check_lines = [](const std::vector<double> & lines, const char * axis) {
      if (lines.size() < 2) { throw MeshError(std::string("mesh needs at least one element along ") + axis); }
      for (std::size_t i = 1; i < lines.size(); ++i) {
        if (!(lines[i] > lines[i - 1])) {
          throw MeshError(std::string("non-positive element volume along ") + axis);
        }
      }
    };
    check_lines(x_lines, "x");
    if (dimension == 2) { check_lines(y_lines, "y"); }

    const std::size_t expected =
      dimension == 1 ? x_lines.size() : x_lines.size() * y_lines.size();
    if (nodes.size() != expected) { throw MeshError("node count inconsistent with tensor grid"); }
    if (in_omega.size() != nodes.size()) { throw MeshError("omega indicator has wrong length"); }
    if (!in_omega_obs.empty() && in_omega_obs.size() != nodes.size()) {
      throw MeshError("omega_obs indicator has wrong length");
    }
    bool any = false;
    for (std::size_t e = 0; e < elements.size(); ++e) { any = any || element_in(e, false); }
    if (!any) { throw MeshError("omega must contain at least one element"); }
    if (has_observation_region()) {
      bool any_obs = false;
      for (std::size_t e = 0; e < elements.size(); ++e) { any_obs = any_obs || element_in(e, true); }
      if (!any_obs) { throw MeshError("omega_obs must contain at least one element"); }
    }
  }

  static SpatialMesh interval(
    double a, double b, int num_elements, Region omega, std::optional<Region> omega_obs = std::nullopt)
  {
    if (num_elements < 1 || !(b > a)) { throw MeshError("invalid interval mesh parameters"); }
    SpatialMesh m;
    m.dimension = 1;
    for (int i = 0; i <= num_elements; ++i) {
      m.x_lines.push_back(i == num_elements ? b : a + (b - a) * i / num_elements);
    }
    for (double x : m.x_lines) { m.nodes.push_back({x, 0.0}); }
    for (int i = 0; i < num_elements; ++i) { m.elements.push_back({i, i + 1}); }
    m.mark(omega, omega_obs);
    m.validate();
    return m;
  }

  static SpatialMesh rectangle(
    std::array<double, 2> lower,
    std::array<double, 2> upper,
    std::array<int, 2> num_elements,
    Region omega,
    std::optional<Region> omega_obs = std::nullopt)
  {
    if (num_elements[0] < 1 || num_elements[1] < 1 || !(upper[0] > lower[0]) || !(upper[1] > lower[1])) {
      throw MeshError("invalid rectangle mesh parameters");
    }
    SpatialMesh m;
    m.dimension = 2;
    const int nx = num_elements[0];
    const int ny = num_elements[1];
    for (int i = 0; i <= nx; ++i) {
      m.x_lines.push_back(i == nx ? upper[0] : lower[0] + (upper[0] - lower[0]) * i / nx);
    }
    for (int j = 0; j <= ny; ++j) {
      m.y_lines.push_back(j == ny ? upper[1] : lower[1] + (upper[1] - lower[1]) * j / ny);
    }
    for (int j = 0; j <= ny; ++j) {
      for (int i = 0; i <= nx; ++i) { m.nodes.push_back({m.x_lines[i], m.y_lines[j]}); }
    }
    const auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        m.elements.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
      }
    }
    m.mark(omega, omega_obs);
    m.validate();
    return m;
  }

private:
  void mark(const Region & omega, const std::optional<Region> & omega_obs)
  {
    const Domain d = domain();
    const double tol = 1e-12 * std::max(1.0, d.upper[0] - d.lower[0]);
    in_omega.assign(nodes.size(), 0);
    for (std::size_t n = 0; n < nodes.size(); ++n) { in_omega[n] = omega.contains(dimension, nodes[n], tol); }
    in_omega_obs.clear();
    if (omega_obs) {
      in_omega_obs.assign(nodes.size(), 0);
      for (std::size_t n = 0; n < nodes.size(); ++n) {
        in_omega_obs[n] = omega_obs->contains(dimension, nodes[n], tol);
      }
    }
  }
};

/// Symmetric diffusion tensor on one element (1D uses a11 only).
struct DiffusionTensor
{
  double a11{1.0};
  double a12{0.0};
  double a22{1.0};

  double quadratic(int dimension, double x0, double x1) const
  {
    if (dimension == 1) { return a11 * x0 * x0; }
    return a11 * x0 * x0 + 2.0 * a12 * x0 * x1 + a22 * x1 * x1;
  }

  double min_eigenvalue(int dimension) const
  {
    if (dimension == 1) { return a11; }
    const double m = 0.5 * (a11 + a22);
    const double r = std::sqrt(0.25 * (a11 - a22) * (a11 - a22) + a12 * a12);
    return m - r;
  }

  double max_eigenvalue(int dimension) const
  {
    if (dimension == 1) { return a11; }
    const double m = 0.5 * (a11 + a22);
    const double r = std::sqrt(0.25 * (a11 - a22) * (a11 - a22) + a12 * a12);
    return m + r;
  }
};

/// Coefficients of  a(y, z) = int a_ij d_i y d_j z + a_0 y z.
struct EllipticForm
{
  /// one tensor per element
  std::vector<DiffusionTensor> diffusion{};
  /// one value per node
  std::vector<double> reaction{};
  /// Lambda_A
  double ellipticity{1.0};
  /// M_A
  double continuity{1.0};

  /// Constant coefficients; the ellipticity and continuity constants are computed from them.
  static EllipticForm uniform(const SpatialMesh & mesh, DiffusionTensor a, double a0)
  {
    EllipticForm form;
    form.diffusion.assign(mesh.num_elements(), a);
    form.reaction.assign(mesh.num_nodes(), a0);
    form.ellipticity = a.min_eigenvalue(mesh.dimension);
    form.continuity = std::max(a.max_eigenvalue(mesh.dimension), a0);
    return form;
  }
};

}  // namespace horizonopt

#endif  // HORIZONOPT__MESH_HPP_
