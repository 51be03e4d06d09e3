#ifndef HORIZONOPT__OPERATORS_HPP_
#define HORIZONOPT__OPERATORS_HPP_

/**
 * @file
 * @brief Finite element assembly of the spatial operators.
 */

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "errors.hpp"
#include "mesh.hpp"

namespace horizonopt {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/**
 * @brief Assembled spatial operators.
 *
 * Controls live on the nodes of omega (`control_nodes`, increasing node order).  The control mass
 * is the row-sum lumping of the mass matrix of the elements contained in omega, so it is diagonal
 * and its entries sum to |omega|.
 */
struct Operators
{
  /// a(.,.) with natural boundary conditions (diffusion + reaction)
  SparseMatrix stiffness;
  SparseMatrix mass;
  /// int grad y . grad z, used for H1 norms
  SparseMatrix gradient_gram;
  /// mass matrix of the elements inside omega_obs (equals `mass` when omega_obs is absent)
  SparseMatrix observation_mass;
  Vector lumped_mass;
  /// diagonal control mass, one entry per control node
  Vector control_mass;
  std::vector<int> control_nodes;

  Eigen::Index num_nodes() const { return mass.rows(); }
  Eigen::Index num_controls() const { return control_mass.size(); }

  /// Zero extension of a control vector to all nodes.
  Vector extend(const Vector & u) const
  {
    Vector y = Vector::Zero(num_nodes());
    for (Eigen::Index k = 0; k < u.size(); ++k) { y[control_nodes[k]] = u[k]; }
    return y;
  }

  /// Nodal restriction to the control nodes.
  Vector restrict(const Vector & y) const
  {
    Vector u(num_controls());
    for (Eigen::Index k = 0; k < u.size(); ++k) { u[k] = y[control_nodes[k]]; }
    return u;
  }

  /// Load vector of the control, i.e. the discrete  int u chi_omega psi_j.
  Vector control_action(const Vector & u) const { return extend(control_mass.cwiseProduct(u)); }

  double control_norm_sq(const Vector & u) const { return u.dot(control_mass.cwiseProduct(u)); }
};

namespace detail {

inline constexpr std::array<double, 2> gauss2_points{
  0.5 - 0.5 / std::numbers::sqrt3, 0.5 + 0.5 / std::numbers::sqrt3};

/// Element matrices: stiffness (diffusion + reaction), mass, gradient gram.
struct ElementMatrices
{
  Eigen::MatrixXd stiffness;
  Eigen::MatrixXd mass;
  Eigen::MatrixXd gradient_gram;
};

inline ElementMatrices element_matrices(const SpatialMesh & mesh, const EllipticForm & form, std::size_t e)
{
  const auto & nodes = mesh.elements[e];
  const auto nn = static_cast<Eigen::Index>(nodes.size());
  ElementMatrices em{
    Eigen::MatrixXd::Zero(nn, nn), Eigen::MatrixXd::Zero(nn, nn), Eigen::MatrixXd::Zero(nn, nn)};
  const DiffusionTensor & a = form.diffusion[e];

  if (mesh.dimension == 1) {
    const double h = mesh.nodes[nodes[1]][0] - mesh.nodes[nodes[0]][0];
    for (double s : gauss2_points) {
      const std::array<double, 2> phi{1.0 - s, s};
      const std::array<double, 2> dphi{-1.0 / h, 1.0 / h};
      const double a0 = phi[0] * form.reaction[nodes[0]] + phi[1] * form.reaction[nodes[1]];
      const double w = 0.5 * h;
      for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
          em.stiffness(i, j) += w * (a.a11 * dphi[i] * dphi[j] + a0 * phi[i] * phi[j]);
          em.mass(i, j) += w * phi[i] * phi[j];
          em.gradient_gram(i, j) += w * dphi[i] * dphi[j];
        }
      }
    }
    return em;
  }

  const double hx = mesh.nodes[nodes[1]][0] - mesh.nodes[nodes[0]][0];
  const double hy = mesh.nodes[nodes[3]][1] - mesh.nodes[nodes[0]][1];
  // reference corners (0,0), (1,0), (1,1), (0,1)
  constexpr std::array<std::array<int, 2>, 4> corner{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};
  for (double s : gauss2_points) {
    for (double r : gauss2_points) {
      std::array<double, 4> phi{};
      std::array<std::array<double, 2>, 4> grad{};
      for (int k = 0; k < 4; ++k) {
        const double bx = corner[k][0] ? s : 1.0 - s;
        const double by = corner[k][1] ? r : 1.0 - r;
        const double dbx = (corner[k][0] ? 1.0 : -1.0) / hx;
        const double dby = (corner[k][1] ? 1.0 : -1.0) / hy;
        phi[k] = bx * by;
        grad[k] = {dbx * by, bx * dby};
      }
      double a0 = 0.0;
      for (int k = 0; k < 4; ++k) { a0 += phi[k] * form.reaction[nodes[k]]; }
      const double w = 0.25 * hx * hy;
      for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
          const double agrad = a.a11 * grad[i][0] * grad[j][0] + a.a12 * grad[i][0] * grad[j][1] +
                               a.a12 * grad[i][1] * grad[j][0] + a.a22 * grad[i][1] * grad[j][1];
          em.stiffness(i, j) += w * (agrad + a0 * phi[i] * phi[j]);
          em.mass(i, j) += w * phi[i] * phi[j];
          em.gradient_gram(i, j) += w * (grad[i][0] * grad[j][0] + grad[i][1] * grad[j][1]);
        }
      }
    }
  }
  return em;
}

/// Sampled check of  Lambda_A |xi|^2 <= a_ij xi_i xi_j  on every element.
inline bool ellipticity_holds(const SpatialMesh & mesh, const EllipticForm & form, double * worst = nullptr)
{
  constexpr int directions = 32;
  double min_ratio = std::numeric_limits<double>::infinity();
  for (const auto & a : form.diffusion) {
    for (int k = 0; k < (mesh.dimension == 1 ? 1 : directions); ++k) {
      const double th = std::numbers::pi * k / directions;
      const double x0 = mesh.dimension == 1 ? 1.0 : std::cos(th);
      const double x1 = mesh.dimension == 1 ? 0.0 : std::sin(th);
      min_ratio = std::min(min_ratio, a.quadratic(mesh.dimension, x0, x1));
    }
  }
  if (worst) { *worst = min_ratio; }
  return form.ellipticity > 0.0 && min_ratio >= form.ellipticity * (1.0 - 1e-12);
}

}  // namespace detail

/**
 * @brief Assemble stiffness, mass, lumped mass and control mass.
 *
 * Throws MeshError on degenerate geometry and AssumptionError when the sampled ellipticity bound
 * or the sign of a_0 fails.
 */
inline Operators assemble_operators(const SpatialMesh & mesh, const EllipticForm & form)
{
  mesh.validate();
  if (form.diffusion.size() != mesh.num_elements() || form.reaction.size() != mesh.num_nodes()) {
    throw AssumptionError("elliptic form coefficients do not match the mesh");
  }
  if (!detail::ellipticity_holds(mesh, form)) {
    throw AssumptionError("ellipticity violated: Λ_A|ξ|² ≤ Σ a_ij ξ_i ξ_j fails on a sampled direction");
  }
  for (double a0 : form.reaction) {
    if (a0 < 0.0) { throw AssumptionError("reaction coefficient violates a_0 ≥ 0"); }
  }

  using Triplet = Eigen::Triplet<double>;
  std::vector<Triplet> k_trip, m_trip, g_trip, obs_trip, ctrl_trip;
  const auto n = static_cast<Eigen::Index>(mesh.num_nodes());

  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto em = detail::element_matrices(mesh, form, e);
    const auto & nodes = mesh.elements[e];
    const bool in_obs = mesh.element_in(e, true);
    const bool in_ctrl = mesh.element_in(e, false);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      for (std::size_t j = 0; j < nodes.size(); ++j) {
        const auto ii = static_cast<Eigen::Index>(i);
        const auto jj = static_cast<Eigen::Index>(j);
        k_trip.emplace_back(nodes[i], nodes[j], em.stiffness(ii, jj));
        m_trip.emplace_back(nodes[i], nodes[j], em.mass(ii, jj));
        g_trip.emplace_back(nodes[i], nodes[j], em.gradient_gram(ii, jj));
        if (in_obs) { obs_trip.emplace_back(nodes[i], nodes[j], em.mass(ii, jj)); }
        if (in_ctrl) { ctrl_trip.emplace_back(nodes[i], nodes[j], em.mass(ii, jj)); }
      }
    }
  }

  Operators ops;
  const auto build = [n](const std::vector<Triplet> & trip) {
    SparseMatrix a(n, n);
    a.setFromTriplets(trip.begin(), trip.end());
    a.makeCompressed();
    return a;
  };
  ops.stiffness = build(k_trip);
  ops.mass = build(m_trip);
  ops.gradient_gram = build(g_trip);
  ops.observation_mass = build(obs_trip);

  ops.lumped_mass = ops.mass * Vector::Ones(n);
  const SparseMatrix omega_mass = build(ctrl_trip);
  const Vector omega_lumped = omega_mass * Vector::Ones(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (mesh.in_omega[i] && omega_lumped[i] > 0.0) { ops.control_nodes.push_back(static_cast<int>(i)); }
  }
  ops.control_mass.resize(static_cast<Eigen::Index>(ops.control_nodes.size()));
  for (std::size_t k = 0; k < ops.control_nodes.size(); ++k) {
    ops.control_mass[static_cast<Eigen::Index>(k)] = omega_lumped[ops.control_nodes[k]];
  }
  return ops;
}

}  // namespace horizonopt

#endif  // HORIZONOPT__OPERATORS_HPP_
