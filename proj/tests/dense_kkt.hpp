#ifndef HORIZONOPT_TESTS_DENSE_KKT_HPP_
#define HORIZONOPT_TESTS_DENSE_KKT_HPP_

// Dense reference solver for the linear-quadratic case (f = 0).  It rebuilds the control-to-state
// map with its own dense time stepping, forms the reduced Hessian and solves the KKT system
// directly (box: primal active set).  Only the assembled spatial matrices are shared.

#include <Eigen/Dense>
#include <algorithm>
#include <stdexcept>

#include "horizonopt/horizonopt.hpp"

namespace hzt {

struct DenseLQ
{
  Eigen::MatrixXd H;
  Eigen::VectorXd c;
  Eigen::Index n{0}, m{0};
  std::size_t N{0};
  /// sigma_c weight of each stacked control entry (dt e^{-sigma_c t} Mc)
  Eigen::VectorXd control_weight;
};

inline DenseLQ dense_lq(const horizonopt::DiscreteProblem & P)
{
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  if (P.f().name != "zero") { throw std::invalid_argument("dense oracle needs f = 0"); }
  const auto & ops = P.ops();
  const auto & d = P.discounts();
  const double dt = P.grid().step;
  DenseLQ L;
  L.n = ops.num_nodes();
  L.m = ops.num_controls();
  L.N = P.grid().num_steps;
  const Eigen::Index n = L.n, m = L.m;
  const auto N = static_cast<Eigen::Index>(L.N);

  const MatrixXd M = MatrixXd(ops.mass);
  const MatrixXd A = M / dt + MatrixXd(ops.stiffness);
  const MatrixXd Mobs = MatrixXd(ops.observation_mass);
  const Eigen::PartialPivLU<MatrixXd> lu(A);
  const MatrixXd T = lu.solve(M / dt);
  MatrixXd B = MatrixXd::Zero(n, m);
  for (Eigen::Index k = 0; k < m; ++k) { B(ops.control_nodes[k], k) = ops.control_mass[k]; }
  const MatrixXd AB = lu.solve(B);

  // y = y_free + S u, blocks S_ij = T^{i-j} A^{-1} B
  MatrixXd S = MatrixXd::Zero(N * n, N * m);
  VectorXd y_free(N * n);
  VectorXd prev = P.spec().y0;
  for (Eigen::Index i = 0; i < N; ++i) {
    prev = lu.solve(M * prev / dt + M * P.source(static_cast<std::size_t>(i + 1)));
    y_free.segment(i * n, n) = prev;
    MatrixXd blk = AB;
    for (Eigen::Index j = i; j >= 0; --j) {
      S.block(i * n, j * m, n, m) = blk;
      blk = T * blk;
    }
  }

  MatrixXd W = MatrixXd::Zero(N * n, N * n);
  VectorXd r(N * n);
  L.control_weight.resize(N * m);
  MatrixXd R = MatrixXd::Zero(N * m, N * m);
  for (Eigen::Index i = 0; i < N; ++i) {
    const double t = dt * static_cast<double>(i + 1);
    W.block(i * n, i * n, n, n) = dt * std::exp(-d.sigma_s * t) * Mobs;
    r.segment(i * n, n) = y_free.segment(i * n, n) - P.target(static_cast<std::size_t>(i + 1));
    for (Eigen::Index k = 0; k < m; ++k) {
      L.control_weight[i * m + k] = dt * std::exp(-d.sigma_c * t) * ops.control_mass[k];
      R(i * m + k, i * m + k) = P.nu() * L.control_weight[i * m + k];
    }
  }
  L.H = S.transpose() * W * S + R;
  L.c = S.transpose() * W * r;
  return L;
}

inline horizonopt::Trajectory unstack(const horizonopt::DiscreteProblem & P, const DenseLQ & L, const Eigen::VectorXd & u)
{
  auto out = P.zero_control();
  for (std::size_t i = 1; i <= L.N; ++i) { out[i] = u.segment(static_cast<Eigen::Index>(i - 1) * L.m, L.m); }
  return out;
}

/// Unconstrained minimizer of the reduced quadratic.
inline Eigen::VectorXd dense_unconstrained(const DenseLQ & L) { return L.H.ldlt().solve(-L.c); }

/**
 * Primal active-set method for  min 1/2 u'Hu + c'u  s.t. a <= u <= b.  Each step solves the
 * subproblem on the free variables exactly; bounds are added when they block and released when
 * their multiplier has the wrong sign.  Throws when the result violates the KKT conditions.
 */
inline Eigen::VectorXd dense_box(const DenseLQ & L, double a, double b)
{
  using Eigen::VectorXd;
  const Eigen::Index k = L.H.rows();
  VectorXd u = dense_unconstrained(L).cwiseMax(a).cwiseMin(b);
  // -1 at lower bound, +1 at upper bound, 0 free
  std::vector<int> bound(static_cast<std::size_t>(k), 0);
  for (Eigen::Index j = 0; j < k; ++j) { bound[j] = u[j] == a ? -1 : (u[j] == b ? 1 : 0); }

  bool subproblem_solved = false;
  for (int it = 0; it < 20000; ++it) {
    if (subproblem_solved) {
      const VectorXd g = L.H * u + L.c;
      Eigen::Index worst = -1;
      double worst_val = 0.0;
      for (Eigen::Index j = 0; j < k; ++j) {
        // releasing a bound helps when the gradient points into the box
        const double v = bound[j] < 0 ? -g[j] : (bound[j] > 0 ? g[j] : 0.0);
        if (v > worst_val) {
          worst_val = v;
          worst = j;
        }
      }
      if (worst < 0) { break; }
      bound[worst] = 0;
      subproblem_solved = false;
      continue;
    }
    std::vector<Eigen::Index> free;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (bound[j] == 0) { free.push_back(j); }
    }
    const auto nf = static_cast<Eigen::Index>(free.size());
    if (nf == 0) {
      subproblem_solved = true;
      continue;
    }
    Eigen::MatrixXd Hff(nf, nf);
    VectorXd rhs(nf);
    const VectorXd g = L.H * u + L.c;
    for (Eigen::Index p = 0; p < nf; ++p) {
      rhs[p] = -g[free[p]];
      for (Eigen::Index q = 0; q < nf; ++q) { Hff(p, q) = L.H(free[p], free[q]); }
    }
    const VectorXd step = Hff.ldlt().solve(rhs);
    double alpha = 1.0;
    Eigen::Index blocking = -1;
    for (Eigen::Index p = 0; p < nf; ++p) {
      const double uj = u[free[p]], sj = step[p];
      const double lim = sj > 0.0 ? (b - uj) / sj : (sj < 0.0 ? (a - uj) / sj : 1.0);
      if (lim < alpha) {
        alpha = lim;
        blocking = free[p];
      }
    }
    for (Eigen::Index p = 0; p < nf; ++p) { u[free[p]] += alpha * step[p]; }
    if (blocking >= 0) {
      const bool upper = step[std::find(free.begin(), free.end(), blocking) - free.begin()] > 0.0;
      u[blocking] = upper ? b : a;
      bound[blocking] = upper ? 1 : -1;
    } else {
      subproblem_solved = true;
    }
  }
  const VectorXd g = L.H * u + L.c;
  const double scale = g.cwiseAbs().maxCoeff();
  for (Eigen::Index j = 0; j < k; ++j) {
    const bool ok = (u[j] > a && u[j] < b && std::abs(g[j]) <= 1e-10 * scale) ||
                    (u[j] == a && g[j] >= -1e-10 * scale) || (u[j] == b && g[j] <= 1e-10 * scale);
    if (!ok || u[j] < a || u[j] > b) { throw std::runtime_error("dense box oracle: KKT conditions violated"); }
  }
  return u;
}

}  // namespace hzt

#endif  // HORIZONOPT_TESTS_DENSE_KKT_HPP_
