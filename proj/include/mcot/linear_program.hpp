#pragma once

// Small dense linear programming.
//
//   minimize    c'x
//   subject to  A x = b,  x >= 0
//
// solved by a two-phase primal simplex with Bland's anti-cycling rule on a
// dense tableau.  Problems here are tiny (tens of rows, at most a few hundred
// columns), so determinism and robustness are worth far more than speed:
// pivots follow the lowest-index rule, dependent equality rows are detected
// up front by rank-revealing QR, and every solution is checked against the
// feasibility tolerance before being reported Optimal.
//
// The same machinery powers
//   * transport programs over grid cells (weights_for_support),
//   * discrete measure reduction a la Tchakaloff/Caratheodory
//     (tchakaloff_reduce): a measure with more atoms than prescribed moments
//     is thinned along null-space directions until the atom count drops to
//     the moment count, preserving every prescribed moment exactly.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcot/measures.hpp"

namespace mcot {

struct LinearProgram {
  Eigen::VectorXd c;  // objective coefficients, length k
  Eigen::MatrixXd A;  // equality matrix, r x k
  Eigen::VectorXd b;  // right-hand side, length r
};

enum class LPStatus { Optimal, Infeasible, Unbounded };

struct LPSolution {
  LPStatus status = LPStatus::Infeasible;
  Eigen::VectorXd x;
  double objective = std::numeric_limits<double>::quiet_NaN();
  std::vector<int> basis;  // column indices of the final basis
};

namespace detail {

// Tableau-based simplex on  min c'x, Ax = b, x >= 0  where b >= 0 and an
// initial basis of identity columns is provided by the caller.  Returns false
// if the problem is unbounded.  Bland's rule: entering = lowest-index column
// with negative reduced cost, leaving = lowest row index among ratio ties.
inline bool simplex_iterate(Eigen::MatrixXd& T, std::vector<int>& basis, int ncols) {
  const int r = static_cast<int>(T.rows()) - 1;
  const double tol = 1e-11;
  for (long iter = 0;; ++iter) {
    if (iter > 100000) throw std::runtime_error("simplex: iteration limit exceeded");
    int enter = -1;
    for (int j = 0; j < ncols; ++j) {
      if (T(r, j) < -tol) {
        enter = j;
        break;
      }
    }
    if (enter < 0) return true;  // optimal
    int leave = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < r; ++i) {
      if (T(i, enter) > tol) {
        double ratio = T(i, ncols) / T(i, enter);
        if (ratio < best - 1e-15) {
          best = ratio;
          leave = i;
        } else if (ratio < best + 1e-15 && leave >= 0 && basis[i] < basis[leave]) {
          leave = i;  // Bland tie-break on the leaving variable index
        }
      }
    }
    if (leave < 0) return false;  // unbounded direction
    // Pivot on (leave, enter).
    T.row(leave) /= T(leave, enter);
    for (int i = 0; i <= r; ++i) {
      if (i != leave && std::abs(T(i, enter)) > 0.0) T.row(i) -= T(i, enter) * T.row(leave);
    }
    basis[leave] = enter;
  }
}

}  // namespace detail

// Solve the LP.  warm_basis, when given, is tried as a starting basis for
// phase II (it must index linearly independent columns); if it does not yield
// a feasible basic point the solver silently falls back to phase I.
inline LPSolution solve(const LinearProgram& lp, const std::vector<int>* warm_basis = nullptr) {
  const int k = static_cast<int>(lp.c.size());
  if (lp.A.cols() != k || lp.A.rows() != lp.b.size())
    throw std::runtime_error("solve: inconsistent LP dimensions");

  // Rank pre-pass: drop dependent equality rows (partition-of-unity rows make
  // the total-mass row redundant in every transport instance).  If the rhs is
  // not in the row space of the kept rows, the system is inconsistent.
  Eigen::MatrixXd At = lp.A.transpose();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(At);
  qr.setThreshold(1e-10);
  const int rank = static_cast<int>(qr.rank());
  std::vector<int> keep;
  {
    const auto& perm = qr.colsPermutation().indices();
    for (int i = 0; i < rank; ++i) keep.push_back(perm(i));
    std::sort(keep.begin(), keep.end());
  }
  Eigen::MatrixXd A(keep.size(), k);
  Eigen::VectorXd b(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    A.row(static_cast<int>(i)) = lp.A.row(keep[i]);
    b(static_cast<int>(i)) = lp.b(keep[i]);
  }
  if (rank < lp.A.rows()) {
    // Consistency of the dropped rows: rank([A|b]) must equal rank(A).
    Eigen::MatrixXd Ab(lp.A.rows(), k + 1);
    Ab.leftCols(k) = lp.A;
    Ab.col(k) = lp.b;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr2(Ab.transpose());
    qr2.setThreshold(1e-10);
    if (qr2.rank() > rank) {
      LPSolution s;
      s.status = LPStatus::Infeasible;
      return s;
    }
  }
  const int r = static_cast<int>(A.rows());

  // Normalize to b >= 0.
  for (int i = 0; i < r; ++i) {
    if (b(i) < 0) {
      A.row(i) = -A.row(i);
      b(i) = -b(i);
    }
  }

  const double feas_tol = 1e-9 * (1.0 + lp.b.cwiseAbs().maxCoeff());
  LPSolution sol;

  auto finish = [&](const Eigen::MatrixXd& T, const std::vector<int>& basis) {
    sol.x = Eigen::VectorXd::Zero(k);
    for (int i = 0; i < r; ++i) {
      if (basis[i] < k) sol.x(basis[i]) = T(i, k);
    }
    Eigen::VectorXd resid = lp.A * sol.x - lp.b;
    if (resid.cwiseAbs().maxCoeff() > feas_tol) {
      sol.status = LPStatus::Infeasible;
      return;
    }
    sol.objective = lp.c.dot(sol.x);
    sol.basis.assign(basis.begin(), basis.end());
    sol.status = LPStatus::Optimal;
  };

  // Warm start: basis columns from a previous solve on a nearby problem.
  if (warm_basis && static_cast<int>(warm_basis->size()) == r) {
    bool valid = true;
    for (int j : *warm_basis) valid = valid && j >= 0 && j < k;
    if (valid) {
      Eigen::MatrixXd B(r, r);
      for (int i = 0; i < r; ++i) B.col(i) = A.col((*warm_basis)[i]);
      Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
      if (lu.isInvertible()) {
        Eigen::VectorXd xb = lu.solve(b);
        if ((xb.array() >= -1e-11).all()) {
          // Feasible basic start: run phase II directly from it.
          Eigen::MatrixXd T(r + 1, k + 1);
          T.topLeftCorner(r, k) = lu.solve(A);
          T.topRightCorner(r, 1) = xb;
          std::vector<int> basis = *warm_basis;
          T.row(r).setZero();
          for (int j = 0; j < k; ++j) T(r, j) = lp.c(j);
          for (int i = 0; i < r; ++i) T.row(r) -= lp.c(basis[i]) * T.row(i);
          if (!detail::simplex_iterate(T, basis, k)) {
            sol.status = LPStatus::Unbounded;
            return sol;
          }
          finish(T, basis);
          if (sol.status == LPStatus::Optimal) return sol;
        }
      }
    }
  }

  // Phase I: artificial variables with unit cost.
  Eigen::MatrixXd T(r + 1, k + r + 1);
  T.setZero();
  T.topLeftCorner(r, k) = A;
  T.block(0, k, r, r).setIdentity();
  T.topRightCorner(r, 1) = b;
  std::vector<int> basis(r);
  for (int i = 0; i < r; ++i) basis[i] = k + i;
  // Phase-I objective: sum of artificials, expressed in reduced form.
  for (int i = 0; i < r; ++i) T.row(r) -= T.row(i);
  for (int i = 0; i < r; ++i) T(r, k + i) = 0.0;
  if (!detail::simplex_iterate(T, basis, k + r))
    throw std::runtime_error("solve: phase I reported unbounded (cannot happen)");
  if (-T(r, k + r) > feas_tol) {  // minimal artificial mass still positive
    sol.status = LPStatus::Infeasible;
    return sol;
  }
  // Drive leftover artificials out of the basis where possible.
  for (int i = 0; i < r; ++i) {
    if (basis[i] >= k) {
      int enter = -1;
      for (int j = 0; j < k; ++j) {
        if (std::abs(T(i, j)) > 1e-9) {
          enter = j;
          break;
        }
      }
      if (enter >= 0) {
        T.row(i) /= T(i, enter);
        for (int p = 0; p <= r; ++p) {
          if (p != i && std::abs(T(p, enter)) > 0.0) T.row(p) -= T(p, enter) * T.row(i);
        }
        basis[i] = enter;
      }
      // If the row is entirely zero over real columns it is redundant and the
      // artificial stays at level zero; harmless for phase II.
    }
  }

  // Phase II on the real objective; artificial columns are frozen out.
  const int ncols = k;  // artificials may remain basic at zero but never re-enter
  Eigen::MatrixXd T2(r + 1, k + 1);
  T2.topLeftCorner(r, k) = T.topLeftCorner(r, k);
  T2.topRightCorner(r, 1) = T.topRightCorner(r, 1);
  T2.row(r).setZero();
  for (int j = 0; j < k; ++j) T2(r, j) = lp.c(j);
  for (int i = 0; i < r; ++i) {
    if (basis[i] < k) T2.row(r) -= lp.c(basis[i]) * T2.row(i);
  }
  if (!detail::simplex_iterate(T2, basis, ncols)) {
    sol.status = LPStatus::Unbounded;
    return sol;
  }
  finish(T2, basis);
  return sol;
}

// Minimize sum_k p_k cost_k over weights p >= 0 subject to the given moment
// equality rows (one row per constraint) plus the total-mass row sum p = 1.
// Infeasibility signals that the support cannot carry the requested moments.
inline LPSolution weights_for_support(const Eigen::MatrixXd& constraint_rows,
                                      const Eigen::VectorXd& targets,
                                      const Eigen::VectorXd& cost_values,
                                      const std::vector<int>* warm_basis = nullptr) {
  const int k = static_cast<int>(cost_values.size());
  if (k == 0) throw std::runtime_error("weights_for_support: empty support");
  if (constraint_rows.cols() != k || constraint_rows.rows() != targets.size())
    throw std::runtime_error("weights_for_support: inconsistent constraint dimensions");
  LinearProgram lp;
  const int r = static_cast<int>(constraint_rows.rows());
  lp.A.resize(r + 1, k);
  lp.A.topRows(r) = constraint_rows;
  lp.A.row(r).setOnes();
  lp.b.resize(r + 1);
  lp.b.head(r) = targets;
  lp.b(r) = 1.0;
  lp.c = cost_values;
  return solve(lp, warm_basis);
}

// Caratheodory-style support reduction: thin a discrete measure to at most
// N0 atoms while preserving the N0 prescribed moments exactly, where
// lambda_eval maps an atom to its vector of moment coordinates (include the
// constant coordinate to preserve total mass).  When cost_eval is supplied
// its value is appended as an extra preserved coordinate, so the reduced
// measure carries exactly the original cost.  Inputs already within the atom
// budget are returned unchanged, which makes the operation idempotent.
inline DiscreteMeasure tchakaloff_reduce(
    const DiscreteMeasure& measure,
    const std::function<std::vector<double>(const std::vector<double>&)>& lambda_eval,
    const std::function<double(const std::vector<double>&)>& cost_eval = nullptr) {
  std::vector<std::vector<double>> pts = measure.points();
  std::vector<double> w = measure.weights();
  if (pts.empty()) return measure;

  const int n0 = static_cast<int>(lambda_eval(pts[0]).size());
  const int budget = cost_eval ? n0 + 1 : n0;  // cost is one more preserved coordinate
  auto coords = [&](const std::vector<double>& p) {
    std::vector<double> raw = lambda_eval(p);
    if (static_cast<int>(raw.size()) != n0)
      throw std::runtime_error("tchakaloff_reduce: lambda_eval length varies across atoms");
    Eigen::VectorXd v(budget);
    for (int i = 0; i < n0; ++i) v(i) = raw[static_cast<std::size_t>(i)];
    if (cost_eval) v(n0) = cost_eval(p);
    return v;
  };

  while (static_cast<int>(pts.size()) > budget) {
    const int K = static_cast<int>(pts.size());
    Eigen::MatrixXd V(budget, K);
    for (int j = 0; j < K; ++j) V.col(j) = coords(pts[j]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(V);
    lu.setThreshold(1e-12);
    Eigen::MatrixXd kernel = lu.kernel();
    if (kernel.cols() == 0 || kernel.col(0).cwiseAbs().maxCoeff() < 1e-14) break;
    Eigen::VectorXd gamma = kernel.col(0);
    // Pick the step direction that zeroes a weight while keeping the rest
    // non-negative: t = min over gamma_j > 0 of w_j / gamma_j.
    if ((gamma.array() <= 0.0).all()) gamma = -gamma;
    double t = std::numeric_limits<double>::infinity();
    for (int j = 0; j < K; ++j) {
      if (gamma(j) > 1e-14) t = std::min(t, w[j] / gamma(j));
    }
    std::vector<std::vector<double>> pts2;
    std::vector<double> w2;
    for (int j = 0; j < K; ++j) {
      double wj = w[j] - t * gamma(j);
      if (wj > 1e-14) {
        pts2.push_back(pts[j]);
        w2.push_back(wj);
      }
    }
    if (static_cast<int>(pts2.size()) == K) break;  // numerical stall; stop cleanly
    pts.swap(pts2);
    w.swap(w2);
  }
  return DiscreteMeasure(pts, w);
}

}  // namespace mcot
