#pragma once

// Penalized particle descent.  A cloud of K weighted particles carries a
// discrete candidate plan; weights are a softmax over logits so they stay
// positive and sum to one by construction.  The objective
//
//   F(state) = sum_k p_k c(point_k) + (1/eta) * || moment residuals ||^2
//
// is driven down by alternated projected-gradient steps (logits block, then
// one block per marginal's coordinates) with Armijo backtracking.  Positions
// are clamped to each marginal's box after every step.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mcot/measures.hpp"
#include "mcot/problem.hpp"
#include "mcot/prng.hpp"
#include "mcot/test_functions.hpp"

namespace mcot {

struct ParticleState {
  Eigen::MatrixXd positions;  // K x point_dimension, row k = one support point
  Eigen::VectorXd logits;     // K

  int particle_count() const { return static_cast<int>(positions.rows()); }

  // Softmax weights, shifted by the max logit for overflow safety.
  Eigen::VectorXd weights() const {
    const double top = logits.maxCoeff();
    Eigen::VectorXd w = (logits.array() - top).exp();
    return w / w.sum();
  }
};

struct PGDParams {
  double eta = 0.01;             // penalty scale; the coefficient in F is 1/eta
  long max_outer = 50000;        // outer-iteration cap
  double grad_tol = 1e-6;        // stop when projected-gradient sup-norm drops below
  double armijo_decrease = 1e-4; // sufficient-decrease fraction
  double armijo_backtrack = 0.5; // step shrink factor
  double armijo_init = 1.0;      // first trial step per block
  double armijo_min_step = 1e-12;
  std::uint64_t seed = 0;
  int K = 0;                     // particle count; 0 picks the variant default
};

// Particle budgets sized to the discrete-minimizer support guarantees: number
// of scalar constraints plus two, except the symmetric variant which keeps
// one block of particles per marginal.
inline int default_particle_count(const MCOTProblem& prob) {
  if (prob.symmetric()) return prob.marginal_count() * prob.constraint_count() + 2;
  return prob.constraint_count() + 2;
}

// Positions i.i.d. uniform in each marginal's box (particle-major, coordinate
// within particle), logits zero so the initial weights are uniform.
inline ParticleState init_particles(const MCOTProblem& prob, int K, std::uint64_t seed) {
  if (K < 1) throw std::invalid_argument("init_particles: need at least one particle");
  ParticleState s;
  s.positions.resize(K, prob.point_dimension());
  s.logits = Eigen::VectorXd::Zero(K);
  Prng rng(seed);
  for (int k = 0; k < K; ++k) {
    for (int i = 0; i < prob.marginal_count(); ++i) {
      const int off = prob.coordinate_offset(i);
      const int dim = prob.constraints(static_cast<std::size_t>(i)).family.dimension();
      for (int d = 0; d < dim; ++d)
        s.positions(k, off + d) = rng.uniform(prob.box_lo(i), prob.box_hi(i));
    }
  }
  return s;
}

namespace detail {

// Constraint-row values at one point, written into `vals` (size
// constraint_count).  Layout matches constraint_values(): marginal-major
// blocks, averaged across coordinate blocks in symmetric mode, martingale
// rows last.
inline void rows_at_point(const MCOTProblem& prob, const double* pt, double* vals) {
  int row = 0;
  if (prob.symmetric()) {
    const TestFamily& f = prob.constraints(0).family;
    const int M = prob.marginal_count();
    for (int n = 0; n < f.size(); ++n) {
      double avg = 0.0;
      for (int i = 0; i < M; ++i) avg += family_eval_block(f, n, pt + prob.coordinate_offset(i));
      vals[row++] = avg / M;
    }
  } else {
    for (int i = 0; i < prob.marginal_count(); ++i) {
      const TestFamily& f = prob.constraints(static_cast<std::size_t>(i)).family;
      for (int n = 0; n < f.size(); ++n)
        vals[row++] = family_eval_block(f, n, pt + prob.coordinate_offset(i));
    }
  }
  if (prob.has_martingale()) {
    const TestFamily& bumps = prob.martingale();
    for (int l = 0; l < bumps.size(); ++l) vals[row++] = bumps.eval(l, pt[0]) * (pt[1] - pt[0]);
  }
}

// One family member's gradient with respect to its own coordinate block.
inline void family_grad_block(const TestFamily& f, int index, const double* coords,
                              double* grad) {
  if (f.dimension() == 1) {
    grad[0] = f.eval_derivative(index, coords[0]);
  } else {
    const Grad2 g = f.gradient2(index, coords[0], coords[1]);
    grad[0] = g.dx;
    grad[1] = g.dy;
  }
}

// Values and Jacobian (rows x point_dimension, row-major) of the constraint
// rows at one point.
inline void rows_and_jacobian_at_point(const MCOTProblem& prob, const double* pt, double* vals,
                                       double* jac) {
  const int dim = prob.point_dimension();
  const int rows = prob.constraint_count();
  std::fill(jac, jac + static_cast<std::size_t>(rows) * dim, 0.0);
  int row = 0;
  double g[2];
  if (prob.symmetric()) {
    const TestFamily& f = prob.constraints(0).family;
    const int M = prob.marginal_count();
    const int fdim = f.dimension();
    for (int n = 0; n < f.size(); ++n) {
      double avg = 0.0;
      for (int i = 0; i < M; ++i) {
        const int off = prob.coordinate_offset(i);
        avg += family_eval_block(f, n, pt + off);
        family_grad_block(f, n, pt + off, g);
        for (int d = 0; d < fdim; ++d) jac[static_cast<std::size_t>(row) * dim + off + d] = g[d] / M;
      }
      vals[row++] = avg / M;
    }
  } else {
    for (int i = 0; i < prob.marginal_count(); ++i) {
      const TestFamily& f = prob.constraints(static_cast<std::size_t>(i)).family;
      const int off = prob.coordinate_offset(i);
      const int fdim = f.dimension();
      for (int n = 0; n < f.size(); ++n) {
        vals[row] = family_eval_block(f, n, pt + off);
        family_grad_block(f, n, pt + off, g);
        for (int d = 0; d < fdim; ++d) jac[static_cast<std::size_t>(row) * dim + off + d] = g[d];
        ++row;
      }
    }
  }
  if (prob.has_martingale()) {
    const TestFamily& bumps = prob.martingale();
    const double x = pt[0], y = pt[1];
    for (int l = 0; l < bumps.size(); ++l) {
      const double chi = bumps.eval(l, x);
      vals[row] = chi * (y - x);
      jac[static_cast<std::size_t>(row) * dim + 0] = bumps.eval_derivative(l, x) * (y - x) - chi;
      jac[static_cast<std::size_t>(row) * dim + 1] = chi;
      ++row;
    }
  }
}

// Cost gradient with respect to all point coordinates.  The distance-power
// cost uses the zero subgradient when both halves coincide and the exponent
// is below two (the cost is minimal there, so the step stays well defined).
inline void cost_gradient(const CostFunction& cost, const double* pt, int dim, double* grad) {
  std::fill(grad, grad + dim, 0.0);
  switch (cost.kind()) {
    case CostKind::PowerDistance: {
      const int half = dim / 2;
      double s = 0.0;
      for (int d = 0; d < half; ++d) {
        const double delta = pt[d] - pt[half + d];
        s += delta * delta;
      }
      const double p = cost.power();
      if (s == 0.0) return;
      const double factor = p * std::pow(s, 0.5 * p - 1.0);
      for (int d = 0; d < half; ++d) {
        const double delta = pt[d] - pt[half + d];
        grad[d] = factor * delta;
        grad[half + d] = -factor * delta;
      }
      return;
    }
    case CostKind::Quadratic2D:
      for (int d = 0; d < 2; ++d) {
        const double delta = pt[d] - pt[2 + d];
        grad[d] = 2.0 * delta;
        grad[2 + d] = -2.0 * delta;
      }
      return;
    case CostKind::Coulomb: {
      const int blocks = cost.marginal_count();
      const int bdim = dim / blocks;
      for (int i = 0; i < blocks; ++i) {
        for (int j = i + 1; j < blocks; ++j) {
          double s = 0.0;
          for (int d = 0; d < bdim; ++d) {
            const double delta = pt[i * bdim + d] - pt[j * bdim + d];
            s += delta * delta;
          }
          const double dist = std::sqrt(s);
          const double factor = 1.0 / (dist * dist * dist);
          for (int d = 0; d < bdim; ++d) {
            const double delta = pt[i * bdim + d] - pt[j * bdim + d];
            grad[i * bdim + d] -= factor * delta;
            grad[j * bdim + d] += factor * delta;
          }
        }
      }
      return;
    }
    case CostKind::Custom:
      throw std::logic_error("cost_gradient: custom costs expose no derivative");
  }
}

// Descent needs derivatives of every test function; cell indicators are
// discontinuous and custom costs are black boxes, so both are rejected.
inline void require_differentiable(const MCOTProblem& prob) {
  for (int i = 0; i < prob.marginal_count(); ++i) {
    if (prob.constraints(static_cast<std::size_t>(i)).family.kind() ==
        FamilyKind::PiecewiseConstant)
      throw std::logic_error(
          "penalized descent: cell-indicator families are not differentiable");
  }
  if (prob.cost().kind() == CostKind::Custom)
    throw std::logic_error("penalized descent: custom costs expose no derivative");
}

struct ObjectiveScratch {
  Eigen::VectorXd residual;
  std::vector<double> vals;
  std::vector<double> pt;
  std::vector<double> targets;

  explicit ObjectiveScratch(const MCOTProblem& prob)
      : residual(prob.constraint_count()),
        vals(static_cast<std::size_t>(prob.constraint_count())),
        pt(static_cast<std::size_t>(prob.point_dimension())),
        targets(constraint_targets(prob)) {}
};

// Weighted cost term and residual vector of a state, sharing one scratch.
inline double cost_and_residual(const MCOTProblem& prob, const ParticleState& s,
                                const Eigen::VectorXd& w, ObjectiveScratch& scratch) {
  const int rows = prob.constraint_count();
  const int dim = prob.point_dimension();
  for (int m = 0; m < rows; ++m)
    scratch.residual(m) = -scratch.targets[static_cast<std::size_t>(m)];
  double cost_term = 0.0;
  for (int k = 0; k < s.particle_count(); ++k) {
    for (int d = 0; d < dim; ++d) scratch.pt[static_cast<std::size_t>(d)] = s.positions(k, d);
    rows_at_point(prob, scratch.pt.data(), scratch.vals.data());
    for (int m = 0; m < rows; ++m) scratch.residual(m) += w(k) * scratch.vals[static_cast<std::size_t>(m)];
    cost_term += w(k) * prob.cost()(scratch.pt);
  }
  return cost_term;
}

}  // namespace detail

struct ObjectiveParts {
  double objective = 0.0;
  double cost = 0.0;
  double penalty = 0.0;
};

inline ObjectiveParts penalized_parts(const MCOTProblem& prob, const ParticleState& s,
                                      double eta) {
  if (eta <= 0.0) throw std::invalid_argument("penalized_parts: eta must be positive");
  if (s.positions.rows() != s.logits.size())
    throw std::invalid_argument("penalized_parts: one logit per particle required");
  if (s.positions.cols() != prob.point_dimension())
    throw std::invalid_argument("penalized_parts: position dimension mismatch");
  detail::ObjectiveScratch scratch(prob);
  ObjectiveParts parts;
  parts.cost = detail::cost_and_residual(prob, s, s.weights(), scratch);
  parts.penalty = scratch.residual.squaredNorm() / eta;
  parts.objective = parts.cost + parts.penalty;
  return parts;
}

inline double penalized_objective(const MCOTProblem& prob, const ParticleState& s, double eta) {
  return penalized_parts(prob, s, eta).objective;
}

struct PGDGradient {
  Eigen::MatrixXd positions;  // same shape as state.positions
  Eigen::VectorXd logits;
};

// Analytic gradient of F.  With residual vector R, row values v_k and row
// Jacobians J_k at particle k:
//   dF/dx_k = p_k [ grad c(point_k) + (2/eta) J_k^T R ],
//   dF/da_k = p_k (g_k - sum_j p_j g_j),   g_k = c_k + (2/eta) v_k . R.
inline PGDGradient penalized_gradient(const MCOTProblem& prob, const ParticleState& s,
                                      double eta) {
  detail::require_differentiable(prob);
  if (eta <= 0.0) throw std::invalid_argument("penalized_gradient: eta must be positive");
  const int K = s.particle_count();
  const int dim = prob.point_dimension();
  const int rows = prob.constraint_count();
  const Eigen::VectorXd w = s.weights();

  detail::ObjectiveScratch scratch(prob);
  std::vector<double> costs(static_cast<std::size_t>(K));
  {
    // First pass: residual vector and per-particle costs.
    for (int m = 0; m < rows; ++m)
      scratch.residual(m) = -scratch.targets[static_cast<std::size_t>(m)];
    for (int k = 0; k < K; ++k) {
      for (int d = 0; d < dim; ++d) scratch.pt[static_cast<std::size_t>(d)] = s.positions(k, d);
      detail::rows_at_point(prob, scratch.pt.data(), scratch.vals.data());
      for (int m = 0; m < rows; ++m)
        scratch.residual(m) += w(k) * scratch.vals[static_cast<std::size_t>(m)];
      costs[static_cast<std::size_t>(k)] = prob.cost()(scratch.pt);
    }
  }

  PGDGradient grad;
  grad.positions.resize(K, dim);
  grad.logits.resize(K);
  std::vector<double> jac(static_cast<std::size_t>(rows) * dim);
  std::vector<double> cgrad(static_cast<std::size_t>(dim));
  Eigen::VectorXd gvec(K);
  const double two_over_eta = 2.0 / eta;
  for (int k = 0; k < K; ++k) {
    for (int d = 0; d < dim; ++d) scratch.pt[static_cast<std::size_t>(d)] = s.positions(k, d);
    detail::rows_and_jacobian_at_point(prob, scratch.pt.data(), scratch.vals.data(), jac.data());
    detail::cost_gradient(prob.cost(), scratch.pt.data(), dim, cgrad.data());
    double dot_vr = 0.0;
    for (int m = 0; m < rows; ++m)
      dot_vr += scratch.vals[static_cast<std::size_t>(m)] * scratch.residual(m);
    gvec(k) = costs[static_cast<std::size_t>(k)] + two_over_eta * dot_vr;
    for (int d = 0; d < dim; ++d) {
      double jt_r = 0.0;
      for (int m = 0; m < rows; ++m)
        jt_r += jac[static_cast<std::size_t>(m) * dim + d] * scratch.residual(m);
      grad.positions(k, d) = w(k) * (cgrad[static_cast<std::size_t>(d)] + two_over_eta * jt_r);
    }
  }
  const double mean_g = w.dot(gvec);
  for (int k = 0; k < K; ++k) grad.logits(k) = w(k) * (gvec(k) - mean_g);
  return grad;
}

struct PGDTraceRow {
  long iter = 0;
  double objective = 0.0;
  double cost = 0.0;
  double penalty = 0.0;
  double grad_norm = 0.0;
};

struct PGDResult {
  std::vector<PGDTraceRow> trace;
  ParticleState state;
  bool converged = false;
  long iterations = 0;
};

namespace detail {

// Clamp the coordinate columns of marginal block `b` into its box.
inline void project_block(const MCOTProblem& prob, int b, Eigen::MatrixXd& positions) {
  const int off = prob.coordinate_offset(b);
  const int bdim = prob.constraints(static_cast<std::size_t>(b)).family.dimension();
  const double lo = prob.box_lo(b), hi = prob.box_hi(b);
  for (int d = 0; d < bdim; ++d) {
    auto col = positions.col(off + d);
    for (int k = 0; k < positions.rows(); ++k) col(k) = std::clamp(col(k), lo, hi);
  }
}

// Projected-gradient sup-norm: position coordinates measure the clamped step
// x - P(x - g), logits are unconstrained.
inline double projected_gradient_norm(const MCOTProblem& prob, const ParticleState& s,
                                      const PGDGradient& g) {
  double norm = g.logits.size() > 0 ? g.logits.cwiseAbs().maxCoeff() : 0.0;
  for (int b = 0; b < prob.marginal_count(); ++b) {
    const int off = prob.coordinate_offset(b);
    const int bdim = prob.constraints(static_cast<std::size_t>(b)).family.dimension();
    const double lo = prob.box_lo(b), hi = prob.box_hi(b);
    for (int k = 0; k < s.positions.rows(); ++k) {
      for (int d = 0; d < bdim; ++d) {
        const double x = s.positions(k, off + d);
        const double step = x - std::clamp(x - g.positions(k, off + d), lo, hi);
        norm = std::max(norm, std::abs(step));
      }
    }
  }
  return norm;
}

}  // namespace detail

// Alternated projected-gradient descent with Armijo backtracking per block
// (logits first, then each marginal's coordinates).  Stops when the
// projected-gradient sup-norm falls below grad_tol (converged) or the
// iteration cap is hit; a failed line search (no sufficient decrease above
// the minimum step) returns immediately with converged = false.
inline PGDResult pgd_run(const MCOTProblem& prob, const PGDParams& params,
                         std::optional<ParticleState> init = std::nullopt) {
  detail::require_differentiable(prob);
  if (params.eta <= 0.0) throw std::invalid_argument("pgd_run: eta must be positive");
  if (params.max_outer < 1) throw std::invalid_argument("pgd_run: need at least one iteration");
  const int K = params.K > 0 ? params.K : default_particle_count(prob);

  PGDResult result;
  result.state = init ? std::move(*init) : init_particles(prob, K, params.seed);
  if (result.state.positions.cols() != prob.point_dimension())
    throw std::invalid_argument("pgd_run: initial state dimension mismatch");
  for (int b = 0; b < prob.marginal_count(); ++b)
    detail::project_block(prob, b, result.state.positions);

  ObjectiveParts parts = penalized_parts(prob, result.state, params.eta);
  const int blocks = 1 + prob.marginal_count();  // logits + marginal coordinates
  for (long iter = 1; iter <= params.max_outer; ++iter) {
    for (int blk = 0; blk < blocks; ++blk) {
      const PGDGradient grad = penalized_gradient(prob, result.state, params.eta);
      double t = params.armijo_init;
      while (true) {
        ParticleState cand = result.state;
        double predicted = 0.0;
        if (blk == 0) {
          cand.logits -= t * grad.logits;
          predicted = grad.logits.squaredNorm() * t;
        } else {
          const int b = blk - 1;
          const int off = prob.coordinate_offset(b);
          const int bdim = prob.constraints(static_cast<std::size_t>(b)).family.dimension();
          cand.positions.block(0, off, cand.positions.rows(), bdim) -=
              t * grad.positions.block(0, off, cand.positions.rows(), bdim);
          detail::project_block(prob, b, cand.positions);
          for (int k = 0; k < cand.positions.rows(); ++k)
            for (int d = 0; d < bdim; ++d)
              predicted += grad.positions(k, off + d) *
                           (result.state.positions(k, off + d) - cand.positions(k, off + d));
        }
        const ObjectiveParts cand_parts = penalized_parts(prob, cand, params.eta);
        if (cand_parts.objective <= parts.objective - params.armijo_decrease * predicted) {
          result.state = std::move(cand);
          parts = cand_parts;
          break;
        }
        t *= params.armijo_backtrack;
        if (t < params.armijo_min_step) {
          result.trace.push_back({iter, parts.objective, parts.cost, parts.penalty,
                                  detail::projected_gradient_norm(
                                      prob, result.state,
                                      penalized_gradient(prob, result.state, params.eta))});
          result.iterations = iter;
          result.converged = false;
          return result;
        }
      }
    }
    const PGDGradient grad = penalized_gradient(prob, result.state, params.eta);
    const double norm = detail::projected_gradient_norm(prob, result.state, grad);
    result.trace.push_back({iter, parts.objective, parts.cost, parts.penalty, norm});
    result.iterations = iter;
    if (norm < params.grad_tol) {
      result.converged = true;
      return result;
    }
  }
  result.converged = false;
  return result;
}

struct TransportAtom {
  std::vector<double> source;
  std::vector<double> target;
  double weight = 0.0;
};

// Particle cloud as a transport map sketch: one (source, target, weight) row
// per particle, heaviest first (ties keep particle order).
inline std::vector<TransportAtom> transport_map_summary(const MCOTProblem& prob,
                                                        const ParticleState& s) {
  if (prob.marginal_count() != 2 || prob.symmetric())
    throw std::invalid_argument("transport_map_summary: needs a plain two-marginal state");
  const int split = prob.coordinate_offset(1);
  const int dim = prob.point_dimension();
  const Eigen::VectorXd w = s.weights();
  std::vector<TransportAtom> atoms(static_cast<std::size_t>(s.particle_count()));
  for (int k = 0; k < s.particle_count(); ++k) {
    TransportAtom& a = atoms[static_cast<std::size_t>(k)];
    a.weight = w(k);
    for (int d = 0; d < split; ++d) a.source.push_back(s.positions(k, d));
    for (int d = split; d < dim; ++d) a.target.push_back(s.positions(k, d));
  }
  std::stable_sort(atoms.begin(), atoms.end(),
                   [](const TransportAtom& a, const TransportAtom& b) { return a.weight > b.weight; });
  return atoms;
}

// Moments of the planar mesh family against a (non-degenerate) Gaussian,
// integrated with a tensor grid of 32-node Gauss-Legendre panels, `subpanels`
// per mesh cell per axis.  The mesh functions bend along diagonal lines, so
// no axis-aligned cut isolates their gradient jumps exactly; uniform
// refinement converges at roughly eighth-digit accuracy for the default,
// far tighter than anything the soft planar-cost checks need.
inline std::vector<double> gaussian_mesh_targets(const TestFamily& family,
                                                 const Eigen::Vector2d& mean,
                                                 const Eigen::Matrix2d& cov,
                                                 int subpanels = 8) {
  if (family.kind() != FamilyKind::Mesh2D)
    throw std::invalid_argument("gaussian_mesh_targets: needs the planar mesh family");
  if (subpanels < 1) throw std::invalid_argument("gaussian_mesh_targets: subpanels must be >= 1");
  const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
  if (det <= 0.0 || cov(0, 0) <= 0.0 || std::abs(cov(0, 1) - cov(1, 0)) > 1e-12)
    throw std::invalid_argument("gaussian_mesh_targets: covariance must be symmetric positive definite");
  const Eigen::Matrix2d inv = cov.inverse();
  const double norm = 1.0 / (2.0 * M_PI * std::sqrt(det));
  const auto pdf = [&](double x, double y) {
    const Eigen::Vector2d z(x - mean(0), y - mean(1));
    return norm * std::exp(-0.5 * z.dot(inv * z));
  };

  const double lo = family.box_lo(), hi = family.box_hi();
  const int panels = family.grid_n() * subpanels;
  const double step = (hi - lo) / panels;
  std::vector<double> out(static_cast<std::size_t>(family.size()), 0.0);
  for (int i = 0; i < panels; ++i) {
    const double ax = lo + i * step;
    for (int j = 0; j < panels; ++j) {
      const double ay = lo + j * step;
      for (int idx = 0; idx < family.size(); ++idx) {
        out[static_cast<std::size_t>(idx)] += detail::gl32_panel(
            [&](double x) {
              return detail::gl32_panel(
                  [&](double y) { return family.eval2(idx, x, y) * pdf(x, y); }, ay, ay + step);
            },
            ax, ax + step);
      }
    }
  }
  return out;
}

}  // namespace mcot
