#pragma once

// Problem assembly for moment-constrained transport.  A problem bundles one
// moment-constraint block per marginal (a test-function family plus its
// prescribed moments), an optional martingale block, a cost over concatenated
// atom coordinates, the support-size cap of the active variant, and an
// optional symmetric mode in which all marginals share one averaged family.
// On top of the record live the pure evaluation routines: signed constraint
// residuals of a discrete candidate measure, its (extended-real) cost, an
// admissibility check that produces a small feasible witness by linear
// programming over a representative grid, and a compact-support clamp that
// relocates stray atoms without changing any moment or increasing the cost.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mcot/linear_program.hpp"
#include "mcot/measures.hpp"
#include "mcot/test_functions.hpp"

namespace mcot {

enum class CostKind { PowerDistance, Quadratic2D, Coulomb, Custom };

// Cost of one atom, evaluated on the concatenated coordinates of all
// marginals.  Extended-real: Coulomb repulsion is +infinity whenever two
// coordinate blocks come within 1e-9 of each other (a finite value there
// would be overflow in disguise).  The stored Lipschitz constant is the
// per-argument bound on the default domain box, +infinity when unbounded.
class CostFunction {
 public:
  // |x - y|^p between the two halves of the point (Euclidean norm).
  static CostFunction power_distance(double p, double box_width = 1.0) {
    if (!(p >= 1.0)) throw std::invalid_argument("power_distance: p must be >= 1");
    CostFunction c(CostKind::PowerDistance);
    c.power_ = p;
    c.lipschitz_ = p * std::pow(box_width, p - 1.0);
    return c;
  }

  // Squared Euclidean distance between two planar coordinate pairs.
  static CostFunction quadratic2d(double box_width = 8.0) {
    CostFunction c(CostKind::Quadratic2D);
    c.power_ = 2.0;
    c.lipschitz_ = 2.0 * std::sqrt(2.0) * box_width;
    return c;
  }

  // Pairwise repulsion sum over i < j of 1 / |x_i - x_j| across the
  // marginal_count equal coordinate blocks of the point.
  static CostFunction coulomb(int marginal_count) {
    if (marginal_count < 2) throw std::invalid_argument("coulomb: need at least two marginals");
    CostFunction c(CostKind::Coulomb);
    c.blocks_ = marginal_count;
    c.lipschitz_ = std::numeric_limits<double>::infinity();
    return c;
  }

  static CostFunction custom(std::function<double(const std::vector<double>&)> fn,
                             double lipschitz = std::numeric_limits<double>::infinity()) {
    if (!fn) throw std::invalid_argument("custom: null cost function");
    CostFunction c(CostKind::Custom);
    c.fn_ = std::move(fn);
    c.lipschitz_ = lipschitz;
    return c;
  }

  CostKind kind() const { return kind_; }
  double power() const { return power_; }
  double lipschitz() const { return lipschitz_; }

  // Number of coordinate blocks the cost couples; 0 means unconstrained
  // (Custom costs accept any layout).
  int marginal_count() const {
    switch (kind_) {
      case CostKind::PowerDistance:
      case CostKind::Quadratic2D:
        return 2;
      case CostKind::Coulomb:
        return blocks_;
      case CostKind::Custom:
        return 0;
    }
    return 0;
  }

  double operator()(const std::vector<double>& point) const {
    switch (kind_) {
      case CostKind::PowerDistance: {
        if (point.empty() || point.size() % 2 != 0)
          throw std::invalid_argument("CostFunction: point is not two equal blocks");
        const std::size_t d = point.size() / 2;
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
          const double diff = point[i] - point[d + i];
          s += diff * diff;
        }
        if (power_ == 2.0) return s;
        if (power_ == 1.0) return std::sqrt(s);
        return std::pow(s, 0.5 * power_);
      }
      case CostKind::Quadratic2D: {
        if (point.size() != 4)
          throw std::invalid_argument("CostFunction: planar quadratic cost needs 4 coordinates");
        const double dx = point[0] - point[2];
        const double dy = point[1] - point[3];
        return dx * dx + dy * dy;
      }
      case CostKind::Coulomb: {
        if (point.empty() || point.size() % static_cast<std::size_t>(blocks_) != 0)
          throw std::invalid_argument("CostFunction: point does not split into equal blocks");
        const std::size_t d = point.size() / static_cast<std::size_t>(blocks_);
        double total = 0.0;
        for (int i = 0; i < blocks_; ++i) {
          for (int j = i + 1; j < blocks_; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
              const double diff = point[static_cast<std::size_t>(i) * d + k] -
                                  point[static_cast<std::size_t>(j) * d + k];
              s += diff * diff;
            }
            const double dist = std::sqrt(s);
            if (dist < 1e-9) return std::numeric_limits<double>::infinity();
            total += 1.0 / dist;
          }
        }
        return total;
      }
      case CostKind::Custom:
        return fn_(point);
    }
    throw std::logic_error("CostFunction: unknown kind");
  }

 private:
  explicit CostFunction(CostKind kind) : kind_(kind) {}

  CostKind kind_;
  double power_ = 0.0;
  int blocks_ = 2;
  double lipschitz_ = std::numeric_limits<double>::infinity();
  std::function<double(const std::vector<double>&)> fn_;
};

// One marginal's moment-constraint block: the family and the prescribed
// moment of each of its members.
struct MarginalConstraints {
  TestFamily family;
  std::vector<double> targets;
};

// Convenience: prescribe the exact moments of a 1D law.
inline MarginalConstraints marginal_constraints(const TestFamily& family, const Marginal1D& law) {
  return MarginalConstraints{family, family.moments(law)};
}

class MCOTProblem {
 public:
  MCOTProblem(std::vector<MarginalConstraints> marginals, CostFunction cost,
              bool symmetric = false, std::optional<TestFamily> martingale = std::nullopt)
      : marginals_(std::move(marginals)),
        cost_(std::move(cost)),
        symmetric_(symmetric),
        martingale_(std::move(martingale)) {
    if (marginals_.size() < 2)
      throw std::invalid_argument("MCOTProblem: need at least two marginals");
    for (const MarginalConstraints& mc : marginals_) {
      if (static_cast<int>(mc.targets.size()) != mc.family.size())
        throw std::invalid_argument("MCOTProblem: target count does not match family size");
    }
    const int blocks = cost_.marginal_count();
    if (blocks != 0 && blocks != static_cast<int>(marginals_.size()))
      throw std::invalid_argument("MCOTProblem: cost couples " + std::to_string(blocks) +
                                  " blocks but there are " + std::to_string(marginals_.size()) +
                                  " marginals");
    if (cost_.kind() == CostKind::Quadratic2D) {
      for (const MarginalConstraints& mc : marginals_)
        if (mc.family.dimension() != 2)
          throw std::invalid_argument("MCOTProblem: planar quadratic cost needs 2D marginals");
    }
    if (symmetric_ && martingale_)
      throw std::invalid_argument("MCOTProblem: symmetric mode has no martingale variant");
    if (symmetric_) {
      const MarginalConstraints& first = marginals_[0];
      for (const MarginalConstraints& mc : marginals_) {
        if (mc.family.kind() != first.family.kind() ||
            mc.family.grid_n() != first.family.grid_n() ||
            mc.family.epsilon() != first.family.epsilon())
          throw std::invalid_argument("MCOTProblem: symmetric mode needs identical families");
        for (std::size_t i = 0; i < mc.targets.size(); ++i)
          if (std::abs(mc.targets[i] - first.targets[i]) > 1e-12)
            throw std::invalid_argument("MCOTProblem: symmetric mode needs identical targets");
      }
    }
    if (martingale_) {
      if (marginals_.size() != 2)
        throw std::invalid_argument("MCOTProblem: martingale variant needs exactly two marginals");
      if (marginals_[0].family.dimension() != 1 || marginals_[1].family.dimension() != 1)
        throw std::invalid_argument("MCOTProblem: martingale variant needs 1D marginals");
      if (martingale_->kind() != FamilyKind::MartingaleBump)
        throw std::invalid_argument("MCOTProblem: martingale block must be a MartingaleBump family");
    }
    offsets_.resize(marginals_.size() + 1, 0);
    for (std::size_t i = 0; i < marginals_.size(); ++i)
      offsets_[i + 1] = offsets_[i] + marginals_[i].family.dimension();
  }

  int marginal_count() const { return static_cast<int>(marginals_.size()); }
  const MarginalConstraints& constraints(int i) const {
    return marginals_.at(static_cast<std::size_t>(i));
  }
  const CostFunction& cost() const { return cost_; }
  bool symmetric() const { return symmetric_; }
  bool has_martingale() const { return martingale_.has_value(); }
  const TestFamily& martingale() const {
    if (!martingale_) throw std::logic_error("MCOTProblem: no martingale block");
    return *martingale_;
  }

  // Total number of scalar moment constraints (mass excluded).
  int constraint_count() const {
    if (symmetric_) return marginals_[0].family.size();
    int n = 0;
    for (const MarginalConstraints& mc : marginals_) n += mc.family.size();
    if (martingale_) n += martingale_->size();
    return n;
  }

  // Largest support a minimizer ever needs: one atom per scalar constraint,
  // plus one for total mass and one for the cost value.
  int support_cap() const { return constraint_count() + 2; }

  int point_dimension() const { return offsets_.back(); }
  int coordinate_offset(int i) const { return offsets_.at(static_cast<std::size_t>(i)); }

  // Coordinate box of marginal i: the family's own box for planar families,
  // the unit interval otherwise.
  double box_lo(int i) const {
    const TestFamily& f = constraints(i).family;
    return f.kind() == FamilyKind::Mesh2D ? f.box_lo() : 0.0;
  }
  double box_hi(int i) const {
    const TestFamily& f = constraints(i).family;
    return f.kind() == FamilyKind::Mesh2D ? f.box_hi() : 1.0;
  }

 private:
  std::vector<MarginalConstraints> marginals_;
  CostFunction cost_;
  bool symmetric_;
  std::optional<TestFamily> martingale_;
  std::vector<int> offsets_;
};

namespace detail {

inline double family_eval_block(const TestFamily& f, int index, const double* coords) {
  return f.dimension() == 1 ? f.eval(index, coords[0]) : f.eval2(index, coords[0], coords[1]);
}

}  // namespace detail

// Stacked evaluations of every active constraint function at one atom:
// marginal blocks in order, martingale rows last.  In symmetric mode there is
// a single block holding the shared family averaged over coordinate blocks.
inline std::vector<double> constraint_values(const MCOTProblem& prob,
                                             const std::vector<double>& point) {
  if (static_cast<int>(point.size()) != prob.point_dimension())
    throw std::invalid_argument("constraint_values: point dimension mismatch");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(prob.constraint_count()));
  if (prob.symmetric()) {
    const TestFamily& f = prob.constraints(0).family;
    const int M = prob.marginal_count();
    for (int n = 0; n < f.size(); ++n) {
      double avg = 0.0;
      for (int i = 0; i < M; ++i)
        avg += detail::family_eval_block(f, n, point.data() + prob.coordinate_offset(i));
      out.push_back(avg / M);
    }
  } else {
    for (int i = 0; i < prob.marginal_count(); ++i) {
      const TestFamily& f = prob.constraints(i).family;
      for (int n = 0; n < f.size(); ++n)
        out.push_back(detail::family_eval_block(f, n, point.data() + prob.coordinate_offset(i)));
    }
  }
  if (prob.has_martingale()) {
    const TestFamily& bumps = prob.martingale();
    const double x = point[0], y = point[1];
    for (int l = 0; l < bumps.size(); ++l) out.push_back(bumps.eval(l, x) * (y - x));
  }
  return out;
}

// Prescribed values in the same stacking order; martingale rows target zero.
inline std::vector<double> constraint_targets(const MCOTProblem& prob) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(prob.constraint_count()));
  if (prob.symmetric()) {
    out = prob.constraints(0).targets;
  } else {
    for (int i = 0; i < prob.marginal_count(); ++i) {
      const std::vector<double>& t = prob.constraints(i).targets;
      out.insert(out.end(), t.begin(), t.end());
    }
  }
  if (prob.has_martingale()) out.resize(out.size() + prob.martingale().size(), 0.0);
  return out;
}

// Signed constraint residuals of a discrete candidate measure.
struct ConstraintResidual {
  // One block per marginal (a single averaged block in symmetric mode).
  std::vector<std::vector<double>> per_marginal;
  std::vector<double> martingale;
  double max_abs = 0.0;
};

inline ConstraintResidual residuals(const MCOTProblem& prob, const DiscreteMeasure& m) {
  if (static_cast<int>(m.dimension()) != prob.point_dimension())
    throw std::invalid_argument("residuals: measure dimension does not match the problem");
  std::vector<double> acc(static_cast<std::size_t>(prob.constraint_count()), 0.0);
  for (std::size_t k = 0; k < m.size(); ++k) {
    const std::vector<double> vals = constraint_values(prob, m.points()[k]);
    for (std::size_t r = 0; r < acc.size(); ++r) acc[r] += m.weights()[k] * vals[r];
  }
  const std::vector<double> targets = constraint_targets(prob);
  for (std::size_t r = 0; r < acc.size(); ++r) acc[r] -= targets[r];

  ConstraintResidual res;
  std::size_t pos = 0;
  const int blocks = prob.symmetric() ? 1 : prob.marginal_count();
  for (int i = 0; i < blocks; ++i) {
    const std::size_t n = static_cast<std::size_t>(prob.constraints(i).family.size());
    res.per_marginal.emplace_back(acc.begin() + pos, acc.begin() + pos + n);
    pos += n;
  }
  if (prob.has_martingale()) {
    res.martingale.assign(acc.begin() + pos, acc.end());
  }
  for (double v : acc) res.max_abs = std::max(res.max_abs, std::abs(v));
  return res;
}

// Total cost of a discrete candidate; +infinity as soon as one atom is
// infinite (every retained atom carries positive weight).
inline double cost_of(const MCOTProblem& prob, const DiscreteMeasure& m) {
  if (static_cast<int>(m.dimension()) != prob.point_dimension())
    throw std::invalid_argument("cost_of: measure dimension does not match the problem");
  double total = 0.0;
  for (std::size_t k = 0; k < m.size(); ++k) {
    const double c = prob.cost()(m.points()[k]);
    if (!std::isfinite(c)) return std::numeric_limits<double>::infinity();
    total += m.weights()[k] * c;
  }
  return total;
}

struct AdmissibilityReport {
  bool admissible = false;
  std::string message;
  std::optional<DiscreteMeasure> witness;
};

namespace detail {

// Representative coordinates for one 1D family: the grid knots and the cell
// midpoints (step 1/(2N)).  Piecewise-affine families take every value they
// can on this set's convex combinations, so a feasible set of weights exists
// on it whenever the prescribed moments are attainable at all.
inline std::vector<double> representative_grid_1d(int N) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(2 * N + 1));
  for (int k = 0; k <= 2 * N; ++k) out.push_back(static_cast<double>(k) / (2.0 * N));
  return out;
}

inline void merge_sorted_unique(std::vector<double>& base, const std::vector<double>& extra) {
  base.insert(base.end(), extra.begin(), extra.end());
  std::sort(base.begin(), base.end());
  base.erase(std::unique(base.begin(), base.end(),
                         [](double a, double b) { return std::abs(a - b) < 1e-12; }),
             base.end());
}

}  // namespace detail

// Feasibility check with witness: lay a representative product grid over the
// domain, ask the weight program for non-negative weights matching every
// prescribed moment, and thin the result so the witness has at most one atom
// more than there are constraints (mass included).  An infeasible program
// means the supplied targets are mutually inconsistent.
inline AdmissibilityReport check_admissible(const MCOTProblem& prob) {
  // Per-marginal representative point lists (each entry is one coordinate
  // block, of the marginal's dimension).
  std::vector<std::vector<std::vector<double>>> reps(
      static_cast<std::size_t>(prob.marginal_count()));
  for (int i = 0; i < prob.marginal_count(); ++i) {
    const TestFamily& f = prob.constraints(i).family;
    if (f.dimension() == 1) {
      std::vector<double> xs = detail::representative_grid_1d(f.grid_n());
      if (i == 0 && prob.has_martingale())
        detail::merge_sorted_unique(xs, detail::representative_grid_1d(prob.martingale().grid_n()));
      for (double x : xs) reps[static_cast<std::size_t>(i)].push_back({x});
    } else {
      const int N = f.grid_n();
      const double lo = f.box_lo(), w = f.box_hi() - f.box_lo();
      for (int a = 0; a <= 2 * N; ++a)
        for (int b = 0; b <= 2 * N; ++b)
          reps[static_cast<std::size_t>(i)].push_back(
              {lo + w * a / (2.0 * N), lo + w * b / (2.0 * N)});
    }
  }

  // Product of the per-marginal lists, as concatenated coordinate vectors.
  std::vector<std::vector<double>> support = {{}};
  for (const std::vector<std::vector<double>>& block : reps) {
    std::vector<std::vector<double>> next;
    next.reserve(support.size() * block.size());
    for (const std::vector<double>& head : support) {
      for (const std::vector<double>& tail : block) {
        std::vector<double> pt = head;
        pt.insert(pt.end(), tail.begin(), tail.end());
        next.push_back(std::move(pt));
      }
    }
    support.swap(next);
  }

  const int rows = prob.constraint_count();
  const int K = static_cast<int>(support.size());
  Eigen::MatrixXd A(rows, K);
  for (int j = 0; j < K; ++j) {
    const std::vector<double> vals = constraint_values(prob, support[static_cast<std::size_t>(j)]);
    for (int r = 0; r < rows; ++r) A(r, j) = vals[static_cast<std::size_t>(r)];
  }
  const std::vector<double> targets = constraint_targets(prob);
  Eigen::VectorXd b(rows);
  for (int r = 0; r < rows; ++r) b(r) = targets[static_cast<std::size_t>(r)];

  // Pure feasibility: a zero objective keeps extended-real costs out of the
  // program (the witness need not be optimal, only feasible).
  const LPSolution sol = weights_for_support(A, b, Eigen::VectorXd::Zero(K));
  AdmissibilityReport report;
  if (sol.status != LPStatus::Optimal) {
    report.admissible = false;
    report.message =
        "no non-negative weights on the representative grid match the prescribed moments";
    return report;
  }

  std::vector<std::vector<double>> pts;
  std::vector<double> w;
  for (int j = 0; j < K; ++j) {
    if (sol.x(j) > 1e-12) {
      pts.push_back(support[static_cast<std::size_t>(j)]);
      w.push_back(sol.x(j));
    }
  }
  DiscreteMeasure witness(pts, w);
  witness = tchakaloff_reduce(witness, [&](const std::vector<double>& pt) {
    std::vector<double> lambda = constraint_values(prob, pt);
    lambda.insert(lambda.begin(), 1.0);  // preserve total mass
    return lambda;
  });
  report.admissible = true;
  report.witness = std::move(witness);
  return report;
}

namespace detail {

// Euclidean distance from a point to the axis-aligned cube [lo, hi]^d.
inline double distance_to_box(const double* coords, std::size_t d, double lo, double hi) {
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double below = lo - coords[i], above = coords[i] - hi;
    const double gap = std::max({below, above, 0.0});
    s += gap * gap;
  }
  return std::sqrt(s);
}

inline bool inside_box(const double* coords, std::size_t d, double lo, double hi) {
  for (std::size_t i = 0; i < d; ++i)
    if (coords[i] < lo || coords[i] > hi) return false;
  return true;
}

}  // namespace detail

// Compact-support clamp.  Test functions vanish outside their support boxes,
// so atoms far away contribute nothing to any moment; this moves each such
// atom to a cheaper position while every moment stays fixed:
//   * an atom whose coordinates both sit within cost reach of the support
//     boxes is kept as is;
//   * an atom entirely outside both supports is sent to a designated anchor
//     pair of equal far-away coordinates, whose cost is exactly zero;
//   * an atom with one coordinate inside its support and the other beyond
//     reach has the far coordinate slid along the segment towards the other
//     support's center until the cost equals M + 1/2, where M is the largest
//     cost over the two support boxes -- still outside the support, so no
//     moment moves, but the cost strictly drops.
// Requires a distance-driven cost that grows without bound (the power and
// planar quadratic kinds).
inline DiscreteMeasure clamp_to_kbar(const MCOTProblem& prob, const DiscreteMeasure& m) {
  if (prob.cost().kind() != CostKind::PowerDistance &&
      prob.cost().kind() != CostKind::Quadratic2D)
    throw std::logic_error("clamp_to_kbar: needs a distance-driven unbounded cost");
  if (prob.marginal_count() != 2)
    throw std::logic_error("clamp_to_kbar: needs exactly two marginals");
  if (prob.has_martingale())
    throw std::logic_error(
        "clamp_to_kbar: martingale rows grow with y, so relocation would move them");
  for (int i = 0; i < 2; ++i) {
    switch (prob.constraints(i).family.kind()) {
      case FamilyKind::PiecewiseConstant:
      case FamilyKind::Hat:
      case FamilyKind::AffinePair:
      case FamilyKind::MartingaleBump:
        break;  // vanish outside the unit interval, as the clamp requires
      default:
        throw std::logic_error("clamp_to_kbar: needs compactly supported families");
    }
  }
  if (static_cast<int>(m.dimension()) != prob.point_dimension())
    throw std::invalid_argument("clamp_to_kbar: measure dimension does not match the problem");
  const std::size_t d = static_cast<std::size_t>(prob.constraints(0).family.dimension());

  const double xlo = prob.box_lo(0), xhi = prob.box_hi(0);
  const double ylo = prob.box_lo(1), yhi = prob.box_hi(1);

  // Largest cost over the support boxes, and how far a coordinate may stray
  // (in distance) while the cost against the other support stays <= M + 1.
  const double p = prob.cost().power();
  const double extent = std::max(yhi - xlo, xhi - ylo);
  const double max_dist = extent * std::sqrt(static_cast<double>(d));
  const double M = std::pow(max_dist, p);
  const double reach = std::pow(M + 1.0, 1.0 / p);

  // Zero-cost anchor: equal coordinates beyond every reach-enlarged box.
  const double anchor_coord = std::max(xhi, yhi) + reach + 1.0;
  const std::vector<double> anchor(2 * d, anchor_coord);

  // Slide the far coordinate of a half-outside atom towards the center of
  // the near support until the cost crosses M + 1/2 (bisection; the cost is
  // continuous, below M at the center and above M + 1 where the atom is).
  auto slide = [&](std::vector<double> pt, bool far_is_y) {
    const double target = M + 0.5;
    std::vector<double> center(d, far_is_y ? 0.5 * (ylo + yhi) : 0.5 * (xlo + xhi));
    const std::size_t off = far_is_y ? d : 0;
    auto at = [&](double lambda) {
      std::vector<double> q = pt;
      for (std::size_t i = 0; i < d; ++i)
        q[off + i] = (1.0 - lambda) * center[i] + lambda * pt[off + i];
      return q;
    };
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (prob.cost()(at(mid)) < target ? lo : hi) = mid;
    }
    return at(0.5 * (lo + hi));
  };

  std::vector<std::vector<double>> pts;
  pts.reserve(m.size());
  for (const std::vector<double>& pt : m.points()) {
    const double* x = pt.data();
    const double* y = pt.data() + d;
    const bool x_in = detail::inside_box(x, d, xlo, xhi);
    const bool y_in = detail::inside_box(y, d, ylo, yhi);
    const bool y_near_x = detail::distance_to_box(y, d, xlo, xhi) <= reach;
    const bool x_near_y = detail::distance_to_box(x, d, ylo, yhi) <= reach;
    bool is_anchor = true;
    for (std::size_t i = 0; i < pt.size(); ++i)
      if (std::abs(pt[i] - anchor[i]) > 1e-12) is_anchor = false;

    if ((x_in && y_near_x) || (y_in && x_near_y) || is_anchor) {
      pts.push_back(pt);  // already inside the window
    } else if (!x_in && !y_in) {
      pts.push_back(anchor);  // fully stray: zero-cost anchor
    } else if (x_in) {
      pts.push_back(slide(pt, /*far_is_y=*/true));
    } else {
      pts.push_back(slide(pt, /*far_is_y=*/false));
    }
  }
  return DiscreteMeasure(pts, m.weights());
}

}  // namespace mcot
