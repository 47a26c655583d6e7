#pragma once

// Moment test-function families: indicator functions of grid cells, hat
// functions, the per-cell affine pair, regularized positive parts, the 2D
// mesh family built from them, and the hat family used for martingale
// constraints.  Each family evaluates pointwise, differentiates where it is
// differentiable (right-hand value at kinks, for determinism), and integrates
// exactly against the 1D marginal laws.
//
// Flat index layouts:
//   PiecewiseConstant / Hat / MartingaleBump : i = m-1,            m in 1..N
//   AffinePair                               : i = 2(m-1)+(leg-1), leg in {1,2}
//   RegularizedPosPart                       : i = m,              m in 0..N
//   Mesh2D                                   : i = m*(N+1)+n,      m,n in 0..N

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcot/cells.hpp"
#include "mcot/measures.hpp"

namespace mcot {

enum class FamilyKind {
  PiecewiseConstant,
  Hat,
  AffinePair,
  RegularizedPosPart,
  Mesh2D,
  MartingaleBump
};

struct Grad2 {
  double dx = 0.0;
  double dy = 0.0;
};

namespace detail {

// Regularized positive part z -> (z - t)^+, C^1, quadratic on |z-t| <= eps.
inline double pos_part(double z, double t, double eps) {
  const double d = z - t;
  if (d <= -eps) return 0.0;
  if (d < eps) return (d + eps) * (d + eps) / (4.0 * eps);
  return d;
}

inline double pos_part_d(double z, double t, double eps) {
  const double d = z - t;
  if (d <= -eps) return 0.0;
  if (d < eps) return (d + eps) / (2.0 * eps);
  return 1.0;
}

// Regularized negative part z -> (z - t)^-, mirroring pos_part.
inline double neg_part(double z, double t, double eps) {
  const double d = z - t;
  if (d <= -eps) return -d;
  if (d < eps) return (d - eps) * (d - eps) / (4.0 * eps);
  return 0.0;
}

inline double neg_part_d(double z, double t, double eps) {
  const double d = z - t;
  if (d <= -eps) return -1.0;
  if (d < eps) return (d - eps) / (2.0 * eps);
  return 0.0;
}

}  // namespace detail

class TestFamily {
 public:
  // Indicators of the N grid cells (first cell closed at 0).
  static TestFamily piecewise_constant(int N) { return TestFamily(FamilyKind::PiecewiseConstant, N); }

  // Hat functions: psi_m peaks at m/N with psi_m(k/N) = delta_{mk}; the last
  // one keeps only its rising edge and satisfies psi_N(1) = 1.
  static TestFamily hat(int N) { return TestFamily(FamilyKind::Hat, N); }

  // Per-cell affine pair: leg 1 is N(x - (m-1)/N) on cell m, leg 2 completes
  // it to the cell indicator, so leg1 + leg2 = 1 on the cell exactly.
  static TestFamily affine_pair(int N) { return TestFamily(FamilyKind::AffinePair, N); }

  // phi_0 = regularized (x - 1/N)^-, phi_m = regularized (x - (m-1)/N)^+ for
  // m = 1..N.  eps defaults to 1e-2/N (regularization error well below the
  // 1/N^2 rates being measured).
  static TestFamily regularized_pos_part(int N, double eps = -1.0) {
    return TestFamily(FamilyKind::RegularizedPosPart, N, eps);
  }

  // (N+1)^2 regularized piecewise affine functions on a square box whose
  // span is the P1 space of the grid mesh refined by one diagonal per cell.
  // Core construction for 1 <= m,n <= N (all C^1 by composition):
  //   u = (x + y - A - B)/2,  A = ((x-y) - (m-n)/N)^+, B = ((y-x) - (n-m)/N)^+
  //   phi_{m,n}(x,y) = (u - (m+n-2)/(2N))^+
  // which regularizes min(x - (m-1)/N, y - (n-1)/N)^+ through the identity
  // min(a,b) = (a + b - |a-b|)/2; border functions (m or n = 0) are mirror
  // images: phi_{0,0}(x,y) = phi_{1,1}(1/N - x, 1/N - y), phi_{m,0}(x,y) =
  // phi_{m,1}(x, 1/N - y), phi_{0,n}(x,y) = phi_{1,n}(1/N - x, y).
  static TestFamily mesh2d(int N, double eps = -1.0, double box_lo = 0.0, double box_hi = 1.0) {
    TestFamily f(FamilyKind::Mesh2D, N, eps);
    if (!(box_lo < box_hi)) throw std::invalid_argument("mesh2d: degenerate box");
    f.box_lo_ = box_lo;
    f.box_hi_ = box_hi;
    return f;
  }

  // Hat functions on the first marginal's domain, used to test the
  // conditional-mean (martingale) constraint.
  static TestFamily martingale_bump(int Np) { return TestFamily(FamilyKind::MartingaleBump, Np); }

  FamilyKind kind() const { return kind_; }
  int grid_n() const { return N_; }
  double epsilon() const { return eps_; }
  double box_lo() const { return box_lo_; }
  double box_hi() const { return box_hi_; }
  int dimension() const { return kind_ == FamilyKind::Mesh2D ? 2 : 1; }

  int size() const {
    switch (kind_) {
      case FamilyKind::PiecewiseConstant:
      case FamilyKind::Hat:
      case FamilyKind::MartingaleBump: return N_;
      case FamilyKind::AffinePair: return 2 * N_;
      case FamilyKind::RegularizedPosPart: return N_ + 1;
      case FamilyKind::Mesh2D: return (N_ + 1) * (N_ + 1);
    }
    return 0;
  }

  int affine_index(int m, int leg) const {
    require_kind(FamilyKind::AffinePair, "affine_index");
    if (m < 1 || m > N_ || leg < 1 || leg > 2)
      throw std::out_of_range("affine_index: invalid (m, leg)");
    return 2 * (m - 1) + (leg - 1);
  }

  int mesh_index(int m, int n) const {
    require_kind(FamilyKind::Mesh2D, "mesh_index");
    if (m < 0 || m > N_ || n < 0 || n > N_) throw std::out_of_range("mesh_index: invalid (m, n)");
    return m * (N_ + 1) + n;
  }

  double eval(int index, double x) const {
    check_index(index);
    if (dimension() != 1) throw std::logic_error("eval: two-dimensional family, use eval2");
    const double h = 1.0 / N_;
    switch (kind_) {
      case FamilyKind::PiecewiseConstant:
        return CellGrid(N_).contains(index + 1, x) ? 1.0 : 0.0;
      case FamilyKind::Hat:
      case FamilyKind::MartingaleBump: {
        const int m = index + 1;
        const double lo = (m - 1) * h, peak = m * h;
        if (x < lo) return 0.0;
        if (x <= peak) return N_ * (x - lo);
        if (m < N_ && x < peak + h) return 1.0 - N_ * (x - peak);
        return 0.0;
      }
      case FamilyKind::AffinePair: {
        const int m = index / 2 + 1, leg = index % 2 + 1;
        if (!CellGrid(N_).contains(m, x)) return 0.0;
        const double rise = N_ * (x - (m - 1) * h);
        return leg == 1 ? rise : 1.0 - rise;
      }
      case FamilyKind::RegularizedPosPart:
        if (index == 0) return detail::neg_part(x, h, eps_);
        return detail::pos_part(x, (index - 1) * h, eps_);
      case FamilyKind::Mesh2D: break;
    }
    return 0.0;
  }

  double eval_derivative(int index, double x) const {
    check_index(index);
    if (dimension() != 1)
      throw std::logic_error("eval_derivative: two-dimensional family, use gradient2");
    const double h = 1.0 / N_;
    switch (kind_) {
      case FamilyKind::PiecewiseConstant:
        throw std::logic_error("eval_derivative: cell indicators are not differentiable");
      case FamilyKind::Hat:
      case FamilyKind::MartingaleBump: {
        // Right-hand derivative at the knots; the last hat keeps its rising
        // slope at x = 1 (one-sided).
        const int m = index + 1;
        const double lo = (m - 1) * h, peak = m * h;
        if (x < lo) return 0.0;
        if (x < peak || (m == N_ && x <= 1.0)) return static_cast<double>(N_);
        if (m < N_ && x < peak + h) return -static_cast<double>(N_);
        return 0.0;
      }
      case FamilyKind::AffinePair: {
        // Right-hand convention: slopes live on [(m-1)/N, m/N).
        const int m = index / 2 + 1, leg = index % 2 + 1;
        const double lo = (m - 1) * h;
        const bool in = (x >= lo && x < m * h);
        if (!in) return 0.0;
        return leg == 1 ? static_cast<double>(N_) : -static_cast<double>(N_);
      }
      case FamilyKind::RegularizedPosPart:
        if (index == 0) return detail::neg_part_d(x, h, eps_);
        return detail::pos_part_d(x, (index - 1) * h, eps_);
      case FamilyKind::Mesh2D: break;
    }
    return 0.0;
  }

  // The core formulas live on the unit square and are positively homogeneous
  // of degree one, so mapping them onto a wider box multiplies values by the
  // box width and keeps every slope at its unit-square magnitude.  Penalty
  // residuals therefore stay in the box's own length units, which is what
  // makes penalty coefficients transferable across box sizes.
  double eval2(int index, double x, double y) const {
    check_index(index);
    require_kind(FamilyKind::Mesh2D, "eval2");
    const double w = box_hi_ - box_lo_;
    return w * mesh_unit_eval(index / (N_ + 1), index % (N_ + 1), (x - box_lo_) / w,
                              (y - box_lo_) / w);
  }

  Grad2 gradient2(int index, double x, double y) const {
    check_index(index);
    require_kind(FamilyKind::Mesh2D, "gradient2");
    const double w = box_hi_ - box_lo_;
    return mesh_unit_gradient(index / (N_ + 1), index % (N_ + 1), (x - box_lo_) / w,
                              (y - box_lo_) / w);
  }

  // Exact integrals of every family member against a 1D marginal law,
  // assembled from the per-interval power moments of the measure (closed
  // forms for all marginal kinds, so targets are reproducible to 1e-12).
  std::vector<double> moments(const Marginal1D& mu) const {
    if (dimension() != 1) throw std::logic_error("moments: two-dimensional family");
    std::vector<double> out(static_cast<std::size_t>(size()));
    const double h = 1.0 / N_;
    switch (kind_) {
      case FamilyKind::PiecewiseConstant: {
        for (int m = 1; m <= N_; ++m)
          out[m - 1] = mu.power_moment(0, (m - 1) * h, m * h);
        break;
      }
      case FamilyKind::Hat:
      case FamilyKind::MartingaleBump: {
        for (int m = 1; m <= N_; ++m) {
          const double lo = (m - 1) * h, peak = m * h;
          double v = N_ * mu.power_moment(1, lo, peak) - (m - 1) * mu.power_moment(0, lo, peak);
          if (m < N_)
            v += (m + 1) * mu.power_moment(0, peak, peak + h) -
                 N_ * mu.power_moment(1, peak, peak + h);
          out[m - 1] = v;
        }
        break;
      }
      case FamilyKind::AffinePair: {
        for (int m = 1; m <= N_; ++m) {
          const double lo = (m - 1) * h, hi = m * h;
          double mass = mu.power_moment(0, lo, hi);
          double rise = N_ * mu.power_moment(1, lo, hi) - (m - 1) * mass;
          out[2 * (m - 1)] = rise;
          out[2 * (m - 1) + 1] = mass - rise;
        }
        break;
      }
      case FamilyKind::RegularizedPosPart: {
        // Piece boundaries clipped to [0,1]; the pieces agree at their
        // breakpoints, so half-open interval bookkeeping cannot double-count
        // an atom sitting exactly on one.
        auto quad_moment = [&](double t, double lo, double hi, double sign) {
          // integral of (x - t + sign*eps)^2/(4 eps) over (lo, hi]
          const double s = -t + sign * eps_;
          return (mu.power_moment(2, lo, hi) + 2.0 * s * mu.power_moment(1, lo, hi) +
                  s * s * mu.power_moment(0, lo, hi)) /
                 (4.0 * eps_);
        };
        auto clip = [](double v) { return std::min(1.0, std::max(0.0, v)); };
        {  // index 0: regularized (x - 1/N)^-
          const double t = h, b1 = clip(t - eps_), b2 = clip(t + eps_);
          out[0] = t * mu.power_moment(0, 0.0, b1) - mu.power_moment(1, 0.0, b1) +
                   quad_moment(t, b1, b2, -1.0);
        }
        for (int m = 1; m <= N_; ++m) {
          const double t = (m - 1) * h, b1 = clip(t - eps_), b2 = clip(t + eps_);
          out[m] = quad_moment(t, b1, b2, +1.0) + mu.power_moment(1, b2, 1.0) -
                   t * mu.power_moment(0, b2, 1.0);
        }
        break;
      }
      case FamilyKind::Mesh2D: break;
    }
    return out;
  }

 private:
  TestFamily(FamilyKind kind, int N, double eps = -1.0) : kind_(kind), N_(N) {
    if (N < 1) throw std::invalid_argument("TestFamily: N must be positive");
    const bool wants_eps =
        kind == FamilyKind::RegularizedPosPart || kind == FamilyKind::Mesh2D;
    if (wants_eps) {
      eps_ = eps > 0.0 ? eps : 1e-2 / N;
      if (eps_ >= 0.5 / N)
        throw std::invalid_argument("TestFamily: eps must stay below half a cell width");
    }
  }

  void require_kind(FamilyKind k, const char* who) const {
    if (kind_ != k) throw std::logic_error(std::string(who) + ": wrong family kind");
  }

  void check_index(int index) const {
    if (index < 0 || index >= size()) throw std::out_of_range("TestFamily: index out of range");
  }

  // ----- Mesh2D internals, on the unit square ------------------------------

  // Shifted regularized positive part with knot (q-1)/N for any integer q;
  // knots outside [0,1] are legitimate here (the |a-b| splitting needs them).
  double shifted_pp(int q, double z) const { return detail::pos_part(z, (q - 1) * (1.0 / N_), eps_); }
  double shifted_pp_d(int q, double z) const {
    return detail::pos_part_d(z, (q - 1) * (1.0 / N_), eps_);
  }

  double mesh_core_eval(int m, int n, double x, double y) const {
    const double a = shifted_pp(m - n + 1, x - y);
    const double b = shifted_pp(n - m + 1, y - x);
    const double u = 0.5 * (x + y - a - b);
    return detail::pos_part(u, (m + n - 2) / (2.0 * N_), eps_);
  }

  Grad2 mesh_core_gradient(int m, int n, double x, double y) const {
    const double da = shifted_pp_d(m - n + 1, x - y);
    const double db = shifted_pp_d(n - m + 1, y - x);
    const double a = shifted_pp(m - n + 1, x - y);
    const double b = shifted_pp(n - m + 1, y - x);
    const double u = 0.5 * (x + y - a - b);
    const double g = detail::pos_part_d(u, (m + n - 2) / (2.0 * N_), eps_);
    return Grad2{g * 0.5 * (1.0 - da + db), g * 0.5 * (1.0 + da - db)};
  }

  double mesh_unit_eval(int m, int n, double x, double y) const {
    const double h = 1.0 / N_;
    if (m >= 1 && n >= 1) return mesh_core_eval(m, n, x, y);
    if (m == 0 && n == 0) return mesh_core_eval(1, 1, h - x, h - y);
    if (n == 0) return mesh_core_eval(m, 1, x, h - y);
    return mesh_core_eval(1, n, h - x, y);
  }

  Grad2 mesh_unit_gradient(int m, int n, double x, double y) const {
    const double h = 1.0 / N_;
    if (m >= 1 && n >= 1) return mesh_core_gradient(m, n, x, y);
    if (m == 0 && n == 0) {
      Grad2 g = mesh_core_gradient(1, 1, h - x, h - y);
      return Grad2{-g.dx, -g.dy};
    }
    if (n == 0) {
      Grad2 g = mesh_core_gradient(m, 1, x, h - y);
      return Grad2{g.dx, -g.dy};
    }
    Grad2 g = mesh_core_gradient(1, n, h - x, y);
    return Grad2{-g.dx, g.dy};
  }

  FamilyKind kind_;
  int N_;
  double eps_ = 0.0;
  double box_lo_ = 0.0;
  double box_hi_ = 1.0;
};

// The continuous bounded functions testing E[y - x | x] = 0: hat functions
// on the first marginal's domain (N' = 1 gives the single rising hat x).
inline TestFamily martingale_family(int n_prime) { return TestFamily::martingale_bump(n_prime); }

}  // namespace mcot
