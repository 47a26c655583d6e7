#pragma once

// Uniform cell partition of [0,1] into N cells: the first cell is closed at 0,
// every other cell is half-open on the left,
//
//   T_1 = [0, 1/N],   T_m = ((m-1)/N, m/N]  for m >= 2.
//
// All grid-indexed machinery (piecewise test functions, cell masses, the
// cell-walk sampler) shares this convention so that every point of [0,1]
// belongs to exactly one cell.

#include <cmath>
#include <stdexcept>

namespace mcot {

struct CellGrid {
  int N;

  explicit CellGrid(int n) : N(n) {
    if (n < 1) throw std::invalid_argument("CellGrid: N must be >= 1");
  }

  double lower(int m) const {
    check(m);
    return static_cast<double>(m - 1) / N;
  }

  double upper(int m) const {
    check(m);
    return static_cast<double>(m) / N;
  }

  double midpoint(int m) const {
    check(m);
    return (m - 0.5) / N;
  }

  double width() const { return 1.0 / N; }

  // Index of the cell containing x (1-based). x = 0 belongs to the first cell.
  int cell_of(double x) const {
    if (x < 0.0 || x > 1.0) throw std::domain_error("CellGrid::cell_of: x outside [0,1]");
    if (x <= 0.0) return 1;
    int m = static_cast<int>(std::ceil(x * N));
    if (m < 1) m = 1;
    if (m > N) m = N;
    // ceil can land one cell high when x*N is an exact integer representation
    // boundary; nudge down if x is not actually above the lower edge.
    if (m > 1 && x <= static_cast<double>(m - 1) / N) --m;
    return m;
  }

  bool contains(int m, double x) const {
    check(m);
    if (m == 1) return x >= 0.0 && x <= upper(1);
    return x > lower(m) && x <= upper(m);
  }

 private:
  void check(int m) const {
    if (m < 1 || m > N) throw std::out_of_range("CellGrid: cell index out of range");
  }
};

}  // namespace mcot
