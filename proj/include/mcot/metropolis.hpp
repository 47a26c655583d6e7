#pragma once

// Metropolis walk over cell configurations.  The state is a set of K distinct
// cells of the N x N grid; its weights are the optimal transport weights for
// the prescribed per-cell masses, found by linear programming, and its cost
// is that optimum.  One step proposes to move a single particle to a free
// neighboring cell and accepts with the classic ratio, corrected for the
// sizes of the free neighborhoods so the proposal stays reversible.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mcot/linear_program.hpp"
#include "mcot/prng.hpp"
#include "mcot/problem.hpp"

namespace mcot {

// Cached grid data for the walk: per-cell masses of both marginals and the
// per-cell-pair cost table.
struct CellWalkProblem {
  int N = 0;
  std::vector<double> mu_masses, nu_masses;  // length N each
  Eigen::MatrixXd cell_costs;                // (i-1, j-1) -> cost of cell pair
};

// Cheapest value the cost takes over a cell pair, evaluated at the closest
// corners: cells i and j overlap in projection when |i - j| <= 1, otherwise
// they are |i - j| - 1 grid steps apart.
inline double cell_cost(int i, int j, int N, const CostFunction& cost) {
  if (i < 1 || i > N || j < 1 || j > N)
    throw std::out_of_range("cell_cost: cell index outside the grid");
  const double h = 1.0 / N;
  if (i == j) return cost({i * h, j * h});
  if (i < j) return cost({i * h, (j - 1) * h});
  return cost({i * h, (j + 1) * h});
}

inline CellWalkProblem make_cell_walk(const MCOTProblem& prob) {
  if (prob.marginal_count() != 2 || prob.symmetric() || prob.has_martingale())
    throw std::invalid_argument("make_cell_walk: needs a plain two-marginal problem");
  const TestFamily& fx = prob.constraints(0).family;
  const TestFamily& fy = prob.constraints(1).family;
  if (fx.kind() != FamilyKind::PiecewiseConstant || fy.kind() != FamilyKind::PiecewiseConstant)
    throw std::invalid_argument("make_cell_walk: needs cell-indicator families");
  if (fx.grid_n() != fy.grid_n())
    throw std::invalid_argument("make_cell_walk: needs one common grid");

  CellWalkProblem walk;
  walk.N = fx.grid_n();
  walk.mu_masses = prob.constraints(0).targets;
  walk.nu_masses = prob.constraints(1).targets;
  walk.cell_costs.resize(walk.N, walk.N);
  for (int i = 1; i <= walk.N; ++i)
    for (int j = 1; j <= walk.N; ++j)
      walk.cell_costs(i - 1, j - 1) = cell_cost(i, j, walk.N, prob.cost());
  return walk;
}

// K distinct cells with their optimal weights.  Zero-weight particles are
// part of the design: they explore the grid for free and open support for
// later mass.
struct CellConfiguration {
  int N = 0;
  std::vector<std::pair<int, int>> cells;  // distinct, 1-based
  std::vector<double> weights;             // aligned with cells
  double cost = 0.0;                       // optimal value on this support
  std::vector<int> basis;                  // simplex basis, for warm restarts

  int particle_count() const { return static_cast<int>(cells.size()); }
};

struct MHParams {
  double beta = 1e-4;        // temperature, > 0
  long iterations = 10000;
  std::uint64_t seed = 0;
  int K = 0;                 // particle count; 0 means the default 3N + 2
};

// Optimal weights for a fixed set of cells: row sums match the first
// marginal's cell masses, column sums the second's.
inline LPSolution solve_cell_weights(const CellWalkProblem& walk,
                                     const std::vector<std::pair<int, int>>& cells,
                                     const std::vector<int>* warm_basis = nullptr) {
  const int K = static_cast<int>(cells.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * walk.N, K);
  Eigen::VectorXd c(K);
  for (int k = 0; k < K; ++k) {
    const auto [i, j] = cells[static_cast<std::size_t>(k)];
    A(i - 1, k) = 1.0;
    A(walk.N + j - 1, k) = 1.0;
    c(k) = walk.cell_costs(i - 1, j - 1);
  }
  Eigen::VectorXd b(2 * walk.N);
  for (int i = 0; i < walk.N; ++i) b(i) = walk.mu_masses[static_cast<std::size_t>(i)];
  for (int j = 0; j < walk.N; ++j) b(walk.N + j) = walk.nu_masses[static_cast<std::size_t>(j)];
  return weights_for_support(A, b, c, warm_basis);
}

namespace detail {

inline CellConfiguration configuration_from(const CellWalkProblem& walk,
                                            std::vector<std::pair<int, int>> cells,
                                            const LPSolution& sol) {
  CellConfiguration config;
  config.N = walk.N;
  config.cells = std::move(cells);
  config.weights.assign(sol.x.data(), sol.x.data() + sol.x.size());
  config.cost = sol.objective;
  config.basis = sol.basis;
  return config;
}

// Free cells among the four lattice neighbors of one cell.
inline std::vector<std::pair<int, int>> free_neighbors(const std::pair<int, int>& cell,
                                                       const std::vector<char>& occupied, int N) {
  const int moves[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  std::vector<std::pair<int, int>> out;
  for (const auto& mv : moves) {
    const int i = cell.first + mv[0], j = cell.second + mv[1];
    if (i < 1 || i > N || j < 1 || j > N) continue;
    if (!occupied[static_cast<std::size_t>((i - 1) * N + (j - 1))]) out.emplace_back(i, j);
  }
  return out;
}

inline std::vector<char> occupancy(const std::vector<std::pair<int, int>>& cells, int N) {
  std::vector<char> occupied(static_cast<std::size_t>(N) * N, 0);
  for (const auto& [i, j] : cells) occupied[static_cast<std::size_t>((i - 1) * N + (j - 1))] = 1;
  return occupied;
}

}  // namespace detail

// Feasible start: traverse the two per-cell mass staircases in lockstep (the
// quantile coupling on the cell level), visiting the first marginal's cells
// in a shuffled order when asked, then pad with random free cells up to K
// particles.  The unshuffled start is the optimal configuration; shuffled
// starts are feasible but generically suboptimal.
inline CellConfiguration init_configuration(const CellWalkProblem& walk, int K, Prng& rng,
                                            bool shuffle) {
  const int N = walk.N;
  if (K < 2 * N + 2)
    throw std::invalid_argument("init_configuration: need at least 2N + 2 particles");
  if (K > N * N)
    throw std::invalid_argument("init_configuration: more particles than grid cells");

  for (int attempt = 0; attempt < 32; ++attempt) {
    std::vector<int> order(static_cast<std::size_t>(N));
    for (int m = 0; m < N; ++m) order[static_cast<std::size_t>(m)] = m;
    if (shuffle) rng.shuffle(order);

    std::vector<std::pair<int, int>> cells;
    std::size_t ii = 0, jj = 0;
    double ra = walk.mu_masses[static_cast<std::size_t>(order[0])], rb = walk.nu_masses[0];
    while (ii < static_cast<std::size_t>(N) && jj < static_cast<std::size_t>(N)) {
      cells.emplace_back(order[ii] + 1, static_cast<int>(jj) + 1);
      const double take = std::min(ra, rb);
      ra -= take;
      rb -= take;
      if (ra <= 1e-15 && ++ii < static_cast<std::size_t>(N))
        ra = walk.mu_masses[static_cast<std::size_t>(order[ii])];
      if (rb <= 1e-15 && ++jj < static_cast<std::size_t>(N))
        rb = walk.nu_masses[jj];
    }

    std::vector<char> occupied = detail::occupancy(cells, N);
    std::vector<std::pair<int, int>> free_cells;
    for (int i = 1; i <= N; ++i)
      for (int j = 1; j <= N; ++j)
        if (!occupied[static_cast<std::size_t>((i - 1) * N + (j - 1))]) free_cells.emplace_back(i, j);
    rng.shuffle(free_cells);
    while (static_cast<int>(cells.size()) < K && !free_cells.empty()) {
      cells.push_back(free_cells.back());
      free_cells.pop_back();
    }

    const LPSolution sol = solve_cell_weights(walk, cells);
    if (sol.status == LPStatus::Optimal) return detail::configuration_from(walk, std::move(cells), sol);
    if (!shuffle) break;  // the unshuffled staircase cannot improve by retrying
  }
  throw std::runtime_error("init_configuration: no feasible start found");
}

inline CellConfiguration init_configuration(const MCOTProblem& prob, int K, std::uint64_t seed,
                                            bool shuffle) {
  const CellWalkProblem walk = make_cell_walk(prob);
  Prng rng(seed);
  return init_configuration(walk, K, rng, shuffle);
}

struct MHStep {
  CellConfiguration state;
  bool proposed = false;  // false when every particle is blocked
  bool accepted = false;
};

// One proposal: pick a movable particle uniformly (by rejection), pick one of
// its free neighboring cells uniformly, re-solve the weights, and accept with
//   min(1, e^{(cost_current - cost_proposed)/beta} * n_current / n_proposed),
// where the n are the free-neighborhood sizes before and after the move.  An
// infeasible proposal is rejected outright.
inline MHStep mh_step(const CellWalkProblem& walk, const CellConfiguration& state,
                      const MHParams& params, Prng& rng) {
  if (!(params.beta > 0.0)) throw std::invalid_argument("mh_step: beta must be > 0");
  const int N = walk.N;
  const int K = state.particle_count();
  std::vector<char> occupied = detail::occupancy(state.cells, N);

  bool any_movable = false;
  for (const auto& cell : state.cells) {
    if (!detail::free_neighbors(cell, occupied, N).empty()) {
      any_movable = true;
      break;
    }
  }
  if (!any_movable) return MHStep{state, false, false};

  int l = 0;
  std::vector<std::pair<int, int>> fn;
  do {
    l = static_cast<int>(rng.below(static_cast<std::uint64_t>(K)));
    fn = detail::free_neighbors(state.cells[static_cast<std::size_t>(l)], occupied, N);
  } while (fn.empty());
  const int n_current = static_cast<int>(fn.size());
  const std::pair<int, int> target = fn[rng.below(static_cast<std::uint64_t>(fn.size()))];

  std::vector<std::pair<int, int>> cells = state.cells;
  cells[static_cast<std::size_t>(l)] = target;
  const LPSolution sol = solve_cell_weights(walk, cells, &state.basis);
  if (sol.status != LPStatus::Optimal) return MHStep{state, true, false};

  std::vector<char> occupied_new = detail::occupancy(cells, N);
  const int n_proposed =
      static_cast<int>(detail::free_neighbors(target, occupied_new, N).size());
  const double ratio = std::exp((state.cost - sol.objective) / params.beta) *
                       (static_cast<double>(n_current) / n_proposed);
  if (rng.uniform() < std::min(1.0, ratio))
    return MHStep{detail::configuration_from(walk, std::move(cells), sol), true, true};
  return MHStep{state, true, false};
}

struct MHTraceRow {
  long iter = 0;
  double cost_current = 0.0;
  double cost_best = 0.0;
  bool accepted = false;
};

struct MHResult {
  std::vector<MHTraceRow> trace;
  CellConfiguration best;
  CellConfiguration last;
};

// Full walk: shuffled feasible start, params.iterations proposals, best
// configuration tracked along the way.  Deterministic given the seed.
inline MHResult run_mh(const MCOTProblem& prob, const MHParams& params) {
  if (!(params.beta > 0.0)) throw std::invalid_argument("run_mh: beta must be > 0");
  if (params.iterations < 0) throw std::invalid_argument("run_mh: negative iteration count");
  const CellWalkProblem walk = make_cell_walk(prob);
  const int K = params.K > 0 ? params.K : 3 * walk.N + 2;

  Prng rng(params.seed);
  CellConfiguration state = init_configuration(walk, K, rng, /*shuffle=*/true);

  MHResult result;
  result.best = state;
  result.trace.reserve(static_cast<std::size_t>(params.iterations));
  for (long iter = 1; iter <= params.iterations; ++iter) {
    MHStep step = mh_step(walk, state, params, rng);
    state = std::move(step.state);
    if (state.cost < result.best.cost) result.best = state;
    result.trace.push_back(MHTraceRow{iter, state.cost, result.best.cost, step.accepted});
  }
  result.last = std::move(state);
  return result;
}

}  // namespace mcot
