// Tests for the cell-configuration Metropolis walk: per-cell-pair costs, the
// staircase initialization, single-step acceptance statistics against
// hand-computed values, and full-run invariants (feasibility, monotone best,
// determinism, reaching the exact small-grid optimum).

#include "mcot/metropolis.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "mcot/linear_program.hpp"
#include "mcot/measures.hpp"
#include "mcot/problem.hpp"
#include "mcot/prng.hpp"

namespace {

using mcot::cell_cost;
using mcot::CellConfiguration;
using mcot::CellWalkProblem;
using mcot::CostFunction;
using mcot::init_configuration;
using mcot::make_cell_walk;
using mcot::marginal_constraints;
using mcot::Marginal1D;
using mcot::MCOTProblem;
using mcot::mh_step;
using mcot::MHParams;
using mcot::Prng;
using mcot::run_mh;
using mcot::solve_cell_weights;
using mcot::TestFamily;

Marginal1D cubic_growth() { return Marginal1D::poly_density({0.0, 0.0, 3.0}); }  // 3x^2
Marginal1D linear_decay() { return Marginal1D::poly_density({2.0, -2.0}); }      // 2-2y

MCOTProblem cell_problem(int N, double p) {
  return MCOTProblem({marginal_constraints(TestFamily::piecewise_constant(N), cubic_growth()),
                      marginal_constraints(TestFamily::piecewise_constant(N), linear_decay())},
                     CostFunction::power_distance(p));
}

CellWalkProblem walk_with_masses(std::vector<double> mu, std::vector<double> nu, double p) {
  const int N = static_cast<int>(mu.size());
  const TestFamily pwc = TestFamily::piecewise_constant(N);
  return make_cell_walk(
      MCOTProblem({{pwc, std::move(mu)}, {pwc, std::move(nu)}}, CostFunction::power_distance(p)));
}

// Optimum over the full grid of cells: the reference the walk can at best hit.
double full_grid_optimum(const CellWalkProblem& walk) {
  std::vector<std::pair<int, int>> cells;
  for (int i = 1; i <= walk.N; ++i)
    for (int j = 1; j <= walk.N; ++j) cells.emplace_back(i, j);
  const auto sol = solve_cell_weights(walk, cells);
  EXPECT_EQ(sol.status, mcot::LPStatus::Optimal);
  return sol.objective;
}

// Independent oracle: the quantile (north-west corner) pairing of the two
// mass staircases, optimal because the cell-pair cost is convex in i - j.
double monotone_merge_value(const CellWalkProblem& walk) {
  double total = 0.0;
  std::size_t i = 0, j = 0;
  double ra = walk.mu_masses[0], rb = walk.nu_masses[0];
  while (i < walk.mu_masses.size() && j < walk.nu_masses.size()) {
    const double take = std::min(ra, rb);
    total += take * walk.cell_costs(static_cast<int>(i), static_cast<int>(j));
    ra -= take;
    rb -= take;
    if (ra <= 1e-15 && ++i < walk.mu_masses.size()) ra = walk.mu_masses[i];
    if (rb <= 1e-15 && ++j < walk.nu_masses.size()) rb = walk.nu_masses[j];
  }
  return total;
}

// Row/column sums of a configuration against the walk's prescribed masses.
double mass_mismatch(const CellWalkProblem& walk, const CellConfiguration& config) {
  std::vector<double> row(static_cast<std::size_t>(walk.N), 0.0), col(row);
  for (std::size_t k = 0; k < config.cells.size(); ++k) {
    row[static_cast<std::size_t>(config.cells[k].first - 1)] += config.weights[k];
    col[static_cast<std::size_t>(config.cells[k].second - 1)] += config.weights[k];
  }
  double worst = 0.0;
  for (int m = 0; m < walk.N; ++m) {
    worst = std::max(worst, std::abs(row[static_cast<std::size_t>(m)] -
                                     walk.mu_masses[static_cast<std::size_t>(m)]));
    worst = std::max(worst, std::abs(col[static_cast<std::size_t>(m)] -
                                     walk.nu_masses[static_cast<std::size_t>(m)]));
  }
  return worst;
}

TEST(CellCost, ClosestCornerValues) {
  const CostFunction p1 = CostFunction::power_distance(1.0);
  const CostFunction p2 = CostFunction::power_distance(2.0);
  EXPECT_DOUBLE_EQ(cell_cost(2, 2, 4, p1), 0.0);
  EXPECT_DOUBLE_EQ(cell_cost(2, 2, 4, p2), 0.0);
  EXPECT_DOUBLE_EQ(cell_cost(1, 2, 4, p2), 0.0);  // adjacent cells touch
  EXPECT_DOUBLE_EQ(cell_cost(2, 1, 4, p2), 0.0);
  EXPECT_DOUBLE_EQ(cell_cost(1, 3, 4, p2), 1.0 / 16.0);
  EXPECT_DOUBLE_EQ(cell_cost(3, 1, 4, p2), 1.0 / 16.0);
  EXPECT_DOUBLE_EQ(cell_cost(1, 4, 4, p1), 0.5);
  EXPECT_DOUBLE_EQ(cell_cost(4, 1, 4, p1), 0.5);
  EXPECT_THROW(cell_cost(0, 1, 4, p1), std::out_of_range);
  EXPECT_THROW(cell_cost(1, 5, 4, p1), std::out_of_range);
}

TEST(CellWalk, CachesMassesAndCosts) {
  const CellWalkProblem walk = make_cell_walk(cell_problem(4, 1.0));
  EXPECT_EQ(walk.N, 4);
  const std::vector<double> mu = mcot::cell_masses(cubic_growth(), 4);
  for (int m = 0; m < 4; ++m) EXPECT_NEAR(walk.mu_masses[static_cast<std::size_t>(m)], mu[static_cast<std::size_t>(m)], 1e-15);
  EXPECT_DOUBLE_EQ(walk.cell_costs(0, 2), 0.25);
  EXPECT_DOUBLE_EQ(walk.cell_costs(3, 0), 0.5);

  // Needs the plain two-marginal cell-indicator shape.
  EXPECT_THROW(make_cell_walk(MCOTProblem(
                   {marginal_constraints(TestFamily::hat(4), cubic_growth()),
                    marginal_constraints(TestFamily::hat(4), linear_decay())},
                   CostFunction::power_distance(1.0))),
               std::invalid_argument);
  const TestFamily pwc4 = TestFamily::piecewise_constant(4);
  const std::vector<double> quarter(4, 0.25);
  EXPECT_THROW(make_cell_walk(MCOTProblem({{pwc4, quarter}, {pwc4, quarter}},
                                          CostFunction::power_distance(1.0), true)),
               std::invalid_argument);
  EXPECT_THROW(
      make_cell_walk(MCOTProblem(
          {{pwc4, quarter}, {TestFamily::piecewise_constant(5), std::vector<double>(5, 0.2)}},
          CostFunction::power_distance(1.0))),
      std::invalid_argument);
}

TEST(InitConfiguration, UnshuffledStartIsOptimal) {
  const MCOTProblem prob = cell_problem(4, 1.0);
  const CellWalkProblem walk = make_cell_walk(prob);
  const CellConfiguration config = init_configuration(prob, 10, 3, /*shuffle=*/false);

  EXPECT_EQ(config.particle_count(), 10);
  std::vector<std::pair<int, int>> sorted = config.cells;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_TRUE(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
  EXPECT_LE(mass_mismatch(walk, config), 1e-12);

  const double reference = full_grid_optimum(walk);
  EXPECT_NEAR(reference, 41.0 / 256.0, 1e-12);  // hand-merged staircase value
  EXPECT_NEAR(config.cost, reference, 1e-12);
  EXPECT_NEAR(monotone_merge_value(walk), reference, 1e-12);
}

TEST(InitConfiguration, DiagonalForIdenticalMarginals) {
  const TestFamily pwc4 = TestFamily::piecewise_constant(4);
  const std::vector<double> mu = mcot::cell_masses(cubic_growth(), 4);
  const MCOTProblem prob({{pwc4, mu}, {pwc4, mu}}, CostFunction::power_distance(2.0));
  const CellConfiguration config = init_configuration(prob, 10, 5, /*shuffle=*/false);
  EXPECT_DOUBLE_EQ(config.cost, 0.0);
}

TEST(InitConfiguration, ShuffledStartsAreReproducibleAndFeasible) {
  const MCOTProblem prob = cell_problem(5, 1.0);
  const CellWalkProblem walk = make_cell_walk(prob);
  const CellConfiguration a = init_configuration(prob, 12, 42, true);
  const CellConfiguration b = init_configuration(prob, 12, 42, true);
  EXPECT_EQ(a.cells, b.cells);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.cost, b.cost);
  EXPECT_LE(mass_mismatch(walk, a), 1e-12);
  EXPECT_GE(a.cost, full_grid_optimum(walk) - 1e-12);

  EXPECT_THROW(init_configuration(prob, 11, 1, true), std::invalid_argument);  // < 2N+2
  EXPECT_THROW(init_configuration(prob, 26, 1, true), std::invalid_argument);  // > N^2
}

TEST(MonotonePairing, MatchesLinearProgramOnRandomMasses) {
  Prng rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    const int N = 6;
    std::vector<double> mu(static_cast<std::size_t>(N)), nu(mu);
    double su = 0.0, sv = 0.0;
    for (int m = 0; m < N; ++m) {
      mu[static_cast<std::size_t>(m)] = 0.05 + rng.uniform();
      nu[static_cast<std::size_t>(m)] = 0.05 + rng.uniform();
      su += mu[static_cast<std::size_t>(m)];
      sv += nu[static_cast<std::size_t>(m)];
    }
    for (int m = 0; m < N; ++m) {
      mu[static_cast<std::size_t>(m)] /= su;
      nu[static_cast<std::size_t>(m)] /= sv;
    }
    const double p = (trial % 2 == 0) ? 1.0 : 2.0;
    const CellWalkProblem walk = walk_with_masses(mu, nu, p);
    EXPECT_NEAR(monotone_merge_value(walk), full_grid_optimum(walk), 1e-10);
  }
}

// Hand-built three-cell-grid state: every cell occupied except (3,3).  The
// two movable particles sit at (2,3) and (3,2); each has exactly one free
// neighbor, and so does the moved particle afterwards.  With masses
// mu = (.7,.2,.1), nu = (.1,.2,.7) the optimal costs are 1/6 for the current
// state, 1/5 after moving (2,3), and 2/15 after moving (3,2); at beta = 1/30
// the acceptance probability is therefore (1/2) e^{-1} + 1/2.
TEST(MHStep, TwoStateAcceptanceFrequency) {
  const CellWalkProblem walk = walk_with_masses({0.7, 0.2, 0.1}, {0.1, 0.2, 0.7}, 1.0);
  std::vector<std::pair<int, int>> cells;
  for (int i = 1; i <= 3; ++i)
    for (int j = 1; j <= 3; ++j)
      if (!(i == 3 && j == 3)) cells.emplace_back(i, j);
  const auto sol = solve_cell_weights(walk, cells);
  ASSERT_EQ(sol.status, mcot::LPStatus::Optimal);
  EXPECT_NEAR(sol.objective, 1.0 / 6.0, 1e-12);
  const CellConfiguration state = [&] {
    CellConfiguration c;
    c.N = 3;
    c.cells = cells;
    c.weights.assign(sol.x.data(), sol.x.data() + sol.x.size());
    c.cost = sol.objective;
    c.basis = sol.basis;
    return c;
  }();

  // The two proposal targets, checked directly.
  auto moved = cells;
  moved[5] = {3, 3};  // (2,3) -> (3,3)
  EXPECT_NEAR(solve_cell_weights(walk, moved).objective, 1.0 / 5.0, 1e-12);
  moved = cells;
  moved[7] = {3, 3};  // (3,2) -> (3,3)
  EXPECT_NEAR(solve_cell_weights(walk, moved).objective, 2.0 / 15.0, 1e-12);

  MHParams params;
  params.beta = 1.0 / 30.0;
  Prng rng(2024);
  const int trials = 100000;
  int accepted = 0;
  for (int t = 0; t < trials; ++t) {
    const auto step = mh_step(walk, state, params, rng);
    ASSERT_TRUE(step.proposed);
    if (step.accepted) ++accepted;
  }
  const double expected = 0.5 + 0.5 * std::exp(-1.0);
  const double sigma = std::sqrt(expected * (1.0 - expected) / trials);
  EXPECT_NEAR(static_cast<double>(accepted) / trials, expected, 3.0 * sigma);
}

TEST(MHStep, HugeBetaDegeneratesToNeighborhoodRatio) {
  const CellWalkProblem walk = walk_with_masses({0.7, 0.2, 0.1}, {0.1, 0.2, 0.7}, 1.0);
  std::vector<std::pair<int, int>> cells;
  for (int i = 1; i <= 3; ++i)
    for (int j = 1; j <= 3; ++j)
      if (!(i == 3 && j == 3)) cells.emplace_back(i, j);
  const auto sol = solve_cell_weights(walk, cells);
  CellConfiguration state;
  state.N = 3;
  state.cells = cells;
  state.weights.assign(sol.x.data(), sol.x.data() + sol.x.size());
  state.cost = sol.objective;
  state.basis = sol.basis;

  // Both proposals have free-neighborhood ratio 1, so with the exponent
  // flattened away every proposal is accepted.
  MHParams params;
  params.beta = 1e300;
  Prng rng(5);
  for (int t = 0; t < 1000; ++t) {
    const auto step = mh_step(walk, state, params, rng);
    EXPECT_TRUE(step.accepted);
  }
}

TEST(MHStep, InfeasibleProposalLeavesStateUnchanged) {
  const CellWalkProblem walk = walk_with_masses({0.6, 0.4}, {0.5, 0.5}, 1.0);
  const std::vector<std::pair<int, int>> cells = {{1, 1}, {1, 2}, {2, 1}};
  const auto sol = solve_cell_weights(walk, cells);
  ASSERT_EQ(sol.status, mcot::LPStatus::Optimal);
  CellConfiguration state;
  state.N = 2;
  state.cells = cells;
  state.weights.assign(sol.x.data(), sol.x.data() + sol.x.size());
  state.cost = sol.objective;
  state.basis = sol.basis;

  // Moving (1,2) to (2,2) strands the first row's excess mass: infeasible.
  // Moving (2,1) to (2,2) stays feasible at equal cost, so it is accepted.
  MHParams params;
  params.beta = 1.0;
  Prng rng(11);
  int accepted = 0, rejected = 0;
  for (int t = 0; t < 200; ++t) {
    const auto step = mh_step(walk, state, params, rng);
    ASSERT_TRUE(step.proposed);
    if (step.accepted) {
      ++accepted;
      EXPECT_EQ(step.state.cells[2], (std::pair<int, int>(2, 2)));
    } else {
      ++rejected;
      EXPECT_EQ(step.state.cells, state.cells);
      EXPECT_EQ(step.state.weights, state.weights);
      EXPECT_EQ(step.state.cost, state.cost);
    }
  }
  EXPECT_GT(accepted, 0);
  EXPECT_GT(rejected, 0);
}

TEST(RunMH, SmokeRunReachesOptimumWithInvariants) {
  const MCOTProblem prob = cell_problem(4, 1.0);
  const CellWalkProblem walk = make_cell_walk(prob);
  const double reference = full_grid_optimum(walk);

  MHParams params;
  params.beta = 1e-3;
  params.iterations = 3000;
  params.seed = 7;
  const auto result = run_mh(prob, params);

  EXPECT_NEAR(result.best.cost, reference, 1e-9);
  EXPECT_LE(mass_mismatch(walk, result.best), 1e-9);
  EXPECT_LE(mass_mismatch(walk, result.last), 1e-9);

  double prev_best = std::numeric_limits<double>::infinity();
  for (const auto& row : result.trace) {
    EXPECT_LE(row.cost_best, prev_best + 1e-15);
    EXPECT_GE(row.cost_best, reference - 1e-12);
    prev_best = row.cost_best;
  }

  const auto again = run_mh(prob, params);
  ASSERT_EQ(again.trace.size(), result.trace.size());
  for (std::size_t t = 0; t < result.trace.size(); ++t) {
    EXPECT_EQ(again.trace[t].cost_current, result.trace[t].cost_current);
    EXPECT_EQ(again.trace[t].cost_best, result.trace[t].cost_best);
    EXPECT_EQ(again.trace[t].accepted, result.trace[t].accepted);
  }
}

TEST(RunMH, EveryVisitedConfigurationIsFeasible) {
  const MCOTProblem prob = cell_problem(4, 2.0);
  const CellWalkProblem walk = make_cell_walk(prob);
  Prng rng(13);
  CellConfiguration state = init_configuration(walk, 12, rng, /*shuffle=*/true);
  MHParams params;
  params.beta = 1e-3;
  for (int t = 0; t < 500; ++t) {
    state = mh_step(walk, state, params, rng).state;
    ASSERT_LE(mass_mismatch(walk, state), 1e-9);
  }
}

}  // namespace
