// mcot: moment-constrained optimal transport driver.
//
// Subcommands:
//   oracle  — recompute every derived reference value and write fixtures.json
//   mh      — cell-walk Metropolis-Hastings over piecewise-constant constraints
//   pgd     — penalized particle descent (two | multi | sym | martingale)
//   rates   — rate-verification experiments emitting CSV + a JSON summary
//   reduce  — support reduction of a discrete-measure CSV
//
// Contracts honored throughout: JSON configs are schema-checked with unknown
// keys rejected; every output file starts with a header row; the same config
// and seed produce byte-identical files.  Exit codes: 0 success, 2 config
// error, 3 infeasible problem, 4 convergence failure (budget exhausted or a
// configured target missed), 1 unexpected internal error.  Errors print one
// machine-readable JSON line to stderr.  The output directory comes from
// --out-dir, else $MCOT_OUT_DIR, else the config's "output_dir", else ".".

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mcot/descent.hpp"
#include "mcot/io.hpp"
#include "mcot/measures.hpp"
#include "mcot/metropolis.hpp"
#include "mcot/problem.hpp"
#include "mcot/rates.hpp"
#include "mcot/test_functions.hpp"

namespace {

using mcot::ConfigError;
using mcot::CostFunction;
using mcot::CsvWriter;
using mcot::DiscreteMeasure;
using mcot::json;
using mcot::Marginal1D;
using mcot::MarginalConstraints;
using mcot::MCOTProblem;
using mcot::TestFamily;

void print_error(const std::string& kind, const std::string& detail) {
  std::cerr << json{{"error", kind}, {"detail", detail}}.dump() << '\n';
}

// Maps thrown errors onto the exit-code protocol; see the file header.
int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    print_error("config", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    print_error("config", e.what());
    return 2;
  } catch (const std::domain_error& e) {
    print_error("config", e.what());
    return 2;
  } catch (const std::runtime_error& e) {
    const std::string message = e.what();
    if (message.find("feasible") != std::string::npos ||
        message.find("optimum") != std::string::npos ||
        message.find("non-negative") != std::string::npos) {
      print_error("infeasible", message);
      return 3;
    }
    print_error("runtime", message);
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
}

std::string resolve_out_dir(const json& cfg, const std::string& flag_value) {
  std::string dir = ".";
  if (cfg.contains("output_dir")) {
    if (!cfg.at("output_dir").is_string())
      throw ConfigError("\"output_dir\" must be a string");
    dir = cfg.at("output_dir").get<std::string>();
  }
  if (const char* env = std::getenv("MCOT_OUT_DIR"); env != nullptr && *env != '\0') dir = env;
  if (!flag_value.empty()) dir = flag_value;
  std::filesystem::create_directories(dir);
  return dir;
}

std::string in_dir(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

std::vector<json> marginal_specs(const json& cfg, std::size_t expected, const std::string& where) {
  const json& mj = mcot::require_field(cfg, "marginals", where);
  if (!mj.is_array() || (expected > 0 && mj.size() != expected))
    throw ConfigError(where + ": \"marginals\" must be an array" +
                      (expected > 0 ? " of " + std::to_string(expected) + " specs" : ""));
  return std::vector<json>(mj.begin(), mj.end());
}

std::vector<int> int_list_or(const json& cfg, const std::string& key, std::vector<int> fallback,
                             const std::string& where) {
  if (!cfg.contains(key)) return fallback;
  const json& v = cfg.at(key);
  if (!v.is_array() || v.empty())
    throw ConfigError(where + ": \"" + key + "\" must be a non-empty array of integers");
  std::vector<int> out;
  for (const json& e : v) {
    if (!e.is_number_integer())
      throw ConfigError(where + ": \"" + key + "\" must contain integers only");
    out.push_back(e.get<int>());
  }
  return out;
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

int cmd_oracle(const std::string& out_dir_flag, const std::string& out_name) {
  const std::string dir = resolve_out_dir(json::object(), out_dir_flag);
  mcot::write_json_file(mcot::compute_fixtures(), in_dir(dir, out_name));
  return 0;
}

// ---------------------------------------------------------------------------
// mh
// ---------------------------------------------------------------------------

int cmd_mh(const std::string& config_path, const std::string& out_dir_flag,
           std::optional<long> seed_override) {
  const json cfg = mcot::load_json_file(config_path);
  const std::string where = "mh config";
  mcot::reject_unknown_keys(
      cfg, {"marginals", "cost", "N", "K", "beta", "iters", "seed", "target_cost", "output_dir"},
      where);
  const int N = static_cast<int>(mcot::require_integer(cfg, "N", where));
  const std::vector<json> specs = marginal_specs(cfg, 2, where);
  const TestFamily fam = TestFamily::piecewise_constant(N);
  const Marginal1D mu = mcot::marginal_from_json(specs[0]);
  const Marginal1D nu = mcot::marginal_from_json(specs[1]);
  const CostFunction cost = mcot::cost_from_json(mcot::require_field(cfg, "cost", where));
  MCOTProblem prob({mcot::marginal_constraints(fam, mu), mcot::marginal_constraints(fam, nu)},
                   cost);

  mcot::MHParams params;
  params.beta = mcot::require_number(cfg, "beta", where);
  params.iterations = mcot::require_integer(cfg, "iters", where);
  params.seed = static_cast<std::uint64_t>(
      seed_override.value_or(mcot::integer_or(cfg, "seed", 0, where)));
  params.K = static_cast<int>(mcot::integer_or(cfg, "K", 0, where));

  const mcot::MHResult result = mcot::run_mh(prob, params);

  const std::string dir = resolve_out_dir(cfg, out_dir_flag);
  {
    CsvWriter trace(in_dir(dir, "mh_trace.csv"), {"iter", "cost_current", "cost_best", "accepted"});
    for (const mcot::MHTraceRow& row : result.trace)
      trace.row({CsvWriter::cell(row.iter), CsvWriter::cell(row.cost_current),
                 CsvWriter::cell(row.cost_best), CsvWriter::cell(row.accepted)});
  }
  {
    // Best configuration found along the walk (weights re-optimized per support).
    CsvWriter final_csv(in_dir(dir, "mh_final.csv"), {"w", "i", "j"});
    for (int k = 0; k < result.best.particle_count(); ++k)
      final_csv.row({CsvWriter::cell(result.best.weights[static_cast<std::size_t>(k)]),
                     CsvWriter::cell(result.best.cells[static_cast<std::size_t>(k)].first),
                     CsvWriter::cell(result.best.cells[static_cast<std::size_t>(k)].second)});
  }
  long accepted = 0;
  for (const mcot::MHTraceRow& row : result.trace) accepted += row.accepted ? 1 : 0;
  mcot::write_json_file(json{{"best_cost", result.best.cost},
                             {"last_cost", result.last.cost},
                             {"accepted", accepted},
                             {"iterations", static_cast<long>(result.trace.size())}},
                        in_dir(dir, "mh_summary.json"));

  if (cfg.contains("target_cost") &&
      result.best.cost > mcot::require_number(cfg, "target_cost", where))
    return 4;
  return 0;
}

// ---------------------------------------------------------------------------
// pgd
// ---------------------------------------------------------------------------

MarginalConstraints constraints_from_spec(const json& spec, const TestFamily& fam,
                                          int subpanels) {
  if (mcot::is_gaussian2d_spec(spec)) {
    Eigen::Vector2d mean;
    Eigen::Matrix2d cov;
    mcot::gaussian2d_from_json(spec, mean, cov);
    return MarginalConstraints{fam, mcot::gaussian_mesh_targets(fam, mean, cov, subpanels)};
  }
  return mcot::marginal_constraints(fam, mcot::marginal_from_json(spec));
}

int cmd_pgd(const std::string& config_path, const std::string& out_dir_flag,
            std::optional<long> seed_override) {
  const json cfg = mcot::load_json_file(config_path);
  const std::string where = "pgd config";
  mcot::reject_unknown_keys(cfg,
                            {"variant", "marginals", "family", "cost", "eta_inv", "iters",
                             "grad_tol", "K", "seed", "n_prime", "copies", "subpanels",
                             "output_dir"},
                            where);
  const std::string variant = mcot::string_or(cfg, "variant", "two", where);
  const TestFamily fam = mcot::family_from_json(mcot::require_field(cfg, "family", where));
  const CostFunction cost = mcot::cost_from_json(mcot::require_field(cfg, "cost", where));
  const int subpanels = static_cast<int>(mcot::integer_or(cfg, "subpanels", 8, where));

  std::vector<MarginalConstraints> blocks;
  bool symmetric = false;
  std::optional<TestFamily> martingale;
  if (variant == "two" || variant == "martingale") {
    for (const json& spec : marginal_specs(cfg, 2, where))
      blocks.push_back(constraints_from_spec(spec, fam, subpanels));
    if (variant == "martingale")
      martingale = mcot::martingale_family(
          static_cast<int>(mcot::require_integer(cfg, "n_prime", where)));
  } else if (variant == "multi") {
    for (const json& spec : marginal_specs(cfg, 0, where))
      blocks.push_back(constraints_from_spec(spec, fam, subpanels));
    if (blocks.size() < 2) throw ConfigError(where + ": \"multi\" needs at least two marginals");
  } else if (variant == "sym") {
    const std::vector<json> specs = marginal_specs(cfg, 1, where);
    const long copies = mcot::require_integer(cfg, "copies", where);
    if (copies < 2) throw ConfigError(where + ": \"copies\" must be at least 2");
    const MarginalConstraints block = constraints_from_spec(specs[0], fam, subpanels);
    for (long i = 0; i < copies; ++i) blocks.push_back(block);
    symmetric = true;
  } else {
    throw ConfigError(where + ": unknown variant \"" + variant + "\"");
  }
  MCOTProblem prob(std::move(blocks), cost, symmetric, martingale);

  mcot::PGDParams params;
  const double eta_inv = mcot::require_number(cfg, "eta_inv", where);
  if (!(eta_inv > 0.0)) throw ConfigError(where + ": \"eta_inv\" must be positive");
  params.eta = 1.0 / eta_inv;
  params.max_outer = mcot::integer_or(cfg, "iters", 10000, where);
  params.grad_tol = mcot::number_or(cfg, "grad_tol", 1e-6, where);
  params.K = static_cast<int>(mcot::integer_or(cfg, "K", 0, where));
  params.seed = static_cast<std::uint64_t>(
      seed_override.value_or(mcot::integer_or(cfg, "seed", 0, where)));

  const mcot::PGDResult result = mcot::pgd_run(prob, params);

  const std::string dir = resolve_out_dir(cfg, out_dir_flag);
  {
    CsvWriter trace(in_dir(dir, "pgd_trace.csv"), {"iter", "F", "cost", "penalty", "grad_norm"});
    for (const mcot::PGDTraceRow& row : result.trace)
      trace.row({CsvWriter::cell(row.iter), CsvWriter::cell(row.objective),
                 CsvWriter::cell(row.cost), CsvWriter::cell(row.penalty),
                 CsvWriter::cell(row.grad_norm)});
  }
  {
    // Final particle cloud, heaviest first.
    std::vector<std::string> header{"w"};
    for (int d = 1; d <= result.state.positions.cols(); ++d)
      header.push_back("x" + std::to_string(d));
    CsvWriter final_csv(in_dir(dir, "pgd_final.csv"), header);
    const Eigen::VectorXd w = result.state.weights();
    std::vector<int> order(static_cast<std::size_t>(result.state.particle_count()));
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = static_cast<int>(k);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return w(a) > w(b); });
    for (int k : order) {
      std::vector<std::string> cells{CsvWriter::cell(w(k))};
      for (int d = 0; d < result.state.positions.cols(); ++d)
        cells.push_back(CsvWriter::cell(result.state.positions(k, d)));
      final_csv.row(cells);
    }
  }
  const mcot::ObjectiveParts parts = mcot::penalized_parts(prob, result.state, params.eta);
  const DiscreteMeasure final_measure = mcot::detail::measure_from_state(result.state);
  const mcot::ConstraintResidual res = mcot::residuals(prob, final_measure);
  mcot::write_json_file(json{{"converged", result.converged},
                             {"iterations", result.iterations},
                             {"F", parts.objective},
                             {"cost", parts.cost},
                             {"penalty", parts.penalty},
                             {"max_residual", res.max_abs}},
                        in_dir(dir, "pgd_summary.json"));
  return result.converged ? 0 : 4;
}

// ---------------------------------------------------------------------------
// rates
// ---------------------------------------------------------------------------

std::pair<Marginal1D, Marginal1D> rates_pair(const json& cfg, const std::string& where) {
  if (!cfg.contains("marginals"))
    return {Marginal1D::poly_density({0.0, 0.0, 3.0}), Marginal1D::poly_density({2.0, -2.0})};
  const std::vector<json> specs = marginal_specs(cfg, 2, where);
  return {mcot::marginal_from_json(specs[0]), mcot::marginal_from_json(specs[1])};
}

mcot::ProxyParams proxy_from(const json& cfg, const std::string& where,
                             std::optional<long> seed_override) {
  mcot::ProxyParams proxy;
  proxy.restarts = static_cast<int>(mcot::integer_or(cfg, "restarts", proxy.restarts, where));
  const double eta_inv = mcot::number_or(cfg, "eta_inv", 1.0 / proxy.eta, where);
  if (!(eta_inv > 0.0)) throw ConfigError(where + ": \"eta_inv\" must be positive");
  proxy.eta = 1.0 / eta_inv;
  proxy.max_outer = mcot::integer_or(cfg, "iters", proxy.max_outer, where);
  proxy.grad_tol = mcot::number_or(cfg, "grad_tol", proxy.grad_tol, where);
  proxy.seed = static_cast<std::uint64_t>(
      seed_override.value_or(mcot::integer_or(cfg, "seed", 0, where)));
  return proxy;
}

int cmd_rates(const std::string& experiment, const std::string& config_path,
              const std::string& fixtures_path, const std::string& out_dir_flag,
              std::optional<long> seed_override) {
  // Gate: the checked-in fixtures must match this build's own oracles.
  const json pinned = mcot::load_json_file(fixtures_path);
  const std::vector<mcot::FixtureDrift> drift =
      mcot::fixture_drift(pinned, mcot::compute_fixtures());
  if (!drift.empty()) {
    std::string names;
    for (const mcot::FixtureDrift& d : drift) names += (names.empty() ? "" : ", ") + d.name;
    throw ConfigError("fixture drift beyond tolerance in: " + names +
                      " (regenerate with `mcot oracle`)");
  }

  const json cfg = config_path.empty() ? json::object() : mcot::load_json_file(config_path);
  const std::string where = "rates config";
  mcot::RateReport rep;
  if (experiment == "pwc") {
    mcot::reject_unknown_keys(
        cfg, {"marginals", "cost_power", "lipschitz", "Ns", "output_dir"}, where);
    const auto [mu, nu] = rates_pair(cfg, where);
    rep = mcot::pwc_sandwich(mu, nu, mcot::number_or(cfg, "cost_power", 1.0, where),
                             mcot::number_or(cfg, "lipschitz", 1.0, where),
                             int_list_or(cfg, "Ns", {5, 10, 20, 40}, where));
  } else if (experiment == "w1") {
    mcot::reject_unknown_keys(cfg,
                              {"marginals", "sign_changes", "Ns", "solver", "refine", "restarts",
                               "eta_inv", "iters", "grad_tol", "seed", "output_dir"},
                              where);
    const auto [mu, nu] = rates_pair(cfg, where);
    const std::string solver = mcot::string_or(cfg, "solver", "grid-lp", where);
    if (solver != "grid-lp" && solver != "pgd")
      throw ConfigError(where + ": \"solver\" must be \"grid-lp\" or \"pgd\"");
    rep = mcot::affine_w1_rate(
        mu, nu, static_cast<int>(mcot::integer_or(cfg, "sign_changes", 0, where)),
        int_list_or(cfg, "Ns", {5, 10, 20}, where),
        solver == "pgd" ? mcot::W1Solver::PgdRestarts : mcot::W1Solver::RefinedGridLP,
        proxy_from(cfg, where, seed_override),
        static_cast<int>(mcot::integer_or(cfg, "refine", 2, where)));
  } else if (experiment == "w2") {
    mcot::reject_unknown_keys(cfg,
                              {"marginals", "Ns", "with_proxy", "restarts", "eta_inv", "iters",
                               "grad_tol", "seed", "output_dir"},
                              where);
    const auto [mu, nu] = rates_pair(cfg, where);
    const bool with_proxy = cfg.contains("with_proxy") && cfg.at("with_proxy").is_boolean() &&
                            cfg.at("with_proxy").get<bool>();
    rep = mcot::affine_w2_rate(mu, nu, int_list_or(cfg, "Ns", {4, 8, 16}, where), with_proxy,
                               proxy_from(cfg, where, seed_override));
  } else if (experiment == "smooth") {
    mcot::reject_unknown_keys(
        cfg, {"marginal", "curvature_sup", "density_min", "Ns", "p", "output_dir"}, where);
    const Marginal1D mu = cfg.contains("marginal")
                              ? mcot::marginal_from_json(cfg.at("marginal"))
                              : Marginal1D::poly_density({0.0, 0.0, 3.0});
    rep = mcot::smooth_moment_bound(mu, mcot::number_or(cfg, "curvature_sup", 6.0, where),
                                    mcot::number_or(cfg, "density_min", 0.0, where),
                                    int_list_or(cfg, "Ns", {2, 4, 8, 16}, where),
                                    mcot::number_or(cfg, "p", 1.0, where));
  } else if (experiment == "sweep") {
    mcot::reject_unknown_keys(cfg,
                              {"kind", "marginals", "cost_power", "lipschitz", "Ns", "N",
                               "n_primes", "eta_inv", "restarts", "iters", "grad_tol",
                               "chain_tolerance", "seed", "exact", "output_dir"},
                              where);
    const std::string kind = mcot::string_or(cfg, "kind", "dyadic", where);
    if (kind == "dyadic") {
      const auto [mu, nu] = rates_pair(cfg, where);
      rep = mcot::convergence_sweep(mu, nu, mcot::number_or(cfg, "cost_power", 1.0, where),
                                    mcot::number_or(cfg, "lipschitz", 1.0, where),
                                    int_list_or(cfg, "Ns", {4, 8, 16, 32}, where));
    } else if (kind == "martingale") {
      mcot::MartingaleSweepParams par;
      par.N = static_cast<int>(mcot::integer_or(cfg, "N", par.N, where));
      par.n_primes = int_list_or(cfg, "n_primes", par.n_primes, where);
      par.cost_power = mcot::number_or(cfg, "cost_power", par.cost_power, where);
      const double eta_inv = mcot::number_or(cfg, "eta_inv", 60.0, where);
      if (!(eta_inv > 0.0)) throw ConfigError(where + ": \"eta_inv\" must be positive");
      par.eta = 1.0 / eta_inv;
      par.restarts = static_cast<int>(mcot::integer_or(cfg, "restarts", par.restarts, where));
      par.max_outer = mcot::integer_or(cfg, "iters", par.max_outer, where);
      par.grad_tol = mcot::number_or(cfg, "grad_tol", par.grad_tol, where);
      par.chain_tolerance = mcot::number_or(cfg, "chain_tolerance", par.chain_tolerance, where);
      par.seed = static_cast<std::uint64_t>(
          seed_override.value_or(mcot::integer_or(cfg, "seed", 0, where)));
      par.exact = mcot::number_or(cfg, "exact", par.exact, where);
      Marginal1D mu = Marginal1D::uniform(0.25, 0.75), nu = Marginal1D::uniform(0.0, 1.0);
      if (cfg.contains("marginals")) {
        const std::vector<json> specs = marginal_specs(cfg, 2, where);
        mu = mcot::marginal_from_json(specs[0]);
        nu = mcot::marginal_from_json(specs[1]);
      }
      rep = mcot::martingale_sweep(mu, nu, par);
    } else {
      throw ConfigError(where + ": \"kind\" must be \"dyadic\" or \"martingale\"");
    }
  } else {
    throw ConfigError("unknown experiment \"" + experiment +
                      "\" (expected pwc | w1 | w2 | smooth | sweep)");
  }

  const std::string dir = resolve_out_dir(cfg, out_dir_flag);
  mcot::write_rate_report_csv(rep, in_dir(dir, "rates_" + experiment + ".csv"));
  mcot::write_json_file(mcot::rate_summary_json(rep),
                        in_dir(dir, "rates_" + experiment + "_summary.json"));
  return 0;
}

// ---------------------------------------------------------------------------
// reduce
// ---------------------------------------------------------------------------

int cmd_reduce(const std::string& config_path, const std::string& out_dir_flag,
               const std::string& dump_lp_path) {
  const json cfg = mcot::load_json_file(config_path);
  const std::string where = "reduce config";
  mcot::reject_unknown_keys(cfg, {"input", "output", "family", "cost", "output_dir"}, where);
  const std::string input = mcot::string_or(cfg, "input", "", where);
  if (input.empty()) throw ConfigError(where + ": missing required key \"input\"");
  const DiscreteMeasure measure = mcot::read_measure_csv(input);
  const TestFamily fam = mcot::family_from_json(mcot::require_field(cfg, "family", where));

  const int fdim = fam.dimension();
  const int dim = static_cast<int>(measure.dimension());
  if (dim % fdim != 0)
    throw ConfigError(where + ": measure dimension " + std::to_string(dim) +
                      " is not a multiple of the family dimension " + std::to_string(fdim));
  const int blocks = dim / fdim;

  // Lambda = (constant, per-block family rows, optional cost): reducing
  // against it preserves total mass, every prescribed moment, and the cost.
  const auto lambda = [&fam, fdim, blocks](const std::vector<double>& p) {
    std::vector<double> out{1.0};
    for (int b = 0; b < blocks; ++b)
      for (int i = 0; i < fam.size(); ++i)
        out.push_back(fdim == 1 ? fam.eval(i, p[static_cast<std::size_t>(b)])
                                : fam.eval2(i, p[static_cast<std::size_t>(2 * b)],
                                            p[static_cast<std::size_t>(2 * b + 1)]));
    return out;
  };
  std::function<double(const std::vector<double>&)> cost_eval;
  if (cfg.contains("cost")) {
    const CostFunction cost = mcot::cost_from_json(cfg.at("cost"));
    cost_eval = [cost](const std::vector<double>& p) { return cost(p); };
  }

  const std::string dir = resolve_out_dir(cfg, out_dir_flag);
  if (!dump_lp_path.empty()) {
    // Debug view of the moment system [A | b]: one row per preserved
    // coordinate, one column per input atom, b = the input measure's moments.
    const std::vector<double> first = lambda(measure.points()[0]);
    const std::size_t rows = first.size() + (cost_eval ? 1 : 0);
    std::vector<std::string> header;
    for (std::size_t k = 1; k <= measure.size(); ++k) header.push_back("a" + std::to_string(k));
    header.push_back("b");
    CsvWriter dump(in_dir(dir, dump_lp_path), header);
    std::vector<std::vector<double>> columns;
    for (std::size_t k = 0; k < measure.size(); ++k) {
      std::vector<double> col = lambda(measure.points()[k]);
      if (cost_eval) col.push_back(cost_eval(measure.points()[k]));
      columns.push_back(std::move(col));
    }
    for (std::size_t r = 0; r < rows; ++r) {
      std::vector<std::string> cells;
      double moment = 0.0;
      for (std::size_t k = 0; k < measure.size(); ++k) {
        cells.push_back(CsvWriter::cell(columns[k][r]));
        moment += measure.weights()[k] * columns[k][r];
      }
      cells.push_back(CsvWriter::cell(moment));
      dump.row(cells);
    }
  }

  const DiscreteMeasure reduced = mcot::tchakaloff_reduce(measure, lambda, cost_eval);

  // Report the worst moment drift introduced by the reduction.
  const std::size_t n0 = lambda(measure.points()[0]).size();
  std::vector<double> before(n0, 0.0), after(n0, 0.0);
  for (std::size_t k = 0; k < measure.size(); ++k) {
    const std::vector<double> v = lambda(measure.points()[k]);
    for (std::size_t r = 0; r < n0; ++r) before[r] += measure.weights()[k] * v[r];
  }
  for (std::size_t k = 0; k < reduced.size(); ++k) {
    const std::vector<double> v = lambda(reduced.points()[k]);
    for (std::size_t r = 0; r < n0; ++r) after[r] += reduced.weights()[k] * v[r];
  }
  double drift = 0.0;
  for (std::size_t r = 0; r < n0; ++r) drift = std::max(drift, std::abs(before[r] - after[r]));

  const std::string out_name = mcot::string_or(cfg, "output", "reduced.csv", where);
  mcot::write_measure_csv(reduced, in_dir(dir, out_name));
  mcot::write_json_file(json{{"atoms_in", static_cast<long>(measure.size())},
                             {"atoms_out", static_cast<long>(reduced.size())},
                             {"budget", static_cast<long>(n0 + (cost_eval ? 1 : 0))},
                             {"moment_drift", drift}},
                        in_dir(dir, "reduce_summary.json"));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"moment-constrained optimal transport driver"};
  app.require_subcommand(1);
  // Let the global --out-dir / --seed flags be written after the subcommand name.
  app.fallthrough();

  std::string out_dir_flag;
  app.add_option("--out-dir", out_dir_flag,
                 "output directory (overrides $MCOT_OUT_DIR and the config)");
  long seed_flag = 0;
  CLI::Option* seed_opt = app.add_option("--seed", seed_flag, "override the config's seed");

  std::string oracle_out = "fixtures.json";
  CLI::App* oracle = app.add_subcommand("oracle", "write the derived-value fixtures file");
  oracle->add_option("--out", oracle_out, "fixtures file name");

  std::string mh_config;
  CLI::App* mh = app.add_subcommand("mh", "cell-walk Metropolis-Hastings");
  mh->add_option("--config", mh_config, "JSON run configuration")->required();

  std::string pgd_config;
  CLI::App* pgd = app.add_subcommand("pgd", "penalized particle descent");
  pgd->add_option("--config", pgd_config, "JSON run configuration")->required();

  std::string rates_experiment, rates_config, rates_fixtures = "fixtures.json";
  CLI::App* rates = app.add_subcommand("rates", "rate-verification experiments");
  rates->add_option("--experiment", rates_experiment, "pwc | w1 | w2 | smooth | sweep")
      ->required();
  rates->add_option("--config", rates_config, "JSON run configuration (optional)");
  rates->add_option("--fixtures", rates_fixtures, "pinned fixtures file (from `mcot oracle`)");

  std::string reduce_config, reduce_dump_lp;
  CLI::App* reduce = app.add_subcommand("reduce", "support reduction of a measure CSV");
  reduce->add_option("--config", reduce_config, "JSON run configuration")->required();
  reduce->add_option("--dump-lp", reduce_dump_lp, "also write the moment system [A|b] as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("config", e.what());
    return 2;
  }

  const std::optional<long> seed_override =
      seed_opt->count() > 0 ? std::optional<long>(seed_flag) : std::nullopt;

  if (oracle->parsed()) return guarded([&] { return cmd_oracle(out_dir_flag, oracle_out); });
  if (mh->parsed()) return guarded([&] { return cmd_mh(mh_config, out_dir_flag, seed_override); });
  if (pgd->parsed())
    return guarded([&] { return cmd_pgd(pgd_config, out_dir_flag, seed_override); });
  if (rates->parsed())
    return guarded([&] {
      return cmd_rates(rates_experiment, rates_config, rates_fixtures, out_dir_flag,
                       seed_override);
    });
  if (reduce->parsed())
    return guarded([&] { return cmd_reduce(reduce_config, out_dir_flag, reduce_dump_lp); });
  print_error("config", "no subcommand given");
  return 2;
}
