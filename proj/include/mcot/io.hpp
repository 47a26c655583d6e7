#pragma once
// File plumbing for the command-line driver: pinned numeric formatting,
// header-carrying CSV files, JSON config parsing with unknown-key rejection,
// JSON -> library-object builders, a structural checker for emitted JSON
// summaries, and the derived-value fixtures file that gates the rate
// experiments.

#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mcot/measures.hpp"
#include "mcot/problem.hpp"
#include "mcot/rates.hpp"
#include "mcot/test_functions.hpp"

namespace mcot {

using nlohmann::json;

// Raised for anything wrong with a run configuration (bad file, bad schema,
// unknown keys, out-of-range values).  The driver turns it into a
// machine-readable error JSON and exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& message) : std::runtime_error(message) {}
};

// ---------------------------------------------------------------------------
// Numeric formatting and CSV output.
// ---------------------------------------------------------------------------

// Shortest C-locale decimal string that round-trips the double exactly.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf);
}

inline std::string format_integer(long v) { return std::to_string(v); }

// Plain comma-separated file writer.  The header row is written on
// construction; every row must carry exactly as many cells as the header.
// Cells must not contain commas or line breaks (numeric traces never do).
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header)
      : out_(path, std::ios::binary), columns_(header.size()) {
    if (!out_) throw std::runtime_error("CsvWriter: cannot open " + path);
    if (header.empty()) throw std::invalid_argument("CsvWriter: empty header");
    write_cells(header);
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_)
      throw std::invalid_argument("CsvWriter: row width does not match the header");
    write_cells(cells);
  }

  static std::string cell(double v) { return format_double(v); }
  static std::string cell(long v) { return format_integer(v); }
  static std::string cell(int v) { return format_integer(v); }
  static std::string cell(bool v) { return v ? "1" : "0"; }
  static std::string cell(const std::string& v) { return v; }

 private:
  void write_cells(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  std::ofstream out_;
  std::size_t columns_;
};

// ---------------------------------------------------------------------------
// JSON configuration helpers.
// ---------------------------------------------------------------------------

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("invalid JSON in " + path + ": " + e.what());
  }
}

// Every config object is closed: a key outside the allowed list is an error,
// so typos fail loudly instead of silently running defaults.
inline void reject_unknown_keys(const json& obj, const std::vector<std::string>& allowed,
                                const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const std::string& key : allowed)
      if (item.key() == key) {
        known = true;
        break;
      }
    if (!known) throw ConfigError(where + ": unknown key \"" + item.key() + "\"");
  }
}

inline const json& require_field(const json& obj, const std::string& key,
                                 const std::string& where) {
  if (!obj.contains(key)) throw ConfigError(where + ": missing required key \"" + key + "\"");
  return obj.at(key);
}

inline double require_number(const json& obj, const std::string& key, const std::string& where) {
  const json& v = require_field(obj, key, where);
  if (!v.is_number()) throw ConfigError(where + ": \"" + key + "\" must be a number");
  return v.get<double>();
}

inline long require_integer(const json& obj, const std::string& key, const std::string& where) {
  const json& v = require_field(obj, key, where);
  if (!v.is_number_integer()) throw ConfigError(where + ": \"" + key + "\" must be an integer");
  return v.get<long>();
}

inline double number_or(const json& obj, const std::string& key, double fallback,
                        const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_number()) throw ConfigError(where + ": \"" + key + "\" must be a number");
  return obj.at(key).get<double>();
}

inline long integer_or(const json& obj, const std::string& key, long fallback,
                       const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_number_integer())
    throw ConfigError(where + ": \"" + key + "\" must be an integer");
  return obj.at(key).get<long>();
}

inline std::string string_or(const json& obj, const std::string& key, const std::string& fallback,
                             const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_string()) throw ConfigError(where + ": \"" + key + "\" must be a string");
  return obj.at(key).get<std::string>();
}

// ---------------------------------------------------------------------------
// JSON spec -> library object builders.
// ---------------------------------------------------------------------------

// {"kind":"poly","coeffs":[c0,c1,...]} | {"kind":"uniform","a":..,"b":..}
// | {"kind":"empirical","atoms":[..],"weights":[..]}
inline Marginal1D marginal_from_json(const json& spec) {
  const std::string where = "marginal spec";
  const std::string kind =
      require_field(spec, "kind", where).is_string() ? spec.at("kind").get<std::string>() : "";
  if (kind == "poly") {
    reject_unknown_keys(spec, {"kind", "coeffs"}, where);
    const json& cj = require_field(spec, "coeffs", where);
    if (!cj.is_array() || cj.empty()) throw ConfigError(where + ": \"coeffs\" must be an array");
    std::vector<double> coeffs;
    for (const json& c : cj) {
      if (!c.is_number()) throw ConfigError(where + ": coefficients must be numbers");
      coeffs.push_back(c.get<double>());
    }
    return Marginal1D::poly_density(coeffs);
  }
  if (kind == "uniform") {
    reject_unknown_keys(spec, {"kind", "a", "b"}, where);
    return Marginal1D::uniform(require_number(spec, "a", where),
                               require_number(spec, "b", where));
  }
  if (kind == "empirical") {
    reject_unknown_keys(spec, {"kind", "atoms", "weights"}, where);
    const json& aj = require_field(spec, "atoms", where);
    const json& wj = require_field(spec, "weights", where);
    if (!aj.is_array() || !wj.is_array() || aj.size() != wj.size() || aj.empty())
      throw ConfigError(where + ": \"atoms\" and \"weights\" must be equal-length arrays");
    std::vector<double> atoms, weights;
    for (const json& a : aj) atoms.push_back(a.get<double>());
    for (const json& w : wj) weights.push_back(w.get<double>());
    return Marginal1D::empirical(atoms, weights);
  }
  throw ConfigError(where + ": unknown kind \"" + kind + "\"");
}

// {"cost":"power","p":1.0} | {"cost":"quadratic2d"} | {"cost":"coulomb","marginals":3}
inline CostFunction cost_from_json(const json& spec) {
  const std::string where = "cost spec";
  const std::string kind =
      require_field(spec, "cost", where).is_string() ? spec.at("cost").get<std::string>() : "";
  if (kind == "power") {
    reject_unknown_keys(spec, {"cost", "p"}, where);
    return CostFunction::power_distance(require_number(spec, "p", where));
  }
  if (kind == "quadratic2d") {
    reject_unknown_keys(spec, {"cost"}, where);
    return CostFunction::quadratic2d();
  }
  if (kind == "coulomb") {
    reject_unknown_keys(spec, {"cost", "marginals"}, where);
    return CostFunction::coulomb(static_cast<int>(require_integer(spec, "marginals", where)));
  }
  throw ConfigError(where + ": unknown cost \"" + kind + "\"");
}

// {"family":"pwc","N":20} | {"family":"hat","N":10} | {"family":"affine","N":10}
// | {"family":"regpp","N":10,"eps":0.001}
// | {"family":"mesh2d","N":5,"box_lo":-4,"box_hi":4}
inline TestFamily family_from_json(const json& spec) {
  const std::string where = "family spec";
  const std::string kind = require_field(spec, "family", where).is_string()
                               ? spec.at("family").get<std::string>()
                               : "";
  if (kind == "pwc") {
    reject_unknown_keys(spec, {"family", "N"}, where);
    return TestFamily::piecewise_constant(static_cast<int>(require_integer(spec, "N", where)));
  }
  if (kind == "hat") {
    reject_unknown_keys(spec, {"family", "N"}, where);
    return TestFamily::hat(static_cast<int>(require_integer(spec, "N", where)));
  }
  if (kind == "affine") {
    reject_unknown_keys(spec, {"family", "N"}, where);
    return TestFamily::affine_pair(static_cast<int>(require_integer(spec, "N", where)));
  }
  if (kind == "regpp") {
    reject_unknown_keys(spec, {"family", "N", "eps"}, where);
    return TestFamily::regularized_pos_part(static_cast<int>(require_integer(spec, "N", where)),
                                            number_or(spec, "eps", -1.0, where));
  }
  if (kind == "mesh2d") {
    reject_unknown_keys(spec, {"family", "N", "eps", "box_lo", "box_hi"}, where);
    return TestFamily::mesh2d(static_cast<int>(require_integer(spec, "N", where)),
                              number_or(spec, "eps", -1.0, where),
                              number_or(spec, "box_lo", 0.0, where),
                              number_or(spec, "box_hi", 1.0, where));
  }
  throw ConfigError(where + ": unknown family \"" + kind + "\"");
}

// {"kind":"gaussian2d","mean":[..,..],"cov":[[..,..],[..,..]]} — only
// meaningful with the planar mesh family, so it is parsed separately from
// the 1D marginals.
inline bool is_gaussian2d_spec(const json& spec) {
  return spec.is_object() && spec.contains("kind") && spec.at("kind").is_string() &&
         spec.at("kind").get<std::string>() == "gaussian2d";
}

inline void gaussian2d_from_json(const json& spec, Eigen::Vector2d& mean, Eigen::Matrix2d& cov) {
  const std::string where = "gaussian marginal spec";
  reject_unknown_keys(spec, {"kind", "mean", "cov"}, where);
  const json& mj = require_field(spec, "mean", where);
  const json& cj = require_field(spec, "cov", where);
  if (!mj.is_array() || mj.size() != 2 || !cj.is_array() || cj.size() != 2 ||
      !cj.at(0).is_array() || cj.at(0).size() != 2 || !cj.at(1).is_array() || cj.at(1).size() != 2)
    throw ConfigError(where + ": need mean[2] and cov[2][2]");
  mean << mj.at(0).get<double>(), mj.at(1).get<double>();
  cov << cj.at(0).at(0).get<double>(), cj.at(0).at(1).get<double>(),
      cj.at(1).at(0).get<double>(), cj.at(1).at(1).get<double>();
}

// ---------------------------------------------------------------------------
// Structural JSON checker (the subset of JSON Schema the summaries use).
// ---------------------------------------------------------------------------

// Supports: "type" (object | array | string | number | integer | boolean),
// "required", "properties", "items", and "additionalProperties": false.
inline bool schema_matches(const json& value, const json& schema, std::string* why = nullptr) {
  const auto fail = [&](const std::string& message) {
    if (why) *why = message;
    return false;
  };
  if (schema.contains("type")) {
    const std::string t = schema.at("type").get<std::string>();
    if (t == "object" && !value.is_object()) return fail("expected object");
    if (t == "array" && !value.is_array()) return fail("expected array");
    if (t == "string" && !value.is_string()) return fail("expected string");
    if (t == "number" && !value.is_number()) return fail("expected number");
    if (t == "integer" && !value.is_number_integer()) return fail("expected integer");
    if (t == "boolean" && !value.is_boolean()) return fail("expected boolean");
  }
  if (schema.contains("required"))
    for (const json& key : schema.at("required"))
      if (!value.contains(key.get<std::string>()))
        return fail("missing required key \"" + key.get<std::string>() + "\"");
  if (schema.contains("properties")) {
    for (const auto& item : schema.at("properties").items())
      if (value.contains(item.key()) && !schema_matches(value.at(item.key()), item.value(), why))
        return fail("property \"" + item.key() + "\": " + (why ? *why : "mismatch"));
    if (schema.contains("additionalProperties") &&
        schema.at("additionalProperties").is_boolean() &&
        !schema.at("additionalProperties").get<bool>())
      for (const auto& item : value.items())
        if (!schema.at("properties").contains(item.key()))
          return fail("unexpected key \"" + item.key() + "\"");
  }
  if (schema.contains("items") && value.is_array())
    for (const json& element : value)
      if (!schema_matches(element, schema.at("items"), why)) return false;
  return true;
}

// Canonical shape of the rate-experiment summary JSON; the same document is
// checked in under configs/schema/ for external tooling, and a test keeps the
// two copies identical.
inline json rates_summary_schema() {
  return json{
      {"type", "object"},
      {"required", json::array({"experiment", "pass", "worst_margin"})},
      {"properties",
       {{"experiment", {{"type", "string"}}},
        {"pass", {{"type", "boolean"}}},
        {"worst_margin", {{"type", "number"}}},
        {"tolerance", {{"type", "number"}}},
        {"cost", {{"type", "string"}}},
        {"marginals", {{"type", "string"}}},
        {"family", {{"type", "string"}}},
        {"cross_check_max_diff", {{"type", "number"}}},
        {"rows", {{"type", "integer"}}}}}};
}

// ---------------------------------------------------------------------------
// Discrete-measure CSV files.
// ---------------------------------------------------------------------------

// Header w,x1,...,xD; one atom per row.
inline void write_measure_csv(const DiscreteMeasure& m, const std::string& path) {
  std::vector<std::string> header{"w"};
  for (std::size_t d = 1; d <= m.dimension(); ++d) header.push_back("x" + std::to_string(d));
  CsvWriter out(path, header);
  for (std::size_t k = 0; k < m.size(); ++k) {
    std::vector<std::string> cells{CsvWriter::cell(m.weights()[k])};
    for (double coordinate : m.points()[k]) cells.push_back(CsvWriter::cell(coordinate));
    out.row(cells);
  }
}

inline DiscreteMeasure read_measure_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open measure file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty measure file: " + path);
  if (line.rfind("w,", 0) != 0)
    throw ConfigError("measure file must start with a \"w,x1,...\" header: " + path);
  std::vector<std::vector<double>> points;
  std::vector<double> weights;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cellvalue;
    std::vector<double> values;
    while (std::getline(row, cellvalue, ',')) {
      try {
        values.push_back(std::stod(cellvalue));
      } catch (const std::exception&) {
        throw ConfigError("non-numeric cell in measure file: " + path);
      }
    }
    if (values.size() < 2) throw ConfigError("measure row needs w plus coordinates: " + path);
    weights.push_back(values.front());
    points.emplace_back(values.begin() + 1, values.end());
  }
  if (points.empty()) throw ConfigError("measure file has no atoms: " + path);
  return DiscreteMeasure(std::move(points), std::move(weights));
}

// ---------------------------------------------------------------------------
// Rate-report emission.
// ---------------------------------------------------------------------------

inline void write_rate_report_csv(const RateReport& rep, const std::string& path) {
  CsvWriter out(path, {"N", "exact", "value", "gap", "bound", "bound_satisfied",
                       "expect_violation", "label"});
  for (const RateRow& row : rep.rows)
    out.row({CsvWriter::cell(row.N), CsvWriter::cell(row.exact), CsvWriter::cell(row.value),
             CsvWriter::cell(row.gap), CsvWriter::cell(row.bound),
             CsvWriter::cell(row.bound_satisfied), CsvWriter::cell(row.expect_violation),
             row.label});
}

inline json rate_summary_json(const RateReport& rep) {
  json out{{"experiment", rep.experiment},
           {"pass", rep.pass},
           {"worst_margin", rep.worst_margin},
           {"tolerance", rep.tolerance},
           {"cost", rep.cost_desc},
           {"marginals", rep.marginals_desc},
           {"family", rep.family_desc},
           {"cross_check_max_diff", rep.cross_check_max_diff},
           {"rows", static_cast<long>(rep.rows.size())}};
  std::string why;
  if (!schema_matches(out, rates_summary_schema(), &why))
    throw std::logic_error("rate summary does not match its own schema: " + why);
  return out;
}

inline void write_json_file(const json& doc, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << doc.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Derived-value fixtures.
// ---------------------------------------------------------------------------

// Every value an experiment compares against is recomputed here from the
// library's own oracles and pinned with the method that produced it.  The
// checked-in fixtures.json must match this computation to each entry's
// tolerance, or the rate experiments refuse to run.
inline json compute_fixtures() {
  const Marginal1D mu = Marginal1D::poly_density({0.0, 0.0, 3.0});
  const Marginal1D nu = Marginal1D::poly_density({2.0, -2.0});
  const auto entry = [](const json& value, const std::string& method, double tolerance) {
    return json{{"value", value}, {"method", method}, {"tolerance", tolerance}};
  };
  const auto table = [](const std::vector<int>& Ns, const std::function<double(int)>& f) {
    json t = json::object();
    for (int N : Ns) t["N" + std::to_string(N)] = f(N);
    return t;
  };
  const auto cell_value = [&](int N, double power, bool midpoint) {
    const std::vector<double> mm = cell_masses(mu, N), nn = cell_masses(nu, N);
    const Eigen::MatrixXd C = midpoint ? detail::midpoint_cell_costs(N, power)
                                       : detail::corner_cell_costs(N, power);
    return cell_transport_lp(mm, nn, C).value;
  };

  json out;
  out["w1_bundled_pair"] =
      entry(wasserstein_1d(mu, nu, 1.0), "merged-quantile coupling quadrature", 1e-9);
  out["w2_sq_bundled_pair"] =
      entry(wasserstein_1d(mu, nu, 2.0), "merged-quantile coupling quadrature", 1e-9);
  {
    Eigen::VectorXd m1 = Eigen::VectorXd::Zero(2), m2(2);
    m2 << 1.0, 1.0;
    Eigen::MatrixXd S1 = Eigen::MatrixXd::Identity(2, 2), S2(2, 2);
    S2 << 1.0, 0.7, 0.7, 1.0;
    out["gaussian_quadratic"] = entry(gaussian_quadratic_transport(m1, S1, m2, S2),
                                      "closed form via eigendecomposition", 1e-6);
  }
  out["martingale_cubic_optimum"] =
      entry(0.25 * 0.25 * 0.25, "closed-form half-mass displacement by 1/4 under |y-x|^3", 1e-12);
  {
    json masses = json::array();
    for (double v : cell_masses(mu, 4)) masses.push_back(v);
    out["cell_masses_cubic_N4"] = entry(masses, "exact polynomial CDF differences", 1e-12);
    masses = json::array();
    for (double v : cell_masses(nu, 4)) masses.push_back(v);
    out["cell_masses_decay_N4"] = entry(masses, "exact polynomial CDF differences", 1e-12);
  }
  out["cell_midpoint_p1"] = entry(
      table({5, 10, 20, 40}, [&](int N) { return cell_value(N, 1.0, true); }),
      "cell-mass transport LP, midpoint costs", 1e-9);
  out["cell_midpoint_p1_dyadic"] = entry(
      table({4, 8, 16, 32}, [&](int N) { return cell_value(N, 1.0, true); }),
      "cell-mass transport LP, midpoint costs", 1e-9);
  out["cell_corner_p1_dyadic"] = entry(
      table({4, 8, 16, 32}, [&](int N) { return cell_value(N, 1.0, false); }),
      "cell-mass transport LP, closest-corner costs", 1e-9);
  out["cell_corner_p2_N20"] =
      entry(cell_value(20, 2.0, false), "cell-mass transport LP, closest-corner costs", 1e-9);
  out["hat_pair_w2_sq"] = entry(
      table({4, 8, 16},
            [&](int N) {
              return wasserstein_1d(hat_measure(mu, N).coordinate_marginal(0),
                                    hat_measure(nu, N).coordinate_marginal(0), 2.0);
            }),
      "one-atom-per-cell substitute measures, exact atomic coupling", 1e-9);
  {
    std::vector<double> atoms(8), weights(8, 1.0 / 8.0);
    for (int m = 0; m < 8; ++m) atoms[static_cast<std::size_t>(m)] = (m + 0.5) / 8.0;
    out["w1_uniform_vs_midpoint_atoms_N8"] =
        entry(wasserstein_1d(Marginal1D::uniform(0.0, 1.0), Marginal1D::empirical(atoms, weights),
                             1.0),
              "exact quantile coupling; closed form 1/(4N)", 1e-12);
  }
  return out;
}

struct FixtureDrift {
  std::string name;
  double drift = 0.0;
  double tolerance = 0.0;
};

namespace detail {

inline double max_numeric_drift(const json& a, const json& b) {
  if (a.is_number() && b.is_number())
    return std::abs(a.get<double>() - b.get<double>());
  if (a.is_array() && b.is_array() && a.size() == b.size()) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
      worst = std::max(worst, max_numeric_drift(a.at(i), b.at(i)));
    return worst;
  }
  if (a.is_object() && b.is_object() && a.size() == b.size()) {
    double worst = 0.0;
    for (const auto& item : a.items()) {
      if (!b.contains(item.key())) return std::numeric_limits<double>::infinity();
      worst = std::max(worst, max_numeric_drift(item.value(), b.at(item.key())));
    }
    return worst;
  }
  return std::numeric_limits<double>::infinity();  // structural mismatch
}

}  // namespace detail

// Compares a pinned fixtures document against a freshly computed one; every
// entry whose values drift beyond its pinned tolerance is reported.
inline std::vector<FixtureDrift> fixture_drift(const json& pinned, const json& fresh) {
  std::vector<FixtureDrift> out;
  for (const auto& item : fresh.items()) {
    FixtureDrift d;
    d.name = item.key();
    if (!pinned.contains(item.key()) || !pinned.at(item.key()).contains("value")) {
      d.drift = std::numeric_limits<double>::infinity();
      d.tolerance = 0.0;
      out.push_back(d);
      continue;
    }
    const json& pin = pinned.at(item.key());
    d.tolerance = pin.contains("tolerance") && pin.at("tolerance").is_number()
                      ? pin.at("tolerance").get<double>()
                      : 1e-9;
    d.drift = detail::max_numeric_drift(pin.at("value"), item.value().at("value"));
    if (!(d.drift <= d.tolerance)) out.push_back(d);
  }
  return out;
}

}  // namespace mcot
