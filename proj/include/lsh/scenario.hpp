#pragma once

// Scenario files: one JSON document holding the two systems, the coupling,
// the cost weights and optional simulation / optimization / filter blocks.
// Matrices are nested row-major arrays.  Serialization is canonical (fixed
// key order, shortest round-trip floats), so save(load(f)) == f byte for
// byte on canonical files.

#include "lsh/coupling.hpp"
#include "lsh/optimize.hpp"
#include "lsh/performance.hpp"
#include "lsh/simulate.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <optional>
#include <sstream>

namespace lsh {

using Json = nlohmann::ordered_json;

struct Scenario {
  LshParams sys1, sys2;
  CouplingParams coupling;
  CostWeights weights;
  std::optional<SimConfig> sim;
  std::optional<OptimOptions> optim;
  std::optional<ShapingFilter> filter;
  std::vector<std::string> warnings;  // symmetrized-on-load notices
};

namespace detail {

inline Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const Json& j, const std::string& name) {
  if (!j.is_array() || j.empty() || !j.front().is_array())
    throw ValidationError("scenario: field '" + name +
                          "' must be a nested array of numbers");
  const Index rows = static_cast<Index>(j.size());
  const Index cols = static_cast<Index>(j.front().size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const Json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols)
      throw ValidationError("scenario: ragged matrix in field '" + name + "'");
    for (Index jj = 0; jj < cols; ++jj)
      m(i, jj) = row[static_cast<std::size_t>(jj)].get<double>();
  }
  return m;
}

// Symmetric inputs: symmetrize with a warning below 1e-9 asymmetry, reject
// above.
inline Matrix load_symmetric(const Json& j, const std::string& name,
                             std::vector<std::string>& warnings) {
  Matrix m = matrix_from_json(j, name);
  if (m.rows() != m.cols())
    throw ValidationError("scenario: '" + name + "' must be square");
  const double asym = asymmetry_norm(m);
  if (asym > 1e-9 * (1.0 + m.norm()))
    throw ValidationError("scenario: '" + name + "' is not symmetric");
  if (asym > 0.0) {
    warnings.push_back("symmetrized '" + name + "' (asymmetry " +
                       std::to_string(asym) + ")");
    m = symmetrize(m);
  }
  return m;
}

inline LshParams system_from_json(const Json& j, const std::string& prefix,
                                  std::vector<std::string>& warnings) {
  LshParams p;
  p.K = load_symmetric(j.at("K"), prefix + ".K", warnings);
  p.M = load_symmetric(j.at("M"), prefix + ".M", warnings);
  p.F = load_symmetric(j.at("F"), prefix + ".F", warnings);
  p.N = matrix_from_json(j.at("N"), prefix + ".N");
  return p;
}

inline Json system_to_json(const LshParams& p) {
  Json j;
  j["K"] = matrix_to_json(p.K);
  j["M"] = matrix_to_json(p.M);
  j["F"] = matrix_to_json(p.F);
  j["N"] = matrix_to_json(p.N);
  return j;
}

}  // namespace detail

inline Scenario scenario_from_json(const Json& j) {
  Scenario sc;
  sc.sys1 = detail::system_from_json(j.at("sys1"), "sys1", sc.warnings);
  sc.sys2 = detail::system_from_json(j.at("sys2"), "sys2", sc.warnings);

  const Json& jc = j.at("coupling");
  sc.coupling.mu = detail::load_symmetric(jc.at("mu"), "coupling.mu", sc.warnings);
  sc.coupling.kappa =
      detail::load_symmetric(jc.at("kappa"), "coupling.kappa", sc.warnings);
  sc.coupling.phi =
      detail::load_symmetric(jc.at("phi"), "coupling.phi", sc.warnings);

  const Json& jw = j.at("weights");
  sc.weights.Pi1 = detail::load_symmetric(jw.at("Pi1"), "weights.Pi1", sc.warnings);
  sc.weights.Pi2 = detail::load_symmetric(jw.at("Pi2"), "weights.Pi2", sc.warnings);

  if (j.contains("sim")) {
    const Json& js = j.at("sim");
    SimConfig cfg;
    cfg.dt = js.at("dt").get<double>();
    cfg.horizon = js.at("horizon").get<double>();
    cfg.burn_in = js.at("burn_in").get<double>();
    cfg.n_paths = js.at("n_paths").get<int>();
    cfg.seed = js.at("seed").get<std::uint64_t>();
    cfg.validate();
    sc.sim = cfg;
  }
  if (j.contains("optim")) {
    const Json& jo = j.at("optim");
    OptimOptions oo;
    oo.max_iters = jo.value("max_iters", oo.max_iters);
    oo.grad_tol = jo.value("grad_tol", oo.grad_tol);
    oo.armijo_c = jo.value("armijo_c", oo.armijo_c);
    oo.backtrack = jo.value("backtrack", oo.backtrack);
    oo.initial_step = jo.value("initial_step", oo.initial_step);
    oo.kappa_psd = jo.value("kappa_psd", oo.kappa_psd);
    oo.max_halvings = jo.value("max_halvings", oo.max_halvings);
    oo.seed = jo.value("seed", oo.seed);
    oo.validate();
    sc.optim = oo;
  }
  if (j.contains("filter")) {
    const Json& jf = j.at("filter");
    ShapingFilter f;
    f.a = detail::matrix_from_json(jf.at("a"), "filter.a");
    f.b = detail::matrix_from_json(jf.at("b"), "filter.b");
    f.c = detail::matrix_from_json(jf.at("c"), "filter.c");
    f.d = detail::matrix_from_json(jf.at("d"), "filter.d");
    sc.filter = f;
  }

  // Module-level validations run on load.
  for (const auto* p : {&sc.sys1, &sc.sys2}) {
    auto r = validate_params(*p);
    if (!r.pass)
      throw ValidationError("scenario: " + r.first_failure());
  }
  auto rc = validate_coupling(sc.coupling);
  if (!rc.pass) throw ValidationError("scenario: " + rc.first_failure());
  sc.weights.validate(sc.sys1.dof(), sc.sys1.outputs());
  return sc;
}

inline Json scenario_to_json(const Scenario& sc) {
  Json j;
  j["sys1"] = detail::system_to_json(sc.sys1);
  j["sys2"] = detail::system_to_json(sc.sys2);
  j["coupling"]["mu"] = detail::matrix_to_json(sc.coupling.mu);
  j["coupling"]["kappa"] = detail::matrix_to_json(sc.coupling.kappa);
  j["coupling"]["phi"] = detail::matrix_to_json(sc.coupling.phi);
  j["weights"]["Pi1"] = detail::matrix_to_json(sc.weights.Pi1);
  j["weights"]["Pi2"] = detail::matrix_to_json(sc.weights.Pi2);
  if (sc.sim) {
    Json js;
    js["dt"] = sc.sim->dt;
    js["horizon"] = sc.sim->horizon;
    js["burn_in"] = sc.sim->burn_in;
    js["n_paths"] = sc.sim->n_paths;
    js["seed"] = sc.sim->seed;
    j["sim"] = std::move(js);
  }
  if (sc.optim) {
    Json jo;
    jo["max_iters"] = sc.optim->max_iters;
    jo["grad_tol"] = sc.optim->grad_tol;
    jo["armijo_c"] = sc.optim->armijo_c;
    jo["backtrack"] = sc.optim->backtrack;
    jo["initial_step"] = sc.optim->initial_step;
    jo["kappa_psd"] = sc.optim->kappa_psd;
    jo["max_halvings"] = sc.optim->max_halvings;
    jo["seed"] = sc.optim->seed;
    j["optim"] = std::move(jo);
  }
  if (sc.filter) {
    Json jf;
    jf["a"] = detail::matrix_to_json(sc.filter->a);
    jf["b"] = detail::matrix_to_json(sc.filter->b);
    jf["c"] = detail::matrix_to_json(sc.filter->c);
    jf["d"] = detail::matrix_to_json(sc.filter->d);
    j["filter"] = std::move(jf);
  }
  return j;
}

inline std::string save_scenario_string(const Scenario& sc) {
  return scenario_to_json(sc).dump(2) + "\n";
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("scenario: cannot open '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("scenario: parse error in '" + path +
                          "': " + e.what());
  }
  return scenario_from_json(j);
}

inline void save_scenario(const Scenario& sc, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("scenario: cannot write '" + path + "'");
  out << save_scenario_string(sc);
}

}  // namespace lsh
