#include "lsh/scenario.hpp"

#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

using namespace lsh;

namespace {

Json minimal_scalar() {
  return Json::parse(R"({
    "sys1": {"K": [[1.0]], "M": [[1.0]], "F": [[1.0]], "N": [[1.0]]},
    "sys2": {"K": [[2.0]], "M": [[1.5]], "F": [[0.5]], "N": [[1.0]]},
    "coupling": {"mu": [[0.1]], "kappa": [[0.2]], "phi": [[0.3]]},
    "weights": {"Pi1": [[1.0]], "Pi2": [[1.0]]}
  })");
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("/tmp/" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("minimal scalar scenario loads and validates") {
  const Scenario sc = scenario_from_json(minimal_scalar());
  CHECK(sc.sys1.K(0, 0) == 1.0);
  CHECK(sc.sys2.M(0, 0) == 1.5);
  CHECK(sc.coupling.kappa(0, 0) == 0.2);
  CHECK(sc.weights.Pi1(0, 0) == 1.0);
  CHECK(sc.warnings.empty());
  CHECK_FALSE(sc.sim.has_value());
  CHECK_FALSE(sc.optim.has_value());
  CHECK_FALSE(sc.filter.has_value());
}

TEST_CASE("optional blocks are parsed and validated") {
  Json j = minimal_scalar();
  j["sim"] = {{"dt", 1e-3}, {"horizon", 50.0}, {"burn_in", 5.0},
              {"n_paths", 8}, {"seed", 12}};
  j["optim"] = {{"max_iters", 100}, {"grad_tol", 1e-7}};
  j["filter"] = {{"a", {{-1.0}}}, {"b", {{1.0}}},
                 {"c", {{1.0}}}, {"d", {{0.0}}}};
  const Scenario sc = scenario_from_json(j);
  REQUIRE(sc.sim.has_value());
  CHECK(sc.sim->n_paths == 8);
  CHECK(sc.sim->seed == 12);
  REQUIRE(sc.optim.has_value());
  CHECK(sc.optim->max_iters == 100);
  CHECK(sc.optim->grad_tol == 1e-7);
  CHECK(sc.optim->armijo_c == OptimOptions{}.armijo_c);  // default retained
  REQUIRE(sc.filter.has_value());
  CHECK(sc.filter->a(0, 0) == -1.0);

  j["sim"]["dt"] = -1.0;
  CHECK_THROWS_AS(scenario_from_json(j), ValidationError);
}

TEST_CASE("invariant violations are rejected on load") {
  Json j = minimal_scalar();
  j["sys1"]["M"] = {{-1.0}};  // not SPD
  CHECK_THROWS_AS(scenario_from_json(j), ValidationError);

  j = minimal_scalar();
  j["coupling"]["mu"] = {{-0.5}};  // outside the PSD cone
  CHECK_THROWS_AS(scenario_from_json(j), ValidationError);

  j = minimal_scalar();
  j["weights"]["Pi1"] = {{-2.0}};  // weights must be PSD
  CHECK_THROWS_AS(scenario_from_json(j), ValidationError);

  j = minimal_scalar();
  j["sys1"].erase("K");
  CHECK_THROWS(scenario_from_json(j));

  j = minimal_scalar();
  j["sys1"]["K"] = {{1.0, 0.0}};  // non-square symmetric field
  CHECK_THROWS_AS(scenario_from_json(j), ValidationError);

  j = minimal_scalar();
  j["sys1"]["N"] = Json::array({Json::array({1.0, 2.0}),
                                Json::array({3.0})});  // ragged
  CHECK_THROWS_AS(scenario_from_json(j), ValidationError);
}

TEST_CASE("tiny asymmetry is symmetrized with a warning, larger rejected") {
  Json j = Json::parse(R"({
    "sys1": {"K": [[1.0, 0.2], [0.2000000000001, 1.0]],
             "M": [[1.0, 0.0], [0.0, 1.0]],
             "F": [[1.0, 0.0], [0.0, 1.0]],
             "N": [[1.0, 0.0]]},
    "sys2": {"K": [[1.0, 0.0], [0.0, 1.0]],
             "M": [[1.0, 0.0], [0.0, 1.0]],
             "F": [[1.0, 0.0], [0.0, 1.0]],
             "N": [[1.0, 0.0]]},
    "coupling": {"mu": [[0.0]], "kappa": [[0.0]], "phi": [[0.0]]},
    "weights": {"Pi1": [[1.0, 0.0], [0.0, 1.0]], "Pi2": [[1.0]]}
  })");
  const Scenario sc = scenario_from_json(j);
  REQUIRE(sc.warnings.size() == 1);
  CHECK(sc.warnings[0].find("sys1.K") != std::string::npos);
  CHECK(asymmetry_norm(sc.sys1.K) == 0.0);
  CHECK(sc.sys1.K(0, 1) == Catch::Approx(0.20000000000005));

  j["sys1"]["K"] = {{1.0, 0.2}, {0.3, 1.0}};  // well past the 1e-9 gate
  CHECK_THROWS_AS(scenario_from_json(j), ValidationError);
}

TEST_CASE("canonical save-load round trip is byte exact") {
  oracle::Rng rng(601);
  Scenario sc;
  sc.sys1 = oracle::random_stable_system(rng, 2, 1);
  sc.sys2 = oracle::random_stable_system(rng, 2, 1);
  sc.coupling = oracle::random_coupling(rng, 1);
  sc.weights = {rng.spd(2), rng.spd(1)};
  SimConfig cfg;
  cfg.seed = 99;
  sc.sim = cfg;
  sc.optim = OptimOptions{};

  TempFile f("lsh_scenario_roundtrip.json");
  save_scenario(sc, f.path);
  const Scenario loaded = load_scenario(f.path);
  CHECK((loaded.sys1.K - sc.sys1.K).norm() == 0.0);
  CHECK((loaded.coupling.kappa - sc.coupling.kappa).norm() == 0.0);
  CHECK(loaded.sim->seed == 99);

  // save(load(f)) == f byte for byte on canonical files.
  const std::string first = save_scenario_string(sc);
  const std::string second = save_scenario_string(loaded);
  CHECK(first == second);
  std::ifstream in(f.path, std::ios::binary);
  const std::string on_disk((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
  CHECK(on_disk == first);
  CHECK(first.back() == '\n');
}

TEST_CASE("missing files and malformed JSON raise validation errors") {
  CHECK_THROWS_AS(load_scenario("/tmp/lsh_no_such_file.json"),
                  ValidationError);

  TempFile f("lsh_scenario_malformed.json");
  std::ofstream(f.path) << "{ not json";
  CHECK_THROWS_AS(load_scenario(f.path), ValidationError);
}
