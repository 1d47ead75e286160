// Command-line front end: loads a scenario file, dispatches one of the
// pipeline commands and emits a deterministic text report to stdout plus
// optional machine-readable artifacts (JSON / CSV) under --out.
//
// Exit codes: 0 success, 2 validation, 3 instability, 4 numerical,
// 5 optimizer did not converge while --require-convergence is set.

#include "lsh/scenario.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace lsh;

// Fixed 17-significant-digit formatting: round-trips doubles exactly and
// keeps reports byte-identical across runs.
std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void print_matrix(std::ostream& os, const std::string& name, const Matrix& m) {
  os << name << " (" << m.rows() << "x" << m.cols() << "):\n";
  for (Index i = 0; i < m.rows(); ++i) {
    os << " ";
    for (Index j = 0; j < m.cols(); ++j) os << " " << num(m(i, j));
    os << "\n";
  }
}

struct CommonArgs {
  std::string scenario_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  bool fd_check = false;
  bool kappa_psd = false;
  bool identity_weight = false;
  bool require_convergence = false;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--scenario", a.scenario_path, "Scenario JSON file")
      ->required();
  cmd->add_option("--out", a.out_dir, "Directory for report artifacts");
  cmd->add_option("--seed", a.seed, "Override the scenario RNG seed");
  cmd->add_option("--tol", a.tol, "Command-specific tolerance override");
}

std::ofstream open_artifact(const CommonArgs& a, const std::string& name) {
  namespace fs = std::filesystem;
  fs::create_directories(a.out_dir);
  std::ofstream out(fs::path(a.out_dir) / name, std::ios::binary);
  if (!out)
    throw ValidationError("cannot write artifact '" + name + "' under '" +
                          a.out_dir + "'");
  return out;
}

void print_report(std::ostream& os, const std::string& title,
                  const ValidationReport& r) {
  os << title << ":\n";
  for (const auto& c : r.checks)
    os << "  [" << (c.pass ? "ok" : "FAIL") << "] " << c.name
       << " (magnitude " << num(c.magnitude) << ")\n";
}

int cmd_check(const CommonArgs& a) {
  const Scenario sc = load_scenario(a.scenario_path);
  for (const auto& w : sc.warnings) std::cout << "warning: " << w << "\n";

  Tolerances tol;
  if (a.tol) tol.symmetry = tol.psd = *a.tol;
  print_report(std::cout, "sys1", validate_params(sc.sys1, tol));
  print_report(std::cout, "sys2", validate_params(sc.sys2, tol));
  print_report(std::cout, "coupling", validate_coupling(sc.coupling, tol));

  const Interconnection ic = interconnect(sc.sys1, sc.sys2, sc.coupling, tol);
  const StabilityReport st = is_internally_stable(ic.assembled);
  std::cout << "interconnection: 2n = " << ic.dof()
            << ", link order m = " << ic.link_order() << "\n";
  std::cout << "spectral abscissa: " << num(st.abscissa) << "\n";
  std::cout << "internally stable: " << (st.stable ? "yes" : "no") << "\n";
  if (!st.stable)
    throw InstabilityError("interconnected system is not internally stable "
                           "(spectral abscissa " + num(st.abscissa) + ")");
  return 0;
}

int cmd_assemble(const CommonArgs& a) {
  const Scenario sc = load_scenario(a.scenario_path);
  const Interconnection ic = interconnect(sc.sys1, sc.sys2, sc.coupling);
  const StateSpace ss = assemble_state_space(ic.assembled);

  print_matrix(std::cout, "K", ic.assembled.K);
  print_matrix(std::cout, "M", ic.assembled.M);
  print_matrix(std::cout, "F", ic.assembled.F);
  print_matrix(std::cout, "N", ic.assembled.N);
  print_matrix(std::cout, "A", ss.A);
  print_matrix(std::cout, "B", ss.B);
  print_matrix(std::cout, "C", ss.C);

  if (!a.out_dir.empty()) {
    Json j;
    j["K"] = detail::matrix_to_json(ic.assembled.K);
    j["M"] = detail::matrix_to_json(ic.assembled.M);
    j["F"] = detail::matrix_to_json(ic.assembled.F);
    j["N"] = detail::matrix_to_json(ic.assembled.N);
    j["A"] = detail::matrix_to_json(ss.A);
    j["B"] = detail::matrix_to_json(ss.B);
    j["C"] = detail::matrix_to_json(ss.C);
    open_artifact(a, "assemble.json") << j.dump(2) << "\n";
  }
  return 0;
}

Matrix select_weight(const Scenario& sc, const Interconnection& ic,
                     bool identity) {
  if (identity) return Matrix::Identity(2 * ic.dof(), 2 * ic.dof());
  return weight_matrix(ic, sc.weights);
}

int cmd_cost(const CommonArgs& a) {
  const Scenario sc = load_scenario(a.scenario_path);
  const Interconnection ic = interconnect(sc.sys1, sc.sys2, sc.coupling);
  const StateSpace ss = assemble_state_space(ic.assembled);
  const Matrix Cw = select_weight(sc, ic, a.identity_weight);
  const double cost = mean_square_cost(ss.A, ss.B, Cw);
  std::cout << "cost: " << num(cost) << "\n";
  if (!a.out_dir.empty()) {
    Json j;
    j["cost"] = cost;
    open_artifact(a, "cost.json") << j.dump(2) << "\n";
  }
  return 0;
}

void print_gradients(std::ostream& os, const CouplingGradients& g,
                     const std::string& prefix) {
  print_matrix(os, prefix + "dMu", g.dMu);
  print_matrix(os, prefix + "dKappa", g.dKappa);
  print_matrix(os, prefix + "dPhi", g.dPhi);
}

int cmd_grad(const CommonArgs& a) {
  const Scenario sc = load_scenario(a.scenario_path);
  const double fd_step = a.fd_check ? (a.tol ? *a.tol : 1e-6) : 0.0;
  const GradReport r = gradient_report(sc.sys1, sc.sys2, sc.coupling,
                                       sc.weights, fd_step);
  std::cout << "cost: " << num(r.cost) << "\n";
  print_gradients(std::cout, r.analytic, "");
  std::cout << "gradient norm: " << num(r.analytic.norm()) << "\n";
  if (a.fd_check) {
    print_gradients(std::cout, r.finite_difference, "fd_");
    std::cout << "fd relative error: " << num(r.fd_relative_error) << "\n";
  }
  if (!a.out_dir.empty()) {
    Json j;
    j["cost"] = r.cost;
    j["dMu"] = detail::matrix_to_json(r.analytic.dMu);
    j["dKappa"] = detail::matrix_to_json(r.analytic.dKappa);
    j["dPhi"] = detail::matrix_to_json(r.analytic.dPhi);
    if (a.fd_check) j["fd_relative_error"] = r.fd_relative_error;
    open_artifact(a, "grad.json") << j.dump(2) << "\n";
  }
  return 0;
}

int cmd_gradcheck(const CommonArgs& a) {
  const Scenario sc = load_scenario(a.scenario_path);
  const double h = a.tol ? *a.tol : 1e-6;
  const GradReport r =
      gradient_report(sc.sys1, sc.sys2, sc.coupling, sc.weights, h);

  auto row = [&](const std::string& name, const Matrix& an, const Matrix& fd) {
    const double rel = (an - fd).norm() / (1e-30 + an.norm() + fd.norm());
    std::cout << name << "  analytic " << num(an.norm()) << "  fd "
              << num(fd.norm()) << "  rel " << num(rel) << "\n";
    return rel;
  };
  std::cout << "fd step: " << num(h) << "\n";
  double worst = 0.0;
  worst = std::max(worst, row("mu   ", r.analytic.dMu, r.finite_difference.dMu));
  worst = std::max(worst,
                   row("kappa", r.analytic.dKappa, r.finite_difference.dKappa));
  worst = std::max(worst,
                   row("phi  ", r.analytic.dPhi, r.finite_difference.dPhi));
  std::cout << "max relative error: " << num(worst) << "\n";
  return 0;
}

int cmd_optimize(const CommonArgs& a) {
  const Scenario sc = load_scenario(a.scenario_path);
  OptimOptions opts = sc.optim.value_or(OptimOptions{});
  if (a.kappa_psd) opts.kappa_psd = true;
  if (a.tol) opts.grad_tol = *a.tol;
  if (a.seed) opts.seed = *a.seed;

  const OptimResult res =
      optimize_coupling(sc.sys1, sc.sys2, sc.coupling, sc.weights, opts);

  const char* reason = res.reason == Termination::converged ? "converged"
                       : res.reason == Termination::max_iters ? "max_iters"
                                                              : "stalled";
  std::cout << "termination: " << reason << " after " << res.iterations
            << " iterations\n";
  std::cout << "cost: " << num(res.cost_trace.front()) << " -> "
            << num(res.cost_trace.back()) << "\n";
  std::cout << "stationarity: " << num(res.stationarity) << "\n";
  print_matrix(std::cout, "mu", res.theta.mu);
  print_matrix(std::cout, "kappa", res.theta.kappa);
  print_matrix(std::cout, "phi", res.theta.phi);

  if (!a.out_dir.empty()) {
    auto csv = open_artifact(a, "optimize_trace.csv");
    csv << "iteration,cost\n";
    for (std::size_t i = 0; i < res.cost_trace.size(); ++i)
      csv << i << "," << num(res.cost_trace[i]) << "\n";

    Scenario tuned = sc;
    tuned.coupling = res.theta;
    save_scenario(tuned, (std::filesystem::path(a.out_dir) /
                          "optimized_scenario.json").string());
  }
  if (a.require_convergence && res.reason != Termination::converged) {
    std::cout << "error: optimizer did not converge to tolerance "
              << num(opts.grad_tol) << "\n";
    return 5;
  }
  return 0;
}

int cmd_simulate(const CommonArgs& a) {
  const Scenario sc = load_scenario(a.scenario_path);
  const Interconnection ic = interconnect(sc.sys1, sc.sys2, sc.coupling);
  StateSpace ss = assemble_state_space(ic.assembled);
  if (sc.filter) ss = augment_with_filter(ss, *sc.filter);

  SimConfig cfg = sc.sim.value_or(SimConfig{});
  if (a.seed) cfg.seed = *a.seed;

  const PathSummary s = simulate_paths(ss, cfg);
  const Matrix P = gramians(ss.A, ss.B, ss.C).P;

  Matrix Cw = select_weight(sc, ic, a.identity_weight);
  if (ss.A.rows() > Cw.cols()) {
    // Filter states carry no cost weight.
    Matrix padded = Matrix::Zero(Cw.rows(), ss.A.rows());
    padded.leftCols(Cw.cols()) = Cw;
    Cw = padded;
  }
  const EmpiricalCost ec = empirical_cost(s, Cw);
  const double analytic_cost = 0.5 * (Cw * P * Cw.transpose()).trace();

  double worst_sigma = 0.0;
  for (Index i = 0; i < P.rows(); ++i)
    for (Index j = 0; j < P.cols(); ++j) {
      const double se = std::max(s.covariance_stderr(i, j), 1e-12);
      worst_sigma = std::max(worst_sigma,
                             std::abs(s.covariance(i, j) - P(i, j)) / se);
    }

  std::cout << "paths: " << cfg.n_paths << ", dt: " << num(cfg.dt)
            << ", horizon: " << num(cfg.horizon) << ", seed: " << cfg.seed
            << "\n";
  std::cout << "empirical cost: " << num(ec.cost) << " +- "
            << num(ec.standard_error) << "\n";
  std::cout << "analytic cost: " << num(analytic_cost) << "\n";
  std::cout << "max covariance deviation (sigmas): " << num(worst_sigma)
            << "\n";
  std::cout << "energy balance residual: "
            << num(energy_balance_residual(
                   ic.assembled,
                   gramians(assemble_state_space(ic.assembled).A,
                            assemble_state_space(ic.assembled).B,
                            assemble_state_space(ic.assembled).C)
                       .P))
            << "\n";

  if (!a.out_dir.empty()) {
    auto csv = open_artifact(a, "simulate_summary.csv");
    csv << "i,j,empirical,analytic,stderr\n";
    for (Index i = 0; i < P.rows(); ++i)
      for (Index j = 0; j < P.cols(); ++j)
        csv << i << "," << j << "," << num(s.covariance(i, j)) << ","
            << num(P(i, j)) << "," << num(s.covariance_stderr(i, j)) << "\n";
  }
  return 0;
}

int cmd_energy(const CommonArgs& a) {
  const Scenario sc = load_scenario(a.scenario_path);
  const Interconnection ic = interconnect(sc.sys1, sc.sys2, sc.coupling);
  const StateSpace ss = assemble_state_space(ic.assembled);
  const Matrix P = gramians(ss.A, ss.B, ss.C).P;

  const Index n = ic.dof();
  const Matrix Minv =
      ic.assembled.M.llt().solve(Matrix::Identity(n, n));
  const double dissipation =
      (Minv * ic.assembled.F * Minv * P.bottomRightCorner(n, n)).trace();
  const double injection =
      0.5 * (ic.assembled.N * Minv * ic.assembled.N.transpose()).trace();
  const double residual = energy_balance_residual(ic.assembled, P);

  std::cout << "dissipation rate: " << num(dissipation) << "\n";
  std::cout << "injection rate: " << num(injection) << "\n";
  std::cout << "residual: " << num(residual) << "\n";
  const double tol = a.tol ? *a.tol : 1e-9;
  if (residual > tol * (1.0 + P.norm()))
    throw NumericalError("energy balance residual exceeds tolerance");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coupled stochastic oscillator toolkit"};
  app.require_subcommand(1);

  CommonArgs a;
  auto* check = app.add_subcommand("check", "Validate a scenario and report stability");
  auto* assemble = app.add_subcommand("assemble", "Emit the interconnected (K,M,F,N) and (A,B,C)");
  auto* cost = app.add_subcommand("cost", "Steady-state mean square cost via the ALE");
  auto* grad = app.add_subcommand("grad", "Analytic cost gradients in (mu, kappa, phi)");
  auto* gradcheck = app.add_subcommand("gradcheck", "Analytic vs finite-difference gradient table");
  auto* optimize = app.add_subcommand("optimize", "Projected gradient descent over the coupling");
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo check against the ALE");
  auto* energy = app.add_subcommand("energy", "Stationary energy balance report");
  for (auto* cmd : {check, assemble, cost, grad, gradcheck, optimize,
                    simulate, energy})
    add_common(cmd, a);
  grad->add_flag("--fd-check", a.fd_check,
                 "Also run the finite-difference oracle");
  optimize->add_flag("--kappa-psd", a.kappa_psd,
                     "Constrain kappa to the PSD cone");
  optimize->add_flag("--require-convergence", a.require_convergence,
                     "Exit 5 unless the stationarity tolerance is reached");
  for (auto* cmd : {cost, simulate})
    cmd->add_flag("--identity-weight", a.identity_weight,
                  "Use Cw = I instead of the scenario weights");

  CLI11_PARSE(app, argc, argv);

  try {
    if (check->parsed()) return cmd_check(a);
    if (assemble->parsed()) return cmd_assemble(a);
    if (cost->parsed()) return cmd_cost(a);
    if (grad->parsed()) return cmd_grad(a);
    if (gradcheck->parsed()) return cmd_gradcheck(a);
    if (optimize->parsed()) return cmd_optimize(a);
    if (simulate->parsed()) return cmd_simulate(a);
    if (energy->parsed()) return cmd_energy(a);
  } catch (const InstabilityError& e) {
    std::cout << "error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cout << "error: " << e.what() << "\n";
    return 4;
  } catch (const ValidationError& e) {
    std::cout << "error: " << e.what() << "\n";
    return 2;
  } catch (const SingularMassError& e) {
    std::cout << "error: " << e.what() << "\n";
    return 2;
  } catch (const DimensionError& e) {
    std::cout << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
