// Acceptance gate: nine end-to-end criteria, one printed pass/fail line
// each; the process exits nonzero if any criterion fails.

#include "lsh/scenario.hpp"

#include "oracles.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

using namespace lsh;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;
};

CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(LSH_CLI_PATH) + " " + args + " 2>&1";
  CliResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t got;
  while ((got = fread(buf, 1, sizeof(buf), pipe)) > 0)
    r.output.append(buf, got);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// --- criterion 1: ALE residuals and the Kronecker oracle -------------------

bool ale_correctness(std::string& detail) {
  oracle::Rng rng(9001);
  double worst_res = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const Index d = 2 + trial % 7;
    const Matrix A = oracle::random_hurwitz(rng, d);
    const Matrix B = rng.gaussian(d, 1 + trial % 3);
    const Matrix W = B * B.transpose();
    const Matrix P = solve_lyapunov(A, W);
    const double res = (A * P + P * A.transpose() + W).norm() /
                       (A.norm() * P.norm() + W.norm());
    worst_res = std::max(worst_res, res);
  }

  double worst_kron = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Index d = 2 + trial % 11;  // orders up to 12
    const Matrix A = oracle::random_hurwitz(rng, d);
    const Matrix W = rng.psd(d);
    const Matrix P = solve_lyapunov(A, W);
    const Matrix P_ref = oracle::lyapunov_kronecker(A, W);
    worst_kron = std::max(worst_kron,
                          (P - P_ref).norm() / (1.0 + P_ref.norm()));
  }

  detail = "worst residual " + fmt(worst_res) +
           ", worst vs Kronecker " + fmt(worst_kron);
  return worst_res <= 1e-10 && worst_kron <= 1e-9;
}

// --- criterion 2: scalar golden case ---------------------------------------

bool scalar_golden(std::string& detail) {
  LshParams p;
  p.K = p.M = p.F = p.N = Matrix::Constant(1, 1, 1.0);
  const StateSpace ss = assemble_state_space(p);
  const Matrix I2 = Matrix::Identity(2, 2);
  const GramianBundle g = gramians(ss.A, ss.B, I2);

  const Matrix P_ref = (Vector(2) << 0.5, 0.5).finished().asDiagonal();
  Matrix Q_ref(2, 2);
  Q_ref << 1.5, 0.5, 0.5, 1.0;
  const double cost = mean_square_cost(ss.A, ss.B, I2);
  const Matrix dB = g.Q * ss.B;
  Vector dB_ref(2);
  dB_ref << 0.5, 1.0;

  const double gap = std::max(
      {(g.P - P_ref).norm(), (g.Q - Q_ref).norm(), std::abs(cost - 0.5),
       (dB - dB_ref).norm()});
  detail = "max deviation " + fmt(gap);
  return gap <= 1e-12;
}

// --- criterion 3: interconnection theorem as executable identity -----------

bool theorem_identity(std::string& detail) {
  oracle::Rng rng(9003);
  double worst_drift = 0.0, worst_map = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 1 + trial % 3;
    const Index m = 1 + trial % 2;
    const LshParams s1 = oracle::random_stable_system(rng, n, m);
    const LshParams s2 = oracle::random_stable_system(rng, n, m);
    const CouplingParams c = oracle::random_coupling(rng, m);
    const Interconnection ic = interconnect(s1, s2, c);

    const Vector q = rng.vec(2 * n), qdot = rng.vec(2 * n);
    const double scale = ic.assembled.K.norm() + ic.assembled.F.norm();
    worst_drift =
        std::max(worst_drift, verify_interconnection(ic, q, qdot) / scale);

    // Momentum map: M M0^{-1} equals I + Z^T mu Z M0^{-1} entrywise.
    const Matrix M0inv =
        ic.M0.llt().solve(Matrix::Identity(2 * n, 2 * n));
    const Matrix alt = Matrix::Identity(2 * n, 2 * n) +
                       ic.Z.transpose() * c.mu * ic.Z * M0inv;
    worst_map = std::max(worst_map, (momentum_map_matrix(ic) - alt).norm() /
                                        (1.0 + alt.norm()));
  }
  detail = "worst drift gap " + fmt(worst_drift) +
           ", worst momentum-map gap " + fmt(worst_map);
  return worst_drift <= 1e-10 && worst_map <= 1e-12;
}

// --- criterion 4: gradient correctness -------------------------------------

bool gradient_correctness(std::string& detail) {
  oracle::Rng rng(9004);
  double worst = 0.0;
  int done = 0;
  while (done < 50) {
    const Index n = 1 + done % 3;
    const Index m = 1 + done % 2;
    const LshParams s1 = oracle::random_stable_system(rng, n, m);
    const LshParams s2 = oracle::random_stable_system(rng, n, m);
    CouplingParams c = oracle::random_coupling(rng, m);
    c.mu *= 0.3;
    c.kappa *= 0.3;
    c.phi *= 0.3;
    const CostWeights w{rng.spd(n), rng.spd(m)};
    try {
      const GradReport r = gradient_report(s1, s2, c, w, 1e-5);
      worst = std::max(worst, r.fd_relative_error);
      ++done;
    } catch (const InstabilityError&) {
      // rare unstable draw; redraw
    }
  }

  // Scalar pair with h-refinement.
  LshParams s;
  s.K = s.M = s.F = s.N = Matrix::Constant(1, 1, 1.0);
  CouplingParams c;
  c.mu = Matrix::Constant(1, 1, 0.1);
  c.kappa = Matrix::Constant(1, 1, 0.2);
  c.phi = Matrix::Constant(1, 1, 0.3);
  const CostWeights w{Matrix::Identity(1, 1), Matrix::Identity(1, 1)};
  double scalar_best = 1e300;
  for (double h : {1e-3, 1e-4, 1e-5, 1e-6}) {
    const GradReport r = gradient_report(s, s, c, w, h);
    scalar_best = std::min(scalar_best, r.fd_relative_error);
  }

  detail = "worst rel error " + fmt(worst) +
           ", scalar refined " + fmt(scalar_best);
  return worst <= 1e-4 && scalar_best <= 1e-6;
}

// --- criterion 5: stability inheritance ------------------------------------

bool stability_inheritance(std::string& detail) {
  oracle::Rng rng(9005);
  int counterexamples = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const Index n = 1 + trial % 4;
    const Index m = 1 + trial % 3;
    const LshParams s1 = oracle::random_stable_system(rng, n, m);
    const LshParams s2 = oracle::random_stable_system(rng, n, m);
    const CouplingParams c = oracle::random_coupling(rng, m, /*psd_kappa=*/true);
    const Interconnection ic = interconnect(s1, s2, c);
    if (!is_internally_stable(ic.assembled).stable) ++counterexamples;
  }
  detail = std::to_string(counterexamples) + " counterexamples in 500 draws";
  return counterexamples == 0;
}

// --- criterion 6: Monte Carlo vs analytic ----------------------------------

bool monte_carlo(std::string& detail) {
  oracle::Rng rng(9006);
  double worst_cov = 0.0, worst_cost = 0.0, worst_energy = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const LshParams s1 = oracle::random_stable_system(rng, 1, 1);
    const LshParams s2 = oracle::random_stable_system(rng, 1, 1);
    CouplingParams c = oracle::random_coupling(rng, 1, /*psd_kappa=*/true);
    c.mu *= 0.2;
    c.kappa *= 0.2;
    c.phi *= 0.2;
    const Interconnection ic = interconnect(s1, s2, c);
    const StateSpace ss = assemble_state_space(ic.assembled);
    const Matrix P = gramians(ss.A, ss.B, ss.C).P;

    SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.horizon = 2000.0;
    cfg.burn_in = 20.0;
    cfg.n_paths = 64;
    cfg.seed = 1000 + trial;
    const PathSummary sim = simulate_paths(ss, cfg);

    // Aggregate (Frobenius) three-sigma test on the covariance.
    worst_cov = std::max(worst_cov, (sim.covariance - P).norm() /
                                        sim.covariance_stderr.norm());

    const CostWeights w{Matrix::Identity(1, 1), Matrix::Identity(1, 1)};
    const Matrix Cw = weight_matrix(ic, w);
    const EmpiricalCost ec = empirical_cost(sim, Cw);
    const double analytic = 0.5 * (Cw * P * Cw.transpose()).trace();
    worst_cost =
        std::max(worst_cost, std::abs(ec.cost - analytic) / ec.standard_error);

    worst_energy = std::max(worst_energy,
                            energy_balance_residual(ic.assembled, P) /
                                (1.0 + P.norm()));
  }
  detail = "cov " + fmt(worst_cov) + " sigma, cost " +
           fmt(worst_cost) + " sigma, energy residual " +
           fmt(worst_energy);
  return worst_cov <= 3.0 && worst_cost <= 3.0 && worst_energy <= 1e-9;
}

// --- criterion 7: optimizer ------------------------------------------------

bool optimizer(std::string& detail) {
  LshParams s;
  s.K = s.M = s.F = s.N = Matrix::Constant(1, 1, 1.0);
  const CostWeights w{Matrix::Identity(1, 1), Matrix::Identity(1, 1)};

  auto scalar_coupling = [](double mu, double kappa, double phi) {
    CouplingParams c;
    c.mu = Matrix::Constant(1, 1, mu);
    c.kappa = Matrix::Constant(1, 1, kappa);
    c.phi = Matrix::Constant(1, 1, phi);
    return c;
  };

  // Dense grid over kappa with mu = phi = 0.
  double best_kappa = 0.0, best_cost = 1e300;
  for (double k = -0.5; k <= 3.0; k += 1e-3) {
    try {
      const double cst = coupling_cost(s, s, scalar_coupling(0, k, 0), w);
      if (cst < best_cost) {
        best_cost = cst;
        best_kappa = k;
      }
    } catch (const InstabilityError&) {
    }
  }
  OptimOptions kappa_only;
  kappa_only.optimize_mu = false;
  kappa_only.optimize_phi = false;
  kappa_only.grad_tol = 1e-6;
  kappa_only.max_iters = 2000;
  const OptimResult r1 =
      optimize_coupling(s, s, scalar_coupling(0, 1.0, 0), w, kappa_only);
  const double kappa_gap = std::abs(r1.theta.kappa(0, 0) - best_kappa);

  // Full (mu, kappa, phi) run: stationarity and monotone trace.
  OptimOptions full;
  full.grad_tol = 1e-6;
  full.max_iters = 2000;
  const OptimResult r2 =
      optimize_coupling(s, s, scalar_coupling(0.1, 0.5, 0.1), w, full);
  bool monotone = true;
  for (std::size_t i = 1; i < r2.cost_trace.size(); ++i)
    monotone = monotone && r2.cost_trace[i] <= r2.cost_trace[i - 1] + 1e-15;

  detail = "kappa gap " + fmt(kappa_gap) + ", stationarity " +
           fmt(r2.stationarity) +
           (monotone ? ", monotone" : ", NOT monotone");
  return kappa_gap <= 1e-3 + 1e-9 && r2.stationarity <= 1e-6 && monotone;
}

// --- criterion 8: frequency-domain consistency -----------------------------

bool frequency_domain(std::string& detail) {
  oracle::Rng rng(9008);
  double worst_resolvent = 0.0, worst_sym = 0.0, worst_psd = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const Index n = 1 + trial % 4;
    const Index m = 1 + trial % 3;
    const LshParams p = oracle::random_stable_system(rng, n, m);
    const StateSpace ss = assemble_state_space(p);
    const Matrix I2n = Matrix::Identity(2 * n, 2 * n);
    for (int k = 0; k < 20; ++k) {
      const std::complex<double> sv(rng.uniform(-2.0, 2.0),
                                    rng.uniform(-5.0, 5.0));
      const ComplexMatrix phi = transfer_function(p, sv);
      const ComplexMatrix resolvent =
          ss.C * (sv * I2n - ss.A).fullPivLu().solve(
                     ComplexMatrix(ss.B.cast<std::complex<double>>()));
      worst_resolvent = std::max(
          worst_resolvent, (phi - resolvent).norm() / (1.0 + resolvent.norm()));
    }
    const ComplexMatrix phi0 = transfer_function(p, 0.0);
    worst_sym = std::max(worst_sym,
                         (phi0 - phi0.transpose()).norm() / (1.0 + phi0.norm()));
    // K is SPD here, so the static gain must be PSD.
    worst_psd = std::max(worst_psd, -min_eigenvalue(phi0.real()));
  }
  detail = "resolvent gap " + fmt(worst_resolvent) +
           ", static-gain asymmetry " + fmt(worst_sym);
  return worst_resolvent <= 1e-9 && worst_sym <= 1e-12 &&
         worst_psd <= 1e-12;
}

// --- criterion 9: CLI reproducibility --------------------------------------

bool cli_reproducibility(std::string& detail) {
  const std::string scenario =
      std::string(LSH_SOURCE_DIR) + "/scenarios/scalar_pair.json";

  const CliResult a = run_cli("simulate --scenario " + scenario + " --seed 17");
  const CliResult b = run_cli("simulate --scenario " + scenario + " --seed 17");
  const bool sim_identical =
      a.exit_code == 0 && b.exit_code == 0 && a.output == b.output;

  const CliResult c = run_cli("grad --scenario " + scenario + " --fd-check");
  const CliResult d = run_cli("grad --scenario " + scenario + " --fd-check");
  const bool grad_identical =
      c.exit_code == 0 && d.exit_code == 0 && c.output == d.output;

  // Scenario round trip: save(load(f)) == f byte for byte.
  const Scenario sc = load_scenario(scenario);
  const bool roundtrip = save_scenario_string(sc) == slurp(scenario);

  detail = std::string(sim_identical ? "simulate identical" : "simulate DIFFERS") +
           ", " + (grad_identical ? "grad identical" : "grad DIFFERS") + ", " +
           (roundtrip ? "round trip exact" : "round trip DIFFERS");
  return sim_identical && grad_identical && roundtrip;
}

}  // namespace

int main() {
  const std::array<std::pair<const char*, std::function<bool(std::string&)>>,
                   9>
      criteria{{
          {"ALE residuals and Kronecker oracle", ale_correctness},
          {"scalar golden case", scalar_golden},
          {"interconnection theorem identity", theorem_identity},
          {"gradient correctness vs finite differences", gradient_correctness},
          {"stability inheritance", stability_inheritance},
          {"Monte Carlo vs analytic", monte_carlo},
          {"optimizer vs grid search", optimizer},
          {"frequency-domain consistency", frequency_domain},
          {"CLI reproducibility and round trip", cli_reproducibility},
      }};

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    std::string detail;
    bool ok = false;
    try {
      ok = criteria[i].second(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    std::cout << "[" << (ok ? "PASS" : "FAIL") << "] criterion " << (i + 1)
              << ": " << criteria[i].first << " (" << detail << ")\n";
    if (!ok) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
