#pragma once

// Monte Carlo oracle for dx = A x dt + B dW with standard Wiener forcing:
// Euler-Maruyama paths (or exact-in-distribution stepping via the matrix
// exponential), empirical steady-state statistics, the stationary energy
// balance identity, and shaping-filter augmentation for colored noise.

#include "lsh/core.hpp"
#include "lsh/gramians.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cstdint>
#include <future>
#include <random>
#include <vector>

namespace lsh {

struct SimConfig {
  double dt = 1e-3;
  double horizon = 100.0;
  double burn_in = 10.0;
  int n_paths = 16;
  std::uint64_t seed = 0;

  void validate() const {
    if (dt <= 0.0) throw ValidationError("SimConfig: dt must be > 0");
    if (burn_in >= horizon)
      throw ValidationError("SimConfig: burn_in must be < horizon");
    if (n_paths < 1) throw ValidationError("SimConfig: n_paths must be >= 1");
  }
};

enum class SimMethod { euler_maruyama, exact };

struct PathSummary {
  Vector mean;                       // across paths and post-burn-in time
  Matrix covariance;                 // mean of per-path raw second moments
  Matrix covariance_stderr;          // entrywise, across per-path estimates
  std::vector<Matrix> path_covariances;
  std::vector<Vector> terminal_states;
  std::uint64_t samples_per_path = 0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Independent substream per (root seed, path index).
inline std::mt19937_64 path_engine(std::uint64_t root, std::uint64_t path) {
  std::uint64_t s = root ^ (0xd1b54a32d192ed03ULL * (path + 1));
  const std::uint64_t a = splitmix64(s);
  const std::uint64_t b = splitmix64(s);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

struct Stepper {
  Matrix drift;  // state propagator per step
  Matrix noise;  // noise injection per step (applied to i.i.d. N(0, I))
};

inline Stepper make_stepper(const StateSpace& ss, double dt, SimMethod method) {
  const Index d = ss.A.rows();
  Stepper st;
  if (method == SimMethod::euler_maruyama) {
    st.drift = Matrix::Identity(d, d) + dt * ss.A;
    st.noise = std::sqrt(dt) * ss.B;
    return st;
  }
  // Exact one-step distribution via Van Loan's block-exponential: the
  // covariance of the step noise is Qd = Ad * (upper-right block).
  const Index m = ss.B.cols();
  Matrix H = Matrix::Zero(2 * d, 2 * d);
  H.topLeftCorner(d, d) = -dt * ss.A;
  H.topRightCorner(d, d) = dt * ss.B * ss.B.transpose();
  H.bottomRightCorner(d, d) = dt * ss.A.transpose();
  const Matrix E = H.exp();
  st.drift = E.bottomRightCorner(d, d).transpose();
  const Matrix Qd = symmetrize(st.drift * E.topRightCorner(d, d));
  Eigen::SelfAdjointEigenSolver<Matrix> es(Qd);
  st.noise = es.eigenvectors() *
             es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  (void)m;
  return st;
}

struct PathResult {
  Vector mean;
  Matrix second_moment;
  Vector terminal;
};

inline PathResult run_path(const Stepper& st, Index noise_dim, double dt,
                           double horizon, double burn_in,
                           std::uint64_t root_seed, std::uint64_t path_index) {
  const Index d = st.drift.rows();
  const std::uint64_t n_steps = static_cast<std::uint64_t>(horizon / dt);
  const std::uint64_t skip = static_cast<std::uint64_t>(burn_in / dt);

  auto rng = path_engine(root_seed, path_index);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Vector x = Vector::Zero(d);
  Vector z(noise_dim);
  Vector mean = Vector::Zero(d);
  Matrix moment = Matrix::Zero(d, d);
  std::uint64_t kept = 0;

  for (std::uint64_t k = 0; k < n_steps; ++k) {
    for (Index i = 0; i < noise_dim; ++i) z(i) = gauss(rng);
    x = st.drift * x + st.noise * z;
    if (x.norm() > 1e12)
      throw NumericalError("simulate_paths: trajectory diverged (dt = " +
                           std::to_string(dt) + " too coarse or A unstable)");
    if (k >= skip) {
      mean += x;
      moment += x * x.transpose();
      ++kept;
    }
  }
  if (kept == 0) throw ValidationError("simulate_paths: no samples kept");
  return {mean / double(kept), moment / double(kept), x};
}

}  // namespace detail

inline PathSummary simulate_paths(const StateSpace& ss, const SimConfig& cfg,
                                  SimMethod method = SimMethod::euler_maruyama) {
  cfg.validate();
  if (spectral_abscissa(ss.A) >= 0.0)
    throw InstabilityError("simulate_paths: A is not Hurwitz");

  const detail::Stepper st = detail::make_stepper(ss, cfg.dt, method);
  const Index noise_dim = st.noise.cols();
  const Index d = ss.A.rows();

  // Paths are independent; aggregation is by path index, so the summary is
  // identical regardless of scheduling.
  std::vector<std::future<detail::PathResult>> jobs;
  jobs.reserve(cfg.n_paths);
  for (int k = 0; k < cfg.n_paths; ++k) {
    jobs.push_back(std::async(std::launch::async, [&, k] {
      return detail::run_path(st, noise_dim, cfg.dt, cfg.horizon, cfg.burn_in,
                              cfg.seed, static_cast<std::uint64_t>(k));
    }));
  }

  PathSummary s;
  s.mean = Vector::Zero(d);
  s.covariance = Matrix::Zero(d, d);
  s.path_covariances.reserve(cfg.n_paths);
  s.terminal_states.reserve(cfg.n_paths);
  for (auto& job : jobs) {
    detail::PathResult r = job.get();
    s.mean += r.mean;
    s.covariance += r.second_moment;
    s.path_covariances.push_back(std::move(r.second_moment));
    s.terminal_states.push_back(std::move(r.terminal));
  }
  s.mean /= double(cfg.n_paths);
  s.covariance /= double(cfg.n_paths);
  s.samples_per_path = static_cast<std::uint64_t>(
      (cfg.horizon - cfg.burn_in) / cfg.dt);

  s.covariance_stderr = Matrix::Zero(d, d);
  if (cfg.n_paths > 1) {
    for (const Matrix& pc : s.path_covariances)
      s.covariance_stderr += (pc - s.covariance).cwiseAbs2();
    s.covariance_stderr =
        (s.covariance_stderr / double(cfg.n_paths - 1)).cwiseSqrt() /
        std::sqrt(double(cfg.n_paths));
  }
  return s;
}

struct EmpiricalCost {
  double cost = 0.0;
  double standard_error = 0.0;
};

// Upsilon-hat = 0.5*tr(Cw P-hat Cw^T), with a standard error batched over
// the per-path covariance estimates.
inline EmpiricalCost empirical_cost(const PathSummary& s, const Matrix& Cw) {
  if (Cw.cols() != s.covariance.rows())
    throw DimensionError("empirical_cost: weight width must match state dim");
  std::vector<double> per_path;
  per_path.reserve(s.path_covariances.size());
  for (const Matrix& pc : s.path_covariances)
    per_path.push_back(0.5 * (Cw * pc * Cw.transpose()).trace());

  EmpiricalCost ec;
  for (double v : per_path) ec.cost += v;
  ec.cost /= double(per_path.size());
  if (per_path.size() > 1) {
    double ss = 0.0;
    for (double v : per_path) ss += (v - ec.cost) * (v - ec.cost);
    ec.standard_error = std::sqrt(ss / double(per_path.size() - 1)) /
                std::sqrt(double(per_path.size()));
  }
  return ec;
}

// Stationary energy balance: the expected viscous dissipation E||q'||_F^2
// equals half the noise injection rate, 0.5*tr(N M^{-1} N^T).  Both sides
// are evaluated from the ALE solution P; returns their absolute gap.
inline double energy_balance_residual(const LshParams& p, const Matrix& P) {
  require_dims(p);
  const Index n = p.dof();
  if (P.rows() != 2 * n || P.cols() != 2 * n)
    throw DimensionError("energy_balance_residual: P must be 2n x 2n");
  const Matrix Minv = p.M.llt().solve(Matrix::Identity(n, n));
  const Matrix Ppp = P.bottomRightCorner(n, n);
  const double dissipation = (Minv * p.F * Minv * Ppp).trace();
  const double injection = 0.5 * (p.N * Minv * p.N.transpose()).trace();
  return std::abs(dissipation - injection);
}

// Stable LTI filter whose output realizes the colored driving noise:
//   d xi = a xi dt + b d ups,   dW = c xi dt + d d ups.
struct ShapingFilter {
  Matrix a, b, c, d;
};

// Augmented realization ([A, B c; 0, a], [B d; b], [C, 0]) driven by the
// standard Wiener process behind the filter.
inline StateSpace augment_with_filter(const StateSpace& ss,
                                      const ShapingFilter& f) {
  const Index d = ss.A.rows();
  const Index m = ss.B.cols();
  const Index k = f.a.rows();
  if (f.a.cols() != k || f.b.rows() != k || f.c.rows() != m ||
      f.c.cols() != k || f.d.rows() != m || f.b.cols() != f.d.cols())
    throw DimensionError("augment_with_filter: filter dimensions do not compose");
  if (k > 0 && spectral_abscissa(f.a) >= 0.0)
    throw InstabilityError("augment_with_filter: filter matrix a is not Hurwitz");

  StateSpace aug;
  aug.n = ss.n;
  aug.m = ss.m;
  aug.A = Matrix::Zero(d + k, d + k);
  aug.A.topLeftCorner(d, d) = ss.A;
  aug.A.topRightCorner(d, k) = ss.B * f.c;
  aug.A.bottomRightCorner(k, k) = f.a;
  aug.B = Matrix::Zero(d + k, f.d.cols());
  aug.B.topRows(d) = ss.B * f.d;
  aug.B.bottomRows(k) = f.b;
  aug.C = Matrix::Zero(ss.C.rows(), d + k);
  aug.C.leftCols(d) = ss.C;
  return aug;
}

}  // namespace lsh
