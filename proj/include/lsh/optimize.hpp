#pragma once

// Projected gradient descent on the mean square cost over the coupling
// parameters theta = (mu, kappa, phi), with Armijo backtracking, projection
// of mu and phi (optionally kappa) onto the PSD cone, and a stability
// safeguard that rejects any step leaving the Hurwitz region.

#include "lsh/performance.hpp"

#include <cstdint>
#include <vector>

namespace lsh {

// Nearest (Frobenius) PSD matrix: clip negative eigenvalues to zero.
inline Matrix project_psd(const Matrix& X, double sym_tol = 1e-12) {
  if (X.rows() != X.cols())
    throw DimensionError("project_psd: matrix must be square");
  if (asymmetry_norm(X) > sym_tol * (1.0 + X.norm()))
    throw ValidationError("project_psd: input must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(X));
  Vector ev = es.eigenvalues().cwiseMax(0.0);
  return symmetrize(es.eigenvectors() * ev.asDiagonal() *
                    es.eigenvectors().transpose());
}

struct OptimOptions {
  int max_iters = 500;
  double grad_tol = 1e-8;      // threshold on the projected gradient mapping
  double armijo_c = 1e-4;      // sufficient decrease constant, in (0, 1)
  double backtrack = 0.5;      // step shrink factor, in (0, 1)
  double initial_step = -1.0;  // <= 0: use 1/(1 + ||grad(theta0)||)
  bool kappa_psd = false;      // constrain kappa to the PSD cone
  bool optimize_mu = true;     // frozen parameters keep their initial value
  bool optimize_kappa = true;
  bool optimize_phi = true;
  int max_halvings = 50;
  std::uint64_t seed = 0;      // reserved for randomized restarts

  void validate() const {
    if (armijo_c <= 0.0 || armijo_c >= 1.0)
      throw ValidationError("OptimOptions: armijo_c must lie in (0, 1)");
    if (backtrack <= 0.0 || backtrack >= 1.0)
      throw ValidationError("OptimOptions: backtrack must lie in (0, 1)");
    if (grad_tol <= 0.0 || max_iters < 0)
      throw ValidationError("OptimOptions: invalid tolerance or budget");
  }
};

enum class Termination { converged, max_iters, stalled };

struct OptimResult {
  CouplingParams theta;
  std::vector<double> cost_trace;  // cost at theta_0, theta_1, ...
  double stationarity = 0.0;
  Termination reason = Termination::max_iters;
  int iterations = 0;
};

namespace detail {

inline CouplingParams project_feasible(const CouplingParams& c,
                                       bool kappa_psd) {
  CouplingParams out;
  out.mu = project_psd(symmetrize(c.mu));
  out.phi = project_psd(symmetrize(c.phi));
  out.kappa = kappa_psd ? project_psd(symmetrize(c.kappa)) : symmetrize(c.kappa);
  return out;
}

inline CouplingParams step(const CouplingParams& c, const CouplingGradients& g,
                           double alpha) {
  CouplingParams out = c;
  out.mu -= alpha * g.dMu;
  out.kappa -= alpha * g.dKappa;
  out.phi -= alpha * g.dPhi;
  return out;
}

inline double distance(const CouplingParams& a, const CouplingParams& b) {
  return std::sqrt((a.mu - b.mu).squaredNorm() +
                   (a.kappa - b.kappa).squaredNorm() +
                   (a.phi - b.phi).squaredNorm());
}

inline bool is_stable_at(const LshParams& s1, const LshParams& s2,
                         const CouplingParams& c) {
  const Interconnection ic = interconnect(s1, s2, c);
  return is_internally_stable(ic.assembled).stable;
}

}  // namespace detail

inline OptimResult optimize_coupling(const LshParams& sys1,
                                     const LshParams& sys2,
                                     const CouplingParams& theta0,
                                     const CostWeights& w,
                                     const OptimOptions& opts = {}) {
  opts.validate();
  CouplingParams theta = detail::project_feasible(theta0, opts.kappa_psd);
  if (!detail::is_stable_at(sys1, sys2, theta))
    throw InstabilityError("optimize_coupling: theta0 is not stabilising");

  OptimResult res;
  double cost = coupling_cost(sys1, sys2, theta, w);
  res.cost_trace.push_back(cost);

  auto masked_gradient = [&] {
    CouplingGradients g = coupling_gradients(sys1, sys2, theta, w);
    if (!opts.optimize_mu) g.dMu.setZero();
    if (!opts.optimize_kappa) g.dKappa.setZero();
    if (!opts.optimize_phi) g.dPhi.setZero();
    return g;
  };
  CouplingGradients grad = masked_gradient();
  double alpha = opts.initial_step > 0.0 ? opts.initial_step
                                         : 1.0 / (1.0 + grad.norm());

  for (int it = 0; it < opts.max_iters; ++it) {
    // Stationarity via the projected gradient mapping at unit step; equals
    // the plain gradient norm away from the PSD boundary.
    const CouplingParams mapped =
        detail::project_feasible(detail::step(theta, grad, 1.0),
                                 opts.kappa_psd);
    res.stationarity = detail::distance(theta, mapped);
    if (res.stationarity <= opts.grad_tol) {
      res.reason = Termination::converged;
      res.theta = theta;
      res.iterations = it;
      return res;
    }

    bool accepted = false;
    for (int halving = 0; halving <= opts.max_halvings; ++halving) {
      const CouplingParams candidate = detail::project_feasible(
          detail::step(theta, grad, alpha), opts.kappa_psd);
      if (!detail::is_stable_at(sys1, sys2, candidate)) {
        alpha *= opts.backtrack;
        continue;
      }
      const double cand_cost = coupling_cost(sys1, sys2, candidate, w);
      // <grad, theta - candidate> reduces to alpha*||grad||^2 when the
      // projection is inactive.
      const double decrease =
          (grad.dMu.cwiseProduct(theta.mu - candidate.mu)).sum() +
          (grad.dKappa.cwiseProduct(theta.kappa - candidate.kappa)).sum() +
          (grad.dPhi.cwiseProduct(theta.phi - candidate.phi)).sum();
      if (cand_cost <= cost - opts.armijo_c * decrease) {
        theta = candidate;
        cost = cand_cost;
        accepted = true;
        break;
      }
      alpha *= opts.backtrack;
    }

    if (!accepted) {
      res.reason = Termination::stalled;
      res.theta = theta;
      res.iterations = it;
      return res;
    }

    res.cost_trace.push_back(cost);
    grad = masked_gradient();
    alpha = std::min(alpha * 2.0, 1e6);  // tentative growth for the next step
  }

  const CouplingParams mapped = detail::project_feasible(
      detail::step(theta, grad, 1.0), opts.kappa_psd);
  res.stationarity = detail::distance(theta, mapped);
  res.reason = res.stationarity <= opts.grad_tol ? Termination::converged
                                                 : Termination::max_iters;
  res.theta = theta;
  res.iterations = opts.max_iters;
  return res;
}

}  // namespace lsh
