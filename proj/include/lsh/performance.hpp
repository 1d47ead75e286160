#pragma once

// Steady-state mean square cost Upsilon = 0.5*E|Cw x|^2 = 0.5*tr(Cw P Cw^T)
// of the interconnected system and its analytic gradients with respect to
// the coupling parameters (mu, kappa, phi), obtained by the chain rule
// through (K, M, F) -> (A, Cw) -> Upsilon with sandwich-operator adjoints.

#include "lsh/coupling.hpp"
#include "lsh/gramians.hpp"

#include <functional>

namespace lsh {

// Principal symmetric PSD square root via spectral decomposition.
inline Matrix sqrt_psd(const Matrix& x, double tol = 1e-12) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(x));
  Vector ev = es.eigenvalues();
  if (ev.minCoeff() < -tol * (1.0 + x.norm()))
    throw ValidationError("sqrt_psd: matrix is not positive semidefinite");
  Vector root = ev.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

// Penalty weights of the cost: Pi1 on the plant acceleration drift, Pi2 on
// the controller output (actuator signal).
struct CostWeights {
  Matrix Pi1;  // SPD, order n
  Matrix Pi2;  // SPD, order m

  void validate(Index n, Index m, const Tolerances& tol = {}) const {
    if (Pi1.rows() != n || Pi1.cols() != n || Pi2.rows() != m ||
        Pi2.cols() != m)
      throw DimensionError("CostWeights: Pi1 must be n x n, Pi2 m x m");
    if (asymmetry_norm(Pi1) > tol.symmetry * (1.0 + Pi1.norm()) ||
        asymmetry_norm(Pi2) > tol.symmetry * (1.0 + Pi2.norm()))
      throw ValidationError("CostWeights: weights must be symmetric");
    if (min_eigenvalue(Pi1) <= 0.0 || min_eigenvalue(Pi2) <= 0.0)
      throw ValidationError("CostWeights: weights must be positive definite");
  }
};

// z -> u z v on matrices; restricted to the symmetric subspace the adjoint
// composes with the symmetrizer.
struct SandwichOp {
  Matrix u, v;
  bool restricted_to_symmetric = false;

  Matrix operator()(const Matrix& z) const { return u * z * v; }
  Matrix adjoint(const Matrix& y) const {
    Matrix a = u.transpose() * y * v.transpose();
    return restricted_to_symmetric ? symmetrize(a) : a;
  }
};

// Cw stacks sqrt(Pi1)*(M^{-1})_{1.}*[K, F M^{-1}] over [0, sqrt(Pi2)]*C,
// so that |Cw x|^2 penalises the plant acceleration drift and y2.
inline Matrix weight_matrix(const Interconnection& ic, const CostWeights& w) {
  const Index d = ic.dof();        // 2n
  const Index n = d / 2;
  const Index m = ic.link_order();
  w.validate(n, m);

  const Matrix Minv =
      ic.assembled.M.llt().solve(Matrix::Identity(d, d));
  const Matrix S = sqrt_psd(w.Pi1) * Minv.topRows(n);  // n x 2n

  Matrix Cw = Matrix::Zero(n + m, 2 * d);
  Cw.topLeftCorner(n, d) = S * ic.assembled.K;
  Cw.topRightCorner(n, d) = S * ic.assembled.F * Minv;
  // y2 = N2 q2 is the lower half of C x.
  const StateSpace ss = assemble_state_space(ic.assembled);
  Cw.bottomRows(m) = sqrt_psd(w.Pi2) * ss.C.bottomRows(m);
  return Cw;
}

inline double mean_square_cost(const Matrix& A, const Matrix& B,
                               const Matrix& Cw) {
  const Matrix P = solve_lyapunov(A, B * B.transpose());
  return 0.5 * (Cw * P * Cw.transpose()).trace();
}

struct StateSpaceGradients {
  Matrix dA;  // Gamma = QP
  Matrix dB;  // Q B
  Matrix dC;  // Cw P
};

inline StateSpaceGradients state_space_gradients(const Matrix& A,
                                                 const Matrix& B,
                                                 const Matrix& Cw) {
  const GramianBundle g = gramians(A, B, Cw);
  return {g.Gamma, g.Q * B, Cw * g.P};
}

// Directional derivatives of B and Cw in the coupling matrix N, kept for
// sensitivity analysis; N is constant under theta = (mu, kappa, phi).
inline Matrix directional_derivative_B(const LshParams& p, const Matrix& dN) {
  if (dN.rows() != p.outputs() || dN.cols() != p.dof())
    throw DimensionError("directional_derivative_B: dN must be m x n");
  Matrix dB = Matrix::Zero(2 * p.dof(), p.outputs());
  dB.bottomRows(p.dof()) = dN.transpose();
  return dB;
}

struct CouplingGradients {
  Matrix dMu, dKappa, dPhi;

  double norm() const {
    return std::sqrt(dMu.squaredNorm() + dKappa.squaredNorm() +
                     dPhi.squaredNorm());
  }
};

namespace detail {

// Adjoints of the Frechet derivatives of Cw in K, M, F, applied to Y = Cw P.
// With S = sqrt(Pi1)*(M^{-1})_{1.} the top block of Cw is S*[K, F M^{-1}]:
//   dK Cw : z -> [S z, 0],                      adjoint S(S^T Y_top [I;0])
//   dF Cw : z -> [0, S z M^{-1}],               adjoint S(S^T Y_top [0;Minv])
//   dM Cw : z -> [-S z Minv K - S F Minv z Minv ... ]  (two sandwich terms,
//           from d(M^{-1}) = -M^{-1} dM M^{-1} in the prefix and in F M^{-1}).
struct WeightAdjoints {
  Matrix dK, dM, dF;  // each 2n x 2n symmetric
};

inline WeightAdjoints weight_matrix_adjoints(const Interconnection& ic,
                                             const CostWeights& w,
                                             const Matrix& Y) {
  const Index d = ic.dof();
  const Index n = d / 2;
  const Matrix Minv = ic.assembled.M.llt().solve(Matrix::Identity(d, d));
  const Matrix S = sqrt_psd(w.Pi1) * Minv.topRows(n);
  const Matrix Ytop = Y.topRows(n);  // bottom block of Cw is K,M,F-free

  WeightAdjoints adj;
  adj.dK = symmetrize(S.transpose() * Ytop.leftCols(d));
  adj.dF = symmetrize(S.transpose() * Ytop.rightCols(d) * Minv);

  const Matrix v1 = Minv * ic.assembled.K;         // right factor, K slot
  const Matrix v1f = Minv * ic.assembled.F * Minv; // right factor, F slot
  Matrix term = -S.transpose() *
                (Ytop.leftCols(d) * v1.transpose() +
                 Ytop.rightCols(d) * v1f.transpose());
  term -= Minv * ic.assembled.F * S.transpose() * Ytop.rightCols(d) * Minv;
  adj.dM = symmetrize(term);
  return adj;
}

}  // namespace detail

// Analytic gradients of Upsilon with respect to (mu, kappa, phi):
//   dMu    = Z (M^{-1} S(F G22 - G12) M^{-1} + dM Cw^+(Cw P)) Z^T
//   dKappa = Z (-S(G21)                      + dK Cw^+(Cw P)) Z^T
//   dPhi   = Z (-S(G22 M^{-1})               + dF Cw^+(Cw P)) Z^T
// with G the Hankelian blocks of the interconnected realization.  Pass
// fixed_weight to freeze Cw (the Cw^+ terms then drop out).
inline CouplingGradients coupling_gradients_at(
    const Interconnection& ic, const Matrix& Cw,
    const CostWeights* weights_for_adjoints) {
  const Index d = ic.dof();
  const StateSpace ss = assemble_state_space(ic.assembled);
  const double abscissa = spectral_abscissa(ss.A);
  if (abscissa >= 0.0)
    throw InstabilityError("coupling_gradients: interconnected A not Hurwitz");

  const GramianBundle g = gramians(ss.A, ss.B, Cw);
  const HankelianBlocks hb = hankelian_blocks(g.P, g.Q);
  const Matrix Minv = ic.assembled.M.llt().solve(Matrix::Identity(d, d));

  Matrix innerM = Minv * symmetrize(ic.assembled.F * hb.g22 - hb.g12) * Minv;
  Matrix innerK = -symmetrize(hb.g21);
  Matrix innerF = -symmetrize(hb.g22 * Minv);

  if (weights_for_adjoints != nullptr) {
    const Matrix Y = Cw * g.P;
    const auto adj = detail::weight_matrix_adjoints(ic, *weights_for_adjoints, Y);
    innerM += adj.dM;
    innerK += adj.dK;
    innerF += adj.dF;
  }

  CouplingGradients out;
  out.dMu = symmetrize(ic.Z * innerM * ic.Z.transpose());
  out.dKappa = symmetrize(ic.Z * innerK * ic.Z.transpose());
  out.dPhi = symmetrize(ic.Z * innerF * ic.Z.transpose());
  return out;
}

inline double coupling_cost(const LshParams& sys1, const LshParams& sys2,
                            const CouplingParams& c, const CostWeights& w) {
  const Interconnection ic =
      interconnect(sys1, sys2, c, {}, /*enforce_cone=*/false);
  const StateSpace ss = assemble_state_space(ic.assembled);
  return mean_square_cost(ss.A, ss.B, weight_matrix(ic, w));
}

inline double coupling_cost_fixed_weight(const LshParams& sys1,
                                         const LshParams& sys2,
                                         const CouplingParams& c,
                                         const Matrix& Cw) {
  const Interconnection ic =
      interconnect(sys1, sys2, c, {}, /*enforce_cone=*/false);
  const StateSpace ss = assemble_state_space(ic.assembled);
  return mean_square_cost(ss.A, ss.B, Cw);
}

inline CouplingGradients coupling_gradients(const LshParams& sys1,
                                            const LshParams& sys2,
                                            const CouplingParams& c,
                                            const CostWeights& w) {
  const Interconnection ic = interconnect(sys1, sys2, c);
  return coupling_gradients_at(ic, weight_matrix(ic, w), &w);
}

inline CouplingGradients coupling_gradients_fixed_weight(
    const LshParams& sys1, const LshParams& sys2, const CouplingParams& c,
    const Matrix& Cw) {
  const Interconnection ic = interconnect(sys1, sys2, c);
  return coupling_gradients_at(ic, Cw, nullptr);
}

// Central finite differences of a cost over the symmetric-matrix basis
// {e_i e_j^T + e_j e_i^T}; the returned matrices pair with perturbations
// through the Frobenius inner product, matching the analytic convention.
inline CouplingGradients finite_difference_gradients(
    const std::function<double(const CouplingParams&)>& cost,
    const CouplingParams& c, double h) {
  if (h <= 0.0) throw ValidationError("finite_difference_gradients: h must be > 0");
  const Index m = c.order();

  auto fd_matrix = [&](Matrix CouplingParams::* field) {
    Matrix g = Matrix::Zero(m, m);
    for (Index i = 0; i < m; ++i) {
      for (Index j = i; j < m; ++j) {
        Matrix dir = Matrix::Zero(m, m);
        dir(i, j) += 1.0;
        dir(j, i) += 1.0;
        if (i == j) dir(i, i) = 1.0;

        double step = h;
        double deriv = 0.0;
        bool ok = false;
        for (int attempt = 0; attempt < 3 && !ok; ++attempt, step *= 0.5) {
          CouplingParams cp = c;
          CouplingParams cm = c;
          cp.*field += step * dir;
          cm.*field -= step * dir;
          try {
            deriv = (cost(cp) - cost(cm)) / (2.0 * step);
            ok = true;
          } catch (const InstabilityError&) {
            // perturbed system left the Hurwitz region; shrink and retry
          }
        }
        if (!ok)
          throw InstabilityError(
              "finite_difference_gradients: perturbation destabilises the "
              "system even after step shrinking");
        // <G, dir> = deriv with dir = e_i e_j^T + e_j e_i^T (i != j).
        if (i == j) {
          g(i, i) = deriv;
        } else {
          g(i, j) = g(j, i) = 0.5 * deriv;
        }
      }
    }
    return g;
  };

  CouplingGradients out;
  out.dMu = fd_matrix(&CouplingParams::mu);
  out.dKappa = fd_matrix(&CouplingParams::kappa);
  out.dPhi = fd_matrix(&CouplingParams::phi);
  return out;
}

struct GradReport {
  double cost = 0.0;
  CouplingGradients analytic;
  CouplingGradients finite_difference;  // filled when fd_step > 0
  double fd_relative_error = -1.0;      // -1 when the check was not run
  double stationarity_norm = 0.0;
};

inline GradReport gradient_report(const LshParams& sys1, const LshParams& sys2,
                                  const CouplingParams& c,
                                  const CostWeights& w, double fd_step = 0.0) {
  GradReport r;
  r.cost = coupling_cost(sys1, sys2, c, w);
  r.analytic = coupling_gradients(sys1, sys2, c, w);
  r.stationarity_norm = r.analytic.norm();
  if (fd_step > 0.0) {
    r.finite_difference = finite_difference_gradients(
        [&](const CouplingParams& cc) { return coupling_cost(sys1, sys2, cc, w); },
        c, fd_step);
    const double scale = r.analytic.norm() + r.finite_difference.norm();
    const double gap =
        std::sqrt((r.analytic.dMu - r.finite_difference.dMu).squaredNorm() +
                  (r.analytic.dKappa - r.finite_difference.dKappa).squaredNorm() +
                  (r.analytic.dPhi - r.finite_difference.dPhi).squaredNorm());
    r.fd_relative_error = scale > 0.0 ? gap / scale : 0.0;
  }
  return r;
}

}  // namespace lsh
