#pragma once

// Continuous-time algebraic Lyapunov equations
//   A P + P A^T + B B^T = 0   (controllability)
//   A^T Q + Q A + C^T C = 0   (observability)
// solved by Schur reduction (Bartels-Stewart), plus the Hankelian QP and its
// position/momentum block partition.

#include "lsh/core.hpp"

#include <complex>

namespace lsh {

enum class LyapunovSide { controllability, observability };

// Unique symmetric solution of A X + X A^T + W = 0 for Hurwitz A.
// Reduces A to complex Schur form A = U T U^*, back-substitutes the
// triangular equation T Y + Y T^* + U^* W U = 0 entrywise, and transforms
// back.  The result is symmetrized exactly.
inline Matrix solve_lyapunov(const Matrix& A, const Matrix& W,
                             LyapunovSide side = LyapunovSide::controllability) {
  const Index k = A.rows();
  if (A.cols() != k || W.rows() != k || W.cols() != k)
    throw DimensionError("solve_lyapunov: A and W must be square, same order");

  const Matrix Aw =
      side == LyapunovSide::controllability ? A : Matrix(A.transpose());

  const double abscissa = spectral_abscissa(Aw);
  if (abscissa >= 0.0)
    throw InstabilityError(
        "solve_lyapunov: A is not Hurwitz (spectral abscissa " +
        std::to_string(abscissa) + "), no stationary solution");

  Eigen::ComplexSchur<ComplexMatrix> schur(Aw.cast<std::complex<double>>());
  if (schur.info() != Eigen::Success)
    throw NumericalError("solve_lyapunov: Schur decomposition failed");
  const ComplexMatrix& T = schur.matrixT();
  const ComplexMatrix& U = schur.matrixU();

  ComplexMatrix Wt = U.adjoint() * W.cast<std::complex<double>>() * U;
  ComplexMatrix Y = ComplexMatrix::Zero(k, k);
  for (Index j = k - 1; j >= 0; --j) {
    for (Index i = k - 1; i >= 0; --i) {
      std::complex<double> rhs = Wt(i, j);
      for (Index l = i + 1; l < k; ++l) rhs += T(i, l) * Y(l, j);
      for (Index l = j + 1; l < k; ++l) rhs += Y(i, l) * std::conj(T(j, l));
      Y(i, j) = -rhs / (T(i, i) + std::conj(T(j, j)));
    }
  }
  Matrix X = (U * Y * U.adjoint()).real();
  return symmetrize(X);
}

inline double lyapunov_residual(const Matrix& A, const Matrix& X,
                                const Matrix& W) {
  return (A * X + X * A.transpose() + W).norm();
}

struct GramianBundle {
  Matrix P;      // controllability Gramian
  Matrix Q;      // observability Gramian
  Matrix Gamma;  // Hankelian QP
  double residual_P = 0.0;  // ||A P + P A^T + B B^T||
  double residual_Q = 0.0;  // ||A^T Q + Q A + C^T C||
};

inline GramianBundle gramians(const Matrix& A, const Matrix& B,
                              const Matrix& C) {
  GramianBundle g;
  const Matrix BBt = B * B.transpose();
  const Matrix CtC = C.transpose() * C;
  g.P = solve_lyapunov(A, BBt, LyapunovSide::controllability);
  g.Q = solve_lyapunov(A, CtC, LyapunovSide::observability);
  g.Gamma = g.Q * g.P;
  g.residual_P = lyapunov_residual(A, g.P, BBt);
  g.residual_Q = lyapunov_residual(A.transpose(), g.Q, CtC);
  return g;
}

// Hankelian QP partitioned conformally with the position/momentum split.
struct HankelianBlocks {
  Matrix Gamma;
  Matrix g11, g12, g21, g22;
};

inline HankelianBlocks hankelian_blocks(const Matrix& P, const Matrix& Q) {
  const Index k = P.rows();
  if (Q.rows() != k || Q.cols() != k || P.cols() != k)
    throw DimensionError("hankelian_blocks: P, Q must be square, same order");
  if (k % 2 != 0)
    throw DimensionError("hankelian_blocks: odd order has no block partition");
  const Index h = k / 2;
  HankelianBlocks hb;
  hb.Gamma = Q * P;
  hb.g11 = hb.Gamma.topLeftCorner(h, h);
  hb.g12 = hb.Gamma.topRightCorner(h, h);
  hb.g21 = hb.Gamma.bottomLeftCorner(h, h);
  hb.g22 = hb.Gamma.bottomRightCorner(h, h);
  return hb;
}

}  // namespace lsh
