#pragma once

// Linear stochastic Hamiltonian (LSH) systems: a second-order system
//   M dq' = (-K q - F q') dt + N^T dW,   y = N q
// parameterised by stiffness K, mass M, damping F and coupling N, with the
// first-order realization
//   dx = A x dt + B dW,  y = C x,   x = [q; p],  p = M q'.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <complex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lsh {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using Index = Eigen::Index;

// Error classes; the CLI maps these onto its exit-code contract.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SingularMassError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InstabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline Matrix symmetrize(const Matrix& z) { return 0.5 * (z + z.transpose()); }

inline double asymmetry_norm(const Matrix& x) {
  return (x - x.transpose()).norm();
}

// Smallest eigenvalue of a symmetric matrix (0 for empty input).
inline double min_eigenvalue(const Matrix& x) {
  if (x.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(x),
                                           Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

struct Tolerances {
  double symmetry = 1e-12;  // relative, scaled by ||X||
  double psd = 1e-12;       // eigenvalues >= -psd*||X|| count as nonnegative
};

// The quadruple (K, M, F, N) of one LSH system.
struct LshParams {
  Matrix K;  // stiffness, symmetric n x n
  Matrix M;  // mass, symmetric positive definite n x n
  Matrix F;  // damping, symmetric positive semidefinite n x n
  Matrix N;  // system-environment coupling, m x n

  Index dof() const { return M.rows(); }
  Index outputs() const { return N.rows(); }
};

// First-order realization (A, B, C).
struct StateSpace {
  Matrix A;  // 2n x 2n
  Matrix B;  // 2n x m
  Matrix C;  // m x 2n
  Index n = 0;
  Index m = 0;
};

struct InvariantCheck {
  std::string name;
  bool pass = false;
  double magnitude = 0.0;  // violating eigenvalue or asymmetry norm
};

struct ValidationReport {
  std::vector<InvariantCheck> checks;
  bool pass = true;

  void add(std::string name, bool ok, double mag) {
    pass = pass && ok;
    checks.push_back({std::move(name), ok, mag});
  }
  std::string first_failure() const {
    for (const auto& c : checks)
      if (!c.pass) return c.name;
    return {};
  }
};

inline void require_dims(const LshParams& p) {
  const Index n = p.dof();
  if (n <= 0) throw DimensionError("LshParams: empty mass matrix");
  if (p.M.cols() != n) throw DimensionError("LshParams: M not square");
  if (p.K.rows() != n || p.K.cols() != n)
    throw DimensionError("LshParams: K is not n x n");
  if (p.F.rows() != n || p.F.cols() != n)
    throw DimensionError("LshParams: F is not n x n");
  if (p.N.cols() != n) throw DimensionError("LshParams: N is not m x n");
  if (p.N.rows() <= 0) throw DimensionError("LshParams: empty output map N");
}

inline ValidationReport validate_params(const LshParams& p,
                                        const Tolerances& tol = {}) {
  require_dims(p);
  ValidationReport r;

  const double sK = tol.symmetry * (1.0 + p.K.norm());
  const double sM = tol.symmetry * (1.0 + p.M.norm());
  const double sF = tol.symmetry * (1.0 + p.F.norm());
  r.add("K symmetric", asymmetry_norm(p.K) <= sK, asymmetry_norm(p.K));
  r.add("M symmetric", asymmetry_norm(p.M) <= sM, asymmetry_norm(p.M));
  r.add("F symmetric", asymmetry_norm(p.F) <= sF, asymmetry_norm(p.F));

  Eigen::LLT<Matrix> llt(symmetrize(p.M));
  const double m_min = min_eigenvalue(p.M);
  r.add("M positive definite", llt.info() == Eigen::Success && m_min > 0.0,
        m_min);

  const double f_min = min_eigenvalue(p.F);
  r.add("F positive semidefinite", f_min >= -tol.psd * (1.0 + p.F.norm()),
        f_min);
  return r;
}

// Energy matrix R = diag(K, M^{-1}); the Hamiltonian is H(x) = x^T R x / 2.
inline Matrix energy_matrix(const LshParams& p) {
  require_dims(p);
  const Index n = p.dof();
  Eigen::LLT<Matrix> llt(symmetrize(p.M));
  if (llt.info() != Eigen::Success)
    throw SingularMassError("energy_matrix: mass matrix is not SPD");
  Matrix R = Matrix::Zero(2 * n, 2 * n);
  R.topLeftCorner(n, n) = p.K;
  R.bottomRightCorner(n, n) = llt.solve(Matrix::Identity(n, n));
  return symmetrize(R);
}

// A = [[0, M^{-1}], [-K, -F M^{-1}]],  B = [0; N^T],  C = [N, 0].
inline StateSpace assemble_state_space(const LshParams& p) {
  require_dims(p);
  const Index n = p.dof();
  const Index m = p.outputs();
  Eigen::LLT<Matrix> llt(symmetrize(p.M));
  if (llt.info() != Eigen::Success)
    throw SingularMassError("assemble_state_space: Cholesky of M failed");
  const Matrix Minv = llt.solve(Matrix::Identity(n, n));

  StateSpace ss;
  ss.n = n;
  ss.m = m;
  ss.A = Matrix::Zero(2 * n, 2 * n);
  ss.A.topRightCorner(n, n) = Minv;
  ss.A.bottomLeftCorner(n, n) = -p.K;
  ss.A.bottomRightCorner(n, n) = -p.F * Minv;
  ss.B = Matrix::Zero(2 * n, m);
  ss.B.bottomRows(n) = p.N.transpose();
  ss.C = Matrix::Zero(m, 2 * n);
  ss.C.leftCols(n) = p.N;
  return ss;
}

// H = x^T R x / 2 and its gradient R x.
inline std::pair<double, Vector> hamiltonian(const LshParams& p,
                                             const Vector& x) {
  const Matrix R = energy_matrix(p);
  if (x.size() != R.rows())
    throw DimensionError("hamiltonian: state must have length 2n");
  Vector grad = R * x;
  return {0.5 * x.dot(grad), std::move(grad)};
}

// Phi(s) = N (K + s F + s^2 M)^{-1} N^T.
inline ComplexMatrix transfer_function(const LshParams& p,
                                       std::complex<double> s) {
  require_dims(p);
  ComplexMatrix pencil =
      p.K.cast<std::complex<double>>() + s * p.F.cast<std::complex<double>>() +
      (s * s) * p.M.cast<std::complex<double>>();
  Eigen::FullPivLU<ComplexMatrix> lu(pencil);
  if (!lu.isInvertible())
    throw NumericalError("transfer_function: singular pencil at s");
  ComplexMatrix Nc = p.N.cast<std::complex<double>>();
  return Nc * lu.solve(ComplexMatrix(Nc.transpose()));
}

inline double spectral_abscissa(const Matrix& A) {
  Eigen::EigenSolver<Matrix> es(A, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success)
    throw NumericalError("spectral_abscissa: eigensolver did not converge");
  return es.eigenvalues().real().maxCoeff();
}

struct StabilityReport {
  bool stable = false;
  double abscissa = 0.0;
};

inline StabilityReport is_internally_stable(const LshParams& p,
                                            double tol = 0.0) {
  const StateSpace ss = assemble_state_space(p);
  const double a = spectral_abscissa(ss.A);
  return {a < -tol, a};
}

}  // namespace lsh
