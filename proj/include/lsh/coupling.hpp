#pragma once

// Interconnection of two LSH systems through an ideal (massless)
// inerter-spring-damper link acting between their outputs y1, y2.
// The joint system is again LSH with
//   K = K0 + Z^T kappa Z,  M = M0 + Z^T mu Z,  F = F0 + Z^T phi Z,
//   N = diag(N1, N2),      Z = [-N1, N2],
// where K0, M0, F0 are the block diagonals of the decoupled pair.

#include "lsh/core.hpp"

namespace lsh {

// (mu, kappa, phi): inertance, stiffness and damping of the link, order m.
struct CouplingParams {
  Matrix mu;
  Matrix kappa;
  Matrix phi;

  Index order() const { return mu.rows(); }
};

inline ValidationReport validate_coupling(const CouplingParams& c,
                                          const Tolerances& tol = {}) {
  const Index m = c.order();
  if (m <= 0 || c.mu.cols() != m || c.kappa.rows() != m ||
      c.kappa.cols() != m || c.phi.rows() != m || c.phi.cols() != m)
    throw DimensionError("CouplingParams: mu, kappa, phi must be m x m");

  ValidationReport r;
  r.add("mu symmetric",
        asymmetry_norm(c.mu) <= tol.symmetry * (1.0 + c.mu.norm()),
        asymmetry_norm(c.mu));
  r.add("kappa symmetric",
        asymmetry_norm(c.kappa) <= tol.symmetry * (1.0 + c.kappa.norm()),
        asymmetry_norm(c.kappa));
  r.add("phi symmetric",
        asymmetry_norm(c.phi) <= tol.symmetry * (1.0 + c.phi.norm()),
        asymmetry_norm(c.phi));
  const double mu_min = min_eigenvalue(c.mu);
  const double phi_min = min_eigenvalue(c.phi);
  r.add("mu positive semidefinite", mu_min >= -tol.psd * (1.0 + c.mu.norm()),
        mu_min);
  r.add("phi positive semidefinite", phi_min >= -tol.psd * (1.0 + c.phi.norm()),
        phi_min);
  return r;
}

struct Interconnection {
  LshParams sys1, sys2;
  CouplingParams coupling;
  Matrix Z;            // m x 2n
  Matrix K0, M0, F0;   // decoupled block diagonals, 2n x 2n
  LshParams assembled; // joint (K, M, F, N)-system, 2n dof, 2m outputs

  Index dof() const { return assembled.dof(); }      // 2n
  Index link_order() const { return coupling.order(); }
};

// With enforce_cone = false the PSD requirements on mu and phi are skipped
// (symmetry and dimensions still hold); gradient probes step slightly
// outside the cone and the assembled system stays well defined as long as
// M stays SPD.
inline Interconnection interconnect(const LshParams& sys1,
                                    const LshParams& sys2,
                                    const CouplingParams& c,
                                    const Tolerances& tol = {},
                                    bool enforce_cone = true) {
  require_dims(sys1);
  require_dims(sys2);
  if (sys1.dof() != sys2.dof() || sys1.outputs() != sys2.outputs())
    throw DimensionError("interconnect: systems must share n and m");
  if (c.order() != sys1.outputs())
    throw DimensionError("interconnect: coupling order must equal m");

  for (const auto* p : {&sys1, &sys2}) {
    auto r = validate_params(*p, tol);
    if (!r.pass)
      throw ValidationError("interconnect: system invariant failed: " +
                            r.first_failure());
  }
  auto rc = validate_coupling(c, tol);
  if (!rc.pass) {
    const bool cone_only = [&] {
      for (const auto& chk : rc.checks)
        if (!chk.pass && chk.name.find("semidefinite") == std::string::npos)
          return false;
      return true;
    }();
    if (enforce_cone || !cone_only)
      throw ValidationError("interconnect: coupling invariant failed: " +
                            rc.first_failure());
  }

  const Index n = sys1.dof();
  const Index m = sys1.outputs();

  Interconnection ic;
  ic.sys1 = sys1;
  ic.sys2 = sys2;
  ic.coupling = c;

  ic.Z = Matrix::Zero(m, 2 * n);
  ic.Z.leftCols(n) = -sys1.N;
  ic.Z.rightCols(n) = sys2.N;

  ic.K0 = Matrix::Zero(2 * n, 2 * n);
  ic.K0.topLeftCorner(n, n) = sys1.K;
  ic.K0.bottomRightCorner(n, n) = sys2.K;
  ic.M0 = Matrix::Zero(2 * n, 2 * n);
  ic.M0.topLeftCorner(n, n) = sys1.M;
  ic.M0.bottomRightCorner(n, n) = sys2.M;
  ic.F0 = Matrix::Zero(2 * n, 2 * n);
  ic.F0.topLeftCorner(n, n) = sys1.F;
  ic.F0.bottomRightCorner(n, n) = sys2.F;

  ic.assembled.K = ic.K0 + ic.Z.transpose() * c.kappa * ic.Z;
  ic.assembled.M = ic.M0 + ic.Z.transpose() * c.mu * ic.Z;
  ic.assembled.F = ic.F0 + ic.Z.transpose() * c.phi * ic.Z;
  ic.assembled.N = Matrix::Zero(2 * m, 2 * n);
  ic.assembled.N.topLeftCorner(m, n) = sys1.N;
  ic.assembled.N.bottomRightCorner(m, n) = sys2.N;
  return ic;
}

// Momentum map matrix M M0^{-1} = I + Z^T mu Z M0^{-1}: the joint momentum
// p = M q' in terms of the individual momenta [p1; p2] = M0 q'.
inline Matrix momentum_map_matrix(const Interconnection& ic) {
  return ic.assembled.M * ic.M0.llt().solve(
                              Matrix::Identity(ic.dof(), ic.dof()));
}

inline Vector momentum_map(const Interconnection& ic, const Vector& p1,
                           const Vector& p2) {
  const Index n = ic.dof() / 2;
  if (p1.size() != n || p2.size() != n)
    throw DimensionError("momentum_map: momenta must have length n");
  Vector stacked(2 * n);
  stacked << p1, p2;
  return momentum_map_matrix(ic) * stacked;
}

// Kinetic energy carried by the inerter, 0.5*||Z q'||_mu^2; the total
// 0.5*||q'||_M^2 splits into the two body terms plus this share.
inline double inerter_energy_share(const Interconnection& ic,
                                   const Vector& qdot) {
  if (qdot.size() != ic.dof())
    throw DimensionError("inerter_energy_share: velocity must have length 2n");
  const Vector v = ic.Z * qdot;
  return 0.5 * v.dot(ic.coupling.mu * v);
}

// Executable form of the interconnection theorem: the drift of the joint
// momentum is computed once through the proof chain (auxiliary processes
// pi_k, spring-damper force gamma, resolved link forcing d omega, momentum
// map) and once directly as -K q - F q'.  Returns the norm of the gap.
inline double verify_interconnection(const Interconnection& ic,
                                     const Vector& q, const Vector& qdot) {
  const Index d = ic.dof();
  if (q.size() != d || qdot.size() != d)
    throw DimensionError("verify_interconnection: state must have length 2n");
  const Index m = ic.link_order();
  const Matrix M0inv = ic.M0.llt().solve(Matrix::Identity(d, d));
  const Matrix& Z = ic.Z;

  // Proof chain.
  const Vector drift_pi = -ic.K0 * q - ic.F0 * qdot;
  const Vector gamma = ic.coupling.kappa * (Z * q) +
                       ic.coupling.phi * (Z * qdot);
  const Matrix lhs =
      Matrix::Identity(m, m) + ic.coupling.mu * Z * M0inv * Z.transpose();
  Eigen::FullPivLU<Matrix> lu(lhs);
  if (lu.rcond() < 1e-12)
    throw NumericalError(
        "verify_interconnection: I + mu Z M0^{-1} Z^T ill-conditioned");
  const Vector drift_omega =
      lu.solve(gamma + ic.coupling.mu * (Z * (M0inv * drift_pi)));
  const Vector drift_individual = drift_pi - Z.transpose() * drift_omega;
  // Joint momentum p = M M0^{-1} [p1; p2], so its drift maps the same way.
  const Vector drift_chain = ic.assembled.M * (M0inv * drift_individual);

  // Direct form from the theorem's (K, F).
  const Vector drift_direct = -ic.assembled.K * q - ic.assembled.F * qdot;

  return (drift_chain - drift_direct).norm();
}

}  // namespace lsh
