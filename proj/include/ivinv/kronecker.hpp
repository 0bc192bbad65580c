#pragma once

// Sigma = Omega (x) Phi: nearest-Kronecker detection, the mean coefficients
// of S and T, the maximal invariant Q = [S : T]'[S : T] and its density.

#include "ivinv/model.hpp"
#include "ivinv/numerics.hpp"

#include <optional>

namespace ivinv {

struct KroneckerForm {
  Matrix2d Omega;
  MatrixXd Phi;  // trace(Phi) = k
  Matrix2d Omega0;
  double rel_error = 0.0;
};

/// Rank-one approximation of the 4 x k^2 rearrangement of Sigma. Returns the
/// factorization when ||Sigma - Omega (x) Phi||_F / ||Sigma||_F < tol and
/// both factors are positive definite.
std::optional<KroneckerForm> detect_kronecker(const SymPD& sigma, int k, double beta0 = 0.0,
                                              double tol = 1e-8);

struct CdCoefficients {
  double c_beta = 0.0;
  double d_beta = 0.0;
};

/// E[S] = c_beta Phi^{-1/2} mu and E[T] = d_beta Phi^{-1/2} mu with
/// c_beta = (beta - beta0)(b0' Omega b0)^{-1/2},
/// d_beta = a' Omega^{-1} a0 (a0' Omega^{-1} a0)^{-1/2}.
CdCoefficients c_d_coefficients(const Matrix2d& omega, double beta, double beta0);

struct QStat {
  double qS = 0.0;
  double qST = 0.0;
  double qT = 0.0;

  double det() const { return qS * qT - qST * qST; }
};

QStat q_stat(const STDecomposition& st);
QStat q_stat(const VectorXd& s, const VectorXd& t);

/// xi_beta(q) = c^2 qS + 2 c d qST + d^2 qT.
double xi_beta(const QStat& q, const CdCoefficients& cd);

/// log I_nu(x) for x >= 0: power series up to x = 30, asymptotic expansion above.
double log_bessel_i(double nu, double x);
/// log of z^{-nu} I_nu(z), finite at z = 0.
double log_scaled_bessel_i(double nu, double z);

/// Density of Q (with respect to d qS d qST d qT) at (beta, lambda). Throws
/// DataError when det(q) <= 0 and std::invalid_argument when k < 2.
double log_q_density(const QStat& q, double beta, double lambda, const Matrix2d& omega,
                     double beta0, int k);
double q_density(const QStat& q, double beta, double lambda, const Matrix2d& omega,
                 double beta0, int k);

struct StructuralImage {
  double delta = 0.0;
  double lambda = 0.0;
  Matrix2d Psi;
};

/// Image of (Delta, lambda, Psi) under a lower-triangular g2:
/// Delta g11/(Delta g21 + g22), (Delta g21 + g22)^2 lambda, Gamma Psi Gamma'
/// with Gamma = A(Delta')^{-1} g2 A(Delta), A(x) = [[1, x], [0, 1]].
StructuralImage structural_action(const Matrix2d& g2, double delta, double lambda,
                                  const Matrix2d& psi);

/// Reduced-form variance of the null-rotated errors, A(Delta) Psi A(Delta)'.
Matrix2d omega0_from_structural(const Matrix2d& psi, double delta);

}  // namespace ivinv
