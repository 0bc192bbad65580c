#include "ivinv/kronecker.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ivinv {

std::optional<KroneckerForm> detect_kronecker(const SymPD& sigma, int k, double beta0,
                                              double tol) {
  if (k < 1 || sigma.dim() != 2 * k) return std::nullopt;
  const MatrixXd& s = sigma.matrix();
  const Eigen::Index kk = static_cast<Eigen::Index>(k) * k;
  MatrixXd rearranged(4, kk);
  for (int j = 0; j < 2; ++j) {
    for (int i = 0; i < 2; ++i) {
      const MatrixXd block = s.block(i * k, j * k, k, k);
      rearranged.row(i + 2 * j) = Eigen::Map<const Eigen::RowVectorXd>(block.data(), kk);
    }
  }
  Eigen::JacobiSVD<MatrixXd> svd(rearranged, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double sv = svd.singularValues()(0);
  VectorXd omega_vec = sv * svd.matrixU().col(0);
  VectorXd phi_vec = svd.matrixV().col(0);
  MatrixXd phi = unvec(phi_vec, k, k);
  Matrix2d omega = unvec(omega_vec, 2, 2);
  const double tr = phi.trace();
  if (tr == 0.0) return std::nullopt;
  const double scale = k / tr;
  phi *= scale;
  omega /= scale;
  phi = 0.5 * (phi + phi.transpose());
  omega = 0.5 * (omega + omega.transpose());

  const double err = (s - kron(omega, phi)).norm() / s.norm();
  if (!(err < tol)) return std::nullopt;
  Eigen::SelfAdjointEigenSolver<Matrix2d> eo(omega);
  Eigen::SelfAdjointEigenSolver<MatrixXd> ep(phi);
  if (!(eo.eigenvalues()(0) > 0.0) || !(ep.eigenvalues()(0) > 0.0)) return std::nullopt;

  KroneckerForm out;
  out.Omega = omega;
  out.Phi = phi;
  Matrix2d b0;
  b0 << 1.0, 0.0, -beta0, 1.0;
  out.Omega0 = b0.transpose() * omega * b0;
  out.rel_error = err;
  return out;
}

CdCoefficients c_d_coefficients(const Matrix2d& omega, double beta, double beta0) {
  const Vector2d a0(beta0, 1.0), b0(1.0, -beta0), a(beta, 1.0);
  const double bob = b0.dot(omega * b0);
  if (!(bob > 0.0)) throw NumericalError("c_d_coefficients: Omega is not positive definite");
  const Matrix2d oinv = omega.inverse();
  CdCoefficients out;
  out.c_beta = (beta - beta0) / std::sqrt(bob);
  out.d_beta = a.dot(oinv * a0) / std::sqrt(a0.dot(oinv * a0));
  return out;
}

QStat q_stat(const VectorXd& s, const VectorXd& t) {
  return QStat{s.squaredNorm(), s.dot(t), t.squaredNorm()};
}

QStat q_stat(const STDecomposition& st) { return q_stat(st.S, st.T); }

double xi_beta(const QStat& q, const CdCoefficients& cd) {
  return cd.c_beta * cd.c_beta * q.qS + 2.0 * cd.c_beta * cd.d_beta * q.qST +
         cd.d_beta * cd.d_beta * q.qT;
}

double log_scaled_bessel_i(double nu, double z) {
  if (nu < 0.0 || z < 0.0) throw std::invalid_argument("bessel: need nu >= 0 and z >= 0");
  if (z > 30.0) return log_bessel_i(nu, z) - nu * std::log(z);
  const double q = 0.25 * z * z;
  double term = 1.0, sum = 1.0;
  for (int m = 0; m < 1000; ++m) {
    term *= q / ((m + 1.0) * (m + nu + 1.0));
    sum += term;
    if (term < 1e-17 * sum && m > q) break;
  }
  return -nu * std::numbers::ln2 - std::lgamma(nu + 1.0) + std::log(sum);
}

double log_bessel_i(double nu, double x) {
  if (nu < 0.0 || x < 0.0) throw std::invalid_argument("bessel: need nu >= 0 and x >= 0");
  if (x == 0.0) return nu == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  if (x <= 30.0) return nu * std::log(x) + log_scaled_bessel_i(nu, x);
  const double mu = 4.0 * nu * nu;
  double term = 1.0, sum = 1.0;
  for (int j = 1; j < 60; ++j) {
    const double next = -term * (mu - (2.0 * j - 1.0) * (2.0 * j - 1.0)) / (8.0 * j * x);
    if (std::abs(next) > std::abs(term)) break;
    term = next;
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return x - 0.5 * std::log(2.0 * std::numbers::pi * x) + std::log(sum);
}

double log_q_density(const QStat& q, double beta, double lambda, const Matrix2d& omega,
                     double beta0, int k) {
  if (k < 2) throw std::invalid_argument("q_density: k must be at least 2");
  if (lambda < 0.0) throw std::invalid_argument("q_density: lambda must be nonnegative");
  const double det = q.det();
  if (!(det > 0.0)) throw DataError("q_density: |q| must be positive");
  const CdCoefficients cd = c_d_coefficients(omega, beta, beta0);
  const double xi = std::max(0.0, xi_beta(q, cd));
  const double nu = 0.5 * (k - 2);
  const double log_k0_inv = 0.5 * (k + 2) * std::numbers::ln2 + 0.5 * std::log(std::numbers::pi) +
                            std::lgamma(0.5 * (k - 1));
  return -log_k0_inv - 0.5 * lambda * (cd.c_beta * cd.c_beta + cd.d_beta * cd.d_beta) +
         0.5 * (k - 3) * std::log(det) - 0.5 * (q.qS + q.qT) +
         log_scaled_bessel_i(nu, std::sqrt(lambda * xi));
}

double q_density(const QStat& q, double beta, double lambda, const Matrix2d& omega,
                 double beta0, int k) {
  return std::exp(log_q_density(q, beta, lambda, omega, beta0, k));
}

namespace {
Matrix2d shear(double x) {
  Matrix2d a;
  a << 1.0, x, 0.0, 1.0;
  return a;
}
}  // namespace

StructuralImage structural_action(const Matrix2d& g2, double delta, double lambda,
                                  const Matrix2d& psi) {
  if (g2(0, 1) != 0.0) throw std::invalid_argument("structural_action: g2 must be lower triangular");
  const double denom = delta * g2(1, 0) + g2(1, 1);
  if (denom == 0.0) throw NumericalError("structural_action: Delta*g21 + g22 = 0");
  StructuralImage out;
  out.delta = delta * g2(0, 0) / denom;
  out.lambda = denom * denom * lambda;
  const Matrix2d gamma = shear(out.delta).inverse() * g2 * shear(delta);
  out.Psi = gamma * psi * gamma.transpose();
  return out;
}

Matrix2d omega0_from_structural(const Matrix2d& psi, double delta) {
  const Matrix2d a = shear(delta);
  return a * psi * a.transpose();
}

}  // namespace ivinv
