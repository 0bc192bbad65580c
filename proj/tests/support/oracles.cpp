#include "oracles.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <functional>
#include <limits>

namespace oracle {

MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> n01;
  MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n01(rng);
  return m;
}

MatrixXd random_spd(int n, Rng& rng, double lo, double hi) {
  Eigen::HouseholderQR<MatrixXd> qr(gaussian_matrix(n, n, rng));
  const MatrixXd q = qr.householderQ();
  std::uniform_real_distribution<double> u(lo, hi);
  VectorXd d(n);
  for (int i = 0; i < n; ++i) d(i) = u(rng);
  MatrixXd s = q * d.asDiagonal() * q.transpose();
  return 0.5 * (s + s.transpose());
}

ivinv::ReducedForm random_instance(int k, Rng& rng) {
  return ivinv::ReducedForm(gaussian_matrix(k, 2, rng) * 1.5, ivinv::SymPD(random_spd(2 * k, rng)));
}

ivinv::ReducedForm random_kron_instance(int k, Rng& rng) {
  const MatrixXd omega = random_spd(2, rng);
  const MatrixXd phi = random_spd(k, rng);
  MatrixXd sigma(2 * k, 2 * k);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) sigma.block(i * k, j * k, k, k) = omega(i, j) * phi;
  return ivinv::ReducedForm(gaussian_matrix(k, 2, rng) * 1.5, ivinv::SymPD(sigma));
}

ivinv::GroupElement random_group_element(int k, Rng& rng) {
  MatrixXd g1 = gaussian_matrix(k, k, rng) + 2.0 * MatrixXd::Identity(k, k);
  std::normal_distribution<double> n01;
  Eigen::Matrix2d g2;
  auto away = [&](double x) { return x >= 0 ? x + 0.5 : x - 0.5; };
  g2 << away(n01(rng)), 0.0, n01(rng), away(n01(rng));
  return ivinv::GroupElement(g1, g2);
}

MatrixXd inv_sqrt(const MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (a + a.transpose()));
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

namespace {

VectorXd vec_of(const MatrixXd& r) { return Eigen::Map<const VectorXd>(r.data(), r.size()); }

MatrixXd kron_vec_i(const Eigen::Vector2d& a, int k) {
  MatrixXd out(2 * k, k);
  out.topRows(k) = a(0) * MatrixXd::Identity(k, k);
  out.bottomRows(k) = a(1) * MatrixXd::Identity(k, k);
  return out;
}

double projection_norm(const MatrixXd& a, const VectorXd& x) {
  // x' A (A'A)^{-1} A' x
  const VectorXd ax = a.transpose() * x;
  return ax.dot((a.transpose() * a).ldlt().solve(ax));
}

double log_det(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()));
  return es.eigenvalues().array().log().sum();
}

double integrate_log(const std::function<double(double)>& log_f, double a, double b) {
  double shift = -std::numeric_limits<double>::infinity();
  for (int i = 1; i < 4000; ++i) shift = std::max(shift, log_f(a + (b - a) * i / 4000.0));
  boost::math::quadrature::tanh_sinh<double> ts(15);
  auto f = [&](double x) {
    const double v = log_f(x);
    return std::isfinite(v) ? std::exp(v - shift) : 0.0;
  };
  return std::log(ts.integrate(f, a, b, 1e-14)) + shift;
}

double log_add(double a, double b) {
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

LiteralST literal_st(const MatrixXd& r, const MatrixXd& sigma, double beta0) {
  const int k = static_cast<int>(r.rows());
  const VectorXd v = vec_of(r);
  const MatrixXd bk = kron_vec_i(Eigen::Vector2d(1.0, -beta0), k);
  const MatrixXd ak = kron_vec_i(Eigen::Vector2d(beta0, 1.0), k);
  const MatrixXd sinv = sigma.inverse();
  LiteralST out;
  out.S = inv_sqrt(bk.transpose() * sigma * bk) * (bk.transpose() * v);
  out.T = inv_sqrt(ak.transpose() * sinv * ak) * (ak.transpose() * sinv * v);
  return out;
}

double literal_projection(const MatrixXd& r, const MatrixXd& sigma, double theta) {
  const int k = static_cast<int>(r.rows());
  const MatrixXd h = inv_sqrt(sigma);
  const MatrixXd a = h * kron_vec_i(Eigen::Vector2d(std::sin(theta), std::cos(theta)), k);
  return projection_norm(a, h * vec_of(r));
}

double dense_grid_lr(const MatrixXd& r, const MatrixXd& sigma, double beta0, int n) {
  const int k = static_cast<int>(r.rows());
  const MatrixXd h = inv_sqrt(sigma);
  const VectorXd x = h * vec_of(r);
  auto f = [&](double th) {
    const MatrixXd a = h * kron_vec_i(Eigen::Vector2d(std::sin(th), std::cos(th)), k);
    return projection_norm(a, x);
  };
  const double tt = literal_st(r, sigma, beta0).T.squaredNorm();
  const double half_pi = 0.5 * M_PI;
  double lo = -half_pi, hi = half_pi;
  double best = -std::numeric_limits<double>::infinity(), arg = 0.0;
  int points = n;
  for (int round = 0; round < 3; ++round) {
    const double h_step = (hi - lo) / points;
    for (int i = 0; i <= points; ++i) {
      const double th = lo + i * h_step;
      const double v = f(th);
      if (v > best) {
        best = v;
        arg = th;
      }
    }
    lo = arg - 2.0 * h_step;
    hi = arg + 2.0 * h_step;
    points = 400;
  }
  return best - tt;
}

double literal_log_il_eta(const MatrixXd& r0, const MatrixXd& sigma0, EtaWeight weight) {
  const int k = static_cast<int>(r0.rows());
  const MatrixXd h = inv_sqrt(sigma0);
  const MatrixXd p = sigma0.inverse();
  const VectorXd x = h * vec_of(r0);
  const double tt = literal_st(r0, sigma0, 0.0).T.squaredNorm();
  auto log_f = [&](double eta) {
    const Eigen::Vector2d l(std::sin(eta), std::cos(eta));
    const MatrixXd lk = kron_vec_i(l, k);
    const double q = projection_norm(h * lk, x);
    const double w = weight == EtaWeight::kSin ? std::abs(l(0)) : std::abs(l(1));
    const double lw = k == 2 ? 0.0 : (k - 2) * std::log(w);
    return 0.5 * (q - tt) - 0.5 * log_det(lk.transpose() * p * lk) + lw;
  };
  const double half_pi = 0.5 * M_PI;
  return log_add(integrate_log(log_f, -half_pi, 0.0), integrate_log(log_f, 0.0, half_pi));
}

double literal_log_il_delta(const MatrixXd& r0, const MatrixXd& sigma0) {
  const int k = static_cast<int>(r0.rows());
  const MatrixXd h = inv_sqrt(sigma0);
  const MatrixXd p = sigma0.inverse();
  const VectorXd x = h * vec_of(r0);
  const double tt = literal_st(r0, sigma0, 0.0).T.squaredNorm();
  auto log_f = [&](double delta) {
    const MatrixXd ak = kron_vec_i(Eigen::Vector2d(delta, 1.0), k);
    const double q = projection_norm(h * ak, x);
    const double lw = k == 2 ? 0.0 : (k - 2) * std::log(std::abs(delta));
    return 0.5 * (q - tt) - 0.5 * log_det(ak.transpose() * p * ak) + lw;
  };
  // Delta = 1/x on the tails: dDelta = dx / x^2.
  auto log_tail = [&](double xv) { return log_f(1.0 / xv) - 2.0 * std::log(std::abs(xv)); };
  double out = integrate_log(log_f, -1.0, 0.0);
  out = log_add(out, integrate_log(log_f, 0.0, 1.0));
  out = log_add(out, integrate_log(log_tail, -1.0, 0.0));
  out = log_add(out, integrate_log(log_tail, 0.0, 1.0));
  return out;
}

}  // namespace oracle
