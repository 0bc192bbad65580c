#include "ivinv/null_geometry.hpp"

#include <algorithm>
#include <cmath>

namespace ivinv {

namespace {

std::vector<double> row_major(const MatrixXd& m) {
  std::vector<double> out(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i * m.cols() + j] = m(i, j);
  return out;
}

thread_local std::vector<double> tl_scratch;

}  // namespace

ProfileObjective::ProfileObjective(const MatrixXd& precision)
    : k_(static_cast<int>(precision.rows() / 2)) {
  if (precision.rows() != precision.cols() || precision.rows() % 2 != 0) {
    throw DataError("ProfileObjective: precision must be 2k x 2k");
  }
  const MatrixXd p12 = precision.topRightCorner(k_, k_);
  p11_ = row_major(precision.topLeftCorner(k_, k_));
  p12s_ = row_major(p12 + p12.transpose());
  p22_ = row_major(precision.bottomRightCorner(k_, k_));
}

double ProfileObjective::value(double angle, const double* u_top,
                               const double* u_bot) const {
  double ld;
  return value(angle, u_top, u_bot, &ld);
}

double ProfileObjective::value(double angle, const double* u_top,
                               const double* u_bot, double* log_det) const {
  const int k = k_;
  if (tl_scratch.size() < static_cast<std::size_t>(k * k + k)) {
    tl_scratch.resize(k * k + k);
  }
  double* l = tl_scratch.data();
  double* w = l + k * k;
  const double s = std::sin(angle), c = std::cos(angle);
  const double ss = s * s, sc = s * c, cc = c * c;
  double ld = 0.0;
  double f = 0.0;
  for (int i = 0; i < k; ++i) {
    const int ik = i * k;
    for (int j = 0; j <= i; ++j) {
      double sum = ss * p11_[ik + j] + sc * p12s_[ik + j] + cc * p22_[ik + j];
      const int jk = j * k;
      for (int m = 0; m < j; ++m) sum -= l[ik + m] * l[jk + m];
      if (i == j) {
        if (!(sum > 0.0)) return std::numeric_limits<double>::quiet_NaN();
        l[ik + i] = std::sqrt(sum);
        ld += std::log(sum);
      } else {
        l[ik + j] = sum / l[jk + j];
      }
    }
    double vi = s * u_top[i] + c * u_bot[i];
    for (int m = 0; m < i; ++m) vi -= l[ik + m] * w[m];
    w[i] = vi / l[ik + i];
    f += w[i] * w[i];
  }
  *log_det = ld;
  return f;
}

NullGeometry::NullGeometry(const SymPD& sigma0, double beta0)
    : k_(static_cast<int>(sigma0.dim() / 2)),
      beta0_(beta0),
      sigma0_(sigma0),
      null_obj_(sigma0.inverse()),
      orig_obj_([&] {
        const int k = static_cast<int>(sigma0.dim() / 2);
        Matrix2d b0;
        b0 << 1.0, 0.0, -beta0, 1.0;
        const MatrixXd bk = kron(b0, MatrixXd::Identity(k, k));
        MatrixXd p = bk * sigma0.inverse() * bk.transpose();
        return MatrixXd(0.5 * (p + p.transpose()));
      }()) {
  if (sigma0.dim() % 2 != 0) throw DataError("NullGeometry: Sigma0 must be 2k x 2k");
  const int k = k_;
  const MatrixXd& s0 = sigma0.matrix();
  const MatrixXd p = sigma0.inverse();
  const SymPD s11(s0.topLeftCorner(k, k));
  const SymPD p22(p.bottomRightCorner(k, k));
  c_ = s11.inv_sqrt();
  sqrt_s11_ = s11.sqrt();
  d_ = p22.sqrt();
  d_inv_ = p22.inv_sqrt();
  p21_ = p.bottomLeftCorner(k, k);
  reg_ = s0.bottomLeftCorner(k, k) * s11.inverse();
  const MatrixXd g = p.topRightCorner(k, k) * d_inv_;

  us_null_ = MatrixXd::Zero(2 * k, k);
  us_null_.topRows(k) = c_;
  ut_null_.resize(2 * k, k);
  ut_null_.topRows(k) = g;
  ut_null_.bottomRows(k) = d_;

  us_orig_.resize(2 * k, k);
  us_orig_.topRows(k) = c_;
  us_orig_.bottomRows(k) = -beta0 * c_;
  ut_orig_.resize(2 * k, k);
  ut_orig_.topRows(k) = g;
  ut_orig_.bottomRows(k) = d_ - beta0 * g;

  lm_map_ = c_ * d_inv_;
  Matrix2d b0;
  b0 << 1.0, 0.0, -beta0, 1.0;
  const MatrixXd bk = kron(b0, MatrixXd::Identity(k, k));
  precision_orig_ = bk * p * bk.transpose();
  precision_orig_ = 0.5 * (precision_orig_ + precision_orig_.transpose());
}

NullGeometry NullGeometry::from_reduced_form(const ReducedForm& rf,
                                             const Hypothesis& hyp) {
  return NullGeometry(null_rotate(rf, hyp).Sigma0, hyp.beta0);
}

std::pair<VectorXd, VectorXd> NullGeometry::st_from_r0(const MatrixXd& r0) const {
  if (r0.rows() != k_ || r0.cols() != 2) throw DataError("st_from_r0: R0 must be k x 2");
  const VectorXd r1 = r0.col(0);
  const VectorXd r2 = r0.col(1);
  VectorXd s = c_ * r1;
  // P22^{-1/2}(P21 r1 + P22 r2) = P22^{1/2}(r2 - Sigma21 Sigma11^{-1} r1)
  VectorXd t = d_ * (r2 - reg_ * r1);
  return {s, t};
}

MatrixXd NullGeometry::r0_from_st(const VectorXd& s, const VectorXd& t) const {
  MatrixXd r0(k_, 2);
  r0.col(0) = sqrt_s11_ * s;
  r0.col(1) = d_inv_ * t + reg_ * r0.col(0);
  return r0;
}

VectorXd NullGeometry::u(const VectorXd& s, const VectorXd& t, bool original) const {
  return u_from_s(original) * s + u_from_t(original) * t;
}

double log_sum_exp(const double* terms, std::size_t n, double* shift) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, terms[i]);
  if (shift) *shift = m;
  if (!std::isfinite(m)) return m;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::exp(terms[i] - m);
  return m + std::log(sum);
}

IlKernel::IlKernel(const NullGeometry& geo, const QuadratureRule& rule)
    : k_(geo.k()),
      beta0_(geo.beta0()),
      angles_(rule.nodes),
      quad_w_(rule.weights) {
  const int k = k_;
  const std::size_t n = angles_.size();
  const MatrixXd& precision = geo.original_precision();
  const MatrixXd p11 = precision.topLeftCorner(k, k);
  const MatrixXd p12 = precision.topRightCorner(k, k);
  const MatrixXd p12s = p12 + p12.transpose();
  const MatrixXd p22 = precision.bottomRightCorner(k, k);
  const MatrixXd& us = geo.u_from_s(true);
  const MatrixXd& ut = geo.u_from_t(true);

  a_stack_.resize(static_cast<Eigen::Index>(n) * k, k);
  b_stack_.resize(static_cast<Eigen::Index>(n) * k, k);
  log_det_.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double s = std::sin(angles_[j]), c = std::cos(angles_[j]);
    const MatrixXd m = s * s * p11 + s * c * p12s + c * c * p22;
    Eigen::LLT<MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("IlKernel: profile variance is not positive definite");
    }
    const auto lower = llt.matrixL();
    const MatrixXd proj_s = s * us.topRows(k) + c * us.bottomRows(k);
    const MatrixXd proj_t = s * ut.topRows(k) + c * ut.bottomRows(k);
    const auto row = static_cast<Eigen::Index>(j) * k;
    a_stack_.middleRows(row, k) = lower.solve(proj_s);
    b_stack_.middleRows(row, k) = lower.solve(proj_t);
    log_det_[j] = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  }
}

std::vector<double> IlKernel::log_weights(IlWeighting weighting) const {
  const double power = static_cast<double>(k_ - 2);
  const double norm = std::sqrt(1.0 + beta0_ * beta0_);
  std::vector<double> out(angles_.size());
  for (std::size_t j = 0; j < angles_.size(); ++j) {
    const double a = angles_[j];
    double base = 1.0;
    switch (weighting) {
      case IlWeighting::kSinPower: base = std::abs(std::sin(a) - beta0_ * std::cos(a)); break;
      case IlWeighting::kCosPower: base = std::abs(std::cos(a)); break;
      case IlWeighting::kOriginalPower:
        base = std::abs((std::sin(a) - beta0_ * std::cos(a)) / norm);
        break;
    }
    const double lw = (k_ == 2) ? 0.0 : power * std::log(base);
    out[j] = std::log(quad_w_[j]) - 0.5 * log_det_[j] + lw;
  }
  return out;
}

double IlKernel::log_il(const VectorXd& s, const VectorXd& t,
                        const std::vector<double>& log_w, double* shift) const {
  const double tt = t.squaredNorm();
  const VectorXd w = a_stack_ * s + b_stack_ * t;
  std::vector<double> terms(angles_.size());
  for (std::size_t j = 0; j < angles_.size(); ++j) {
    const double f = w.segment(static_cast<Eigen::Index>(j) * k_, k_).squaredNorm();
    terms[j] = log_w[j] + 0.5 * (f - tt);
  }
  return log_sum_exp(terms.data(), terms.size(), shift);
}

void IlKernel::log_il_batch(const MatrixXd& s, const VectorXd& t,
                            const std::vector<const std::vector<double>*>& log_ws,
                            MatrixXd& out) const {
  const Eigen::Index m = s.cols();
  const std::size_t n = angles_.size();
  out.resize(static_cast<Eigen::Index>(log_ws.size()), m);
  const double tt = t.squaredNorm();
  const VectorXd bt = b_stack_ * t;
  constexpr Eigen::Index kChunk = 256;
  MatrixXd w;
  std::vector<double> f(n), terms(n);
  for (Eigen::Index start = 0; start < m; start += kChunk) {
    const Eigen::Index len = std::min(kChunk, m - start);
    w.noalias() = a_stack_ * s.middleCols(start, len);
    w.colwise() += bt;
    for (Eigen::Index col = 0; col < len; ++col) {
      const double* wc = w.col(col).data();
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        const double* wj = wc + j * k_;
        for (int i = 0; i < k_; ++i) acc += wj[i] * wj[i];
        f[j] = 0.5 * (acc - tt);
      }
      for (std::size_t set = 0; set < log_ws.size(); ++set) {
        const auto& lw = *log_ws[set];
        for (std::size_t j = 0; j < n; ++j) terms[j] = lw[j] + f[j];
        out(static_cast<Eigen::Index>(set), start + col) = log_sum_exp(terms.data(), n);
      }
    }
  }
}

}  // namespace ivinv
