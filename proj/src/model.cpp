#include "ivinv/model.hpp"

#include <cmath>
#include <sstream>

namespace ivinv {

void IVDataset::validate() const {
  const auto nobs = n();
  if (y2.size() != nobs || Ztilde.rows() != nobs ||
      (X.cols() > 0 && X.rows() != nobs)) {
    throw DataError("IVDataset: y1, y2, X and Ztilde must have the same number of rows");
  }
  if (k() < 1) throw DataError("IVDataset: at least one instrument is required");
  if (nobs <= k() + p()) {
    throw DataError("IVDataset: need more observations than instruments plus controls");
  }
  MatrixXd zbar(nobs, k() + p());
  zbar << Ztilde, X;
  Eigen::ColPivHouseholderQR<MatrixXd> qr(zbar);
  qr.setThreshold(1e-10);
  if (qr.rank() < zbar.cols()) {
    throw DataError("IVDataset: [Ztilde : X] does not have full column rank");
  }
}

ReducedForm::ReducedForm(MatrixXd r, SymPD sigma)
    : r_(std::move(r)), sigma_(std::move(sigma)) {
  if (r_.cols() != 2) throw DataError("ReducedForm: R must have two columns");
  if (sigma_.dim() != 2 * r_.rows()) {
    throw DataError("ReducedForm: Sigma must be 2k x 2k");
  }
  if (!r_.allFinite()) throw DataError("ReducedForm: R has non-finite entries");
}

Hypothesis::Hypothesis(double beta0_, double alpha_) : beta0(beta0_), alpha(alpha_) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("Hypothesis: alpha must lie in (0,1)");
  }
}

Matrix2d Hypothesis::B0() const {
  Matrix2d b;
  b << 1.0, 0.0, -beta0, 1.0;
  return b;
}

GroupElement::GroupElement(MatrixXd g1, Matrix2d g2)
    : g1_(std::move(g1)), g2_(g2) {
  if (g1_.rows() != g1_.cols()) throw DataError("GroupElement: g1 must be square");
  if (g2_(0, 1) != 0.0) {
    throw DataError("GroupElement: g2 must be lower triangular");
  }
  if (g11() * g22() == 0.0) throw NumericalError("GroupElement: g2 is singular");
  Eigen::FullPivLU<MatrixXd> lu(g1_);
  if (!lu.isInvertible()) throw NumericalError("GroupElement: g1 is singular");
}

double GroupElement::chi1() const {
  const double d = g1_.determinant();
  return d * d;
}

double GroupElement::chi2() const {
  return std::pow(std::abs(g2_.determinant()), static_cast<double>(g1_.rows()));
}

GroupElement GroupElement::compose(const GroupElement& h, const GroupElement& g) {
  Matrix2d g2 = h.g2_ * g.g2_;
  g2(0, 1) = 0.0;
  return GroupElement(h.g1_ * g.g1_, g2);
}

std::pair<MatrixXd, MatrixXd> partial_out(const IVDataset& data) {
  data.validate();
  MatrixXd y(data.n(), 2);
  y << data.y1, data.y2;
  if (data.p() == 0) return {data.Ztilde, y};
  MatrixXd z = data.Ztilde - projection(data.X) * data.Ztilde;
  return {z, y};
}

ReducedForm reduce(const MatrixXd& z, const MatrixXd& y, const SymPD& sigma) {
  if (z.rows() != y.rows() || y.cols() != 2) {
    throw DataError("reduce: Z and Y must have matching rows and Y two columns");
  }
  if (sigma.dim() != 2 * z.cols()) throw DataError("reduce: Sigma must be 2k x 2k");
  const SymPD ztz(z.transpose() * z);
  return ReducedForm(ztz.inv_sqrt() * z.transpose() * y, sigma);
}

SymPD estimate_sigma_plugin(const MatrixXd& z, const MatrixXd& y, int bandwidth,
                            const MatrixXd& x) {
  const Eigen::Index n = z.rows();
  const Eigen::Index k = z.cols();
  if (bandwidth < 0 || bandwidth >= n) {
    throw std::invalid_argument("estimate_sigma_plugin: bandwidth must lie in [0, n)");
  }
  if (y.rows() != n || y.cols() != 2 || (x.cols() > 0 && x.rows() != n)) {
    throw DataError("estimate_sigma_plugin: dimension mismatch");
  }
  if (n - k - x.cols() <= 0) {
    throw DataError("estimate_sigma_plugin: no residual degrees of freedom");
  }
  MatrixXd w(n, k + x.cols());
  w << z, x;
  const MatrixXd vhat = y - w * w.colPivHouseholderQr().solve(y);
  if (vhat.norm() <= 1e-12 * std::max(y.norm(), 1.0)) {
    throw DataError("estimate_sigma_plugin: residuals are degenerate (all zero)");
  }
  const MatrixXd q = SymPD(z.transpose() * z).inv_sqrt();
  const MatrixXd qz = z * q;  // row i is (Q z_i)'
  MatrixXd g(n, 2 * k);
  g.leftCols(k) = qz.array().colwise() * vhat.col(0).array();
  g.rightCols(k) = qz.array().colwise() * vhat.col(1).array();

  MatrixXd s = g.transpose() * g;
  for (int lag = 1; lag <= bandwidth; ++lag) {
    const double weight = 1.0 - static_cast<double>(lag) / (bandwidth + 1.0);
    const MatrixXd gamma =
        g.bottomRows(n - lag).transpose() * g.topRows(n - lag);
    s += weight * (gamma + gamma.transpose());
  }
  s = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(s);
  const double floor = 1e-10 * s.trace() / static_cast<double>(2 * k);
  if (!(floor > 0.0)) {
    throw DataError("estimate_sigma_plugin: residual variance is zero");
  }
  const VectorXd ev = es.eigenvalues().cwiseMax(floor);
  MatrixXd floored = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  return SymPD(0.5 * (floored + floored.transpose()));
}

STDecomposition st_decompose(const ReducedForm& rf, const Hypothesis& hyp) {
  const int k = rf.k();
  const MatrixXd ik = MatrixXd::Identity(k, k);
  const MatrixXd b0k = kron(hyp.b0(), ik);  // (b0 (x) I_k), 2k x k
  const MatrixXd a0k = kron(hyp.a0(), ik);
  const MatrixXd& sigma = rf.Sigma().matrix();
  const MatrixXd sigma_inv = rf.Sigma().inverse();
  const VectorXd vr = vec(rf.R());

  const SymPD vs(b0k.transpose() * sigma * b0k);
  const SymPD vt(a0k.transpose() * sigma_inv * a0k);
  STDecomposition st;
  st.Cbeta0 = vs.inv_sqrt();
  st.S = st.Cbeta0 * (b0k.transpose() * vr);
  st.T = vt.inv_sqrt() * (a0k.transpose() * sigma_inv * vr);
  // D at beta = beta0 collapses to the symmetric square root.
  st.Dbeta0 = vt.sqrt();
  return st;
}

namespace {
MatrixXd rotate_sigma(const MatrixXd& sigma, const Matrix2d& b, int k) {
  const MatrixXd bk = kron(b, MatrixXd::Identity(k, k));
  MatrixXd out = bk.transpose() * sigma * bk;
  return 0.5 * (out + out.transpose());
}
}  // namespace

NullRotated null_rotate(const ReducedForm& rf, const Hypothesis& hyp) {
  const Matrix2d b0 = hyp.B0();
  return NullRotated{rf.R() * b0, SymPD(rotate_sigma(rf.Sigma().matrix(), b0, rf.k())),
                     hyp.beta0};
}

ReducedForm unrotate(const NullRotated& nr) {
  Matrix2d binv;
  binv << 1.0, 0.0, nr.beta0, 1.0;
  return ReducedForm(nr.R0 * binv, SymPD(rotate_sigma(nr.Sigma0.matrix(), binv, nr.k())));
}

NullRotated act(const GroupElement& g, const NullRotated& nr) {
  if (g.g1().rows() != nr.k()) throw DataError("act: g1 dimension must equal k");
  const MatrixXd big = kron(g.g2(), g.g1());
  MatrixXd s = big * nr.Sigma0.matrix() * big.transpose();
  s = 0.5 * (s + s.transpose());
  return NullRotated{g.g1() * nr.R0 * g.g2().transpose(), SymPD(s), nr.beta0};
}

std::pair<AlternativePoint, SymPD> act_params(const GroupElement& g,
                                              const AlternativePoint& pt,
                                              const SymPD& sigma0) {
  const double denom = pt.delta * g.g21() + g.g22();
  if (denom == 0.0) {
    throw NumericalError("act_params: Delta*g21 + g22 = 0 sends Delta to infinity");
  }
  AlternativePoint out;
  const double beta0 = pt.beta - pt.delta;
  out.delta = pt.delta * g.g11() / denom;
  out.beta = beta0 + out.delta;
  out.mu = g.g1() * pt.mu * denom;
  out.lambda = out.mu.squaredNorm();
  const MatrixXd big = kron(g.g2(), g.g1());
  MatrixXd s = big * sigma0.matrix() * big.transpose();
  return {out, SymPD(0.5 * (s + s.transpose()))};
}

}  // namespace ivinv
