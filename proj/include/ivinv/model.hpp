#pragma once

// Sufficient data for the linear IV model: the k x 2 moment matrix R and the
// 2k x 2k variance of vec(R). Every vec() here stacks columns.

#include "ivinv/numerics.hpp"

#include <Eigen/Dense>

namespace ivinv {

using Eigen::Matrix2d;
using Eigen::Vector2d;

/// Raw observations: y1 = y2*beta + X*gamma + u, y2 = Ztilde*pi + X*xi + v2.
struct IVDataset {
  VectorXd y1;
  VectorXd y2;
  MatrixXd X;       // n x p, p may be 0
  MatrixXd Ztilde;  // n x k

  Eigen::Index n() const { return y1.size(); }
  Eigen::Index k() const { return Ztilde.cols(); }
  Eigen::Index p() const { return X.cols(); }
  /// Shape checks and full column rank of [Ztilde : X]; throws DataError.
  void validate() const;
};

class ReducedForm {
 public:
  ReducedForm(MatrixXd r, SymPD sigma);

  const MatrixXd& R() const { return r_; }
  const SymPD& Sigma() const { return sigma_; }
  int k() const { return static_cast<int>(r_.rows()); }

 private:
  MatrixXd r_;
  SymPD sigma_;
};

struct Hypothesis {
  double beta0 = 0.0;
  double alpha = 0.05;

  Hypothesis() = default;
  Hypothesis(double beta0_, double alpha_);

  Vector2d a0() const { return {beta0, 1.0}; }
  Vector2d b0() const { return {1.0, -beta0}; }
  /// B0 = [[1, 0], [-beta0, 1]]; R0 = R * B0.
  Matrix2d B0() const;
};

struct STDecomposition {
  VectorXd S;
  VectorXd T;
  MatrixXd Cbeta0;
  MatrixXd Dbeta0;
};

/// Data re-expressed so the first column of R0 has mean zero under the null.
struct NullRotated {
  MatrixXd R0;
  SymPD Sigma0;
  double beta0 = 0.0;

  int k() const { return static_cast<int>(R0.rows()); }
};

struct AlternativePoint {
  double beta = 0.0;
  double delta = 0.0;
  VectorXd mu;
  double lambda = 0.0;
};

/// (g1, g2) in GL(k) x lower-triangular GL(2). Acts on (R0, Sigma0) by
/// (g1 R0 g2', (g2 (x) g1) Sigma0 (g2' (x) g1')).
class GroupElement {
 public:
  GroupElement(MatrixXd g1, Matrix2d g2);

  const MatrixXd& g1() const { return g1_; }
  const Matrix2d& g2() const { return g2_; }
  double g11() const { return g2_(0, 0); }
  double g21() const { return g2_(1, 0); }
  double g22() const { return g2_(1, 1); }

  /// chi1(g1) = |det g1|^2.
  double chi1() const;
  /// chi2(g2) = |det g2|^k.
  double chi2() const;
  /// Left-action composition: act(compose(h, g), x) == act(h, act(g, x)).
  static GroupElement compose(const GroupElement& h, const GroupElement& g);

 private:
  MatrixXd g1_;
  Matrix2d g2_;
};

/// (Z, Y) with Z = M_X Ztilde and Y = [y1 : y2].
std::pair<MatrixXd, MatrixXd> partial_out(const IVDataset& data);

/// R = (Z'Z)^{-1/2} Z'Y paired with Sigma.
ReducedForm reduce(const MatrixXd& z, const MatrixXd& y, const SymPD& sigma);

/// Bartlett-kernel long-run variance of vec((Z'Z)^{-1/2} Z'V) built from
/// OLS residuals of Y on [Z : X]. Bandwidth 0 is the heteroskedasticity-only
/// estimator. The result is symmetrized and eigenvalue-floored at
/// 1e-10 * trace / 2k.
SymPD estimate_sigma_plugin(const MatrixXd& z, const MatrixXd& y, int bandwidth,
                            const MatrixXd& x = MatrixXd());

STDecomposition st_decompose(const ReducedForm& rf, const Hypothesis& hyp);

NullRotated null_rotate(const ReducedForm& rf, const Hypothesis& hyp);
/// Inverse of null_rotate: R = R0 B0^{-1}.
ReducedForm unrotate(const NullRotated& nr);

NullRotated act(const GroupElement& g, const NullRotated& nr);

/// Transformed (Delta, mu, Sigma0) under g. beta is rebuilt from the new
/// Delta with the same beta0 offset.
std::pair<AlternativePoint, SymPD> act_params(const GroupElement& g,
                                              const AlternativePoint& pt,
                                              const SymPD& sigma0);

}  // namespace ivinv
