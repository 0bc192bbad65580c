#pragma once

// Independent reference computations for the tests. Everything here is
// written straight from the defining formulas with dense linear algebra and
// adaptive quadrature, and shares no code with the library's fast paths.

#include "ivinv/model.hpp"

#include <random>

namespace oracle {

using ivinv::MatrixXd;
using ivinv::VectorXd;
using Rng = std::mt19937_64;

MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng);
/// Q diag(lambda) Q' with eigenvalues uniform on [lo, hi].
MatrixXd random_spd(int n, Rng& rng, double lo = 0.3, double hi = 3.0);
/// Random R (k x 2) and well-conditioned Sigma (2k x 2k).
ivinv::ReducedForm random_instance(int k, Rng& rng);
/// Random R with Sigma = Omega (x) Phi.
ivinv::ReducedForm random_kron_instance(int k, Rng& rng);
ivinv::GroupElement random_group_element(int k, Rng& rng);

/// Sigma^{-1/2} by eigendecomposition.
MatrixXd inv_sqrt(const MatrixXd& a);

struct LiteralST {
  VectorXd S;
  VectorXd T;
};
/// S and T from their defining formulas with b0 = (1, -beta0), a0 = (beta0, 1).
LiteralST literal_st(const MatrixXd& r, const MatrixXd& sigma, double beta0);

/// vec(R)' Sigma^{-1/2} N_{Sigma^{-1/2}(l (x) I)} Sigma^{-1/2} vec(R), l = (sin, cos).
double literal_projection(const MatrixXd& r, const MatrixXd& sigma, double theta);

/// LR by exhaustive theta grid with two rounds of local grid zoom.
double dense_grid_lr(const MatrixXd& r, const MatrixXd& sigma, double beta0, int n = 10000);

enum class EtaWeight { kSin, kCos };
/// log of the null-frame integral over eta of
/// exp(0.5 (proj(eta) - T'T)) det(M(eta))^{-1/2} |w(eta)|^{k-2}, by tanh-sinh.
double literal_log_il_eta(const MatrixXd& r0, const MatrixXd& sigma0, EtaWeight weight);
/// log of the same statistic written over Delta on the real line with
/// weight |Delta|^{k-2}, split at 0 and +-1 with the tails folded by 1/x.
double literal_log_il_delta(const MatrixXd& r0, const MatrixXd& sigma0);

}  // namespace oracle
