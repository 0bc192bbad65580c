#include "ivinv/model.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace ivinv;

namespace {

double rel_diff(const MatrixXd& a, const MatrixXd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace

TEST(StDecompose, MatchesDefiningFormulas) {
  oracle::Rng rng(21);
  for (int rep = 0; rep < 200; ++rep) {
    const int k = 1 + rep % 8;
    const ReducedForm rf = oracle::random_instance(k, rng);
    const double beta0 = std::normal_distribution<double>(0.0, 2.0)(rng);
    const STDecomposition st = st_decompose(rf, Hypothesis(beta0, 0.05));
    const auto lit = oracle::literal_st(rf.R(), rf.Sigma().matrix(), beta0);
    ASSERT_LT(rel_diff(st.S, lit.S), 1e-10);
    ASSERT_LT(rel_diff(st.T, lit.T), 1e-10);
  }
}

TEST(StDecompose, HomoskedasticIdentityExample) {
  // Sigma = I, beta0 = 0: S = first column, T = second column.
  MatrixXd r(3, 2);
  r << 1, 4, 2, 5, 3, 6;
  const ReducedForm rf(r, SymPD(MatrixXd::Identity(6, 6)));
  const STDecomposition st = st_decompose(rf, Hypothesis(0.0, 0.05));
  EXPECT_LT((st.S - r.col(0)).norm(), 1e-14);
  EXPECT_LT((st.T - r.col(1)).norm(), 1e-14);
}

TEST(NullRotate, RoundTrip) {
  oracle::Rng rng(2);
  for (int rep = 0; rep < 50; ++rep) {
    const ReducedForm rf = oracle::random_instance(4, rng);
    const Hypothesis hyp(0.3 * rep - 7.0, 0.05);
    const NullRotated nr = null_rotate(rf, hyp);
    EXPECT_LT(rel_diff(nr.R0, rf.R() * hyp.B0()), 1e-14);
    const ReducedForm back = unrotate(nr);
    EXPECT_LT(rel_diff(back.R(), rf.R()), 1e-12);
    EXPECT_LT(rel_diff(back.Sigma().matrix(), rf.Sigma().matrix()), 1e-12);
  }
}

TEST(NullRotate, FirstColumnIsReducedFormResidual) {
  // R0's first column is R b0 = R(1,0)' - beta0 R(0,1)'.
  MatrixXd r(2, 2);
  r << 1, 2, 3, 4;
  const NullRotated nr = null_rotate(ReducedForm(r, SymPD(MatrixXd::Identity(4, 4))),
                                     Hypothesis(0.5, 0.05));
  EXPECT_DOUBLE_EQ(nr.R0(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(nr.R0(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(nr.R0(1, 1), 4.0);
}

TEST(GroupAction, CompositionIsLeftAction) {
  oracle::Rng rng(8);
  for (int rep = 0; rep < 50; ++rep) {
    const int k = 2 + rep % 4;
    const ReducedForm rf = oracle::random_instance(k, rng);
    const NullRotated nr = null_rotate(rf, Hypothesis(0.4, 0.05));
    const GroupElement g = oracle::random_group_element(k, rng);
    const GroupElement h = oracle::random_group_element(k, rng);
    const NullRotated two = act(h, act(g, nr));
    const NullRotated one = act(GroupElement::compose(h, g), nr);
    ASSERT_LT(rel_diff(one.R0, two.R0), 1e-10);
    ASSERT_LT(rel_diff(one.Sigma0.matrix(), two.Sigma0.matrix()), 1e-10);
  }
}

TEST(GroupAction, CharactersAreMultiplicative) {
  oracle::Rng rng(9);
  const GroupElement g = oracle::random_group_element(3, rng);
  const GroupElement h = oracle::random_group_element(3, rng);
  const GroupElement hg = GroupElement::compose(h, g);
  EXPECT_NEAR(hg.chi1(), h.chi1() * g.chi1(), 1e-9 * hg.chi1());
  EXPECT_NEAR(hg.chi2(), h.chi2() * g.chi2(), 1e-9 * hg.chi2());
}

TEST(GroupAction, ParameterImageMatchesTransformedMean) {
  oracle::Rng rng(10);
  for (int rep = 0; rep < 30; ++rep) {
    const int k = 3;
    const GroupElement g = oracle::random_group_element(k, rng);
    AlternativePoint pt;
    pt.delta = 0.7 - 0.05 * rep;
    pt.beta = 1.0 + pt.delta;
    pt.mu = oracle::gaussian_matrix(k, 1, rng);
    const SymPD sigma0(oracle::random_spd(2 * k, rng));
    const auto [img, sig] = act_params(g, pt, sigma0);
    // E[g1 R0 g2'] = g1 mu (Delta, 1) g2' must equal mu' (Delta', 1).
    Eigen::Vector2d a(pt.delta, 1.0), a_new(img.delta, 1.0);
    const MatrixXd mean_new = g.g1() * pt.mu * (g.g2() * a).transpose();
    ASSERT_LT(rel_diff(img.mu * a_new.transpose(), mean_new), 1e-10);
    ASSERT_NEAR(img.beta - img.delta, pt.beta - pt.delta, 1e-12);
    ASSERT_NEAR(img.lambda, img.mu.squaredNorm(), 1e-12);
  }
}

TEST(GroupAction, RejectsBadElements) {
  Eigen::Matrix2d upper;
  upper << 1, 1, 0, 1;
  EXPECT_THROW(GroupElement(MatrixXd::Identity(2, 2), upper), DataError);
  EXPECT_THROW(GroupElement(MatrixXd::Zero(2, 2), Eigen::Matrix2d::Identity()), NumericalError);
}

TEST(Reduce, MatchesLiteralFormula) {
  oracle::Rng rng(4);
  const MatrixXd z = oracle::gaussian_matrix(60, 3, rng);
  const MatrixXd y = oracle::gaussian_matrix(60, 2, rng);
  const ReducedForm rf = reduce(z, y, SymPD(MatrixXd::Identity(6, 6)));
  const MatrixXd expect = oracle::inv_sqrt(z.transpose() * z) * z.transpose() * y;
  EXPECT_LT(rel_diff(rf.R(), expect), 1e-12);
}

TEST(PartialOut, RemovesControls) {
  oracle::Rng rng(6);
  IVDataset d;
  const int n = 80;
  d.X = oracle::gaussian_matrix(n, 2, rng);
  d.Ztilde = oracle::gaussian_matrix(n, 3, rng);
  d.y1 = oracle::gaussian_matrix(n, 1, rng);
  d.y2 = oracle::gaussian_matrix(n, 1, rng);
  const auto [z, y] = partial_out(d);
  EXPECT_LT((d.X.transpose() * z).norm(), 1e-10);
  EXPECT_LT((y.col(0) - d.y1).norm(), 1e-15);
}

TEST(PartialOut, RankDeficientInstrumentsRejected) {
  oracle::Rng rng(6);
  IVDataset d;
  const int n = 30;
  d.Ztilde = oracle::gaussian_matrix(n, 2, rng);
  d.X = d.Ztilde.col(0) * 2.0;
  d.y1 = VectorXd::Ones(n);
  d.y2 = VectorXd::Ones(n);
  EXPECT_THROW(partial_out(d), DataError);
}

TEST(SigmaPlugin, BandwidthZeroMatchesOuterProductSum) {
  oracle::Rng rng(12);
  const int n = 200, k = 2;
  const MatrixXd z = oracle::gaussian_matrix(n, k, rng);
  MatrixXd y = z * oracle::gaussian_matrix(k, 2, rng) + oracle::gaussian_matrix(n, 2, rng);
  const SymPD s = estimate_sigma_plugin(z, y, 0);
  const MatrixXd v = y - z * (z.transpose() * z).ldlt().solve(z.transpose() * y);
  const MatrixXd q = oracle::inv_sqrt(z.transpose() * z);
  MatrixXd expect = MatrixXd::Zero(2 * k, 2 * k);
  for (int i = 0; i < n; ++i) {
    const VectorXd zi = q * z.row(i).transpose();
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        expect.block(a * k, b * k, k, k) += v(i, a) * v(i, b) * zi * zi.transpose();
  }
  EXPECT_LT(rel_diff(s.matrix(), expect), 1e-10);
  EXPECT_THROW(estimate_sigma_plugin(z, y, -1), std::invalid_argument);
  EXPECT_THROW(estimate_sigma_plugin(z, z * MatrixXd::Identity(k, 2), 0), DataError);
}
