#pragma once

// Deterministic numerical kernel shared by every other module: symmetric
// matrix roots, projections, Gauss-Legendre rules, reproducible random
// streams and order-statistic quantiles.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ivinv {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Input data violates a documented precondition (rank, shape, content).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computation could not produce a meaningful number.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Symmetric positive-definite matrix. The eigendecomposition is computed
/// once at construction and reused for every root.
class SymPD {
 public:
  /// Throws NumericalError if `a` is not symmetric to 1e-12 (relative) or
  /// has a non-positive eigenvalue.
  explicit SymPD(const MatrixXd& a);

  const MatrixXd& matrix() const { return m_; }
  Eigen::Index dim() const { return m_.rows(); }
  const VectorXd& eigenvalues() const { return evals_; }
  double min_eigenvalue() const { return evals_(0); }

  MatrixXd sqrt() const;
  MatrixXd inv_sqrt() const;
  /// Inverse via Cholesky. Better conditioned than the eigen route for the
  /// graded matrices that show up in near-singular designs.
  MatrixXd inverse() const;
  double log_det() const;

 private:
  MatrixXd m_;
  VectorXd evals_;
  MatrixXd evecs_;
};

/// Unique symmetric positive-definite B with B*A*B = I.
SymPD sym_inv_sqrt(const SymPD& a);
SymPD sym_sqrt(const SymPD& a);

/// N_A = A (A'A)^{-1} A'. Throws DataError when A is column-rank deficient.
MatrixXd projection(const MatrixXd& a);
/// M_A = I - N_A.
MatrixXd annihilator(const MatrixXd& a);

/// Column-major vec.
VectorXd vec(const MatrixXd& m);
MatrixXd unvec(const VectorXd& v, Eigen::Index rows, Eigen::Index cols);
MatrixXd kron(const MatrixXd& a, const MatrixXd& b);

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

/// n-point Gauss-Legendre rule on the open interval (-pi/2, pi/2).
QuadratureRule gauss_legendre(int n);

inline constexpr int kDefaultQuadratureNodes = 201;

/// The ceil(p*M)-th order statistic of xs (1-based).
double empirical_quantile(std::span<const double> xs, double p);
/// Same, but sorts `xs` in place (hot path of the conditional tests).
double empirical_quantile_inplace(std::vector<double>& xs, double p);

double chi2_quantile(double df, double p);
double chi2_cdf(double df, double x);
double normal_quantile(double p);

/// Kolmogorov-Smirnov one-sample test. Returns (D, asymptotic p-value).
std::pair<double, double> ks_test(std::vector<double> xs,
                                  const std::function<double(double)>& cdf);

/// Identifies an independent random stream. Equal (seed, stream_id) pairs
/// produce equal draw sequences regardless of which thread consumes them.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  /// Child stream keyed by `key`; derivation is a pure hash.
  RngStream child(std::uint64_t key) const;
};

std::uint64_t splitmix64(std::uint64_t& state);

/// xoshiro256** seeded from an RngStream. Satisfies
/// UniformRandomBitGenerator so it plugs into <random> distributions.
class StreamEngine {
 public:
  using result_type = std::uint64_t;

  explicit StreamEngine(const RngStream& stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()();

  /// Uniform on [a, b).
  double uniform(double a, double b);
  double normal();
  void fill_normal(Eigen::Ref<VectorXd> out);

 private:
  std::uint64_t s_[4];
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Runs fn(i) for i in [0, n) on `threads` workers. Work is claimed from a
/// shared counter, so callers must write results by index.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace ivinv
