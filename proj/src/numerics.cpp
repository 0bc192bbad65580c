#include "ivinv/numerics.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <atomic>
#include <mutex>
#include <cmath>
#include <numbers>
#include <sstream>
#include <thread>

namespace ivinv {

SymPD::SymPD(const MatrixXd& a) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw NumericalError("SymPD: matrix must be square and non-empty");
  }
  const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw NumericalError("SymPD: matrix is not symmetric");
  }
  m_ = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m_);
  if (es.info() != Eigen::Success) {
    throw NumericalError("SymPD: eigendecomposition failed");
  }
  evals_ = es.eigenvalues();
  evecs_ = es.eigenvectors();
  if (!(evals_(0) > 0.0)) {
    std::ostringstream os;
    os << "SymPD: matrix is not positive definite (smallest eigenvalue "
       << evals_(0) << ")";
    throw NumericalError(os.str());
  }
}

MatrixXd SymPD::sqrt() const {
  return evecs_ * evals_.cwiseSqrt().asDiagonal() * evecs_.transpose();
}

MatrixXd SymPD::inv_sqrt() const {
  return evecs_ * evals_.cwiseSqrt().cwiseInverse().asDiagonal() *
         evecs_.transpose();
}

MatrixXd SymPD::inverse() const {
  Eigen::LLT<MatrixXd> llt(m_);
  if (llt.info() != Eigen::Success) {
    return evecs_ * evals_.cwiseInverse().asDiagonal() * evecs_.transpose();
  }
  MatrixXd inv = llt.solve(MatrixXd::Identity(dim(), dim()));
  return 0.5 * (inv + inv.transpose());
}

double SymPD::log_det() const { return evals_.array().log().sum(); }

SymPD sym_inv_sqrt(const SymPD& a) {
  MatrixXd b = a.inv_sqrt();
  return SymPD(0.5 * (b + b.transpose()));
}

SymPD sym_sqrt(const SymPD& a) {
  MatrixXd b = a.sqrt();
  return SymPD(0.5 * (b + b.transpose()));
}

MatrixXd projection(const MatrixXd& a) {
  Eigen::ColPivHouseholderQR<MatrixXd> qr(a);
  qr.setThreshold(1e-12);
  if (a.cols() == 0 || qr.rank() < a.cols()) {
    throw DataError("projection: matrix does not have full column rank");
  }
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(a.rows(), a.cols());
  return q * q.transpose();
}

MatrixXd annihilator(const MatrixXd& a) {
  return MatrixXd::Identity(a.rows(), a.rows()) - projection(a);
}

VectorXd vec(const MatrixXd& m) {
  return Eigen::Map<const VectorXd>(m.data(), m.size());
}

MatrixXd unvec(const VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols) throw DataError("unvec: size mismatch");
  return Eigen::Map<const MatrixXd>(v.data(), rows, cols);
}

MatrixXd kron(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

QuadratureRule gauss_legendre(int n) {
  if (n < 2) throw std::invalid_argument("gauss_legendre: need n >= 2");
  const double pi = std::numbers::pi;
  std::vector<double> x(n), w(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double z = std::cos(pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double dz = p1 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // Recompute the derivative at the converged root for the weight.
    double p1 = 1.0, p2 = 0.0;
    for (int j = 0; j < n; ++j) {
      const double p3 = p2;
      p2 = p1;
      p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
    }
    pp = n * (z * p1 - p2) / (z * z - 1.0);
    const double wi = 2.0 / ((1.0 - z * z) * pp * pp);
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = wi;
    w[n - 1 - i] = wi;
  }
  if (n % 2 == 1) x[n / 2] = 0.0;
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double half_len = pi / 2.0;
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = half_len * x[i];
    rule.weights[i] = half_len * w[i];
  }
  return rule;
}

double empirical_quantile(std::span<const double> xs, double p) {
  std::vector<double> copy(xs.begin(), xs.end());
  return empirical_quantile_inplace(copy, p);
}

double empirical_quantile_inplace(std::vector<double>& xs, double p) {
  if (xs.empty()) throw std::invalid_argument("empirical_quantile: empty input");
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("empirical_quantile: p must lie in (0,1)");
  }
  const auto m = xs.size();
  // ceil(p*M), guarded against p*M landing a hair above an integer.
  auto rank = static_cast<std::size_t>(std::ceil(p * m - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, m);
  auto nth = xs.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(xs.begin(), nth, xs.end());
  return *nth;
}

double chi2_quantile(double df, double p) {
  return boost::math::quantile(boost::math::chi_squared(df), p);
}

double chi2_cdf(double df, double x) {
  if (x <= 0.0) return 0.0;
  return boost::math::cdf(boost::math::chi_squared(df), x);
}

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal(), p);
}

std::pair<double, double> ks_test(std::vector<double> xs,
                                  const std::function<double(double)>& cdf) {
  if (xs.empty()) throw std::invalid_argument("ks_test: empty sample");
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  const double sn = std::sqrt(n);
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  // Kolmogorov tail series.
  double p = 0.0;
  if (lambda < 1e-3) {
    p = 1.0;
  } else {
    double sign = 1.0;
    for (int j = 1; j <= 200; ++j) {
      const double term = sign * std::exp(-2.0 * j * j * lambda * lambda);
      p += term;
      if (std::abs(term) < 1e-16) break;
      sign = -sign;
    }
    p = std::clamp(2.0 * p, 0.0, 1.0);
  }
  return {d, p};
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

RngStream RngStream::child(std::uint64_t key) const {
  std::uint64_t state = stream_id ^ (key * 0xd1342543de82ef95ULL);
  std::uint64_t mixed = splitmix64(state);
  state = mixed ^ key;
  return RngStream{seed, splitmix64(state)};
}

StreamEngine::StreamEngine(const RngStream& stream) {
  std::uint64_t state = stream.seed;
  const std::uint64_t a = splitmix64(state);
  state ^= stream.stream_id * 0x9e3779b97f4a7c15ULL;
  const std::uint64_t b = splitmix64(state);
  std::uint64_t st = a ^ (b << 1) ^ (b >> 7);
  for (auto& s : s_) s = splitmix64(st);
}

namespace {
inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}
}  // namespace

StreamEngine::result_type StreamEngine::operator()() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double StreamEngine::uniform(double a, double b) {
  const double u = static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  return a + (b - a) * u;
}

double StreamEngine::normal() { return normal_(*this); }

void StreamEngine::fill_normal(Eigen::Ref<VectorXd> out) {
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = normal_(*this);
}

void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  std::mutex err_mu;
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n || failed.load()) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (!first_error) first_error = std::current_exception();
          failed = true;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace ivinv
