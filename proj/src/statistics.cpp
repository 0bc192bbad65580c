#include "ivinv/statistics.hpp"

#include <algorithm>
#include <complex>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace ivinv {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;
constexpr double kInitialAngleStep = 0.02;

}  // namespace

void LROptConfig::validate() const {
  if (n_random_starts < 0) throw std::invalid_argument("LROptConfig: n_random_starts < 0");
  if (!(local_tolerance > 0.0)) throw std::invalid_argument("LROptConfig: tolerance must be > 0");
  if (max_iterations < 1) throw std::invalid_argument("LROptConfig: max_iterations < 1");
  if (!naive_beta_space && n_random_starts == 0 && !include_beta0 &&
      include_extra_betas.empty()) {
    throw std::invalid_argument("LROptConfig: no starting points");
  }
}

std::vector<double> lr_start_angles(const LROptConfig& cfg, double beta0,
                                    const RngStream& rng) {
  std::vector<double> out;
  out.reserve(cfg.n_random_starts + 1 + cfg.include_extra_betas.size());
  StreamEngine eng(rng);
  for (int i = 0; i < cfg.n_random_starts; ++i) out.push_back(eng.uniform(-kHalfPi, kHalfPi));
  if (cfg.include_beta0) out.push_back(std::atan(beta0));
  for (double b : cfg.include_extra_betas) out.push_back(std::atan(b));
  return out;
}

std::vector<LocalMax> lr_local_maxima(const NullGeometry& geo, const VectorXd& u_top,
                                      const VectorXd& u_bot,
                                      std::span<const double> starts,
                                      const LROptConfig& cfg) {
  const ProfileObjective& obj = geo.original_objective();
  const double* ut = u_top.data();
  const double* ub = u_bot.data();
  auto f = [&](double th) { return obj.value(th, ut, ub); };
  std::vector<LocalMax> out;
  out.reserve(starts.size());
  for (double s : starts) {
    out.push_back(maximize_local(f, s, -kHalfPi, kHalfPi, kInitialAngleStep,
                                 cfg.local_tolerance, cfg.max_iterations));
  }
  return out;
}

LrOutcome lr_from_st(const NullGeometry& geo, const VectorXd& s, const VectorXd& t,
                     const LROptConfig& cfg, const RngStream& rng) {
  const int k = geo.k();
  const VectorXd u = geo.u(s, t, true);
  const VectorXd u_top = u.head(k), u_bot = u.tail(k);
  const double tt = t.squaredNorm();
  LrOutcome out;
  if (cfg.naive_beta_space) {
    StreamEngine eng(rng);
    const double b0 = eng.uniform(-cfg.naive_beta_bound, cfg.naive_beta_bound);
    const ProfileObjective& obj = geo.original_objective();
    auto g = [&](double b) { return obj.value(std::atan(b), u_top.data(), u_bot.data()); };
    const double step = 0.05 * std::max(std::abs(b0), 1.0);
    const LocalMax m = maximize_local(g, b0, -1e12, 1e12, step, cfg.local_tolerance,
                                      cfg.max_iterations);
    out.value = m.fx - tt;
    out.argmax_theta = std::atan(m.x);
    out.winner = 0;
    out.evals = m.evals;
    return out;
  }
  const std::vector<double> starts = lr_start_angles(cfg, geo.beta0(), rng);
  const std::vector<LocalMax> maxima = lr_local_maxima(geo, u_top, u_bot, starts, cfg);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < maxima.size(); ++i) {
    out.evals += maxima[i].evals;
    if (maxima[i].fx > best) {
      best = maxima[i].fx;
      out.argmax_theta = maxima[i].x;
      out.winner = static_cast<int>(i);
    }
  }
  if (!std::isfinite(best)) throw NumericalError("lr: profile objective failed at every start");
  out.value = best - tt;
  return out;
}

double ar_from_st(const VectorXd& s) { return s.squaredNorm(); }

double lm_from_st(const VectorXd& s, const VectorXd& direction) {
  const double dd = direction.squaredNorm();
  if (!(dd > 0.0)) throw NumericalError("lm: conditioning direction C D^{-1} T is zero");
  const double ds = direction.dot(s);
  return ds * ds / dd;
}

double qlr_value(double ar_v, double lm_v, double r) {
  const double a = ar_v - r;
  return 0.5 * (a + std::sqrt(a * a + 4.0 * lm_v * r));
}

StatValue wald(const ReducedForm& rf, const Hypothesis& hyp) {
  const VectorXd r1 = rf.R().col(0);
  const VectorXd r2 = rf.R().col(1);
  const double r2r2 = r2.squaredNorm();
  if (!(r2r2 > 0.0)) throw DataError("wald: R2 = 0, the Wald statistic is undefined");
  const double beta_hat = r2.dot(r1) / r2r2;
  const int k = rf.k();
  const Vector2d b(1.0, -beta_hat);
  const MatrixXd bk = kron(b, MatrixXd::Identity(k, k));
  const MatrixXd v = bk.transpose() * rf.Sigma().matrix() * bk;
  const double var = r2.dot(v * r2) / (r2r2 * r2r2);
  if (!(var > 0.0)) throw NumericalError("wald: non-positive variance estimate");
  StatValue out;
  out.value = (beta_hat - hyp.beta0) / std::sqrt(var);
  out.diagnostics["beta_hat"] = beta_hat;
  out.diagnostics["std_error"] = std::sqrt(var);
  return out;
}

StatValue ar(const STDecomposition& st) { return StatValue{ar_from_st(st.S), {}}; }

StatValue lm(const STDecomposition& st) {
  const VectorXd dir = st.Cbeta0 * SymPD(st.Dbeta0).inverse() * st.T;
  return StatValue{lm_from_st(st.S, dir), {}};
}

StatValue qlr(double ar_v, double lm_v, const VectorXd& t) {
  if (lm_v < 0.0 || lm_v > ar_v + 1e-10 * std::max(1.0, ar_v)) {
    throw NumericalError("qlr: LM must lie in [0, AR]");
  }
  const double r = t.squaredNorm();
  StatValue out{qlr_value(ar_v, lm_v, r), {}};
  out.diagnostics["r"] = r;
  return out;
}

StatValue lc(double ar_v, double lm_v, double m) {
  if (!(m >= 0.0 && m <= 1.0)) throw std::invalid_argument("lc: weight m must lie in [0,1]");
  return StatValue{m * ar_v + (1.0 - m) * lm_v, {}};
}

StatValue lr(const ReducedForm& rf, const Hypothesis& hyp, const LROptConfig& cfg,
             const RngStream& rng) {
  cfg.validate();
  const NullGeometry geo = NullGeometry::from_reduced_form(rf, hyp);
  const auto [s, t] = geo.st_from_r0(rf.R() * hyp.B0());
  const LrOutcome o = lr_from_st(geo, s, t, cfg, rng);
  StatValue out{o.value, {}};
  out.diagnostics["argmax_theta"] = o.argmax_theta;
  out.diagnostics["winner"] = o.winner;
  out.diagnostics["evaluations"] = o.evals;
  return out;
}

double lr_moment_form(const ReducedForm& rf, const Hypothesis& hyp, int grid_points) {
  const int k = rf.k();
  const MatrixXd& sig = rf.Sigma().matrix();
  const MatrixXd s11 = sig.topLeftCorner(k, k), s22 = sig.bottomRightCorner(k, k);
  const MatrixXd s12 = sig.topRightCorner(k, k);
  const MatrixXd s12s = s12 + s12.transpose();
  const MatrixXd& r = rf.R();
  auto g = [&](double th) {
    const double c = std::cos(th), s = -std::sin(th);
    const VectorXd rb = c * r.col(0) + s * r.col(1);
    const MatrixXd v = c * c * s11 + c * s * s12s + s * s * s22;
    Eigen::LLT<MatrixXd> llt(v);
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::quiet_NaN();
    return rb.dot(llt.solve(rb));
  };
  const double h = std::numbers::pi / grid_points;
  std::vector<double> vals(grid_points);
  for (int i = 0; i < grid_points; ++i) vals[i] = g(-kHalfPi + i * h);
  double best = std::numeric_limits<double>::infinity();
  auto neg = [&](double th) { return -g(th); };
  for (int i = 0; i < grid_points; ++i) {
    const double lo = vals[(i + grid_points - 1) % grid_points];
    const double hi = vals[(i + 1) % grid_points];
    if (vals[i] <= lo && vals[i] <= hi) {
      const double th = -kHalfPi + i * h;
      const LocalMax m = maximize_local(neg, th, th - h, th + h, 0.25 * h, 1e-13, 200);
      best = std::min({best, vals[i], -m.fx});
    }
  }
  const auto st = st_decompose(rf, hyp);
  return st.S.squaredNorm() - best;
}

double lr_equivalence_check(const ReducedForm& rf, const Hypothesis& hyp) {
  const double direct = lr(rf, hyp, LROptConfig{}, RngStream{0, 0}).value;
  return std::abs(lr_moment_form(rf, hyp) - direct);
}

namespace {

void append_panel(QuadratureRule& out, int m, double a, double b) {
  const QuadratureRule base = gauss_legendre(m);
  const double scale = (b - a) / std::numbers::pi;
  for (int i = 0; i < m; ++i) {
    out.nodes.push_back(a + scale * (base.nodes[i] + kHalfPi));
    out.weights.push_back(scale * base.weights[i]);
  }
}

double wrap_angle(double x) {
  while (x <= -kHalfPi) x += std::numbers::pi;
  while (x > kHalfPi) x -= std::numbers::pi;
  return x;
}

// Panels no longer than this share the fixed per-panel budget; longer ones
// split the main budget in proportion to length.
constexpr double kCoarsePanel = 0.05;
constexpr double kGradeLimit = 0.1;

QuadratureRule rule_from_breaks(int n, std::vector<double> breaks) {
  std::sort(breaks.begin(), breaks.end());
  std::vector<double> pts;
  for (double x : breaks) {
    if (pts.empty() || x - pts.back() > 1e-12) pts.push_back(x);
  }
  pts.front() = -kHalfPi;
  pts.back() = kHalfPi;
  double coarse_len = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double len = pts[i + 1] - pts[i];
    if (len > kCoarsePanel) coarse_len += len;
  }
  const int fine_nodes = std::max(8, n / 20);
  QuadratureRule out;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double len = pts[i + 1] - pts[i];
    const int m = (len > kCoarsePanel)
                      ? std::max(4, static_cast<int>(std::lround(n * len / coarse_len)))
                      : fine_nodes;
    append_panel(out, m, pts[i], pts[i + 1]);
  }
  return out;
}

}  // namespace

QuadratureRule il_quadrature(int n, double beta0) {
  if (n < 4) throw std::invalid_argument("il_quadrature: need n >= 4");
  const double kink = std::atan(beta0);
  if (!(std::abs(kink) < kHalfPi - 1e-12)) return gauss_legendre(n);
  return rule_from_breaks(n, {-kHalfPi, kink, kHalfPi});
}

QuadratureRule il_quadrature(int n, double beta0, const MatrixXd& precision) {
  if (n < 4) throw std::invalid_argument("il_quadrature: need n >= 4");
  const Eigen::Index k = precision.rows() / 2;
  std::vector<double> breaks{-kHalfPi, kHalfPi};
  const double kink = std::atan(beta0);
  if (std::abs(kink) < kHalfPi - 1e-12) breaks.push_back(kink);
  // Zeros of det M(theta) are the roots t = tan(theta) of the quadratic
  // eigenproblem (t^2 P11 + t (P12 + P21) + P22) x = 0.
  const MatrixXd p11 = precision.topLeftCorner(k, k);
  const MatrixXd p12 = precision.topRightCorner(k, k);
  const MatrixXd p22 = precision.bottomRightCorner(k, k);
  const Eigen::LLT<MatrixXd> llt(p11);
  MatrixXd companion = MatrixXd::Zero(2 * k, 2 * k);
  companion.topRightCorner(k, k).setIdentity();
  companion.bottomLeftCorner(k, k) = -llt.solve(p22);
  companion.bottomRightCorner(k, k) = -llt.solve(MatrixXd(p12 + p12.transpose()));
  Eigen::ComplexEigenSolver<MatrixXd> es(companion, false);
  std::vector<std::pair<double, double>> spots;  // (real part, distance)
  if (es.info() == Eigen::Success) {
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
      const std::complex<double> th = std::atan(es.eigenvalues()(i));
      const double d = std::max(std::abs(th.imag()), 1e-13);
      if (d < kGradeLimit && std::isfinite(th.real())) spots.emplace_back(wrap_angle(th.real()), d);
    }
  }
  std::sort(spots.begin(), spots.end());
  // Zeros closer together than their distance to the real line act as one.
  std::vector<std::pair<double, double>> merged;
  for (const auto& sp : spots) {
    if (!merged.empty() && sp.first - merged.back().first < std::max(sp.second, merged.back().second)) {
      merged.back().second = std::min(merged.back().second, sp.second);
    } else {
      merged.push_back(sp);
    }
  }
  for (const auto& [x, d] : merged) {
    breaks.push_back(x);
    for (double h = d; h < 2.0 * kGradeLimit; h *= 2.0) {
      breaks.push_back(wrap_angle(x - h));
      breaks.push_back(wrap_angle(x + h));
    }
  }
  return rule_from_breaks(n, breaks);
}

namespace {

enum class PowerBase { kShiftedSin, kCos, kShiftedSinUnit };

// Quadrature over theta of exp(0.5 (f(theta) - T'T)) det(M(theta))^{-1/2}
// times a power weight, where f and M come from x = Sigma^{-1/2} vec(R).
StatValue il_direct(const ReducedForm& rf, const Hypothesis& hyp,
                    const QuadratureRule& quad, PowerBase base) {
  const int k = rf.k();
  if (k < 2) throw DataError("integrated likelihood requires k >= 2");
  const double beta0 = hyp.beta0;
  const double tt = st_decompose(rf, hyp).T.squaredNorm();
  const MatrixXd p_half = SymPD(rf.Sigma().inverse()).sqrt();
  const VectorXd x = p_half * vec(rf.R());
  const double norm = std::sqrt(1.0 + beta0 * beta0);
  std::vector<double> terms(quad.size());
  for (std::size_t j = 0; j < quad.size(); ++j) {
    const double a = quad.nodes[j];
    const double s = std::sin(a), c = std::cos(a);
    const MatrixXd proj = s * p_half.leftCols(k) + c * p_half.rightCols(k);
    Eigen::LLT<MatrixXd> llt(proj.transpose() * proj);
    if (llt.info() != Eigen::Success) throw NumericalError("il: singular profile variance");
    const VectorXd z = llt.matrixL().solve(proj.transpose() * x);
    const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    double w = 1.0;
    switch (base) {
      case PowerBase::kShiftedSin: w = std::abs(s - beta0 * c); break;
      case PowerBase::kCos: w = std::abs(c); break;
      case PowerBase::kShiftedSinUnit: w = std::abs((s - beta0 * c) / norm); break;
    }
    const double log_w = (k == 2) ? 0.0 : (k - 2) * std::log(w);
    terms[j] = std::log(quad.weights[j]) + 0.5 * (z.squaredNorm() - tt) - 0.5 * log_det + log_w;
  }
  double shift = 0.0;
  const double log_value = log_sum_exp(terms.data(), terms.size(), &shift);
  StatValue out;
  out.value = std::exp(log_value - shift);
  out.diagnostics["log_shift"] = shift;
  out.diagnostics["log_value"] = log_value;
  out.diagnostics["nodes"] = static_cast<double>(quad.size());
  return out;
}

StatValue il_null(const NullRotated& nr, const VectorXd& t, const QuadratureRule& quad,
                  PowerBase base) {
  if (t.size() != nr.k()) throw DataError("il: T has the wrong length");
  Hypothesis hyp;
  hyp.beta0 = nr.beta0;
  return il_direct(unrotate(nr), hyp, quad, base);
}

}  // namespace

StatValue il(const NullRotated& nr, const VectorXd& t, const QuadratureRule& quad) {
  return il_null(nr, t, quad, PowerBase::kShiftedSin);
}

StatValue il0(const NullRotated& nr, const VectorXd& t, const QuadratureRule& quad) {
  return il_null(nr, t, quad, PowerBase::kCos);
}

StatValue il_original(const ReducedForm& rf, const Hypothesis& hyp,
                      const QuadratureRule& quad) {
  return il_direct(rf, hyp, quad, PowerBase::kShiftedSinUnit);
}

}  // namespace ivinv
