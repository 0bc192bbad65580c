#pragma once

// Precomputed geometry of a hypothesis H0: beta = beta0 under a fixed
// variance. Everything the conditional tests need is a function of the
// pivotal S, the complete T and the matrices cached here, so simulation of
// S ~ N(0, I_k) at fixed T never touches the 2k x 2k algebra again.
//
// Two angle frames appear. The null frame uses directions l = (sin eta,
// cos eta) for a_Delta = (Delta, 1) and precision Sigma0^{-1}; the original
// frame uses l = (sin theta, cos theta) for a = (beta, 1) and precision
// Sigma^{-1}.

#include "ivinv/model.hpp"
#include "ivinv/numerics.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace ivinv {

/// f(angle) = v' M^{-1} v with v = sin*u_top + cos*u_bot and
/// M = (l' (x) I_k) P (l' (x) I_k)' for a 2k x 2k precision P. This is
/// vec(R)' P^{1/2} N_{P^{1/2}(l (x) I)} P^{1/2} vec(R) when u = P vec(R).
class ProfileObjective {
 public:
  explicit ProfileObjective(const MatrixXd& precision);

  int k() const { return k_; }
  /// NaN if M(angle) fails to factor.
  double value(double angle, const double* u_top, const double* u_bot) const;
  /// Same, also writing log det M(angle).
  double value(double angle, const double* u_top, const double* u_bot,
               double* log_det) const;

 private:
  int k_;
  std::vector<double> p11_, p12s_, p22_;  // row-major
};

struct LocalMax {
  double x = 0.0;
  double fx = -std::numeric_limits<double>::infinity();
  int evals = 0;
};

/// Local maximizer on [lo, hi] started at x0: expands a bracket uphill with
/// golden-ratio steps, then runs Brent's golden-section/parabolic search to
/// an x-tolerance of sqrt(eps)*|x| + tol.
template <class F>
LocalMax maximize_local(F&& f, double x0, double lo, double hi,
                        double initial_step, double tol, int max_iter) {
  constexpr double kGold = 1.618033988749895;
  constexpr double kCgold = 0.3819660112501051;
  const double sqrt_eps = 1.4901161193847656e-08;
  auto clamp = [&](double x) { return std::min(hi, std::max(lo, x)); };
  LocalMax out;
  auto eval = [&](double x) {
    ++out.evals;
    const double v = f(x);
    return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
  };

  x0 = clamp(x0);
  double fx0 = eval(x0);
  double a = x0, b = x0, best = x0, fbest = fx0;

  double x1 = clamp(x0 + initial_step);
  double f1 = (x1 == x0) ? fx0 : eval(x1);
  double dir = 1.0;
  double prev = x0, cur = x1, fcur = f1;
  if (!(f1 > fx0)) {
    double x2 = clamp(x0 - initial_step);
    double f2 = (x2 == x0) ? fx0 : eval(x2);
    if (!(f2 > fx0)) {
      a = std::min(x1, x2);
      b = std::max(x1, x2);
      best = x0;
      fbest = fx0;
      goto refine;
    }
    dir = -1.0;
    prev = x0;
    cur = x2;
    fcur = f2;
  }
  {
    double step = std::abs(cur - prev);
    for (int it = 0; it < max_iter; ++it) {
      step *= kGold;
      const double nxt = clamp(cur + dir * step);
      if (nxt == cur) {
        a = std::min(prev, cur);
        b = std::max(prev, cur);
        best = cur;
        fbest = fcur;
        goto refine;
      }
      const double fn = eval(nxt);
      if (!(fn > fcur)) {
        a = std::min(prev, nxt);
        b = std::max(prev, nxt);
        best = cur;
        fbest = fcur;
        goto refine;
      }
      prev = cur;
      cur = nxt;
      fcur = fn;
    }
    out.x = cur;
    out.fx = fcur;
    return out;
  }

refine : {
  // Brent minimisation of -f on [a, b] seeded with the best bracket point.
  double x = best, w = best, v = best;
  double fx = -fbest, fw = fx, fv = fx;
  double d = 0.0, e = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const double xm = 0.5 * (a + b);
    const double tol1 = sqrt_eps * std::abs(x) + tol;
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - xm) <= tol2 - 0.5 * (b - a)) break;
    bool golden = true;
    if (std::abs(e) > tol1) {
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double etemp = e;
      e = d;
      if (!(std::abs(p) >= std::abs(0.5 * q * etemp) || p <= q * (a - x) ||
            p >= q * (b - x))) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = (xm >= x) ? tol1 : -tol1;
        golden = false;
      }
    }
    if (golden) {
      e = (x >= xm) ? a - x : b - x;
      d = kCgold * e;
    }
    const double u = (std::abs(d) >= tol1) ? x + d : x + (d > 0 ? tol1 : -tol1);
    const double fu = -eval(u);
    if (fu <= fx) {
      if (u >= x) a = x; else b = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  out.x = x;
  out.fx = -fx;
  return out;
}
}

class NullGeometry {
 public:
  /// sigma0 is the variance of vec(R0) at the hypothesized beta0.
  NullGeometry(const SymPD& sigma0, double beta0);
  static NullGeometry from_reduced_form(const ReducedForm& rf, const Hypothesis& hyp);

  int k() const { return k_; }
  double beta0() const { return beta0_; }
  const SymPD& sigma0() const { return sigma0_; }

  /// S = Sigma11^{-1/2} r1, T = P22^{-1/2}(P21 r1 + P22 r2), P = Sigma0^{-1}.
  std::pair<VectorXd, VectorXd> st_from_r0(const MatrixXd& r0) const;
  MatrixXd r0_from_st(const VectorXd& s, const VectorXd& t) const;

  /// u = P vec(R) in the null (`original == false`) or original frame, as a
  /// linear function of (S, T): u = u_s * S + u_t * T.
  const MatrixXd& u_from_s(bool original) const { return original ? us_orig_ : us_null_; }
  const MatrixXd& u_from_t(bool original) const { return original ? ut_orig_ : ut_null_; }
  VectorXd u(const VectorXd& s, const VectorXd& t, bool original) const;

  const ProfileObjective& null_objective() const { return null_obj_; }
  const ProfileObjective& original_objective() const { return orig_obj_; }
  const MatrixXd& original_precision() const { return precision_orig_; }

  /// C_{beta0} D_{beta0}^{-1} t, the LM projection direction.
  VectorXd lm_direction(const VectorXd& t) const { return lm_map_ * t; }
  const MatrixXd& c_beta0() const { return c_; }
  const MatrixXd& d_beta0() const { return d_; }

 private:
  int k_;
  double beta0_;
  SymPD sigma0_;
  MatrixXd c_, sqrt_s11_, d_, d_inv_, p21_, reg_;
  MatrixXd us_null_, ut_null_, us_orig_, ut_orig_;
  MatrixXd lm_map_;
  MatrixXd precision_orig_;
  ProfileObjective null_obj_;
  ProfileObjective orig_obj_;
};

// Power weights over the angle theta of a = (beta, 1).
enum class IlWeighting {
  kSinPower,      // |sin theta - beta0 cos theta|^{k-2}: IL
  kCosPower,      // |cos theta|^{k-2}: IL0
  kOriginalPower  // |(sin theta - beta0 cos theta)/sqrt(1+beta0^2)|^{k-2}
};

/// Quadrature evaluation of the integrated likelihood over theta with the
/// node-wise Cholesky factors cached. Node j contributes
///   w_j * exp(0.5 * (|A_j S + B_j T|^2 - T'T)) * det(M_j)^{-1/2} * weight_j.
class IlKernel {
 public:
  IlKernel(const NullGeometry& geo, const QuadratureRule& rule);

  int k() const { return k_; }
  std::size_t nodes() const { return angles_.size(); }

  /// Per-node log multipliers (quadrature weight, determinant, power weight).
  std::vector<double> log_weights(IlWeighting weighting) const;

  /// log IL for a single (S, T). `shift` receives the max log-term.
  double log_il(const VectorXd& s, const VectorXd& t,
                const std::vector<double>& log_w, double* shift = nullptr) const;

  /// log IL for each column of `s` (k x m), for every weight vector.
  /// out(w, j) is the value for weight set w and column j.
  void log_il_batch(const MatrixXd& s, const VectorXd& t,
                    const std::vector<const std::vector<double>*>& log_ws,
                    MatrixXd& out) const;

 private:
  int k_;
  double beta0_;
  std::vector<double> angles_;
  std::vector<double> quad_w_;
  std::vector<double> log_det_;
  MatrixXd a_stack_;  // (nodes*k) x k
  MatrixXd b_stack_;  // (nodes*k) x k
};

double log_sum_exp(const double* terms, std::size_t n, double* shift = nullptr);

}  // namespace ivinv
