#pragma once

// Test statistics for H0: beta = beta0. The *_from_st functions are the
// fast paths used inside conditional simulation; the remaining functions
// are the public, data-level entry points.

#include "ivinv/model.hpp"
#include "ivinv/null_geometry.hpp"
#include "ivinv/numerics.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace ivinv {

struct StatValue {
  double value = 0.0;
  std::map<std::string, double> diagnostics;
};

struct LROptConfig {
  int n_random_starts = 50;
  bool include_beta0 = true;
  std::vector<double> include_extra_betas;
  double local_tolerance = 1e-10;
  int max_iterations = 200;
  /// Search in beta rather than the compact angle, from a single start drawn
  /// uniformly on [-naive_beta_bound, naive_beta_bound]. Ignores every other
  /// start option.
  bool naive_beta_space = false;
  double naive_beta_bound = 1000.0;

  void validate() const;
};

struct LrOutcome {
  double value = 0.0;
  double argmax_theta = 0.0;
  int winner = -1;
  int evals = 0;
};

/// Starting angles in order: random draws, then atan(beta0), then the extras.
std::vector<double> lr_start_angles(const LROptConfig& cfg, double beta0,
                                    const RngStream& rng);

/// Local maxima of the original-frame profile objective, one per start.
std::vector<LocalMax> lr_local_maxima(const NullGeometry& geo, const VectorXd& u_top,
                                      const VectorXd& u_bot,
                                      std::span<const double> starts,
                                      const LROptConfig& cfg);

LrOutcome lr_from_st(const NullGeometry& geo, const VectorXd& s, const VectorXd& t,
                     const LROptConfig& cfg, const RngStream& rng);

double ar_from_st(const VectorXd& s);
/// Squared projection of s on `direction`; throws NumericalError on a zero direction.
double lm_from_st(const VectorXd& s, const VectorXd& direction);
double qlr_value(double ar_v, double lm_v, double r);

StatValue wald(const ReducedForm& rf, const Hypothesis& hyp);
StatValue ar(const STDecomposition& st);
StatValue lm(const STDecomposition& st);
StatValue qlr(double ar_v, double lm_v, const VectorXd& t);
StatValue lc(double ar_v, double lm_v, double m);
StatValue lr(const ReducedForm& rf, const Hypothesis& hyp, const LROptConfig& cfg,
             const RngStream& rng);

/// |LR from the b-parameterized moment form - lr()|, the moment form being
/// minimized on a dense angle grid and polished locally.
double lr_equivalence_check(const ReducedForm& rf, const Hypothesis& hyp);
double lr_moment_form(const ReducedForm& rf, const Hypothesis& hyp, int grid_points = 10000);

/// Two-panel Gauss-Legendre rule on (-pi/2, pi/2) split at atan(beta0),
/// nodes allotted in proportion to panel length. The integrated-likelihood
/// integrands are smooth in the angle of a = (beta, 1) except where the
/// power weight vanishes, at atan(beta0) and +-pi/2.
QuadratureRule il_quadrature(int n, double beta0 = 0.0);
/// As above, with panels graded geometrically (ratio 2) toward the real
/// parts of near-real zeros of det M(theta) for the 2k x 2k original-frame
/// precision. An ill-conditioned variance puts such zeros within 1e-5 of the
/// real line, where the integrand spikes. Panels of length <= 0.05 get
/// max(8, n/20) nodes each on top of the n nodes shared by the rest.
QuadratureRule il_quadrature(int n, double beta0, const MatrixXd& precision);

/// Integrated likelihood statistics. All three integrate over the angle
/// theta of a = (beta, 1), so `quad` is read as theta nodes (use
/// il_quadrature(n, beta0)). il and il0 equal the integrals over the angle
/// of a_Delta = (Delta, 1) with weights |sin|^{k-2} and |cos|^{k-2}; in theta
/// the weights become |sin theta - beta0 cos theta|^{k-2} and |cos theta|^{k-2}.
/// value is the integral with the exponent shifted down by its largest node
/// term; diagnostics carry "log_shift" and "log_value" (log of the integral).
StatValue il(const NullRotated& nr, const VectorXd& t, const QuadratureRule& quad);
StatValue il0(const NullRotated& nr, const VectorXd& t, const QuadratureRule& quad);
/// il scaled by (1 + beta0^2)^{-(k-2)/2}.
StatValue il_original(const ReducedForm& rf, const Hypothesis& hyp,
                      const QuadratureRule& quad);

}  // namespace ivinv
