#pragma once

// Conditional critical values kappa(t, Sigma) by simulating S ~ N(0, I_k)
// at the observed T, test decisions and confidence sets by inversion.
//
// Stream layout: draw m takes its S from spec.rng.child(m) and any further
// randomness (LR starting points) from spec.rng.child(m).child(1). The
// observed statistic uses spec.rng.child(kObservedDraw).child(1). Every test
// run with the same spec therefore sees the same S draws.

#include "ivinv/model.hpp"
#include "ivinv/null_geometry.hpp"
#include "ivinv/statistics.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ivinv {

inline constexpr std::uint64_t kObservedDraw = 0xffffffffffffffffULL;

struct ConditionalQuantileSpec {
  int n_sims = 1000;
  double alpha = 0.05;
  RngStream rng;
};

enum class TestKind { kAr, kLm, kWald, kCqlr, kClr, kClrNaive, kCil, kCil0, kLc };

/// Accepts ar, lm, wald, cqlr, clr, clr-naive, cil, cil0, lc.
TestKind parse_test(const std::string& name);
std::string test_name(TestKind kind);

struct TestConfig {
  LROptConfig lr;
  int quad_nodes = kDefaultQuadratureNodes;
  /// m(T) for LC, supplied as a constant.
  double lc_weight = 0.5;
  /// Simulate AR and LM critical values instead of using chi-square quantiles.
  bool simulate_pivotal = false;
  /// Replace CLR by the closed-form CQLR when Sigma has Kronecker form.
  bool kronecker_dispatch = true;
  /// CIL with the (1 + beta0^2)^{-(k-2)/2} scaling of the original-data form.
  bool il_original_scaling = false;
};

struct TestReport {
  std::string test;
  /// log IL for cil and cil0, |W| for wald, the statistic itself otherwise.
  double statistic = 0.0;
  double critical_value = 0.0;
  bool reject = false;
  int n_sims = 0;
  std::uint64_t seed = 0;
};

using StatEvaluator =
    std::function<double(const VectorXd& s, const VectorXd& t, const RngStream& draw_rng)>;

/// S draws as columns, k x n_sims.
MatrixXd simulate_s(int k, const ConditionalQuantileSpec& spec);

/// 1 - alpha empirical quantile of stat(S_m, t) over the spec's draws.
double conditional_quantile(const StatEvaluator& stat, const VectorXd& t,
                            const SymPD& sigma_ctx, const ConditionalQuantileSpec& spec);

/// One test at one null, with everything that depends only on (Sigma0, beta0)
/// precomputed.
class ConditionalTester {
 public:
  ConditionalTester(TestKind kind, std::shared_ptr<const NullGeometry> geo, TestConfig cfg);

  TestKind kind() const { return kind_; }
  const NullGeometry& geometry() const { return *geo_; }
  /// True when CLR runs as CQLR because Sigma0 has Kronecker form.
  bool uses_closed_form() const { return closed_form_; }

  double statistic(const VectorXd& s, const VectorXd& t, const RngStream& draw_rng) const;
  /// Simulated statistics for every draw of the spec, in draw order.
  std::vector<double> simulate(const VectorXd& t, const ConditionalQuantileSpec& spec) const;
  double critical_value(const VectorXd& t, const ConditionalQuantileSpec& spec) const;
  TestReport run(const VectorXd& s, const VectorXd& t, const ConditionalQuantileSpec& spec) const;

 private:
  TestKind kind_;
  std::shared_ptr<const NullGeometry> geo_;
  TestConfig cfg_;
  bool closed_form_ = false;
  std::unique_ptr<IlKernel> kernel_;
  std::vector<double> log_w_;
  MatrixXd sigma_;
};

TestReport run_test(const std::string& test, const ReducedForm& rf, const Hypothesis& hyp,
                    const ConditionalQuantileSpec& spec, const TestConfig& cfg = {});

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

struct ConfidenceSet {
  std::vector<double> grid;
  std::vector<bool> rejected;
  std::vector<TestReport> reports;
  std::vector<Interval> intervals;
  /// Non-rejection at the first or last grid point: the set may continue past the grid.
  bool open_below = false;
  bool open_above = false;
};

/// Maximal runs of consecutive non-rejected grid points.
std::vector<Interval> accepted_runs(const std::vector<double>& grid,
                                    const std::vector<bool>& rejected);

/// Test inversion over a strictly increasing grid of beta0 values. CIL uses
/// the original-data scaling.
ConfidenceSet confidence_set(const ReducedForm& rf, const std::vector<double>& grid,
                             const std::string& test, const ConditionalQuantileSpec& spec,
                             const TestConfig& cfg = {}, int threads = 1);

}  // namespace ivinv
