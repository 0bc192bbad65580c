#include "ivinv/conditional.hpp"

#include "ivinv/kronecker.hpp"

#include <atomic>
#include <cmath>
#include <iostream>
#include <stdexcept>

namespace ivinv {

namespace {

void warn_small_n_sims(int n_sims) {
  static std::atomic<bool> warned{false};
  if (n_sims < 100 && !warned.exchange(true)) {
    std::clog << "warning: n_sims = " << n_sims
              << " is below 100; conditional critical values will be noisy\n";
  }
}

void check_spec(const ConditionalQuantileSpec& spec) {
  if (spec.n_sims < 1) throw std::invalid_argument("n_sims must be positive");
  if (!(spec.alpha > 0.0 && spec.alpha < 1.0)) {
    throw std::invalid_argument("alpha must lie in (0,1)");
  }
  warn_small_n_sims(spec.n_sims);
}

bool is_il(TestKind kind) { return kind == TestKind::kCil || kind == TestKind::kCil0; }

}  // namespace

TestKind parse_test(const std::string& name) {
  if (name == "ar") return TestKind::kAr;
  if (name == "lm") return TestKind::kLm;
  if (name == "wald") return TestKind::kWald;
  if (name == "cqlr") return TestKind::kCqlr;
  if (name == "clr") return TestKind::kClr;
  if (name == "clr-naive") return TestKind::kClrNaive;
  if (name == "cil") return TestKind::kCil;
  if (name == "cil0") return TestKind::kCil0;
  if (name == "lc") return TestKind::kLc;
  throw std::invalid_argument("unknown test '" + name + "'");
}

std::string test_name(TestKind kind) {
  switch (kind) {
    case TestKind::kAr: return "ar";
    case TestKind::kLm: return "lm";
    case TestKind::kWald: return "wald";
    case TestKind::kCqlr: return "cqlr";
    case TestKind::kClr: return "clr";
    case TestKind::kClrNaive: return "clr-naive";
    case TestKind::kCil: return "cil";
    case TestKind::kCil0: return "cil0";
    case TestKind::kLc: return "lc";
  }
  return "?";
}

MatrixXd simulate_s(int k, const ConditionalQuantileSpec& spec) {
  MatrixXd out(k, spec.n_sims);
  for (int m = 0; m < spec.n_sims; ++m) {
    StreamEngine eng(spec.rng.child(static_cast<std::uint64_t>(m)));
    eng.fill_normal(out.col(m));
  }
  return out;
}

double conditional_quantile(const StatEvaluator& stat, const VectorXd& t,
                            const SymPD& sigma_ctx, const ConditionalQuantileSpec& spec) {
  check_spec(spec);
  const int k = static_cast<int>(t.size());
  if (sigma_ctx.dim() != 2 * k) throw DataError("conditional_quantile: Sigma must be 2k x 2k");
  const MatrixXd draws = simulate_s(k, spec);
  std::vector<double> values(spec.n_sims);
  for (int m = 0; m < spec.n_sims; ++m) {
    values[m] = stat(draws.col(m), t, spec.rng.child(static_cast<std::uint64_t>(m)).child(1));
  }
  return empirical_quantile_inplace(values, 1.0 - spec.alpha);
}

ConditionalTester::ConditionalTester(TestKind kind, std::shared_ptr<const NullGeometry> geo,
                                     TestConfig cfg)
    : kind_(kind), geo_(std::move(geo)), cfg_(std::move(cfg)) {
  cfg_.lr.validate();
  const int k = geo_->k();
  if (kind_ == TestKind::kClrNaive) cfg_.lr.naive_beta_space = true;
  if (kind_ == TestKind::kClr && cfg_.kronecker_dispatch) {
    closed_form_ = detect_kronecker(geo_->sigma0(), k).has_value();
  }
  if (is_il(kind_)) {
    if (k < 2) throw DataError("CIL requires k >= 2");
    kernel_ = std::make_unique<IlKernel>(
        *geo_, il_quadrature(cfg_.quad_nodes, geo_->beta0(), geo_->original_precision()));
    IlWeighting w = IlWeighting::kCosPower;
    if (kind_ == TestKind::kCil) {
      w = cfg_.il_original_scaling ? IlWeighting::kOriginalPower : IlWeighting::kSinPower;
    }
    log_w_ = kernel_->log_weights(w);
  }
  if (kind_ == TestKind::kWald) {
    sigma_ = unrotate(NullRotated{MatrixXd::Zero(k, 2), geo_->sigma0(), geo_->beta0()})
                 .Sigma()
                 .matrix();
  }
}

double ConditionalTester::statistic(const VectorXd& s, const VectorXd& t,
                                    const RngStream& draw_rng) const {
  switch (kind_) {
    case TestKind::kAr: return ar_from_st(s);
    case TestKind::kLm: return lm_from_st(s, geo_->lm_direction(t));
    case TestKind::kLc: {
      const double a = ar_from_st(s), l = lm_from_st(s, geo_->lm_direction(t));
      return cfg_.lc_weight * a + (1.0 - cfg_.lc_weight) * l;
    }
    case TestKind::kCqlr:
      return qlr_value(ar_from_st(s), lm_from_st(s, geo_->lm_direction(t)), t.squaredNorm());
    case TestKind::kClr:
    case TestKind::kClrNaive:
      if (closed_form_) {
        return qlr_value(ar_from_st(s), lm_from_st(s, geo_->lm_direction(t)), t.squaredNorm());
      }
      return lr_from_st(*geo_, s, t, cfg_.lr, draw_rng).value;
    case TestKind::kCil:
    case TestKind::kCil0: return kernel_->log_il(s, t, log_w_);
    case TestKind::kWald: {
      const MatrixXd r0 = geo_->r0_from_st(s, t);
      MatrixXd r = r0;
      r.col(0) += geo_->beta0() * r0.col(1);
      Hypothesis hyp;
      hyp.beta0 = geo_->beta0();
      return std::abs(wald(ReducedForm(r, SymPD(sigma_)), hyp).value);
    }
  }
  return 0.0;
}

std::vector<double> ConditionalTester::simulate(const VectorXd& t,
                                                const ConditionalQuantileSpec& spec) const {
  check_spec(spec);
  const MatrixXd draws = simulate_s(geo_->k(), spec);
  std::vector<double> values(spec.n_sims);
  if (is_il(kind_)) {
    MatrixXd out;
    kernel_->log_il_batch(draws, t, {&log_w_}, out);
    for (int m = 0; m < spec.n_sims; ++m) values[m] = out(0, m);
    return values;
  }
  for (int m = 0; m < spec.n_sims; ++m) {
    values[m] =
        statistic(draws.col(m), t, spec.rng.child(static_cast<std::uint64_t>(m)).child(1));
  }
  return values;
}

double ConditionalTester::critical_value(const VectorXd& t,
                                         const ConditionalQuantileSpec& spec) const {
  const double p = 1.0 - spec.alpha;
  if (!cfg_.simulate_pivotal) {
    if (kind_ == TestKind::kAr) return chi2_quantile(geo_->k(), p);
    if (kind_ == TestKind::kLm) return chi2_quantile(1.0, p);
  }
  if (kind_ == TestKind::kWald) return normal_quantile(1.0 - 0.5 * spec.alpha);
  std::vector<double> values = simulate(t, spec);
  return empirical_quantile_inplace(values, p);
}

TestReport ConditionalTester::run(const VectorXd& s, const VectorXd& t,
                                  const ConditionalQuantileSpec& spec) const {
  check_spec(spec);
  TestReport rep;
  rep.test = test_name(kind_);
  rep.statistic = statistic(s, t, spec.rng.child(kObservedDraw).child(1));
  rep.critical_value = critical_value(t, spec);
  rep.reject = rep.statistic > rep.critical_value;
  const bool exact = kind_ == TestKind::kWald ||
                     (!cfg_.simulate_pivotal && (kind_ == TestKind::kAr || kind_ == TestKind::kLm));
  rep.n_sims = exact ? 0 : spec.n_sims;
  rep.seed = spec.rng.seed;
  return rep;
}

TestReport run_test(const std::string& test, const ReducedForm& rf, const Hypothesis& hyp,
                    const ConditionalQuantileSpec& spec, const TestConfig& cfg) {
  const TestKind kind = parse_test(test);
  if (is_il(kind) && rf.k() < 2) throw DataError("CIL requires k >= 2");
  auto geo = std::make_shared<const NullGeometry>(NullGeometry::from_reduced_form(rf, hyp));
  const auto [s, t] = geo->st_from_r0(rf.R() * hyp.B0());
  ConditionalQuantileSpec local = spec;
  local.alpha = hyp.alpha;
  return ConditionalTester(kind, geo, cfg).run(s, t, local);
}

std::vector<Interval> accepted_runs(const std::vector<double>& grid,
                                    const std::vector<bool>& rejected) {
  std::vector<Interval> out;
  std::size_t i = 0;
  while (i < grid.size()) {
    if (rejected[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < grid.size() && !rejected[j + 1]) ++j;
    out.push_back(Interval{grid[i], grid[j]});
    i = j + 1;
  }
  return out;
}

ConfidenceSet confidence_set(const ReducedForm& rf, const std::vector<double>& grid,
                             const std::string& test, const ConditionalQuantileSpec& spec,
                             const TestConfig& cfg, int threads) {
  if (grid.empty()) throw std::invalid_argument("confidence_set: empty grid");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) {
      throw std::invalid_argument("confidence_set: grid must be strictly increasing");
    }
  }
  const TestKind kind = parse_test(test);
  TestConfig local_cfg = cfg;
  if (kind == TestKind::kCil) local_cfg.il_original_scaling = true;
  ConfidenceSet out;
  out.grid = grid;
  out.reports.resize(grid.size());
  parallel_for(grid.size(), threads, [&](std::size_t i) {
    const Hypothesis hyp(grid[i], spec.alpha);
    auto geo = std::make_shared<const NullGeometry>(NullGeometry::from_reduced_form(rf, hyp));
    const auto [s, t] = geo->st_from_r0(rf.R() * hyp.B0());
    out.reports[i] = ConditionalTester(kind, geo, local_cfg).run(s, t, spec);
  });
  for (const auto& rep : out.reports) out.rejected.push_back(rep.reject);
  out.intervals = accepted_runs(out.grid, out.rejected);
  out.open_below = !out.rejected.front();
  out.open_above = !out.rejected.back();
  return out;
}

}  // namespace ivinv
