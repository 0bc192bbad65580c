// End-to-end acceptance run. Prints one PASS/FAIL line per criterion with the
// measured quantities, then a summary. Arguments select criteria by number;
// the exit status is nonzero when any selected criterion fails or errors.

#include "ivinv/conditional.hpp"
#include "ivinv/harness.hpp"
#include "ivinv/kronecker.hpp"
#include "ivinv/statistics.hpp"

#include "oracles.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace ivinv;

namespace {

int g_threads = 1;
int g_fail = 0;
int g_pass = 0;

void verdict(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("criterion %2d %-28s %s  %s\n", id, name.c_str(), ok ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
  (ok ? g_pass : g_fail) += 1;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

using Table = std::map<std::pair<std::string, double>, double>;

Table power_table(const RunConfig& cfg) {
  Table out;
  for (const PowerRow& row : power_curve(cfg)) out[{row.test, row.beta_rescaled}] = row.reject_rate;
  return out;
}

RunConfig design_run(DesignKind kind, double rho, int reps, const std::string& grid,
                     std::vector<std::string> tests, std::uint64_t seed) {
  RunConfig cfg;
  cfg.design.kind = kind;
  cfg.design.k = 5;
  cfg.design.lambda_per_k = 2.0;
  cfg.design.rho = rho;
  cfg.reps = reps;
  cfg.quantile_sims = 1000;
  cfg.beta_grid = parse_grid(grid);
  cfg.tests = std::move(tests);
  cfg.threads = g_threads;
  cfg.seed = seed;
  return cfg;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

double log_il(const NullRotated& nr, int nodes) {
  const NullGeometry geo(nr.Sigma0, nr.beta0);
  const VectorXd t = geo.st_from_r0(nr.R0).second;
  return il(nr, t, il_quadrature(nodes, nr.beta0, geo.original_precision()))
      .diagnostics.at("log_value");
}

void criterion_1() {
  double lo = 1.0, hi = 0.0;
  std::ostringstream detail;
  for (DesignKind kind : {DesignKind::kHomoskedastic, DesignKind::kNs}) {
    const Table t = power_table(
        design_run(kind, 0.9, 10000, "0:0:1", {"ar", "lm", "cil", "cqlr"}, 101));
    const Table c = power_table(design_run(kind, 0.9, 1000, "0:0:1", {"clr"}, 102));
    detail << design_name(kind) << "[";
    for (const auto* tab : {&t, &c}) {
      for (const auto& [key, v] : *tab) {
        detail << key.first << "=" << fmt("%.4f", v) << " ";
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    detail << "] ";
  }
  verdict(1, "size in [3.5%,6.5%]", lo >= 0.035 && hi <= 0.065, detail.str());
}

void criterion_2() {
  DesignSpec spec;
  const AssembledDesign des = assemble(spec);
  const NullGeometry geo(des.sigma0, 0.0);
  const DrawBatch batch = draw_r0(des.sigma0, des.mu, 0.0, 10000, RngStream{202, 0}, 0.0, g_threads);
  std::vector<double> ar_v, lm_v;
  for (const MatrixXd& r0 : batch.draws) {
    const auto [s, t] = geo.st_from_r0(r0);
    ar_v.push_back(ar_from_st(s));
    lm_v.push_back(lm_from_st(s, geo.lm_direction(t)));
  }
  const boost::math::chi_squared chi5(5), chi1(1);
  const double p_ar = ks_test(ar_v, [&](double x) { return x <= 0 ? 0.0 : cdf(chi5, x); }).second;
  const double p_lm = ks_test(lm_v, [&](double x) { return x <= 0 ? 0.0 : cdf(chi1, x); }).second;
  verdict(2, "AR~chi2_5, LM~chi2_1 (KS)", p_ar > 0.01 && p_lm > 0.01,
          "p_AR=" + fmt("%.4f", p_ar) + " p_LM=" + fmt("%.4f", p_lm));
}

void criterion_3() {
  oracle::Rng rng(303);
  double worst = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const int k = 2 + rep % 9;
    const ReducedForm rf = oracle::random_kron_instance(k, rng);
    const Hypothesis hyp(std::normal_distribution<double>(0.0, 1.5)(rng), 0.05);
    const STDecomposition st = st_decompose(rf, hyp);
    const NullGeometry geo = NullGeometry::from_reduced_form(rf, hyp);
    const double q = qlr(ar_from_st(st.S), lm_from_st(st.S, geo.lm_direction(st.T)), st.T).value;
    const double v = lr(rf, hyp, LROptConfig{}, RngStream{303, std::uint64_t(rep)}).value;
    worst = std::max(worst, std::abs(v - q) / std::max(q, 1.0));
  }
  verdict(3, "Kronecker LR = QLR", worst < 1e-8, "max rel diff " + fmt("%.3g", worst));
}

void criterion_4() {
  oracle::Rng rng(404);
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const ReducedForm rf = oracle::random_instance(2 + rep % 6, rng);
    const Hypothesis hyp(std::normal_distribution<double>(0.0, 1.0)(rng), 0.05);
    worst = std::max(worst, lr_equivalence_check(rf, hyp));
  }
  verdict(4, "LR dual form", worst < 1e-6, "max abs diff " + fmt("%.3g", worst));
}

void criterion_5() {
  oracle::Rng rng(505);
  double worst_exact = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int k = 2 + rep % 5;
    const ReducedForm rf = oracle::random_instance(k, rng);
    const NullRotated nr = null_rotate(rf, Hypothesis(0.25, 0.05));
    const NullRotated moved = act(oracle::random_group_element(k, rng), nr);
    auto stats = [](const NullRotated& x) {
      const NullGeometry geo(x.Sigma0, x.beta0);
      const auto [s, t] = geo.st_from_r0(x.R0);
      const double a = ar_from_st(s), l = lm_from_st(s, geo.lm_direction(t));
      return std::array<double, 4>{a, l, qlr_value(a, l, t.squaredNorm()),
                                   oracle::dense_grid_lr(x.R0, x.Sigma0.matrix(), 0.0)};
    };
    const auto a = stats(nr), b = stats(moved);
    for (int i = 0; i < 4; ++i) worst_exact = std::max(worst_exact, rel(b[i], a[i]));
  }
  double worst_ratio = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    const int k = 3 + trial;
    const SymPD sigma(oracle::random_spd(2 * k, rng));
    const GroupElement g = oracle::random_group_element(k, rng);
    double first = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
      const NullRotated nr =
          null_rotate(ReducedForm(oracle::gaussian_matrix(k, 2, rng), sigma), Hypothesis(0.0, 0.05));
      const double ratio = log_il(act(g, nr), 201) - log_il(nr, 201);
      if (rep == 0) first = ratio;
      // log-ratio difference is the relative ratio difference to first order
      worst_ratio = std::max(worst_ratio, std::abs(std::expm1(ratio - first)));
    }
  }
  verdict(5, "group invariance", worst_exact < 1e-8 && worst_ratio < 1e-6,
          "exact max rel " + fmt("%.3g", worst_exact) + ", IL ratio max rel " +
              fmt("%.3g", worst_ratio));
}

void criterion_6() {
  oracle::Rng rng(606);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int k = 2 + rep % 7;
    const ReducedForm rf = oracle::random_instance(k, rng);
    for (double beta0 : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
      const Hypothesis hyp(beta0, 0.05);
      const QuadratureRule q = il_quadrature(201, beta0);
      const double a = il_original(rf, hyp, q).diagnostics.at("log_value");
      const double b = il(null_rotate(rf, hyp), st_decompose(rf, hyp).T, q).diagnostics.at("log_value");
      worst = std::max(worst, std::abs(std::expm1(a + 0.5 * (k - 2) * std::log1p(beta0 * beta0) - b)));
    }
  }
  verdict(6, "IL original-data identity", worst < 1e-8, "max rel " + fmt("%.3g", worst));
}

void criterion_7() {
  oracle::Rng rng(707);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const ReducedForm rf = oracle::random_instance(2 + rep % 7, rng);
    const NullRotated nr = null_rotate(rf, Hypothesis(0.5 * (rep % 5) - 1.0, 0.05));
    worst = std::max(worst, std::abs(std::expm1(log_il(nr, 401) - log_il(nr, 201))));
  }
  DesignSpec ns;
  ns.kind = DesignKind::kNs;
  const AssembledDesign des = assemble(ns);
  const DrawBatch batch = draw_r0(des.sigma0, des.mu, 0.0, 20, RngStream{707, 1});
  double ns_worst = 0.0;
  for (const MatrixXd& r0 : batch.draws) {
    const NullRotated nr{r0, des.sigma0, 0.0};
    ns_worst = std::max(ns_worst, std::abs(std::expm1(log_il(nr, 401) - log_il(nr, 201))));
  }
  verdict(7, "IL 201 vs 401 nodes", worst < 1e-8,
          "max rel " + fmt("%.3g", worst) + " (NS design, informational: " +
              fmt("%.3g", ns_worst) + ")");
}

void criterion_8() {
  bool within = true, cil_beats_ar = false, cqlr_beats_ar = false, cil0_biased = false;
  double max_gap = 0.0, min_cil0 = 1.0;
  for (double rho : {0.9, -0.9}) {
    const Table t = power_table(design_run(DesignKind::kHomoskedastic, rho, 1000, "-6:6:1",
                                           {"ar", "cqlr", "cil", "cil0"}, 808));
    for (double b : parse_grid("-6:6:1").points()) {
      const double ar_v = t.at({"ar", b}), cq = t.at({"cqlr", b}), ci = t.at({"cil", b});
      max_gap = std::max(max_gap, std::abs(ci - cq));
      within = within && std::abs(ci - cq) <= 0.05;
      cil_beats_ar = cil_beats_ar || ci >= ar_v + 0.05;
      cqlr_beats_ar = cqlr_beats_ar || cq >= ar_v + 0.05;
      if (rho > 0 && b != 0.0) {
        min_cil0 = std::min(min_cil0, t.at({"cil0", b}));
        cil0_biased = cil0_biased || t.at({"cil0", b}) < 0.05 - 0.01;
      }
    }
  }
  verdict(8, "homoskedastic power curves", within && cil_beats_ar && cqlr_beats_ar && cil0_biased,
          "max |CIL-CQLR| " + fmt("%.3f", max_gap) + ", CIL>AR+5pp " +
              (cil_beats_ar ? "yes" : "no") + ", CQLR>AR+5pp " + (cqlr_beats_ar ? "yes" : "no") +
              ", min CIL0 power (rho=0.9) " + fmt("%.3f", min_cil0));
}

void criterion_9() {
  const Table t =
      power_table(design_run(DesignKind::kNs, 0.0, 1000, "-6:6:1", {"lm", "cqlr"}, 909));
  double worst = 0.0;
  for (const auto& [key, v] : t) worst = std::max(worst, std::abs(v - 0.05));
  verdict(9, "NS: LM and CQLR power ~ size", worst <= 0.03,
          "max |power - 0.05| " + fmt("%.3f", worst));
}

void criterion_10() {
  const Table t = power_table(
      design_run(DesignKind::kNs, 0.0, 1000, "-4:4:1", {"cil", "clr-infeasible"}, 1010));
  double max_gain = -1.0, worst_deficit = 1.0;
  std::ostringstream curve;
  for (double b : parse_grid("-4:4:1").points()) {
    const double ci = t.at({"cil", b}), cl = t.at({"clr-infeasible", b});
    max_gain = std::max(max_gain, ci - cl);
    worst_deficit = std::min(worst_deficit, ci - cl);
    curve << fmt("%g", b) << ":" << fmt("%.3f", ci) << "/" << fmt("%.3f", cl) << " ";
  }
  verdict(10, "NS: CIL vs CLR-infeasible", max_gain >= 0.08 && worst_deficit >= -0.03,
          "max gain " + fmt("%.3f", max_gain) + ", min gain " + fmt("%.3f", worst_deficit) +
              " [beta: cil/clr " + curve.str() + "]");
}

void criterion_11() {
  const Table t = power_table(
      design_run(DesignKind::kHomoskedastic, 0.9, 1000, "0:0:1", {"clr-naive"}, 1111));
  const double size = t.at({"clr-naive", 0.0});
  verdict(11, "naive CLR size distortion", size >= 0.08, "null rejection " + fmt("%.4f", size));
}

void criterion_12() {
  RunConfig cfg;
  cfg.design.kind = DesignKind::kNs;
  cfg.design.k = 5;
  cfg.reps = 1000;
  cfg.threads = g_threads;
  cfg.seed = 1212;
  const StartSchemeTables tab = start_scheme_tables(cfg);
  const double beta0_beats_one = tab.percent[0][1];
  const double one_beats_beta0 = tab.percent[1][0];
  const double many_beats_best = tab.percent[3][2];
  const bool ok = std::abs(beta0_beats_one - 64.7) <= 8.0 && std::abs(one_beats_beta0 - 26.0) <= 8.0 &&
                  many_beats_best < 1.5;
  verdict(12, "start-scheme table", ok,
          "(0,Yes) beats (1,No) " + fmt("%.1f%%", beta0_beats_one) + ", (1,No) beats (0,Yes) " +
              fmt("%.1f%%", one_beats_beta0) + ", (51,No) beats (50,Yes) " +
              fmt("%.1f%%", many_beats_best));
}

void criterion_13() {
  DesignSpec spec;
  spec.lambda_per_k = 100.0;
  const AssembledDesign des = assemble(spec);
  const double truth = 0.5;
  const DrawBatch batch = draw_r0(des.sigma0, des.mu, truth, 500, RngStream{1313, 0});
  ConditionalQuantileSpec qs;
  qs.n_sims = 1000;
  int covered = 0;
  for (std::size_t i = 0; i < batch.draws.size(); ++i) {
    qs.rng = RngStream{1313, 1}.child(i);
    const ReducedForm rf = unrotate(NullRotated{batch.draws[i], des.sigma0, 0.0});
    const ConfidenceSet cs =
        confidence_set(rf, {truth - 0.05, truth, truth + 0.05}, "cil", qs, TestConfig{}, g_threads);
    covered += cs.rejected[1] ? 0 : 1;
  }
  const double rate = covered / 500.0;
  verdict(13, "CIL coverage (strong IV)", std::abs(rate - 0.95) <= 0.03,
          "coverage " + fmt("%.3f", rate));
}

}  // namespace

int main(int argc, char** argv) {
  g_threads = std::max(1u, std::thread::hardware_concurrency());
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  const std::vector<std::function<void()>> criteria{
      criterion_1, criterion_2, criterion_3,  criterion_4,  criterion_5,  criterion_6, criterion_7,
      criterion_8, criterion_9, criterion_10, criterion_11, criterion_12, criterion_13};
  int errors = 0;
  for (int id = 1; id <= static_cast<int>(criteria.size()); ++id) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    try {
      criteria[id - 1]();
    } catch (const std::exception& e) {
      std::printf("criterion %2d ERROR %s\n", id, e.what());
      ++errors;
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("             (%.1f s)\n", secs);
  }
  std::printf("summary: %d PASS, %d FAIL, %d ERROR\n", g_pass, g_fail, errors);
  return errors == 0 && g_fail == 0 ? 0 : 1;
}
