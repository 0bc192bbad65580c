#include "ivinv/harness.hpp"

#include "ivinv/csv_io.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace ivinv {

std::vector<double> GridSpec::points() const {
  if (!(step > 0.0) || !(max >= min) || !std::isfinite(min) || !std::isfinite(max)) {
    throw std::invalid_argument("beta grid must satisfy min <= max and step > 0");
  }
  std::vector<double> out;
  const double n = std::floor((max - min) / step + 1e-9);
  if (n > 1e6) throw std::invalid_argument("beta grid has too many points");
  for (long i = 0; i <= static_cast<long>(n); ++i) {
    const double x = min + static_cast<double>(i) * step;
    out.push_back(std::abs(x) < 1e-12 * step ? 0.0 : x);
  }
  return out;
}

GridSpec parse_grid(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  if (parts.size() != 3) throw std::invalid_argument("beta grid must be min:max:step");
  GridSpec g;
  try {
    g.min = std::stod(parts[0]);
    g.max = std::stod(parts[1]);
    g.step = std::stod(parts[2]);
  } catch (const std::exception&) {
    throw std::invalid_argument("beta grid must be min:max:step with numeric entries");
  }
  g.points();
  return g;
}

void RunConfig::validate() const {
  static const std::vector<std::string> commands{"test", "power", "confset", "quantile",
                                                 "diag-opt"};
  if (std::find(commands.begin(), commands.end(), command) == commands.end()) {
    throw std::invalid_argument("unknown command '" + command + "'");
  }
  if (reps < 1) throw std::invalid_argument("reps must be at least 1");
  if (quantile_sims < 1) throw std::invalid_argument("quantile-sims must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
  if (threads < 1) throw std::invalid_argument("threads must be at least 1");
  if (lr_starts < 0) throw std::invalid_argument("lr-starts must be nonnegative");
  if (bandwidth < 0) throw std::invalid_argument("bandwidth must be nonnegative");
  beta_grid.points();
  if (tests.empty()) throw std::invalid_argument("no tests requested");
}

namespace {

struct HarnessTest {
  TestKind kind;
  bool infeasible = false;
};

HarnessTest resolve(const std::string& name) {
  if (name == "clr-infeasible") return {TestKind::kClr, true};
  return {parse_test(name), false};
}

TestConfig test_config(const RunConfig& cfg) {
  TestConfig tc;
  tc.lr.n_random_starts = cfg.lr_starts;
  tc.lr.include_beta0 = cfg.lr_include_beta0;
  return tc;
}

ConditionalQuantileSpec quantile_spec(const RunConfig& cfg, const RngStream& rng) {
  ConditionalQuantileSpec spec;
  spec.n_sims = cfg.quantile_sims;
  spec.alpha = cfg.alpha;
  spec.rng = rng;
  return spec;
}

RngStream base_stream(const RunConfig& cfg) { return RngStream{cfg.seed, 0}; }

}  // namespace

void check_test_names(const std::vector<std::string>& tests, int k) {
  for (const auto& name : tests) {
    const HarnessTest ht = resolve(name);
    if ((ht.kind == TestKind::kCil || ht.kind == TestKind::kCil0) && k < 2) {
      throw DataError("CIL requires k >= 2");
    }
    if (k == 1 && ht.kind != TestKind::kAr && ht.kind != TestKind::kLm &&
        ht.kind != TestKind::kWald) {
      throw DataError("with k = 1 only ar, lm and wald are available (got " + name + ")");
    }
  }
}

std::vector<PowerRow> power_curve(const RunConfig& cfg) {
  cfg.validate();
  check_test_names(cfg.tests, cfg.design.k);
  const AssembledDesign des = assemble(cfg.design);
  const double lambda = des.mu.squaredNorm();
  if (!(lambda > 0.0)) throw DataError("power: the design needs lambda > 0");
  const double root_lambda = std::sqrt(lambda);
  const std::vector<double> grid = cfg.beta_grid.points();
  const std::size_t n_grid = grid.size(), n_tests = cfg.tests.size();
  const std::size_t reps = static_cast<std::size_t>(cfg.reps);
  const double beta0 = cfg.design.beta0;

  auto geo = std::make_shared<const NullGeometry>(des.sigma0, beta0);
  const TestConfig base_cfg = test_config(cfg);
  // testers[g * n_tests + j]; feasible tests share one tester across the grid.
  std::vector<std::shared_ptr<const ConditionalTester>> testers(n_grid * n_tests);
  for (std::size_t j = 0; j < n_tests; ++j) {
    const HarnessTest ht = resolve(cfg.tests[j]);
    if (!ht.infeasible) {
      auto shared = std::make_shared<const ConditionalTester>(ht.kind, geo, base_cfg);
      for (std::size_t g = 0; g < n_grid; ++g) testers[g * n_tests + j] = shared;
      continue;
    }
    for (std::size_t g = 0; g < n_grid; ++g) {
      TestConfig tc = base_cfg;
      tc.lr.include_extra_betas = {beta0 + grid[g] / root_lambda};
      testers[g * n_tests + j] = std::make_shared<const ConditionalTester>(ht.kind, geo, tc);
    }
  }

  const Eigen::LLT<MatrixXd> chol(des.sigma0.matrix());
  const RngStream base = base_stream(cfg);
  std::vector<char> hits(n_grid * n_tests * reps, 0);
  parallel_for(n_grid * reps, cfg.threads, [&](std::size_t item) {
    const std::size_t g = item / reps, r = item % reps;
    const RngStream rep_stream = base.child(r);
    const MatrixXd r0 = draw_r0_one(chol, des.mu, grid[g] / root_lambda, rep_stream.child(0));
    const auto [s, t] = geo->st_from_r0(r0);
    const ConditionalQuantileSpec spec = quantile_spec(cfg, rep_stream.child(1));
    for (std::size_t j = 0; j < n_tests; ++j) {
      const TestReport rep = testers[g * n_tests + j]->run(s, t, spec);
      hits[(g * n_tests + j) * reps + r] = rep.reject ? 1 : 0;
    }
  });

  std::vector<PowerRow> rows;
  for (std::size_t g = 0; g < n_grid; ++g) {
    for (std::size_t j = 0; j < n_tests; ++j) {
      long count = 0;
      for (std::size_t r = 0; r < reps; ++r) count += hits[(g * n_tests + j) * reps + r];
      PowerRow row;
      row.design = design_name(cfg.design.kind);
      row.k = cfg.design.k;
      row.lambda_per_k = cfg.design.lambda_per_k;
      row.rho = cfg.design.rho;
      row.beta_rescaled = grid[g];
      row.test = cfg.tests[j];
      row.reject_rate = static_cast<double>(count) / static_cast<double>(reps);
      row.mc_se = std::sqrt(row.reject_rate * (1.0 - row.reject_rate) / static_cast<double>(reps));
      row.reps = cfg.reps;
      row.seed = cfg.seed;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void write_power_csv(std::ostream& out, const std::vector<PowerRow>& rows) {
  CsvWriter w(out);
  for (const char* h : {"design", "k", "lambda_per_k", "rho", "beta_rescaled", "test",
                        "reject_rate", "mc_se", "reps", "seed"}) {
    w.field(std::string(h));
  }
  w.end_row();
  for (const auto& r : rows) {
    w.field(r.design).field(r.k).field(r.lambda_per_k);
    if (r.design == "homoskedastic") {
      w.field(r.rho);
    } else {
      w.field(std::string());
    }
    w.field(r.beta_rescaled).field(r.test).field(r.reject_rate).field(r.mc_se).field(r.reps);
    w.field(r.seed);
    w.end_row();
  }
}

std::string start_scheme_name(int scheme) {
  static const char* names[kStartSchemes] = {"(1,No)", "(0,Yes)", "(51,No)", "(50,Yes)"};
  if (scheme < 0 || scheme >= kStartSchemes) throw std::out_of_range("start scheme");
  return names[scheme];
}

std::array<double, kStartSchemes> start_scheme_lr(const NullGeometry& geo, const VectorXd& s,
                                                  const VectorXd& t, const LROptConfig& base,
                                                  const RngStream& rng) {
  constexpr int kMany = 51;
  const double half_pi = 0.5 * M_PI;
  StreamEngine eng(rng);
  std::vector<double> starts;
  starts.reserve(kMany + 2);
  starts.push_back(eng.uniform(-half_pi, half_pi));
  for (int i = 0; i < kMany; ++i) starts.push_back(eng.uniform(-half_pi, half_pi));
  starts.push_back(std::atan(geo.beta0()));

  const int k = geo.k();
  const VectorXd u = geo.u(s, t, true);
  const VectorXd u_top = u.head(k), u_bot = u.tail(k);
  const std::vector<LocalMax> m = lr_local_maxima(geo, u_top, u_bot, starts, base);
  auto best = [&](int from, int to) {
    double b = -std::numeric_limits<double>::infinity();
    for (int i = from; i < to; ++i) {
      if (std::isfinite(m[i].fx)) b = std::max(b, m[i].fx);
    }
    return b;
  };
  const double tt = t.squaredNorm();
  const double beta0_start = m[kMany + 1].fx;
  std::array<double, kStartSchemes> out{};
  out[0] = m[0].fx - tt;
  out[1] = beta0_start - tt;
  out[2] = best(1, kMany + 1) - tt;
  out[3] = std::max(best(1, kMany), beta0_start) - tt;
  return out;
}

StartSchemeTables start_scheme_tables(const RunConfig& cfg) {
  cfg.validate();
  const AssembledDesign des = assemble(cfg.design);
  const NullGeometry geo(des.sigma0, cfg.design.beta0);
  const Eigen::LLT<MatrixXd> chol(des.sigma0.matrix());
  LROptConfig lr_cfg;
  const RngStream base = base_stream(cfg);
  const std::size_t reps = static_cast<std::size_t>(cfg.reps);
  std::vector<std::array<double, kStartSchemes>> lr(reps);
  parallel_for(reps, cfg.threads, [&](std::size_t r) {
    const RngStream rep_stream = base.child(r);
    const MatrixXd r0 = draw_r0_one(chol, des.mu, 0.0, rep_stream.child(0));
    const auto [s, t] = geo.st_from_r0(r0);
    lr[r] = start_scheme_lr(geo, s, t, lr_cfg, rep_stream.child(1));
  });

  StartSchemeTables out;
  out.draws = cfg.reps;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int row = 0; row < kStartSchemes; ++row) {
    for (int col = 0; col < kStartSchemes; ++col) {
      if (row == col) {
        out.percent[row][col] = nan;
        out.factor[row][col] = nan;
        continue;
      }
      long beats = 0, with_base = 0;
      double sum = 0.0;
      for (std::size_t r = 0; r < reps; ++r) {
        const double a = lr[r][row], b = lr[r][col];
        if (!(b - a > 1e-3 * std::abs(a))) continue;
        ++beats;
        if (std::abs(a) > 0.0) {
          ++with_base;
          sum += 100.0 * (b - a) / std::abs(a);
        }
      }
      out.percent[row][col] = 100.0 * static_cast<double>(beats) / static_cast<double>(reps);
      out.factor[row][col] = with_base > 0 ? sum / static_cast<double>(with_base) : nan;
    }
  }
  return out;
}

void write_start_scheme_csv(std::ostream& out, const StartSchemeTables& tables) {
  CsvWriter w(out);
  w.field(std::string("table")).field(std::string("row")).field(std::string("col"));
  w.field(std::string("value")).field(std::string("draws"));
  w.end_row();
  for (int which = 0; which < 2; ++which) {
    const auto& tab = which == 0 ? tables.percent : tables.factor;
    for (int row = 0; row < kStartSchemes; ++row) {
      for (int col = 0; col < kStartSchemes; ++col) {
        if (row == col) continue;
        w.field(std::string(which == 0 ? "percentage" : "factor"));
        w.field(start_scheme_name(row)).field(start_scheme_name(col));
        if (std::isnan(tab[row][col])) {
          w.field(std::string());
        } else {
          w.field(tab[row][col]);
        }
        w.field(tables.draws);
        w.end_row();
      }
    }
  }
}

DataProblem load_data_problem(const RunConfig& cfg) {
  if (cfg.in_path.empty()) throw std::invalid_argument("--in is required for this command");
  const CsvTable table = read_numeric_csv_file(cfg.in_path);
  const int c1 = table.column("y1"), c2 = table.column("y2");
  if (c1 < 0 || c2 < 0) throw DataError(cfg.in_path + ": header must contain y1 and y2");
  std::vector<int> xs, zs;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    const std::string& h = table.header[j];
    if (h.size() > 1 && h[0] == 'x') xs.push_back(static_cast<int>(j));
    else if (h.size() > 1 && h[0] == 'z') zs.push_back(static_cast<int>(j));
    else if (h != "y1" && h != "y2") throw DataError(cfg.in_path + ": unexpected column '" + h + "'");
  }
  if (zs.empty()) throw DataError(cfg.in_path + ": no instrument columns z1..zk");
  const Eigen::Index n = static_cast<Eigen::Index>(table.rows.size());
  IVDataset data;
  data.y1.resize(n);
  data.y2.resize(n);
  data.X.resize(n, static_cast<Eigen::Index>(xs.size()));
  data.Ztilde.resize(n, static_cast<Eigen::Index>(zs.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[i];
    data.y1(i) = row[c1];
    data.y2(i) = row[c2];
    for (std::size_t j = 0; j < xs.size(); ++j) data.X(i, j) = row[xs[j]];
    for (std::size_t j = 0; j < zs.size(); ++j) data.Ztilde(i, j) = row[zs[j]];
  }
  data.validate();
  const auto [z, y] = partial_out(data);
  const int k = static_cast<int>(zs.size());
  std::optional<SymPD> sigma;
  if (!cfg.sigma_file.empty()) {
    const MatrixXd m = read_matrix_file(cfg.sigma_file);
    if (m.rows() != 2 * k || m.cols() != 2 * k) {
      throw DataError(cfg.sigma_file + ": Sigma must be " + std::to_string(2 * k) + " x " +
                      std::to_string(2 * k));
    }
    sigma.emplace(m);
  } else {
    sigma.emplace(estimate_sigma_plugin(z, y, cfg.bandwidth, data.X));
  }
  return DataProblem{reduce(z, y, *sigma), static_cast<std::size_t>(n)};
}

namespace {

void reject_infeasible(const std::vector<std::string>& tests) {
  for (const auto& t : tests) {
    if (t == "clr-infeasible") {
      throw std::invalid_argument("clr-infeasible needs the true beta and only runs in power");
    }
  }
}

}  // namespace

std::vector<DataTestRow> data_tests(const RunConfig& cfg, const ReducedForm& rf) {
  cfg.validate();
  reject_infeasible(cfg.tests);
  check_test_names(cfg.tests, rf.k());
  const Hypothesis hyp(cfg.beta0, cfg.alpha);
  const TestConfig tc = test_config(cfg);
  const ConditionalQuantileSpec spec = quantile_spec(cfg, base_stream(cfg));
  std::vector<DataTestRow> rows(cfg.tests.size());
  parallel_for(cfg.tests.size(), cfg.threads, [&](std::size_t j) {
    rows[j] = DataTestRow{cfg.beta0, run_test(cfg.tests[j], rf, hyp, spec, tc)};
  });
  return rows;
}

void write_test_csv(std::ostream& out, const std::vector<DataTestRow>& rows) {
  CsvWriter w(out);
  for (const char* h : {"test", "beta0", "statistic", "critical_value", "reject", "n_sims", "seed"}) {
    w.field(std::string(h));
  }
  w.end_row();
  for (const auto& r : rows) {
    w.field(r.report.test).field(r.beta0).field(r.report.statistic);
    w.field(r.report.critical_value).field(r.report.reject).field(r.report.n_sims);
    w.field(r.report.seed);
    w.end_row();
  }
}

std::vector<NamedConfidenceSet> data_confidence_sets(const RunConfig& cfg,
                                                     const ReducedForm& rf) {
  cfg.validate();
  reject_infeasible(cfg.tests);
  check_test_names(cfg.tests, rf.k());
  const std::vector<double> grid = cfg.beta_grid.points();
  const TestConfig tc = test_config(cfg);
  const ConditionalQuantileSpec spec = quantile_spec(cfg, base_stream(cfg));
  std::vector<NamedConfidenceSet> out;
  for (const auto& name : cfg.tests) {
    out.push_back(NamedConfidenceSet{name, confidence_set(rf, grid, name, spec, tc, cfg.threads)});
  }
  return out;
}

void write_confset_csv(std::ostream& out, const std::vector<NamedConfidenceSet>& sets) {
  CsvWriter w(out);
  for (const char* h : {"test", "beta0", "statistic", "critical_value", "reject"}) {
    w.field(std::string(h));
  }
  w.end_row();
  for (const auto& ns : sets) {
    for (std::size_t i = 0; i < ns.set.grid.size(); ++i) {
      const TestReport& r = ns.set.reports[i];
      w.field(ns.test).field(ns.set.grid[i]).field(r.statistic).field(r.critical_value);
      w.field(r.reject);
      w.end_row();
    }
  }
  w.blank_row();
  for (const char* h : {"test", "interval", "lower", "upper", "note"}) w.field(std::string(h));
  w.end_row();
  for (const auto& ns : sets) {
    const auto& iv = ns.set.intervals;
    if (iv.empty()) {
      w.field(ns.test).field(0).field(std::string()).field(std::string());
      w.field(std::string("empty set on grid"));
      w.end_row();
      continue;
    }
    for (std::size_t i = 0; i < iv.size(); ++i) {
      std::string note;
      const bool below = i == 0 && ns.set.open_below;
      const bool above = i + 1 == iv.size() && ns.set.open_above;
      if (below && above) note = "set may extend beyond grid on both sides";
      else if (below) note = "set may extend beyond grid below";
      else if (above) note = "set may extend beyond grid above";
      w.field(ns.test).field(static_cast<int>(i + 1)).field(iv[i].lower).field(iv[i].upper);
      w.field(note);
      w.end_row();
    }
  }
}

std::vector<QuantileRow> quantiles(const RunConfig& cfg) {
  cfg.validate();
  reject_infeasible(cfg.tests);
  std::optional<ReducedForm> rf;
  double beta0 = cfg.beta0;
  if (!cfg.in_path.empty()) {
    rf.emplace(load_data_problem(cfg).rf);
  } else {
    const AssembledDesign des = assemble(cfg.design);
    beta0 = cfg.design.beta0;
    const Eigen::LLT<MatrixXd> chol(des.sigma0.matrix());
    const MatrixXd r0 = draw_r0_one(chol, des.mu, 0.0, base_stream(cfg).child(0).child(0));
    rf.emplace(unrotate(NullRotated{r0, des.sigma0, beta0}));
  }
  check_test_names(cfg.tests, rf->k());
  const Hypothesis hyp(beta0, cfg.alpha);
  auto geo = std::make_shared<const NullGeometry>(NullGeometry::from_reduced_form(*rf, hyp));
  const auto [s, t] = geo->st_from_r0(rf->R() * hyp.B0());
  const TestConfig tc = test_config(cfg);
  const ConditionalQuantileSpec spec = quantile_spec(cfg, base_stream(cfg));
  std::vector<QuantileRow> rows(cfg.tests.size());
  parallel_for(cfg.tests.size(), cfg.threads, [&](std::size_t j) {
    const ConditionalTester tester(parse_test(cfg.tests[j]), geo, tc);
    QuantileRow row;
    row.test = cfg.tests[j];
    row.beta0 = beta0;
    row.t_norm_sq = t.squaredNorm();
    row.critical_value = tester.critical_value(t, spec);
    const TestKind kind = tester.kind();
    const bool exact = kind == TestKind::kWald || kind == TestKind::kAr || kind == TestKind::kLm;
    row.n_sims = exact ? 0 : cfg.quantile_sims;
    row.seed = cfg.seed;
    rows[j] = row;
  });
  return rows;
}

void write_quantile_csv(std::ostream& out, const std::vector<QuantileRow>& rows) {
  CsvWriter w(out);
  for (const char* h : {"test", "beta0", "t_norm_sq", "critical_value", "n_sims", "seed"}) {
    w.field(std::string(h));
  }
  w.end_row();
  for (const auto& r : rows) {
    w.field(r.test).field(r.beta0).field(r.t_norm_sq).field(r.critical_value).field(r.n_sims);
    w.field(r.seed);
    w.end_row();
  }
}

void run_command(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  if (cfg.command == "power") {
    write_power_csv(out, power_curve(cfg));
  } else if (cfg.command == "diag-opt") {
    write_start_scheme_csv(out, start_scheme_tables(cfg));
  } else if (cfg.command == "test") {
    const DataProblem p = load_data_problem(cfg);
    write_test_csv(out, data_tests(cfg, p.rf));
  } else if (cfg.command == "confset") {
    const DataProblem p = load_data_problem(cfg);
    write_confset_csv(out, data_confidence_sets(cfg, p.rf));
  } else if (cfg.command == "quantile") {
    write_quantile_csv(out, quantiles(cfg));
  }
}

}  // namespace ivinv
