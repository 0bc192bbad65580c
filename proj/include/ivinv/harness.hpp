#pragma once

// Batch commands behind the CLI: power curves over designs, the optimizer
// start-scheme tables, tests, confidence sets and critical values on data.
// Every command returns plain rows; the write_* functions emit CSV.

#include "ivinv/conditional.hpp"
#include "ivinv/designs.hpp"

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ivinv {

struct GridSpec {
  double min = -6.0;
  double max = 6.0;
  double step = 1.0;

  /// min, min + step, ... up to max (inclusive within step * 1e-9).
  std::vector<double> points() const;
};

/// Parses "min:max:step".
GridSpec parse_grid(const std::string& text);

struct RunConfig {
  std::string command = "power";
  DesignSpec design;
  std::vector<std::string> tests{"ar", "lm", "cqlr", "cil"};
  double alpha = 0.05;
  int reps = 1000;
  int quantile_sims = 1000;
  std::uint64_t seed = 20240601;
  /// Rescaled units beta * lambda^{1/2} for power; raw beta0 for confset.
  GridSpec beta_grid;
  int threads = 1;
  int lr_starts = 50;
  bool lr_include_beta0 = true;
  int bandwidth = 0;
  double beta0 = 0.0;
  std::string in_path;
  std::string sigma_file;
  std::string out_path;

  void validate() const;
};

/// Harness-level tests: the TestKind names plus clr-infeasible (CLR with the
/// true beta added to the starting points).
void check_test_names(const std::vector<std::string>& tests, int k);

struct PowerRow {
  std::string design;
  int k = 0;
  double lambda_per_k = 0.0;
  double rho = 0.0;
  double beta_rescaled = 0.0;
  std::string test;
  double reject_rate = 0.0;
  double mc_se = 0.0;
  int reps = 0;
  std::uint64_t seed = 0;
};

/// Replication r draws R0 from stream (seed).child(r).child(0) at every grid
/// point, and its critical values from (seed).child(r).child(1). Rows are
/// ordered by grid point, then by the order of cfg.tests.
std::vector<PowerRow> power_curve(const RunConfig& cfg);
void write_power_csv(std::ostream& out, const std::vector<PowerRow>& rows);

inline constexpr int kStartSchemes = 4;
/// (1,No), (0,Yes), (51,No), (50,Yes): random angle starts and whether beta0
/// is a start. The 50 random starts of the last scheme are the first 50 of
/// the 51; the single start of the first scheme is drawn separately.
std::string start_scheme_name(int scheme);

struct StartSchemeTables {
  /// percent[row][col]: share of draws (in %) where the column scheme's LR
  /// exceeds the row scheme's by more than 0.1% relative. NaN on the diagonal.
  std::array<std::array<double, kStartSchemes>, kStartSchemes> percent{};
  /// Mean relative improvement (in %) over those draws; NaN when there are none.
  std::array<std::array<double, kStartSchemes>, kStartSchemes> factor{};
  int draws = 0;
};

/// LR of each scheme for one null draw of (S, T).
std::array<double, kStartSchemes> start_scheme_lr(const NullGeometry& geo, const VectorXd& s,
                                                  const VectorXd& t, const LROptConfig& base,
                                                  const RngStream& rng);

StartSchemeTables start_scheme_tables(const RunConfig& cfg);
void write_start_scheme_csv(std::ostream& out, const StartSchemeTables& tables);

struct DataProblem {
  ReducedForm rf;
  std::size_t n = 0;
};

/// Reads y1, y2, x*, z* columns, partials out X and estimates Sigma (or
/// reads cfg.sigma_file).
DataProblem load_data_problem(const RunConfig& cfg);

struct DataTestRow {
  double beta0 = 0.0;
  TestReport report;
};

std::vector<DataTestRow> data_tests(const RunConfig& cfg, const ReducedForm& rf);
void write_test_csv(std::ostream& out, const std::vector<DataTestRow>& rows);

struct NamedConfidenceSet {
  std::string test;
  ConfidenceSet set;
};

std::vector<NamedConfidenceSet> data_confidence_sets(const RunConfig& cfg,
                                                     const ReducedForm& rf);
void write_confset_csv(std::ostream& out, const std::vector<NamedConfidenceSet>& sets);

struct QuantileRow {
  std::string test;
  double beta0 = 0.0;
  double t_norm_sq = 0.0;
  double critical_value = 0.0;
  int n_sims = 0;
  std::uint64_t seed = 0;
};

/// Critical values at the observed T for each test. Without an input file,
/// the observed data is one null draw of the configured design.
std::vector<QuantileRow> quantiles(const RunConfig& cfg);
void write_quantile_csv(std::ostream& out, const std::vector<QuantileRow>& rows);

/// Dispatches cfg.command and writes CSV to `out`.
void run_command(const RunConfig& cfg, std::ostream& out);

}  // namespace ivinv
