// Batch front end: ivinv_cli --command {test|power|confset|quantile|diag-opt} ...
// Exit codes: 0 ok, 1 usage, 2 data error, 3 numerical failure.

#include "ivinv/csv_io.hpp"
#include "ivinv/harness.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw std::invalid_argument("expected true or false, got '" + s + "'");
}

int run(int argc, char** argv) {
  using namespace ivinv;
  RunConfig cfg;
  CLI::App app{"Weak-instrument-robust tests, power curves and confidence sets"};
  app.set_config("--config", "", "flat key=value file mirroring the long flags; flags win");

  std::string design = "homoskedastic", tests = "ar,lm,cqlr,cil", grid = "-6:6:1";
  std::string include_beta0 = "true", mu_shape = "default";
  double c22 = std::numeric_limits<double>::quiet_NaN();
  app.add_option("--command", cfg.command, "test, power, confset, quantile or diag-opt")
      ->required();
  app.add_option("--design", design, "homoskedastic, ns or custom");
  app.add_option("--k", cfg.design.k, "number of instruments");
  app.add_option("--lambda-per-k", cfg.design.lambda_per_k, "instrument strength per instrument");
  app.add_option("--rho", cfg.design.rho, "structural error correlation (homoskedastic)");
  app.add_option("--c11", cfg.design.c11, "NS design Sigma11 scale");
  app.add_option("--c12", cfg.design.c12, "NS design Sigma12 scale");
  app.add_option("--c22", c22, "NS design Sigma22 scale (default c12^2 + c12^-3)");
  app.add_option("--mu-shape", mu_shape, "default, e1 or ones");
  app.add_option("--alpha", cfg.alpha, "nominal level");
  app.add_option("--reps", cfg.reps, "Monte Carlo replications");
  app.add_option("--quantile-sims", cfg.quantile_sims, "draws per conditional critical value");
  app.add_option("--seed", cfg.seed, "master seed");
  app.add_option("--beta-grid", grid, "min:max:step (beta*sqrt(lambda) for power, beta0 for confset)");
  app.add_option("--beta0", cfg.beta0, "null value for test, quantile and the design");
  app.add_option("--tests", tests, "comma list of ar,lm,wald,cqlr,clr,clr-naive,clr-infeasible,cil,cil0,lc");
  app.add_option("--lr-starts", cfg.lr_starts, "random angle starts for the LR maximization");
  app.add_option("--lr-include-beta0", include_beta0, "true or false");
  app.add_option("--bandwidth", cfg.bandwidth, "Bartlett bandwidth for the plug-in Sigma");
  app.add_option("--sigma-file", cfg.sigma_file,
                 "2k x 2k Sigma for test data, or Sigma0 for the custom design");
  app.add_option("--in", cfg.in_path, "CSV with y1, y2, x1..xp, z1..zk");
  app.add_option("--out", cfg.out_path, "output CSV (stdout when absent)");
  app.add_option("--threads", cfg.threads, "worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    cfg.design.kind = parse_design(design);
    cfg.design.c22 = c22;
    cfg.design.mu_shape = parse_mu_shape(mu_shape);
    cfg.design.beta0 = cfg.beta0;
    cfg.tests = split_commas(tests);
    cfg.beta_grid = parse_grid(grid);
    cfg.lr_include_beta0 = parse_bool(include_beta0);
    if (cfg.design.kind == DesignKind::kCustom && cfg.command != "test" &&
        cfg.command != "confset") {
      if (cfg.sigma_file.empty()) throw std::invalid_argument("custom design needs --sigma-file");
      const MatrixXd s = read_matrix_file(cfg.sigma_file);
      const int k = cfg.design.k;
      if (s.rows() != 2 * k || s.cols() != 2 * k) {
        throw DataError("custom Sigma0 must be " + std::to_string(2 * k) + " x " +
                        std::to_string(2 * k));
      }
      cfg.design.custom_blocks = CustomBlocks{s.topLeftCorner(k, k), s.topRightCorner(k, k),
                                              s.bottomRightCorner(k, k)};
    }
    cfg.validate();
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  }

  try {
    std::ostringstream buffer;
    run_command(cfg, buffer);
    if (cfg.out_path.empty()) {
      std::cout << buffer.str();
    } else {
      std::ofstream out(cfg.out_path, std::ios::binary);
      if (!out) throw DataError("cannot write '" + cfg.out_path + "'");
      out << buffer.str();
      if (!out) throw DataError("write failed for '" + cfg.out_path + "'");
    }
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
