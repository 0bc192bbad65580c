#pragma once

// Simulation designs: the variance of vec(R0) under the null and the
// instrument-strength vector mu, plus draws of R0 ~ N(mu (Delta, 1)', Sigma0).

#include "ivinv/model.hpp"
#include "ivinv/numerics.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ivinv {

enum class DesignKind { kHomoskedastic, kNs, kCustom };
enum class MuShape { kDefault, kE1, kOnes };

DesignKind parse_design(const std::string& name);
std::string design_name(DesignKind kind);
MuShape parse_mu_shape(const std::string& name);

struct CustomBlocks {
  MatrixXd s11;
  MatrixXd s12;
  MatrixXd s22;
};

struct DesignSpec {
  DesignKind kind = DesignKind::kHomoskedastic;
  int k = 5;
  double lambda_per_k = 2.0;
  /// Structural error correlation, homoskedastic design only.
  double rho = 0.9;
  double c11 = 1.0;
  double c12 = 100.0;
  /// NaN means c12^2 + c12^-3.
  double c22 = std::numeric_limits<double>::quiet_NaN();
  /// kDefault: ones for homoskedastic, e1 otherwise.
  MuShape mu_shape = MuShape::kDefault;
  double beta0 = 0.0;
  std::optional<CustomBlocks> custom_blocks;

  /// lambda = k * lambda_per_k = ||mu||^2.
  double lambda() const { return k * lambda_per_k; }
  void validate() const;
};

struct AssembledDesign {
  SymPD sigma0;
  VectorXd mu;
};

/// k x k matrix with ones on the anti-diagonal.
MatrixXd anti_diagonal(int k);

/// Throws DataError naming the smallest eigenvalue when Sigma0 is not PD.
AssembledDesign assemble(const DesignSpec& spec);

struct DrawBatch {
  std::vector<MatrixXd> draws;
  AlternativePoint truth;
  SymPD sigma0;
};

/// Draw i uses the stream rng.child(i), so batches are reproducible draw by draw.
DrawBatch draw_r0(const SymPD& sigma0, const VectorXd& mu, double delta, int n_draws,
                  const RngStream& rng, double beta0 = 0.0, int threads = 1);

/// One draw of R0 from a precomputed Cholesky factor of Sigma0.
MatrixXd draw_r0_one(const Eigen::LLT<MatrixXd>& chol, const VectorXd& mu, double delta,
                     const RngStream& rng);

}  // namespace ivinv
