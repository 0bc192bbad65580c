#include "ivinv/designs.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ivinv {

DesignKind parse_design(const std::string& name) {
  if (name == "homoskedastic") return DesignKind::kHomoskedastic;
  if (name == "ns") return DesignKind::kNs;
  if (name == "custom") return DesignKind::kCustom;
  throw std::invalid_argument("unknown design '" + name + "'");
}

std::string design_name(DesignKind kind) {
  switch (kind) {
    case DesignKind::kHomoskedastic: return "homoskedastic";
    case DesignKind::kNs: return "ns";
    case DesignKind::kCustom: return "custom";
  }
  return "?";
}

MuShape parse_mu_shape(const std::string& name) {
  if (name == "e1") return MuShape::kE1;
  if (name == "ones") return MuShape::kOnes;
  if (name == "default") return MuShape::kDefault;
  throw std::invalid_argument("unknown mu shape '" + name + "'");
}

void DesignSpec::validate() const {
  if (k < 1) throw std::invalid_argument("design: k must be positive");
  if (!(lambda_per_k >= 0.0)) throw std::invalid_argument("design: lambda_per_k must be >= 0");
  if (kind == DesignKind::kHomoskedastic && !(rho > -1.0 && rho < 1.0)) {
    throw std::invalid_argument("design: rho must lie in (-1, 1)");
  }
  if (kind == DesignKind::kCustom && !custom_blocks) {
    throw std::invalid_argument("design: custom design needs Sigma blocks");
  }
}

MatrixXd anti_diagonal(int k) {
  MatrixXd j = MatrixXd::Zero(k, k);
  for (int i = 0; i < k; ++i) j(i, k - 1 - i) = 1.0;
  return j;
}

namespace {

SymPD checked(const MatrixXd& s) {
  const MatrixXd sym = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues()(0);
  if (!(lo > 0.0)) {
    std::ostringstream msg;
    msg << "design: Sigma0 is not positive definite (smallest eigenvalue " << lo << ")";
    throw DataError(msg.str());
  }
  return SymPD(sym);
}

}  // namespace

AssembledDesign assemble(const DesignSpec& spec) {
  spec.validate();
  const int k = spec.k;
  const MatrixXd id = MatrixXd::Identity(k, k);
  MatrixXd sigma(2 * k, 2 * k);
  switch (spec.kind) {
    case DesignKind::kHomoskedastic: {
      Matrix2d psi;
      psi << 1.0, spec.rho, spec.rho, 1.0;
      sigma = kron(psi, id);
      break;
    }
    case DesignKind::kNs: {
      const double c22 =
          std::isnan(spec.c22) ? spec.c12 * spec.c12 + std::pow(spec.c12, -3.0) : spec.c22;
      const MatrixXd j = anti_diagonal(k);
      sigma.topLeftCorner(k, k) = spec.c11 * id;
      sigma.topRightCorner(k, k) = spec.c12 * j;
      sigma.bottomLeftCorner(k, k) = spec.c12 * j;
      sigma.bottomRightCorner(k, k) = c22 * id;
      break;
    }
    case DesignKind::kCustom: {
      const CustomBlocks& b = *spec.custom_blocks;
      if (b.s11.rows() != k || b.s11.cols() != k || b.s12.rows() != k || b.s12.cols() != k ||
          b.s22.rows() != k || b.s22.cols() != k) {
        throw DataError("design: custom blocks must be k x k");
      }
      sigma.topLeftCorner(k, k) = b.s11;
      sigma.topRightCorner(k, k) = b.s12;
      sigma.bottomLeftCorner(k, k) = b.s12.transpose();
      sigma.bottomRightCorner(k, k) = b.s22;
      break;
    }
  }
  MuShape shape = spec.mu_shape;
  if (shape == MuShape::kDefault) {
    shape = spec.kind == DesignKind::kHomoskedastic ? MuShape::kOnes : MuShape::kE1;
  }
  const double root_lambda = std::sqrt(spec.lambda());
  VectorXd mu = VectorXd::Zero(k);
  if (shape == MuShape::kOnes) {
    mu.setConstant(root_lambda / std::sqrt(static_cast<double>(k)));
  } else {
    mu(0) = root_lambda;
  }
  return AssembledDesign{checked(sigma), mu};
}

MatrixXd draw_r0_one(const Eigen::LLT<MatrixXd>& chol, const VectorXd& mu, double delta,
                     const RngStream& rng) {
  const Eigen::Index k = mu.size();
  VectorXd z(2 * k);
  StreamEngine eng(rng);
  eng.fill_normal(z);
  const VectorXd v = chol.matrixL() * z;
  MatrixXd r0(k, 2);
  r0.col(0) = delta * mu + v.head(k);
  r0.col(1) = mu + v.tail(k);
  return r0;
}

DrawBatch draw_r0(const SymPD& sigma0, const VectorXd& mu, double delta, int n_draws,
                  const RngStream& rng, double beta0, int threads) {
  if (sigma0.dim() != 2 * mu.size()) throw DataError("draw_r0: Sigma0 must be 2k x 2k");
  if (n_draws < 0) throw std::invalid_argument("draw_r0: negative draw count");
  Eigen::LLT<MatrixXd> chol(sigma0.matrix());
  if (chol.info() != Eigen::Success) throw NumericalError("draw_r0: Cholesky failed");
  DrawBatch out{std::vector<MatrixXd>(n_draws), AlternativePoint{}, sigma0};
  out.truth.beta = beta0 + delta;
  out.truth.delta = delta;
  out.truth.mu = mu;
  out.truth.lambda = mu.squaredNorm();
  parallel_for(static_cast<std::size_t>(n_draws), threads, [&](std::size_t i) {
    out.draws[i] = draw_r0_one(chol, mu, delta, rng.child(i));
  });
  return out;
}

}  // namespace ivinv
