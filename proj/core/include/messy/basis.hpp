#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "messy/expr.hpp"
#include "messy/sample_set.hpp"

namespace messy {

/// Basis functions H with exact symbolic derivatives and the lower-triangular
/// map T from raw to orthonormalized bases (H_perp = T * H).
struct BasisSet {
  std::vector<Expr> exprs;
  std::vector<std::vector<Expr>> grads;  // grads[i][j] = dH_i / dx_j
  std::vector<Expr> laplacians;
  Eigen::MatrixXd transform;
  int dim = 1;

  std::size_t size() const { return exprs.size(); }
  bool orthonormalized() const;
};

/// Per-sample feature tables. grad_h[j] holds dH/dx_j as an N x N_b matrix.
struct FeatureTables {
  Eigen::MatrixXd h;
  std::vector<Eigen::MatrixXd> grad_h;
  Eigen::MatrixXd lap_h;

  std::size_t samples() const { return static_cast<std::size_t>(h.rows()); }
  std::size_t bases() const { return static_cast<std::size_t>(h.cols()); }
};

BasisSet build_basis(std::vector<Expr> exprs, int dim);

/// Tables with the basis transform applied. Throws EvaluationError naming the
/// sample and basis when any entry is non-finite.
FeatureTables features(const BasisSet& basis, const SampleSet& samples);
FeatureTables features(const BasisSet& basis, const Eigen::MatrixXd& points);

/// Modified Gram-Schmidt on the basis gradients under
/// <phi, psi> = sum_j <d_j phi * d_j psi>. Throws LinearDependenceError when a
/// residual gradient norm falls below 1e-12 of its original norm.
BasisSet orthonormalize(const BasisSet& basis, const SampleSet& samples);

/// Same basis with the transform reset to the identity.
BasisSet raw_basis(const BasisSet& basis);

/// Multipliers of the transformed bases mapped onto the raw bases:
/// lambda . (T H) = (T^T lambda) . H.
Eigen::VectorXd raw_coefficients(const BasisSet& basis, const Eigen::VectorXd& lambda);

}  // namespace messy
