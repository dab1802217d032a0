#pragma once

#include <Eigen/Dense>

#include "messy/basis.hpp"

namespace messy {

struct LagrangeSolve {
  Eigen::VectorXd lambda;
  Eigen::MatrixXd hessian;
  double cond = 1.0;
  Eigen::VectorXd residual_g;
  bool used_fallback = false;  ///< Cholesky failed, pivoted QR was used
};

/// L[i][k] = (1/N) sum_samples sum_j dH_i/dx_j * dH_k/dx_j.
Eigen::MatrixXd assemble_hessian(const FeatureTables& f);

/// b[i] = (1/N) sum_samples laplacian(H_i).
Eigen::VectorXd laplacian_moment(const FeatureTables& f);

/// 2-norm condition number of a symmetric matrix.
double condition_number(const Eigen::MatrixXd& m);

/// Solves L lambda = -b. Throws SingularHessianError when neither Cholesky
/// nor pivoted QR yields a full-rank solve.
LagrangeSolve solve_lambda(const Eigen::MatrixXd& l, const Eigen::VectorXd& b);

/// g = L lambda + b on the given features.
Eigen::VectorXd relaxation_rate(const FeatureTables& f, const Eigen::VectorXd& lambda);

/// features -> assemble -> solve on one sample set.
LagrangeSolve fit_multipliers(const BasisSet& basis, const SampleSet& samples);

}  // namespace messy
