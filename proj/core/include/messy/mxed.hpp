#pragma once

#include <vector>

#include <Eigen/Dense>

#include "messy/density.hpp"
#include "messy/expr.hpp"

namespace messy {

struct NewtonOptions {
  double tol = 1e-6;          ///< on the infinity norm of g
  int max_iters = 100;
  double min_step = 0x1p-20;  ///< step-halving floor
  double min_ess_fraction = 0.01;
};

struct NewtonState {
  Eigen::VectorXd lambda;
  Eigen::VectorXd g;
  Eigen::MatrixXd hessian;
  int iterations = 0;
  bool converged = false;
  double tol = 0.0;
};

/// Newton on the dual  F(lambda) = log sum_k exp(b_k + lambda . R_k) - lambda . mu
/// over a fixed weighted point set. g = <R>_w - mu, Hessian = Cov_w(R).
/// Throws ConvergenceError when max_iters or the step floor is hit.
NewtonState dual_newton(const Eigen::MatrixXd& r, const Eigen::VectorXd& log_base,
                        const Eigen::VectorXd& mu, const NewtonOptions& opt,
                        const Eigen::VectorXd& warm = {});

struct MxedResult {
  NewtonState state;
  Eigen::VectorXd weights;  ///< self-normalized, strictly positive
  double ess = 0.0;
};

/// Tilts equally weighted prior samples by exp(lambda . R) until the weighted
/// moments of R equal mu. Throws DegeneracyError when the effective sample
/// size drops below opt.min_ess_fraction of the sample count.
MxedResult mxed_correct(const Eigen::MatrixXd& prior_samples, const Eigen::VectorXd& mu,
                        const std::vector<Expr>& r, const NewtonOptions& opt = {});

/// Simpson-weighted grid for the quadrature oracle.
struct Grid {
  Eigen::MatrixXd points;
  Eigen::VectorXd weights;
};

Grid simpson_grid(const Box& box, int points_per_dim);

/// [mean - 8 sd, mean + 8 sd] with 4001 points (1D) or 401^2 points (2D).
Grid default_oracle_grid(const Eigen::VectorXd& mean, const Eigen::VectorXd& sd);

/// Maximum-entropy multipliers for moments mu of R by Newton with grid
/// quadrature, cold-started at lambda = 0. f is proportional to exp(lambda . R).
NewtonState med_newton_oracle(const Eigen::VectorXd& mu, const std::vector<Expr>& r,
                              const Grid& grid, const NewtonOptions& opt = {});

/// prior(x) exp(lambda . R(x)) folded into every level: each level exponent
/// gains lambda . R, is renormalized, and masses become m_l Z'_l / Z_l
/// rescaled to sum to one.
MessyDensity apply_correction(const MessyDensity& prior, const std::vector<Expr>& r,
                              const Eigen::VectorXd& lambda);

}  // namespace messy
