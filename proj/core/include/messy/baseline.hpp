#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "messy/multilevel.hpp"
#include "messy/rng.hpp"
#include "messy/sample_set.hpp"

namespace messy {

/// 20 log-spaced bandwidths from 0.01 to 10.
std::vector<double> default_bandwidth_grid();

struct KdeOptions {
  int folds = 5;
  std::vector<double> grid = default_bandwidth_grid();
  std::uint64_t seed = 0;
};

/// Gaussian KDE with one bandwidth on per-dimension standardized data.
class KdeDensity {
 public:
  KdeDensity(Eigen::MatrixXd standardized, Eigen::VectorXd mean, Eigen::VectorXd scale,
             double bandwidth);

  double bandwidth() const { return h_; }
  int dim() const { return static_cast<int>(mean_.size()); }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& scale() const { return scale_; }
  const Eigen::MatrixXd& centres() const { return z_; }

  double log_pdf(const double* x) const;
  double pdf(const double* x) const;

  /// Exact draws: pick a kernel centre, add Gaussian noise.
  Eigen::MatrixXd draw(std::size_t n, Rng& rng) const;

  /// Mean held-out log-likelihood per grid point (filled by kde_fit).
  std::vector<double> cv_scores;

 private:
  Eigen::MatrixXd z_;  // standardized centres, sorted by first coordinate
  Eigen::VectorXd mean_;
  Eigen::VectorXd scale_;
  double h_;
};

/// Bandwidth maximizing the K-fold held-out log-likelihood over the grid.
/// Folds come from a seeded shuffle. Throws KdeFailure when no grid point
/// scores finite.
KdeDensity kde_fit(const SampleSet& samples, const KdeOptions& opt = {});

/// log of the kernel sum at z (standardized) over rows [0, n) of sorted
/// centres; windowed to +-9h in 1D with the nearest centre as fallback.
double kde_log_sum(const Eigen::MatrixXd& centres, const double* z, double h);

/// Histogram baseline: the same estimator used as masking reference.
HistogramDensity histogram_fit(const SampleSet& samples);

}  // namespace messy
