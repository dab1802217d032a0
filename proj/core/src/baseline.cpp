#include "messy/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "messy/error.hpp"
#include "messy/parallel.hpp"

namespace messy {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::MatrixXd sorted_rows(Eigen::MatrixXd m) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return m(a, 0) < m(b, 0); });
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (std::size_t i = 0; i < order.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(order[i]);
  return out;
}

// log sum_k exp(-|z - c_k|^2 / (2 h^2)) without the kernel constant.
double log_kernel_sum(const Eigen::MatrixXd& c, const double* z, double h) {
  const Eigen::Index n = c.rows();
  const Eigen::Index d = c.cols();
  const double inv = 1.0 / (2.0 * h * h);
  if (d == 1) {
    // Centres are sorted: only the +-9h window contributes above exp(-40.5).
    const double* col = c.data();
    const double lo_v = z[0] - 9.0 * h, hi_v = z[0] + 9.0 * h;
    const Eigen::Index lo = std::lower_bound(col, col + n, lo_v) - col;
    const Eigen::Index hi = std::upper_bound(col, col + n, hi_v) - col;
    if (lo >= hi) {
      // Nothing nearby: the nearest centre dominates.
      const Eigen::Index near = std::lower_bound(col, col + n, z[0]) - col;
      double best = kInf;
      for (Eigen::Index k : {near - 1, near}) {
        if (k >= 0 && k < n) best = std::min(best, std::fabs(z[0] - col[k]));
      }
      return -best * best * inv;
    }
    double s = 0.0;
    for (Eigen::Index k = lo; k < hi; ++k) {
      const double u = z[0] - col[k];
      s += std::exp(-u * u * inv);
    }
    return std::log(s);
  }
  double mx = -kInf;
  std::vector<double> e(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    double r2 = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double u = z[j] - c(k, j);
      r2 += u * u;
    }
    e[static_cast<std::size_t>(k)] = -r2 * inv;
    mx = std::max(mx, e[static_cast<std::size_t>(k)]);
  }
  double s = 0.0;
  for (double v : e) s += std::exp(v - mx);
  return mx + std::log(s);
}

double log_kernel_const(int d, double h) {
  return -0.5 * d * std::log(2.0 * std::numbers::pi) - d * std::log(h);
}

}  // namespace

std::vector<double> default_bandwidth_grid() {
  std::vector<double> g(20);
  for (int i = 0; i < 20; ++i) g[static_cast<std::size_t>(i)] = std::pow(10.0, -2.0 + 3.0 * i / 19.0);
  return g;
}

double kde_log_sum(const Eigen::MatrixXd& centres, const double* z, double h) {
  return log_kernel_sum(centres, z, h);
}

KdeDensity::KdeDensity(Eigen::MatrixXd standardized, Eigen::VectorXd mean, Eigen::VectorXd scale,
                       double bandwidth)
    : z_(sorted_rows(std::move(standardized))), mean_(std::move(mean)), scale_(std::move(scale)),
      h_(bandwidth) {
  if (!(h_ > 0.0)) throw std::invalid_argument("bandwidth must be positive");
  if (z_.rows() < 1) throw std::invalid_argument("KDE needs at least one sample");
}

double KdeDensity::log_pdf(const double* x) const {
  const int d = dim();
  double z[64];
  std::vector<double> zbig;
  double* zp = z;
  if (d > 64) {
    zbig.resize(static_cast<std::size_t>(d));
    zp = zbig.data();
  }
  double log_jac = 0.0;
  for (int j = 0; j < d; ++j) {
    zp[j] = (x[j] - mean_(j)) / scale_(j);
    log_jac -= std::log(scale_(j));
  }
  return log_kernel_sum(z_, zp, h_) - std::log(static_cast<double>(z_.rows())) +
         log_kernel_const(d, h_) + log_jac;
}

double KdeDensity::pdf(const double* x) const { return std::exp(log_pdf(x)); }

Eigen::MatrixXd KdeDensity::draw(std::size_t n, Rng& rng) const {
  std::uniform_int_distribution<Eigen::Index> pick(0, z_.rows() - 1);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), dim());
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const Eigen::Index k = pick(rng);
    for (int j = 0; j < dim(); ++j) out(i, j) = mean_(j) + scale_(j) * (z_(k, j) + h_ * n01(rng));
  }
  return out;
}

KdeDensity kde_fit(const SampleSet& samples, const KdeOptions& opt) {
  const std::size_t n = samples.size();
  const int d = samples.dim();
  if (opt.folds < 2 || n < static_cast<std::size_t>(opt.folds)) {
    throw std::invalid_argument("KDE cross-validation needs N >= K >= 2");
  }
  if (opt.grid.empty()) throw std::invalid_argument("bandwidth grid is empty");
  Eigen::VectorXd mean = samples.mean();
  Eigen::VectorXd scale = samples.stddev();
  for (int j = 0; j < d; ++j) {
    if (!(scale(j) > 0.0)) scale(j) = 1.0;
  }
  const Eigen::MatrixXd z =
      (samples.values().rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(derive_seed(opt.seed, {0x6b6465ULL}));
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto k_folds = static_cast<std::size_t>(opt.folds);
  std::vector<Eigen::MatrixXd> train(k_folds), test(k_folds);
  for (std::size_t f = 0; f < k_folds; ++f) {
    std::vector<Eigen::Index> tr, te;
    for (std::size_t p = 0; p < n; ++p) (p % k_folds == f ? te : tr).push_back(static_cast<Eigen::Index>(perm[p]));
    train[f] = sorted_rows(z(tr, Eigen::all));
    test[f] = z(te, Eigen::all);
  }

  const std::size_t ng = opt.grid.size();
  std::vector<double> partial(ng * k_folds, 0.0);
  parallel_for(ng * k_folds, [&](std::size_t job) {
    const std::size_t g = job / k_folds, f = job % k_folds;
    const double h = opt.grid[g];
    const auto& tr = train[f];
    const auto& te = test[f];
    const double c = log_kernel_const(d, h) - std::log(static_cast<double>(tr.rows()));
    Eigen::VectorXd row(d);
    double s = 0.0;
    for (Eigen::Index i = 0; i < te.rows(); ++i) {
      row = te.row(i).transpose();
      s += log_kernel_sum(tr, row.data(), h) + c;
    }
    partial[job] = s;
  });
  std::vector<double> scores(ng);
  std::optional<std::size_t> best;
  for (std::size_t g = 0; g < ng; ++g) {
    double s = 0.0;
    for (std::size_t f = 0; f < k_folds; ++f) s += partial[g * k_folds + f];
    scores[g] = s / static_cast<double>(n);
    if (std::isfinite(scores[g]) && (!best || scores[g] > scores[*best])) best = g;
  }
  if (!best) throw KdeFailure("every bandwidth gave a non-finite held-out likelihood");
  KdeDensity kde(z, mean, scale, opt.grid[*best]);
  kde.cv_scores = std::move(scores);
  return kde;
}

HistogramDensity histogram_fit(const SampleSet& samples) { return HistogramDensity(samples); }

}  // namespace messy
