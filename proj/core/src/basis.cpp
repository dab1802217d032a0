#include "messy/basis.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "messy/error.hpp"

namespace messy {

bool BasisSet::orthonormalized() const {
  return transform.size() > 0 && !transform.isIdentity(0.0);
}

BasisSet build_basis(std::vector<Expr> exprs, int dim) {
  if (dim < 1) throw std::invalid_argument("basis dimension must be >= 1");
  BasisSet b;
  b.dim = dim;
  for (const Expr& e : exprs) {
    if (e.max_var() >= dim) throw std::invalid_argument("basis uses a variable beyond its dimension");
  }
  b.exprs = std::move(exprs);
  const auto nb = b.exprs.size();
  b.grads.resize(nb);
  b.laplacians.resize(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    Expr lap = Expr::constant(0.0);
    for (int j = 0; j < dim; ++j) {
      Expr g = differentiate(b.exprs[i], j);
      lap = lap + differentiate(g, j);
      b.grads[i].push_back(std::move(g));
    }
    b.laplacians[i] = lap;
  }
  b.transform = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(nb), static_cast<Eigen::Index>(nb));
  return b;
}

BasisSet raw_basis(const BasisSet& basis) {
  BasisSet b = basis;
  b.transform.setIdentity(static_cast<Eigen::Index>(b.size()), static_cast<Eigen::Index>(b.size()));
  return b;
}

namespace {

Eigen::MatrixXd table(const std::vector<Expr>& exprs, const Eigen::MatrixXd& points,
                      const char* what) {
  Eigen::MatrixXd out(points.rows(), static_cast<Eigen::Index>(exprs.size()));
  for (std::size_t i = 0; i < exprs.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    out.col(c) = eval_rows_unchecked(exprs[i], points).matrix();
    if (!out.col(c).allFinite()) {
      Eigen::Index k = 0;
      while (std::isfinite(out(k, c))) ++k;
      throw EvaluationError(std::string(what) + " of basis " + std::to_string(i) +
                            " is non-finite at sample " + std::to_string(k));
    }
  }
  return out;
}

// One modified Gram-Schmidt sweep over the columns of v, in place. Returns
// the lower-triangular T with q_i = sum_k T(i, k) v_k.
Eigen::MatrixXd mgs(Eigen::MatrixXd& v, bool check_dependence) {
  const Eigen::Index nb = v.cols();
  Eigen::MatrixXd t = Eigen::MatrixXd::Identity(nb, nb);
  for (Eigen::Index i = 0; i < nb; ++i) {
    const double original = v.col(i).squaredNorm();
    for (Eigen::Index k = 0; k < i; ++k) {
      const double r = v.col(k).dot(v.col(i));
      v.col(i) -= r * v.col(k);
      t.row(i) -= r * t.row(k);
    }
    const double residual = v.col(i).squaredNorm();
    if (!(residual > 0.0) || (check_dependence && residual < 1e-12 * original)) {
      throw LinearDependenceError(static_cast<std::size_t>(i),
                                  "basis " + std::to_string(i) +
                                      " has a gradient in the span of the preceding bases");
    }
    const double norm = std::sqrt(residual);
    v.col(i) /= norm;
    t.row(i) /= norm;
  }
  return t;
}

}  // namespace

FeatureTables features(const BasisSet& basis, const Eigen::MatrixXd& points) {
  if (points.cols() != basis.dim) throw std::invalid_argument("sample dimension does not match basis");
  FeatureTables f;
  f.h = table(basis.exprs, points, "value");
  f.grad_h.reserve(static_cast<std::size_t>(basis.dim));
  for (int j = 0; j < basis.dim; ++j) {
    std::vector<Expr> gj;
    for (const auto& g : basis.grads) gj.push_back(g[static_cast<std::size_t>(j)]);
    f.grad_h.push_back(table(gj, points, "gradient"));
  }
  f.lap_h = table(basis.laplacians, points, "laplacian");
  if (basis.orthonormalized()) {
    const Eigen::MatrixXd tt = basis.transform.transpose();
    f.h = f.h * tt;
    for (auto& g : f.grad_h) g = g * tt;
    f.lap_h = f.lap_h * tt;
  }
  return f;
}

FeatureTables features(const BasisSet& basis, const SampleSet& samples) {
  return features(basis, samples.values());
}

BasisSet orthonormalize(const BasisSet& basis, const SampleSet& samples) {
  const auto nb = static_cast<Eigen::Index>(basis.size());
  if (nb < 1) throw std::invalid_argument("orthonormalize needs at least one basis");
  if (static_cast<Eigen::Index>(samples.size()) <= nb) {
    throw DegenerateDataError("orthonormalize needs more samples than bases");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(samples.size());
  const FeatureTables cur = features(basis, samples);
  // Stack the d gradient blocks so plain dot products realize the
  // dimension-summed empirical inner product.
  Eigen::MatrixXd v(n * basis.dim, nb);
  for (int j = 0; j < basis.dim; ++j) v.middleRows(j * n, n) = cur.grad_h[static_cast<std::size_t>(j)];
  v /= std::sqrt(static_cast<double>(n));
  const Eigen::MatrixXd t1 = mgs(v, true);
  const Eigen::MatrixXd t2 = mgs(v, false);
  BasisSet out = basis;
  out.transform = Eigen::MatrixXd((t2 * t1 * basis.transform).triangularView<Eigen::Lower>());
  return out;
}

Eigen::VectorXd raw_coefficients(const BasisSet& basis, const Eigen::VectorXd& lambda) {
  if (lambda.size() != static_cast<Eigen::Index>(basis.size())) {
    throw std::invalid_argument("multiplier count does not match basis");
  }
  return basis.transform.transpose() * lambda;
}

}  // namespace messy
