#include "messy/mxed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "messy/error.hpp"

namespace messy {

namespace {

struct DualEval {
  double f = std::numeric_limits<double>::infinity();
  Eigen::VectorXd g;
  Eigen::MatrixXd h;
  Eigen::VectorXd w;  // normalized weights
  bool finite = false;
};

DualEval evaluate(const Eigen::MatrixXd& r, const Eigen::VectorXd& log_base,
                  const Eigen::VectorXd& mu, const Eigen::VectorXd& lambda, bool want_h) {
  DualEval e;
  const Eigen::VectorXd s = log_base + r * lambda;
  const double mx = s.maxCoeff();
  if (!std::isfinite(mx)) return e;
  e.w = (s.array() - mx).exp().matrix();
  const double z = e.w.sum();
  e.w /= z;
  const Eigen::VectorXd mean = r.transpose() * e.w;
  e.f = mx + std::log(z) - lambda.dot(mu);
  e.g = mean - mu;
  if (want_h) {
    const Eigen::MatrixXd rc = r.rowwise() - mean.transpose();
    e.h = rc.transpose() * e.w.asDiagonal() * rc;
  }
  e.finite = std::isfinite(e.f) && e.g.allFinite();
  return e;
}

Eigen::VectorXd newton_direction(const Eigen::MatrixXd& h, const Eigen::VectorXd& g) {
  // Jacobi scaling keeps mixed-order monomial moments solvable.
  Eigen::VectorXd d = h.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd hs = d.asDiagonal() * h * d.asDiagonal();
  const Eigen::VectorXd gs = d.cwiseProduct(g);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(hs);
  Eigen::VectorXd step;
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    step = ldlt.solve(gs);
  }
  if (step.size() == 0 || !step.allFinite()) {
    step = hs.colPivHouseholderQr().solve(gs);
  }
  return d.cwiseProduct(step);
}

}  // namespace

NewtonState dual_newton(const Eigen::MatrixXd& r, const Eigen::VectorXd& log_base,
                        const Eigen::VectorXd& mu, const NewtonOptions& opt,
                        const Eigen::VectorXd& warm) {
  if (r.cols() != mu.size() || r.rows() != log_base.size()) {
    throw std::invalid_argument("dual_newton: dimension mismatch");
  }
  NewtonState st;
  st.tol = opt.tol;
  st.lambda = warm.size() == mu.size() ? warm : Eigen::VectorXd::Zero(mu.size());
  DualEval cur = evaluate(r, log_base, mu, st.lambda, true);
  if (!cur.finite) throw ConvergenceError(std::numeric_limits<double>::infinity(),
                                          "dual objective is not finite at the start point");
  while (cur.g.lpNorm<Eigen::Infinity>() > opt.tol) {
    if (st.iterations >= opt.max_iters) {
      st.g = cur.g;
      st.hessian = cur.h;
      throw ConvergenceError(cur.g.lpNorm<Eigen::Infinity>(),
                             "Newton did not converge in " + std::to_string(opt.max_iters) +
                                 " iterations");
    }
    const Eigen::VectorXd dir = newton_direction(cur.h, cur.g);
    const double gnorm = cur.g.lpNorm<Eigen::Infinity>();
    double t = 1.0;
    for (;;) {
      const Eigen::VectorXd trial = st.lambda - t * dir;
      DualEval next = evaluate(r, log_base, mu, trial, true);
      const bool better = next.finite && (next.f <= cur.f + 1e-13 * std::fabs(cur.f) ||
                                          next.g.lpNorm<Eigen::Infinity>() < gnorm);
      if (better) {
        st.lambda = trial;
        cur = std::move(next);
        break;
      }
      t *= 0.5;
      if (t < opt.min_step) {
        throw ConvergenceError(gnorm, "Newton step halving reached its floor");
      }
    }
    ++st.iterations;
  }
  st.g = cur.g;
  st.hessian = cur.h;
  st.converged = true;
  return st;
}

MxedResult mxed_correct(const Eigen::MatrixXd& prior_samples, const Eigen::VectorXd& mu,
                        const std::vector<Expr>& r, const NewtonOptions& opt) {
  if (static_cast<Eigen::Index>(r.size()) != mu.size()) {
    throw std::invalid_argument("mxed_correct: moment count does not match basis");
  }
  const Eigen::Index m = prior_samples.rows();
  Eigen::MatrixXd rv(m, mu.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    rv.col(static_cast<Eigen::Index>(i)) = eval_rows(r[i], prior_samples).matrix();
  }
  MxedResult out;
  out.state = dual_newton(rv, Eigen::VectorXd::Zero(m), mu, opt);
  const Eigen::VectorXd s = rv * out.state.lambda;
  out.weights = (s.array() - s.maxCoeff()).exp().matrix();
  out.weights /= out.weights.sum();
  out.ess = 1.0 / out.weights.squaredNorm();
  if (out.ess < opt.min_ess_fraction * static_cast<double>(m)) {
    throw DegeneracyError(out.ess, "importance weights degenerate (ESS " + std::to_string(out.ess) + ")");
  }
  return out;
}

Grid simpson_grid(const Box& box, int points_per_dim) {
  const std::size_t d = box.size();
  if (d < 1 || d > 2) throw std::invalid_argument("simpson_grid supports d = 1 or 2");
  int n = std::max(3, points_per_dim);
  if (n % 2 == 0) ++n;
  std::vector<Eigen::VectorXd> xs(d), ws(d);
  for (std::size_t j = 0; j < d; ++j) {
    if (!box[j].finite() || !(box[j].hi > box[j].lo)) throw std::invalid_argument("simpson_grid needs a finite box");
    const double h = (box[j].hi - box[j].lo) / (n - 1);
    xs[j].resize(n);
    ws[j].resize(n);
    for (int i = 0; i < n; ++i) {
      xs[j](i) = box[j].lo + i * h;
      ws[j](i) = h / 3.0 * (i == 0 || i == n - 1 ? 1.0 : (i % 2 ? 4.0 : 2.0));
    }
  }
  Grid g;
  if (d == 1) {
    g.points = xs[0];
    g.weights = ws[0];
  } else {
    g.points.resize(static_cast<Eigen::Index>(n) * n, 2);
    g.weights.resize(static_cast<Eigen::Index>(n) * n);
    Eigen::Index k = 0;
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b, ++k) {
        g.points(k, 0) = xs[0](a);
        g.points(k, 1) = xs[1](b);
        g.weights(k) = ws[0](a) * ws[1](b);
      }
    }
  }
  return g;
}

Grid default_oracle_grid(const Eigen::VectorXd& mean, const Eigen::VectorXd& sd) {
  Box box(static_cast<std::size_t>(mean.size()));
  for (Eigen::Index j = 0; j < mean.size(); ++j) {
    box[static_cast<std::size_t>(j)] = {mean(j) - 8.0 * sd(j), mean(j) + 8.0 * sd(j)};
  }
  return simpson_grid(box, mean.size() == 1 ? 4001 : 401);
}

NewtonState med_newton_oracle(const Eigen::VectorXd& mu, const std::vector<Expr>& r,
                              const Grid& grid, const NewtonOptions& opt) {
  Eigen::MatrixXd rv(grid.points.rows(), mu.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    rv.col(static_cast<Eigen::Index>(i)) = eval_rows(r[i], grid.points).matrix();
  }
  return dual_newton(rv, grid.weights.array().log().matrix(), mu, opt);
}

MessyDensity apply_correction(const MessyDensity& prior, const std::vector<Expr>& r,
                              const Eigen::VectorXd& lambda) {
  if (static_cast<Eigen::Index>(r.size()) != lambda.size()) {
    throw std::invalid_argument("apply_correction: multiplier count does not match basis");
  }
  std::vector<LevelDensity> levels;
  std::vector<double> log_w;
  for (const auto& lv : prior.levels()) {
    std::vector<Expr> basis = lv.basis();
    std::vector<double> coef(lv.lambda().data(), lv.lambda().data() + lv.lambda().size());
    for (std::size_t i = 0; i < r.size(); ++i) {
      const auto it = std::find(basis.begin(), basis.end(), r[i]);
      if (it != basis.end()) {
        coef[static_cast<std::size_t>(it - basis.begin())] += lambda(static_cast<Eigen::Index>(i));
      } else {
        basis.push_back(r[i]);
        coef.push_back(lambda(static_cast<Eigen::Index>(i)));
      }
    }
    Eigen::VectorXd lam = Eigen::Map<Eigen::VectorXd>(coef.data(), static_cast<Eigen::Index>(coef.size()));
    LevelDensity next(std::move(basis), std::move(lam), lv.support(), lv.mass(), lv.reference());
    log_w.push_back(std::log(lv.mass()) + next.log_z() - lv.log_z());
    levels.push_back(std::move(next));
  }
  const double mx = *std::max_element(log_w.begin(), log_w.end());
  double s = 0.0;
  for (double v : log_w) s += std::exp(v - mx);
  for (std::size_t l = 0; l < levels.size(); ++l) levels[l].set_mass(std::exp(log_w[l] - mx) / s);
  MessyDensity out(std::move(levels), prior.mode());
  out.set_kl_score(prior.kl_score());
  return out;
}

}  // namespace messy
