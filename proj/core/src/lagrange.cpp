#include "messy/lagrange.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "messy/error.hpp"

namespace messy {

Eigen::MatrixXd assemble_hessian(const FeatureTables& f) {
  const auto nb = static_cast<Eigen::Index>(f.bases());
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(nb, nb);
  for (const auto& g : f.grad_h) l.selfadjointView<Eigen::Lower>().rankUpdate(g.transpose());
  l = l.selfadjointView<Eigen::Lower>();
  return l / static_cast<double>(f.samples());
}

Eigen::VectorXd laplacian_moment(const FeatureTables& f) {
  return f.lap_h.colwise().mean().transpose();
}

double condition_number(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 1.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd ev = es.eigenvalues().cwiseAbs();
  const double lo = ev.minCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return ev.maxCoeff() / lo;
}

LagrangeSolve solve_lambda(const Eigen::MatrixXd& l, const Eigen::VectorXd& b) {
  if (l.rows() != l.cols() || l.rows() != b.size()) {
    throw std::invalid_argument("solve_lambda: dimension mismatch");
  }
  LagrangeSolve out;
  out.hessian = l;
  out.cond = condition_number(l);
  Eigen::LLT<Eigen::MatrixXd> llt(l);
  if (llt.info() == Eigen::Success) {
    out.lambda = llt.solve(-b);
  } else {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(l);
    if (qr.rank() < l.rows()) {
      throw SingularHessianError(out.cond, "Hessian is singular (cond " + std::to_string(out.cond) + ")");
    }
    out.lambda = qr.solve(-b);
    out.used_fallback = true;
  }
  if (!out.lambda.allFinite()) {
    throw SingularHessianError(out.cond, "multiplier solve produced non-finite values");
  }
  out.residual_g = l * out.lambda + b;
  return out;
}

Eigen::VectorXd relaxation_rate(const FeatureTables& f, const Eigen::VectorXd& lambda) {
  return assemble_hessian(f) * lambda + laplacian_moment(f);
}

LagrangeSolve fit_multipliers(const BasisSet& basis, const SampleSet& samples) {
  const FeatureTables f = features(basis, samples);
  return solve_lambda(assemble_hessian(f), laplacian_moment(f));
}

}  // namespace messy
