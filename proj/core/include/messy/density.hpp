#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "messy/expr.hpp"
#include "messy/rng.hpp"
#include "messy/sample_set.hpp"

namespace messy {

/// Data-derived scale information attached to a level: used for the
/// quadrature window, the MCMC step and the importance proposal.
struct Reference {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Box window;  ///< [min - 5 sd, max + 5 sd] per dimension, clipped to the support
};

Reference make_reference(const SampleSet& samples, const Box& support);

struct NormalizeResult {
  double log_z = 0.0;
  double rel_error = 0.0;  ///< quadrature estimate, or Monte Carlo standard error for d >= 3
};

/// log of the integral of exp(exponent) over `support`. Quadrature for d <= 2,
/// importance sampling against N(ref.mean, ref.cov) for d >= 3. Throws
/// NonIntegrableError when the integral keeps growing on expanding domains.
NormalizeResult normalize(const Expr& exponent, const Box& support, const Reference& ref);

/// One exponential-family component exp(lambda . H) / Z on a box.
class LevelDensity {
 public:
  /// Normalizes on construction.
  LevelDensity(std::vector<Expr> basis, Eigen::VectorXd lambda, Box support, double mass,
               Reference ref);
  /// Trusts a previously computed log Z (deserialization).
  LevelDensity(std::vector<Expr> basis, Eigen::VectorXd lambda, Box support, double mass,
               Reference ref, double log_z);

  const std::vector<Expr>& basis() const { return basis_; }
  const Eigen::VectorXd& lambda() const { return lambda_; }
  const Expr& exponent() const { return exponent_; }
  const Box& support() const { return support_; }
  const Reference& reference() const { return ref_; }
  double log_z() const { return log_z_; }
  double mass() const { return mass_; }
  int dim() const { return static_cast<int>(support_.size()); }

  void set_mass(double m) { mass_ = m; }

  /// lambda . H(x), or -inf outside the support.
  double log_unnormalized(const double* x) const;
  double log_pdf(const double* x) const { return log_unnormalized(x) - log_z_; }
  double pdf(const double* x) const;

 private:
  void compile();

  std::vector<Expr> basis_;
  Eigen::VectorXd lambda_;
  Expr exponent_;
  CompiledExpr compiled_;
  Box support_;
  Reference ref_;
  double log_z_ = 0.0;
  double mass_ = 1.0;
};

enum class Mode { P, S };

/// Weighted sum of levels.
class MessyDensity {
 public:
  MessyDensity() = default;
  MessyDensity(std::vector<LevelDensity> levels, Mode mode);

  const std::vector<LevelDensity>& levels() const { return levels_; }
  std::vector<LevelDensity>& levels() { return levels_; }
  Mode mode() const { return mode_; }
  int dim() const { return levels_.empty() ? 0 : levels_.front().dim(); }
  double kl_score() const { return kl_score_; }
  void set_kl_score(double v) { kl_score_ = v; }
  void set_mode(Mode m) { mode_ = m; }

  double log_pdf(const double* x) const;
  double pdf(const double* x) const;
  double pdf(std::span<const double> x) const { return pdf(x.data()); }

  double total_mass() const;
  /// Index of the level with the largest mass.
  std::size_t dominant_level() const;

 private:
  std::vector<LevelDensity> levels_;
  Mode mode_ = Mode::P;
  double kl_score_ = 0.0;
};

struct DrawOptions {
  int burn_in = 1000;
  int thinning = 10;
  double step_scale = 2.4;  ///< step = step_scale * sd / sqrt(d)
  double independence_rate = 0.1;  ///< share of steps proposed from a widened reference Gaussian
};

struct DrawResult {
  Eigen::MatrixXd samples;           ///< n x d
  std::vector<std::size_t> level_counts;
  std::vector<int> level_of_sample;
  std::vector<double> acceptance;    ///< per level, after burn-in
  std::string warning;               ///< empty when every chain is healthy
};

/// Multinomial allocation over level masses, then one Metropolis-Hastings
/// chain per level: random-walk steps with reflection at finite edges, mixed
/// with independence proposals. `acceptance` refers to the random-walk steps.
DrawResult draw(const MessyDensity& density, std::size_t n, Rng& rng,
                const DrawOptions& opt = {});

struct KlResult {
  double value = 0.0;
  std::size_t zero_support_hits = 0;
};

/// -mean log pdf with log pdf floored at -50.
KlResult kl_criterion(const MessyDensity& density, const Eigen::MatrixXd& samples);

struct MomentEstimate {
  Eigen::VectorXd mean;
  Eigen::VectorXd se;
};

MomentEstimate sample_moments(const Eigen::MatrixXd& samples, const std::vector<Expr>& r);

/// E[g] under the density by quadrature (d <= 2); covers each level's support
/// using the same windows as normalization.
double density_expectation(const MessyDensity& density, const Expr& g);

/// Integral of the pdf by quadrature (d <= 2) or importance sampling.
double integrate_pdf(const MessyDensity& density);

}  // namespace messy
