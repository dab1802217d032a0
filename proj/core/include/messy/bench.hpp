#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "messy/density.hpp"
#include "messy/sample_set.hpp"
#include "messy/search.hpp"

namespace messy {

/// Equal-width two-Gaussian mixture whose standardized moments are
/// (0, 1, -2.10, 5.42). Solved once by root finding; see the unit tests for the
/// independent re-derivation.
struct LimitRealMixture {
  static constexpr double weight = 0.137623963897096695;  // of the left component
  static constexpr double mean_left = -2.50174500887836388;
  static constexpr double mean_right = 0.399245863019939114;
  static constexpr double sd = 0.0344768744890306509;
};

struct CaseInfo {
  std::string id;
  int dim = 1;
  int default_nm = 2;
  bool bounded = false;
  Box bounds;  ///< empty when unbounded
};

/// Accepts bimodal, limit_real, exponential, gauss2d, gammaexp, normal and
/// gaussNd:<d>. Throws std::invalid_argument for anything else.
CaseInfo case_info(const std::string& id);
std::vector<std::string> known_cases();

SampleSet gen_samples(const std::string& case_id, std::size_t n, std::uint64_t seed);

/// Mean and covariance of the gaussNd:<d> target (fixed per d).
void gauss_nd_parameters(int d, Eigen::VectorXd& mean, Eigen::MatrixXd& cov);

struct MethodRun {
  std::string method;
  bool ok = false;
  std::string error;
  double kl = 0.0;
  double moment_err_low = 0.0;   ///< mean relative error, orders 1-4
  double moment_err_high = 0.0;  ///< orders 5-6
  double seconds = 0.0;
  std::vector<double> cond;      ///< raw cond per level
  std::vector<double> masses;
  std::vector<std::string> exponents;
  std::string expression;
  int mxed_iterations = -1;
  double mxed_gnorm = 0.0;
  double integral = 0.0;         ///< quadrature of the pdf (MESSY and MxED)
  double mass_sum = 0.0;
};

struct Replicate {
  std::size_t n = 0;
  int replicate = 0;
  std::uint64_t seed = 0;
  std::vector<MethodRun> runs;
};

struct Summary {
  std::size_t n = 0;
  std::string method;
  std::size_t ok = 0;
  std::size_t failed = 0;
  double kl_mean = 0.0, kl_se = 0.0;
  double err_low_mean = 0.0, err_low_se = 0.0;
  double err_high_mean = 0.0, err_high_se = 0.0;
  double seconds_mean = 0.0, seconds_se = 0.0;
};

struct BenchmarkConfig {
  std::string case_id = "bimodal";
  std::vector<std::size_t> n_list{1000};
  std::vector<std::string> methods{"kde", "mxed", "messy_p", "messy_s"};
  int replicates = 25;
  std::uint64_t seed = 0;
  int nm = 0;     ///< 0: case default
  int iters = 10;
  bool parallel_replicates = true;
};

struct BenchmarkReport {
  BenchmarkConfig config;
  CaseInfo info;
  std::vector<Replicate> replicates;
  std::vector<Summary> summary;
};

std::vector<std::string> known_methods();

BenchmarkReport run_benchmark(const BenchmarkConfig& cfg);

/// Relative error |a - b| / (|b| + 1e-9).
double relative_error(double estimate, double reference);

/// Per-dimension raw moments E[x_j^k], k = 1..max_order, averaged into the
/// low (1-4) and high (5-6) relative errors against the samples.
struct MomentErrors {
  double low = 0.0;
  double high = 0.0;
};
MomentErrors moment_errors(const std::vector<std::vector<double>>& est,
                           const std::vector<std::vector<double>>& ref);
std::vector<std::vector<double>> raw_sample_moments(const Eigen::MatrixXd& x, int max_order);
std::vector<std::vector<double>> raw_density_moments(const MessyDensity& d, int max_order,
                                                     std::uint64_t seed);

/// Expression text in the form "c1*exp(e1) + c2*exp(e2)" with c = mass / Z.
std::string density_expression(const MessyDensity& d);

struct ScalingPoint {
  int dim = 1;
  std::size_t n = 0;
  double seconds = 0.0;  ///< best of the repeats
};

struct ScalingReport {
  std::vector<ScalingPoint> points;
  std::vector<std::pair<int, double>> slopes;  ///< log-log slope of time vs N per d
  double total_seconds = 0.0;
};

/// Times the multiplier computation (basis build, orthonormalization, solve)
/// for second-order polynomials on gaussNd samples.
ScalingReport run_scaling(const std::vector<int>& dims, const std::vector<std::size_t>& ns,
                          std::uint64_t seed, int repeats = 5);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace messy
