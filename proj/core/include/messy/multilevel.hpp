#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "messy/basis.hpp"
#include "messy/density.hpp"

namespace messy {

/// Equi-width histogram over the bounding box of the samples.
class HistogramDensity {
 public:
  explicit HistogramDensity(const SampleSet& samples);

  double pdf(const double* x) const;
  const Box& support() const { return support_; }
  int bins_per_dim() const { return bins_; }
  std::size_t occupied_cells() const { return counts_.size(); }
  /// E[x_j^k] under the piecewise-uniform density.
  double marginal_moment(int j, int k) const;

  /// Bin count per dimension: ceil(3 N^(1/(d+2))) clamped to [8, 128].
  static int bin_rule(std::size_t n, int d);

 private:
  bool cell_of(const double* x, std::uint64_t& key) const;

  Box support_;
  int bins_ = 8;
  std::vector<double> width_;
  double norm_ = 0.0;  // 1 / (N * cell volume)
  std::unordered_map<std::uint64_t, std::size_t> counts_;
};

struct MaskResult {
  std::vector<std::size_t> masked;     ///< indices into the samples passed in
  std::vector<std::size_t> remaining;
  double mass = 0.0;                   ///< |masked| / total
};

/// Accepts each sample with probability min(1, level pdf / histogram pdf),
/// using counter-based uniforms keyed by (seed, ids[k]).
MaskResult mask(const LevelDensity& level, const HistogramDensity& hist, const SampleSet& samples,
                std::span<const std::size_t> ids, std::size_t total, std::uint64_t seed);

/// Basis supplier for one level; `attempt` counts failed fits at this level.
/// Deterministic sources are tried `max_attempts` times and never redrawn
/// because of an empty mask.
struct BasisSource {
  std::function<std::vector<Expr>(Rng&, const SampleSet& remaining, int level, int attempt)> next;
  bool deterministic = true;
  int max_attempts = 1;
};

/// Polynomials to max_order; after a failed fit the order drops by two, down to 2.
BasisSource polynomial_source(int dim, int max_order);

struct LevelFit {
  LevelDensity density;
  BasisSet basis;       ///< orthonormalized
  double cond_raw = 1.0;
  double cond_orth = 1.0;
};

/// Orthonormalize, solve for the multipliers, map them to the raw basis and
/// normalize over `support`.
LevelFit fit_level(const std::vector<Expr>& exprs, const SampleSet& samples, const Box& support);

struct MultilevelConfig {
  int max_levels = 5;
  double coverage = 0.99;
  bool multilevel = true;  ///< off: a single level takes every sample
  bool bounded = false;    ///< level support = bounding box of its samples, clipped to bounds
  Box bounds;              ///< empty means unbounded
  int retry_budget = 50;
  std::uint64_t seed = 0;
};

struct LevelRecord {
  std::vector<Expr> basis;
  Eigen::VectorXd lambda;
  double mass = 0.0;
  std::size_t samples_before = 0;
  std::size_t masked = 0;
  double cond_raw = 1.0;
  double cond_orth = 1.0;
  int redraws = 0;
};

struct LevelTrace {
  std::vector<LevelRecord> levels;
  std::vector<std::string> notes;
};

struct MultilevelResult {
  MessyDensity density;
  LevelTrace trace;
};

MultilevelResult fit_multilevel(const SampleSet& samples, const BasisSource& source,
                                const MultilevelConfig& config);

}  // namespace messy
