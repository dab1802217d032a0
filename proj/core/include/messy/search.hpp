#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "messy/density.hpp"
#include "messy/expr.hpp"
#include "messy/multilevel.hpp"
#include "messy/mxed.hpp"

namespace messy {

struct SearchConfig {
  Mode mode = Mode::S;
  int nm = 4;                          ///< max growth order, even
  std::vector<int> nb_choices{2, 3, 4, 5, 6, 7, 8};
  int iters = 10;
  double cond_threshold = 1e6;
  std::vector<Op> ops{Op::Add, Op::Sub, Op::Mul};
  std::vector<Op> funcs{Op::Cos, Op::Sin};
  std::vector<double> frequencies{0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5};
  int max_depth = 4;
  std::uint64_t seed = 0;
  bool bounded = false;
  Box bounds;                          ///< empty means unbounded
  int max_levels = 5;
  double coverage = 0.99;
  bool multilevel = true;
  bool use_mxed = true;
  NewtonOptions mxed{};
  int mxed_rounds = 4;                 ///< redraw-and-correct rounds, stopping once draws match within noise
  std::size_t prior_draws = 20000;
  int retry_budget = 50;
  bool holdout = false;                ///< score on a seeded 20% split instead of all samples

  void validate(int dim) const;
};

struct Candidate {
  std::vector<Expr> exprs;
  double cond_raw = 0.0;
  bool accepted = false;
  std::string reason;  ///< rejection cause
};

/// One draw: N_b from nb_choices, N_b random expressions, raw Hessian on the
/// samples. Rejected on dependence, duplicates or cond > threshold.
Candidate sample_candidate(Rng& rng, const SearchConfig& cfg, const SampleSet& samples);

/// Draws until accepted; throws SearchExhaustedError after cfg.retry_budget.
Candidate draw_candidate(Rng& rng, const SearchConfig& cfg, const SampleSet& samples);

struct IterationReport {
  int index = 0;
  bool ok = false;
  std::string error;
  std::optional<MessyDensity> density;
  LevelTrace trace;
  double kl = std::numeric_limits<double>::infinity();
  double kl_before_mxed = std::numeric_limits<double>::infinity();
  std::size_t zero_support_hits = 0;
  bool mxed_applied = false;
  int mxed_iterations = 0;  ///< Newton iterations of the first round
  int mxed_rounds = 0;
  int mxed_order = 0;       ///< highest moment order matched; below nm after a fallback
  double mxed_gnorm = 0.0;
  double mxed_ess = 0.0;
  std::string mxed_note;
  std::string draw_warning;
  std::size_t nb = 0;   ///< basis count of the first level
  double cond = 0.0;    ///< raw cond of the first level
  double seconds = 0.0;
};

struct ScoredEntry {
  double kl;
  std::size_t nb;
  double cond;
  int iteration;
};

/// Index of the minimum kl; ties by fewer bases, lower cond, lower iteration.
/// Throws MessyFailure when no entry is finite.
std::size_t select_best(const std::vector<ScoredEntry>& entries);

struct MessyFit {
  std::optional<MessyDensity> messy_p;
  MessyDensity messy_s;
  std::vector<IterationReport> iterations;
  std::size_t best = 0;
};

/// Iteration 0 uses polynomials to order nm (MESSY-P); iterations 1.. draw
/// symbolic bases at every level. Mode P runs iteration 0 only.
MessyFit messy_fit(const SampleSet& samples, const SearchConfig& cfg);

/// One pipeline pass with a given basis source: multilevel fit, MCMC prior
/// draws, moment-matching correction, scoring.
IterationReport run_iteration(const SampleSet& samples, const SampleSet& score_set,
                              const BasisSource& source, const SearchConfig& cfg, int index);

}  // namespace messy
