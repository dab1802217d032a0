#include "messy/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "messy/error.hpp"
#include "messy/lagrange.hpp"
#include "messy/parallel.hpp"

namespace messy {

void SearchConfig::validate(int dim) const {
  if (nm < 2 || nm % 2 != 0) throw std::invalid_argument("nm must be even and >= 2");
  if (iters < 1) throw std::invalid_argument("iters must be >= 1");
  if (nb_choices.empty()) throw std::invalid_argument("basis-count set is empty");
  for (int nb : nb_choices) {
    if (nb < 1 || nb > 32) throw std::invalid_argument("basis counts must lie in 1..32");
  }
  if (ops.empty()) throw std::invalid_argument("operator set is empty");
  if (!bounds.empty() && static_cast<int>(bounds.size()) != dim) {
    throw std::invalid_argument("bounds dimension does not match samples");
  }
  if (max_levels < 1) throw std::invalid_argument("max_levels must be >= 1");
  if (!(cond_threshold > 1.0)) throw std::invalid_argument("cond threshold must exceed 1");
}

Candidate sample_candidate(Rng& rng, const SearchConfig& cfg, const SampleSet& samples) {
  Candidate c;
  std::uniform_int_distribution<std::size_t> pick(0, cfg.nb_choices.size() - 1);
  const int nb = cfg.nb_choices[pick(rng)];
  RandomExprOptions o;
  o.dimension = samples.dim();
  o.max_order = cfg.nm;
  o.ops = cfg.ops;
  o.funcs = cfg.funcs;
  o.max_depth = cfg.max_depth;
  o.frequencies = cfg.frequencies;
  for (int k = 0; k < nb; ++k) {
    Expr e = random_expr(rng, o);
    if (std::find(c.exprs.begin(), c.exprs.end(), e) != c.exprs.end()) {
      c.reason = "duplicate basis function";
      return c;
    }
    c.exprs.push_back(std::move(e));
  }
  if (samples.size() < c.exprs.size() + 10) {
    c.reason = "too few samples for the basis count";
    return c;
  }
  const BasisSet raw = build_basis(c.exprs, samples.dim());
  try {
    const FeatureTables f = features(raw, samples);
    c.cond_raw = condition_number(assemble_hessian(f));
    orthonormalize(raw, samples);
  } catch (const LinearDependenceError& e) {
    c.reason = e.what();
    return c;
  } catch (const EvaluationError& e) {
    c.reason = e.what();
    return c;
  }
  if (!(c.cond_raw <= cfg.cond_threshold)) {
    c.reason = "raw condition number " + std::to_string(c.cond_raw) + " above threshold";
    return c;
  }
  c.accepted = true;
  return c;
}

Candidate draw_candidate(Rng& rng, const SearchConfig& cfg, const SampleSet& samples) {
  std::string last;
  for (int attempt = 0; attempt < cfg.retry_budget; ++attempt) {
    Candidate c = sample_candidate(rng, cfg, samples);
    if (c.accepted) return c;
    last = c.reason;
  }
  throw SearchExhaustedError("no acceptable candidate in " + std::to_string(cfg.retry_budget) +
                             " draws (last: " + last + ")");
}

std::size_t select_best(const std::vector<ScoredEntry>& entries) {
  std::optional<std::size_t> best;
  auto key = [&](std::size_t i) {
    const auto& e = entries[i];
    return std::make_tuple(e.kl, e.nb, e.cond, e.iteration);
  };
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!std::isfinite(entries[i].kl)) continue;
    if (!best || key(i) < key(*best)) best = i;
  }
  if (!best) throw MessyFailure("no candidate has a finite score");
  return *best;
}

namespace {

Eigen::MatrixXd within_bounds(const Eigen::MatrixXd& y, const Box& bounds) {
  if (bounds.empty()) return y;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < y.rows(); ++k) {
    bool in = true;
    for (std::size_t j = 0; j < bounds.size() && in; ++j) in = bounds[j].contains(y(k, static_cast<Eigen::Index>(j)));
    if (in) keep.push_back(k);
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(keep.size()), y.cols());
  for (std::size_t i = 0; i < keep.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = y.row(keep[i]);
  return out;
}

// Prior draws for the correction step, truncated to the bounds and topped up.
DrawResult prior_draws(const MessyDensity& dens, const SearchConfig& cfg, Rng& rng) {
  DrawResult y = draw(dens, cfg.prior_draws, rng);
  Eigen::MatrixXd kept = within_bounds(y.samples, cfg.bounds);
  for (int round = 0; round < 10 && static_cast<std::size_t>(kept.rows()) < cfg.prior_draws; ++round) {
    const std::size_t need = cfg.prior_draws - static_cast<std::size_t>(kept.rows());
    DrawResult more = draw(dens, std::max<std::size_t>(need, 100), rng);
    const Eigen::MatrixXd extra = within_bounds(more.samples, cfg.bounds);
    const Eigen::Index take = std::min<Eigen::Index>(extra.rows(), static_cast<Eigen::Index>(need));
    Eigen::MatrixXd joined(kept.rows() + take, kept.cols());
    joined << kept, extra.topRows(take);
    kept = std::move(joined);
  }
  y.samples = std::move(kept);
  return y;
}

// Fresh draws agree with the targets to within three standard errors.
bool matches_within_noise(const Eigen::MatrixXd& y, const std::vector<Expr>& r,
                          const Eigen::VectorXd& mu) {
  const MomentEstimate m = sample_moments(y, r);
  return ((m.mean - mu).array().abs() <= 3.0 * m.se.array()).all();
}

}  // namespace

IterationReport run_iteration(const SampleSet& samples, const SampleSet& score_set,
                              const BasisSource& source, const SearchConfig& cfg, int index) {
  const auto t0 = std::chrono::steady_clock::now();
  IterationReport rep;
  rep.index = index;
  const auto idx = static_cast<std::uint64_t>(index);
  try {
    MultilevelConfig mc;
    mc.max_levels = cfg.max_levels;
    mc.coverage = cfg.coverage;
    mc.multilevel = cfg.multilevel && samples.dim() <= 2;
    mc.bounded = cfg.bounded;
    mc.bounds = cfg.bounds;
    mc.retry_budget = cfg.retry_budget;
    mc.seed = derive_seed(cfg.seed, {idx, 1});
    MultilevelResult ml = fit_multilevel(samples, source, mc);
    rep.trace = ml.trace;
    rep.nb = ml.trace.levels.front().basis.size();
    rep.cond = ml.trace.levels.front().cond_raw;
    MessyDensity dens = std::move(ml.density);
    rep.kl_before_mxed = kl_criterion(dens, score_set.values()).value;

    if (cfg.use_mxed) {
      // A correction that fails in any round is undone and retried with
      // lower-order moments.
      const MessyDensity uncorrected = dens;
      for (int order = cfg.nm; order >= 2 && !rep.mxed_applied; order -= 2) {
        Rng rng(derive_seed(cfg.seed, {idx, 2, static_cast<std::uint64_t>(order)}));
        const std::vector<Expr> r = polynomial_basis(samples.dim(), order);
        const Eigen::VectorXd mu = sample_moments(samples.values(), r).mean;
        for (int round = 0; round < std::max(1, cfg.mxed_rounds); ++round) {
          try {
            const DrawResult y = prior_draws(dens, cfg, rng);
            if (round == 0) {
              rep.draw_warning = y.warning;
            } else if (matches_within_noise(y.samples, r, mu)) {
              break;
            }
            const MxedResult mx = mxed_correct(y.samples, mu, r, cfg.mxed);
            MessyDensity next = apply_correction(dens, r, mx.state.lambda);
            if (round == 0) rep.mxed_iterations = mx.state.iterations;
            rep.mxed_gnorm = mx.state.g.lpNorm<Eigen::Infinity>();
            rep.mxed_ess = mx.ess;
            rep.mxed_order = order;
            dens = std::move(next);
            rep.mxed_applied = true;
            ++rep.mxed_rounds;
          } catch (const Error& e) {
            if (!rep.mxed_note.empty()) rep.mxed_note += "; ";
            rep.mxed_note += "order " + std::to_string(order) +
                             (round == 0 ? "" : " round " + std::to_string(round + 1)) + ": " + e.what();
            dens = uncorrected;
            rep.mxed_applied = false;
            rep.mxed_rounds = 0;
            rep.mxed_order = 0;
            rep.mxed_iterations = 0;
            rep.mxed_gnorm = 0.0;
            rep.mxed_ess = 0.0;
            break;
          }
        }
      }
    }
    const KlResult k = kl_criterion(dens, score_set.values());
    rep.kl = k.value;
    rep.zero_support_hits = k.zero_support_hits;
    dens.set_kl_score(k.value);
    dens.set_mode(index == 0 ? Mode::P : Mode::S);
    rep.density = std::move(dens);
    rep.ok = true;
  } catch (const Error& e) {
    rep.error = e.what();
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

MessyFit messy_fit(const SampleSet& samples, const SearchConfig& cfg) {
  cfg.validate(samples.dim());
  if (samples.size() < 50) throw DegenerateDataError("estimation needs at least 50 samples");

  std::optional<SampleSet> fit_part, score_part;
  if (cfg.holdout) {
    std::vector<std::size_t> perm(samples.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(derive_seed(cfg.seed, {0x686f6c64ULL}));
    std::shuffle(perm.begin(), perm.end(), rng);
    const std::size_t n_score = samples.size() / 5;
    score_part.emplace(samples.subset(std::span(perm).first(n_score)));
    fit_part.emplace(samples.subset(std::span(perm).subspan(n_score)));
  }
  const SampleSet& fit_set = fit_part ? *fit_part : samples;
  const SampleSet& score_set = score_part ? *score_part : samples;

  const int n_iter = cfg.mode == Mode::P ? 1 : cfg.iters;
  const BasisSource poly = polynomial_source(samples.dim(), cfg.nm);
  const BasisSource symbolic{[&cfg](Rng& rng, const SampleSet& rem, int, int) {
                               return draw_candidate(rng, cfg, rem).exprs;
                             },
                             false, 1};
  MessyFit out;
  out.iterations.resize(static_cast<std::size_t>(n_iter));
  parallel_for(static_cast<std::size_t>(n_iter), [&](std::size_t i) {
    out.iterations[i] = run_iteration(fit_set, score_set, i == 0 ? poly : symbolic, cfg,
                                      static_cast<int>(i));
  });

  std::vector<ScoredEntry> entries;
  std::vector<std::size_t> which;
  std::string diag;
  for (std::size_t i = 0; i < out.iterations.size(); ++i) {
    const auto& it = out.iterations[i];
    if (!it.ok) {
      diag += "\n  iteration " + std::to_string(i) + ": " + it.error;
      continue;
    }
    entries.push_back({it.kl, it.nb, it.cond, it.index});
    which.push_back(i);
  }
  if (entries.empty()) throw MessyFailure("every iteration failed:" + diag);
  if (out.iterations.front().ok) out.messy_p = *out.iterations.front().density;
  out.best = which[select_best(entries)];
  out.messy_s = *out.iterations[out.best].density;
  out.messy_s.set_mode(cfg.mode);
  return out;
}

}  // namespace messy
