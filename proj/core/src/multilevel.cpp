#include "messy/multilevel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "messy/error.hpp"
#include "messy/lagrange.hpp"
#include "messy/parallel.hpp"

namespace messy {

int HistogramDensity::bin_rule(std::size_t n, int d) {
  const double b = std::ceil(3.0 * std::pow(static_cast<double>(n), 1.0 / (d + 2)));
  return static_cast<int>(std::clamp(b, 8.0, 128.0));
}

HistogramDensity::HistogramDensity(const SampleSet& samples) {
  const int d = samples.dim();
  if (samples.size() < 10) throw DegenerateDataError("histogram needs at least 10 samples");
  bins_ = bin_rule(samples.size(), d);
  if (d * std::log2(static_cast<double>(bins_)) > 63.0) {
    throw std::invalid_argument("histogram cell index overflows at this dimension");
  }
  support_ = samples.bounding_box();
  width_.resize(static_cast<std::size_t>(d));
  double volume = 1.0;
  for (int j = 0; j < d; ++j) {
    const auto& s = support_[static_cast<std::size_t>(j)];
    if (!(s.hi > s.lo)) {
      throw DegenerateDataError("all samples are equal in dimension " + std::to_string(j));
    }
    width_[static_cast<std::size_t>(j)] = (s.hi - s.lo) / bins_;
    volume *= width_[static_cast<std::size_t>(j)];
  }
  norm_ = 1.0 / (static_cast<double>(samples.size()) * volume);
  Eigen::VectorXd row(d);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    row = samples.row(k).transpose();
    std::uint64_t key = 0;
    cell_of(row.data(), key);
    ++counts_[key];
  }
}

bool HistogramDensity::cell_of(const double* x, std::uint64_t& key) const {
  key = 0;
  std::uint64_t stride = 1;
  for (std::size_t j = 0; j < support_.size(); ++j) {
    if (!support_[j].contains(x[j])) return false;
    auto idx = static_cast<std::int64_t>(std::floor((x[j] - support_[j].lo) / width_[j]));
    idx = std::clamp<std::int64_t>(idx, 0, bins_ - 1);
    key += static_cast<std::uint64_t>(idx) * stride;
    stride *= static_cast<std::uint64_t>(bins_);
  }
  return true;
}

double HistogramDensity::pdf(const double* x) const {
  std::uint64_t key = 0;
  if (!cell_of(x, key)) return 0.0;
  const auto it = counts_.find(key);
  return it == counts_.end() ? 0.0 : static_cast<double>(it->second) * norm_;
}

double HistogramDensity::marginal_moment(int j, int k) const {
  const auto ju = static_cast<std::size_t>(j);
  std::uint64_t stride = 1;
  for (std::size_t i = 0; i < ju; ++i) stride *= static_cast<std::uint64_t>(bins_);
  double total = 0.0, acc = 0.0;
  for (const auto& [key, count] : counts_) {
    const auto idx = static_cast<double>((key / stride) % static_cast<std::uint64_t>(bins_));
    const double a = support_[ju].lo + idx * width_[ju];
    const double b = a + width_[ju];
    const double mk = (std::pow(b, k + 1) - std::pow(a, k + 1)) / ((k + 1) * (b - a));
    acc += static_cast<double>(count) * mk;
    total += static_cast<double>(count);
  }
  return acc / total;
}

MaskResult mask(const LevelDensity& level, const HistogramDensity& hist, const SampleSet& samples,
                std::span<const std::size_t> ids, std::size_t total, std::uint64_t seed) {
  if (ids.size() != samples.size()) throw std::invalid_argument("mask: id count mismatch");
  const std::size_t n = samples.size();
  std::vector<char> take(n, 0);
  std::vector<char> bad(n, 0);
  const std::size_t chunks = std::min<std::size_t>(n, 64);
  parallel_for(chunks, [&](std::size_t c) {
    Eigen::VectorXd row(samples.dim());
    for (std::size_t k = c; k < n; k += chunks) {
      row = samples.row(k).transpose();
      const double fh = hist.pdf(row.data());
      if (!(fh > 0.0)) {
        bad[k] = 1;
        continue;
      }
      const double ratio = level.pdf(row.data()) / fh;
      take[k] = counter_uniform(seed, ids[k]) < ratio ? 1 : 0;
    }
  });
  if (std::any_of(bad.begin(), bad.end(), [](char b) { return b != 0; })) {
    throw MultilevelError("histogram density is zero at an in-range sample");
  }
  MaskResult r;
  for (std::size_t k = 0; k < n; ++k) (take[k] ? r.masked : r.remaining).push_back(k);
  r.mass = total ? static_cast<double>(r.masked.size()) / static_cast<double>(total) : 0.0;
  return r;
}

BasisSource polynomial_source(int dim, int max_order) {
  const int lowest = std::min(2, max_order);
  BasisSource src;
  src.next = [dim, max_order, lowest](Rng&, const SampleSet&, int, int attempt) {
    return polynomial_basis(dim, std::max(lowest, max_order - 2 * attempt));
  };
  src.deterministic = true;
  src.max_attempts = std::max(1, 1 + (max_order - lowest) / 2);
  return src;
}

LevelFit fit_level(const std::vector<Expr>& exprs, const SampleSet& samples, const Box& support) {
  const BasisSet raw = build_basis(exprs, samples.dim());
  const BasisSet orth = orthonormalize(raw, samples);
  const FeatureTables f = features(orth, samples);
  const LagrangeSolve sol = solve_lambda(assemble_hessian(f), laplacian_moment(f));
  const Eigen::VectorXd lambda_raw = raw_coefficients(orth, sol.lambda);
  // Raw Hessian recovered from the transform: L_raw = T^-1 L_orth T^-T.
  const auto nb = static_cast<Eigen::Index>(exprs.size());
  const Eigen::MatrixXd tinv =
      orth.transform.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(nb, nb));
  const double cond_raw = condition_number(tinv * sol.hessian * tinv.transpose());
  LevelDensity level(exprs, lambda_raw, support, 1.0, make_reference(samples, support));
  return {std::move(level), orth, cond_raw, sol.cond};
}

namespace {

Box level_support(const SampleSet& d, const MultilevelConfig& cfg) {
  Box bounds = cfg.bounds.empty() ? unbounded_box(d.dim()) : cfg.bounds;
  if (!cfg.bounded) return bounds;
  Box bb = d.bounding_box();
  for (std::size_t j = 0; j < bb.size(); ++j) {
    bb[j].lo = std::max(bb[j].lo, bounds[j].lo);
    bb[j].hi = std::min(bb[j].hi, bounds[j].hi);
  }
  return bb;
}

bool degenerate(const Box& b) {
  return std::any_of(b.begin(), b.end(), [](const Interval& i) { return !(i.hi > i.lo); });
}

}  // namespace

MultilevelResult fit_multilevel(const SampleSet& samples, const BasisSource& source,
                                const MultilevelConfig& cfg) {
  if (cfg.max_levels < 1) throw std::invalid_argument("max_levels must be >= 1");
  if (!cfg.bounds.empty() && static_cast<int>(cfg.bounds.size()) != samples.dim()) {
    throw std::invalid_argument("bounds dimension does not match samples");
  }
  const std::size_t total = samples.size();
  std::vector<std::size_t> remaining(total);
  std::iota(remaining.begin(), remaining.end(), std::size_t{0});
  Rng rng(derive_seed(cfg.seed, {0x6c766cULL}));

  std::vector<LevelDensity> levels;
  std::vector<std::size_t> counts;
  LevelTrace trace;
  auto fold_remainder = [&](const std::string& why) {
    counts.back() += remaining.size();
    trace.levels.back().masked += remaining.size();
    trace.notes.push_back(std::to_string(remaining.size()) + " samples folded into level " +
                          std::to_string(levels.size()) + ": " + why);
    remaining.clear();
  };

  for (int l = 1; l <= cfg.max_levels && !remaining.empty(); ++l) {
    const SampleSet d = samples.subset(remaining);
    const Box support = level_support(d, cfg);
    const bool last = l == cfg.max_levels || !cfg.multilevel;

    std::optional<LevelFit> fit;
    MaskResult mk;
    int attempts = 0;
    std::string last_error;
    const int budget = source.deterministic ? std::max(1, source.max_attempts)
                                            : std::max(1, cfg.retry_budget);
    while (attempts < budget) {
      ++attempts;
      std::vector<Expr> exprs;
      try {
        exprs = source.next(rng, d, l, attempts - 1);
      } catch (const Error& e) {
        last_error = e.what();
        break;
      }
      if (d.size() < exprs.size() + 10 || degenerate(support)) {
        last_error = "too few samples left for a level";
        break;
      }
      try {
        fit.emplace(fit_level(exprs, d, support));
      } catch (const Error& e) {
        last_error = e.what();
        fit.reset();
        continue;
      }
      if (last || d.size() < 10) {
        mk.masked.resize(d.size());
        std::iota(mk.masked.begin(), mk.masked.end(), std::size_t{0});
        mk.remaining.clear();
        break;
      }
      const HistogramDensity hist(d);
      mk = mask(fit->density, hist, d, remaining, total, derive_seed(cfg.seed, {0x6d61736bULL,
                                                                                static_cast<std::uint64_t>(l)}));
      if (mk.masked.empty()) {
        last_error = "level masked no samples";
        // A fixed source moves to its next, smaller basis; the last one keeps everything.
        if (source.deterministic && attempts >= budget) {
          mk.masked.swap(mk.remaining);
          break;
        }
        fit.reset();
        continue;
      }
      break;
    }

    if (!fit) {
      if (levels.empty()) {
        throw MultilevelError("first level could not be fitted: " + last_error);
      }
      fold_remainder(last_error);
      break;
    }

    std::size_t masked = mk.masked.size();
    const std::size_t covered =
        std::accumulate(counts.begin(), counts.end(), std::size_t{0}) + masked;
    const bool done = !mk.remaining.empty() &&
                      static_cast<double>(covered) >= cfg.coverage * static_cast<double>(total);
    std::vector<std::size_t> next;
    if (!done) {
      next.reserve(mk.remaining.size());
      for (std::size_t k : mk.remaining) next.push_back(remaining[k]);
    } else {
      masked = remaining.size();  // close to full coverage: take everything left
    }

    if (source.deterministic && attempts > 1) {
      trace.notes.push_back("level " + std::to_string(l) + " fitted with a reduced basis after: " +
                            last_error);
    }
    LevelRecord rec;
    rec.basis = fit->density.basis();
    rec.lambda = fit->density.lambda();
    rec.samples_before = remaining.size();
    rec.masked = masked;
    rec.cond_raw = fit->cond_raw;
    rec.cond_orth = fit->cond_orth;
    rec.redraws = attempts - 1;
    trace.levels.push_back(std::move(rec));
    levels.push_back(std::move(fit->density));
    counts.push_back(masked);
    remaining = std::move(next);
  }
  if (!remaining.empty()) fold_remainder("level cap reached");

  for (std::size_t l = 0; l < levels.size(); ++l) {
    const double m = static_cast<double>(counts[l]) / static_cast<double>(total);
    levels[l].set_mass(m);
    trace.levels[l].mass = m;
  }
  return {MessyDensity(std::move(levels), Mode::P), std::move(trace)};
}

}  // namespace messy
