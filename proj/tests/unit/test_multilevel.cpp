#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <doctest.h>

#include "messy/bench.hpp"
#include "messy/error.hpp"
#include "messy/multilevel.hpp"
#include "oracles.hpp"

using namespace messy;

namespace {

const Expr x = Expr::var(0);

SampleSet uniform_samples(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& e : v) e = u(rng);
  return SampleSet::from_column(v);
}

SampleSet normal_samples(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<double> v(n);
  for (auto& e : v) e = z(rng);
  return SampleSet::from_column(v);
}

std::vector<std::size_t> iota_ids(std::size_t n) {
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  return ids;
}

// exp(0 * x) on [lo, hi]: the uniform density.
LevelDensity flat_level(double lo, double hi, const SampleSet& s) {
  const Box box{{lo, hi}};
  return LevelDensity({x}, Eigen::VectorXd::Zero(1), box, 1.0, make_reference(s, box));
}

// Normalized N(m, sd^2) as a level.
LevelDensity gaussian_level(double m, double sd, const SampleSet& s) {
  const Box box = unbounded_box(1);
  return LevelDensity({x, power(0, 2)}, Eigen::Vector2d(m / (sd * sd), -0.5 / (sd * sd)), box, 1.0,
                      make_reference(s, box));
}

double kl_of(const MessyDensity& d, const SampleSet& s) { return kl_criterion(d, s.values()).value; }

}  // namespace

TEST_SUITE("multilevel") {

TEST_CASE("histogram: uniform samples pass a chi-square test") {
  const SampleSet s = uniform_samples(10000, 1);
  const HistogramDensity h(s);
  const int bins = h.bins_per_dim();
  CHECK(bins == HistogramDensity::bin_rule(10000, 1));
  const double lo = h.support()[0].lo, w = (h.support()[0].hi - lo) / bins;
  const double expected = 10000.0 / bins;
  double chi2 = 0.0, total = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double c = lo + (b + 0.5) * w;
    const double count = h.pdf(&c) * 10000.0 * w;
    chi2 += (count - expected) * (count - expected) / expected;
    total += h.pdf(&c) * w;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  // 0.999 quantile of chi-square with 64 degrees of freedom.
  CHECK(chi2 < 104.7);
  const double outside = 1.5;
  CHECK(h.pdf(&outside) == 0.0);
}

TEST_CASE("histogram: two point masses occupy the end bins") {
  std::vector<double> v(10, 0.0);
  std::fill(v.begin() + 5, v.end(), 1.0);
  const HistogramDensity h(SampleSet::from_column(v));
  CHECK(h.bins_per_dim() == 8);
  CHECK(h.occupied_cells() == 2);
  const double a = 0.0, b = 1.0, mid = 0.5;
  CHECK(h.pdf(&a) == doctest::Approx(4.0));
  CHECK(h.pdf(&b) == doctest::Approx(4.0));
  CHECK(h.pdf(&mid) == 0.0);
}

TEST_CASE("histogram: the 2D mode bin sits near the centre") {
  const SampleSet s = gen_samples("gauss2d", 10000, 2);
  const HistogramDensity h(s);
  const int bins = h.bins_per_dim();
  double best = -1.0;
  double at[2] = {0, 0};
  for (int i = 0; i < bins; ++i) {
    for (int j = 0; j < bins; ++j) {
      const double p[2] = {h.support()[0].lo + (i + 0.5) * h.support()[0].width() / bins,
                           h.support()[1].lo + (j + 0.5) * h.support()[1].width() / bins};
      if (h.pdf(p) > best) {
        best = h.pdf(p);
        at[0] = p[0];
        at[1] = p[1];
      }
    }
  }
  CHECK(std::fabs(at[0] - s.mean()(0)) < 0.75);
  CHECK(std::fabs(at[1] - s.mean()(1)) < 0.75);
}

TEST_CASE("histogram: degenerate input") {
  CHECK_THROWS_AS(HistogramDensity(SampleSet::from_column(std::vector<double>(20, 3.0))),
                  DegenerateDataError);
  CHECK_THROWS_AS(HistogramDensity(SampleSet::from_column(std::vector<double>{1, 2, 3})),
                  DegenerateDataError);
}

TEST_CASE("mask: a dominating level takes every sample") {
  const SampleSet s = uniform_samples(10000, 3);
  const HistogramDensity h(s);
  std::vector<std::size_t> inner;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s(k, 0) > 0.3 && s(k, 0) < 0.7) inner.push_back(k);
  }
  const SampleSet sub = s.subset(inner);
  // pdf 2 on [0.25, 0.75] against a histogram near 1.
  const MaskResult r = mask(flat_level(0.25, 0.75, s), h, sub, iota_ids(sub.size()), sub.size(), 4);
  CHECK(r.masked.size() == sub.size());
  CHECK(r.remaining.empty());
  CHECK(r.mass == 1.0);
}

TEST_CASE("mask: a level with no mass on the samples takes nothing") {
  const SampleSet s = uniform_samples(2000, 5);
  const HistogramDensity h(s);
  const MaskResult r = mask(flat_level(5.0, 6.0, s), h, s, iota_ids(s.size()), s.size(), 6);
  CHECK(r.masked.empty());
  CHECK(r.remaining.size() == s.size());
  CHECK(r.mass == 0.0);
}

TEST_CASE("mask: acceptance rate of the exact left bimodal component") {
  // Expected count is the sum of the acceptance probabilities, with binomial variance.
  double masked = 0.0, expected = 0.0, var = 0.0;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const SampleSet s = gen_samples("bimodal", 10000, 100 + seed);
    const HistogramDensity h(s);
    const LevelDensity level = gaussian_level(-0.6, 0.3, s);
    for (std::size_t k = 0; k < s.size(); ++k) {
      const double v = s(k, 0);
      const double p = std::min(1.0, oracle::normal_pdf(v, -0.6, 0.3) / h.pdf(&v));
      expected += p;
      var += p * (1 - p);
    }
    masked += static_cast<double>(mask(level, h, s, iota_ids(s.size()), s.size(), seed).masked.size());
  }
  INFO("masked " << masked << " expected " << expected);
  CHECK(std::fabs(masked - expected) < 3 * std::sqrt(var));
  CHECK(masked / 250000.0 > 0.5);
}

TEST_CASE("mask: same seed, same split") {
  const SampleSet s = gen_samples("bimodal", 3000, 7);
  const HistogramDensity h(s);
  const LevelDensity level = gaussian_level(-0.6, 0.3, s);
  const auto ids = iota_ids(s.size());
  CHECK(mask(level, h, s, ids, s.size(), 9).masked == mask(level, h, s, ids, s.size(), 9).masked);
}

TEST_CASE("fit_multilevel: normal samples, order 2") {
  const SampleSet s = normal_samples(10000, 11);
  MultilevelConfig cfg;
  cfg.seed = 11;
  const MultilevelResult r = fit_multilevel(s, polynomial_source(1, 2), cfg);
  // The first level masks what the histogram noise allows, computed independently here.
  const LevelFit first = fit_level(polynomial_basis(1, 2), s, unbounded_box(1));
  const HistogramDensity h(s);
  double expected = 0.0, var = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double v = s(k, 0);
    const double p = std::min(1.0, first.density.pdf(&v) / h.pdf(&v));
    expected += p;
    var += p * (1 - p);
  }
  REQUIRE(!r.trace.levels.empty());
  const double first_mass = r.density.levels()[0].mass();
  INFO("first mass " << first_mass << " expected fraction " << expected / 1e4);
  CHECK(first_mass > 0.95);
  if (r.trace.levels.size() > 1) {
    CHECK(std::fabs(static_cast<double>(r.trace.levels[0].masked) - expected) < 3 * std::sqrt(var));
  }
  const Eigen::VectorXd lam = r.density.levels()[0].lambda();
  CHECK(lam(1) == doctest::Approx(-0.5).epsilon(0.05));
}

TEST_CASE("fit_multilevel: a level cap of one gives a single level of mass one") {
  const SampleSet s = gen_samples("bimodal", 5000, 12);
  MultilevelConfig cfg;
  cfg.max_levels = 1;
  const MultilevelResult r = fit_multilevel(s, polynomial_source(1, 4), cfg);
  REQUIRE(r.density.levels().size() == 1);
  CHECK(r.density.levels()[0].mass() == 1.0);
  cfg.max_levels = 5;
  cfg.multilevel = false;
  const MultilevelResult off = fit_multilevel(s, polynomial_source(1, 4), cfg);
  REQUIRE(off.density.levels().size() == 1);
  CHECK(off.density.levels()[0].mass() == 1.0);
}

TEST_CASE("fit_multilevel: limit_real needs more than one level") {
  const SampleSet s = gen_samples("limit_real", 10000, 13);
  MultilevelConfig cfg;
  cfg.seed = 13;
  const MultilevelResult r = fit_multilevel(s, polynomial_source(1, 4), cfg);
  CHECK(r.density.levels().size() >= 2);
}

TEST_CASE("fit_multilevel: masses and remaining counts") {
  for (const char* id : {"bimodal", "limit_real", "gauss2d"}) {
    const CaseInfo info = case_info(id);
    const SampleSet s = gen_samples(id, 5000, 14);
    MultilevelConfig cfg;
    cfg.seed = 14;
    const MultilevelResult r = fit_multilevel(s, polynomial_source(info.dim, info.default_nm), cfg);
    double sum = 0.0;
    for (const auto& lv : r.density.levels()) {
      CHECK(lv.mass() > 0.0);
      sum += lv.mass();
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t l = 1; l < r.trace.levels.size(); ++l) {
      CHECK(r.trace.levels[l].samples_before < r.trace.levels[l - 1].samples_before);
    }
    CHECK(integrate_pdf(r.density) == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("fit_multilevel: switching levels off hurts limit_real") {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const SampleSet s = gen_samples("limit_real", 10000, 200 + seed);
    MultilevelConfig on;
    on.seed = seed;
    MultilevelConfig off = on;
    off.multilevel = false;
    const double kl_on = kl_of(fit_multilevel(s, polynomial_source(1, 4), on).density, s);
    const double kl_off = kl_of(fit_multilevel(s, polynomial_source(1, 4), off).density, s);
    if (kl_off > kl_on) ++wins;
  }
  INFO("multilevel better in " << wins << " of 25");
  CHECK(wins > 12);
}

}  // TEST_SUITE
