// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "messy/basis.hpp"
#include "messy/bench.hpp"
#include "messy/error.hpp"
#include "messy/lagrange.hpp"
#include "messy/multilevel.hpp"
#include "messy/mxed.hpp"
#include "messy/search.hpp"
#include "oracles.hpp"

using namespace messy;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Every fit produced during the run, for the structural criteria.
struct FitRecord {
  std::string label;
  MessyFit fit;
};
std::vector<FitRecord> g_fits;

MessyFit run_fit(const std::string& label, const SampleSet& s, const SearchConfig& cfg) {
  MessyFit f = messy_fit(s, cfg);
  g_fits.push_back({label, f});
  return f;
}

SearchConfig config_for(const std::string& id, Mode mode, int iters, std::uint64_t seed) {
  const CaseInfo info = case_info(id);
  SearchConfig cfg;
  cfg.mode = mode;
  cfg.nm = info.default_nm;
  cfg.iters = iters;
  cfg.seed = seed;
  cfg.bounded = info.bounded;
  cfg.bounds = info.bounds;
  return cfg;
}

SampleSet normal_samples(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<double> v(n);
  for (auto& e : v) e = z(rng);
  return SampleSet::from_column(v);
}

Eigen::VectorXd moments_of(const Eigen::MatrixXd& v, int order) {
  Eigen::VectorXd mu(order);
  for (int k = 1; k <= order; ++k) mu(k - 1) = v.col(0).array().pow(k).mean();
  return mu;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome c1_gaussian() {
  int good = 0;
  double worst_time = 0.0;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const SampleSet s = normal_samples(10000, 1000 + seed);
    SearchConfig cfg = config_for("normal", Mode::P, 1, seed);
    cfg.nm = 2;
    const auto t0 = Clock::now();
    const MessyFit f = run_fit("normal P", s, cfg);
    worst_time = std::max(worst_time, since(t0));
    const LevelDensity& lv = f.messy_p->levels()[f.messy_p->dominant_level()];
    const double c1 = lv.lambda()(0), c2 = lv.lambda()(1);
    if (c2 >= -0.55 && c2 <= -0.45 && std::fabs(c1) < 0.05) ++good;
  }
  return {good >= 20 && worst_time < 5.0,
          std::to_string(good) + "/25 seeds in range, slowest fit " + fmt("%.2f s", worst_time)};
}

Outcome c2_closed_form_vs_newton() {
  auto f = [](double t) { return std::exp(0.5 * t - t * t - 0.1 * t * t * t * t); };
  const std::vector<Expr> r = polynomial_basis(1, 4);
  constexpr int kReps = 20;
  Eigen::MatrixXd closed(kReps, 4), grid(kReps, 4);
  for (int rep = 0; rep < kReps; ++rep) {
    const SampleSet s = SampleSet::from_column(oracle::rejection_sample(f, -6.0, 6.0, 1.1, 100000, 77 + rep));
    const BasisSet o = orthonormalize(build_basis(r, 1), s);
    closed.row(rep) = raw_coefficients(o, fit_multipliers(o, s).lambda).transpose();
    const NewtonState g = med_newton_oracle(moments_of(s.values(), 4), r,
                                            default_oracle_grid(s.mean(), s.stddev()));
    if (!g.converged) return {false, "grid Newton did not converge on replicate " + std::to_string(rep)};
    grid.row(rep) = g.lambda.transpose();
  }
  // Criterion: the first data set, with per-estimator SEs from the replicate spread.
  bool ok = true;
  std::ostringstream d;
  double worst = 0.0, worst_paired = 0.0;
  for (int k = 0; k < 4; ++k) {
    const Eigen::ArrayXd a = closed.col(k).array(), b = grid.col(k).array();
    const double sd_a = oracle::mean_se(a) * std::sqrt(double(kReps));
    const double sd_b = oracle::mean_se(b) * std::sqrt(double(kReps));
    const double z = std::fabs(closed(0, k) - grid(0, k)) / std::sqrt(sd_a * sd_a + sd_b * sd_b);
    worst = std::max(worst, z);
    if (!(z < 5.0)) ok = false;
    const Eigen::ArrayXd diff = a - b;
    worst_paired = std::max(worst_paired, std::fabs(diff.mean()) / oracle::mean_se(diff));
  }
  d << "largest gap " << fmt("%.2f", worst) << " combined SE; replicate-mean paired gap "
    << fmt("%.2f", worst_paired) << " SE";
  return {ok, d.str()};
}

Outcome c3_conditioning() {
  const SampleSet s = gen_samples("bimodal", 10000, 3);
  double worst = 0.0;
  for (int order = 2; order <= 10; ++order) {
    const BasisSet o = orthonormalize(build_basis(polynomial_basis(1, order), 1), s);
    worst = std::max(worst, condition_number(assemble_hessian(features(o, s))));
  }
  const double raw = condition_number(assemble_hessian(features(build_basis(polynomial_basis(1, 10), 1), s)));
  return {worst <= 10.0 && raw > 1e6,
          "orthonormal cond max " + fmt("%.4f", worst) + ", raw order-10 cond " + fmt("%.3g", raw)};
}

Outcome c4_moment_matching() {
  struct Case {
    const char* id;
    int iters;
  };
  const std::vector<Case> cases{{"bimodal", 4}, {"limit_real", 4}, {"exponential", 4},
                                {"normal", 4},  {"gauss2d", 3},    {"gammaexp", 3}};
  int runs = 0, matched = 0, fast = 0, full_order = 0, p_runs = 0, p_fast = 0;
  int worst_iters = 0;
  std::vector<int> steps;
  int selected = 0, selected_matched = 0;
  double worst_g = 0.0;
  std::string slow;
  for (const auto& c : cases) {
    for (std::uint64_t seed = 0; seed < 2; ++seed) {
      const SampleSet s = gen_samples(c.id, 10000, 40 + seed);
      const MessyFit f = run_fit(std::string(c.id) + " S", s, config_for(c.id, Mode::S, c.iters, seed));
      ++selected;
      const IterationReport& chosen = f.iterations[f.best];
      if (chosen.mxed_applied && chosen.mxed_gnorm <= 1e-6) ++selected_matched;
      for (const auto& it : f.iterations) {
        if (!it.ok) continue;
        ++runs;
        if (it.mxed_applied && it.mxed_gnorm <= 1e-6) ++matched;
        if (it.mxed_applied && it.mxed_order == case_info(c.id).default_nm) ++full_order;
        if (it.mxed_applied) steps.push_back(it.mxed_iterations);
        if (it.index == 0) {
          ++p_runs;
          if (it.mxed_applied && it.mxed_iterations <= 5) ++p_fast;
        }
        if (it.mxed_applied && it.mxed_iterations <= 5) {
          ++fast;
        } else if (it.mxed_applied && slow.size() < 200) {
          slow += " " + std::string(c.id) + "#" + std::to_string(it.index) + ":" + std::to_string(it.mxed_iterations);
        }
        worst_g = std::max(worst_g, it.mxed_applied ? it.mxed_gnorm : INFINITY);
        worst_iters = std::max(worst_iters, it.mxed_iterations);
      }
    }
  }
  std::ostringstream d;
  d << matched << "/" << runs << " runs with |g| <= 1e-6 (worst " << fmt("%.2g", worst_g) << "), "
    << full_order << "/" << runs << " at full order, " << fast << "/" << runs
    << " in <= 5 Newton steps (polynomial first iterations " << p_fast << "/" << p_runs << ", median "
    << (steps.empty() ? 0 : (std::sort(steps.begin(), steps.end()), steps[steps.size() / 2])) << ", max "
    << worst_iters << ")";
  d << "; selected estimates matched " << selected_matched << "/" << selected;
  if (!slow.empty()) d << "; slower:" << slow;
  return {runs > 0 && matched == runs && full_order == runs && fast == runs, d.str()};
}

Outcome c5_gauss2d() {
  const std::vector<double> truth{-2.0 / 3, 2.0 / 3, -2.0 / 3};
  double worst = 0.0;
  std::ostringstream d;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SampleSet s = gen_samples("gauss2d", 10000, 50 + seed);
    const MessyFit f = run_fit("gauss2d P", s, config_for("gauss2d", Mode::P, 1, seed));
    const LevelDensity& lv = f.messy_p->levels()[f.messy_p->dominant_level()];
    // Basis order: x1, x2, x1^2, x1*x2, x2^2.
    for (int k = 0; k < 3; ++k) worst = std::max(worst, std::fabs(lv.lambda()(2 + k) - truth[k]));
    if (seed == 0) {
      d << "seed 0: " << fmt("%.3f", lv.lambda()(2)) << ", " << fmt("%.3f", lv.lambda()(3)) << ", "
        << fmt("%.3f", lv.lambda()(4)) << "; ";
    }
  }
  d << "largest deviation over 5 seeds " << fmt("%.3f", worst);
  return {worst <= 0.1, d.str()};
}

Outcome c6_bounded_exponential() {
  const SampleSet s = gen_samples("exponential", 10000, 60);
  const MessyFit f = run_fit("exponential P", s, config_for("exponential", Mode::P, 1, 60));
  const MessyDensity& d = *f.messy_p;
  bool zero = true;
  for (double t : {-1e-12, -1e-6, -0.5, -3.0, -100.0}) zero = zero && d.pdf(&t) == 0.0;
  const double mean = oracle::simpson(
      [&](double t) { return t * d.pdf(&t); }, 0.0, 40.0, 400000);
  const double se = s.stddev()(0) / std::sqrt(10000.0);
  const bool mean_ok = std::fabs(mean - 1.0) < 3 * se;

  int degraded = 0;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const SampleSet x = gen_samples("exponential", 10000, 600 + seed);
    SearchConfig on = config_for("exponential", Mode::P, 1, seed);
    SearchConfig off = on;
    off.use_mxed = false;
    const double kl_on = run_fit("exponential P", x, on).messy_p->kl_score();
    const double kl_off = run_fit("exponential P no-mxed", x, off).messy_p->kl_score();
    if (kl_off > kl_on) ++degraded;
  }
  std::ostringstream o;
  o << "pdf(x<0) = 0: " << (zero ? "yes" : "no") << ", mean " << fmt("%.4f", mean) << " (3 SE = "
    << fmt("%.4f", 3 * se) << "), no-MxED worse in " << degraded << "/25";
  return {zero && mean_ok && degraded >= 20, o.str()};
}

Outcome c7_limit_real() {
  int s_ok = 0, reps = 3;
  std::vector<double> conds;
  double raw4_min = INFINITY;
  for (std::uint64_t seed = 0; seed < static_cast<std::uint64_t>(reps); ++seed) {
    const SampleSet s = gen_samples("limit_real", 10000, 70 + seed);
    const double raw4 = condition_number(assemble_hessian(features(build_basis(polynomial_basis(1, 4), 1), s)));
    raw4_min = std::min(raw4_min, raw4);
    SearchConfig cfg = config_for("limit_real", Mode::S, 6, seed);
    cfg.nm = 2;
    const MessyFit f = run_fit("limit_real S nm2", s, cfg);
    if (f.messy_p && f.messy_s.kl_score() <= f.messy_p->kl_score()) ++s_ok;
    for (std::size_t i = 1; i < f.iterations.size(); ++i) {
      if (!f.iterations[i].ok) continue;
      for (const auto& lv : f.iterations[i].trace.levels) conds.push_back(lv.cond_raw / raw4);
    }
  }
  if (conds.empty()) return {false, "no symbolic level was fitted"};
  std::sort(conds.begin(), conds.end());
  const auto below = std::count_if(conds.begin(), conds.end(), [](double c) { return c < 1.0; });
  const double median = conds[conds.size() / 2];
  std::ostringstream d;
  d << "S <= P in " << s_ok << "/" << reps << "; symbolic level cond below raw quartic in " << below << "/"
    << conds.size() << " (median ratio " << fmt("%.3g", median) << ", quartic cond >= " << fmt("%.3g", raw4_min) << ")";
  return {s_ok == reps && median < 1.0 && static_cast<std::size_t>(below) * 2 > conds.size(), d.str()};
}

Outcome c8_selection() {
  // Every fit made in this run, plus a benchmark ensemble.
  BenchmarkConfig bc;
  bc.case_id = "bimodal";
  bc.n_list = {100, 1000};
  bc.methods = {"messy_p", "messy_s"};
  bc.replicates = 5;
  bc.iters = 4;
  bc.seed = 80;
  const BenchmarkReport r = run_benchmark(bc);
  int checked = 0, bad = 0;
  for (const auto& rep : r.replicates) {
    const MethodRun *p = nullptr, *s = nullptr;
    for (const auto& m : rep.runs) (m.method == "messy_p" ? p : s) = &m;
    if (!p || !s || !p->ok || !s->ok) continue;
    ++checked;
    if (s->kl > p->kl) ++bad;
  }
  for (const auto& rec : g_fits) {
    if (!rec.fit.messy_p) continue;
    ++checked;
    if (rec.fit.messy_s.kl_score() > rec.fit.messy_p->kl_score()) ++bad;
  }
  return {checked > 0 && bad == 0, std::to_string(checked - bad) + "/" + std::to_string(checked) + " runs with S <= P"};
}

Outcome c9_scaling() {
  setenv("MESSY_THREADS", "1", 1);
  std::vector<int> dims;
  for (int d = 1; d <= 10; ++d) dims.push_back(d);
  const ScalingReport r = run_scaling(dims, {100, 200, 400, 800, 1600, 3200}, 90, 5);
  unsetenv("MESSY_THREADS");
  bool ok = r.total_seconds < 600.0;
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& [d, slope] : r.slopes) {
    lo = std::min(lo, slope);
    hi = std::max(hi, slope);
    if (std::fabs(slope - 1.0) > 0.3) ok = false;
  }
  std::ostringstream o;
  o << "slopes in [" << fmt("%.3f", lo) << ", " << fmt("%.3f", hi) << "] over d = 1..10, sweep "
    << fmt("%.1f s", r.total_seconds);
  return {ok, o.str()};
}

// Integral of a single level over its support by composite Simpson, on a
// window far wider than the data.
double level_integral(const LevelDensity& lv) {
  const Reference& ref = lv.reference();
  std::vector<Interval> box;
  for (int j = 0; j < lv.dim(); ++j) {
    const double sd = std::sqrt(ref.cov(j, j));
    const Interval& w = ref.window[static_cast<std::size_t>(j)];
    box.push_back({std::max(lv.support()[static_cast<std::size_t>(j)].lo, w.lo - 5 * sd),
                   std::min(lv.support()[static_cast<std::size_t>(j)].hi, w.hi + 5 * sd)});
  }
  if (lv.dim() == 1) {
    return oracle::simpson([&](double t) { return lv.pdf(&t); }, box[0].lo, box[0].hi, 200000);
  }
  return oracle::simpson2(
      [&](double a, double b) {
        const double p[2] = {a, b};
        return lv.pdf(p);
      },
      box[0].lo, box[0].hi, box[1].lo, box[1].hi, 1000);
}

Outcome c10_mass_and_normalization() {
  int checked = 0, mass_bad = 0, int_bad = 0;
  double worst_mass = 0.0, worst_int = 0.0;
  std::string worst_label;
  auto check = [&](const MessyDensity& d, const std::string& label) {
    if (d.dim() > 2) return;
    ++checked;
    double m = 0.0, total = 0.0;
    for (const auto& lv : d.levels()) {
      m += lv.mass();
      total += lv.mass() * level_integral(lv);
    }
    worst_mass = std::max(worst_mass, std::fabs(m - 1.0));
    if (std::fabs(total - 1.0) > worst_int) {
      worst_int = std::fabs(total - 1.0);
      worst_label = label;
    }
    if (std::fabs(m - 1.0) > 1e-12) ++mass_bad;
    if (std::fabs(total - 1.0) > 1e-4) ++int_bad;
  };
  for (const auto& rec : g_fits) {
    for (const auto& it : rec.fit.iterations) {
      if (it.ok && it.density) check(*it.density, rec.label + " iteration " + std::to_string(it.index));
    }
  }
  // The benchmark suite's own bookkeeping, across every case.
  int report_runs = 0, report_bad = 0;
  for (const char* id : {"bimodal", "limit_real", "exponential", "normal", "gauss2d", "gammaexp"}) {
    BenchmarkConfig bc;
    bc.case_id = id;
    bc.n_list = {1000};
    bc.methods = {"mxed_oracle", "messy_p", "messy_s"};
    bc.replicates = 2;
    bc.iters = 3;
    bc.seed = 100;
    const BenchmarkReport r = run_benchmark(bc);
    for (const auto& rep : r.replicates) {
      for (const auto& run : rep.runs) {
        if (!run.ok) continue;
        ++report_runs;
        if (std::fabs(run.mass_sum - 1.0) > 1e-12 || std::fabs(run.integral - 1.0) > 1e-4) ++report_bad;
      }
    }
  }
  std::ostringstream o;
  o << checked << " densities by independent quadrature: mass error max " << fmt("%.2g", worst_mass)
    << ", integral error max " << fmt("%.2g", worst_int) << " (" << worst_label << "); benchmark runs " << report_runs - report_bad << "/"
    << report_runs << " consistent";
  return {checked > 0 && mass_bad == 0 && int_bad == 0 && report_bad == 0, o.str()};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  // C8 and C10 also audit the fits made by the earlier criteria, so they run last.
  const std::vector<Criterion> criteria{
      {"C1 gaussian ground truth", c1_gaussian},
      {"C2 closed form vs grid Newton", c2_closed_form_vs_newton},
      {"C3 orthonormal conditioning", c3_conditioning},
      {"C4 moment matching after correction", c4_moment_matching},
      {"C5 2D gaussian coefficients", c5_gauss2d},
      {"C6 bounded exponential", c6_bounded_exponential},
      {"C7 limit of realizability", c7_limit_real},
      {"C8 selection invariant", c8_selection},
      {"C9 scaling", c9_scaling},
      {"C10 mass and normalization", c10_mass_and_normalization},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s  %-38s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), since(t0));
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
