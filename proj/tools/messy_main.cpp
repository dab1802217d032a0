#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "messy/bench.hpp"
#include "messy/density.hpp"
#include "messy/error.hpp"
#include "messy/io.hpp"
#include "messy/search.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kEstimation = 2, kIo = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double parse_edge(const std::string& s) {
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw UsageError("bad bound '" + s + "'");
  }
  if (used != s.size()) throw UsageError("bad bound '" + s + "'");
  return v;
}

messy::Box parse_bounds(const std::vector<std::string>& specs) {
  messy::Box box;
  for (const auto& s : specs) {
    const auto comma = s.find(',');
    if (comma == std::string::npos) throw UsageError("--bounded expects lo,hi (got '" + s + "')");
    const messy::Interval iv{parse_edge(s.substr(0, comma)), parse_edge(s.substr(comma + 1))};
    if (!(iv.hi > iv.lo)) throw UsageError("--bounded needs lo < hi (got '" + s + "')");
    box.push_back(iv);
  }
  return box;
}

std::vector<int> parse_range(const std::string& s) {
  const auto dots = s.find("..");
  try {
    if (dots == std::string::npos) return {std::stoi(s)};
    const int a = std::stoi(s.substr(0, dots));
    const int b = std::stoi(s.substr(dots + 2));
    if (a > b) throw UsageError("empty range '" + s + "'");
    std::vector<int> out;
    for (int k = a; k <= b; ++k) out.push_back(k);
    return out;
  } catch (const std::logic_error&) {
    throw UsageError("bad range '" + s + "', expected a..b");
  }
}

struct EstimateArgs {
  std::string input, out, mode = "s", nb_range = "2..8";
  int nm = 4, iters = 10, levels = 5;
  std::uint64_t seed = 0;
  std::vector<std::string> bounded;
  bool no_mxed = false, holdout = false, single_level = false, no_timing = false;
};

int run_estimate(const EstimateArgs& a) {
  messy::SearchConfig cfg;
  if (a.mode == "p" || a.mode == "P") cfg.mode = messy::Mode::P;
  else if (a.mode == "s" || a.mode == "S") cfg.mode = messy::Mode::S;
  else throw UsageError("--mode must be p or s");
  cfg.nm = a.nm;
  cfg.nb_choices = parse_range(a.nb_range);
  cfg.iters = a.iters;
  cfg.seed = a.seed;
  cfg.max_levels = a.levels;
  cfg.multilevel = !a.single_level;
  cfg.use_mxed = !a.no_mxed;
  cfg.holdout = a.holdout;
  if (!a.bounded.empty()) {
    cfg.bounded = true;
    cfg.bounds = parse_bounds(a.bounded);
  }
  const messy::SampleSet samples = messy::read_csv(a.input);
  try {
    cfg.validate(samples.dim());
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (cfg.bounded) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      for (int j = 0; j < samples.dim(); ++j) {
        if (!cfg.bounds[static_cast<std::size_t>(j)].contains(samples(i, j))) {
          throw UsageError("sample " + std::to_string(i + 1) + " lies outside --bounded");
        }
      }
    }
  }
  const messy::MessyFit fit = messy::messy_fit(samples, cfg);
  messy::write_text(a.out, messy::estimate_to_json(fit, cfg, samples.size(), !a.no_timing));
  std::printf("best iteration %zu, kl %.6g, %zu level(s)\n%s\n", fit.best, fit.messy_s.kl_score(),
              fit.messy_s.levels().size(), messy::density_expression(fit.messy_s).c_str());
  return kOk;
}

struct BenchmarkArgs {
  std::string case_id = "bimodal", out;
  std::vector<std::size_t> n{1000};
  std::vector<std::string> methods{"kde", "mxed_oracle", "messy_p", "messy_s"};
  int replicates = 25, nm = 0, iters = 10;
  std::uint64_t seed = 0;
  bool no_timing = false;
};

int run_bench(const BenchmarkArgs& a) {
  messy::BenchmarkConfig cfg;
  cfg.case_id = a.case_id;
  cfg.n_list = a.n;
  cfg.methods = a.methods;
  cfg.replicates = a.replicates;
  cfg.seed = a.seed;
  cfg.nm = a.nm;
  cfg.iters = a.iters;
  // Parallel replicates would distort single-core timings.
  cfg.parallel_replicates = a.no_timing;
  messy::BenchmarkReport rep;
  try {
    rep = messy::run_benchmark(cfg);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  messy::write_text(a.out, messy::report_to_json(rep, !a.no_timing));
  std::printf("%-8s %-12s %4s %4s %12s %12s %12s\n", "N", "method", "ok", "fail", "kl", "err1-4",
              "err5-6");
  for (const auto& s : rep.summary) {
    std::printf("%-8zu %-12s %4zu %4zu %12.5g %12.4g %12.4g\n", s.n, s.method.c_str(), s.ok,
                s.failed, s.kl_mean, s.err_low_mean, s.err_high_mean);
  }
  return kOk;
}

int run_sample(const std::string& density, std::size_t n, std::uint64_t seed, const std::string& out) {
  const messy::MessyDensity d = messy::density_from_json(messy::read_text(density));
  messy::Rng rng(seed);
  const messy::DrawResult r = messy::draw(d, n, rng);
  if (!r.warning.empty()) std::fprintf(stderr, "warning: %s\n", r.warning.c_str());
  messy::write_csv(out, r.samples);
  return kOk;
}

int run_gen(const std::string& case_id, std::size_t n, std::uint64_t seed, const std::string& out) {
  messy::SampleSet s = [&] {
    try {
      return messy::gen_samples(case_id, n, seed);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }();
  messy::write_csv(out, s.values());
  return kOk;
}

int run_scaling(const std::string& dims, const std::vector<std::size_t>& ns, int repeats,
                std::uint64_t seed, const std::string& out, bool no_timing) {
  const std::vector<int> d = parse_range(dims);
  if (d.front() < 1) throw UsageError("dimensions must be >= 1");
  const messy::ScalingReport r = messy::run_scaling(d, ns, seed, repeats);
  if (!out.empty()) messy::write_text(out, messy::scaling_to_json(r, !no_timing));
  for (const auto& [dim, slope] : r.slopes) std::printf("d = %2d  slope %.3f\n", dim, slope);
  std::printf("total %.2f s\n", r.total_seconds);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Maximum-entropy symbolic density estimation from samples"};
  app.require_subcommand(1);

  EstimateArgs ea;
  auto* est = app.add_subcommand("estimate", "Fit a density to samples in a CSV file");
  est->add_option("--input", ea.input, "CSV of samples, one per row")->required();
  est->add_option("--out", ea.out, "Output JSON")->required();
  est->add_option("--mode", ea.mode, "p (polynomial) or s (symbolic search)")->capture_default_str();
  est->add_option("--nm", ea.nm, "Maximum basis order (even)")->capture_default_str();
  est->add_option("--nb-range", ea.nb_range, "Basis-count range a..b")->capture_default_str();
  est->add_option("--iters", ea.iters, "Search iterations")->capture_default_str();
  est->add_option("--seed", ea.seed, "Random seed")->capture_default_str();
  est->add_option("--bounded", ea.bounded, "Support lo,hi; repeat once per dimension (inf allowed)");
  est->add_option("--levels", ea.levels, "Maximum number of levels")->capture_default_str();
  est->add_flag("--single-level", ea.single_level, "Disable multilevel masking");
  est->add_flag("--no-mxed", ea.no_mxed, "Skip the moment-matching correction");
  est->add_flag("--holdout", ea.holdout, "Score candidates on a 20% held-out split");
  est->add_flag("--no-timing", ea.no_timing, "Omit timings from the output");

  BenchmarkArgs ba;
  auto* bench = app.add_subcommand("benchmark", "Run estimators on a synthetic case");
  bench->add_option("--case", ba.case_id, "Case id (bimodal, limit_real, exponential, gauss2d, gammaexp, normal, gaussNd:<d>)")
      ->capture_default_str();
  bench->add_option("--n", ba.n, "Sample sizes, comma separated")->delimiter(',');
  bench->add_option("--methods", ba.methods, "kde,hist,mxed_oracle,messy_p,messy_s")->delimiter(',');
  bench->add_option("--replicates", ba.replicates, "Replicates per sample size")->capture_default_str();
  bench->add_option("--seed", ba.seed, "Random seed")->capture_default_str();
  bench->add_option("--nm", ba.nm, "Maximum basis order; 0 uses the case default")->capture_default_str();
  bench->add_option("--iters", ba.iters, "Search iterations for messy_s")->capture_default_str();
  bench->add_option("--out", ba.out, "Output JSON")->required();
  bench->add_flag("--no-timing", ba.no_timing, "Omit timings (byte-stable output)");

  std::string density, sample_out;
  std::size_t sample_n = 1000;
  std::uint64_t sample_seed = 0;
  auto* smp = app.add_subcommand("sample", "Draw samples from a fitted density");
  smp->add_option("--density", density, "Density JSON")->required();
  smp->add_option("--n", sample_n, "Number of samples")->capture_default_str();
  smp->add_option("--seed", sample_seed, "Random seed")->capture_default_str();
  smp->add_option("--out", sample_out, "Output CSV")->required();

  std::string gen_case, gen_out;
  std::size_t gen_n = 1000;
  std::uint64_t gen_seed = 0;
  auto* gen = app.add_subcommand("gen", "Generate samples of a synthetic case");
  gen->add_option("--case", gen_case, "Case id")->required();
  gen->add_option("--n", gen_n, "Number of samples")->capture_default_str();
  gen->add_option("--seed", gen_seed, "Random seed")->capture_default_str();
  gen->add_option("--out", gen_out, "Output CSV")->required();

  std::string sc_dims = "1..10", sc_out;
  std::vector<std::size_t> sc_n{100, 200, 400, 800, 1600, 3200};
  int sc_repeats = 5;
  std::uint64_t sc_seed = 0;
  bool sc_no_timing = false;
  auto* sc = app.add_subcommand("scaling", "Time the multiplier solve against N on gaussNd");
  sc->add_option("--dims", sc_dims, "Dimension range a..b")->capture_default_str();
  sc->add_option("--n", sc_n, "Sample sizes, comma separated")->delimiter(',');
  sc->add_option("--repeats", sc_repeats, "Timing repeats (best is kept)")->capture_default_str();
  sc->add_option("--seed", sc_seed, "Random seed")->capture_default_str();
  sc->add_option("--out", sc_out, "Output JSON");
  sc->add_flag("--no-timing", sc_no_timing, "Omit timings");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*est) return run_estimate(ea);
    if (*bench) return run_bench(ba);
    if (*smp) return run_sample(density, sample_n, sample_seed, sample_out);
    if (*gen) return run_gen(gen_case, gen_n, gen_seed, gen_out);
    if (*sc) return run_scaling(sc_dims, sc_n, sc_repeats, sc_seed, sc_out, sc_no_timing);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const messy::IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kIo;
  } catch (const messy::ParseError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kIo;
  } catch (const messy::Error& e) {
    std::fprintf(stderr, "estimation failed: %s\n", e.what());
    return kEstimation;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "estimation failed: %s\n", e.what());
    return kEstimation;
  }
  return kUsage;
}
