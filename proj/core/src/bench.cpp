#include "messy/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <stdexcept>

#include "messy/baseline.hpp"
#include "messy/basis.hpp"
#include "messy/error.hpp"
#include "messy/lagrange.hpp"
#include "messy/mxed.hpp"
#include "messy/parallel.hpp"

namespace messy {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int parse_nd(const std::string& id) {
  const std::string prefix = "gaussNd:";
  if (id.rfind(prefix, 0) != 0) return 0;
  const std::string tail = id.substr(prefix.size());
  if (tail.empty() || tail.find_first_not_of("0123456789") != std::string::npos) return -1;
  const int d = std::stoi(tail);
  return d >= 1 && d <= 32 ? d : -1;
}

Box half_line(int d) {
  Box b(static_cast<std::size_t>(d));
  for (auto& i : b) i = {0.0, std::numeric_limits<double>::infinity()};
  return b;
}

Eigen::MatrixXd gaussian_draws(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                               std::size_t n, Rng& rng) {
  const Eigen::MatrixXd l = cov.llt().matrixL();
  std::normal_distribution<double> z;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), mean.size());
  Eigen::VectorXd e(mean.size());
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < e.size(); ++j) e(j) = z(rng);
    out.row(i) = (mean + l * e).transpose();
  }
  return out;
}

// Exponent vectors in the order polynomial_basis emits them.
std::vector<std::vector<int>> monomial_exponents(int dim, int max_order) {
  std::vector<std::vector<int>> out;
  std::vector<int> exps(static_cast<std::size_t>(dim), 0);
  for (int deg = 1; deg <= max_order; ++deg) {
    auto rec = [&](auto&& self, int j, int left) -> void {
      if (j == dim - 1) {
        exps[static_cast<std::size_t>(j)] = left;
        out.push_back(exps);
        return;
      }
      for (int k = left; k >= 0; --k) {
        exps[static_cast<std::size_t>(j)] = k;
        self(self, j + 1, left - k);
      }
    };
    rec(rec, 0, deg);
  }
  return out;
}

double binom(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

double double_factorial_odd(int m) {  // (m-1)!! for even m
  double r = 1.0;
  for (int i = m - 1; i > 1; i -= 2) r *= i;
  return r;
}

std::vector<std::vector<double>> kde_moments(const KdeDensity& kde, int max_order) {
  const int d = kde.dim();
  const double h = kde.bandwidth();
  const Eigen::MatrixXd& c = kde.centres();
  std::vector<std::vector<double>> out(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    // standardized moments E[z^i] of the mixture of N(c, h^2)
    std::vector<double> mz(static_cast<std::size_t>(max_order) + 1, 0.0);
    mz[0] = 1.0;
    for (int i = 1; i <= max_order; ++i) {
      double acc = 0.0;
      for (int m = 0; m <= i; m += 2) {
        acc += binom(i, m) * std::pow(h, m) * double_factorial_odd(m) *
               c.col(j).array().pow(i - m).mean();
      }
      mz[static_cast<std::size_t>(i)] = acc;
    }
    const double mu = kde.mean()(j), s = kde.scale()(j);
    for (int k = 1; k <= max_order; ++k) {
      double acc = 0.0;
      for (int i = 0; i <= k; ++i) {
        acc += binom(k, i) * std::pow(mu, k - i) * std::pow(s, i) * mz[static_cast<std::size_t>(i)];
      }
      out[static_cast<std::size_t>(j)].push_back(acc);
    }
  }
  return out;
}

template <class LogPdf>
double floored_kl(const Eigen::MatrixXd& x, LogPdf&& log_pdf) {
  double acc = 0.0;
  Eigen::VectorXd row(x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    row = x.row(i).transpose();
    acc += std::max(log_pdf(row.data()), -50.0);
  }
  return -acc / static_cast<double>(x.rows());
}

void fill_density_fields(MethodRun& run, const MessyDensity& dens, const Eigen::MatrixXd& x,
                         const std::vector<std::vector<double>>& ref, std::uint64_t seed) {
  run.kl = kl_criterion(dens, x).value;
  const MomentErrors me = moment_errors(raw_density_moments(dens, 6, seed), ref);
  run.moment_err_low = me.low;
  run.moment_err_high = me.high;
  run.masses.clear();
  run.exponents.clear();
  run.mass_sum = 0.0;
  for (const auto& lv : dens.levels()) {
    run.masses.push_back(lv.mass());
    run.exponents.push_back(render(lv.exponent(), dens.dim()));
    run.mass_sum += lv.mass();
  }
  run.expression = density_expression(dens);
  run.integral = integrate_pdf(dens);
}

MethodRun run_kde(const SampleSet& s, const std::vector<std::vector<double>>& ref,
                  std::uint64_t seed) {
  MethodRun run;
  run.method = "kde";
  const auto t0 = Clock::now();
  KdeOptions opt;
  opt.seed = seed;
  const KdeDensity kde = kde_fit(s, opt);
  run.seconds = seconds_since(t0);
  run.kl = floored_kl(s.values(), [&](const double* x) { return kde.log_pdf(x); });
  const MomentErrors me = moment_errors(kde_moments(kde, 6), ref);
  run.moment_err_low = me.low;
  run.moment_err_high = me.high;
  char buf[64];
  std::snprintf(buf, sizeof buf, "gaussian kde, h = %.4g (standardized)", kde.bandwidth());
  run.expression = buf;
  run.ok = true;
  return run;
}

MethodRun run_hist(const SampleSet& s, const std::vector<std::vector<double>>& ref) {
  MethodRun run;
  run.method = "hist";
  const auto t0 = Clock::now();
  const HistogramDensity h = histogram_fit(s);
  run.seconds = seconds_since(t0);
  run.kl = floored_kl(s.values(), [&](const double* x) { return std::log(h.pdf(x)); });
  std::vector<std::vector<double>> est(static_cast<std::size_t>(s.dim()));
  for (int j = 0; j < s.dim(); ++j) {
    for (int k = 1; k <= 6; ++k) est[static_cast<std::size_t>(j)].push_back(h.marginal_moment(j, k));
  }
  const MomentErrors me = moment_errors(est, ref);
  run.moment_err_low = me.low;
  run.moment_err_high = me.high;
  run.expression = "histogram, " + std::to_string(h.bins_per_dim()) + " bins per dimension";
  run.ok = true;
  return run;
}

// Gaussian prior fitted to the sample mean and covariance, corrected to match
// polynomial moments up to nm.
MethodRun run_mxed(const SampleSet& s, int nm, const std::vector<std::vector<double>>& ref,
                   std::uint64_t seed) {
  MethodRun run;
  run.method = "mxed_oracle";
  const auto t0 = Clock::now();
  const int d = s.dim();
  const Eigen::VectorXd mean = s.mean();
  const Eigen::MatrixXd cov = s.covariance();
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw DegenerateDataError("sample covariance is not positive definite");
  const Eigen::MatrixXd prec = llt.solve(Eigen::MatrixXd::Identity(d, d));
  const Eigen::VectorXd pm = prec * mean;

  const std::vector<Expr> basis = polynomial_basis(d, 2);
  const auto exps = monomial_exponents(d, 2);
  Eigen::VectorXd lam(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t i = 0; i < exps.size(); ++i) {
    std::vector<int> idx;
    for (int j = 0; j < d; ++j) {
      for (int k = 0; k < exps[i][static_cast<std::size_t>(j)]; ++k) idx.push_back(j);
    }
    const auto ii = static_cast<Eigen::Index>(i);
    if (idx.size() == 1) lam(ii) = pm(idx[0]);
    else if (idx[0] == idx[1]) lam(ii) = -0.5 * prec(idx[0], idx[0]);
    else lam(ii) = -prec(idx[0], idx[1]);
  }
  const Box support = unbounded_box(d);
  LevelDensity prior_level(basis, lam, support, 1.0, make_reference(s, support));
  const MessyDensity prior({prior_level}, Mode::P);

  Rng rng(derive_seed(seed, {0x70726972ULL}));
  const Eigen::MatrixXd y = gaussian_draws(mean, cov, 20000, rng);
  const std::vector<Expr> r = polynomial_basis(d, nm);
  const Eigen::VectorXd mu = sample_moments(s.values(), r).mean;
  const MxedResult mx = mxed_correct(y, mu, r, NewtonOptions{});
  const MessyDensity dens = apply_correction(prior, r, mx.state.lambda);
  run.seconds = seconds_since(t0);
  run.mxed_iterations = mx.state.iterations;
  run.mxed_gnorm = mx.state.g.lpNorm<Eigen::Infinity>();
  fill_density_fields(run, dens, s.values(), ref, derive_seed(seed, {0x6d6f6dULL}));
  run.ok = true;
  return run;
}

std::vector<MethodRun> run_messy(const SampleSet& s, const CaseInfo& info, int nm, int iters,
                                 bool want_p, bool want_s,
                                 const std::vector<std::vector<double>>& ref, std::uint64_t seed) {
  SearchConfig cfg;
  cfg.mode = want_s ? Mode::S : Mode::P;
  cfg.nm = nm;
  cfg.iters = iters;
  cfg.seed = seed;
  cfg.bounded = info.bounded;
  cfg.bounds = info.bounds;
  std::vector<MethodRun> out;
  const auto t0 = Clock::now();
  MessyFit fit;
  std::string error;
  try {
    fit = messy_fit(s, cfg);
  } catch (const Error& e) {
    error = e.what();
  }
  const double total = seconds_since(t0);
  auto fill = [&](MethodRun& run, const IterationReport& it, const MessyDensity& dens) {
    for (const auto& lv : it.trace.levels) run.cond.push_back(lv.cond_raw);
    run.mxed_iterations = it.mxed_applied ? it.mxed_iterations : -1;
    run.mxed_gnorm = it.mxed_gnorm;
    fill_density_fields(run, dens, s.values(), ref, derive_seed(seed, {0x6d6f6dULL}));
    run.ok = true;
  };
  if (want_p) {
    MethodRun run;
    run.method = "messy_p";
    if (!error.empty()) {
      run.error = error;
    } else if (!fit.messy_p) {
      run.error = fit.iterations.front().error;
    } else {
      run.seconds = fit.iterations.front().seconds;
      try {
        fill(run, fit.iterations.front(), *fit.messy_p);
      } catch (const Error& e) {
        run.ok = false;
        run.error = e.what();
      }
    }
    out.push_back(std::move(run));
  }
  if (want_s) {
    MethodRun run;
    run.method = "messy_s";
    if (!error.empty()) {
      run.error = error;
    } else {
      run.seconds = total;
      try {
        fill(run, fit.iterations[fit.best], fit.messy_s);
      } catch (const Error& e) {
        run.ok = false;
        run.error = e.what();
      }
    }
    out.push_back(std::move(run));
  }
  return out;
}

void mean_se(const std::vector<double>& v, double& mean, double& se) {
  mean = se = 0.0;
  if (v.empty()) return;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace

CaseInfo case_info(const std::string& id) {
  CaseInfo c;
  c.id = id;
  if (id == "bimodal") {
    c.default_nm = 4;
  } else if (id == "limit_real") {
    c.default_nm = 4;
  } else if (id == "exponential") {
    c.bounded = true;
    c.bounds = half_line(1);
  } else if (id == "gauss2d") {
    c.dim = 2;
  } else if (id == "gammaexp") {
    c.dim = 2;
    c.bounded = true;
    c.bounds = half_line(2);
  } else if (id == "normal") {
  } else {
    const int d = parse_nd(id);
    if (d <= 0) throw std::invalid_argument("unknown case '" + id + "'");
    c.dim = d;
  }
  return c;
}

std::vector<std::string> known_cases() {
  return {"bimodal", "limit_real", "exponential", "gauss2d", "gammaexp", "normal", "gaussNd:<d>"};
}

std::vector<std::string> known_methods() {
  return {"kde", "hist", "mxed_oracle", "messy_p", "messy_s"};
}

void gauss_nd_parameters(int d, Eigen::VectorXd& mean, Eigen::MatrixXd& cov) {
  Rng rng(derive_seed(0x67617573734e64ULL, {static_cast<std::uint64_t>(d)}));
  std::normal_distribution<double> z(0.0, std::sqrt(0.5));
  mean.resize(d);
  for (int j = 0; j < d; ++j) mean(j) = z(rng);
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j <= i; ++j) u(i, j) = z(rng);
  }
  cov = Eigen::MatrixXd::Identity(d, d) + u * u.transpose();
}

SampleSet gen_samples(const std::string& case_id, std::size_t n, std::uint64_t seed) {
  const CaseInfo info = case_info(case_id);
  Rng rng(seed);
  std::normal_distribution<double> z;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), info.dim);
  const auto rows = x.rows();
  if (case_id == "bimodal") {
    std::bernoulli_distribution left(0.5);
    for (Eigen::Index i = 0; i < rows; ++i) {
      x(i, 0) = left(rng) ? -0.6 + 0.3 * z(rng) : 0.7 + 0.5 * z(rng);
    }
  } else if (case_id == "limit_real") {
    std::bernoulli_distribution left(LimitRealMixture::weight);
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double m = left(rng) ? LimitRealMixture::mean_left : LimitRealMixture::mean_right;
      x(i, 0) = m + LimitRealMixture::sd * z(rng);
    }
  } else if (case_id == "exponential") {
    std::exponential_distribution<double> e(1.0);
    for (Eigen::Index i = 0; i < rows; ++i) x(i, 0) = e(rng);
  } else if (case_id == "gauss2d") {
    Eigen::Matrix2d cov;
    cov << 1.0, 0.5, 0.5, 1.0;
    x = gaussian_draws(Eigen::Vector2d::Zero(), cov, n, rng);
  } else if (case_id == "gammaexp") {
    std::exponential_distribution<double> e(2.0);
    std::gamma_distribution<double> g(3.0, 0.5);
    for (Eigen::Index i = 0; i < rows; ++i) {
      x(i, 0) = e(rng);
      x(i, 1) = g(rng);
    }
  } else if (case_id == "normal") {
    for (Eigen::Index i = 0; i < rows; ++i) x(i, 0) = z(rng);
  } else {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    gauss_nd_parameters(info.dim, mean, cov);
    x = gaussian_draws(mean, cov, n, rng);
  }
  return SampleSet(std::move(x), case_id, seed);
}

double relative_error(double estimate, double reference) {
  return std::fabs(estimate - reference) / (std::fabs(reference) + 1e-9);
}

MomentErrors moment_errors(const std::vector<std::vector<double>>& est,
                           const std::vector<std::vector<double>>& ref) {
  if (est.size() != ref.size()) throw std::invalid_argument("moment_errors: dimension mismatch");
  MomentErrors m;
  int nl = 0, nh = 0;
  for (std::size_t j = 0; j < est.size(); ++j) {
    const std::size_t orders = std::min(est[j].size(), ref[j].size());
    for (std::size_t k = 0; k < orders; ++k) {
      const double e = relative_error(est[j][k], ref[j][k]);
      if (k < 4) {
        m.low += e;
        ++nl;
      } else if (k < 6) {
        m.high += e;
        ++nh;
      }
    }
  }
  if (nl) m.low /= nl;
  if (nh) m.high /= nh;
  return m;
}

std::vector<std::vector<double>> raw_sample_moments(const Eigen::MatrixXd& x, int max_order) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (int k = 1; k <= max_order; ++k) {
      out[static_cast<std::size_t>(j)].push_back(x.col(j).array().pow(k).mean());
    }
  }
  return out;
}

std::vector<std::vector<double>> raw_density_moments(const MessyDensity& d, int max_order,
                                                     std::uint64_t seed) {
  const int dim = d.dim();
  if (dim <= 2) {
    std::vector<std::vector<double>> out(static_cast<std::size_t>(dim));
    for (int j = 0; j < dim; ++j) {
      for (int k = 1; k <= max_order; ++k) {
        out[static_cast<std::size_t>(j)].push_back(density_expectation(d, power(j, k)));
      }
    }
    return out;
  }
  Rng rng(seed);
  return raw_sample_moments(draw(d, 20000, rng).samples, max_order);
}

std::string density_expression(const MessyDensity& d) {
  std::string out;
  char buf[48];
  for (const auto& lv : d.levels()) {
    if (!out.empty()) out += " + ";
    std::snprintf(buf, sizeof buf, "%.4g*exp(", lv.mass() * std::exp(-lv.log_z()));
    out += buf;
    out += render(lv.exponent(), d.dim());
    out += ")";
  }
  return out;
}

BenchmarkReport run_benchmark(const BenchmarkConfig& cfg) {
  BenchmarkReport rep;
  rep.config = cfg;
  rep.info = case_info(cfg.case_id);
  if (cfg.replicates < 1) throw std::invalid_argument("replicates must be >= 1");
  if (cfg.n_list.empty()) throw std::invalid_argument("sample-size list is empty");
  std::vector<std::string> methods;
  for (const auto& m : cfg.methods) {
    const std::string canon = m == "mxed" ? "mxed_oracle" : m;
    const auto known = known_methods();
    if (std::find(known.begin(), known.end(), canon) == known.end()) {
      throw std::invalid_argument("unknown method '" + m + "'");
    }
    if (std::find(methods.begin(), methods.end(), canon) == methods.end()) methods.push_back(canon);
  }
  if (methods.empty()) throw std::invalid_argument("method list is empty");
  const int nm = cfg.nm > 0 ? cfg.nm : rep.info.default_nm;
  const bool want_p = std::find(methods.begin(), methods.end(), "messy_p") != methods.end();
  const bool want_s = std::find(methods.begin(), methods.end(), "messy_s") != methods.end();

  for (std::size_t ni = 0; ni < cfg.n_list.size(); ++ni) {
    for (int r = 0; r < cfg.replicates; ++r) {
      Replicate rp;
      rp.n = cfg.n_list[ni];
      rp.replicate = r;
      rp.seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(rp.n), static_cast<std::uint64_t>(r)});
      rep.replicates.push_back(std::move(rp));
    }
  }

  auto body = [&](std::size_t i) {
    Replicate& rp = rep.replicates[i];
    const SampleSet s = gen_samples(cfg.case_id, rp.n, rp.seed);
    const auto ref = raw_sample_moments(s.values(), 6);
    bool messy_done = false;
    for (const auto& m : methods) {
      auto guarded = [&](auto&& fn) {
        try {
          fn();
        } catch (const std::exception& e) {
          MethodRun run;
          run.method = m;
          run.error = e.what();
          rp.runs.push_back(std::move(run));
        }
      };
      const auto known = known_methods();
      const auto tag = static_cast<std::uint64_t>(std::find(known.begin(), known.end(), m) - known.begin());
      const std::uint64_t ms = derive_seed(rp.seed, {0x6d6574ULL, tag});
      if (m == "kde") {
        guarded([&] { rp.runs.push_back(run_kde(s, ref, ms)); });
      } else if (m == "hist") {
        guarded([&] { rp.runs.push_back(run_hist(s, ref)); });
      } else if (m == "mxed_oracle") {
        guarded([&] { rp.runs.push_back(run_mxed(s, nm, ref, ms)); });
      } else if (!messy_done) {
        messy_done = true;
        for (auto& run : run_messy(s, rep.info, nm, cfg.iters, want_p, want_s, ref,
                                   derive_seed(rp.seed, {0x6d657373ULL}))) {
          rp.runs.push_back(std::move(run));
        }
      }
    }
  };
  if (cfg.parallel_replicates) {
    parallel_for(rep.replicates.size(), body);
  } else {
    for (std::size_t i = 0; i < rep.replicates.size(); ++i) body(i);
  }

  for (std::size_t n : cfg.n_list) {
    for (const auto& m : methods) {
      Summary su;
      su.n = n;
      su.method = m;
      std::vector<double> kl, lo, hi, sec;
      for (const auto& rp : rep.replicates) {
        if (rp.n != n) continue;
        for (const auto& run : rp.runs) {
          if (run.method != m) continue;
          if (!run.ok) {
            ++su.failed;
            continue;
          }
          ++su.ok;
          kl.push_back(run.kl);
          lo.push_back(run.moment_err_low);
          hi.push_back(run.moment_err_high);
          sec.push_back(run.seconds);
        }
      }
      mean_se(kl, su.kl_mean, su.kl_se);
      mean_se(lo, su.err_low_mean, su.err_low_se);
      mean_se(hi, su.err_high_mean, su.err_high_se);
      mean_se(sec, su.seconds_mean, su.seconds_se);
      rep.summary.push_back(su);
    }
  }
  return rep;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope needs >= 2 points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

ScalingReport run_scaling(const std::vector<int>& dims, const std::vector<std::size_t>& ns,
                          std::uint64_t seed, int repeats) {
  ScalingReport rep;
  const auto t_all = Clock::now();
  for (int d : dims) {
    const std::string id = "gaussNd:" + std::to_string(d);
    const std::vector<Expr> exprs = polynomial_basis(d, 2);
    std::vector<double> xs, ts;
    for (std::size_t n : ns) {
      const SampleSet s = gen_samples(id, n, derive_seed(seed, {static_cast<std::uint64_t>(d), n}));
      double best = std::numeric_limits<double>::infinity();
      for (int r = 0; r < std::max(1, repeats); ++r) {
        const auto t0 = Clock::now();
        const BasisSet raw = build_basis(exprs, d);
        const BasisSet orth = orthonormalize(raw, s);
        const FeatureTables f = features(orth, s);
        const LagrangeSolve sol = solve_lambda(assemble_hessian(f), laplacian_moment(f));
        const Eigen::VectorXd lam = raw_coefficients(orth, sol.lambda);
        best = std::min(best, seconds_since(t0));
        if (!lam.allFinite()) throw MessyFailure("non-finite multipliers in scaling study");
      }
      rep.points.push_back({d, n, best});
      xs.push_back(static_cast<double>(n));
      ts.push_back(best);
    }
    if (xs.size() >= 2) rep.slopes.emplace_back(d, loglog_slope(xs, ts));
  }
  rep.total_seconds = seconds_since(t_all);
  return rep;
}

}  // namespace messy
