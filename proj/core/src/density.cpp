#include "messy/density.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "messy/error.hpp"
#include "messy/parallel.hpp"
#include "messy/quadrature.hpp"

namespace messy {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLogFloor = -50.0;
constexpr double kGrowthTol = 1e-5;
constexpr std::size_t kImportancePoints = 1'000'000;
constexpr int kFarPoints = 1 << 16;
constexpr double kFarMargin = 30.0;  // nats below the in-domain maximum

Eigen::VectorXd robust_sd(const Reference& ref) {
  Eigen::VectorXd sd = ref.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  for (Eigen::Index j = 0; j < sd.size(); ++j) {
    const double floor = 1e-6 * (1.0 + std::fabs(ref.mean(j)));
    if (!(sd(j) > floor)) sd(j) = floor;
  }
  return sd;
}

// Integration box at expansion level k: infinite sides of the support are
// replaced by the reference window stretched 2^k times about the mean.
Box expanded_domain(const Box& support, const Reference& ref, int k) {
  const double f = std::ldexp(1.0, k);
  Box out(support.size());
  for (std::size_t j = 0; j < support.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const double c = std::clamp(ref.mean(jj), ref.window[j].lo, ref.window[j].hi);
    out[j].lo = std::isfinite(support[j].lo) ? support[j].lo : c - f * (c - ref.window[j].lo);
    out[j].hi = std::isfinite(support[j].hi) ? support[j].hi : c + f * (ref.window[j].hi - c);
  }
  return out;
}

bool fully_finite(const Box& b) {
  return std::all_of(b.begin(), b.end(), [](const Interval& i) { return i.finite(); });
}

// log of the integral of exp(phi) over a finite box, d = 1 or 2.
double log_integral(const CompiledExpr& phi, const Box& box) {
  auto f = [&](const double* x) { return phi(x); };
  const int grid = box.size() == 1 ? 2001 : 201;
  double shift = grid_max(f, box, grid);
  if (!std::isfinite(shift)) {
    if (shift == kInf || std::isnan(shift)) throw NonIntegrableError("exponent is not finite on the domain");
    return -kInf;
  }
  double value = 0.0;
  if (box.size() == 1) {
    value = integrate_1d(
        [&](double x) { return std::exp(phi(&x) - shift); }, box[0].lo, box[0].hi);
  } else {
    value = integrate_2d(
        [&](double x, double y) {
          const double p[2] = {x, y};
          return std::exp(phi(p) - shift);
        },
        box[0], box[1]);
  }
  if (!std::isfinite(value)) throw NonIntegrableError("quadrature overflow");
  if (value <= 0.0) return -kInf;
  return shift + std::log(value);
}

struct GaussianProposal {
  Eigen::VectorXd mean;
  Eigen::MatrixXd chol;  // lower
  double log_norm = 0.0;

  explicit GaussianProposal(const Reference& ref, double inflate = 1.0) : mean(ref.mean) {
    const auto d = ref.mean.size();
    Eigen::MatrixXd cov = ref.cov * (inflate * inflate);
    const Eigen::VectorXd sd = robust_sd(ref);
    for (Eigen::Index j = 0; j < d; ++j) {
      cov(j, j) = std::max(cov(j, j), inflate * inflate * sd(j) * sd(j));
    }
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    for (double jitter = 1e-10; llt.info() != Eigen::Success; jitter *= 10.0) {
      cov.diagonal().array() += jitter * cov.diagonal().mean();
      llt.compute(cov);
    }
    chol = llt.matrixL();
    log_norm = -0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi) -
               chol.diagonal().array().log().sum();
  }

  // Fills x, returns log q(x).
  double sample(Rng& rng, Eigen::VectorXd& z, Eigen::VectorXd& x) const {
    std::normal_distribution<double> n01;
    for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = n01(rng);
    x = mean + chol * z;
    return log_norm - 0.5 * z.squaredNorm();
  }

  double log_density(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd z = chol.triangularView<Eigen::Lower>().solve(x - mean);
    return log_norm - 0.5 * z.squaredNorm();
  }
};

bool in_box(const Box& box, const double* x) {
  for (std::size_t j = 0; j < box.size(); ++j) {
    if (!box[j].contains(x[j])) return false;
  }
  return true;
}

// Exponent must fall by at least one nat between 2 and 4 reference scales
// along every outward ray that stays in the support. The coordinate axes are
// always probed; random rays rarely find a flat axis direction.
void check_growth_rays(const CompiledExpr& phi, const Box& support, const Reference& ref) {
  const auto d = ref.mean.size();
  const double scale = 10.0 * robust_sd(ref).maxCoeff() + ref.mean.cwiseAbs().maxCoeff();
  Rng rng(derive_seed(0x7261797373ULL, {static_cast<std::uint64_t>(d)}));
  std::normal_distribution<double> n01;
  Eigen::VectorXd u(d), a(d), b(d);
  const int axis_rays = 2 * static_cast<int>(d);
  for (int ray = 0; ray < axis_rays + 256; ++ray) {
    if (ray < axis_rays) {
      u.setZero();
      u(ray / 2) = ray % 2 ? -1.0 : 1.0;
    } else {
      for (Eigen::Index j = 0; j < d; ++j) u(j) = n01(rng);
      u.normalize();
    }
    a = ref.mean + 2.0 * scale * u;
    b = ref.mean + 4.0 * scale * u;
    if (!in_box(support, b.data()) || !in_box(support, a.data())) continue;
    const double pa = phi(a.data());
    const double pb = phi(b.data());
    if (!std::isfinite(pb) || pb > pa - 1.0) {
      throw NonIntegrableError("exponent does not decay along an outward ray");
    }
  }
}

// Bounded terms with large coefficients can put the mode of an integrable
// exponent far outside the integration domain. Screen a box 16 times wider
// with fixed pseudo-random points and reject if any comes close to the
// in-domain maximum.
void check_far_field(const CompiledExpr& phi, const Box& support, const Reference& ref, const Box& inner) {
  auto f = [&](const double* x) { return phi(x); };
  const double inner_max = grid_max(f, inner, inner.size() == 1 ? 2001 : 201);
  const Box far = expanded_domain(support, ref, 6);
  Rng rng(derive_seed(0x666172ULL, {static_cast<std::uint64_t>(inner.size())}));
  std::uniform_real_distribution<double> u01;
  std::array<double, 2> x{};
  for (int i = 0; i < kFarPoints; ++i) {
    for (std::size_t j = 0; j < far.size(); ++j) x[j] = far[j].lo + u01(rng) * (far[j].hi - far[j].lo);
    if (in_box(inner, x.data())) continue;
    const double v = phi(x.data());
    if (std::isnan(v) || v > inner_max - kFarMargin) {
      throw NonIntegrableError("exponent peaks outside the integration domain");
    }
  }
}

NormalizeResult normalize_importance(const CompiledExpr& phi, const Box& support,
                                     const Reference& ref) {
  check_growth_rays(phi, support, ref);
  const GaussianProposal q(ref);
  const auto d = ref.mean.size();
  constexpr std::size_t kChunks = 16;
  const std::size_t per = kImportancePoints / kChunks;
  struct Partial {
    double max = -kInf;
    double s1 = 0.0;  // sum exp(w - max)
    double s2 = 0.0;  // sum exp(2 (w - max))
  };
  std::vector<Partial> parts(kChunks);
  parallel_for(kChunks, [&](std::size_t c) {
    Rng rng(derive_seed(0x6973ULL, {static_cast<std::uint64_t>(d), c}));
    Eigen::VectorXd z(d), x(d);
    std::vector<double> lw(per);
    double mx = -kInf;
    for (std::size_t i = 0; i < per; ++i) {
      const double lq = q.sample(rng, z, x);
      lw[i] = in_box(support, x.data()) ? phi(x.data()) - lq : -kInf;
      if (std::isnan(lw[i]) || lw[i] == kInf) lw[i] = kInf;
      mx = std::max(mx, lw[i]);
    }
    Partial p;
    p.max = mx;
    if (std::isfinite(mx)) {
      for (double w : lw) {
        const double e = std::exp(w - mx);
        p.s1 += e;
        p.s2 += e * e;
      }
    }
    parts[c] = p;
  });
  double mx = -kInf;
  for (const auto& p : parts) mx = std::max(mx, p.max);
  if (!std::isfinite(mx)) {
    if (mx == kInf) throw NonIntegrableError("importance weights overflow");
    throw NonIntegrableError("no importance sample landed in the support");
  }
  double s1 = 0.0, s2 = 0.0;
  for (const auto& p : parts) {
    if (!std::isfinite(p.max)) continue;
    const double f = std::exp(p.max - mx);
    s1 += p.s1 * f;
    s2 += p.s2 * f * f;
  }
  const double n = static_cast<double>(per * kChunks);
  const double mean = s1 / n;
  const double var = std::max(0.0, s2 / n - mean * mean);
  NormalizeResult r;
  r.log_z = mx + std::log(mean);
  r.rel_error = std::sqrt(var / n) / mean;
  return r;
}

}  // namespace

Reference make_reference(const SampleSet& samples, const Box& support) {
  if (static_cast<int>(support.size()) != samples.dim()) {
    throw std::invalid_argument("support dimension does not match samples");
  }
  Reference ref;
  ref.mean = samples.mean();
  ref.cov = samples.covariance();
  const Eigen::VectorXd sd = robust_sd(ref);
  ref.window.resize(support.size());
  for (std::size_t j = 0; j < support.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    double lo = std::max(samples.min()(jj) - 5.0 * sd(jj), support[j].lo);
    double hi = std::min(samples.max()(jj) + 5.0 * sd(jj), support[j].hi);
    if (!(hi > lo)) {
      lo = support[j].lo;
      hi = support[j].hi;
    }
    ref.window[j] = {lo, hi};
  }
  return ref;
}

NormalizeResult normalize(const Expr& exponent, const Box& support, const Reference& ref) {
  const auto d = support.size();
  if (d == 0 || static_cast<std::size_t>(ref.mean.size()) != d || ref.window.size() != d) {
    throw std::invalid_argument("normalize: dimension mismatch");
  }
  if (exponent.max_var() >= static_cast<int>(d)) {
    throw std::invalid_argument("normalize: exponent uses a variable beyond the support dimension");
  }
  const CompiledExpr phi(exponent);
  if (d >= 3) return normalize_importance(phi, support, ref);

  if (fully_finite(support)) {
    const double lz = log_integral(phi, support);
    if (!std::isfinite(lz)) throw NonIntegrableError("density vanishes on its support");
    return {lz, 1e-10};
  }
  check_growth_rays(phi, support, ref);
  check_far_field(phi, support, ref, expanded_domain(support, ref, 2));
  std::array<double, 3> li{};
  for (int k = 0; k < 3; ++k) li[static_cast<std::size_t>(k)] = log_integral(phi, expanded_domain(support, ref, k));
  if (!std::isfinite(li[2])) throw NonIntegrableError("density vanishes on its support");
  const double growth = std::expm1(li[2] - li[1]);
  if (growth > kGrowthTol) {
    throw NonIntegrableError("integral keeps growing on expanding domains (relative growth " +
                             std::to_string(growth) + ")");
  }
  return {li[2], std::max(1e-10, std::fabs(growth))};
}

LevelDensity::LevelDensity(std::vector<Expr> basis, Eigen::VectorXd lambda, Box support,
                           double mass, Reference ref)
    : basis_(std::move(basis)), lambda_(std::move(lambda)), support_(std::move(support)),
      ref_(std::move(ref)), mass_(mass) {
  compile();
  log_z_ = normalize(exponent_, support_, ref_).log_z;
}

LevelDensity::LevelDensity(std::vector<Expr> basis, Eigen::VectorXd lambda, Box support,
                           double mass, Reference ref, double log_z)
    : basis_(std::move(basis)), lambda_(std::move(lambda)), support_(std::move(support)),
      ref_(std::move(ref)), log_z_(log_z), mass_(mass) {
  compile();
}

void LevelDensity::compile() {
  if (lambda_.size() != static_cast<Eigen::Index>(basis_.size())) {
    throw std::invalid_argument("multiplier count does not match basis");
  }
  Expr e = Expr::constant(0.0);
  for (std::size_t i = 0; i < basis_.size(); ++i) {
    e = e + Expr::constant(lambda_(static_cast<Eigen::Index>(i))) * basis_[i];
  }
  exponent_ = e;
  compiled_ = CompiledExpr(exponent_);
}

double LevelDensity::log_unnormalized(const double* x) const {
  if (!in_box(support_, x)) return -kInf;
  return compiled_(x);
}

double LevelDensity::pdf(const double* x) const {
  const double lp = log_pdf(x);
  return lp == -kInf ? 0.0 : std::exp(lp);
}

MessyDensity::MessyDensity(std::vector<LevelDensity> levels, Mode mode)
    : levels_(std::move(levels)), mode_(mode) {
  if (levels_.empty()) throw std::invalid_argument("density needs at least one level");
}

double MessyDensity::log_pdf(const double* x) const {
  double mx = -kInf;
  std::array<double, 16> small{};
  std::vector<double> big;
  double* terms = small.data();
  if (levels_.size() > small.size()) {
    big.resize(levels_.size());
    terms = big.data();
  }
  for (std::size_t l = 0; l < levels_.size(); ++l) {
    const auto& lv = levels_[l];
    terms[l] = lv.mass() > 0.0 ? std::log(lv.mass()) + lv.log_pdf(x) : -kInf;
    mx = std::max(mx, terms[l]);
  }
  if (!std::isfinite(mx)) return -kInf;
  double s = 0.0;
  for (std::size_t l = 0; l < levels_.size(); ++l) s += std::exp(terms[l] - mx);
  return mx + std::log(s);
}

double MessyDensity::pdf(const double* x) const {
  const double lp = log_pdf(x);
  return lp == -kInf ? 0.0 : std::exp(lp);
}

double MessyDensity::total_mass() const {
  double s = 0.0;
  for (const auto& l : levels_) s += l.mass();
  return s;
}

std::size_t MessyDensity::dominant_level() const {
  std::size_t best = 0;
  for (std::size_t l = 1; l < levels_.size(); ++l) {
    if (levels_[l].mass() > levels_[best].mass()) best = l;
  }
  return best;
}

namespace {

void reflect_into(const Box& box, Eigen::VectorXd& x) {
  for (std::size_t j = 0; j < box.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const double lo = box[j].lo, hi = box[j].hi;
    for (int guard = 0; guard < 64 && !box[j].contains(x(jj)); ++guard) {
      if (std::isfinite(lo) && x(jj) < lo) x(jj) = 2.0 * lo - x(jj);
      if (std::isfinite(hi) && x(jj) > hi) x(jj) = 2.0 * hi - x(jj);
    }
    if (!box[j].contains(x(jj))) x(jj) = std::clamp(x(jj), lo, hi);
  }
}

struct ChainResult {
  Eigen::MatrixXd samples;
  double acceptance = 0.0;
};

ChainResult run_chain(const LevelDensity& level, std::size_t count, Rng& rng,
                      const DrawOptions& opt) {
  const int d = level.dim();
  const Reference& ref = level.reference();
  Eigen::VectorXd step = robust_sd(ref) * (opt.step_scale / std::sqrt(static_cast<double>(d)));

  // Start from the best of the reference mean and a few window points.
  Eigen::VectorXd x = ref.mean;
  for (int j = 0; j < d; ++j) {
    const auto& s = level.support()[static_cast<std::size_t>(j)];
    x(j) = std::clamp(x(j), s.lo, s.hi);
  }
  double lp = level.log_unnormalized(x.data());
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Eigen::VectorXd y(d);
  for (int t = 0; t < 64; ++t) {
    for (int j = 0; j < d; ++j) {
      const auto& w = ref.window[static_cast<std::size_t>(j)];
      y(j) = w.lo + (w.hi - w.lo) * u01(rng);
    }
    const double ly = level.log_unnormalized(y.data());
    if (ly > lp || !std::isfinite(lp)) {
      x = y;
      lp = ly;
    }
  }

  // Random-walk steps mixed with occasional independence proposals from a
  // widened reference Gaussian, so chains can cross between separated modes.
  const GaussianProposal global(ref, 1.5);
  double lq_x = global.log_density(x);
  Eigen::VectorXd z(d);
  std::normal_distribution<double> n01;
  auto step_once = [&]() {
    if (u01(rng) < opt.independence_rate) {
      const double lq_y = global.sample(rng, z, y);
      if (!in_box(level.support(), y.data())) return false;
      const double ly = level.log_unnormalized(y.data());
      if (std::isfinite(ly) && std::log(u01(rng)) < (ly - lp) + (lq_x - lq_y)) {
        x = y;
        lp = ly;
        lq_x = lq_y;
      }
      return false;  // not counted towards the random-walk acceptance
    }
    for (int j = 0; j < d; ++j) y(j) = x(j) + step(j) * n01(rng);
    reflect_into(level.support(), y);
    const double ly = level.log_unnormalized(y.data());
    if (std::isfinite(ly) && std::log(u01(rng)) < ly - lp) {
      x = y;
      lp = ly;
      lq_x = global.log_density(x);
      return true;
    }
    return false;
  };

  // Burn-in with coarse step adaptation in blocks of 100.
  int accepted = 0;
  for (int t = 1; t <= opt.burn_in; ++t) {
    accepted += step_once() ? 1 : 0;
    if (t % 100 == 0) {
      const double rate = accepted / (100.0 * (1.0 - opt.independence_rate));
      if (rate < 0.1) step *= 0.5;
      if (rate > 0.9) step *= 2.0;
      accepted = 0;
    }
  }

  ChainResult out;
  out.samples.resize(static_cast<Eigen::Index>(count), d);
  std::size_t acc = 0, total = 0;
  for (std::size_t i = 0; i < count; ++i) {
    for (int t = 0; t < opt.thinning; ++t) {
      acc += step_once() ? 1 : 0;
      ++total;
    }
    out.samples.row(static_cast<Eigen::Index>(i)) = x.transpose();
  }
  const double rw_steps = static_cast<double>(total) * (1.0 - opt.independence_rate);
  out.acceptance = rw_steps > 0.0 ? std::min(1.0, static_cast<double>(acc) / rw_steps) : 0.0;
  return out;
}

}  // namespace

DrawResult draw(const MessyDensity& density, std::size_t n, Rng& rng, const DrawOptions& opt) {
  const auto& levels = density.levels();
  if (levels.empty()) throw std::invalid_argument("draw: empty density");
  DrawResult out;
  const std::size_t nl = levels.size();
  out.level_counts.assign(nl, 0);
  // Multinomial allocation as a chain of conditional binomials.
  std::size_t left = n;
  double mass_left = density.total_mass();
  for (std::size_t l = 0; l < nl && left > 0; ++l) {
    if (l + 1 == nl || mass_left <= 0.0) {
      out.level_counts[l] = left;
      break;
    }
    const double p = std::clamp(levels[l].mass() / mass_left, 0.0, 1.0);
    std::binomial_distribution<std::size_t> bin(left, p);
    out.level_counts[l] = bin(rng);
    left -= out.level_counts[l];
    mass_left -= levels[l].mass();
  }
  out.samples.resize(static_cast<Eigen::Index>(n), density.dim());
  out.acceptance.assign(nl, 0.0);
  out.level_of_sample.reserve(n);
  Eigen::Index row = 0;
  for (std::size_t l = 0; l < nl; ++l) {
    Rng chain_rng(derive_seed(rng(), {l}));
    if (out.level_counts[l] == 0) continue;
    ChainResult c = run_chain(levels[l], out.level_counts[l], chain_rng, opt);
    out.samples.middleRows(row, c.samples.rows()) = c.samples;
    row += c.samples.rows();
    out.acceptance[l] = c.acceptance;
    out.level_of_sample.insert(out.level_of_sample.end(), out.level_counts[l], static_cast<int>(l));
    if (c.acceptance < 0.05 || c.acceptance > 0.95) {
      if (!out.warning.empty()) out.warning += "; ";
      out.warning += "level " + std::to_string(l) + " acceptance " + std::to_string(c.acceptance);
    }
  }
  return out;
}

KlResult kl_criterion(const MessyDensity& density, const Eigen::MatrixXd& samples) {
  if (samples.cols() != density.dim()) throw std::invalid_argument("kl_criterion: dimension mismatch");
  KlResult r;
  const Eigen::Index n = samples.rows();
  if (n == 0) return r;
  Eigen::VectorXd row(samples.cols());
  double s = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    row = samples.row(k).transpose();
    double lp = density.log_pdf(row.data());
    if (lp == -kInf) ++r.zero_support_hits;
    if (!(lp >= kLogFloor)) lp = kLogFloor;
    s += lp;
  }
  r.value = -s / static_cast<double>(n);
  return r;
}

MomentEstimate sample_moments(const Eigen::MatrixXd& samples, const std::vector<Expr>& r) {
  MomentEstimate m;
  const auto nr = static_cast<Eigen::Index>(r.size());
  m.mean.resize(nr);
  m.se.resize(nr);
  const double n = static_cast<double>(samples.rows());
  for (Eigen::Index i = 0; i < nr; ++i) {
    const Eigen::ArrayXd v = eval_rows(r[static_cast<std::size_t>(i)], samples);
    m.mean(i) = v.mean();
    const double var = samples.rows() > 1 ? (v - m.mean(i)).square().sum() / (n - 1.0) : 0.0;
    m.se(i) = std::sqrt(var / n);
  }
  return m;
}

double density_expectation(const MessyDensity& density, const Expr& g) {
  const int d = density.dim();
  const CompiledExpr gc(g);
  double total = 0.0;
  for (const auto& level : density.levels()) {
    const Box dom = fully_finite(level.support()) ? level.support()
                                                  : expanded_domain(level.support(), level.reference(), 2);
    const CompiledExpr phi(level.exponent());
    const double lz = level.log_z();
    double part = 0.0;
    if (d == 1) {
      part = integrate_1d([&](double x) { return gc(&x) * std::exp(phi(&x) - lz); }, dom[0].lo,
                          dom[0].hi);
    } else if (d == 2) {
      part = integrate_2d(
          [&](double x, double y) {
            const double p[2] = {x, y};
            return gc(p) * std::exp(phi(p) - lz);
          },
          dom[0], dom[1]);
    } else {
      // Importance sampling against the level's reference Gaussian.
      const GaussianProposal q(level.reference());
      Rng rng(derive_seed(0x6578ULL, {static_cast<std::uint64_t>(d)}));
      Eigen::VectorXd z(d), x(d);
      constexpr int kPoints = 200'000;
      double s = 0.0;
      for (int i = 0; i < kPoints; ++i) {
        const double lq = q.sample(rng, z, x);
        if (!in_box(level.support(), x.data())) continue;
        s += gc(x.data()) * std::exp(phi(x.data()) - lz - lq);
      }
      part = s / kPoints;
    }
    total += level.mass() * part;
  }
  return total;
}

double integrate_pdf(const MessyDensity& density) {
  return density_expectation(density, Expr::constant(1.0));
}

}  // namespace messy
