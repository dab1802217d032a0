#include "messy/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "messy/error.hpp"

namespace messy {

double integrate_1d(const std::function<double(double)>& f, double a, double b,
                    const QuadratureOptions& opt) {
  if (!(std::isfinite(a) && std::isfinite(b))) throw std::invalid_argument("integrate_1d needs finite limits");
  if (b <= a) return 0.0;
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  const int panels = std::max(1, opt.panels);
  const double w = (b - a) / panels;
  auto edge = [&](int p) { return p == panels ? b : a + p * w; };
  // One non-adaptive pass sets the scale; the tolerance is relative to the
  // whole integral, so panels that contribute nothing are not refined.
  std::vector<double> coarse(static_cast<std::size_t>(panels));
  std::vector<double> l1(static_cast<std::size_t>(panels));
  double scale = 0.0;
  for (int p = 0; p < panels; ++p) {
    double err = 0.0;
    double abs_sum = 0.0;
    const auto i = static_cast<std::size_t>(p);
    coarse[i] = GK::integrate(f, edge(p), edge(p + 1), 0, 0.0, &err, &abs_sum);
    l1[i] = abs_sum;
    scale += abs_sum;
  }
  if (!std::isfinite(scale) || scale == 0.0) {
    double total = 0.0;
    for (double c : coarse) total += c;
    return total;
  }
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const auto i = static_cast<std::size_t>(p);
    if (l1[i] < 1e-3 * opt.rel_tol * scale / panels) {
      total += coarse[i];
      continue;
    }
    const double tol = std::min(1e-2, opt.rel_tol * scale / l1[i]);
    total += GK::integrate(f, edge(p), edge(p + 1), static_cast<unsigned>(opt.max_depth), tol);
  }
  return total;
}

namespace {

constexpr int kGaussNodes = 10;

// Full node and weight sets on [-1, 1].
struct GaussRule {
  std::array<double, kGaussNodes> x{};
  std::array<double, kGaussNodes> w{};
  GaussRule() {
    using G = boost::math::quadrature::gauss<double, kGaussNodes>;
    const auto& ax = G::abscissa();
    const auto& wt = G::weights();
    const std::size_t half = kGaussNodes / 2;
    for (std::size_t i = 0; i < half; ++i) {
      x[half - 1 - i] = -ax[i];
      w[half - 1 - i] = wt[i];
      x[half + i] = ax[i];
      w[half + i] = wt[i];
    }
  }
};

struct TensorSum {
  double value = 0.0;
  double abs_value = 0.0;
};

TensorSum tensor_gauss(const std::function<double(double, double)>& f, const Interval& x,
                       const Interval& y, int panels, const GaussRule& rule) {
  const double hx = (x.hi - x.lo) / panels;
  const double hy = (y.hi - y.lo) / panels;
  std::vector<double> ys(static_cast<std::size_t>(panels * kGaussNodes));
  std::vector<double> wy(ys.size());
  for (int p = 0; p < panels; ++p) {
    const double c = y.lo + (p + 0.5) * hy;
    for (int k = 0; k < kGaussNodes; ++k) {
      const auto i = static_cast<std::size_t>(p * kGaussNodes + k);
      ys[i] = c + 0.5 * hy * rule.x[static_cast<std::size_t>(k)];
      wy[i] = 0.5 * hy * rule.w[static_cast<std::size_t>(k)];
    }
  }
  TensorSum out;
  for (int p = 0; p < panels; ++p) {
    const double c = x.lo + (p + 0.5) * hx;
    for (int k = 0; k < kGaussNodes; ++k) {
      const double xv = c + 0.5 * hx * rule.x[static_cast<std::size_t>(k)];
      const double wx = 0.5 * hx * rule.w[static_cast<std::size_t>(k)];
      double row = 0.0;
      double row_abs = 0.0;
      for (std::size_t i = 0; i < ys.size(); ++i) {
        const double v = f(xv, ys[i]) * wy[i];
        row += v;
        row_abs += std::fabs(v);
      }
      out.value += wx * row;
      out.abs_value += wx * row_abs;
    }
  }
  return out;
}

}  // namespace

double integrate_2d(const std::function<double(double, double)>& f, const Interval& x,
                    const Interval& y, const Quadrature2dOptions& opt) {
  if (!x.finite() || !y.finite()) throw std::invalid_argument("integrate_2d needs a finite box");
  if (!(x.hi > x.lo) || !(y.hi > y.lo)) return 0.0;
  static const GaussRule rule;
  int panels = std::max(1, opt.min_panels);
  TensorSum prev = tensor_gauss(f, x, y, panels, rule);
  double last_change = std::numeric_limits<double>::infinity();
  while (panels < opt.max_panels) {
    panels *= 2;
    const TensorSum cur = tensor_gauss(f, x, y, panels, rule);
    if (!std::isfinite(cur.value)) return cur.value;
    last_change = std::fabs(cur.value - prev.value);
    if (last_change <= opt.rel_tol * cur.abs_value || cur.abs_value == 0.0) return cur.value;
    prev = cur;
  }
  throw QuadratureError("2-d quadrature did not settle at " + std::to_string(panels) +
                        " panels per side (last change " + std::to_string(last_change) + ")");
}

double grid_max(const std::function<double(const double*)>& f, const Box& box,
                int points_per_dim) {
  const std::size_t d = box.size();
  if (d < 1 || d > 2) throw std::invalid_argument("grid_max supports d = 1 or 2");
  double best = -std::numeric_limits<double>::infinity();
  const int n = std::max(2, points_per_dim);
  double x[2] = {0.0, 0.0};
  auto coord = [&](std::size_t j, int i) {
    return box[j].lo + (box[j].hi - box[j].lo) * i / (n - 1);
  };
  if (d == 1) {
    for (int i = 0; i < n; ++i) {
      x[0] = coord(0, i);
      const double v = f(x);
      if (v > best) best = v;
    }
  } else {
    for (int i = 0; i < n; ++i) {
      x[0] = coord(0, i);
      for (int k = 0; k < n; ++k) {
        x[1] = coord(1, k);
        const double v = f(x);
        if (v > best) best = v;
      }
    }
  }
  return best;
}

}  // namespace messy
