#pragma once

#include <functional>

#include "messy/sample_set.hpp"

namespace messy {

struct QuadratureOptions {
  double rel_tol = 1e-10;
  int panels = 64;     ///< initial equal-width panels, each refined adaptively
  int max_depth = 12;
};

/// Adaptive Gauss-Kronrod over [a, b] (finite).
double integrate_1d(const std::function<double(double)>& f, double a, double b,
                    const QuadratureOptions& opt = {});

struct Quadrature2dOptions {
  double rel_tol = 1e-6;
  int min_panels = 16;   ///< panels per side on the first pass
  int max_panels = 64;   ///< panels per side on the last allowed pass
};

/// Composite tensor Gauss-Legendre over a finite rectangle. The panel count
/// doubles until two passes agree to rel_tol (relative to the integral of
/// |f|); throws QuadratureError when max_panels is reached first.
double integrate_2d(const std::function<double(double, double)>& f, const Interval& x,
                    const Interval& y, const Quadrature2dOptions& opt = {});

/// Largest value of f on a uniform grid (points_per_dim^d points) over a
/// finite box; d must be 1 or 2.
double grid_max(const std::function<double(const double*)>& f, const Box& box,
                int points_per_dim);

}  // namespace messy
