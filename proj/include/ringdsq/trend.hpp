#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace ringdsq::harness {

/// Least-squares fit of the saturating trend r(x) = a - b*exp(-x/c).
struct TrendFit {
  double a = 0;
  double b = 0;
  double c = 0;
  double residual = 0;  // sum of squared errors
  bool degenerate = false;
};

inline constexpr double kTrendScaleMin = 10.0;    // m
inline constexpr double kTrendScaleMax = 2000.0;  // m

namespace detail {

/// For a fixed decay scale, (a, b) solve a 2x2 linear least-squares system
/// over the basis {1, -exp(-x/c)}.
inline TrendFit solve_linear(std::span<const double> x, std::span<const double> y,
                             double c) {
  const std::size_t n = x.size();
  double se = 0, see = 0, sy = 0, sey = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = std::exp(-x[i] / c);
    se += e;
    see += e * e;
    sy += y[i];
    sey += e * y[i];
  }
  // normal equations: [n  -se; -se  see] [a; b] = [sy; -sey]
  const double det = n * see - se * se;
  TrendFit fit;
  fit.c = c;
  if (std::abs(det) < 1e-30) {
    fit.a = sy / static_cast<double>(n);
    fit.b = 0;
  } else {
    fit.a = (sy * see - se * sey) / det;
    fit.b = (se * sy - static_cast<double>(n) * sey) / det;
  }
  double ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (fit.a - fit.b * std::exp(-x[i] / c));
    ss += r * r;
  }
  fit.residual = ss;
  return fit;
}

}  // namespace detail

/// Outer one-dimensional search over the decay scale (log-spaced grid, then
/// golden-section refinement around the best cell) with the closed-form
/// linear solve inside. The refinement never returns a worse residual than
/// the best grid candidate.
inline TrendFit fit_saturating_trend(std::span<const double> x,
                                     std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("trend fit: size mismatch");
  if (x.size() < 4) throw std::invalid_argument("trend fit needs at least 4 points");
  std::vector<double> distinct(x.begin(), x.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 3)
    throw std::invalid_argument("trend fit needs at least 3 distinct x values");

  const double y0 = y.front();
  bool all_equal = true;
  for (double v : y) all_equal &= v == y0;
  if (all_equal) {
    TrendFit fit;
    fit.a = y0;
    fit.b = 0;
    fit.c = kTrendScaleMin;
    fit.residual = 0;
    fit.degenerate = true;
    return fit;
  }

  constexpr int kGridPoints = 96;
  const double log_lo = std::log(kTrendScaleMin);
  const double log_hi = std::log(kTrendScaleMax);
  TrendFit best;
  best.residual = std::numeric_limits<double>::infinity();
  int best_idx = 0;
  std::vector<double> grid(kGridPoints);
  for (int i = 0; i < kGridPoints; ++i) {
    grid[i] = std::exp(log_lo + (log_hi - log_lo) * i / (kGridPoints - 1));
    const TrendFit fit = detail::solve_linear(x, y, grid[i]);
    if (fit.residual < best.residual) {
      best = fit;
      best_idx = i;
    }
  }

  // golden-section on log(c) over the bracket around the best grid cell
  double lo = std::log(grid[std::max(0, best_idx - 1)]);
  double hi = std::log(grid[std::min(kGridPoints - 1, best_idx + 1)]);
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double m1 = hi - gr * (hi - lo);
  double m2 = lo + gr * (hi - lo);
  TrendFit f1 = detail::solve_linear(x, y, std::exp(m1));
  TrendFit f2 = detail::solve_linear(x, y, std::exp(m2));
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    if (f1.residual <= f2.residual) {
      hi = m2;
      m2 = m1;
      f2 = f1;
      m1 = hi - gr * (hi - lo);
      f1 = detail::solve_linear(x, y, std::exp(m1));
    } else {
      lo = m1;
      m1 = m2;
      f1 = f2;
      m2 = lo + gr * (hi - lo);
      f2 = detail::solve_linear(x, y, std::exp(m2));
    }
  }
  const TrendFit& refined = f1.residual <= f2.residual ? f1 : f2;
  if (refined.residual < best.residual) best = refined;
  return best;
}

struct OptimalRange {
  bool found = false;
  double x_opt = 0;  // m
  double g0 = 0;     // trend derivative at the reference range
};

/// Smallest x >= x0 where the trend derivative falls to ratio * (derivative
/// at x0); closed form x0 + c*ln(1/ratio) for the exponential family.
inline OptimalRange optimal_range(const TrendFit& fit, double x0 = 100.0,
                                  double ratio = 0.1) {
  if (!(ratio > 0 && ratio <= 1)) throw std::invalid_argument("ratio must be in (0,1]");
  OptimalRange r;
  if (fit.b <= 0 || fit.c <= 0) return r;  // no saturation detected
  r.found = true;
  r.g0 = fit.b / fit.c * std::exp(-x0 / fit.c);
  r.x_opt = x0 + fit.c * std::log(1.0 / ratio);
  return r;
}

}  // namespace ringdsq::harness
