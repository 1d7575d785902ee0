#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nikodym {

// Integer snapping for floor/ceiling of a dimension parameter.
inline double snap_integer(double s, double tol = 1e-9) {
  const double r = std::round(s);
  return std::abs(s - r) < tol ? r : s;
}
inline int floor_s(double s) { return static_cast<int>(std::floor(snap_integer(s))); }
inline int ceil_s(double s) { return static_cast<int>(std::ceil(snap_integer(s))); }
inline bool is_integer(double s) { return snap_integer(s) == std::round(s) && std::abs(s - std::round(s)) < 1e-9; }

// 1/p with p = infinity mapped to 0.
inline double inverse_p(double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("exponent: p must be >= 1");
  return std::isinf(p) ? 0.0 : 1.0 / p;
}

/// A function of one variable given piece by piece on consecutive intervals.
struct PiecewiseExponent {
  struct Piece {
    double lo, hi;
    std::function<double(double)> f;
  };
  std::vector<Piece> pieces;

  double operator()(double x) const {
    for (const Piece& p : pieces)
      if (x >= p.lo && x <= p.hi) return p.f(x);
    throw std::out_of_range("PiecewiseExponent: argument outside domain");
  }
  std::vector<double> breakpoints() const {
    std::vector<double> b;
    for (std::size_t i = 1; i < pieces.size(); ++i) b.push_back(pieces[i].lo);
    return b;
  }
  // Largest jump across interior breakpoints.
  double max_jump() const {
    double j = 0.0;
    for (std::size_t i = 1; i < pieces.size(); ++i) {
      const double x = pieces[i].lo;
      j = std::max(j, std::abs(pieces[i - 1].f(x) - pieces[i].f(x)));
    }
    return j;
  }
};

// Exponent curves of the sharp delta-discretized bounds, as functions of 1/p.
inline PiecewiseExponent nm_upper_curve(int n) {
  if (n < 2) throw std::invalid_argument("nm_upper: n >= 2");
  // Variable is q = 1/p in [0, 1].
  if (n == 2)
    return {{{0.0, 0.5, [](double) { return 0.0; }}, {0.5, 1.0, [](double q) { return 1.0 - 2.0 * q; }}}};
  if (n == 3)
    return {{{0.0, 0.5, [](double) { return 0.0; }},
             {0.5, 2.0 / 3.0, [](double q) { return 0.5 - q; }},
             {2.0 / 3.0, 1.0, [](double q) { return 1.5 - 2.5 * q; }}}};
  return {{{0.0, 0.5, [](double) { return 0.0; }},
           {0.5, 0.75, [](double q) { return 0.5 - q; }},
           {0.75, 1.0, [](double q) { return 2.0 - 3.0 * q; }}}};
}

inline PiecewiseExponent ns_upper_curve(int n) {
  if (n < 2) throw std::invalid_argument("ns_upper: n >= 2");
  if (n == 2)
    return {{{0.0, 1.0 / 3.0, [](double) { return 0.0; }},
             {1.0 / 3.0, 1.0, [](double q) { return 0.5 - 1.5 * q; }}}};
  return {{{0.0, 0.5, [](double) { return 0.0; }}, {0.5, 1.0, [](double q) { return 1.0 - 2.0 * q; }}}};
}

// Exponent e with operator norm ~ delta^e (log factors dropped).
inline double nm_upper(int n, double p) { return nm_upper_curve(n)(inverse_p(p)); }
inline double ns_upper(int n, double p) { return ns_upper_curve(n)(inverse_p(p)); }

inline void check_s(int n, double s, const char* who) {
  if (n < 2) throw std::invalid_argument(std::string(who) + ": n >= 2");
  if (s < -1e-9 || s > n - 1 + 1e-9) throw std::invalid_argument(std::string(who) + ": s outside [0, n-1]");
}

// Critical p above which the fractal spherical maximal operator is bounded.
inline double mt_sufficient(int n, double s) {
  check_s(n, s, "mt_sufficient");
  if (n == 2) return 1.0 + s;
  if (n == 3) return 1.0 + std::min({s / 2.0, 1.0 / (3.0 - s), (5.0 - 2.0 * s) / (9.0 - 4.0 * s)});
  const double ns = n - s;
  return 1.0 + std::min({s / (n - 1.0), 1.0 / ns, ns / (3.0 * ns - 2.0)});
}

// Critical p below which boundedness fails for some admissible parameter set.
inline double mt_necessary(int n, double s) {
  check_s(n, s, "mt_necessary");
  const double sn = snap_integer(s);
  if (sn <= 1.0) return 1.0 + sn / (n - 1.0);
  const double tail = 3.0 - 2.0 * (n - sn);
  if (sn <= 2.0) return 1.0 + std::max({1.0 / (n - 1.0), sn / (2.0 * n - 3.0), tail});
  const int c = ceil_s(sn), f = floor_s(sn);
  return 1.0 + std::max({2.0 / (2.0 * n - 3.0), (sn + 1.0 - c) / (n + 1.0 - c), 1.0 / (n - f + 1.0), tail});
}

inline double st_sufficient(int n, double s) {
  check_s(n, s, "st_sufficient");
  if (n == 2) return 2.0 + std::min(1.0, std::max(s, (4.0 * s - 2.0) / (2.0 - s)));
  const double bump = std::max(0.0, std::min(1.0, (2.0 * s - n + 3.0) / 4.0));
  return 1.0 + 1.0 / (n - 1.0 - s + bump);
}

inline double st_necessary(int n, double s) {
  check_s(n, s, "st_necessary");
  const double sn = snap_integer(s);
  const int c = ceil_s(sn), f = floor_s(sn);
  auto low = [&] {
    return std::max((1.0 - (c - sn) / 2.0) / (n - (c + 2.0) / 2.0), 1.0 / (n - f / 2.0));
  };
  auto high = [&] { return std::max((1.0 + sn - c) / (n - c), 1.0 / (n - static_cast<double>(f))); };
  if (sn < 2.0) return 1.0 + low();
  if (sn > 2.0) return 1.0 + high();
  // Both branches are stated at s = 2.
  return 1.0 + std::max(low(), high());
}

enum class RegionTable { MT, ST };

struct BoundaryRow {
  double s, sufficient_p, necessary_p;
};

inline std::vector<BoundaryRow> region_boundary(RegionTable table, int n, const std::vector<double>& s_grid) {
  std::vector<BoundaryRow> rows;
  rows.reserve(s_grid.size());
  for (double s : s_grid) {
    if (table == RegionTable::MT)
      rows.push_back({s, mt_sufficient(n, s), mt_necessary(n, s)});
    else
      rows.push_back({s, st_sufficient(n, s), st_necessary(n, s)});
  }
  return rows;
}

inline std::vector<double> grid(double lo, double hi, double step, bool include_hi = true) {
  std::vector<double> g;
  const int count = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
  for (int i = 0; i <= count; ++i) {
    const double x = lo + i * step;
    if (!include_hi && x > hi - 1e-12) break;
    g.push_back(x);
  }
  return g;
}

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double residual_max = 0.0;
};

// Least squares of log(value / log(1/delta)^theta) against log(delta).
inline FitResult loglog_fit(const std::vector<std::pair<double, double>>& points, double theta = 0.0) {
  if (points.size() < 3) throw std::invalid_argument("loglog_fit: need at least 3 points");
  std::vector<double> xs, ys;
  for (const auto& [delta, value] : points) {
    if (!(value > 0.0) || !(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("loglog_fit: need 0<delta<1, value>0");
    xs.push_back(std::log(delta));
    ys.push_back(std::log(value) - theta * std::log(std::log(1.0 / delta)));
  }
  const double k = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i], my += ys[i];
  mx /= k;
  my /= k;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  FitResult fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
    sse += r * r;
    fit.residual_max = std::max(fit.residual_max, std::abs(r));
  }
  fit.r_squared = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  return fit;
}

}  // namespace nikodym
