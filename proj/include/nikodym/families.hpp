#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nikodym/fractal.hpp"
#include "nikodym/geometry.hpp"
#include "nikodym/grid.hpp"
#include "nikodym/parallel.hpp"
#include "nikodym/random.hpp"
#include "nikodym/vec.hpp"

namespace nikodym {

enum class RadiusMode { unit, varying };

// How anchors and centers are laid out.
//  cube            anchors: net of [0,1]^n; center = anchor + t*u, u from a net of T (or of the unit sphere)
//  cube_pinned     anchors: net of [0,1]^n; centers uniform in a small ball outside the face x_1 = 0,
//                  anchors at distance outside [1/2, 2] dropped
//  shell_anchored  anchors: lattice points near the unit sphere; center = radial projection, |center| <= c/2
//  circle_arc      unit spheres centered on an arc of the unit circle in the first coordinate plane
//  lenz_arc        unit spheres centered on an arc of the circle of radius 1/sqrt(2) in the first plane
//  center_grid     unit spheres centered on a delta-lattice of [0,c]^n, anchor = center + e_1
enum class Layout { cube, cube_pinned, shell_anchored, circle_arc, lenz_arc, center_grid };

inline const char* to_string(Layout l) {
  switch (l) {
    case Layout::cube: return "cube";
    case Layout::cube_pinned: return "cube_pinned";
    case Layout::shell_anchored: return "shell_anchored";
    case Layout::circle_arc: return "circle_arc";
    case Layout::lenz_arc: return "lenz_arc";
    case Layout::center_grid: return "center_grid";
  }
  return "?";
}

inline Layout parse_layout(const std::string& s) {
  for (Layout l : {Layout::cube, Layout::cube_pinned, Layout::shell_anchored, Layout::circle_arc, Layout::lenz_arc,
                   Layout::center_grid})
    if (s == to_string(l)) return l;
  throw std::invalid_argument("unknown family layout: " + s);
}

inline const char* to_string(RadiusMode m) { return m == RadiusMode::unit ? "unit" : "varying"; }

inline RadiusMode parse_radius_mode(const std::string& s) {
  if (s == "unit") return RadiusMode::unit;
  if (s == "varying") return RadiusMode::varying;
  throw std::invalid_argument("unknown radius mode: " + s);
}

/// Spheres S_i with delta-separated anchors, indexed by (center, radius) in R^{n+1}.
class SphereFamily {
public:
  SphereFamily() = default;
  SphereFamily(int n, double delta, std::string mode, std::uint64_t seed)
      : n_(n), delta_(delta), mode_(std::move(mode)), seed_(seed), index_(n + 1, delta) {
    if (n < 2 || n + 1 > kMaxDim) throw std::invalid_argument("SphereFamily: n must lie in [2, 5]");
    check_delta(delta, "SphereFamily");
  }

  void add(const Vec& anchor, const Vec& center, double radius) {
    if (anchor.dim() != n_ || center.dim() != n_) throw std::invalid_argument("SphereFamily: dimension mismatch");
    if (!(radius > 0.0)) throw std::invalid_argument("SphereFamily: radius must be positive");
    anchors_.push_back(anchor);
    centers_.push_back(center);
    radii_.push_back(radius);
    index_.insert(lift(center, radius));
  }

  int n() const { return n_; }
  double delta() const { return delta_; }
  const std::string& mode() const { return mode_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t size() const { return centers_.size(); }
  bool empty() const { return centers_.empty(); }

  const Vec& anchor(std::size_t i) const { return anchors_[i]; }
  const Vec& center(std::size_t i) const { return centers_[i]; }
  double radius(std::size_t i) const { return radii_[i]; }
  Sphere sphere(std::size_t i) const { return Sphere(centers_[i], radii_[i]); }
  const std::vector<Vec>& anchors() const { return anchors_; }
  const std::vector<Vec>& centers() const { return centers_; }
  const std::vector<double>& radii() const { return radii_; }

  // (center, radius) as a point of R^{n+1}.
  const Vec& point(std::size_t i) const { return index_.point(i); }
  const GridIndex& index() const { return index_; }

  SphereFamily translated(const Vec& v) const {
    SphereFamily f(n_, delta_, mode_, seed_);
    for (std::size_t i = 0; i < size(); ++i) f.add(anchors_[i] + v, centers_[i] + v, radii_[i]);
    return f;
  }

  static Vec lift(const Vec& c, double r) {
    Vec p(c.dim() + 1);
    for (int k = 0; k < c.dim(); ++k) p[k] = c[k];
    p[c.dim()] = r;
    return p;
  }

private:
  int n_ = 2;
  double delta_ = 0.1;
  std::string mode_;
  std::uint64_t seed_ = 0;
  std::vector<Vec> anchors_, centers_;
  std::vector<double> radii_;
  GridIndex index_;
};

// Largest relative deviation of | |anchor - center| - radius | / radius.
inline double max_anchor_residual(const SphereFamily& f) {
  double worst = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i)
    worst = std::max(worst, std::abs(dist(f.anchor(i), f.center(i)) - f.radius(i)) / f.radius(i));
  return worst;
}

inline std::size_t anchor_separation_violations(const SphereFamily& f) {
  return separation_violations(f.anchors(), f.delta(), NetMetric::euclidean);
}

// Diameter of the center set: exact up to 2000 spheres, otherwise the max over a
// deterministic subset of rows (a lower bound that is tight for convex layouts).
inline double center_diameter(const SphereFamily& f) {
  const std::size_t N = f.size();
  if (N < 2) return 0.0;
  const std::size_t rows = N <= 2000 ? N : 64;
  std::vector<double> best(rows, 0.0);
  parallel_for(rows, [&](std::size_t r) {
    const std::size_t i = rows == N ? r : r * (N - 1) / (rows - 1);
    double m = 0.0;
    for (std::size_t j = 0; j < N; ++j) m = std::max(m, (f.center(i) - f.center(j)).norm2());
    best[r] = m;
  });
  return std::sqrt(*std::max_element(best.begin(), best.end()));
}

struct FamilySpec {
  Layout layout = Layout::cube;
  RadiusMode radius = RadiusMode::unit;
  std::shared_ptr<const TranslateSet> T;  // cube layout only; null means the unit sphere
  double c_diam = 0.5;                     // size of the center set for the concentrated layouts
};

namespace detail {

// Points of delta*Z^n inside `box` accepted by keep(p), in lexicographic order.
template <class Keep>
void lattice_points(const Box& box, double delta, Keep&& keep) {
  const int n = box.dim();
  std::vector<std::int64_t> lo(n), hi(n), idx(n);
  for (int i = 0; i < n; ++i) {
    lo[i] = static_cast<std::int64_t>(std::ceil(box.lo[i] / delta));
    hi[i] = static_cast<std::int64_t>(std::floor(box.hi[i] / delta));
    if (hi[i] < lo[i]) return;
    idx[i] = lo[i];
  }
  Vec p(n);
  for (;;) {
    for (int i = 0; i < n; ++i) p[i] = static_cast<double>(idx[i]) * delta;
    keep(p);
    int i = 0;
    for (; i < n; ++i) {
      if (++idx[i] <= hi[i]) break;
      idx[i] = lo[i];
    }
    if (i == n) break;
  }
}

// Angles theta in [-half_angle, half_angle] with |w - a(cos theta, sin theta, 0, ...)| = 1.
inline std::vector<double> arc_solutions(const Vec& w, double a, double half_angle) {
  const double rho = std::hypot(w[0], w[1]);
  if (rho < 1e-15) return {};
  const double rhs = (w.norm2() + a * a - 1.0) / (2.0 * a);
  const double c = rhs / rho;
  if (c > 1.0 || c < -1.0) return {};
  const double phi = std::atan2(w[1], w[0]);
  const double off = std::acos(c);
  std::vector<double> out;
  for (double th : {phi - off, phi + off}) {
    th = std::remainder(th, 2.0 * std::numbers::pi);
    if (std::abs(th) <= half_angle && (out.empty() || std::abs(out[0] - th) > 1e-15)) out.push_back(th);
  }
  return out;
}

inline void arc_family(SphereFamily& f, double a, double chord, Rng& rng) {
  const int n = f.n();
  const double delta = f.delta();
  const double half = std::asin(std::min(1.0, chord / (2.0 * a)));
  Vec lo(n), hi(n);
  for (int i = 0; i < n; ++i) lo[i] = -1.0, hi[i] = 1.0;
  lo[0] = a * std::cos(half) - 1.0;
  hi[0] = a + 1.0;
  lo[1] = -a * std::sin(half) - 1.0;
  hi[1] = a * std::sin(half) + 1.0;
  lattice_points(Box(lo, hi), delta, [&](const Vec& w) {
    const auto th = arc_solutions(w, a, half);
    if (th.empty()) return;
    const double t = th.size() == 1 ? th[0] : th[rng.below(th.size())];
    Vec x(n);
    x[0] = a * std::cos(t);
    x[1] = a * std::sin(t);
    f.add(w, x, 1.0);
  });
}

}  // namespace detail

inline std::vector<Vec> translate_directions(int n, double delta, const TranslateSet* T, std::uint64_t seed) {
  if (T == nullptr) return sphere_net(n, delta, mix_seed(seed, 11));
  if (T->ambient_dim() != n) throw std::invalid_argument("generate_family: translate set dimension mismatch");
  return translate_net(*T, delta, mix_seed(seed, 11));
}

inline SphereFamily generate_family(int n, double delta, const FamilySpec& spec, std::uint64_t seed) {
  check_delta(delta, "generate_family");
  std::string mode = std::string(to_string(spec.layout)) + "/" + to_string(spec.radius);
  SphereFamily f(n, delta, mode, seed);
  Rng rng(seed, 7);
  Vec one(n);
  for (int i = 0; i < n; ++i) one[i] = 1.0;
  const Box unit_cube(Vec(n), one);
  const double c = spec.c_diam;
  switch (spec.layout) {
    case Layout::cube: {
      const auto anchors = box_net(unit_cube, delta, mix_seed(seed, 3));
      const auto dirs = translate_directions(n, delta, spec.T.get(), seed);
      for (const Vec& w : anchors) {
        const Vec& u = dirs[rng.below(dirs.size())];
        const double t = spec.radius == RadiusMode::unit ? 1.0 : rng.uniform(1.0, 2.0);
        f.add(w, w + u * t, t);
      }
      break;
    }
    case Layout::cube_pinned: {
      if (!(c > 0.0 && c <= 1.0)) throw PreconditionError("generate_family: cube_pinned needs c_diam in (0, 1]");
      Vec mid = unit_cube.center();
      mid[0] = -0.5 * c;
      for (const Vec& w : box_net(unit_cube, delta, mix_seed(seed, 3))) {
        const Vec x = mid + uniform_in_ball(n, 0.5 * c, rng);
        const double r = dist(w, x);
        if (r >= 0.5 && r <= 2.0) f.add(w, x, r);
      }
      break;
    }
    case Layout::shell_anchored: {
      if (!(c > 0.0 && c <= 1.0)) throw PreconditionError("generate_family: shell_anchored needs c_diam in (0, 1]");
      const double h = 0.5 * c;
      detail::lattice_points(Box::around(Vec(n), 1.0 + h), delta, [&](const Vec& w) {
        const double r = w.norm();
        if (r < 1.0 - h || r > 1.0 + h || r == 0.0) return;
        f.add(w, w - w / r, 1.0);
      });
      break;
    }
    case Layout::circle_arc:
      if (n < 3) throw PreconditionError("generate_family: circle_arc needs n >= 3");
      detail::arc_family(f, 1.0, c, rng);
      break;
    case Layout::lenz_arc:
      if (n < 4) throw PreconditionError("generate_family: lenz_arc needs n >= 4");
      detail::arc_family(f, 1.0 / std::sqrt(2.0), c, rng);
      break;
    case Layout::center_grid: {
      Vec hi(n);
      for (int i = 0; i < n; ++i) hi[i] = c;
      detail::lattice_points(Box(Vec(n), hi), delta, [&](const Vec& x) { f.add(x + Vec::unit(n, 0), x, 1.0); });
      break;
    }
  }
  return f;
}

// Cube layout with translates T (null: the unit sphere).
inline SphereFamily generate_family(int n, double delta, std::shared_ptr<const TranslateSet> T, RadiusMode mode,
                                    std::uint64_t seed) {
  FamilySpec spec;
  spec.T = std::move(T);
  spec.radius = mode;
  return generate_family(n, delta, spec, seed);
}

// ---------------------------------------------------------------------------
// Counting

struct CountResult {
  double max_ratio = 0.0;
  std::vector<double> rung_max;  // per ladder rung
  std::vector<std::size_t> rung_count;
};

namespace detail {

inline Box lifted_bbox(const SphereFamily& f) {
  const int d = f.n() + 1;
  Vec lo(d), hi(d);
  for (int k = 0; k < d; ++k) lo[k] = kInf, hi[k] = -kInf;
  for (std::size_t i = 0; i < f.size(); ++i)
    for (int k = 0; k < d; ++k) lo[k] = std::min(lo[k], f.point(i)[k]), hi[k] = std::max(hi[k], f.point(i)[k]);
  return {lo, hi};
}

// Max over sampled balls of count / scale(rho). Half the balls sit near family points,
// half are uniform in the bounding box of the lifted points.
template <class Scale>
CountResult ball_count_max(const SphereFamily& f, const std::vector<double>& ladder, std::int64_t ball_samples,
                           std::uint64_t seed, Scale&& scale) {
  for (double rho : ladder)
    if (!(rho >= f.delta() * (1.0 - 1e-12))) throw PreconditionError("count_in_balls: rho below delta");
  if (ball_samples < 1) throw std::invalid_argument("count_in_balls: need at least one ball");
  CountResult res;
  res.rung_max.assign(ladder.size(), 0.0);
  res.rung_count.assign(ladder.size(), 0);
  if (f.empty()) return res;
  const Box bbox = lifted_bbox(f);
  const int d = f.n() + 1;
  for (std::size_t r = 0; r < ladder.size(); ++r) {
    const double rho = ladder[r];
    std::vector<std::size_t> counts(static_cast<std::size_t>(ball_samples));
    parallel_for(counts.size(), [&](std::size_t b) {
      Rng rng(mix_seed(seed, r), b);
      Vec c = (b % 2 == 0) ? f.point(rng.below(f.size())) + uniform_in_ball(d, 0.5 * rho, rng) : bbox.sample(rng);
      counts[b] = f.index().count_in_ball(c, rho);
    });
    const std::size_t best = *std::max_element(counts.begin(), counts.end());
    res.rung_count[r] = best;
    res.rung_max[r] = static_cast<double>(best) / scale(rho);
    res.max_ratio = std::max(res.max_ratio, res.rung_max[r]);
  }
  return res;
}

}  // namespace detail

// Max over sampled balls B_rho in R^{n+1} of #{i : (x_i, t_i) in B_rho} / (delta^{-n} rho^{n-s}).
inline CountResult count_in_balls(const SphereFamily& f, double s, const std::vector<double>& ladder,
                                  std::int64_t ball_samples, std::uint64_t seed) {
  const double n = f.n(), delta = f.delta();
  return detail::ball_count_max(f, ladder, ball_samples, seed,
                                [&](double rho) { return std::pow(delta, -n) * std::pow(rho, n - s); });
}

// Smallest A (over the sampled balls) with #{i : (x_i, t_i) in B_r} <= A r / delta.
inline CountResult nonconcentration_constant(const SphereFamily& f, const std::vector<double>& ladder,
                                             std::int64_t ball_samples, std::uint64_t seed) {
  const double delta = f.delta();
  return detail::ball_count_max(f, ladder, ball_samples, seed, [&](double r) { return r / delta; });
}

inline std::vector<double> dyadic_ladder(double lo, double hi) {
  std::vector<double> out;
  for (double r = lo; r <= hi * (1.0 + 1e-12); r *= 2.0) out.push_back(r);
  return out;
}

struct SumRatio {
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
  std::int64_t terms = 0;
};

inline SumRatio weighted_count_sum(const SphereFamily& f, const Vec& a, double alpha, double P, double Q) {
  if (!(P >= 0.0 && P <= Q)) throw PreconditionError("weighted_count_sum: need 0 <= P <= Q");
  if (a.dim() != f.n()) throw std::invalid_argument("weighted_count_sum: dimension mismatch");
  for (double r : f.radii())
    if (std::abs(r - 1.0) > 1e-12) throw PreconditionError("weighted_count_sum: family must have unit radii");
  const double delta = f.delta();
  SumRatio out;
  for (std::size_t j = 0; j < f.size(); ++j) {
    const double d = dist(a, f.center(j));
    if (d < P || d > Q) continue;
    out.lhs += std::pow(d + delta, alpha);
    ++out.terms;
  }
  const double scale = std::pow(delta, -static_cast<double>(f.n()));
  if (alpha > -1.0)
    out.rhs = scale * std::pow(Q, alpha + 1.0);
  else if (alpha == -1.0)
    out.rhs = scale * std::log(Q / (P + delta));
  else
    out.rhs = scale * std::pow(P + delta, alpha + 1.0);
  out.ratio = out.rhs > 0.0 ? out.lhs / out.rhs : (out.lhs > 0.0 ? kInf : 0.0);
  return out;
}

// ---------------------------------------------------------------------------
// k-sphere intersection sums

enum class VolumeMode { analytic_bound, monte_carlo };

inline const char* to_string(VolumeMode m) { return m == VolumeMode::analytic_bound ? "analytic" : "mc"; }

inline VolumeMode parse_volume_mode(const std::string& s) {
  if (s == "analytic" || s == "analytic_bound") return VolumeMode::analytic_bound;
  if (s == "mc" || s == "monte_carlo") return VolumeMode::monte_carlo;
  throw std::invalid_argument("unknown volume mode: " + s);
}

struct KSphOptions {
  std::int64_t tuple_budget = 100'000'000;  // above this many tuples, sample this many uniformly
  std::int64_t mc_samples = 256;             // per tuple
  double c_diam = 0.5;
  double triple_sep = 1.0;  // three-annuli formula used once min separation >= triple_sep * sqrt(delta)
  std::uint64_t seed = 1;
};

struct KSphResult {
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
  std::int64_t tuples = 0;
  bool subsampled = false;
};

inline double ksph_rhs(int k, double delta) {
  const double L = std::log(1.0 / delta);
  switch (k) {
    case 2: return delta * delta * L;
    case 3: return std::pow(delta, 2.5) * L;
    case 4: return delta * delta * delta * L;
  }
  throw std::invalid_argument("ksph_rhs: k must be 2, 3 or 4");
}

namespace detail {

inline bool annuli_disjoint(const Sphere& a, const Sphere& b, double delta) {
  const double d = dist(a.center, b.center);
  return d > a.radius + b.radius + 2.0 * delta || d < std::abs(a.radius - b.radius) - 2.0 * delta;
}

inline double pair_surrogate(const Sphere& a, const Sphere& b, double delta, int n) {
  if (annuli_disjoint(a, b, delta)) return 0.0;
  return two_annuli_bound(a, b, delta, n);
}

inline double triple_surrogate(const Sphere& a, const Sphere& b, const Sphere& c, double delta, int n,
                               double triple_sep) {
  double v = std::min({pair_surrogate(a, b, delta, n), pair_surrogate(a, c, delta, n), pair_surrogate(b, c, delta, n)});
  if (v == 0.0) return 0.0;
  const bool unit = a.radius == 1.0 && b.radius == 1.0 && c.radius == 1.0;
  const double sep = std::min({dist(a.center, b.center), dist(a.center, c.center), dist(b.center, c.center)});
  if (unit && sep > 0.0) {
    const TripleGeometry g = triple_quantities(a, b, c);
    if (g.m >= triple_sep * std::sqrt(delta)) v = std::min(v, three_annuli_bound_from(g, delta, n).value);
  }
  return v;
}

inline double tuple_surrogate(const std::vector<Sphere>& s, double delta, int n, double triple_sep) {
  if (s.size() == 1) return annulus_volume(n, s[0].radius, delta);
  if (s.size() == 2) return pair_surrogate(s[0], s[1], delta, n);
  if (s.size() == 3) return triple_surrogate(s[0], s[1], s[2], delta, n, triple_sep);
  return std::min({triple_surrogate(s[0], s[1], s[2], delta, n, triple_sep),
                   triple_surrogate(s[0], s[1], s[3], delta, n, triple_sep),
                   triple_surrogate(s[0], s[2], s[3], delta, n, triple_sep)});
}

inline double tuple_mc(const std::vector<Sphere>& s, double delta, std::int64_t samples, std::uint64_t seed) {
  if (s.size() == 1) return annulus_volume(s[0].dim(), s[0].radius, delta);
  for (std::size_t a = 1; a < s.size(); ++a)
    if (annuli_disjoint(s[0], s[a], delta)) return 0.0;
  return mc_intersection_volume(s, delta, samples, seed).value;
}

}  // namespace detail

// delta^{(k-1)n} * sum over (k-1)-tuples (j, ...) of |S_i^delta cap S_j^delta cap ...|.
inline KSphResult ksph_sum(const SphereFamily& f, std::size_t i, int k, VolumeMode mode, const KSphOptions& opt = {}) {
  if (k < 2 || k > 4) throw std::invalid_argument("ksph_sum: k must be 2, 3 or 4");
  if (f.n() < k) throw PreconditionError("ksph_sum: k-fold sums need n >= k");
  if (i >= f.size()) throw std::out_of_range("ksph_sum: index out of range");
  if (center_diameter(f) > opt.c_diam * (1.0 + 1e-9))
    throw PreconditionError("ksph_sum: centers spread beyond c_diam");
  for (double r : f.radii())
    if (r < 0.5 || r > 2.0) throw PreconditionError("ksph_sum: radius outside [1/2, 2]");
  const int n = f.n();
  const double delta = f.delta();
  const std::size_t N = f.size();
  const int m = k - 1;
  const double total = std::pow(static_cast<double>(N), m);
  KSphResult res;
  res.subsampled = total > static_cast<double>(opt.tuple_budget);
  const std::int64_t count = res.subsampled ? opt.tuple_budget : static_cast<std::int64_t>(total);
  res.tuples = count;
  constexpr std::int64_t kBlock = 1024;
  const std::int64_t blocks = (count + kBlock - 1) / kBlock;
  std::vector<double> partial(static_cast<std::size_t>(blocks), 0.0);
  const std::uint64_t stream = mix_seed(opt.seed, i, static_cast<std::uint64_t>(k));
  parallel_for(partial.size(), [&](std::size_t b) {
    Rng rng(stream, b);
    std::vector<std::size_t> ids(static_cast<std::size_t>(k));
    std::vector<Sphere> s;
    ids[0] = i;
    double sum = 0.0;
    const std::int64_t first = static_cast<std::int64_t>(b) * kBlock;
    const std::int64_t last = std::min(count, first + kBlock);
    for (std::int64_t t = first; t < last; ++t) {
      std::uint64_t code = static_cast<std::uint64_t>(t);
      for (int a = 1; a <= m; ++a) {
        std::size_t j;
        if (res.subsampled) {
          j = rng.below(N);
        } else {
          j = code % N;
          code /= N;
        }
        ids[static_cast<std::size_t>(a)] = j;
      }
      // Repeated indices contribute the intersection of the distinct spheres.
      s.clear();
      for (std::size_t a = 0; a < ids.size(); ++a)
        if (std::find(ids.begin(), ids.begin() + a, ids[a]) == ids.begin() + a) s.push_back(f.sphere(ids[a]));
      sum += mode == VolumeMode::analytic_bound
                 ? detail::tuple_surrogate(s, delta, n, opt.triple_sep)
                 : detail::tuple_mc(s, delta, opt.mc_samples, mix_seed(stream, static_cast<std::uint64_t>(t), 5));
    }
    partial[b] = sum;
  });
  double sum = 0.0;
  for (double p : partial) sum += p;
  if (res.subsampled) sum *= total / static_cast<double>(count);
  res.lhs = std::pow(delta, static_cast<double>(m * n)) * sum;
  res.rhs = ksph_rhs(k, delta);
  res.ratio = res.lhs / res.rhs;
  return res;
}

// Deterministic sample of distinct sphere indices.
inline std::vector<std::size_t> sample_indices(const SphereFamily& f, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> all(f.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  Rng rng(seed, 17);
  shuffle_in_place(all, rng);
  all.resize(std::min(count, all.size()));
  std::sort(all.begin(), all.end());
  return all;
}

// ---------------------------------------------------------------------------
// Dual sums

struct WeightVector {
  std::vector<double> a;
  double q = 2.0;  // primal exponent; weights are normalized in l^{q'}

  double q_prime() const { return q / (q - 1.0); }

  static WeightVector uniform(std::size_t size, double q, double value = 1.0) {
    return {std::vector<double>(size, value), q};
  }

  // delta^n * sum a_i^{q'}
  double normalization(double delta, int n) const {
    const double qp = q_prime();
    double s = 0.0;
    for (double v : a) s += std::pow(v, qp);
    return std::pow(delta, n) * s;
  }

  WeightVector normalized(double delta, int n) const {
    const double z = normalization(delta, n);
    if (!(z > 0.0)) throw std::invalid_argument("WeightVector: cannot normalize zero weights");
    WeightVector w = *this;
    const double scale = std::pow(z, -1.0 / q_prime());
    for (double& v : w.a) v *= scale;
    return w;
  }
};

/// Dense grid over a box listing, per cell, the annuli that meet it.
class AnnulusIndex {
public:
  AnnulusIndex(const SphereFamily& f, const Box& region) : f_(&f), region_(region) {
    const int n = f.n();
    double rmax = 0.0;
    for (double r : f.radii()) rmax = std::max(rmax, r);
    const double per_axis = std::floor(std::pow(4096.0, 1.0 / n));
    cell_ = std::max(2.0 * f.delta(), 2.0 * (rmax + f.delta()) / per_axis);
    total_ = 1;
    for (int k = 0; k < n; ++k) {
      dims_[k] = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil((region.hi[k] - region.lo[k]) / cell_)));
      total_ *= dims_[k];
    }
    if (total_ > 50'000'000) throw std::invalid_argument("AnnulusIndex: region too large for the grid");
    std::vector<std::uint32_t> counts(static_cast<std::size_t>(total_) + 1, 0);
    for (int pass = 0; pass < 2; ++pass) {
      std::vector<std::uint32_t> fill;
      if (pass == 1) {
        offsets_.assign(counts.size(), 0);
        for (std::size_t c = 0; c + 1 < counts.size(); ++c) offsets_[c + 1] = offsets_[c] + counts[c];
        ids_.assign(offsets_.back(), 0);
        fill.assign(offsets_.begin(), offsets_.end() - 1);
      }
      for (std::size_t i = 0; i < f.size(); ++i) {
        const Vec& c = f.center(i);
        const double r0 = std::max(0.0, f.radius(i) - f.delta()), r1 = f.radius(i) + f.delta();
        std::array<std::int64_t, kMaxDim> lo{}, hi{}, idx{};
        for (int k = 0; k < n; ++k) {
          lo[k] = std::max<std::int64_t>(0, cell_of(c[k] - r1, k));
          hi[k] = std::min<std::int64_t>(dims_[k] - 1, cell_of(c[k] + r1, k));
          if (hi[k] < lo[k]) goto next;
          idx[k] = lo[k];
        }
        for (;;) {
          Box cell{Vec(n), Vec(n)};
          for (int k = 0; k < n; ++k) {
            cell.lo[k] = region_.lo[k] + idx[k] * cell_;
            cell.hi[k] = cell.lo[k] + cell_;
          }
          if (box_meets_shell(cell, c, r0, r1)) {
            const std::size_t flat = flatten(idx);
            if (pass == 0)
              ++counts[flat];
            else
              ids_[fill[flat]++] = static_cast<std::uint32_t>(i);
          }
          int k = 0;
          for (; k < n; ++k) {
            if (++idx[k] <= hi[k]) break;
            idx[k] = lo[k];
          }
          if (k == n) break;
        }
      next:;
      }
    }
  }

  // sum of w[i] over annuli containing y.
  double weighted_depth(const Vec& y, const std::vector<double>& w) const {
    std::array<std::int64_t, kMaxDim> idx{};
    for (int k = 0; k < f_->n(); ++k) {
      idx[k] = cell_of(y[k], k);
      if (idx[k] < 0 || idx[k] >= dims_[k]) return 0.0;
    }
    const std::size_t flat = flatten(idx);
    double s = 0.0;
    for (std::uint32_t p = offsets_[flat]; p < offsets_[flat + 1]; ++p) {
      const std::uint32_t i = ids_[p];
      if (in_shell(y, f_->center(i), f_->radius(i), f_->delta())) s += w[i];
    }
    return s;
  }

  double cell() const { return cell_; }
  std::size_t entries() const { return ids_.size(); }

private:
  std::int64_t cell_of(double v, int k) const {
    return static_cast<std::int64_t>(std::floor((v - region_.lo[k]) / cell_));
  }
  std::size_t flatten(const std::array<std::int64_t, kMaxDim>& idx) const {
    std::size_t flat = 0;
    for (int k = f_->n() - 1; k >= 0; --k) flat = flat * static_cast<std::size_t>(dims_[k]) + idx[k];
    return flat;
  }

  const SphereFamily* f_;
  Box region_;
  double cell_ = 1.0;
  std::array<std::int64_t, kMaxDim> dims_{};
  std::int64_t total_ = 1;
  std::vector<std::uint32_t> offsets_, ids_;
};

inline bool region_covers_annuli(const SphereFamily& f, const Box& region) {
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double r = f.radius(i) + f.delta();
    for (int k = 0; k < f.n(); ++k)
      if (f.center(i)[k] - r < region.lo[k] || f.center(i)[k] + r > region.hi[k]) return false;
  }
  return true;
}

// Smallest box containing every annulus.
inline Box annuli_bbox(const SphereFamily& f) {
  const int n = f.n();
  Vec lo(n), hi(n);
  for (int k = 0; k < n; ++k) lo[k] = kInf, hi[k] = -kInf;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double r = f.radius(i) + f.delta();
    for (int k = 0; k < n; ++k) {
      lo[k] = std::min(lo[k], f.center(i)[k] - r);
      hi[k] = std::max(hi[k], f.center(i)[k] + r);
    }
  }
  return {lo, hi};
}

// || sum_i a_i 1_{S_i^delta} ||_{L^{p'}}. For p' = 1 the integral is linear and
// evaluated exactly from the annulus volumes.
inline MCEstimate dual_sum_norm(const SphereFamily& f, const WeightVector& w, double p_prime, const Box& region,
                                std::int64_t samples, std::uint64_t seed) {
  if (!(p_prime >= 1.0)) throw PreconditionError("dual_sum_norm: p' must be at least 1");
  if (w.a.size() != f.size()) throw std::invalid_argument("dual_sum_norm: weight count mismatch");
  if (!region_covers_annuli(f, region)) throw PreconditionError("dual_sum_norm: region does not cover the annuli");
  MCEstimate est;
  est.seed = seed;
  if (p_prime == 1.0) {
    for (std::size_t i = 0; i < f.size(); ++i) est.value += w.a[i] * annulus_volume(f.n(), f.radius(i), f.delta());
    return est;
  }
  const AnnulusIndex index(f, region);
  const double vol = region.volume();
  MCEstimate I = mc_mean([&](Rng& rng) { return std::pow(index.weighted_depth(region.sample(rng), w.a), p_prime); },
                         samples, seed);
  I.value *= vol;
  I.std_err *= vol;
  est.samples = I.samples;
  if (I.value <= 0.0) return est;
  est.value = std::pow(I.value, 1.0 / p_prime);
  est.std_err = est.value / p_prime * I.std_err / I.value;
  return est;
}

// ---------------------------------------------------------------------------
// Serialization

inline void write_family(std::ostream& out, const SphereFamily& f) {
  out << "# sphere-family n=" << f.n() << " delta=" << std::setprecision(17) << f.delta() << " mode=" << f.mode()
      << " seed=" << f.seed() << " count=" << f.size() << '\n';
  for (std::size_t i = 0; i < f.size(); ++i) {
    for (int k = 0; k < f.n(); ++k) out << f.center(i)[k] << ' ';
    out << f.radius(i);
    for (int k = 0; k < f.n(); ++k) out << ' ' << f.anchor(i)[k];
    out << '\n';
  }
}

inline SphereFamily read_family(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# sphere-family", 0) != 0)
    throw std::runtime_error("read_family: missing header");
  std::istringstream hs(line.substr(15));
  int n = 0;
  double delta = 0.0;
  std::string mode;
  std::uint64_t seed = 0;
  std::string tok;
  while (hs >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
    if (key == "n") n = std::stoi(val);
    else if (key == "delta") delta = std::stod(val);
    else if (key == "mode") mode = val;
    else if (key == "seed") seed = std::stoull(val);
  }
  SphereFamily f(n, delta, mode, seed);
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    Vec c(n), w(n);
    double r = 0.0;
    for (int k = 0; k < n; ++k) ls >> c[k];
    ls >> r;
    for (int k = 0; k < n; ++k) ls >> w[k];
    if (!ls) throw std::runtime_error("read_family: malformed row");
    f.add(w, c, r);
  }
  return f;
}

}  // namespace nikodym
