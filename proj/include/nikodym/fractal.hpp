#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nikodym/csv.hpp"
#include "nikodym/exponents.hpp"
#include "nikodym/geometry.hpp"
#include "nikodym/grid.hpp"
#include "nikodym/parallel.hpp"
#include "nikodym/random.hpp"

namespace nikodym {

/// Symmetric Cantor set C_a in [-1/2, 1/2], taken to a power.
/// Each generation keeps the two outer subintervals of relative length a.
struct CantorSpec {
  int factors = 1;
  double ratio = 0.5;
  int depth = 0;

  double dimension_per_factor() const { return std::log(2.0) / std::log(1.0 / ratio); }
  double dimension() const { return factors * dimension_per_factor(); }
  bool is_interval() const { return ratio >= 0.5; }
  double cell_side(int k) const { return std::pow(ratio, k); }
  std::uint64_t cell_count(int k) const { return std::uint64_t{1} << (k * factors); }
};

inline CantorSpec build_cantor(double dimension_per_factor, int factors, int depth) {
  if (!(dimension_per_factor > 0.0) || dimension_per_factor > 1.0)
    throw std::invalid_argument("build_cantor: dimension per factor must lie in (0, 1]");
  if (factors < 1) throw std::invalid_argument("build_cantor: factors >= 1");
  if (depth < 0) throw std::invalid_argument("build_cantor: depth >= 0");
  if (depth * factors > 62) throw std::invalid_argument("build_cantor: depth too large");
  const double a = dimension_per_factor >= 1.0 ? 0.5 : std::pow(2.0, -1.0 / dimension_per_factor);
  return {factors, a, depth};
}

// Smallest k with a^k <= delta / 2.
inline int auto_depth(double ratio, double delta) {
  int k = 0;
  double side = 1.0;
  while (side > 0.5 * delta * (1.0 + 1e-12)) {
    side *= ratio;
    ++k;
  }
  return k;
}

namespace cantor1d {

// Left endpoint of the depth-k cell with the given binary digits (most significant first).
inline double cell_left(std::uint64_t digits, int k, double a) {
  double left = -0.5, len = 1.0;
  for (int j = k - 1; j >= 0; --j) {
    if ((digits >> j) & 1U) left += len - a * len;
    len *= a;
  }
  return left;
}

inline bool contains(double x, double a, int depth, double tol = 1e-12) {
  double left = -0.5, len = 1.0;
  if (x < left - tol || x > left + len + tol) return false;
  for (int k = 0; k < depth; ++k) {
    const double sub = a * len;
    if (x <= left + sub + tol) {
      len = sub;
    } else if (x >= left + len - sub - tol) {
      left += len - sub;
      len = sub;
    } else {
      return false;
    }
  }
  return true;
}

inline double dist_rec(double x, double left, double len, double a, int remaining, double best) {
  const double d = x < left ? left - x : (x > left + len ? x - left - len : 0.0);
  if (d >= best) return best;
  if (remaining == 0 || len < 1e-15) return d;
  const double sub = a * len;
  const double mid = left + 0.5 * len;
  if (x <= mid) {
    best = dist_rec(x, left, sub, a, remaining - 1, best);
    best = dist_rec(x, left + len - sub, sub, a, remaining - 1, best);
  } else {
    best = dist_rec(x, left + len - sub, sub, a, remaining - 1, best);
    best = dist_rec(x, left, sub, a, remaining - 1, best);
  }
  return best;
}

// Distance from x to the depth-resolved set (union of 2^depth closed intervals).
inline double distance(double x, double a, int depth) { return dist_rec(x, -0.5, 1.0, a, depth, kInf); }

inline double succ_rec(double y, double left, double len, double a, int remaining) {
  if (y > left + len) return kInf;
  if (y <= left) return left;
  if (remaining == 0 || len < 1e-15) return y;
  const double sub = a * len;
  const double s = succ_rec(y, left, sub, a, remaining - 1);
  if (s < kInf) return s;
  return succ_rec(y, left + len - sub, sub, a, remaining - 1);
}

// Smallest point of the set that is >= y, or +inf.
inline double successor(double y, double a, int depth) { return succ_rec(y, -0.5, 1.0, a, depth); }

inline double random_point(double a, Rng& rng) {
  if (a >= 0.5) return rng.uniform(-0.5, 0.5);
  double left = -0.5, len = 1.0;
  while (len > 1e-17) {
    const double sub = a * len;
    if (rng.uniform() >= 0.5) left += len - sub;
    len = sub;
  }
  return left;
}

}  // namespace cantor1d

/// T = {0}^{n - ceil(s)} x C_s in R^n. For s = 0 this is the single point 0.
class TranslateSet {
public:
  TranslateSet(int n, double s, int depth = 20) : n_(n), s_(s) {
    if (n < 1 || n > kMaxDim) throw std::invalid_argument("TranslateSet: unsupported dimension");
    if (s < -1e-12 || s > n + 1e-12) throw std::invalid_argument("TranslateSet: s outside [0, n]");
    const double sn = snap_integer(s);
    factors_ = sn <= 0.0 ? 0 : ceil_s(sn);
    if (factors_ > 0) cantor_ = build_cantor(sn / factors_, factors_, std::min(depth, 62 / factors_));
    else cantor_ = {0, 0.5, 0};
  }

  static TranslateSet for_delta(int n, double s, double delta) {
    TranslateSet t(n, s, 0);
    if (t.factors_ > 0) t.cantor_.depth = std::min(auto_depth(t.cantor_.ratio, delta), 62 / t.factors_);
    return t;
  }

  int ambient_dim() const { return n_; }
  double s() const { return s_; }
  int factors() const { return factors_; }
  int zero_padding() const { return n_ - factors_; }
  const CantorSpec& cantor() const { return cantor_; }
  int depth() const { return cantor_.depth; }
  double ratio() const { return cantor_.ratio; }

  bool contains(const Vec& x, double tol = 1e-12) const { return contains_at(x, depth(), tol); }

  bool contains_at(const Vec& x, int depth, double tol = 1e-12) const {
    if (x.dim() != n_) throw std::invalid_argument("TranslateSet: dimension mismatch");
    for (int i = 0; i < zero_padding(); ++i)
      if (std::abs(x[i]) > tol) return false;
    for (int j = 0; j < factors_; ++j)
      if (!cantor1d::contains(x[zero_padding() + j], cantor_.ratio, depth, tol)) return false;
    return true;
  }

  // Euclidean distance to the depth-resolved set.
  double distance(const Vec& x) const { return distance_at(x, depth()); }
  double distance_at(const Vec& x, int depth) const {
    double d2 = 0.0;
    for (int i = 0; i < zero_padding(); ++i) d2 += x[i] * x[i];
    for (int j = 0; j < factors_; ++j) {
      const double d = cantor1d::distance(x[zero_padding() + j], cantor_.ratio, depth);
      d2 += d * d;
    }
    return std::sqrt(d2);
  }

  // Largest distance from x to a point of the set (corners lie in the set).
  double farthest(const Vec& x) const {
    double d2 = 0.0;
    for (int i = 0; i < zero_padding(); ++i) d2 += x[i] * x[i];
    for (int j = 0; j < factors_; ++j) {
      const double y = x[zero_padding() + j];
      d2 += std::max((y + 0.5) * (y + 0.5), (y - 0.5) * (y - 0.5));
    }
    return std::sqrt(d2);
  }

  // A point of the limit set with random digits.
  Vec random_point(Rng& rng) const {
    Vec x(n_);
    for (int j = 0; j < factors_; ++j) x[zero_padding() + j] = cantor1d::random_point(cantor_.ratio, rng);
    return x;
  }

  // Closed boxes of the depth-k cells (degenerate in the padded coordinates).
  std::vector<Box> cells(int k) const {
    std::vector<Box> out;
    const double side = cantor_.cell_side(k);
    const std::uint64_t per = std::uint64_t{1} << k;
    const std::uint64_t total = factors_ == 0 ? 1 : cantor_.cell_count(k);
    out.reserve(total);
    for (std::uint64_t id = 0; id < total; ++id) {
      Vec lo(n_);
      std::uint64_t rest = id;
      for (int j = 0; j < factors_; ++j) {
        lo[zero_padding() + j] = cantor1d::cell_left(rest % per, k, cantor_.ratio);
        rest /= per;
      }
      Vec hi = lo;
      for (int j = 0; j < factors_; ++j) hi[zero_padding() + j] += side;
      out.emplace_back(lo, hi);
    }
    return out;
  }

  enum class Verdict { reject, accept, split };

  // Branch-and-bound search over cells. judge(box, leaf) classifies a cell; at leaf level
  // (the set's depth, or cells below min_side) split counts as accept. Returns the accepted cell.
  std::optional<Box> search(const std::function<Verdict(const Box&, bool)>& judge, double min_side = 0.0) const {
    Vec lo(n_);
    for (int j = 0; j < factors_; ++j) lo[zero_padding() + j] = -0.5;
    Vec hi = lo;
    for (int j = 0; j < factors_; ++j) hi[zero_padding() + j] = 0.5;
    return search_rec(Box(lo, hi), 0, 1.0, judge, min_side);
  }

  // Combinatorial covering count: 2^{j * factors} with j the first generation of side <= delta.
  std::uint64_t covering_number(double delta) const {
    if (!(delta > 0.0 && delta < 0.5)) throw std::invalid_argument("covering_number: delta outside (0, 1/2)");
    if (factors_ == 0) return 1;
    int j = 0;
    double side = 1.0;
    while (side > delta * (1.0 + 1e-12)) {
      side *= cantor_.ratio;
      ++j;
    }
    if (j > depth()) throw std::invalid_argument("covering_number: insufficient depth");
    return cantor_.cell_count(j);
  }

private:
  std::optional<Box> search_rec(const Box& box, int level, double side,
                                const std::function<Verdict(const Box&, bool)>& judge, double min_side) const {
    const bool leaf = factors_ == 0 || level >= depth() || side <= min_side;
    const Verdict v = judge(box, leaf);
    if (v == Verdict::reject) return std::nullopt;
    if (v == Verdict::accept || leaf) return box;
    const double sub = side * cantor_.ratio;
    const int children = 1 << factors_;
    for (int c = 0; c < children; ++c) {
      Box child = box;
      for (int j = 0; j < factors_; ++j) {
        const int axis = zero_padding() + j;
        const double left = ((c >> j) & 1) ? box.lo[axis] + side - sub : box.lo[axis];
        child.lo[axis] = left;
        child.hi[axis] = left + sub;
      }
      if (auto found = search_rec(child, level + 1, sub, judge, min_side)) return found;
    }
    return std::nullopt;
  }

  int n_;
  double s_;
  int factors_ = 0;
  CantorSpec cantor_;
};

// max over the ladder of delta^s * N(delta). s defaults to the set's own dimension.
inline double minkowski_constant(const std::function<double(double)>& covering, const std::vector<double>& ladder,
                                 double s) {
  double best = 0.0;
  for (double d : ladder) {
    if (!(d > 0.0 && d < 0.5)) throw std::invalid_argument("minkowski_constant: ladder outside (0, 1/2)");
    best = std::max(best, std::pow(d, s) * covering(d));
  }
  return best;
}

inline double minkowski_constant(const TranslateSet& t, const std::vector<double>& ladder) {
  return minkowski_constant([&](double d) { return static_cast<double>(t.covering_number(d)); }, ladder, t.s());
}

inline double minkowski_constant(const TranslateSet& t, const std::vector<double>& ladder, double s) {
  return minkowski_constant([&](double d) { return static_cast<double>(t.covering_number(d)); }, ladder, s);
}

// ---------------------------------------------------------------------------
// delta-nets

enum class NetMetric { euclidean, geodesic };

inline double chord_threshold(double delta, NetMetric m) {
  return m == NetMetric::geodesic ? 2.0 * std::sin(0.5 * std::min(delta, std::numbers::pi)) : delta;
}

struct NetOptions {
  std::int64_t stall = 0;          // consecutive rejected random candidates before stopping; 0 = automatic
  double candidate_spacing = 0.5;  // structured candidate spacing, as a fraction of delta
  std::size_t max_points = 20'000'000;
};

/// Greedy delta-separated set built by insertion.
class GreedyNet {
public:
  GreedyNet(int dim, double delta, NetMetric metric)
      : chord_(chord_threshold(delta, metric) * (1.0 - 1e-12)), index_(dim, chord_threshold(delta, metric)) {}

  bool try_add(const Vec& p) {
    if (index_.any_closer(p, chord_)) return false;
    index_.insert(p);
    return true;
  }

  // Feeds random candidates until `stall` consecutive ones are rejected.
  template <class Sampler>
  void fill(Sampler&& sample, Rng& rng, std::int64_t stall, std::size_t max_points) {
    std::int64_t misses = 0;
    while (misses < stall && size() < max_points) {
      if (try_add(sample(rng)))
        misses = 0;
      else
        ++misses;
    }
  }

  std::size_t size() const { return index_.size(); }
  std::vector<Vec> points() const { return index_.points(); }
  const GridIndex& index() const { return index_; }

private:
  double chord_;
  GridIndex index_;
};

template <class T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

// Stall long enough that a hole the size of a delta-cap is hit about 20 times.
inline std::int64_t auto_stall(double hole_fraction) {
  return static_cast<std::int64_t>(std::clamp(20.0 / std::max(hole_fraction, 1e-12), 1e4, 5e6));
}

namespace detail {

// Adds uncovered Voronoi vertices of a net on S^2 until none within reach remain.
inline void repair_sphere2(GreedyNet& net, double delta) {
  const double reach = 2.0 * std::sin(std::min(2.0 * delta, 0.5 * std::numbers::pi));
  for (int round = 0; round < 1000; ++round) {
    const std::vector<Vec> pts = net.points();
    std::size_t added = 0;
    std::vector<std::size_t> nb;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      nb.clear();
      net.index().visit_ball(pts[i], reach, [&](std::size_t j) {
        if (j > i && j < pts.size()) nb.push_back(j);
      });
      for (std::size_t x = 0; x < nb.size(); ++x)
        for (std::size_t y = x + 1; y < nb.size(); ++y) {
          const Vec u = pts[nb[x]] - pts[i], w = pts[nb[y]] - pts[i];
          Vec v{u[1] * w[2] - u[2] * w[1], u[2] * w[0] - u[0] * w[2], u[0] * w[1] - u[1] * w[0]};
          const double len = v.norm();
          if (len < 1e-14) continue;
          v /= len;
          if (dot(v, pts[i]) < 0.0) v = -v;
          const double rho = std::acos(std::clamp(dot(v, pts[i]), -1.0, 1.0));
          if (rho > delta * (1.0 + 1e-9) && net.try_add(v)) ++added;
        }
    }
    if (added == 0) return;
  }
}

}  // namespace detail

// Geodesic delta-net of S^{n-1}.
inline std::vector<Vec> sphere_net(int n, double delta, std::uint64_t seed, const NetOptions& opt = {}) {
  if (!(delta > 0.0 && delta < 0.5)) throw std::invalid_argument("sphere_net: delta outside (0, 1/2)");
  if (n < 2) throw std::invalid_argument("sphere_net: n >= 2");
  if (n == 2) {
    const int m = static_cast<int>(std::floor(2.0 * std::numbers::pi / delta + 1e-9));
    Rng rng(seed, 0);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi / m);
    std::vector<Vec> pts;
    pts.reserve(m);
    for (int i = 0; i < m; ++i) {
      const double th = phase + 2.0 * std::numbers::pi * i / m;
      pts.push_back(Vec{std::cos(th), std::sin(th)});
    }
    return pts;
  }
  GreedyNet net(n, delta, NetMetric::geodesic);
  Rng rng(seed, 0);
  // Structured candidates: a grid on the faces of the cube, projected radially.
  const double h = opt.candidate_spacing * delta;
  const int per = std::max(1, static_cast<int>(std::ceil(2.0 / h)));
  const double faces = 2.0 * n * std::pow(per + 1.0, n - 1);
  if (faces <= 4e6) {
    std::vector<Vec> cand;
    cand.reserve(static_cast<std::size_t>(faces));
    for (int axis = 0; axis < n; ++axis)
      for (int sign = -1; sign <= 1; sign += 2) {
        std::vector<int> idx(n - 1, 0);
        for (;;) {
          Vec v(n);
          int k = 0;
          for (int i = 0; i < n; ++i) v[i] = i == axis ? sign : -1.0 + 2.0 * idx[k++] / per;
          cand.push_back(v / v.norm());
          int i = 0;
          for (; i < n - 1; ++i) {
            if (++idx[i] <= per) break;
            idx[i] = 0;
          }
          if (i == n - 1) break;
        }
      }
    shuffle_in_place(cand, rng);
    for (const Vec& c : cand) net.try_add(c);
  }
  const std::int64_t stall = opt.stall > 0 ? opt.stall : auto_stall(cap_fraction(n, delta));
  net.fill([n](Rng& r) { return random_direction(n, r); }, rng, stall, opt.max_points);
  if (n == 3) detail::repair_sphere2(net, delta);
  return net.points();
}

// Euclidean delta-net of a TranslateSet (limit set).
inline std::vector<Vec> translate_net(const TranslateSet& t, double delta, std::uint64_t seed, const NetOptions& opt = {}) {
  if (!(delta > 0.0 && delta < 0.5)) throw std::invalid_argument("translate_net: delta outside (0, 1/2)");
  const int n = t.ambient_dim();
  if (t.factors() == 0) return {Vec(n)};
  const TranslateSet deep(n, t.s(), 62 / t.factors());
  if (t.factors() == 1) {
    // Successor greedy on the line is exactly maximal.
    std::vector<Vec> pts;
    double x = cantor1d::successor(-0.5, t.ratio(), deep.depth());
    while (x < kInf) {
      Vec p(n);
      p[n - 1] = x;
      pts.push_back(p);
      x = cantor1d::successor(x + delta, t.ratio(), deep.depth());
    }
    return pts;
  }
  GreedyNet net(n, delta, NetMetric::euclidean);
  Rng rng(seed, 0);
  int k = 0;
  while (t.cantor().cell_side(k) > opt.candidate_spacing * 0.25 * delta && k < deep.depth()) ++k;
  if (t.cantor().cell_count(k) <= 4'000'000) {
    std::vector<Box> cells = t.cells(k);
    std::vector<Vec> cand;
    cand.reserve(cells.size());
    for (const Box& b : cells) cand.push_back(b.lo);
    shuffle_in_place(cand, rng);
    for (const Vec& c : cand) net.try_add(c);
  }
  // Branch-and-bound repair: find cells with an uncovered corner and add it.
  const double r = delta * (1.0 - 1e-12);
  auto judge = [&](const Box& b, bool leaf) {
    if (leaf) return net.index().any_closer(b.lo, r) ? TranslateSet::Verdict::reject : TranslateSet::Verdict::accept;
    const Vec c = b.center();
    const double h = b.half_diagonal();
    bool any = false, covered = false;
    net.index().visit_ball(c, delta + h, [&](std::size_t id) {
      any = true;
      if (dist(net.index().point(id), c) + h < r) {
        covered = true;
        return false;
      }
      return true;
    });
    if (!any) return TranslateSet::Verdict::accept;
    return covered ? TranslateSet::Verdict::reject : TranslateSet::Verdict::split;
  };
  // Coarse leaves first; finer passes catch slivers next to covered leaf corners.
  for (double leaf : {delta / 64.0, delta / 512.0, delta / 4096.0})
    while (net.size() < opt.max_points) {
      const auto hole = deep.search(judge, leaf);
      if (!hole || !net.try_add(hole->lo)) break;
    }
  return net.points();
}

// Euclidean delta-net of a box: a lattice, topped up randomly when the lattice is not maximal.
inline std::vector<Vec> box_net(const Box& box, double delta, std::uint64_t seed, const NetOptions& opt = {}) {
  if (!(delta > 0.0 && delta < 0.5)) throw std::invalid_argument("box_net: delta outside (0, 1/2)");
  const int n = box.dim();
  std::vector<int> counts(n);
  std::vector<double> step(n);
  double gap2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double len = box.hi[i] - box.lo[i];
    const int m = len <= 0.0 ? 0 : static_cast<int>(std::floor(len / delta + 1e-9));
    counts[i] = m + 1;
    step[i] = m > 0 ? len / m : 0.0;
    gap2 += 0.25 * step[i] * step[i];
  }
  GreedyNet net(n, delta, NetMetric::euclidean);
  std::vector<int> idx(n, 0);
  for (;;) {
    Vec p(n);
    for (int i = 0; i < n; ++i) p[i] = box.lo[i] + idx[i] * step[i];
    net.try_add(p);
    int i = 0;
    for (; i < n; ++i) {
      if (++idx[i] < counts[i]) break;
      idx[i] = 0;
    }
    if (i == n) break;
  }
  if (gap2 > delta * delta) {
    Rng rng(seed, 0);
    const double frac = unit_ball_volume(n) * std::pow(delta, n) / std::max(box.volume(), 1e-300);
    const std::int64_t stall = opt.stall > 0 ? opt.stall : auto_stall(frac);
    net.fill([&box](Rng& r) { return box.sample(r); }, rng, stall, opt.max_points);
  }
  return net.points();
}

inline double net_distance(const Vec& a, const Vec& b, NetMetric m) {
  const double c = dist(a, b);
  return m == NetMetric::geodesic ? 2.0 * std::asin(std::min(1.0, 0.5 * c)) : c;
}

// Number of pairs closer than delta (with a relative tolerance of 1e-9).
inline std::size_t separation_violations(const std::vector<Vec>& pts, double delta, NetMetric m) {
  if (pts.empty()) return 0;
  GridIndex index(pts.front().dim(), chord_threshold(delta, m));
  for (const Vec& p : pts) index.insert(p);
  std::size_t bad = 0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    index.visit_ball(pts[i], chord_threshold(delta, m), [&](std::size_t j) {
      if (j > i && net_distance(pts[i], pts[j], m) < delta * (1.0 - 1e-9)) ++bad;
    });
  return bad;
}

// Number of random domain points farther than delta from every net point.
template <class Sampler>
std::size_t coverage_violations(const std::vector<Vec>& pts, Sampler&& sample, std::int64_t probes, std::uint64_t seed,
                                double delta, NetMetric m) {
  if (pts.empty()) return static_cast<std::size_t>(probes);
  GridIndex index(pts.front().dim(), chord_threshold(delta, m));
  for (const Vec& p : pts) index.insert(p);
  const double r = chord_threshold(delta, m) * (1.0 + 1e-9);
  const std::int64_t blocks = (probes + kBlockSamples - 1) / kBlockSamples;
  std::vector<std::size_t> bad(static_cast<std::size_t>(blocks), 0);
  parallel_for(static_cast<std::size_t>(blocks), [&](std::size_t b) {
    Rng rng(seed, b);
    const std::int64_t count = std::min(kBlockSamples, probes - static_cast<std::int64_t>(b) * kBlockSamples);
    for (std::int64_t i = 0; i < count; ++i)
      if (index.count_in_ball(sample(rng), r) == 0) ++bad[b];
  });
  std::size_t total = 0;
  for (std::size_t v : bad) total += v;
  return total;
}

// ---------------------------------------------------------------------------
// Measures

/// Finite atomic measure on R^{n+1}.
struct DiscreteMeasure {
  std::vector<Vec> points;
  std::vector<double> weights;

  void add(const Vec& p, double w) {
    if (w < 0.0) throw std::invalid_argument("DiscreteMeasure: negative weight");
    points.push_back(p);
    weights.push_back(w);
  }
  std::size_t size() const { return points.size(); }
  double total_mass() const {
    double m = 0.0;
    for (double w : weights) m += w;
    return m;
  }
  double mass_in_ball(const Vec& c, double r) const {
    double m = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i)
      if ((points[i] - c).norm2() <= r * r * (1.0 + 1e-12)) m += weights[i];
    return m;
  }
};

// max nu(B_r)/r^alpha over balls centered at atoms (dyadic radii from min_radius to 2)
// and over ball_samples random balls with log-uniform radii.
inline double measure_class_ratio(const DiscreteMeasure& mu, double alpha, std::int64_t ball_samples, std::uint64_t seed,
                                  double min_radius = 1e-3) {
  if (mu.size() == 0) throw std::invalid_argument("measure_class_ratio: empty measure");
  const int d = mu.points.front().dim();
  if (!(alpha > 0.0) || alpha > d + 1e-12) throw std::invalid_argument("measure_class_ratio: alpha outside (0, n+1]");
  std::vector<double> radii;
  for (double r = min_radius; r <= 2.0 * (1.0 + 1e-12); r *= 2.0) radii.push_back(r);
  Vec lo = mu.points.front(), hi = lo;
  for (const Vec& p : mu.points)
    for (int i = 0; i < d; ++i) lo[i] = std::min(lo[i], p[i]), hi[i] = std::max(hi[i], p[i]);
  const Box bbox = Box(lo, hi).expanded(min_radius);
  const std::size_t atoms = mu.size();
  const std::size_t jobs = atoms + static_cast<std::size_t>(std::max<std::int64_t>(0, ball_samples));
  std::vector<double> best(jobs, 0.0);
  parallel_for(jobs, [&](std::size_t j) {
    if (j < atoms) {
      // One pass over the atoms, binned by the smallest radius that reaches them.
      std::vector<double> shell(radii.size(), 0.0);
      for (std::size_t i = 0; i < atoms; ++i) {
        const double dd = dist(mu.points[i], mu.points[j]) * (1.0 - 5e-13);
        const auto it = std::lower_bound(radii.begin(), radii.end(), dd);
        if (it != radii.end()) shell[it - radii.begin()] += mu.weights[i];
      }
      double mass = 0.0;
      for (std::size_t k = 0; k < radii.size(); ++k) {
        mass += shell[k];
        best[j] = std::max(best[j], mass / std::pow(radii[k], alpha));
      }
    } else {
      Rng rng(seed, j - atoms);
      const Vec c = bbox.sample(rng);
      const double r = min_radius * std::pow(2.0 / min_radius, rng.uniform());
      best[j] = mu.mass_in_ball(c, r) / std::pow(r, alpha);
    }
  });
  return *std::max_element(best.begin(), best.end());
}

// ---------------------------------------------------------------------------
// CSV dumps

inline void write_points_csv(std::ostream& out, const std::string& id, const std::vector<Vec>& pts) {
  const int d = pts.empty() ? 0 : pts.front().dim();
  std::vector<std::string> header{"id", "index"};
  for (int i = 0; i < d; ++i) header.push_back("x" + std::to_string(i + 1));
  CsvWriter w(out, header);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    out << id << ',' << k;
    for (int i = 0; i < d; ++i) out << ',' << format_double(pts[k][i]);
    out << '\n';
  }
}

inline void write_cells_csv(std::ostream& out, const std::string& id, const TranslateSet& t, int k) {
  const int d = t.ambient_dim();
  std::vector<std::string> header{"id", "index", "side"};
  for (int i = 0; i < d; ++i) header.push_back("lo" + std::to_string(i + 1));
  CsvWriter w(out, header);
  const double side = t.cantor().cell_side(k);
  const auto cells = t.cells(k);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    out << id << ',' << c << ',' << format_double(side);
    for (int i = 0; i < d; ++i) out << ',' << format_double(cells[c].lo[i]);
    out << '\n';
  }
}

}  // namespace nikodym
