#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "nikodym/parallel.hpp"
#include "nikodym/random.hpp"
#include "nikodym/vec.hpp"

namespace nikodym {

/// Raised when an operation is called outside its stated validity range.
class PreconditionError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

using PointPredicate = std::function<bool(const Vec&)>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Sphere {
  Vec center;
  double radius = 1.0;

  Sphere() = default;
  Sphere(Vec c, double r) : center(c), radius(r) {
    if (!(r > 0.0) || !std::isfinite(r)) throw std::invalid_argument("Sphere: radius must be positive");
    if (!c.finite()) throw std::invalid_argument("Sphere: non-finite center");
  }
  int dim() const { return center.dim(); }
};

inline bool in_shell(const Vec& x, const Vec& center, double radius, double halfwidth) {
  return std::abs(dist(x, center) - radius) <= halfwidth;
}

inline double annulus_volume(int n, double radius, double halfwidth) {
  return shell_volume(n, std::max(0.0, radius - halfwidth), radius + halfwidth);
}

/// The closed delta-neighborhood of a sphere.
struct Annulus {
  Sphere sphere;
  double delta;

  Annulus(Sphere s, double d) : sphere(s), delta(d) {
    if (!(d > 0.0 && d < 0.5)) throw std::invalid_argument("Annulus: delta must lie in (0, 1/2)");
  }
  bool contains(const Vec& x) const { return in_shell(x, sphere.center, sphere.radius, delta); }
  double volume() const { return annulus_volume(sphere.dim(), sphere.radius, delta); }
};

struct Box {
  Vec lo, hi;

  Box() = default;
  Box(Vec l, Vec h) : lo(l), hi(h) {
    if (l.dim() != h.dim()) throw std::invalid_argument("Box: dimension mismatch");
  }
  static Box around(const Vec& c, double r) {
    Vec l = c, h = c;
    for (int i = 0; i < c.dim(); ++i) {
      l[i] -= r;
      h[i] += r;
    }
    return {l, h};
  }
  int dim() const { return lo.dim(); }
  double volume() const {
    double v = 1.0;
    for (int i = 0; i < dim(); ++i) v *= std::max(0.0, hi[i] - lo[i]);
    return v;
  }
  bool contains(const Vec& x) const {
    for (int i = 0; i < dim(); ++i)
      if (x[i] < lo[i] || x[i] > hi[i]) return false;
    return true;
  }
  Vec center() const { return (lo + hi) * 0.5; }
  double half_diagonal() const { return (hi - lo).norm() * 0.5; }
  Vec sample(Rng& rng) const {
    Vec x(dim());
    for (int i = 0; i < dim(); ++i) x[i] = rng.uniform(lo[i], hi[i]);
    return x;
  }
  Box expanded(double r) const {
    Box b = *this;
    for (int i = 0; i < dim(); ++i) {
      b.lo[i] -= r;
      b.hi[i] += r;
    }
    return b;
  }
};

inline double min_distance(const Box& b, const Vec& c) {
  double s = 0.0;
  for (int i = 0; i < b.dim(); ++i) {
    const double d = std::max({b.lo[i] - c[i], 0.0, c[i] - b.hi[i]});
    s += d * d;
  }
  return std::sqrt(s);
}

inline double max_distance(const Box& b, const Vec& c) {
  double s = 0.0;
  for (int i = 0; i < b.dim(); ++i) {
    const double d = std::max(std::abs(c[i] - b.lo[i]), std::abs(c[i] - b.hi[i]));
    s += d * d;
  }
  return std::sqrt(s);
}

// Whether the box meets {r0 <= |x - c| <= r1}.
inline bool box_meets_shell(const Box& b, const Vec& c, double r0, double r1) {
  return min_distance(b, c) <= r1 && max_distance(b, c) >= r0;
}

// ---------------------------------------------------------------------------
// Configuration quantities

struct PairGeometry {
  double d = 0.0;
  double Delta = 0.0;
};

inline PairGeometry pair_quantities(const Sphere& s1, const Sphere& s2) {
  if (s1.dim() != s2.dim()) throw std::invalid_argument("pair_quantities: dimension mismatch");
  const double ab = dist(s1.center, s2.center);
  const double rs = std::abs(s1.radius - s2.radius);
  PairGeometry g;
  g.d = ab + rs;
  g.Delta = std::abs(ab - rs) * std::abs(s1.radius + s2.radius - ab);
  return g;
}

struct TripleGeometry {
  double M = 0.0;
  double m = 0.0;
  double R = kInf;
};

inline TripleGeometry triple_quantities(const Vec& a, const Vec& b, const Vec& c) {
  if (a.dim() != b.dim() || a.dim() != c.dim()) throw std::invalid_argument("triple_quantities: dimension mismatch");
  const double ab = dist(a, b), bc = dist(b, c), ca = dist(c, a);
  if (ab == 0.0 || bc == 0.0 || ca == 0.0) throw std::invalid_argument("triple_quantities: coincident centers");
  TripleGeometry g;
  g.M = std::max({ab, bc, ca});
  g.m = std::min({ab, bc, ca});
  const Vec u = b - a, v = c - a;
  const double gram = u.norm2() * v.norm2() - dot(u, v) * dot(u, v);
  const double area = 0.5 * std::sqrt(std::max(0.0, gram));
  // Relative-area guard against cancellation for nearly collinear centers.
  if (area < 1e-12 * g.M * g.M) {
    g.R = kInf;
  } else {
    g.R = ab * bc * ca / (4.0 * area);
  }
  return g;
}

inline TripleGeometry triple_quantities(const Sphere& s1, const Sphere& s2, const Sphere& s3) {
  return triple_quantities(s1.center, s2.center, s3.center);
}

// ---------------------------------------------------------------------------
// Analytic majorants for annulus intersections

inline void check_band_radius(double r, const char* who) {
  if (r < 0.5 || r > 2.0) throw PreconditionError(std::string(who) + ": radius outside [1/2, 2]");
}

inline void check_delta(double delta, const char* who) {
  if (!(delta > 0.0 && delta < 0.5)) throw PreconditionError(std::string(who) + ": delta outside (0, 1/2)");
}

// delta^2/(d+delta) * ((Delta+delta)/(d+delta))^{(n-3)/2}
inline double two_annuli_bound(const Sphere& s1, const Sphere& s2, double delta, int n) {
  if (s1.dim() != n || s2.dim() != n) throw std::invalid_argument("two_annuli_bound: dimension mismatch");
  check_band_radius(s1.radius, "two_annuli_bound");
  check_band_radius(s2.radius, "two_annuli_bound");
  check_delta(delta, "two_annuli_bound");
  const PairGeometry g = pair_quantities(s1, s2);
  const double base = delta * delta / (g.d + delta);
  return base * std::pow((g.Delta + delta) / (g.d + delta), 0.5 * (n - 3));
}

struct GeometryConstants {
  double c_diam = 0.1;
  double c1 = 10.0;
  double c2 = 0.05;
};

enum class ThreeCase { empty, near_one, transverse };

inline const char* to_string(ThreeCase c) {
  switch (c) {
    case ThreeCase::empty: return "empty";
    case ThreeCase::near_one: return "near_one";
    case ThreeCase::transverse: return "transverse";
  }
  return "?";
}

struct ThreeAnnuliBound {
  ThreeCase kase = ThreeCase::empty;
  double value = 0.0;
};

// Case split on the circumradius, without the separation precondition.
inline ThreeAnnuliBound three_annuli_bound_from(const TripleGeometry& g, double delta, int n) {
  if (g.R >= 2.0) return {ThreeCase::empty, 0.0};
  const double transverse = delta * delta * delta / (g.M * g.M * g.m);
  const double near_one = std::pow(delta, 2.5) / (std::pow(g.M, 1.5) * std::sqrt(g.m));
  if (g.R <= 0.5) return {ThreeCase::transverse, transverse};
  if (n >= 4) {
    // Both estimates hold here; report the smaller one.
    return transverse <= near_one ? ThreeAnnuliBound{ThreeCase::transverse, transverse}
                                  : ThreeAnnuliBound{ThreeCase::near_one, near_one};
  }
  return {ThreeCase::near_one, near_one};
}

inline ThreeAnnuliBound three_annuli_bound(const Sphere& s1, const Sphere& s2, const Sphere& s3, double delta, int n,
                                           const GeometryConstants& k = {}) {
  for (const Sphere* s : {&s1, &s2, &s3}) {
    if (s->dim() != n) throw std::invalid_argument("three_annuli_bound: dimension mismatch");
    if (std::abs(s->radius - 1.0) > 1e-12) throw PreconditionError("three_annuli_bound: radii must be 1");
  }
  check_delta(delta, "three_annuli_bound");
  const TripleGeometry g = triple_quantities(s1, s2, s3);
  if (g.m < k.c1 * std::sqrt(delta) || g.M > k.c2)
    throw PreconditionError("three_annuli_bound: separation outside [c1 sqrt(delta), c2]");
  return three_annuli_bound_from(g, delta, n);
}

// ---------------------------------------------------------------------------
// Monte Carlo oracles

inline MCEstimate mc_volume(const PointPredicate& member, const Box& box, std::int64_t samples, std::uint64_t seed) {
  if (samples < 1000) throw std::invalid_argument("mc_volume: need at least 1000 samples");
  const double vol = box.volume();
  if (!(vol > 0.0) || !std::isfinite(vol)) throw std::invalid_argument("mc_volume: degenerate box");
  MCEstimate est = mc_mean([&](Rng& rng) { return member(box.sample(rng)) ? 1.0 : 0.0; }, samples, seed);
  est.value *= vol;
  est.std_err *= vol;
  return est;
}

// Fraction of S^{n-1} lying within geodesic angle `angle` of a point.
inline double cap_fraction(int n, double angle) {
  if (angle <= 0.0) return 0.0;
  if (angle >= std::numbers::pi) return 1.0;
  if (n == 2) return angle / std::numbers::pi;
  const double a = 0.5 * (n - 1);
  if (angle <= 0.5 * std::numbers::pi) {
    const double s = std::sin(angle);
    return 0.5 * boost::math::ibeta(a, 0.5, s * s);
  }
  const double s = std::sin(std::numbers::pi - angle);
  return 1.0 - 0.5 * boost::math::ibeta(a, 0.5, s * s);
}

// Uniform direction within the cap of half-angle `angle` around the unit vector `axis`.
inline Vec sample_cap(const Vec& axis, double angle, Rng& rng) {
  const int n = axis.dim();
  if (angle >= std::numbers::pi) return random_direction(n, rng);
  double theta = 0.0;
  if (n == 2) {
    theta = rng.uniform(0.0, angle);
  } else {
    const double smax = angle >= 0.5 * std::numbers::pi ? 1.0 : std::sin(angle);
    for (;;) {
      theta = rng.uniform(0.0, angle);
      if (rng.uniform() < std::pow(std::sin(theta) / smax, n - 2)) break;
    }
  }
  Vec w(n);
  for (;;) {
    for (int i = 0; i < n; ++i) w[i] = rng.normal();
    w -= axis * dot(w, axis);
    const double r = w.norm();
    if (r > 1e-12) {
      w /= r;
      break;
    }
  }
  return axis * std::cos(theta) + w * std::sin(theta);
}

/// Spherical cap of a sphere: directions within `angle` of `axis`.
struct Cap {
  Vec axis;
  double angle = std::numbers::pi;
};

// Smallest cap of `s` containing s ∩ B(ball_center, ball_radius).
inline Cap cap_toward_ball(const Sphere& s, const Vec& ball_center, double ball_radius) {
  const Vec off = ball_center - s.center;
  const double D = off.norm();
  if (D < 1e-12) return {Vec::unit(s.dim(), 0), std::numbers::pi};
  const double c = (s.radius * s.radius + D * D - ball_radius * ball_radius) / (2.0 * s.radius * D);
  if (c <= -1.0) return {off / D, std::numbers::pi};
  if (c >= 1.0) return {off / D, 0.0};
  return {off / D, std::acos(c)};
}

inline MCEstimate sphere_surface_measure(const PointPredicate& E, const Sphere& s, std::int64_t samples,
                                         std::uint64_t seed, const Cap* cap = nullptr) {
  const int n = s.dim();
  const double full = sphere_area(n) * std::pow(s.radius, n - 1);
  const double frac = cap ? cap_fraction(n, cap->angle) : 1.0;
  if (frac <= 0.0) return {0.0, 0.0, samples, seed};
  MCEstimate est = mc_mean(
      [&](Rng& rng) {
        const Vec dir = cap ? sample_cap(cap->axis, cap->angle, rng) : random_direction(n, rng);
        return E(s.center + dir * s.radius) ? 1.0 : 0.0;
      },
      samples, seed);
  est.value *= full * frac;
  est.std_err *= full * frac;
  return est;
}

// ---------------------------------------------------------------------------
// Intersection volumes of several annuli

// Orthonormal basis whose leading vectors span `span` (Gram-Schmidt, then completed
// from the standard basis).
inline std::vector<Vec> orthonormal_completion(const std::vector<Vec>& span, int n) {
  std::vector<Vec> basis;
  auto push = [&](Vec v) {
    for (const Vec& b : basis) v -= b * dot(v, b);
    const double r = v.norm();
    if (r > 1e-9) basis.push_back(v / r);
  };
  for (const Vec& v : span) push(v);
  for (int i = 0; i < n && static_cast<int>(basis.size()) < n; ++i) push(Vec::unit(n, i));
  return basis;
}

/// Importance sampler for the intersection of annuli around `spheres` with common
/// half-width `delta`. Each draw returns weight * indicator, an unbiased volume estimate.
class IntersectionSampler {
public:
  IntersectionSampler(std::vector<Sphere> spheres, double delta) : spheres_(std::move(spheres)), delta_(delta) {
    if (spheres_.empty()) throw std::invalid_argument("IntersectionSampler: no spheres");
    n_ = spheres_[0].dim();
    for (const Sphere& s : spheres_)
      if (s.dim() != n_) throw std::invalid_argument("IntersectionSampler: dimension mismatch");
    choose_mode();
  }

  double operator()(Rng& rng) const {
    switch (mode_) {
      case Mode::single: return draw_single(rng);
      case Mode::pair: return draw_pair(rng);
      case Mode::triple: return draw_triple(rng);
      case Mode::empty: return 0.0;
    }
    return 0.0;
  }

  bool member(const Vec& x) const {
    for (const Sphere& s : spheres_)
      if (!in_shell(x, s.center, s.radius, delta_)) return false;
    return true;
  }

private:
  enum class Mode { single, pair, triple, empty };

  void choose_mode() {
    const std::size_t k = spheres_.size();
    if (k >= 3 && n_ >= 2) {
      double best = 0.0;
      std::size_t bi = 0, bj = 1, bk = 2;
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j)
          for (std::size_t l = j + 1; l < k; ++l) {
            const Vec u = spheres_[j].center - spheres_[i].center;
            const Vec v = spheres_[l].center - spheres_[i].center;
            const double gram = u.norm2() * v.norm2() - dot(u, v) * dot(u, v);
            const double q = std::sqrt(std::max(0.0, gram));
            if (q > best) {
              best = q;
              bi = i, bj = j, bk = l;
            }
          }
      const double scale = max_center_distance();
      if (best > 1e-9 * scale * scale && best > 1e-24) {
        setup_triple(bi, bj, bk);
        return;
      }
    }
    if (k >= 2) {
      double best = -1.0;
      std::size_t bi = 0, bj = 1;
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j) {
          const double d = dist(spheres_[i].center, spheres_[j].center);
          if (d > best) best = d, bi = i, bj = j;
        }
      if (best > 1e-12) {
        setup_pair(bi, bj);
        return;
      }
    }
    mode_ = Mode::single;
  }

  double max_center_distance() const {
    double m = 0.0;
    for (std::size_t i = 0; i < spheres_.size(); ++i)
      for (std::size_t j = i + 1; j < spheres_.size(); ++j) m = std::max(m, dist(spheres_[i].center, spheres_[j].center));
    return m;
  }

  double draw_single(Rng& rng) const {
    const Sphere& s = spheres_[0];
    const Vec x = s.center + uniform_in_shell(n_, std::max(0.0, s.radius - delta_), s.radius + delta_, rng);
    return member(x) ? annulus_volume(n_, s.radius, delta_) : 0.0;
  }

  // Slab along the axis of two centers times a shell in the orthogonal complement.
  void setup_pair(std::size_t i, std::size_t j) {
    mode_ = Mode::pair;
    first_ = spheres_[i];
    const Sphere& b = spheres_[j];
    const Vec axis = b.center - first_.center;
    const double D = axis.norm();
    frame_ = orthonormal_completion({axis}, n_);
    const double r = first_.radius, s = b.radius, d = delta_;
    const double lo = (r - d) * (r - d) - (s + d) * (s + d);
    const double hi = (r + d) * (r + d) - std::max(0.0, s - d) * std::max(0.0, s - d);
    t0_ = std::max((lo + D * D) / (2.0 * D), -(r + d));
    t1_ = std::min((hi + D * D) / (2.0 * D), r + d);
    if (t1_ <= t0_) mode_ = Mode::empty;
  }

  double draw_pair(Rng& rng) const {
    const double r = first_.radius, d = delta_;
    const double t = rng.uniform(t0_, t1_);
    const double hi2 = (r + d) * (r + d) - t * t;
    if (hi2 <= 0.0) return 0.0;
    const double lo2 = std::max(0.0, (r - d) * (r - d) - t * t);
    const double rho0 = std::sqrt(lo2), rho1 = std::sqrt(hi2);
    const Vec y = uniform_in_shell(n_ - 1, rho0, rho1, rng);
    Vec x = first_.center + frame_[0] * t;
    for (int k = 0; k < n_ - 1; ++k) x += frame_[k + 1] * y[k];
    if (!member(x)) return 0.0;
    return (t1_ - t0_) * shell_volume(n_ - 1, rho0, rho1);
  }

  // Two strips in the plane of three centers times a shell in the orthogonal complement.
  void setup_triple(std::size_t i, std::size_t j, std::size_t k) {
    mode_ = Mode::triple;
    first_ = spheres_[i];
    const Sphere& s2 = spheres_[j];
    const Sphere& s3 = spheres_[k];
    const Vec u = s2.center - first_.center, v = s3.center - first_.center;
    frame_ = orthonormal_completion({u, v}, n_);
    const double c2x = dot(u, frame_[0]), c2y = dot(u, frame_[1]);
    const double c3x = dot(v, frame_[0]), c3y = dot(v, frame_[1]);
    det_ = c2x * c3y - c2y * c3x;
    inv_ = {c3y / det_, -c2y / det_, -c3x / det_, c2x / det_};
    const double r1 = first_.radius, d = delta_;
    auto strip = [&](double ci2, double ri, double& lo, double& hi) {
      const double dlo = (ri - d) * (ri - d) - (r1 + d) * (r1 + d);
      const double dhi = (ri + d) * (ri + d) - std::max(0.0, r1 - d) * std::max(0.0, r1 - d);
      lo = 0.5 * (ci2 - dhi);
      hi = 0.5 * (ci2 - dlo);
    };
    strip(c2x * c2x + c2y * c2y, s2.radius, s2lo_, s2hi_);
    strip(c3x * c3x + c3y * c3y, s3.radius, s3lo_, s3hi_);
    area_ = (s2hi_ - s2lo_) * (s3hi_ - s3lo_) / std::abs(det_);
  }

  double draw_triple(Rng& rng) const {
    const double sa = rng.uniform(s2lo_, s2hi_), sb = rng.uniform(s3lo_, s3hi_);
    const double px = inv_[0] * sa + inv_[1] * sb;
    const double py = inv_[2] * sa + inv_[3] * sb;
    const double p2 = px * px + py * py;
    const double r1 = first_.radius, d = delta_;
    const double hi2 = (r1 + d) * (r1 + d) - p2;
    if (hi2 < 0.0) return 0.0;
    const double lo2 = std::max(0.0, (r1 - d) * (r1 - d) - p2);
    Vec x = first_.center + frame_[0] * px + frame_[1] * py;
    double weight = area_;
    if (n_ > 2) {
      const double rho0 = std::sqrt(lo2), rho1 = std::sqrt(hi2);
      const Vec y = uniform_in_shell(n_ - 2, rho0, rho1, rng);
      for (int k = 0; k < n_ - 2; ++k) x += frame_[k + 2] * y[k];
      weight *= shell_volume(n_ - 2, rho0, rho1);
    }
    return member(x) ? weight : 0.0;
  }

  std::vector<Sphere> spheres_;
  double delta_;
  int n_ = 0;
  Mode mode_ = Mode::single;
  Sphere first_;
  std::vector<Vec> frame_;
  double t0_ = 0.0, t1_ = 0.0;
  double det_ = 0.0, area_ = 0.0;
  std::array<double, 4> inv_{};
  double s2lo_ = 0.0, s2hi_ = 0.0, s3lo_ = 0.0, s3hi_ = 0.0;
};

inline MCEstimate mc_intersection_volume(const std::vector<Sphere>& spheres, double delta, std::int64_t samples,
                                         std::uint64_t seed) {
  const IntersectionSampler sampler(spheres, delta);
  return mc_mean([&](Rng& rng) { return sampler(rng); }, samples, seed);
}

}  // namespace nikodym
