#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "nikodym/geometry.hpp"

using namespace nikodym;

namespace {

// Midpoint-rule area of a planar region on a fine grid.
double grid_area(const PointPredicate& in, const Box& box, double h) {
  double area = 0.0;
  for (double x = box.lo[0] + 0.5 * h; x < box.hi[0]; x += h)
    for (double y = box.lo[1] + 0.5 * h; y < box.hi[1]; y += h)
      if (in(Vec{x, y})) area += h * h;
  return area;
}

}  // namespace

TEST(PairQuantities, TableValues) {
  auto g = pair_quantities(Sphere(Vec{0, 0}, 1), Sphere(Vec{1, 0}, 1));
  EXPECT_DOUBLE_EQ(g.d, 1.0);
  EXPECT_DOUBLE_EQ(g.Delta, 1.0);
  g = pair_quantities(Sphere(Vec{0, 0}, 1), Sphere(Vec{0, 0}, 1));
  EXPECT_EQ(g.d, 0.0);
  EXPECT_EQ(g.Delta, 0.0);
  g = pair_quantities(Sphere(Vec{0, 0}, 2), Sphere(Vec{1, 0}, 1));
  EXPECT_DOUBLE_EQ(g.d, 2.0);
  EXPECT_EQ(g.Delta, 0.0);
}

TEST(PairQuantities, DimensionMismatchThrows) {
  EXPECT_THROW(pair_quantities(Sphere(Vec{0, 0}, 1), Sphere(Vec{0, 0, 0}, 1)), std::invalid_argument);
}

TEST(PairQuantities, SymmetricUnderSwap) {
  Rng rng(11, 0);
  for (int i = 0; i < 200; ++i) {
    const int n = 2 + static_cast<int>(rng.below(3));
    Vec a(n), b(n);
    for (int k = 0; k < n; ++k) a[k] = rng.uniform(-1, 1), b[k] = rng.uniform(-1, 1);
    const Sphere s1(a, rng.uniform(0.5, 2)), s2(b, rng.uniform(0.5, 2));
    const auto g1 = pair_quantities(s1, s2), g2 = pair_quantities(s2, s1);
    EXPECT_EQ(g1.d, g2.d);
    EXPECT_EQ(g1.Delta, g2.Delta);
    EXPECT_GE(g1.Delta, 0.0);
  }
}

TEST(TripleQuantities, ClassicalTriangles) {
  auto g = triple_quantities(Vec{0, 0}, Vec{1, 0}, Vec{0.5, std::sqrt(3.0) / 2});
  EXPECT_NEAR(g.M, 1.0, 1e-12);
  EXPECT_NEAR(g.m, 1.0, 1e-12);
  EXPECT_NEAR(g.R, 1.0 / std::sqrt(3.0), 1e-12);
  g = triple_quantities(Vec{0, 0}, Vec{1, 0}, Vec{2, 0});
  EXPECT_DOUBLE_EQ(g.M, 2.0);
  EXPECT_DOUBLE_EQ(g.m, 1.0);
  EXPECT_TRUE(std::isinf(g.R));
  g = triple_quantities(Vec{0, 0}, Vec{3, 0}, Vec{0, 4});
  EXPECT_DOUBLE_EQ(g.M, 5.0);
  EXPECT_DOUBLE_EQ(g.m, 3.0);
  EXPECT_NEAR(g.R, 2.5, 1e-12);
  EXPECT_THROW(triple_quantities(Vec{0, 0}, Vec{0, 0}, Vec{1, 0}), std::invalid_argument);
}

TEST(TripleQuantities, CircumradiusAtLeastHalfDiameter) {
  Rng rng(12, 0);
  for (int i = 0; i < 500; ++i) {
    Vec a(3), b(3), c(3);
    for (int k = 0; k < 3; ++k) a[k] = rng.uniform(-1, 1), b[k] = rng.uniform(-1, 1), c[k] = rng.uniform(-1, 1);
    const auto g = triple_quantities(a, b, c);
    EXPECT_LE(g.m, g.M);
    EXPECT_GE(g.R, 0.5 * g.M * (1 - 1e-12));
  }
}

TEST(TwoAnnuliBound, FormulaValues) {
  const double b = two_annuli_bound(Sphere(Vec{0, 0, 0}, 1), Sphere(Vec{0.5, 0, 0}, 1), 0.01, 3);
  EXPECT_NEAR(b, 1e-4 / 0.51, 1e-15);
  EXPECT_NEAR(two_annuli_bound(Sphere(Vec{0, 0}, 1), Sphere(Vec{0, 0}, 1), 0.02, 2), 0.02, 1e-15);
  EXPECT_THROW(two_annuli_bound(Sphere(Vec{0, 0}, 3), Sphere(Vec{0, 0}, 1), 0.02, 2), PreconditionError);
  EXPECT_THROW(two_annuli_bound(Sphere(Vec{0, 0}, 1), Sphere(Vec{0, 0}, 1), 0.6, 2), PreconditionError);
}

TEST(TwoAnnuliBound, NonincreasingInSeparation) {
  for (int n = 3; n <= 5; ++n) {
    double prev = kInf;
    for (double d = 0.01; d <= 1.0; d += 0.01) {
      const double b = two_annuli_bound(Sphere(Vec::zeros(n), 1), Sphere(Vec::unit(n, 0) * d, 1), 0.01, n);
      EXPECT_LE(b, prev * (1 + 1e-12));
      prev = b;
    }
  }
}

TEST(ThreeAnnuliBound, CaseValues) {
  TripleGeometry near{0.3, 0.3, 1.0};
  auto r = three_annuli_bound_from(near, 1e-4, 3);
  EXPECT_EQ(r.kase, ThreeCase::near_one);
  EXPECT_NEAR(r.value, std::pow(1e-4, 2.5) / (std::pow(0.3, 1.5) * std::sqrt(0.3)), 1e-22);
  EXPECT_NEAR(r.value, 1.111e-9, 1e-12);
  TripleGeometry small{0.3, 0.3, 0.3};
  r = three_annuli_bound_from(small, 1e-4, 3);
  EXPECT_EQ(r.kase, ThreeCase::transverse);
  EXPECT_NEAR(r.value, 1e-12 / 0.027, 1e-20);
  TripleGeometry wide{0.3, 0.3, 2.5};
  EXPECT_EQ(three_annuli_bound_from(wide, 1e-4, 3).kase, ThreeCase::empty);
  r = three_annuli_bound_from(near, 1e-4, 4);
  EXPECT_NEAR(r.value, std::min(1e-12 / 0.027, 1.111e-9), 1e-12);
}

TEST(ThreeAnnuliBound, SeparationPreconditionEnforced) {
  const double delta = 1e-6;
  auto on_circle = [](double th) { return Sphere(Vec{std::cos(th), std::sin(th), 0}, 1); };
  EXPECT_NO_THROW(three_annuli_bound(on_circle(0), on_circle(0.02), on_circle(0.04), delta, 3));
  EXPECT_THROW(three_annuli_bound(on_circle(0), on_circle(0.2), on_circle(0.4), delta, 3), PreconditionError);
  EXPECT_THROW(three_annuli_bound(on_circle(0), on_circle(0.001), on_circle(0.04), delta, 3), PreconditionError);
}

TEST(McVolume, KnownAreas) {
  const auto disk = mc_volume([](const Vec& x) { return x.norm2() <= 1.0; }, Box(Vec{-1, -1}, Vec{1, 1}), 1'000'000, 1);
  EXPECT_NEAR(disk.value, std::numbers::pi, 5 * disk.std_err);
  const auto ring = mc_volume([](const Vec& x) { return std::abs(x.norm() - 1.0) <= 0.05; },
                              Box(Vec{-1.05, -1.05}, Vec{1.05, 1.05}), 1'000'000, 2);
  EXPECT_NEAR(ring.value, 0.2 * std::numbers::pi, 5 * ring.std_err);
}

TEST(McVolume, BitwiseDeterministicAcrossThreadCounts) {
  auto pred = [](const Vec& x) { return x.norm2() <= 0.7; };
  const Box box(Vec{-1, -1, -1}, Vec{1, 1, 1});
  set_threads(1);
  const auto a = mc_volume(pred, box, 200'000, 9);
  set_threads(4);
  const auto b = mc_volume(pred, box, 200'000, 9);
  set_threads(1);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.std_err, b.std_err);
  EXPECT_THROW(mc_volume(pred, box, 10, 9), std::invalid_argument);
}

TEST(SurfaceMeasure, KnownMeasures) {
  const auto full = sphere_surface_measure([](const Vec&) { return true; }, Sphere(Vec::zeros(3), 1), 100'000, 3);
  EXPECT_NEAR(full.value, 4 * std::numbers::pi, 1e-12);
  const auto half = sphere_surface_measure([](const Vec& x) { return x[0] > 0; }, Sphere(Vec::zeros(2), 1), 200'000, 4);
  EXPECT_NEAR(half.value, std::numbers::pi, 5 * half.std_err);
}

TEST(SurfaceMeasure, ArcInsideSmallBallMatchesChordGeometry) {
  const double delta = 0.01;
  const Sphere circle(Vec{1, 0}, 1);  // passes through the origin
  const double exact = 4.0 * std::asin(delta / 2.0);
  auto inside = [&](const Vec& x) { return x.norm() <= delta; };
  const Cap cap = cap_toward_ball(circle, Vec{0, 0}, delta);
  const auto est = sphere_surface_measure(inside, circle, 100'000, 5, &cap);
  EXPECT_NEAR(est.value, exact, 0.02 * exact);
  EXPECT_GT(est.value, delta);
  EXPECT_LT(est.value, 4 * delta);
}

TEST(CapSampling, FractionMatchesUniformSampling) {
  for (int n : {2, 3, 4}) {
    const Vec axis = Vec::unit(n, 0);
    for (double angle : {0.3, 1.2, 2.5}) {
      Rng rng(n, 17);
      int hits = 0;
      const int N = 100'000;
      for (int i = 0; i < N; ++i)
        if (dot(random_direction(n, rng), axis) >= std::cos(angle)) ++hits;
      const double f = static_cast<double>(hits) / N;
      EXPECT_NEAR(cap_fraction(n, angle), f, 5 * std::sqrt(f * (1 - f) / N) + 1e-4) << n << " " << angle;
      Rng rng2(n, 18);
      for (int i = 0; i < 1000; ++i) EXPECT_GE(dot(sample_cap(axis, angle, rng2), axis), std::cos(angle) - 1e-12);
    }
  }
}

TEST(IntersectionVolume, PairMatchesGridQuadrature) {
  const double delta = 0.01;
  const Sphere a(Vec{0, 0}, 1), b(Vec{0.5, 0}, 1);
  auto both = [&](const Vec& x) { return in_shell(x, a.center, a.radius, delta) && in_shell(x, b.center, b.radius, delta); };
  // The two lens patches sit near x1 = 0.25, |x2| ~ 0.97.
  const double upper = grid_area(both, Box(Vec{0.15, 0.9}, Vec{0.35, 1.01}), 2.5e-4);
  const double lower = grid_area(both, Box(Vec{0.15, -1.01}, Vec{0.35, -0.9}), 2.5e-4);
  const auto est = mc_intersection_volume({a, b}, delta, 400'000, 6);
  EXPECT_NEAR(est.value, upper + lower, 0.02 * (upper + lower) + 5 * est.std_err);
}

TEST(IntersectionVolume, TripleMatchesBoxSampling) {
  const double delta = 0.02;
  const std::vector<Sphere> s{Sphere(Vec{0, 0, 0}, 1), Sphere(Vec{0.3, 0, 0}, 1), Sphere(Vec{0.1, 0.25, 0}, 1)};
  const auto imp = mc_intersection_volume(s, delta, 400'000, 7);
  auto member = [&](const Vec& x) {
    for (const Sphere& t : s)
      if (!in_shell(x, t.center, t.radius, delta)) return false;
    return true;
  };
  const auto box = mc_volume(member, Box(Vec{-1.1, -1.1, -1.1}, Vec{1.4, 1.4, 1.1}), 4'000'000, 8);
  EXPECT_NEAR(imp.value, box.value, 5 * std::hypot(imp.std_err, box.std_err));
}

TEST(IntersectionVolume, WideTripleIsEmpty) {
  // Centers with circumradius 2.5: no common point of the three annuli.
  const double delta = 1e-3;
  std::vector<Sphere> s;
  for (double th : {0.0, 0.08, 0.16}) s.emplace_back(Vec{2.5 * std::cos(th), 2.5 * std::sin(th), 0}, 1);
  EXPECT_GE(triple_quantities(s[0], s[1], s[2]).R, 2.0);
  const auto est = mc_intersection_volume(s, delta, 200'000, 10);
  EXPECT_EQ(est.value, 0.0);
}

TEST(IntersectionVolume, PairBoundedByAnalyticMajorant) {
  const double delta = 0.01;
  // The volume constant grows with the area of the (n-2)-sphere.
  const double constant[] = {0, 0, 50, 50, 100};
  for (int n : {2, 3, 4}) {
    Rng rng(20, n);
    for (int i = 0; i < 15; ++i) {
      const double d = rng.uniform(delta, 0.5);
      const Sphere a(Vec::zeros(n), 1), b(random_direction(n, rng) * d, 1);
      const auto est = mc_intersection_volume({a, b}, delta, 40'000, 30 + i);
      EXPECT_LE(est.value, constant[n] * two_annuli_bound(a, b, delta, n)) << "n=" << n << " d=" << d;
    }
  }
}
