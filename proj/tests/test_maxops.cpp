#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "nikodym/exponents.hpp"
#include "nikodym/maxops.hpp"

using namespace nikodym;

namespace {

Indicator ball(const Vec& c, double r) {
  return {[c, r](const Vec& y) { return dist(y, c) <= r; }, {Box::around(c, r)},
          unit_ball_volume(c.dim()) * std::pow(r, c.dim())};
}

// Area of B(0, r) ∩ B(c, R) with |c| = d, by the two-chord formula.
double lens_area(double r, double R, double d) {
  if (d >= r + R) return 0.0;
  if (d <= std::abs(R - r)) return std::numbers::pi * std::pow(std::min(r, R), 2);
  const double a = std::acos((d * d + r * r - R * R) / (2 * d * r));
  const double b = std::acos((d * d + R * R - r * r) / (2 * d * R));
  return r * r * (a - std::sin(2 * a) / 2) + R * R * (b - std::sin(2 * b) / 2);
}

std::shared_ptr<const TranslateSet> point_set(int n) { return std::make_shared<TranslateSet>(n, 0.0); }

}  // namespace

TEST(EvalAt, ConstantFunctionAveragesToOne) {
  const auto one = Indicator::everywhere();
  const Vec x2{0.3, -0.2}, x3{0.1, 0.2, 0.3};
  EXPECT_DOUBLE_EQ(eval_at(OperatorSpec::nm(2, 0.1), one, x2, EvalConfig::at_scale(0.1, 64)), 1.0);
  EXPECT_DOUBLE_EQ(eval_at(OperatorSpec::ns(2, 0.2), one, x2, EvalConfig::at_scale(0.2, 16)), 1.0);
  EXPECT_DOUBLE_EQ(eval_at(OperatorSpec::nm(3, 0.2), one, x3, EvalConfig::at_scale(0.2, 16)), 1.0);
  auto cantor = std::make_shared<TranslateSet>(3, 0.5, 12);
  EXPECT_DOUBLE_EQ(eval_at(OperatorSpec::nt(cantor, 0.1), one, x3, EvalConfig::at_scale(0.1, 16)), 1.0);
  EXPECT_DOUBLE_EQ(eval_at(OperatorSpec::mt(cantor, 0.1), one, x3, EvalConfig::at_scale(0.1, 16)), 1.0);
  EXPECT_DOUBLE_EQ(eval_at(OperatorSpec::st(point_set(2), 0.25, 2), one, x2, EvalConfig::at_scale(0.25, 16)), 1.0);
}

TEST(EvalAt, SmallBallOnWitnessedCircle) {
  const double delta = 0.01;
  const auto f = ball(Vec{0, 0}, delta);
  const Vec x{1, 0};
  const auto op = OperatorSpec::nm(2, delta);
  const auto cfg = EvalConfig::at_scale(delta, 4096, 3);
  // The witnessed circle passes through the ball's center: the ball sits inside the annulus.
  const double exact = (lens_area(delta, 1 + delta, 1) - lens_area(delta, 1 - delta, 1)) / annulus_volume(2, 1, delta);
  EXPECT_NEAR(exact, delta / 4, 1e-12);
  const Witness w{Vec{-0.5, std::sqrt(3.0) / 2}, 1.0, std::nullopt};
  const double wv = eval_with_witness(op, f, x, w, cfg);
  EXPECT_NEAR(wv, exact, 0.05 * exact);
  const double sup = eval_at(op, f, x, cfg);
  EXPECT_GE(sup, 0.1 * delta);
  EXPECT_GE(sup, wv * 0.9);
  EXPECT_EQ(eval_with_witness(op, f, x, {Vec{0.5, -std::sqrt(3.0) / 2}, 1.0, std::nullopt}, cfg), 0.0);
}

TEST(EvalAt, OffCenterWitnessMatchesLensOracle) {
  // Circle at distance 1 + delta/2 from the ball's center: partial overlap.
  const double delta = 0.02;
  const auto f = ball(Vec{0, 0}, delta);
  const double d = 1 + delta / 2;
  const Vec x{d, 0};
  const Witness w{Vec{-1, 0}, 1.0, std::nullopt};
  const double exact =
      (lens_area(delta, 1 + delta, d - 1) - lens_area(delta, 1 - delta, d - 1)) / annulus_volume(2, 1, delta);
  const double v = eval_with_witness(OperatorSpec::nm(2, delta), f, x, w, EvalConfig::at_scale(delta, 1 << 16, 5));
  EXPECT_NEAR(v, exact, 0.03 * exact);
}

TEST(EvalAt, RadialSymmetryGivesFlatSupremum) {
  const double delta = 0.1;
  const auto op = OperatorSpec::nm(2, delta);
  const Vec x{0, 0};
  const Witness w{Vec{1, 0}, 1.0, std::nullopt};
  const auto big = ball(x, 3.0);
  const auto cfg = EvalConfig::at_scale(delta, 512, 2);
  EXPECT_DOUBLE_EQ(eval_at(op, big, x, cfg), eval_with_witness(op, big, x, w, cfg));

  auto shell_cfg = EvalConfig::at_scale(delta, 20000, 2);
  shell_cfg.sampling = Sampling::shell;
  const auto mid = ball(x, 1.5);
  const double sup = eval_at(op, mid, x, shell_cfg);
  const double at_w = eval_with_witness(op, mid, x, w, shell_cfg);
  const double sigma = std::sqrt(at_w * (1 - at_w) / 20000);
  EXPECT_NEAR(sup, at_w, 6 * sigma);
}

TEST(EvalAt, MonotoneInTheSet) {
  const double delta = 0.05;
  auto cfg = EvalConfig::at_scale(delta, 256, 9);
  cfg.sampling = Sampling::shell;
  Rng rng(1, 1);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec c{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const double r = rng.uniform(0.05, 0.4);
    const Indicator small = ball(c, r), large = ball(c, r * 1.5);
    const Vec x{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    for (const auto& op : {OperatorSpec::nm(2, delta), OperatorSpec::ns(2, delta)})
      EXPECT_LE(MaximalOperator(op, cfg).at(small, x), MaximalOperator(op, cfg).at(large, x));
  }
}

TEST(EvalAt, TranslationCovariance) {
  const double delta = 0.05;
  const auto op = MaximalOperator(OperatorSpec::nm(2, delta), EvalConfig::at_scale(delta, 256, 4));
  const Vec v{0.375, -0.25};
  const Vec c{0.1, 0.2}, x{0.9, 0.4};
  const double a = op.at(ball(c, 0.3), x);
  const double b = op.at(ball(c + v, 0.3), x + v);
  EXPECT_NEAR(a, b, 1e-12);
  EXPECT_GT(a, 0.0);
}

TEST(EvalAt, WitnessNeverExceedsSupremum) {
  const double delta = 0.05;
  const MaximalOperator op(OperatorSpec::nm(2, delta), EvalConfig::at_scale(delta, 4096, 6));
  Rng rng(7, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = ball(Vec{rng.uniform(-1, 1), rng.uniform(-1, 1)}, rng.uniform(0.05, 0.3));
    const Vec x{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const Witness w{random_direction(2, rng), 1.0, std::nullopt};
    const double sup = op.at(f, x);
    const double wv = op.with_witness(f, x, w);
    // Net slack plus sampling noise of two independent estimates.
    EXPECT_LE(wv, sup + 0.05 + 4 * std::sqrt(0.25 / 4096)) << trial;
  }
}

TEST(EvalAt, FixedRadiusDilationReducesToUnitSpheres) {
  const double delta = 0.05;
  auto ns = OperatorSpec::ns(2, delta);
  ns.t_hi = 1.0;
  const auto cfg = EvalConfig::at_scale(delta, 256, 8);
  const MaximalOperator a(OperatorSpec::nm(2, delta), cfg), b(ns, cfg);
  Rng rng(2, 2);
  for (int trial = 0; trial < 10; ++trial) {
    const auto f = ball(Vec{rng.uniform(-1, 1), rng.uniform(-1, 1)}, rng.uniform(0.05, 0.5));
    const Vec x{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    EXPECT_EQ(a.at(f, x), b.at(f, x));
  }
}

TEST(EvalAt, ZeroThicknessAveragesMatchArcLength) {
  // Unit circle through the center of a small ball: arc fraction 4 asin(r/2) / 2 pi.
  const double r = 0.05;
  const auto f = ball(Vec{0, 0}, r);
  const auto op = OperatorSpec::mt(point_set(2), 0.05);
  const double v = MaximalOperator(op, EvalConfig::at_scale(0.05, 1 << 15, 3)).at(f, Vec{1, 0});
  const double exact = 4 * std::asin(r / 2) / (2 * std::numbers::pi);
  EXPECT_NEAR(v, exact, 0.03 * exact);
}

TEST(EvalAt, Preconditions) {
  EXPECT_THROW(OperatorSpec::nm(2, 0.6), std::invalid_argument);
  EXPECT_THROW(MaximalOperator(OperatorSpec::nm(2, 0.1), EvalConfig::at_scale(0.2)), std::invalid_argument);
  const MaximalOperator op(OperatorSpec::nm(2, 0.1), EvalConfig::at_scale(0.1));
  EXPECT_THROW(op.with_witness(Indicator::everywhere(), Vec{0, 0}, {Vec{2, 0}, 1, std::nullopt}), std::invalid_argument);
  const MaximalOperator ns(OperatorSpec::ns(2, 0.1), EvalConfig::at_scale(0.1));
  EXPECT_THROW(ns.with_witness(Indicator::everywhere(), Vec{0, 0}, {Vec{1, 0}, 2.5, std::nullopt}), std::invalid_argument);
}

TEST(LpRatio, ConstantsContract) {
  const double delta = 0.1;
  const Indicator big{[](const Vec& y) { return std::abs(y[0]) <= 5 && std::abs(y[1]) <= 5; },
                      {Box(Vec{-5, -5}, Vec{5, 5})}, 100.0};
  LpOptions opt;
  opt.x_samples = 200;
  const auto est = lp_ratio(OperatorSpec::nm(2, delta), big, 2.0, EvalConfig::at_scale(delta, 32),
                            Box(Vec{-3, -3}, Vec{3, 3}), opt);
  EXPECT_NEAR(est.value, std::sqrt(36.0 / 100.0), 1e-12);
  EXPECT_THROW(lp_ratio(OperatorSpec::nm(2, delta), big, 0.5, EvalConfig::at_scale(delta), Box(Vec{-3, -3}, Vec{3, 3}), opt),
               std::invalid_argument);
}

TEST(LpRatio, SmallBallScalingAtPEqualsOne) {
  // Witness: the unit circle through the ball's center and the point x.
  const WitnessMap witness = [](const Vec& x) -> std::optional<Witness> {
    const double d = x.norm();
    if (d > 2.0 || d < 1e-9) return std::nullopt;
    const Vec e = x / d, perp{-e[1], e[0]};
    const Vec z = e * (d / 2) + perp * std::sqrt(std::max(0.0, 1 - d * d / 4));
    return Witness{(z - x) / (z - x).norm(), 1.0, std::nullopt};
  };
  std::vector<std::pair<double, double>> pts;
  for (int k = 4; k <= 7; ++k) {
    const double delta = std::ldexp(1.0, -k);
    LpOptions opt;
    opt.x_samples = 8000;
    opt.seed = 11;
    opt.unwitnessed_zero = true;
    const auto est = lp_ratio(OperatorSpec::nm(2, delta), ball(Vec{0, 0}, delta), 1.0, EvalConfig::at_scale(delta, 128),
                              Box(Vec{-2.1, -2.1}, Vec{2.1, 2.1}), opt, &witness);
    pts.emplace_back(delta, est.value);
  }
  EXPECT_NEAR(loglog_fit(pts).slope, -1.0, 0.15);
}

TEST(LpRatio, RandomBallUnionsGrowSlowlyAtPEqualsTwo) {
  std::vector<std::pair<double, double>> pts;
  for (int k = 4; k <= 6; ++k) {
    const double delta = std::ldexp(1.0, -k);
    Rng rng(5, 0);
    std::vector<Vec> centers;
    for (int i = 0; i < 8; ++i) centers.push_back(Vec{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)});
    Indicator f;
    f.member = [centers, delta](const Vec& y) {
      for (const Vec& c : centers)
        if (dist(y, c) <= delta) return true;
      return false;
    };
    for (const Vec& c : centers) f.support.push_back(Box::around(c, delta));
    LpOptions opt;
    opt.x_samples = 800;
    opt.norm_samples = 20000;
    opt.seed = 3;
    const auto est = lp_ratio(OperatorSpec::nm(2, delta), f, 2.0, EvalConfig::at_scale(delta, 32),
                              Box(Vec{-1.6, -1.6}, Vec{1.6, 1.6}), opt);
    pts.emplace_back(delta, est.value);
  }
  EXPECT_GE(loglog_fit(pts).slope, -0.1);
}

TEST(LpRatio, DeterministicAcrossThreadCounts) {
  const double delta = 0.1;
  LpOptions opt;
  opt.x_samples = 5000;
  opt.seed = 21;
  const auto f = ball(Vec{0.2, 0.1}, 0.05);
  const MaximalOperator op(OperatorSpec::nm(2, delta), EvalConfig::at_scale(delta, 16));
  set_threads(1);
  const auto a = sample_operator(op, f, Box(Vec{-2, -2}, Vec{2, 2}), opt);
  set_threads(4);
  const auto b = sample_operator(op, f, Box(Vec{-2, -2}, Vec{2, 2}), opt);
  set_threads(1);
  EXPECT_EQ(a.values, b.values);
}

TEST(MollifiedCompare, ConstantsAndDisjointSupports) {
  const double delta = 0.05;
  const auto cfg = EvalConfig::at_scale(delta, 64);
  auto res = mollified_compare(point_set(2), Indicator::everywhere(), Vec{1, 0}, delta, cfg, 8);
  EXPECT_DOUBLE_EQ(res.lhs, 1.0);
  EXPECT_DOUBLE_EQ(res.rhs, 1.0);
  res = mollified_compare(point_set(2), ball(Vec{10, 10}, delta), Vec{1, 0}, delta, cfg, 8);
  EXPECT_EQ(res.lhs, 0.0);
  EXPECT_EQ(res.rhs, 0.0);
}

TEST(MollifiedCompare, SmallBallWithinFactorEight) {
  const double delta = 0.01;
  const auto f = ball(Vec{0, 0}, delta);
  const auto cfg = EvalConfig::at_scale(delta, 4096, 2);
  const auto res = mollified_compare(point_set(2), f, Vec{1, 0}, delta, cfg, 256);
  // lhs: the ball lies inside the annulus about 0; rhs: arc within 3 delta of 0, weighted by ball overlap.
  EXPECT_NEAR(res.lhs, delta / 4, 0.05 * delta / 4);
  ASSERT_GT(res.rhs, 0.0);
  EXPECT_LE(res.lhs / res.rhs, 8.0);
  EXPECT_GE(res.lhs / res.rhs, 1.0 / 8.0);
}
