#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nikodym/fractal.hpp"
#include "nikodym/geometry.hpp"
#include "nikodym/parallel.hpp"
#include "nikodym/random.hpp"

namespace nikodym {

enum class OpKind { NM, NS, NT, MT, ST };

inline const char* to_string(OpKind k) {
  switch (k) {
    case OpKind::NM: return "NM";
    case OpKind::NS: return "NS";
    case OpKind::NT: return "NT";
    case OpKind::MT: return "MT";
    case OpKind::ST: return "ST";
  }
  return "?";
}

inline OpKind parse_op_kind(std::string_view s) {
  for (OpKind k : {OpKind::NM, OpKind::NS, OpKind::NT, OpKind::MT, OpKind::ST})
    if (s == to_string(k)) return k;
  throw std::invalid_argument("unknown operator kind: " + std::string(s));
}

/// Indicator function of a region, with an optional cover of its support by boxes.
struct Indicator {
  PointPredicate member;
  std::vector<Box> support;  // empty: support not known
  double volume = -1.0;      // Lebesgue measure when known exactly

  static Indicator everywhere() { return {[](const Vec&) { return true; }, {}, kInf}; }
  bool bounded() const { return !support.empty(); }
};

struct OperatorSpec {
  OpKind kind = OpKind::NM;
  int n = 2;
  double delta = 0.01;
  double t_lo = 1.0, t_hi = 1.0;
  int max_level = 6;                        // ST dilations 2^l [1,2] with |l| <= max_level
  std::shared_ptr<const TranslateSet> T;    // null: the unit sphere

  static OperatorSpec nm(int n, double delta) { return make(OpKind::NM, n, delta, nullptr); }
  static OperatorSpec ns(int n, double delta) {
    OperatorSpec op = make(OpKind::NS, n, delta, nullptr);
    op.t_hi = 2.0;
    return op;
  }
  static OperatorSpec nt(std::shared_ptr<const TranslateSet> t, double delta) {
    const int n = t->ambient_dim();
    return make(OpKind::NT, n, delta, std::move(t));
  }
  static OperatorSpec mt(std::shared_ptr<const TranslateSet> t, double resolution) {
    const int n = t->ambient_dim();
    return make(OpKind::MT, n, resolution, std::move(t));
  }
  static OperatorSpec st(std::shared_ptr<const TranslateSet> t, double resolution, int max_level = 6) {
    const int n = t->ambient_dim();
    OperatorSpec op = make(OpKind::ST, n, resolution, std::move(t));
    op.max_level = max_level;
    return op;
  }

  bool thick() const { return kind == OpKind::NM || kind == OpKind::NS || kind == OpKind::NT; }

  void validate() const {
    if (n < 2 || n > kMaxDim) throw std::invalid_argument("OperatorSpec: dimension outside [2, 6]");
    if (!(delta > 0.0 && delta < 0.5)) throw std::invalid_argument("OperatorSpec: delta outside (0, 1/2)");
    if ((kind == OpKind::NM || kind == OpKind::NS) && T) throw std::invalid_argument("OperatorSpec: NM/NS use the unit sphere");
    if (T && T->ambient_dim() != n) throw std::invalid_argument("OperatorSpec: translate set dimension mismatch");
    if (!(t_lo > 0.0 && t_lo <= t_hi)) throw std::invalid_argument("OperatorSpec: bad dilation range");
    if (kind != OpKind::NS && kind != OpKind::ST && (t_lo != 1.0 || t_hi != 1.0))
      throw std::invalid_argument("OperatorSpec: only NS and ST dilate");
    if (kind == OpKind::ST && (max_level < 0 || max_level > 30)) throw std::invalid_argument("OperatorSpec: bad max_level");
  }

private:
  static OperatorSpec make(OpKind k, int n, double delta, std::shared_ptr<const TranslateSet> t) {
    OperatorSpec op;
    op.kind = k;
    op.n = n;
    op.delta = delta;
    op.T = std::move(t);
    op.validate();
    return op;
  }
};

enum class Sampling { automatic, shell, support };

struct EvalConfig {
  double u_net_scale = 0.01;
  double t_net_scale = 0.01;
  std::int64_t avg_samples = 256;
  std::uint64_t seed = 1;
  Sampling sampling = Sampling::automatic;

  static EvalConfig at_scale(double delta, std::int64_t avg = 256, std::uint64_t seed = 1) {
    return {delta, delta, avg, seed, Sampling::automatic};
  }

  void validate(const OperatorSpec& op) const {
    if (!(u_net_scale > 0.0) || u_net_scale > op.delta * (1.0 + 1e-12))
      throw std::invalid_argument("EvalConfig: u_net_scale must lie in (0, delta]");
    if (!(t_net_scale > 0.0) || t_net_scale > op.delta * (1.0 + 1e-12))
      throw std::invalid_argument("EvalConfig: t_net_scale must lie in (0, delta]");
    if (avg_samples < 1) throw std::invalid_argument("EvalConfig: avg_samples must be positive");
  }
};

struct Witness {
  Vec u;
  double t = 1.0;
  std::optional<int> level;
};

// ---------------------------------------------------------------------------
// Averages over one sphere or annulus

namespace detail {

inline bool in_earlier_box(const std::vector<Box>& boxes, std::size_t j, const Vec& y) {
  for (std::size_t k = 0; k < j; ++k)
    if (boxes[k].contains(y)) return true;
  return false;
}

// Normalized integral of value(y, rng) over {|y - c| in [r0, r1]} (thick) or over the sphere |y - c| = r.
template <class Value>
double shell_average(const Value& value, const std::vector<Box>& support, Sampling mode, const Vec& c, double r,
                     double halfwidth, std::int64_t samples, Rng& rng) {
  const int n = c.dim();
  const double r0 = std::max(0.0, r - halfwidth), r1 = r + halfwidth;
  const bool thick = halfwidth > 0.0;
  std::vector<std::size_t> hit;
  if (!support.empty()) {
    for (std::size_t j = 0; j < support.size(); ++j)
      if (box_meets_shell(support[j], c, r0, r1)) hit.push_back(j);
    if (hit.empty()) return 0.0;
  }
  bool use_boxes = !support.empty() && mode != Sampling::shell;
  std::vector<Cap> caps;
  if (use_boxes && mode == Sampling::automatic) {
    double cover = 0.0;
    if (thick) {
      for (std::size_t j : hit) cover += support[j].volume();
      use_boxes = cover < annulus_volume(n, r, halfwidth);
    } else {
      for (std::size_t j : hit) {
        caps.push_back(cap_toward_ball(Sphere(c, r), support[j].center(), support[j].half_diagonal()));
        cover += cap_fraction(n, caps.back().angle);
      }
      use_boxes = cover < 1.0;
    }
  }
  const double K = static_cast<double>(samples);
  if (!use_boxes) {
    double sum = 0.0;
    for (std::int64_t k = 0; k < samples; ++k) {
      const Vec y = thick ? c + uniform_in_shell(n, r0, r1, rng) : c + random_direction(n, rng) * r;
      sum += value(y, rng);
    }
    return sum / K;
  }
  double total = 0.0;
  if (thick) {
    for (std::size_t j : hit) {
      const Box& b = support[j];
      double sum = 0.0;
      for (std::int64_t k = 0; k < samples; ++k) {
        const Vec y = b.sample(rng);
        const double d = dist(y, c);
        if (d < r0 || d > r1 || in_earlier_box(support, j, y)) continue;
        sum += value(y, rng);
      }
      total += b.volume() * sum / K;
    }
    return total / annulus_volume(n, r, halfwidth);
  }
  if (caps.empty())
    for (std::size_t j : hit) caps.push_back(cap_toward_ball(Sphere(c, r), support[j].center(), support[j].half_diagonal()));
  for (std::size_t h = 0; h < hit.size(); ++h) {
    const std::size_t j = hit[h];
    const double frac = cap_fraction(n, caps[h].angle);
    if (frac <= 0.0) continue;
    double sum = 0.0;
    for (std::int64_t k = 0; k < samples; ++k) {
      const Vec y = c + sample_cap(caps[h].axis, caps[h].angle, rng) * r;
      if (!support[j].contains(y) || in_earlier_box(support, j, y)) continue;
      sum += value(y, rng);
    }
    total += frac * sum / K;
  }
  return total;
}

}  // namespace detail

/// Discretized maximal operator: suprema over a net of translations and a grid of dilations.
class MaximalOperator {
public:
  MaximalOperator(OperatorSpec op, EvalConfig cfg) : op_(std::move(op)), cfg_(cfg) {
    op_.validate();
    cfg_.validate(op_);
    t_grid_ = build_t_grid();
  }

  const OperatorSpec& spec() const { return op_; }
  const EvalConfig& config() const { return cfg_; }
  const std::vector<double>& t_grid() const { return t_grid_; }

  // Translation net, built on first use.
  const std::vector<Vec>& u_net() const {
    std::call_once(cache_->once, [this] {
      cache_->net = op_.T ? translate_net(*op_.T, cfg_.u_net_scale, cfg_.seed) : sphere_net(op_.n, cfg_.u_net_scale, cfg_.seed);
    });
    if (cache_->net.empty()) throw std::runtime_error("MaximalOperator: empty translation net");
    return cache_->net;
  }

  // Normalized average of f over the sphere (or annulus) of radius t centered at c.
  template <class Value>
  double average_value(const Value& value, const std::vector<Box>& support, const Vec& c, double t, Rng& rng) const {
    const double hw = op_.thick() ? t * op_.delta : 0.0;
    return detail::shell_average(value, support, cfg_.sampling, c, t, hw, cfg_.avg_samples, rng);
  }

  double average(const Indicator& f, const Vec& c, double t, Rng& rng) const {
    return average_value([&f](const Vec& y, Rng&) { return f.member(y) ? 1.0 : 0.0; }, f.support, c, t, rng);
  }

  template <class Value>
  std::pair<double, Witness> sup_value(const Value& value, const std::vector<Box>& support, const Vec& x,
                                       std::uint64_t stream) const {
    check_point(x);
    const auto& net = u_net();
    const std::uint64_t base = mix_seed(cfg_.seed, stream);
    double best = -1.0;
    Witness arg{net.front(), t_grid_.front(), std::nullopt};
    for (std::size_t ui = 0; ui < net.size(); ++ui)
      for (std::size_t ti = 0; ti < t_grid_.size(); ++ti) {
        const double t = t_grid_[ti];
        const Vec c = x + net[ui] * t;
        double v = 0.0;
        if (could_meet(support, c, t)) {
          Rng rng(base, ui * t_grid_.size() + ti);
          v = average_value(value, support, c, t, rng);
        }
        if (v > best) {
          best = v;
          arg = {net[ui], t, level_of(t)};
        }
      }
    return {best, arg};
  }

  std::pair<double, Witness> at_with_argmax(const Indicator& f, const Vec& x, std::uint64_t stream = 0) const {
    return sup_value([&f](const Vec& y, Rng&) { return f.member(y) ? 1.0 : 0.0; }, f.support, x, stream);
  }

  double at(const Indicator& f, const Vec& x, std::uint64_t stream = 0) const { return at_with_argmax(f, x, stream).first; }

  double with_witness(const Indicator& f, const Vec& x, const Witness& w, std::uint64_t stream = 0) const {
    check_point(x);
    check_witness(w);
    Rng rng(mix_seed(cfg_.seed, stream), ~0ULL);
    return average(f, x + w.u * w.t, w.t, rng);
  }

  void check_witness(const Witness& w) const {
    if (w.u.dim() != op_.n) throw std::invalid_argument("Witness: dimension mismatch");
    if (op_.T) {
      if (op_.T->distance(w.u) > 1e-9) throw std::invalid_argument("Witness: u outside the translate set");
    } else if (std::abs(w.u.norm() - 1.0) > 1e-9) {
      throw std::invalid_argument("Witness: u not on the unit sphere");
    }
    const auto [lo, hi] = t_bounds();
    if (!(w.t >= lo * (1 - 1e-12) && w.t <= hi * (1 + 1e-12))) throw std::invalid_argument("Witness: t outside range");
    if (w.level && op_.kind == OpKind::ST) {
      const double a = std::ldexp(1.0, *w.level);
      if (std::abs(*w.level) > op_.max_level || w.t < a * (1 - 1e-12) || w.t > 2 * a * (1 + 1e-12))
        throw std::invalid_argument("Witness: level inconsistent with t");
    }
  }

  std::pair<double, double> t_bounds() const {
    if (op_.kind == OpKind::ST) return {std::ldexp(1.0, -op_.max_level), std::ldexp(1.0, op_.max_level + 1)};
    return {op_.t_lo, op_.t_hi};
  }

private:
  std::vector<double> build_t_grid() const {
    const double h = cfg_.t_net_scale;
    std::vector<double> ts;
    if (op_.kind == OpKind::ST) {
      const int steps = static_cast<int>(std::ceil(1.0 / h - 1e-9));
      for (int l = -op_.max_level; l <= op_.max_level; ++l)
        for (int k = 0; k < steps; ++k) ts.push_back(std::ldexp(1.0 + static_cast<double>(k) / steps, l));
      ts.push_back(std::ldexp(1.0, op_.max_level + 1));
      return ts;
    }
    if (op_.t_hi == op_.t_lo) return {op_.t_lo};
    const int steps = static_cast<int>(std::ceil((op_.t_hi - op_.t_lo) / h - 1e-9));
    for (int k = 0; k <= steps; ++k) ts.push_back(op_.t_lo + (op_.t_hi - op_.t_lo) * k / steps);
    return ts;
  }

  std::optional<int> level_of(double t) const {
    if (op_.kind != OpKind::ST) return std::nullopt;
    return std::min(op_.max_level, static_cast<int>(std::floor(std::log2(t) + 1e-12)));
  }

  bool could_meet(const std::vector<Box>& support, const Vec& c, double t) const {
    if (support.empty()) return true;
    const double hw = op_.thick() ? t * op_.delta : 0.0;
    for (const Box& b : support)
      if (box_meets_shell(b, c, t - hw, t + hw)) return true;
    return false;
  }

  void check_point(const Vec& x) const {
    if (x.dim() != op_.n || !x.finite()) throw std::invalid_argument("MaximalOperator: bad evaluation point");
  }

  OperatorSpec op_;
  EvalConfig cfg_;
  std::vector<double> t_grid_;
  struct NetCache {
    std::once_flag once;
    std::vector<Vec> net;
  };
  std::shared_ptr<NetCache> cache_ = std::make_shared<NetCache>();
};

inline double eval_at(const OperatorSpec& op, const Indicator& f, const Vec& x, const EvalConfig& cfg) {
  return MaximalOperator(op, cfg).at(f, x);
}

inline double eval_with_witness(const OperatorSpec& op, const Indicator& f, const Vec& x, const Witness& w,
                                const EvalConfig& cfg) {
  return MaximalOperator(op, cfg).with_witness(f, x, w);
}

// ---------------------------------------------------------------------------
// L^p ratios

using WitnessMap = std::function<std::optional<Witness>(const Vec&)>;

struct LpOptions {
  std::int64_t x_samples = 20'000;
  std::int64_t norm_samples = 200'000;
  std::uint64_t seed = 1;
  bool unwitnessed_zero = false;  // with a witness map: points without a witness count as 0 instead of a full sup
};

/// Sampled values of op f at uniform points of `region`.
struct OperatorSample {
  std::vector<double> values;
  double region_volume = 0.0;
  double f_volume = 0.0;
  double f_volume_err = 0.0;
};

inline MCEstimate indicator_volume(const Indicator& f, std::int64_t samples, std::uint64_t seed) {
  if (f.volume >= 0.0) return {f.volume, 0.0, 0, seed};
  if (!f.bounded()) throw std::invalid_argument("indicator_volume: unbounded support");
  MCEstimate total{0.0, 0.0, 0, seed};
  double var = 0.0;
  for (std::size_t j = 0; j < f.support.size(); ++j) {
    const auto& boxes = f.support;
    const MCEstimate e = mc_volume(
        [&](const Vec& y) { return f.member(y) && !detail::in_earlier_box(boxes, j, y); }, boxes[j],
        std::max<std::int64_t>(samples, 1000), mix_seed(seed, j));
    total.value += e.value;
    total.samples += e.samples;
    var += e.std_err * e.std_err;
  }
  total.std_err = std::sqrt(var);
  return total;
}

inline OperatorSample sample_operator(const MaximalOperator& op, const Indicator& f, const Box& region,
                                      const LpOptions& opt, const WitnessMap* witness = nullptr) {
  const double vol = region.volume();
  if (!(vol > 0.0) || !std::isfinite(vol)) throw std::invalid_argument("sample_operator: unbounded or empty region");
  if (opt.x_samples < 1) throw std::invalid_argument("sample_operator: need x samples");
  OperatorSample out;
  out.region_volume = vol;
  const MCEstimate fv = indicator_volume(f, opt.norm_samples, mix_seed(opt.seed, 0x6e6f726d));
  out.f_volume = fv.value;
  out.f_volume_err = fv.std_err;
  out.values.assign(static_cast<std::size_t>(opt.x_samples), 0.0);
  const std::size_t blocks = static_cast<std::size_t>((opt.x_samples + kBlockSamples - 1) / kBlockSamples);
  parallel_for(blocks, [&](std::size_t b) {
    Rng rng(opt.seed, b);
    const std::size_t first = b * static_cast<std::size_t>(kBlockSamples);
    const std::size_t last = std::min(out.values.size(), first + static_cast<std::size_t>(kBlockSamples));
    for (std::size_t i = first; i < last; ++i) {
      const Vec x = region.sample(rng);
      const std::uint64_t stream = mix_seed(opt.seed, i, 1);
      std::optional<Witness> w;
      if (witness) w = (*witness)(x);
      if (w)
        out.values[i] = op.with_witness(f, x, *w, stream);
      else if (!witness || !opt.unwitnessed_zero)
        out.values[i] = op.at(f, x, stream);
    }
  });
  return out;
}

// ||op f||_{L^p(region)} / ||f||_p from a sample; p = inf uses the sample maximum.
inline MCEstimate lp_ratio_from(const OperatorSample& s, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("lp_ratio: p must be at least 1");
  if (!(s.f_volume > 0.0)) throw std::invalid_argument("lp_ratio: f has zero norm");
  MCEstimate est;
  est.samples = static_cast<std::int64_t>(s.values.size());
  if (std::isinf(p)) {
    for (double v : s.values) est.value = std::max(est.value, v);
    return est;
  }
  double sum = 0.0, sum2 = 0.0;
  for (double v : s.values) {
    const double w = std::pow(v, p);
    sum += w;
    sum2 += w * w;
  }
  const double N = static_cast<double>(s.values.size());
  const double mean = sum / N;
  const double var = N > 1 ? std::max(0.0, (sum2 - N * mean * mean) / (N - 1)) : 0.0;
  est.value = std::pow(s.region_volume * mean / s.f_volume, 1.0 / p);
  if (mean > 0.0) {
    const double rel = std::hypot(std::sqrt(var / N) / mean, s.f_volume_err / s.f_volume);
    est.std_err = est.value * rel / p;
  }
  return est;
}

inline MCEstimate lp_ratio(const OperatorSpec& op, const Indicator& f, double p, const EvalConfig& cfg, const Box& region,
                           const LpOptions& opt, const WitnessMap* witness = nullptr) {
  if (!(p >= 1.0)) throw std::invalid_argument("lp_ratio: p must be at least 1");
  return lp_ratio_from(sample_operator(MaximalOperator(op, cfg), f, region, opt, witness), p);
}

// ---------------------------------------------------------------------------
// Thin versus zero-thickness averages

struct MollifiedComparison {
  double lhs = 0.0;  // N_T^delta f(x)
  double rhs = 0.0;  // M_T(|f| * phi_delta)(x)
};

// phi_delta is the normalized indicator of the ball of radius 2 delta.
inline MollifiedComparison mollified_compare(std::shared_ptr<const TranslateSet> t, const Indicator& f, const Vec& x,
                                             double delta, const EvalConfig& cfg, std::int64_t inner_samples = 64) {
  const MaximalOperator thin(OperatorSpec::nt(t, delta), cfg);
  const MaximalOperator flat(OperatorSpec::mt(t, delta), cfg);
  MollifiedComparison out;
  out.lhs = thin.at(f, x);
  const int n = x.dim();
  const double r = 2.0 * delta;
  auto smooth = [&](const Vec& y, Rng& rng) {
    std::int64_t hits = 0;
    for (std::int64_t k = 0; k < inner_samples; ++k)
      if (f.member(y + uniform_in_ball(n, r, rng))) ++hits;
    return static_cast<double>(hits) / static_cast<double>(inner_samples);
  };
  std::vector<Box> grown;
  for (const Box& b : f.support) grown.push_back(b.expanded(r));
  out.rhs = flat.sup_value(smooth, grown, x, 1).first;
  return out;
}

}  // namespace nikodym
