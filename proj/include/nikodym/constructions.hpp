#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nikodym/exponents.hpp"
#include "nikodym/fractal.hpp"
#include "nikodym/geometry.hpp"
#include "nikodym/maxops.hpp"
#include "nikodym/parallel.hpp"
#include "nikodym/random.hpp"

namespace nikodym {

// ---------------------------------------------------------------------------
// Product sets

/// One block of a product set, living in `dim` consecutive coordinates.
struct Factor {
  enum class Kind { zeros, interval, shell, sphere };
  Kind kind = Kind::zeros;
  int dim = 0;
  double a = 0.0, b = 0.0;  // interval [a, b]; shell a <= |y| <= b; sphere radius a

  static Factor zeros(int k) { return {Kind::zeros, k, 0.0, 0.0}; }
  static Factor interval(double lo, double hi) { return {Kind::interval, 1, lo, hi}; }
  static Factor ball(int k, double r) { return {Kind::shell, k, 0.0, r}; }
  static Factor shell(int k, double r0, double r1) { return {Kind::shell, k, r0, r1}; }
  static Factor sphere(int k, double r) { return {Kind::sphere, k, r, r}; }

  double distance(const Vec& y) const {
    switch (kind) {
      case Kind::zeros: return y.norm();
      case Kind::interval: return y[0] < a ? a - y[0] : (y[0] > b ? y[0] - b : 0.0);
      case Kind::shell: {
        const double r = y.norm();
        return r < a ? a - r : (r > b ? r - b : 0.0);
      }
      case Kind::sphere: return std::abs(y.norm() - a);
    }
    return kInf;
  }

  double farthest(const Vec& y) const {
    switch (kind) {
      case Kind::zeros: return y.norm();
      case Kind::interval: return std::max(std::abs(y[0] - a), std::abs(y[0] - b));
      case Kind::shell:
      case Kind::sphere: return y.norm() + b;
    }
    return kInf;
  }

  // Half-extent of the bounding box (interval: use lo/hi directly).
  std::pair<double, double> bounds() const {
    switch (kind) {
      case Kind::zeros: return {0.0, 0.0};
      case Kind::interval: return {a, b};
      case Kind::shell:
      case Kind::sphere: return {-b, b};
    }
    return {0.0, 0.0};
  }

  Vec sample(Rng& rng) const {
    switch (kind) {
      case Kind::zeros: return Vec(dim);
      case Kind::interval: return Vec{rng.uniform(a, b)};
      case Kind::shell: return uniform_in_shell(dim, a, b, rng);
      case Kind::sphere: return random_direction(dim, rng) * a;
    }
    return Vec(dim);
  }

  bool connected() const { return kind != Kind::sphere || dim >= 2; }

  std::string describe() const {
    const auto num = [](double v) {
      std::string s = std::to_string(v);
      s.erase(s.find_last_not_of('0') + 1);
      if (!s.empty() && s.back() == '.') s.pop_back();
      return s;
    };
    switch (kind) {
      case Kind::zeros: return "{0}^" + std::to_string(dim);
      case Kind::interval: return "[" + num(a) + "," + num(b) + "]";
      case Kind::shell:
        if (a == 0.0) return "B(" + num(b) + ")^" + std::to_string(dim);
        return "A(" + num(a) + "," + num(b) + ")^" + std::to_string(dim);
      case Kind::sphere: return num(a) + "S^" + std::to_string(dim - 1);
    }
    return "?";
  }
};

/// Cartesian product of factors in consecutive coordinate blocks.
class ProductSet {
public:
  ProductSet() = default;
  ProductSet(std::initializer_list<Factor> fs) {
    for (const Factor& f : fs) push(f);
  }

  void push(const Factor& f) {
    if (f.dim < 0) throw std::invalid_argument("ProductSet: negative factor dimension");
    if (f.dim == 0) return;
    offsets_.push_back(dim_);
    factors_.push_back(f);
    dim_ += f.dim;
  }

  int dim() const { return dim_; }
  const std::vector<Factor>& factors() const { return factors_; }
  int offset(std::size_t i) const { return offsets_[i]; }
  Vec part(const Vec& y, std::size_t i) const { return y.slice(offsets_[i], factors_[i].dim); }

  double distance(const Vec& y) const {
    double d2 = 0.0;
    for (std::size_t i = 0; i < factors_.size(); ++i) {
      const double d = factors_[i].distance(part(y, i));
      d2 += d * d;
    }
    return std::sqrt(d2);
  }

  double farthest(const Vec& y) const {
    double d2 = 0.0;
    for (std::size_t i = 0; i < factors_.size(); ++i) {
      const double d = factors_[i].farthest(part(y, i));
      d2 += d * d;
    }
    return std::sqrt(d2);
  }

  Box bounds() const {
    Vec lo(dim_), hi(dim_);
    for (std::size_t i = 0; i < factors_.size(); ++i) {
      const auto [l, h] = factors_[i].bounds();
      for (int k = 0; k < factors_[i].dim; ++k) {
        lo[offsets_[i] + k] = l;
        hi[offsets_[i] + k] = h;
      }
    }
    return {lo, hi};
  }

  // Boxes covering the set; a 0-sphere factor contributes its two points separately.
  std::vector<Box> boxes() const {
    std::vector<Box> out{bounds()};
    for (std::size_t i = 0; i < factors_.size(); ++i) {
      const Factor& f = factors_[i];
      if (f.kind != Factor::Kind::sphere || f.dim != 1) continue;
      std::vector<Box> next;
      for (const Box& b : out)
        for (double v : {-f.a, f.a}) {
          Box c = b;
          c.lo[offsets_[i]] = c.hi[offsets_[i]] = v;
          next.push_back(c);
        }
      out = std::move(next);
    }
    return out;
  }

  Vec sample(Rng& rng) const {
    Vec y(dim_);
    for (std::size_t i = 0; i < factors_.size(); ++i) y.set_slice(offsets_[i], factors_[i].sample(rng));
    return y;
  }

  // A point z of the set with |x - z| as close to `target` as the set allows.
  // Requires connected factors; distances from x range over [distance(x), farthest(x)].
  Vec point_at_distance(const Vec& x, double target) const {
    std::vector<double> lo2(factors_.size()), hi2(factors_.size());
    double sum_lo = 0.0, sum_hi = 0.0;
    for (std::size_t i = 0; i < factors_.size(); ++i) {
      if (!factors_[i].connected()) throw std::invalid_argument("point_at_distance: disconnected factor");
      const Vec xi = part(x, i);
      const double dl = factors_[i].distance(xi), dh = factors_[i].farthest(xi);
      lo2[i] = dl * dl;
      hi2[i] = dh * dh;
      sum_lo += lo2[i];
      sum_hi += hi2[i];
    }
    const double t2 = std::clamp(target * target, sum_lo, sum_hi);
    const double lambda = sum_hi > sum_lo ? (t2 - sum_lo) / (sum_hi - sum_lo) : 0.0;
    Vec z(dim_);
    for (std::size_t i = 0; i < factors_.size(); ++i) {
      const double rho = std::sqrt(std::max(0.0, lo2[i] + lambda * (hi2[i] - lo2[i])));
      z.set_slice(offsets_[i], factor_point(factors_[i], part(x, i), rho));
    }
    return z;
  }

  std::string describe() const {
    if (factors_.empty()) return "{}";
    std::string s;
    for (std::size_t i = 0; i < factors_.size(); ++i) s += (i ? " x " : "") + factors_[i].describe();
    return s;
  }

private:
  static Vec factor_point(const Factor& f, const Vec& x, double rho) {
    switch (f.kind) {
      case Factor::Kind::zeros: return Vec(f.dim);
      case Factor::Kind::interval: {
        const double up = x[0] + rho, down = x[0] - rho;
        if (up >= f.a - 1e-15 && up <= f.b + 1e-15) return Vec{std::clamp(up, f.a, f.b)};
        if (down >= f.a - 1e-15 && down <= f.b + 1e-15) return Vec{std::clamp(down, f.a, f.b)};
        return Vec{std::abs(up - f.a) < std::abs(down - f.b) ? f.a : f.b};
      }
      case Factor::Kind::sphere: return sphere_point(f.dim, f.a, x, rho);
      case Factor::Kind::shell: {
        // Move outward along the ray through x, then around the outer sphere.
        const double r = x.norm();
        const Vec e = r > 1e-12 ? x / r : Vec::unit(f.dim, 0);
        const double near = std::clamp(r, f.a, f.b);
        if (rho <= std::abs(f.b - r) && r <= f.b) return e * std::clamp(r + rho, near, f.b);
        if (rho <= r - near + 1e-15) return e * near;
        return sphere_point(f.dim, f.b, x, rho);
      }
    }
    return Vec(f.dim);
  }

  // Point of a S^{k-1} at distance rho from x.
  static Vec sphere_point(int k, double a, const Vec& x, double rho) {
    const double r = x.norm();
    if (k == 1) return Vec{std::abs(x[0] - a) <= std::abs(x[0] + a) ? a : -a};
    if (r < 1e-12) return Vec::unit(k, 0) * a;
    const Vec e = x / r;
    int axis = 0;
    for (int i = 1; i < k; ++i)
      if (std::abs(e[i]) < std::abs(e[axis])) axis = i;
    Vec perp = Vec::unit(k, axis) - e * e[axis];
    perp /= perp.norm();
    const double c = std::clamp((r * r + a * a - rho * rho) / (2.0 * a * r), -1.0, 1.0);
    return (e * c + perp * std::sqrt(std::max(0.0, 1.0 - c * c))) * a;
  }

  std::vector<Factor> factors_;
  std::vector<int> offsets_;
  int dim_ = 0;
};

// ---------------------------------------------------------------------------
// Catalog

enum class Table { NM, NS, MT, ST };

inline const char* to_string(Table t) {
  switch (t) {
    case Table::NM: return "NM";
    case Table::NS: return "NS";
    case Table::MT: return "MT";
    case Table::ST: return "ST";
  }
  return "?";
}

inline Table parse_table(std::string_view s) {
  for (Table t : {Table::NM, Table::NS, Table::MT, Table::ST})
    if (s == to_string(t)) return t;
  throw std::invalid_argument("unknown table: " + std::string(s));
}

enum class RadiusRule { unit, first_coord, lenz_first, norm_head, lenz_head };

inline const char* to_string(RadiusRule r) {
  switch (r) {
    case RadiusRule::unit: return "1";
    case RadiusRule::first_coord: return "z1";
    case RadiusRule::lenz_first: return "sqrt(z1^2+1/2)";
    case RadiusRule::norm_head: return "|z_I|";
    case RadiusRule::lenz_head: return "sqrt(|z_I|^2+1/2)";
  }
  return "?";
}

enum class RowId { nm_sphere, nm_ball, nm_tube, nm_shell, nm_lenz, ns_tube, ns_lenz, mt_ball, mt_tube, mt_lenz, mt_shell, st_tube, st_lenz };

/// One lower-bound example: a test set E, a set of centers Z, and the measure exponents.
struct ExampleRow {
  RowId id;
  Table table;
  std::string name;
  int n_min = 2, n_max = 5;
  bool uses_s = false;
  RadiusRule radius = RadiusRule::unit;
  std::string E_spec, Z_spec;

  std::string key() const { return std::string(to_string(table)) + "/" + name; }

  // s range at dimension n (empty when lo > hi).
  std::pair<double, double> s_range(int n) const {
    switch (id) {
      case RowId::mt_ball: return {0.0, n - 1.0};
      case RowId::mt_tube: return {1.0, n - 1.0};
      case RowId::mt_lenz: return {2.0, n - 1.0};
      case RowId::mt_shell: return {n - 2.0, n - 1.0};
      case RowId::st_tube: return {0.0, std::min(2.0, n - 1.0)};
      case RowId::st_lenz: return {2.0, n - 1.0};
      default: return {0.0, 0.0};
    }
  }

  bool valid(int n, double s) const {
    if (n < n_min || n > n_max) return false;
    if (!uses_s) return true;
    const auto [lo, hi] = s_range(n);
    return s >= lo - 1e-12 && s <= hi + 1e-12;
  }

  double alpha(int n, double s) const {
    const double c = ceil_s(s);
    switch (id) {
      case RowId::nm_sphere: return 1.0;
      case RowId::nm_ball: return 2.0;
      case RowId::nm_tube: return 2.5;
      case RowId::nm_shell: return 1.5;
      case RowId::nm_lenz: return 3.0;
      case RowId::ns_tube: return 1.5;
      case RowId::ns_lenz: return 2.0;
      case RowId::mt_ball: return n;
      case RowId::mt_tube: return n - 0.5;
      case RowId::mt_lenz: return n - c + 2.0;
      case RowId::mt_shell: return 1.5;
      case RowId::st_tube: return n - c / 2.0;
      case RowId::st_lenz: return n - c + 1.0;
    }
    return 0.0;
  }

  double beta(int n, double s) const {
    const double c = ceil_s(s);
    switch (id) {
      case RowId::nm_sphere: return 1.0;
      case RowId::nm_shell: return 0.5;
      case RowId::mt_ball: return 1.0 - std::min(1.0, s);
      case RowId::mt_tube: return 1.0 - std::min(2.0, s) / 2.0;
      case RowId::mt_lenz: return c - s;
      case RowId::mt_shell: return n - 0.5 - s;
      case RowId::st_tube: return (c - s) / 2.0;
      case RowId::st_lenz: return c - s;
      default: return 0.0;
    }
  }
};

inline std::vector<ExampleRow> catalog() {
  using R = RadiusRule;
  return {
      {RowId::nm_sphere, Table::NM, "sphere", 2, 5, false, R::unit, "S^{n-1}", "{0}^n"},
      {RowId::nm_ball, Table::NM, "delta-ball", 2, 2, false, R::unit, "{(0,0)}", "S^1"},
      {RowId::nm_tube, Table::NM, "tube", 3, 3, false, R::unit, "{(0,0)} x [0,sqrt(d)]", "S^1 x [0,sqrt(d)]"},
      {RowId::nm_shell, Table::NM, "cylindrical shell", 3, 5, false, R::unit, "[0,sqrt(d)] x S^{n-2}",
       "[0,sqrt(d)] x {0}^{n-1}"},
      {RowId::nm_lenz, Table::NM, "radius 1/sqrt2", 4, 5, false, R::unit, "{(0,0)} x (1/sqrt2)S^{n-3}",
       "(1/sqrt2)S^1 x {0}^{n-2}"},
      {RowId::ns_tube, Table::NS, "tube", 2, 2, false, R::first_coord, "{0} x [0,sqrt(d)]", "[1,2] x [0,sqrt(d)]"},
      {RowId::ns_lenz, Table::NS, "radius 1/sqrt2", 3, 5, false, R::lenz_first, "{0} x (1/sqrt2)S^{n-2}",
       "[1,3/2] x {0}^{n-1}"},
      {RowId::mt_ball, Table::MT, "delta-ball", 2, 5, true, R::unit, "{0}^n", "S^{n-1}"},
      {RowId::mt_tube, Table::MT, "tube", 2, 5, true, R::unit, "{0}^{n-1} x [0,sqrt(d)]", "S^{n-2} x [0,sqrt(d)]"},
      {RowId::mt_lenz, Table::MT, "radius 1/sqrt2", 3, 5, true, R::unit, "{0}^{n-c+1} x (1/sqrt2)S^{c-2}",
       "(1/sqrt2)S^{n-c} x {0}^{c-1}"},
      {RowId::mt_shell, Table::MT, "cyl. shell", 2, 5, true, R::unit, "[0,sqrt(d)] x S^{n-2}", "[0,sqrt(d)] x {0}^{n-1}"},
      {RowId::st_tube, Table::ST, "tube", 2, 5, true, R::norm_head, "{0}^{n-c} x B(sqrt(d))^c",
       "A(1,2)^{n-c} x B(sqrt(d))^c"},
      {RowId::st_lenz, Table::ST, "radius 1/sqrt2", 3, 5, true, R::lenz_head, "{0}^{n-c} x (1/sqrt2)S^{c-1}",
       "A(1,3/2)^{n-c} x B(d)^c"},
  };
}

inline const std::vector<ExampleRow>& catalog_rows() {
  static const std::vector<ExampleRow> rows = catalog();
  return rows;
}

inline const ExampleRow& find_row(std::string_view key) {
  for (const ExampleRow& r : catalog_rows())
    if (r.key() == key) return r;
  throw std::invalid_argument("unknown example row: " + std::string(key));
}

inline const ExampleRow& find_row(RowId id) {
  for (const ExampleRow& r : catalog_rows())
    if (r.id == id) return r;
  throw std::invalid_argument("unknown example row");
}

// gamma = (alpha - 1) - (alpha - beta) / p.
inline double predicted_gamma(const ExampleRow& row, int n, double s, double p) {
  const double a = row.alpha(n, s), b = row.beta(n, s);
  return (a - 1.0) - (a - b) * inverse_p(p);
}

// Most negative exponent over the rows of a table valid at n. NS also has the trivial bound 1.
inline double sharpest_gamma(Table table, int n, double p) {
  if (table != Table::NM && table != Table::NS) throw std::invalid_argument("sharpest_gamma: NM or NS only");
  double best = table == Table::NS ? 0.0 : kInf;
  for (const ExampleRow& r : catalog_rows())
    if (r.table == table && r.valid(n, 0.0)) best = std::min(best, predicted_gamma(r, n, 0.0, p));
  return best;
}

inline std::optional<int> smallest_n(const ExampleRow& row, double s) {
  for (int n = row.n_min; n <= row.n_max; ++n)
    if (row.valid(n, s)) return n;
  return std::nullopt;
}

/// (n, s) pairs exercised by the inclusion suite: each s in {0, 1/2, 1, 3/2} at its smallest n,
/// falling back to the row's lowest s when none applies.
inline std::vector<std::pair<int, double>> standard_cases(const ExampleRow& row) {
  if (!row.uses_s) return {{row.n_min, 0.0}};
  std::vector<std::pair<int, double>> out;
  for (double s : {0.0, 0.5, 1.0, 1.5})
    if (auto n = smallest_n(row, s)) out.emplace_back(*n, s);
  if (out.empty())
    for (int n = row.n_min; n <= row.n_max && out.empty(); ++n) {
      const double s = row.s_range(n).first;
      if (row.valid(n, s)) out.emplace_back(n, s);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Instances

inline constexpr double kCenterCushion = 0.1;

/// A catalog row at concrete (n, s, delta).
class ExampleInstance {
public:
  ExampleInstance(const ExampleRow& row, int n, double s, double delta, std::uint64_t seed = 1)
      : row_(row), n_(n), s_(row.uses_s ? s : 0.0), delta_(delta), seed_(seed) {
    if (!row.valid(n, s_)) throw PreconditionError("instantiate: (n, s) outside the row's range for " + row.key());
    if (!(delta > 0.0 && delta < 0.5)) throw PreconditionError("instantiate: delta outside (0, 1/2)");
    build();
    if (E_.dim() != n || Z_.dim() != n) throw std::logic_error("instantiate: dimension bookkeeping");
  }

  const ExampleRow& row() const { return row_; }
  int n() const { return n_; }
  double s() const { return s_; }
  double delta() const { return delta_; }
  std::uint64_t seed() const { return seed_; }
  const ProductSet& E() const { return E_; }
  const ProductSet& Z() const { return Z_; }
  const std::shared_ptr<const TranslateSet>& T() const { return T_; }
  int head_dim() const { return head_; }

  // Thickening applied to Z when sampling centers.
  double center_thickness() const {
    switch (row_.table) {
      case Table::NM: return delta_;
      case Table::MT: return kCenterCushion * delta_;
      default: return 0.0;
    }
  }

  bool in_E(const Vec& y) const { return E_.distance(y) <= delta_; }
  Box E_box() const { return E_.bounds().expanded(delta_); }

  // Disjoint cover of E^delta when 2 delta is below the gaps between components.
  std::vector<Box> E_boxes() const {
    std::vector<Box> out = E_.boxes();
    for (Box& b : out) b = b.expanded(delta_);
    return out;
  }

  Indicator indicator() const {
    return {[this](const Vec& y) { return in_E(y); }, E_boxes(), -1.0};
  }

  Vec sample_center(Rng& rng) const {
    Vec z = Z_.sample(rng);
    const double th = center_thickness();
    if (th > 0.0) z += uniform_in_ball(n_, th, rng);
    return z;
  }

  double radius_at(const Vec& z) const {
    switch (row_.radius) {
      case RadiusRule::unit: return 1.0;
      case RadiusRule::first_coord: return z[0];
      case RadiusRule::lenz_first: return std::sqrt(z[0] * z[0] + 0.5);
      case RadiusRule::norm_head: return z.slice(0, head_).norm();
      case RadiusRule::lenz_head: return std::sqrt(z.slice(0, head_).norm2() + 0.5);
    }
    return 1.0;
  }

  // Operator whose supremum domain the witnesses land in.
  OperatorSpec op() const {
    switch (row_.table) {
      case Table::NM: return OperatorSpec::nm(n_, delta_);
      case Table::NS: return OperatorSpec::ns(n_, delta_);
      case Table::MT: return OperatorSpec::mt(T_, delta_);
      case Table::ST: return OperatorSpec::st(T_, delta_);
    }
    return OperatorSpec::nm(n_, delta_);
  }

  std::optional<Witness> witness(const Vec& x) const {
    switch (row_.table) {
      case Table::NM: return witness_nm(x);
      case Table::NS: return witness_ns(x);
      case Table::MT: return witness_mt(x);
      case Table::ST: return witness_st(x);
    }
    return std::nullopt;
  }

  WitnessMap witness_map() const {
    return [this](const Vec& x) { return witness(x); };
  }

  bool in_image(const Vec& x) const {
    if (row_.table == Table::NM) {
      // Z is connected, so |x - z| sweeps [dist, farthest].
      return Z_.distance(x) <= 1.0 + delta_ && Z_.farthest(x) >= 1.0 - delta_;
    }
    return witness(x).has_value();
  }

  Box image_box() const {
    const Box zb = Z_.bounds().expanded(center_thickness());
    switch (row_.table) {
      case Table::NM: return zb.expanded(1.0);
      case Table::NS: return zb.expanded(max_radius());
      case Table::MT: {
        Box b = zb;
        for (int i = T_->zero_padding(); i < n_; ++i) {
          b.lo[i] -= 0.5;
          b.hi[i] += 0.5;
        }
        return b;
      }
      case Table::ST: {
        Box b = zb;
        const double reach = 0.5 * max_radius();
        for (int i = head_; i < n_; ++i) {
          b.lo[i] -= reach;
          b.hi[i] += reach;
        }
        return b;
      }
    }
    return zb;
  }

  double max_radius() const {
    const Box zb = Z_.bounds();
    switch (row_.radius) {
      case RadiusRule::unit: return 1.0;
      case RadiusRule::first_coord: return zb.hi[0];
      case RadiusRule::lenz_first: return std::sqrt(zb.hi[0] * zb.hi[0] + 0.5);
      case RadiusRule::norm_head: return Z_.factors().front().b;
      case RadiusRule::lenz_head: return std::sqrt(std::pow(Z_.factors().front().b, 2) + 0.5);
    }
    return 1.0;
  }

private:
  void build() {
    const int n = n_;
    const double rd = std::sqrt(delta_);
    const double lenz = 1.0 / std::numbers::sqrt2;
    const int c = ceil_s(s_);
    head_ = row_.table == Table::ST ? n - c : (row_.table == Table::NS ? 1 : 0);
    using F = Factor;
    switch (row_.id) {
      case RowId::nm_sphere:
        E_ = {F::sphere(n, 1.0)};
        Z_ = {F::zeros(n)};
        break;
      case RowId::nm_ball:
        E_ = {F::zeros(2)};
        Z_ = {F::sphere(2, 1.0)};
        break;
      case RowId::nm_tube:
        E_ = {F::zeros(2), F::interval(0.0, rd)};
        Z_ = {F::sphere(2, 1.0), F::interval(0.0, rd)};
        break;
      case RowId::nm_shell:
      case RowId::mt_shell:
        E_ = {F::interval(0.0, rd), F::sphere(n - 1, 1.0)};
        Z_ = {F::interval(0.0, rd), F::zeros(n - 1)};
        break;
      case RowId::nm_lenz:
        E_ = {F::zeros(2), F::sphere(n - 2, lenz)};
        Z_ = {F::sphere(2, lenz), F::zeros(n - 2)};
        break;
      case RowId::ns_tube:
        E_ = {F::zeros(1), F::interval(0.0, rd)};
        Z_ = {F::interval(1.0, 2.0), F::interval(0.0, rd)};
        break;
      case RowId::ns_lenz:
        E_ = {F::zeros(1), F::sphere(n - 1, lenz)};
        Z_ = {F::interval(1.0, 1.5), F::zeros(n - 1)};
        break;
      case RowId::mt_ball:
        E_ = {F::zeros(n)};
        Z_ = {F::sphere(n, 1.0)};
        break;
      case RowId::mt_tube:
        E_ = {F::zeros(n - 1), F::interval(0.0, rd)};
        Z_ = {F::sphere(n - 1, 1.0), F::interval(0.0, rd)};
        break;
      case RowId::mt_lenz:
        E_ = {F::zeros(n - c + 1), F::sphere(c - 1, lenz)};
        Z_ = {F::sphere(n - c + 1, lenz), F::zeros(c - 1)};
        break;
      case RowId::st_tube:
        E_ = {F::zeros(n - c), F::ball(c, rd)};
        Z_ = {F::shell(n - c, 1.0, 2.0), F::ball(c, rd)};
        break;
      case RowId::st_lenz:
        E_ = {F::zeros(n - c), F::sphere(c, lenz)};
        Z_ = {F::shell(n - c, 1.0, 1.5), F::ball(c, delta_)};
        break;
    }
    if (row_.table == Table::MT || row_.table == Table::ST)
      T_ = std::make_shared<const TranslateSet>(TranslateSet::for_delta(n, s_, delta_));
    if (row_.table == Table::NS) {
      ProductSet w;
      for (std::size_t i = 1; i < Z_.factors().size(); ++i) w.push(Z_.factors()[i]);
      tail_ = w;
    }
  }

  std::optional<Witness> witness_nm(const Vec& x) const {
    const Vec z = Z_.point_at_distance(x, 1.0);
    const Vec v = z - x;
    const double d = v.norm();
    if (d < 1e-12 || std::abs(d - 1.0) > delta_) return std::nullopt;
    return Witness{v / d, 1.0, std::nullopt};
  }

  // Z = [a, b] x W with r(z)^2 - (x1 - z1)^2 = 2 x1 z1 - x1^2 + c0 required to equal |x_W - z_W|^2.
  std::optional<Witness> witness_ns(const Vec& x) const {
    const double x1 = x[0];
    if (x1 <= 1e-12) return std::nullopt;
    const Factor& first = Z_.factors().front();
    const double c0 = row_.radius == RadiusRule::lenz_first ? 0.5 : 0.0;
    const Vec xw = x.slice(1, n_ - 1);
    const double dmin = tail_.distance(xw), dmax = tail_.farthest(xw);
    const double lo = std::max(first.a, (dmin * dmin + x1 * x1 - c0) / (2.0 * x1));
    const double hi = std::min(first.b, (dmax * dmax + x1 * x1 - c0) / (2.0 * x1));
    if (lo > hi) return std::nullopt;
    const double z1 = lo;
    const double d2 = 2.0 * x1 * z1 - x1 * x1 + c0;
    Vec z(n_);
    z[0] = z1;
    z.set_slice(1, tail_.point_at_distance(xw, std::sqrt(std::max(0.0, d2))));
    const double t = radius_at(z);
    const Vec v = z - x;
    const double len = v.norm();
    if (std::abs(len - t) > 1e-9 * t) return std::nullopt;
    return Witness{v / len, t, std::nullopt};
  }

  std::optional<Witness> witness_mt(const Vec& x) const {
    const double th = center_thickness();
    using V = TranslateSet::Verdict;
    auto judge = [&](const Box& cell, bool leaf) {
      if (Z_.distance(x + cell.lo) <= th) return V::accept;
      if (leaf) return V::reject;
      if (Z_.distance(x + cell.center()) - cell.half_diagonal() > th) return V::reject;
      return V::split;
    };
    const auto found = T_->search(judge);
    if (!found) return std::nullopt;
    return Witness{found->lo, 1.0, std::nullopt};
  }

  std::optional<Witness> witness_st(const Vec& x) const {
    const Factor& head = Z_.factors().front();
    const Vec xi = x.slice(0, head_);
    if (head.distance(xi) > 0.0) return std::nullopt;
    Vec zi(n_);
    zi.set_slice(0, xi);
    const double t = radius_at(zi);
    Vec u(n_);
    const int c = n_ - head_;
    if (c > 0) {
      const double rho = Z_.factors().back().b;
      const double a = T_->ratio();
      const int depth = T_->depth();
      double d2 = 0.0;
      for (int j = 0; j < c; ++j) {
        const double y = -x[head_ + j] / t;
        const double up = cantor1d::successor(y, a, depth);
        const double down = -cantor1d::successor(-y, a, depth);
        const double pick = std::abs(up - y) <= std::abs(down - y) ? up : down;
        u[head_ + j] = pick;
        d2 += (pick - y) * (pick - y);
      }
      if (std::sqrt(d2) * t > rho) return std::nullopt;
    }
    const int level = static_cast<int>(std::floor(std::log2(t) + 1e-12));
    return Witness{u, t, level};
  }

  ExampleRow row_;
  int n_;
  double s_;
  double delta_;
  std::uint64_t seed_;
  int head_ = 0;
  ProductSet E_, Z_, tail_;
  std::shared_ptr<const TranslateSet> T_;
};

inline ExampleInstance instantiate(const ExampleRow& row, int n, double s, double delta, std::uint64_t seed = 1) {
  return ExampleInstance(row, n, s, delta, seed);
}

// ---------------------------------------------------------------------------
// Verification

struct InclusionOptions {
  std::int64_t z_samples = 1000;
  std::int64_t pool = 8192;             // points of E^delta (NM, NS)
  std::int64_t sphere_samples = 2048;   // directions per sphere (MT, ST)
  std::int64_t volume_samples = 400'000;
  std::uint64_t seed = 1;
};

struct InclusionResult {
  double min_ratio = 0.0;
  double mean_ratio = 0.0;
  double max_ratio = 0.0;
  double e_volume = 0.0;
  std::int64_t z_count = 0;
};

namespace detail {

// Uniform points of E^delta by rejection from its box.
inline std::vector<Vec> sample_E(const ExampleInstance& inst, std::int64_t count, std::uint64_t seed) {
  const std::vector<Box> boxes = inst.E_boxes();
  std::vector<double> cum;
  double total = 0.0;
  for (const Box& b : boxes) cum.push_back(total += b.volume());
  const std::size_t blocks = static_cast<std::size_t>((count + kBlockSamples - 1) / kBlockSamples);
  std::vector<std::vector<Vec>> parts(blocks);
  parallel_for(blocks, [&](std::size_t b) {
    Rng rng(seed, b);
    const std::int64_t want = std::min<std::int64_t>(kBlockSamples, count - static_cast<std::int64_t>(b) * kBlockSamples);
    std::int64_t tries = 0;
    while (static_cast<std::int64_t>(parts[b].size()) < want) {
      if (++tries > 1000 * want) throw std::runtime_error("verify_inclusion: E^delta sampling failed");
      const std::size_t j = static_cast<std::size_t>(
          std::lower_bound(cum.begin(), cum.end(), rng.uniform() * total) - cum.begin());
      const std::size_t k = std::min(j, boxes.size() - 1);
      const Vec y = boxes[k].sample(rng);
      if (inst.in_E(y) && !in_earlier_box(boxes, k, y)) parts[b].push_back(y);
    }
  });
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(count));
  for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

}  // namespace detail

// Inclusion ratio at each given center.
/// NM, NS: |E^d ∩ S^d(z, r(z))| / |E^d|.  MT, ST: H^{n-1}(E^d ∩ S(z, r(z))) / (|E^d| / d).
inline std::vector<double> inclusion_ratios(const ExampleInstance& inst, const std::vector<Vec>& centers,
                                            const InclusionOptions& opt = {}, double* e_volume = nullptr) {
  const double d = inst.delta();
  const bool thick = inst.row().table == Table::NM || inst.row().table == Table::NS;
  std::vector<double> ratios(centers.size());
  if (thick) {
    const std::vector<Vec> pool = detail::sample_E(inst, opt.pool, mix_seed(opt.seed, 0x70));
    parallel_for(centers.size(), [&](std::size_t i) {
      const Vec& z = centers[i];
      const double r = inst.radius_at(z);
      std::int64_t hits = 0;
      for (const Vec& y : pool)
        if (in_shell(y, z, r, d)) ++hits;
      ratios[i] = static_cast<double>(hits) / static_cast<double>(pool.size());
    });
    if (e_volume) *e_volume = indicator_volume(inst.indicator(), opt.volume_samples, mix_seed(opt.seed, 0x65)).value;
    return ratios;
  }
  const MCEstimate ev = indicator_volume(inst.indicator(), opt.volume_samples, mix_seed(opt.seed, 0x65));
  if (!(ev.value > 0.0)) throw std::runtime_error("verify_inclusion: zero |E^delta| estimate");
  if (e_volume) *e_volume = ev.value;
  const std::vector<Box> boxes = inst.E_boxes();
  const double norm = ev.value / d;
  parallel_for(centers.size(), [&](std::size_t i) {
    const Sphere sph(centers[i], inst.radius_at(centers[i]));
    double h = 0.0;
    for (std::size_t j = 0; j < boxes.size(); ++j) {
      const Box& b = boxes[j];
      if (!box_meets_shell(b, sph.center, sph.radius, sph.radius)) continue;
      const Cap cap = cap_toward_ball(sph, b.center(), b.half_diagonal());
      h += sphere_surface_measure(
               [&](const Vec& y) { return b.contains(y) && !detail::in_earlier_box(boxes, j, y) && inst.in_E(y); },
               sph, opt.sphere_samples, mix_seed(opt.seed, i, 0x73 + j), &cap)
               .value;
    }
    ratios[i] = h / norm;
  });
  return ratios;
}

/// Minimum inclusion ratio over sampled centers (Z^d for NM, Z^{cd} for MT, Z otherwise).
inline InclusionResult verify_inclusion(const ExampleInstance& inst, const InclusionOptions& opt = {}) {
  if (opt.z_samples < 1) throw std::invalid_argument("verify_inclusion: need z samples");
  std::vector<Vec> centers(static_cast<std::size_t>(opt.z_samples));
  Rng rng(mix_seed(opt.seed, 0x7a), 0);
  for (Vec& z : centers) z = inst.sample_center(rng);
  InclusionResult res;
  res.z_count = opt.z_samples;
  const std::vector<double> ratios = inclusion_ratios(inst, centers, opt, &res.e_volume);
  res.min_ratio = *std::min_element(ratios.begin(), ratios.end());
  res.max_ratio = *std::max_element(ratios.begin(), ratios.end());
  double sum = 0.0;
  for (double r : ratios) sum += r;
  res.mean_ratio = sum / static_cast<double>(ratios.size());
  return res;
}

struct ScalingRung {
  double delta = 0.0;
  double e_volume = 0.0;
  double image_volume = 0.0;
};

struct ScalingResult {
  double alpha_hat = 0.0;
  double beta_hat = 0.0;
  std::vector<ScalingRung> rungs;
};

inline double image_volume(const ExampleInstance& inst, std::int64_t samples, std::uint64_t seed) {
  return mc_volume([&](const Vec& x) { return inst.in_image(x); }, inst.image_box(), samples, seed).value;
}

/// Log-log slopes of |E^delta| and of the image set across a ladder of scales.
inline ScalingResult measure_scaling(const ExampleRow& row, int n, double s, const std::vector<double>& ladder,
                                     std::int64_t samples, std::uint64_t seed) {
  if (ladder.size() < 4) throw std::invalid_argument("measure_scaling: ladder needs at least 4 rungs");
  ScalingResult out;
  std::vector<std::pair<double, double>> ea, ib;
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    const ExampleInstance inst(row, n, s, ladder[k], seed);
    ScalingRung r{ladder[k], indicator_volume(inst.indicator(), samples, mix_seed(seed, k, 1)).value,
                  image_volume(inst, samples, mix_seed(seed, k, 2))};
    if (!(r.e_volume > 0.0) || !(r.image_volume > 0.0)) throw std::runtime_error("measure_scaling: empty volume estimate");
    out.rungs.push_back(r);
    ea.emplace_back(r.delta, r.e_volume);
    ib.emplace_back(r.delta, r.image_volume);
  }
  out.alpha_hat = loglog_fit(ea).slope;
  out.beta_hat = loglog_fit(ib).slope;
  return out;
}

// ---------------------------------------------------------------------------
// Lower-bound experiments

struct LowerBoundOptions {
  std::int64_t x_samples = 20'000;
  std::int64_t norm_samples = 200'000;
  std::int64_t avg_samples = 256;
  std::uint64_t seed = 1;
};

// Witnessed ||op 1_{E^d}||_p / ||1_{E^d}||_p over the image box; points without a witness count as 0.
inline MCEstimate lower_bound_ratio(const ExampleInstance& inst, double p, const LowerBoundOptions& opt = {}) {
  const EvalConfig cfg = EvalConfig::at_scale(inst.delta(), opt.avg_samples, opt.seed);
  LpOptions lp{opt.x_samples, opt.norm_samples, opt.seed, true};
  const WitnessMap wm = inst.witness_map();
  return lp_ratio(inst.op(), inst.indicator(), p, cfg, inst.image_box(), lp, &wm);
}

struct LowerBoundPoint {
  double delta = 0.0;
  double ratio = 0.0;
  double std_err = 0.0;
};

struct LowerBoundSeries {
  std::vector<LowerBoundPoint> points;
  FitResult fit;
  double gamma = 0.0;
};

inline LowerBoundSeries lower_bound_series(const ExampleRow& row, int n, double s, double p,
                                           const std::vector<double>& ladder, const LowerBoundOptions& opt = {}) {
  LowerBoundSeries out;
  out.gamma = predicted_gamma(row, n, s, p);
  std::vector<std::pair<double, double>> pts;
  for (double d : ladder) {
    const ExampleInstance inst(row, n, s, d, opt.seed);
    const MCEstimate e = lower_bound_ratio(inst, p, opt);
    out.points.push_back({d, e.value, e.std_err});
    pts.emplace_back(d, e.value);
  }
  out.fit = loglog_fit(pts);
  return out;
}

}  // namespace nikodym
