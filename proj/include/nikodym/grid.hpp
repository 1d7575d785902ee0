#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <type_traits>
#include <unordered_map>
#include <vector>

#include "nikodym/vec.hpp"

namespace nikodym {

/// Uniform-grid spatial hash for fixed-radius neighbor queries.
class GridIndex {
public:
  using Key = std::array<std::int64_t, kMaxDim>;

  GridIndex() = default;
  GridIndex(int dim, double cell) : dim_(dim), cell_(cell) {
    if (!(cell > 0.0)) throw std::invalid_argument("GridIndex: cell size must be positive");
  }

  int dim() const { return dim_; }
  double cell() const { return cell_; }
  std::size_t size() const { return points_.size(); }
  const Vec& point(std::size_t i) const { return points_[i]; }
  const std::vector<Vec>& points() const { return points_; }

  std::size_t insert(const Vec& p) {
    if (p.dim() != dim_) throw std::invalid_argument("GridIndex: dimension mismatch");
    const std::size_t id = points_.size();
    points_.push_back(p);
    cells_[key_of(p)].push_back(static_cast<std::uint32_t>(id));
    return id;
  }

  // Calls fn(id) for every stored point with |p - c| <= r. Returning false from fn stops the scan.
  template <class Fn>
  void visit_ball(const Vec& c, double r, Fn&& fn) const {
    if (points_.empty() || r < 0.0) return;
    const std::int64_t reach = static_cast<std::int64_t>(std::ceil(r / cell_));
    double cells = 1.0;
    for (int i = 0; i < dim_; ++i) cells *= static_cast<double>(2 * reach + 1);
    const double r2 = r * r;
    if (cells > static_cast<double>(cells_.size())) {
      // Scanning occupied cells is cheaper than enumerating the query box.
      Key lo = key_of(c), hi = lo;
      for (int i = 0; i < dim_; ++i) lo[i] -= reach, hi[i] += reach;
      for (const auto& [k, ids] : cells_) {
        bool inside = true;
        for (int i = 0; i < dim_ && inside; ++i) inside = k[i] >= lo[i] && k[i] <= hi[i];
        if (!inside) continue;
        for (std::uint32_t id : ids)
          if ((points_[id] - c).norm2() <= r2 && !call(fn, id)) return;
      }
      return;
    }
    const Key base = key_of(c);
    Key k = base;
    std::array<std::int64_t, kMaxDim> off{};
    for (int i = 0; i < dim_; ++i) off[i] = -reach;
    for (;;) {
      for (int i = 0; i < dim_; ++i) k[i] = base[i] + off[i];
      auto it = cells_.find(k);
      if (it != cells_.end())
        for (std::uint32_t id : it->second)
          if ((points_[id] - c).norm2() <= r2 && !call(fn, id)) return;
      int i = 0;
      for (; i < dim_; ++i) {
        if (++off[i] <= reach) break;
        off[i] = -reach;
      }
      if (i == dim_) break;
    }
  }

  std::size_t count_in_ball(const Vec& c, double r) const {
    std::size_t n = 0;
    visit_ball(c, r, [&](std::size_t) { ++n; });
    return n;
  }

  // True if some stored point lies strictly closer than r to c.
  bool any_closer(const Vec& c, double r) const {
    bool found = false;
    visit_ball(c, r, [&](std::size_t id) {
      if ((points_[id] - c).norm2() < r * r) {
        found = true;
        return false;
      }
      return true;
    });
    return found;
  }

  std::size_t count_brute_force(const Vec& c, double r) const {
    std::size_t n = 0;
    for (const Vec& p : points_)
      if ((p - c).norm2() <= r * r) ++n;
    return n;
  }

private:
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::uint64_t h = 0x9e3779b97f4a7c15ULL;
      for (std::int64_t v : k) h = (h ^ static_cast<std::uint64_t>(v)) * 0x100000001b3ULL + (h >> 29);
      return static_cast<std::size_t>(h);
    }
  };

  template <class Fn>
  static bool call(Fn& fn, std::size_t id) {
    if constexpr (std::is_same_v<decltype(fn(id)), bool>)
      return fn(id);
    else {
      fn(id);
      return true;
    }
  }

  Key key_of(const Vec& p) const {
    Key k{};
    for (int i = 0; i < dim_; ++i) k[i] = static_cast<std::int64_t>(std::floor(p[i] / cell_));
    return k;
  }

  int dim_ = 0;
  double cell_ = 1.0;
  std::vector<Vec> points_;
  std::unordered_map<Key, std::vector<std::uint32_t>, KeyHash> cells_;
};

}  // namespace nikodym
