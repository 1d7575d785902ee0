#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <initializer_list>
#include <stdexcept>

namespace nikodym {

// Ambient dimension n is at most 5; (center, radius) pairs live in R^{n+1}.
inline constexpr int kMaxDim = 6;

/// Fixed-capacity real vector with a runtime dimension.
class Vec {
public:
  Vec() = default;

  explicit Vec(int dim) : n_(checked(dim)) { v_.fill(0.0); }

  Vec(std::initializer_list<double> xs) : n_(checked(static_cast<int>(xs.size()))) {
    v_.fill(0.0);
    std::copy(xs.begin(), xs.end(), v_.begin());
  }

  static Vec zeros(int dim) { return Vec(dim); }

  static Vec unit(int dim, int axis) {
    Vec e(dim);
    e[axis] = 1.0;
    return e;
  }

  int dim() const { return n_; }
  double& operator[](int i) { return v_[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return v_[static_cast<std::size_t>(i)]; }
  const double* data() const { return v_.data(); }

  Vec& operator+=(const Vec& o) {
    assert(o.n_ == n_);
    for (int i = 0; i < n_; ++i) v_[i] += o.v_[i];
    return *this;
  }
  Vec& operator-=(const Vec& o) {
    assert(o.n_ == n_);
    for (int i = 0; i < n_; ++i) v_[i] -= o.v_[i];
    return *this;
  }
  Vec& operator*=(double s) {
    for (int i = 0; i < n_; ++i) v_[i] *= s;
    return *this;
  }
  Vec& operator/=(double s) {
    for (int i = 0; i < n_; ++i) v_[i] /= s;
    return *this;
  }

  double norm2() const {
    double s = 0.0;
    for (int i = 0; i < n_; ++i) s += v_[i] * v_[i];
    return s;
  }
  double norm() const { return std::sqrt(norm2()); }

  bool finite() const {
    for (int i = 0; i < n_; ++i)
      if (!std::isfinite(v_[i])) return false;
    return true;
  }

  // Coordinates [first, first + count) as a new vector.
  Vec slice(int first, int count) const {
    Vec out(count);
    for (int i = 0; i < count; ++i) out[i] = v_[first + i];
    return out;
  }

  void set_slice(int first, const Vec& part) {
    for (int i = 0; i < part.dim(); ++i) v_[first + i] = part[i];
  }

  bool operator==(const Vec& o) const {
    if (n_ != o.n_) return false;
    for (int i = 0; i < n_; ++i)
      if (v_[i] != o.v_[i]) return false;
    return true;
  }

private:
  static int checked(int dim) {
    if (dim < 0 || dim > kMaxDim) throw std::invalid_argument("Vec: dimension out of range");
    return dim;
  }

  std::array<double, kMaxDim> v_{};
  int n_ = 0;
};

inline Vec operator+(Vec a, const Vec& b) { return a += b; }
inline Vec operator-(Vec a, const Vec& b) { return a -= b; }
inline Vec operator*(Vec a, double s) { return a *= s; }
inline Vec operator*(double s, Vec a) { return a *= s; }
inline Vec operator/(Vec a, double s) { return a /= s; }
inline Vec operator-(Vec a) { return a *= -1.0; }

inline double dot(const Vec& a, const Vec& b) {
  assert(a.dim() == b.dim());
  double s = 0.0;
  for (int i = 0; i < a.dim(); ++i) s += a[i] * b[i];
  return s;
}

inline double dist(const Vec& a, const Vec& b) { return (a - b).norm(); }

// Concatenation (x, y) of two vectors.
inline Vec concat(const Vec& a, const Vec& b) {
  Vec out(a.dim() + b.dim());
  out.set_slice(0, a);
  out.set_slice(a.dim(), b);
  return out;
}

inline Vec with_extra(const Vec& a, double t) {
  Vec out(a.dim() + 1);
  out.set_slice(0, a);
  out[a.dim()] = t;
  return out;
}

}  // namespace nikodym
