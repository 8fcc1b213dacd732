#pragma once

#include <array>
#include <cmath>

#include "nlop/error.hpp"

namespace nlop {

/// Truncated univariate Taylor series c_0 + c_1 h + ... + c_N h^N, used to
/// push derivatives of a radial profile through composition.
class Jet {
 public:
  static constexpr int kMaxOrder = 8;

  explicit Jet(int order = 0) : order_(order) { c_.fill(0.0); }

  static Jet constant(double v, int order) {
    Jet j(order);
    j.c_[0] = v;
    return j;
  }
  /// The independent variable expanded at `at`.
  static Jet variable(double at, int order) {
    Jet j(order);
    j.c_[0] = at;
    if (order > 0) j.c_[1] = 1.0;
    return j;
  }

  int order() const { return order_; }
  double operator[](int k) const { return c_[static_cast<std::size_t>(k)]; }
  double& operator[](int k) { return c_[static_cast<std::size_t>(k)]; }

  /// k-th derivative at the expansion point: k! c_k.
  double derivative(int k) const {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return f * c_[static_cast<std::size_t>(k)];
  }

  friend Jet operator+(Jet a, const Jet& b) {
    for (int k = 0; k <= a.order_; ++k) a[k] += b[k];
    return a;
  }
  friend Jet operator-(Jet a, const Jet& b) {
    for (int k = 0; k <= a.order_; ++k) a[k] -= b[k];
    return a;
  }
  friend Jet operator-(Jet a) {
    for (int k = 0; k <= a.order_; ++k) a[k] = -a[k];
    return a;
  }
  friend Jet operator*(double s, Jet a) {
    for (int k = 0; k <= a.order_; ++k) a[k] *= s;
    return a;
  }
  friend Jet operator+(double s, Jet a) {
    a[0] += s;
    return a;
  }
  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet r(a.order_);
    for (int k = 0; k <= a.order_; ++k)
      for (int i = 0; i <= k; ++i) r[k] += a[i] * b[k - i];
    return r;
  }
  friend Jet operator/(const Jet& a, const Jet& b) {
    if (b[0] == 0.0) throw DomainError("jet division by a series with zero constant term");
    Jet r(a.order_);
    for (int k = 0; k <= a.order_; ++k) {
      double acc = a[k];
      for (int i = 1; i <= k; ++i) acc -= b[i] * r[k - i];
      r[k] = acc / b[0];
    }
    return r;
  }

  friend Jet exp(const Jet& a) {
    Jet r(a.order_);
    r[0] = std::exp(a[0]);
    for (int k = 1; k <= a.order_; ++k) {
      double acc = 0.0;
      for (int i = 1; i <= k; ++i) acc += i * a[i] * r[k - i];
      r[k] = acc / k;
    }
    return r;
  }

  /// a^p for a_0 > 0.
  friend Jet pow(const Jet& a, double p) {
    if (!(a[0] > 0.0)) throw DomainError("jet power of a series with non-positive constant term");
    Jet r(a.order_);
    r[0] = std::pow(a[0], p);
    for (int k = 1; k <= a.order_; ++k) {
      double acc = 0.0;
      for (int i = 1; i <= k; ++i) acc += ((p + 1.0) * i - k) * a[i] * r[k - i];
      r[k] = acc / (k * a[0]);
    }
    return r;
  }

 private:
  int order_;
  std::array<double, kMaxOrder + 1> c_{};
};

}  // namespace nlop
