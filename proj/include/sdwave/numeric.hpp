#pragma once

#include <array>
#include <cmath>

namespace sdwave {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  CompensatedSum() = default;
  explicit CompensatedSum(double value) : sum_(value) {}

  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  CompensatedSum& operator+=(double x) noexcept {
    add(x);
    return *this;
  }

  CompensatedSum& operator+=(const CompensatedSum& other) noexcept {
    add(other.sum_);
    comp_ += other.comp_;
    return *this;
  }

  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Dense 2x2 matrix, row-major. Used for the per-mode drift, transition and covariance.
struct Mat2 {
  double xx = 0.0, xy = 0.0, yx = 0.0, yy = 0.0;

  static constexpr Mat2 identity() noexcept { return {1.0, 0.0, 0.0, 1.0}; }
  static constexpr Mat2 diag(double p, double q) noexcept { return {p, 0.0, 0.0, q}; }

  constexpr Mat2 transpose() const noexcept { return {xx, yx, xy, yy}; }

  constexpr double max_abs() const noexcept {
    const double a = xx < 0 ? -xx : xx;
    const double b = xy < 0 ? -xy : xy;
    const double c = yx < 0 ? -yx : yx;
    const double d = yy < 0 ? -yy : yy;
    const double m1 = a > b ? a : b;
    const double m2 = c > d ? c : d;
    return m1 > m2 ? m1 : m2;
  }

  friend constexpr Mat2 operator+(const Mat2& l, const Mat2& r) noexcept {
    return {l.xx + r.xx, l.xy + r.xy, l.yx + r.yx, l.yy + r.yy};
  }
  friend constexpr Mat2 operator-(const Mat2& l, const Mat2& r) noexcept {
    return {l.xx - r.xx, l.xy - r.xy, l.yx - r.yx, l.yy - r.yy};
  }
  friend constexpr Mat2 operator*(double s, const Mat2& m) noexcept {
    return {s * m.xx, s * m.xy, s * m.yx, s * m.yy};
  }
  friend constexpr Mat2 operator*(const Mat2& l, const Mat2& r) noexcept {
    return {l.xx * r.xx + l.xy * r.yx, l.xx * r.xy + l.xy * r.yy,
            l.yx * r.xx + l.yy * r.yx, l.yx * r.xy + l.yy * r.yy};
  }
  friend constexpr bool operator==(const Mat2&, const Mat2&) = default;
};

/// M X M^T, symmetrized so covariances stay exactly symmetric.
constexpr Mat2 congruence(const Mat2& m, const Mat2& x) noexcept {
  Mat2 r = m * x * m.transpose();
  const double off = 0.5 * (r.xy + r.yx);
  r.xy = off;
  r.yx = off;
  return r;
}

}  // namespace sdwave
