#ifndef HEXWALL_SYM_EIGEN_HPP
#define HEXWALL_SYM_EIGEN_HPP

#include "hexwall/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace hexwall {

/// Symmetric 3x3 tensor in Voigt order (xx, yy, zz, xy, yz, xz).
using Sym6 = std::array<double, 6>;

inline Mat3 to_matrix(const Sym6& s) {
  Mat3 m;
  m << s[0], s[3], s[5], s[3], s[1], s[4], s[5], s[4], s[2];
  return m;
}

namespace detail {
inline Vec3 any_unit_perpendicular(const Vec3& v) {
  const Vec3 a = std::abs(v.x()) < 0.6 ? Vec3::UnitX() : Vec3::UnitY();
  return (a - a.dot(v) * v).normalized();
}
}  // namespace detail

/// Eigenvalues of a symmetric 3x3 tensor, sorted descending. The trigonometric
/// closed form is applied to the deviator and its extreme roots are polished by
/// Newton steps on the deviatoric characteristic polynomial; a deflation step
/// then recovers the pair that acos resolves poorly near a double root.
inline std::array<double, 3> principal_values(const Sym6& s) {
  const double off = s[3] * s[3] + s[4] * s[4] + s[5] * s[5];
  const double scale = std::max({std::abs(s[0]), std::abs(s[1]), std::abs(s[2]), std::abs(s[3]),
                                 std::abs(s[4]), std::abs(s[5])});
  if (scale == 0.0) return {0.0, 0.0, 0.0};
  if (off == 0.0) {
    std::array<double, 3> d{s[0], s[1], s[2]};
    std::sort(d.begin(), d.end(), std::greater<>());
    return d;
  }
  const double q = (s[0] + s[1] + s[2]) / 3.0;
  Mat3 B = to_matrix(s);
  B.diagonal().array() -= q;
  // Deviator invariants: y^3 - J2 y - J3 = 0.
  const double J2 = 0.5 * (B(0, 0) * B(0, 0) + B(1, 1) * B(1, 1) + B(2, 2) * B(2, 2)) + off;
  const double J3 = B.determinant();
  if (J2 == 0.0) return {q, q, q};
  const double p = std::sqrt(J2 / 3.0);
  const double r = std::clamp(0.5 * J3 / (p * p * p), -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  auto polish = [&](double y) {
    for (int it = 0; it < 3; ++it) {
      const double f = (y * y - J2) * y - J3;
      const double df = 3.0 * y * y - J2;
      if (std::abs(df) <= 1e-8 * J2) break;
      const double ny = y - f / df;
      if (!(std::abs((ny * ny - J2) * ny - J3) < std::abs(f))) break;
      y = ny;
    }
    return y;
  };
  const double y1 = polish(2.0 * p * std::cos(phi));
  const double y3 = polish(2.0 * p * std::cos(phi + 2.0 * pi / 3.0));
  std::array<double, 3> y{y1, -y1 - y3, y3};
  std::sort(y.begin(), y.end(), std::greater<>());

  // Eigenvector of the better separated extreme root from rows of (B - yI),
  // then the 2x2 block on its orthogonal complement in closed form.
  const bool top_isolated = y[0] - y[1] >= y[1] - y[2];
  const double iso = top_isolated ? y[0] : y[2];
  const Mat3 S = B - iso * Mat3::Identity();
  Vec3 v = Vec3::Zero();
  for (int i = 0; i < 3; ++i) {
    const Vec3 c = S.row(i).cross(S.row((i + 1) % 3));
    if (c.squaredNorm() > v.squaredNorm()) v = c;
  }
  if (v.norm() > 1e-6 * J2) {
    v.normalize();
    const Vec3 u = detail::any_unit_perpendicular(v);
    const Vec3 w = v.cross(u);
    const double a11 = u.dot(B * u), a22 = w.dot(B * w), a12 = u.dot(B * w);
    const double mid = 0.5 * (a11 + a22), rad = std::hypot(0.5 * (a11 - a22), a12);
    const double lam = v.dot(B * v);
    y = top_isolated ? std::array<double, 3>{lam, mid + rad, mid - rad}
                     : std::array<double, 3>{mid + rad, mid - rad, lam};
    std::sort(y.begin(), y.end(), std::greater<>());
  }
  return {q + y[0], q + y[1], q + y[2]};
}

inline double max_principal(const Sym6& s) { return principal_values(s)[0]; }

}  // namespace hexwall

#endif  // HEXWALL_SYM_EIGEN_HPP
