#ifndef HEXWALL_METRICS_HPP
#define HEXWALL_METRICS_HPP

// Element-level shape metrics. All functions are pure and invariant under rigid
// motions and uniform scaling.
//
// Hexahedron corner ordering used throughout the library (VTK type 12 and
// Abaqus C3D8 agree): corners 0-3 form the bottom face, 4-7 the top face with
// corner i+4 above corner i. The right-hand normal of 0-1-2-3 points into the
// element, so edges 0->1, 0->3, 0->4 form a right-handed triple on a
// positively oriented element.

#include "hexwall/core.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <limits>
#include <span>

namespace hexwall {

using Hex = std::array<int, 8>;
using Quad = std::array<int, 4>;
using Tet = std::array<int, 4>;

/// For each corner, its three edge-neighbours ordered so the edge vectors form a
/// right-handed triple on a positively oriented hexahedron.
inline constexpr std::array<std::array<int, 3>, 8> hex_corner_neighbors{{
    {1, 3, 4}, {2, 0, 5}, {3, 1, 6}, {0, 2, 7},
    {7, 5, 0}, {4, 6, 1}, {5, 7, 2}, {6, 4, 3},
}};

/// Hexahedron faces wound with outward normals.
inline constexpr std::array<std::array<int, 4>, 6> hex_faces{{
    {0, 4, 7, 3},  // radial-  (inner side in wall meshes)
    {1, 2, 6, 5},  // radial+  (outer side)
    {0, 1, 5, 4},  // angular-
    {3, 7, 6, 2},  // angular+
    {0, 3, 2, 1},  // axial-   (bottom)
    {4, 5, 6, 7},  // axial+   (top)
}};

inline constexpr std::array<std::array<int, 2>, 12> hex_edges{{
    {0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
    {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7},
}};

/// Tetrahedron faces wound with outward normals for a positively oriented tet.
inline constexpr std::array<std::array<int, 3>, 4> tet_faces{{
    {0, 2, 1}, {0, 1, 3}, {1, 2, 3}, {0, 3, 2},
}};

inline constexpr std::array<std::array<int, 2>, 6> tet_edges{{
    {0, 1}, {1, 2}, {2, 0}, {0, 3}, {1, 3}, {2, 3},
}};

struct ElementMetric {
  double value = 0.0;
  bool degenerate = false;
};

struct AngleExtrema {
  double min_deg = std::numeric_limits<double>::infinity();
  double max_deg = -std::numeric_limits<double>::infinity();
  bool degenerate = false;

  void merge(const AngleExtrema& o) {
    min_deg = std::min(min_deg, o.min_deg);
    max_deg = std::max(max_deg, o.max_deg);
    degenerate = degenerate || o.degenerate;
  }
  bool within(double lo, double hi) const { return !degenerate && min_deg >= lo && max_deg <= hi; }
};

/// Minimum over the 8 corners of det[e1/|e1|, e2/|e2|, e3/|e3|]. A zero-length
/// edge yields 0 with the degenerate flag set.
inline ElementMetric scaled_jacobian_hex(std::span<const Vec3, 8> p) {
  ElementMetric out{std::numeric_limits<double>::infinity(), false};
  for (int c = 0; c < 8; ++c) {
    Mat3 m;
    for (int k = 0; k < 3; ++k) {
      const Vec3 e = p[hex_corner_neighbors[c][k]] - p[c];
      const double len = e.norm();
      if (len == 0.0) return {0.0, true};
      m.col(k) = e / len;
    }
    out.value = std::min(out.value, m.determinant());
  }
  return out;
}

inline double angle_deg(const Vec3& a, const Vec3& b) {
  // atan2 form stays accurate near 0 and 180 degrees.
  return std::atan2(a.cross(b).norm(), a.dot(b)) * 180.0 / pi;
}

/// Interior angles of a quadrilateral measured in 3D between adjacent edges.
inline AngleExtrema quad_angles(std::span<const Vec3, 4> p) {
  AngleExtrema out;
  for (int c = 0; c < 4; ++c) {
    const Vec3 a = p[(c + 1) % 4] - p[c];
    const Vec3 b = p[(c + 3) % 4] - p[c];
    if (a.norm() == 0.0 || b.norm() == 0.0) {
      out.degenerate = true;
      continue;
    }
    const double ang = angle_deg(a, b);
    out.min_deg = std::min(out.min_deg, ang);
    out.max_deg = std::max(out.max_deg, ang);
  }
  return out;
}

inline AngleExtrema tri_angles(std::span<const Vec3, 3> p) {
  AngleExtrema out;
  const double area2 = (p[1] - p[0]).cross(p[2] - p[0]).norm();
  double scale = 0.0;
  for (int c = 0; c < 3; ++c) scale = std::max(scale, (p[(c + 1) % 3] - p[c]).squaredNorm());
  if (scale == 0.0 || area2 <= 1e-14 * scale) out.degenerate = true;
  for (int c = 0; c < 3; ++c) {
    const Vec3 a = p[(c + 1) % 3] - p[c];
    const Vec3 b = p[(c + 2) % 3] - p[c];
    if (a.norm() == 0.0 || b.norm() == 0.0) {
      out.degenerate = true;
      continue;
    }
    const double ang = angle_deg(a, b);
    out.min_deg = std::min(out.min_deg, ang);
    out.max_deg = std::max(out.max_deg, ang);
  }
  return out;
}

/// Face-angle extrema over all 6 faces of a hexahedron.
inline AngleExtrema hex_face_angles(std::span<const Vec3, 8> p) {
  AngleExtrema out;
  for (const auto& f : hex_faces) {
    const std::array<Vec3, 4> q{p[f[0]], p[f[1]], p[f[2]], p[f[3]]};
    out.merge(quad_angles(q));
  }
  return out;
}

inline AngleExtrema tet_face_angles(std::span<const Vec3, 4> p) {
  AngleExtrema out;
  for (const auto& f : tet_faces) {
    const std::array<Vec3, 3> t{p[f[0]], p[f[1]], p[f[2]]};
    out.merge(tri_angles(t));
  }
  return out;
}

inline double tet_signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return (b - a).dot((c - a).cross(d - a)) / 6.0;
}

/// Volume of a regular tetrahedron with circumradius R: edge a = 4R/sqrt(6),
/// V = a^3 / (6 sqrt 2) = 8 R^3 / (9 sqrt 3).
inline double regular_tet_volume_from_circumradius(double R) {
  return 8.0 * R * R * R / (9.0 * std::sqrt(3.0));
}

/// Radius of the sphere through the four vertices (infinite when coplanar).
inline double tet_circumradius(std::span<const Vec3, 4> p) {
  const Vec3 a = p[1] - p[0], b = p[2] - p[0], c = p[3] - p[0];
  const double den = 2.0 * a.dot(b.cross(c));
  if (den == 0.0) return std::numeric_limits<double>::infinity();
  const Vec3 num = a.squaredNorm() * b.cross(c) + b.squaredNorm() * c.cross(a) + c.squaredNorm() * a.cross(b);
  return num.norm() / std::abs(den);
}

/// 1 - V / V_regular(R). Coplanar vertices give exactly 1 (flat element).
inline ElementMetric vol_skew_tet(std::span<const Vec3, 4> p) {
  double lmax2 = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) lmax2 = std::max(lmax2, (p[j] - p[i]).squaredNorm());
  const double v = std::abs(tet_signed_volume(p[0], p[1], p[2], p[3]));
  if (lmax2 == 0.0 || v <= 1e-14 * lmax2 * std::sqrt(lmax2)) return {1.0, true};
  const double R = tet_circumradius(p);
  const double ratio = v / regular_tet_volume_from_circumradius(R);
  return {std::clamp(1.0 - ratio, 0.0, 1.0), false};
}

/// Exact volume of a trilinear hexahedron (2x2x2 Gauss integrates det J exactly).
inline double hex_volume(std::span<const Vec3, 8> p) {
  static constexpr double xi[8][3] = {{-1, -1, -1}, {1, -1, -1}, {1, 1, -1}, {-1, 1, -1},
                                      {-1, -1, 1},  {1, -1, 1},  {1, 1, 1},  {-1, 1, 1}};
  const double g = 1.0 / std::sqrt(3.0);
  double vol = 0.0;
  for (int gp = 0; gp < 8; ++gp) {
    const double s[3] = {xi[gp][0] * g, xi[gp][1] * g, xi[gp][2] * g};
    Mat3 J = Mat3::Zero();
    for (int a = 0; a < 8; ++a) {
      const double d0 = 0.125 * xi[a][0] * (1 + xi[a][1] * s[1]) * (1 + xi[a][2] * s[2]);
      const double d1 = 0.125 * xi[a][1] * (1 + xi[a][0] * s[0]) * (1 + xi[a][2] * s[2]);
      const double d2 = 0.125 * xi[a][2] * (1 + xi[a][0] * s[0]) * (1 + xi[a][1] * s[1]);
      J.col(0) += d0 * p[a];
      J.col(1) += d1 * p[a];
      J.col(2) += d2 * p[a];
    }
    vol += J.determinant();
  }
  return vol;
}

}  // namespace hexwall

#endif  // HEXWALL_METRICS_HPP
