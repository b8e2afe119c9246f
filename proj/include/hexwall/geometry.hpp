#ifndef HEXWALL_GEOMETRY_HPP
#define HEXWALL_GEOMETRY_HPP

#include "hexwall/core.hpp"
#include "hexwall/stl.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <utility>
#include <vector>

namespace hexwall {

// ---------------------------------------------------------------------------
// Synthetic aneurysm geometry
// ---------------------------------------------------------------------------

/// Parameters of a synthetic fusiform aneurysm along +z (all lengths in mm).
/// Outer radius r(z) = base_radius + bulge_amplitude * g(z), with the Gaussian
/// factor g(z) = exp(-(z - bulge_center)^2 / (2 bulge_width^2)).
struct SyntheticAAASpec {
  double length = 100.0;
  double base_radius = 12.5;
  double bulge_amplitude = 15.0;
  double bulge_center = 50.0;
  double bulge_width = 20.0;
  double asymmetry_offset = 0.0;  // lateral (+x) shift of the cross-section centre, times g(z)
  int n_theta_facets = 128;
  int n_z_facets = 200;
  double lumen_radius = 10.0;
  double perturbation = 0.0;      // amplitude of seeded circumferential modes 2..4, times g(z)
  std::uint64_t seed = 0;

  double bulge_factor(double z) const {
    const double d = z - bulge_center;
    return std::exp(-d * d / (2.0 * bulge_width * bulge_width));
  }
  double radius(double z) const { return base_radius + bulge_amplitude * bulge_factor(z); }
  double max_diameter() const { return 2.0 * radius(std::clamp(bulge_center, 0.0, length)); }

  /// Throws GeometryError naming the first violated invariant.
  void validate() const {
    if (!(length > 0.0)) throw GeometryError("synthetic spec: length must be > 0");
    if (!(base_radius > 0.0)) throw GeometryError("synthetic spec: base_radius must be > 0");
    if (!(bulge_amplitude >= 0.0))
      throw GeometryError("synthetic spec: bulge_amplitude must be >= 0");
    if (!(bulge_width > 0.0)) throw GeometryError("synthetic spec: bulge_width must be > 0");
    if (!(lumen_radius > 0.0)) throw GeometryError("synthetic spec: lumen_radius must be > 0");
    if (!(lumen_radius < base_radius))
      throw GeometryError("synthetic spec: lumen_radius must be < base_radius (lumen >= wall)");
    if (n_theta_facets < 8 || n_z_facets < 8)
      throw GeometryError("synthetic spec: tessellation counts must be >= 8 (too coarse to slice)");
    if (!(perturbation >= 0.0) || perturbation >= base_radius)
      throw GeometryError("synthetic spec: perturbation must be in [0, base_radius)");
  }
};

/// Triangulated open tube. `point(theta, s)` maps angle in [0, 2pi) and axial
/// parameter s in [0, 1] to a surface point; rings are generated at uniform s and
/// theta. Triangles are wound with normals pointing away from the tube axis when
/// `point` is counter-clockwise in theta about the direction of increasing s.
template <class PointFn>
TriSurface make_tube(int n_theta, int n_s, PointFn&& point) {
  TriSurface s;
  s.vertices.reserve(static_cast<std::size_t>(n_theta) * (n_s + 1));
  for (int l = 0; l <= n_s; ++l)
    for (int m = 0; m < n_theta; ++m)
      s.vertices.push_back(point(2.0 * pi * m / n_theta, static_cast<double>(l) / n_s));
  auto vid = [n_theta](int l, int m) { return l * n_theta + (m % n_theta); };
  for (int l = 0; l < n_s; ++l)
    for (int m = 0; m < n_theta; ++m) {
      s.triangles.push_back({vid(l, m), vid(l, m + 1), vid(l + 1, m + 1)});
      s.triangles.push_back({vid(l, m), vid(l + 1, m + 1), vid(l + 1, m)});
    }
  return s;
}

struct SyntheticAAA {
  TriSurface wall_outer;
  TriSurface lumen;
};

namespace detail {

struct PerturbationModes {
  std::array<double, 3> amplitude{};
  std::array<double, 3> phase{};

  PerturbationModes(std::uint64_t seed, double scale) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> amp(0.5, 1.0);
    std::uniform_real_distribution<double> ph(0.0, 2.0 * pi);
    double total = 0.0;
    for (int k = 0; k < 3; ++k) {
      amplitude[k] = amp(rng);
      phase[k] = ph(rng);
      total += amplitude[k];
    }
    for (auto& a : amplitude) a *= scale / total;
  }

  double operator()(double theta) const {
    double v = 0.0;
    for (int k = 0; k < 3; ++k) v += amplitude[k] * std::cos((k + 2) * theta + phase[k]);
    return v;
  }
};

}  // namespace detail

/// Outer wall and lumen surfaces of a synthetic aneurysm, open at both ends.
inline SyntheticAAA synth_aaa(const SyntheticAAASpec& spec) {
  spec.validate();
  const detail::PerturbationModes modes(spec.seed, spec.perturbation);
  SyntheticAAA out;
  out.wall_outer = make_tube(spec.n_theta_facets, spec.n_z_facets, [&](double th, double s) {
    const double z = s * spec.length;
    const double g = spec.bulge_factor(z);
    const double r = spec.radius(z) + g * modes(th);
    return Vec3(spec.asymmetry_offset * g + r * std::cos(th), r * std::sin(th), z);
  });
  out.lumen = make_tube(spec.n_theta_facets, spec.n_z_facets, [&](double th, double s) {
    return Vec3(spec.lumen_radius * std::cos(th), spec.lumen_radius * std::sin(th), s * spec.length);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Plane sections
// ---------------------------------------------------------------------------

/// Intersection of a triangle surface with a plane. Closed loops and open
/// chains are returned as ordered point lists (loops are not repeated at the end).
struct PlaneSection {
  std::vector<std::vector<Vec3>> loops;
  std::vector<std::vector<Vec3>> chains;

  std::size_t segment_count() const {
    std::size_t n = 0;
    for (const auto& l : loops) n += l.size();
    for (const auto& c : chains) n += c.empty() ? 0 : c.size() - 1;
    return n;
  }
};

/// Vertices lying exactly on the plane are treated as offset by +1e-9 mm along
/// `normal`, so every edge is classified deterministically.
inline PlaneSection plane_section(const TriSurface& surf, const Vec3& origin, const Vec3& normal) {
  constexpr double on_plane_shift = 1e-9;
  std::vector<double> dist(surf.vertices.size());
  for (std::size_t v = 0; v < surf.vertices.size(); ++v) {
    double d = (surf.vertices[v] - origin).dot(normal);
    dist[v] = (d == 0.0) ? on_plane_shift : d;
  }
  using EdgeKey = std::pair<int, int>;
  auto key = [](int a, int b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; };
  auto cut_point = [&](int a, int b) {
    const double t = dist[a] / (dist[a] - dist[b]);
    return Vec3(surf.vertices[a] + t * (surf.vertices[b] - surf.vertices[a]));
  };

  // Each crossing triangle contributes one directed segment from the edge where
  // the boundary walk goes - to + (entry) to the edge where it goes + to - (exit).
  struct Segment {
    EdgeKey from, to;
  };
  std::vector<Segment> segments;
  std::map<EdgeKey, Vec3> points;
  for (const auto& tri : surf.triangles) {
    std::optional<EdgeKey> entry, exit;
    for (int k = 0; k < 3; ++k) {
      const int a = tri[k], b = tri[(k + 1) % 3];
      const bool pa = dist[a] > 0.0, pb = dist[b] > 0.0;
      if (pa == pb) continue;
      const EdgeKey e = key(a, b);
      if (!points.count(e)) points.emplace(e, cut_point(e.first, e.second));
      if (!pa && pb) entry = e;
      else exit = e;
    }
    if (entry && exit) segments.push_back({*entry, *exit});
  }

  std::map<EdgeKey, std::size_t> starting_at;
  std::map<EdgeKey, std::size_t> ending_at;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    starting_at[segments[i].from] = i;
    ending_at[segments[i].to] = i;
  }

  PlaneSection out;
  std::vector<char> used(segments.size(), 0);
  // Open chains first: start at segments whose entry point has no predecessor.
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (used[i] || ending_at.count(segments[i].from)) continue;
    std::vector<Vec3> chain{points.at(segments[i].from)};
    std::size_t cur = i;
    while (true) {
      used[cur] = 1;
      chain.push_back(points.at(segments[cur].to));
      auto it = starting_at.find(segments[cur].to);
      if (it == starting_at.end() || used[it->second]) break;
      cur = it->second;
    }
    out.chains.push_back(std::move(chain));
  }
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (used[i]) continue;
    std::vector<Vec3> loop;
    std::size_t cur = i;
    while (!used[cur]) {
      used[cur] = 1;
      loop.push_back(points.at(segments[cur].from));
      auto it = starting_at.find(segments[cur].to);
      if (it == starting_at.end()) break;
      cur = it->second;
    }
    out.loops.push_back(std::move(loop));
  }
  return out;
}

/// Any unit vector perpendicular to `t`, chosen deterministically.
inline Vec3 any_perpendicular(const Vec3& t) {
  const Vec3 a = std::abs(t.x()) <= std::abs(t.y()) && std::abs(t.x()) <= std::abs(t.z())
                     ? Vec3::UnitX()
                     : (std::abs(t.y()) <= std::abs(t.z()) ? Vec3::UnitY() : Vec3::UnitZ());
  return (a - a.dot(t) * t).normalized();
}

struct PolygonMoments {
  double area = 0.0;  // signed, positive when counter-clockwise about the plane normal
  Vec3 centroid = Vec3::Zero();
};

/// Area and area-weighted centroid of a planar polygon lying in the plane with normal `n`.
inline PolygonMoments polygon_moments(const std::vector<Vec3>& poly, const Vec3& n) {
  PolygonMoments m;
  if (poly.size() < 3) return m;
  const Vec3 u = any_perpendicular(n);
  const Vec3 v = n.cross(u);
  Vec3 ref = Vec3::Zero();
  for (const auto& p : poly) ref += p;
  ref /= static_cast<double>(poly.size());
  double a2 = 0.0, cx = 0.0, cy = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec3 p = poly[i] - ref, q = poly[(i + 1) % poly.size()] - ref;
    const double x0 = p.dot(u), y0 = p.dot(v), x1 = q.dot(u), y1 = q.dot(v);
    const double cr = x0 * y1 - x1 * y0;
    a2 += cr;
    cx += (x0 + x1) * cr;
    cy += (y0 + y1) * cr;
  }
  m.area = 0.5 * a2;
  m.centroid = ref;
  if (a2 != 0.0) m.centroid += (cx / (3.0 * a2)) * u + (cy / (3.0 * a2)) * v;
  return m;
}

// ---------------------------------------------------------------------------
// Centerline
// ---------------------------------------------------------------------------

/// Ordered axis points with rotation-minimizing frames. For every point,
/// (normals[i], binormals[i], tangents[i]) is a right-handed orthonormal basis.
struct Centerline {
  std::vector<Vec3> points;
  std::vector<Vec3> tangents;
  std::vector<Vec3> normals;
  std::vector<Vec3> binormals;

  std::size_t size() const { return points.size(); }

  double length() const {
    double len = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) len += (points[i] - points[i - 1]).norm();
    return len;
  }
};

/// Tangents by central differences (one-sided at the ends), then frames by
/// parallel transport: each normal is carried by the minimal rotation taking
/// the previous tangent to the next one.
inline Centerline make_centerline(std::vector<Vec3> points,
                                  const std::optional<Vec3>& first_normal = std::nullopt) {
  const std::size_t n = points.size();
  if (n < 2) throw GeometryError("centerline needs at least 2 points");
  for (std::size_t i = 1; i < n; ++i)
    if ((points[i] - points[i - 1]).norm() == 0.0)
      throw GeometryError("centerline points " + std::to_string(i - 1) + " and " +
                          std::to_string(i) + " coincide");
  Centerline c;
  c.points = std::move(points);
  c.tangents.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& a = c.points[i == 0 ? 0 : i - 1];
    const Vec3& b = c.points[i + 1 == n ? n - 1 : i + 1];
    c.tangents[i] = (b - a).normalized();
  }
  c.normals.resize(n);
  c.binormals.resize(n);
  Vec3 nrm = first_normal ? Vec3(*first_normal - first_normal->dot(c.tangents[0]) * c.tangents[0])
                          : any_perpendicular(c.tangents[0]);
  nrm.normalize();
  c.normals[0] = nrm;
  c.binormals[0] = c.tangents[0].cross(nrm);
  for (std::size_t i = 1; i < n; ++i) {
    const Eigen::Quaterniond q = Eigen::Quaterniond::FromTwoVectors(c.tangents[i - 1], c.tangents[i]);
    Vec3 ni = q * c.normals[i - 1];
    ni -= ni.dot(c.tangents[i]) * c.tangents[i];
    ni.normalize();
    c.normals[i] = ni;
    c.binormals[i] = c.tangents[i].cross(ni);
  }
  return c;
}

struct CenterlineOptions {
  /// Slices span [min + inset, max - inset] of the surface extent along the axis
  /// hint, inset = inset_fraction * extent, unless `range` is given explicitly.
  double inset_fraction = 0.005;
  std::optional<std::pair<double, double>> range;
};

/// Centroids of planar cuts orthogonal to `axis_hint`.
inline Centerline extract_centerline(const TriSurface& surface, const Vec3& axis_hint, int n_slices,
                                     const CenterlineOptions& opts = {}) {
  if (n_slices < 2) throw GeometryError("extract_centerline: n_slices must be >= 2");
  if (surface.vertices.empty()) throw GeometryError("extract_centerline: empty surface");
  const Vec3 axis = axis_hint.normalized();
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& v : surface.vertices) {
    lo = std::min(lo, v.dot(axis));
    hi = std::max(hi, v.dot(axis));
  }
  if (!(hi > lo)) throw GeometryError("extract_centerline: surface has no extent along the axis hint");
  double a = lo + opts.inset_fraction * (hi - lo), b = hi - opts.inset_fraction * (hi - lo);
  if (opts.range) std::tie(a, b) = *opts.range;

  std::vector<Vec3> pts;
  pts.reserve(n_slices);
  for (int k = 0; k < n_slices; ++k) {
    const double s = a + (b - a) * k / (n_slices - 1);
    const Vec3 origin = s * axis;
    const PlaneSection sec = plane_section(surface, origin, axis);
    if (sec.loops.size() != 1 || !sec.chains.empty())
      throw GeometryError("multi-branch slice: plane " + std::to_string(k) + " at s=" +
                          format_double(s) + " cuts " + std::to_string(sec.loops.size()) +
                          " closed loop(s) and " + std::to_string(sec.chains.size()) +
                          " open chain(s); exactly one closed loop is required");
    pts.push_back(polygon_moments(sec.loops[0], axis).centroid);
  }
  return make_centerline(std::move(pts));
}

// ---------------------------------------------------------------------------
// Radial slice profiles
// ---------------------------------------------------------------------------

/// Radii of a surface along uniformly spaced rays in a centerline frame plane.
/// Ray m points along cos(angles[m]) * normal + sin(angles[m]) * binormal.
struct SliceProfile {
  Vec3 center = Vec3::Zero();
  Vec3 normal = Vec3::UnitX();
  Vec3 binormal = Vec3::UnitY();
  std::vector<double> angles;
  std::vector<double> radii;

  std::size_t size() const { return radii.size(); }
  Vec3 tangent() const { return normal.cross(binormal); }
  Vec3 direction(std::size_t m) const {
    return std::cos(angles[m]) * normal + std::sin(angles[m]) * binormal;
  }
  Vec3 point(std::size_t m, double r) const { return center + r * direction(m); }

  /// Area of the polygon through the ray end points.
  double polygon_area() const {
    double a = 0.0;
    const std::size_t n = radii.size();
    for (std::size_t m = 0; m < n; ++m) {
      const std::size_t q = (m + 1) % n;
      const double dth = q == 0 ? angles[0] + 2.0 * pi - angles[m] : angles[q] - angles[m];
      a += 0.5 * radii[m] * radii[q] * std::sin(dth);
    }
    return a;
  }
};

inline std::vector<double> uniform_angles(int n_theta) {
  std::vector<double> a(n_theta);
  for (int m = 0; m < n_theta; ++m) a[m] = 2.0 * pi * m / n_theta;
  return a;
}

/// Distance along each frame-plane ray to the first surface crossing.
inline std::vector<SliceProfile> slice_profiles(const TriSurface& surface, const Centerline& cl,
                                                int n_theta) {
  if (n_theta < 8) throw GeometryError("slice_profiles: n_theta must be >= 8");
  const std::vector<double> angles = uniform_angles(n_theta);
  std::vector<SliceProfile> out(cl.size());
  std::vector<std::string> errors(cl.size());
  parallel_for(cl.size(), [&](std::size_t j) {
    SliceProfile& p = out[j];
    p.center = cl.points[j];
    p.normal = cl.normals[j];
    p.binormal = cl.binormals[j];
    p.angles = angles;
    p.radii.assign(n_theta, 0.0);
    const PlaneSection sec = plane_section(surface, cl.points[j], cl.tangents[j]);
    std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>> segs;
    auto to2d = [&](const Vec3& q) {
      const Vec3 d = q - p.center;
      return Eigen::Vector2d(d.dot(p.normal), d.dot(p.binormal));
    };
    for (const auto& loop : sec.loops)
      for (std::size_t i = 0; i < loop.size(); ++i)
        segs.emplace_back(to2d(loop[i]), to2d(loop[(i + 1) % loop.size()]));
    for (const auto& chain : sec.chains)
      for (std::size_t i = 0; i + 1 < chain.size(); ++i) segs.emplace_back(to2d(chain[i]), to2d(chain[i + 1]));
    for (int m = 0; m < n_theta; ++m) {
      const Eigen::Vector2d d(std::cos(angles[m]), std::sin(angles[m]));
      double best = std::numeric_limits<double>::infinity();
      for (const auto& [a, b] : segs) {
        const Eigen::Vector2d e = b - a;
        const double den = d.x() * (-e.y()) - d.y() * (-e.x());
        if (den == 0.0) continue;
        // Solve s*d = a + u*e for (s, u).
        const double s = (a.x() * (-e.y()) - a.y() * (-e.x())) / den;
        const double u = (d.x() * a.y() - d.y() * a.x()) / den;
        // Tolerant end test: a ray through a polygon vertex must hit one of its two segments.
        if (s > 0.0 && u >= -1e-9 && u <= 1.0 + 1e-9) best = std::min(best, s);
      }
      if (!std::isfinite(best)) {
        errors[j] = "non-star-shaped slice: ray at slice " + std::to_string(j) + ", angle index " +
                    std::to_string(m) + " (" + format_double(angles[m]) +
                    " rad) misses the surface";
        return;
      }
      p.radii[m] = best;
    }
  });
  for (const auto& e : errors)
    if (!e.empty()) throw GeometryError(e);
  return out;
}

struct SmoothedProfiles {
  std::vector<SliceProfile> profiles;
  /// Change of enclosed volume attributed to each slice (mm^3): polygon area
  /// change times the mean spacing to the adjacent slices.
  std::vector<double> volume_change;
};

/// Jacobi-style Laplace smoothing of the radius field over (slice, angle);
/// first and last slices are held fixed, angles wrap around.
inline SmoothedProfiles smooth_profiles(const std::vector<SliceProfile>& profiles, int iterations,
                                        double lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0))
    throw GeometryError("smooth_profiles: lambda must be in (0, 1]");
  if (iterations < 0) throw GeometryError("smooth_profiles: iterations must be >= 0");
  SmoothedProfiles out{profiles, std::vector<double>(profiles.size(), 0.0)};
  const std::size_t ns = profiles.size();
  if (ns == 0) return out;
  const std::size_t nt = profiles[0].size();
  for (const auto& p : profiles)
    if (p.size() != nt) throw GeometryError("smooth_profiles: profiles must share n_theta");
  for (int it = 0; it < iterations; ++it) {
    std::vector<SliceProfile> next = out.profiles;
    for (std::size_t j = 1; j + 1 < ns; ++j)
      for (std::size_t m = 0; m < nt; ++m) {
        const auto& r = out.profiles;
        const double avg = 0.25 * (r[j].radii[(m + 1) % nt] + r[j].radii[(m + nt - 1) % nt] +
                                   r[j - 1].radii[m] + r[j + 1].radii[m]);
        next[j].radii[m] = r[j].radii[m] + lambda * (avg - r[j].radii[m]);
      }
    out.profiles = std::move(next);
  }
  for (std::size_t j = 0; j < ns; ++j) {
    double spacing = 0.0;
    int count = 0;
    if (j > 0) spacing += (profiles[j].center - profiles[j - 1].center).norm(), ++count;
    if (j + 1 < ns) spacing += (profiles[j + 1].center - profiles[j].center).norm(), ++count;
    if (count) spacing /= count;
    out.volume_change[j] = (out.profiles[j].polygon_area() - profiles[j].polygon_area()) * spacing;
  }
  return out;
}

}  // namespace hexwall

#endif  // HEXWALL_GEOMETRY_HPP
