#ifndef HEXWALL_HEXMESHER_HPP
#define HEXWALL_HEXMESHER_HPP

#include "hexwall/core.hpp"
#include "hexwall/geometry.hpp"
#include "hexwall/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace hexwall {

struct MeshParams {
  double wall_thickness = 1.5;       // mm
  int n_layers = 2;                  // elements through the thickness
  double target_element_size = 0.75; // mm
  int n_theta = 0;                   // 0 = auto
  int n_axial = 0;                   // 0 = auto
  bool offset_inward = true;         // profiles describe the outer wall; wall grows inward

  double radial_size() const { return wall_thickness / n_layers; }

  void validate() const {
    if (!(wall_thickness > 0.0)) throw MeshError("mesh params: wall_thickness must be > 0");
    if (n_layers < 1) throw MeshError("mesh params: n_layers must be >= 1");
    if (!(target_element_size > 0.0)) throw MeshError("mesh params: target_element_size must be > 0");
    if (n_theta != 0 && n_theta < 8) throw MeshError("mesh params: n_theta must be 0 (auto) or >= 8");
    if (n_axial < 0) throw MeshError("mesh params: n_axial must be >= 0");
  }

  /// round-half-up(2 pi r / size), at least 8, bumped to the next even number.
  int resolve_n_theta(double mean_radius) const {
    if (n_theta > 0) return n_theta;
    int n = static_cast<int>(std::floor(2.0 * pi * mean_radius / target_element_size + 0.5));
    n = std::max(n, 8);
    return n % 2 ? n + 1 : n;
  }

  /// round-half-up(length / size), at least 2.
  int resolve_n_axial(double length) const {
    if (n_axial > 0) return n_axial;
    return std::max(2, static_cast<int>(std::floor(length / target_element_size + 0.5)));
  }
};

/// Structured (slice, angle, depth) indexing. Depth k = 0 is the outer wall,
/// k = n_layers the inner wall. Node ids are k-fastest so each through-thickness
/// column is contiguous.
struct WallLattice {
  int n_slices = 0;
  int n_theta = 0;
  int n_layers = 0;

  int depth_nodes() const { return n_layers + 1; }
  int node(int j, int i, int k) const {
    return (j * n_theta + ((i % n_theta) + n_theta) % n_theta) * depth_nodes() + k;
  }
  int hex(int j, int i, int k) const { return (j * n_theta + i) * n_layers + k; }
  std::size_t node_count() const {
    return static_cast<std::size_t>(n_slices) * n_theta * depth_nodes();
  }
  std::size_t hex_count() const {
    return static_cast<std::size_t>(n_slices - 1) * n_theta * n_layers;
  }
};

/// Multi-layer structured hexahedral wall. Node sets are sorted node ids; face
/// sets are quads wound with normals pointing out of the wall.
struct HexWallMesh {
  std::vector<Vec3> nodes;
  std::vector<Hex> hexes;
  std::vector<int> inner_surface, outer_surface, top_ring, bottom_ring;
  std::vector<Quad> inner_faces, outer_faces;
  WallLattice lattice;

  std::array<Vec3, 8> corners(std::size_t e) const {
    std::array<Vec3, 8> p;
    for (int a = 0; a < 8; ++a) p[a] = nodes[hexes[e][a]];
    return p;
  }

  /// Node set by its exported name (INNER_SURFACE, OUTER_SURFACE, TOP_RING, BOTTOM_RING).
  const std::vector<int>& node_set(const std::string& name) const {
    if (name == "INNER_SURFACE") return inner_surface;
    if (name == "OUTER_SURFACE") return outer_surface;
    if (name == "TOP_RING") return top_ring;
    if (name == "BOTTOM_RING") return bottom_ring;
    throw MeshError("unknown wall node set '" + name + "'");
  }
};

/// Planar node grid of one slice: points[i * (n_layers + 1) + k].
struct RingGrid {
  int n_theta = 0;
  int n_layers = 0;
  std::vector<Vec3> points;

  const Vec3& at(int i, int k) const { return points[static_cast<std::size_t>(i) * (n_layers + 1) + k]; }
};

inline RingGrid build_ring(const SliceProfile& profile, const MeshParams& params,
                           int slice_index = -1) {
  params.validate();
  RingGrid g;
  g.n_theta = static_cast<int>(profile.size());
  g.n_layers = params.n_layers;
  g.points.reserve(static_cast<std::size_t>(g.n_theta) * (g.n_layers + 1));
  const double h = params.radial_size();
  for (int i = 0; i < g.n_theta; ++i) {
    const double r = profile.radii[i];
    const double inner = params.offset_inward ? r - params.wall_thickness : r;
    if (!(inner > 0.0))
      throw MeshError("wall self-intersection: inner radius " + format_double(inner) +
                      " <= 0 at slice " + std::to_string(slice_index) + ", angle index " +
                      std::to_string(i) + " (outer radius " + format_double(r) +
                      ", thickness " + format_double(params.wall_thickness) + ")");
    const double outer = params.offset_inward ? r : r + params.wall_thickness;
    for (int k = 0; k <= g.n_layers; ++k) g.points.push_back(profile.point(i, outer - k * h));
  }
  return g;
}

// ---------------------------------------------------------------------------
// Overlap detection
// ---------------------------------------------------------------------------

struct OverlapItem {
  std::size_t slice_a = 0, slice_b = 0;
  int angle_index = 0;
  double clearance = 0.0;  // axial advance of the outer ring point, relative to the centre spacing
  bool crossing = false;   // true: error (rings cross); false: warning (clearance < 10%)
};

struct OverlapReport {
  std::vector<OverlapItem> items;
  bool has_errors() const {
    return std::any_of(items.begin(), items.end(), [](const auto& i) { return i.crossing; });
  }
  std::size_t error_count() const {
    return static_cast<std::size_t>(
        std::count_if(items.begin(), items.end(), [](const auto& i) { return i.crossing; }));
  }
};

/// For each adjacent slice pair, measures how far every outer ring point advances
/// along the mean tangent relative to the centre-to-centre advance. A
/// non-positive advance means the radial segments of the two rings cross (the
/// hexahedra between them would invert); an advance below 10% is a warning.
/// One item per offending pair, for its worst angle. `outer_offset` is added to
/// the profile radii (wall thickness when the wall grows outward).
inline OverlapReport detect_overlap(const std::vector<Vec3>& tangents,
                                    const std::vector<SliceProfile>& profiles,
                                    double outer_offset = 0.0, double warn_fraction = 0.1) {
  OverlapReport rep;
  for (std::size_t j = 0; j + 1 < profiles.size(); ++j) {
    const auto& a = profiles[j];
    const auto& b = profiles[j + 1];
    const Vec3 t = (tangents[j] + tangents[j + 1]).normalized();
    const double h = (b.center - a.center).dot(t);
    if (!(h > 0.0)) {
      rep.items.push_back({j, j + 1, 0, 0.0, true});
      continue;
    }
    const std::size_t n = std::min(a.size(), b.size());
    double worst = std::numeric_limits<double>::infinity();
    int worst_m = 0;
    for (std::size_t m = 0; m < n; ++m) {
      const double adv =
          (b.point(m, b.radii[m] + outer_offset) - a.point(m, a.radii[m] + outer_offset)).dot(t) / h;
      if (adv < worst) worst = adv, worst_m = static_cast<int>(m);
    }
    if (worst <= 0.0)
      rep.items.push_back({j, j + 1, worst_m, worst, true});
    else if (worst < warn_fraction)
      rep.items.push_back({j, j + 1, worst_m, worst, false});
  }
  return rep;
}

inline OverlapReport detect_overlap(const Centerline& cl, const std::vector<SliceProfile>& profiles,
                                    double outer_offset = 0.0) {
  return detect_overlap(cl.tangents, profiles, outer_offset);
}

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

/// Stacks one ring per profile and connects consecutive rings with hexahedra.
inline HexWallMesh sweep(const std::vector<SliceProfile>& profiles, const MeshParams& params) {
  params.validate();
  if (profiles.size() < 2) throw MeshError("sweep: at least 2 profiles are required");
  const int nt = static_cast<int>(profiles[0].size());
  for (std::size_t j = 0; j < profiles.size(); ++j)
    if (static_cast<int>(profiles[j].size()) != nt)
      throw MeshError("sweep: profile " + std::to_string(j) + " has a different n_theta");

  std::vector<Vec3> tangents;
  for (const auto& p : profiles) tangents.push_back(p.tangent());
  const auto overlap =
      detect_overlap(tangents, profiles, params.offset_inward ? 0.0 : params.wall_thickness);
  if (overlap.has_errors()) {
    std::string pairs;
    for (const auto& it : overlap.items)
      if (it.crossing) {
        if (!pairs.empty()) pairs += ", ";
        pairs += "(" + std::to_string(it.slice_a) + "," + std::to_string(it.slice_b) + ")";
      }
    throw MeshError("adjacent rings intersect at slice pairs " + pairs +
                    "; use more slices, smooth the profiles, or reduce centerline curvature");
  }

  HexWallMesh mesh;
  mesh.lattice = WallLattice{static_cast<int>(profiles.size()), nt, params.n_layers};
  const WallLattice& L = mesh.lattice;
  mesh.nodes.reserve(L.node_count());
  for (std::size_t j = 0; j < profiles.size(); ++j) {
    const RingGrid ring = build_ring(profiles[j], params, static_cast<int>(j));
    mesh.nodes.insert(mesh.nodes.end(), ring.points.begin(), ring.points.end());
  }
  mesh.hexes.reserve(L.hex_count());
  for (int j = 0; j + 1 < L.n_slices; ++j)
    for (int i = 0; i < nt; ++i)
      for (int k = 0; k < L.n_layers; ++k) {
        // local axes: radial outward (k+1 -> k), angle (i -> i+1), axial (j -> j+1)
        mesh.hexes.push_back({L.node(j, i, k + 1), L.node(j, i, k), L.node(j, i + 1, k),
                              L.node(j, i + 1, k + 1), L.node(j + 1, i, k + 1), L.node(j + 1, i, k),
                              L.node(j + 1, i + 1, k), L.node(j + 1, i + 1, k + 1)});
      }
  for (int j = 0; j < L.n_slices; ++j)
    for (int i = 0; i < nt; ++i) {
      mesh.outer_surface.push_back(L.node(j, i, 0));
      mesh.inner_surface.push_back(L.node(j, i, L.n_layers));
      for (int k = 0; k <= L.n_layers; ++k) {
        if (j == 0) mesh.bottom_ring.push_back(L.node(j, i, k));
        if (j == L.n_slices - 1) mesh.top_ring.push_back(L.node(j, i, k));
      }
    }
  for (auto* set : {&mesh.outer_surface, &mesh.inner_surface, &mesh.bottom_ring, &mesh.top_ring})
    std::sort(set->begin(), set->end());
  for (int j = 0; j + 1 < L.n_slices; ++j)
    for (int i = 0; i < nt; ++i) {
      const auto& inner = mesh.hexes[L.hex(j, i, L.n_layers - 1)];
      const auto& outer = mesh.hexes[L.hex(j, i, 0)];
      mesh.inner_faces.push_back({inner[hex_faces[0][0]], inner[hex_faces[0][1]],
                                  inner[hex_faces[0][2]], inner[hex_faces[0][3]]});
      mesh.outer_faces.push_back({outer[hex_faces[1][0]], outer[hex_faces[1][1]],
                                  outer[hex_faces[1][2]], outer[hex_faces[1][3]]});
    }
  return mesh;
}

// ---------------------------------------------------------------------------
// Smoothing
// ---------------------------------------------------------------------------

inline double min_scaled_jacobian(const HexWallMesh& mesh, std::size_t* worst = nullptr) {
  std::vector<double> sj(mesh.hexes.size());
  parallel_for(mesh.hexes.size(), [&](std::size_t e) {
    const auto p = mesh.corners(e);
    sj[e] = scaled_jacobian_hex(p).value;
  });
  auto it = std::min_element(sj.begin(), sj.end());
  if (worst) *worst = static_cast<std::size_t>(it - sj.begin());
  return it == sj.end() ? 1.0 : *it;
}

struct MeshSmoothResult {
  HexWallMesh mesh;
  int iterations_applied = 0;
  bool rolled_back = false;           // an iteration was undone and smoothing stopped
  std::size_t worst_element = 0;      // worst element of the rejected iteration
  double min_jacobian_before = 0.0;
  double min_jacobian_after = 0.0;
};

/// Laplace smoothing restricted to the wall lattice: inner/outer surface nodes and
/// the end rings stay fixed; every interior node slides along the segment between
/// its column's outer and inner node, and its depth fraction on that segment is
/// relaxed toward the mean depth fraction of its edge neighbours. An iteration
/// that would lower the minimum scaled Jacobian (or create a non-positive one)
/// is rolled back and smoothing stops.
inline MeshSmoothResult laplace_smooth_mesh(const HexWallMesh& mesh, int iterations, double lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw MeshError("laplace_smooth_mesh: lambda must be in (0, 1]");
  MeshSmoothResult res{mesh};
  const WallLattice& L = mesh.lattice;
  res.min_jacobian_before = min_scaled_jacobian(mesh);
  res.min_jacobian_after = res.min_jacobian_before;
  if (L.n_layers < 2 || L.n_slices < 3) return res;

  auto depth = [&](const HexWallMesh& m, int j, int i, int k) {
    const Vec3& o = m.nodes[L.node(j, i, 0)];
    const Vec3& in = m.nodes[L.node(j, i, L.n_layers)];
    return (m.nodes[L.node(j, i, k)] - o).dot(in - o) / (in - o).squaredNorm();
  };
  for (int it = 0; it < iterations; ++it) {
    HexWallMesh next = res.mesh;
    for (int j = 1; j + 1 < L.n_slices; ++j)
      for (int i = 0; i < L.n_theta; ++i)
        for (int k = 1; k < L.n_layers; ++k) {
          const double f = depth(res.mesh, j, i, k);
          const double avg = (depth(res.mesh, j, i, k - 1) + depth(res.mesh, j, i, k + 1) +
                              depth(res.mesh, j - 1, i, k) + depth(res.mesh, j + 1, i, k) +
                              depth(res.mesh, j, i - 1, k) + depth(res.mesh, j, i + 1, k)) / 6.0;
          const double fn = f + lambda * (avg - f);
          const Vec3& o = res.mesh.nodes[L.node(j, i, 0)];
          const Vec3& in = res.mesh.nodes[L.node(j, i, L.n_layers)];
          next.nodes[L.node(j, i, k)] = o + fn * (in - o);
        }
    std::size_t worst = 0;
    const double mj = min_scaled_jacobian(next, &worst);
    if (mj <= 0.0 || mj < res.min_jacobian_before - 1e-12) {
      res.rolled_back = true;
      res.worst_element = worst;
      break;
    }
    res.mesh = std::move(next);
    res.min_jacobian_after = mj;
    ++res.iterations_applied;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Quadratic promotion and surfaces
// ---------------------------------------------------------------------------

/// Corner nodes keep their ids; one mid-edge node per unique edge is appended in
/// order of first appearance (element order, then local edge order).
template <std::size_t NCorner, std::size_t NEdge>
std::pair<std::vector<Vec3>, std::vector<std::array<int, NCorner + NEdge>>> promote_quadratic(
    const std::vector<Vec3>& nodes, const std::vector<std::array<int, NCorner>>& elements,
    const std::array<std::array<int, 2>, NEdge>& edges) {
  std::vector<Vec3> out_nodes = nodes;
  std::vector<std::array<int, NCorner + NEdge>> out(elements.size());
  std::unordered_map<std::uint64_t, int> mid;
  mid.reserve(elements.size() * NEdge / 2);
  for (std::size_t e = 0; e < elements.size(); ++e) {
    for (std::size_t a = 0; a < NCorner; ++a) out[e][a] = elements[e][a];
    for (std::size_t k = 0; k < NEdge; ++k) {
      int a = elements[e][edges[k][0]], b = elements[e][edges[k][1]];
      const std::uint64_t key = (static_cast<std::uint64_t>(std::min(a, b)) << 32) |
                                static_cast<std::uint32_t>(std::max(a, b));
      auto [it, inserted] = mid.try_emplace(key, static_cast<int>(out_nodes.size()));
      if (inserted) out_nodes.push_back(0.5 * (nodes[a] + nodes[b]));
      out[e][NCorner + k] = it->second;
    }
  }
  return {std::move(out_nodes), std::move(out)};
}

/// 20-node hexahedra. Nodes 0-7 are the corners (library ordering); nodes 8-19 are
/// mid-edge nodes on edges 0-1, 1-2, 2-3, 3-0, 4-5, 5-6, 6-7, 7-4, 0-4, 1-5, 2-6,
/// 3-7 (VTK type 25 and Abaqus C3D20 ordering).
struct Hex20Mesh {
  std::vector<Vec3> nodes;
  std::vector<std::array<int, 20>> elements;
  std::size_t corner_node_count = 0;
  std::vector<int> inner_surface, outer_surface, top_ring, bottom_ring;
};

namespace detail {
/// Extends a corner node set with mid-edge nodes whose both end points are in it.
template <std::size_t NCorner, std::size_t NEdge>
std::vector<int> extend_set(const std::vector<int>& set,
                            const std::vector<std::array<int, NCorner + NEdge>>& elements,
                            const std::array<std::array<int, 2>, NEdge>& edges) {
  std::vector<char> in;
  for (int v : set) {
    if (static_cast<std::size_t>(v) >= in.size()) in.resize(v + 1, 0);
    in[v] = 1;
  }
  auto member = [&](int v) { return static_cast<std::size_t>(v) < in.size() && in[v]; };
  std::vector<int> out = set;
  for (const auto& el : elements)
    for (std::size_t k = 0; k < NEdge; ++k)
      if (member(el[edges[k][0]]) && member(el[edges[k][1]])) out.push_back(el[NCorner + k]);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}
}  // namespace detail

inline Hex20Mesh promote_to_hex20(const HexWallMesh& mesh) {
  auto [nodes, elements] = promote_quadratic<8, 12>(mesh.nodes, mesh.hexes, hex_edges);
  Hex20Mesh out;
  out.nodes = std::move(nodes);
  out.elements = std::move(elements);
  out.corner_node_count = mesh.nodes.size();
  out.inner_surface = detail::extend_set<8, 12>(mesh.inner_surface, out.elements, hex_edges);
  out.outer_surface = detail::extend_set<8, 12>(mesh.outer_surface, out.elements, hex_edges);
  out.top_ring = detail::extend_set<8, 12>(mesh.top_ring, out.elements, hex_edges);
  out.bottom_ring = detail::extend_set<8, 12>(mesh.bottom_ring, out.elements, hex_edges);
  return out;
}

enum class WallSide { Inner, Outer };

/// Quads referencing volume-mesh node ids, wound with normals pointing out of the wall.
struct QuadSurface {
  std::vector<Quad> quads;
};

inline QuadSurface extract_surface(const HexWallMesh& mesh, WallSide which) {
  return QuadSurface{which == WallSide::Inner ? mesh.inner_faces : mesh.outer_faces};
}

/// Area of a bilinear quad (2x2 Gauss).
inline double quad_area(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  const double g = 1.0 / std::sqrt(3.0);
  double area = 0.0;
  for (double s : {-g, g})
    for (double t : {-g, g}) {
      const Vec3 xs = 0.25 * ((1 - t) * (b - a) + (1 + t) * (c - d));
      const Vec3 xt = 0.25 * ((1 - s) * (d - a) + (1 + s) * (c - b));
      area += xs.cross(xt).norm();
    }
  return area;
}

inline double surface_area(const std::vector<Vec3>& nodes, const QuadSurface& s) {
  double a = 0.0;
  for (const auto& q : s.quads) a += quad_area(nodes[q[0]], nodes[q[1]], nodes[q[2]], nodes[q[3]]);
  return a;
}

}  // namespace hexwall

#endif  // HEXWALL_HEXMESHER_HPP
