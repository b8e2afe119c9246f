#ifndef HEXWALL_TETFILL_HPP
#define HEXWALL_TETFILL_HPP

// Tetrahedral fill of the thrombus annulus between the lumen and the wall's inner
// surface. The annulus is meshed as a structured (slice, angle, depth) lattice
// whose outermost shell is the wall's inner surface, then every lattice cell is
// split into 6 tetrahedra with face diagonals chosen from global node ids.

#include "hexwall/core.hpp"
#include "hexwall/geometry.hpp"
#include "hexwall/hexmesher.hpp"
#include "hexwall/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <unordered_map>
#include <vector>

namespace hexwall {

/// Depth index m runs from the lumen (m = 0) to the wall interface (m = n_radial).
struct AnnularLattice {
  int n_slices = 0;
  int n_theta = 0;
  int n_radial = 0;
  std::vector<Vec3> nodes;
  std::vector<int> wall_node;  // per node: wall node id for m == n_radial, else -1

  int depth_nodes() const { return n_radial + 1; }
  int node(int j, int i, int m) const {
    return (j * n_theta + ((i % n_theta) + n_theta) % n_theta) * depth_nodes() + m;
  }
  std::size_t cell_count() const {
    return static_cast<std::size_t>(n_slices - 1) * n_theta * n_radial;
  }
  /// Corners of cell (j, i, m) in library hexahedron ordering.
  Hex cell(int j, int i, int m) const {
    return {node(j, i, m),         node(j, i, m + 1),         node(j, i + 1, m + 1),
            node(j, i + 1, m),     node(j + 1, i, m),         node(j + 1, i, m + 1),
            node(j + 1, i + 1, m + 1), node(j + 1, i + 1, m)};
  }
};

/// Thrombus thickness along the ray of (slice, angle), from the lumen radius to
/// the wall's inner node.
inline double ilt_thickness(const HexWallMesh& wall, const SliceProfile& lumen, int j, int i) {
  const Vec3& pw = wall.nodes[wall.lattice.node(j, i, wall.lattice.n_layers)];
  return (pw - lumen.center).dot(lumen.direction(i)) - lumen.radii[i];
}

/// ceil(mean thrombus thickness / target size), at least 1.
inline int auto_n_radial(const HexWallMesh& wall, const std::vector<SliceProfile>& lumen,
                         double target_size) {
  double sum = 0.0;
  std::size_t count = 0;
  for (int j = 0; j < wall.lattice.n_slices; ++j)
    for (int i = 0; i < wall.lattice.n_theta; ++i, ++count) sum += ilt_thickness(wall, lumen[j], j, i);
  const double mean = count ? sum / count : 0.0;
  return std::max(1, static_cast<int>(std::ceil(mean / target_size)));
}

/// Interpolates nodes linearly along each (slice, angle) ray from the lumen point
/// to the wall's inner node. The lumen profiles must be sampled on the wall's rays
/// (same centres, frames and angles).
inline AnnularLattice build_ilt_lattice(const HexWallMesh& wall,
                                        const std::vector<SliceProfile>& lumen, int n_radial) {
  const WallLattice& W = wall.lattice;
  if (n_radial < 1) throw TetFillError("build_ilt_lattice: n_radial must be >= 1");
  if (static_cast<int>(lumen.size()) != W.n_slices)
    throw TetFillError("build_ilt_lattice: " + std::to_string(lumen.size()) +
                       " lumen profiles for " + std::to_string(W.n_slices) + " wall slices");
  AnnularLattice lat;
  lat.n_slices = W.n_slices;
  lat.n_theta = W.n_theta;
  lat.n_radial = n_radial;
  lat.nodes.resize(static_cast<std::size_t>(W.n_slices) * W.n_theta * (n_radial + 1));
  lat.wall_node.assign(lat.nodes.size(), -1);
  for (int j = 0; j < W.n_slices; ++j) {
    const SliceProfile& lp = lumen[j];
    if (static_cast<int>(lp.size()) != W.n_theta)
      throw TetFillError("build_ilt_lattice: lumen profile " + std::to_string(j) +
                         " has a different n_theta than the wall");
    for (int i = 0; i < W.n_theta; ++i) {
      const int wn = W.node(j, i, W.n_layers);
      const Vec3& pw = wall.nodes[wn];
      const double r_wall = (pw - lp.center).dot(lp.direction(i));
      if (!(lp.radii[i] < r_wall))
        throw TetFillError("lumen not inside wall at slice " + std::to_string(j) + ", angle index " +
                           std::to_string(i) + ": lumen radius " + format_double(lp.radii[i]) +
                           " >= wall inner radius " + format_double(r_wall));
      const Vec3 pl = lp.point(i, lp.radii[i]);
      for (int m = 0; m < n_radial; ++m)
        lat.nodes[lat.node(j, i, m)] = pl + (static_cast<double>(m) / n_radial) * (pw - pl);
      lat.nodes[lat.node(j, i, n_radial)] = pw;
      lat.wall_node[lat.node(j, i, n_radial)] = wn;
    }
  }
  return lat;
}

struct TetFillMesh {
  std::vector<Vec3> nodes;
  std::vector<Tet> tets;
  std::vector<int> lumen_surface, wall_interface, top_cap, bottom_cap;
  std::vector<int> wall_node;  // per node: wall node id on the interface, else -1
  int n_slices = 0, n_theta = 0, n_radial = 0;

  std::array<Vec3, 4> corners(std::size_t t) const {
    return {nodes[tets[t][0]], nodes[tets[t][1]], nodes[tets[t][2]], nodes[tets[t][3]]};
  }
  int slice_of(int v) const { return v / ((n_radial + 1) * n_theta); }
  int depth_of(int v) const { return v % (n_radial + 1); }

  const std::vector<int>& node_set(const std::string& name) const {
    if (name == "LUMEN_SURFACE") return lumen_surface;
    if (name == "WALL_INTERFACE") return wall_interface;
    if (name == "TOP_CAP") return top_cap;
    if (name == "BOTTOM_CAP") return bottom_cap;
    throw TetFillError("unknown ILT node set '" + name + "'");
  }
};

/// Splits a hexahedral cell into 6 tetrahedra around the diagonal from its
/// smallest-id corner to the opposite corner. Every face is then cut along the
/// diagonal through its own smallest-id corner, provided ids increase
/// monotonically along each lattice direction inside the cell (true for
/// lexicographic lattice numbering, including the angular wrap). Returned tets
/// are oriented positively when the cell is.
inline std::array<Tet, 6> split_cell(const Hex& cell) {
  // corner index <-> (x, y, z) bits of the reference cube
  static constexpr int bits_of[8] = {0b000, 0b001, 0b011, 0b010, 0b100, 0b101, 0b111, 0b110};
  static constexpr int corner_of[8] = {0, 1, 3, 2, 4, 5, 7, 6};
  static constexpr int perms[6][3] = {{0, 1, 2}, {1, 2, 0}, {2, 0, 1}, {0, 2, 1}, {2, 1, 0}, {1, 0, 2}};
  int c0 = 0;
  for (int a = 1; a < 8; ++a)
    if (cell[a] < cell[c0]) c0 = a;
  const int start = bits_of[c0];
  const int flips = __builtin_popcount(static_cast<unsigned>(start));
  std::array<Tet, 6> out;
  for (int p = 0; p < 6; ++p) {
    int b = start;
    std::array<int, 4> v;
    v[0] = cell[corner_of[b]];
    for (int s = 0; s < 3; ++s) {
      b ^= 1 << perms[p][s];
      v[s + 1] = cell[corner_of[b]];
    }
    const bool odd_perm = p >= 3;
    if (odd_perm != (flips % 2 == 1)) std::swap(v[2], v[3]);
    out[p] = {v[0], v[1], v[2], v[3]};
  }
  return out;
}

inline TetFillMesh split_to_tets(const AnnularLattice& lat) {
  TetFillMesh mesh;
  mesh.nodes = lat.nodes;
  mesh.wall_node = lat.wall_node;
  mesh.n_slices = lat.n_slices;
  mesh.n_theta = lat.n_theta;
  mesh.n_radial = lat.n_radial;
  mesh.tets.reserve(6 * lat.cell_count());
  std::size_t cell_id = 0;
  for (int j = 0; j + 1 < lat.n_slices; ++j)
    for (int i = 0; i < lat.n_theta; ++i)
      for (int m = 0; m < lat.n_radial; ++m, ++cell_id) {
        for (const Tet& t : split_cell(lat.cell(j, i, m))) {
          const double v = tet_signed_volume(mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]],
                                             mesh.nodes[t[3]]);
          if (!(v > 0.0))
            throw TetFillError("non-positive tetrahedron in cell " + std::to_string(cell_id) +
                               " (slice " + std::to_string(j) + ", angle " + std::to_string(i) +
                               ", depth " + std::to_string(m) +
                               "); the annulus is too distorted, refine");
          mesh.tets.push_back(t);
        }
      }
  for (int j = 0; j < lat.n_slices; ++j)
    for (int i = 0; i < lat.n_theta; ++i) {
      mesh.lumen_surface.push_back(lat.node(j, i, 0));
      mesh.wall_interface.push_back(lat.node(j, i, lat.n_radial));
    }
  std::sort(mesh.lumen_surface.begin(), mesh.lumen_surface.end());
  std::sort(mesh.wall_interface.begin(), mesh.wall_interface.end());
  return mesh;
}

struct BoundaryTriangle {
  std::array<int, 3> nodes;  // outward wound
  enum class Kind { Lumen, Interface, BottomCap, TopCap, Other } kind = Kind::Other;
};

struct BoundaryClosure {
  std::vector<BoundaryTriangle> triangles;
  std::size_t lumen = 0, interface = 0, bottom_cap = 0, top_cap = 0, other = 0;
  std::size_t vertices = 0, edges = 0;
  std::vector<std::pair<int, int>> dangling_edges;  // boundary edges not shared by exactly 2 triangles

  long euler_characteristic() const {
    return static_cast<long>(vertices) - static_cast<long>(edges) + static_cast<long>(triangles.size());
  }
  bool closed() const { return other == 0 && dangling_edges.empty(); }
};

namespace detail {
inline std::uint64_t tri_key(std::array<int, 3> t) {
  std::sort(t.begin(), t.end());
  return (static_cast<std::uint64_t>(t[0]) << 42) | (static_cast<std::uint64_t>(t[1]) << 21) |
         static_cast<std::uint64_t>(t[2]);
}
}  // namespace detail

/// Faces used by exactly one tetrahedron, classified by the lattice position of their nodes.
inline BoundaryClosure boundary_closure(const TetFillMesh& mesh) {
  std::unordered_map<std::uint64_t, std::pair<int, std::array<int, 3>>> faces;
  faces.reserve(mesh.tets.size() * 2);
  for (const auto& t : mesh.tets)
    for (const auto& f : tet_faces) {
      const std::array<int, 3> tri{t[f[0]], t[f[1]], t[f[2]]};
      auto [it, inserted] = faces.try_emplace(detail::tri_key(tri), 0, tri);
      ++it->second.first;
    }
  BoundaryClosure bc;
  std::vector<std::pair<std::uint64_t, std::array<int, 3>>> boundary;
  for (const auto& [key, val] : faces)
    if (val.first == 1) boundary.emplace_back(key, val.second);
  std::sort(boundary.begin(), boundary.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  const int last = mesh.n_slices - 1;
  std::set<int> verts;
  std::map<std::pair<int, int>, int> edge_use;
  for (const auto& [key, tri] : boundary) {
    BoundaryTriangle b{tri};
    auto all = [&](auto pred) { return pred(tri[0]) && pred(tri[1]) && pred(tri[2]); };
    if (all([&](int v) { return mesh.depth_of(v) == 0; })) b.kind = BoundaryTriangle::Kind::Lumen, ++bc.lumen;
    else if (all([&](int v) { return mesh.depth_of(v) == mesh.n_radial; }))
      b.kind = BoundaryTriangle::Kind::Interface, ++bc.interface;
    else if (all([&](int v) { return mesh.slice_of(v) == 0; }))
      b.kind = BoundaryTriangle::Kind::BottomCap, ++bc.bottom_cap;
    else if (all([&](int v) { return mesh.slice_of(v) == last; }))
      b.kind = BoundaryTriangle::Kind::TopCap, ++bc.top_cap;
    else ++bc.other;
    for (int k = 0; k < 3; ++k) {
      verts.insert(tri[k]);
      ++edge_use[{std::min(tri[k], tri[(k + 1) % 3]), std::max(tri[k], tri[(k + 1) % 3])}];
    }
    bc.triangles.push_back(b);
  }
  bc.vertices = verts.size();
  bc.edges = edge_use.size();
  for (const auto& [e, n] : edge_use)
    if (n != 2) bc.dangling_edges.push_back(e);
  return bc;
}

/// Tags the end-cap node sets (first and last slice) and verifies that every
/// boundary triangle lies on the lumen, the wall interface, or a cap.
inline TetFillMesh cap_ends(TetFillMesh mesh) {
  mesh.bottom_cap.clear();
  mesh.top_cap.clear();
  const int per_slice = mesh.n_theta * (mesh.n_radial + 1);
  for (int v = 0; v < per_slice; ++v) {
    mesh.bottom_cap.push_back(v);
    mesh.top_cap.push_back((mesh.n_slices - 1) * per_slice + v);
  }
  const BoundaryClosure bc = boundary_closure(mesh);
  if (!bc.closed()) {
    std::string msg = "ILT boundary not closed: " + std::to_string(bc.other) +
                      " unclassified boundary triangles, " + std::to_string(bc.dangling_edges.size()) +
                      " dangling edges";
    for (std::size_t k = 0; k < std::min<std::size_t>(bc.dangling_edges.size(), 10); ++k)
      msg += (k ? ", " : ": ") + std::string("(") + std::to_string(bc.dangling_edges[k].first) + "," +
             std::to_string(bc.dangling_edges[k].second) + ")";
    throw TetFillError(msg);
  }
  return mesh;
}

struct ConformalityReport {
  double max_distance = 0.0;          // mm, over interface node pairs
  std::size_t interface_nodes = 0;
  std::size_t wall_quads = 0;
  std::size_t quads_with_wrong_count = 0;
  int min_tris_per_quad = 0, max_tris_per_quad = 0;
  std::size_t unmatched_triangles = 0;
  std::size_t pyramid_count = 0;      // always 0: the fill emits tetrahedra only

  bool conformal(double tol = 1e-9) const {
    return max_distance <= tol && quads_with_wrong_count == 0 && unmatched_triangles == 0 &&
           pyramid_count == 0;
  }
};

inline ConformalityReport check_conformal(const HexWallMesh& wall, const TetFillMesh& ilt) {
  ConformalityReport rep;
  std::vector<char> on_inner(wall.nodes.size(), 0);
  for (int v : wall.inner_surface) on_inner[v] = 1;
  for (int v : ilt.wall_interface) {
    ++rep.interface_nodes;
    const int w = ilt.wall_node[v];
    double d = std::numeric_limits<double>::infinity();
    if (w >= 0 && static_cast<std::size_t>(w) < wall.nodes.size() && on_inner[w])
      d = (ilt.nodes[v] - wall.nodes[w]).norm();
    rep.max_distance = std::max(rep.max_distance, d);
  }
  // Every triple of a wall quad identifies that quad.
  std::unordered_map<std::uint64_t, std::size_t> quad_of;
  for (std::size_t q = 0; q < wall.inner_faces.size(); ++q) {
    const auto& f = wall.inner_faces[q];
    for (int skip = 0; skip < 4; ++skip) {
      std::array<int, 3> t;
      for (int a = 0, n = 0; a < 4; ++a)
        if (a != skip) t[n++] = f[a];
      quad_of.emplace(detail::tri_key(t), q);
    }
  }
  rep.wall_quads = wall.inner_faces.size();
  std::vector<int> count(wall.inner_faces.size(), 0);
  const BoundaryClosure bc = boundary_closure(ilt);
  for (const auto& t : bc.triangles) {
    if (t.kind != BoundaryTriangle::Kind::Interface) continue;
    std::array<int, 3> w{ilt.wall_node[t.nodes[0]], ilt.wall_node[t.nodes[1]], ilt.wall_node[t.nodes[2]]};
    if (w[0] < 0 || w[1] < 0 || w[2] < 0) {
      ++rep.unmatched_triangles;
      continue;
    }
    auto it = quad_of.find(detail::tri_key(w));
    if (it == quad_of.end()) ++rep.unmatched_triangles;
    else ++count[it->second];
  }
  if (!count.empty()) {
    rep.min_tris_per_quad = *std::min_element(count.begin(), count.end());
    rep.max_tris_per_quad = *std::max_element(count.begin(), count.end());
  }
  for (int c : count)
    if (c != 2) ++rep.quads_with_wrong_count;
  return rep;
}

/// Wall and thrombus in one node table. Ids 0..wall.nodes.size()-1 are the wall
/// nodes unchanged; thrombus nodes not on the interface follow in thrombus id
/// order. `ilt_to_combined` maps every thrombus node id to its combined id.
struct CombinedMesh {
  std::vector<Vec3> nodes;
  std::vector<Hex> hexes;
  std::vector<Tet> tets;
  std::vector<int> ilt_to_combined;
  std::size_t wall_node_count = 0;
};

inline CombinedMesh merge_wall_ilt(const HexWallMesh& wall, const TetFillMesh& ilt) {
  CombinedMesh c;
  c.nodes = wall.nodes;
  c.wall_node_count = wall.nodes.size();
  c.hexes = wall.hexes;
  c.ilt_to_combined.resize(ilt.nodes.size());
  for (std::size_t v = 0; v < ilt.nodes.size(); ++v) {
    if (ilt.wall_node[v] >= 0) {
      c.ilt_to_combined[v] = ilt.wall_node[v];
    } else {
      c.ilt_to_combined[v] = static_cast<int>(c.nodes.size());
      c.nodes.push_back(ilt.nodes[v]);
    }
  }
  c.tets.reserve(ilt.tets.size());
  for (const auto& t : ilt.tets)
    c.tets.push_back({c.ilt_to_combined[t[0]], c.ilt_to_combined[t[1]], c.ilt_to_combined[t[2]],
                      c.ilt_to_combined[t[3]]});
  return c;
}

/// 10-node tetrahedra: corners then mid-edge nodes on edges 0-1, 1-2, 2-0, 0-3,
/// 1-3, 2-3 (VTK type 24 and Abaqus C3D10 ordering).
struct Tet10Mesh {
  std::vector<Vec3> nodes;
  std::vector<std::array<int, 10>> elements;
  std::size_t corner_node_count = 0;
};

inline Tet10Mesh promote_to_tet10(const std::vector<Vec3>& nodes, const std::vector<Tet>& tets) {
  auto [n, e] = promote_quadratic<4, 6>(nodes, tets, tet_edges);
  return Tet10Mesh{std::move(n), std::move(e), nodes.size()};
}

}  // namespace hexwall

#endif  // HEXWALL_TETFILL_HPP
