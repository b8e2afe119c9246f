#ifndef HEXWALL_FEM_HPP
#define HEXWALL_FEM_HPP

// Small-strain linear elastostatics over the wall (8-node hexahedra, B-bar
// mean dilatation) and optional thrombus (4-node tetrahedra, one-point rule).
// Units are mm, MPa and N throughout; pressures enter in kPa.

#include "hexwall/core.hpp"
#include "hexwall/hexmesher.hpp"
#include "hexwall/metrics.hpp"
#include "hexwall/solver.hpp"
#include "hexwall/sym_eigen.hpp"
#include "hexwall/tetfill.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace hexwall {

inline constexpr double mmhg_to_kpa = 0.133322;
inline constexpr double kpa_to_mpa = 1e-3;

struct MaterialSpec {
  double youngs_modulus = 3.0;  // MPa
  double poisson_ratio = 0.49;

  void validate() const {
    if (!(youngs_modulus > 0.0)) throw ConfigError("material: Young's modulus must be > 0");
    if (!(poisson_ratio >= 0.0 && poisson_ratio < 0.5)) throw ConfigError("material: Poisson ratio must be in [0, 0.5)");
  }
  double lambda() const {
    return youngs_modulus * poisson_ratio / ((1.0 + poisson_ratio) * (1.0 - 2.0 * poisson_ratio));
  }
  double mu() const { return youngs_modulus / (2.0 * (1.0 + poisson_ratio)); }
};

/// Thrombus default: 20 times more compliant than the wall, nu = 0.45.
inline MaterialSpec ilt_material_for(const MaterialSpec& wall, double stiffness_ratio = 20.0, double nu = 0.45) {
  return {wall.youngs_modulus / stiffness_ratio, nu};
}

/// Mean arterial pressure 1/3 systolic + 2/3 diastolic, returned in kPa.
inline double map_pressure(double systolic_mmhg, double diastolic_mmhg) {
  if (!(diastolic_mmhg > 0.0)) throw ConfigError("pressure: diastolic pressure must be > 0");
  if (systolic_mmhg < diastolic_mmhg) throw ConfigError("pressure: systolic pressure is below diastolic");
  return (systolic_mmhg / 3.0 + 2.0 * diastolic_mmhg / 3.0) * mmhg_to_kpa;
}

struct PressureSpec {
  std::optional<double> kpa;
  std::optional<double> systolic_mmhg, diastolic_mmhg;

  double resolve_kpa() const {
    if (kpa) {
      if (!(*kpa > 0.0)) throw ConfigError("pressure: applied pressure must be > 0");
      return *kpa;
    }
    if (systolic_mmhg && diastolic_mmhg) return map_pressure(*systolic_mmhg, *diastolic_mmhg);
    throw ConfigError("pressure: give either an explicit pressure or systolic and diastolic values");
  }
};

struct BCSpec {
  std::vector<std::string> fixed_sets{"TOP_RING", "BOTTOM_RING"};
};

enum class Formulation { BBar, Plain };

/// Nodes and elements of one analysis. Part ids index `materials`.
struct FeModel {
  std::vector<Vec3> nodes;
  std::vector<Hex> hexes;
  std::vector<int> hex_part;
  std::vector<Tet> tets;
  std::vector<int> tet_part;
  std::vector<MaterialSpec> materials;
  std::map<std::string, std::vector<int>> node_sets;
  std::vector<Quad> pressure_quads;                  // wound out of the solid
  std::vector<std::array<int, 3>> pressure_tris;     // wound out of the solid
  NodeLattice lattice;

  std::size_t element_count() const { return hexes.size() + tets.size(); }
};

inline FeModel wall_model(const HexWallMesh& wall, const MaterialSpec& mat) {
  mat.validate();
  FeModel m;
  m.nodes = wall.nodes;
  m.hexes = wall.hexes;
  m.hex_part.assign(wall.hexes.size(), 0);
  m.materials = {mat};
  for (const char* s : {"INNER_SURFACE", "OUTER_SURFACE", "TOP_RING", "BOTTOM_RING"}) m.node_sets[s] = wall.node_set(s);
  m.pressure_quads = wall.inner_faces;
  const WallLattice& L = wall.lattice;
  m.lattice.n_j = L.n_slices;
  m.lattice.n_i = L.n_theta;
  m.lattice.n_r = L.depth_nodes();
  m.lattice.node_of.resize(L.node_count());
  for (std::size_t v = 0; v < L.node_count(); ++v) m.lattice.node_of[v] = static_cast<int>(v);
  return m;
}

/// Wall plus conformal thrombus in one model. Pressure acts on the lumen
/// surface of the thrombus; the end rings of both parts are fixed by default
/// (TOP_RING and BOTTOM_RING include the thrombus caps).
inline FeModel wall_ilt_model(const HexWallMesh& wall, const TetFillMesh& ilt, const MaterialSpec& wall_mat,
                              const MaterialSpec& ilt_mat) {
  ilt_mat.validate();
  FeModel m = wall_model(wall, wall_mat);
  const CombinedMesh c = merge_wall_ilt(wall, ilt);
  m.nodes = c.nodes;
  m.tets = c.tets;
  m.tet_part.assign(c.tets.size(), 1);
  m.materials.push_back(ilt_mat);
  auto mapped = [&](const std::vector<int>& s) {
    std::vector<int> out;
    for (int v : s) out.push_back(c.ilt_to_combined[v]);
    std::sort(out.begin(), out.end());
    return out;
  };
  m.node_sets["LUMEN_SURFACE"] = mapped(ilt.lumen_surface);
  m.node_sets["WALL_INTERFACE"] = mapped(ilt.wall_interface);
  m.node_sets["TOP_CAP"] = mapped(ilt.top_cap);
  m.node_sets["BOTTOM_CAP"] = mapped(ilt.bottom_cap);
  for (const auto& [ring, cap] : {std::pair{"TOP_RING", "TOP_CAP"}, std::pair{"BOTTOM_RING", "BOTTOM_CAP"}}) {
    auto& s = m.node_sets[ring];
    s.insert(s.end(), m.node_sets[cap].begin(), m.node_sets[cap].end());
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
  }
  m.pressure_quads.clear();
  for (const auto& t : boundary_closure(ilt).triangles)
    if (t.kind == BoundaryTriangle::Kind::Lumen)
      m.pressure_tris.push_back({c.ilt_to_combined[t.nodes[0]], c.ilt_to_combined[t.nodes[1]],
                                 c.ilt_to_combined[t.nodes[2]]});
  // Depth slots: wall k = 0..n_layers, then thrombus m = n_radial-1 .. 0 (outside in).
  const WallLattice& L = wall.lattice;
  const int nr = ilt.n_radial;
  m.lattice.n_r = L.depth_nodes() + nr;
  m.lattice.node_of.assign(static_cast<std::size_t>(L.n_slices) * L.n_theta * m.lattice.n_r, -1);
  for (int j = 0; j < L.n_slices; ++j)
    for (int i = 0; i < L.n_theta; ++i) {
      for (int k = 0; k <= L.n_layers; ++k) m.lattice.node_of[m.lattice.slot(j, i, k)] = L.node(j, i, k);
      for (int q = 0; q < nr; ++q) {
        const int mm = nr - 1 - q;
        const int v = (j * L.n_theta + i) * (nr + 1) + mm;
        m.lattice.node_of[m.lattice.slot(j, i, L.depth_nodes() + q)] = c.ilt_to_combined[v];
      }
    }
  return m;
}

using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Isotropic elasticity in Voigt order (xx, yy, zz, xy, yz, xz) with engineering shear strains.
inline Mat6 elasticity_matrix(const MaterialSpec& m) {
  const double lam = m.lambda(), mu = m.mu();
  Mat6 D = Mat6::Zero();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) D(i, j) = lam;
    D(i, i) += 2.0 * mu;
    D(i + 3, i + 3) = mu;
  }
  return D;
}

namespace detail {

inline constexpr double hex_nat[8][3] = {{-1, -1, -1}, {1, -1, -1}, {1, 1, -1}, {-1, 1, -1},
                                         {-1, -1, 1},  {1, -1, 1},  {1, 1, 1},  {-1, 1, 1}};

/// Natural-coordinate shape-function gradients of the trilinear hexahedron.
inline Eigen::Matrix<double, 8, 3> hex_dN(const double s[3]) {
  Eigen::Matrix<double, 8, 3> d;
  for (int a = 0; a < 8; ++a) {
    const double* x = hex_nat[a];
    d(a, 0) = 0.125 * x[0] * (1 + x[1] * s[1]) * (1 + x[2] * s[2]);
    d(a, 1) = 0.125 * x[1] * (1 + x[0] * s[0]) * (1 + x[2] * s[2]);
    d(a, 2) = 0.125 * x[2] * (1 + x[0] * s[0]) * (1 + x[1] * s[1]);
  }
  return d;
}

struct HexGauss {
  std::array<Eigen::Matrix<double, 8, 3>, 8> dNdx;  // physical gradients per Gauss point
  std::array<double, 8> wdet{};                     // weight * det J
  Eigen::Matrix<double, 8, 3> mean_dNdx;            // volume average (B-bar dilatation)
  double volume = 0.0;
};

inline HexGauss hex_gauss(std::span<const Vec3, 8> p, std::size_t element) {
  HexGauss g;
  const double q = 1.0 / std::sqrt(3.0);
  g.mean_dNdx.setZero();
  for (int gp = 0; gp < 8; ++gp) {
    const double s[3] = {hex_nat[gp][0] * q, hex_nat[gp][1] * q, hex_nat[gp][2] * q};
    const auto dN = hex_dN(s);
    Mat3 J = Mat3::Zero();  // J(i, k) = dx_i / dxi_k
    for (int a = 0; a < 8; ++a) J += p[a] * dN.row(a);
    const double det = J.determinant();
    if (!(det > 0.0))
      throw FemError("non-positive Jacobian (" + format_double(det) + ") in hexahedron " + std::to_string(element));
    g.dNdx[gp] = dN * J.inverse();
    g.wdet[gp] = det;
    g.mean_dNdx += det * g.dNdx[gp];
    g.volume += det;
  }
  g.mean_dNdx /= g.volume;
  return g;
}

using HexB = Eigen::Matrix<double, 6, 24>;

inline HexB hex_B(const Eigen::Matrix<double, 8, 3>& d, const Eigen::Matrix<double, 8, 3>* mean) {
  HexB B = HexB::Zero();
  for (int a = 0; a < 8; ++a) {
    const int c = 3 * a;
    B(0, c) = d(a, 0);
    B(1, c + 1) = d(a, 1);
    B(2, c + 2) = d(a, 2);
    B(3, c) = d(a, 1), B(3, c + 1) = d(a, 0);
    B(4, c + 1) = d(a, 2), B(4, c + 2) = d(a, 1);
    B(5, c) = d(a, 2), B(5, c + 2) = d(a, 0);
    if (mean) {
      // Replace the dilatational part with its element mean.
      for (int k = 0; k < 3; ++k) {
        const double corr = ((*mean)(a, k) - d(a, k)) / 3.0;
        for (int i = 0; i < 3; ++i) B(i, c + k) += corr;
      }
    }
  }
  return B;
}

inline Eigen::Matrix<double, 6, 12> tet_B(std::span<const Vec3, 4> p, std::size_t element, double& volume) {
  Mat3 J;
  J.col(0) = p[1] - p[0];
  J.col(1) = p[2] - p[0];
  J.col(2) = p[3] - p[0];
  const double det = J.determinant();
  volume = det / 6.0;
  if (!(det > 0.0))
    throw FemError("non-positive Jacobian (" + format_double(det) + ") in tetrahedron " + std::to_string(element));
  const Mat3 Jinv = J.inverse();  // rows: gradients of the barycentric coordinates 1..3
  Eigen::Matrix<double, 4, 3> d;
  d.row(1) = Jinv.row(0);
  d.row(2) = Jinv.row(1);
  d.row(3) = Jinv.row(2);
  d.row(0) = -(d.row(1) + d.row(2) + d.row(3));
  Eigen::Matrix<double, 6, 12> B = Eigen::Matrix<double, 6, 12>::Zero();
  for (int a = 0; a < 4; ++a) {
    const int c = 3 * a;
    B(0, c) = d(a, 0);
    B(1, c + 1) = d(a, 1);
    B(2, c + 2) = d(a, 2);
    B(3, c) = d(a, 1), B(3, c + 1) = d(a, 0);
    B(4, c + 1) = d(a, 2), B(4, c + 2) = d(a, 1);
    B(5, c) = d(a, 2), B(5, c + 2) = d(a, 0);
  }
  return B;
}

}  // namespace detail

using HexStiffness = Eigen::Matrix<double, 24, 24>;
using TetStiffness = Eigen::Matrix<double, 12, 12>;

inline HexStiffness hex8_stiffness(std::span<const Vec3, 8> p, const MaterialSpec& mat,
                                   Formulation f = Formulation::BBar, std::size_t element = 0) {
  const auto g = detail::hex_gauss(p, element);
  const Mat6 D = elasticity_matrix(mat);
  HexStiffness K = HexStiffness::Zero();
  for (int gp = 0; gp < 8; ++gp) {
    const auto B = detail::hex_B(g.dNdx[gp], f == Formulation::BBar ? &g.mean_dNdx : nullptr);
    K.noalias() += B.transpose() * (g.wdet[gp] * D) * B;
  }
  return K;
}

inline TetStiffness tet4_stiffness(std::span<const Vec3, 4> p, const MaterialSpec& mat, std::size_t element = 0) {
  double vol = 0.0;
  const auto B = detail::tet_B(p, element, vol);
  return vol * B.transpose() * elasticity_matrix(mat) * B;
}

/// Block pattern from element connectivity.
inline BlockSparse stiffness_pattern(const FeModel& m) {
  std::vector<std::vector<int>> adj(m.nodes.size());
  for (std::size_t v = 0; v < adj.size(); ++v) adj[v].push_back(static_cast<int>(v));
  auto add = [&](const auto& e) {
    for (int a : e) adj[a].insert(adj[a].end(), e.begin(), e.end());
  };
  for (const auto& h : m.hexes) add(h);
  for (const auto& t : m.tets) add(t);
  return BlockSparse::from_adjacency(std::move(adj));
}

/// Global stiffness. Element matrices are computed in parallel chunks and
/// scattered in element order, so the result does not depend on thread count.
inline BlockSparse assemble(const FeModel& m, Formulation f = Formulation::BBar) {
  for (const auto& mat : m.materials) mat.validate();
  BlockSparse K = stiffness_pattern(m);
  auto scatter = [&](const auto& conn, const auto& Ke) {
    constexpr int n = static_cast<int>(std::tuple_size_v<std::decay_t<decltype(conn)>>);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        double* blk = K.block(K.find(conn[a], conn[b]));
        for (int p = 0; p < 3; ++p)
          for (int q = 0; q < 3; ++q) blk[3 * p + q] += Ke(3 * a + p, 3 * b + q);
      }
  };
  constexpr std::size_t chunk = 2048;
  std::vector<HexStiffness> hk(chunk);
  for (std::size_t lo = 0; lo < m.hexes.size(); lo += chunk) {
    const std::size_t n = std::min(chunk, m.hexes.size() - lo);
    parallel_for(n, [&](std::size_t k) {
      const std::size_t e = lo + k;
      std::array<Vec3, 8> p;
      for (int a = 0; a < 8; ++a) p[a] = m.nodes[m.hexes[e][a]];
      hk[k] = hex8_stiffness(p, m.materials.at(m.hex_part[e]), f, e);
    });
    for (std::size_t k = 0; k < n; ++k) scatter(m.hexes[lo + k], hk[k]);
  }
  std::vector<TetStiffness> tk(chunk);
  for (std::size_t lo = 0; lo < m.tets.size(); lo += chunk) {
    const std::size_t n = std::min(chunk, m.tets.size() - lo);
    parallel_for(n, [&](std::size_t k) {
      const std::size_t e = lo + k;
      const std::array<Vec3, 4> p{m.nodes[m.tets[e][0]], m.nodes[m.tets[e][1]], m.nodes[m.tets[e][2]],
                                  m.nodes[m.tets[e][3]]};
      tk[k] = tet4_stiffness(p, m.materials.at(m.tet_part[e]), m.hexes.size() + e);
    });
    for (std::size_t k = 0; k < n; ++k) scatter(m.tets[lo + k], tk[k]);
  }
  return K;
}

struct PressureLoad {
  Vec forces;
  Vec3 net_force = Vec3::Zero();
  double sum_abs = 0.0;  // sum of nodal force magnitudes
  double area = 0.0;
  bool closed = false;
};

/// Consistent nodal forces of a uniform pressure (MPa) acting on faces wound
/// out of the solid; the load pushes into the solid. Quads use bilinear shape
/// functions with 2x2 Gauss points, triangles p A / 3 per node. Opposite
/// windings on a shared edge are required; a closed face set must also give
/// zero net force.
inline PressureLoad apply_pressure(const std::vector<Vec3>& nodes, const std::vector<Quad>& quads,
                                   const std::vector<std::array<int, 3>>& tris, double pressure_mpa) {
  PressureLoad out;
  out.forces = Vec::Zero(3 * static_cast<Eigen::Index>(nodes.size()));
  std::map<std::pair<int, int>, int> directed;
  auto add_edges = [&](const auto& face) {
    const int n = static_cast<int>(face.size());
    for (int k = 0; k < n; ++k) {
      const int a = face[k], b = face[(k + 1) % n];
      if (++directed[{a, b}] > 1)
        throw FemError("pressure faces have inconsistent winding at edge (" + std::to_string(a) + ", " +
                       std::to_string(b) + ")");
    }
  };
  const double g = 1.0 / std::sqrt(3.0);
  for (const auto& q : quads) {
    add_edges(q);
    for (int gi = 0; gi < 2; ++gi)
      for (int gj = 0; gj < 2; ++gj) {
        const double s = gi ? g : -g, t = gj ? g : -g;
        const double N[4] = {0.25 * (1 - s) * (1 - t), 0.25 * (1 + s) * (1 - t), 0.25 * (1 + s) * (1 + t),
                             0.25 * (1 - s) * (1 + t)};
        const Vec3 ds = 0.25 * ((1 - t) * (nodes[q[1]] - nodes[q[0]]) + (1 + t) * (nodes[q[2]] - nodes[q[3]]));
        const Vec3 dt = 0.25 * ((1 - s) * (nodes[q[3]] - nodes[q[0]]) + (1 + s) * (nodes[q[2]] - nodes[q[1]]));
        const Vec3 n = ds.cross(dt);
        out.area += n.norm();
        for (int a = 0; a < 4; ++a) out.forces.segment<3>(3 * q[a]) -= pressure_mpa * N[a] * n;
      }
  }
  for (const auto& t : tris) {
    add_edges(t);
    const Vec3 n = 0.5 * (nodes[t[1]] - nodes[t[0]]).cross(nodes[t[2]] - nodes[t[0]]);
    out.area += n.norm();
    for (int a = 0; a < 3; ++a) out.forces.segment<3>(3 * t[a]) -= pressure_mpa * n / 3.0;
  }
  out.closed = !directed.empty();
  for (const auto& [e, cnt] : directed)
    if (!directed.count({e.second, e.first})) {
      out.closed = false;
      break;
    }
  for (std::size_t v = 0; v < nodes.size(); ++v) {
    const Vec3 fv = out.forces.segment<3>(3 * v);
    out.net_force += fv;
    out.sum_abs += fv.norm();
  }
  if (out.closed && out.net_force.norm() > 1e-9 * std::max(out.sum_abs, 1e-300))
    throw FemError("closed pressure surface has net force " + format_double(out.net_force.norm()) +
                   " N; face winding is inconsistent");
  return out;
}

inline PressureLoad apply_pressure(const FeModel& m, double pressure_kpa) {
  return apply_pressure(m.nodes, m.pressure_quads, m.pressure_tris, pressure_kpa * kpa_to_mpa);
}

/// Fully fixes every node of the named sets after checking that they remove
/// all rigid-body modes (at least three fully fixed, non-collinear nodes).
inline Constraints make_constraints(const FeModel& m, const BCSpec& bc) {
  Constraints c(m.nodes.size());
  for (const auto& name : bc.fixed_sets) {
    auto it = m.node_sets.find(name);
    if (it == m.node_sets.end()) throw ConfigError("boundary conditions: unknown node set '" + name + "'");
    for (int v : it->second) c.fix_node(v);
  }
  return c;
}

inline void check_rigid_modes(const std::vector<Vec3>& nodes, const Constraints& c) {
  std::vector<int> full;
  for (std::size_t v = 0; v < c.mask.size(); ++v)
    if (c.mask[v] == 7) full.push_back(static_cast<int>(v));
  if (full.empty()) throw SolverError("rigid-body mode: no fully fixed nodes");
  const Vec3 a = nodes[full.front()];
  int far = full.front();
  for (int v : full)
    if ((nodes[v] - a).norm() > (nodes[far] - a).norm()) far = v;
  const Vec3 d = nodes[far] - a;
  double best = 0.0;
  for (int v : full) best = std::max(best, d.cross(nodes[v] - a).norm());
  const double scale = d.squaredNorm();
  if (full.size() < 3 || !(scale > 0.0) || best <= 1e-9 * scale)
    throw SolverError("rigid-body mode: fixed nodes are fewer than three or collinear");
}

struct StaticResult {
  Vec displacement;
  SolveReport solve;
  double equilibrium_residual = 0.0;  // ||A u - b|| / ||b|| of the constrained system
  Vec3 reaction_sum = Vec3::Zero();
  Vec3 applied_sum = Vec3::Zero();
  double reaction_balance = 0.0;       // |sum R + sum f| / sum |f_i|
  double assemble_seconds = 0.0;
};

/// Assembles, constrains and solves K u = f.
inline StaticResult solve_static(const FeModel& m, const Vec& f, const Constraints& c,
                                 const SolverOptions& opt = {}, Formulation form = Formulation::BBar) {
  using clock = std::chrono::steady_clock;
  StaticResult r;
  check_rigid_modes(m.nodes, c);
  const auto t0 = clock::now();
  BlockSparse K = assemble(m, form);
  r.assemble_seconds = std::chrono::duration<double>(clock::now() - t0).count();
  Vec b = f;
  const ConstrainedRows rows = apply_constraints(K, b, c);
  r.displacement = solve_system(K, b, c, m.lattice, opt, r.solve);
  Vec Ku;
  K.multiply(r.displacement, Ku);
  const double bn = b.norm();
  r.equilibrium_residual = bn > 0.0 ? (Ku - b).norm() / bn : (Ku - b).norm();
  double sum_abs = 0.0;
  for (std::size_t v = 0; v < m.nodes.size(); ++v) {
    r.applied_sum += f.segment<3>(3 * v);
    sum_abs += f.segment<3>(3 * v).norm();
  }
  for (std::size_t k = 0; k < rows.nodes.size(); ++k) {
    const int v = rows.nodes[k];
    Vec3 R = -f.segment<3>(3 * v);
    for (std::size_t b2 = 0; b2 < rows.cols[k].size(); ++b2) {
      const double* blk = rows.vals[k].data() + 9 * b2;
      const Vec3 u = r.displacement.segment<3>(3 * rows.cols[k][b2]);
      for (int p = 0; p < 3; ++p) R[p] += blk[3 * p] * u[0] + blk[3 * p + 1] * u[1] + blk[3 * p + 2] * u[2];
    }
    for (int p = 0; p < 3; ++p)
      if ((c.mask[v] >> p) & 1u) r.reaction_sum[p] += R[p];
  }
  r.reaction_balance = sum_abs > 0.0 ? (r.reaction_sum + r.applied_sum).norm() / sum_abs : 0.0;
  return r;
}

/// Nodal stresses. Each node averages the corner values of its adjacent
/// elements weighted by element volume; nodes touching any hexahedron average
/// over hexahedra only, so wall stresses never mix with thrombus stresses.
struct StressField {
  std::vector<Sym6> tensor;
  std::vector<double> max_principal;
  std::vector<char> on_hex;  // node belongs to at least one hexahedron
};

/// Stress at the 8 Gauss points of a hexahedron, in Gauss-point order.
inline std::array<Sym6, 8> hex8_gauss_stress(std::span<const Vec3, 8> p, std::span<const double, 24> ue,
                                             const MaterialSpec& mat, Formulation f = Formulation::BBar,
                                             std::size_t element = 0) {
  const auto g = detail::hex_gauss(p, element);
  const Mat6 D = elasticity_matrix(mat);
  const Eigen::Map<const Eigen::Matrix<double, 24, 1>> u(ue.data());
  std::array<Sym6, 8> out;
  for (int gp = 0; gp < 8; ++gp) {
    const Eigen::Matrix<double, 6, 1> s =
        D * (detail::hex_B(g.dNdx[gp], f == Formulation::BBar ? &g.mean_dNdx : nullptr) * u);
    for (int k = 0; k < 6; ++k) out[gp][k] = s[k];
  }
  return out;
}

inline StressField recover_stress(const FeModel& m, const Vec& u, Formulation f = Formulation::BBar) {
  const std::size_t nn = m.nodes.size();
  StressField sf;
  sf.on_hex.assign(nn, 0);
  for (const auto& h : m.hexes)
    for (int v : h) sf.on_hex[v] = 1;
  std::vector<std::array<double, 6>> acc(nn, std::array<double, 6>{});
  std::vector<double> wsum(nn, 0.0);
  // Corner value = trilinear extrapolation of the Gauss-point values.
  const double sq3 = std::sqrt(3.0);
  double E[8][8];
  for (int a = 0; a < 8; ++a)
    for (int gp = 0; gp < 8; ++gp) {
      double w = 0.125;
      for (int k = 0; k < 3; ++k) w *= 1.0 + sq3 * detail::hex_nat[a][k] * detail::hex_nat[gp][k];
      E[a][gp] = w;
    }
  for (std::size_t e = 0; e < m.hexes.size(); ++e) {
    std::array<Vec3, 8> p;
    std::array<double, 24> ue;
    for (int a = 0; a < 8; ++a) {
      p[a] = m.nodes[m.hexes[e][a]];
      for (int c = 0; c < 3; ++c) ue[3 * a + c] = u[3 * m.hexes[e][a] + c];
    }
    const auto gs = hex8_gauss_stress(p, ue, m.materials.at(m.hex_part[e]), f, e);
    const double vol = hex_volume(p);
    for (int a = 0; a < 8; ++a) {
      const int v = m.hexes[e][a];
      for (int k = 0; k < 6; ++k) {
        double s = 0.0;
        for (int gp = 0; gp < 8; ++gp) s += E[a][gp] * gs[gp][k];
        acc[v][k] += vol * s;
      }
      wsum[v] += vol;
    }
  }
  for (std::size_t e = 0; e < m.tets.size(); ++e) {
    const auto& t = m.tets[e];
    const std::array<Vec3, 4> p{m.nodes[t[0]], m.nodes[t[1]], m.nodes[t[2]], m.nodes[t[3]]};
    double vol = 0.0;
    const auto B = detail::tet_B(p, m.hexes.size() + e, vol);
    Eigen::Matrix<double, 12, 1> ue;
    for (int a = 0; a < 4; ++a) ue.segment<3>(3 * a) = u.segment<3>(3 * t[a]);
    const Eigen::Matrix<double, 6, 1> s = elasticity_matrix(m.materials.at(m.tet_part[e])) * (B * ue);
    for (int v : t) {
      if (sf.on_hex[v]) continue;
      for (int k = 0; k < 6; ++k) acc[v][k] += vol * s[k];
      wsum[v] += vol;
    }
  }
  sf.tensor.resize(nn);
  sf.max_principal.resize(nn);
  for (std::size_t v = 0; v < nn; ++v) {
    for (int k = 0; k < 6; ++k) sf.tensor[v][k] = wsum[v] > 0.0 ? acc[v][k] / wsum[v] : 0.0;
    sf.max_principal[v] = max_principal(sf.tensor[v]);
  }
  return sf;
}

/// q-th percentile (0..100) of sorted values, linear interpolation between
/// order statistics at rank (n - 1) q / 100.
inline double percentile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw FemError("percentile of an empty set");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q / 100.0;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

struct ProbeValue {
  Vec3 point = Vec3::Zero();
  int node = -1;
  double distance = 0.0;
  double value = 0.0;
  bool out_of_domain = false;
};

struct StressStats {
  std::size_t count = 0;
  double peak = 0.0, p99 = 0.0, median = 0.0;
  std::array<double, 101> curve{};
  std::vector<ProbeValue> probes;
};

inline StressStats stress_stats(std::vector<double> values) {
  if (values.empty()) throw FemError("stress statistics of an empty field");
  std::sort(values.begin(), values.end());
  StressStats s;
  s.count = values.size();
  for (int q = 0; q <= 100; ++q) s.curve[q] = percentile_sorted(values, q);
  s.peak = values.back();
  s.p99 = percentile_sorted(values, 99.0);
  s.median = percentile_sorted(values, 50.0);
  return s;
}

/// Statistics over the nodal max principal stress of wall (hexahedron) nodes,
/// or of all nodes when the model has no hexahedra.
inline StressStats stress_stats(const StressField& f) {
  const bool any_hex = std::any_of(f.on_hex.begin(), f.on_hex.end(), [](char c) { return c != 0; });
  std::vector<double> v;
  for (std::size_t k = 0; k < f.max_principal.size(); ++k)
    if (!any_hex || f.on_hex[k]) v.push_back(f.max_principal[k]);
  return stress_stats(std::move(v));
}

/// Nearest-node lookup among wall nodes (all nodes when there are no
/// hexahedra). A point farther from its node than the longest edge of the
/// elements around that node is flagged out of domain.
inline std::vector<ProbeValue> probe(const FeModel& m, const StressField& f, const std::vector<Vec3>& points) {
  const bool any_hex = !m.hexes.empty();
  std::vector<ProbeValue> out;
  for (const Vec3& x : points) {
    ProbeValue pv;
    pv.point = x;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < m.nodes.size(); ++v) {
      if (any_hex && !f.on_hex[v]) continue;
      const double d = (m.nodes[v] - x).squaredNorm();
      if (d < best) best = d, pv.node = static_cast<int>(v);
    }
    if (pv.node < 0) throw FemError("probe: model has no nodes");
    pv.distance = std::sqrt(best);
    pv.value = f.max_principal[pv.node];
    double size = 0.0;
    auto edge_scan = [&](const auto& elems, const auto& edges) {
      for (const auto& e : elems) {
        if (std::find(e.begin(), e.end(), pv.node) == e.end()) continue;
        for (const auto& ed : edges) size = std::max(size, (m.nodes[e[ed[0]]] - m.nodes[e[ed[1]]]).norm());
      }
    };
    edge_scan(m.hexes, hex_edges);
    edge_scan(m.tets, tet_edges);
    pv.out_of_domain = pv.distance > size;
    out.push_back(pv);
  }
  return out;
}

}  // namespace hexwall

#endif  // HEXWALL_FEM_HPP
