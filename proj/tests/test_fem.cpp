#include "hexwall/fem.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <random>

using namespace hexwall;
using hexwall::testing::cylinder_profiles;
using hexwall::testing::cylinder_wall;

namespace {

const std::array<Vec3, 8> unit_cube{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(0, 1, 0),
                                    Vec3(0, 0, 1), Vec3(1, 0, 1), Vec3(1, 1, 1), Vec3(0, 1, 1)};

/// n^3 hexahedra on [0, n]^3 with lexicographic node ids (x fastest).
FeModel block_model(int n, const MaterialSpec& mat) {
  FeModel m;
  auto id = [n](int x, int y, int z) { return (z * (n + 1) + y) * (n + 1) + x; };
  for (int z = 0; z <= n; ++z)
    for (int y = 0; y <= n; ++y)
      for (int x = 0; x <= n; ++x) m.nodes.emplace_back(x, y, z);
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x)
        m.hexes.push_back({id(x, y, z), id(x + 1, y, z), id(x + 1, y + 1, z), id(x, y + 1, z), id(x, y, z + 1),
                           id(x + 1, y, z + 1), id(x + 1, y + 1, z + 1), id(x, y + 1, z + 1)});
  m.hex_part.assign(m.hexes.size(), 0);
  m.materials = {mat};
  return m;
}

bool on_box_boundary(const Vec3& x, double n) {
  for (int k = 0; k < 3; ++k)
    if (x[k] == 0.0 || x[k] == n) return true;
  return false;
}

/// Symmetric plane-strain constraints of a tube along z: axial motion fixed on
/// both end planes, in-plane rigid motion removed on the coordinate planes.
Constraints plane_strain(const FeModel& m, double length) {
  Constraints c(m.nodes.size());
  for (std::size_t v = 0; v < m.nodes.size(); ++v) {
    const Vec3& x = m.nodes[v];
    if (std::abs(x.z()) < 1e-9 || std::abs(x.z() - length) < 1e-9) c.fix(static_cast<int>(v), 2);
    if (std::abs(x.y()) < 1e-9) c.fix(static_cast<int>(v), 1);
    if (std::abs(x.x()) < 1e-9) c.fix(static_cast<int>(v), 0);
  }
  return c;
}

Vec solve_constrained(const FeModel& m, const Vec& f, const Constraints& c, Formulation form) {
  BlockSparse K = assemble(m, form);
  Vec b = f;
  apply_constraints(K, b, c);
  SolveReport rep;
  return solve_direct(K, b, rep);
}

/// Lame solution for a thick tube in plane strain under inner pressure p.
struct Lame {
  double a, b, p, E, nu;
  double A() const { return p * a * a / (b * b - a * a); }
  double B() const { return p * a * a * b * b / (b * b - a * a); }
  double u(double r) const { return (1 + nu) / E * ((1 - 2 * nu) * A() * r + B() / r); }
  double hoop(double r) const { return A() + B() / (r * r); }
};

double radial(const Vec3& x, const Vec3& u) { return u.dot(Vec3(x.x(), x.y(), 0).normalized()); }

}  // namespace

TEST(Material, LameParametersAndValidation) {
  const MaterialSpec m{3.0, 0.25};
  EXPECT_NEAR(m.lambda(), 1.2, 1e-14);
  EXPECT_NEAR(m.mu(), 1.2, 1e-14);
  EXPECT_THROW((MaterialSpec{3.0, 0.5}.validate()), ConfigError);
  EXPECT_THROW((MaterialSpec{0.0, 0.3}.validate()), ConfigError);
  const MaterialSpec ilt = ilt_material_for(MaterialSpec{3.0, 0.49});
  EXPECT_NEAR(ilt.youngs_modulus, 0.15, 1e-15);
  EXPECT_EQ(ilt.poisson_ratio, 0.45);
}

TEST(Pressure, MapPressureFromCuffValues) {
  EXPECT_NEAR(map_pressure(120.0, 80.0), (120.0 / 3 + 160.0 / 3) * 0.133322, 1e-12);
  EXPECT_NEAR(map_pressure(120.0, 80.0), 12.44, 0.005);
  EXPECT_THROW(map_pressure(80.0, 120.0), ConfigError);
  EXPECT_THROW(map_pressure(120.0, 0.0), ConfigError);
  PressureSpec s;
  EXPECT_THROW(s.resolve_kpa(), ConfigError);
  s.systolic_mmhg = 120.0;
  s.diastolic_mmhg = 80.0;
  EXPECT_NEAR(s.resolve_kpa(), 12.4434, 1e-4);
  s.kpa = 16.0;
  EXPECT_EQ(s.resolve_kpa(), 16.0);
}

TEST(Stiffness, UnitCubeHasSixRigidModes) {
  for (auto f : {Formulation::BBar, Formulation::Plain}) {
    const HexStiffness K = hex8_stiffness(unit_cube, MaterialSpec{}, f);
    EXPECT_NEAR((K - K.transpose()).norm(), 0.0, 1e-12 * K.norm());
    Eigen::SelfAdjointEigenSolver<HexStiffness> es(K);
    const auto ev = es.eigenvalues();
    const double top = ev.maxCoeff();
    for (int k = 0; k < 6; ++k) EXPECT_LT(std::abs(ev[k]), 1e-10 * top);
    EXPECT_GT(ev[6], 1e-4 * top);
  }
  const std::array<Vec3, 4> t{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  Eigen::SelfAdjointEigenSolver<TetStiffness> es(tet4_stiffness(t, MaterialSpec{}));
  const auto ev = es.eigenvalues();
  for (int k = 0; k < 6; ++k) EXPECT_LT(std::abs(ev[k]), 1e-10 * ev.maxCoeff());
  EXPECT_GT(ev[6], 0.0);
}

TEST(Stiffness, InvertedElementIsRejected) {
  auto p = unit_cube;
  std::swap(p[4], p[0]);
  std::swap(p[5], p[1]);
  std::swap(p[6], p[2]);
  std::swap(p[7], p[3]);
  EXPECT_THROW(hex8_stiffness(p, MaterialSpec{}), FemError);
}

TEST(PatchTest, DistortedHexesReproduceLinearField) {
  const MaterialSpec mat{3.0, 0.49};
  FeModel m = block_model(3, mat);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> jitter(-0.2, 0.2);
  for (auto& x : m.nodes)
    if (!on_box_boundary(x, 3.0)) x += Vec3(jitter(rng), jitter(rng), jitter(rng));
  Mat3 G;
  G << 1e-3, 2e-4, -3e-4, 5e-4, -2e-3, 1e-4, 0.0, 7e-4, 1.5e-3;
  const Vec3 c0(0.01, -0.02, 0.005);
  Constraints c(m.nodes.size());
  for (std::size_t v = 0; v < m.nodes.size(); ++v)
    if (on_box_boundary(m.nodes[v], 3.0)) {
      const Vec3 u = G * m.nodes[v] + c0;
      for (int k = 0; k < 3; ++k) c.fix(static_cast<int>(v), k, u[k]);
    }
  const Mat3 eps = 0.5 * (G + G.transpose());
  Eigen::Matrix<double, 6, 1> e;
  e << eps(0, 0), eps(1, 1), eps(2, 2), 2 * eps(0, 1), 2 * eps(1, 2), 2 * eps(0, 2);
  const Eigen::Matrix<double, 6, 1> sigma = elasticity_matrix(mat) * e;
  for (auto form : {Formulation::BBar, Formulation::Plain}) {
    const StaticResult r = solve_static(m, Vec::Zero(3 * m.nodes.size()), c, {}, form);
    EXPECT_LE(r.equilibrium_residual, 1e-12);
    double worst_u = 0.0, worst_s = 0.0;
    for (std::size_t v = 0; v < m.nodes.size(); ++v)
      worst_u = std::max(worst_u, (r.displacement.segment<3>(3 * v) - (G * m.nodes[v] + c0)).norm());
    const StressField sf = recover_stress(m, r.displacement, form);
    for (const auto& s : sf.tensor)
      for (int k = 0; k < 6; ++k) worst_s = std::max(worst_s, std::abs(s[k] - sigma[k]));
    EXPECT_LE(worst_u, 1e-9);
    EXPECT_LE(worst_s, 1e-9);
  }
}

TEST(PatchTest, TetrahedraReproduceLinearField) {
  const MaterialSpec mat{1.0, 0.3};
  const FeModel hexes = block_model(2, mat);
  FeModel m;
  m.nodes = hexes.nodes;
  for (const auto& h : hexes.hexes)
    for (const auto& t : split_cell(h)) m.tets.push_back(t);
  m.tet_part.assign(m.tets.size(), 0);
  m.materials = {mat};
  m.nodes[13] += Vec3(0.1, -0.15, 0.05);  // the only interior node
  Mat3 G = Mat3::Zero();
  G(0, 0) = 1e-3;
  G(1, 2) = -4e-4;
  Constraints c(m.nodes.size());
  for (std::size_t v = 0; v < m.nodes.size(); ++v)
    if (on_box_boundary(m.nodes[v], 2.0))
      for (int k = 0; k < 3; ++k) c.fix(static_cast<int>(v), k, (G * m.nodes[v])[k]);
  const StaticResult r = solve_static(m, Vec::Zero(3 * m.nodes.size()), c);
  EXPECT_LE((r.displacement.segment<3>(3 * 13) - G * m.nodes[13]).norm(), 1e-12);
}

TEST(Pressure, FlatUnitQuad) {
  const std::vector<Vec3> n{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(0, 1, 0)};
  const PressureLoad l = apply_pressure(n, {Quad{0, 1, 2, 3}}, {}, 2.0);
  for (int v = 0; v < 4; ++v) EXPECT_NEAR((l.forces.segment<3>(3 * v) - Vec3(0, 0, -0.5)).norm(), 0.0, 1e-15);
  EXPECT_NEAR(l.area, 1.0, 1e-15);
  EXPECT_FALSE(l.closed);
  const PressureLoad t = apply_pressure(n, {}, {{0, 1, 2}}, 3.0);
  EXPECT_NEAR(t.forces[2], -0.5, 1e-15);
}

TEST(Pressure, ClosedSurfaceHasZeroNetForce) {
  std::vector<Vec3> n(unit_cube.begin(), unit_cube.end());
  for (auto& x : n) x = Vec3(2.0 * x.x() + 0.3 * x.y(), x.y() + 0.2 * x.z(), 1.5 * x.z());
  std::vector<Quad> faces;
  for (const auto& f : hex_faces) faces.push_back({f[0], f[1], f[2], f[3]});  // already wound outward
  const PressureLoad l = apply_pressure(n, faces, {}, 1.0);
  EXPECT_TRUE(l.closed);
  EXPECT_LT(l.net_force.norm(), 1e-14);
  // Inward push on every face: each node is pushed toward the centroid.
  Vec3 c = Vec3::Zero();
  for (const auto& x : n) c += x / 8.0;
  for (int v = 0; v < 8; ++v) EXPECT_LT(l.forces.segment<3>(3 * v).dot(n[v] - c), 0.0);
  std::swap(faces[2][1], faces[2][3]);
  EXPECT_THROW(apply_pressure(n, faces, {}, 1.0), FemError);
}

TEST(Pressure, CylinderRadialProjection) {
  const int nt = 64;
  const double L = 30.0, r = 8.5, p_kpa = 12.0;
  const FeModel m = wall_model(cylinder_wall(10.0, 1.5, 2, nt, 20, L), MaterialSpec{});
  const PressureLoad l = apply_pressure(m, p_kpa);
  double fr = 0.0;
  for (std::size_t v = 0; v < m.nodes.size(); ++v) fr += radial(m.nodes[v], l.forces.segment<3>(3 * v));
  const double p = p_kpa * 1e-3;
  // Each facet force is split between nodes sitting pi / nt off its normal.
  EXPECT_NEAR(fr, p * nt * r * std::sin(2.0 * pi / nt) * L, 1e-10);
  EXPECT_NEAR(fr / (p * 2.0 * pi * r * L), 1.0, 0.005);
  EXPECT_LT(l.net_force.norm(), 1e-12);
}

TEST(Pressure, ThrombusLumenCarriesTheLoad) {
  const int nt = 32;
  const double L = 12.0;
  const HexWallMesh w = cylinder_wall(10.0, 1.5, 2, nt, 6, L);
  const TetFillMesh t = cap_ends(split_to_tets(build_ilt_lattice(w, cylinder_profiles(5.0, nt, 6, L), 2)));
  const FeModel m = wall_ilt_model(w, t, MaterialSpec{}, ilt_material_for(MaterialSpec{}));
  EXPECT_TRUE(m.pressure_quads.empty());
  EXPECT_EQ(m.pressure_tris.size(), 2u * nt * 6u);
  const PressureLoad l = apply_pressure(m, 10.0);
  double fr = 0.0;
  for (std::size_t v = 0; v < m.nodes.size(); ++v) fr += radial(m.nodes[v], l.forces.segment<3>(3 * v));
  EXPECT_NEAR(fr, 0.01 * nt * 5.0 * std::sin(2.0 * pi / nt) * L, 1e-10);
}

TEST(Solve, ThickTubeMatchesLameAndBBarAvoidsLocking) {
  const double a = 5.0, b = 10.0, L = 4.0, p = 0.1;
  const Lame ex{a, b, p, 3.0, 0.49};
  auto inner_u = [&](int layers, Formulation f) {
    const HexWallMesh w = cylinder_wall(b, b - a, layers, 48, 4, L);
    const FeModel m = wall_model(w, MaterialSpec{3.0, 0.49});
    const Vec u = solve_constrained(m, apply_pressure(m.nodes, m.pressure_quads, {}, p).forces, plane_strain(m, L), f);
    const int v = w.lattice.node(2, 5, layers);
    return radial(m.nodes[v], u.segment<3>(3 * v));
  };
  const double bbar = inner_u(1, Formulation::BBar), plain = inner_u(1, Formulation::Plain);
  EXPECT_GE(bbar / plain, 2.0);
  EXPECT_NEAR(inner_u(4, Formulation::BBar) / ex.u(a), 1.0, 0.01);
}

TEST(Solve, ThinTubeHoopStress) {
  const double b = 10.0, t = 0.6, a = b - t, L = 4.0, p = 0.012;
  const Lame ex{a, b, p, 3.0, 0.3};
  const HexWallMesh w = cylinder_wall(b, t, 2, 128, 4, L);
  const FeModel m = wall_model(w, MaterialSpec{3.0, 0.3});
  const Vec u = solve_constrained(m, apply_pressure(m.nodes, m.pressure_quads, {}, p).forces, plane_strain(m, L),
                                  Formulation::BBar);
  const StressField sf = recover_stress(m, u);
  const int v = w.lattice.node(2, 9, 1);  // mid-wall node
  const double rm = std::hypot(m.nodes[v].x(), m.nodes[v].y());
  EXPECT_NEAR(sf.max_principal[v] / ex.hoop(rm), 1.0, 0.01);
  EXPECT_NEAR(ex.hoop(rm) / (p * rm / t), 1.0, 0.05);
  EXPECT_NEAR(radial(m.nodes[v], u.segment<3>(3 * v)) / ex.u(rm), 1.0, 0.01);
}

TEST(Solve, UniaxialStressOverE) {
  const MaterialSpec mat{2.0, 0.3};
  FeModel m;
  for (int z = 0; z <= 1; ++z)
    for (int y = 0; y <= 1; ++y)
      for (int x = 0; x <= 4; ++x) m.nodes.emplace_back(x, y, z);
  auto id = [](int x, int y, int z) { return (z * 2 + y) * 5 + x; };
  for (int x = 0; x < 4; ++x)
    m.hexes.push_back({id(x, 0, 0), id(x + 1, 0, 0), id(x + 1, 1, 0), id(x, 1, 0), id(x, 0, 1), id(x + 1, 0, 1),
                       id(x + 1, 1, 1), id(x, 1, 1)});
  m.hex_part.assign(4, 0);
  m.materials = {mat};
  const double strain = 1e-3;
  Constraints c(m.nodes.size());
  for (std::size_t v = 0; v < m.nodes.size(); ++v) {
    const Vec3& x = m.nodes[v];
    if (x.x() == 0.0 || x.x() == 4.0) c.fix(static_cast<int>(v), 0, strain * x.x());
    if (x.y() == 0.0) c.fix(static_cast<int>(v), 1);
    if (x.z() == 0.0) c.fix(static_cast<int>(v), 2);
  }
  for (auto f : {Formulation::BBar, Formulation::Plain}) {
    const Vec u = solve_constrained(m, Vec::Zero(3 * m.nodes.size()), c, f);
    const StressField sf = recover_stress(m, u, f);
    for (std::size_t v = 0; v < m.nodes.size(); ++v) {
      EXPECT_NEAR(sf.max_principal[v], mat.youngs_modulus * strain, 1e-12);
      EXPECT_NEAR(u[3 * v + 1], -mat.poisson_ratio * strain * m.nodes[v].y(), 1e-14);
    }
  }
}

TEST(Solve, ZeroLoadGivesZeroField) {
  const FeModel m = wall_model(cylinder_wall(10.0, 1.5, 2, 16, 4, 8.0), MaterialSpec{});
  const StaticResult r = solve_static(m, Vec::Zero(3 * m.nodes.size()), make_constraints(m, BCSpec{}));
  EXPECT_EQ(r.displacement.norm(), 0.0);
  const StressStats s = stress_stats(recover_stress(m, r.displacement));
  EXPECT_EQ(s.peak, 0.0);
  EXPECT_EQ(s.p99, 0.0);
}

TEST(Solve, ReactionsBalanceAppliedLoad) {
  const FeModel m = wall_model(cylinder_wall(10.0, 1.5, 2, 32, 16, 24.0), MaterialSpec{});
  // A lopsided load: pressure on half the inner surface only.
  std::vector<Quad> half;
  for (const auto& q : m.pressure_quads)
    if (m.nodes[q[0]].x() > 0.0) half.push_back(q);
  const PressureLoad l = apply_pressure(m.nodes, half, {}, 0.012);
  ASSERT_GT(l.net_force.norm(), 1.0);
  const StaticResult r = solve_static(m, l.forces, make_constraints(m, BCSpec{}));
  EXPECT_LE(r.equilibrium_residual, 1e-8);
  EXPECT_LE(r.reaction_balance, 1e-8);
  EXPECT_NEAR((r.reaction_sum + l.net_force).norm(), 0.0, 1e-8 * l.sum_abs);
}

TEST(Solve, UnknownSetAndRigidModesAreErrors) {
  const FeModel m = wall_model(cylinder_wall(10.0, 1.5, 2, 16, 4, 8.0), MaterialSpec{});
  EXPECT_THROW(make_constraints(m, BCSpec{{"NOPE"}}), ConfigError);
  EXPECT_THROW(solve_static(m, apply_pressure(m, 12.0).forces, make_constraints(m, BCSpec{{}})), SolverError);
}

TEST(Stats, PercentileConvention) {
  std::vector<double> v;
  for (int k = 1; k <= 10; ++k) v.push_back(k);
  EXPECT_DOUBLE_EQ(percentile_sorted(v, 50.0), 5.5);
  EXPECT_DOUBLE_EQ(percentile_sorted(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(percentile_sorted(v, 100.0), 10.0);
  EXPECT_DOUBLE_EQ(percentile_sorted(v, 99.0), 9.91);
  std::shuffle(v.begin(), v.end(), std::mt19937_64(1));
  const StressStats s = stress_stats(v);
  EXPECT_EQ(s.count, 10u);
  EXPECT_EQ(s.peak, 10.0);
  EXPECT_DOUBLE_EQ(s.median, 5.5);
  EXPECT_DOUBLE_EQ(s.curve[25], 3.25);
  EXPECT_THROW(stress_stats(std::vector<double>{}), FemError);
}

TEST(Stats, WallNodesOnlyWhenThrombusPresent) {
  StressField f;
  f.max_principal = {1.0, 2.0, 100.0};
  f.on_hex = {1, 1, 0};
  EXPECT_EQ(stress_stats(f).peak, 2.0);
  f.on_hex = {0, 0, 0};
  EXPECT_EQ(stress_stats(f).peak, 100.0);
}

TEST(Stats, ProbesSnapToNearestWallNode) {
  const FeModel m = wall_model(cylinder_wall(10.0, 1.5, 2, 16, 4, 8.0), MaterialSpec{});
  StressField f;
  f.on_hex.assign(m.nodes.size(), 1);
  for (std::size_t v = 0; v < m.nodes.size(); ++v) f.max_principal.push_back(static_cast<double>(v));
  const auto pr = probe(m, f, {m.nodes[17] + Vec3(0, 0, 0.01), Vec3(500, 0, 0)});
  EXPECT_EQ(pr[0].node, 17);
  EXPECT_NEAR(pr[0].distance, 0.01, 1e-12);
  EXPECT_EQ(pr[0].value, 17.0);
  EXPECT_FALSE(pr[0].out_of_domain);
  EXPECT_TRUE(pr[1].out_of_domain);
}
