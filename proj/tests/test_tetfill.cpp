#include "hexwall/tetfill.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>

using namespace hexwall;
using hexwall::testing::cylinder_profiles;
using hexwall::testing::cylinder_wall;

namespace {

struct Fixture {
  HexWallMesh wall;
  TetFillMesh ilt;
};

Fixture annulus(int nt, int na, double length, double lumen_r, int n_radial) {
  Fixture f;
  f.wall = cylinder_wall(10.0, 1.5, 2, nt, na, length);
  const auto lat = build_ilt_lattice(f.wall, cylinder_profiles(lumen_r, nt, na, length), n_radial);
  f.ilt = cap_ends(split_to_tets(lat));
  return f;
}

double tet_volume_sum(const TetFillMesh& m) {
  double v = 0.0;
  for (std::size_t t = 0; t < m.tets.size(); ++t) {
    const auto p = m.corners(t);
    v += tet_signed_volume(p[0], p[1], p[2], p[3]);
  }
  return v;
}

}  // namespace

TEST(IltLattice, NodesInterpolateAlongRays) {
  const HexWallMesh wall = cylinder_wall(10.0, 1.5, 2, 12, 3, 6.0);
  const auto lat = build_ilt_lattice(wall, cylinder_profiles(5.0, 12, 3, 6.0), 2);
  const double expected[3] = {5.0, 6.75, 8.5};
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 12; ++i)
      for (int m = 0; m < 3; ++m) {
        const Vec3& p = lat.nodes[lat.node(j, i, m)];
        EXPECT_NEAR(std::hypot(p.x(), p.y()), expected[m], 1e-12);
      }
  const int top = lat.node(2, 7, 2);
  EXPECT_EQ(lat.wall_node[top], wall.lattice.node(2, 7, 2));
  EXPECT_EQ(lat.wall_node[lat.node(2, 7, 1)], -1);
  EXPECT_EQ(auto_n_radial(wall, cylinder_profiles(5.0, 12, 3, 6.0), 1.0), 4);  // ceil(3.5 / 1)
}

TEST(IltLattice, LumenOutsideWallIsRejected) {
  const HexWallMesh wall = cylinder_wall(10.0, 1.5, 2, 12, 3, 6.0);
  try {
    build_ilt_lattice(wall, cylinder_profiles(9.0, 12, 3, 6.0), 2);
    FAIL();
  } catch (const TetFillError& e) {
    EXPECT_NE(std::string(e.what()).find("lumen not inside wall"), std::string::npos);
    EXPECT_EQ(e.stage(), "tetfill");
  }
}

TEST(SplitCell, UnitCubeGivesSixPositiveTetsOfTotalVolumeOne) {
  const std::vector<Vec3> p{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(0, 1, 0),
                            Vec3(0, 0, 1), Vec3(1, 0, 1), Vec3(1, 1, 1), Vec3(0, 1, 1)};
  const auto tets = split_cell(Hex{0, 1, 2, 3, 4, 5, 6, 7});
  double total = 0.0;
  for (const auto& t : tets) {
    const double v = tet_signed_volume(p[t[0]], p[t[1]], p[t[2]], p[t[3]]);
    EXPECT_NEAR(v, 1.0 / 6.0, 1e-15);
    total += v;
  }
  EXPECT_NEAR(total, 1.0, 1e-15);
}

TEST(TetFill, VolumeEqualsPolygonalAnnulus) {
  // Cells are bounded by planes, so the tets fill the polygonal annulus exactly.
  const int nt = 40;
  const double L = 20.0;
  const Fixture f = annulus(nt, 10, L, 5.0, 3);
  EXPECT_EQ(f.ilt.tets.size(), 6u * 10u * nt * 3u);
  const double poly = 0.5 * nt * std::sin(2.0 * pi / nt) * (8.5 * 8.5 - 5.0 * 5.0) * L;
  EXPECT_NEAR(tet_volume_sum(f.ilt), poly, 1e-10 * poly);
  EXPECT_NEAR(tet_volume_sum(f.ilt) / (pi * (8.5 * 8.5 - 5.0 * 5.0) * L), 1.0, 0.01);
  for (std::size_t t = 0; t < f.ilt.tets.size(); ++t) {
    const auto p = f.ilt.corners(t);
    EXPECT_GT(tet_signed_volume(p[0], p[1], p[2], p[3]), 0.0);
  }
}

TEST(TetFill, VolumeMatchesDivergenceOfBoundary) {
  // Non-planar cells: a wavy lumen still has tets tiling the region bounded by
  // the boundary triangles, so both volumes agree to rounding.
  const int nt = 24, na = 8;
  const double L = 16.0;
  const HexWallMesh wall = cylinder_wall(10.0, 1.5, 2, nt, na, L);
  const auto lumen = hexwall::testing::tube_profiles(
      nt, na, L, [](double th, double z) { return 5.0 + 0.8 * std::sin(3 * th) * std::cos(0.4 * z); });
  const TetFillMesh m = cap_ends(split_to_tets(build_ilt_lattice(wall, lumen, 2)));
  const BoundaryClosure bc = boundary_closure(m);
  double div = 0.0;
  for (const auto& t : bc.triangles)
    div += tet_signed_volume(Vec3::Zero(), m.nodes[t.nodes[0]], m.nodes[t.nodes[1]], m.nodes[t.nodes[2]]);
  EXPECT_NEAR(tet_volume_sum(m), div, 1e-10 * std::abs(div));
}

TEST(TetFill, EveryFaceSharedByAtMostTwoTets) {
  const Fixture f = annulus(16, 5, 10.0, 5.0, 2);
  std::map<std::array<int, 3>, int> use;
  for (const auto& t : f.ilt.tets)
    for (const auto& fc : tet_faces) {
      std::array<int, 3> k{t[fc[0]], t[fc[1]], t[fc[2]]};
      std::sort(k.begin(), k.end());
      ++use[k];
    }
  std::size_t boundary = 0;
  for (const auto& [k, n] : use) {
    EXPECT_LE(n, 2);
    boundary += n == 1;
  }
  // Each boundary lattice quad is cut into exactly two triangles.
  const std::size_t quads = 2 * 16 * 5 + 2 * 16 * 2;
  EXPECT_EQ(boundary, 2 * quads);
}

TEST(TetFill, BoundaryClosureCountsAndTorusTopology) {
  const int nt = 16, na = 5, nr = 2;
  const Fixture f = annulus(nt, na, 10.0, 5.0, nr);
  const BoundaryClosure bc = boundary_closure(f.ilt);
  EXPECT_TRUE(bc.closed());
  EXPECT_EQ(bc.lumen, 2u * nt * na);
  EXPECT_EQ(bc.interface, 2u * nt * na);
  EXPECT_EQ(bc.bottom_cap, 2u * nt * nr);
  EXPECT_EQ(bc.top_cap, 2u * nt * nr);
  EXPECT_EQ(bc.euler_characteristic(), 0);
  EXPECT_EQ(f.ilt.bottom_cap.size(), static_cast<std::size_t>(nt * (nr + 1)));
  EXPECT_EQ(f.ilt.wall_interface.size(), static_cast<std::size_t>(nt * (na + 1)));
  EXPECT_THROW(f.ilt.node_set("INNER"), TetFillError);
}

TEST(Conformity, InterfaceMatchesWallFaces) {
  const Fixture f = annulus(20, 6, 12.0, 5.0, 2);
  const ConformalityReport r = check_conformal(f.wall, f.ilt);
  EXPECT_EQ(r.max_distance, 0.0);
  EXPECT_EQ(r.wall_quads, 20u * 6u);
  EXPECT_EQ(r.min_tris_per_quad, 2);
  EXPECT_EQ(r.max_tris_per_quad, 2);
  EXPECT_EQ(r.unmatched_triangles, 0u);
  EXPECT_EQ(r.pyramid_count, 0u);
  EXPECT_TRUE(r.conformal());
}

TEST(Conformity, PerturbedInterfaceNodeIsReported) {
  Fixture f = annulus(20, 6, 12.0, 5.0, 2);
  const int v = f.ilt.wall_interface[7];
  f.ilt.nodes[v] += Vec3(0, 0, 1e-3);
  const ConformalityReport r = check_conformal(f.wall, f.ilt);
  EXPECT_NEAR(r.max_distance, 1e-3, 1e-12);
  EXPECT_FALSE(r.conformal());
  // A dropped tet opens the boundary and breaks the two-per-quad count.
  Fixture g = annulus(20, 6, 12.0, 5.0, 2);
  g.ilt.tets.erase(g.ilt.tets.begin() + 5);
  EXPECT_THROW(cap_ends(g.ilt), TetFillError);
}

TEST(Merge, InterfaceNodesAreShared) {
  const Fixture f = annulus(12, 4, 8.0, 5.0, 2);
  const CombinedMesh c = merge_wall_ilt(f.wall, f.ilt);
  EXPECT_EQ(c.nodes.size(), f.wall.nodes.size() + f.ilt.nodes.size() - f.ilt.wall_interface.size());
  EXPECT_EQ(c.hexes.size(), f.wall.hexes.size());
  EXPECT_EQ(c.tets.size(), f.ilt.tets.size());
  for (std::size_t v = 0; v < f.ilt.nodes.size(); ++v)
    EXPECT_EQ(c.nodes[c.ilt_to_combined[v]], f.ilt.nodes[v]);
}

TEST(Promote, Tet10SingleAndPair) {
  const std::vector<Vec3> p{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(1, 1, 1)};
  EXPECT_EQ(promote_to_tet10({p[0], p[1], p[2], p[3]}, {Tet{0, 1, 2, 3}}).nodes.size(), 10u);
  // Two tets sharing face 1-2-3: 5 corners + 9 unique edges.
  const auto two = promote_to_tet10(p, {Tet{0, 1, 2, 3}, Tet{4, 2, 1, 3}});
  EXPECT_EQ(two.nodes.size(), 14u);
  EXPECT_EQ(two.corner_node_count, 5u);
  EXPECT_EQ(two.nodes[two.elements[0][5]], Vec3(0.5, 0.5, 0));  // edge 1-2
  EXPECT_EQ(two.nodes[two.elements[0][6]], Vec3(0, 0.5, 0));    // edge 2-0
}
