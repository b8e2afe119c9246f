#include "hexwall/quality.hpp"
#include "hexwall/tetfill.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace hexwall;
using hexwall::testing::cylinder_profiles;
using hexwall::testing::cylinder_wall;

TEST(QualityReport, StraightCylinderPassesEverything) {
  const HexWallMesh m = cylinder_wall(13.0, 1.5, 2, 96, 60, 60.0);
  const QualityReport r = quality_report(HexPart{&m.nodes, &m.hexes, m.nodes.size()}, std::nullopt);
  ASSERT_TRUE(r.hex);
  EXPECT_EQ(r.hex->jacobian_failures, 0u);
  EXPECT_EQ(r.hex->angle_failures, 0u);
  EXPECT_EQ(r.hex->degenerate_count, 0u);
  EXPECT_EQ(r.hex_angle_failure_fraction(), 0.0);
  EXPECT_FALSE(r.tet);
  // Face angles of a circular sweep: 90 degrees except the trapezoid corners of
  // the end faces, which are 90 +- 180 / n_theta.
  EXPECT_NEAR(r.hex->min_angle_deg, 90.0 - 180.0 / 96, 1e-9);
  EXPECT_NEAR(r.hex->max_angle_deg, 90.0 + 180.0 / 96, 1e-9);
}

TEST(QualityReport, CollapsedTetIsOneSkewFailure) {
  std::vector<Vec3> nodes{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1),
                          Vec3(1, 1, 0)};
  const std::vector<Tet> tets{Tet{0, 1, 2, 3}, Tet{0, 1, 4, 2}};
  const QualityReport r = quality_report(std::nullopt, TetPart{&nodes, &tets, nodes.size()});
  ASSERT_TRUE(r.tet);
  EXPECT_EQ(r.tet->skew_failures, 1u);
  EXPECT_EQ(r.tet->max_skew, 1.0);
  EXPECT_EQ(r.tet->worst_skew_element, 1u);
  EXPECT_EQ(r.tet->degenerate_count, 1u);
  EXPECT_NEAR(r.tet->skew[0], 0.5, 1e-12);
}

TEST(QualityReport, CountsMatchBruteForce) {
  HexWallMesh m = cylinder_wall(10.0, 1.5, 2, 24, 12, 12.0);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 0.12);
  for (auto& p : m.nodes) p += Vec3(g(rng), g(rng), g(rng));
  const QualityThresholds th;
  const QualityReport r = quality_report(HexPart{&m.nodes, &m.hexes, m.nodes.size()}, std::nullopt, th);
  std::size_t jf = 0, af = 0;
  double minj = 1e9;
  for (std::size_t e = 0; e < m.hexes.size(); ++e) {
    const auto p = m.corners(e);
    // Independent scaled Jacobian: corner frames written out per corner.
    static const int nb[8][3] = {{1, 3, 4}, {2, 0, 5}, {3, 1, 6}, {0, 2, 7},
                                 {7, 5, 0}, {4, 6, 1}, {5, 7, 2}, {6, 4, 3}};
    double sj = 1e9;
    for (int c = 0; c < 8; ++c) {
      const Vec3 a = (p[nb[c][0]] - p[c]).normalized(), b = (p[nb[c][1]] - p[c]).normalized(),
                 d = (p[nb[c][2]] - p[c]).normalized();
      sj = std::min(sj, a.dot(b.cross(d)));
    }
    double lo = 1e9, hi = -1e9;
    static const int faces[6][4] = {{0, 4, 7, 3}, {1, 2, 6, 5}, {0, 1, 5, 4},
                                    {3, 7, 6, 2}, {0, 3, 2, 1}, {4, 5, 6, 7}};
    for (const auto& f : faces)
      for (int c = 0; c < 4; ++c) {
        const Vec3 u = p[f[(c + 1) % 4]] - p[f[c]], v = p[f[(c + 3) % 4]] - p[f[c]];
        const double ang = std::acos(u.dot(v) / (u.norm() * v.norm())) * 180.0 / pi;
        lo = std::min(lo, ang), hi = std::max(hi, ang);
      }
    jf += sj < th.jacobian_min;
    af += lo < th.quad_angle_min || hi > th.quad_angle_max;
    minj = std::min(minj, sj);
  }
  EXPECT_GT(jf, 0u);
  EXPECT_EQ(r.hex->jacobian_failures, jf);
  EXPECT_EQ(r.hex->angle_failures, af);
  EXPECT_NEAR(r.hex->min_jacobian, minj, 1e-12);
}

TEST(QualityReport, JsonAndTableFields) {
  const HexWallMesh w = cylinder_wall(10.0, 1.5, 2, 16, 4, 8.0);
  const TetFillMesh t = cap_ends(split_to_tets(build_ilt_lattice(w, cylinder_profiles(5.0, 16, 4, 8.0), 2)));
  const QualityReport r = quality_report(HexPart{&w.nodes, &w.hexes, w.nodes.size()},
                                         TetPart{&t.nodes, &t.tets, t.nodes.size()});
  const auto j = to_json(r);
  EXPECT_EQ(j["hexahedral"]["elements"], w.hexes.size());
  EXPECT_EQ(j["tetrahedral"]["elements"], t.tets.size());
  EXPECT_EQ(j["thresholds"]["skew_max"], 0.95);
  EXPECT_FALSE(j["hexahedral"].contains("jacobian"));
  const auto jp = to_json(r, true);
  EXPECT_EQ(jp["tetrahedral"]["skew"].size(), t.tets.size());
  const std::string table = format_table(r);
  for (const char* row : {"No. of elements", "Min. Jacobian", "Max. vol. skew", "Min. angle (deg)",
                          "Hexahedral wall", "Tetrahedral ILT", "N/A"})
    EXPECT_NE(table.find(row), std::string::npos) << row;
  EXPECT_NE(table.find(std::to_string(t.tets.size())), std::string::npos);
}

TEST(QualityThresholds, Validation) {
  QualityThresholds th;
  th.jacobian_min = 0.0;
  EXPECT_THROW(th.validate(), ConfigError);
  th = {};
  th.quad_angle_min = 140.0;
  EXPECT_THROW(quality_report(std::nullopt, std::nullopt, th), ConfigError);
}
