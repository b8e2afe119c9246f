#include "hexwall/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace hexwall;

namespace {

std::array<Vec3, 8> unit_cube() {
  return {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(0, 1, 0),
          Vec3(0, 0, 1), Vec3(1, 0, 1), Vec3(1, 1, 1), Vec3(0, 1, 1)};
}

template <std::size_t N>
std::array<Vec3, N> mapped(std::array<Vec3, N> p, const Mat3& a) {
  for (auto& v : p) v = a * v;
  return p;
}

const double deg = 180.0 / pi;

}  // namespace

TEST(ScaledJacobian, UnitCubeIsOne) {
  const auto m = scaled_jacobian_hex(unit_cube());
  EXPECT_NEAR(m.value, 1.0, 1e-15);
  EXPECT_FALSE(m.degenerate);
}

TEST(ScaledJacobian, ShearOf45DegreesGivesSin45) {
  Mat3 a = Mat3::Identity();
  a(0, 2) = 1.0;  // top face slides one edge length along x
  EXPECT_NEAR(scaled_jacobian_hex(mapped(unit_cube(), a)).value, std::sin(pi / 4), 1e-12);
}

TEST(ScaledJacobian, InvariantUnderRotationAndScaling) {
  const Mat3 r = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix() * 3.5;
  EXPECT_NEAR(scaled_jacobian_hex(mapped(unit_cube(), r)).value, 1.0, 1e-12);
}

TEST(ScaledJacobian, CollapsedCornerIsZeroAndDegenerate) {
  auto p = unit_cube();
  p[6] = p[7];
  const auto m = scaled_jacobian_hex(p);
  EXPECT_EQ(m.value, 0.0);
  EXPECT_TRUE(m.degenerate);
}

TEST(ScaledJacobian, MirroredElementIsNegative) {
  Mat3 a = Mat3::Identity();
  a(2, 2) = -1.0;
  EXPECT_NEAR(scaled_jacobian_hex(mapped(unit_cube(), a)).value, -1.0, 1e-15);
}

TEST(FaceAngles, SquareAndRhombus) {
  const std::array<Vec3, 4> sq{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(0, 1, 0)};
  auto a = quad_angles(sq);
  EXPECT_NEAR(a.min_deg, 90.0, 1e-12);
  EXPECT_NEAR(a.max_deg, 90.0, 1e-12);
  const double c = std::cos(pi / 3), s = std::sin(pi / 3);
  const std::array<Vec3, 4> rh{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1 + c, s, 0), Vec3(c, s, 0)};
  a = quad_angles(rh);
  EXPECT_NEAR(a.min_deg, 60.0, 1e-12);
  EXPECT_NEAR(a.max_deg, 120.0, 1e-12);
  EXPECT_FALSE(a.within(45.0, 119.0));
  EXPECT_TRUE(a.within(45.0, 135.0));
}

TEST(FaceAngles, RhombicPrism) {
  // Rhombus with a 60 degree corner extruded along z.
  Mat3 a = Mat3::Identity();
  a(0, 1) = std::cos(pi / 3);
  a(1, 1) = std::sin(pi / 3);
  const auto p = mapped(unit_cube(), a);
  const auto ang = hex_face_angles(p);
  EXPECT_NEAR(ang.min_deg, 60.0, 1e-12);
  EXPECT_NEAR(ang.max_deg, 120.0, 1e-12);
  EXPECT_NEAR(scaled_jacobian_hex(p).value, std::sin(pi / 3), 1e-12);
  EXPECT_NEAR(hex_volume(p), a.determinant(), 1e-14);
}

TEST(FaceAngles, Triangles) {
  const std::array<Vec3, 3> eq{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0.5, std::sqrt(3.0) / 2, 0)};
  auto a = tri_angles(eq);
  EXPECT_NEAR(a.min_deg, 60.0, 1e-12);
  EXPECT_NEAR(a.max_deg, 60.0, 1e-12);
  const std::array<Vec3, 3> ri{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  a = tri_angles(ri);
  EXPECT_NEAR(a.min_deg, 45.0, 1e-12);
  EXPECT_NEAR(a.max_deg, 90.0, 1e-12);
  const double h = 1e-3;
  const std::array<Vec3, 3> sl{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0.5, h, 0)};
  a = tri_angles(sl);
  EXPECT_NEAR(a.min_deg, std::atan(2 * h) * deg, 1e-10);
  EXPECT_NEAR(a.max_deg, 180.0 - 2 * std::atan(2 * h) * deg, 1e-10);
  EXPECT_FALSE(a.degenerate);
  const std::array<Vec3, 3> flat{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)};
  EXPECT_TRUE(tri_angles(flat).degenerate);
}

TEST(FaceAngles, SmallAnglesStayAccurate) {
  EXPECT_NEAR(angle_deg(Vec3(1, 0, 0), Vec3(1, 1e-9, 0)) / (1e-9 * deg), 1.0, 1e-9);
  EXPECT_NEAR(angle_deg(Vec3(1, 0, 0), Vec3(-1, 1e-9, 0)), 180.0 - 1e-9 * deg, 1e-12);
}

TEST(VolSkew, RegularTetIsZero) {
  const std::array<Vec3, 4> t{Vec3(1, 1, 1), Vec3(1, -1, -1), Vec3(-1, 1, -1), Vec3(-1, -1, 1)};
  EXPECT_NEAR(tet_circumradius(t), std::sqrt(3.0), 1e-14);
  EXPECT_NEAR(vol_skew_tet(t).value, 0.0, 1e-12);
}

TEST(VolSkew, RightCornerTetIsOneHalf) {
  // V = 1/6, R = sqrt(3)/2, V_regular(R) = 1/3.
  const std::array<Vec3, 4> t{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  EXPECT_NEAR(tet_circumradius(t), std::sqrt(3.0) / 2, 1e-14);
  EXPECT_NEAR(regular_tet_volume_from_circumradius(std::sqrt(3.0) / 2), 1.0 / 3.0, 1e-14);
  EXPECT_NEAR(vol_skew_tet(t).value, 0.5, 1e-12);
}

TEST(VolSkew, FlatTetIsOneAndDegenerate) {
  const std::array<Vec3, 4> t{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)};
  const auto m = vol_skew_tet(t);
  EXPECT_EQ(m.value, 1.0);
  EXPECT_TRUE(m.degenerate);
}

TEST(VolSkew, MatchesBruteForceOnRandomTets) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int n = 0; n < 200; ++n) {
    std::array<Vec3, 4> t;
    for (auto& v : t) v = Vec3(u(rng), u(rng), u(rng));
    // Circumcentre by solving the 3x3 linear system |x - p_i|^2 = |x - p_0|^2.
    Mat3 a;
    Vec3 b;
    for (int i = 0; i < 3; ++i) {
      a.row(i) = 2.0 * (t[i + 1] - t[0]).transpose();
      b[i] = t[i + 1].squaredNorm() - t[0].squaredNorm();
    }
    const Vec3 cc = a.fullPivLu().solve(b);
    const double R = (cc - t[0]).norm();
    const double edge = 4.0 * R / std::sqrt(6.0);
    const double vreg = edge * edge * edge / (6.0 * std::sqrt(2.0));
    const double v = std::abs((t[1] - t[0]).dot((t[2] - t[0]).cross(t[3] - t[0]))) / 6.0;
    EXPECT_NEAR(vol_skew_tet(t).value, 1.0 - v / vreg, 1e-8);
  }
}

TEST(HexVolume, FrustumIsExact) {
  const double a = 2.0, b = 1.0, h = 3.0;
  const std::array<Vec3, 8> p{Vec3(0, 0, 0), Vec3(a, 0, 0), Vec3(a, a, 0), Vec3(0, a, 0),
                              Vec3(0, 0, h), Vec3(b, 0, h), Vec3(b, b, h), Vec3(0, b, h)};
  EXPECT_NEAR(hex_volume(p), h * (a * a + a * b + b * b) / 3.0, 1e-13);
  EXPECT_NEAR(tet_signed_volume(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)), 1.0 / 6.0, 1e-16);
}
