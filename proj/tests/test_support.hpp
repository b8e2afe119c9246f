#ifndef HEXWALL_TEST_SUPPORT_HPP
#define HEXWALL_TEST_SUPPORT_HPP

#include "hexwall/geometry.hpp"
#include "hexwall/hexmesher.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace hexwall::testing {

/// Profiles of an analytic tube along z: slice j at z = j * length / n_axial,
/// radius given by r(theta, z).
inline std::vector<SliceProfile> tube_profiles(int n_theta, int n_axial, double length,
                                               const std::function<double(double, double)>& r) {
  std::vector<SliceProfile> out(n_axial + 1);
  const auto angles = uniform_angles(n_theta);
  for (int j = 0; j <= n_axial; ++j) {
    auto& p = out[j];
    const double z = length * j / n_axial;
    p.center = Vec3(0, 0, z);
    p.normal = Vec3::UnitX();
    p.binormal = Vec3::UnitY();
    p.angles = angles;
    for (double th : angles) p.radii.push_back(r(th, z));
  }
  return out;
}

inline std::vector<SliceProfile> cylinder_profiles(double radius, int n_theta, int n_axial, double length) {
  return tube_profiles(n_theta, n_axial, length, [radius](double, double) { return radius; });
}

inline HexWallMesh cylinder_wall(double outer_radius, double thickness, int n_layers, int n_theta, int n_axial,
                                 double length) {
  MeshParams mp;
  mp.wall_thickness = thickness;
  mp.n_layers = n_layers;
  mp.n_theta = n_theta;
  mp.n_axial = n_axial;
  return sweep(cylinder_profiles(outer_radius, n_theta, n_axial, length), mp);
}

/// Fresh scratch directory under the system temp dir.
inline std::string scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("hexwall_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

}  // namespace hexwall::testing

#endif  // HEXWALL_TEST_SUPPORT_HPP
