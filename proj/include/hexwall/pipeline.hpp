#ifndef HEXWALL_PIPELINE_HPP
#define HEXWALL_PIPELINE_HPP

// End-to-end runs: configuration, staged geometry -> mesh -> solve execution,
// file emission with a digest manifest, and the convergence and material
// studies built on top of them.

#include "hexwall/core.hpp"
#include "hexwall/fem.hpp"
#include "hexwall/geometry.hpp"
#include "hexwall/hexmesher.hpp"
#include "hexwall/io.hpp"
#include "hexwall/quality.hpp"
#include "hexwall/stl.hpp"
#include "hexwall/tetfill.hpp"

#include "json.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace hexwall {

inline constexpr const char* version = "1.0.0";

/// Raised after outputs are written when the mesh fails the quality gate.
class QualityGateError : public Error {
 public:
  explicit QualityGateError(const std::string& what) : Error("quality", what) {}
};

/// Process exit code for an error: 2 configuration/usage, 3 input geometry or
/// file parsing, 4 meshing, 5 quality gate, 6 finite element solve, 1 other.
inline int exit_code_for(const Error& e) {
  const std::string& s = e.stage();
  if (s == "config") return 2;
  if (s == "geometry" || s == "io") return 3;
  if (s == "mesh" || s == "tetfill") return 4;
  if (s == "quality") return 5;
  if (s == "fem" || s == "solver") return 6;
  return 1;
}

struct PipelineConfig {
  // Geometry source: exactly one of `stl_path` or `synthetic`.
  std::optional<std::string> stl_path;
  std::optional<std::string> lumen_stl_path;
  Vec3 axis_hint = Vec3::UnitZ();
  std::optional<SyntheticAAASpec> synthetic;
  double merge_tolerance = 1e-6;

  CenterlineOptions centerline;
  int profile_smoothing_iterations = 0;
  double profile_smoothing_lambda = 0.5;

  MeshParams mesh;
  int mesh_smoothing_iterations = 0;
  double mesh_smoothing_lambda = 0.5;

  bool include_ilt = false;
  int ilt_n_radial = 0;  // 0 = from the element size

  QualityThresholds quality;
  bool strict_quality = false;

  MaterialSpec wall_material;
  double ilt_stiffness_ratio = 20.0;
  double ilt_poisson_ratio = 0.45;
  PressureSpec pressure{12.0, std::nullopt, std::nullopt};
  BCSpec bcs;
  SolverOptions solver;
  Formulation formulation = Formulation::BBar;

  std::string out_dir = "hexwall_out";
  bool export_vtk = true;
  bool export_inp = true;
  bool export_quadratic = false;
  bool export_stress_tensor = false;
  bool per_element_quality = false;

  std::vector<Vec3> probes;
  std::vector<int> convergence_layers{2, 3, 4};

  MaterialSpec ilt_material() const { return ilt_material_for(wall_material, ilt_stiffness_ratio, ilt_poisson_ratio); }

  void validate() const {
    if (stl_path.has_value() == synthetic.has_value())
      throw ConfigError("geometry: give exactly one of 'stl' or 'synthetic'");
    if (lumen_stl_path && !stl_path) throw ConfigError("geometry: 'lumen_stl' requires 'stl'");
    if (stl_path && !std::filesystem::exists(*stl_path)) throw ConfigError("geometry: file not found: " + *stl_path);
    if (lumen_stl_path && !std::filesystem::exists(*lumen_stl_path))
      throw ConfigError("geometry: file not found: " + *lumen_stl_path);
    if (include_ilt && stl_path && !lumen_stl_path)
      throw ConfigError("include_ilt needs a lumen surface ('lumen_stl')");
    if (!(axis_hint.norm() > 0.0)) throw ConfigError("geometry: axis_hint must be nonzero");
    if (!(centerline.inset_fraction >= 0.0 && centerline.inset_fraction < 0.5))
      throw ConfigError("centerline: inset_fraction must be in [0, 0.5)");
    if (profile_smoothing_iterations < 0 || mesh_smoothing_iterations < 0)
      throw ConfigError("smoothing iterations must be >= 0");
    if (!(profile_smoothing_lambda > 0.0 && profile_smoothing_lambda <= 1.0) ||
        !(mesh_smoothing_lambda > 0.0 && mesh_smoothing_lambda <= 1.0))
      throw ConfigError("smoothing lambda must be in (0, 1]");
    if (ilt_n_radial < 0) throw ConfigError("ilt: n_radial must be >= 0");
    try {
      mesh.validate();
      if (synthetic) synthetic->validate();
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    quality.validate();
    wall_material.validate();
    ilt_material().validate();
    if (!(ilt_stiffness_ratio > 0.0)) throw ConfigError("materials: ilt_stiffness_ratio must be > 0");
    pressure.resolve_kpa();
    if (bcs.fixed_sets.empty()) throw ConfigError("bcs: at least one fixed node set is required");
    if (!(solver.rel_tol > 0.0 && solver.rel_tol <= 1e-8))
      throw ConfigError("solver: rel_tol must be in (0, 1e-8]");
    if (solver.max_iterations < 1) throw ConfigError("solver: max_iterations must be >= 1");
    for (int l : convergence_layers)
      if (l < 1) throw ConfigError("convergence: layer counts must be >= 1");
  }
};

namespace detail {

inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : j.items())
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
      throw ConfigError(where + ": unknown key '" + k + "'");
}

template <class T>
void get(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

inline Vec3 get_vec3(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(where + ": expected [x, y, z]");
  try {
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + ": expected numbers");
  }
}

inline std::string resolve_path(const std::string& p, const std::string& base) {
  if (p.empty() || base.empty() || std::filesystem::path(p).is_absolute()) return p;
  return (std::filesystem::path(base) / p).lexically_normal().string();
}

}  // namespace detail

inline SyntheticAAASpec synthetic_from_json(const nlohmann::json& s) {
  using detail::get;
  detail::check_keys(s,
                     {"length", "base_radius", "bulge_amplitude", "bulge_center", "bulge_width", "asymmetry_offset",
                      "n_theta_facets", "n_z_facets", "lumen_radius", "perturbation", "seed"},
                     "geometry.synthetic");
  SyntheticAAASpec spec;
  const std::string w = "geometry.synthetic";
  get(s, "length", spec.length, w);
  get(s, "base_radius", spec.base_radius, w);
  get(s, "bulge_amplitude", spec.bulge_amplitude, w);
  get(s, "bulge_center", spec.bulge_center, w);
  get(s, "bulge_width", spec.bulge_width, w);
  get(s, "asymmetry_offset", spec.asymmetry_offset, w);
  get(s, "n_theta_facets", spec.n_theta_facets, w);
  get(s, "n_z_facets", spec.n_z_facets, w);
  get(s, "lumen_radius", spec.lumen_radius, w);
  get(s, "perturbation", spec.perturbation, w);
  get(s, "seed", spec.seed, w);
  return spec;
}

inline nlohmann::json to_json(const SyntheticAAASpec& s) {
  return {{"length", s.length},
          {"base_radius", s.base_radius},
          {"bulge_amplitude", s.bulge_amplitude},
          {"bulge_center", s.bulge_center},
          {"bulge_width", s.bulge_width},
          {"asymmetry_offset", s.asymmetry_offset},
          {"n_theta_facets", s.n_theta_facets},
          {"n_z_facets", s.n_z_facets},
          {"lumen_radius", s.lumen_radius},
          {"perturbation", s.perturbation},
          {"seed", s.seed}};
}

/// Parses a JSON configuration. Relative file paths resolve against `base_dir`.
/// Unknown keys are rejected so that misspelt options cannot pass silently.
inline PipelineConfig config_from_json(const nlohmann::json& j, const std::string& base_dir = "") {
  using detail::get;
  PipelineConfig c;
  detail::check_keys(j,
                     {"geometry", "centerline", "mesh", "include_ilt", "ilt", "quality", "materials", "pressure",
                      "bcs", "solver", "output", "probes", "convergence"},
                     "config");
  if (j.contains("geometry")) {
    const auto& g = j["geometry"];
    detail::check_keys(g, {"stl", "lumen_stl", "axis_hint", "merge_tolerance", "synthetic"}, "geometry");
    if (g.contains("stl")) c.stl_path = detail::resolve_path(g["stl"].get<std::string>(), base_dir);
    if (g.contains("lumen_stl")) c.lumen_stl_path = detail::resolve_path(g["lumen_stl"].get<std::string>(), base_dir);
    if (g.contains("axis_hint")) c.axis_hint = detail::get_vec3(g["axis_hint"], "geometry.axis_hint");
    get(g, "merge_tolerance", c.merge_tolerance, "geometry");
    if (g.contains("synthetic")) c.synthetic = synthetic_from_json(g["synthetic"]);
  } else {
    c.synthetic = SyntheticAAASpec{};
  }
  if (j.contains("centerline")) {
    const auto& s = j["centerline"];
    detail::check_keys(s, {"inset_fraction", "smoothing_iterations", "smoothing_lambda"}, "centerline");
    get(s, "inset_fraction", c.centerline.inset_fraction, "centerline");
    get(s, "smoothing_iterations", c.profile_smoothing_iterations, "centerline");
    get(s, "smoothing_lambda", c.profile_smoothing_lambda, "centerline");
  }
  if (j.contains("mesh")) {
    const auto& m = j["mesh"];
    detail::check_keys(m,
                       {"wall_thickness", "n_layers", "target_element_size", "n_theta", "n_axial", "offset_inward",
                        "smoothing_iterations", "smoothing_lambda"},
                       "mesh");
    get(m, "wall_thickness", c.mesh.wall_thickness, "mesh");
    get(m, "n_layers", c.mesh.n_layers, "mesh");
    get(m, "target_element_size", c.mesh.target_element_size, "mesh");
    get(m, "n_theta", c.mesh.n_theta, "mesh");
    get(m, "n_axial", c.mesh.n_axial, "mesh");
    get(m, "offset_inward", c.mesh.offset_inward, "mesh");
    get(m, "smoothing_iterations", c.mesh_smoothing_iterations, "mesh");
    get(m, "smoothing_lambda", c.mesh_smoothing_lambda, "mesh");
  }
  get(j, "include_ilt", c.include_ilt, "config");
  if (j.contains("ilt")) {
    detail::check_keys(j["ilt"], {"n_radial"}, "ilt");
    get(j["ilt"], "n_radial", c.ilt_n_radial, "ilt");
  }
  if (j.contains("quality")) {
    const auto& q = j["quality"];
    detail::check_keys(q, {"jacobian_min", "quad_angle_range", "tri_angle_range", "skew_max", "strict"}, "quality");
    get(q, "jacobian_min", c.quality.jacobian_min, "quality");
    get(q, "skew_max", c.quality.skew_max, "quality");
    get(q, "strict", c.strict_quality, "quality");
    auto range = [&](const char* key, double& lo, double& hi) {
      if (!q.contains(key)) return;
      const auto& r = q[key];
      if (!r.is_array() || r.size() != 2) throw ConfigError(std::string("quality.") + key + ": expected [min, max]");
      lo = r[0].get<double>();
      hi = r[1].get<double>();
    };
    range("quad_angle_range", c.quality.quad_angle_min, c.quality.quad_angle_max);
    range("tri_angle_range", c.quality.tri_angle_min, c.quality.tri_angle_max);
  }
  if (j.contains("materials")) {
    const auto& m = j["materials"];
    detail::check_keys(m, {"wall", "ilt_stiffness_ratio", "ilt_poisson_ratio"}, "materials");
    if (m.contains("wall")) {
      detail::check_keys(m["wall"], {"youngs_modulus", "poisson_ratio"}, "materials.wall");
      get(m["wall"], "youngs_modulus", c.wall_material.youngs_modulus, "materials.wall");
      get(m["wall"], "poisson_ratio", c.wall_material.poisson_ratio, "materials.wall");
    }
    get(m, "ilt_stiffness_ratio", c.ilt_stiffness_ratio, "materials");
    get(m, "ilt_poisson_ratio", c.ilt_poisson_ratio, "materials");
  }
  if (j.contains("pressure")) {
    const auto& p = j["pressure"];
    detail::check_keys(p, {"kpa", "systolic_mmhg", "diastolic_mmhg"}, "pressure");
    c.pressure = {};
    if (p.contains("kpa")) c.pressure.kpa = p["kpa"].get<double>();
    if (p.contains("systolic_mmhg")) c.pressure.systolic_mmhg = p["systolic_mmhg"].get<double>();
    if (p.contains("diastolic_mmhg")) c.pressure.diastolic_mmhg = p["diastolic_mmhg"].get<double>();
    if (c.pressure.kpa && (c.pressure.systolic_mmhg || c.pressure.diastolic_mmhg))
      throw ConfigError("pressure: give either 'kpa' or systolic/diastolic, not both");
  }
  if (j.contains("bcs")) {
    detail::check_keys(j["bcs"], {"fixed_sets"}, "bcs");
    get(j["bcs"], "fixed_sets", c.bcs.fixed_sets, "bcs");
  }
  if (j.contains("solver")) {
    const auto& s = j["solver"];
    detail::check_keys(s,
                       {"method", "preconditioner", "rel_tol", "max_iterations", "direct_max_dofs", "formulation"},
                       "solver");
    std::string method = "auto", pre = "multigrid", form = "bbar";
    get(s, "method", method, "solver");
    get(s, "preconditioner", pre, "solver");
    get(s, "formulation", form, "solver");
    get(s, "rel_tol", c.solver.rel_tol, "solver");
    get(s, "max_iterations", c.solver.max_iterations, "solver");
    get(s, "direct_max_dofs", c.solver.direct_max_dofs, "solver");
    if (method == "auto") c.solver.method = SolverOptions::Method::Auto;
    else if (method == "direct") c.solver.method = SolverOptions::Method::Direct;
    else if (method == "pcg") c.solver.method = SolverOptions::Method::Pcg;
    else throw ConfigError("solver.method: expected auto, direct or pcg");
    if (pre == "multigrid") c.solver.preconditioner = SolverOptions::Precond::Multigrid;
    else if (pre == "block_jacobi") c.solver.preconditioner = SolverOptions::Precond::BlockJacobi;
    else if (pre == "jacobi") c.solver.preconditioner = SolverOptions::Precond::Jacobi;
    else throw ConfigError("solver.preconditioner: expected multigrid, block_jacobi or jacobi");
    if (form == "bbar") c.formulation = Formulation::BBar;
    else if (form == "plain") c.formulation = Formulation::Plain;
    else throw ConfigError("solver.formulation: expected bbar or plain");
  }
  if (j.contains("output")) {
    const auto& o = j["output"];
    detail::check_keys(o, {"dir", "vtk", "inp", "quadratic", "stress_tensor", "per_element_quality"}, "output");
    get(o, "dir", c.out_dir, "output");
    get(o, "vtk", c.export_vtk, "output");
    get(o, "inp", c.export_inp, "output");
    get(o, "quadratic", c.export_quadratic, "output");
    get(o, "stress_tensor", c.export_stress_tensor, "output");
    get(o, "per_element_quality", c.per_element_quality, "output");
  }
  if (j.contains("probes")) {
    if (!j["probes"].is_array()) throw ConfigError("probes: expected a list of [x, y, z]");
    for (const auto& p : j["probes"]) c.probes.push_back(detail::get_vec3(p, "probes"));
  }
  if (j.contains("convergence")) {
    detail::check_keys(j["convergence"], {"layers"}, "convergence");
    get(j["convergence"], "layers", c.convergence_layers, "convergence");
  }
  return c;
}

inline PipelineConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j, std::filesystem::path(path).parent_path().string());
}

inline nlohmann::json to_json(const PipelineConfig& c) {
  nlohmann::json j;
  auto& g = j["geometry"];
  if (c.stl_path) g["stl"] = *c.stl_path;
  if (c.lumen_stl_path) g["lumen_stl"] = *c.lumen_stl_path;
  g["axis_hint"] = vec_json(c.axis_hint);
  g["merge_tolerance"] = c.merge_tolerance;
  if (c.synthetic) g["synthetic"] = to_json(*c.synthetic);
  j["centerline"] = {{"inset_fraction", c.centerline.inset_fraction},
                     {"smoothing_iterations", c.profile_smoothing_iterations},
                     {"smoothing_lambda", c.profile_smoothing_lambda}};
  j["mesh"] = {{"wall_thickness", c.mesh.wall_thickness},
               {"n_layers", c.mesh.n_layers},
               {"target_element_size", c.mesh.target_element_size},
               {"n_theta", c.mesh.n_theta},
               {"n_axial", c.mesh.n_axial},
               {"offset_inward", c.mesh.offset_inward},
               {"smoothing_iterations", c.mesh_smoothing_iterations},
               {"smoothing_lambda", c.mesh_smoothing_lambda}};
  j["include_ilt"] = c.include_ilt;
  j["ilt"] = {{"n_radial", c.ilt_n_radial}};
  j["quality"] = {{"jacobian_min", c.quality.jacobian_min},
                  {"quad_angle_range", {c.quality.quad_angle_min, c.quality.quad_angle_max}},
                  {"tri_angle_range", {c.quality.tri_angle_min, c.quality.tri_angle_max}},
                  {"skew_max", c.quality.skew_max},
                  {"strict", c.strict_quality}};
  j["materials"] = {{"wall", {{"youngs_modulus", c.wall_material.youngs_modulus},
                              {"poisson_ratio", c.wall_material.poisson_ratio}}},
                    {"ilt_stiffness_ratio", c.ilt_stiffness_ratio},
                    {"ilt_poisson_ratio", c.ilt_poisson_ratio}};
  auto& p = j["pressure"] = nlohmann::json::object();
  if (c.pressure.kpa) p["kpa"] = *c.pressure.kpa;
  if (c.pressure.systolic_mmhg) p["systolic_mmhg"] = *c.pressure.systolic_mmhg;
  if (c.pressure.diastolic_mmhg) p["diastolic_mmhg"] = *c.pressure.diastolic_mmhg;
  j["bcs"] = {{"fixed_sets", c.bcs.fixed_sets}};
  const char* methods[] = {"auto", "direct", "pcg"};
  const char* pres[] = {"multigrid", "block_jacobi", "jacobi"};
  j["solver"] = {{"method", methods[static_cast<int>(c.solver.method)]},
                 {"preconditioner", pres[static_cast<int>(c.solver.preconditioner)]},
                 {"rel_tol", c.solver.rel_tol},
                 {"max_iterations", c.solver.max_iterations},
                 {"direct_max_dofs", c.solver.direct_max_dofs},
                 {"formulation", c.formulation == Formulation::BBar ? "bbar" : "plain"}};
  j["output"] = {{"dir", c.out_dir},
                 {"vtk", c.export_vtk},
                 {"inp", c.export_inp},
                 {"quadratic", c.export_quadratic},
                 {"stress_tensor", c.export_stress_tensor},
                 {"per_element_quality", c.per_element_quality}};
  auto& pr = j["probes"] = nlohmann::json::array();
  for (const auto& q : c.probes) pr.push_back(vec_json(q));
  j["convergence"] = {{"layers", c.convergence_layers}};
  return j;
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("io", "SHA-256 computation failed");
  std::ostringstream os;
  for (unsigned int k = 0; k < len; ++k) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[k]);
  return os.str();
}

/// Record of one run: configuration snapshot, stage timings and every file
/// written with its SHA-256 digest.
class RunManifest {
 public:
  RunManifest(std::string command, nlohmann::json config) : command_(std::move(command)), config_(std::move(config)) {}

  void timing(const std::string& stage, double seconds) { timings_.emplace_back(stage, seconds); }
  void note(const std::string& key, nlohmann::json value) { notes_[key] = std::move(value); }
  void warn(const std::string& message) { warnings_.push_back(message); }
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// Writes `content` to dir/name and records its digest.
  void emit(const std::string& dir, const std::string& name, const std::string& content) {
    write_text_file((std::filesystem::path(dir) / name).string(), content);
    File f{name, sha256_hex(content), content.size()};
    auto it = std::find_if(files_.begin(), files_.end(), [&](const File& o) { return o.name == name; });
    if (it != files_.end()) *it = f;
    else files_.push_back(f);
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["tool"] = "hexwall";
    j["version"] = version;
    j["command"] = command_;
    j["config"] = config_;
    auto& t = j["timings_seconds"] = nlohmann::json::array();
    for (const auto& [s, v] : timings_) t.push_back({{"stage", s}, {"seconds", v}});
    auto& f = j["outputs"] = nlohmann::json::array();
    for (const auto& o : files_) f.push_back({{"file", o.name}, {"sha256", o.digest}, {"bytes", o.bytes}});
    j["warnings"] = warnings_;
    for (const auto& [k, v] : notes_.items()) j[k] = v;
    return j;
  }

  void write(const std::string& dir) const {
    write_text_file((std::filesystem::path(dir) / "manifest.json").string(), to_json().dump(2) + "\n");
  }

 private:
  struct File {
    std::string name, digest;
    std::size_t bytes;
  };
  std::string command_;
  nlohmann::json config_;
  std::vector<std::pair<std::string, double>> timings_;
  std::vector<File> files_;
  std::vector<std::string> warnings_;
  nlohmann::json notes_ = nlohmann::json::object();
};

class StageTimer {
 public:
  StageTimer(RunManifest* m, std::string stage) : m_(m), stage_(std::move(stage)), t0_(clock::now()) {}
  ~StageTimer() {
    if (m_) m_->timing(stage_, seconds());
  }
  double seconds() const { return std::chrono::duration<double>(clock::now() - t0_).count(); }

 private:
  using clock = std::chrono::steady_clock;
  RunManifest* m_;
  std::string stage_;
  clock::time_point t0_;
};

struct GeometryInput {
  TriSurface wall;
  std::optional<TriSurface> lumen;
};

inline GeometryInput load_geometry(const PipelineConfig& c) {
  GeometryInput g;
  if (c.synthetic) {
    auto s = synth_aaa(*c.synthetic);
    g.wall = std::move(s.wall_outer);
    if (c.include_ilt) g.lumen = std::move(s.lumen);
    return g;
  }
  const StlLoadOptions opts{c.merge_tolerance};
  g.wall = load_stl(*c.stl_path, opts);
  if (c.lumen_stl_path && c.include_ilt) g.lumen = load_stl(*c.lumen_stl_path, opts);
  return g;
}

struct MeshResult {
  MeshParams params;  // with n_theta and n_axial resolved
  Centerline centerline;
  std::vector<SliceProfile> profiles, lumen_profiles;
  HexWallMesh wall;
  std::optional<TetFillMesh> ilt;
  std::optional<ConformalityReport> conformality;
  QualityReport quality;
  std::vector<std::string> warnings;
};

/// Geometry -> centerline -> profiles -> swept wall (-> thrombus fill) -> quality.
/// A coarse pre-pass measures the centerline length and mean outer radius that
/// fix the automatic angular and axial resolutions.
inline MeshResult build_mesh(const PipelineConfig& c, const GeometryInput& g, RunManifest* man = nullptr) {
  MeshResult r;
  r.params = c.mesh;
  {
    StageTimer t(man, "centerline");
    const Centerline coarse = extract_centerline(g.wall, c.axis_hint, 33, c.centerline);
    const auto coarse_profiles = slice_profiles(g.wall, coarse, 64);
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& p : coarse_profiles)
      for (double rad : p.radii) sum += rad, ++n;
    r.params.n_theta = c.mesh.resolve_n_theta(sum / static_cast<double>(n));
    r.params.n_axial = c.mesh.resolve_n_axial(coarse.length());
    r.centerline = extract_centerline(g.wall, c.axis_hint, r.params.n_axial + 1, c.centerline);
  }
  {
    StageTimer t(man, "profiles");
    r.profiles = slice_profiles(g.wall, r.centerline, r.params.n_theta);
    if (c.profile_smoothing_iterations > 0)
      r.profiles = smooth_profiles(r.profiles, c.profile_smoothing_iterations, c.profile_smoothing_lambda).profiles;
  }
  {
    StageTimer t(man, "sweep");
    const OverlapReport ov = detect_overlap(r.centerline, r.profiles, c.mesh.offset_inward ? 0.0 : c.mesh.wall_thickness);
    for (const auto& item : ov.items)
      if (!item.crossing)
        r.warnings.push_back("slices " + std::to_string(item.slice_a) + "/" + std::to_string(item.slice_b) +
                             " nearly overlap at angle index " + std::to_string(item.angle_index));
    r.wall = sweep(r.profiles, r.params);
    if (c.mesh_smoothing_iterations > 0)
      r.wall = laplace_smooth_mesh(r.wall, c.mesh_smoothing_iterations, c.mesh_smoothing_lambda).mesh;
  }
  if (c.include_ilt) {
    StageTimer t(man, "tetfill");
    if (!g.lumen) throw TetFillError("include_ilt requested but no lumen surface is available");
    r.lumen_profiles = slice_profiles(*g.lumen, r.centerline, r.params.n_theta);
    const int nr = c.ilt_n_radial > 0 ? c.ilt_n_radial
                                      : auto_n_radial(r.wall, r.lumen_profiles, c.mesh.target_element_size);
    r.ilt = cap_ends(split_to_tets(build_ilt_lattice(r.wall, r.lumen_profiles, nr)));
    r.conformality = check_conformal(r.wall, *r.ilt);
    if (!r.conformality->conformal())
      throw TetFillError("wall/thrombus interface is not conformal (max node distance " +
                         format_double(r.conformality->max_distance) + " mm, " +
                         std::to_string(r.conformality->quads_with_wrong_count) + " quads without 2 triangles)");
  }
  {
    StageTimer t(man, "quality");
    std::optional<TetPart> tp;
    if (r.ilt) tp = TetPart{&r.ilt->nodes, &r.ilt->tets, r.ilt->nodes.size()};
    r.quality = quality_report(HexPart{&r.wall.nodes, &r.wall.hexes, r.wall.nodes.size()}, tp, c.quality);
  }
  return r;
}

/// Hard gate on the Jacobian; angle and skew failures only warn unless strict.
inline std::optional<std::string> quality_gate(const QualityReport& q, bool strict) {
  std::string msg;
  if (q.hex && q.hex->jacobian_failures > 0)
    msg += std::to_string(q.hex->jacobian_failures) + " hexahedra below the scaled Jacobian limit (min " +
           format_double(q.hex->min_jacobian) + ")";
  if (strict) {
    auto add = [&](const std::string& s) { msg += (msg.empty() ? "" : "; ") + s; };
    if (q.hex && q.hex->angle_failures > 0) add(std::to_string(q.hex->angle_failures) + " hexahedra outside the face-angle range");
    if (q.tet && q.tet->skew_failures > 0) add(std::to_string(q.tet->skew_failures) + " tetrahedra above the skew limit");
    if (q.tet && q.tet->angle_failures > 0) add(std::to_string(q.tet->angle_failures) + " tetrahedra outside the face-angle range");
  }
  if (msg.empty()) return std::nullopt;
  return msg;
}

inline std::vector<std::string> quality_warnings(const QualityReport& q) {
  std::vector<std::string> w;
  std::ostringstream os;
  if (q.hex && q.hex->angle_failures > 0) {
    os << q.hex->angle_failures << " hexahedra (" << std::setprecision(3) << 100.0 * q.hex_angle_failure_fraction()
       << "% of " << q.hex->elements << ") fall outside the face-angle range";
    w.push_back(os.str());
  }
  if (q.tet && q.tet->skew_failures > 0)
    w.push_back(std::to_string(q.tet->skew_failures) + " tetrahedra exceed the volumetric skew limit");
  if (q.tet && q.tet->angle_failures > 0)
    w.push_back(std::to_string(q.tet->angle_failures) + " tetrahedra fall outside the face-angle range");
  return w;
}

inline FeModel build_model(const PipelineConfig& c, const MeshResult& m) {
  if (m.ilt) return wall_ilt_model(m.wall, *m.ilt, c.wall_material, c.ilt_material());
  return wall_model(m.wall, c.wall_material);
}

/// Mid-length probe points at angles 0 and pi on the outer and inner wall surfaces.
inline std::vector<Vec3> default_probes(const HexWallMesh& w) {
  const WallLattice& L = w.lattice;
  const int j = L.n_slices / 2;
  return {w.nodes[L.node(j, 0, 0)], w.nodes[L.node(j, L.n_theta / 2, 0)], w.nodes[L.node(j, 0, L.n_layers)],
          w.nodes[L.node(j, L.n_theta / 2, L.n_layers)]};
}

struct SolveResult {
  double pressure_kpa = 0.0;
  FeModel model;
  StaticResult solution;
  StressField stress;
  StressStats stats;
  double seconds = 0.0;
  std::vector<std::string> warnings;
};

inline SolveResult run_solve(const PipelineConfig& c, const MeshResult& m, RunManifest* man = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  SolveResult r;
  r.pressure_kpa = c.pressure.resolve_kpa();
  r.model = build_model(c, m);
  Vec f;
  {
    StageTimer t(man, "loads");
    f = apply_pressure(r.model, r.pressure_kpa).forces;
  }
  const Constraints cons = make_constraints(r.model, c.bcs);
  r.solution = solve_static(r.model, f, cons, c.solver, c.formulation);
  if (man) {
    man->timing("assemble", r.solution.assemble_seconds);
    man->timing("solve", r.solution.solve.setup_seconds + r.solution.solve.solve_seconds);
  }
  if (!(r.solution.equilibrium_residual <= 1e-8))
    throw SolverError("equilibrium residual " + format_double(r.solution.equilibrium_residual) + " exceeds 1e-8",
                      r.solution.solve.residual_history);
  {
    StageTimer t(man, "stress");
    r.stress = recover_stress(r.model, r.solution.displacement, c.formulation);
    r.stats = stress_stats(r.stress);
    r.stats.probes = probe(r.model, r.stress, c.probes.empty() ? default_probes(m.wall) : c.probes);
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("io", "cannot create output directory '" + dir + "': " + ec.message());
}

/// Mesh files, quality report and inspection JSON.
inline void emit_mesh_outputs(const PipelineConfig& c, const MeshResult& m, RunManifest& man) {
  StageTimer t(&man, "export");
  const std::string& d = c.out_dir;
  if (c.export_vtk) {
    man.emit(d, "wall.vtk", format_vtk(to_unstructured(m.wall), "hexwall wall"));
    if (m.ilt) man.emit(d, "ilt.vtk", format_vtk(to_unstructured(*m.ilt), "hexwall ilt"));
  }
  if (c.export_inp) {
    man.emit(d, "wall.inp", format_inp(to_unstructured(m.wall), "hexwall wall"));
    if (m.ilt) {
      man.emit(d, "ilt.inp", format_inp(to_unstructured(*m.ilt), "hexwall ilt"));
      man.emit(d, "model.inp",
               format_inp(to_unstructured(wall_ilt_model(m.wall, *m.ilt, c.wall_material, c.ilt_material())),
                          "hexwall wall + ilt"));
    }
  }
  if (c.export_quadratic) {
    const Hex20Mesh h20 = promote_to_hex20(m.wall);
    if (c.export_vtk) man.emit(d, "wall_hex20.vtk", format_vtk(to_unstructured(h20), "hexwall wall hex20"));
    if (c.export_inp) man.emit(d, "wall_hex20.inp", format_inp(to_unstructured(h20), "hexwall wall hex20"));
    if (m.ilt) {
      const Tet10Mesh t10 = promote_to_tet10(m.ilt->nodes, m.ilt->tets);
      if (c.export_vtk) man.emit(d, "ilt_tet10.vtk", format_vtk(to_unstructured(t10), "hexwall ilt tet10"));
      if (c.export_inp) man.emit(d, "ilt_tet10.inp", format_inp(to_unstructured(t10), "hexwall ilt tet10"));
    }
  }
  man.emit(d, "quality.json", to_json(m.quality, c.per_element_quality).dump(2) + "\n");
  man.emit(d, "quality.txt", format_table(m.quality));
  man.emit(d, "centerline.json", to_json(m.centerline).dump(2) + "\n");
  man.emit(d, "profiles.json", to_json(m.profiles).dump() + "\n");
  nlohmann::json mesh_info = {{"n_theta", m.params.n_theta},
                              {"n_axial", m.params.n_axial},
                              {"n_layers", m.params.n_layers},
                              {"hexahedra", m.wall.hexes.size()},
                              {"wall_nodes", m.wall.nodes.size()}};
  if (m.ilt) {
    mesh_info["tetrahedra"] = m.ilt->tets.size();
    mesh_info["ilt_nodes"] = m.ilt->nodes.size();
    mesh_info["ilt_n_radial"] = m.ilt->n_radial;
    mesh_info["interface_max_distance_mm"] = m.conformality->max_distance;
  }
  man.note("mesh", mesh_info);
}

inline void emit_solve_outputs(const PipelineConfig& c, const SolveResult& s, RunManifest& man) {
  StageTimer t(&man, "export");
  UnstructuredMesh u = to_unstructured(s.model);
  u.point_scalars["max_principal_stress_MPa"] = s.stress.max_principal;
  if (c.export_stress_tensor) u.point_tensors["stress_MPa"] = s.stress.tensor;
  u.node_sets.clear();
  man.emit(c.out_dir, "stress.vtk", format_vtk(u, "hexwall max principal stress"));
  nlohmann::json stats = to_json(s.stats);
  stats["pressure_kPa"] = s.pressure_kpa;
  stats["equilibrium_residual"] = s.solution.equilibrium_residual;
  stats["reaction_balance"] = s.solution.reaction_balance;
  stats["elements"] = s.model.element_count();
  stats["nodes"] = s.model.nodes.size();
  stats["solve_seconds"] = s.seconds;
  man.emit(c.out_dir, "stats.json", stats.dump(2) + "\n");
  man.emit(c.out_dir, "solver_log.json", to_json(s.solution.solve).dump(2) + "\n");
  man.note("pressure_kPa", s.pressure_kpa);
}

/// Writes wall and lumen STL files of a synthetic aneurysm.
inline void cmd_synth(const SyntheticAAASpec& spec, const std::string& out_dir, StlFormat fmt = StlFormat::Ascii) {
  RunManifest man("synth", {{"synthetic", to_json(spec)}, {"format", fmt == StlFormat::Ascii ? "ascii" : "binary"}});
  const SyntheticAAA s = [&] {
    StageTimer t(&man, "synth");
    return synth_aaa(spec);
  }();
  ensure_dir(out_dir);
  man.emit(out_dir, "wall.stl", format_stl(s.wall_outer, fmt, "aaa_wall"));
  man.emit(out_dir, "lumen.stl", format_stl(s.lumen, fmt, "aaa_lumen"));
  man.note("max_diameter_mm", spec.max_diameter());
  man.write(out_dir);
}

/// Builds and exports the mesh. Outputs and manifest are written before the
/// quality gate is applied, so a failing mesh can still be inspected.
inline MeshResult cmd_mesh(const PipelineConfig& c) {
  c.validate();
  RunManifest man("mesh", to_json(c));
  ensure_dir(c.out_dir);
  GeometryInput g;
  {
    StageTimer t(&man, "geometry");
    g = load_geometry(c);
  }
  MeshResult m = build_mesh(c, g, &man);
  for (const auto& w : m.warnings) man.warn(w);
  for (const auto& w : quality_warnings(m.quality)) man.warn(w);
  emit_mesh_outputs(c, m, man);
  man.write(c.out_dir);
  if (auto fail = quality_gate(m.quality, c.strict_quality)) throw QualityGateError("quality gate failed: " + *fail);
  return m;
}

inline SolveResult cmd_solve(const PipelineConfig& c) {
  c.validate();
  RunManifest man("solve", to_json(c));
  ensure_dir(c.out_dir);
  GeometryInput g;
  {
    StageTimer t(&man, "geometry");
    g = load_geometry(c);
  }
  const MeshResult m = build_mesh(c, g, &man);
  for (const auto& w : m.warnings) man.warn(w);
  for (const auto& w : quality_warnings(m.quality)) man.warn(w);
  if (auto fail = quality_gate(m.quality, c.strict_quality)) {
    emit_mesh_outputs(c, m, man);
    man.write(c.out_dir);
    throw QualityGateError("quality gate failed: " + *fail);
  }
  emit_mesh_outputs(c, m, man);
  SolveResult s = run_solve(c, m, &man);
  for (const auto& p : s.stats.probes)
    if (p.out_of_domain)
      man.warn("probe (" + format_double(p.point.x()) + ", " + format_double(p.point.y()) + ", " +
               format_double(p.point.z()) + ") is " + format_double(p.distance) + " mm from the nearest node");
  emit_solve_outputs(c, s, man);
  man.write(c.out_dir);
  s.warnings = man.warnings();
  return s;
}

struct ConvergenceRow {
  int layers = 0;
  double element_size = 0.0;
  std::size_t elements = 0, nodes = 0;
  double peak = 0.0, p99 = 0.0, seconds = 0.0;
  std::vector<ProbeValue> probes;
  std::array<double, 101> curve{};
};

struct ConvergenceReport {
  std::vector<Vec3> probe_points;
  std::vector<ConvergenceRow> rows;

  /// |p99(first) - p99(last)| / p99(last).
  double p99_relative_difference() const {
    if (rows.size() < 2) return 0.0;
    return std::abs(rows.front().p99 - rows.back().p99) / std::abs(rows.back().p99);
  }
  /// Largest pointwise relative gap between any two curves over percentiles lo..hi.
  double max_curve_gap(int lo = 1, int hi = 99) const {
    double g = 0.0;
    for (std::size_t a = 0; a < rows.size(); ++a)
      for (std::size_t b = a + 1; b < rows.size(); ++b)
        for (int q = lo; q <= hi; ++q) {
          const double ref = std::max(std::abs(rows[a].curve[q]), std::abs(rows[b].curve[q]));
          if (ref > 0.0) g = std::max(g, std::abs(rows[a].curve[q] - rows[b].curve[q]) / ref);
        }
    return g;
  }
  /// Largest relative spread (max - min) / max|v| of any probe across the runs.
  double max_probe_spread() const {
    double g = 0.0;
    if (rows.empty()) return g;
    for (std::size_t k = 0; k < rows.front().probes.size(); ++k) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo, mag = 0.0;
      for (const auto& r : rows) {
        lo = std::min(lo, r.probes[k].value);
        hi = std::max(hi, r.probes[k].value);
        mag = std::max(mag, std::abs(r.probes[k].value));
      }
      if (mag > 0.0) g = std::max(g, (hi - lo) / mag);
    }
    return g;
  }
  bool p99_monotone() const {
    bool inc = true, dec = true;
    for (std::size_t k = 1; k < rows.size(); ++k) {
      inc = inc && rows[k].p99 >= rows[k - 1].p99;
      dec = dec && rows[k].p99 <= rows[k - 1].p99;
    }
    return inc || dec;
  }
};

inline nlohmann::json to_json(const ConvergenceReport& r) {
  nlohmann::json j;
  auto& pts = j["probe_points"] = nlohmann::json::array();
  for (const auto& p : r.probe_points) pts.push_back(vec_json(p));
  auto& rows = j["models"] = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json pr = nlohmann::json::array();
    for (const auto& p : row.probes)
      pr.push_back({{"node", p.node}, {"distance_mm", p.distance}, {"max_principal_stress_MPa", p.value}});
    rows.push_back({{"layers", row.layers},
                    {"element_size_mm", row.element_size},
                    {"elements", row.elements},
                    {"nodes", row.nodes},
                    {"peak_MPa", row.peak},
                    {"p99_MPa", row.p99},
                    {"seconds", row.seconds},
                    {"probes", pr},
                    {"percentile_curve_MPa", row.curve}});
  }
  j["p99_relative_difference_first_last"] = r.p99_relative_difference();
  j["max_percentile_curve_gap_1_99"] = r.max_curve_gap();
  j["max_probe_spread"] = r.max_probe_spread();
  j["p99_monotone"] = r.p99_monotone();
  return j;
}

inline std::string format_table(const ConvergenceReport& r) {
  std::ostringstream os;
  os << std::left << std::setw(28) << "";
  for (const auto& row : r.rows) os << std::right << std::setw(14) << (std::to_string(row.layers) + " layers");
  os << "\n";
  auto line = [&](const std::string& label, auto get, int prec) {
    os << std::left << std::setw(28) << label;
    for (const auto& row : r.rows) os << std::right << std::setw(14) << std::fixed << std::setprecision(prec) << get(row);
    os << "\n";
  };
  line("Element size (mm)", [](const auto& x) { return x.element_size; }, 3);
  line("No. of elements", [](const auto& x) { return static_cast<double>(x.elements); }, 0);
  line("No. of nodes", [](const auto& x) { return static_cast<double>(x.nodes); }, 0);
  line("Peak max principal (MPa)", [](const auto& x) { return x.peak; }, 4);
  line("99th percentile (MPa)", [](const auto& x) { return x.p99; }, 4);
  line("Computation time (s)", [](const auto& x) { return x.seconds; }, 1);
  for (std::size_t k = 0; k < r.probe_points.size(); ++k)
    line("Probe " + std::to_string(k + 1) + " (MPa)", [k](const auto& x) { return x.probes[k].value; }, 4);
  return os.str();
}

/// Solves the wall alone for each layer count with element size
/// thickness / layers. Results are written after every model, so a failure
/// leaves the completed rows on disk.
inline ConvergenceReport cmd_convergence(PipelineConfig c, const std::vector<int>& layers) {
  if (layers.size() < 2) throw ConfigError("convergence: at least 2 layer counts are required");
  c.convergence_layers = layers;
  c.include_ilt = false;
  c.validate();
  ensure_dir(c.out_dir);
  RunManifest man("convergence", to_json(c));
  GeometryInput g;
  {
    StageTimer t(&man, "geometry");
    g = load_geometry(c);
  }
  ConvergenceReport rep;
  rep.probe_points = c.probes;
  auto flush = [&] {
    man.emit(c.out_dir, "convergence.json", to_json(rep).dump(2) + "\n");
    man.emit(c.out_dir, "convergence.txt", format_table(rep));
    man.write(c.out_dir);
  };
  for (int L : layers) {
    PipelineConfig ci = c;
    ci.mesh.n_layers = L;
    ci.mesh.target_element_size = c.mesh.wall_thickness / L;
    const auto t0 = std::chrono::steady_clock::now();
    StageTimer t(&man, "model_" + std::to_string(L) + "_layers");
    const MeshResult m = build_mesh(ci, g);
    if (auto fail = quality_gate(m.quality, false)) {
      flush();
      throw QualityGateError(std::to_string(L) + "-layer mesh: " + *fail);
    }
    if (rep.probe_points.empty()) rep.probe_points = default_probes(m.wall);
    ci.probes = rep.probe_points;
    SolveResult s;
    try {
      s = run_solve(ci, m);
    } catch (...) {
      flush();
      throw;
    }
    ConvergenceRow row;
    row.layers = L;
    row.element_size = ci.mesh.target_element_size;
    row.elements = s.model.element_count();
    row.nodes = s.model.nodes.size();
    row.peak = s.stats.peak;
    row.p99 = s.stats.p99;
    row.curve = s.stats.curve;
    row.probes = s.stats.probes;
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.rows.push_back(row);
  }
  flush();
  return rep;
}

struct MaterialStudy {
  std::vector<double> youngs_moduli;
  std::vector<double> p99;
  double p99_relative_spread = 0.0;      // (max - min) / max over runs
  double max_nodal_relative_change = 0.0;  // max_v |s_v - s_v(ref)| / max(|s_v(ref)|, 1e-9 max|s(ref)|)
};

/// Solves the same mesh with every modulus scaled (the thrombus keeps its
/// stiffness ratio) and compares the stress fields.
inline MaterialStudy material_independence_check(const PipelineConfig& c, const MeshResult& m,
                                                 const std::vector<double>& moduli) {
  if (moduli.size() < 2) throw ConfigError("material study: at least 2 moduli are required");
  MaterialStudy st;
  std::vector<double> ref;
  double ref_max = 0.0;
  for (double E : moduli) {
    PipelineConfig ci = c;
    ci.wall_material.youngs_modulus = E;
    ci.probes = {default_probes(m.wall).front()};
    const SolveResult s = run_solve(ci, m);
    st.youngs_moduli.push_back(E);
    st.p99.push_back(s.stats.p99);
    if (ref.empty()) {
      ref = s.stress.max_principal;
      for (double v : ref) ref_max = std::max(ref_max, std::abs(v));
      continue;
    }
    for (std::size_t v = 0; v < ref.size(); ++v) {
      const double den = std::max(std::abs(ref[v]), 1e-9 * ref_max);
      st.max_nodal_relative_change = std::max(st.max_nodal_relative_change, std::abs(s.stress.max_principal[v] - ref[v]) / den);
    }
  }
  const auto [lo, hi] = std::minmax_element(st.p99.begin(), st.p99.end());
  st.p99_relative_spread = (*hi - *lo) / std::max(std::abs(*hi), std::abs(*lo));
  return st;
}

/// Relative p99 change between two wall Poisson ratios.
inline double poisson_sensitivity(const PipelineConfig& c, const MeshResult& m, double nu_a, double nu_b) {
  auto p99 = [&](double nu) {
    PipelineConfig ci = c;
    ci.wall_material.poisson_ratio = nu;
    ci.probes = {default_probes(m.wall).front()};
    return run_solve(ci, m).stats.p99;
  };
  const double a = p99(nu_a), b = p99(nu_b);
  return std::abs(a - b) / std::abs(b);
}

/// Standalone audit of mesh files (.vtk or .inp). Hexahedra from every file
/// form one part and tetrahedra another.
inline QualityReport cmd_quality(const std::vector<std::string>& paths, const QualityThresholds& th,
                                 const std::string& out_dir = "", bool per_element = false) {
  th.validate();
  std::vector<Vec3> hnodes, tnodes;
  std::vector<Hex> hexes;
  std::vector<Tet> tets;
  std::size_t hex_node_count = 0, tet_node_count = 0;
  for (const auto& p : paths) {
    const UnstructuredMesh u = read_mesh(p);
    const int hoff = static_cast<int>(hnodes.size()), toff = static_cast<int>(tnodes.size());
    auto hs = u.hexes();
    auto ts = u.tets();
    if (!hs.empty()) {
      hnodes.insert(hnodes.end(), u.points.begin(), u.points.end());
      for (auto& h : hs) {
        for (int& v : h) v += hoff;
        hexes.push_back(h);
      }
      hex_node_count += u.node_count({vtk_cell::hex8, vtk_cell::hex20});
    }
    if (!ts.empty()) {
      tnodes.insert(tnodes.end(), u.points.begin(), u.points.end());
      for (auto& t : ts) {
        for (int& v : t) v += toff;
        tets.push_back(t);
      }
      tet_node_count += u.node_count({vtk_cell::tet4, vtk_cell::tet10});
    }
  }
  std::optional<HexPart> hp;
  std::optional<TetPart> tp;
  if (!hexes.empty()) hp = HexPart{&hnodes, &hexes, hex_node_count};
  if (!tets.empty()) tp = TetPart{&tnodes, &tets, tet_node_count};
  if (!hp && !tp) throw Error("io", "no hexahedra or tetrahedra found in the given mesh files");
  QualityReport rep = quality_report(hp, tp, th);
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    nlohmann::json cfg = {{"inputs", paths}};
    RunManifest man("quality", cfg);
    man.emit(out_dir, "quality.json", to_json(rep, per_element).dump(2) + "\n");
    man.emit(out_dir, "quality.txt", format_table(rep));
    man.write(out_dir);
  }
  return rep;
}

}  // namespace hexwall

#endif  // HEXWALL_PIPELINE_HPP
