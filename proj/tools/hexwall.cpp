// hexwall command-line driver: synth, mesh, quality, solve, convergence.

#include "hexwall/pipeline.hpp"

#include "CLI11.hpp"

#include <iomanip>
#include <iostream>

namespace {

using namespace hexwall;

struct CommonFlags {
  std::string config, out;
  int layers = 0;
  bool with_ilt = false, strict = false;
  std::optional<std::uint64_t> seed;
  std::optional<double> pressure_kpa, systolic, diastolic;
};

void add_common(CLI::App* app, CommonFlags& f, bool pressure) {
  app->add_option("--config", f.config, "JSON configuration file (defaults: synthetic aneurysm)");
  app->add_option("--out", f.out, "output directory");
  app->add_option("--seed", f.seed, "seed of the synthetic geometry perturbation");
  app->add_flag("--with-ilt", f.with_ilt, "mesh the intraluminal thrombus as well");
  app->add_flag("--strict-quality", f.strict, "fail on angle and skew violations too");
  if (pressure) {
    app->add_option("--pressure-kpa", f.pressure_kpa, "applied pressure (kPa)");
    app->add_option("--systolic", f.systolic, "systolic pressure (mmHg)");
    app->add_option("--diastolic", f.diastolic, "diastolic pressure (mmHg)");
  }
}

PipelineConfig resolve_config(const CommonFlags& f) {
  PipelineConfig c = f.config.empty() ? config_from_json(nlohmann::json::object()) : load_config(f.config);
  if (!f.out.empty()) c.out_dir = f.out;
  if (f.layers > 0) c.mesh.n_layers = f.layers;
  if (f.with_ilt) c.include_ilt = true;
  if (f.strict) c.strict_quality = true;
  if (f.seed) {
    if (!c.synthetic) throw ConfigError("--seed applies to synthetic geometry only");
    c.synthetic->seed = *f.seed;
  }
  if (f.pressure_kpa && (f.systolic || f.diastolic))
    throw ConfigError("give either --pressure-kpa or --systolic/--diastolic");
  if (f.pressure_kpa) c.pressure = {*f.pressure_kpa, std::nullopt, std::nullopt};
  if (f.systolic || f.diastolic) {
    if (!f.systolic || !f.diastolic) throw ConfigError("--systolic and --diastolic must be given together");
    c.pressure = {std::nullopt, *f.systolic, *f.diastolic};
  }
  return c;
}

void print_warnings(const std::vector<std::string>& w) {
  for (const auto& s : w) std::cerr << "warning: " << s << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structured hexahedral meshing and wall-stress analysis of tubular vessels"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(hexwall::version));

  auto* synth = app.add_subcommand("synth", "write wall and lumen STL files of a synthetic aneurysm");
  SyntheticAAASpec spec;
  std::string synth_out = "hexwall_synth", synth_config;
  bool binary = false;
  synth->add_option("--config", synth_config, "JSON configuration; geometry.synthetic is used");
  synth->add_option("--out", synth_out, "output directory");
  synth->add_option("--seed", spec.seed, "perturbation seed");
  synth->add_option("--perturbation", spec.perturbation, "amplitude of seeded circumferential modes (mm)");
  synth->add_option("--asymmetry", spec.asymmetry_offset, "lateral shift of the bulge centre (mm)");
  synth->add_option("--length", spec.length, "axial length (mm)");
  synth->add_option("--base-radius", spec.base_radius, "radius away from the bulge (mm)");
  synth->add_option("--bulge-amplitude", spec.bulge_amplitude, "radius added at the bulge centre (mm)");
  synth->add_option("--lumen-radius", spec.lumen_radius, "lumen radius (mm)");
  synth->add_flag("--binary", binary, "write binary STL");

  CommonFlags mf, sf, cf;
  auto* mesh = app.add_subcommand("mesh", "build the wall (and thrombus) mesh and audit its quality");
  add_common(mesh, mf, false);
  mesh->add_option("--layers", mf.layers, "elements through the wall thickness");

  auto* solve = app.add_subcommand("solve", "mesh and solve under internal pressure");
  add_common(solve, sf, true);
  solve->add_option("--layers", sf.layers, "elements through the wall thickness");

  auto* conv = app.add_subcommand("convergence", "layer-convergence study of the wall-only model");
  add_common(conv, cf, true);
  std::vector<int> conv_layers;
  conv->add_option("--layers", conv_layers, "layer counts, e.g. 2,3,4")->delimiter(',');

  auto* qual = app.add_subcommand("quality", "audit existing .vtk or .inp meshes");
  std::vector<std::string> qfiles;
  std::string qout, qconfig;
  bool qstrict = false, qper = false;
  QualityThresholds th;
  qual->add_option("files", qfiles, "mesh files")->required();
  qual->add_option("--config", qconfig, "JSON configuration; its quality thresholds are used");
  qual->add_option("--out", qout, "directory for quality.json and quality.txt");
  qual->add_option("--jacobian-min", th.jacobian_min, "minimum scaled Jacobian");
  qual->add_option("--skew-max", th.skew_max, "maximum tetrahedron volumetric skew");
  qual->add_flag("--strict-quality", qstrict, "fail on angle and skew violations too");
  qual->add_flag("--per-element", qper, "include per-element values in quality.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*synth) {
      if (!synth_config.empty()) {
        const PipelineConfig c = load_config(synth_config);
        if (!c.synthetic) throw ConfigError("config has no synthetic geometry");
        const auto seed = spec.seed;
        spec = *c.synthetic;
        if (synth->count("--seed")) spec.seed = seed;
      }
      cmd_synth(spec, synth_out, binary ? StlFormat::Binary : StlFormat::Ascii);
      std::cout << "wrote " << synth_out << "/wall.stl and " << synth_out << "/lumen.stl (max diameter "
                << spec.max_diameter() << " mm)\n";
      return 0;
    }
    if (*mesh) {
      const PipelineConfig c = resolve_config(mf);
      try {
        const MeshResult m = cmd_mesh(c);
        print_warnings(m.warnings);
        print_warnings(quality_warnings(m.quality));
        std::cout << format_table(m.quality) << "mesh written to " << c.out_dir << "\n";
      } catch (const QualityGateError&) {
        std::cerr << "quality report: " << c.out_dir << "/quality.txt\n";
        throw;
      }
      return 0;
    }
    if (*solve) {
      const PipelineConfig c = resolve_config(sf);
      const SolveResult s = cmd_solve(c);
      print_warnings(s.warnings);
      std::cout << std::setprecision(6) << "pressure " << s.pressure_kpa << " kPa, " << s.model.element_count()
                << " elements, " << s.model.nodes.size() << " nodes\n"
                << "solver " << s.solution.solve.method << ", " << s.solution.solve.iterations
                << " iterations, equilibrium residual " << s.solution.equilibrium_residual << "\n"
                << "max principal stress: peak " << s.stats.peak << " MPa, p99 " << s.stats.p99 << " MPa, median "
                << s.stats.median << " MPa\n"
                << "time " << s.seconds << " s; results in " << c.out_dir << "\n";
      return 0;
    }
    if (*conv) {
      PipelineConfig c = resolve_config(cf);
      const auto layers = conv_layers.empty() ? c.convergence_layers : conv_layers;
      const ConvergenceReport r = cmd_convergence(c, layers);
      std::cout << format_table(r) << std::setprecision(4)
                << "p99 difference first/last: " << 100.0 * r.p99_relative_difference() << "%\n"
                << "max percentile-curve gap (1-99): " << 100.0 * r.max_curve_gap() << "%\n"
                << "max probe spread: " << 100.0 * r.max_probe_spread() << "%\n";
      return 0;
    }
    if (*qual) {
      if (!qconfig.empty()) {
        const PipelineConfig c = load_config(qconfig);
        th = c.quality;
        qstrict = qstrict || c.strict_quality;
      }
      const QualityReport r = cmd_quality(qfiles, th, qout, qper);
      print_warnings(quality_warnings(r));
      std::cout << format_table(r);
      if (auto fail = quality_gate(r, qstrict)) throw QualityGateError("quality gate failed: " + *fail);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error [" << e.stage() << "]: " << e.what() << "\n";
    if (const auto* s = dynamic_cast<const SolverError*>(&e); s && !s->residual_history().empty()) {
      const auto& h = s->residual_history();
      std::cerr << "residual history (" << h.size() << " entries), last: " << h.back() << "\n";
    }
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
