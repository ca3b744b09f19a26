#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include "CLI11.hpp"
#include "dmfusion/config.hpp"
#include "dmfusion/dataset.hpp"
#include "dmfusion/evalkit.hpp"
#include "dmfusion/io.hpp"
#include "dmfusion/pipeline.hpp"
#include "dmfusion/synth.hpp"

namespace fs = std::filesystem;
using namespace dmfusion;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct ConfigArgs {
  std::string config;
  std::vector<std::string> overrides;
};

void add_config_options(CLI::App* app, ConfigArgs& a) {
  app->add_option("--config", a.config, "configuration file");
  app->add_option("--set", a.overrides, "override a key, section.key=value (repeatable)");
}

ToolConfig load_tool_config(const ConfigArgs& a) {
  ConfigFile cfg;
  if (!a.config.empty()) cfg = load_config(a.config);
  for (const auto& o : a.overrides) apply_override(cfg, o);
  return to_tool_config(cfg);
}

template <typename F>
void write_text(const fs::path& path, F&& body) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  body(out);
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

// ---- synth -----------------------------------------------------------------

struct SynthArgs {
  ConfigArgs cfg;
  std::string out;
  std::string scene = "ccorner";
  int views = 8;
  int width = 256;
  int height = 212;
  double fx = 0;  // 0: width * 365 / 512
  std::uint64_t seed = 1;
  bool noise = true;
  double outliers = 0;
  double dropout = 0;
  double rot_std_deg = 0.5;
  double trans_std_mm = 10;
  bool perturb_first = false;
  std::string format = "dpf";
};

int run_synth(const SynthArgs& a) {
  ToolConfig tc = load_tool_config(a.cfg);
  const SceneSpec scene = SceneSpec::preset(a.scene);
  const fs::path dir(a.out);
  fs::create_directories(dir);

  Intrinsics intr;
  intr.width = a.width;
  intr.height = a.height;
  intr.fx = intr.fy = a.fx > 0 ? a.fx : a.width * 365.0 / 512.0;
  intr.cx = (a.width - 1) / 2.0;
  intr.cy = (a.height - 1) / 2.0;
  if (!intr.valid()) throw ConfigError("synth: invalid image size or focal length");

  // Without a config the written one matches configs/sample.cfg, with the
  // lateral terms following this camera's fx.
  if (a.cfg.config.empty()) {
    tc.pipeline.noise.lambda1 = tc.pipeline.noise.lambda2 = 4.0;
    tc.pipeline.noise.beta_x = 1.0 / intr.fx;
    tc.pipeline.noise.beta_y = 1.0 / intr.fy;
    tc.pipeline.merge.visibility_on_merge = true;
    tc.pipeline.auto_correspondence_dist = false;
    tc.pipeline.icp.max_correspondence_dist = 0.03;
  }

  CorruptionSpec spec;
  spec.depth_noise = a.noise;
  spec.outlier_rate = a.outliers;
  spec.dropout_rate = a.dropout;
  spec.rotation_std = a.rot_std_deg * kDeg;
  spec.translation_std = a.trans_std_mm * 1e-3;
  spec.range = tc.pipeline.depth_range;
  spec.validate();

  DatasetManifest m;
  m.intrinsics = intr;
  m.poses = "poses_init.txt";
  std::vector<PoseEntry> truth, init;
  const auto poses = preset_views(a.scene, a.views);
  for (int i = 0; i < a.views; ++i) {
    const auto id = static_cast<ViewId>(i);
    const DepthMap exact = render_depth(scene, intr, poses[i], id, tc.pipeline.depth_range);
    CorruptionSpec s = spec;
    if (i == 0 && !a.perturb_first) s.rotation_std = s.translation_std = 0;
    const Corrupted c = corrupt(exact, s, tc.pipeline.noise, a.seed);
    char name[64];
    std::snprintf(name, sizeof name, "depth_%03d.%s", i, a.format == "pgm" ? "pgm" : "dpf");
    if (a.format == "pgm") write_depth_pgm(dir / name, c.map.depths);
    else write_depth_dpf(dir / name, c.map.depths);
    m.views.push_back({id, name, std::nullopt});
    truth.push_back({id, poses[i]});
    init.push_back({id, c.pose});
  }
  write_poses(dir / "poses_true.txt", truth);
  write_poses(dir / "poses_init.txt", init);
  write_ground_truth(dir / "gt.txt", ground_truth(scene));
  write_manifest(dir / "manifest.txt", m);
  write_text(dir / "config.cfg", [&](std::ostream& os) { write_config(os, tc.pipeline, "manifest.txt"); });
  std::cout << "wrote " << a.views << " views of '" << a.scene << "' to " << dir.string() << '\n';
  return 0;
}

// ---- fuse / refine ---------------------------------------------------------

struct RunArgs {
  ConfigArgs cfg;
  std::string manifest;
  std::string poses;
  std::string out;
  std::string poses_out;
  std::string report;
  std::string report_text;
  std::string intermediate_dir;
  bool ascii = false;
};

int run_pipeline(const RunArgs& a, bool single_pass) {
  ToolConfig tc = load_tool_config(a.cfg);
  if (!a.manifest.empty()) tc.manifest = fs::path(a.manifest);
  if (!tc.manifest) throw ConfigError("no manifest: pass --manifest or set dataset.manifest");
  if (single_pass) tc.pipeline.outer_iterations = 1;
  if (!a.intermediate_dir.empty()) tc.pipeline.emit_intermediate = true;

  const DatasetManifest m = read_manifest(*tc.manifest);
  std::optional<fs::path> pose_override;
  if (!a.poses.empty()) pose_override = fs::path(a.poses);
  const std::vector<DepthMap> maps = load_dataset(m, pose_override);

  const PipelineResult r = run(maps, tc.pipeline);
  for (const auto& w : r.report.warnings) std::cerr << "warning: " << w << '\n';

  if (!a.out.empty()) write_ply(fs::path(a.out), r.cloud, !a.ascii);
  if (!a.poses_out.empty()) {
    std::vector<PoseEntry> entries;
    for (std::size_t i = 0; i < maps.size(); ++i) {
      Pose p = r.poses[i];
      p.translation /= m.translation_scale;
      entries.push_back({maps[i].view, p});
    }
    write_poses(fs::path(a.poses_out), entries);
  }
  if (!a.report.empty()) write_text(a.report, [&](std::ostream& os) { write_report_csv(os, r.report); });
  if (!a.report_text.empty()) write_text(a.report_text, [&](std::ostream& os) { write_report_text(os, r.report); });
  if (!a.intermediate_dir.empty()) {
    fs::create_directories(a.intermediate_dir);
    for (std::size_t i = 0; i < r.intermediate.size(); ++i) {
      char name[64];
      std::snprintf(name, sizeof name, "iteration_%02zu.ply", i + 1);
      write_ply(fs::path(a.intermediate_dir) / name, r.intermediate[i], !a.ascii);
    }
  }
  std::cout << "points " << r.cloud.size() << " from " << r.report.input_measurements << " measurements"
            << " (reduction " << reduction_ratio(r.report.input_measurements, r.cloud.size()) << "), "
            << r.report.iterations.size() << " iteration(s), " << r.report.stop_reason << '\n';
  return 0;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string cloud;
  std::string gt;
  std::string curve_out;
  std::string metrics_out;
  double gt_spacing_mm = 5;
};

int run_eval(const EvalArgs& a) {
  const PlyCloud ply = read_ply(a.cloud);
  const GroundTruthPlanes gt = read_ground_truth(a.gt);
  std::vector<Vec3> pts;
  pts.reserve(ply.vertices.size());
  for (const auto& v : ply.vertices) pts.push_back(v.position.cast<double>());
  EvaluationParams params;
  params.gt_spacing = a.gt_spacing_mm * 1e-3;
  const Evaluation e = evaluate(pts, gt, params);

  auto metrics = [&](std::ostream& os) {
    os << "metric,value\n";
    os << "points," << e.points << "\ngt_points," << e.gt_points << '\n';
    os << "rms_mm," << e.rms * 1e3 << "\ncompression," << e.compression << '\n';
    for (const auto& [size, j] : e.jaccard) os << "jaccard_" << size * 1e3 << "mm," << j << '\n';
  };
  metrics(std::cout);
  if (!a.metrics_out.empty()) write_text(a.metrics_out, metrics);
  if (!a.curve_out.empty()) {
    write_text(a.curve_out, [&](std::ostream& os) {
      os << "threshold_mm,fraction\n";
      for (const auto& [t, f] : e.curve) os << t * 1e3 << ',' << f << '\n';
    });
  }
  return 0;
}

// ---- info ------------------------------------------------------------------

int run_info(const ConfigArgs& ca, const std::string& manifest_arg) {
  ToolConfig tc = load_tool_config(ca);
  if (!manifest_arg.empty()) tc.manifest = fs::path(manifest_arg);
  if (!tc.manifest) throw ConfigError("no manifest: pass --manifest or set dataset.manifest");
  const DatasetManifest m = read_manifest(*tc.manifest);
  const auto maps = load_dataset(m);
  const Intrinsics& k = m.intrinsics;
  std::cout << "manifest " << tc.manifest->string() << '\n'
            << "intrinsics fx=" << k.fx << " fy=" << k.fy << " cx=" << k.cx << " cy=" << k.cy << " size=" << k.width
            << 'x' << k.height << '\n'
            << "views " << maps.size() << '\n';
  std::size_t total = 0;
  for (const auto& dm : maps) {
    const std::size_t n = dm.valid_count();
    total += n;
    double zmin = 0, zmax = 0;
    bool first = true;
    for (Eigen::Index i = 0; i < dm.depths.size(); ++i) {
      const double z = dm.depths.data()[i];
      if (!is_valid_depth(z)) continue;
      zmin = first ? z : std::min(zmin, z);
      zmax = first ? z : std::max(zmax, z);
      first = false;
    }
    const Vec3 c = dm.pose.center();
    std::cout << "view " << dm.view << " valid=" << n << " depth=[" << zmin << ", " << zmax << "] center=(" << c.x()
              << ", " << c.y() << ", " << c.z() << ")" << (dm.color ? " color" : "") << '\n';
  }
  std::cout << "measurements " << total << '\n'
            << "median_sigma_z_mm " << median_axial_sigma(maps, tc.pipeline.noise) * 1e3 << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Depth map fusion with pose refinement"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "render a synthetic dataset");
  add_config_options(synth, sa.cfg);
  synth->add_option("--out", sa.out, "output directory")->required();
  synth->add_option("--scene", sa.scene, "ccorner or cluttered");
  synth->add_option("--views", sa.views, "number of views")->check(CLI::Range(1, 1000));
  synth->add_option("--width", sa.width, "image width");
  synth->add_option("--height", sa.height, "image height");
  synth->add_option("--fx", sa.fx, "focal length in pixels (default scales 365 px at 512 wide)");
  synth->add_option("--seed", sa.seed, "random seed");
  synth->add_flag("--noise,!--no-noise", sa.noise, "axial depth noise");
  synth->add_option("--outliers", sa.outliers, "outlier rate");
  synth->add_option("--dropout", sa.dropout, "dropout rate");
  synth->add_option("--rot-std-deg", sa.rot_std_deg, "pose rotation std, degrees");
  synth->add_option("--trans-std-mm", sa.trans_std_mm, "pose translation std, millimeters");
  synth->add_flag("--perturb-first-view", sa.perturb_first, "also perturb view 0");
  synth->add_option("--format", sa.format, "dpf or pgm")->check(CLI::IsMember({"dpf", "pgm"}));

  RunArgs fa, ra;
  auto setup_run = [](CLI::App* sub, RunArgs& a) {
    add_config_options(sub, a.cfg);
    sub->add_option("--manifest", a.manifest, "dataset manifest (overrides dataset.manifest)");
    sub->add_option("--poses", a.poses, "pose file to use instead of the manifest's");
    sub->add_option("--out", a.out, "output PLY");
    sub->add_option("--poses-out", a.poses_out, "refined poses");
    sub->add_option("--report", a.report, "per-iteration CSV report");
    sub->add_option("--report-text", a.report_text, "key=value summary");
    sub->add_option("--intermediate-dir", a.intermediate_dir, "write the cloud of every iteration here");
    sub->add_flag("--ascii", a.ascii, "ASCII PLY instead of binary");
  };
  auto* fuse = app.add_subcommand("fuse", "single fusion pass with the given poses");
  setup_run(fuse, fa);
  auto* refine = app.add_subcommand("refine", "fusion with iterative pose refinement");
  setup_run(refine, ra);

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "compare a PLY with ground-truth planes");
  eval->add_option("--cloud", ea.cloud, "PLY file")->required();
  eval->add_option("--gt", ea.gt, "ground-truth plane file")->required();
  eval->add_option("--curve-out", ea.curve_out, "cumulative error curve CSV");
  eval->add_option("--metrics-out", ea.metrics_out, "metrics CSV");
  eval->add_option("--gt-spacing-mm", ea.gt_spacing_mm, "ground-truth sampling step");

  ConfigArgs ia;
  std::string info_manifest;
  auto* info = app.add_subcommand("info", "describe a dataset");
  add_config_options(info, ia);
  info->add_option("--manifest", info_manifest, "dataset manifest");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*synth) return run_synth(sa);
    if (*fuse) return run_pipeline(fa, true);
    if (*refine) return run_pipeline(ra, false);
    if (*eval) return run_eval(ea);
    if (*info) return run_info(ia, info_manifest);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
