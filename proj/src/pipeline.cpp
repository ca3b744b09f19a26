#include "dmfusion/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

namespace dmfusion {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Poses are only determined up to a common rigid motion of the world. Moves
// all of them so that the first one equals `anchor` again.
void reanchor(std::vector<Pose>& poses, const Pose& anchor) {
  const Pose& first = poses.front();
  const Mat3 rh = first.rotation.transpose() * anchor.rotation;
  const Vec3 th = first.rotation.transpose() * (anchor.translation - first.translation);
  for (Pose& p : poses) {
    p.translation = p.rotation * th + p.translation;
    p.rotation = project_to_rotation(p.rotation * rh);
  }
  poses.front() = anchor;
}

}  // namespace

void PipelineConfig::validate() const {
  noise.validate(depth_range);
  if (!(filter.gamma > 1) || filter.k < 1) throw ConfigError("filter: need gamma > 1 and k >= 1");
  merge.validate();
  if (!auto_correspondence_dist) icp.validate();
  if (outer_iterations < 1) throw ConfigError("pipeline: outer_iterations must be >= 1");
  if (!(convergence_rotation >= 0) || !(convergence_translation >= 0))
    throw ConfigError("pipeline: convergence thresholds must be >= 0");
  if (!(depth_range.min > 0 && depth_range.max > depth_range.min)) throw ConfigError("pipeline: bad depth range");
  if (!(index_cell_size > 0)) throw ConfigError("pipeline: index_cell_size must be > 0");
}

double IterationReport::max_rotation_delta() const {
  return rotation_delta.empty() ? 0.0 : *std::max_element(rotation_delta.begin(), rotation_delta.end());
}

double IterationReport::max_translation_delta() const {
  return translation_delta.empty() ? 0.0 : *std::max_element(translation_delta.begin(), translation_delta.end());
}

double median_axial_sigma(std::span<const DepthMap> maps, const SensorNoiseModel& model) {
  std::vector<double> sigmas;
  for (const auto& dm : maps)
    for (Eigen::Index i = 0; i < dm.depths.size(); ++i)
      if (is_valid_depth(dm.depths.data()[i])) sigmas.push_back(model.axial_sigma(dm.depths.data()[i]));
  if (sigmas.empty()) return 0;
  auto mid = sigmas.begin() + static_cast<std::ptrdiff_t>(sigmas.size() / 2);
  std::nth_element(sigmas.begin(), mid, sigmas.end());
  return *mid;
}

PipelineResult run(std::span<const DepthMap> maps, const PipelineConfig& cfg) {
  cfg.validate();
  if (maps.empty()) throw InputError("pipeline: no depth maps");

  PipelineResult result{FusedCloud(cfg.index_cell_size), {}, {}, {}};
  PipelineReport& report = result.report;
  report.views = maps.size();

  for (const auto& dm : maps) {
    check_consistent(dm);
    const double bx = 1.0 / dm.intrinsics.fx, by = 1.0 / dm.intrinsics.fy;
    if (std::abs(cfg.noise.beta_x - bx) / cfg.noise.beta_x >= 0.05 ||
        std::abs(cfg.noise.beta_y - by) / cfg.noise.beta_y >= 0.05) {
      std::ostringstream msg;
      msg << "view " << dm.view << ": beta_x/beta_y differ from 1/fx, 1/fy by 5% or more";
      report.warnings.push_back(msg.str());
    }
  }

  // Pre-filtering only looks at intra-map distances, so it runs once.
  const auto t_pre = Clock::now();
  std::vector<DepthMap> filtered;
  filtered.reserve(maps.size());
  for (const auto& dm : maps) {
    report.input_measurements += dm.valid_count();
    DepthMap in_range = dm;
    clamp_to_range(in_range, cfg.depth_range);
    auto pf = prefilter(in_range, cfg.filter);
    report.prefilter_removed += pf.removed;
    report.sparse_maps += pf.too_sparse;
    report.filtered_measurements += pf.map.valid_count();
    filtered.push_back(std::move(pf.map));
  }
  report.prefilter_seconds = seconds_since(t_pre);
  if (report.filtered_measurements == 0) throw InputError("pipeline: every measurement was filtered out");

  IcpParams icp = cfg.icp;
  if (cfg.auto_correspondence_dist) icp.max_correspondence_dist = 5.0 * median_axial_sigma(filtered, cfg.noise);
  icp.validate();
  report.correspondence_dist = icp.max_correspondence_dist;

  bool converged = false;
  for (int it = 1; it <= cfg.outer_iterations; ++it) {
    IterationReport ir;
    ir.iteration = it;
    ir.rotation_delta.assign(filtered.size(), 0.0);
    ir.translation_delta.assign(filtered.size(), 0.0);
    ir.icp_failed.assign(filtered.size(), false);

    FusedCloud cloud(cfg.index_cell_size);
    auto t0 = Clock::now();
    for (const auto& dm : filtered) {
      const FuseStats s = fuse_map(cloud, dm, cfg.noise, cfg.merge);
      ir.added += s.added;
      ir.merges += s.merged;
      ir.violations += s.violations;
    }
    ir.seconds.fusion = seconds_since(t0);
    ir.points_fused = cloud.size();

    t0 = Clock::now();
    ir.removed = postfilter(cloud);
    ir.points = cloud.size();
    ir.seconds.postfilter = seconds_since(t0);

    const bool last = it == cfg.outer_iterations || converged;
    if (!last && !cloud.empty()) {
      t0 = Clock::now();
      RefineOutcome ref = refine_all_poses(filtered, cloud, icp, {}, cfg.exclude_own_unmerged);
      if (cfg.anchor_first_view) reanchor(ref.poses, filtered[0].pose);
      for (std::size_t i = 0; i < filtered.size(); ++i) {
        ir.rotation_delta[i] = rotation_angle_between(ref.poses[i].rotation, filtered[i].pose.rotation);
        ir.translation_delta[i] = (ref.poses[i].center() - filtered[i].pose.center()).norm();
        ir.icp_failed[i] = ref.failed[i];
        filtered[i].pose = ref.poses[i];
      }
      ir.refined = true;
      ir.seconds.registration = seconds_since(t0);
      converged = ir.max_rotation_delta() < cfg.convergence_rotation &&
                  ir.max_translation_delta() < cfg.convergence_translation;
    }

    if (cfg.emit_intermediate) result.intermediate.push_back(cloud);
    result.cloud = std::move(cloud);
    report.iterations.push_back(std::move(ir));
    if (last) {
      report.stop_reason = converged ? "converged" : "iteration_limit";
      break;
    }
  }

  result.poses.reserve(filtered.size());
  for (const auto& dm : filtered) result.poses.push_back(dm.pose);
  return result;
}

double reduction_ratio(std::size_t input_measurements, std::size_t final_points) {
  if (input_measurements == 0) return 0.0;
  return 1.0 - static_cast<double>(final_points) / static_cast<double>(input_measurements);
}

double reduction_ratio(std::span<const DepthMap> maps, const FusedCloud& cloud) {
  std::size_t n = 0;
  for (const auto& dm : maps) n += dm.valid_count();
  return reduction_ratio(n, cloud.size());
}

void write_report_text(std::ostream& os, const PipelineReport& r) {
  os << "views=" << r.views << '\n'
     << "input_measurements=" << r.input_measurements << '\n'
     << "prefilter_removed=" << r.prefilter_removed << '\n'
     << "filtered_measurements=" << r.filtered_measurements << '\n'
     << "sparse_maps=" << r.sparse_maps << '\n'
     << "prefilter_seconds=" << r.prefilter_seconds << '\n'
     << "correspondence_dist_m=" << r.correspondence_dist << '\n';
  for (const auto& it : r.iterations) {
    const std::string k = "iteration." + std::to_string(it.iteration) + ".";
    std::size_t failed = std::count(it.icp_failed.begin(), it.icp_failed.end(), true);
    os << k << "points=" << it.points << '\n'
       << k << "points_before_postfilter=" << it.points_fused << '\n'
       << k << "added=" << it.added << '\n'
       << k << "merges=" << it.merges << '\n'
       << k << "violations=" << it.violations << '\n'
       << k << "removed=" << it.removed << '\n'
       << k << "refined=" << (it.refined ? "true" : "false") << '\n'
       << k << "icp_failed=" << failed << '\n'
       << k << "max_rot_delta_deg=" << it.max_rotation_delta() * 180.0 / std::numbers::pi << '\n'
       << k << "max_trans_delta_mm=" << it.max_translation_delta() * 1e3 << '\n'
       << k << "seconds.fusion=" << it.seconds.fusion << '\n'
       << k << "seconds.postfilter=" << it.seconds.postfilter << '\n'
       << k << "seconds.registration=" << it.seconds.registration << '\n';
  }
  if (!r.iterations.empty())
    os << "reduction_ratio=" << reduction_ratio(r.input_measurements, r.iterations.back().points) << '\n';
  os << "stop_reason=" << r.stop_reason << '\n';
  for (const auto& w : r.warnings) os << "warning=" << w << '\n';
}

void write_report_csv(std::ostream& os, const PipelineReport& r) {
  os << "iteration,points,merges,violations,removed,max_rot_delta_deg,max_trans_delta_mm,stage_seconds\n";
  for (const auto& it : r.iterations) {
    os << it.iteration << ',' << it.points << ',' << it.merges << ',' << it.violations << ',' << it.removed << ','
       << it.max_rotation_delta() * 180.0 / std::numbers::pi << ',' << it.max_translation_delta() * 1e3 << ','
       << it.seconds.total() << '\n';
  }
}

}  // namespace dmfusion
