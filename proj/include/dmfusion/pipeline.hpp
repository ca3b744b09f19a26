#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dmfusion/fusion.hpp"
#include "dmfusion/registration.hpp"
#include "dmfusion/sensor.hpp"

namespace dmfusion {

struct PipelineConfig {
  SensorNoiseModel noise;
  FilterParams filter;
  MergeParams merge;
  IcpParams icp;
  DepthRange depth_range;
  int outer_iterations = 6;
  double convergence_rotation = 1e-4;     // rad
  double convergence_translation = 1e-4;  // m
  bool emit_intermediate = false;
  // After each re-registration, move all poses rigidly so the first view
  // keeps its input pose. The refined poses then stay in the input frame.
  bool anchor_first_view = true;
  // Leave each map's own unmerged points out of its ICP target.
  bool exclude_own_unmerged = false;
  // Derive icp.max_correspondence_dist as 5 * median sigma_z of the input.
  bool auto_correspondence_dist = true;
  double index_cell_size = 0.02;  // m

  void validate() const;
};

struct StageSeconds {
  double fusion = 0;
  double postfilter = 0;
  double registration = 0;

  double total() const { return fusion + postfilter + registration; }
};

struct IterationReport {
  int iteration = 0;  // 1-based
  std::size_t points_fused = 0;
  std::size_t points = 0;  // after the post-filter
  std::size_t added = 0;
  std::size_t merges = 0;
  std::size_t violations = 0;
  std::size_t removed = 0;
  bool refined = false;
  std::vector<double> rotation_delta;     // rad per map, zero when not refined
  std::vector<double> translation_delta;  // m, camera-center displacement
  std::vector<bool> icp_failed;
  StageSeconds seconds;

  double max_rotation_delta() const;
  double max_translation_delta() const;
};

struct PipelineReport {
  std::size_t views = 0;
  std::size_t input_measurements = 0;
  std::size_t filtered_measurements = 0;
  std::size_t prefilter_removed = 0;
  std::size_t sparse_maps = 0;
  double prefilter_seconds = 0;
  double correspondence_dist = 0;
  std::vector<IterationReport> iterations;
  std::string stop_reason;  // "converged" or "iteration_limit"
  std::vector<std::string> warnings;
};

struct PipelineResult {
  FusedCloud cloud;
  std::vector<Pose> poses;
  PipelineReport report;
  std::vector<FusedCloud> intermediate;  // one per iteration when requested
};

// Median axial sigma over all valid pixels, the basis of the automatic ICP
// correspondence gate.
double median_axial_sigma(std::span<const DepthMap> maps, const SensorNoiseModel& model);

// pre-filter once -> { fuse all maps from an empty cloud -> post-filter ->
// re-register } repeated. After a refinement whose pose changes all fall
// below the convergence thresholds, one final fusion runs and the loop stops.
PipelineResult run(std::span<const DepthMap> maps, const PipelineConfig& cfg);

// 1 - final points / valid input measurements.
double reduction_ratio(std::span<const DepthMap> maps, const FusedCloud& cloud);
double reduction_ratio(std::size_t input_measurements, std::size_t final_points);

// Key-value summary.
void write_report_text(std::ostream& os, const PipelineReport& report);
// iteration,points,merges,violations,removed,max_rot_delta_deg,max_trans_delta_mm,stage_seconds
void write_report_csv(std::ostream& os, const PipelineReport& report);

}  // namespace dmfusion
