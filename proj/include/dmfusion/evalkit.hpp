#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dmfusion/geometry.hpp"

namespace dmfusion {

// Plane n . x = offset, optionally limited to a rectangle.
struct GroundTruthPlane {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0;
  std::optional<PlanePatch> extent;

  static GroundTruthPlane from_patch(const PlanePatch& patch);
  double distance(const Vec3& p) const;
};

struct GroundTruthPlanes {
  std::vector<GroundTruthPlane> planes;

  // Distance to the nearest plane.
  double distance(const Vec3& p) const;
  void validate() const;
};

// (threshold, fraction of points with error <= threshold) per threshold.
std::vector<std::pair<double, double>> cumulative_error_curve(std::span<const Vec3> points,
                                                              const GroundTruthPlanes& gt,
                                                              std::span<const double> thresholds);

double rms_plane_distance(std::span<const Vec3> points, const GroundTruthPlanes& gt);

using VoxelKey = std::array<std::int64_t, 3>;

struct VoxelGrid {
  double voxel_size = 0;
  Vec3 origin = Vec3::Zero();
  std::vector<VoxelKey> occupied;  // sorted, unique
};

VoxelGrid voxelize(std::span<const Vec3> points, double voxel_size, const Vec3& origin);

// |A n B| / |A u B|; both grids must share voxel size and origin.
double jaccard_index(const VoxelGrid& recon, const VoxelGrid& gt);

double compression_ratio(std::size_t gt_point_count, std::size_t recon_point_count);

// Cell-centre samples of every bounded plane at the given spacing. Unbounded
// planes cannot be sampled and raise InputError.
std::vector<Vec3> sample_ground_truth(const GroundTruthPlanes& gt, double spacing);

inline constexpr std::array<double, 4> kDefaultVoxelSizes{0.005, 0.020, 0.045, 0.085};

struct EvaluationParams {
  std::vector<double> thresholds;  // m; empty selects 0..50 mm in 1 mm steps
  std::vector<double> voxel_sizes{kDefaultVoxelSizes.begin(), kDefaultVoxelSizes.end()};
  double gt_spacing = 0.005;
};

struct Evaluation {
  std::vector<std::pair<double, double>> curve;
  std::vector<std::pair<double, double>> jaccard;  // (voxel size, index)
  double compression = 0;
  double rms = 0;
  std::size_t points = 0;
  std::size_t gt_points = 0;
};

// Curve, RMS, compression and Jaccard at every voxel size. The shared voxel
// origin is the minimum corner of the sampled ground truth.
Evaluation evaluate(std::span<const Vec3> points, const GroundTruthPlanes& gt, const EvaluationParams& params);

}  // namespace dmfusion
