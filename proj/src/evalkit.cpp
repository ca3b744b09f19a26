#include "dmfusion/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>

namespace dmfusion {

GroundTruthPlane GroundTruthPlane::from_patch(const PlanePatch& patch) {
  GroundTruthPlane p;
  p.normal = patch.normal().normalized();
  p.offset = p.normal.dot(patch.origin);
  p.extent = patch;
  return p;
}

double GroundTruthPlane::distance(const Vec3& p) const {
  if (extent) return (p - extent->closest_point(p)).norm();
  return std::abs(normal.dot(p) - offset);
}

double GroundTruthPlanes::distance(const Vec3& p) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& plane : planes) best = std::min(best, plane.distance(p));
  return best;
}

void GroundTruthPlanes::validate() const {
  if (planes.empty()) throw InputError("ground truth has no planes");
  for (const auto& p : planes) {
    if (std::abs(p.normal.norm() - 1.0) > 1e-9) throw InputError("ground-truth plane normal is not unit length");
  }
}

std::vector<std::pair<double, double>> cumulative_error_curve(std::span<const Vec3> points,
                                                              const GroundTruthPlanes& gt,
                                                              std::span<const double> thresholds) {
  if (points.empty()) throw InputError("cumulative error curve: empty cloud");
  std::vector<double> errors;
  errors.reserve(points.size());
  for (const auto& p : points) errors.push_back(gt.distance(p));
  std::sort(errors.begin(), errors.end());
  std::vector<std::pair<double, double>> curve;
  curve.reserve(thresholds.size());
  for (double tau : thresholds) {
    const auto n = std::upper_bound(errors.begin(), errors.end(), tau) - errors.begin();
    curve.emplace_back(tau, static_cast<double>(n) / static_cast<double>(errors.size()));
  }
  return curve;
}

double rms_plane_distance(std::span<const Vec3> points, const GroundTruthPlanes& gt) {
  if (points.empty()) throw InputError("rms plane distance: empty cloud");
  double sum = 0;
  for (const auto& p : points) {
    const double d = gt.distance(p);
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(points.size()));
}

VoxelGrid voxelize(std::span<const Vec3> points, double voxel_size, const Vec3& origin) {
  if (!(voxel_size > 0)) throw InputError("voxel size must be > 0");
  VoxelGrid g{voxel_size, origin, {}};
  g.occupied.reserve(points.size());
  for (const auto& p : points) {
    const Eigen::Array3d idx = ((p - origin) / voxel_size).array().floor();
    g.occupied.push_back({static_cast<std::int64_t>(idx[0]), static_cast<std::int64_t>(idx[1]),
                          static_cast<std::int64_t>(idx[2])});
  }
  std::sort(g.occupied.begin(), g.occupied.end());
  g.occupied.erase(std::unique(g.occupied.begin(), g.occupied.end()), g.occupied.end());
  return g;
}

double jaccard_index(const VoxelGrid& recon, const VoxelGrid& gt) {
  if (recon.voxel_size != gt.voxel_size || recon.origin != gt.origin)
    throw InputError("jaccard index: grids do not share voxel size and origin");
  std::vector<VoxelKey> common;
  std::set_intersection(recon.occupied.begin(), recon.occupied.end(), gt.occupied.begin(), gt.occupied.end(),
                        std::back_inserter(common));
  const std::size_t uni = recon.occupied.size() + gt.occupied.size() - common.size();
  if (uni == 0) return 1.0;
  return static_cast<double>(common.size()) / static_cast<double>(uni);
}

double compression_ratio(std::size_t gt_point_count, std::size_t recon_point_count) {
  if (recon_point_count == 0) throw InputError("compression ratio: reconstruction has no points");
  return static_cast<double>(gt_point_count) / static_cast<double>(recon_point_count);
}

std::vector<Vec3> sample_ground_truth(const GroundTruthPlanes& gt, double spacing) {
  if (!(spacing > 0)) throw InputError("ground-truth sampling spacing must be > 0");
  std::vector<Vec3> out;
  for (const auto& plane : gt.planes) {
    if (!plane.extent) throw InputError("cannot sample an unbounded ground-truth plane");
    const PlanePatch& p = *plane.extent;
    const auto nu = static_cast<long>(std::max(1.0, std::round(p.extent_u / spacing)));
    const auto nv = static_cast<long>(std::max(1.0, std::round(p.extent_v / spacing)));
    const double su = p.extent_u / nu, sv = p.extent_v / nv;
    for (long j = 0; j < nv; ++j)
      for (long i = 0; i < nu; ++i) out.push_back(p.origin + (i + 0.5) * su * p.axis_u + (j + 0.5) * sv * p.axis_v);
  }
  return out;
}

Evaluation evaluate(std::span<const Vec3> points, const GroundTruthPlanes& gt, const EvaluationParams& params) {
  gt.validate();
  Evaluation ev;
  ev.points = points.size();
  std::vector<double> thresholds = params.thresholds;
  if (thresholds.empty())
    for (int mm = 0; mm <= 50; ++mm) thresholds.push_back(mm * 1e-3);
  ev.curve = cumulative_error_curve(points, gt, thresholds);
  ev.rms = rms_plane_distance(points, gt);

  const auto samples = sample_ground_truth(gt, params.gt_spacing);
  ev.gt_points = samples.size();
  ev.compression = compression_ratio(samples.size(), points.size());
  Vec3 origin = Vec3::Constant(std::numeric_limits<double>::infinity());
  for (const auto& s : samples) origin = origin.cwiseMin(s);
  for (double size : params.voxel_sizes) {
    ev.jaccard.emplace_back(size, jaccard_index(voxelize(points, size, origin), voxelize(samples, size, origin)));
  }
  return ev;
}

}  // namespace dmfusion
