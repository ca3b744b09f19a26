#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "dmfusion/geometry.hpp"
#include "dmfusion/sensor.hpp"
#include "dmfusion/spatial_grid.hpp"

namespace dmfusion {

struct FusedPoint {
  Vec3 position = Vec3::Zero();
  Mat3 covariance = Mat3::Identity();
  Vec3 normal = Vec3::UnitZ();
  std::uint32_t merges = 0;
  std::uint32_t violations = 0;
  std::optional<Rgb> color;  // first contributor wins
  ViewId source_view = 0;       // view that created the point
  std::uint32_t last_pass = 0;  // fuse_map call that last touched the point
};

// Non-redundant point set with a spatial index kept in sync with positions.
class FusedCloud {
 public:
  using Id = SpatialGrid::Id;

  explicit FusedCloud(double index_cell_size = 0.02) : index_(index_cell_size) {}

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  std::span<const FusedPoint> points() const { return points_; }
  const FusedPoint& operator[](Id id) const { return points_[id]; }
  const SpatialGrid& index() const { return index_; }

  Id add(const FusedPoint& p);
  void replace(Id id, const FusedPoint& p);
  void add_violation(Id id) { ++points_[id].violations; }

  // Stamp identifying one fuse_map call; never 0.
  std::uint32_t begin_pass() { return ++pass_; }

  // Keeps the points for which `keep` is true, preserving order, and rebuilds
  // the index. Returns the number removed.
  std::size_t retain(const std::function<bool(const FusedPoint&)>& keep);

 private:
  std::vector<FusedPoint> points_;
  SpatialGrid index_;
  std::uint32_t pass_ = 0;
};

struct MergeParams {
  double gate = 1.0;        // Mahalanobis gate, in standard deviations
  double depth_ratio = 0.1;  // relative range tolerance of the visibility test
  double candidate_radius_sigma = 3.0;
  // Also vote against points in the measurement's pixel when it merged into
  // another point.
  bool visibility_on_merge = false;

  void validate() const;
};

struct MergeOutcome {
  enum class Status { merged, rejected, singular };
  Status status = Status::rejected;
  FusedPoint point;              // merged point when status == merged
  double mahalanobis_existing = 0;  // squared, of the candidate w.r.t. C_e
  double mahalanobis_new = 0;       // squared, of the candidate w.r.t. C_m

  bool accepted() const { return status == Status::merged; }
};

// Inverse-covariance fusion of an existing point and a new measurement. The
// merge is accepted only when the fused position lies inside both covariance
// ellipsoids scaled by the gate.
MergeOutcome try_merge(const FusedPoint& existing, const OrientedPoint& m, const Mat3& cov_m,
                       const MergeParams& params);

// True when both points face the camera and their ranges differ by less than
// depth_ratio of the new point's range.
bool violates_visibility(const FusedPoint& existing, const OrientedPoint& m, const Vec3& camera_center,
                         const MergeParams& params);

// Covariance of a fresh measurement in the world frame.
Mat3 measurement_covariance(const OrientedPoint& m, const Pose& pose, const SensorNoiseModel& model);

struct FuseStats {
  std::size_t added = 0;
  std::size_t merged = 0;
  std::size_t violations = 0;  // violation events; each bumps two counters
  std::size_t singular = 0;
};

// Folds one (pre-filtered) depth map into the cloud, pixels in row-major
// order. A point absorbs at most one measurement per call, and points created
// or refined during the current call never take part in its merge or
// visibility tests.
FuseStats fuse_map(FusedCloud& cloud, const DepthMap& dm, const SensorNoiseModel& model,
                   const MergeParams& params);

// Drops every point with more visibility violations than merges.
std::size_t postfilter(FusedCloud& cloud);

}  // namespace dmfusion
