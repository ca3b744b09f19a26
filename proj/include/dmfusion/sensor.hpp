#pragma once

#include <cstddef>

#include "dmfusion/geometry.hpp"

namespace dmfusion {

// Depth-dependent measurement noise. Lateral std grows with the backprojected
// pixel footprint (beta * z / sqrt(12)); axial std is a quadratic in depth.
struct SensorNoiseModel {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  // Defaults: a 512x424 time-of-flight camera (fx = fy = 365) with an axial
  // std of 1.5 mm at 1 m.
  double beta_x = 1.0 / 365.0;  // pixel width at 1 m, m/m
  double beta_y = 1.0 / 365.0;
  double alpha2 = 4e-4;  // 1/m
  double alpha1 = 6e-4;
  double alpha0 = 5e-4;  // m

  double axial_sigma(double z) const { return (alpha2 * z + alpha1) * z + alpha0; }

  // Throws ModelError unless every parameter is in range and the axial std is
  // positive over `range`.
  void validate(const DepthRange& range) const;
};

struct FilterParams {
  double gamma = 1.83;
  int k = 4;
};

// Diagonal covariance in a frame whose z axis is the line of sight.
Mat3 covariance_camera(double z, const SensorNoiseModel& model);

// Rotates a line-of-sight covariance into the world frame so its z axis lies
// along `ray`. `world_from_camera` is the camera-to-world rotation; when `ray`
// is the optical axis the result is world_from_camera * c * world_from_camera^T.
Mat3 align_to_los(const Mat3& c_cam, const Vec3& ray, const Mat3& world_from_camera = Mat3::Identity());

// Average distance to the k-th nearest neighbour in the backprojection of a
// constant-depth map, interior pixels only. Exact for the regular lattice.
double reference_distance(double z, const Intrinsics& intr, int k);

struct PrefilterResult {
  DepthMap map;
  std::size_t removed = 0;
  bool too_sparse = false;  // fewer than k+1 valid pixels; everything removed
};

// Removes every measurement whose k-th nearest neighbour in the same map is
// farther than gamma * reference_distance(z). Neighbours are searched in a
// pixel window of half-width ceil(gamma * k). Pose-invariant.
PrefilterResult prefilter(const DepthMap& dm, const FilterParams& params);

}  // namespace dmfusion
