#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "dmfusion/fusion.hpp"
#include "dmfusion/geometry.hpp"

namespace dmfusion {

enum class IcpVariant { point_to_plane, point_to_point };

struct IcpParams {
  int max_iterations = 10;
  double max_correspondence_dist = 0.025;  // m
  double convergence_eps = 1e-7;           // m, RMS change that ends the loop
  IcpVariant variant = IcpVariant::point_to_plane;
  double trim_fraction = 0.1;  // worst residuals dropped per iteration; 0 disables
  double min_matched_fraction = 0.05;

  void validate() const;
};

// Rigid increment in the world frame: target ~ rotation * source + translation.
struct IcpResult {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double rms_before = 0;
  double rms_after = 0;
  double matched_fraction = 0;
  int iterations_run = 0;
};

using Vector6 = Eigen::Matrix<double, 6, 1>;
using Row6 = Eigen::Matrix<double, 1, 6>;

// Point-to-plane residual ((exp(w) p + v) - q) . n for the increment (w, v).
double point_to_plane_residual(const Vector6& increment, const Vec3& p, const Vec3& q, const Vec3& n);

// Derivative of point_to_plane_residual at the zero increment: [p x n, n].
Row6 point_to_plane_jacobian(const Vec3& p, const Vec3& n);

// Gauss-Newton step of the linearised point-to-plane problem over paired
// (source, target, target normal) triples. Unobservable directions get zero.
Vector6 solve_point_to_plane(std::span<const Vec3> src, std::span<const Vec3> dst, std::span<const Vec3> normals);

// Closed-form least-squares rigid alignment dst ~ R src + t.
void solve_point_to_point(std::span<const Vec3> src, std::span<const Vec3> dst, Mat3& rotation, Vec3& translation);

// Aligns world-frame source points to the cloud. Iterations whose RMS would
// increase are rejected and end the loop. Throws RegistrationError when fewer
// than min_matched_fraction of the source points find a partner.
IcpResult icp_align(std::span<const OrientedPoint> source, const FusedCloud& target, const IcpParams& params);

struct RefineOutcome {
  std::vector<Pose> poses;
  std::vector<bool> failed;
  std::vector<IcpResult> results;
};

// Re-registers every map against the cloud independently. Maps listed in
// `frozen` and maps whose ICP fails keep their current pose. With
// `exclude_own_unmerged`, points that map created and nothing merged into are
// left out of its target; they match the map with zero error and hold it in
// place.
RefineOutcome refine_all_poses(std::span<const DepthMap> maps, const FusedCloud& cloud, const IcpParams& params,
                               const std::vector<bool>& frozen = {}, bool exclude_own_unmerged = false);

}  // namespace dmfusion
