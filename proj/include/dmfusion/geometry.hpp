#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "dmfusion/types.hpp"

namespace dmfusion {

// Pinhole camera. Pixel (u, v) with depth z maps to the camera-frame point
// ((u - cx) z / fx, (v - cy) z / fy, z).
template <typename Scalar>
struct IntrinsicsT {
  Scalar fx{1};
  Scalar fy{1};
  Scalar cx{0};
  Scalar cy{0};
  int width{0};
  int height{0};

  bool valid() const {
    return fx > 0 && fy > 0 && width > 0 && height > 0 && cx >= 0 && cx < width &&
           cy >= 0 && cy < height;
  }

  Eigen::Matrix<Scalar, 3, 1> unproject(Scalar u, Scalar v, Scalar z) const {
    return {(u - cx) * z / fx, (v - cy) * z / fy, z};
  }

  // Returns (u, v, z) for a camera-frame point in front of the camera.
  std::optional<Eigen::Matrix<Scalar, 3, 1>> project(const Eigen::Matrix<Scalar, 3, 1>& d) const {
    if (!(d.z() > Scalar(0))) return std::nullopt;
    return Eigen::Matrix<Scalar, 3, 1>(fx * d.x() / d.z() + cx, fy * d.y() / d.z() + cy, d.z());
  }
};

// Camera-from-world rigid transform: D = R X + t. Backprojection to world is
// X = R^T D - R^T t.
template <typename Scalar>
struct PoseT {
  using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
  using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

  Matrix3 rotation = Matrix3::Identity();
  Vector3 translation = Vector3::Zero();

  static PoseT identity() { return {}; }

  // Builds the camera-from-world pose of a camera at `center` whose
  // camera-to-world rotation is `world_from_camera`.
  static PoseT from_center(const Matrix3& world_from_camera, const Vector3& center) {
    PoseT p;
    p.rotation = world_from_camera.transpose();
    p.translation = -p.rotation * center;
    return p;
  }

  Vector3 to_camera(const Vector3& world) const { return rotation * world + translation; }
  Vector3 to_world(const Vector3& camera) const {
    return rotation.transpose() * camera - rotation.transpose() * translation;
  }
  Vector3 center() const { return -rotation.transpose() * translation; }
  Matrix3 world_from_camera() const { return rotation.transpose(); }
};

using Intrinsics = IntrinsicsT<double>;
using Pose = PoseT<double>;

// Infinity norm of R^T R - I.
template <typename Derived>
double orthonormality_error(const Eigen::MatrixBase<Derived>& r) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
}

template <typename Derived>
bool is_rotation(const Eigen::MatrixBase<Derived>& r, double tol = 1e-9) {
  return orthonormality_error(r) < tol && r.determinant() > 0;
}

// Nearest rotation in the Frobenius sense.
Mat3 project_to_rotation(const Mat3& m);

// Rodrigues exponential of an axis-angle vector.
Mat3 rotation_from_axis_angle(const Vec3& w);

// Angle of the relative rotation a b^T in radians.
double rotation_angle_between(const Mat3& a, const Mat3& b);

// Rectangle origin + a*axis_u + b*axis_v with a in [0, extent_u] and b in
// [0, extent_v]. Axes are unit and orthogonal; the normal is axis_u x axis_v.
struct PlanePatch {
  Vec3 origin = Vec3::Zero();
  Vec3 axis_u = Vec3::UnitX();
  Vec3 axis_v = Vec3::UnitY();
  double extent_u = 1;
  double extent_v = 1;

  Vec3 normal() const { return axis_u.cross(axis_v); }
  Vec3 closest_point(const Vec3& p) const;
};

struct DepthRange {
  double min = 0.5;
  double max = 8.0;
};

using DepthImage = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline bool is_valid_depth(double z) { return std::isfinite(z) && z > 0; }

// Dense depth grid in meters; row v, column u. NaN or 0 marks an invalid pixel.
struct DepthMap {
  ViewId view = 0;
  DepthImage depths;
  Intrinsics intrinsics;
  Pose pose;
  std::optional<std::vector<Rgb>> color;  // row-major, width*height

  int width() const { return static_cast<int>(depths.cols()); }
  int height() const { return static_cast<int>(depths.rows()); }
  double depth(int u, int v) const { return depths(v, u); }
  bool valid(int u, int v) const { return is_valid_depth(depths(v, u)); }
  std::size_t valid_count() const;
};

// Throws ConfigError when the grid and the intrinsics disagree.
void check_consistent(const DepthMap& dm);

// Invalidates depths outside `range`. Returns the number of pixels cleared.
std::size_t clamp_to_range(DepthMap& dm, const DepthRange& range);

struct OrientedPoint {
  Vec3 position = Vec3::Zero();  // world frame
  Vec3 normal = Vec3::UnitZ();   // world frame, unit length
  ViewId view = 0;
  int u = 0;
  int v = 0;
  double depth = 0;  // camera-frame z
};

// Per-pixel camera-frame normals, row-major. Invalid pixels hold NaN.
std::vector<Vec3> estimate_normals(const DepthMap& dm);

// One OrientedPoint per valid pixel in row-major order.
std::vector<OrientedPoint> backproject(const DepthMap& dm);

// World point to (u, v, z) in the given view; nullopt behind the camera.
std::optional<Vec3> project(const Intrinsics& intr, const Pose& pose, const Vec3& world);

// Applies the world-space increment (rot_inc, trans_inc) to a pose so that
// backprojecting with the result equals rot_inc * X + trans_inc for every
// point X backprojected with `old`.
Pose compose_pose_update(const Pose& old, const Mat3& rot_inc, const Vec3& trans_inc);

}  // namespace dmfusion
