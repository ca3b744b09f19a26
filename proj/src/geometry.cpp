#include "dmfusion/geometry.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include <Eigen/SVD>

namespace dmfusion {

Mat3 project_to_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) d(2, 2) = -1;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

Mat3 rotation_from_axis_angle(const Vec3& w) {
  const double angle = w.norm();
  if (angle < 1e-300) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
}

double rotation_angle_between(const Mat3& a, const Mat3& b) {
  const Mat3 rel = a * b.transpose();
  // atan2 form stays accurate for tiny angles where acos((tr-1)/2) does not.
  const Vec3 axis(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1));
  return std::atan2(0.5 * axis.norm(), 0.5 * (rel.trace() - 1.0));
}

Vec3 PlanePatch::closest_point(const Vec3& p) const {
  const Vec3 d = p - origin;
  return origin + std::clamp(d.dot(axis_u), 0.0, extent_u) * axis_u + std::clamp(d.dot(axis_v), 0.0, extent_v) * axis_v;
}

std::size_t DepthMap::valid_count() const {
  std::size_t n = 0;
  for (Eigen::Index i = 0; i < depths.size(); ++i) n += is_valid_depth(depths.data()[i]);
  return n;
}

void check_consistent(const DepthMap& dm) {
  const auto& in = dm.intrinsics;
  if (!in.valid()) throw ConfigError("invalid intrinsics for view " + std::to_string(dm.view));
  if (in.width != dm.width() || in.height != dm.height()) {
    throw ConfigError("view " + std::to_string(dm.view) + ": depth grid is " +
                      std::to_string(dm.width()) + "x" + std::to_string(dm.height()) +
                      " but intrinsics declare " + std::to_string(in.width) + "x" +
                      std::to_string(in.height));
  }
  if (dm.color && dm.color->size() != static_cast<std::size_t>(dm.depths.size())) {
    throw ConfigError("view " + std::to_string(dm.view) + ": color size mismatch");
  }
}

std::size_t clamp_to_range(DepthMap& dm, const DepthRange& range) {
  std::size_t cleared = 0;
  for (Eigen::Index i = 0; i < dm.depths.size(); ++i) {
    double& z = dm.depths.data()[i];
    if (!is_valid_depth(z)) {
      z = std::numeric_limits<double>::quiet_NaN();
    } else if (z < range.min || z > range.max) {
      z = std::numeric_limits<double>::quiet_NaN();
      ++cleared;
    }
  }
  return cleared;
}

std::vector<Vec3> estimate_normals(const DepthMap& dm) {
  const int w = dm.width(), h = dm.height();
  const auto& in = dm.intrinsics;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<Vec3> normals(static_cast<std::size_t>(w) * h, Vec3::Constant(nan));

  auto point = [&](int u, int v) { return in.unproject(u, v, dm.depth(u, v)); };
  auto ok = [&](int u, int v) { return u >= 0 && v >= 0 && u < w && v < h && dm.valid(u, v); };

  // Central difference where both sides exist, one-sided otherwise.
  auto tangent = [&](int u, int v, int du, int dv, Vec3& out) {
    const bool fwd = ok(u + du, v + dv), back = ok(u - du, v - dv);
    if (fwd && back) {
      out = point(u + du, v + dv) - point(u - du, v - dv);
    } else if (fwd) {
      out = point(u + du, v + dv) - point(u, v);
    } else if (back) {
      out = point(u, v) - point(u - du, v - dv);
    } else {
      return false;
    }
    return true;
  };

  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      if (!dm.valid(u, v)) continue;
      const Vec3 p = point(u, v);
      const Vec3 to_camera = -p.normalized();
      Vec3 tu, tv, n;
      if (tangent(u, v, 1, 0, tu) && tangent(u, v, 0, 1, tv)) {
        n = tu.cross(tv);
        const double len = n.norm();
        if (len > 0 && std::isfinite(len)) {
          n /= len;
          if (n.dot(to_camera) < 0) n = -n;
        } else {
          n = to_camera;
        }
      } else {
        n = to_camera;
      }
      normals[static_cast<std::size_t>(v) * w + u] = n;
    }
  }
  return normals;
}

std::vector<OrientedPoint> backproject(const DepthMap& dm) {
  check_consistent(dm);
  const auto normals = estimate_normals(dm);
  const Mat3 world_from_cam = dm.pose.world_from_camera();
  std::vector<OrientedPoint> out;
  out.reserve(dm.valid_count());
  for (int v = 0; v < dm.height(); ++v) {
    for (int u = 0; u < dm.width(); ++u) {
      if (!dm.valid(u, v)) continue;
      OrientedPoint op;
      op.depth = dm.depth(u, v);
      op.position = dm.pose.to_world(dm.intrinsics.unproject(u, v, op.depth));
      op.normal = world_from_cam * normals[static_cast<std::size_t>(v) * dm.width() + u];
      op.view = dm.view;
      op.u = u;
      op.v = v;
      out.push_back(op);
    }
  }
  return out;
}

std::optional<Vec3> project(const Intrinsics& intr, const Pose& pose, const Vec3& world) {
  return intr.project(pose.to_camera(world));
}

Pose compose_pose_update(const Pose& old, const Mat3& rot_inc, const Vec3& trans_inc) {
  Pose p;
  p.rotation = old.rotation * rot_inc.transpose();
  p.translation = old.translation - p.rotation * trans_inc;
  return p;
}

}  // namespace dmfusion
