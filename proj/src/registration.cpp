#include "dmfusion/registration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Geometry>
#include <Eigen/SVD>

namespace dmfusion {

void IcpParams::validate() const {
  if (max_iterations < 1) throw ConfigError("icp: max_iterations must be >= 1");
  if (!(max_correspondence_dist > 0)) throw ConfigError("icp: max_correspondence_dist must be > 0");
  if (!(trim_fraction >= 0 && trim_fraction < 1)) throw ConfigError("icp: trim_fraction must be in [0, 1)");
  if (!(min_matched_fraction >= 0 && min_matched_fraction <= 1))
    throw ConfigError("icp: min_matched_fraction must be in [0, 1]");
}

double point_to_plane_residual(const Vector6& increment, const Vec3& p, const Vec3& q, const Vec3& n) {
  const Vec3 moved = rotation_from_axis_angle(increment.head<3>()) * p + increment.tail<3>();
  return (moved - q).dot(n);
}

Row6 point_to_plane_jacobian(const Vec3& p, const Vec3& n) {
  Row6 j;
  j << p.cross(n).transpose(), n.transpose();
  return j;
}

Vector6 solve_point_to_plane(std::span<const Vec3> src, std::span<const Vec3> dst, std::span<const Vec3> normals) {
  Eigen::Matrix<double, 6, 6> jtj = Eigen::Matrix<double, 6, 6>::Zero();
  Vector6 jtr = Vector6::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Row6 j = point_to_plane_jacobian(src[i], normals[i]);
    const double r = (src[i] - dst[i]).dot(normals[i]);
    jtj.noalias() += j.transpose() * j;
    jtr.noalias() += j.transpose() * r;
  }
  Eigen::JacobiSVD<Eigen::Matrix<double, 6, 6>> svd(jtj, Eigen::ComputeFullU | Eigen::ComputeFullV);
  svd.setThreshold(1e-10);
  return svd.solve(-jtr);
}

void solve_point_to_point(std::span<const Vec3> src, std::span<const Vec3> dst, Mat3& rotation, Vec3& translation) {
  if (src.size() != dst.size() || src.size() < 3) throw InputError("point-to-point solve needs >= 3 pairs");
  Eigen::Matrix3Xd a(3, src.size()), b(3, dst.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    a.col(static_cast<Eigen::Index>(i)) = src[i];
    b.col(static_cast<Eigen::Index>(i)) = dst[i];
  }
  const Eigen::Matrix4d t = Eigen::umeyama(a, b, false);
  rotation = t.topLeftCorner<3, 3>();
  translation = t.topRightCorner<3, 1>();
}

namespace {

struct Correspondences {
  std::vector<Vec3> src, dst, normals;
  double rms = 0;
  std::size_t matched = 0;  // before trimming
};

Correspondences correspond(std::span<const OrientedPoint> source, const Mat3& r, const Vec3& t,
                           const FusedCloud& target, const IcpParams& params) {
  struct Pair {
    Vec3 p;
    FusedCloud::Id id;
    double residual;
    std::size_t order;
  };
  std::vector<Pair> pairs;
  pairs.reserve(source.size());
  const bool plane = params.variant == IcpVariant::point_to_plane;
  for (const auto& s : source) {
    const Vec3 p = r * s.position + t;
    const auto id = target.index().nearest(p, params.max_correspondence_dist);
    if (!id) continue;
    const FusedPoint& q = target[*id];
    const double res = plane ? std::abs((p - q.position).dot(q.normal)) : (p - q.position).norm();
    pairs.push_back({p, *id, res, pairs.size()});
  }

  Correspondences c;
  c.matched = pairs.size();
  std::size_t keep = pairs.size();
  if (params.trim_fraction > 0 && pairs.size() > 10) {
    keep = pairs.size() - static_cast<std::size_t>(std::floor(params.trim_fraction * pairs.size()));
    // Ties are broken by source order so the kept set is fully determined.
    std::nth_element(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(keep), pairs.end(),
                     [](const Pair& x, const Pair& y) {
                       return x.residual < y.residual || (x.residual == y.residual && x.order < y.order);
                     });
    std::sort(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(keep),
              [](const Pair& x, const Pair& y) { return x.order < y.order; });
  }
  double sum2 = 0;
  c.src.reserve(keep);
  c.dst.reserve(keep);
  c.normals.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    const FusedPoint& q = target[pairs[i].id];
    c.src.push_back(pairs[i].p);
    c.dst.push_back(q.position);
    c.normals.push_back(q.normal);
    sum2 += pairs[i].residual * pairs[i].residual;
  }
  c.rms = keep > 0 ? std::sqrt(sum2 / static_cast<double>(keep)) : 0.0;
  return c;
}

}  // namespace

IcpResult icp_align(std::span<const OrientedPoint> source, const FusedCloud& target, const IcpParams& params) {
  params.validate();
  if (source.empty() || target.empty()) throw RegistrationError("icp: empty source or target");

  IcpResult result;
  Mat3 r = Mat3::Identity();
  Vec3 t = Vec3::Zero();
  Correspondences cur = correspond(source, r, t, target, params);
  const double n = static_cast<double>(source.size());
  result.rms_before = cur.rms;
  result.matched_fraction = static_cast<double>(cur.matched) / n;
  if (result.matched_fraction < params.min_matched_fraction || cur.src.size() < 6) {
    throw RegistrationError("icp: matched fraction " + std::to_string(result.matched_fraction) + " below minimum");
  }

  for (int it = 0; it < params.max_iterations; ++it) {
    Vector6 step;
    if (params.variant == IcpVariant::point_to_plane) {
      step = solve_point_to_plane(cur.src, cur.dst, cur.normals);
    } else {
      Mat3 dr;
      Vec3 dt;
      solve_point_to_point(cur.src, cur.dst, dr, dt);
      const Eigen::AngleAxisd aa(dr);
      step << aa.angle() * aa.axis(), dt;
    }
    ++result.iterations_run;
    const Mat3 dr = rotation_from_axis_angle(step.head<3>());
    const Mat3 r_next = project_to_rotation(dr * r);
    const Vec3 t_next = dr * t + step.tail<3>();
    Correspondences next = correspond(source, r_next, t_next, target, params);
    // An increment that raises the RMS is rejected and ends the loop.
    if (next.src.size() < 6 || next.rms > cur.rms) break;
    const double change = cur.rms - next.rms;
    r = r_next;
    t = t_next;
    cur = std::move(next);
    if (change < params.convergence_eps) break;
  }

  result.rotation = r;
  result.translation = t;
  result.rms_after = cur.rms;
  result.matched_fraction = static_cast<double>(cur.matched) / n;
  return result;
}

RefineOutcome refine_all_poses(std::span<const DepthMap> maps, const FusedCloud& cloud, const IcpParams& params,
                               const std::vector<bool>& frozen, bool exclude_own_unmerged) {
  RefineOutcome out;
  out.poses.reserve(maps.size());
  out.failed.assign(maps.size(), false);
  out.results.resize(maps.size());
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const DepthMap& dm = maps[i];
    out.poses.push_back(dm.pose);
    if (i < frozen.size() && frozen[i]) continue;
    const auto source = backproject(dm);
    try {
      if (source.empty()) throw RegistrationError("icp: map has no valid pixels");
      if (exclude_own_unmerged) {
        FusedCloud target(cloud.index().cell_size());
        for (const auto& p : cloud.points())
          if (p.merges > 0 || p.source_view != dm.view) target.add(p);
        if (target.empty()) throw RegistrationError("icp: no target points from other views");
        out.results[i] = icp_align(source, target, params);
      } else {
        out.results[i] = icp_align(source, cloud, params);
      }
      out.poses[i] = compose_pose_update(dm.pose, out.results[i].rotation, out.results[i].translation);
    } catch (const RegistrationError&) {
      out.failed[i] = true;
    }
  }
  return out;
}

}  // namespace dmfusion
