#include "dmfusion/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

namespace dmfusion {

FusedCloud::Id FusedCloud::add(const FusedPoint& p) {
  const auto id = static_cast<Id>(points_.size());
  points_.push_back(p);
  index_.insert(id, p.position);
  return id;
}

void FusedCloud::replace(Id id, const FusedPoint& p) {
  index_.move(id, points_[id].position, p.position);
  points_[id] = p;
}

std::size_t FusedCloud::retain(const std::function<bool(const FusedPoint&)>& keep) {
  std::vector<FusedPoint> kept;
  kept.reserve(points_.size());
  for (const auto& p : points_)
    if (keep(p)) kept.push_back(p);
  const std::size_t removed = points_.size() - kept.size();
  points_ = std::move(kept);
  index_.clear();
  for (std::size_t i = 0; i < points_.size(); ++i) index_.insert(static_cast<Id>(i), points_[i].position);
  return removed;
}

void MergeParams::validate() const {
  if (!(gate > 0)) throw ConfigError("merge: gate must be > 0");
  if (!(depth_ratio > 0 && depth_ratio < 1)) throw ConfigError("merge: depth_ratio must be in (0, 1)");
  if (!(candidate_radius_sigma > 0)) throw ConfigError("merge: candidate_radius_sigma must be > 0");
}

namespace {

bool invert_spd(const Mat3& c, Mat3& inv) {
  Eigen::LLT<Mat3> llt(c);
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14)) return false;
  inv = llt.solve(Mat3::Identity());
  return true;
}

}  // namespace

MergeOutcome try_merge(const FusedPoint& existing, const OrientedPoint& m, const Mat3& cov_m,
                       const MergeParams& params) {
  MergeOutcome out;
  Mat3 info_e, info_m, cov_fused;
  if (!invert_spd(existing.covariance, info_e) || !invert_spd(cov_m, info_m) ||
      !invert_spd(info_e + info_m, cov_fused)) {
    out.status = MergeOutcome::Status::singular;
    return out;
  }
  const Vec3 fused = cov_fused * (info_e * existing.position + info_m * m.position);
  const Vec3 de = fused - existing.position;
  const Vec3 dm = fused - m.position;
  out.mahalanobis_existing = de.dot(info_e * de);
  out.mahalanobis_new = dm.dot(info_m * dm);
  const double g2 = params.gate * params.gate;
  if (!(out.mahalanobis_existing <= g2 && out.mahalanobis_new <= g2)) return out;

  out.status = MergeOutcome::Status::merged;
  out.point = existing;
  out.point.position = fused;
  out.point.covariance = 0.5 * (cov_fused + cov_fused.transpose());
  const Vec3 n = existing.normal / existing.covariance.trace() + m.normal / cov_m.trace();
  if (n.norm() > 1e-12) out.point.normal = n.normalized();
  out.point.merges = existing.merges + 1;
  return out;
}

bool violates_visibility(const FusedPoint& existing, const OrientedPoint& m, const Vec3& camera_center,
                         const MergeParams& params) {
  const Vec3 to_cam_e = camera_center - existing.position;
  const Vec3 to_cam_m = camera_center - m.position;
  const double s_e = to_cam_e.norm(), s_m = to_cam_m.norm();
  if (!(s_e > 0 && s_m > 0)) return false;
  // acos(n . v) < pi/2  <=>  n . v > 0
  const bool faces_e = existing.normal.dot(to_cam_e / s_e) > 0;
  const bool faces_m = m.normal.dot(to_cam_m / s_m) > 0;
  return faces_e && faces_m && std::abs(s_e - s_m) < params.depth_ratio * s_m;
}

Mat3 measurement_covariance(const OrientedPoint& m, const Pose& pose, const SensorNoiseModel& model) {
  const Vec3 ray = (m.position - pose.center()).normalized();
  return align_to_los(covariance_camera(m.depth, model), ray, pose.world_from_camera());
}

namespace {

// Existing cloud points bucketed by the pixel they project to in one view.
class PixelBuckets {
 public:
  PixelBuckets(const FusedCloud& cloud, const DepthMap& dm) : width_(dm.width()) {
    const int w = dm.width(), h = dm.height();
    std::vector<std::int64_t> pixel_of(cloud.size(), -1);
    offsets_.assign(static_cast<std::size_t>(w) * h + 1, 0);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const auto uvz = project(dm.intrinsics, dm.pose, cloud[static_cast<FusedCloud::Id>(i)].position);
      if (!uvz) continue;
      const double u = std::floor((*uvz)[0] + 0.5), v = std::floor((*uvz)[1] + 0.5);
      if (u < 0 || v < 0 || u >= w || v >= h) continue;
      pixel_of[i] = static_cast<std::int64_t>(v) * w + static_cast<std::int64_t>(u);
      ++offsets_[pixel_of[i] + 1];
    }
    for (std::size_t k = 1; k < offsets_.size(); ++k) offsets_[k] += offsets_[k - 1];
    ids_.resize(offsets_.back());
    std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
    for (std::size_t i = 0; i < cloud.size(); ++i)
      if (pixel_of[i] >= 0) ids_[fill[pixel_of[i]]++] = static_cast<FusedCloud::Id>(i);
  }

  std::span<const FusedCloud::Id> at(int u, int v) const {
    const std::size_t k = static_cast<std::size_t>(v) * width_ + u;
    return {ids_.data() + offsets_[k], offsets_[k + 1] - offsets_[k]};
  }

 private:
  int width_;
  std::vector<std::size_t> offsets_;
  std::vector<FusedCloud::Id> ids_;
};

}  // namespace

FuseStats fuse_map(FusedCloud& cloud, const DepthMap& dm, const SensorNoiseModel& model,
                   const MergeParams& params) {
  params.validate();
  FuseStats stats;
  const std::uint32_t pass = cloud.begin_pass();
  const auto measurements = backproject(dm);
  const PixelBuckets buckets(cloud, dm);
  const Vec3 center = dm.pose.center();
  const Mat3 world_from_cam = dm.pose.world_from_camera();
  std::vector<FusedCloud::Id> candidates;
  std::vector<std::pair<double, FusedCloud::Id>> ranked;

  for (const OrientedPoint& m : measurements) {
    const Mat3 c_cam = covariance_camera(m.depth, model);
    const Mat3 cov_m = align_to_los(c_cam, (m.position - center).normalized(), world_from_cam);
    const double radius = params.candidate_radius_sigma * std::sqrt(c_cam.diagonal().maxCoeff());
    cloud.index().radius_search(m.position, radius, candidates);

    ranked.clear();
    for (auto id : candidates) {
      const FusedPoint& e = cloud[id];
      if (e.last_pass == pass) continue;
      const Vec3 d = m.position - e.position;
      ranked.push_back({d.dot((e.covariance + cov_m).ldlt().solve(d)), id});
    }
    std::sort(ranked.begin(), ranked.end());

    std::optional<FusedCloud::Id> merged_into;
    for (const auto& [d2, id] : ranked) {
      MergeOutcome outcome = try_merge(cloud[id], m, cov_m, params);
      if (outcome.status == MergeOutcome::Status::singular) ++stats.singular;
      if (!outcome.accepted()) continue;
      outcome.point.last_pass = pass;
      cloud.replace(id, outcome.point);
      ++stats.merged;
      merged_into = id;
      break;
    }
    if (merged_into) {
      if (params.visibility_on_merge) {
        for (auto id : buckets.at(m.u, m.v)) {
          if (cloud[id].last_pass == pass) continue;
          if (violates_visibility(cloud[id], m, center, params)) {
            cloud.add_violation(id);
            ++stats.violations;
          }
        }
      }
      continue;
    }

    FusedPoint fresh;
    fresh.position = m.position;
    fresh.covariance = cov_m;
    fresh.normal = m.normal;
    fresh.source_view = dm.view;
    fresh.last_pass = pass;
    if (dm.color) fresh.color = (*dm.color)[static_cast<std::size_t>(m.v) * dm.width() + m.u];
    for (auto id : buckets.at(m.u, m.v)) {
      if (cloud[id].last_pass == pass) continue;
      if (violates_visibility(cloud[id], m, center, params)) {
        cloud.add_violation(id);
        ++fresh.violations;
        ++stats.violations;
      }
    }
    cloud.add(fresh);
    ++stats.added;
  }
  return stats;
}

std::size_t postfilter(FusedCloud& cloud) {
  return cloud.retain([](const FusedPoint& p) { return p.violations <= p.merges; });
}

}  // namespace dmfusion
