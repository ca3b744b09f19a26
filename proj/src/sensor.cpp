#include "dmfusion/sensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace dmfusion {

void SensorNoiseModel::validate(const DepthRange& range) const {
  if (!(lambda1 > 0) || !(lambda2 > 0)) throw ModelError("noise model: lambda1 and lambda2 must be > 0");
  if (!(beta_x > 0) || !(beta_y > 0)) throw ModelError("noise model: beta_x and beta_y must be > 0");
  std::vector<double> probes{range.min, range.max};
  if (alpha2 != 0) {
    const double vertex = -alpha1 / (2 * alpha2);
    if (vertex > range.min && vertex < range.max) probes.push_back(vertex);
  }
  for (double z : probes) {
    if (!(axial_sigma(z) > 0)) {
      throw ModelError("noise model: axial sigma is not positive at z=" + std::to_string(z));
    }
  }
}

Mat3 covariance_camera(double z, const SensorNoiseModel& model) {
  const double sz = model.axial_sigma(z);
  if (!(sz > 0)) throw ModelError("noise model: nonpositive axial sigma at z=" + std::to_string(z));
  const double sqrt12 = std::sqrt(12.0);
  const double sx = model.beta_x * z / sqrt12;
  const double sy = model.beta_y * z / sqrt12;
  return Vec3(model.lambda1 * sx * sx, model.lambda1 * sy * sy, model.lambda2 * sz * sz).asDiagonal();
}

Mat3 align_to_los(const Mat3& c_cam, const Vec3& ray, const Mat3& world_from_camera) {
  const Vec3 axis = world_from_camera.col(2);
  if (axis.dot(ray) <= -1.0 + 1e-12) throw DomainError("line of sight is antiparallel to the optical axis");
  const Mat3 q = Eigen::Quaterniond::FromTwoVectors(axis, ray).toRotationMatrix() * world_from_camera;
  const Mat3 c = q * c_cam * q.transpose();
  return 0.5 * (c + c.transpose());
}

double reference_distance(double z, const Intrinsics& intr, int k) {
  const double dx = z / intr.fx, dy = z / intr.fy;
  std::vector<double> d;
  for (int j = -k; j <= k; ++j) {
    for (int i = -k; i <= k; ++i) {
      if (i == 0 && j == 0) continue;
      d.push_back(std::hypot(i * dx, j * dy));
    }
  }
  std::nth_element(d.begin(), d.begin() + (k - 1), d.end());
  return d[k - 1];
}

PrefilterResult prefilter(const DepthMap& dm, const FilterParams& params) {
  check_consistent(dm);
  if (!(params.gamma > 1) || params.k < 1) throw ConfigError("filter: need gamma > 1 and k >= 1");

  PrefilterResult result{dm, 0, false};
  const int w = dm.width(), h = dm.height();
  const std::size_t n_valid = dm.valid_count();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (n_valid < static_cast<std::size_t>(params.k) + 1) {
    result.too_sparse = true;
    result.removed = n_valid;
    result.map.depths.setConstant(nan);
    return result;
  }

  std::vector<Vec3> pts(static_cast<std::size_t>(w) * h);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      if (dm.valid(u, v)) pts[static_cast<std::size_t>(v) * w + u] = dm.intrinsics.unproject(u, v, dm.depth(u, v));

  // d_r is linear in z, so one lattice evaluation serves every pixel.
  const double ref_per_meter = reference_distance(1.0, dm.intrinsics, params.k);
  const int radius = static_cast<int>(std::ceil(params.gamma * params.k));

  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      if (!dm.valid(u, v)) continue;
      const Vec3& p = pts[static_cast<std::size_t>(v) * w + u];
      const double thr = params.gamma * ref_per_meter * dm.depth(u, v);
      const double thr2 = thr * thr;
      int within = 0;
      for (int vv = std::max(0, v - radius); vv <= std::min(h - 1, v + radius) && within < params.k; ++vv) {
        for (int uu = std::max(0, u - radius); uu <= std::min(w - 1, u + radius); ++uu) {
          if ((uu == u && vv == v) || !dm.valid(uu, vv)) continue;
          if ((pts[static_cast<std::size_t>(vv) * w + uu] - p).squaredNorm() <= thr2 && ++within >= params.k) break;
        }
      }
      if (within < params.k) {
        result.map.depths(v, u) = nan;
        ++result.removed;
      }
    }
  }
  return result;
}

}  // namespace dmfusion
