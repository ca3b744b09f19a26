#include "dmfusion/synth.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace dmfusion {

namespace {

PlanePatch patch(const Vec3& origin, const Vec3& u, const Vec3& v, double eu, double ev) {
  return {origin, u, v, eu, ev};
}

// Ray parameter of the nearest entry into the box, if any, for s > 0.
std::optional<double> hit_box(const AxisBox& b, const Vec3& o, const Vec3& d) {
  double lo = 0, hi = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0) {
      if (o[a] < b.min[a] || o[a] > b.max[a]) return std::nullopt;
      continue;
    }
    double t0 = (b.min[a] - o[a]) / d[a], t1 = (b.max[a] - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    lo = std::max(lo, t0);
    hi = std::min(hi, t1);
    if (lo > hi) return std::nullopt;
  }
  if (!(lo > 0)) return std::nullopt;
  return lo;
}

std::optional<double> hit_patch(const PlanePatch& p, const Vec3& o, const Vec3& d) {
  const Vec3 n = p.normal();
  const double denom = n.dot(d);
  if (denom == 0) return std::nullopt;
  const double s = n.dot(p.origin - o) / denom;
  if (!(s > 0)) return std::nullopt;
  const Vec3 rel = o + s * d - p.origin;
  const double a = rel.dot(p.axis_u), b = rel.dot(p.axis_v);
  if (a < 0 || a > p.extent_u || b < 0 || b > p.extent_v) return std::nullopt;
  return s;
}

}  // namespace

SceneSpec SceneSpec::ccorner() {
  constexpr double side = 3.0;
  SceneSpec s;
  const Vec3 x = Vec3::UnitX(), y = Vec3::UnitY(), z = Vec3::UnitZ();
  s.planes.push_back(patch(Vec3::Zero(), x, y, side, side));  // floor, +z
  s.planes.push_back(patch(Vec3::Zero(), y, z, side, side));  // x = 0 wall, +x
  s.planes.push_back(patch(Vec3::Zero(), z, x, side, side));  // y = 0 wall, +y
  s.bounds = {Vec3::Constant(-0.01), Vec3::Constant(side + 0.01)};
  return s;
}

SceneSpec SceneSpec::cluttered() {
  SceneSpec s = ccorner();
  s.boxes.push_back({Vec3(0.5, 0.4, 0.0), Vec3(0.9, 0.8, 0.4)});
  s.boxes.push_back({Vec3(1.2, 0.3, 0.0), Vec3(1.5, 0.6, 0.6)});
  return s;
}

SceneSpec SceneSpec::preset(const std::string& name) {
  if (name == "ccorner") return ccorner();
  if (name == "cluttered") return cluttered();
  throw InputError("unknown scene preset '" + name + "'");
}

void SceneSpec::validate() const {
  if (planes.empty() && boxes.empty()) throw InputError("scene has no primitives");
  auto inside = [&](const Vec3& p) {
    return (p.array() >= bounds.min.array()).all() && (p.array() <= bounds.max.array()).all();
  };
  for (const auto& p : planes) {
    if (!inside(p.origin) || !inside(p.origin + p.extent_u * p.axis_u + p.extent_v * p.axis_v))
      throw InputError("scene plane outside declared bounds");
  }
  for (const auto& b : boxes)
    if (!inside(b.min) || !inside(b.max)) throw InputError("scene box outside declared bounds");
}

GroundTruthPlanes ground_truth(const SceneSpec& scene) {
  GroundTruthPlanes gt;
  for (const auto& p : scene.planes) gt.planes.push_back(GroundTruthPlane::from_patch(p));
  for (const auto& b : scene.boxes) {
    const Vec3 e = b.max - b.min;
    const Vec3 x = Vec3::UnitX(), y = Vec3::UnitY(), z = Vec3::UnitZ();
    // Outward-facing faces.
    const PlanePatch faces[] = {
        patch(b.min, z, y, e.z(), e.y()),                  // -x
        patch(Vec3(b.max.x(), b.min.y(), b.min.z()), y, z, e.y(), e.z()),  // +x
        patch(b.min, x, z, e.x(), e.z()),                  // -y
        patch(Vec3(b.min.x(), b.max.y(), b.min.z()), z, x, e.z(), e.x()),  // +y
        patch(b.min, y, x, e.y(), e.x()),                  // -z
        patch(Vec3(b.min.x(), b.min.y(), b.max.z()), x, y, e.x(), e.y()),  // +z
    };
    for (const auto& f : faces) gt.planes.push_back(GroundTruthPlane::from_patch(f));
  }
  return gt;
}

Pose look_at(const Vec3& center, const Vec3& target, const Vec3& up) {
  const Vec3 forward = (target - center).normalized();
  const Vec3 right = forward.cross(up).normalized();
  const Vec3 down = forward.cross(right);
  Mat3 world_from_cam;
  world_from_cam << right, down, forward;
  return Pose::from_center(world_from_cam, center);
}

std::vector<Pose> preset_views(const std::string& preset, int count) {
  SceneSpec::preset(preset);  // validates the name
  if (count < 1) throw InputError("view count must be >= 1");
  const Vec3 focus(0.6, 0.6, 0.45);
  constexpr double distance = 2.2;
  const double elevation = 35.0 * std::numbers::pi / 180.0;
  const double spread = 50.0 * std::numbers::pi / 180.0;
  std::vector<Pose> poses;
  for (int i = 0; i < count; ++i) {
    const double frac = count == 1 ? 0.5 : static_cast<double>(i) / (count - 1);
    const double azimuth = std::numbers::pi / 4 + (frac - 0.5) * spread;
    // Alternate the height a little so the views are not coplanar.
    const double el = elevation + ((i % 2) ? 0.06 : -0.06);
    const Vec3 dir(std::cos(el) * std::cos(azimuth), std::cos(el) * std::sin(azimuth), std::sin(el));
    poses.push_back(look_at(focus + distance * dir, focus));
  }
  return poses;
}

DepthMap render_depth(const SceneSpec& scene, const Intrinsics& intr, const Pose& pose, ViewId view,
                      const DepthRange& range) {
  if (!intr.valid()) throw InputError("render: invalid intrinsics");
  const Vec3 c = pose.center();
  for (const auto& b : scene.boxes)
    if (b.contains(c)) throw InputError("render: camera is inside a scene primitive");

  DepthMap dm;
  dm.view = view;
  dm.intrinsics = intr;
  dm.pose = pose;
  dm.depths.setConstant(intr.height, intr.width, std::numeric_limits<double>::quiet_NaN());
  const Mat3 world_from_cam = pose.world_from_camera();
  for (int v = 0; v < intr.height; ++v) {
    for (int u = 0; u < intr.width; ++u) {
      // Direction with unit camera-z, so the ray parameter equals the depth.
      const Vec3 d = world_from_cam * Vec3((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0);
      double best = std::numeric_limits<double>::infinity();
      for (const auto& p : scene.planes)
        if (auto s = hit_patch(p, c, d)) best = std::min(best, *s);
      for (const auto& b : scene.boxes)
        if (auto s = hit_box(b, c, d)) best = std::min(best, *s);
      if (std::isfinite(best) && best >= range.min && best <= range.max) dm.depths(v, u) = best;
    }
  }
  return dm;
}

void CorruptionSpec::validate() const {
  auto rate = [](double r) { return r >= 0 && r <= 1; };
  if (!rate(outlier_rate) || !rate(dropout_rate)) throw InputError("corruption rates must be in [0, 1]");
  if (!(rotation_std >= 0) || !(translation_std >= 0)) throw InputError("pose perturbation std must be >= 0");
}

Corrupted corrupt(const DepthMap& dm, const CorruptionSpec& spec, const SensorNoiseModel& model,
                  std::uint64_t seed) {
  spec.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(dm.view)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Corrupted out{dm, dm.pose, 0, 0};
  if (spec.rotation_std > 0 || spec.translation_std > 0) {
    Vec3 w, shift;
    for (int a = 0; a < 3; ++a) w[a] = spec.rotation_std * gauss(rng);
    for (int a = 0; a < 3; ++a) shift[a] = spec.translation_std * gauss(rng);
    const Mat3 world_from_cam = rotation_from_axis_angle(w) * dm.pose.world_from_camera();
    out.pose = Pose::from_center(world_from_cam, dm.pose.center() + shift);
  }
  out.map.pose = out.pose;

  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int v = 0; v < dm.height(); ++v) {
    for (int u = 0; u < dm.width(); ++u) {
      // Fixed draw count per pixel keeps the streams aligned across specs.
      const double r_outlier = unit(rng), r_drop = unit(rng), r_depth = unit(rng), noise = gauss(rng);
      double& z = out.map.depths(v, u);
      if (spec.dropout_rate > 0 && r_drop < spec.dropout_rate) {
        if (is_valid_depth(z)) ++out.dropped;
        z = nan;
        continue;
      }
      if (spec.outlier_rate > 0 && r_outlier < spec.outlier_rate) {
        z = spec.range.min + r_depth * (spec.range.max - spec.range.min);
        ++out.outliers;
        continue;
      }
      if (spec.depth_noise && is_valid_depth(z)) {
        z += model.axial_sigma(z) * noise;
        if (z < spec.range.min || z > spec.range.max) z = nan;
      }
    }
  }
  return out;
}

}  // namespace dmfusion
