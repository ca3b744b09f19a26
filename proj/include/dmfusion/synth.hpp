#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dmfusion/evalkit.hpp"
#include "dmfusion/geometry.hpp"
#include "dmfusion/sensor.hpp"

namespace dmfusion {

struct AxisBox {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Ones();

  bool contains(const Vec3& p) const {
    return (p.array() > min.array()).all() && (p.array() < max.array()).all();
  }
};

struct SceneSpec {
  std::vector<PlanePatch> planes;
  std::vector<AxisBox> boxes;
  AxisBox bounds;

  // Three orthogonal 3 m walls meeting at the origin: floor z=0, walls x=0
  // and y=0, normals pointing into the positive octant.
  static SceneSpec ccorner();
  // ccorner plus two boxes standing on the floor.
  static SceneSpec cluttered();
  static SceneSpec preset(const std::string& name);

  void validate() const;
};

// Every plane and box face of the scene as a bounded ground-truth plane.
GroundTruthPlanes ground_truth(const SceneSpec& scene);

// Camera at `center` looking at `target`; image x right, y down, z forward.
Pose look_at(const Vec3& center, const Vec3& target, const Vec3& up = Vec3::UnitZ());

// `count` cameras on an arc around the preset's focus, all looking at it.
std::vector<Pose> preset_views(const std::string& preset, int count);

// Ray-cast depth of the nearest surface per pixel; misses and hits outside
// `range` are invalid.
DepthMap render_depth(const SceneSpec& scene, const Intrinsics& intr, const Pose& pose, ViewId view = 0,
                      const DepthRange& range = {});

struct CorruptionSpec {
  bool depth_noise = false;  // axial Gaussian noise with std sigma_z(z)
  double outlier_rate = 0;   // pixels replaced by a uniform depth in range
  double rotation_std = 0;   // rad, per axis
  double translation_std = 0;  // m, per axis
  double dropout_rate = 0;
  DepthRange range;

  void validate() const;
};

struct Corrupted {
  DepthMap map;
  Pose pose;
  std::size_t outliers = 0;
  std::size_t dropped = 0;
};

// Deterministic in (seed, dm.view). The pose perturbation rotates the camera
// about its own center, then shifts the center.
Corrupted corrupt(const DepthMap& dm, const CorruptionSpec& spec, const SensorNoiseModel& model, std::uint64_t seed);

}  // namespace dmfusion
