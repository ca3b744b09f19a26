#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "dmfusion/geometry.hpp"
#include "test_util.hpp"

using namespace dmfusion;
using dmfusion::test::constant_map;
using dmfusion::test::make_intrinsics;

namespace {

const OrientedPoint* at_pixel(const std::vector<OrientedPoint>& pts, int u, int v) {
  for (const auto& p : pts)
    if (p.u == u && p.v == v) return &p;
  return nullptr;
}

}  // namespace

TEST_CASE("backproject principal ray and unit offset") {
  DepthMap dm = constant_map(5, 5, 10.0, 2.0);
  auto pts = backproject(dm);
  REQUIRE(pts.size() == 25);
  const auto* c = at_pixel(pts, 2, 2);
  REQUIRE(c);
  CHECK((c->position - Vec3(0, 0, 2.0)).norm() < 1e-15);

  // cx + fx lies outside a 5 px image, so use a wide one.
  DepthMap wide = constant_map(41, 5, 10.0, 1.0);
  pts = backproject(wide);
  const auto* off = at_pixel(pts, 30, 2);
  REQUIRE(off);
  CHECK((off->position - Vec3(1.0, 0, 1.0)).norm() < 1e-15);
}

TEST_CASE("backproject applies the camera-from-world convention") {
  Pose pose;
  pose.translation = Vec3(0, 0, -1);
  DepthMap dm = constant_map(5, 5, 10.0, 1.0, pose);
  const auto pts = backproject(dm);
  const auto* c = at_pixel(pts, 2, 2);
  REQUIRE(c);
  CHECK((c->position - Vec3(0, 0, 2.0)).norm() < 1e-15);
}

TEST_CASE("backproject skips invalid pixels and keeps row-major order") {
  DepthMap dm = constant_map(4, 3, 10.0, 1.0);
  dm.depths(0, 1) = 0;
  dm.depths(2, 3) = std::numeric_limits<double>::quiet_NaN();
  const auto pts = backproject(dm);
  CHECK(pts.size() == 10);
  for (std::size_t i = 1; i < pts.size(); ++i)
    CHECK(pts[i - 1].v * 4 + pts[i - 1].u < pts[i].v * 4 + pts[i].u);
  CHECK(dm.valid_count() == 10);
}

TEST_CASE("dimension mismatch is a configuration error") {
  DepthMap dm = constant_map(4, 3, 10.0, 1.0);
  dm.intrinsics.width = 5;
  dm.intrinsics.cx = 2;
  CHECK_THROWS_AS(backproject(dm), ConfigError);
}

TEST_CASE("project inverts backproject") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> z(0.5, 8.0);
  DepthMap dm = constant_map(32, 24, 30.0, 1.0, test::random_pose(rng));
  for (int v = 0; v < 24; ++v)
    for (int u = 0; u < 32; ++u) dm.depths(v, u) = z(rng);
  for (const auto& p : backproject(dm)) {
    const auto uvz = project(dm.intrinsics, dm.pose, p.position);
    REQUIRE(uvz);
    CHECK(std::abs((*uvz)[0] - p.u) < 1e-6);
    CHECK(std::abs((*uvz)[1] - p.v) < 1e-6);
    CHECK(std::abs((*uvz)[2] - dm.depth(p.u, p.v)) < 1e-9);
  }
}

TEST_CASE("to_camera then to_world is the identity") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const Pose p = test::random_pose(rng);
    const Vec3 x = test::random_vec(rng, 5.0);
    CHECK((p.to_world(p.to_camera(x)) - x).norm() < 1e-9);
    CHECK(is_rotation(p.rotation));
  }
}

TEST_CASE("compose_pose_update closed-form examples") {
  const Pose id;
  const Pose same = compose_pose_update(id, Mat3::Identity(), Vec3::Zero());
  CHECK(same.rotation.isApprox(Mat3::Identity()));
  CHECK(same.translation.norm() == 0);

  const Pose shifted = compose_pose_update(id, Mat3::Identity(), Vec3(0, 0, 0.1));
  CHECK((shifted.rotation - Mat3::Identity()).norm() < 1e-15);
  CHECK((shifted.translation - Vec3(0, 0, -0.1)).norm() < 1e-15);
}

TEST_CASE("compose_pose_update matches updating the backprojection, 1000 trials") {
  std::mt19937_64 rng(3);
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Pose old = test::random_pose(rng);
    const Mat3 rh = test::random_rotation(rng);
    const Vec3 th = test::random_vec(rng, 1.0);
    const Pose updated = compose_pose_update(old, rh, th);
    REQUIRE(is_rotation(updated.rotation));
    for (int k = 0; k < 4; ++k) {
      const Vec3 d = test::random_vec(rng, 4.0);
      const Vec3 expected = rh * old.to_world(d) + th;
      worst = std::max(worst, (updated.to_world(d) - expected).norm());
    }
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("normals of a fronto-parallel plane face the camera") {
  const DepthMap dm = constant_map(20, 15, 20.0, 1.7);
  const auto n = estimate_normals(dm);
  for (int v = 1; v < 14; ++v)
    for (int u = 1; u < 19; ++u) CHECK((n[v * 20 + u] - Vec3(0, 0, -1)).norm() < 1e-6);
}

TEST_CASE("normals of a 45 degree plane") {
  // Plane x + z = 2 seen from the origin: z = 2 / (1 + (u - cx) / fx).
  DepthMap dm = constant_map(21, 21, 25.0, 1.0);
  for (int v = 0; v < 21; ++v)
    for (int u = 0; u < 21; ++u) dm.depths(v, u) = 2.0 / (1.0 + (u - dm.intrinsics.cx) / dm.intrinsics.fx);
  const auto n = estimate_normals(dm);
  const Vec3 expected = Vec3(-1, 0, -1).normalized();
  for (int v = 1; v < 20; ++v)
    for (int u = 1; u < 20; ++u) CHECK((n[v * 21 + u] - expected).norm() < 1e-6);
}

TEST_CASE("isolated pixel falls back to the reversed ray") {
  DepthMap dm = constant_map(7, 7, 10.0, 0.0);
  dm.depths(1, 5) = 2.0;
  const auto n = estimate_normals(dm);
  const Vec3 ray = dm.intrinsics.unproject(5, 1, 1.0).normalized();
  CHECK((n[1 * 7 + 5] + ray).norm() < 1e-12);
  CHECK(std::isnan(n[0].x()));
}

TEST_CASE("world normals are unit length and face the camera") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> z(1.0, 1.3);
  DepthMap dm = constant_map(16, 12, 15.0, 1.0, test::random_pose(rng));
  for (int v = 0; v < 12; ++v)
    for (int u = 0; u < 16; ++u) dm.depths(v, u) = z(rng);
  const Vec3 c = dm.pose.center();
  for (const auto& p : backproject(dm)) {
    CHECK(std::abs(p.normal.norm() - 1) < 1e-6);
    CHECK(p.normal.dot(c - p.position) > 0);
  }
}

TEST_CASE("project_to_rotation and axis-angle helpers") {
  std::mt19937_64 rng(9);
  const Mat3 r = test::random_rotation(rng);
  Mat3 noisy = r;
  noisy(0, 1) += 1e-5;
  const Mat3 p = project_to_rotation(noisy);
  CHECK(is_rotation(p));
  CHECK((p - r).norm() < 1e-4);

  const Mat3 rz = rotation_from_axis_angle(Vec3(0, 0, M_PI / 2));
  CHECK((rz * Vec3::UnitX() - Vec3::UnitY()).norm() < 1e-15);
  CHECK(std::abs(rotation_angle_between(rz, Mat3::Identity()) - M_PI / 2) < 1e-12);
  CHECK((rotation_from_axis_angle(Vec3::Zero()) - Mat3::Identity()).norm() == 0);
}

TEST_CASE("clamp_to_range invalidates out-of-range depths") {
  DepthMap dm = constant_map(3, 1, 1.0, 1.0);
  dm.depths << 0.4, 1.0, 9.0;
  CHECK(clamp_to_range(dm, {}) == 2);
  CHECK(dm.valid_count() == 1);
}

TEST_CASE("intrinsics validity") {
  CHECK(make_intrinsics(10, 10, 5).valid());
  Intrinsics bad = make_intrinsics(10, 10, 5);
  bad.cx = 10;
  CHECK_FALSE(bad.valid());
  bad = make_intrinsics(10, 10, -1);
  CHECK_FALSE(bad.valid());
}
