#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "dmfusion/registration.hpp"
#include "dmfusion/synth.hpp"
#include "test_util.hpp"

using namespace dmfusion;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Three 1 m faces of a concave corner sampled every `step`, normals inward.
FusedCloud corner_cloud(double step) {
  FusedCloud cloud(0.02);
  const int n = static_cast<int>(std::round(1.0 / step));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double a = (i + 0.5) * step, b = (j + 0.5) * step;
      for (const auto& [p, nrm] : {std::pair{Vec3(a, b, 0), Vec3::UnitZ()}, std::pair{Vec3(0, a, b), Vec3::UnitX()},
                                   std::pair{Vec3(a, 0, b), Vec3::UnitY()}}) {
        FusedPoint f;
        f.position = p;
        f.normal = nrm;
        cloud.add(f);
      }
    }
  return cloud;
}

std::vector<OrientedPoint> transformed(const FusedCloud& cloud, const Mat3& r, const Vec3& t) {
  std::vector<OrientedPoint> out;
  for (const auto& p : cloud.points()) {
    OrientedPoint o;
    o.position = r * p.position + t;
    o.normal = r * p.normal;
    out.push_back(o);
  }
  return out;
}

Intrinsics small_camera() { return test::make_intrinsics(128, 106, 91.25); }

std::vector<DepthMap> render_views(int count, const Intrinsics& intr) {
  const SceneSpec scene = SceneSpec::ccorner();
  const auto poses = preset_views("ccorner", count);
  std::vector<DepthMap> maps;
  for (int i = 0; i < count; ++i) maps.push_back(render_depth(scene, intr, poses[i], static_cast<ViewId>(i)));
  return maps;
}

Pose shift_center(const Pose& p, const Vec3& d) { return Pose::from_center(p.world_from_camera(), p.center() + d); }

}  // namespace

TEST_CASE("point-to-plane jacobian matches central differences") {
  std::mt19937_64 rng(51);
  double worst = 0;
  for (int trial = 0; trial < 500; ++trial) {
    // A random state moves p before the derivative is taken at that state.
    Vector6 state;
    state << test::random_vec(rng, 0.5), test::random_vec(rng, 0.3);
    const Vec3 p0 = test::random_vec(rng, 2.0), q = test::random_vec(rng, 2.0);
    const Vec3 n = test::random_vec(rng, 1.0).normalized();
    const Vec3 p = rotation_from_axis_angle(state.head<3>()) * p0 + state.tail<3>();
    const Row6 j = point_to_plane_jacobian(p, n);
    Row6 fd;
    const double h = 1e-6;
    for (int k = 0; k < 6; ++k) {
      Vector6 e = Vector6::Zero();
      e[k] = h;
      fd[k] = (point_to_plane_residual(e, p, q, n) - point_to_plane_residual(-e, p, q, n)) / (2 * h);
    }
    worst = std::max(worst, (fd - j).cwiseAbs().maxCoeff() / j.cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("point-to-point solve on exact correspondences") {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 50; ++trial) {
    const Mat3 r = test::random_rotation(rng);
    const Vec3 t = test::random_vec(rng, 1.0);
    std::vector<Vec3> src, dst;
    for (int i = 0; i < 100; ++i) {
      src.push_back(test::random_vec(rng, 1.0));
      dst.push_back(r * src.back() + t);
    }
    Mat3 rr;
    Vec3 tt;
    solve_point_to_point(src, dst, rr, tt);
    double sum2 = 0;
    for (std::size_t i = 0; i < src.size(); ++i) sum2 += (rr * src[i] + tt - dst[i]).squaredNorm();
    CHECK(std::sqrt(sum2 / src.size()) < 1e-9);
    CHECK(is_rotation(rr));
  }
  std::vector<Vec3> two(2, Vec3::Zero());
  Mat3 rr;
  Vec3 tt;
  CHECK_THROWS_AS(solve_point_to_point(two, two, rr, tt), InputError);
}

TEST_CASE("point-to-plane solve recovers a pure translation in one step") {
  const FusedCloud cloud = corner_cloud(0.05);
  std::vector<Vec3> src, dst, nrm;
  const Vec3 t(0.003, -0.002, 0.001);
  for (const auto& p : cloud.points()) {
    src.push_back(p.position - t);
    dst.push_back(p.position);
    nrm.push_back(p.normal);
  }
  const Vector6 step = solve_point_to_plane(src, dst, nrm);
  CHECK(step.head<3>().norm() < 1e-12);
  CHECK((step.tail<3>() - t).norm() < 1e-12);
}

TEST_CASE("icp on an aligned copy returns the identity") {
  const FusedCloud cloud = corner_cloud(0.02);
  const auto source = transformed(cloud, Mat3::Identity(), Vec3::Zero());
  const IcpResult r = icp_align(source, cloud, {});
  CHECK((r.rotation - Mat3::Identity()).norm() < 1e-12);
  CHECK(r.translation.norm() < 1e-12);
  CHECK(r.rms_after < 1e-12);
  CHECK(r.matched_fraction == 1.0);
}

TEST_CASE("icp recovers a 5 degree, 5 cm perturbation of a noise-free clone") {
  const FusedCloud cloud = corner_cloud(0.01);
  const Mat3 r = rotation_from_axis_angle(Vec3(0, 5 * kDeg, 0));
  const Vec3 t(0.03, -0.03, 0.02);
  REQUIRE(t.norm() == doctest::Approx(0.0469).epsilon(1e-3));
  const Vec3 t5 = t.normalized() * 0.05;
  // Source is the target moved by the inverse, so ICP must return (r, t5).
  const auto source = transformed(cloud, r.transpose(), -r.transpose() * t5);
  IcpParams params;
  params.max_correspondence_dist = 0.3;
  const IcpResult res = icp_align(source, cloud, params);
  CHECK(res.iterations_run <= 10);
  CHECK(rotation_angle_between(res.rotation, r) / kDeg < 0.01);
  CHECK((res.translation - t5).norm() < 0.5e-3);
  CHECK(is_rotation(res.rotation));
  CHECK(res.rms_after <= res.rms_before + 1e-12);
}

TEST_CASE("point-to-point icp reduces a small misalignment") {
  const FusedCloud cloud = corner_cloud(0.01);
  const Mat3 r = rotation_from_axis_angle(Vec3(0.3, -0.2, 0.5).normalized() * kDeg);
  const Vec3 t(0.004, -0.003, 0.002);
  const auto source = transformed(cloud, r.transpose(), -r.transpose() * t);
  IcpParams params;
  params.variant = IcpVariant::point_to_point;
  params.max_correspondence_dist = 0.05;
  params.max_iterations = 50;
  const IcpResult res = icp_align(source, cloud, params);
  CAPTURE(res.iterations_run);
  CHECK(rotation_angle_between(res.rotation, r) < 0.2 * kDeg);
  CHECK((res.translation - t).norm() < 0.2 * t.norm());
  CHECK(res.rms_after < res.rms_before);
}

TEST_CASE("icp RMS never increases with more iterations") {
  const FusedCloud cloud = corner_cloud(0.02);
  std::mt19937_64 rng(57);
  for (int trial = 0; trial < 5; ++trial) {
    const Mat3 r = test::random_rotation(rng, 4 * kDeg);
    const Vec3 t = test::random_vec(rng, 0.03);
    auto source = transformed(cloud, r, t);
    std::normal_distribution<double> noise(0, 0.002);
    for (auto& s : source) s.position += Vec3(noise(rng), noise(rng), noise(rng));
    IcpParams params;
    params.max_correspondence_dist = 0.1;
    double prev = 1e300;
    for (int m = 1; m <= 10; ++m) {
      params.max_iterations = m;
      const IcpResult res = icp_align(source, cloud, params);
      CHECK(res.rms_after <= res.rms_before + 1e-12);
      CHECK(res.rms_after <= prev + 1e-15);
      CHECK(orthonormality_error(res.rotation) < 1e-9);
      CHECK(res.rotation.determinant() > 0);
      CHECK(res.matched_fraction >= 0);
      CHECK(res.matched_fraction <= 1);
      prev = res.rms_after;
    }
  }
}

TEST_CASE("icp without overlap fails") {
  const FusedCloud cloud = corner_cloud(0.05);
  const auto far = transformed(cloud, Mat3::Identity(), Vec3(10, 0, 0));
  CHECK_THROWS_AS(icp_align(far, cloud, {}), RegistrationError);
  CHECK_THROWS_AS(icp_align({}, cloud, {}), RegistrationError);
}

TEST_CASE("icp parameter checks") {
  IcpParams p;
  CHECK(p.max_iterations == 10);
  CHECK(p.variant == IcpVariant::point_to_plane);
  p.max_iterations = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = IcpParams{};
  p.max_correspondence_dist = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("refine_all_poses leaves exact poses in place") {
  // Fronto-parallel views of one plane shifted by whole pixels: every sample of
  // every view coincides with a cloud point, so there is nothing to correct.
  std::vector<DepthMap> maps;
  for (int i = 0; i < 3; ++i) {
    maps.push_back(test::constant_map(30, 20, 100.0, 2.0, Pose::from_center(Mat3::Identity(), Vec3(0.04 * i, 0, 0))));
    maps.back().view = static_cast<ViewId>(i);
  }
  FusedCloud cloud;
  for (const auto& dm : maps) fuse_map(cloud, dm, {}, {});
  const RefineOutcome out = refine_all_poses(maps, cloud, {});
  for (std::size_t i = 0; i < maps.size(); ++i) {
    CHECK_FALSE(out.failed[i]);
    CHECK((out.poses[i].center() - maps[i].pose.center()).norm() < 1e-6);
    CHECK(rotation_angle_between(out.poses[i].rotation, maps[i].pose.rotation) < 1e-4);
  }
}

TEST_CASE("refine_all_poses on exact synthetic corner views barely moves") {
  const auto maps = render_views(4, small_camera());
  FusedCloud cloud;
  for (const auto& dm : maps) fuse_map(cloud, dm, {}, {});
  IcpParams params;
  params.max_correspondence_dist = 0.02;
  const RefineOutcome out = refine_all_poses(maps, cloud, params);
  for (std::size_t i = 0; i < maps.size(); ++i) {
    CHECK_FALSE(out.failed[i]);
    CHECK((out.poses[i].center() - maps[i].pose.center()).norm() < 1e-3);
    CHECK(rotation_angle_between(out.poses[i].rotation, maps[i].pose.rotation) < 1e-3);
  }
}

TEST_CASE("a map perturbed by 2 cm moves at least half way back") {
  auto maps = render_views(4, small_camera());
  const Pose truth = maps[2].pose;
  for (const Vec3 dir : {Vec3(1, 0, 0), Vec3(0, 1, -1), Vec3(1, -1, 1)}) {
    maps[2].pose = shift_center(truth, dir.normalized() * 0.02);
    FusedCloud cloud;
    for (const auto& dm : maps) fuse_map(cloud, dm, {}, {});
    postfilter(cloud);
    IcpParams params;
    params.max_correspondence_dist = 0.05;
    const RefineOutcome out = refine_all_poses(maps, cloud, params);
    REQUIRE_FALSE(out.failed[2]);
    const double before = (maps[2].pose.center() - truth.center()).norm();
    const double after = (out.poses[2].center() - truth.center()).norm();
    CAPTURE(after);
    CHECK(after <= 0.5 * before);
  }
}

TEST_CASE("a map without overlap is flagged and keeps its pose") {
  auto maps = render_views(3, small_camera());
  FusedCloud cloud;
  fuse_map(cloud, maps[0], {}, {});
  fuse_map(cloud, maps[1], {}, {});
  // Move the third map's geometry far away from anything in the cloud.
  maps[2].pose = shift_center(maps[2].pose, Vec3(20, 0, 0));
  const RefineOutcome out = refine_all_poses(maps, cloud, {});
  CHECK_FALSE(out.failed[0]);
  CHECK(out.failed[2]);
  CHECK(out.poses[2].rotation == maps[2].pose.rotation);
  CHECK(out.poses[2].translation == maps[2].pose.translation);
}

TEST_CASE("frozen maps and own-point exclusion") {
  auto maps = render_views(3, small_camera());
  maps[1].pose = shift_center(maps[1].pose, Vec3(0.01, 0, 0));
  FusedCloud cloud;
  for (const auto& dm : maps) fuse_map(cloud, dm, {}, {});
  IcpParams params;
  params.max_correspondence_dist = 0.05;
  const RefineOutcome frozen = refine_all_poses(maps, cloud, params, {false, true, false});
  CHECK(frozen.poses[1].translation == maps[1].pose.translation);
  CHECK(frozen.results[1].iterations_run == 0);

  const RefineOutcome excl = refine_all_poses(maps, cloud, params, {}, true);
  const Pose truth = render_views(3, small_camera())[1].pose;
  CHECK((excl.poses[1].center() - truth.center()).norm() < 0.005);
}
