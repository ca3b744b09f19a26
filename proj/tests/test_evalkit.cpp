#include <cmath>
#include <random>

#include "doctest.h"
#include "dmfusion/evalkit.hpp"
#include "dmfusion/synth.hpp"
#include "test_util.hpp"

using namespace dmfusion;

namespace {

GroundTruthPlanes floor_only() {
  GroundTruthPlanes gt;
  GroundTruthPlane p;
  p.normal = Vec3::UnitZ();
  p.offset = 0;
  gt.planes.push_back(p);
  return gt;
}

std::vector<Vec3> transform_all(const std::vector<Vec3>& pts, const Mat3& r, const Vec3& t) {
  std::vector<Vec3> out;
  for (const auto& p : pts) out.push_back(r * p + t);
  return out;
}

GroundTruthPlanes transform_gt(const GroundTruthPlanes& gt, const Mat3& r, const Vec3& t) {
  GroundTruthPlanes out;
  for (const auto& p : gt.planes) {
    if (p.extent) {
      PlanePatch e = *p.extent;
      e.origin = r * e.origin + t;
      e.axis_u = r * e.axis_u;
      e.axis_v = r * e.axis_v;
      out.planes.push_back(GroundTruthPlane::from_patch(e));
    } else {
      GroundTruthPlane q;
      q.normal = r * p.normal;
      q.offset = p.offset + q.normal.dot(t);
      out.planes.push_back(q);
    }
  }
  return out;
}

VoxelGrid grid_of(std::vector<VoxelKey> keys) {
  VoxelGrid g;
  g.voxel_size = 0.01;
  std::sort(keys.begin(), keys.end());
  g.occupied = keys;
  return g;
}

}  // namespace

TEST_CASE("curve on points lying on the plane") {
  const std::vector<Vec3> pts{{0, 0, 0}, {1, 2, 0}, {-3, 5, 0}};
  const std::vector<double> taus{0.0, 0.001, 1.0};
  for (const auto& [tau, frac] : cumulative_error_curve(pts, floor_only(), taus)) CHECK(frac == 1.0);
}

TEST_CASE("curve counts points at or below each threshold") {
  const std::vector<Vec3> pts{{0, 0, 0.0}, {0, 0, 0.1}, {0, 0, 0.2}, {0, 0, 0.3}};
  const std::vector<double> taus{0.15, 0.1, 0.3, 0.0};
  const auto curve = cumulative_error_curve(pts, floor_only(), taus);
  CHECK(curve[0].second == 0.5);
  CHECK(curve[1].second == 0.5);
  CHECK(curve[2].second == 1.0);
  CHECK(curve[3].second == 0.25);
  CHECK_THROWS_AS(cumulative_error_curve({}, floor_only(), taus), InputError);
}

TEST_CASE("curve is monotone and reaches one at the largest error") {
  std::mt19937_64 rng(61);
  std::normal_distribution<double> n(0, 0.01);
  std::vector<Vec3> pts;
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    pts.push_back({n(rng), n(rng), n(rng)});
    worst = std::max(worst, std::abs(pts.back().z()));
  }
  std::vector<double> taus;
  for (int i = 0; i <= 40; ++i) taus.push_back(i * 0.001);
  taus.push_back(worst);
  const auto curve = cumulative_error_curve(pts, floor_only(), taus);
  for (std::size_t i = 1; i + 1 < curve.size(); ++i) CHECK(curve[i].second >= curve[i - 1].second);
  CHECK(curve.back().second == 1.0);
}

TEST_CASE("Gaussian noise on the corner gives 0.683 at one sigma") {
  // Monte-Carlo: 100k samples on the three corner faces, displaced along the
  // face normal by N(0, 5 mm). The exact value is erf(1/sqrt 2).
  const GroundTruthPlanes gt = ground_truth(SceneSpec::ccorner());
  std::mt19937_64 rng(67);
  std::uniform_real_distribution<double> u(0.1, 2.9);
  std::normal_distribution<double> n(0, 0.005);
  std::vector<Vec3> pts;
  for (int i = 0; i < 100000; ++i) {
    const double a = u(rng), b = u(rng), d = n(rng);
    switch (i % 3) {
      case 0: pts.push_back({a, b, d}); break;
      case 1: pts.push_back({d, a, b}); break;
      default: pts.push_back({a, d, b}); break;
    }
  }
  const std::vector<double> taus{0.005};
  const double frac = cumulative_error_curve(pts, gt, taus)[0].second;
  CHECK(std::abs(frac - std::erf(1 / std::sqrt(2.0))) < 0.02);
  CHECK(frac == doctest::Approx(0.683).epsilon(0.03));
}

TEST_CASE("plane extents are honored") {
  GroundTruthPlanes gt;
  PlanePatch patch;
  patch.extent_u = patch.extent_v = 1;
  gt.planes.push_back(GroundTruthPlane::from_patch(patch));
  CHECK(gt.distance(Vec3(0.5, 0.5, 0.2)) == doctest::Approx(0.2));
  CHECK(gt.distance(Vec3(2.0, 0.5, 0.0)) == doctest::Approx(1.0));
  CHECK(gt.distance(Vec3(2.0, 2.0, 1.0)) == doctest::Approx(std::sqrt(3.0)));
}

TEST_CASE("voxelize examples") {
  const std::vector<Vec3> one{{0.3, -0.2, 1.7}};
  CHECK(voxelize(one, 0.005, Vec3::Zero()).occupied.size() == 1);
  const std::vector<Vec3> close{{0.0123, 0.0234, 0.0311}, {0.0124, 0.0234, 0.0311}};
  CHECK(voxelize(close, 0.005, Vec3::Zero()).occupied.size() == 1);
  const std::vector<Vec3> neg{{-0.001, 0, 0}};
  CHECK(voxelize(neg, 0.01, Vec3::Zero()).occupied[0] == VoxelKey{-1, 0, 0});
  CHECK_THROWS_AS(voxelize(one, 0.0, Vec3::Zero()), InputError);
}

TEST_CASE("a sampled unit square covers about 50 x 50 voxels of 20 mm") {
  std::mt19937_64 rng(71);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<Vec3> unit;
  for (int i = 0; i < 200000; ++i) unit.push_back(Vec3(u(rng), u(rng), 0.0033));
  // On the lattice the square tiles exactly; shifted, each axis gains one voxel.
  CHECK(voxelize(unit, 0.02, Vec3::Zero()).occupied.size() == 2500);
  for (const Vec3 offset : {Vec3(0.0137, 0, 0), Vec3(0.0137, 0.0071, 0)}) {
    std::vector<Vec3> pts;
    for (const auto& p : unit) pts.push_back(p + offset);
    const auto n = voxelize(pts, 0.02, Vec3::Zero()).occupied.size();
    const std::size_t expect = (offset.x() != 0 ? 51 : 50) * (offset.y() != 0 ? 51 : 50);
    CHECK(n == expect);
    CHECK(std::abs(static_cast<double>(n) - 2500.0) / 2500.0 <= 0.0404);
  }
}

TEST_CASE("duplicated points leave the grid unchanged") {
  std::mt19937_64 rng(73);
  std::vector<Vec3> pts;
  for (int i = 0; i < 500; ++i) pts.push_back(test::random_vec(rng, 0.3));
  auto twice = pts;
  twice.insert(twice.end(), pts.begin(), pts.end());
  CHECK(voxelize(pts, 0.02, Vec3::Zero()).occupied == voxelize(twice, 0.02, Vec3::Zero()).occupied);
}

TEST_CASE("jaccard examples") {
  std::vector<VoxelKey> a, b;
  for (int i = 0; i < 100; ++i) a.push_back({i, 0, 0});
  for (int i = 50; i < 150; ++i) b.push_back({i, 0, 0});
  CHECK(jaccard_index(grid_of(a), grid_of(a)) == 1.0);
  CHECK(jaccard_index(grid_of(a), grid_of(b)) == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(jaccard_index(grid_of(b), grid_of(a)) == jaccard_index(grid_of(a), grid_of(b)));
  std::vector<VoxelKey> c;
  for (int i = 0; i < 100; ++i) c.push_back({i, 1, 0});
  CHECK(jaccard_index(grid_of(a), grid_of(c)) == 0.0);
  auto a2 = a;
  a2.pop_back();
  CHECK(jaccard_index(grid_of(a), grid_of(a2)) < 1.0);

  VoxelGrid shifted = grid_of(a);
  shifted.origin = Vec3(0.001, 0, 0);
  CHECK_THROWS_AS(jaccard_index(grid_of(a), shifted), InputError);
  VoxelGrid coarse = grid_of(a);
  coarse.voxel_size = 0.02;
  CHECK_THROWS_AS(jaccard_index(grid_of(a), coarse), InputError);
}

TEST_CASE("compression ratio") {
  CHECK(compression_ratio(100, 200) == 0.5);
  CHECK(compression_ratio(300, 300) == 1.0);
  CHECK_THROWS_AS(compression_ratio(10, 0), InputError);
}

TEST_CASE("default voxel sizes") {
  CHECK(kDefaultVoxelSizes[0] == 0.005);
  CHECK(kDefaultVoxelSizes[1] == 0.020);
  CHECK(kDefaultVoxelSizes[2] == 0.045);
  CHECK(kDefaultVoxelSizes[3] == 0.085);
  const EvaluationParams p;
  REQUIRE(p.voxel_sizes.size() == 4);
  CHECK(p.voxel_sizes[2] == 0.045);
  CHECK(p.gt_spacing == 0.005);
}

TEST_CASE("metrics under a global rigid motion") {
  const GroundTruthPlanes gt = ground_truth(SceneSpec::ccorner());
  std::mt19937_64 rng(79);
  std::uniform_real_distribution<double> u(0.05, 2.95);
  std::normal_distribution<double> n(0, 0.01);
  std::vector<Vec3> pts;
  for (int i = 0; i < 30000; ++i) {
    const double a = u(rng), b = u(rng), d = n(rng);
    pts.push_back(i % 3 == 0 ? Vec3(a, b, d) : i % 3 == 1 ? Vec3(d, a, b) : Vec3(a, d, b));
  }
  const Mat3 r = test::random_rotation(rng);
  const Vec3 t = test::random_vec(rng, 2.0);
  const auto pts2 = transform_all(pts, r, t);
  const auto gt2 = transform_gt(gt, r, t);

  CHECK(std::abs(rms_plane_distance(pts, gt) - rms_plane_distance(pts2, gt2)) < 1e-12);
  std::vector<double> taus;
  for (int mm = 0; mm <= 30; ++mm) taus.push_back(mm * 1e-3);
  const auto c1 = cumulative_error_curve(pts, gt, taus), c2 = cumulative_error_curve(pts2, gt2, taus);
  for (std::size_t i = 0; i < c1.size(); ++i) CHECK(std::abs(c1[i].second - c2[i].second) < 1e-4);

  // The voxel lattice hangs off the ground-truth bounding box, so it follows a
  // translation. A rotation changes its phase against the planes.
    const Vec3 shift(0.0123, -1.3377, 0.5081);
  const auto pts3 = transform_all(pts, Mat3::Identity(), shift);
  const auto gt3 = transform_gt(gt, Mat3::Identity(), shift);
  EvaluationParams params;
  params.gt_spacing = 0.01;
  params.voxel_sizes = {0.005, 0.02, 0.045, 0.085};
  const Evaluation e1 = evaluate(pts, gt, params), e3 = evaluate(pts3, gt3, params);
  CHECK(e1.compression == e3.compression);
  CHECK(std::abs(e1.rms - e3.rms) < 1e-12);
  for (std::size_t i = 0; i < e1.jaccard.size(); ++i) {
    CAPTURE(e1.jaccard[i].first);
    CHECK(std::abs(e1.jaccard[i].second - e3.jaccard[i].second) <= 0.02 * e1.jaccard[i].second);
  }
}

TEST_CASE("evaluate ties the pieces together") {
  const GroundTruthPlanes gt = ground_truth(SceneSpec::ccorner());
  const auto samples = sample_ground_truth(gt, 0.05);
  CHECK(samples.size() == 3 * 60 * 60);
  EvaluationParams params;
  params.gt_spacing = 0.05;
  const Evaluation ev = evaluate(samples, gt, params);
  CHECK(ev.rms < 1e-12);
  CHECK(ev.compression == 1.0);
  CHECK(ev.curve.size() == 51);
  CHECK(ev.curve.front().second == 1.0);
  for (const auto& [size, j] : ev.jaccard) CHECK(j == 1.0);
  CHECK_THROWS_AS(sample_ground_truth(floor_only(), 0.01), InputError);
}
