#include "nbv/error.hpp"
#include "nbv/geometry.hpp"
#include "nbv/rng.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <tuple>

using namespace nbv;

namespace {

ViewPose pose_ticks(int yaw, int pitch) { return ViewPose::from_ticks(yaw, pitch, ActionSpace{}); }

// Reference rotation about +Z, written out by hand.
Eigen::Matrix3d rot_z(double a) {
  Eigen::Matrix3d m;
  m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return m;
}

std::set<std::tuple<int, int, int>> occupancy(const PointCloud& c, double voxel) {
  std::set<std::tuple<int, int, int>> s;
  for (const auto& p : c.points) {
    const auto v = voxel_cell(p, voxel);
    s.insert({v.x(), v.y(), v.z()});
  }
  return s;
}

}  // namespace

TEST_CASE("bucket of a pose follows floor(ticks * count / range)") {
  const ActionSpace space;
  for (int yaw = 0; yaw < kYawTickRange; yaw += 37) {
    for (int pitch = 0; pitch < kPitchTickRange; pitch += 41) {
      const auto p = ViewPose::from_ticks(yaw, pitch, space);
      CHECK(p.yaw_bucket == yaw * 20 / 4096);
      CHECK(p.pitch_bucket == pitch * 10 / 2048);
    }
  }
  CHECK_THROWS_AS(ViewPose::from_ticks(4096, 0, space), IndexOutOfRange);
  CHECK_THROWS_AS(ViewPose::from_ticks(0, -1, space), IndexOutOfRange);
  CHECK_THROWS_AS(ViewPose::bucket_center(20, 0, space), IndexOutOfRange);
}

TEST_CASE("bucket centers fall in their own bucket") {
  const ActionSpace space;
  for (int y = 0; y < space.yaw_buckets; ++y)
    for (int p = 0; p < space.pitch_buckets; ++p) {
      const auto pose = ViewPose::bucket_center(y, p, space);
      CHECK(pose.yaw_bucket == y);
      CHECK(pose.pitch_bucket == p);
    }
}

TEST_CASE("camera at yaw 0, level pitch") {
  const auto t = pose_to_transform(pose_ticks(0, 1024), 0.5);
  CHECK((t.translation - Eigen::Vector3d(-0.5, 0, 0)).norm() < 1e-12);
  CHECK((t.rotation.col(2) - Eigen::Vector3d(1, 0, 0)).norm() < 1e-12);
  CHECK(t.is_proper());
}

TEST_CASE("yaw quarter turn rotates the camera about +Z") {
  const auto base = pose_to_transform(pose_ticks(0, 1024), 0.5);
  const auto t = pose_to_transform(pose_ticks(1024, 1024), 0.5);
  const Eigen::Vector3d expected = rot_z(std::numbers::pi / 2) * base.translation;
  CHECK((t.translation - expected).norm() < 1e-12);
  CHECK((t.translation - Eigen::Vector3d(0, -0.5, 0)).norm() < 1e-12);
  CHECK((t.rotation - rot_z(std::numbers::pi / 2) * base.rotation).norm() < 1e-12);
}

TEST_CASE("every pose sits on the orbit and looks at the origin") {
  CounterRng rng(11);
  for (int i = 0; i < 500; ++i) {
    const auto pose = pose_ticks(static_cast<int>(rng.below(4096)), static_cast<int>(rng.below(2048)));
    const double radius = rng.uniform(0.05, 2.0);
    const auto t = pose_to_transform(pose, radius);
    CHECK(std::abs(t.translation.norm() - radius) < 1e-9);
    CHECK(t.is_proper());
    CHECK((t.rotation.col(2) + t.translation / radius).norm() < 1e-9);
    const auto id = t * t.inverse();
    CHECK((id.rotation - Eigen::Matrix3d::Identity()).norm() < 1e-9);
    CHECK(id.translation.norm() < 1e-9);
  }
  CHECK_THROWS_AS(pose_to_transform(pose_ticks(0, 0), 0.0), InvalidParameter);
}

TEST_CASE("positive pitch raises the camera") {
  const auto up = pose_to_transform(pose_ticks(0, 1536), 1.0);
  CHECK(up.translation.z() > 0.0);
  CHECK(std::abs(up.translation.z() - std::sin(std::numbers::pi / 4)) < 1e-12);
}

TEST_CASE("angular difference") {
  CHECK(angular_difference_deg(pose_ticks(0, 1024), pose_ticks(0, 1024)) == doctest::Approx(0.0));
  CHECK(angular_difference_deg(pose_ticks(0, 1024), pose_ticks(2048, 1024)) == doctest::Approx(180.0));
  CHECK(angular_difference_deg(pose_ticks(0, 1024), pose_ticks(1024, 1024)) == doctest::Approx(90.0));
  CHECK(angular_difference_deg(pose_ticks(0, 1024), pose_ticks(0, 1536)) == doctest::Approx(45.0));
}

TEST_CASE("apply_transform") {
  PointCloud c = oracle::cloud_of({{1, 0, 0}});
  c.source_view = 4;
  RigidTransform quarter;
  quarter.rotation = rot_z(std::numbers::pi / 2);
  const auto out = apply_transform(c, quarter);
  CHECK((out.points[0] - Eigen::Vector3d(0, 1, 0)).norm() < 1e-12);
  CHECK(out.source_view == 4);

  CounterRng rng(3);
  const PointCloud cloud = oracle::cloud_of(oracle::random_points(rng, 200, 1.0));
  CHECK(apply_transform(cloud, RigidTransform::identity()).points == cloud.points);

  const auto t = pose_to_transform(pose_ticks(777, 300), 0.7);
  const auto moved = apply_transform(cloud, t);
  const auto back = apply_transform(moved, t.inverse());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CHECK((back.points[i] - cloud.points[i]).cwiseAbs().maxCoeff() < 1e-9);
    for (std::size_t j = i + 1; j < cloud.size(); j += 17) {
      const double d0 = (cloud.points[i] - cloud.points[j]).norm();
      const double d1 = (moved.points[i] - moved.points[j]).norm();
      CHECK(std::abs(d0 - d1) <= 1e-9 * d0);
    }
  }
}

TEST_CASE("union_dedup keeps the first point per voxel") {
  const auto a = oracle::cloud_of({{0, 0, 0}});
  CHECK(union_dedup(a, PointCloud{}, 0.001).points == a.points);
  const auto merged = union_dedup(a, oracle::cloud_of({{0.0001, 0, 0}}), 0.001);
  REQUIRE(merged.size() == 1);
  CHECK(merged.points[0] == Eigen::Vector3d(0, 0, 0));
  CHECK_THROWS_AS(union_dedup(a, a, 0.0), InvalidParameter);
}

TEST_CASE("disjoint clouds keep every point") {
  CounterRng rng(5);
  PointCloud a, b;
  for (int i = 0; i < 100; ++i) {
    a.points.emplace_back(0.01 * i + 0.0005, 0.0005, 0.0005);
    b.points.emplace_back(0.01 * i + 0.0005, 0.5005, 0.0005);
  }
  CHECK(union_dedup(a, b, 0.001).size() == 200);
}

TEST_CASE("union_dedup properties on random clouds") {
  CounterRng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = oracle::cloud_of(oracle::random_points(rng, 300, 0.02));
    const auto b = oracle::cloud_of(oracle::random_points(rng, 300, 0.02));
    const double v = 0.002;
    const auto ab = union_dedup(a, b, v);
    CHECK(ab.size() <= a.size() + b.size());
    CHECK(occupancy(ab, v).size() == ab.size());
    CHECK(union_dedup(ab, PointCloud{}, v).points == ab.points);
    CHECK(occupancy(ab, v) == occupancy(union_dedup(b, a, v), v));
    CHECK(occupancy(union_dedup(a, a, v), v) == occupancy(voxel_dedup(a, v), v));
    CHECK(union_dedup(a, a, v).points == voxel_dedup(a, v).points);
  }
}
