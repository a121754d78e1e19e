#include "nbv/geometry.hpp"

#include "nbv/error.hpp"
#include "nbv/spatial_grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <unordered_set>

namespace nbv {

void ActionSpace::validate() const {
  if (yaw_buckets < 1 || pitch_buckets < 1) {
    throw InvalidParameter("action space needs at least one yaw and one pitch bucket");
  }
  if (yaw_buckets > kYawTickRange || pitch_buckets > kPitchTickRange) {
    throw InvalidParameter("more buckets than motor positions");
  }
}

ViewPose ViewPose::from_ticks(int yaw_ticks, int pitch_ticks, const ActionSpace& space) {
  if (yaw_ticks < 0 || yaw_ticks >= kYawTickRange || pitch_ticks < 0 ||
      pitch_ticks >= kPitchTickRange) {
    throw IndexOutOfRange("pose ticks out of range: yaw=" + std::to_string(yaw_ticks) +
                          " pitch=" + std::to_string(pitch_ticks));
  }
  ViewPose pose;
  pose.yaw_ticks = yaw_ticks;
  pose.pitch_ticks = pitch_ticks;
  pose.yaw_bucket = static_cast<int>(static_cast<long long>(yaw_ticks) * space.yaw_buckets /
                                     kYawTickRange);
  pose.pitch_bucket = static_cast<int>(static_cast<long long>(pitch_ticks) *
                                       space.pitch_buckets / kPitchTickRange);
  return pose;
}

ViewPose ViewPose::bucket_center(int yaw_bucket, int pitch_bucket, const ActionSpace& space) {
  if (yaw_bucket < 0 || yaw_bucket >= space.yaw_buckets || pitch_bucket < 0 ||
      pitch_bucket >= space.pitch_buckets) {
    throw IndexOutOfRange("bucket out of range: yaw=" + std::to_string(yaw_bucket) +
                          " pitch=" + std::to_string(pitch_bucket));
  }
  // floor((b + 1/2) * range / count), in integer arithmetic
  const auto center = [](int b, int count, int range) {
    return static_cast<int>((static_cast<long long>(2 * b + 1) * range) / (2LL * count));
  };
  return from_ticks(center(yaw_bucket, space.yaw_buckets, kYawTickRange),
                    center(pitch_bucket, space.pitch_buckets, kPitchTickRange), space);
}

double ViewPose::yaw_radians() const noexcept {
  return 2.0 * std::numbers::pi * yaw_ticks / kYawTickRange;
}

double ViewPose::pitch_radians() const noexcept {
  return std::numbers::pi * pitch_ticks / kPitchTickRange - std::numbers::pi / 2.0;
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

RigidTransform RigidTransform::operator*(const RigidTransform& other) const {
  RigidTransform out;
  out.rotation = rotation * other.rotation;
  out.translation = rotation * other.translation + translation;
  return out;
}

bool RigidTransform::is_proper(double tol) const {
  const Eigen::Matrix3d gram = rotation.transpose() * rotation;
  return (gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(rotation.determinant() - 1.0) <= tol;
}

double RigidTransform::rotation_angle() const {
  const double c = std::clamp((rotation.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

Eigen::Vector3d view_direction(const ViewPose& pose) {
  const double yaw = pose.yaw_radians();
  const double pitch = pose.pitch_radians();
  return {-std::cos(pitch) * std::cos(yaw), -std::cos(pitch) * std::sin(yaw), std::sin(pitch)};
}

RigidTransform pose_to_transform(const ViewPose& pose, double orbit_radius) {
  if (!(orbit_radius > 0.0)) {
    throw InvalidParameter("orbit radius must be positive");
  }
  const double yaw = pose.yaw_radians();
  const Eigen::Vector3d position = orbit_radius * view_direction(pose);
  const Eigen::Vector3d forward = -position / orbit_radius;
  const Eigen::Vector3d right(std::sin(yaw), -std::cos(yaw), 0.0);
  const Eigen::Vector3d down = forward.cross(right);

  RigidTransform t;
  t.rotation.col(0) = right;
  t.rotation.col(1) = down;
  t.rotation.col(2) = forward;
  t.translation = position;
  return t;
}

double angular_difference_deg(const ViewPose& a, const ViewPose& b) {
  const double c = std::clamp(view_direction(a).dot(view_direction(b)), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t) {
  PointCloud out;
  out.source_view = cloud.source_view;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(t.apply(p));
  return out;
}

Eigen::Vector3i voxel_cell(const Point3& p, double voxel) {
  return {static_cast<int>(std::floor(p.x() / voxel)), static_cast<int>(std::floor(p.y() / voxel)),
          static_cast<int>(std::floor(p.z() / voxel))};
}

PointCloud union_dedup(const PointCloud& a, const PointCloud& b, double voxel) {
  if (!(voxel > 0.0)) throw InvalidParameter("voxel size must be positive");
  PointCloud out;
  out.points.reserve(a.size() + b.size());
  std::unordered_set<std::uint64_t> occupied;
  occupied.reserve(2 * (a.size() + b.size()));
  for (const auto* cloud : {&a, &b}) {
    for (const auto& p : cloud->points) {
      if (occupied.insert(pack_cell(voxel_cell(p, voxel))).second) out.points.push_back(p);
    }
  }
  if (a.source_view == b.source_view) out.source_view = a.source_view;
  return out;
}

PointCloud voxel_dedup(const PointCloud& cloud, double voxel) {
  PointCloud out = union_dedup(cloud, PointCloud{}, voxel);
  out.source_view = cloud.source_view;
  return out;
}

}  // namespace nbv
