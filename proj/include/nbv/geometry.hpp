#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <optional>
#include <vector>

namespace nbv {

using Point3 = Eigen::Vector3d;

/// Unordered set of 3D points in meters. May be empty.
struct PointCloud {
  std::vector<Point3> points;
  std::optional<int> source_view;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
};

/// Raw motor resolution of the two pose axes.
inline constexpr int kYawTickRange = 4096;
inline constexpr int kPitchTickRange = 2048;

/// Discretized yaw x pitch grid of sensor positions.
struct ActionSpace {
  int yaw_buckets = 20;
  int pitch_buckets = 10;

  int action_count() const noexcept { return yaw_buckets * pitch_buckets; }
  void validate() const;
};

/// Sensor position on the view sphere, as raw motor ticks plus the bucket
/// they fall in. bucket = floor(ticks * bucket_count / tick_range).
struct ViewPose {
  int yaw_bucket = 0;
  int pitch_bucket = 0;
  int yaw_ticks = 0;
  int pitch_ticks = 0;

  static ViewPose from_ticks(int yaw_ticks, int pitch_ticks, const ActionSpace& space);
  /// Pose at the (integer-tick) center of a bucket cell.
  static ViewPose bucket_center(int yaw_bucket, int pitch_bucket, const ActionSpace& space);

  /// 2*pi*yaw_ticks/4096
  double yaw_radians() const noexcept;
  /// pi*pitch_ticks/2048 - pi/2, in [-pi/2, pi/2)
  double pitch_radians() const noexcept;

  bool operator==(const ViewPose&) const = default;
};

/// Proper rigid motion p' = R p + t.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }

  Point3 apply(const Point3& p) const { return rotation * p + translation; }
  RigidTransform inverse() const;
  /// (this * other).apply(p) == this->apply(other.apply(p))
  RigidTransform operator*(const RigidTransform& other) const;

  /// Orthonormal with det +1 within tol.
  bool is_proper(double tol = 1e-9) const;
  /// Angle of the rotation part, radians.
  double rotation_angle() const;
};

/// Camera-to-world transform for a sensor on a sphere of radius orbit_radius
/// around the origin, looking at the origin.
///
/// Camera frame: +Z forward, +X right, +Y down. Yaw turns about world +Z;
/// positive pitch raises the camera above the XY plane. At yaw = pitch = 0
/// the camera sits at (-orbit_radius, 0, 0) looking along +X.
RigidTransform pose_to_transform(const ViewPose& pose, double orbit_radius);

/// Unit vector from the origin to the camera center of the pose.
Eigen::Vector3d view_direction(const ViewPose& pose);

/// Great-circle angle between the camera positions of two poses, degrees.
double angular_difference_deg(const ViewPose& a, const ViewPose& b);

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t);

/// Concatenation of a and b keeping the first point seen in each voxel cell,
/// iterating a before b.
PointCloud union_dedup(const PointCloud& a, const PointCloud& b, double voxel);

/// One point per voxel cell, first point wins.
PointCloud voxel_dedup(const PointCloud& cloud, double voxel);

/// Integer cell coordinates of a point for a grid of the given cell size.
Eigen::Vector3i voxel_cell(const Point3& p, double voxel);

}  // namespace nbv
