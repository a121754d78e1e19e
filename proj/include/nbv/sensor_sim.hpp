#pragma once

#include "nbv/geometry.hpp"
#include "nbv/mesh.hpp"

#include <cstdint>
#include <vector>

namespace nbv {

/// Pinhole depth sensor with range noise, pixel dropout and grazing-angle
/// hole patches.
struct SensorModel {
  int image_width = 160;
  int image_height = 120;
  double horizontal_fov = 65.0 * 3.14159265358979323846 / 180.0;
  double depth_noise_sigma = 0.001;
  double dropout_probability = 0.05;
  double max_range = 2.0;
  /// Surfaces seen at more than this incidence angle may lose patches.
  double grazing_angle = 75.0 * 3.14159265358979323846 / 180.0;
  int min_patches = 2;
  int max_patches = 6;
  /// Noise is truncated at this many sigmas.
  double noise_clip_sigmas = 4.0;

  void validate() const;
  double focal_length_px() const;
};

/// Per-pixel first-hit record of a depth image, row-major.
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<double> range;       // ray distance of the first hit; +inf when none
  std::vector<double> cos_incidence;  // |n . d| at the hit
};

/// Noise-free depth image in the camera of `camera_to_world`.
/// The OpenMP and serial kernels produce bit-identical output.
DepthImage raycast_depth(const TriangleMesh& mesh, const RigidTransform& camera_to_world,
                         const SensorModel& sensor);
DepthImage raycast_depth_serial(const TriangleMesh& mesh, const RigidTransform& camera_to_world,
                                const SensorModel& sensor);

/// Unit ray direction of pixel (col, row) in the camera frame.
Eigen::Vector3d pixel_ray(const SensorModel& sensor, int col, int row);

/// World-frame point cloud of one simulated capture; deterministic in seed.
PointCloud capture_view(const TriangleMesh& mesh, const ViewPose& pose, const SensorModel& sensor,
                        double orbit_radius, std::uint64_t seed);

/// Applies range noise, dropout and hole patches to a depth image and
/// back-projects the survivors to world coordinates.
PointCloud depth_to_cloud(const DepthImage& depth, const RigidTransform& camera_to_world,
                          const SensorModel& sensor, std::uint64_t seed);

}  // namespace nbv
