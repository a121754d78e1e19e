#include "nbv/sensor_sim.hpp"

#include "nbv/error.hpp"
#include "nbv/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace nbv {

void SensorModel::validate() const {
  if (image_width < 1 || image_height < 1) throw InvalidParameter("sensor image must be non-empty");
  if (!(horizontal_fov > 0.0 && horizontal_fov < std::numbers::pi)) {
    throw InvalidParameter("horizontal fov must be in (0, pi)");
  }
  if (!(depth_noise_sigma >= 0.0)) throw InvalidParameter("noise sigma must be >= 0");
  if (!(dropout_probability >= 0.0 && dropout_probability <= 1.0)) {
    throw InvalidParameter("dropout probability must be in [0, 1]");
  }
  if (!(max_range > 0.0)) throw InvalidParameter("max range must be positive");
  if (min_patches < 0 || max_patches < min_patches) throw InvalidParameter("bad patch count range");
}

double SensorModel::focal_length_px() const {
  return 0.5 * image_width / std::tan(0.5 * horizontal_fov);
}

Eigen::Vector3d pixel_ray(const SensorModel& sensor, int col, int row) {
  const double f = sensor.focal_length_px();
  return Eigen::Vector3d((col + 0.5 - 0.5 * sensor.image_width) / f,
                         (row + 0.5 - 0.5 * sensor.image_height) / f, 1.0)
      .normalized();
}

namespace {

DepthImage empty_image(const SensorModel& sensor) {
  DepthImage img;
  img.width = sensor.image_width;
  img.height = sensor.image_height;
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  img.range.assign(n, std::numeric_limits<double>::infinity());
  img.cos_incidence.assign(n, 0.0);
  return img;
}

void cast_row(const TriangleMesh& mesh, const Eigen::AlignedBox3d& bounds,
              const RigidTransform& camera_to_world, const SensorModel& sensor, int row,
              DepthImage& img) {
  for (int col = 0; col < img.width; ++col) {
    const Eigen::Vector3d dir = camera_to_world.rotation * pixel_ray(sensor, col, row);
    const auto hit = intersect_ray(mesh, bounds, camera_to_world.translation, dir);
    if (!hit) continue;
    const std::size_t k = static_cast<std::size_t>(row) * img.width + col;
    img.range[k] = hit->distance;
    img.cos_incidence[k] = std::abs(triangle_normal(mesh, hit->triangle).dot(dir));
  }
}

}  // namespace

DepthImage raycast_depth_serial(const TriangleMesh& mesh, const RigidTransform& camera_to_world,
                                const SensorModel& sensor) {
  sensor.validate();
  DepthImage img = empty_image(sensor);
  const auto bounds = mesh.bounds();
  for (int row = 0; row < img.height; ++row) cast_row(mesh, bounds, camera_to_world, sensor, row, img);
  return img;
}

DepthImage raycast_depth(const TriangleMesh& mesh, const RigidTransform& camera_to_world,
                         const SensorModel& sensor) {
  sensor.validate();
  DepthImage img = empty_image(sensor);
  const auto bounds = mesh.bounds();
  // rows write disjoint slices of the image
#pragma omp parallel for schedule(dynamic, 4)
  for (int row = 0; row < img.height; ++row) cast_row(mesh, bounds, camera_to_world, sensor, row, img);
  return img;
}

PointCloud depth_to_cloud(const DepthImage& depth, const RigidTransform& camera_to_world,
                          const SensorModel& sensor, std::uint64_t seed) {
  const std::size_t n = depth.range.size();
  const double cos_grazing = std::cos(sensor.grazing_angle);

  // Hole patches: ellipses in image space centered on grazing-angle hits.
  std::vector<std::uint32_t> grazing;
  for (std::size_t k = 0; k < n; ++k) {
    if (depth.range[k] <= sensor.max_range && depth.cos_incidence[k] < cos_grazing) {
      grazing.push_back(static_cast<std::uint32_t>(k));
    }
  }
  struct Patch {
    double cx, cy, a, b, cos_t, sin_t;
  };
  std::vector<Patch> patches;
  if (!grazing.empty()) {
    CounterRng rng(stream_key(seed, name_hash("patches")));
    const auto span = static_cast<std::uint64_t>(sensor.max_patches - sensor.min_patches + 1);
    const int count = sensor.min_patches + static_cast<int>(rng.below(span));
    for (int i = 0; i < count; ++i) {
      const std::uint32_t center = grazing[rng.below(grazing.size())];
      const double theta = rng.uniform(0.0, std::numbers::pi);
      patches.push_back({static_cast<double>(center % depth.width), static_cast<double>(center / depth.width),
                         rng.uniform(2.0, 6.0), rng.uniform(1.0, 3.0), std::cos(theta), std::sin(theta)});
    }
  }
  const auto in_patch = [&](int col, int row) {
    for (const auto& p : patches) {
      const double dx = col - p.cx, dy = row - p.cy;
      const double u = dx * p.cos_t + dy * p.sin_t, v = -dx * p.sin_t + dy * p.cos_t;
      if ((u * u) / (p.a * p.a) + (v * v) / (p.b * p.b) <= 1.0) return true;
    }
    return false;
  };

  const std::uint64_t noise_key = stream_key(seed, name_hash("range-noise"));
  const std::uint64_t drop_key = stream_key(seed, name_hash("dropout"));
  const double clip = sensor.noise_clip_sigmas * sensor.depth_noise_sigma;

  PointCloud cloud;
  for (int row = 0; row < depth.height; ++row) {
    for (int col = 0; col < depth.width; ++col) {
      const std::size_t k = static_cast<std::size_t>(row) * depth.width + col;
      const double range = depth.range[k];
      if (!(range <= sensor.max_range)) continue;
      // one uniform per pixel, so raising the probability only removes points
      if (CounterRng(drop_key).at(k) >> 11 < static_cast<std::uint64_t>(sensor.dropout_probability * 0x1.0p53)) {
        continue;
      }
      if (!patches.empty() && in_patch(col, row)) continue;
      double noisy = range;
      if (sensor.depth_noise_sigma > 0.0) {
        CounterRng rng(stream_key(noise_key, k));
        noisy += std::clamp(sensor.depth_noise_sigma * rng.normal(), -clip, clip);
      }
      const Eigen::Vector3d dir = camera_to_world.rotation * pixel_ray(sensor, col, row);
      cloud.points.push_back(camera_to_world.translation + noisy * dir);
    }
  }
  return cloud;
}

PointCloud capture_view(const TriangleMesh& mesh, const ViewPose& pose, const SensorModel& sensor,
                        double orbit_radius, std::uint64_t seed) {
  if (mesh.triangles.empty()) throw InvalidParameter("cannot capture an empty mesh");
  const RigidTransform camera_to_world = pose_to_transform(pose, orbit_radius);
  return depth_to_cloud(raycast_depth(mesh, camera_to_world, sensor), camera_to_world, sensor, seed);
}

}  // namespace nbv
