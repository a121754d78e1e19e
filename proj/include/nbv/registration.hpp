#pragma once

#include "nbv/geometry.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace nbv {

struct IcpParams {
  int max_iterations = 30;
  /// An update is kept only if it lowers the mean correspondence distance by
  /// at least this much (meters); otherwise the iteration stops.
  double convergence_delta = 1e-5;
  double max_correspondence_dist = 0.01;
  int subsample_count = 2000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct IcpResult {
  /// Maps source into the target frame.
  RigidTransform transform;
  double rmse = 0.0;
  /// Mean correspondence distance before the first update and after every
  /// accepted update; non-increasing.
  std::vector<double> mean_distances;
  std::size_t inliers = 0;
};

/// Point-to-point ICP with gated nearest-neighbor correspondences and a
/// closed-form SVD fit per iteration. Throws NoCorrespondences when no
/// source point has a target neighbor within the gate at the start.
IcpResult icp_align(const PointCloud& source, const PointCloud& target, const IcpParams& params);

/// Least-squares rigid motion taking src[i] onto dst[i].
RigidTransform fit_rigid(std::span<const Point3> src, std::span<const Point3> dst);

struct TurView {
  PointCloud cloud;  // camera frame
  ViewPose pose;
};

struct TurParams {
  double orbit_radius = 0.3;
  IcpParams icp;
  double voxel = 0.002;
  /// On ICP failure, union the view without refinement instead of throwing.
  bool fallback_to_transform = true;
};

struct TurResult {
  PointCloud merged;
  std::vector<RigidTransform> refinements;  // one per view after the first
  std::vector<std::string> warnings;
};

/// Transform / union / registration: brings each view into the world frame,
/// refines it against everything merged so far with ICP, then unions it in
/// with voxel deduplication. A single view comes back as its world-frame
/// transform.
TurResult tur_merge(std::span<const TurView> views, const TurParams& params);

/// Same pipeline for clouds that are already in the world frame.
TurResult tur_merge_world(std::span<const PointCloud> world_views, const TurParams& params);

}  // namespace nbv
