#include "nbv/registration.hpp"

#include "nbv/error.hpp"
#include "nbv/rng.hpp"
#include "nbv/spatial_grid.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nbv {

void IcpParams::validate() const {
  if (max_iterations < 1) throw InvalidParameter("ICP needs at least one iteration");
  if (!(convergence_delta > 0.0)) throw InvalidParameter("ICP convergence delta must be positive");
  if (!(max_correspondence_dist > 0.0)) throw InvalidParameter("ICP correspondence gate must be positive");
  if (subsample_count < 1) throw InvalidParameter("ICP subsample count must be positive");
}

RigidTransform fit_rigid(std::span<const Point3> src, std::span<const Point3> dst) {
  if (src.size() != dst.size() || src.empty()) throw InvalidParameter("fit_rigid needs matched, non-empty sets");
  Eigen::Vector3d cs = Eigen::Vector3d::Zero(), cd = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    cs += src[i];
    cd += dst[i];
  }
  cs /= static_cast<double>(src.size());
  cd /= static_cast<double>(dst.size());
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) h += (src[i] - cs) * (dst[i] - cd).transpose();

  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d u = svd.matrixU(), v = svd.matrixV();
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (v * u.transpose()).determinant() < 0 ? -1.0 : 1.0;

  RigidTransform t;
  t.rotation = v * d * u.transpose();
  t.translation = cd - t.rotation * cs;
  return t;
}

namespace {

std::vector<std::size_t> subsample(std::size_t n, int count, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  const auto k = static_cast<std::size_t>(count);
  if (n <= k) return idx;
  CounterRng rng(stream_key(seed, name_hash("icp-subsample"), n));
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

struct Matches {
  std::vector<Point3> src;
  std::vector<Point3> dst;
  double mean = 0.0;
  double sum_squared = 0.0;
};

Matches match(const std::vector<Point3>& sample, const RigidTransform& t, const SpatialGrid& grid,
              const PointCloud& target, double gate) {
  Matches m;
  double sum = 0.0;
  for (const auto& p : sample) {
    const Point3 q = t.apply(p);
    const auto nn = grid.nearest(q, gate);
    if (!nn) continue;
    m.src.push_back(q);
    m.dst.push_back(target.points[nn->index]);
    sum += std::sqrt(nn->squared_distance);
    m.sum_squared += nn->squared_distance;
  }
  if (!m.src.empty()) m.mean = sum / static_cast<double>(m.src.size());
  return m;
}

}  // namespace

IcpResult icp_align(const PointCloud& source, const PointCloud& target, const IcpParams& params) {
  params.validate();
  if (source.empty() || target.empty()) throw InvalidParameter("ICP needs non-empty clouds");

  const SpatialGrid grid(target.points, 0.5 * params.max_correspondence_dist);
  std::vector<Point3> sample;
  for (const auto i : subsample(source.size(), params.subsample_count, params.seed)) {
    sample.push_back(source.points[i]);
  }

  IcpResult result;
  Matches current = match(sample, result.transform, grid, target, params.max_correspondence_dist);
  if (current.src.empty()) {
    throw NoCorrespondences("no source point within " + std::to_string(params.max_correspondence_dist) +
                            " m of the target");
  }
  result.mean_distances.push_back(current.mean);

  for (int iter = 0; iter < params.max_iterations; ++iter) {
    const RigidTransform step = fit_rigid(current.src, current.dst);
    const RigidTransform candidate = step * result.transform;
    Matches next = match(sample, candidate, grid, target, params.max_correspondence_dist);
    if (next.src.empty() || current.mean - next.mean < params.convergence_delta) break;
    result.transform = candidate;
    current = std::move(next);
    result.mean_distances.push_back(current.mean);
  }
  result.inliers = current.src.size();
  result.rmse = std::sqrt(current.sum_squared / static_cast<double>(current.src.size()));
  return result;
}

TurResult tur_merge_world(std::span<const PointCloud> world_views, const TurParams& params) {
  if (world_views.empty()) throw InvalidParameter("TUR needs at least one view");
  TurResult result;
  result.merged = world_views.front();
  for (std::size_t v = 1; v < world_views.size(); ++v) {
    PointCloud view = world_views[v];
    RigidTransform refinement;
    if (!view.empty() && !result.merged.empty()) {
      try {
        refinement = icp_align(view, result.merged, params.icp).transform;
        view = apply_transform(view, refinement);
      } catch (const NoCorrespondences& e) {
        if (!params.fallback_to_transform) throw;
        result.warnings.push_back("view " + std::to_string(v) + ": " + e.what() + "; merged without ICP");
      }
    }
    result.refinements.push_back(refinement);
    result.merged = union_dedup(result.merged, view, params.voxel);
  }
  return result;
}

TurResult tur_merge(std::span<const TurView> views, const TurParams& params) {
  std::vector<PointCloud> world;
  world.reserve(views.size());
  for (const auto& v : views) world.push_back(apply_transform(v.cloud, pose_to_transform(v.pose, params.orbit_radius)));
  return tur_merge_world(world, params);
}

}  // namespace nbv
