#include "nbv/spatial_grid.hpp"

#include "nbv/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

namespace nbv {

SpatialGrid::SpatialGrid(std::span<const Point3> points, double cell_size) : cell_size_(cell_size) {
  if (!(cell_size > 0.0)) throw InvalidParameter("grid cell size must be positive");
  std::vector<std::pair<std::uint64_t, std::uint32_t>> keyed(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    keyed[i] = {pack_cell(voxel_cell(points[i], cell_size)), static_cast<std::uint32_t>(i)};
  }
  std::sort(keyed.begin(), keyed.end());

  points_.reserve(points.size());
  indices_.reserve(points.size());
  cells_.reserve(points.size());
  for (std::size_t k = 0; k < keyed.size();) {
    std::size_t end = k;
    while (end < keyed.size() && keyed[end].first == keyed[k].first) {
      points_.push_back(points[keyed[end].second]);
      indices_.push_back(keyed[end].second);
      ++end;
    }
    cells_.emplace(keyed[k].first, std::make_pair(static_cast<std::uint32_t>(k),
                                                  static_cast<std::uint32_t>(end)));
    k = end;
  }
}

std::optional<Neighbor> SpatialGrid::nearest(const Point3& q, double max_dist) const {
  const double gate2 = max_dist * max_dist;
  const Eigen::Vector3i c = voxel_cell(q, cell_size_);
  const int rings = static_cast<int>(std::ceil(max_dist / cell_size_));
  std::optional<Neighbor> best;
  const auto visit = [&](const Eigen::Vector3i& cell) {
    const auto it = cells_.find(pack_cell(cell));
    if (it == cells_.end()) return;
    for (std::uint32_t k = it->second.first; k < it->second.second; ++k) {
      const double d2 = (points_[k] - q).squaredNorm();
      if (d2 > gate2) continue;
      if (!best || d2 < best->squared_distance || (d2 == best->squared_distance && indices_[k] < best->index)) {
        best = Neighbor{indices_[k], d2};
      }
    }
  };
  for (int ring = 0; ring <= rings; ++ring) {
    for (int dx = -ring; dx <= ring; ++dx)
      for (int dy = -ring; dy <= ring; ++dy)
        for (int dz = -ring; dz <= ring; ++dz) {
          if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
          visit(c + Eigen::Vector3i(dx, dy, dz));
        }
    // every point beyond this ring is farther than ring * cell_size
    const double reach = ring * cell_size_;
    if (best && best->squared_distance < reach * reach) break;
  }
  return best;
}

}  // namespace nbv
