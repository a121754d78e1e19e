#pragma once

#include "nbv/geometry.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

namespace nbv {

/// 21 bits per axis, offset so that negative cells pack too.
inline std::uint64_t pack_cell(const Eigen::Vector3i& c) {
  constexpr std::int64_t kOffset = 1 << 20;
  constexpr std::uint64_t kMask = (1u << 21) - 1;
  return ((static_cast<std::uint64_t>(c.x() + kOffset) & kMask) << 42) |
         ((static_cast<std::uint64_t>(c.y() + kOffset) & kMask) << 21) |
         (static_cast<std::uint64_t>(c.z() + kOffset) & kMask);
}

struct Neighbor {
  std::uint32_t index;
  double squared_distance;
};

/// Uniform hash grid. Fixed-radius queries need radius <= cell_size so that
/// the 27 cells around the query cover the ball; nearest() searches outward
/// ring by ring and takes any radius.
class SpatialGrid {
public:
  SpatialGrid(std::span<const Point3> points, double cell_size);

  double cell_size() const noexcept { return cell_size_; }
  std::size_t size() const noexcept { return points_.size(); }

  /// Calls f(original_index, squared_distance) for every point within
  /// radius of q. Visit order is deterministic but unspecified.
  template <class F>
  void for_each_within(const Point3& q, double radius, F&& f) const {
    const double r2 = radius * radius;
    const Eigen::Vector3i c = voxel_cell(q, cell_size_);
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          const auto it = cells_.find(pack_cell(c + Eigen::Vector3i(dx, dy, dz)));
          if (it == cells_.end()) continue;
          for (std::uint32_t k = it->second.first; k < it->second.second; ++k) {
            const double d2 = (points_[k] - q).squaredNorm();
            if (d2 <= r2) f(indices_[k], d2);
          }
        }
  }

  /// Closest point within max_dist; ties go to the lowest original index.
  std::optional<Neighbor> nearest(const Point3& q, double max_dist) const;

private:
  double cell_size_;
  std::vector<Point3> points_;           // grouped by cell
  std::vector<std::uint32_t> indices_;   // original index of points_[k]
  std::unordered_map<std::uint64_t, std::pair<std::uint32_t, std::uint32_t>> cells_;
};

}  // namespace nbv
