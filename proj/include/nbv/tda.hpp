#pragma once

#include "nbv/geometry.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace nbv {

using Edge = std::array<std::uint32_t, 2>;
using Triangle = std::array<std::uint32_t, 3>;

/// Vietoris-Rips complex truncated at dimension 2. Edges (i < j) and
/// triangles (i < j < k) are sorted lexicographically.
struct VRComplex {
  double radius = 0.0;
  std::size_t vertex_count = 0;
  std::vector<Edge> edges;
  std::vector<Triangle> triangles;
};

/// All pairs with |p_i - p_j| <= radius, lexicographically sorted.
/// Grid-accelerated; the OpenMP kernel and the serial kernel agree exactly.
std::vector<Edge> enumerate_edges(std::span<const Point3> points, double radius);
std::vector<Edge> enumerate_edges_serial(std::span<const Point3> points, double radius);

/// Triangles of the flag complex of a lexicographically sorted edge list.
std::vector<Triangle> enumerate_triangles(std::size_t vertex_count, std::span<const Edge> edges);

VRComplex build_vr_complex(const PointCloud& cloud, double radius);

/// Connected components of the 1-skeleton (union-find).
std::size_t betti0(const VRComplex& complex);

/// Z/2 rank of the triangle boundary matrix, columns reduced in the
/// complex's lexicographic triangle order.
std::size_t boundary2_rank(const VRComplex& complex);

/// E - V + beta0 - rank(d2).
std::size_t betti1(const VRComplex& complex);

/// Sparse Z/2 rank by column reduction. Each column lists its nonzero row
/// indices in ascending order; the pivot of a column is its largest row.
std::size_t z2_rank(std::vector<std::vector<std::uint32_t>> columns);

struct FiltrationEntry {
  double radius = 0.0;
  std::int64_t betti0 = 0;
  std::int64_t betti1 = 0;

  bool operator==(const FiltrationEntry&) const = default;
};

/// (radius, beta0, beta1) per filtration step, radii strictly increasing.
struct FiltrationProfile {
  std::vector<FiltrationEntry> entries;

  std::vector<double> radii() const;
  std::int64_t betti0_sum() const;
  std::int64_t betti1_sum() const;

  /// {"radii":[...],"betti0":[...],"betti1":[...]}
  std::string to_json() const;
  static FiltrationProfile from_json(const std::string& text);

  bool operator==(const FiltrationProfile&) const = default;
};

void validate_radii(std::span<const double> radii);

/// Betti numbers at every radius from one neighbor search at the largest
/// radius and one reduction of the boundary matrix in filtration order, so
/// the complexes are nested by construction.
FiltrationProfile filtration_profile(const PointCloud& cloud, std::span<const double> radii);

/// Reference path: an independent complex per radius.
FiltrationProfile filtration_profile_per_radius(const PointCloud& cloud, std::span<const double> radii);

/// Rank of the p-persistent k-th homology group of the complex at radii[l]:
/// dim Z_k(l) - dim(B_k(l+p) intersect Z_k(l)). k is 0 or 1.
std::size_t persistent_betti(const PointCloud& cloud, std::span<const double> radii, std::size_t l,
                             std::size_t p, int k);

}  // namespace nbv
