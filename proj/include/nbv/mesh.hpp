#pragma once

#include "nbv/geometry.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace nbv {

struct TriangleMesh {
  std::vector<Point3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;

  /// Appends other's geometry, re-indexing its triangles.
  void append(const TriangleMesh& other);
  Eigen::AlignedBox3d bounds() const;
  /// Largest side of the axis-aligned bounding box.
  double max_extent() const;
  double area() const;
  /// Every directed edge is matched by exactly one reversed edge.
  bool is_watertight() const;
};

struct TorusParams {
  double major_radius = 0.04;
  double minor_radius = 0.01;
  int major_segments = 64;
  int minor_segments = 24;
};

/// Rectangular plate (width along world Y, height along Z, thickness along
/// X) with `hole_count` circular through-holes in a row.
struct PlateParams {
  double width = 0.12;
  double height = 0.06;
  double thickness = 0.01;
  int hole_count = 3;
  double hole_radius = 0.012;
  int hole_segments = 32;
};

struct BoxParams {
  double width = 0.05;
  double height = 0.05;
  double depth = 0.05;
};

/// Two interlocked tori: one in the XY plane, one in the XZ plane.
struct TwoTorusParams {
  double major_radius = 0.03;
  double minor_radius = 0.008;
  int major_segments = 56;
  int minor_segments = 20;
};

/// Slab base, an upright ring handle on top and a detached cube lobe.
struct CompositeParams {
  double scale = 1.0;
};

using ObjectParams = std::variant<TorusParams, PlateParams, BoxParams, TwoTorusParams, CompositeParams>;

inline constexpr double kMaxObjectExtent = 0.15;

std::string object_kind_name(const ObjectParams& params);

/// Watertight mesh centered on the origin with extent <= kMaxObjectExtent.
/// Throws InvalidParameter on non-positive sizes, holes that do not fit the
/// plate, or oversized objects.
TriangleMesh make_object(const ObjectParams& params);

TriangleMesh make_torus(const TorusParams& p);
TriangleMesh make_plate_with_holes(const PlateParams& p);
TriangleMesh make_box(const BoxParams& p);
TriangleMesh make_two_torus(const TwoTorusParams& p);
TriangleMesh make_composite(const CompositeParams& p);

struct RayHit {
  double distance;
  std::uint32_t triangle;
};

/// First intersection along origin + t*dir (dir unit length, t > 0).
std::optional<RayHit> intersect_ray(const TriangleMesh& mesh, const Eigen::AlignedBox3d& bounds,
                                    const Point3& origin, const Eigen::Vector3d& dir);

Eigen::Vector3d triangle_normal(const TriangleMesh& mesh, std::uint32_t tri);

/// Distance from p to the closest point on the mesh surface (brute force).
double distance_to_mesh(const TriangleMesh& mesh, const Point3& p);

/// Area-weighted uniform surface sample.
PointCloud sample_surface(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed);

}  // namespace nbv
