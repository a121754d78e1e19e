#include "nbv/mesh.hpp"

#include "nbv/error.hpp"
#include "nbv/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace nbv {

namespace {

constexpr double kPi = std::numbers::pi;

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw InvalidParameter(std::string(what) + " must be positive");
  }
}

/// Builds a mesh from triangle corner positions, merging corners closer than
/// 1e-9 m into one vertex.
class WeldingBuilder {
public:
  std::uint32_t vertex(const Point3& p) {
    const auto key = std::array<long long, 3>{std::llround(p.x() * 1e9), std::llround(p.y() * 1e9),
                                              std::llround(p.z() * 1e9)};
    auto [it, inserted] = index_.try_emplace(key, static_cast<std::uint32_t>(mesh_.vertices.size()));
    if (inserted) mesh_.vertices.push_back(p);
    return it->second;
  }
  void triangle(const Point3& a, const Point3& b, const Point3& c) {
    const std::uint32_t ia = vertex(a), ib = vertex(b), ic = vertex(c);
    if (ia == ib || ib == ic || ia == ic) return;
    mesh_.triangles.push_back({ia, ib, ic});
  }
  TriangleMesh take() { return std::move(mesh_); }

private:
  TriangleMesh mesh_;
  std::map<std::array<long long, 3>, std::uint32_t> index_;
};

TriangleMesh transformed(TriangleMesh mesh, const RigidTransform& t) {
  for (auto& v : mesh.vertices) v = t.apply(v);
  return mesh;
}

void check_extent(const TriangleMesh& mesh) {
  if (mesh.max_extent() > kMaxObjectExtent + 1e-12) {
    throw InvalidParameter("object extent exceeds 0.15 m");
  }
}

}  // namespace

void TriangleMesh::append(const TriangleMesh& other) {
  const auto offset = static_cast<std::uint32_t>(vertices.size());
  vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
  for (const auto& t : other.triangles) triangles.push_back({t[0] + offset, t[1] + offset, t[2] + offset});
}

Eigen::AlignedBox3d TriangleMesh::bounds() const {
  Eigen::AlignedBox3d box;
  for (const auto& v : vertices) box.extend(v);
  return box;
}

double TriangleMesh::max_extent() const {
  if (vertices.empty()) return 0.0;
  return bounds().sizes().maxCoeff();
}

double TriangleMesh::area() const {
  double a = 0.0;
  for (const auto& t : triangles) {
    a += 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
  }
  return a;
}

bool TriangleMesh::is_watertight() const {
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> directed;
  for (const auto& t : triangles) {
    for (int k = 0; k < 3; ++k) {
      if (++directed[{t[k], t[(k + 1) % 3]}] > 1) return false;
    }
  }
  for (const auto& [edge, count] : directed) {
    if (!directed.contains({edge.second, edge.first})) return false;
  }
  return !triangles.empty();
}

TriangleMesh make_torus(const TorusParams& p) {
  require_positive(p.major_radius, "major radius");
  require_positive(p.minor_radius, "minor radius");
  if (p.minor_radius >= p.major_radius) throw InvalidParameter("minor radius must be below major radius");
  if (p.major_segments < 3 || p.minor_segments < 3) throw InvalidParameter("torus needs at least 3 segments");

  TriangleMesh mesh;
  const int nu = p.major_segments, nv = p.minor_segments;
  for (int i = 0; i < nu; ++i) {
    const double u = 2.0 * kPi * i / nu;
    for (int j = 0; j < nv; ++j) {
      const double v = 2.0 * kPi * j / nv;
      const double ring = p.major_radius + p.minor_radius * std::cos(v);
      mesh.vertices.emplace_back(ring * std::cos(u), ring * std::sin(u), p.minor_radius * std::sin(v));
    }
  }
  const auto id = [&](int i, int j) { return static_cast<std::uint32_t>((i % nu) * nv + (j % nv)); };
  for (int i = 0; i < nu; ++i) {
    for (int j = 0; j < nv; ++j) {
      mesh.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      mesh.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  check_extent(mesh);
  return mesh;
}

TriangleMesh make_box(const BoxParams& p) {
  require_positive(p.width, "box width");
  require_positive(p.height, "box height");
  require_positive(p.depth, "box depth");
  TriangleMesh mesh;
  const double hx = p.width / 2, hy = p.height / 2, hz = p.depth / 2;
  for (int k = 0; k < 8; ++k) {
    mesh.vertices.emplace_back((k & 1) ? hx : -hx, (k & 2) ? hy : -hy, (k & 4) ? hz : -hz);
  }
  // outward-facing, two triangles per face
  mesh.triangles = {{0, 2, 3}, {0, 3, 1}, {4, 5, 7}, {4, 7, 6},   // z-, z+
                    {0, 1, 5}, {0, 5, 4}, {2, 6, 7}, {2, 7, 3},   // y-, y+
                    {0, 4, 6}, {0, 6, 2}, {1, 3, 7}, {1, 7, 5}};  // x-, x+
  check_extent(mesh);
  return mesh;
}

TriangleMesh make_plate_with_holes(const PlateParams& p) {
  require_positive(p.width, "plate width");
  require_positive(p.height, "plate height");
  require_positive(p.thickness, "plate thickness");
  require_positive(p.hole_radius, "hole radius");
  if (p.hole_count < 1) throw InvalidParameter("plate needs at least one hole");
  if (p.hole_segments < 8) throw InvalidParameter("hole needs at least 8 segments");

  const double cell_w = p.width / p.hole_count;
  const double half_w = cell_w / 2, half_h = p.height / 2;
  if (p.hole_radius >= 0.9 * std::min(half_w, half_h)) {
    throw InvalidParameter("hole radius exceeds plate size");
  }

  // Sample directions shared by the hole circle and the cell rectangle. The
  // set is symmetric under theta -> pi - theta and theta -> -theta so that
  // neighbouring cells put identical vertices on their shared side.
  std::vector<double> angles;
  const int n = p.hole_segments + (p.hole_segments % 2);
  for (int i = 0; i < n; ++i) angles.push_back(2.0 * kPi * i / n);
  const double corner = std::atan2(half_h, half_w);
  for (double a : {corner, kPi - corner, kPi + corner, 2.0 * kPi - corner}) angles.push_back(a);
  std::sort(angles.begin(), angles.end());
  angles.erase(std::unique(angles.begin(), angles.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-12; }),
               angles.end());

  const auto on_rect = [&](double a) {
    const double c = std::cos(a), s = std::sin(a);
    const double scale = std::min(std::abs(c) > 1e-15 ? half_w / std::abs(c) : 1e300,
                                  std::abs(s) > 1e-15 ? half_h / std::abs(s) : 1e300);
    // Snap to the rectangle so shared sides weld exactly.
    double x = std::clamp(scale * c, -half_w, half_w), y = std::clamp(scale * s, -half_h, half_h);
    if (std::abs(std::abs(scale * c) - half_w) < 1e-12) x = std::copysign(half_w, c);
    if (std::abs(std::abs(scale * s) - half_h) < 1e-12) y = std::copysign(half_h, s);
    return Eigen::Vector2d(x, y);
  };

  // Top face (w = +t/2) in plate coordinates (u, v), counter-clockwise seen from +w.
  std::vector<std::array<Eigen::Vector2d, 3>> face;
  for (int h = 0; h < p.hole_count; ++h) {
    const Eigen::Vector2d center(-p.width / 2 + cell_w * (h + 0.5), 0.0);
    for (std::size_t i = 0; i < angles.size(); ++i) {
      const double a0 = angles[i], a1 = angles[(i + 1) % angles.size()];
      const Eigen::Vector2d c0 = center + p.hole_radius * Eigen::Vector2d(std::cos(a0), std::sin(a0));
      const Eigen::Vector2d c1 = center + p.hole_radius * Eigen::Vector2d(std::cos(a1), std::sin(a1));
      const Eigen::Vector2d r0 = center + on_rect(a0), r1 = center + on_rect(a1);
      face.push_back({c0, r0, r1});
      face.push_back({c0, r1, c1});
    }
  }

  // Plate coordinates (u, v, w) map to world (w, u, v).
  const auto to_world = [](const Eigen::Vector2d& uv, double w) { return Point3(w, uv.x(), uv.y()); };
  const double top = p.thickness / 2, bottom = -p.thickness / 2;

  WeldingBuilder top_builder;
  for (const auto& t : face) {
    top_builder.triangle(to_world(t[0], top), to_world(t[1], top), to_world(t[2], top));
  }
  const TriangleMesh top_face = top_builder.take();

  std::map<std::pair<std::uint32_t, std::uint32_t>, int> edge_use;
  for (const auto& t : top_face.triangles) {
    for (int k = 0; k < 3; ++k) {
      const auto a = t[k], b = t[(k + 1) % 3];
      ++edge_use[{std::min(a, b), std::max(a, b)}];
    }
  }

  WeldingBuilder builder;
  const auto drop = [&](const Point3& q) { return Point3(bottom, q.y(), q.z()); };
  for (const auto& t : top_face.triangles) {
    const Point3& a = top_face.vertices[t[0]];
    const Point3& b = top_face.vertices[t[1]];
    const Point3& c = top_face.vertices[t[2]];
    builder.triangle(a, b, c);
    builder.triangle(drop(a), drop(c), drop(b));
    // every boundary edge of the top face becomes a side wall
    for (int k = 0; k < 3; ++k) {
      const auto ia = t[k], ib = t[(k + 1) % 3];
      if (edge_use[{std::min(ia, ib), std::max(ia, ib)}] != 1) continue;
      const Point3& pa = top_face.vertices[ia];
      const Point3& pb = top_face.vertices[ib];
      builder.triangle(pb, pa, drop(pa));
      builder.triangle(pb, drop(pa), drop(pb));
    }
  }
  TriangleMesh mesh = builder.take();
  check_extent(mesh);
  return mesh;
}

TriangleMesh make_two_torus(const TwoTorusParams& p) {
  TorusParams tp{p.major_radius, p.minor_radius, p.major_segments, p.minor_segments};
  if (p.minor_radius >= p.major_radius / 2) throw InvalidParameter("linked tori need minor < major/2");
  TriangleMesh a = make_torus(tp);
  TriangleMesh b = a;

  RigidTransform shift_a;
  shift_a.translation = Eigen::Vector3d(-p.major_radius / 2, 0, 0);
  RigidTransform stand_b;
  stand_b.rotation = Eigen::AngleAxisd(kPi / 2, Eigen::Vector3d::UnitX()).toRotationMatrix();
  stand_b.translation = Eigen::Vector3d(p.major_radius / 2, 0, 0);

  TriangleMesh mesh = transformed(std::move(a), shift_a);
  mesh.append(transformed(std::move(b), stand_b));
  check_extent(mesh);
  return mesh;
}

TriangleMesh make_composite(const CompositeParams& p) {
  require_positive(p.scale, "composite scale");
  const double s = p.scale;
  TriangleMesh mesh;

  RigidTransform base_pose;
  base_pose.translation = Eigen::Vector3d(0, 0, -0.025 * s);
  mesh.append(transformed(make_box({0.09 * s, 0.06 * s, 0.02 * s}), base_pose));

  RigidTransform ring_pose;
  ring_pose.rotation = Eigen::AngleAxisd(kPi / 2, Eigen::Vector3d::UnitX()).toRotationMatrix();
  ring_pose.translation = Eigen::Vector3d(-0.015 * s, 0, 0.012 * s);
  mesh.append(transformed(make_torus({0.025 * s, 0.006 * s, 48, 18}), ring_pose));

  RigidTransform lobe_pose;
  lobe_pose.translation = Eigen::Vector3d(0.035 * s, 0.0, 0.01 * s);
  mesh.append(transformed(make_box({0.02 * s, 0.02 * s, 0.02 * s}), lobe_pose));

  // recenter on the bounding-box center
  const Eigen::Vector3d c = mesh.bounds().center();
  for (auto& v : mesh.vertices) v -= c;
  check_extent(mesh);
  return mesh;
}

std::string object_kind_name(const ObjectParams& params) {
  return std::visit(
      [](const auto& p) -> std::string {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, TorusParams>) return "torus";
        else if constexpr (std::is_same_v<T, PlateParams>) return "plate_with_holes";
        else if constexpr (std::is_same_v<T, BoxParams>) return "box";
        else if constexpr (std::is_same_v<T, TwoTorusParams>) return "two_torus";
        else return "composite";
      },
      params);
}

TriangleMesh make_object(const ObjectParams& params) {
  return std::visit(
      [](const auto& p) -> TriangleMesh {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, TorusParams>) return make_torus(p);
        else if constexpr (std::is_same_v<T, PlateParams>) return make_plate_with_holes(p);
        else if constexpr (std::is_same_v<T, BoxParams>) return make_box(p);
        else if constexpr (std::is_same_v<T, TwoTorusParams>) return make_two_torus(p);
        else return make_composite(p);
      },
      params);
}

std::optional<RayHit> intersect_ray(const TriangleMesh& mesh, const Eigen::AlignedBox3d& bounds,
                                    const Point3& origin, const Eigen::Vector3d& dir) {
  // slab test against the bounds first
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double inv = 1.0 / dir[a];
    double tn = (bounds.min()[a] - origin[a]) * inv;
    double tf = (bounds.max()[a] - origin[a]) * inv;
    if (tn > tf) std::swap(tn, tf);
    t0 = std::max(t0, tn);
    t1 = std::min(t1, tf);
    if (t0 > t1) return std::nullopt;
  }

  std::optional<RayHit> best;
  for (std::uint32_t i = 0; i < mesh.triangles.size(); ++i) {
    const auto& tri = mesh.triangles[i];
    const Point3& v0 = mesh.vertices[tri[0]];
    const Eigen::Vector3d e1 = mesh.vertices[tri[1]] - v0;
    const Eigen::Vector3d e2 = mesh.vertices[tri[2]] - v0;
    const Eigen::Vector3d pvec = dir.cross(e2);
    const double det = e1.dot(pvec);
    if (std::abs(det) < 1e-18) continue;
    const double inv_det = 1.0 / det;
    const Eigen::Vector3d tvec = origin - v0;
    const double u = tvec.dot(pvec) * inv_det;
    if (u < 0.0 || u > 1.0) continue;
    const Eigen::Vector3d qvec = tvec.cross(e1);
    const double v = dir.dot(qvec) * inv_det;
    if (v < 0.0 || u + v > 1.0) continue;
    const double t = e2.dot(qvec) * inv_det;
    if (t > 1e-9 && (!best || t < best->distance)) best = RayHit{t, i};
  }
  return best;
}

Eigen::Vector3d triangle_normal(const TriangleMesh& mesh, std::uint32_t tri) {
  const auto& t = mesh.triangles[tri];
  return (mesh.vertices[t[1]] - mesh.vertices[t[0]])
      .cross(mesh.vertices[t[2]] - mesh.vertices[t[0]])
      .normalized();
}

namespace {

// Closest point on triangle abc to p (Ericson, Real-Time Collision Detection 5.1.5).
Point3 closest_on_triangle(const Point3& p, const Point3& a, const Point3& b, const Point3& c) {
  const Eigen::Vector3d ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return a;
  const Eigen::Vector3d bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + (d1 / (d1 - d3)) * ab;
  const Eigen::Vector3d cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + (d2 / (d2 - d6)) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  }
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

}  // namespace

double distance_to_mesh(const TriangleMesh& mesh, const Point3& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& t : mesh.triangles) {
    const Point3 q = closest_on_triangle(p, mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
    best = std::min(best, (q - p).norm());
  }
  return best;
}

PointCloud sample_surface(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed) {
  std::vector<double> cumulative;
  cumulative.reserve(mesh.triangles.size());
  double total = 0.0;
  for (const auto& t : mesh.triangles) {
    total += 0.5 * (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]).norm();
    cumulative.push_back(total);
  }
  PointCloud cloud;
  if (mesh.triangles.empty()) return cloud;
  CounterRng rng(stream_key(seed, name_hash("surface-sample")));
  cloud.points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double pick = rng.uniform() * total;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    const auto& t = mesh.triangles[std::min<std::size_t>(it - cumulative.begin(), mesh.triangles.size() - 1)];
    double u = rng.uniform(), v = rng.uniform();
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    const Point3& a = mesh.vertices[t[0]];
    cloud.points.push_back(a + u * (mesh.vertices[t[1]] - a) + v * (mesh.vertices[t[2]] - a));
  }
  return cloud;
}

}  // namespace nbv
