#include "nbv/tda.hpp"

#include "nbv/error.hpp"
#include "nbv/spatial_grid.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <unordered_map>

namespace nbv {

namespace {

class UnionFind {
public:
  explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0), components_(n) {
    std::iota(parent_.begin(), parent_.end(), 0u);
  }
  std::uint32_t find(std::uint32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
    --components_;
  }
  std::size_t components() const noexcept { return components_; }

private:
  std::vector<std::uint32_t> parent_;
  std::vector<std::uint8_t> rank_;
  std::size_t components_;
};

/// Upper neighbor lists in CSR form: for vertex i, the sorted j > i within
/// radius, with squared distances alongside.
struct UpperNeighbors {
  std::vector<std::size_t> offsets;  // size n + 1
  std::vector<std::uint32_t> targets;
  std::vector<double> squared_lengths;

  std::size_t edge_count() const noexcept { return targets.size(); }
};

void collect_upper(const SpatialGrid& grid, std::span<const Point3> points, double radius, std::size_t i,
                   std::vector<std::pair<std::uint32_t, double>>& out) {
  out.clear();
  grid.for_each_within(points[i], radius, [&](std::uint32_t j, double d2) {
    if (j > i) out.emplace_back(j, d2);
  });
  std::sort(out.begin(), out.end());
}

UpperNeighbors assemble(std::vector<std::vector<std::pair<std::uint32_t, double>>>& per_vertex) {
  UpperNeighbors nb;
  nb.offsets.resize(per_vertex.size() + 1, 0);
  for (std::size_t i = 0; i < per_vertex.size(); ++i) nb.offsets[i + 1] = nb.offsets[i] + per_vertex[i].size();
  nb.targets.resize(nb.offsets.back());
  nb.squared_lengths.resize(nb.offsets.back());
  for (std::size_t i = 0; i < per_vertex.size(); ++i) {
    std::size_t k = nb.offsets[i];
    for (const auto& [j, d2] : per_vertex[i]) {
      nb.targets[k] = j;
      nb.squared_lengths[k] = d2;
      ++k;
    }
  }
  return nb;
}

UpperNeighbors upper_neighbors_serial(std::span<const Point3> points, double radius) {
  if (points.empty()) return UpperNeighbors{{0}, {}, {}};
  const SpatialGrid grid(points, radius);
  std::vector<std::vector<std::pair<std::uint32_t, double>>> per_vertex(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) collect_upper(grid, points, radius, i, per_vertex[i]);
  return assemble(per_vertex);
}

UpperNeighbors upper_neighbors(std::span<const Point3> points, double radius) {
  if (points.empty()) return UpperNeighbors{{0}, {}, {}};
  const SpatialGrid grid(points, radius);
  std::vector<std::vector<std::pair<std::uint32_t, double>>> per_vertex(points.size());
  const auto n = static_cast<std::int64_t>(points.size());
#pragma omp parallel for schedule(dynamic, 256)
  for (std::int64_t i = 0; i < n; ++i) {
    collect_upper(grid, points, radius, static_cast<std::size_t>(i), per_vertex[i]);
  }
  return assemble(per_vertex);
}

std::vector<Edge> to_edges(const UpperNeighbors& nb) {
  std::vector<Edge> edges;
  edges.reserve(nb.edge_count());
  for (std::size_t i = 0; i + 1 < nb.offsets.size(); ++i) {
    for (std::size_t k = nb.offsets[i]; k < nb.offsets[i + 1]; ++k) {
      edges.push_back({static_cast<std::uint32_t>(i), nb.targets[k]});
    }
  }
  return edges;
}

/// Calls f(i, j, k, e_ij, e_ik, e_jk) for every triangle in lexicographic
/// order; e_* are edge positions in the CSR arrays.
template <class F>
void for_each_triangle(const std::vector<std::size_t>& offsets, const std::vector<std::uint32_t>& targets,
                       F&& f) {
  const std::size_t n = offsets.empty() ? 0 : offsets.size() - 1;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t begin_i = offsets[i], end_i = offsets[i + 1];
    for (std::size_t a = begin_i; a < end_i; ++a) {
      const std::uint32_t j = targets[a];
      // intersect N+(i) beyond j with N+(j)
      std::size_t b = a + 1;
      std::size_t c = offsets[j];
      const std::size_t end_j = offsets[j + 1];
      while (b < end_i && c < end_j) {
        if (targets[b] < targets[c]) {
          ++b;
        } else if (targets[c] < targets[b]) {
          ++c;
        } else {
          f(static_cast<std::uint32_t>(i), j, targets[b], a, b, c);
          ++b;
          ++c;
        }
      }
    }
  }
}

/// Column reduction over Z/2. Columns are ascending row lists; the pivot is
/// the last entry. Returns, per input column, whether it reduced to nonzero.
class Z2Reducer {
public:
  explicit Z2Reducer(std::size_t rows) : pivot_owner_(rows, -1) {}

  bool add_column(std::vector<std::uint32_t> column) {
    while (!column.empty()) {
      const std::uint32_t pivot = column.back();
      const std::int64_t owner = pivot_owner_[pivot];
      if (owner < 0) {
        pivot_owner_[pivot] = static_cast<std::int64_t>(reduced_.size());
        reduced_.push_back(std::move(column));
        return true;
      }
      const auto& other = reduced_[static_cast<std::size_t>(owner)];
      scratch_.clear();
      std::set_symmetric_difference(column.begin(), column.end(), other.begin(), other.end(),
                                    std::back_inserter(scratch_));
      column.swap(scratch_);
    }
    return false;
  }

  std::size_t rank() const noexcept { return reduced_.size(); }

private:
  std::vector<std::int64_t> pivot_owner_;
  std::vector<std::vector<std::uint32_t>> reduced_;
  std::vector<std::uint32_t> scratch_;
};

/// Full neighbor lists (sorted) with the CSR edge id of each incidence.
struct Adjacency {
  std::vector<std::size_t> offsets;
  std::vector<std::uint32_t> vertex;
  std::vector<std::uint32_t> edge;
};

Adjacency full_adjacency(const UpperNeighbors& nb, std::size_t n) {
  Adjacency adj;
  adj.offsets.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    adj.offsets[i + 1] += nb.offsets[i + 1] - nb.offsets[i];
    for (std::size_t k = nb.offsets[i]; k < nb.offsets[i + 1]; ++k) ++adj.offsets[nb.targets[k] + 1];
  }
  for (std::size_t i = 0; i < n; ++i) adj.offsets[i + 1] += adj.offsets[i];
  adj.vertex.resize(adj.offsets.back());
  adj.edge.resize(adj.offsets.back());
  std::vector<std::size_t> fill(adj.offsets.begin(), adj.offsets.end() - 1);
  // lower neighbors of i are all appended before i's own upper list, so
  // every list comes out sorted
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = nb.offsets[i]; k < nb.offsets[i + 1]; ++k) {
      const std::uint32_t j = nb.targets[k];
      adj.vertex[fill[i]] = j;
      adj.edge[fill[i]++] = static_cast<std::uint32_t>(k);
      adj.vertex[fill[j]] = static_cast<std::uint32_t>(i);
      adj.edge[fill[j]++] = static_cast<std::uint32_t>(k);
    }
  }
  return adj;
}

std::pair<std::uint32_t, std::uint32_t> edge_endpoints(const UpperNeighbors& nb, std::uint32_t e) {
  const auto it = std::upper_bound(nb.offsets.begin(), nb.offsets.end(), static_cast<std::size_t>(e));
  return {static_cast<std::uint32_t>(it - nb.offsets.begin() - 1), nb.targets[e]};
}

/// Sorted keys of every triangle on edge (i, j): the row of the triangle's
/// longest edge in the high word, the vertex opposite that edge in the low.
void coboundary(const Adjacency& adj, const std::vector<std::uint32_t>& row_of, std::uint32_t i, std::uint32_t j,
                std::uint32_t row, std::vector<std::uint64_t>& out) {
  out.clear();
  std::size_t a = adj.offsets[i], b = adj.offsets[j];
  const std::size_t end_a = adj.offsets[i + 1], end_b = adj.offsets[j + 1];
  while (a < end_a && b < end_b) {
    const std::uint32_t va = adj.vertex[a], vb = adj.vertex[b];
    if (va < vb) {
      ++a;
    } else if (vb < va) {
      ++b;
    } else {
      // key the triangle by its longest edge and the vertex opposite it
      const std::uint32_t row_ik = row_of[adj.edge[a]], row_jk = row_of[adj.edge[b]];
      std::uint64_t key;
      if (row > row_ik && row > row_jk) {
        key = static_cast<std::uint64_t>(row) << 32 | va;
      } else if (row_ik > row_jk) {
        key = static_cast<std::uint64_t>(row_ik) << 32 | j;
      } else {
        key = static_cast<std::uint64_t>(row_jk) << 32 | i;
      }
      out.push_back(key);
      ++a;
      ++b;
    }
  }
  std::sort(out.begin(), out.end());
}

/// Smallest vertex k such that (i, j) is the longest edge of triangle ijk,
/// found without building the full coboundary.
std::optional<std::uint32_t> local_coface(const Adjacency& adj, const std::vector<std::uint32_t>& row_of,
                                          std::uint32_t i, std::uint32_t j, std::uint32_t row) {
  std::size_t a = adj.offsets[i], b = adj.offsets[j];
  const std::size_t end_a = adj.offsets[i + 1], end_b = adj.offsets[j + 1];
  while (a < end_a && b < end_b) {
    const std::uint32_t va = adj.vertex[a], vb = adj.vertex[b];
    if (va < vb) {
      ++a;
    } else if (vb < va) {
      ++b;
    } else {
      if (row_of[adj.edge[a]] < row && row_of[adj.edge[b]] < row) return va;
      ++a;
      ++b;
    }
  }
  return std::nullopt;
}

std::size_t edge_index(const std::vector<Edge>& edges, std::uint32_t a, std::uint32_t b) {
  const Edge key{a, b};
  const auto it = std::lower_bound(edges.begin(), edges.end(), key);
  if (it == edges.end() || *it != key) throw InvalidParameter("triangle face missing from edge set");
  return static_cast<std::size_t>(it - edges.begin());
}

}  // namespace

std::vector<Edge> enumerate_edges(std::span<const Point3> points, double radius) {
  if (!(radius > 0.0)) throw InvalidParameter("radius must be positive");
  return to_edges(upper_neighbors(points, radius));
}

std::vector<Edge> enumerate_edges_serial(std::span<const Point3> points, double radius) {
  if (!(radius > 0.0)) throw InvalidParameter("radius must be positive");
  return to_edges(upper_neighbors_serial(points, radius));
}

std::vector<Triangle> enumerate_triangles(std::size_t vertex_count, std::span<const Edge> edges) {
  std::vector<std::size_t> offsets(vertex_count + 1, 0);
  std::vector<std::uint32_t> targets;
  targets.reserve(edges.size());
  for (const auto& e : edges) {
    if (e[0] >= e[1] || e[1] >= vertex_count) throw InvalidParameter("edge list must hold i < j < n");
    ++offsets[e[0] + 1];
    targets.push_back(e[1]);
  }
  for (std::size_t i = 0; i < vertex_count; ++i) offsets[i + 1] += offsets[i];
  std::vector<Triangle> triangles;
  for_each_triangle(offsets, targets, [&](std::uint32_t i, std::uint32_t j, std::uint32_t k, std::size_t,
                                          std::size_t, std::size_t) { triangles.push_back({i, j, k}); });
  return triangles;
}

VRComplex build_vr_complex(const PointCloud& cloud, double radius) {
  if (!(radius > 0.0)) throw InvalidParameter("radius must be positive");
  VRComplex complex;
  complex.radius = radius;
  complex.vertex_count = cloud.size();
  const UpperNeighbors nb = upper_neighbors(cloud.points, radius);
  complex.edges = to_edges(nb);
  for_each_triangle(nb.offsets, nb.targets,
                    [&](std::uint32_t i, std::uint32_t j, std::uint32_t k, std::size_t, std::size_t,
                        std::size_t) { complex.triangles.push_back({i, j, k}); });
  return complex;
}

std::size_t betti0(const VRComplex& complex) {
  UnionFind uf(complex.vertex_count);
  for (const auto& e : complex.edges) uf.unite(e[0], e[1]);
  return uf.components();
}

std::size_t boundary2_rank(const VRComplex& complex) {
  Z2Reducer reducer(complex.edges.size());
  for (const auto& t : complex.triangles) {
    reducer.add_column({static_cast<std::uint32_t>(edge_index(complex.edges, t[0], t[1])),
                        static_cast<std::uint32_t>(edge_index(complex.edges, t[0], t[2])),
                        static_cast<std::uint32_t>(edge_index(complex.edges, t[1], t[2]))});
  }
  return reducer.rank();
}

std::size_t betti1(const VRComplex& complex) {
  const std::size_t cycles = complex.edges.size() + betti0(complex) - complex.vertex_count;
  return cycles - boundary2_rank(complex);
}

std::size_t z2_rank(std::vector<std::vector<std::uint32_t>> columns) {
  std::uint32_t rows = 0;
  for (const auto& c : columns) {
    if (!std::is_sorted(c.begin(), c.end()) || std::adjacent_find(c.begin(), c.end()) != c.end()) {
      throw InvalidParameter("z2_rank columns must be strictly ascending");
    }
    if (!c.empty()) rows = std::max(rows, c.back() + 1);
  }
  Z2Reducer reducer(rows);
  for (auto& c : columns) reducer.add_column(std::move(c));
  return reducer.rank();
}

std::vector<double> FiltrationProfile::radii() const {
  std::vector<double> r;
  for (const auto& e : entries) r.push_back(e.radius);
  return r;
}

std::int64_t FiltrationProfile::betti0_sum() const {
  std::int64_t s = 0;
  for (const auto& e : entries) s += e.betti0;
  return s;
}

std::int64_t FiltrationProfile::betti1_sum() const {
  std::int64_t s = 0;
  for (const auto& e : entries) s += e.betti1;
  return s;
}

std::string FiltrationProfile::to_json() const {
  nlohmann::ordered_json j;
  j["radii"] = nlohmann::json::array();
  j["betti0"] = nlohmann::json::array();
  j["betti1"] = nlohmann::json::array();
  for (const auto& e : entries) {
    j["radii"].push_back(e.radius);
    j["betti0"].push_back(e.betti0);
    j["betti1"].push_back(e.betti1);
  }
  return j.dump();
}

FiltrationProfile FiltrationProfile::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  const auto& r = j.at("radii");
  const auto& b0 = j.at("betti0");
  const auto& b1 = j.at("betti1");
  if (r.size() != b0.size() || r.size() != b1.size()) throw InvalidParameter("profile arrays differ in length");
  FiltrationProfile p;
  for (std::size_t i = 0; i < r.size(); ++i) {
    p.entries.push_back({r[i].get<double>(), b0[i].get<std::int64_t>(), b1[i].get<std::int64_t>()});
  }
  return p;
}

void validate_radii(std::span<const double> radii) {
  if (radii.empty()) throw InvalidParameter("filtration needs at least one radius");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0.0) || !std::isfinite(radii[i])) throw InvalidParameter("radii must be positive");
    if (i > 0 && !(radii[i] > radii[i - 1])) throw InvalidParameter("radii must be strictly increasing");
  }
}

FiltrationProfile filtration_profile(const PointCloud& cloud, std::span<const double> radii) {
  validate_radii(radii);
  const std::size_t levels = radii.size();
  FiltrationProfile profile;
  profile.entries.resize(levels);
  for (std::size_t l = 0; l < levels; ++l) profile.entries[l].radius = radii[l];
  if (cloud.empty()) return profile;

  const std::size_t n = cloud.size();
  const UpperNeighbors nb = upper_neighbors(cloud.points, radii.back());
  const std::size_t edge_count = nb.edge_count();

  std::vector<double> squared_radii(levels);
  for (std::size_t l = 0; l < levels; ++l) squared_radii[l] = radii[l] * radii[l];
  const auto level_of = [&](double d2) {
    return static_cast<std::size_t>(std::lower_bound(squared_radii.begin(), squared_radii.end(), d2) -
                                    squared_radii.begin());
  };

  // Rows in order of edge length so that reduction pivots follow the filtration.
  std::vector<std::uint32_t> by_length(edge_count);
  std::iota(by_length.begin(), by_length.end(), 0u);
  std::stable_sort(by_length.begin(), by_length.end(), [&](std::uint32_t a, std::uint32_t b) {
    return nb.squared_lengths[a] < nb.squared_lengths[b];
  });
  std::vector<std::uint32_t> row_of(edge_count);
  for (std::uint32_t r = 0; r < edge_count; ++r) row_of[by_length[r]] = r;

  std::vector<std::size_t> edge_level(edge_count);
  std::vector<std::size_t> edges_per_level(levels, 0);
  for (std::size_t e = 0; e < edge_count; ++e) {
    edge_level[e] = level_of(nb.squared_lengths[e]);
    ++edges_per_level[edge_level[e]];
  }

  // beta0 per level, and the edges that merge components (processed in row
  // order); those can never be paired with a triangle.
  std::vector<bool> merges(edge_count, false);
  {
    UnionFind uf(n);
    std::vector<Edge> endpoints(edge_count);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = nb.offsets[i]; k < nb.offsets[i + 1]; ++k) {
        endpoints[k] = {static_cast<std::uint32_t>(i), nb.targets[k]};
      }
    }
    std::size_t row = 0;
    for (std::size_t l = 0; l < levels; ++l) {
      for (const std::size_t end_row = row + edges_per_level[l]; row < end_row; ++row) {
        const std::uint32_t e = by_length[row];
        const std::size_t before = uf.components();
        uf.unite(endpoints[e][0], endpoints[e][1]);
        merges[e] = uf.components() != before;
      }
      profile.entries[l].betti0 = static_cast<std::int64_t>(uf.components());
    }
  }

  // rank(d2) per level from the persistence pairs of dimension 1, found by
  // reducing coboundaries of the non-merging edges in reverse filtration order.
  // A triangle is keyed by (row of its longest edge, opposite vertex), which
  // orders triangles consistently with the filtration.
  const Adjacency adj = full_adjacency(nb, n);
  const auto cofaces = [&](std::uint32_t row, std::vector<std::uint64_t>& out) {
    const auto [i, j] = edge_endpoints(nb, by_length[row]);
    coboundary(adj, row_of, i, j, row, out);
  };
  // pivot -> owning column: an apparent pair keeps only its edge row (its
  // column is the plain coboundary), other columns are stored reduced
  constexpr std::uint64_t kStored = std::uint64_t{1} << 63;
  std::unordered_map<std::uint64_t, std::uint64_t> owner;
  owner.reserve(edge_count);
  std::vector<std::vector<std::uint64_t>> stored;
  std::vector<std::size_t> rank_per_level(levels, 0);
  std::vector<std::uint64_t> column, other, scratch;
  for (std::uint32_t r = static_cast<std::uint32_t>(edge_count); r-- > 0;) {
    if (merges[by_length[r]]) continue;
    // apparent pair: the earliest coface has this edge as its longest side
    const auto [i, j] = edge_endpoints(nb, by_length[r]);
    if (const auto k = local_coface(adj, row_of, i, j, r)) {
      owner.emplace(static_cast<std::uint64_t>(r) << 32 | *k, r);
      ++rank_per_level[edge_level[by_length[r]]];
      continue;
    }
    coboundary(adj, row_of, i, j, r, column);
    while (!column.empty()) {
      const auto it = owner.find(column.front());
      if (it == owner.end()) break;
      const std::vector<std::uint64_t>* add = &other;
      if (it->second & kStored) {
        add = &stored[it->second & ~kStored];
      } else {
        cofaces(static_cast<std::uint32_t>(it->second), other);
      }
      scratch.clear();
      std::set_symmetric_difference(column.begin(), column.end(), add->begin(), add->end(),
                                    std::back_inserter(scratch));
      column.swap(scratch);
    }
    if (column.empty()) continue;
    owner.emplace(column.front(), kStored | stored.size());
    ++rank_per_level[edge_level[by_length[column.front() >> 32]]];
    stored.push_back(column);
  }

  std::int64_t edges_so_far = 0, rank_so_far = 0;
  for (std::size_t l = 0; l < levels; ++l) {
    edges_so_far += static_cast<std::int64_t>(edges_per_level[l]);
    rank_so_far += static_cast<std::int64_t>(rank_per_level[l]);
    profile.entries[l].betti1 =
        edges_so_far - static_cast<std::int64_t>(n) + profile.entries[l].betti0 - rank_so_far;
  }
  return profile;
}

FiltrationProfile filtration_profile_per_radius(const PointCloud& cloud, std::span<const double> radii) {
  validate_radii(radii);
  FiltrationProfile profile;
  for (const double r : radii) {
    const VRComplex complex = build_vr_complex(cloud, r);
    profile.entries.push_back(
        {r, static_cast<std::int64_t>(betti0(complex)), static_cast<std::int64_t>(betti1(complex))});
  }
  return profile;
}

std::size_t persistent_betti(const PointCloud& cloud, std::span<const double> radii, std::size_t l,
                             std::size_t p, int k) {
  validate_radii(radii);
  if (l >= radii.size() || p >= radii.size() - l) {
    throw IndexOutOfRange("persistent_betti: l + p outside the filtration");
  }
  if (k != 0 && k != 1) throw IndexOutOfRange("persistent_betti: only k = 0 and k = 1 are supported");

  const VRComplex high = build_vr_complex(cloud, radii[l + p]);
  const double r2 = radii[l] * radii[l];
  std::vector<bool> edge_in_low(high.edges.size());
  std::size_t low_edges = 0;
  for (std::size_t e = 0; e < high.edges.size(); ++e) {
    const auto& [i, j] = high.edges[e];
    edge_in_low[e] = (cloud.points[i] - cloud.points[j]).squaredNorm() <= r2;
    low_edges += edge_in_low[e];
  }

  if (k == 0) {
    // Z_0(l) is every vertex; all of B_0(l+p) lies in it.
    std::vector<std::vector<std::uint32_t>> d1;
    d1.reserve(high.edges.size());
    for (const auto& e : high.edges) d1.push_back({e[0], e[1]});
    return cloud.size() - z2_rank(std::move(d1));
  }

  // dim(B ∩ Z_1(l)) = rank d2(l+p) - rank of d2(l+p) on the rows outside K(l).
  std::vector<std::vector<std::uint32_t>> d2, d2_outside;
  d2.reserve(high.triangles.size());
  for (const auto& t : high.triangles) {
    const std::array<std::uint32_t, 3> rows{static_cast<std::uint32_t>(edge_index(high.edges, t[0], t[1])),
                                            static_cast<std::uint32_t>(edge_index(high.edges, t[0], t[2])),
                                            static_cast<std::uint32_t>(edge_index(high.edges, t[1], t[2]))};
    d2.emplace_back(rows.begin(), rows.end());
    std::vector<std::uint32_t> outside;
    for (auto r : rows) {
      if (!edge_in_low[r]) outside.push_back(r);
    }
    d2_outside.push_back(std::move(outside));
  }

  UnionFind uf(cloud.size());
  for (std::size_t e = 0; e < high.edges.size(); ++e) {
    if (edge_in_low[e]) uf.unite(high.edges[e][0], high.edges[e][1]);
  }
  const std::size_t cycles_low = low_edges + uf.components() - cloud.size();
  const std::size_t boundaries_in_low = z2_rank(std::move(d2)) - z2_rank(std::move(d2_outside));
  return cycles_low - boundaries_in_low;
}

}  // namespace nbv
