#pragma once
// Slow, obviously-correct references the fast paths are checked against.

#include "nbv/geometry.hpp"
#include "nbv/rng.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

using Z2Matrix = std::vector<std::vector<std::uint8_t>>;  // rows

/// Row echelon form over Z/2 by plain Gaussian elimination; returns the rank
/// and leaves `m` reduced (pivot columns recorded in `pivots`).
inline std::size_t z2_reduce(Z2Matrix& m, std::size_t cols, std::vector<std::size_t>* pivots = nullptr) {
  std::size_t rank = 0;
  for (std::size_t c = 0; c < cols && rank < m.size(); ++c) {
    std::size_t p = rank;
    while (p < m.size() && !m[p][c]) ++p;
    if (p == m.size()) continue;
    std::swap(m[p], m[rank]);
    for (std::size_t r = 0; r < m.size(); ++r) {
      if (r != rank && m[r][c]) {
        for (std::size_t k = 0; k < cols; ++k) m[r][k] ^= m[rank][k];
      }
    }
    if (pivots) pivots->push_back(c);
    ++rank;
  }
  return rank;
}

inline std::size_t z2_rank(Z2Matrix m, std::size_t cols) { return z2_reduce(m, cols); }

/// Basis of the null space {x : m x = 0}, each vector of length `cols`.
inline std::vector<std::vector<std::uint8_t>> z2_null_space(Z2Matrix m, std::size_t cols) {
  std::vector<std::size_t> pivots;
  const std::size_t rank = z2_reduce(m, cols, &pivots);
  std::vector<bool> is_pivot(cols, false);
  for (auto c : pivots) is_pivot[c] = true;
  std::vector<std::vector<std::uint8_t>> basis;
  for (std::size_t free = 0; free < cols; ++free) {
    if (is_pivot[free]) continue;
    std::vector<std::uint8_t> x(cols, 0);
    x[free] = 1;
    for (std::size_t r = 0; r < rank; ++r) x[pivots[r]] = m[r][free];
    basis.push_back(std::move(x));
  }
  return basis;
}

struct Complex {
  std::size_t n = 0;
  std::vector<std::array<std::uint32_t, 2>> edges;
  std::vector<std::array<std::uint32_t, 3>> triangles;
};

/// All-pairs edges and all-triples triangles, lexicographic.
inline Complex brute_force_complex(const std::vector<nbv::Point3>& pts, double r) {
  Complex c;
  c.n = pts.size();
  const double r2 = r * r;
  const auto near = [&](std::size_t a, std::size_t b) { return (pts[a] - pts[b]).squaredNorm() <= r2; };
  for (std::uint32_t i = 0; i < pts.size(); ++i)
    for (std::uint32_t j = i + 1; j < pts.size(); ++j)
      if (near(i, j)) c.edges.push_back({i, j});
  for (std::uint32_t i = 0; i < pts.size(); ++i)
    for (std::uint32_t j = i + 1; j < pts.size(); ++j)
      for (std::uint32_t k = j + 1; k < pts.size(); ++k)
        if (near(i, j) && near(i, k) && near(j, k)) c.triangles.push_back({i, j, k});
  return c;
}

inline std::size_t edge_pos(const Complex& c, std::uint32_t a, std::uint32_t b) {
  for (std::size_t e = 0; e < c.edges.size(); ++e)
    if (c.edges[e][0] == a && c.edges[e][1] == b) return e;
  return static_cast<std::size_t>(-1);
}

/// Dense boundary matrices: d1 is V x E, d2 is E x T.
inline Z2Matrix boundary1(const Complex& c) {
  Z2Matrix d(c.n, std::vector<std::uint8_t>(c.edges.size(), 0));
  for (std::size_t e = 0; e < c.edges.size(); ++e) {
    d[c.edges[e][0]][e] = 1;
    d[c.edges[e][1]][e] = 1;
  }
  return d;
}

inline Z2Matrix boundary2(const Complex& c) {
  Z2Matrix d(c.edges.size(), std::vector<std::uint8_t>(c.triangles.size(), 0));
  for (std::size_t t = 0; t < c.triangles.size(); ++t) {
    const auto& [i, j, k] = c.triangles[t];
    d[edge_pos(c, i, j)][t] = 1;
    d[edge_pos(c, i, k)][t] = 1;
    d[edge_pos(c, j, k)][t] = 1;
  }
  return d;
}

/// (beta0, beta1) as rank Z_k - rank B_k with dense elimination.
inline std::pair<std::size_t, std::size_t> dense_betti(const std::vector<nbv::Point3>& pts, double r) {
  const Complex c = brute_force_complex(pts, r);
  const std::size_t rank_d1 = z2_rank(boundary1(c), c.edges.size());
  const std::size_t rank_d2 = z2_rank(boundary2(c), c.triangles.size());
  const std::size_t z0 = c.n, b0 = rank_d1;
  const std::size_t z1 = c.edges.size() - rank_d1, b1 = rank_d2;
  return {z0 - b0, z1 - b1};
}

/// rank of Z_k(r_lo) / (B_k(r_hi) ∩ Z_k(r_lo)) from explicit subspaces of the
/// chain space at r_hi: dim(B ∩ Z) = dim B + dim Z - dim(B + Z).
inline std::size_t dense_persistent_betti(const std::vector<nbv::Point3>& pts, double r_lo, double r_hi, int k) {
  const Complex hi = brute_force_complex(pts, r_hi);
  if (k == 0) {
    const std::size_t b = z2_rank(boundary1(hi), hi.edges.size());
    return hi.n - b;  // Z_0(lo) is every vertex and contains all of B_0(hi)
  }
  const std::size_t e = hi.edges.size();
  // Z_1(lo): cycles supported on the short edges, embedded in C_1(hi)
  std::vector<std::size_t> low;
  for (std::size_t i = 0; i < e; ++i) {
    if ((pts[hi.edges[i][0]] - pts[hi.edges[i][1]]).squaredNorm() <= r_lo * r_lo) low.push_back(i);
  }
  const Z2Matrix d1 = boundary1(hi);
  Z2Matrix d1_low(hi.n, std::vector<std::uint8_t>(low.size(), 0));
  for (std::size_t v = 0; v < hi.n; ++v)
    for (std::size_t c = 0; c < low.size(); ++c) d1_low[v][c] = d1[v][low[c]];
  Z2Matrix z;  // rows are vectors in C_1(hi)
  for (const auto& x : z2_null_space(d1_low, low.size())) {
    std::vector<std::uint8_t> full(e, 0);
    for (std::size_t c = 0; c < low.size(); ++c) full[low[c]] = x[c];
    z.push_back(std::move(full));
  }
  // B_1(hi): columns of d2 as rows
  const Z2Matrix d2 = boundary2(hi);
  Z2Matrix b;
  for (std::size_t t = 0; t < hi.triangles.size(); ++t) {
    std::vector<std::uint8_t> col(e, 0);
    for (std::size_t i = 0; i < e; ++i) col[i] = d2[i][t];
    b.push_back(std::move(col));
  }
  const std::size_t dim_z = z2_rank(z, e), dim_b = z2_rank(b, e);
  Z2Matrix both = z;
  both.insert(both.end(), b.begin(), b.end());
  const std::size_t dim_sum = z2_rank(both, e);
  return dim_z - (dim_b + dim_z - dim_sum);
}

inline std::vector<nbv::Point3> random_points(nbv::CounterRng& rng, std::size_t n, double extent) {
  std::vector<nbv::Point3> p;
  for (std::size_t i = 0; i < n; ++i) {
    p.emplace_back(rng.uniform(0.0, extent), rng.uniform(0.0, extent), rng.uniform(0.0, extent));
  }
  return p;
}

inline nbv::PointCloud cloud_of(std::vector<nbv::Point3> pts) {
  nbv::PointCloud c;
  c.points = std::move(pts);
  return c;
}

/// Points on the torus surface (major R in the XY plane, minor r) on a
/// (u, v) grid with roughly the given spacing.
inline std::vector<nbv::Point3> torus_grid(double R, double r, double spacing) {
  const double pi = 3.14159265358979323846;
  const int nu = static_cast<int>(std::ceil(2 * pi * (R + r) / spacing));
  const int nv = static_cast<int>(std::ceil(2 * pi * r / spacing));
  std::vector<nbv::Point3> p;
  for (int a = 0; a < nu; ++a)
    for (int b = 0; b < nv; ++b) {
      const double u = 2 * pi * a / nu, v = 2 * pi * b / nv;
      p.emplace_back((R + r * std::cos(v)) * std::cos(u), (R + r * std::cos(v)) * std::sin(u), r * std::sin(v));
    }
  return p;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("nbv_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
