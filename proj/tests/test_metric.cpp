#include "nbv/error.hpp"
#include "nbv/metric.hpp"
#include "nbv/rng.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace nbv;

namespace {

FiltrationProfile profile_of(std::vector<std::pair<std::int64_t, std::int64_t>> b, std::vector<double> radii) {
  FiltrationProfile p;
  for (std::size_t i = 0; i < b.size(); ++i) p.entries.push_back({radii[i], b[i].first, b[i].second});
  return p;
}

const std::vector<double> kRadii{0.002, 0.003, 0.004};

}  // namespace

TEST_CASE("view value by hand") {
  const MetricConfig m;
  CHECK(m.alpha == 0.15);
  CHECK(m.radii == kRadii);
  const auto p = profile_of({{3, 1}, {2, 2}, {1, 2}}, kRadii);
  CHECK(std::abs(view_value(p, m) - (0.15 * 5 - 0.85 * 6)) < 1e-12);
  CHECK(std::abs(view_value(p, m) + 4.35) < 1e-12);

  MetricConfig only_loops = m;
  only_loops.alpha = 1.0;
  CHECK(view_value(p, only_loops) == 5.0);
  CHECK(view_value(profile_of({{0, 0}, {0, 0}, {0, 0}}, kRadii), m) == 0.0);
}

TEST_CASE("radii mismatch") {
  const MetricConfig m;
  CHECK_THROWS_AS(view_value(profile_of({{1, 0}, {1, 0}}, {0.002, 0.003}), m), RadiiMismatch);
  CHECK_THROWS_AS(view_value(profile_of({{1, 0}, {1, 0}, {1, 0}}, {0.002, 0.003, 0.005}), m), RadiiMismatch);
  MetricConfig bad;
  bad.alpha = 1.5;
  CHECK_THROWS_AS(bad.validate(), InvalidParameter);
}

TEST_CASE("reward arithmetic") {
  CHECK(reward(-4.5, 9.7) == doctest::Approx(14.2).epsilon(1e-12));
  CHECK(reward(-5.3, 14.2) == doctest::Approx(19.5).epsilon(1e-12));
  CounterRng rng(1);
  for (int i = 0; i < 100; ++i) {
    const double v = rng.uniform(-1e3, 1e3);
    CHECK(reward(v, v) == 0.0);
  }
}

TEST_CASE("value is monotone and linear in the profile") {
  CounterRng rng(2);
  MetricConfig m;
  for (int trial = 0; trial < 200; ++trial) {
    m.alpha = rng.uniform(0.01, 0.99);
    auto p = profile_of({{static_cast<std::int64_t>(rng.below(50)), static_cast<std::int64_t>(rng.below(50))},
                         {static_cast<std::int64_t>(rng.below(50)), static_cast<std::int64_t>(rng.below(50))},
                         {static_cast<std::int64_t>(rng.below(50)), static_cast<std::int64_t>(rng.below(50))}},
                        kRadii);
    const double v = view_value(p, m);
    auto more_loops = p;
    more_loops.entries[rng.below(3)].betti1 += 1;
    CHECK(view_value(more_loops, m) > v);
    auto more_parts = p;
    more_parts.entries[rng.below(3)].betti0 += 1;
    CHECK(view_value(more_parts, m) < v);
    CHECK(std::abs(view_value(more_loops, m) - v - m.alpha) < 1e-9);

    // swapping the roles of beta0 and beta1 together with alpha <-> 1 - alpha negates V
    auto swapped = p;
    for (auto& e : swapped.entries) std::swap(e.betti0, e.betti1);
    MetricConfig mirrored = m;
    mirrored.alpha = 1.0 - m.alpha;
    CHECK(std::abs(view_value(swapped, mirrored) + v) < 1e-9);
  }
}

TEST_CASE("two half tori are worth more together") {
  const double R = 0.04, r = 0.01;
  const auto full = oracle::torus_grid(R, r, 0.0015);
  std::vector<Point3> a, b;
  for (const auto& p : full) (std::atan2(p.y(), p.x()) >= 0 ? a : b).push_back(p);
  const MetricConfig m;
  const auto value = [&](const std::vector<Point3>& pts) {
    return view_value(filtration_profile(oracle::cloud_of(pts), m.radii), m);
  };
  const double va = value(a), vb = value(b);
  std::vector<Point3> both = a;
  both.insert(both.end(), b.begin(), b.end());
  const double vab = value(both);
  CHECK(vab > va + vb);
  CHECK(reward(va, vab) > 0.0);
}
