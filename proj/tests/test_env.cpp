#include "nbv/dataset.hpp"
#include "nbv/env.hpp"
#include "nbv/error.hpp"
#include "nbv/mesh.hpp"
#include "nbv/ply_io.hpp"
#include "nbv/rng.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

using namespace nbv;
namespace fs = std::filesystem;

namespace {

struct SmallWorld {
  fs::path dir;
  DatasetManifest manifest;
  MetricConfig metric;
  TurParams tur;
};

// 6 x 4 grid of low-resolution views of the torus: 24 views, 276 pairs.
const SmallWorld& small_world() {
  static const SmallWorld w = [] {
    SmallWorld s;
    s.dir = oracle::scratch_dir("env");
    SensorModel sensor;
    sensor.image_width = 64;
    sensor.image_height = 48;
    s.manifest = generate_dataset(make_object(TorusParams{}), "torus", "torus", ActionSpace{6, 4}, sensor, 0.2, 3,
                                  s.dir / "torus");
    return s;
  }();
  return w;
}

std::vector<std::string> sorted_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  std::sort(lines.begin(), lines.end());
  return lines;
}

}  // namespace

TEST_CASE("action index layout") {
  const ActionSpace space;
  CHECK(action_index(0, 0, space) == 0);
  CHECK(decompose_action(0, space) == std::pair{0, 0});
  CHECK(action_index(19, 9, space) == 199);
  for (int a = 0; a < space.action_count(); ++a) {
    const auto [y, p] = decompose_action(a, space);
    CHECK(action_index(y, p, space) == a);
    const auto pose = action_pose(a, space);
    CHECK(pose.yaw_bucket == y);
    CHECK(pose.pitch_bucket == p);
  }
  CHECK_THROWS_AS(action_index(20, 0, space), IndexOutOfRange);
  CHECK_THROWS_AS(decompose_action(200, space), IndexOutOfRange);
}

TEST_CASE("observation layout") {
  const ActionSpace space;
  FiltrationProfile zero;
  zero.entries = {{0.002, 0, 0}, {0.003, 0, 0}, {0.004, 0, 0}};
  const auto z = build_observation(zero, ViewPose::bucket_center(0, 0, space), space);
  CHECK(z.features == std::vector<double>(8, 0.0));
  CHECK(observation_size(3) == 8);

  FiltrationProfile p;
  p.entries = {{0.002, 3, 1}, {0.003, 2, 2}, {0.004, 1, 2}};
  const auto a = build_observation(p, ViewPose::bucket_center(10, 5, space), space);
  const std::vector<double> expected{0.03, 0.01, 0.02, 0.02, 0.01, 0.02, 0.5, 0.5};
  REQUIRE(a.features.size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) CHECK(a.features[i] == doctest::Approx(expected[i]).epsilon(1e-15));

  const auto b = build_observation(p, ViewPose::bucket_center(3, 7, space), space);
  for (std::size_t i = 0; i < 6; ++i) CHECK(a.features[i] == b.features[i]);
  CHECK(a.features[6] != b.features[6]);
  CHECK(a.features[7] != b.features[7]);
}

TEST_CASE("cache text round trip and torn final line") {
  BettiCache c;
  FiltrationProfile p;
  p.entries = {{0.002, 3, 1}, {0.003, 2, 2}, {0.004, 1, 2}};
  c.singles[0] = {p, -4.35};
  c.singles[1] = {p, -4.35};
  c.pairs[{0, 1}] = {p, -4.35};
  const auto dir = oracle::scratch_dir("cache_io");
  c.save(dir / "c.jsonl");
  const auto text = read_text_file(dir / "c.jsonl");
  CHECK(text.rfind(R"({"key":"s:0","radii":[0.002,0.003,0.004],"betti0":[3,2,1],"betti1":[1,2,2],"value":-4.35})", 0) == 0);
  const auto back = BettiCache::load(dir / "c.jsonl");
  CHECK(back.serialize() == text);
  CHECK(back.pair(1, 0).value == -4.35);
  CHECK(BettiCache::canonical(7, 2) == BettiCache::PairKey{2, 7});

  write_text_file(dir / "torn.jsonl", text + R"({"key":"p:0:)");
  CHECK(BettiCache::load(dir / "torn.jsonl").serialize() == text);
  write_text_file(dir / "bad.jsonl", "garbage\n" + text);
  CHECK_THROWS_AS(BettiCache::load(dir / "bad.jsonl"), IoError);
  CHECK_THROWS_AS(BettiCache::load(dir / "missing.jsonl"), IoError);
  CHECK_THROWS_AS(c.pair(0, 5), MissingCacheEntry);

  MetricConfig other;
  other.alpha = 0.5;
  CHECK_THROWS_AS(c.check_metric(other), InvalidParameter);
  CHECK_NOTHROW(c.check_metric(MetricConfig{}));
}

TEST_CASE("precompute covers every single and pair, resumes and ignores job count") {
  const auto& w = small_world();
  const auto path = w.dir / "full.jsonl";
  const auto cache = precompute_cache(w.manifest, w.metric, w.tur, path, {.jobs = 2});
  CHECK(cache.singles.size() == 24);
  CHECK(cache.pairs.size() == 24 * 23 / 2);
  for (const auto& [key, e] : cache.pairs) CHECK(key.first < key.second);

  // rebuilt from scratch with one job: byte-identical
  const auto path1 = w.dir / "serial.jsonl";
  precompute_cache(w.manifest, w.metric, w.tur, path1, {.jobs = 1});
  CHECK(read_text_file(path1) == read_text_file(path));

  // interrupted after 50 pairs, then resumed
  const auto staged = w.dir / "staged.jsonl";
  PrecomputeOptions first{.jobs = 1, .max_new_pairs = 50, .chunk_size = 7};
  CHECK(precompute_cache(w.manifest, w.metric, w.tur, staged, first).pairs.size() == 50);
  {
    std::ofstream torn(staged, std::ios::app);
    torn << R"({"key":"p:3)";
  }
  precompute_cache(w.manifest, w.metric, w.tur, staged, {.jobs = 3});
  CHECK(read_text_file(staged) == read_text_file(path));
  CHECK(sorted_lines(read_text_file(staged)) == sorted_lines(read_text_file(path)));
}

TEST_CASE("cached values equal recomputation from the views") {
  const auto& w = small_world();
  const auto cache = BettiCache::load(w.dir / "full.jsonl");
  CounterRng rng(12);
  for (int k = 0; k < 10; ++k) {
    const int a = static_cast<int>(rng.below(24));
    int b = static_cast<int>(rng.below(23));
    if (b >= a) ++b;
    const int lo = std::min(a, b), hi = std::max(a, b);
    const std::vector<PointCloud> views{load_view(w.manifest, lo), load_view(w.manifest, hi)};
    const auto merged = tur_merge_world(views, w.tur).merged;
    const double v = view_value(filtration_profile(merged, w.metric.radii), w.metric);
    CHECK(std::abs(cache.pair(a, b).value - v) < 1e-9);
    const double single = view_value(
        filtration_profile(voxel_dedup(load_view(w.manifest, a), w.tur.voxel), w.metric.radii), w.metric);
    CHECK(std::abs(env_step(a, b, cache) - (v - single)) < 1e-9);
  }
}

TEST_CASE("env step identities and cache coverage") {
  const auto& w = small_world();
  const auto cache = BettiCache::load(w.dir / "full.jsonl");
  for (int i = 0; i < 24; ++i) {
    CHECK(env_step(i, i, cache) == 0.0);
    for (int j = 0; j < 24; ++j) {
      const double lhs = env_step(i, j, cache);
      const double rhs = env_step(j, i, cache) + (cache.single(j).value - cache.single(i).value);
      CHECK(std::abs(lhs - rhs) < 1e-9);
    }
  }
  CacheAccessLog log;
  for (int i = 0; i < 24; ++i) CHECK(reward_vector(i, 24, cache, &log).size() == 24);
  CHECK(log.singles.size() == 24);
  CHECK(log.pairs.size() == 276);
  CHECK_THROWS_AS(env_step(0, 30, cache), MissingCacheEntry);
}
