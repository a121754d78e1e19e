// Serial reference kernels against their OpenMP versions.

#include "nbv/config.hpp"
#include "nbv/sensor_sim.hpp"
#include "nbv/tda.hpp"

#include <benchmark/benchmark.h>

#include <omp.h>

using namespace nbv;

namespace {

const RunConfig& config() {
  static const RunConfig c = RunConfig::defaults();
  return c;
}

const TriangleMesh& mesh() {
  static const TriangleMesh m = make_object(config().object("composite").params);
  return m;
}

RigidTransform camera() { return pose_to_transform(ViewPose::bucket_center(3, 6, config().space), config().orbit_radius); }

// a dense single view, the typical input of the edge enumeration
const std::vector<Point3>& view_points() {
  static const std::vector<Point3> pts =
      voxel_dedup(capture_view(mesh(), ViewPose::bucket_center(3, 6, config().space), config().sensor,
                               config().orbit_radius, 1),
                  config().voxel)
          .points;
  return pts;
}

void BM_RaycastSerial(benchmark::State& state) {
  const auto cam = camera();
  for (auto _ : state) benchmark::DoNotOptimize(raycast_depth_serial(mesh(), cam, config().sensor));
}

void BM_RaycastParallel(benchmark::State& state) {
  omp_set_num_threads(static_cast<int>(state.range(0)));
  const auto cam = camera();
  for (auto _ : state) benchmark::DoNotOptimize(raycast_depth(mesh(), cam, config().sensor));
}

void BM_EdgesSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(enumerate_edges_serial(view_points(), 0.004));
  state.counters["points"] = static_cast<double>(view_points().size());
}

void BM_EdgesParallel(benchmark::State& state) {
  omp_set_num_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(enumerate_edges(view_points(), 0.004));
  state.counters["points"] = static_cast<double>(view_points().size());
}

}  // namespace

BENCHMARK(BM_RaycastSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RaycastParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EdgesSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EdgesParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
