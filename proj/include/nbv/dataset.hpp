#pragma once

#include "nbv/geometry.hpp"
#include "nbv/mesh.hpp"
#include "nbv/sensor_sim.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace nbv {

struct ViewEntry {
  int view_id = 0;
  ViewPose pose;
  std::string file;  // relative to the dataset directory
};

/// On-disk description of one object's capture set.
struct DatasetManifest {
  std::string object;
  std::string kind;
  std::uint64_t seed = 0;
  double orbit_radius = 0.0;
  ActionSpace space;
  SensorModel sensor;
  std::vector<ViewEntry> views;
  std::filesystem::path directory;  // not serialized

  const ViewEntry& view(int view_id) const;
};

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kPoseFile = "poses.csv";

/// Seed of view `view_id` of `object`, independent of capture order.
std::uint64_t view_seed(std::uint64_t seed, const std::string& object, int view_id);

/// Captures one view per action cell at the cell's center pose and writes
/// view_NNN.ply files, poses.csv and manifest.json into out_dir. `jobs`
/// bounds the number of capture threads; the output does not depend on it.
DatasetManifest generate_dataset(const TriangleMesh& mesh, const std::string& object,
                                 const std::string& kind, const ActionSpace& space,
                                 const SensorModel& sensor, double orbit_radius,
                                 std::uint64_t seed, const std::filesystem::path& out_dir,
                                 int jobs = 1);

std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path_or_dir);

/// World-frame cloud of one view.
PointCloud load_view(const DatasetManifest& manifest, int view_id);

}  // namespace nbv
