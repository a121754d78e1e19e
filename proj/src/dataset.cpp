#include "nbv/dataset.hpp"

#include "nbv/config.hpp"
#include "nbv/env.hpp"
#include "nbv/error.hpp"
#include "nbv/ply_io.hpp"
#include "nbv/rng.hpp"

#include <cstdio>
#include <exception>

namespace nbv {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

const ViewEntry& DatasetManifest::view(int view_id) const {
  if (view_id >= 0 && view_id < static_cast<int>(views.size()) && views[static_cast<std::size_t>(view_id)].view_id == view_id) {
    return views[static_cast<std::size_t>(view_id)];
  }
  for (const auto& v : views)
    if (v.view_id == view_id) return v;
  throw IndexOutOfRange("view " + std::to_string(view_id) + " not in dataset " + object);
}

std::uint64_t view_seed(std::uint64_t seed, const std::string& object, int view_id) {
  return stream_key(seed, name_hash(object), static_cast<std::uint64_t>(view_id));
}

namespace {

std::string view_file_name(int view_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "view_%03d.ply", view_id);
  return buf;
}

}  // namespace

DatasetManifest generate_dataset(const TriangleMesh& mesh, const std::string& object, const std::string& kind,
                                 const ActionSpace& space, const SensorModel& sensor, double orbit_radius,
                                 std::uint64_t seed, const fs::path& out_dir, int jobs) {
  space.validate();
  sensor.validate();
  if (!(orbit_radius > 0.0)) throw InvalidParameter("orbit_radius must be positive");
  if (object.empty()) throw InvalidParameter("object name must be non-empty");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError(out_dir.string(), ec.message());

  DatasetManifest m;
  m.object = object;
  m.kind = kind;
  m.seed = seed;
  m.orbit_radius = orbit_radius;
  m.space = space;
  m.sensor = sensor;
  m.directory = out_dir;
  const int count = space.action_count();
  for (int a = 0; a < count; ++a) m.views.push_back({a, action_pose(a, space), view_file_name(a)});

  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
#pragma omp parallel for num_threads(std::max(1, jobs)) schedule(dynamic, 1)
  for (int a = 0; a < count; ++a) {
    try {
      const auto& v = m.views[static_cast<std::size_t>(a)];
      // each capture is single-threaded here; views fan out instead
      const RigidTransform cam = pose_to_transform(v.pose, orbit_radius);
      PointCloud cloud =
          depth_to_cloud(raycast_depth_serial(mesh, cam, sensor), cam, sensor, view_seed(seed, object, a));
      write_ply(out_dir / v.file, cloud);
    } catch (...) {
      errors[static_cast<std::size_t>(a)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<PoseRecord> poses;
  for (const auto& v : m.views) poses.push_back({v.view_id, v.pose});
  write_pose_csv(out_dir / kPoseFile, poses);
  write_text_file(out_dir / kManifestFile, manifest_to_json(m));
  return m;
}

std::string manifest_to_json(const DatasetManifest& m) {
  json j;
  j["object"] = m.object;
  j["kind"] = m.kind;
  j["seed"] = m.seed;
  j["orbit_radius"] = m.orbit_radius;
  j["action_space"] = m.space;
  j["sensor"] = m.sensor;
  j["views"] = json::array();
  for (const auto& v : m.views) {
    j["views"].push_back(json{{"view_id", v.view_id},
                              {"yaw_bucket", v.pose.yaw_bucket},
                              {"pitch_bucket", v.pose.pitch_bucket},
                              {"yaw_ticks", v.pose.yaw_ticks},
                              {"pitch_ticks", v.pose.pitch_ticks},
                              {"file", v.file}});
  }
  return j.dump(2) + "\n";
}

DatasetManifest read_manifest(const fs::path& path_or_dir) {
  const fs::path path = fs::is_directory(path_or_dir) ? path_or_dir / kManifestFile : path_or_dir;
  DatasetManifest m;
  try {
    const json j = json::parse(read_text_file(path));
    m.object = j.at("object").get<std::string>();
    m.kind = j.value("kind", "");
    m.seed = j.at("seed").get<std::uint64_t>();
    m.orbit_radius = j.at("orbit_radius").get<double>();
    m.space = j.at("action_space").get<ActionSpace>();
    m.sensor = j.at("sensor").get<SensorModel>();
    for (const auto& v : j.at("views")) {
      ViewEntry e;
      e.view_id = v.at("view_id").get<int>();
      e.pose = ViewPose::from_ticks(v.at("yaw_ticks").get<int>(), v.at("pitch_ticks").get<int>(), m.space);
      if (e.pose.yaw_bucket != v.at("yaw_bucket").get<int>() || e.pose.pitch_bucket != v.at("pitch_bucket").get<int>()) {
        throw InvalidParameter("view " + std::to_string(e.view_id) + " buckets disagree with its ticks");
      }
      e.file = v.at("file").get<std::string>();
      m.views.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw IoError(path.string(), e.what());
  }
  m.directory = path.parent_path();
  return m;
}

PointCloud load_view(const DatasetManifest& manifest, int view_id) {
  PointCloud cloud = read_ply(manifest.directory / manifest.view(view_id).file);
  cloud.source_view = view_id;
  return cloud;
}

}  // namespace nbv
