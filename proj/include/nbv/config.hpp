#pragma once

#include "nbv/agent.hpp"
#include "nbv/geometry.hpp"
#include "nbv/mesh.hpp"
#include "nbv/metric.hpp"
#include "nbv/registration.hpp"
#include "nbv/sensor_sim.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace nbv {

// JSON mappings. Missing fields keep their defaults.
void to_json(nlohmann::ordered_json& j, const ActionSpace& v);
void from_json(const nlohmann::ordered_json& j, ActionSpace& v);
void to_json(nlohmann::ordered_json& j, const SensorModel& v);
void from_json(const nlohmann::ordered_json& j, SensorModel& v);
void to_json(nlohmann::ordered_json& j, const MetricConfig& v);
void from_json(const nlohmann::ordered_json& j, MetricConfig& v);
void to_json(nlohmann::ordered_json& j, const IcpParams& v);
void from_json(const nlohmann::ordered_json& j, IcpParams& v);
void to_json(nlohmann::ordered_json& j, const TrainConfig& v);
void from_json(const nlohmann::ordered_json& j, TrainConfig& v);

/// {"kind": "...", ...kind-specific fields}
nlohmann::ordered_json object_params_to_json(const ObjectParams& p);
ObjectParams object_params_from_json(const nlohmann::ordered_json& j);

struct ObjectSpec {
  std::string name;
  ObjectParams params;
  bool train = true;  // false marks a held-out object
};

struct RunConfig {
  std::uint64_t seed = 0;
  double orbit_radius = 0.3;
  double voxel = 0.002;
  std::filesystem::path data_dir = "data";
  std::filesystem::path model_path = "model.json";
  std::filesystem::path learning_curve_path = "learning_curve.csv";
  ActionSpace space;
  SensorModel sensor;
  MetricConfig metric;
  IcpParams icp;
  TrainConfig train;
  std::vector<ObjectSpec> objects;

  /// Built-in desk-scale setup: three training objects and one held out.
  static RunConfig defaults();
  /// Reads a JSON config; relative paths resolve against the file's directory.
  static RunConfig load(const std::filesystem::path& path);
  std::string to_json() const;

  void validate() const;
  const ObjectSpec& object(const std::string& name) const;
  TurParams tur() const;

  std::filesystem::path dataset_dir(const std::string& object) const { return data_dir / object; }
  std::filesystem::path cache_path(const std::string& object) const { return data_dir / object / "cache.jsonl"; }
};

}  // namespace nbv
