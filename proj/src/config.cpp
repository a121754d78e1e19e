#include "nbv/config.hpp"

#include "nbv/error.hpp"
#include "nbv/ply_io.hpp"

namespace nbv {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

template <class T>
void opt(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

void to_json(json& j, const ActionSpace& v) {
  j = json{{"yaw_buckets", v.yaw_buckets}, {"pitch_buckets", v.pitch_buckets}};
}
void from_json(const json& j, ActionSpace& v) {
  opt(j, "yaw_buckets", v.yaw_buckets);
  opt(j, "pitch_buckets", v.pitch_buckets);
}

void to_json(json& j, const SensorModel& v) {
  j = json{{"image_width", v.image_width},
           {"image_height", v.image_height},
           {"horizontal_fov", v.horizontal_fov},
           {"depth_noise_sigma", v.depth_noise_sigma},
           {"dropout_probability", v.dropout_probability},
           {"max_range", v.max_range},
           {"grazing_angle", v.grazing_angle},
           {"min_patches", v.min_patches},
           {"max_patches", v.max_patches},
           {"noise_clip_sigmas", v.noise_clip_sigmas}};
}
void from_json(const json& j, SensorModel& v) {
  opt(j, "image_width", v.image_width);
  opt(j, "image_height", v.image_height);
  opt(j, "horizontal_fov", v.horizontal_fov);
  opt(j, "depth_noise_sigma", v.depth_noise_sigma);
  opt(j, "dropout_probability", v.dropout_probability);
  opt(j, "max_range", v.max_range);
  opt(j, "grazing_angle", v.grazing_angle);
  opt(j, "min_patches", v.min_patches);
  opt(j, "max_patches", v.max_patches);
  opt(j, "noise_clip_sigmas", v.noise_clip_sigmas);
}

void to_json(json& j, const MetricConfig& v) { j = json{{"alpha", v.alpha}, {"radii", v.radii}}; }
void from_json(const json& j, MetricConfig& v) {
  opt(j, "alpha", v.alpha);
  opt(j, "radii", v.radii);
}

void to_json(json& j, const IcpParams& v) {
  j = json{{"max_iterations", v.max_iterations},
           {"convergence_delta", v.convergence_delta},
           {"max_correspondence_dist", v.max_correspondence_dist},
           {"subsample_count", v.subsample_count},
           {"seed", v.seed}};
}
void from_json(const json& j, IcpParams& v) {
  opt(j, "max_iterations", v.max_iterations);
  opt(j, "convergence_delta", v.convergence_delta);
  opt(j, "max_correspondence_dist", v.max_correspondence_dist);
  opt(j, "subsample_count", v.subsample_count);
  opt(j, "seed", v.seed);
}

void to_json(json& j, const TrainConfig& v) {
  j = json{{"batch_size", v.batch_size},
           {"train_batches_per_cycle", v.train_batches_per_cycle},
           {"test_batches_per_cycle", v.test_batches_per_cycle},
           {"cycles", v.cycles},
           {"epsilon_start", v.epsilon_start},
           {"epsilon_end", v.epsilon_end},
           {"epsilon_decay_cycles", v.epsilon_decay_cycles},
           {"learning_rate", v.learning_rate},
           {"momentum", v.momentum},
           {"l2_lambda", v.l2_lambda},
           {"dropout_rate", v.dropout_rate},
           {"leaky_slope", v.leaky_slope},
           {"reward_scale", v.reward_scale},
           {"seed", v.seed}};
}
void from_json(const json& j, TrainConfig& v) {
  opt(j, "batch_size", v.batch_size);
  opt(j, "train_batches_per_cycle", v.train_batches_per_cycle);
  opt(j, "test_batches_per_cycle", v.test_batches_per_cycle);
  opt(j, "cycles", v.cycles);
  opt(j, "epsilon_start", v.epsilon_start);
  opt(j, "epsilon_end", v.epsilon_end);
  opt(j, "epsilon_decay_cycles", v.epsilon_decay_cycles);
  opt(j, "learning_rate", v.learning_rate);
  opt(j, "momentum", v.momentum);
  opt(j, "l2_lambda", v.l2_lambda);
  opt(j, "dropout_rate", v.dropout_rate);
  opt(j, "leaky_slope", v.leaky_slope);
  opt(j, "reward_scale", v.reward_scale);
  opt(j, "seed", v.seed);
}

json object_params_to_json(const ObjectParams& params) {
  json j{{"kind", object_kind_name(params)}};
  std::visit(
      [&j](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, TorusParams> || std::is_same_v<T, TwoTorusParams>) {
          j["major_radius"] = p.major_radius;
          j["minor_radius"] = p.minor_radius;
          j["major_segments"] = p.major_segments;
          j["minor_segments"] = p.minor_segments;
        } else if constexpr (std::is_same_v<T, PlateParams>) {
          j["width"] = p.width;
          j["height"] = p.height;
          j["thickness"] = p.thickness;
          j["hole_count"] = p.hole_count;
          j["hole_radius"] = p.hole_radius;
          j["hole_segments"] = p.hole_segments;
        } else if constexpr (std::is_same_v<T, BoxParams>) {
          j["width"] = p.width;
          j["height"] = p.height;
          j["depth"] = p.depth;
        } else {
          j["scale"] = p.scale;
        }
      },
      params);
  return j;
}

ObjectParams object_params_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "torus" || kind == "two_torus") {
    auto read = [&j](auto p) {
      opt(j, "major_radius", p.major_radius);
      opt(j, "minor_radius", p.minor_radius);
      opt(j, "major_segments", p.major_segments);
      opt(j, "minor_segments", p.minor_segments);
      return p;
    };
    if (kind == "torus") return read(TorusParams{});
    return read(TwoTorusParams{});
  }
  if (kind == "plate_with_holes") {
    PlateParams p;
    opt(j, "width", p.width);
    opt(j, "height", p.height);
    opt(j, "thickness", p.thickness);
    opt(j, "hole_count", p.hole_count);
    opt(j, "hole_radius", p.hole_radius);
    opt(j, "hole_segments", p.hole_segments);
    return p;
  }
  if (kind == "box") {
    BoxParams p;
    opt(j, "width", p.width);
    opt(j, "height", p.height);
    opt(j, "depth", p.depth);
    return p;
  }
  if (kind == "composite") {
    CompositeParams p;
    opt(j, "scale", p.scale);
    return p;
  }
  throw InvalidParameter("unknown object kind '" + kind + "'");
}

RunConfig RunConfig::defaults() {
  RunConfig c;
  c.orbit_radius = 0.15;
  c.voxel = 0.001;
  c.sensor.depth_noise_sigma = 0.0005;
  TorusParams torus;
  torus.major_radius = 0.025;
  torus.minor_radius = 0.007;
  PlateParams plate;
  plate.width = 0.07;
  plate.height = 0.035;
  plate.thickness = 0.006;
  plate.hole_radius = 0.007;
  CompositeParams composite;
  composite.scale = 0.6;
  TwoTorusParams two;
  two.major_radius = 0.018;
  two.minor_radius = 0.005;
  c.objects = {
      {"torus", torus, true},
      {"plate", plate, true},
      {"composite", composite, true},
      {"two_torus", two, false},
  };
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  RunConfig c = defaults();
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw IoError(path.string(), e.what());
  }
  const fs::path base = path.parent_path();
  const auto resolve = [&base](const fs::path& p) { return p.is_absolute() ? p : base / p; };
  try {
    opt(j, "seed", c.seed);
    opt(j, "orbit_radius", c.orbit_radius);
    opt(j, "voxel", c.voxel);
    if (j.contains("data_dir")) c.data_dir = j.at("data_dir").get<std::string>();
    if (j.contains("model")) c.model_path = j.at("model").get<std::string>();
    if (j.contains("learning_curve")) c.learning_curve_path = j.at("learning_curve").get<std::string>();
    opt(j, "action_space", c.space);
    opt(j, "sensor", c.sensor);
    opt(j, "metric", c.metric);
    opt(j, "icp", c.icp);
    opt(j, "train", c.train);
    if (j.contains("objects")) {
      c.objects.clear();
      for (const auto& o : j.at("objects")) {
        ObjectSpec spec;
        spec.name = o.at("name").get<std::string>();
        json params = o.contains("params") ? o.at("params") : json::object();
        params["kind"] = o.at("kind");
        spec.params = object_params_from_json(params);
        opt(o, "train", spec.train);
        c.objects.push_back(std::move(spec));
      }
    }
  } catch (const json::exception& e) {
    throw IoError(path.string(), e.what());
  }
  c.data_dir = resolve(c.data_dir);
  c.model_path = resolve(c.model_path);
  c.learning_curve_path = resolve(c.learning_curve_path);
  c.validate();
  return c;
}

std::string RunConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["orbit_radius"] = orbit_radius;
  j["voxel"] = voxel;
  j["data_dir"] = data_dir.string();
  j["model"] = model_path.string();
  j["learning_curve"] = learning_curve_path.string();
  j["action_space"] = space;
  j["sensor"] = sensor;
  j["metric"] = metric;
  j["icp"] = icp;
  j["train"] = train;
  j["objects"] = json::array();
  for (const auto& o : objects) {
    json params = object_params_to_json(o.params);
    const json kind = params["kind"];
    params.erase("kind");
    j["objects"].push_back(json{{"name", o.name}, {"kind", kind}, {"params", params}, {"train", o.train}});
  }
  return j.dump(2) + "\n";
}

void RunConfig::validate() const {
  if (!(orbit_radius > 0.0)) throw InvalidParameter("orbit_radius must be positive");
  if (!(voxel > 0.0)) throw InvalidParameter("voxel must be positive");
  space.validate();
  sensor.validate();
  metric.validate();
  icp.validate();
  train.validate();
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].name.empty()) throw InvalidParameter("object names must be non-empty");
    for (std::size_t k = 0; k < i; ++k) {
      if (objects[k].name == objects[i].name) throw InvalidParameter("duplicate object name " + objects[i].name);
    }
  }
}

const ObjectSpec& RunConfig::object(const std::string& name) const {
  for (const auto& o : objects)
    if (o.name == name) return o;
  throw InvalidParameter("no object named '" + name + "' in the config");
}

TurParams RunConfig::tur() const {
  TurParams t;
  t.orbit_radius = orbit_radius;
  t.icp = icp;
  t.voxel = voxel;
  return t;
}

}  // namespace nbv
