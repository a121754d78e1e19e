// nbv: dataset capture, Betti cache, training and next-best-view queries.

#include "nbv/agent.hpp"
#include "nbv/config.hpp"
#include "nbv/dataset.hpp"
#include "nbv/env.hpp"
#include "nbv/error.hpp"
#include "nbv/metric.hpp"
#include "nbv/ply_io.hpp"
#include "nbv/registration.hpp"
#include "nbv/tda.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace nbv;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

RunConfig load_config(const Globals& g) {
  RunConfig c = g.config_path.empty() ? RunConfig::defaults() : RunConfig::load(g.config_path);
  if (g.seed) {
    c.seed = *g.seed;
    c.train.seed = *g.seed;
  }
  c.validate();
  return c;
}

std::vector<std::string> object_names(const RunConfig& c, const std::string& only) {
  if (!only.empty()) return {c.object(only).name};
  std::vector<std::string> names;
  for (const auto& o : c.objects) names.push_back(o.name);
  return names;
}

TrainingObject load_training_object(const RunConfig& c, const std::string& name) {
  const DatasetManifest m = read_manifest(c.dataset_dir(name));
  const BettiCache cache = BettiCache::load(c.cache_path(name));
  cache.check_metric(c.metric);
  return make_training_object(name, m, cache);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json cell_json(int action, const ActionSpace& space) {
  const auto [yaw, pitch] = decompose_action(action, space);
  return json{{"action", action}, {"yaw_bucket", yaw}, {"pitch_bucket", pitch}};
}

// ---------------------------------------------------------------------------

int cmd_capture(const Globals& g, const std::string& only) {
  const RunConfig c = load_config(g);
  for (const auto& name : object_names(c, only)) {
    const ObjectSpec& spec = c.object(name);
    const TriangleMesh mesh = make_object(spec.params);
    const fs::path dir = c.dataset_dir(name);
    generate_dataset(mesh, name, object_kind_name(spec.params), c.space, c.sensor, c.orbit_radius, c.seed, dir,
                     g.jobs);
    std::cout << (dir / kManifestFile).string() << "\n";
  }
  return 0;
}

int cmd_precompute(const Globals& g, const std::string& only, std::optional<std::size_t> max_pairs, bool quiet) {
  const RunConfig c = load_config(g);
  for (const auto& name : object_names(c, only)) {
    const DatasetManifest m = read_manifest(c.dataset_dir(name));
    PrecomputeOptions opt;
    opt.jobs = g.jobs;
    if (max_pairs) opt.max_new_pairs = *max_pairs;
    const auto start = std::chrono::steady_clock::now();
    if (!quiet) {
      opt.progress = [&name, start](std::size_t done, std::size_t total) {
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::fprintf(stderr, "\r%s: %zu/%zu pairs (%.0f s)", name.c_str(), done, total, s);
        if (done == total) std::fputc('\n', stderr);
      };
    }
    const BettiCache cache = precompute_cache(m, c.metric, c.tur(), c.cache_path(name), opt);
    std::cout << c.cache_path(name).string() << " " << cache.singles.size() << " singles " << cache.pairs.size()
              << " pairs\n";
  }
  return 0;
}

int cmd_merge(const Globals& g, const std::string& dataset, const std::vector<int>& ids, const std::string& out) {
  const RunConfig c = load_config(g);
  if (ids.empty()) throw InvalidParameter("no views given");
  const DatasetManifest m = read_manifest(dataset);
  std::vector<PointCloud> views;
  for (const int id : ids) views.push_back(load_view(m, id));
  TurParams tur = c.tur();
  tur.orbit_radius = m.orbit_radius;
  const TurResult r = tur_merge_world(views, tur);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  write_ply(out, r.merged);
  std::cout << out << " " << r.merged.size() << " points\n";
  return 0;
}

int cmd_betti(const Globals& g, const std::string& ply, bool dedup) {
  const RunConfig c = load_config(g);
  PointCloud cloud = read_ply(ply);
  if (dedup) cloud = voxel_dedup(cloud, c.voxel);
  const FiltrationProfile p = filtration_profile(cloud, c.metric.radii);
  json j = json::parse(p.to_json());
  j["points"] = cloud.size();
  j["value"] = view_value(p, c.metric);
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_train(const Globals& g) {
  const RunConfig c = load_config(g);
  std::vector<TrainingObject> objects;
  for (const auto& o : c.objects)
    if (o.train) objects.push_back(load_training_object(c, o.name));
  if (objects.empty()) throw InvalidParameter("no objects marked for training");
  const TrainResult r = train(objects, c.train, [](const CycleStats& s) {
    std::fprintf(stderr, "cycle %d eps %.3f loss %.5f train %.4f test %.4f\n", s.cycle, s.epsilon, s.mean_train_loss,
                 s.mean_train_reward, s.mean_test_reward);
  });
  r.net.save(c.model_path);
  write_text_file(c.learning_curve_path, learning_curve_csv(r.curve));
  json j;
  j["model"] = c.model_path.string();
  j["learning_curve"] = c.learning_curve_path.string();
  j["cycles"] = r.curve.size();
  j["final_mean_test_reward"] = r.curve.empty() ? 0.0 : r.curve.back().mean_test_reward;
  j["random_policy_reward"] = r.random_policy_reward;
  j["greedy_mean_reward"] = greedy_mean_reward(r.net, objects);
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_eval(const Globals& g, const std::string& only, const std::string& model) {
  const RunConfig c = load_config(g);
  const ActionValueNet net = ActionValueNet::load(model.empty() ? c.model_path : fs::path(model));
  json out = json::array();
  for (const auto& name : object_names(c, only)) {
    json row{{"object", name}, {"train", c.object(name).train}};
    AngleStats angles;
    if (fs::exists(c.cache_path(name))) {
      const TrainingObject obj = load_training_object(c, name);
      const PolicyEvaluation e = evaluate_policy(net, obj, c.space);
      row["mean_greedy_reward"] = e.mean_greedy_reward;
      row["mean_random_reward"] = e.mean_random_reward;
      row["mean_best_reward"] = e.mean_best_reward;
      row["mean_regret"] = e.mean_regret;
      row["mean_random_regret"] = e.mean_random_regret;
      angles = e.angles;
    } else {
      // no cache: predictions only, from fresh single-view profiles
      const DatasetManifest m = read_manifest(c.dataset_dir(name));
      std::vector<Observation> obs;
      for (const auto& v : m.views)
        obs.push_back(build_observation(single_view_profile(load_view(m, v.view_id), c.metric, c.voxel), v.pose, m.space));
      angles = nbv_angle_stats(greedy_actions(net, obs), m.space);
    }
    row["mean_angle_deg"] = angles.mean_deg;
    row["std_angle_deg"] = angles.std_deg;
    row["frac_within_10deg_of_initial"] = angles.frac_near_initial;
    row["frac_within_10deg_of_antipode"] = angles.frac_near_antipode;
    out.push_back(row);
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

struct Query {
  std::string object;
  std::string model;
  int yaw = 0;
  int pitch = 0;
};

struct QueryResult {
  RunConfig config;
  int initial = 0;
  NbvPrediction prediction;
  std::optional<std::vector<double>> true_rewards;
};

QueryResult run_query(const Globals& g, const Query& q) {
  QueryResult r{load_config(g), 0, {}, std::nullopt};
  const RunConfig& c = r.config;
  const ActionValueNet net = ActionValueNet::load(q.model.empty() ? c.model_path : fs::path(q.model));
  const DatasetManifest m = read_manifest(c.dataset_dir(q.object));
  r.initial = action_index(q.yaw, q.pitch, m.space);
  const ViewEntry& view = m.view(r.initial);

  std::optional<BettiCache> cache;
  if (fs::exists(c.cache_path(q.object))) cache = BettiCache::load(c.cache_path(q.object));
  FiltrationProfile profile;
  if (cache && cache->singles.contains(r.initial)) {
    profile = cache->single(r.initial).profile;
  } else {
    profile = single_view_profile(load_view(m, r.initial), c.metric, c.voxel);
  }
  r.prediction = predict_nbv(net, build_observation(profile, view.pose, m.space));
  if (cache && cache->pairs.size() + 1 >= static_cast<std::size_t>(m.space.action_count())) {
    try {
      r.true_rewards = reward_vector(r.initial, m.space.action_count(), *cache);
    } catch (const MissingCacheEntry&) {
      r.true_rewards.reset();
    }
  }
  return r;
}

int cmd_nbv(const Globals& g, const Query& q, bool as_json) {
  const QueryResult r = run_query(g, q);
  const ActionSpace& space = r.config.space;
  const int a = r.prediction.action;
  json j;
  j["object"] = q.object;
  j["initial"] = cell_json(r.initial, space);
  j["nbv"] = cell_json(a, space);
  j["predicted_reward"] = r.prediction.values[static_cast<std::size_t>(a)];
  j["angle_deg"] = angular_difference_deg(action_pose(r.initial, space), action_pose(a, space));
  if (r.true_rewards) {
    const auto& t = *r.true_rewards;
    const int best = argmax(t);
    j["true_reward"] = t[static_cast<std::size_t>(a)];
    j["best"] = cell_json(best, space);
    j["best_reward"] = t[static_cast<std::size_t>(best)];
    j["regret"] = t[static_cast<std::size_t>(best)] - t[static_cast<std::size_t>(a)];
  }
  if (as_json) {
    std::cout << j.dump() << "\n";
    return 0;
  }
  std::cout << "initial  yaw " << q.yaw << " pitch " << q.pitch << "\n"
            << "nbv      yaw " << j["nbv"]["yaw_bucket"] << " pitch " << j["nbv"]["pitch_bucket"] << " (action " << a
            << ")\n"
            << "predicted reward " << fmt(j["predicted_reward"].get<double>()) << "\n";
  if (r.true_rewards) {
    std::cout << "true reward " << fmt(j["true_reward"].get<double>()) << ", best " << fmt(j["best_reward"].get<double>())
              << " at action " << j["best"]["action"] << ", regret " << fmt(j["regret"].get<double>()) << "\n";
  }
  return 0;
}

int cmd_heatmap(const Globals& g, const Query& q, const std::string& prefix) {
  const QueryResult r = run_query(g, q);
  const ActionSpace& space = r.config.space;
  const auto& v = r.prediction.values;
  const double lo = *std::min_element(v.begin(), v.end());
  const double hi = *std::max_element(v.begin(), v.end());

  std::string csv;
  std::string pgm = "P5\n" + std::to_string(space.pitch_buckets) + " " + std::to_string(space.yaw_buckets) + "\n255\n";
  for (int yaw = 0; yaw < space.yaw_buckets; ++yaw) {
    for (int pitch = 0; pitch < space.pitch_buckets; ++pitch) {
      const double x = v[static_cast<std::size_t>(action_index(yaw, pitch, space))];
      csv += (pitch ? "," : "") + fmt(x);
      const double t = hi > lo ? (x - lo) / (hi - lo) : 0.0;
      pgm.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * t))));
    }
    csv += "\n";
  }
  json side;
  side["object"] = q.object;
  side["rows"] = "yaw_bucket";
  side["columns"] = "pitch_bucket";
  side["initial"] = cell_json(r.initial, space);
  side["argmax"] = cell_json(r.prediction.action, space);
  side["min"] = lo;
  side["max"] = hi;

  write_text_file(prefix + ".csv", csv);
  write_text_file(prefix + ".pgm", pgm);
  write_text_file(prefix + ".json", side.dump(2) + "\n");
  std::cout << prefix << ".csv " << prefix << ".pgm " << prefix << ".json\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Topological next-best-view planning on simulated depth captures"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("-c,--config", g.config_path, "JSON run config (built-in defaults when omitted)")
      ->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Seed for capture and training");
  app.add_option("-j,--jobs", g.jobs, "Worker threads for capture and precompute")->check(CLI::PositiveNumber);

  std::string object, model, dataset, ply, out, prefix = "heatmap";
  std::vector<int> views;
  std::size_t max_pairs = 0;
  bool as_json = false, quiet = false, no_dedup = false;
  Query q;

  auto* capture = app.add_subcommand("capture", "Render one view per action cell into <data_dir>/<object>");
  capture->add_option("-o,--object", object, "Object name (all objects when omitted)");

  auto* precompute = app.add_subcommand("precompute", "Build or resume the Betti cache of a captured dataset");
  precompute->add_option("-o,--object", object, "Object name (all objects when omitted)");
  auto* max_pairs_opt = precompute->add_option("--max-pairs", max_pairs, "Stop after this many new pairs");
  precompute->add_flag("-q,--quiet", quiet, "No progress output");

  auto* merge = app.add_subcommand("merge", "TUR-merge views of a dataset into one PLY");
  merge->add_option("-d,--dataset", dataset, "Dataset directory or manifest")->required();
  merge->add_option("-v,--views", views, "View ids, merged in the given order")->required()->delimiter(',');
  merge->add_option("--out", out, "Output PLY")->required();

  auto* betti = app.add_subcommand("betti", "Filtration profile of a PLY cloud");
  betti->add_option("ply", ply, "Input PLY")->required()->check(CLI::ExistingFile);
  betti->add_flag("--no-dedup", no_dedup, "Skip voxel deduplication");

  auto* train_cmd = app.add_subcommand("train", "Train the action-value network on the training objects");

  auto* eval = app.add_subcommand("eval", "Score the greedy policy against the cached rewards");
  eval->add_option("-o,--object", object, "Object name (all objects when omitted)");
  eval->add_option("-m,--model", model, "Model file (config default when omitted)");

  const auto add_query = [&q](CLI::App* sub) {
    sub->add_option("-o,--object", q.object, "Object name")->required();
    sub->add_option("-m,--model", q.model, "Model file (config default when omitted)");
    sub->add_option("--yaw", q.yaw, "Initial yaw bucket")->required();
    sub->add_option("--pitch", q.pitch, "Initial pitch bucket")->required();
  };
  auto* nbv_cmd = app.add_subcommand("nbv", "Predict the next best view from one initial view");
  add_query(nbv_cmd);
  nbv_cmd->add_flag("--json", as_json, "Machine-readable report");

  auto* heatmap = app.add_subcommand("heatmap", "Write the predicted reward grid as CSV, PGM and JSON");
  add_query(heatmap);
  heatmap->add_option("--out", prefix, "Output path prefix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  if (*seed_opt) g.seed = seed;
  omp_set_num_threads(g.jobs);

  try {
    if (*capture) return cmd_capture(g, object);
    if (*precompute)
      return cmd_precompute(g, object, *max_pairs_opt ? std::optional<std::size_t>(max_pairs) : std::nullopt, quiet);
    if (*merge) return cmd_merge(g, dataset, views, out);
    if (*betti) return cmd_betti(g, ply, !no_dedup);
    if (*train_cmd) return cmd_train(g);
    if (*eval) return cmd_eval(g, object, model);
    if (*nbv_cmd) return cmd_nbv(g, q, as_json);
    if (*heatmap) return cmd_heatmap(g, q, prefix);
  } catch (const IoError& e) {
    std::cerr << "nbv: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "nbv: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
