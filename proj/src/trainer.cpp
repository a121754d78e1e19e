#include "nbv/agent.hpp"

#include "nbv/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace nbv {

using Matrix = ActionValueNet::Matrix;

void TrainConfig::validate() const {
  if (batch_size < 1) throw InvalidParameter("batch_size must be at least 1");
  if (train_batches_per_cycle < 0 || test_batches_per_cycle < 0 || cycles < 0) {
    throw InvalidParameter("batch and cycle counts must be non-negative");
  }
  const auto unit = [](double e) { return e >= 0.0 && e <= 1.0; };
  if (!unit(epsilon_start) || !unit(epsilon_end)) throw InvalidParameter("epsilon must lie in [0, 1]");
  if (!(learning_rate > 0.0)) throw InvalidParameter("learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidParameter("momentum must lie in [0, 1)");
  if (!(l2_lambda >= 0.0)) throw InvalidParameter("l2_lambda must be non-negative");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw InvalidParameter("dropout_rate must lie in [0, 1)");
  if (!(leaky_slope >= 0.0)) throw InvalidParameter("leaky_slope must be non-negative");
}

double TrainConfig::epsilon_at(int cycle) const {
  const int decay = epsilon_decay_cycles > 0 ? epsilon_decay_cycles
                                             : std::max(1, static_cast<int>(std::lround(0.8 * cycles)));
  const double t = std::clamp(static_cast<double>(cycle) / decay, 0.0, 1.0);
  return epsilon_start + (epsilon_end - epsilon_start) * t;
}

double train_step(ActionValueNet& net, SgdMomentum& optimizer, const Matrix& x, const Matrix& rewards,
                  const TrainConfig& config, std::uint64_t dropout_key, bool use_dropout) {
  const Matrix targets = rewards / net.output_scale();
  ActionValueNet::Gradients grads;
  ActionValueNet::BatchStats stats;
  const double loss = net.loss_and_gradients(x, targets, config.l2_lambda, grads, use_dropout, dropout_key, &stats);
  if (!std::isfinite(loss)) throw NonFiniteLoss("training loss is not finite");
  optimizer.step(net, grads);
  net.update_running_stats(stats);
  if (!net.all_finite()) throw NonFiniteLoss("network parameters became non-finite");
  return loss;
}

int argmax(std::span<const double> values) {
  if (values.empty()) throw InvalidParameter("argmax of an empty vector");
  // max_element returns the first maximum
  return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

int select_action(std::span<const double> values, double epsilon, CounterRng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw InvalidParameter("epsilon must lie in [0, 1]");
  if (epsilon > 0.0 && rng.uniform() < epsilon) return static_cast<int>(rng.below(values.size()));
  return argmax(values);
}

TrainingObject make_training_object(const std::string& name, const DatasetManifest& manifest,
                                    const BettiCache& cache) {
  TrainingObject obj;
  obj.name = name;
  const int actions = manifest.space.action_count();
  for (std::size_t i = 0; i < manifest.views.size(); ++i) {
    const auto& v = manifest.views[i];
    if (v.view_id != static_cast<int>(i)) throw InvalidParameter("manifest view ids must be 0..n-1 in order");
    obj.observations.push_back(build_observation(cache.single(v.view_id).profile, v.pose, manifest.space));
    obj.rewards.push_back(reward_vector(v.view_id, actions, cache));
  }
  return obj;
}

std::vector<int> greedy_actions(const ActionValueNet& net, std::span<const Observation> observations) {
  Matrix x(static_cast<Eigen::Index>(observations.size()), net.input_size());
  for (std::size_t v = 0; v < observations.size(); ++v) {
    const auto& f = observations[v].features;
    if (static_cast<int>(f.size()) != net.input_size()) throw ShapeMismatch("observation length mismatch");
    for (int c = 0; c < net.input_size(); ++c) x(static_cast<Eigen::Index>(v), c) = f[static_cast<std::size_t>(c)];
  }
  const Matrix values = net.forward(x, Mode::eval);
  std::vector<int> actions(observations.size());
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    const Eigen::RowVectorXd row = values.row(r);
    actions[static_cast<std::size_t>(r)] = argmax(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
  }
  return actions;
}

AngleStats nbv_angle_stats(std::span<const int> actions, const ActionSpace& space) {
  AngleStats s;
  if (actions.empty()) return s;
  std::vector<double> angles;
  for (std::size_t v = 0; v < actions.size(); ++v) {
    const double a = angular_difference_deg(action_pose(static_cast<int>(v), space), action_pose(actions[v], space));
    angles.push_back(a);
    if (a < 10.0) s.frac_near_initial += 1.0;
    if (a > 170.0) s.frac_near_antipode += 1.0;
  }
  const double n = static_cast<double>(angles.size());
  for (const double a : angles) s.mean_deg += a;
  s.mean_deg /= n;
  for (const double a : angles) s.std_deg += (a - s.mean_deg) * (a - s.mean_deg);
  s.std_deg = std::sqrt(s.std_deg / n);
  s.frac_near_initial /= n;
  s.frac_near_antipode /= n;
  return s;
}

namespace {

struct Sample {
  std::size_t object;
  std::size_t view;
};

void check_objects(const std::vector<TrainingObject>& objects) {
  if (objects.empty()) throw InvalidParameter("no training objects");
  const std::size_t features = objects.front().observations.empty() ? 0 : objects.front().observations[0].features.size();
  const std::size_t actions = objects.front().rewards.empty() ? 0 : objects.front().rewards[0].size();
  for (const auto& o : objects) {
    if (o.observations.empty() || o.observations.size() != o.rewards.size()) {
      throw InvalidParameter("training object " + o.name + " has no views or mismatched rewards");
    }
    for (std::size_t v = 0; v < o.observations.size(); ++v) {
      if (o.observations[v].features.size() != features || o.rewards[v].size() != actions) {
        throw ShapeMismatch("training object " + o.name + " differs in observation or action count");
      }
    }
  }
  if (features == 0 || actions == 0) throw InvalidParameter("empty observations or reward vectors");
}

double reward_std(const std::vector<TrainingObject>& objects) {
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const auto& o : objects)
    for (const auto& row : o.rewards)
      for (const double r : row) {
        sum += r;
        sq += r * r;
        ++n;
      }
  const double mean = sum / static_cast<double>(n);
  const double var = std::max(0.0, sq / static_cast<double>(n) - mean * mean);
  return var > 0.0 ? std::sqrt(var) : 1.0;
}

}  // namespace

TrainResult train(const std::vector<TrainingObject>& objects, const TrainConfig& config,
                  const std::function<void(const CycleStats&)>& on_cycle) {
  config.validate();
  check_objects(objects);
  const int input = static_cast<int>(objects.front().observations[0].features.size());
  const int actions = static_cast<int>(objects.front().rewards[0].size());

  NetOptions options;
  options.leaky_slope = config.leaky_slope;
  options.dropout_rate = config.dropout_rate;
  TrainResult result{ActionValueNet(input, actions, options), {}, random_mean_reward(objects)};
  ActionValueNet& net = result.net;
  net.initialize(config.seed);
  net.set_output_scale(config.reward_scale > 0.0 ? config.reward_scale : reward_std(objects));
  SgdMomentum optimizer(config.learning_rate, config.momentum);

  std::vector<Sample> samples;
  for (std::size_t o = 0; o < objects.size(); ++o)
    for (std::size_t v = 0; v < objects[o].observations.size(); ++v) samples.push_back({o, v});

  CounterRng sampler(stream_key(config.seed, name_hash("train-sampler")));
  CounterRng policy(stream_key(config.seed, name_hash("train-policy")));
  const auto batch = static_cast<Eigen::Index>(config.batch_size);
  Matrix x(batch, input);
  Matrix y(batch, actions);

  for (int cycle = 0; cycle < config.cycles; ++cycle) {
    CycleStats stats;
    stats.cycle = cycle;
    stats.epsilon = config.epsilon_at(cycle);

    double loss_sum = 0.0, reward_sum = 0.0;
    for (int b = 0; b < config.train_batches_per_cycle; ++b) {
      std::vector<Sample> picked(static_cast<std::size_t>(batch));
      for (Eigen::Index r = 0; r < batch; ++r) {
        const Sample s = samples[sampler.below(samples.size())];
        picked[static_cast<std::size_t>(r)] = s;
        const auto& f = objects[s.object].observations[s.view].features;
        const auto& rw = objects[s.object].rewards[s.view];
        for (int c = 0; c < input; ++c) x(r, c) = f[static_cast<std::size_t>(c)];
        for (int a = 0; a < actions; ++a) y(r, a) = rw[static_cast<std::size_t>(a)];
      }
      // The behaviour policy only decides which reward the agent would have
      // collected; the regression target is the full reward vector.
      const Matrix values = net.forward(x, Mode::eval);
      for (Eigen::Index r = 0; r < batch; ++r) {
        const Eigen::RowVectorXd row = values.row(r);
        const int a = select_action(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())),
                                    stats.epsilon, policy);
        const Sample s = picked[static_cast<std::size_t>(r)];
        reward_sum += objects[s.object].rewards[s.view][static_cast<std::size_t>(a)];
      }
      const std::uint64_t key = stream_key(config.seed, name_hash("dropout"), static_cast<std::uint64_t>(cycle),
                                           static_cast<std::uint64_t>(b));
      loss_sum += train_step(net, optimizer, x, y, config, key);
    }
    if (config.train_batches_per_cycle > 0) {
      const double n = static_cast<double>(config.train_batches_per_cycle);
      stats.mean_train_loss = loss_sum / n;
      stats.mean_train_reward = reward_sum / (n * static_cast<double>(batch));
    }

    // Greedy test pass; the net is frozen, so each view's choice is computed once.
    std::vector<std::vector<int>> greedy;
    for (const auto& o : objects) greedy.push_back(greedy_actions(net, o.observations));
    double test_sum = 0.0;
    const std::size_t test_samples = static_cast<std::size_t>(config.test_batches_per_cycle) * static_cast<std::size_t>(batch);
    for (std::size_t i = 0; i < test_samples; ++i) {
      const Sample s = samples[sampler.below(samples.size())];
      test_sum += objects[s.object].rewards[s.view][static_cast<std::size_t>(greedy[s.object][s.view])];
    }
    if (test_samples > 0) stats.mean_test_reward = test_sum / static_cast<double>(test_samples);

    result.curve.push_back(stats);
    if (on_cycle) on_cycle(stats);
  }
  return result;
}

double greedy_mean_reward(const ActionValueNet& net, const std::vector<TrainingObject>& objects) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& o : objects) {
    const auto actions = greedy_actions(net, o.observations);
    for (std::size_t v = 0; v < actions.size(); ++v) {
      sum += o.rewards[v][static_cast<std::size_t>(actions[v])];
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

double random_mean_reward(const std::vector<TrainingObject>& objects) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& o : objects)
    for (const auto& row : o.rewards) {
      double s = 0.0;
      for (const double r : row) s += r;
      sum += s / static_cast<double>(row.size());
      ++n;
    }
  return n ? sum / static_cast<double>(n) : 0.0;
}

NbvPrediction predict_nbv(const ActionValueNet& net, const Observation& observation) {
  if (static_cast<int>(observation.features.size()) != net.input_size()) {
    throw ShapeMismatch("observation length " + std::to_string(observation.features.size()) +
                        " but network expects " + std::to_string(net.input_size()));
  }
  Matrix x(1, net.input_size());
  for (int c = 0; c < net.input_size(); ++c) x(0, c) = observation.features[static_cast<std::size_t>(c)];
  const Matrix out = net.forward(x, Mode::eval) * net.output_scale();
  NbvPrediction p;
  p.values.assign(out.data(), out.data() + out.size());
  p.action = argmax(p.values);
  return p;
}

PolicyEvaluation evaluate_policy(const ActionValueNet& net, const TrainingObject& object, const ActionSpace& space) {
  PolicyEvaluation e;
  e.actions = greedy_actions(net, object.observations);
  const std::size_t n = e.actions.size();
  if (n == 0) return e;
  for (std::size_t v = 0; v < n; ++v) {
    const auto& rw = object.rewards[v];
    const double best = *std::max_element(rw.begin(), rw.end());
    double mean = 0.0;
    for (const double r : rw) mean += r;
    mean /= static_cast<double>(rw.size());
    const double chosen = rw[static_cast<std::size_t>(e.actions[v])];
    e.mean_greedy_reward += chosen;
    e.mean_random_reward += mean;
    e.mean_best_reward += best;
    e.mean_regret += best - chosen;
    e.mean_random_regret += best - mean;
  }
  const double dn = static_cast<double>(n);
  e.mean_greedy_reward /= dn;
  e.mean_random_reward /= dn;
  e.mean_best_reward /= dn;
  e.mean_regret /= dn;
  e.mean_random_regret /= dn;
  e.angles = nbv_angle_stats(e.actions, space);
  return e;
}

std::string learning_curve_csv(const std::vector<CycleStats>& curve) {
  std::string out = "cycle,mean_test_reward\n";
  char buf[64];
  for (const auto& c : curve) {
    std::snprintf(buf, sizeof buf, "%d,%.17g\n", c.cycle, c.mean_test_reward);
    out += buf;
  }
  return out;
}

}  // namespace nbv
