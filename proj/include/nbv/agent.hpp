#pragma once

#include "nbv/env.hpp"
#include "nbv/rng.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace nbv {

struct NetOptions {
  std::vector<int> hidden{64, 128};
  double leaky_slope = 0.01;
  double dropout_rate = 0.2;
  double bn_epsilon = 1e-5;
  double bn_momentum = 0.1;
};

inline double leaky_relu(double x, double slope) { return x > 0.0 ? x : slope * x; }

enum class Mode { train, eval };

/// Dense action-value network:
///   in -> [linear -> batch-norm -> leaky ReLU -> dropout] x hidden -> linear -> out
/// Hidden linear layers carry no bias (batch-norm shift replaces it).
/// Batches are row-major: one observation per row.
class ActionValueNet {
public:
  using Matrix = Eigen::MatrixXd;
  using Vector = Eigen::VectorXd;

  ActionValueNet() = default;
  ActionValueNet(int input_size, int action_count, NetOptions options = {});

  /// Fan-in scaled uniform weights, unit batch-norm scale, zero shifts.
  void initialize(std::uint64_t seed);

  int input_size() const noexcept { return input_size_; }
  int action_count() const noexcept { return action_count_; }
  const NetOptions& options() const noexcept { return options_; }

  /// Network outputs are multiplied by this to give predicted rewards.
  double output_scale() const noexcept { return output_scale_; }
  void set_output_scale(double s) { output_scale_ = s; }

  /// Raw outputs (batch x action_count). Train mode uses batch statistics
  /// and dropout masks drawn from dropout_key; eval mode is deterministic.
  Matrix forward(const Matrix& x, Mode mode, std::uint64_t dropout_key = 0) const;

  struct Gradients {
    std::vector<Matrix> weights;
    std::vector<Vector> bn_scale;
    std::vector<Vector> bn_shift;
    Vector output_bias;
  };

  /// Per-hidden-layer batch mean and (biased) variance of the pre-norm activations.
  struct BatchStats {
    std::vector<Vector> mean;
    std::vector<Vector> variance;
    int batch_size = 0;
  };

  /// Mean squared error over all outputs plus l2 * sum of squared weights,
  /// with gradients of every parameter. Uses batch statistics and leaves the
  /// running statistics alone; they are returned through `stats` when given.
  /// use_dropout=false gives a smooth loss for gradient checks.
  double loss_and_gradients(const Matrix& x, const Matrix& targets, double l2, Gradients& grads,
                            bool use_dropout, std::uint64_t dropout_key, BatchStats* stats = nullptr) const;

  double loss(const Matrix& x, const Matrix& targets, double l2, bool use_dropout, std::uint64_t dropout_key) const;

  /// Exponential moving average of batch statistics into the running ones.
  void update_running_stats(const BatchStats& stats);

  /// Every trainable scalar, in a fixed order (weights, scales, shifts, bias).
  std::vector<double*> parameters();
  std::size_t parameter_count() const;
  /// Gradient entries in the order of parameters().
  static std::vector<double> flatten(const Gradients& g);

  /// Sum of squared weight-matrix entries.
  double weight_norm_squared() const;
  bool all_finite() const;

  std::vector<Matrix>& weights() { return weights_; }
  std::vector<Vector>& bn_scale() { return bn_scale_; }
  std::vector<Vector>& bn_shift() { return bn_shift_; }
  std::vector<Vector>& running_mean() { return running_mean_; }
  std::vector<Vector>& running_var() { return running_var_; }
  Vector& output_bias() { return output_bias_; }

  std::string to_json() const;
  static ActionValueNet from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static ActionValueNet load(const std::filesystem::path& path);

private:
  struct Trace;
  Matrix run(const Matrix& x, Mode mode, bool use_dropout, std::uint64_t dropout_key, Trace* trace) const;

  int input_size_ = 0;
  int action_count_ = 0;
  NetOptions options_;
  double output_scale_ = 1.0;
  std::vector<Matrix> weights_;  // hidden.size() + 1 matrices, (out x in)
  std::vector<Vector> bn_scale_, bn_shift_, running_mean_, running_var_;
  Vector output_bias_;
};

/// Stochastic gradient descent with classical momentum.
class SgdMomentum {
public:
  SgdMomentum(double learning_rate, double momentum) : lr_(learning_rate), momentum_(momentum) {}
  void step(ActionValueNet& net, const ActionValueNet::Gradients& grads);

private:
  double lr_;
  double momentum_;
  std::vector<double> velocity_;
};

struct TrainConfig {
  int batch_size = 64;
  int train_batches_per_cycle = 512;
  int test_batches_per_cycle = 512;
  int cycles = 50;
  double epsilon_start = 1.0;
  double epsilon_end = 0.0;
  /// Cycles over which epsilon decays linearly; <= 0 means 80% of cycles.
  int epsilon_decay_cycles = 0;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double l2_lambda = 1e-4;
  double dropout_rate = 0.2;
  double leaky_slope = 0.01;
  /// Rewards are divided by this before regression; <= 0 picks the standard
  /// deviation of all training rewards.
  double reward_scale = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  double epsilon_at(int cycle) const;
};

/// One gradient step on a single batch; returns the pre-step loss.
/// Throws NonFiniteLoss on divergence.
double train_step(ActionValueNet& net, SgdMomentum& optimizer, const ActionValueNet::Matrix& x,
                  const ActionValueNet::Matrix& rewards, const TrainConfig& config, std::uint64_t dropout_key,
                  bool use_dropout = true);

/// argmax with probability 1 - epsilon (lowest index on ties), otherwise a
/// uniformly random action.
int select_action(std::span<const double> values, double epsilon, CounterRng& rng);
int argmax(std::span<const double> values);

/// Everything the trainer needs about one object: the observation of each
/// initial view and its full reward vector over all actions.
struct TrainingObject {
  std::string name;
  std::vector<Observation> observations;      // indexed by view id
  std::vector<std::vector<double>> rewards;  // [view][action]
};

/// Builds observations and reward vectors for every view from a cache.
TrainingObject make_training_object(const std::string& name, const DatasetManifest& manifest,
                                    const BettiCache& cache);

struct CycleStats {
  int cycle = 0;
  double epsilon = 0.0;
  double mean_train_loss = 0.0;
  double mean_train_reward = 0.0;  // reward of the epsilon-greedy choices
  double mean_test_reward = 0.0;   // greedy
};

struct TrainResult {
  ActionValueNet net;
  std::vector<CycleStats> curve;
  /// Expected reward of a uniformly random action over the same initial views.
  double random_policy_reward = 0.0;
};

TrainResult train(const std::vector<TrainingObject>& objects, const TrainConfig& config,
                  const std::function<void(const CycleStats&)>& on_cycle = {});

/// Mean greedy reward of the net over every initial view of the objects.
double greedy_mean_reward(const ActionValueNet& net, const std::vector<TrainingObject>& objects);
double random_mean_reward(const std::vector<TrainingObject>& objects);

struct NbvPrediction {
  int action = 0;
  std::vector<double> values;  // predicted reward per action
};

NbvPrediction predict_nbv(const ActionValueNet& net, const Observation& observation);

/// Greedy action for each observation.
std::vector<int> greedy_actions(const ActionValueNet& net, std::span<const Observation> observations);

/// Angles between each initial view (action index v) and its chosen view actions[v].
struct AngleStats {
  double mean_deg = 0.0;
  double std_deg = 0.0;
  double frac_near_initial = 0.0;   // under 10 degrees
  double frac_near_antipode = 0.0;  // over 170 degrees
};
AngleStats nbv_angle_stats(std::span<const int> actions, const ActionSpace& space);

/// Greedy policy of a net scored over every initial view of one object.
struct PolicyEvaluation {
  std::vector<int> actions;  // greedy action per initial view
  double mean_greedy_reward = 0.0;
  double mean_random_reward = 0.0;
  double mean_best_reward = 0.0;
  /// best reward minus the reward of the chosen action, averaged over views
  double mean_regret = 0.0;
  double mean_random_regret = 0.0;
  AngleStats angles;
};

PolicyEvaluation evaluate_policy(const ActionValueNet& net, const TrainingObject& object, const ActionSpace& space);

/// `cycle,mean_test_reward` per line.
std::string learning_curve_csv(const std::vector<CycleStats>& curve);

}  // namespace nbv
