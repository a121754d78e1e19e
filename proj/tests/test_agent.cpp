#include "nbv/agent.hpp"
#include "nbv/error.hpp"
#include "nbv/rng.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <numeric>

using namespace nbv;
using Matrix = ActionValueNet::Matrix;

namespace {

Matrix random_matrix(CounterRng& rng, int rows, int cols, double scale) {
  Matrix m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = rng.uniform(-scale, scale);
  return m;
}

ActionValueNet small_net(std::uint64_t seed) {
  NetOptions o;
  o.hidden = {5, 4};
  ActionValueNet net(8, 6, o);
  net.initialize(seed);
  // move batch-norm parameters off their initial values so they matter
  CounterRng rng(seed + 100);
  for (auto& s : net.bn_scale()) for (auto& v : s) v = rng.uniform(0.5, 1.5);
  for (auto& s : net.bn_shift()) for (auto& v : s) v = rng.uniform(-0.3, 0.3);
  for (auto& v : net.output_bias()) v = rng.uniform(-0.1, 0.1);
  return net;
}

// Rewards that depend on the observation: action a pays off when feature a % 8 is large.
std::vector<TrainingObject> synthetic_objects(std::uint64_t seed, int views, int actions) {
  CounterRng rng(seed);
  std::vector<TrainingObject> objects(2);
  for (std::size_t o = 0; o < objects.size(); ++o) {
    objects[o].name = "synthetic" + std::to_string(o);
    for (int v = 0; v < views; ++v) {
      Observation obs;
      for (int f = 0; f < 8; ++f) obs.features.push_back(rng.uniform(0.0, 1.0));
      std::vector<double> r;
      for (int a = 0; a < actions; ++a) r.push_back(3.0 * obs.features[static_cast<std::size_t>(a % 8)] - 1.0 + 0.1 * a / actions);
      objects[o].observations.push_back(obs);
      objects[o].rewards.push_back(r);
    }
  }
  return objects;
}

}  // namespace

TEST_CASE("analytic gradients match central differences") {
  CounterRng rng(7);
  for (const double l2 : {0.0, 1e-2}) {
    auto net = small_net(3);
    const Matrix x = random_matrix(rng, 7, 8, 1.0);
    const Matrix t = random_matrix(rng, 7, 6, 1.0);
    ActionValueNet::Gradients g;
    net.loss_and_gradients(x, t, l2, g, false, 0);
    const auto analytic = ActionValueNet::flatten(g);
    auto params = net.parameters();
    REQUIRE(analytic.size() == params.size());
    REQUIRE(params.size() == net.parameter_count());
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double keep = *params[i];
      const double h = 1e-6 * std::max(1.0, std::abs(keep));
      *params[i] = keep + h;
      const double up = net.loss(x, t, l2, false, 0);
      *params[i] = keep - h;
      const double down = net.loss(x, t, l2, false, 0);
      *params[i] = keep;
      const double numeric = (up - down) / (2 * h);
      const double scale = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-6});
      CAPTURE(i);
      CHECK(std::abs(numeric - analytic[i]) / scale < 1e-4);
    }
  }
}

TEST_CASE("epsilon-greedy frequencies follow the policy") {
  const int n = 20;
  std::vector<double> values(n);
  for (int a = 0; a < n; ++a) values[static_cast<std::size_t>(a)] = std::sin(a * 1.7);
  const int best = argmax(values);
  const int draws = 100000;
  for (const double eps : {0.0, 0.25, 1.0}) {
    CounterRng rng(stream_key(11, static_cast<std::uint64_t>(eps * 100)));
    std::vector<int> counts(n, 0);
    for (int i = 0; i < draws; ++i) ++counts[static_cast<std::size_t>(select_action(values, eps, rng))];
    double chi2 = 0.0;
    int cells = 0;
    for (int a = 0; a < n; ++a) {
      const double p = eps / n + (a == best ? 1.0 - eps : 0.0);
      const double expected = p * draws;
      if (expected == 0.0) {
        CHECK(counts[static_cast<std::size_t>(a)] == 0);
        continue;
      }
      chi2 += (counts[static_cast<std::size_t>(a)] - expected) * (counts[static_cast<std::size_t>(a)] - expected) / expected;
      ++cells;
    }
    CAPTURE(eps);
    if (cells > 1) {
      const boost::math::chi_squared dist(cells - 1);
      CHECK(chi2 < boost::math::quantile(dist, 1.0 - 0.001));
    } else {
      CHECK(counts[static_cast<std::size_t>(best)] == draws);
    }
  }
}

TEST_CASE("argmax takes the lowest index on ties") {
  CHECK(argmax(std::vector<double>{1, 3, 3, 2}) == 1);
  CHECK(argmax(std::vector<double>{-1}) == 0);
  CHECK_THROWS_AS(argmax(std::vector<double>{}), InvalidParameter);
  CounterRng rng(1);
  CHECK(select_action(std::vector<double>{5, 5}, 0.0, rng) == 0);
  CHECK_THROWS_AS(select_action(std::vector<double>{1}, 1.5, rng), InvalidParameter);
}

TEST_CASE("zero weights give the output bias for every input") {
  NetOptions o;
  o.hidden = {4};
  ActionValueNet net(3, 5, o);
  for (auto& w : net.weights()) w.setZero();
  net.output_bias() << 1, 2, 3, 4, 5;
  CounterRng rng(2);
  const Matrix out = net.forward(random_matrix(rng, 6, 3, 1.0), Mode::eval);
  for (int r = 0; r < 6; ++r)
    for (int a = 0; a < 5; ++a) CHECK(out(r, a) == a + 1);
}

TEST_CASE("training steps reduce the loss") {
  CounterRng rng(5);
  auto net = small_net(9);
  const Matrix x = random_matrix(rng, 32, 8, 1.0);
  Matrix y(32, 6);
  for (int r = 0; r < 32; ++r)
    for (int a = 0; a < 6; ++a) y(r, a) = x(r, a) - 0.5 * x(r, (a + 1) % 8);
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  SgdMomentum opt(cfg.learning_rate, cfg.momentum);
  const double before = net.loss(x, y, cfg.l2_lambda, false, 0);
  for (int step = 0; step < 50; ++step) train_step(net, opt, x, y, cfg, static_cast<std::uint64_t>(step), false);
  CHECK(net.loss(x, y, cfg.l2_lambda, false, 0) < 0.5 * before);
}

TEST_CASE("diverging training is reported") {
  auto net = small_net(1);
  Matrix x = Matrix::Ones(4, 8);
  Matrix y = Matrix::Constant(4, 6, std::numeric_limits<double>::infinity());
  SgdMomentum opt(0.1, 0.9);
  CHECK_THROWS_AS(train_step(net, opt, x, y, TrainConfig{}, 0), NonFiniteLoss);
}

TEST_CASE("epsilon schedule") {
  TrainConfig c;
  CHECK(c.epsilon_at(0) == 1.0);
  CHECK(c.epsilon_at(20) == doctest::Approx(0.5));
  CHECK(c.epsilon_at(40) == 0.0);
  CHECK(c.epsilon_at(49) == 0.0);
  c.epsilon_decay_cycles = 10;
  c.epsilon_end = 0.1;
  CHECK(c.epsilon_at(5) == doctest::Approx(0.55));
  CHECK(c.epsilon_at(10) == doctest::Approx(0.1));
  c.epsilon_start = 2.0;
  CHECK_THROWS_AS(c.validate(), InvalidParameter);
}

TEST_CASE("training is deterministic and learns the synthetic task") {
  const auto objects = synthetic_objects(4, 40, 12);
  TrainConfig c;
  c.cycles = 12;
  c.train_batches_per_cycle = 40;
  c.test_batches_per_cycle = 4;
  c.batch_size = 16;
  c.learning_rate = 0.01;
  c.seed = 21;
  const auto a = train(objects, c);
  const auto b = train(objects, c);
  CHECK(a.net.to_json() == b.net.to_json());
  CHECK(learning_curve_csv(a.curve) == learning_curve_csv(b.curve));
  CHECK(a.curve.size() == 12);
  CHECK(greedy_mean_reward(a.net, objects) > a.random_policy_reward + 0.5);

  c.seed = 22;
  CHECK(train(objects, c).net.to_json() != a.net.to_json());

  c.cycles = 0;
  const auto untrained = train(objects, c);
  CHECK(untrained.curve.empty());
}

TEST_CASE("random-policy reward is the mean reward row average") {
  const auto objects = synthetic_objects(6, 10, 5);
  double sum = 0.0;
  for (const auto& o : objects)
    for (const auto& row : o.rewards) sum += std::accumulate(row.begin(), row.end(), 0.0) / row.size();
  CHECK(random_mean_reward(objects) == doctest::Approx(sum / 20).epsilon(1e-12));
}

TEST_CASE("model save and load round trip") {
  const auto net = small_net(12);
  auto copy = net;
  copy.set_output_scale(2.5);
  const auto dir = oracle::scratch_dir("model");
  copy.save(dir / "m.json");
  const auto back = ActionValueNet::load(dir / "m.json");
  CHECK(back.to_json() == copy.to_json());
  CHECK(back.output_scale() == 2.5);
  CounterRng rng(3);
  const Matrix x = random_matrix(rng, 5, 8, 1.0);
  CHECK(back.forward(x, Mode::eval) == copy.forward(x, Mode::eval));
  CHECK_THROWS_AS(ActionValueNet::from_json("{}"), InvalidParameter);
  CHECK_THROWS_AS(ActionValueNet::load(dir / "none.json"), IoError);
}

TEST_CASE("prediction and angle statistics") {
  const ActionSpace space{4, 3};
  NetOptions o;
  o.hidden = {3};
  ActionValueNet net(8, space.action_count(), o);
  for (auto& w : net.weights()) w.setZero();
  net.output_bias().setZero();
  net.output_bias()(7) = 1.0;
  net.set_output_scale(3.0);
  const auto p = predict_nbv(net, Observation{std::vector<double>(8, 0.1)});
  CHECK(p.action == 7);
  CHECK(p.values[7] == 3.0);
  CHECK_THROWS_AS(predict_nbv(net, Observation{std::vector<double>(3, 0.0)}), ShapeMismatch);

  // every view choosing itself: zero angle, all near the initial view
  std::vector<int> self(static_cast<std::size_t>(space.action_count()));
  std::iota(self.begin(), self.end(), 0);
  const auto s = nbv_angle_stats(self, space);
  CHECK(s.mean_deg == 0.0);
  CHECK(s.frac_near_initial == 1.0);
  CHECK(s.frac_near_antipode == 0.0);

  // bucket centers sit on integer ticks, so antipodes are exact only to a fraction of a tick
  std::vector<int> opposite;
  for (int a = 0; a < space.action_count(); ++a) {
    const auto [y, pt] = decompose_action(a, space);
    opposite.push_back(action_index((y + 2) % 4, space.pitch_buckets - 1 - pt, space));
  }
  const auto t = nbv_angle_stats(opposite, space);
  for (int a = 0; a < space.action_count(); ++a) {
    CHECK(angular_difference_deg(action_pose(a, space), action_pose(opposite[static_cast<std::size_t>(a)], space)) ==
          doctest::Approx(180.0).epsilon(1e-3));
  }
  CHECK(t.frac_near_antipode == 1.0);
  CHECK(t.std_deg < 0.1);
}
