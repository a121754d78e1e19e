#include "nbv/agent.hpp"

#include "nbv/error.hpp"
#include "nbv/ply_io.hpp"

#include <json.hpp>

#include <cmath>

namespace nbv {

using Matrix = ActionValueNet::Matrix;
using Vector = ActionValueNet::Vector;

struct ActionValueNet::Trace {
  struct Layer {
    Matrix input;     // activations entering the linear map
    Matrix normed;    // x-hat
    Vector inv_std;
    Matrix pre_act;   // batch-norm output
    Matrix mask;      // dropout multipliers (empty when dropout is off)
  };
  std::vector<Layer> layers;
  Matrix last_input;
  BatchStats stats;
};

ActionValueNet::ActionValueNet(int input_size, int action_count, NetOptions options)
    : input_size_(input_size), action_count_(action_count), options_(std::move(options)) {
  if (input_size < 1 || action_count < 1) throw InvalidParameter("network sizes must be positive");
  if (!(options_.dropout_rate >= 0.0 && options_.dropout_rate < 1.0)) {
    throw InvalidParameter("dropout rate must lie in [0, 1)");
  }
  int fan_in = input_size;
  for (const int h : options_.hidden) {
    if (h < 1) throw InvalidParameter("hidden layer sizes must be positive");
    weights_.push_back(Matrix::Zero(h, fan_in));
    bn_scale_.push_back(Vector::Ones(h));
    bn_shift_.push_back(Vector::Zero(h));
    running_mean_.push_back(Vector::Zero(h));
    running_var_.push_back(Vector::Ones(h));
    fan_in = h;
  }
  weights_.push_back(Matrix::Zero(action_count, fan_in));
  output_bias_ = Vector::Zero(action_count);
}

void ActionValueNet::initialize(std::uint64_t seed) {
  CounterRng rng(stream_key(seed, name_hash("net-init")));
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const double fan_in = static_cast<double>(weights_[l].cols());
    const bool output = l + 1 == weights_.size();
    const double bound = output ? std::sqrt(1.0 / fan_in) : std::sqrt(6.0 / fan_in);
    for (Eigen::Index c = 0; c < weights_[l].cols(); ++c)
      for (Eigen::Index r = 0; r < weights_[l].rows(); ++r) weights_[l](r, c) = rng.uniform(-bound, bound);
  }
  for (std::size_t l = 0; l < bn_scale_.size(); ++l) {
    bn_scale_[l].setOnes();
    bn_shift_[l].setZero();
    running_mean_[l].setZero();
    running_var_[l].setOnes();
  }
  output_bias_.setZero();
}

Matrix ActionValueNet::run(const Matrix& x, Mode mode, bool use_dropout, std::uint64_t dropout_key,
                           Trace* trace) const {
  if (x.cols() != input_size_) {
    throw ShapeMismatch("observation length " + std::to_string(x.cols()) + " but network expects " +
                        std::to_string(input_size_));
  }
  const bool train = mode == Mode::train;
  const double keep = 1.0 - options_.dropout_rate;
  const auto batch = x.rows();
  Matrix a = x;
  if (trace) {
    trace->layers.clear();
    trace->stats = BatchStats{{}, {}, static_cast<int>(batch)};
  }
  for (std::size_t l = 0; l + 1 < weights_.size(); ++l) {
    const Matrix z = a * weights_[l].transpose();
    Vector mean, var;
    if (train) {
      mean = z.colwise().mean().transpose();
      var = (z.rowwise() - mean.transpose()).array().square().colwise().mean().transpose();
    } else {
      mean = running_mean_[l];
      var = running_var_[l];
    }
    const Vector inv_std = (var.array() + options_.bn_epsilon).rsqrt().matrix();
    const Matrix normed = ((z.rowwise() - mean.transpose()).array().rowwise() * inv_std.transpose().array()).matrix();
    const Matrix pre = ((normed.array().rowwise() * bn_scale_[l].transpose().array()).rowwise() +
                        bn_shift_[l].transpose().array())
                           .matrix();
    const double slope = options_.leaky_slope;
    Matrix h = pre.unaryExpr([slope](double v) { return leaky_relu(v, slope); });

    Matrix mask;
    if (train && use_dropout && options_.dropout_rate > 0.0) {
      mask.resize(h.rows(), h.cols());
      const CounterRng rng(stream_key(dropout_key, name_hash("dropout"), l));
      const auto threshold = static_cast<std::uint64_t>(options_.dropout_rate * 0x1.0p53);
      for (Eigen::Index r = 0; r < h.rows(); ++r)
        for (Eigen::Index c = 0; c < h.cols(); ++c) {
          const auto draw = rng.at(static_cast<std::uint64_t>(r * h.cols() + c)) >> 11;
          mask(r, c) = draw < threshold ? 0.0 : 1.0 / keep;
        }
      h = h.cwiseProduct(mask);
    }
    if (trace) {
      trace->layers.push_back({std::move(a), normed, inv_std, pre, std::move(mask)});
      trace->stats.mean.push_back(mean);
      trace->stats.variance.push_back(var);
    }
    a = std::move(h);
  }
  Matrix out = (a * weights_.back().transpose()).rowwise() + output_bias_.transpose();
  if (trace) trace->last_input = std::move(a);
  (void)batch;
  return out;
}

Matrix ActionValueNet::forward(const Matrix& x, Mode mode, std::uint64_t dropout_key) const {
  return run(x, mode, true, dropout_key, nullptr);
}

double ActionValueNet::loss(const Matrix& x, const Matrix& targets, double l2, bool use_dropout,
                            std::uint64_t dropout_key) const {
  const Matrix out = run(x, Mode::train, use_dropout, dropout_key, nullptr);
  if (targets.rows() != out.rows() || targets.cols() != out.cols()) throw ShapeMismatch("target shape mismatch");
  return (out - targets).squaredNorm() / static_cast<double>(out.size()) + l2 * weight_norm_squared();
}

double ActionValueNet::loss_and_gradients(const Matrix& x, const Matrix& targets, double l2, Gradients& grads,
                                          bool use_dropout, std::uint64_t dropout_key, BatchStats* stats) const {
  Trace trace;
  const Matrix out = run(x, Mode::train, use_dropout, dropout_key, &trace);
  if (targets.rows() != out.rows() || targets.cols() != out.cols()) throw ShapeMismatch("target shape mismatch");
  const Matrix residual = out - targets;
  const double n = static_cast<double>(out.size());
  const double value = residual.squaredNorm() / n + l2 * weight_norm_squared();

  const std::size_t hidden = weights_.size() - 1;
  grads.weights.resize(weights_.size());
  grads.bn_scale.resize(hidden);
  grads.bn_shift.resize(hidden);

  const Matrix d_out = (2.0 / n) * residual;
  grads.output_bias = d_out.colwise().sum().transpose();
  grads.weights[hidden] = d_out.transpose() * trace.last_input + 2.0 * l2 * weights_[hidden];
  Matrix d_a = d_out * weights_[hidden];

  const double batch = static_cast<double>(x.rows());
  for (std::size_t l = hidden; l-- > 0;) {
    const auto& layer = trace.layers[l];
    Matrix d_h = layer.mask.size() ? d_a.cwiseProduct(layer.mask) : d_a;
    const double slope = options_.leaky_slope;
    const Matrix d_pre = d_h.cwiseProduct(layer.pre_act.unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; }));
    grads.bn_scale[l] = d_pre.cwiseProduct(layer.normed).colwise().sum().transpose();
    grads.bn_shift[l] = d_pre.colwise().sum().transpose();
    const Matrix d_norm = (d_pre.array().rowwise() * bn_scale_[l].transpose().array()).matrix();
    const Eigen::RowVectorXd sum_d = d_norm.colwise().sum();
    const Eigen::RowVectorXd sum_dx = d_norm.cwiseProduct(layer.normed).colwise().sum();
    const Matrix d_z = (((batch * d_norm.array()).rowwise() - sum_d.array() -
                         layer.normed.array().rowwise() * sum_dx.array())
                            .rowwise() *
                        (layer.inv_std.transpose().array() / batch))
                           .matrix();
    grads.weights[l] = d_z.transpose() * layer.input + 2.0 * l2 * weights_[l];
    if (l > 0) d_a = d_z * weights_[l];
  }
  if (stats) *stats = std::move(trace.stats);
  return value;
}

void ActionValueNet::update_running_stats(const BatchStats& stats) {
  const double m = options_.bn_momentum;
  const double n = stats.batch_size;
  const double unbias = n > 1 ? n / (n - 1) : 1.0;
  for (std::size_t l = 0; l < running_mean_.size(); ++l) {
    running_mean_[l] = (1.0 - m) * running_mean_[l] + m * stats.mean[l];
    running_var_[l] = (1.0 - m) * running_var_[l] + m * unbias * stats.variance[l];
  }
}

std::vector<double*> ActionValueNet::parameters() {
  std::vector<double*> p;
  for (auto& w : weights_)
    for (Eigen::Index i = 0; i < w.size(); ++i) p.push_back(w.data() + i);
  for (auto& g : bn_scale_)
    for (Eigen::Index i = 0; i < g.size(); ++i) p.push_back(g.data() + i);
  for (auto& b : bn_shift_)
    for (Eigen::Index i = 0; i < b.size(); ++i) p.push_back(b.data() + i);
  for (Eigen::Index i = 0; i < output_bias_.size(); ++i) p.push_back(output_bias_.data() + i);
  return p;
}

std::size_t ActionValueNet::parameter_count() const {
  std::size_t n = static_cast<std::size_t>(output_bias_.size());
  for (const auto& w : weights_) n += static_cast<std::size_t>(w.size());
  for (const auto& g : bn_scale_) n += 2 * static_cast<std::size_t>(g.size());
  return n;
}

std::vector<double> ActionValueNet::flatten(const Gradients& g) {
  std::vector<double> out;
  for (const auto& w : g.weights) out.insert(out.end(), w.data(), w.data() + w.size());
  for (const auto& s : g.bn_scale) out.insert(out.end(), s.data(), s.data() + s.size());
  for (const auto& s : g.bn_shift) out.insert(out.end(), s.data(), s.data() + s.size());
  out.insert(out.end(), g.output_bias.data(), g.output_bias.data() + g.output_bias.size());
  return out;
}

double ActionValueNet::weight_norm_squared() const {
  double s = 0.0;
  for (const auto& w : weights_) s += w.squaredNorm();
  return s;
}

bool ActionValueNet::all_finite() const {
  for (const auto& w : weights_)
    if (!w.allFinite()) return false;
  for (std::size_t l = 0; l < bn_scale_.size(); ++l) {
    if (!bn_scale_[l].allFinite() || !bn_shift_[l].allFinite() || !running_mean_[l].allFinite() ||
        !running_var_[l].allFinite()) {
      return false;
    }
  }
  return output_bias_.allFinite();
}

void SgdMomentum::step(ActionValueNet& net, const ActionValueNet::Gradients& grads) {
  const std::vector<double*> params = net.parameters();
  const std::vector<double> g = ActionValueNet::flatten(grads);
  if (velocity_.size() != params.size()) velocity_.assign(params.size(), 0.0);
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity_[i] = momentum_ * velocity_[i] - lr_ * g[i];
    *params[i] += velocity_[i];
  }
}

// --- persistence -----------------------------------------------------------

namespace {

using json = nlohmann::ordered_json;

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

void read_matrix(const json& j, Matrix& m) {
  if (static_cast<Eigen::Index>(j.size()) != m.rows()) throw ShapeMismatch("model matrix row count");
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (static_cast<Eigen::Index>(row.size()) != m.cols()) throw ShapeMismatch("model matrix column count");
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
}

void read_vector(const json& j, Vector& v) {
  if (static_cast<Eigen::Index>(j.size()) != v.size()) throw ShapeMismatch("model vector length");
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
}

constexpr const char* kModelFormat = "nbv-action-value-net";
constexpr int kModelVersion = 1;

}  // namespace

std::string ActionValueNet::to_json() const {
  json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["input_size"] = input_size_;
  j["hidden"] = options_.hidden;
  j["action_count"] = action_count_;
  j["leaky_slope"] = options_.leaky_slope;
  j["dropout_rate"] = options_.dropout_rate;
  j["bn_epsilon"] = options_.bn_epsilon;
  j["bn_momentum"] = options_.bn_momentum;
  j["output_scale"] = output_scale_;
  json layers = json::array();
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    json layer;
    layer["weights"] = matrix_json(weights_[l]);
    if (l < bn_scale_.size()) {
      layer["bn_scale"] = vector_json(bn_scale_[l]);
      layer["bn_shift"] = vector_json(bn_shift_[l]);
      layer["running_mean"] = vector_json(running_mean_[l]);
      layer["running_var"] = vector_json(running_var_[l]);
    } else {
      layer["bias"] = vector_json(output_bias_);
    }
    layers.push_back(std::move(layer));
  }
  j["layers"] = std::move(layers);
  return j.dump(1) + "\n";
}

ActionValueNet ActionValueNet::from_json(const std::string& text) {
  const json j = json::parse(text);
  if (j.value("format", "") != kModelFormat) throw InvalidParameter("not an action-value network file");
  if (j.at("version").get<int>() != kModelVersion) throw InvalidParameter("unsupported model version");
  NetOptions options;
  options.hidden = j.at("hidden").get<std::vector<int>>();
  options.leaky_slope = j.at("leaky_slope").get<double>();
  options.dropout_rate = j.at("dropout_rate").get<double>();
  options.bn_epsilon = j.at("bn_epsilon").get<double>();
  options.bn_momentum = j.at("bn_momentum").get<double>();
  ActionValueNet net(j.at("input_size").get<int>(), j.at("action_count").get<int>(), options);
  net.output_scale_ = j.at("output_scale").get<double>();
  const auto& layers = j.at("layers");
  if (layers.size() != net.weights_.size()) throw ShapeMismatch("model layer count");
  for (std::size_t l = 0; l < net.weights_.size(); ++l) {
    read_matrix(layers[l].at("weights"), net.weights_[l]);
    if (l < net.bn_scale_.size()) {
      read_vector(layers[l].at("bn_scale"), net.bn_scale_[l]);
      read_vector(layers[l].at("bn_shift"), net.bn_shift_[l]);
      read_vector(layers[l].at("running_mean"), net.running_mean_[l]);
      read_vector(layers[l].at("running_var"), net.running_var_[l]);
    } else {
      read_vector(layers[l].at("bias"), net.output_bias_);
    }
  }
  return net;
}

void ActionValueNet::save(const std::filesystem::path& path) const { write_text_file(path, to_json()); }

ActionValueNet ActionValueNet::load(const std::filesystem::path& path) {
  try {
    return from_json(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string(), e.what());
  }
}

}  // namespace nbv
