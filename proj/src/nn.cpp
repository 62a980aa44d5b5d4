#include "earlydet/nn.hpp"

#include <cmath>
#include <string>

#include "earlydet/error.hpp"

namespace earlydet {

NetworkLayout NetworkLayout::dnn1(int input_dim) {
  NetworkLayout layout;
  layout.kind = NetworkKind::kForeBackground;
  layout.input_dim = input_dim;
  return layout;
}

NetworkLayout NetworkLayout::dnn2(int num_classes, int input_dim) {
  NetworkLayout layout;
  layout.kind = NetworkKind::kMultitask;
  layout.input_dim = input_dim;
  layout.num_classes = num_classes;
  return layout;
}

int NetworkLayout::output_dim() const {
  return kind == NetworkKind::kForeBackground ? 2 : num_classes + 2;
}

void NetworkLayout::validate() const {
  if (input_dim <= 0) throw ConfigError("network input_dim must be positive");
  if (hidden.empty()) throw ConfigError("network needs at least one hidden layer");
  for (int width : hidden) {
    if (width <= 0) throw ConfigError("hidden layer widths must be positive");
  }
  if (kind == NetworkKind::kMultitask && num_classes < 1) {
    throw ConfigError("multitask network needs num_classes >= 1");
  }
}

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) {
    n += static_cast<std::size_t>(layer.weights.size() + layer.biases.size());
  }
  return n;
}

double NetworkParams::weight_norm_sq() const {
  double sum = 0.0;
  for (const auto& layer : layers) sum += layer.weights.squaredNorm();
  return sum;
}

LayerSet zeros_like(const LayerSet& layers) {
  LayerSet out;
  out.reserve(layers.size());
  for (const auto& layer : layers) {
    out.push_back({Matrix::Zero(layer.weights.rows(), layer.weights.cols()),
                   Vector::Zero(layer.biases.size())});
  }
  return out;
}

void check_same_shape(const LayerSet& a, const LayerSet& b) {
  if (a.size() != b.size()) throw ConfigError("layer count mismatch");
  for (std::size_t l = 0; l < a.size(); ++l) {
    if (a[l].weights.rows() != b[l].weights.rows() ||
        a[l].weights.cols() != b[l].weights.cols() ||
        a[l].biases.size() != b[l].biases.size()) {
      throw ConfigError("parameter shape mismatch at layer " + std::to_string(l));
    }
  }
}

NetworkParams init_params(const NetworkLayout& layout, std::uint64_t seed,
                          double dropout_p) {
  layout.validate();
  if (!(dropout_p >= 0.0 && dropout_p <= 1.0)) {
    throw ConfigError("dropout_p must lie in [0, 1]");
  }
  NetworkParams params;
  params.layout = layout;
  params.dropout_p = dropout_p;

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  int fan_in = layout.input_dim;
  auto add_layer = [&](int fan_out) {
    const double scale = std::sqrt(2.0 / fan_in);
    LayerParams layer{Matrix(fan_out, fan_in), Vector::Zero(fan_out)};
    for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) {
      for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) {
        layer.weights(i, j) = scale * normal(rng);
      }
    }
    params.layers.push_back(std::move(layer));
    fan_in = fan_out;
  };
  for (int width : layout.hidden) add_layer(width);
  add_layer(layout.output_dim());
  return params;
}

namespace {

void fill_dropout_mask(Matrix& mask, double p, Rng& rng) {
  const double keep_scale = p < 1.0 ? 1.0 / (1.0 - p) : 0.0;
  constexpr double kInv53 = 1.0 / 9007199254740992.0;  // 2^-53
  double* data = mask.data();
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    const double u = static_cast<double>(rng() >> 11) * kInv53;
    data[i] = u < p ? 0.0 : keep_scale;
  }
}

}  // namespace

ForwardTrace forward(const NetworkParams& params, const Matrix& inputs,
                     Mode mode, Rng* rng) {
  if (inputs.rows() != params.layout.input_dim) {
    throw ConfigError("input has " + std::to_string(inputs.rows()) +
                      " rows, network expects " +
                      std::to_string(params.layout.input_dim));
  }
  if (!inputs.allFinite()) throw InputError("non-finite network input");

  const bool use_dropout = mode == Mode::kTrain && params.dropout_p > 0.0;
  if (use_dropout && rng == nullptr) {
    throw ConfigError("train-mode dropout requires a random source");
  }

  const std::size_t hidden = params.layers.size() - 1;
  ForwardTrace trace;
  trace.pre_activations.reserve(hidden);
  trace.activations.reserve(hidden + 1);
  trace.activations.push_back(inputs);

  for (std::size_t l = 0; l < hidden; ++l) {
    const auto& layer = params.layers[l];
    Matrix z = layer.weights * trace.activations.back();
    z.colwise() += layer.biases;
    Matrix a = z.cwiseMax(0.0);
    if (use_dropout) {
      Matrix mask(a.rows(), a.cols());
      fill_dropout_mask(mask, params.dropout_p, *rng);
      a.array() *= mask.array();
      trace.masks.push_back(std::move(mask));
    }
    trace.pre_activations.push_back(std::move(z));
    trace.activations.push_back(std::move(a));
  }
  const auto& out = params.layers.back();
  trace.logits = out.weights * trace.activations.back();
  trace.logits.colwise() += out.biases;
  return trace;
}

LayerSet backward(const NetworkParams& params, const ForwardTrace& trace,
                  const Matrix& logit_grads) {
  LayerSet grads(params.layers.size());
  Matrix delta = logit_grads;
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const Matrix& input = trace.activations[l];
    grads[l].weights.noalias() = delta * input.transpose();
    grads[l].biases = delta.rowwise().sum();
    if (l == 0) break;
    Matrix upstream = params.layers[l].weights.transpose() * delta;
    const Matrix& z = trace.pre_activations[l - 1];
    upstream.array() *= (z.array() > 0.0).cast<double>();
    if (!trace.masks.empty()) upstream.array() *= trace.masks[l - 1].array();
    delta = std::move(upstream);
  }
  return grads;
}

Matrix softmax_columns(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double peak = logits.col(j).maxCoeff();
    out.col(j) = (logits.col(j).array() - peak).exp().matrix();
    out.col(j) /= out.col(j).sum();
  }
  return out;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Dnn1Output forward_dnn1(const Vector& x, const NetworkParams& params,
                        Mode mode, Rng* rng) {
  if (params.layout.kind != NetworkKind::kForeBackground) {
    throw ConfigError("forward_dnn1 needs a fore-/background layout");
  }
  Dnn1Output out;
  out.trace = forward(params, x, mode, rng);
  out.posterior = softmax_columns(out.trace.logits).col(0);
  return out;
}

Dnn2Output forward_dnn2(const Vector& x, const NetworkParams& params,
                        Mode mode, Rng* rng) {
  if (params.layout.kind != NetworkKind::kMultitask) {
    throw ConfigError("forward_dnn2 needs a multitask layout");
  }
  const int c = params.layout.num_classes;
  Dnn2Output out;
  out.trace = forward(params, x, mode, rng);
  out.class_posterior = softmax_columns(out.trace.logits.topRows(c)).col(0);
  out.distances = {sigmoid(out.trace.logits(c, 0)),
                   sigmoid(out.trace.logits(c + 1, 0))};
  return out;
}

AdamState AdamState::for_params(const NetworkParams& params) {
  return {zeros_like(params.layers), zeros_like(params.layers), 0};
}

void adam_step(NetworkParams& params, const LayerSet& grads, AdamState& state,
               const AdamConfig& config) {
  check_same_shape(params.layers, grads);
  check_same_shape(params.layers, state.first_moment);
  check_same_shape(params.layers, state.second_moment);

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  const double b1 = config.beta1;
  const double b2 = config.beta2;

  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m.array() = b1 * m.array() + (1.0 - b1) * grad.array();
    v.array() = b2 * v.array() + (1.0 - b2) * grad.array().square();
    param.array() -= config.learning_rate * (m.array() / correction1) /
                     ((v.array() / correction2).sqrt() + config.epsilon);
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    update(params.layers[l].weights, grads[l].weights,
           state.first_moment[l].weights, state.second_moment[l].weights);
    update(params.layers[l].biases, grads[l].biases,
           state.first_moment[l].biases, state.second_moment[l].biases);
  }
}

}  // namespace earlydet
