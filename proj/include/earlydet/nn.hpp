#pragma once

// Dense feed-forward networks used by both detectors: three ReLU hidden
// layers (512/256/512 by default) followed by a linear output layer.
// Inputs are laid out column-wise: one example per column.

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace earlydet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

inline constexpr int kCoefficients = 64;
inline constexpr int kContextFrames = 5;
inline constexpr int kFeatureDim = kCoefficients * kContextFrames;

enum class NetworkKind { kForeBackground, kMultitask };
enum class Mode { kTrain, kEval };

struct NetworkLayout {
  NetworkKind kind = NetworkKind::kForeBackground;
  int input_dim = kFeatureDim;
  std::vector<int> hidden = {512, 256, 512};
  // Number of event classes; only meaningful for kMultitask.
  int num_classes = 0;

  static NetworkLayout dnn1(int input_dim = kFeatureDim);
  static NetworkLayout dnn2(int num_classes, int input_dim = kFeatureDim);

  // 2 for the fore-/background network, C+2 for the multitask network.
  int output_dim() const;
  // Throws ConfigError on non-positive sizes or C < 1 for kMultitask.
  void validate() const;

  bool operator==(const NetworkLayout&) const = default;
};

struct LayerParams {
  Matrix weights;  // out x in
  Vector biases;   // out
};

// Parameter-shaped container; also used for gradients and Adam moments.
using LayerSet = std::vector<LayerParams>;

struct NetworkParams {
  NetworkLayout layout;
  LayerSet layers;
  double dropout_p = 0.0;

  std::size_t parameter_count() const;
  // Squared L2 norm over weights only (biases are not regularized).
  double weight_norm_sq() const;
};

LayerSet zeros_like(const LayerSet& layers);
void check_same_shape(const LayerSet& a, const LayerSet& b);

// He-style init: N(0, 2/fan_in) weights, zero biases. Deterministic per seed.
NetworkParams init_params(const NetworkLayout& layout, std::uint64_t seed,
                          double dropout_p);

// Activations kept for backpropagation. activations[0] is the input batch,
// activations[l] the (post-dropout) output of hidden layer l. masks[l-1]
// holds the inverted-dropout scale applied to hidden layer l, empty in eval.
struct ForwardTrace {
  std::vector<Matrix> pre_activations;
  std::vector<Matrix> activations;
  std::vector<Matrix> masks;
  Matrix logits;
};

// Batched forward pass. rng is required only in train mode with dropout > 0.
// Throws InputError for non-finite inputs, ConfigError on a width mismatch.
ForwardTrace forward(const NetworkParams& params, const Matrix& inputs,
                     Mode mode, Rng* rng = nullptr);

// Gradients of a scalar loss w.r.t. all parameters, given dLoss/dLogits.
LayerSet backward(const NetworkParams& params, const ForwardTrace& trace,
                  const Matrix& logit_grads);

// Column-wise softmax over the given rows, computed stably.
Matrix softmax_columns(const Matrix& logits);
double sigmoid(double z);

struct Dnn1Output {
  Eigen::Vector2d posterior;  // (background, foreground)
  ForwardTrace trace;
};

struct Dnn2Output {
  Vector class_posterior;     // C entries, softmax
  Eigen::Vector2d distances;  // (onset, offset), sigmoid, normalized units
  ForwardTrace trace;
};

Dnn1Output forward_dnn1(const Vector& x, const NetworkParams& params,
                        Mode mode, Rng* rng = nullptr);
Dnn2Output forward_dnn2(const Vector& x, const NetworkParams& params,
                        Mode mode, Rng* rng = nullptr);

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  LayerSet first_moment;
  LayerSet second_moment;
  std::int64_t step = 0;

  static AdamState for_params(const NetworkParams& params);
};

// Bias-corrected Adam update, in place. Throws ConfigError on shape mismatch.
void adam_step(NetworkParams& params, const LayerSet& grads, AdamState& state,
               const AdamConfig& config = {});

}  // namespace earlydet
