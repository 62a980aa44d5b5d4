#pragma once

// Shared helpers for unit and acceptance tests.

#include <cmath>
#include <vector>

#include "earlydet/losses.hpp"
#include "earlydet/nn.hpp"

namespace earlydet::testing {

// A tiny network whose logits equal `logits` for every input: all weights
// and hidden biases are zero, the output biases carry the logits.
inline NetworkParams constant_output_net(NetworkKind kind, int num_classes,
                                         const std::vector<double>& logits,
                                         int input_dim = 4) {
  NetworkLayout layout{kind, input_dim, {3}, num_classes};
  NetworkParams p = init_params(layout, 1, 0.0);
  for (auto& l : p.layers) {
    l.weights.setZero();
    l.biases.setZero();
  }
  for (std::size_t i = 0; i < logits.size(); ++i) p.layers.back().biases[i] = logits[i];
  return p;
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

// Hand-checked worked example: C=2, y=(1,0), y_hat=(0.6,0.4),
// d=(0.2,0.4), d_hat=(0.1,0.5), weights (1,2,1), no regularization.
inline LossReport multitask_worked_example() {
  const auto net = constant_output_net(NetworkKind::kMultitask, 2,
                                       {std::log(0.6), std::log(0.4), logit(0.1), logit(0.5)});
  MultitaskBatch batch;
  batch.inputs = Matrix::Zero(4, 1);
  batch.classes = {0};
  batch.distances = Matrix(2, 1);
  batch.distances << 0.2, 0.4;
  MultitaskLossConfig cfg;
  cfg.l2 = 0.0;
  return multitask_loss(batch, net, cfg);
}

// Single foreground example with y_hat_fg = 0.8, lambda_fg = 2, no
// regularization.
inline LossReport weighted_worked_example() {
  const auto net =
      constant_output_net(NetworkKind::kForeBackground, 0, {0.0, std::log(4.0)});
  WeightedBatch batch;
  batch.inputs = Matrix::Zero(4, 1);
  batch.foreground = {1};
  WeightedLossConfig cfg;
  cfg.l2 = 0.0;
  return weighted_loss(batch, net, cfg);
}

}  // namespace earlydet::testing
