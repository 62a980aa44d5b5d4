#pragma once

// Loss functions for the two detectors together with their analytic
// gradients:
//   * weighted cross-entropy for fore-/background classification, where
//     foreground and background terms carry separate penalization weights;
//   * multitask loss for joint event classification and onset/offset
//     distance regression, with an IoU-scaled confidence term.
//
// Heads take output-layer logits and return dLoss/dLogits; the full
// weighted_loss / multitask_loss entry points run the forward pass, the head,
// backpropagation and the L2 weight penalty.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "earlydet/nn.hpp"

namespace earlydet {

struct WeightedLossConfig {
  double fg_weight = 2.0;
  double bg_weight = 1.0;
  double l2 = 1e-3;
};

struct MultitaskLossConfig {
  double class_weight = 1.0;
  double dist_weight = 2.0;
  double conf_weight = 1.0;
  double l2 = 1e-3;
};

inline constexpr double kLogClamp = 1e-12;
inline constexpr double kIouEpsilon = 1e-8;

// total == sum over components of weights[name] * components[name]
struct LossReport {
  double total = 0.0;
  std::map<std::string, double> components;
  std::map<std::string, double> weights;
  LayerSet gradients;
};

struct HeadResult {
  std::map<std::string, double> components;  // unweighted, mean over batch
  Matrix logit_grads;                        // of the weighted data term
};

// logits: 2 x N. foreground[n] != 0 marks a foreground example (one-hot y at
// index 1); the indicator functions follow from the same flag.
HeadResult weighted_head(const Matrix& logits,
                         std::span<const std::uint8_t> foreground,
                         const WeightedLossConfig& config);

// logits: (C+2) x N. classes[n] in [0, C); targets: 2 x N normalized
// (onset, offset) distances.
HeadResult multitask_head(const Matrix& logits, std::span<const int> classes,
                          const Matrix& targets,
                          const MultitaskLossConfig& config);

struct IouTerms {
  double intersection;
  double union_;
};

// Throws InputError on any negative component.
IouTerms iou_terms(const Eigen::Vector2d& truth, const Eigen::Vector2d& pred);

struct WeightedBatch {
  Matrix inputs;  // D x N
  std::vector<std::uint8_t> foreground;
};

struct MultitaskBatch {
  Matrix inputs;  // D x N
  std::vector<int> classes;
  Matrix distances;  // 2 x N, normalized
};

// Dropout masks are drawn once per call; pass mode kEval to disable dropout.
LossReport weighted_loss(const WeightedBatch& batch, const NetworkParams& params,
                         const WeightedLossConfig& config,
                         Mode mode = Mode::kEval, Rng* rng = nullptr);
LossReport multitask_loss(const MultitaskBatch& batch,
                          const NetworkParams& params,
                          const MultitaskLossConfig& config,
                          Mode mode = Mode::kEval, Rng* rng = nullptr);

}  // namespace earlydet
