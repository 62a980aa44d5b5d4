#include "earlydet/losses.hpp"

#include <algorithm>
#include <cmath>

#include "earlydet/error.hpp"

namespace earlydet {

namespace {

// -log(max(p, clamp)) and its derivative w.r.t. the logit of the labeled
// class: d/dz_k = p_k - [k == label] unless the clamp is active.
struct ClampedLog {
  double value;
  bool clamped;
};

ClampedLog neg_log(double p) {
  if (p < kLogClamp) return {-std::log(kLogClamp), true};
  return {-std::log(p), false};
}

void add_l2(LossReport& report, const NetworkParams& params, double l2) {
  const double reg = 0.5 * l2 * params.weight_norm_sq();
  report.components["regularizer"] = reg;
  report.weights["regularizer"] = 1.0;
  report.total += reg;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    report.gradients[l].weights += l2 * params.layers[l].weights;
  }
}

}  // namespace

HeadResult weighted_head(const Matrix& logits,
                         std::span<const std::uint8_t> foreground,
                         const WeightedLossConfig& config) {
  const auto n = logits.cols();
  if (logits.rows() != 2) throw ConfigError("weighted loss expects 2 logits");
  if (n == 0) throw InputError("empty batch");
  if (static_cast<Eigen::Index>(foreground.size()) != n) {
    throw ConfigError("label count does not match batch size");
  }
  const Matrix probs = softmax_columns(logits);
  const double inv_n = 1.0 / static_cast<double>(n);

  double fg_sum = 0.0;
  double bg_sum = 0.0;
  HeadResult result;
  result.logit_grads = Matrix::Zero(2, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const int label = foreground[j] ? 1 : 0;
    const double weight = foreground[j] ? config.fg_weight : config.bg_weight;
    const auto term = neg_log(probs(label, j));
    (foreground[j] ? fg_sum : bg_sum) += term.value;
    if (!term.clamped) {
      result.logit_grads.col(j) = weight * inv_n * probs.col(j);
      result.logit_grads(label, j) -= weight * inv_n;
    }
  }
  result.components["foreground"] = fg_sum * inv_n;
  result.components["background"] = bg_sum * inv_n;
  return result;
}

IouTerms iou_terms(const Eigen::Vector2d& truth, const Eigen::Vector2d& pred) {
  if ((truth.array() < 0.0).any() || (pred.array() < 0.0).any()) {
    throw InputError("iou_terms requires non-negative distances");
  }
  return {std::min(truth[0], pred[0]) + std::min(truth[1], pred[1]),
          std::max(truth[0], pred[0]) + std::max(truth[1], pred[1])};
}

HeadResult multitask_head(const Matrix& logits, std::span<const int> classes,
                          const Matrix& targets,
                          const MultitaskLossConfig& config) {
  const auto n = logits.cols();
  const auto c = logits.rows() - 2;
  if (c < 1) throw ConfigError("multitask loss expects C+2 >= 3 logits");
  if (n == 0) throw InputError("empty batch");
  if (static_cast<Eigen::Index>(classes.size()) != n || targets.cols() != n ||
      targets.rows() != 2) {
    throw ConfigError("multitask targets do not match batch");
  }

  const Matrix probs = softmax_columns(logits.topRows(c));
  const double inv_n = 1.0 / static_cast<double>(n);
  double class_sum = 0.0;
  double dist_sum = 0.0;
  double conf_sum = 0.0;

  HeadResult result;
  result.logit_grads = Matrix::Zero(c + 2, n);
  Vector class_grad(c);
  for (Eigen::Index j = 0; j < n; ++j) {
    const int label = classes[j];
    if (label < 0 || label >= c) throw InputError("class index out of range");
    const Vector p = probs.col(j);
    const Eigen::Vector2d d = targets.col(j);
    const Eigen::Vector2d d_hat(sigmoid(logits(c, j)), sigmoid(logits(c + 1, j)));

    // Class term.
    const auto ce = neg_log(p[label]);
    class_sum += ce.value;
    class_grad.setZero();
    Eigen::Vector2d dist_grad = Eigen::Vector2d::Zero();
    if (!ce.clamped) {
      // Gradient w.r.t. logits directly (softmax + log collapse).
      class_grad = config.class_weight * p;
      class_grad[label] -= config.class_weight;
    }

    // Distance term.
    const Eigen::Vector2d diff = d - d_hat;
    dist_sum += diff.squaredNorm();
    dist_grad += config.dist_weight * (-2.0 * diff);

    // Confidence term: || y - p * r ||^2 with r = (I + eps) / (U + eps).
    const IouTerms iou = iou_terms(d, d_hat);
    const double num = iou.intersection + kIouEpsilon;
    const double den = iou.union_ + kIouEpsilon;
    const double r = num / den;
    Vector err = -r * p;
    err[label] += 1.0;
    conf_sum += err.squaredNorm();

    // dL/dp_k = -2 e_k r, pushed through the softmax Jacobian.
    const Vector g = config.conf_weight * (-2.0 * r) * err;
    class_grad.array() += p.array() * (g.array() - g.dot(p));
    // dL/dr = -2 sum_k e_k p_k. Ties take the ground-truth branch of min/max,
    // so d_hat gets zero subgradient there.
    const double dl_dr = config.conf_weight * (-2.0 * err.dot(p));
    for (int k = 0; k < 2; ++k) {
      const double di = d_hat[k] < d[k] ? 1.0 : 0.0;
      const double du = d_hat[k] > d[k] ? 1.0 : 0.0;
      dist_grad[k] += dl_dr * (di * den - num * du) / (den * den);
    }

    result.logit_grads.col(j).head(c) = inv_n * class_grad;
    for (int k = 0; k < 2; ++k) {
      result.logit_grads(c + k, j) =
          inv_n * dist_grad[k] * d_hat[k] * (1.0 - d_hat[k]);
    }
  }
  result.components["class"] = class_sum * inv_n;
  result.components["distance"] = dist_sum * inv_n;
  result.components["confidence"] = conf_sum * inv_n;
  return result;
}

LossReport weighted_loss(const WeightedBatch& batch, const NetworkParams& params,
                         const WeightedLossConfig& config, Mode mode,
                         Rng* rng) {
  if (params.layout.kind != NetworkKind::kForeBackground) {
    throw ConfigError("weighted_loss needs a fore-/background network");
  }
  const ForwardTrace trace = forward(params, batch.inputs, mode, rng);
  HeadResult head = weighted_head(trace.logits, batch.foreground, config);

  LossReport report;
  report.components = std::move(head.components);
  report.weights = {{"foreground", config.fg_weight},
                    {"background", config.bg_weight}};
  report.total = config.fg_weight * report.components["foreground"] +
                 config.bg_weight * report.components["background"];
  report.gradients = backward(params, trace, head.logit_grads);
  add_l2(report, params, config.l2);
  return report;
}

LossReport multitask_loss(const MultitaskBatch& batch,
                          const NetworkParams& params,
                          const MultitaskLossConfig& config, Mode mode,
                          Rng* rng) {
  if (params.layout.kind != NetworkKind::kMultitask) {
    throw ConfigError("multitask_loss needs a multitask network");
  }
  const ForwardTrace trace = forward(params, batch.inputs, mode, rng);
  HeadResult head =
      multitask_head(trace.logits, batch.classes, batch.distances, config);

  LossReport report;
  report.components = std::move(head.components);
  report.weights = {{"class", config.class_weight},
                    {"distance", config.dist_weight},
                    {"confidence", config.conf_weight}};
  report.total = config.class_weight * report.components["class"] +
                 config.dist_weight * report.components["distance"] +
                 config.conf_weight * report.components["confidence"];
  report.gradients = backward(params, trace, head.logit_grads);
  add_l2(report, params, config.l2);
  return report;
}

}  // namespace earlydet
