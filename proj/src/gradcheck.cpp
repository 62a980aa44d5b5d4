#include "earlydet/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace earlydet {

double relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

GradientCheckResult check_gradients(
    const NetworkParams& params,
    const std::function<LossReport(const NetworkParams&)>& loss, double step,
    double floor) {
  const LayerSet analytic = loss(params).gradients;
  NetworkParams probe = params;
  GradientCheckResult result;

  auto check_entry = [&](double& slot, double grad, const std::string& where) {
    const double saved = slot;
    slot = saved + step;
    const double up = loss(probe).total;
    slot = saved - step;
    const double down = loss(probe).total;
    slot = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double rel = relative_error(grad, numeric, floor);
    result.max_abs_error = std::max(result.max_abs_error, std::abs(grad - numeric));
    if (rel > result.max_rel_error || result.parameters_checked == 0) {
      result.max_rel_error = rel;
      result.worst_parameter = where;
    }
    ++result.parameters_checked;
  };

  for (std::size_t l = 0; l < probe.layers.size(); ++l) {
    auto& layer = probe.layers[l];
    for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) {
      for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) {
        check_entry(layer.weights(i, j), analytic[l].weights(i, j),
                    "layer " + std::to_string(l) + " W(" + std::to_string(i) +
                        "," + std::to_string(j) + ")");
      }
    }
    for (Eigen::Index i = 0; i < layer.biases.size(); ++i) {
      check_entry(layer.biases[i], analytic[l].biases[i],
                  "layer " + std::to_string(l) + " b(" + std::to_string(i) + ")");
    }
  }
  return result;
}

GradientSuiteReport run_gradient_suite(int num_seeds, std::uint64_t base_seed) {
  constexpr int kInput = 6;
  constexpr int kClasses = 3;
  GradientSuiteReport report;

  for (int s = 0; s < num_seeds; ++s) {
    const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(s);
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> batch_dist(1, 5);
    std::uniform_int_distribution<int> class_dist(0, kClasses - 1);

    auto random_inputs = [&](int n) {
      Matrix x(kInput, n);
      for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
      return x;
    };
    // Non-zero biases so every ReLU regime is exercised.
    auto perturb_biases = [&](NetworkParams& p) {
      for (auto& layer : p.layers) {
        for (Eigen::Index i = 0; i < layer.biases.size(); ++i) {
          layer.biases[i] = 0.1 * normal(rng);
        }
      }
    };

    {
      NetworkLayout layout = NetworkLayout::dnn1(kInput);
      layout.hidden = {8, 6, 8};
      NetworkParams params = init_params(layout, seed * 2 + 1, 0.0);
      perturb_biases(params);
      WeightedBatch batch;
      const int n = batch_dist(rng);
      batch.inputs = random_inputs(n);
      for (int i = 0; i < n; ++i) batch.foreground.push_back(unit(rng) < 0.5);
      const WeightedLossConfig config{2.0, 1.0, 1e-3};
      auto result = check_gradients(params, [&](const NetworkParams& p) {
        return weighted_loss(batch, p, config);
      });
      report.max_rel_error = std::max(report.max_rel_error, result.max_rel_error);
      report.entries.push_back({seed, "weighted", n, std::move(result)});
    }
    {
      NetworkLayout layout = NetworkLayout::dnn2(kClasses, kInput);
      layout.hidden = {8, 6, 8};
      NetworkParams params = init_params(layout, seed * 2 + 2, 0.0);
      perturb_biases(params);
      MultitaskBatch batch;
      const int n = batch_dist(rng);
      batch.inputs = random_inputs(n);
      batch.distances.resize(2, n);
      for (int i = 0; i < n; ++i) {
        batch.classes.push_back(class_dist(rng));
        batch.distances(0, i) = unit(rng);
        batch.distances(1, i) = unit(rng);
      }
      const MultitaskLossConfig config{1.0, 2.0, 1.0, 1e-3};
      auto result = check_gradients(params, [&](const NetworkParams& p) {
        return multitask_loss(batch, p, config);
      });
      report.max_rel_error = std::max(report.max_rel_error, result.max_rel_error);
      report.entries.push_back({seed, "multitask", n, std::move(result)});
    }
  }
  return report;
}

}  // namespace earlydet
