#pragma once

// Mini-batch training of both networks with Adam. Single-threaded and
// deterministic for a given seed: batch order is reshuffled each epoch from
// the run seed, dropout masks come from a separate seeded stream.

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "earlydet/losses.hpp"
#include "earlydet/model.hpp"
#include "earlydet/synth.hpp"

namespace earlydet {

struct TrainingSettings {
  int epochs = 25;
  int dnn1_batch = 256;
  int dnn2_batch = 128;
  double learning_rate = 1e-4;
  double dnn1_dropout = 0.5;
  double dnn2_dropout = 0.2;
  std::vector<int> hidden = {512, 256, 512};
  std::uint64_t seed = 1;
};

struct EpochLog {
  std::string network;  // "dnn1" or "dnn2"
  int epoch = 0;        // 1-based
  double total = 0.0;   // example-weighted mean of batch totals
  std::map<std::string, double> components;
  double wall_s = 0.0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

NetworkParams train_dnn1(std::span<const StreamFeatures> streams, const TrainingSet& set,
                         const FeatureStandardizer& standardizer,
                         const WeightedLossConfig& loss, const TrainingSettings& settings,
                         const EpochCallback& on_epoch = {});

NetworkParams train_dnn2(std::span<const StreamFeatures> streams, const TrainingSet& set,
                         const FeatureStandardizer& standardizer,
                         const MultitaskLossConfig& loss, const TrainingSettings& settings,
                         const EpochCallback& on_epoch = {});

// Fits the standardizer and normalization on `streams`, then trains both
// networks.
ModelBundle train_model(std::span<const StreamFeatures> streams, int num_classes,
                        const WeightedLossConfig& weighted,
                        const MultitaskLossConfig& multitask,
                        const TrainingSettings& settings, const EpochCallback& on_epoch = {});

// Derives independent sub-seeds from one run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t lane);

}  // namespace earlydet
