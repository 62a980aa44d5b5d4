#include "earlydet/training.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "earlydet/error.hpp"

namespace earlydet {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t lane) {
  std::uint64_t x = seed + 0x9E3779B97F4A7C15ULL * (lane + 1);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

namespace {

enum SeedLane : std::uint64_t {
  kDnn1Init = 1,
  kDnn1Shuffle,
  kDnn1Dropout,
  kDnn2Init,
  kDnn2Shuffle,
  kDnn2Dropout,
};

// Batch-sized Eigen temporaries (~1 MB each) otherwise go through
// mmap/munmap on every allocation, which costs about a third of a step.
void keep_large_allocations_on_heap() {
#if defined(__GLIBC__)
  static const bool once = [] {
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
    return true;
  }();
  (void)once;
#endif
}

void validate(const TrainingSettings& s) {
  if (s.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (s.dnn1_batch < 1 || s.dnn2_batch < 1) throw ConfigError("batch sizes must be >= 1");
  if (!(s.learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
}

// Shared epoch loop; `make_batch` fills the batch for a slice of example
// indices and `loss_fn` evaluates it with dropout.
template <typename Batch, typename MakeBatch, typename LossFn>
void run_epochs(NetworkParams& params, std::size_t example_count, int batch_size,
                const TrainingSettings& settings, const std::string& name,
                std::uint64_t shuffle_seed, std::uint64_t dropout_seed,
                MakeBatch make_batch, LossFn loss_fn, const EpochCallback& on_epoch) {
  if (example_count == 0) throw InputError("no training examples for " + name);
  keep_large_allocations_on_heap();
  std::vector<std::size_t> order(example_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng(shuffle_seed);
  Rng dropout_rng(dropout_seed);
  AdamState adam = AdamState::for_params(params);
  const AdamConfig adam_config{settings.learning_rate};

  for (int epoch = 1; epoch <= settings.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochLog log{name, epoch, 0.0, {}, 0.0};
    for (std::size_t first = 0; first < example_count; first += batch_size) {
      const std::size_t last = std::min(example_count, first + batch_size);
      const std::span<const std::size_t> slice(order.data() + first, last - first);
      Batch batch = make_batch(slice);
      LossReport report = loss_fn(batch, params, dropout_rng);
      adam_step(params, report.gradients, adam, adam_config);
      const double share = static_cast<double>(slice.size()) / example_count;
      log.total += share * report.total;
      for (const auto& [key, value] : report.components) log.components[key] += share * value;
    }
    log.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (on_epoch) on_epoch(log);
  }
}

}  // namespace

NetworkParams train_dnn1(std::span<const StreamFeatures> streams, const TrainingSet& set,
                         const FeatureStandardizer& standardizer,
                         const WeightedLossConfig& loss, const TrainingSettings& settings,
                         const EpochCallback& on_epoch) {
  validate(settings);
  NetworkLayout layout = NetworkLayout::dnn1(static_cast<int>(standardizer.mean.size()) *
                                             kContextFrames);
  layout.hidden = settings.hidden;
  NetworkParams params =
      init_params(layout, derive_seed(settings.seed, kDnn1Init), settings.dnn1_dropout);

  auto make_batch = [&](std::span<const std::size_t> slice) {
    WeightedBatch batch;
    batch.inputs.resize(layout.input_dim, static_cast<Eigen::Index>(slice.size()));
    batch.foreground.resize(slice.size());
    for (std::size_t j = 0; j < slice.size(); ++j) {
      const auto& ex = set.dnn1[slice[j]];
      auto col = batch.inputs.col(static_cast<Eigen::Index>(j));
      stack_context_into(streams[ex.stream].framewise, ex.frame, kContextFrames, col);
      standardizer.apply(col);
      batch.foreground[j] = ex.foreground;
    }
    return batch;
  };
  auto loss_fn = [&](const WeightedBatch& batch, const NetworkParams& p, Rng& rng) {
    return weighted_loss(batch, p, loss, Mode::kTrain, &rng);
  };
  run_epochs<WeightedBatch>(params, set.dnn1.size(), settings.dnn1_batch, settings, "dnn1",
                            derive_seed(settings.seed, kDnn1Shuffle),
                            derive_seed(settings.seed, kDnn1Dropout), make_batch, loss_fn,
                            on_epoch);
  return params;
}

NetworkParams train_dnn2(std::span<const StreamFeatures> streams, const TrainingSet& set,
                         const FeatureStandardizer& standardizer,
                         const MultitaskLossConfig& loss, const TrainingSettings& settings,
                         const EpochCallback& on_epoch) {
  validate(settings);
  NetworkLayout layout = NetworkLayout::dnn2(
      set.num_classes, static_cast<int>(standardizer.mean.size()) * kContextFrames);
  layout.hidden = settings.hidden;
  NetworkParams params =
      init_params(layout, derive_seed(settings.seed, kDnn2Init), settings.dnn2_dropout);

  auto make_batch = [&](std::span<const std::size_t> slice) {
    MultitaskBatch batch;
    batch.inputs.resize(layout.input_dim, static_cast<Eigen::Index>(slice.size()));
    batch.classes.resize(slice.size());
    batch.distances.resize(2, static_cast<Eigen::Index>(slice.size()));
    for (std::size_t j = 0; j < slice.size(); ++j) {
      const auto& ex = set.dnn2[slice[j]];
      auto col = batch.inputs.col(static_cast<Eigen::Index>(j));
      stack_context_into(streams[ex.stream].framewise, ex.frame, kContextFrames, col);
      standardizer.apply(col);
      batch.classes[j] = ex.class_id;
      batch.distances(0, static_cast<Eigen::Index>(j)) = ex.distances.on;
      batch.distances(1, static_cast<Eigen::Index>(j)) = ex.distances.off;
    }
    return batch;
  };
  auto loss_fn = [&](const MultitaskBatch& batch, const NetworkParams& p, Rng& rng) {
    return multitask_loss(batch, p, loss, Mode::kTrain, &rng);
  };
  run_epochs<MultitaskBatch>(params, set.dnn2.size(), settings.dnn2_batch, settings, "dnn2",
                             derive_seed(settings.seed, kDnn2Shuffle),
                             derive_seed(settings.seed, kDnn2Dropout), make_batch, loss_fn,
                             on_epoch);
  return params;
}

ModelBundle train_model(std::span<const StreamFeatures> streams, int num_classes,
                        const WeightedLossConfig& weighted,
                        const MultitaskLossConfig& multitask,
                        const TrainingSettings& settings, const EpochCallback& on_epoch) {
  ModelBundle model;
  model.standardizer = FeatureStandardizer::fit(streams);
  const TrainingSet set = make_training_set(streams, num_classes);
  model.normalization = set.normalization;
  model.dnn1 = train_dnn1(streams, set, model.standardizer, weighted, settings, on_epoch);
  model.dnn2 = train_dnn2(streams, set, model.standardizer, multitask, settings, on_epoch);
  return model;
}

}  // namespace earlydet
