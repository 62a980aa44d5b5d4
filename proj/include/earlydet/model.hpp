#pragma once

// Trained detector bundle: both networks, the distance normalization
// constants, and the per-coefficient input standardization. Checkpoints are a
// plain-text header followed by little-endian float64 payload in declared
// layer order (weights row-major, then biases), then the standardizer.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "earlydet/inference.hpp"
#include "earlydet/nn.hpp"
#include "earlydet/synth.hpp"

namespace earlydet {

struct FeatureStandardizer {
  Vector mean;     // per coefficient
  Vector inv_std;  // per coefficient

  static FeatureStandardizer identity(int channels = kCoefficients);
  // Mean / standard deviation over every frame of the given streams.
  static FeatureStandardizer fit(std::span<const StreamFeatures> streams);
  // Standardizes a stacked context vector block by block, in place.
  void apply(Eigen::Ref<Vector> stacked) const;
};

// Stacked, standardized network inputs (one column per requested frame).
Matrix gather_inputs(const Eigen::MatrixXf& framewise, std::span<const int> frames,
                     const FeatureStandardizer& standardizer);

struct ModelBundle {
  NetworkParams dnn1;
  NetworkParams dnn2;
  NormalizationConstants normalization;
  FeatureStandardizer standardizer;
  std::string config_hash;

  int num_classes() const { return dnn2.layout.num_classes; }
};

void save_model(const std::filesystem::path& path, const ModelBundle& model);
// Throws MissingArtifact / InputError.
ModelBundle load_model(const std::filesystem::path& path);

// Eval-mode outputs of both networks for every frame.
StreamPredictions predict_stream(const ModelBundle& model,
                                 const Eigen::MatrixXf& framewise);

void save_thresholds(const std::filesystem::path& path,
                     const DetectionThresholds& thresholds,
                     std::span<const std::string> class_names,
                     const std::string& config_hash);
DetectionThresholds load_thresholds(const std::filesystem::path& path);

}  // namespace earlydet
