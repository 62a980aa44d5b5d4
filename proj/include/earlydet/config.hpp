#pragma once

// Run configuration: one JSON document with a flat section per module.
// Resolution order: built-in defaults, then the config file, then
// `--set section.key=value` overrides, then --seed / --out.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "earlydet/eval.hpp"
#include "earlydet/features.hpp"
#include "earlydet/losses.hpp"
#include "earlydet/synth.hpp"
#include "earlydet/training.hpp"

namespace earlydet {

struct PathSettings {
  std::filesystem::path out_dir = "out";
  // Relative paths below resolve against out_dir.
  std::filesystem::path manifest = "data/manifest.json";
  std::filesystem::path model = "model.ckpt";
  std::filesystem::path thresholds = "thresholds.json";
  std::filesystem::path detections = "detections.csv";
  std::filesystem::path tracks_dir = "tracks";
  std::filesystem::path metrics = "metrics.json";
  std::filesystem::path curves = "curves.csv";
  std::filesystem::path curves_svg_dir = "curves";
  std::filesystem::path train_log = "train_log.csv";
  std::filesystem::path gradient_report = "gradient_check.json";

  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

struct EvaluationSettings {
  int k_step = 10;
  std::string split = "test";
};

struct RunConfig {
  std::uint64_t seed = 2024;
  PathSettings paths;
  FrameConfig frames;
  GammatoneConfig gammatone;
  BenchmarkSpec benchmark;
  WeightedLossConfig weighted_loss;
  MultitaskLossConfig multitask_loss;
  TrainingSettings training;
  CalibrationSettings calibration;
  EvaluationSettings evaluation;
  int gradcheck_seeds = 20;

  // Canonical JSON of every resolved field (sorted keys).
  std::string to_json() const;
  // FNV-1a 64 of the canonical JSON without the paths section, as 16 hex
  // digits.
  std::string hash() const;
  // Same, over the features section only (keys the feature cache).
  std::string feature_hash() const;

  // Throws MissingArtifact for a missing config file and ConfigError naming
  // the offending field for unknown keys, wrong types or violated bounds.
  static RunConfig resolve(const std::optional<std::filesystem::path>& file,
                           const std::vector<std::string>& overrides,
                           std::optional<std::uint64_t> seed = {},
                           std::optional<std::filesystem::path> out_dir = {});
  static RunConfig from_json_text(const std::string& text);
};

std::string fnv1a_hex(const std::string& data);

}  // namespace earlydet
