#pragma once

// Command implementations behind the `earlydet` CLI. Each command reads its
// inputs from and writes its outputs under the configured paths, logs the
// resolved configuration, and stamps every artifact with the config hash.

#include <string>
#include <vector>

#include "earlydet/config.hpp"
#include "earlydet/eval.hpp"
#include "earlydet/model.hpp"
#include "earlydet/synth.hpp"

namespace earlydet {

struct Dataset {
  std::vector<std::string> class_names;
  std::vector<StreamFeatures> streams;
};

// Streams of one split ("train" or "test") listed in the manifest. Cached
// feature files are used when they match the feature configuration;
// otherwise features are recomputed from the audio. Throws MissingArtifact
// for missing files and ConfigError when the audio sample rate differs from
// the configured one.
Dataset load_split(const RunConfig& config, const std::string& split);

// Predictions of the trained model for every stream.
std::vector<ScoredStream> score_streams(const ModelBundle& model,
                                        const std::vector<StreamFeatures>& streams);

const std::vector<std::string>& command_names();

// Returns the process exit status (0 on success, 1 when a check fails).
// Throws ConfigError for an unknown command.
int run_command(const std::string& command, const RunConfig& config);

int run_synth(const RunConfig& config);
int run_train(const RunConfig& config);
int run_calibrate(const RunConfig& config);
int run_detect(const RunConfig& config);
int run_evaluate(const RunConfig& config);
int run_curves(const RunConfig& config);
int run_check_gradients(const RunConfig& config);

}  // namespace earlydet
