#pragma once

// Deterministic synthetic event streams with frame-level ground truth, the
// dataset manifest, and conversion of annotated streams into the example
// sets for both networks.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "earlydet/features.hpp"

namespace earlydet {

enum class GeneratorKind { kToneBurst, kChirp, kNoiseBurst, kHarmonicStack, kAmTone };

const char* to_string(GeneratorKind kind);
GeneratorKind generator_from_string(const std::string& name);

struct EventClassSpec {
  std::string name;
  GeneratorKind kind = GeneratorKind::kToneBurst;
  double min_duration_s = 0.8;
  double max_duration_s = 1.3;
  // Tone/carrier/fundamental range, chirp start..end, or noise band.
  double low_hz = 900.0;
  double high_hz = 1100.0;
  double min_amplitude = 0.1;
  double max_amplitude = 0.4;
};

// Five classes with disjoint primary bands.
std::vector<EventClassSpec> default_event_classes();

struct StreamSpec {
  std::vector<EventClassSpec> classes = default_event_classes();
  double length_s = 120.0;
  int events_per_class = 7;
  double noise_level = 0.01;
  double min_gap_s = 0.2;
  double sample_rate = 44100.0;
  FrameConfig frames;
  std::uint64_t seed = 1;

  void validate() const;
};

struct AnnotatedStream {
  std::string id;
  AudioBuffer audio;
  std::vector<EventInterval> events;  // sorted, non-overlapping
};

// Throws ConfigError if the scheduled events cannot fit with the gaps.
AnnotatedStream synthesize_stream(const StreamSpec& spec);

// First/last frame overlapping [begin, end) samples by at least half a frame.
std::optional<std::pair<int, int>> frames_covering(std::size_t begin,
                                                   std::size_t end,
                                                   int frame_length, int hop,
                                                   int frame_count);

struct BenchmarkSpec {
  StreamSpec stream;
  int train_streams = 9;
  int test_streams = 3;
  std::uint64_t seed = 2024;
};

enum class Split { kTrain, kTest };

// Per-stream spec with a seed derived from (benchmark seed, split, index).
StreamSpec benchmark_stream_spec(const BenchmarkSpec& bench, Split split, int index);
std::string benchmark_stream_id(Split split, int index);

struct StreamFeatures {
  std::string id;
  Eigen::MatrixXf framewise;  // channels x frames
  std::vector<EventInterval> events;

  int frame_count() const { return static_cast<int>(framewise.cols()); }
};

StreamFeatures featurize(const AnnotatedStream& stream,
                         const FrameConfig& frames = {},
                         const GammatoneConfig& gammatone = {});

struct ForegroundExample {
  int stream = 0;
  int frame = 0;
  bool foreground = false;
};

struct EventExample {
  int stream = 0;
  int frame = 0;
  int class_id = 0;
  DistancePair distances;  // normalized
};

struct TrainingSet {
  std::vector<ForegroundExample> dnn1;
  std::vector<EventExample> dnn2;
  NormalizationConstants normalization;
  int num_classes = 0;
};

// Max onset/offset distance (in frames) over all annotated events.
NormalizationConstants compute_normalization(std::span<const StreamFeatures> streams);

// Every frame becomes a fore-/background example; frames inside events also
// become multitask examples. Normalization constants are computed from these
// streams unless given. Streams with no frames are skipped with a warning.
TrainingSet make_training_set(std::span<const StreamFeatures> streams,
                              int num_classes,
                              std::optional<NormalizationConstants> normalization = {});

struct ManifestStream {
  std::string id;
  std::string split;                // "train" or "test"
  std::filesystem::path audio;      // relative to the manifest directory
  std::vector<EventInterval> events;
};

struct DatasetManifest {
  double sample_rate = 44100.0;
  double frame_s = 0.100;
  double hop_s = 0.010;
  std::vector<std::string> class_names;
  std::vector<ManifestStream> streams;
  std::string config_hash;
};

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path);

}  // namespace earlydet
