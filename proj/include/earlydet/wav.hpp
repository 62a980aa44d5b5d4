#pragma once

// Mono WAV I/O (16-bit PCM or 32-bit IEEE float) and the framewise feature
// file format: a short text header followed by little-endian float32 rows.

#include <filesystem>
#include <string>

#include "earlydet/features.hpp"

namespace earlydet {

enum class WavEncoding { kPcm16, kFloat32 };

// Throws MissingArtifact if the file does not exist, InputError on
// multi-channel or unsupported encodings.
AudioBuffer read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const AudioBuffer& audio,
               WavEncoding encoding = WavEncoding::kPcm16);

// The samples a PCM16 write followed by a read would return.
AudioBuffer quantize_pcm16(const AudioBuffer& audio);

struct FeatureFile {
  Eigen::MatrixXf framewise;  // dim x count in memory; rows on disk
  double hop_s = 0.010;
  double frame_s = 0.100;
  std::string config_hash;
};

void write_feature_file(const std::filesystem::path& path, const FeatureFile& file);
FeatureFile read_feature_file(const std::filesystem::path& path);

}  // namespace earlydet
