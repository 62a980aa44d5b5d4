#pragma once

// Audio front end: 100 ms frames at a 10 ms hop, 64 log-gammatone
// coefficients per frame (ERB-spaced, 50 Hz to 22050 Hz), 5-frame context
// stacking, and the onset/offset distance targets used for regression.

#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "earlydet/nn.hpp"

namespace earlydet {

struct AudioBuffer {
  std::vector<double> samples;
  double sample_rate = 44100.0;
};

struct FrameConfig {
  double frame_s = 0.100;
  double hop_s = 0.010;

  int frame_length(double rate) const;
  int hop_length(double rate) const;
  // floor((len - frame) / hop) + 1, or 0 when shorter than one frame.
  int frame_count(std::size_t num_samples, double rate) const;
};

// Frame i covers samples [i*hop, i*hop + frame). Views into the buffer.
std::vector<std::span<const double>> frame_stream(const AudioBuffer& audio,
                                                  const FrameConfig& config = {});

struct GammatoneConfig {
  int channels = kCoefficients;
  double min_hz = 50.0;
  double max_hz = 22050.0;
  double energy_floor = 1e-10;
};

// Glasberg & Moore ERB bandwidth and ERB-rate scale.
double erb_bandwidth(double hz);
double erb_rate(double hz);
double erb_rate_to_hz(double erb);
// Center frequencies equally spaced on the ERB-rate scale, ascending,
// including both band edges.
std::vector<double> erb_center_frequencies(const GammatoneConfig& config);

// Spectral-weighting gammatone filterbank for a fixed frame length: each
// channel energy is the Hann-windowed power spectrum weighted by the squared
// 4th-order gammatone magnitude response centred on that channel.
class GammatoneFilterbank {
 public:
  GammatoneFilterbank(int frame_length, double sample_rate,
                      const GammatoneConfig& config = {});
  ~GammatoneFilterbank();
  GammatoneFilterbank(GammatoneFilterbank&&) noexcept;
  GammatoneFilterbank& operator=(GammatoneFilterbank&&) noexcept;

  // log(channel energy + floor); frame.size() must equal frame_length().
  Vector compute(std::span<const double> frame) const;

  int frame_length() const { return frame_length_; }
  double sample_rate() const { return sample_rate_; }
  const std::vector<double>& center_frequencies() const { return centers_; }
  const Matrix& weights() const { return weights_; }

 private:
  struct Fft;
  int frame_length_;
  double sample_rate_;
  GammatoneConfig config_;
  std::vector<double> centers_;
  Vector window_;
  double window_power_;
  Matrix weights_;  // channels x (frame/2 + 1)
  std::unique_ptr<Fft> fft_;
};

Vector gammatone_features(std::span<const double> frame, double sample_rate,
                          const GammatoneConfig& config = {});

// Framewise log-gammatone matrix (channels x frames) for a whole buffer,
// rounded to float storage.
Eigen::MatrixXf extract_framewise(const AudioBuffer& audio,
                                  const FrameConfig& frames = {},
                                  const GammatoneConfig& gammatone = {});

struct FeatureFrame {
  Vector values;  // context * channels
  int frame_index = 0;
  double time_s = 0.0;
};

// Concatenates frames i-2..i+2 (edge frames replicated at the boundaries).
// Throws InputError on empty input, ContractViolation on i out of range.
FeatureFrame stack_context(const Eigen::MatrixXf& framewise, int i,
                           const FrameConfig& config = {},
                           int context = kContextFrames);
// Same layout, written into a column of a caller-provided matrix.
void stack_context_into(const Eigen::MatrixXf& framewise, int i, int context,
                        Eigen::Ref<Vector> out);

struct EventInterval {
  int class_id = 0;
  int onset = 0;   // frame index, inclusive
  int offset = 0;  // frame index, inclusive

  int length() const { return offset - onset + 1; }
  double center() const { return 0.5 * (onset + offset); }
  bool operator==(const EventInterval&) const = default;
};

struct DistancePair {
  double on = 0.0;
  double off = 0.0;
};

struct NormalizationConstants {
  double max_on = 1.0;
  double max_off = 1.0;

  void validate() const;
};

// (i - onset, offset - i) in frames. ContractViolation if i is outside.
DistancePair distance_targets(const EventInterval& event, int i);
DistancePair normalize_distances(const DistancePair& frames,
                                 const NormalizationConstants& k);
DistancePair restore_distances(const DistancePair& normalized,
                               const NormalizationConstants& k);

}  // namespace earlydet
