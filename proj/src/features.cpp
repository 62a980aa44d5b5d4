#include "earlydet/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <fftw3.h>

#include "earlydet/error.hpp"

namespace earlydet {

int FrameConfig::frame_length(double rate) const {
  return static_cast<int>(std::lround(frame_s * rate));
}

int FrameConfig::hop_length(double rate) const {
  return static_cast<int>(std::lround(hop_s * rate));
}

int FrameConfig::frame_count(std::size_t num_samples, double rate) const {
  const auto frame = static_cast<std::size_t>(frame_length(rate));
  const auto hop = static_cast<std::size_t>(hop_length(rate));
  if (frame == 0 || hop == 0) throw ConfigError("frame and hop must be positive");
  if (num_samples < frame) return 0;
  return static_cast<int>((num_samples - frame) / hop + 1);
}

std::vector<std::span<const double>> frame_stream(const AudioBuffer& audio,
                                                  const FrameConfig& config) {
  const int count = config.frame_count(audio.samples.size(), audio.sample_rate);
  const auto frame = static_cast<std::size_t>(config.frame_length(audio.sample_rate));
  const auto hop = static_cast<std::size_t>(config.hop_length(audio.sample_rate));
  std::vector<std::span<const double>> frames;
  frames.reserve(count);
  const std::span<const double> all(audio.samples);
  for (int i = 0; i < count; ++i) {
    frames.push_back(all.subspan(static_cast<std::size_t>(i) * hop, frame));
  }
  return frames;
}

double erb_bandwidth(double hz) { return 24.7 * (4.37e-3 * hz + 1.0); }

double erb_rate(double hz) { return 21.4 * std::log10(4.37e-3 * hz + 1.0); }

double erb_rate_to_hz(double erb) {
  return (std::pow(10.0, erb / 21.4) - 1.0) / 4.37e-3;
}

std::vector<double> erb_center_frequencies(const GammatoneConfig& config) {
  if (config.channels < 1 || !(config.min_hz > 0.0) ||
      !(config.max_hz > config.min_hz)) {
    throw ConfigError("invalid gammatone band configuration");
  }
  std::vector<double> centers(config.channels);
  if (config.channels == 1) {
    centers[0] = config.min_hz;
    return centers;
  }
  const double lo = erb_rate(config.min_hz);
  const double hi = erb_rate(config.max_hz);
  for (int c = 0; c < config.channels; ++c) {
    centers[c] = erb_rate_to_hz(lo + (hi - lo) * c / (config.channels - 1));
  }
  centers.front() = config.min_hz;
  centers.back() = config.max_hz;
  return centers;
}

// FFTW plans are not re-entrant to create; each filterbank owns its plan and
// scratch buffers, so one instance must not be shared across threads.
struct GammatoneFilterbank::Fft {
  double* input = nullptr;
  fftw_complex* output = nullptr;
  fftw_plan plan = nullptr;

  explicit Fft(int n) {
    input = fftw_alloc_real(n);
    output = fftw_alloc_complex(n / 2 + 1);
    plan = fftw_plan_dft_r2c_1d(n, input, output, FFTW_ESTIMATE);
  }
  ~Fft() {
    fftw_destroy_plan(plan);
    fftw_free(output);
    fftw_free(input);
  }
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;
};

GammatoneFilterbank::GammatoneFilterbank(int frame_length, double sample_rate,
                                         const GammatoneConfig& config)
    : frame_length_(frame_length),
      sample_rate_(sample_rate),
      config_(config),
      centers_(erb_center_frequencies(config)) {
  if (frame_length < 2) throw ConfigError("frame length must be >= 2");
  if (!(sample_rate > 0.0)) throw ConfigError("sample rate must be positive");

  window_.resize(frame_length);
  for (int i = 0; i < frame_length; ++i) {
    window_[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / frame_length);
  }
  window_power_ = window_.squaredNorm();

  const int bins = frame_length / 2 + 1;
  weights_.resize(config.channels, bins);
  for (int c = 0; c < config.channels; ++c) {
    const double bandwidth = 1.019 * erb_bandwidth(centers_[c]);
    for (int k = 0; k < bins; ++k) {
      const double hz = k * sample_rate / frame_length;
      const double x = (hz - centers_[c]) / bandwidth;
      // |H(f)|^2 for a 4th-order gammatone: (1 + x^2)^-4.
      const double magnitude_sq = 1.0 / std::pow(1.0 + x * x, 4);
      weights_(c, k) = magnitude_sq;
    }
  }
  fft_ = std::make_unique<Fft>(frame_length);
}

GammatoneFilterbank::~GammatoneFilterbank() = default;
GammatoneFilterbank::GammatoneFilterbank(GammatoneFilterbank&&) noexcept = default;
GammatoneFilterbank& GammatoneFilterbank::operator=(GammatoneFilterbank&&) noexcept =
    default;

Vector GammatoneFilterbank::compute(std::span<const double> frame) const {
  if (static_cast<int>(frame.size()) != frame_length_) {
    throw ConfigError("frame has " + std::to_string(frame.size()) +
                      " samples, filterbank expects " +
                      std::to_string(frame_length_));
  }
  for (int i = 0; i < frame_length_; ++i) fft_->input[i] = frame[i] * window_[i];
  fftw_execute(fft_->plan);

  const int bins = frame_length_ / 2 + 1;
  Vector power(bins);
  for (int k = 0; k < bins; ++k) {
    const double re = fft_->output[k][0];
    const double im = fft_->output[k][1];
    power[k] = (re * re + im * im) / window_power_;
  }
  Vector energy = weights_ * power;
  return (energy.array() + config_.energy_floor).log().matrix();
}

Vector gammatone_features(std::span<const double> frame, double sample_rate,
                          const GammatoneConfig& config) {
  GammatoneFilterbank bank(static_cast<int>(frame.size()), sample_rate, config);
  return bank.compute(frame);
}

Eigen::MatrixXf extract_framewise(const AudioBuffer& audio,
                                  const FrameConfig& frames,
                                  const GammatoneConfig& gammatone) {
  const auto views = frame_stream(audio, frames);
  Eigen::MatrixXf out(gammatone.channels, static_cast<Eigen::Index>(views.size()));
  if (views.empty()) return out;
  GammatoneFilterbank bank(frames.frame_length(audio.sample_rate),
                           audio.sample_rate, gammatone);
  for (std::size_t i = 0; i < views.size(); ++i) {
    out.col(static_cast<Eigen::Index>(i)) = bank.compute(views[i]).cast<float>();
  }
  return out;
}

void stack_context_into(const Eigen::MatrixXf& framewise, int i, int context,
                        Eigen::Ref<Vector> out) {
  const auto count = static_cast<int>(framewise.cols());
  const auto rows = framewise.rows();
  const int half = context / 2;
  for (int k = 0; k < context; ++k) {
    const int src = std::clamp(i - half + k, 0, count - 1);
    out.segment(k * rows, rows) = framewise.col(src).cast<double>();
  }
}

FeatureFrame stack_context(const Eigen::MatrixXf& framewise, int i,
                           const FrameConfig& config, int context) {
  if (framewise.cols() == 0 || framewise.rows() == 0) {
    throw InputError("stack_context on an empty feature sequence");
  }
  if (i < 0 || i >= framewise.cols()) {
    throw ContractViolation("frame index " + std::to_string(i) + " out of range");
  }
  FeatureFrame frame;
  frame.values.resize(framewise.rows() * context);
  stack_context_into(framewise, i, context, frame.values);
  frame.frame_index = i;
  frame.time_s = i * config.hop_s + 0.5 * config.frame_s;
  return frame;
}

void NormalizationConstants::validate() const {
  if (!(max_on > 0.0) || !(max_off > 0.0)) {
    throw ConfigError("distance normalization maxima must be positive");
  }
}

DistancePair distance_targets(const EventInterval& event, int i) {
  if (i < event.onset || i > event.offset) {
    throw ContractViolation("frame " + std::to_string(i) +
                            " lies outside event [" + std::to_string(event.onset) +
                            ", " + std::to_string(event.offset) + "]");
  }
  return {static_cast<double>(i - event.onset),
          static_cast<double>(event.offset - i)};
}

DistancePair normalize_distances(const DistancePair& frames,
                                 const NormalizationConstants& k) {
  k.validate();
  return {std::clamp(frames.on / k.max_on, 0.0, 1.0),
          std::clamp(frames.off / k.max_off, 0.0, 1.0)};
}

DistancePair restore_distances(const DistancePair& normalized,
                               const NormalizationConstants& k) {
  k.validate();
  return {normalized.on * k.max_on, normalized.off * k.max_off};
}

}  // namespace earlydet
