#pragma once

// Early-detection inference. Every frame m votes for the frame indices inside
// its region of interest [m - d_on, m + d_off] (predicted distances restored
// to frames) with weight P(foreground | x_m) * P(class c | x_m). Votes are
// only ever added, so each accumulated score f_c(n) is non-decreasing in the
// number of consumed frames and a threshold crossing is never undone.

#include <span>
#include <vector>

#include "earlydet/features.hpp"

namespace earlydet {

struct RoiInterval {
  int lo = 0;
  int hi = 0;
};

// lo = ceil(m - d_on) clamped to >= 0, hi = floor(m + d_off).
RoiInterval roi(int m, const DistancePair& restored);

struct FrameContribution {
  int source = 0;
  RoiInterval interval;
  Vector weights;  // per class, p_fg * class posterior
};

FrameContribution frame_confidence(int m, double p_fg, const Vector& class_posterior,
                                   const DistancePair& restored);

class ConfidenceTrack {
 public:
  explicit ConfidenceTrack(int num_classes = 0);

  // Adds contrib.weights[c] to f_c(n) for n in the interval. Frames must
  // arrive in order: contrib.source == consumed(), else ContractViolation.
  void accumulate(const FrameContribution& contrib);

  double score(int class_id, int n) const;
  const std::vector<double>& scores(int class_id) const { return scores_[class_id]; }
  int num_classes() const { return static_cast<int>(scores_.size()); }
  // Number of frames consumed so far (the next expected source index).
  int consumed() const { return consumed_; }
  // One past the largest index any contribution has touched.
  int extent() const { return extent_; }

  bool operator==(const ConfidenceTrack&) const = default;

 private:
  std::vector<std::vector<double>> scores_;
  int consumed_ = 0;
  int extent_ = 0;
};

// Per-class thresholds beta_c on the calibrated scale, and the divisors that
// map raw accumulated scores onto it: normalized = min(raw / divisor_c, 1).
struct DetectionThresholds {
  std::vector<double> beta;
  std::vector<double> divisors;

  int num_classes() const { return static_cast<int>(beta.size()); }
  double normalized(int class_id, double raw) const;
  // normalized > 0 and normalized >= beta_c.
  bool above(int class_id, double raw) const;
  void validate() const;
};

struct DetectedEvent {
  int class_id = 0;
  int onset = 0;
  int offset = 0;
  double peak_score = 0.0;  // normalized
  int trigger_frame = -1;   // frame whose contribution first crossed beta_c

  double center() const { return 0.5 * (onset + offset); }
  bool operator==(const DetectedEvent&) const = default;
};

// Maximal runs of indices above threshold, per class, over [0, limit)
// (limit < 0 means the whole track). Ordered by class, then onset.
std::vector<DetectedEvent> segment_events(const ConfidenceTrack& track,
                                          const DetectionThresholds& thresholds,
                                          int limit = -1);

struct FramePrediction {
  double p_fg = 0.0;
  Vector class_posterior;
  DistancePair distances;  // normalized
};

// Network outputs for every frame of a stream, column m for frame m.
struct StreamPredictions {
  Vector p_fg;
  Matrix class_posterior;  // C x M
  Matrix distances;        // 2 x M, normalized (onset, offset)

  int frame_count() const { return static_cast<int>(p_fg.size()); }
  int num_classes() const { return static_cast<int>(class_posterior.rows()); }
  FramePrediction frame(int m) const;
};

// Incremental consumer for one stream. step() must be called with
// m = 0, 1, 2, ... in order.
class StreamingDetector {
 public:
  StreamingDetector(DetectionThresholds thresholds, NormalizationConstants normalization);

  // Accumulates frame m and returns the runs that crossed their class
  // threshold at this step, each reported once with its current extent.
  std::vector<DetectedEvent> step(int m, const FramePrediction& prediction);

  // Final segmentation (limit as in segment_events) with trigger frames
  // filled in from the recorded crossings.
  std::vector<DetectedEvent> finish(int limit = -1) const;

  const ConfidenceTrack& track() const { return track_; }
  const std::vector<DetectedEvent>& triggers() const { return triggers_; }
  const DetectionThresholds& thresholds() const { return thresholds_; }

 private:
  DetectionThresholds thresholds_;
  NormalizationConstants normalization_;
  ConfidenceTrack track_;
  std::vector<DetectedEvent> triggers_;
  std::vector<double> before_;
};

// Accumulated track over all frames of a stream (same accumulation order as
// the streaming detector).
ConfidenceTrack accumulate_stream(const StreamPredictions& predictions,
                                  const NormalizationConstants& normalization);

}  // namespace earlydet
