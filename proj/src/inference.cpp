#include "earlydet/inference.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "earlydet/error.hpp"

namespace earlydet {

RoiInterval roi(int m, const DistancePair& restored) {
  const int lo = static_cast<int>(std::ceil(m - restored.on));
  const int hi = static_cast<int>(std::floor(m + restored.off));
  return {std::max(0, lo), hi};
}

FrameContribution frame_confidence(int m, double p_fg, const Vector& class_posterior,
                                   const DistancePair& restored) {
  return {m, roi(m, restored), p_fg * class_posterior};
}

ConfidenceTrack::ConfidenceTrack(int num_classes) : scores_(num_classes) {}

void ConfidenceTrack::accumulate(const FrameContribution& contrib) {
  if (contrib.source != consumed_) {
    throw ContractViolation("frame " + std::to_string(contrib.source) +
                            " arrived out of order; expected " +
                            std::to_string(consumed_));
  }
  if (contrib.weights.size() != num_classes()) {
    throw ConfigError("contribution class count does not match track");
  }
  const int lo = contrib.interval.lo;
  const int hi = contrib.interval.hi;
  if (hi >= extent_) {
    extent_ = hi + 1;
    for (auto& s : scores_) s.resize(extent_, 0.0);
  }
  for (int c = 0; c < num_classes(); ++c) {
    const double w = contrib.weights[c];
    if (w == 0.0) continue;
    auto& s = scores_[c];
    for (int n = lo; n <= hi; ++n) s[n] += w;
  }
  ++consumed_;
}

double ConfidenceTrack::score(int class_id, int n) const {
  const auto& s = scores_.at(class_id);
  return n >= 0 && n < static_cast<int>(s.size()) ? s[n] : 0.0;
}

double DetectionThresholds::normalized(int class_id, double raw) const {
  return std::min(raw / divisors[class_id], 1.0);
}

bool DetectionThresholds::above(int class_id, double raw) const {
  const double v = normalized(class_id, raw);
  return v > 0.0 && v >= beta[class_id];
}

void DetectionThresholds::validate() const {
  if (beta.size() != divisors.size()) {
    throw ConfigError("threshold and divisor counts differ");
  }
  for (std::size_t c = 0; c < beta.size(); ++c) {
    if (!(beta[c] >= 0.0 && beta[c] <= 1.0)) {
      throw ConfigError("threshold for class " + std::to_string(c) + " outside [0, 1]");
    }
    if (!(divisors[c] > 0.0)) {
      throw ConfigError("score divisor for class " + std::to_string(c) + " must be > 0");
    }
  }
}

std::vector<DetectedEvent> segment_events(const ConfidenceTrack& track,
                                          const DetectionThresholds& thresholds,
                                          int limit) {
  thresholds.validate();
  if (thresholds.num_classes() != track.num_classes()) {
    throw ConfigError("threshold set does not match track classes");
  }
  std::vector<DetectedEvent> events;
  for (int c = 0; c < track.num_classes(); ++c) {
    const auto& s = track.scores(c);
    const int end = limit < 0 ? static_cast<int>(s.size())
                              : std::min(limit, static_cast<int>(s.size()));
    int n = 0;
    while (n < end) {
      if (!thresholds.above(c, s[n])) {
        ++n;
        continue;
      }
      DetectedEvent ev{c, n, n, 0.0, -1};
      while (n < end && thresholds.above(c, s[n])) {
        ev.peak_score = std::max(ev.peak_score, thresholds.normalized(c, s[n]));
        ev.offset = n++;
      }
      events.push_back(ev);
    }
  }
  return events;
}

FramePrediction StreamPredictions::frame(int m) const {
  return {p_fg[m], class_posterior.col(m), {distances(0, m), distances(1, m)}};
}

StreamingDetector::StreamingDetector(DetectionThresholds thresholds,
                                     NormalizationConstants normalization)
    : thresholds_(std::move(thresholds)),
      normalization_(normalization),
      track_(thresholds_.num_classes()) {
  thresholds_.validate();
  normalization_.validate();
}

std::vector<DetectedEvent> StreamingDetector::step(int m, const FramePrediction& prediction) {
  const auto contrib = frame_confidence(
      m, prediction.p_fg, prediction.class_posterior,
      restore_distances(prediction.distances, normalization_));
  const int lo = contrib.interval.lo;
  const int hi = contrib.interval.hi;
  const int width = std::max(0, hi - lo + 1);

  // Snapshot the ROI before accumulating so crossings can be identified.
  before_.assign(static_cast<std::size_t>(width) * track_.num_classes(), 0.0);
  for (int c = 0; c < track_.num_classes(); ++c) {
    for (int n = lo; n <= hi; ++n) {
      before_[static_cast<std::size_t>(c) * width + (n - lo)] = track_.score(c, n);
    }
  }
  track_.accumulate(contrib);

  std::vector<DetectedEvent> fresh;
  for (int c = 0; c < track_.num_classes(); ++c) {
    if (contrib.weights[c] == 0.0) continue;
    const auto& s = track_.scores(c);
    auto crossed = [&](int n) {
      return n >= lo && n <= hi &&
             !thresholds_.above(c, before_[static_cast<std::size_t>(c) * width + (n - lo)]) &&
             thresholds_.above(c, s[n]);
    };
    int n = lo;
    while (n <= hi) {
      if (!crossed(n)) {
        ++n;
        continue;
      }
      int a = n;
      int b = n;
      while (a > 0 && thresholds_.above(c, s[a - 1])) --a;
      while (b + 1 < static_cast<int>(s.size()) && thresholds_.above(c, s[b + 1])) ++b;
      // A run is new only if none of its indices was above threshold before.
      bool all_new = true;
      for (int k = a; k <= b && all_new; ++k) all_new = crossed(k);
      if (all_new) {
        DetectedEvent ev{c, a, b, 0.0, m};
        for (int k = a; k <= b; ++k) {
          ev.peak_score = std::max(ev.peak_score, thresholds_.normalized(c, s[k]));
        }
        fresh.push_back(ev);
        triggers_.push_back(ev);
      }
      n = b + 1;
    }
  }
  return fresh;
}

std::vector<DetectedEvent> StreamingDetector::finish(int limit) const {
  auto events = segment_events(track_, thresholds_, limit);
  for (auto& ev : events) {
    for (const auto& t : triggers_) {
      if (t.class_id != ev.class_id || t.offset < ev.onset || t.onset > ev.offset) continue;
      if (ev.trigger_frame < 0 || t.trigger_frame < ev.trigger_frame) {
        ev.trigger_frame = t.trigger_frame;
      }
    }
  }
  return events;
}

ConfidenceTrack accumulate_stream(const StreamPredictions& predictions,
                                  const NormalizationConstants& normalization) {
  ConfidenceTrack track(predictions.num_classes());
  for (int m = 0; m < predictions.frame_count(); ++m) {
    const auto f = predictions.frame(m);
    track.accumulate(frame_confidence(m, f.p_fg, f.class_posterior,
                                      restore_distances(f.distances, normalization)));
  }
  return track;
}

}  // namespace earlydet
