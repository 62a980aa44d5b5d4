#pragma once

// Event-wise evaluation. A detection matches a ground-truth event of the same
// class iff each interval's center lies inside the other; matching is greedy
// 1:1 in time order. F1 = 2TP / (2TP + FP + FN), ER = (FP + FN) / N_truth.

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "earlydet/inference.hpp"

namespace earlydet {

struct MatchResult {
  std::vector<std::pair<int, int>> pairs;  // (detected index, truth index)
  std::vector<int> insertions;             // unmatched detections
  std::vector<int> deletions;              // unmatched truths
};

bool centers_mutually_contained(const DetectedEvent& detected, const EventInterval& truth);

MatchResult match_events(std::span<const DetectedEvent> detected,
                         std::span<const EventInterval> truth);

struct EventCounts {
  int tp = 0;
  int fp = 0;
  int fn = 0;
  int n_truth = 0;

  EventCounts& operator+=(const EventCounts& other);
  std::optional<double> f1() const;  // absent when TP = FP = FN = 0
  std::optional<double> er() const;  // absent when N_truth = 0
  bool operator==(const EventCounts&) const = default;
};

// Per-class counts of one match (class taken from the event lists).
std::vector<EventCounts> count_matches(const MatchResult& match,
                                       std::span<const DetectedEvent> detected,
                                       std::span<const EventInterval> truth,
                                       int num_classes);

struct ClassMetrics {
  EventCounts counts;
  std::optional<double> f1;
  std::optional<double> er;
};

struct MetricsReport {
  std::vector<ClassMetrics> per_class;
  ClassMetrics overall;  // micro-average over pooled counts
};

MetricsReport compute_metrics(std::span<const EventCounts> per_class);
MetricsReport compute_metrics(const MatchResult& match,
                              std::span<const DetectedEvent> detected,
                              std::span<const EventInterval> truth, int num_classes);

// A stream as seen by evaluation: network outputs plus ground truth.
struct ScoredStream {
  std::string id;
  StreamPredictions predictions;
  std::vector<EventInterval> events;
};

// Frames of class-`truncate_class` events beyond their first `k` frames are
// withheld from the detector (their votes are zero); everything else is fed
// as-is. truncate_class < 0 disables truncation.
struct Truncation {
  int truncate_class = -1;
  int k = 0;
};

std::vector<DetectedEvent> detect_stream(const ScoredStream& stream,
                                         const DetectionThresholds& thresholds,
                                         const NormalizationConstants& normalization,
                                         Truncation truncation = {});

struct OfflineResult {
  MetricsReport metrics;
  std::vector<std::vector<DetectedEvent>> detections;  // per stream
};

OfflineResult evaluate_offline(std::span<const ScoredStream> streams,
                               const DetectionThresholds& thresholds,
                               const NormalizationConstants& normalization);

// {0, step, 2*step, ..., 1}, computed as i*step to avoid drift.
std::vector<double> threshold_grid(double step = 0.1);

// Index of the largest value; ties go to the larger threshold (later index).
std::size_t choose_threshold(std::span<const double> mean_f1);

struct CalibrationSettings {
  int folds = 9;
  double grid_step = 0.1;
};

struct CalibrationResult {
  DetectionThresholds thresholds;
  // mean_f1[c][g]: mean fold F1 of class c at grid point g.
  std::vector<std::vector<double>> mean_f1;
  std::vector<double> grid;
};

// Divisors: per-class maximum accumulated score over the given streams.
// Thresholds: grid search maximizing mean per-fold class F1, streams assigned
// to folds round-robin. Throws ConfigError if a class has no annotated events
// or there are fewer streams than folds.
CalibrationResult calibrate_thresholds(std::span<const ScoredStream> streams,
                                       const NormalizationConstants& normalization,
                                       int num_classes,
                                       const CalibrationSettings& settings = {});

struct CurvePoint {
  int k = 0;
  EventCounts counts;
  std::optional<double> f1;
  std::optional<double> er;
};

struct ClassCurve {
  int class_id = 0;
  std::vector<CurvePoint> points;  // ascending k; last point is untruncated
  ClassMetrics offline;
  int median_event_length = 0;
  int max_event_length = 0;
};

// Online protocol: for k = 0, step, 2*step, ... (final point = longest event
// of the class, i.e. no truncation), truncate that class's events to their
// first k frames, run the streaming detector and score the class.
std::vector<ClassCurve> online_curves(std::span<const ScoredStream> streams,
                                      const DetectionThresholds& thresholds,
                                      const NormalizationConstants& normalization,
                                      int num_classes, int k_step = 10);

// Least-squares slope of F1 (absent values as 0) against k.
double f1_trend_slope(const ClassCurve& curve);

std::string metrics_to_json(const MetricsReport& report,
                            std::span<const std::string> class_names,
                            const std::string& config_hash);
std::string metrics_to_csv(const MetricsReport& report,
                           std::span<const std::string> class_names,
                           const std::string& config_hash);
std::string curves_to_csv(std::span<const ClassCurve> curves,
                          std::span<const std::string> class_names,
                          const std::string& config_hash);
// Self-contained SVG line chart of F1 and ER against k with the offline
// values as dashed horizontal references.
std::string curve_to_svg(const ClassCurve& curve, const std::string& class_name);

}  // namespace earlydet
