#include "earlydet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "earlydet/error.hpp"
#include "json.hpp"

namespace earlydet {

bool centers_mutually_contained(const DetectedEvent& detected, const EventInterval& truth) {
  const double dc = detected.center();
  const double tc = truth.center();
  return dc >= truth.onset && dc <= truth.offset && tc >= detected.onset &&
         tc <= detected.offset;
}

MatchResult match_events(std::span<const DetectedEvent> detected,
                         std::span<const EventInterval> truth) {
  std::vector<int> det_order(detected.size());
  std::iota(det_order.begin(), det_order.end(), 0);
  std::stable_sort(det_order.begin(), det_order.end(), [&](int a, int b) {
    return detected[a].onset < detected[b].onset;
  });
  std::vector<int> truth_order(truth.size());
  std::iota(truth_order.begin(), truth_order.end(), 0);
  std::stable_sort(truth_order.begin(), truth_order.end(), [&](int a, int b) {
    return truth[a].onset < truth[b].onset;
  });

  MatchResult result;
  std::vector<char> truth_used(truth.size(), 0);
  for (int d : det_order) {
    bool matched = false;
    for (int t : truth_order) {
      if (truth_used[t] || truth[t].class_id != detected[d].class_id) continue;
      if (!centers_mutually_contained(detected[d], truth[t])) continue;
      truth_used[t] = 1;
      result.pairs.emplace_back(d, t);
      matched = true;
      break;
    }
    if (!matched) result.insertions.push_back(d);
  }
  for (int t : truth_order) {
    if (!truth_used[t]) result.deletions.push_back(t);
  }
  return result;
}

EventCounts& EventCounts::operator+=(const EventCounts& other) {
  tp += other.tp;
  fp += other.fp;
  fn += other.fn;
  n_truth += other.n_truth;
  return *this;
}

std::optional<double> EventCounts::f1() const {
  const int denom = 2 * tp + fp + fn;
  if (denom == 0) return std::nullopt;
  return 2.0 * tp / denom;
}

std::optional<double> EventCounts::er() const {
  if (n_truth == 0) return std::nullopt;
  return static_cast<double>(fp + fn) / n_truth;
}

std::vector<EventCounts> count_matches(const MatchResult& match,
                                       std::span<const DetectedEvent> detected,
                                       std::span<const EventInterval> truth,
                                       int num_classes) {
  std::vector<EventCounts> counts(num_classes);
  auto slot = [&](int class_id) -> EventCounts& {
    if (class_id < 0 || class_id >= num_classes) {
      throw InputError("event class " + std::to_string(class_id) + " out of range");
    }
    return counts[class_id];
  };
  for (const auto& t : truth) ++slot(t.class_id).n_truth;
  for (const auto& [d, t] : match.pairs) ++slot(truth[t].class_id).tp;
  for (int d : match.insertions) ++slot(detected[d].class_id).fp;
  for (int t : match.deletions) ++slot(truth[t].class_id).fn;
  return counts;
}

MetricsReport compute_metrics(std::span<const EventCounts> per_class) {
  MetricsReport report;
  for (const auto& c : per_class) {
    report.per_class.push_back({c, c.f1(), c.er()});
    report.overall.counts += c;
  }
  report.overall.f1 = report.overall.counts.f1();
  report.overall.er = report.overall.counts.er();
  return report;
}

MetricsReport compute_metrics(const MatchResult& match,
                              std::span<const DetectedEvent> detected,
                              std::span<const EventInterval> truth, int num_classes) {
  const auto counts = count_matches(match, detected, truth, num_classes);
  return compute_metrics(counts);
}

std::vector<DetectedEvent> detect_stream(const ScoredStream& stream,
                                         const DetectionThresholds& thresholds,
                                         const NormalizationConstants& normalization,
                                         Truncation truncation) {
  const int frames = stream.predictions.frame_count();
  std::vector<char> withheld(frames, 0);
  if (truncation.truncate_class >= 0) {
    for (const auto& ev : stream.events) {
      if (ev.class_id != truncation.truncate_class) continue;
      for (int m = std::max(0, ev.onset + truncation.k); m <= std::min(frames - 1, ev.offset);
           ++m) {
        withheld[m] = 1;
      }
    }
  }
  StreamingDetector detector(thresholds, normalization);
  for (int m = 0; m < frames; ++m) {
    FramePrediction f = stream.predictions.frame(m);
    if (withheld[m]) f.p_fg = 0.0;
    detector.step(m, f);
  }
  return detector.finish(frames);
}

OfflineResult evaluate_offline(std::span<const ScoredStream> streams,
                               const DetectionThresholds& thresholds,
                               const NormalizationConstants& normalization) {
  const int classes = thresholds.num_classes();
  OfflineResult result;
  std::vector<EventCounts> pooled(classes);
  for (const auto& stream : streams) {
    auto detections = detect_stream(stream, thresholds, normalization);
    const auto match = match_events(detections, stream.events);
    const auto counts = count_matches(match, detections, stream.events, classes);
    for (int c = 0; c < classes; ++c) pooled[c] += counts[c];
    result.detections.push_back(std::move(detections));
  }
  result.metrics = compute_metrics(pooled);
  return result;
}

std::vector<double> threshold_grid(double step) {
  if (!(step > 0.0) || step > 1.0) throw ConfigError("grid step must be in (0, 1]");
  const int count = static_cast<int>(std::floor(1.0 / step + 1e-9));
  std::vector<double> grid;
  for (int i = 0; i <= count; ++i) grid.push_back(i * step);
  return grid;
}

std::size_t choose_threshold(std::span<const double> mean_f1) {
  if (mean_f1.empty()) throw ConfigError("empty threshold grid");
  std::size_t best = 0;
  for (std::size_t g = 1; g < mean_f1.size(); ++g) {
    if (mean_f1[g] >= mean_f1[best]) best = g;
  }
  return best;
}

CalibrationResult calibrate_thresholds(std::span<const ScoredStream> streams,
                                       const NormalizationConstants& normalization,
                                       int num_classes,
                                       const CalibrationSettings& settings) {
  if (settings.folds < 1) throw ConfigError("folds must be >= 1");
  if (static_cast<int>(streams.size()) < settings.folds) {
    throw ConfigError("calibration needs at least " + std::to_string(settings.folds) +
                      " streams, got " + std::to_string(streams.size()));
  }
  std::vector<int> truth_per_class(num_classes, 0);
  for (const auto& s : streams) {
    for (const auto& e : s.events) {
      if (e.class_id >= 0 && e.class_id < num_classes) ++truth_per_class[e.class_id];
    }
  }
  for (int c = 0; c < num_classes; ++c) {
    if (truth_per_class[c] == 0) {
      throw ConfigError("class " + std::to_string(c) + " is absent from calibration data");
    }
  }

  std::vector<ConfidenceTrack> tracks;
  std::vector<double> divisors(num_classes, 0.0);
  for (const auto& s : streams) {
    tracks.push_back(accumulate_stream(s.predictions, normalization));
    const int limit = s.predictions.frame_count();
    for (int c = 0; c < num_classes; ++c) {
      const auto& scores = tracks.back().scores(c);
      const int end = std::min(limit, static_cast<int>(scores.size()));
      for (int n = 0; n < end; ++n) divisors[c] = std::max(divisors[c], scores[n]);
    }
  }
  for (auto& d : divisors) {
    if (!(d > 0.0)) d = 1.0;
  }

  CalibrationResult result;
  result.grid = threshold_grid(settings.grid_step);
  const auto grid_size = result.grid.size();
  std::vector<std::vector<double>> f1_sum(num_classes, std::vector<double>(grid_size, 0.0));
  std::vector<std::vector<int>> f1_folds(num_classes, std::vector<int>(grid_size, 0));

  for (int fold = 0; fold < settings.folds; ++fold) {
    for (std::size_t g = 0; g < grid_size; ++g) {
      DetectionThresholds trial{std::vector<double>(num_classes, result.grid[g]), divisors};
      std::vector<EventCounts> counts(num_classes);
      for (std::size_t s = 0; s < streams.size(); ++s) {
        if (static_cast<int>(s) % settings.folds != fold) continue;
        const auto detections =
            segment_events(tracks[s], trial, streams[s].predictions.frame_count());
        const auto match = match_events(detections, streams[s].events);
        const auto per = count_matches(match, detections, streams[s].events, num_classes);
        for (int c = 0; c < num_classes; ++c) counts[c] += per[c];
      }
      for (int c = 0; c < num_classes; ++c) {
        if (auto f1 = counts[c].f1()) {
          f1_sum[c][g] += *f1;
          ++f1_folds[c][g];
        }
      }
    }
  }

  result.thresholds.divisors = divisors;
  result.mean_f1.assign(num_classes, std::vector<double>(grid_size, 0.0));
  for (int c = 0; c < num_classes; ++c) {
    for (std::size_t g = 0; g < grid_size; ++g) {
      if (f1_folds[c][g] > 0) result.mean_f1[c][g] = f1_sum[c][g] / f1_folds[c][g];
    }
    result.thresholds.beta.push_back(result.grid[choose_threshold(result.mean_f1[c])]);
  }
  return result;
}

std::vector<ClassCurve> online_curves(std::span<const ScoredStream> streams,
                                      const DetectionThresholds& thresholds,
                                      const NormalizationConstants& normalization,
                                      int num_classes, int k_step) {
  if (k_step < 1) throw ConfigError("k step must be >= 1");
  std::vector<ClassCurve> curves;
  for (int c = 0; c < num_classes; ++c) {
    ClassCurve curve;
    curve.class_id = c;
    std::vector<int> lengths;
    for (const auto& s : streams) {
      for (const auto& e : s.events) {
        if (e.class_id == c) lengths.push_back(e.length());
      }
    }
    if (lengths.empty()) {
      curves.push_back(std::move(curve));
      continue;
    }
    std::sort(lengths.begin(), lengths.end());
    curve.max_event_length = lengths.back();
    const auto mid = lengths.size() / 2;
    curve.median_event_length = lengths.size() % 2 == 1
                                    ? lengths[mid]
                                    : (lengths[mid - 1] + lengths[mid]) / 2;

    std::vector<int> ks;
    for (int k = 0; k < curve.max_event_length; k += k_step) ks.push_back(k);
    ks.push_back(curve.max_event_length);

    for (int k : ks) {
      EventCounts pooled;
      for (const auto& s : streams) {
        const auto detections = detect_stream(s, thresholds, normalization, {c, k});
        const auto match = match_events(detections, s.events);
        pooled += count_matches(match, detections, s.events, num_classes)[c];
      }
      curve.points.push_back({k, pooled, pooled.f1(), pooled.er()});
    }
    const auto& last = curve.points.back();
    curve.offline = {last.counts, last.f1, last.er};
    curves.push_back(std::move(curve));
  }
  return curves;
}

double f1_trend_slope(const ClassCurve& curve) {
  const auto n = static_cast<double>(curve.points.size());
  if (curve.points.size() < 2) return 0.0;
  double mean_k = 0.0;
  double mean_f = 0.0;
  for (const auto& p : curve.points) {
    mean_k += p.k;
    mean_f += p.f1.value_or(0.0);
  }
  mean_k /= n;
  mean_f /= n;
  double cov = 0.0;
  double var = 0.0;
  for (const auto& p : curve.points) {
    cov += (p.k - mean_k) * (p.f1.value_or(0.0) - mean_f);
    var += (p.k - mean_k) * (p.k - mean_k);
  }
  return var > 0.0 ? cov / var : 0.0;
}

namespace {

nlohmann::ordered_json metrics_json(const ClassMetrics& m) {
  nlohmann::ordered_json j;
  j["tp"] = m.counts.tp;
  j["fp"] = m.counts.fp;
  j["fn"] = m.counts.fn;
  j["n_truth"] = m.counts.n_truth;
  j["f1"] = m.f1 ? nlohmann::ordered_json(*m.f1) : nlohmann::ordered_json(nullptr);
  j["er"] = m.er ? nlohmann::ordered_json(*m.er) : nlohmann::ordered_json(nullptr);
  return j;
}

std::string class_label(std::span<const std::string> names, std::size_t c) {
  return c < names.size() ? names[c] : "class_" + std::to_string(c);
}

std::string format_optional(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", *v);
  return buf;
}

}  // namespace

std::string metrics_to_json(const MetricsReport& report,
                            std::span<const std::string> class_names,
                            const std::string& config_hash) {
  nlohmann::ordered_json doc;
  doc["config_hash"] = config_hash;
  auto& classes = doc["per_class"] = nlohmann::ordered_json::object();
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    classes[class_label(class_names, c)] = metrics_json(report.per_class[c]);
  }
  doc["overall"] = metrics_json(report.overall);
  return doc.dump(2) + "\n";
}

std::string metrics_to_csv(const MetricsReport& report,
                           std::span<const std::string> class_names,
                           const std::string& config_hash) {
  std::ostringstream out;
  out << "# config_hash=" << config_hash << "\n";
  out << "class,tp,fp,fn,n_truth,f1,er\n";
  auto row = [&](const std::string& name, const ClassMetrics& m) {
    out << name << "," << m.counts.tp << "," << m.counts.fp << "," << m.counts.fn << ","
        << m.counts.n_truth << "," << format_optional(m.f1) << "," << format_optional(m.er)
        << "\n";
  };
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    row(class_label(class_names, c), report.per_class[c]);
  }
  row("overall", report.overall);
  return out.str();
}

std::string curves_to_csv(std::span<const ClassCurve> curves,
                          std::span<const std::string> class_names,
                          const std::string& config_hash) {
  std::ostringstream out;
  out << "# config_hash=" << config_hash << "\n";
  out << "class,k,f1,er\n";
  for (const auto& curve : curves) {
    for (const auto& p : curve.points) {
      out << class_label(class_names, curve.class_id) << "," << p.k << ","
          << format_optional(p.f1) << "," << format_optional(p.er) << "\n";
    }
  }
  return out.str();
}

std::string curve_to_svg(const ClassCurve& curve, const std::string& class_name) {
  constexpr double kWidth = 640.0;
  constexpr double kHeight = 360.0;
  constexpr double kLeft = 56.0;
  constexpr double kRight = 20.0;
  constexpr double kTop = 36.0;
  constexpr double kBottom = 44.0;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;

  double max_k = 1.0;
  double max_y = 1.0;
  for (const auto& p : curve.points) {
    max_k = std::max(max_k, static_cast<double>(p.k));
    max_y = std::max(max_y, p.er.value_or(0.0));
  }
  auto x = [&](double k) { return kLeft + plot_w * k / max_k; };
  auto y = [&](double v) { return kTop + plot_h * (1.0 - v / max_y); };

  std::ostringstream svg;
  svg.setf(std::ios::fixed);
  svg.precision(2);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"14\">"
      << class_name << "</text>\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << y(0) << "\" x2=\"" << kLeft + plot_w
      << "\" y2=\"" << y(0) << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
      << y(0) << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = max_y * t / 4.0;
    svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << y(v) + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << v
        << "</text>\n";
  }
  svg << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 10
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
         "observed event frames (max "
      << static_cast<int>(max_k) << ")</text>\n";

  auto polyline = [&](const char* color, auto value) {
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& p : curve.points) svg << x(p.k) << "," << y(value(p)) << " ";
    svg << "\"/>\n";
  };
  auto reference = [&](const char* color, double v) {
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << y(v) << "\" x2=\"" << kLeft + plot_w
        << "\" y2=\"" << y(v) << "\" stroke=\"" << color
        << "\" stroke-dasharray=\"6,4\" stroke-width=\"1\"/>\n";
  };
  if (curve.offline.f1) reference("#1f77b4", *curve.offline.f1);
  if (curve.offline.er) reference("#d62728", *curve.offline.er);
  polyline("#1f77b4", [](const CurvePoint& p) { return p.f1.value_or(0.0); });
  polyline("#d62728", [](const CurvePoint& p) { return p.er.value_or(0.0); });
  svg << "<text x=\"" << kLeft + 8 << "\" y=\"" << kTop + 12
      << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#1f77b4\">F1</text>\n";
  svg << "<text x=\"" << kLeft + 32 << "\" y=\"" << kTop + 12
      << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#d62728\">ER</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace earlydet
