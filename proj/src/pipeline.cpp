#include "earlydet/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "earlydet/error.hpp"
#include "earlydet/gradcheck.hpp"
#include "earlydet/log.hpp"
#include "earlydet/training.hpp"
#include "earlydet/wav.hpp"
#include "json.hpp"

namespace earlydet {

namespace fs = std::filesystem;

namespace {

using nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

void write_text(const fs::path& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("failed writing " + path.string());
}

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::exists(path)) {
    throw MissingArtifact("missing " + what + ": " + path.string() +
                          " (run the producing command first)");
  }
}

// Logs the resolved configuration and records it next to the outputs.
void announce(const std::string& command, const RunConfig& config) {
  const std::string hash = config.hash();
  log_info(command + ": seed " + std::to_string(config.seed) + ", config hash " + hash);
  log_info("resolved config:\n" + config.to_json());
  json record{{"command", command},
              {"seed", config.seed},
              {"config_hash", hash},
              {"config", json::parse(config.to_json())}};
  write_text(config.paths.out_dir / "resolved" / (command + ".json"), record.dump(2) + "\n");
}

Split parse_split(const std::string& split) {
  if (split == "train") return Split::kTrain;
  if (split == "test") return Split::kTest;
  throw ConfigError("unknown split '" + split + "'");
}

fs::path manifest_path(const RunConfig& config) {
  return config.paths.resolve(config.paths.manifest);
}

fs::path feature_path_for(const fs::path& audio) {
  fs::path p = audio;
  p.replace_extension(".feat");
  return p;
}

ModelBundle load_checked_model(const RunConfig& config, int num_classes) {
  const fs::path path = config.paths.resolve(config.paths.model);
  require_file(path, "model checkpoint");
  ModelBundle model = load_model(path);
  if (model.num_classes() != num_classes) {
    throw ConfigError("model has " + std::to_string(model.num_classes()) +
                      " classes but the manifest lists " + std::to_string(num_classes));
  }
  if (model.config_hash != config.hash()) {
    log_warn("model was trained under config hash " + model.config_hash +
             ", current config hash is " + config.hash());
  }
  return model;
}

DetectionThresholds load_checked_thresholds(const RunConfig& config, int num_classes) {
  const fs::path path = config.paths.resolve(config.paths.thresholds);
  require_file(path, "thresholds file");
  DetectionThresholds thresholds = load_thresholds(path);
  if (thresholds.num_classes() != num_classes) {
    throw ConfigError("thresholds cover " + std::to_string(thresholds.num_classes()) +
                      " classes but the manifest lists " + std::to_string(num_classes));
  }
  return thresholds;
}

struct Scored {
  Dataset data;
  ModelBundle model;
  std::vector<ScoredStream> streams;
};

Scored score_split(const RunConfig& config, const std::string& split) {
  Scored s;
  s.data = load_split(config, split);
  if (s.data.streams.empty()) throw ConfigError("the manifest has no '" + split + "' streams");
  s.model = load_checked_model(config, static_cast<int>(s.data.class_names.size()));
  s.streams = score_streams(s.model, s.data.streams);
  return s;
}

// Fails fast, before any feature work, when an input artifact is absent.
void require_model_and_thresholds(const RunConfig& config, bool thresholds) {
  require_file(config.paths.resolve(config.paths.model), "model checkpoint");
  if (thresholds) require_file(config.paths.resolve(config.paths.thresholds), "thresholds file");
}

std::string hash_comment(const RunConfig& config) {
  return "# config_hash=" + config.hash() + "\n";
}

}  // namespace

Dataset load_split(const RunConfig& config, const std::string& split) {
  parse_split(split);
  const fs::path path = manifest_path(config);
  require_file(path, "dataset manifest");
  const DatasetManifest manifest = read_manifest(path);
  if (manifest.sample_rate != config.benchmark.stream.sample_rate) {
    throw ConfigError("manifest sample rate " + format_double(manifest.sample_rate) +
                      " Hz differs from features.sample_rate " +
                      format_double(config.benchmark.stream.sample_rate) + " Hz");
  }
  Dataset data;
  data.class_names = manifest.class_names;
  const int num_classes = static_cast<int>(manifest.class_names.size());
  const std::string feature_hash = config.feature_hash();
  for (const auto& entry : manifest.streams) {
    if (entry.split != split) continue;
    const fs::path audio_path = path.parent_path() / entry.audio;
    StreamFeatures features;
    features.id = entry.id;
    features.events = entry.events;

    const fs::path cache = feature_path_for(audio_path);
    bool cached = false;
    if (fs::exists(cache)) {
      FeatureFile file = read_feature_file(cache);
      if (file.config_hash == feature_hash && file.framewise.rows() == kCoefficients) {
        features.framewise = std::move(file.framewise);
        cached = true;
      }
    }
    if (!cached) {
      require_file(audio_path, "audio file");
      const AudioBuffer audio = read_wav(audio_path);
      if (audio.sample_rate != config.benchmark.stream.sample_rate) {
        throw ConfigError(audio_path.string() + " has sample rate " +
                          format_double(audio.sample_rate) + " Hz, expected " +
                          format_double(config.benchmark.stream.sample_rate) + " Hz");
      }
      AnnotatedStream stream{entry.id, audio, entry.events};
      features = featurize(stream, config.frames, config.gammatone);
    }
    for (const auto& ev : features.events) {
      if (ev.class_id < 0 || ev.class_id >= num_classes || ev.onset < 0 ||
          ev.offset < ev.onset || ev.offset >= features.frame_count()) {
        throw InputError("stream '" + entry.id + "' has an annotation outside its " +
                         std::to_string(features.frame_count()) + " frames or classes");
      }
    }
    data.streams.push_back(std::move(features));
  }
  return data;
}

std::vector<ScoredStream> score_streams(const ModelBundle& model,
                                        const std::vector<StreamFeatures>& streams) {
  std::vector<ScoredStream> scored;
  scored.reserve(streams.size());
  for (const auto& s : streams) {
    scored.push_back(ScoredStream{s.id, predict_stream(model, s.framewise), s.events});
  }
  return scored;
}

int run_synth(const RunConfig& config) {
  announce("synth", config);
  const fs::path path = manifest_path(config);
  const fs::path dir = path.parent_path();
  fs::create_directories(dir);
  const std::string feature_hash = config.feature_hash();

  DatasetManifest manifest;
  manifest.sample_rate = config.benchmark.stream.sample_rate;
  manifest.frame_s = config.frames.frame_s;
  manifest.hop_s = config.frames.hop_s;
  manifest.config_hash = config.hash();
  for (const auto& cls : config.benchmark.stream.classes) manifest.class_names.push_back(cls.name);

  const std::pair<Split, int> splits[] = {{Split::kTrain, config.benchmark.train_streams},
                                          {Split::kTest, config.benchmark.test_streams}};
  for (const auto& [split, count] : splits) {
    for (int i = 0; i < count; ++i) {
      const StreamSpec spec = benchmark_stream_spec(config.benchmark, split, i);
      AnnotatedStream stream = synthesize_stream(spec);
      stream.id = benchmark_stream_id(split, i);
      // Features are computed from exactly what the WAV file will hold.
      stream.audio = quantize_pcm16(stream.audio);
      const fs::path audio_name = stream.id + ".wav";
      write_wav(dir / audio_name, stream.audio, WavEncoding::kPcm16);
      const StreamFeatures features = featurize(stream, config.frames, config.gammatone);
      write_feature_file(feature_path_for(dir / audio_name),
                         FeatureFile{features.framewise, config.frames.hop_s,
                                     config.frames.frame_s, feature_hash});
      manifest.streams.push_back(ManifestStream{stream.id, split == Split::kTrain ? "train" : "test",
                                                audio_name, stream.events});
      log_info("synthesized " + stream.id + ": " + std::to_string(stream.events.size()) +
               " events, " + std::to_string(features.frame_count()) + " frames");
    }
  }
  write_manifest(path, manifest);
  log_info("wrote " + path.string());
  return 0;
}

int run_train(const RunConfig& config) {
  announce("train", config);
  const Dataset data = load_split(config, "train");
  if (data.streams.empty()) throw ConfigError("the manifest has no 'train' streams");
  const int num_classes = static_cast<int>(data.class_names.size());

  const fs::path log_path = config.paths.resolve(config.paths.train_log);
  ensure_parent(log_path);
  std::ofstream log_out(log_path);
  if (!log_out) throw InputError("cannot write " + log_path.string());
  static const char* kComponents[] = {"foreground", "background", "class",
                                      "distance",   "confidence", "regularizer"};
  log_out << hash_comment(config) << "network,epoch,total";
  for (const char* name : kComponents) log_out << ',' << name;
  log_out << ",wall_s\n";

  auto on_epoch = [&](const EpochLog& e) {
    log_out << e.network << ',' << e.epoch << ',' << format_double(e.total);
    for (const char* name : kComponents) {
      log_out << ',';
      if (auto it = e.components.find(name); it != e.components.end()) {
        log_out << format_double(it->second);
      }
    }
    log_out << ',' << format_double(e.wall_s) << '\n';
    log_out.flush();
    log_info(e.network + " epoch " + std::to_string(e.epoch) + "/" +
             std::to_string(config.training.epochs) + " loss " + format_double(e.total) +
             " (" + format_double(e.wall_s) + " s)");
  };
  ModelBundle model = train_model(data.streams, num_classes, config.weighted_loss,
                                  config.multitask_loss, config.training, on_epoch);
  model.config_hash = config.hash();
  const fs::path model_path = config.paths.resolve(config.paths.model);
  ensure_parent(model_path);
  save_model(model_path, model);
  log_info("wrote " + model_path.string());
  return 0;
}

int run_calibrate(const RunConfig& config) {
  announce("calibrate", config);
  require_model_and_thresholds(config, false);
  const Scored s = score_split(config, "train");
  const CalibrationResult result =
      calibrate_thresholds(s.streams, s.model.normalization,
                           static_cast<int>(s.data.class_names.size()), config.calibration);
  for (std::size_t c = 0; c < s.data.class_names.size(); ++c) {
    const auto& row = result.mean_f1[c];
    const double best = *std::max_element(row.begin(), row.end());
    log_info(s.data.class_names[c] + ": beta " + format_double(result.thresholds.beta[c]) +
             ", divisor " + format_double(result.thresholds.divisors[c]) +
             ", mean fold F1 " + format_double(best));
  }
  const fs::path path = config.paths.resolve(config.paths.thresholds);
  ensure_parent(path);
  save_thresholds(path, result.thresholds, s.data.class_names, config.hash());
  log_info("wrote " + path.string());
  return 0;
}

int run_detect(const RunConfig& config) {
  announce("detect", config);
  require_model_and_thresholds(config, true);
  const Scored s = score_split(config, config.evaluation.split);
  const int num_classes = static_cast<int>(s.data.class_names.size());
  const DetectionThresholds thresholds = load_checked_thresholds(config, num_classes);
  const double hop = config.frames.hop_s;
  const double frame = config.frames.frame_s;

  std::ostringstream det;
  det << hash_comment(config)
      << "stream_id,class,onset_frame,offset_frame,onset_s,offset_s,peak_score,trigger_frame\n";
  const fs::path tracks_dir = config.paths.resolve(config.paths.tracks_dir);
  std::size_t total = 0;
  for (const auto& stream : s.streams) {
    StreamingDetector detector(thresholds, s.model.normalization);
    const int frames = stream.predictions.frame_count();
    for (int m = 0; m < frames; ++m) detector.step(m, stream.predictions.frame(m));
    const auto events = detector.finish(frames);
    for (const auto& ev : events) {
      det << stream.id << ',' << s.data.class_names[ev.class_id] << ',' << ev.onset << ','
          << ev.offset << ',' << format_double(ev.onset * hop) << ','
          << format_double(ev.offset * hop + frame) << ',' << format_double(ev.peak_score)
          << ',' << ev.trigger_frame << '\n';
    }
    total += events.size();

    std::ostringstream track;
    track << hash_comment(config) << "n,class,score\n";
    for (int c = 0; c < num_classes; ++c) {
      for (int n = 0; n < frames; ++n) {
        track << n << ',' << s.data.class_names[c] << ','
              << format_double(thresholds.normalized(c, detector.track().score(c, n))) << '\n';
      }
    }
    write_text(tracks_dir / (stream.id + ".csv"), track.str());
  }
  const fs::path path = config.paths.resolve(config.paths.detections);
  write_text(path, det.str());
  log_info("wrote " + std::to_string(total) + " detections to " + path.string());
  return 0;
}

int run_evaluate(const RunConfig& config) {
  announce("evaluate", config);
  require_model_and_thresholds(config, true);
  const Scored s = score_split(config, config.evaluation.split);
  const int num_classes = static_cast<int>(s.data.class_names.size());
  const DetectionThresholds thresholds = load_checked_thresholds(config, num_classes);
  const OfflineResult result = evaluate_offline(s.streams, thresholds, s.model.normalization);

  const fs::path json_path = config.paths.resolve(config.paths.metrics);
  fs::path csv_path = json_path;
  csv_path.replace_extension(".csv");
  write_text(json_path, metrics_to_json(result.metrics, s.data.class_names, config.hash()));
  write_text(csv_path, metrics_to_csv(result.metrics, s.data.class_names, config.hash()));
  auto show = [](const std::optional<double>& v) { return v ? format_double(*v) : "n/a"; };
  for (int c = 0; c < num_classes; ++c) {
    const auto& m = result.metrics.per_class[c];
    log_info(s.data.class_names[c] + ": F1 " + show(m.f1) + ", ER " + show(m.er));
  }
  log_info("overall: F1 " + show(result.metrics.overall.f1) + ", ER " +
           show(result.metrics.overall.er));
  log_info("wrote " + json_path.string() + " and " + csv_path.string());
  return 0;
}

int run_curves(const RunConfig& config) {
  announce("curves", config);
  require_model_and_thresholds(config, true);
  const Scored s = score_split(config, config.evaluation.split);
  const int num_classes = static_cast<int>(s.data.class_names.size());
  const DetectionThresholds thresholds = load_checked_thresholds(config, num_classes);
  const auto curves = online_curves(s.streams, thresholds, s.model.normalization, num_classes,
                                    config.evaluation.k_step);
  const fs::path path = config.paths.resolve(config.paths.curves);
  write_text(path, curves_to_csv(curves, s.data.class_names, config.hash()));
  const fs::path svg_dir = config.paths.resolve(config.paths.curves_svg_dir);
  for (const auto& curve : curves) {
    const std::string& name = s.data.class_names[curve.class_id];
    std::string svg = curve_to_svg(curve, name);
    // Stamp the hash right after the XML root element opens.
    const auto pos = svg.find('>');
    if (pos != std::string::npos) {
      svg.insert(pos + 1, "\n<!-- config_hash=" + config.hash() + " -->");
    }
    write_text(svg_dir / (name + ".svg"), svg);
  }
  log_info("wrote " + path.string() + " and " + std::to_string(curves.size()) +
           " charts in " + svg_dir.string());
  return 0;
}

int run_check_gradients(const RunConfig& config) {
  announce("check-gradients", config);
  const GradientSuiteReport report = run_gradient_suite(config.gradcheck_seeds, config.seed);
  const bool pass = report.max_rel_error < kGradCheckTolerance;
  json entries = json::array();
  for (const auto& e : report.entries) {
    entries.push_back({{"seed", e.seed},
                       {"loss", e.loss},
                       {"batch_size", e.batch_size},
                       {"max_rel_error", e.result.max_rel_error},
                       {"max_abs_error", e.result.max_abs_error},
                       {"parameters_checked", e.result.parameters_checked},
                       {"worst_parameter", e.result.worst_parameter}});
  }
  json doc{{"config_hash", config.hash()},
           {"step", kGradCheckStep},
           {"floor", kGradCheckFloor},
           {"tolerance", kGradCheckTolerance},
           {"max_rel_error", report.max_rel_error},
           {"pass", pass},
           {"entries", entries}};
  const fs::path path = config.paths.resolve(config.paths.gradient_report);
  write_text(path, doc.dump(2) + "\n");
  log_info("max relative error " + format_double(report.max_rel_error) + " over " +
           std::to_string(report.entries.size()) + " checks: " + (pass ? "pass" : "FAIL"));
  return pass ? 0 : 1;
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {
      "synth", "train", "calibrate", "detect", "evaluate", "curves", "check-gradients"};
  return names;
}

int run_command(const std::string& command, const RunConfig& config) {
  static const std::map<std::string, std::function<int(const RunConfig&)>> table = {
      {"synth", run_synth},       {"train", run_train},       {"calibrate", run_calibrate},
      {"detect", run_detect},     {"evaluate", run_evaluate}, {"curves", run_curves},
      {"check-gradients", run_check_gradients}};
  const auto it = table.find(command);
  if (it == table.end()) throw ConfigError("unknown command '" + command + "'");
  return it->second(config);
}

}  // namespace earlydet
