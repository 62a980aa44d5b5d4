#include "earlydet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "earlydet/error.hpp"
#include "earlydet/log.hpp"
#include "json.hpp"

namespace earlydet {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kFadeSeconds = 0.015;
constexpr int kNoisePartials = 32;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Unit-peak waveform for one event of `samples` length.
std::vector<double> render_event(const EventClassSpec& cls, std::size_t samples,
                                 double rate, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto between = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  std::vector<double> out(samples, 0.0);
  const double duration = static_cast<double>(samples) / rate;

  switch (cls.kind) {
    case GeneratorKind::kToneBurst: {
      const double hz = between(cls.low_hz, cls.high_hz);
      const double phase = between(0.0, kTwoPi);
      for (std::size_t i = 0; i < samples; ++i) {
        out[i] = std::sin(kTwoPi * hz * i / rate + phase);
      }
      break;
    }
    case GeneratorKind::kChirp: {
      const double f0 = cls.low_hz;
      const double f1 = cls.high_hz;
      for (std::size_t i = 0; i < samples; ++i) {
        const double t = i / rate;
        out[i] = std::sin(kTwoPi * (f0 * t + 0.5 * (f1 - f0) * t * t / duration));
      }
      break;
    }
    case GeneratorKind::kNoiseBurst: {
      const double gain = std::sqrt(2.0 / kNoisePartials);
      for (int p = 0; p < kNoisePartials; ++p) {
        const double hz = between(cls.low_hz, cls.high_hz);
        const double phase = between(0.0, kTwoPi);
        for (std::size_t i = 0; i < samples; ++i) {
          out[i] += gain * std::sin(kTwoPi * hz * i / rate + phase);
        }
      }
      break;
    }
    case GeneratorKind::kHarmonicStack: {
      const double f0 = between(cls.low_hz, cls.high_hz);
      constexpr int kHarmonics = 4;
      double norm = 0.0;
      for (int h = 1; h <= kHarmonics; ++h) norm += 1.0 / h;
      for (int h = 1; h <= kHarmonics; ++h) {
        const double phase = between(0.0, kTwoPi);
        for (std::size_t i = 0; i < samples; ++i) {
          out[i] += std::sin(kTwoPi * h * f0 * i / rate + phase) / (h * norm);
        }
      }
      break;
    }
    case GeneratorKind::kAmTone: {
      const double carrier = between(cls.low_hz, cls.high_hz);
      const double rate_hz = between(6.0, 10.0);
      for (std::size_t i = 0; i < samples; ++i) {
        const double t = i / rate;
        const double envelope = 0.6 + 0.4 * std::sin(kTwoPi * rate_hz * t);
        out[i] = envelope * std::sin(kTwoPi * carrier * t);
      }
      break;
    }
  }

  const auto fade = std::min<std::size_t>(samples / 2,
                                          static_cast<std::size_t>(kFadeSeconds * rate));
  for (std::size_t i = 0; i < fade; ++i) {
    const double g = 0.5 - 0.5 * std::cos(std::numbers::pi * i / fade);
    out[i] *= g;
    out[samples - 1 - i] *= g;
  }
  return out;
}

}  // namespace

const char* to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::kToneBurst: return "tone-burst";
    case GeneratorKind::kChirp: return "chirp";
    case GeneratorKind::kNoiseBurst: return "noise-burst";
    case GeneratorKind::kHarmonicStack: return "harmonic-stack";
    case GeneratorKind::kAmTone: return "am-tone";
  }
  return "unknown";
}

GeneratorKind generator_from_string(const std::string& name) {
  for (auto kind : {GeneratorKind::kToneBurst, GeneratorKind::kChirp,
                    GeneratorKind::kNoiseBurst, GeneratorKind::kHarmonicStack,
                    GeneratorKind::kAmTone}) {
    if (name == to_string(kind)) return kind;
  }
  throw ConfigError("unknown generator kind '" + name + "'");
}

std::vector<EventClassSpec> default_event_classes() {
  return {
      {"tone_burst", GeneratorKind::kToneBurst, 0.8, 1.3, 950.0, 1050.0, 0.1, 0.4},
      {"chirp", GeneratorKind::kChirp, 0.9, 1.4, 2000.0, 4000.0, 0.1, 0.4},
      {"noise_burst", GeneratorKind::kNoiseBurst, 0.7, 1.2, 6000.0, 9000.0, 0.1, 0.4},
      {"harmonic_stack", GeneratorKind::kHarmonicStack, 1.0, 1.5, 170.0, 210.0, 0.1, 0.4},
      {"am_tone", GeneratorKind::kAmTone, 0.8, 1.3, 12000.0, 14000.0, 0.1, 0.4},
  };
}

void StreamSpec::validate() const {
  if (!(length_s > 0.0)) throw ConfigError("stream length must be positive");
  if (events_per_class < 0) throw ConfigError("events_per_class must be >= 0");
  if (min_gap_s < 0.2) throw ConfigError("minimum inter-event gap must be >= 0.2 s");
  if (!(sample_rate > 0.0)) throw ConfigError("sample rate must be positive");
  if (noise_level < 0.0) throw ConfigError("noise level must be >= 0");
  for (const auto& cls : classes) {
    if (!(cls.min_duration_s > 0.0) || cls.max_duration_s < cls.min_duration_s) {
      throw ConfigError("class '" + cls.name + "' has an invalid duration range");
    }
    if (cls.max_amplitude < cls.min_amplitude || cls.min_amplitude < 0.0) {
      throw ConfigError("class '" + cls.name + "' has an invalid amplitude range");
    }
    if (!(cls.low_hz > 0.0) || cls.high_hz < cls.low_hz ||
        cls.high_hz > sample_rate / 2.0) {
      throw ConfigError("class '" + cls.name + "' has an invalid frequency range");
    }
  }
}

std::optional<std::pair<int, int>> frames_covering(std::size_t begin,
                                                   std::size_t end,
                                                   int frame_length, int hop,
                                                   int frame_count) {
  auto overlap = [&](int i) {
    const auto lo = static_cast<long long>(i) * hop;
    const auto hi = lo + frame_length;
    return std::min<long long>(hi, static_cast<long long>(end)) -
           std::max<long long>(lo, static_cast<long long>(begin));
  };
  const long long need = (frame_length + 1) / 2;
  int first = std::max(0, static_cast<int>(static_cast<long long>(begin) / hop) -
                              frame_length / hop - 1);
  while (first < frame_count && overlap(first) < need) {
    if (static_cast<long long>(first) * hop >= static_cast<long long>(end)) {
      return std::nullopt;
    }
    ++first;
  }
  if (first >= frame_count) return std::nullopt;
  int last = first;
  while (last + 1 < frame_count && overlap(last + 1) >= need) ++last;
  return std::make_pair(first, last);
}

AnnotatedStream synthesize_stream(const StreamSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  const double rate = spec.sample_rate;
  const auto total_samples = static_cast<std::size_t>(std::llround(spec.length_s * rate));

  // Event order and durations.
  std::vector<int> order;
  for (int c = 0; c < static_cast<int>(spec.classes.size()); ++c) {
    for (int e = 0; e < spec.events_per_class; ++e) order.push_back(c);
  }
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<double> durations;
  double busy = 0.0;
  for (int c : order) {
    const auto& cls = spec.classes[c];
    durations.push_back(cls.min_duration_s +
                        (cls.max_duration_s - cls.min_duration_s) * unit(rng));
    busy += durations.back();
  }
  const double gap_total = spec.min_gap_s * static_cast<double>(order.size() + 1);
  const double slack = spec.length_s - spec.frames.frame_s - busy - gap_total;
  if (slack < 0.0) {
    throw ConfigError("scheduled events (" + std::to_string(busy) +
                      " s plus gaps) do not fit in a " +
                      std::to_string(spec.length_s) + " s stream");
  }
  // Random partition of the slack over the order.size()+1 gaps.
  std::vector<double> shares(order.size() + 1);
  std::exponential_distribution<double> expo(1.0);
  double share_sum = 0.0;
  for (auto& s : shares) share_sum += (s = expo(rng));

  AnnotatedStream stream;
  stream.audio.sample_rate = rate;
  stream.audio.samples.resize(total_samples);
  for (auto& s : stream.audio.samples) s = spec.noise_level * normal(rng);

  const int frame_length = spec.frames.frame_length(rate);
  const int hop = spec.frames.hop_length(rate);
  const int frame_count = spec.frames.frame_count(total_samples, rate);

  double cursor = 0.0;
  for (std::size_t e = 0; e < order.size(); ++e) {
    cursor += spec.min_gap_s + slack * shares[e] / share_sum;
    const auto& cls = spec.classes[order[e]];
    const auto begin = static_cast<std::size_t>(std::llround(cursor * rate));
    const auto length = static_cast<std::size_t>(std::llround(durations[e] * rate));
    const double amplitude =
        cls.min_amplitude + (cls.max_amplitude - cls.min_amplitude) * unit(rng);
    const auto wave = render_event(cls, length, rate, rng);
    for (std::size_t i = 0; i < length && begin + i < total_samples; ++i) {
      stream.audio.samples[begin + i] += amplitude * wave[i];
    }
    const auto span = frames_covering(begin, begin + length, frame_length, hop, frame_count);
    if (span) stream.events.push_back({order[e], span->first, span->second});
    cursor += durations[e];
  }
  return stream;
}

std::string benchmark_stream_id(Split split, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%02d", split == Split::kTrain ? "train" : "test",
                index);
  return buf;
}

StreamSpec benchmark_stream_spec(const BenchmarkSpec& bench, Split split, int index) {
  StreamSpec spec = bench.stream;
  const std::uint64_t lane = split == Split::kTrain ? 0x7452ULL : 0x5445ULL;
  spec.seed = splitmix64(bench.seed ^ splitmix64(lane * 1000003ULL +
                                                 static_cast<std::uint64_t>(index)));
  return spec;
}

StreamFeatures featurize(const AnnotatedStream& stream, const FrameConfig& frames,
                         const GammatoneConfig& gammatone) {
  return {stream.id, extract_framewise(stream.audio, frames, gammatone), stream.events};
}

NormalizationConstants compute_normalization(std::span<const StreamFeatures> streams) {
  int longest = 0;
  for (const auto& s : streams) {
    for (const auto& e : s.events) longest = std::max(longest, e.offset - e.onset);
  }
  const double value = std::max(1, longest);
  return {value, value};
}

TrainingSet make_training_set(std::span<const StreamFeatures> streams, int num_classes,
                              std::optional<NormalizationConstants> normalization) {
  TrainingSet set;
  set.num_classes = num_classes;
  set.normalization = normalization ? *normalization : compute_normalization(streams);
  set.normalization.validate();

  for (int s = 0; s < static_cast<int>(streams.size()); ++s) {
    const auto& stream = streams[s];
    const int count = stream.frame_count();
    if (count == 0) {
      log_warn("stream '" + stream.id + "' has no frames; skipped");
      continue;
    }
    std::vector<int> owner(count, -1);
    for (int e = 0; e < static_cast<int>(stream.events.size()); ++e) {
      const auto& ev = stream.events[e];
      if (ev.class_id < 0 || ev.class_id >= num_classes) {
        throw ConfigError("stream '" + stream.id + "' has class " +
                          std::to_string(ev.class_id) + " outside [0, " +
                          std::to_string(num_classes) + ")");
      }
      for (int i = std::max(0, ev.onset); i <= std::min(count - 1, ev.offset); ++i) {
        owner[i] = e;
      }
    }
    for (int i = 0; i < count; ++i) {
      set.dnn1.push_back({s, i, owner[i] >= 0});
      if (owner[i] < 0) continue;
      const auto& ev = stream.events[owner[i]];
      set.dnn2.push_back({s, i, ev.class_id,
                          normalize_distances(distance_targets(ev, i), set.normalization)});
    }
  }
  return set;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  nlohmann::ordered_json doc;
  doc["format"] = "earlydet-manifest";
  doc["version"] = 1;
  if (!manifest.config_hash.empty()) doc["config_hash"] = manifest.config_hash;
  doc["sample_rate"] = manifest.sample_rate;
  doc["frame_s"] = manifest.frame_s;
  doc["hop_s"] = manifest.hop_s;
  doc["classes"] = manifest.class_names;
  auto& streams = doc["streams"] = nlohmann::ordered_json::array();
  for (const auto& s : manifest.streams) {
    nlohmann::ordered_json entry;
    entry["id"] = s.id;
    entry["split"] = s.split;
    entry["audio"] = s.audio.generic_string();
    auto& events = entry["events"] = nlohmann::ordered_json::array();
    for (const auto& e : s.events) {
      events.push_back({{"class", e.class_id},
                        {"onset_frame", e.onset},
                        {"offset_frame", e.offset}});
    }
    streams.push_back(std::move(entry));
  }
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw MissingArtifact("missing dataset manifest: " + path.string());
  }
  std::ifstream in(path);
  DatasetManifest manifest;
  try {
    const auto doc = nlohmann::json::parse(in);
    manifest.sample_rate = doc.at("sample_rate").get<double>();
    manifest.frame_s = doc.value("frame_s", 0.100);
    manifest.hop_s = doc.value("hop_s", 0.010);
    manifest.config_hash = doc.value("config_hash", std::string{});
    manifest.class_names = doc.at("classes").get<std::vector<std::string>>();
    for (const auto& entry : doc.at("streams")) {
      ManifestStream s;
      s.id = entry.at("id").get<std::string>();
      s.split = entry.value("split", std::string{"train"});
      s.audio = entry.at("audio").get<std::string>();
      for (const auto& e : entry.at("events")) {
        EventInterval ev{e.at("class").get<int>(), e.at("onset_frame").get<int>(),
                         e.at("offset_frame").get<int>()};
        if (ev.offset < ev.onset) {
          throw InputError("event with offset before onset in stream " + s.id);
        }
        s.events.push_back(ev);
      }
      std::sort(s.events.begin(), s.events.end(),
                [](const auto& a, const auto& b) { return a.onset < b.onset; });
      manifest.streams.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return manifest;
}

}  // namespace earlydet
