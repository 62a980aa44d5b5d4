#include "earlydet/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "earlydet/error.hpp"
#include "json.hpp"

namespace earlydet {

namespace {

using nlohmann::json;

json class_to_json(const EventClassSpec& c) {
  return json{{"name", c.name},
              {"generator", to_string(c.kind)},
              {"min_duration_s", c.min_duration_s},
              {"max_duration_s", c.max_duration_s},
              {"low_hz", c.low_hz},
              {"high_hz", c.high_hz},
              {"min_amplitude", c.min_amplitude},
              {"max_amplitude", c.max_amplitude}};
}

json to_document(const RunConfig& c) {
  json classes = json::array();
  for (const auto& cls : c.benchmark.stream.classes) classes.push_back(class_to_json(cls));
  const auto& p = c.paths;
  return json{
      {"seed", c.seed},
      {"paths",
       {{"out_dir", p.out_dir.string()},
        {"manifest", p.manifest.string()},
        {"model", p.model.string()},
        {"thresholds", p.thresholds.string()},
        {"detections", p.detections.string()},
        {"tracks_dir", p.tracks_dir.string()},
        {"metrics", p.metrics.string()},
        {"curves", p.curves.string()},
        {"curves_svg_dir", p.curves_svg_dir.string()},
        {"train_log", p.train_log.string()},
        {"gradient_report", p.gradient_report.string()}}},
      {"features",
       {{"sample_rate", c.benchmark.stream.sample_rate},
        {"frame_s", c.frames.frame_s},
        {"hop_s", c.frames.hop_s},
        {"channels", c.gammatone.channels},
        {"min_hz", c.gammatone.min_hz},
        {"max_hz", c.gammatone.max_hz},
        {"energy_floor", c.gammatone.energy_floor}}},
      {"synth",
       {{"train_streams", c.benchmark.train_streams},
        {"test_streams", c.benchmark.test_streams},
        {"stream_s", c.benchmark.stream.length_s},
        {"events_per_class", c.benchmark.stream.events_per_class},
        {"noise_level", c.benchmark.stream.noise_level},
        {"min_gap_s", c.benchmark.stream.min_gap_s},
        {"classes", classes}}},
      {"weighted_loss",
       {{"fg_weight", c.weighted_loss.fg_weight},
        {"bg_weight", c.weighted_loss.bg_weight},
        {"l2", c.weighted_loss.l2}}},
      {"multitask_loss",
       {{"class_weight", c.multitask_loss.class_weight},
        {"dist_weight", c.multitask_loss.dist_weight},
        {"conf_weight", c.multitask_loss.conf_weight},
        {"l2", c.multitask_loss.l2}}},
      {"training",
       {{"epochs", c.training.epochs},
        {"dnn1_batch", c.training.dnn1_batch},
        {"dnn2_batch", c.training.dnn2_batch},
        {"learning_rate", c.training.learning_rate},
        {"dnn1_dropout", c.training.dnn1_dropout},
        {"dnn2_dropout", c.training.dnn2_dropout},
        {"hidden", c.training.hidden}}},
      {"calibration", {{"folds", c.calibration.folds}, {"grid_step", c.calibration.grid_step}}},
      {"evaluation", {{"k_step", c.evaluation.k_step}, {"split", c.evaluation.split}}},
      {"gradcheck", {{"seeds", c.gradcheck_seeds}}},
  };
}

const char* type_name(const json& v) {
  if (v.is_number()) return "a number";
  if (v.is_string()) return "a string";
  if (v.is_boolean()) return "a boolean";
  if (v.is_array()) return "an array";
  if (v.is_object()) return "an object";
  return "null";
}

bool compatible(const json& expected, const json& given) {
  if (expected.is_number()) return given.is_number();
  return std::string(type_name(expected)) == type_name(given);
}

// Overlays `patch` on `target`, rejecting unknown keys and type changes.
void merge(json& target, const json& patch, const std::string& prefix) {
  if (!patch.is_object()) {
    throw ConfigError("config " + (prefix.empty() ? std::string("document") : prefix) +
                      " must be an object");
  }
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string field = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!target.contains(it.key())) throw ConfigError("unknown config field '" + field + "'");
    json& slot = target[it.key()];
    if (slot.is_object()) {
      merge(slot, it.value(), field);
    } else if (!compatible(slot, it.value())) {
      throw ConfigError("config field '" + field + "' must be " + type_name(slot) +
                        ", got " + type_name(it.value()));
    } else {
      slot = it.value();
    }
  }
}

template <class T>
T get(const json& doc, const std::string& section, const std::string& key) {
  const json& v = section.empty() ? doc.at(key) : doc.at(section).at(key);
  const std::string field = section.empty() ? key : section + "." + key;
  if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer() && !v.is_number_unsigned()) {
      throw ConfigError("config field '" + field + "' must be an integer");
    }
    if constexpr (std::is_unsigned_v<T>) {
      if (v.is_number_integer() && v.get<long long>() < 0) {
        throw ConfigError("config field '" + field + "' must be non-negative");
      }
    }
  }
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config field '" + field + "' has the wrong type");
  }
}

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError("config field '" + field + "' " + what);
}

RunConfig from_document(const json& d) {
  RunConfig c;
  c.seed = get<std::uint64_t>(d, "", "seed");

  auto path = [&](const char* key) {
    const auto s = get<std::string>(d, "paths", key);
    require(!s.empty(), std::string("paths.") + key, "must not be empty");
    return std::filesystem::path(s);
  };
  c.paths.out_dir = path("out_dir");
  c.paths.manifest = path("manifest");
  c.paths.model = path("model");
  c.paths.thresholds = path("thresholds");
  c.paths.detections = path("detections");
  c.paths.tracks_dir = path("tracks_dir");
  c.paths.metrics = path("metrics");
  c.paths.curves = path("curves");
  c.paths.curves_svg_dir = path("curves_svg_dir");
  c.paths.train_log = path("train_log");
  c.paths.gradient_report = path("gradient_report");

  auto& stream = c.benchmark.stream;
  stream.sample_rate = get<double>(d, "features", "sample_rate");
  c.frames.frame_s = get<double>(d, "features", "frame_s");
  c.frames.hop_s = get<double>(d, "features", "hop_s");
  c.gammatone.channels = get<int>(d, "features", "channels");
  c.gammatone.min_hz = get<double>(d, "features", "min_hz");
  c.gammatone.max_hz = get<double>(d, "features", "max_hz");
  c.gammatone.energy_floor = get<double>(d, "features", "energy_floor");
  require(stream.sample_rate > 0.0, "features.sample_rate", "must be positive");
  require(c.frames.frame_s > 0.0, "features.frame_s", "must be positive");
  require(c.frames.hop_s > 0.0, "features.hop_s", "must be positive");
  require(c.gammatone.channels == kCoefficients, "features.channels",
          "must be " + std::to_string(kCoefficients) + " (the network input width)");
  require(c.gammatone.min_hz > 0.0 && c.gammatone.max_hz > c.gammatone.min_hz,
          "features.min_hz", "must be positive and below features.max_hz");
  require(c.gammatone.max_hz <= stream.sample_rate / 2.0, "features.max_hz",
          "must not exceed the Nyquist frequency");
  require(c.gammatone.energy_floor > 0.0, "features.energy_floor", "must be positive");
  stream.frames = c.frames;

  c.benchmark.train_streams = get<int>(d, "synth", "train_streams");
  c.benchmark.test_streams = get<int>(d, "synth", "test_streams");
  stream.length_s = get<double>(d, "synth", "stream_s");
  stream.events_per_class = get<int>(d, "synth", "events_per_class");
  stream.noise_level = get<double>(d, "synth", "noise_level");
  stream.min_gap_s = get<double>(d, "synth", "min_gap_s");
  require(c.benchmark.train_streams >= 1, "synth.train_streams", "must be >= 1");
  require(c.benchmark.test_streams >= 0, "synth.test_streams", "must be >= 0");
  require(stream.min_gap_s >= 0.2, "synth.min_gap_s", "must be >= 0.2");
  stream.classes.clear();
  const json& classes = d.at("synth").at("classes");
  require(!classes.empty(), "synth.classes", "must list at least one class");
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const json& e = classes[i];
    const std::string field = "synth.classes[" + std::to_string(i) + "]";
    require(e.is_object(), field, "must be an object");
    const json defaults = class_to_json(EventClassSpec{});
    json merged = defaults;
    merge(merged, e, field);
    EventClassSpec cls;
    cls.name = get<std::string>(merged, "", "name");
    require(!cls.name.empty(), field + ".name", "must not be empty");
    try {
      cls.kind = generator_from_string(get<std::string>(merged, "", "generator"));
    } catch (const ConfigError&) {
      throw ConfigError("config field '" + field + ".generator' names an unknown generator");
    }
    cls.min_duration_s = get<double>(merged, "", "min_duration_s");
    cls.max_duration_s = get<double>(merged, "", "max_duration_s");
    cls.low_hz = get<double>(merged, "", "low_hz");
    cls.high_hz = get<double>(merged, "", "high_hz");
    cls.min_amplitude = get<double>(merged, "", "min_amplitude");
    cls.max_amplitude = get<double>(merged, "", "max_amplitude");
    stream.classes.push_back(cls);
  }
  try {
    stream.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config section 'synth': ") + e.what());
  }
  c.benchmark.seed = c.seed;

  c.weighted_loss.fg_weight = get<double>(d, "weighted_loss", "fg_weight");
  c.weighted_loss.bg_weight = get<double>(d, "weighted_loss", "bg_weight");
  c.weighted_loss.l2 = get<double>(d, "weighted_loss", "l2");
  require(c.weighted_loss.fg_weight >= 0.0, "weighted_loss.fg_weight", "must be >= 0");
  require(c.weighted_loss.bg_weight >= 0.0, "weighted_loss.bg_weight", "must be >= 0");
  require(c.weighted_loss.l2 >= 0.0, "weighted_loss.l2", "must be >= 0");

  c.multitask_loss.class_weight = get<double>(d, "multitask_loss", "class_weight");
  c.multitask_loss.dist_weight = get<double>(d, "multitask_loss", "dist_weight");
  c.multitask_loss.conf_weight = get<double>(d, "multitask_loss", "conf_weight");
  c.multitask_loss.l2 = get<double>(d, "multitask_loss", "l2");
  require(c.multitask_loss.class_weight >= 0.0, "multitask_loss.class_weight", "must be >= 0");
  require(c.multitask_loss.dist_weight >= 0.0, "multitask_loss.dist_weight", "must be >= 0");
  require(c.multitask_loss.conf_weight >= 0.0, "multitask_loss.conf_weight", "must be >= 0");
  require(c.multitask_loss.l2 >= 0.0, "multitask_loss.l2", "must be >= 0");

  auto& t = c.training;
  t.epochs = get<int>(d, "training", "epochs");
  t.dnn1_batch = get<int>(d, "training", "dnn1_batch");
  t.dnn2_batch = get<int>(d, "training", "dnn2_batch");
  t.learning_rate = get<double>(d, "training", "learning_rate");
  t.dnn1_dropout = get<double>(d, "training", "dnn1_dropout");
  t.dnn2_dropout = get<double>(d, "training", "dnn2_dropout");
  t.hidden = get<std::vector<int>>(d, "training", "hidden");
  t.seed = c.seed;
  require(t.epochs >= 1, "training.epochs", "must be >= 1");
  require(t.dnn1_batch >= 1, "training.dnn1_batch", "must be >= 1");
  require(t.dnn2_batch >= 1, "training.dnn2_batch", "must be >= 1");
  require(t.learning_rate > 0.0, "training.learning_rate", "must be positive");
  require(t.dnn1_dropout >= 0.0 && t.dnn1_dropout < 1.0, "training.dnn1_dropout",
          "must lie in [0, 1)");
  require(t.dnn2_dropout >= 0.0 && t.dnn2_dropout < 1.0, "training.dnn2_dropout",
          "must lie in [0, 1)");
  require(!t.hidden.empty(), "training.hidden", "must list at least one layer");
  for (int h : t.hidden) require(h >= 1, "training.hidden", "entries must be >= 1");

  c.calibration.folds = get<int>(d, "calibration", "folds");
  c.calibration.grid_step = get<double>(d, "calibration", "grid_step");
  require(c.calibration.folds >= 1, "calibration.folds", "must be >= 1");
  require(c.calibration.grid_step > 0.0 && c.calibration.grid_step <= 1.0,
          "calibration.grid_step", "must lie in (0, 1]");

  c.evaluation.k_step = get<int>(d, "evaluation", "k_step");
  c.evaluation.split = get<std::string>(d, "evaluation", "split");
  require(c.evaluation.k_step >= 1, "evaluation.k_step", "must be >= 1");
  require(c.evaluation.split == "train" || c.evaluation.split == "test", "evaluation.split",
          "must be \"train\" or \"test\"");

  c.gradcheck_seeds = get<int>(d, "gradcheck", "seeds");
  require(c.gradcheck_seeds >= 1, "gradcheck.seeds", "must be >= 1");
  return c;
}

json parse_json(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + " is not valid JSON: " + e.what());
  }
}

// "a.b=value": value is parsed as JSON when possible, else taken as a string.
json override_patch(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' must have the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json patch = value;
  std::size_t end = key.size();
  while (true) {
    const auto dot = key.rfind('.', end - 1);
    const std::size_t begin = dot == std::string::npos ? 0 : dot + 1;
    const std::string part = key.substr(begin, end - begin);
    if (part.empty()) throw ConfigError("override key '" + key + "' is malformed");
    patch = json{{part, patch}};
    if (dot == std::string::npos) break;
    end = dot;
  }
  return patch;
}

}  // namespace

std::filesystem::path PathSettings::resolve(const std::filesystem::path& p) const {
  return p.is_absolute() ? p : out_dir / p;
}

std::string RunConfig::to_json() const { return to_document(*this).dump(2); }

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Paths are excluded so relocating the output directory keeps the hash.
std::string RunConfig::hash() const {
  json doc = to_document(*this);
  doc.erase("paths");
  return fnv1a_hex(doc.dump());
}

std::string RunConfig::feature_hash() const {
  return fnv1a_hex(to_document(*this).at("features").dump());
}

RunConfig RunConfig::from_json_text(const std::string& text) {
  json doc = to_document(RunConfig{});
  merge(doc, parse_json(text, "config"), "");
  return from_document(doc);
}

RunConfig RunConfig::resolve(const std::optional<std::filesystem::path>& file,
                             const std::vector<std::string>& overrides,
                             std::optional<std::uint64_t> seed,
                             std::optional<std::filesystem::path> out_dir) {
  json doc = to_document(RunConfig{});
  if (file) {
    std::ifstream in(*file);
    if (!in) throw MissingArtifact("config file not found: " + file->string());
    std::stringstream ss;
    ss << in.rdbuf();
    merge(doc, parse_json(ss.str(), "config file " + file->string()), "");
  }
  for (const auto& assignment : overrides) merge(doc, override_patch(assignment), "");
  if (seed) doc["seed"] = *seed;
  if (out_dir) doc["paths"]["out_dir"] = out_dir->string();
  return from_document(doc);
}

}  // namespace earlydet
