#include "earlydet/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "earlydet/error.hpp"
#include "json.hpp"

namespace earlydet {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload assumes a little-endian host");

FeatureStandardizer FeatureStandardizer::identity(int channels) {
  return {Vector::Zero(channels), Vector::Ones(channels)};
}

FeatureStandardizer FeatureStandardizer::fit(std::span<const StreamFeatures> streams) {
  Eigen::Index channels = 0;
  double count = 0.0;
  for (const auto& s : streams) {
    if (s.framewise.cols() == 0) continue;
    channels = s.framewise.rows();
    count += static_cast<double>(s.framewise.cols());
  }
  if (count == 0.0) throw InputError("cannot fit standardizer on empty data");

  Vector sum = Vector::Zero(channels);
  for (const auto& s : streams) {
    if (s.framewise.cols() > 0) sum += s.framewise.cast<double>().rowwise().sum();
  }
  const Vector mean = sum / count;
  Vector sq = Vector::Zero(channels);
  for (const auto& s : streams) {
    if (s.framewise.cols() == 0) continue;
    const Matrix centered = s.framewise.cast<double>().colwise() - mean;
    sq += centered.array().square().matrix().rowwise().sum();
  }
  Vector inv_std(channels);
  for (Eigen::Index c = 0; c < channels; ++c) {
    inv_std[c] = 1.0 / std::max(std::sqrt(sq[c] / count), 1e-6);
  }
  return {mean, inv_std};
}

void FeatureStandardizer::apply(Eigen::Ref<Vector> stacked) const {
  const auto channels = mean.size();
  for (Eigen::Index offset = 0; offset + channels <= stacked.size(); offset += channels) {
    auto block = stacked.segment(offset, channels);
    block = ((block - mean).array() * inv_std.array()).matrix();
  }
}

Matrix gather_inputs(const Eigen::MatrixXf& framewise, std::span<const int> frames,
                     const FeatureStandardizer& standardizer) {
  Matrix inputs(framewise.rows() * kContextFrames, static_cast<Eigen::Index>(frames.size()));
  for (std::size_t j = 0; j < frames.size(); ++j) {
    auto col = inputs.col(static_cast<Eigen::Index>(j));
    stack_context_into(framewise, frames[j], kContextFrames, col);
    standardizer.apply(col);
  }
  return inputs;
}

namespace {

std::string join_widths(const std::vector<int>& widths) {
  std::string out;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(widths[i]);
  }
  return out;
}

std::vector<int> parse_widths(const std::string& text) {
  std::vector<int> widths;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) widths.push_back(std::stoi(item));
  return widths;
}

void write_doubles(std::ostream& out, const double* data, std::size_t n) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

void read_doubles(std::istream& in, double* data, std::size_t n, const std::string& name) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(n * sizeof(double))) {
    throw InputError(name + ": truncated checkpoint payload");
  }
}

void write_network(std::ostream& out, const NetworkParams& params) {
  for (const auto& layer : params.layers) {
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w =
        layer.weights;
    write_doubles(out, w.data(), static_cast<std::size_t>(w.size()));
    write_doubles(out, layer.biases.data(), static_cast<std::size_t>(layer.biases.size()));
  }
}

void read_network(std::istream& in, NetworkParams& params, const std::string& name) {
  int fan_in = params.layout.input_dim;
  std::vector<int> widths = params.layout.hidden;
  widths.push_back(params.layout.output_dim());
  for (int width : widths) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w(width, fan_in);
    read_doubles(in, w.data(), static_cast<std::size_t>(w.size()), name);
    LayerParams layer{w, Vector(width)};
    read_doubles(in, layer.biases.data(), static_cast<std::size_t>(width), name);
    params.layers.push_back(std::move(layer));
    fan_in = width;
  }
}

}  // namespace

void save_model(const std::filesystem::path& path, const ModelBundle& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out.precision(17);
  out << "earlydet-model 1\n";
  if (!model.config_hash.empty()) out << "config_hash " << model.config_hash << "\n";
  out << "num_classes " << model.num_classes() << "\n";
  out << "norm_max_on " << model.normalization.max_on << "\n";
  out << "norm_max_off " << model.normalization.max_off << "\n";
  for (const auto* net : {&model.dnn1, &model.dnn2}) {
    const auto& l = net->layout;
    out << "network " << (l.kind == NetworkKind::kForeBackground ? "dnn1" : "dnn2")
        << " input " << l.input_dim << " hidden " << join_widths(l.hidden) << " classes "
        << l.num_classes << " dropout " << net->dropout_p << "\n";
  }
  out << "standardizer " << model.standardizer.mean.size() << "\n";
  out << "end_header\n";
  write_network(out, model.dnn1);
  write_network(out, model.dnn2);
  write_doubles(out, model.standardizer.mean.data(),
                static_cast<std::size_t>(model.standardizer.mean.size()));
  write_doubles(out, model.standardizer.inv_std.data(),
                static_cast<std::size_t>(model.standardizer.inv_std.size()));
}

ModelBundle load_model(const std::filesystem::path& path) {
  const std::string name = path.string();
  if (!std::filesystem::exists(path)) throw MissingArtifact("missing model checkpoint: " + name);
  std::ifstream in(path, std::ios::binary);
  std::string line;
  std::getline(in, line);
  if (line != "earlydet-model 1") throw InputError(name + ": not an earlydet checkpoint");

  ModelBundle model;
  std::vector<NetworkParams> nets;
  long standardizer_dim = -1;
  while (std::getline(in, line) && line != "end_header") {
    std::istringstream fields(line);
    std::string key;
    fields >> key;
    if (key == "config_hash") {
      fields >> model.config_hash;
    } else if (key == "norm_max_on") {
      fields >> model.normalization.max_on;
    } else if (key == "norm_max_off") {
      fields >> model.normalization.max_off;
    } else if (key == "standardizer") {
      fields >> standardizer_dim;
    } else if (key == "network") {
      std::string kind, tag, hidden;
      NetworkParams net;
      fields >> kind;
      net.layout.kind = kind == "dnn1" ? NetworkKind::kForeBackground : NetworkKind::kMultitask;
      while (fields >> tag) {
        if (tag == "input") fields >> net.layout.input_dim;
        else if (tag == "hidden") { fields >> hidden; net.layout.hidden = parse_widths(hidden); }
        else if (tag == "classes") fields >> net.layout.num_classes;
        else if (tag == "dropout") fields >> net.dropout_p;
      }
      try {
        net.layout.validate();
      } catch (const ConfigError& e) {
        throw InputError(name + ": " + e.what());
      }
      nets.push_back(std::move(net));
    }
  }
  if (line != "end_header" || nets.size() != 2 || standardizer_dim <= 0) {
    throw InputError(name + ": malformed checkpoint header");
  }
  for (auto& net : nets) read_network(in, net, name);
  model.dnn1 = std::move(nets[0]);
  model.dnn2 = std::move(nets[1]);
  model.standardizer.mean.resize(standardizer_dim);
  model.standardizer.inv_std.resize(standardizer_dim);
  read_doubles(in, model.standardizer.mean.data(), standardizer_dim, name);
  read_doubles(in, model.standardizer.inv_std.data(), standardizer_dim, name);
  model.normalization.validate();
  return model;
}

StreamPredictions predict_stream(const ModelBundle& model, const Eigen::MatrixXf& framewise) {
  constexpr int kChunk = 512;
  const int frames = static_cast<int>(framewise.cols());
  const int classes = model.num_classes();
  StreamPredictions out;
  out.p_fg.resize(frames);
  out.class_posterior.resize(classes, frames);
  out.distances.resize(2, frames);

  std::vector<int> index;
  for (int start = 0; start < frames; start += kChunk) {
    const int n = std::min(kChunk, frames - start);
    index.resize(n);
    for (int j = 0; j < n; ++j) index[j] = start + j;
    const Matrix inputs = gather_inputs(framewise, index, model.standardizer);

    const Matrix fg = softmax_columns(forward(model.dnn1, inputs, Mode::kEval).logits);
    out.p_fg.segment(start, n) = fg.row(1).transpose();

    const Matrix logits = forward(model.dnn2, inputs, Mode::kEval).logits;
    out.class_posterior.middleCols(start, n) = softmax_columns(logits.topRows(classes));
    for (int j = 0; j < n; ++j) {
      out.distances(0, start + j) = sigmoid(logits(classes, j));
      out.distances(1, start + j) = sigmoid(logits(classes + 1, j));
    }
  }
  return out;
}

void save_thresholds(const std::filesystem::path& path, const DetectionThresholds& thresholds,
                     std::span<const std::string> class_names,
                     const std::string& config_hash) {
  nlohmann::ordered_json doc;
  doc["config_hash"] = config_hash;
  doc["classes"] = std::vector<std::string>(class_names.begin(), class_names.end());
  doc["beta"] = thresholds.beta;
  doc["divisors"] = thresholds.divisors;
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

DetectionThresholds load_thresholds(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw MissingArtifact("missing thresholds file: " + path.string());
  }
  std::ifstream in(path);
  DetectionThresholds t;
  try {
    const auto doc = nlohmann::json::parse(in);
    t.beta = doc.at("beta").get<std::vector<double>>();
    t.divisors = doc.at("divisors").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  t.validate();
  return t;
}

}  // namespace earlydet
