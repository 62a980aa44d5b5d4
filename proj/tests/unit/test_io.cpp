#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <random>

#include "earlydet/error.hpp"
#include "earlydet/model.hpp"
#include "earlydet/wav.hpp"

using namespace earlydet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

AudioBuffer noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  AudioBuffer a;
  a.samples.resize(n);
  for (double& s : a.samples) s = u(rng);
  return a;
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("wav round trips") {
    TempDir dir("earlydet_wav_test");
    const auto a = noise(5000, 1);
    write_wav(dir.path / "a16.wav", a, WavEncoding::kPcm16);
    const auto r16 = read_wav(dir.path / "a16.wav");
    CHECK(r16.sample_rate == 44100.0);
    CHECK(r16.samples == quantize_pcm16(a).samples);
    write_wav(dir.path / "af.wav", a, WavEncoding::kFloat32);
    const auto rf = read_wav(dir.path / "af.wav");
    REQUIRE(rf.samples.size() == a.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
      CHECK(rf.samples[i] == static_cast<double>(static_cast<float>(a.samples[i])));
    }
    AudioBuffer low = a;
    low.sample_rate = 16000.0;
    write_wav(dir.path / "low.wav", low);
    CHECK(read_wav(dir.path / "low.wav").sample_rate == 16000.0);
    CHECK_THROWS_AS(read_wav(dir.path / "missing.wav"), MissingArtifact);
    std::ofstream(dir.path / "junk.wav") << "not a wav file";
    CHECK_THROWS_AS(read_wav(dir.path / "junk.wav"), InputError);
  }

  TEST_CASE("feature file round trip") {
    TempDir dir("earlydet_feat_test");
    FeatureFile f;
    f.framewise = Eigen::MatrixXf::Random(64, 37);
    f.config_hash = "feedbeef";
    write_feature_file(dir.path / "x.feat", f);
    const auto r = read_feature_file(dir.path / "x.feat");
    CHECK(r.framewise == f.framewise);
    CHECK(r.hop_s == 0.010);
    CHECK(r.frame_s == 0.100);
    CHECK(r.config_hash == "feedbeef");
    CHECK_THROWS_AS(read_feature_file(dir.path / "none.feat"), MissingArtifact);
  }

  TEST_CASE("model checkpoint round trip is bit-exact") {
    TempDir dir("earlydet_model_test");
    ModelBundle m;
    m.dnn1 = init_params(NetworkLayout{NetworkKind::kForeBackground, 320, {16, 8}, 0}, 3, 0.5);
    m.dnn2 = init_params(NetworkLayout{NetworkKind::kMultitask, 320, {12}, 4}, 4, 0.2);
    for (auto& l : m.dnn2.layers) l.biases.setRandom();
    m.normalization = {123.0, 150.0};
    m.standardizer = FeatureStandardizer::identity();
    m.standardizer.mean.setRandom();
    m.config_hash = "0011223344556677";
    save_model(dir.path / "m.ckpt", m);
    const auto r = load_model(dir.path / "m.ckpt");
    CHECK(r.config_hash == m.config_hash);
    CHECK(r.num_classes() == 4);
    CHECK(r.dnn1.layout == m.dnn1.layout);
    CHECK(r.dnn2.layout == m.dnn2.layout);
    CHECK(r.dnn1.dropout_p == 0.5);
    CHECK(r.normalization.max_on == 123.0);
    CHECK(r.normalization.max_off == 150.0);
    CHECK(r.standardizer.mean == m.standardizer.mean);
    CHECK(r.standardizer.inv_std == m.standardizer.inv_std);
    for (std::size_t i = 0; i < m.dnn2.layers.size(); ++i) {
      CHECK(r.dnn2.layers[i].weights == m.dnn2.layers[i].weights);
      CHECK(r.dnn2.layers[i].biases == m.dnn2.layers[i].biases);
    }
    // Identical predictions after reload.
    const Eigen::MatrixXf fw = Eigen::MatrixXf::Random(64, 30);
    const auto p = predict_stream(m, fw);
    const auto q = predict_stream(r, fw);
    CHECK(p.p_fg == q.p_fg);
    CHECK(p.class_posterior == q.class_posterior);
    CHECK(p.distances == q.distances);
    CHECK_THROWS_AS(load_model(dir.path / "absent.ckpt"), MissingArtifact);
    std::ofstream(dir.path / "bad.ckpt") << "earlydet-model 1\ngarbage\n";
    CHECK_THROWS_AS(load_model(dir.path / "bad.ckpt"), InputError);
    // Truncated payload.
    fs::copy_file(dir.path / "m.ckpt", dir.path / "short.ckpt");
    fs::resize_file(dir.path / "short.ckpt", fs::file_size(dir.path / "m.ckpt") - 8);
    CHECK_THROWS_AS(load_model(dir.path / "short.ckpt"), InputError);
  }

  TEST_CASE("thresholds round trip") {
    TempDir dir("earlydet_thr_test");
    const DetectionThresholds t{{0.3, 0.7}, {12.5, 140.25}};
    const std::vector<std::string> names{"a", "b"};
    save_thresholds(dir.path / "t.json", t, names, "cafe");
    const auto r = load_thresholds(dir.path / "t.json");
    CHECK(r.beta == t.beta);
    CHECK(r.divisors == t.divisors);
    CHECK_THROWS_AS(load_thresholds(dir.path / "none.json"), MissingArtifact);
  }

  TEST_CASE("standardizer") {
    std::vector<StreamFeatures> streams(1);
    streams[0].framewise = Eigen::MatrixXf::Random(64, 500) * 3.0f;
    streams[0].framewise.array() += 2.0f;
    const auto s = FeatureStandardizer::fit(streams);
    const std::vector<int> frames{0, 10, 499};
    const Matrix x = gather_inputs(streams[0].framewise, frames, s);
    CHECK(x.rows() == 320);
    CHECK(x.cols() == 3);
    // Standardized over all frames: mean ~0, std ~1 per coefficient.
    std::vector<int> all(500);
    for (int i = 0; i < 500; ++i) all[i] = i;
    const Matrix full = gather_inputs(streams[0].framewise, all, s);
    const Vector centre = full.middleRows(128, 64).rowwise().mean();
    CHECK(centre.cwiseAbs().maxCoeff() < 1e-6);
  }
}
