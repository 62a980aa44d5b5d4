#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "earlydet/config.hpp"
#include "earlydet/error.hpp"
#include "json.hpp"

using namespace earlydet;
namespace fs = std::filesystem;

namespace {

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("defaults") {
    const auto c = RunConfig::resolve(std::nullopt, {});
    CHECK(c.weighted_loss.fg_weight == 2.0);
    CHECK(c.weighted_loss.bg_weight == 1.0);
    CHECK(c.multitask_loss.class_weight == 1.0);
    CHECK(c.multitask_loss.dist_weight == 2.0);
    CHECK(c.multitask_loss.conf_weight == 1.0);
    CHECK(c.weighted_loss.l2 == 1e-3);
    CHECK(c.multitask_loss.l2 == 1e-3);
    CHECK(c.training.learning_rate == 1e-4);
    CHECK(c.training.epochs == 25);
    CHECK(c.training.dnn1_batch == 256);
    CHECK(c.training.dnn2_batch == 128);
    CHECK(c.calibration.folds == 9);
    CHECK(c.calibration.grid_step == 0.1);
    CHECK(c.evaluation.k_step == 10);
    CHECK(c.benchmark.train_streams == 9);
    CHECK(c.benchmark.test_streams == 3);
  }

  TEST_CASE("overrides and flags") {
    const auto c = RunConfig::resolve(
        std::nullopt, {"training.epochs=3", "evaluation.split=train", "paths.model=m.bin"}, 99,
        fs::path("/tmp/x"));
    CHECK(c.training.epochs == 3);
    CHECK(c.evaluation.split == "train");
    CHECK(c.seed == 99);
    CHECK(c.training.seed == 99);
    CHECK(c.benchmark.seed == 99);
    CHECK(c.paths.resolve(c.paths.model) == fs::path("/tmp/x/m.bin"));
    CHECK(c.paths.resolve("/abs/file") == fs::path("/abs/file"));
  }

  TEST_CASE("invalid fields are named") {
    CHECK(error_of([] { RunConfig::resolve(std::nullopt, {"training.epochs=0"}); })
              .find("training.epochs") != std::string::npos);
    CHECK(error_of([] { RunConfig::resolve(std::nullopt, {"training.epoch=3"}); })
              .find("training.epoch") != std::string::npos);
    CHECK(error_of([] { RunConfig::resolve(std::nullopt, {"training.epochs=abc"}); })
              .find("training.epochs") != std::string::npos);
    CHECK(error_of([] { RunConfig::resolve(std::nullopt, {"training.epochs=2.5"}); })
              .find("training.epochs") != std::string::npos);
    CHECK(error_of([] { RunConfig::resolve(std::nullopt, {"calibration.grid_step=0"}); })
              .find("calibration.grid_step") != std::string::npos);
    CHECK(error_of([] { RunConfig::resolve(std::nullopt, {"features.channels=32"}); })
              .find("features.channels") != std::string::npos);
    CHECK(error_of([] { RunConfig::resolve(std::nullopt, {"evaluation.split=dev"}); })
              .find("evaluation.split") != std::string::npos);
    CHECK(error_of([] { RunConfig::resolve(std::nullopt, {"noequals"}); }) != "");
    CHECK(error_of([] {
            RunConfig::resolve(std::nullopt, {R"(synth.classes=[{"name":"x","generator":"bell"}])"});
          }).find("synth.classes[0].generator") != std::string::npos);
  }

  TEST_CASE("config file merging and errors") {
    const auto dir = fs::temp_directory_path() / "earlydet_config_test";
    fs::create_directories(dir);
    std::ofstream(dir / "c.json") << R"({"training": {"epochs": 4}, "seed": 5})";
    auto c = RunConfig::resolve(dir / "c.json", {"training.epochs=6"});
    CHECK(c.training.epochs == 6);
    CHECK(c.seed == 5);
    std::ofstream(dir / "bad.json") << "{ nope";
    CHECK_THROWS_AS(RunConfig::resolve(dir / "bad.json", {}), ConfigError);
    CHECK_THROWS_AS(RunConfig::resolve(dir / "missing.json", {}), MissingArtifact);
    fs::remove_all(dir);
  }

  TEST_CASE("canonical json round trips and the hash ignores paths") {
    const auto a = RunConfig::resolve(std::nullopt, {"training.epochs=7"});
    const auto b = RunConfig::from_json_text(a.to_json());
    CHECK(a.to_json() == b.to_json());
    CHECK(a.hash() == b.hash());
    CHECK(a.hash().size() == 16);
    const auto moved = RunConfig::resolve(std::nullopt, {"training.epochs=7"}, {}, fs::path("elsewhere"));
    CHECK(moved.hash() == a.hash());
    const auto other = RunConfig::resolve(std::nullopt, {"training.epochs=8"});
    CHECK(other.hash() != a.hash());
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  }
}
