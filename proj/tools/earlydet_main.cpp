// earlydet <command> --config <path> [--set key=value ...] [--seed N] [--out dir]
// Exit status: 0 ok, 1 failed check or runtime error, 2 configuration error,
// 3 missing input artifact.

#include <cstdint>
#include <exception>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "earlydet/config.hpp"
#include "earlydet/error.hpp"
#include "earlydet/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitMissing = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming early audio-event detection"};
  app.require_subcommand(1);

  struct Options {
    std::string config;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
  };
  Options opts;
  const std::map<std::string, std::string> descriptions = {
      {"synth", "Generate the synthetic benchmark streams"},
      {"train", "Train both networks"},
      {"calibrate", "Select per-class thresholds on training streams"},
      {"detect", "Run the streaming detector over a split"},
      {"evaluate", "Score offline detections against ground truth"},
      {"curves", "Compute online metrics versus observed event length"},
      {"check-gradients", "Finite-difference check of both loss gradients"}};
  for (const auto& name : earlydet::command_names()) {
    auto* sub = app.add_subcommand(name, descriptions.at(name));
    sub->add_option("--config", opts.config, "JSON run configuration")->required();
    sub->add_option("--set", opts.sets, "Override a field, e.g. training.epochs=5")
        ->take_all()
        ->allow_extra_args(false);
    sub->add_option("--seed", opts.seed, "Run seed");
    sub->add_option("--out", opts.out, "Output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    std::optional<std::filesystem::path> out;
    if (opts.out) out = *opts.out;
    const auto config = earlydet::RunConfig::resolve(opts.config, opts.sets, opts.seed, out);
    return earlydet::run_command(command, config);
  } catch (const earlydet::ConfigError& e) {
    std::cerr << "earlydet: configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const earlydet::MissingArtifact& e) {
    std::cerr << "earlydet: " << e.what() << "\n";
    return kExitMissing;
  } catch (const std::exception& e) {
    std::cerr << "earlydet: error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}
