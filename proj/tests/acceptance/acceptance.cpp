// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. `--only N[,M...]` restricts the run to selected criteria.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "earlydet/config.hpp"
#include "earlydet/eval.hpp"
#include "earlydet/gradcheck.hpp"
#include "earlydet/inference.hpp"
#include "earlydet/log.hpp"
#include "earlydet/losses.hpp"
#include "earlydet/model.hpp"
#include "earlydet/synth.hpp"
#include "earlydet/training.hpp"
#include "fixtures.hpp"
#include "random_streams.hpp"

using namespace earlydet;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

// Pinned tolerances and limits.
constexpr int kGradientSeeds = 20;
constexpr double kRuntimeLimitShort = 60.0;
constexpr int kMonotoneStreams = 1000;
constexpr int kOracleStreams = 50;
constexpr double kHandTolerance = 1e-5;
constexpr double kMinF1 = 0.90;
constexpr double kMaxEr = 0.20;
constexpr double kBenchmarkLimit = 600.0;
constexpr double kEarlyFraction = 0.95;
constexpr int kEarlyClassesNeeded = 4;
constexpr int kWeightedSeeds = 5;

Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  const auto report = run_gradient_suite(kGradientSeeds, 2024);
  const double elapsed = seconds_since(t0);
  std::set<std::string> losses;
  for (const auto& e : report.entries) losses.insert(e.loss);
  const bool pass = report.max_rel_error < kGradCheckTolerance && losses.size() == 2 &&
                    elapsed < kRuntimeLimitShort;
  return {pass, "max rel error " + fmt("%.3g", report.max_rel_error) + " < 1e-5 over " +
                    std::to_string(kGradientSeeds) + " seeds x 2 losses, " +
                    fmt("%.1f", elapsed) + " s"};
}

Outcome monotonicity() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(7001);
  long long comparisons = 0;
  long long violations = 0;
  long long retracted = 0;
  long long triggers = 0;
  for (int s = 0; s < kMonotoneStreams; ++s) {
    const int frames = 40 + static_cast<int>(rng() % 80);
    const int classes = 1 + static_cast<int>(rng() % 4);
    const NormalizationConstants k{1.0 + (rng() % 30), 1.0 + (rng() % 30)};
    const auto p = earlydet::testing::random_predictions(rng, frames, classes);
    std::vector<double> beta(classes), divisors(classes);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int c = 0; c < classes; ++c) {
      beta[c] = std::round(10.0 * u(rng)) / 10.0;
      divisors[c] = 1.0 + 10.0 * u(rng);
    }
    StreamingDetector detector({beta, divisors}, k);
    std::vector<std::vector<double>> previous(classes);
    for (int m = 0; m < frames; ++m) {
      detector.step(m, p.frame(m));
      const auto& track = detector.track();
      for (int c = 0; c < classes; ++c) {
        const auto& now = track.scores(c);
        for (std::size_t n = 0; n < previous[c].size(); ++n) {
          ++comparisons;
          if (!(now[n] >= previous[c][n])) ++violations;
        }
        previous[c] = now;
      }
      for (const auto& t : detector.triggers()) {
        for (int n = t.onset; n <= t.offset; ++n) {
          if (!detector.thresholds().above(t.class_id, track.score(t.class_id, n))) ++retracted;
        }
      }
    }
    triggers += static_cast<long long>(detector.triggers().size());
  }
  const double elapsed = seconds_since(t0);
  const bool pass = violations == 0 && retracted == 0 && elapsed < kRuntimeLimitShort;
  return {pass, std::to_string(kMonotoneStreams) + " streams, " + std::to_string(comparisons) +
                    " comparisons, " + std::to_string(violations) + " decreases, " +
                    std::to_string(triggers) + " triggers, " + std::to_string(retracted) +
                    " retracted, " + fmt("%.1f", elapsed) + " s"};
}

Outcome streaming_batch_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(7002);
  int mismatches = 0;
  for (int s = 0; s < kOracleStreams; ++s) {
    const int frames = 50 + static_cast<int>(rng() % 400);
    const int classes = 1 + static_cast<int>(rng() % 5);
    const NormalizationConstants k{1.0 + (rng() % 60), 1.0 + (rng() % 60)};
    const auto p = earlydet::testing::random_predictions(rng, frames, classes);
    StreamingDetector detector({std::vector<double>(classes, 0.5),
                                std::vector<double>(classes, 3.0)},
                               k);
    for (int m = 0; m < frames; ++m) detector.step(m, p.frame(m));
    const int length = detector.track().extent() + 3;
    const auto oracle = earlydet::testing::batch_scores(p, k, length);
    bool same = detector.track().consumed() == frames;
    for (int c = 0; c < classes; ++c) {
      for (int n = 0; n < length; ++n) same &= detector.track().score(c, n) == oracle[c][n];
    }
    mismatches += !same;
  }
  const double elapsed = seconds_since(t0);
  return {mismatches == 0 && elapsed < kRuntimeLimitShort,
          std::to_string(kOracleStreams) + " streams, " + std::to_string(mismatches) +
              " not bit-identical, " + fmt("%.1f", elapsed) + " s"};
}

Outcome loss_hand_values() {
  // Oracle values re-derived by tests/oracles/hand_values.py.
  const auto mt = earlydet::testing::multitask_worked_example();
  const auto w = earlydet::testing::weighted_worked_example();
  const IouTerms terms = iou_terms({0.2, 0.4}, {0.1, 0.5});
  const double iou = terms.intersection / terms.union_;
  const double checks[][2] = {{mt.components.at("class"), 0.5108256237659907},
                              {mt.components.at("distance"), 0.02},
                              {iou, 5.0 / 7.0},
                              {mt.components.at("confidence"), 0.40816326344023324},
                              {mt.total, 0.958988887206224},
                              {w.total, 0.4462871026284194}};
  double worst = 0.0;
  for (const auto& c : checks) worst = std::max(worst, std::abs(c[0] - c[1]));
  std::ostringstream os;
  os.precision(6);
  os << "E_class " << mt.components.at("class") << ", E_dist " << mt.components.at("distance")
     << ", E_conf " << mt.components.at("confidence") << ", total " << mt.total
     << ", weighted " << w.total << "; max deviation " << fmt("%.2g", worst);
  return {worst <= kHandTolerance, os.str()};
}

struct BenchmarkRun {
  double elapsed = 0.0;
  std::vector<ScoredStream> test;
  ModelBundle model;
  DetectionThresholds thresholds;
  OfflineResult offline;
};

BenchmarkRun run_benchmark() {
  const auto t0 = Clock::now();
  const RunConfig config = RunConfig::resolve(std::nullopt, {});
  const auto& bench = config.benchmark;
  std::vector<StreamFeatures> train;
  std::vector<StreamFeatures> test;
  for (int i = 0; i < bench.train_streams; ++i) {
    auto s = synthesize_stream(benchmark_stream_spec(bench, Split::kTrain, i));
    s.id = benchmark_stream_id(Split::kTrain, i);
    train.push_back(featurize(s, config.frames, config.gammatone));
  }
  for (int i = 0; i < bench.test_streams; ++i) {
    auto s = synthesize_stream(benchmark_stream_spec(bench, Split::kTest, i));
    s.id = benchmark_stream_id(Split::kTest, i);
    test.push_back(featurize(s, config.frames, config.gammatone));
  }
  const int classes = static_cast<int>(bench.stream.classes.size());
  BenchmarkRun run;
  run.model = train_model(train, classes, config.weighted_loss, config.multitask_loss,
                          config.training, [](const EpochLog& e) {
                            std::fprintf(stderr, "  %s epoch %d loss %.4f (%.1f s)\n",
                                         e.network.c_str(), e.epoch, e.total, e.wall_s);
                          });
  std::vector<ScoredStream> scored_train;
  for (const auto& s : train) {
    scored_train.push_back({s.id, predict_stream(run.model, s.framewise), s.events});
  }
  for (const auto& s : test) {
    run.test.push_back({s.id, predict_stream(run.model, s.framewise), s.events});
  }
  run.thresholds = calibrate_thresholds(scored_train, run.model.normalization, classes,
                                        config.calibration)
                       .thresholds;
  run.offline = evaluate_offline(run.test, run.thresholds, run.model.normalization);
  run.elapsed = seconds_since(t0);
  return run;
}

Outcome end_to_end(const BenchmarkRun& run) {
  const auto& overall = run.offline.metrics.overall;
  const double f1 = overall.f1.value_or(0.0);
  const double er = overall.er.value_or(1e9);
  const bool pass = f1 >= kMinF1 && er <= kMaxEr && run.elapsed <= kBenchmarkLimit;
  return {pass, "overall F1 " + fmt("%.4f", f1) + " (>= 0.90), ER " + fmt("%.4f", er) +
                    " (<= 0.20), " + fmt("%.0f", run.elapsed) + " s (<= 600 s)"};
}

Outcome early_detection(const BenchmarkRun& run) {
  const int classes = run.thresholds.num_classes();
  const auto curves = online_curves(run.test, run.thresholds, run.model.normalization, classes,
                                    RunConfig{}.evaluation.k_step);
  int early = 0;
  bool endpoints_equal = true;
  bool slopes_ok = true;
  std::ostringstream os;
  for (const auto& curve : curves) {
    const auto& offline = run.offline.metrics.per_class[curve.class_id];
    const auto& last = curve.points.back();
    endpoints_equal &= last.counts == offline.counts && last.f1 == offline.f1 &&
                       last.er == offline.er;
    const double target = kEarlyFraction * offline.f1.value_or(0.0);
    int first_k = -1;
    for (const auto& p : curve.points) {
      if (p.k < curve.median_event_length && p.f1.value_or(0.0) >= target) {
        first_k = p.k;
        break;
      }
    }
    early += first_k >= 0;
    const double slope = f1_trend_slope(curve);
    slopes_ok &= slope >= 0.0;
    os << " c" << curve.class_id << ": k=" << first_k << "/median " << curve.median_event_length
       << " slope " << fmt("%.4f", slope) << ";";
  }
  const bool pass = early >= kEarlyClassesNeeded && endpoints_equal;
  return {pass, std::to_string(early) + "/" + std::to_string(classes) +
                    " classes reach 95% of offline F1 before the median length; endpoint " +
                    (endpoints_equal ? "equals" : "DIFFERS FROM") + " offline; slopes " +
                    (slopes_ok ? ">= 0" : "include negatives") + ";" + os.str()};
}

// Streams of Gaussian frames with 50-frame foreground blocks every 150
// frames (2:1 background:foreground). Foreground frames are shifted by a
// small constant so the classes overlap.
std::vector<StreamFeatures> imbalanced_streams(std::uint64_t seed, int count) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::vector<StreamFeatures> out;
  for (int s = 0; s < count; ++s) {
    StreamFeatures f;
    f.id = "imbalanced_" + std::to_string(s);
    const int frames = 3000;
    f.framewise.resize(kCoefficients, frames);
    for (int i = 0; i < f.framewise.size(); ++i) f.framewise.data()[i] = n(rng);
    for (int start = 100; start + 50 <= frames; start += 150) {
      f.events.push_back({0, start, start + 49});
      f.framewise.middleCols(start, 50).array() += 0.06f;
    }
    out.push_back(std::move(f));
  }
  return out;
}

double foreground_recall(const NetworkParams& net, const FeatureStandardizer& standardizer,
                         const std::vector<StreamFeatures>& streams) {
  int hits = 0;
  int total = 0;
  for (const auto& s : streams) {
    std::vector<int> frames;
    for (const auto& e : s.events) {
      for (int i = e.onset; i <= e.offset; ++i) frames.push_back(i);
    }
    const Matrix x = gather_inputs(s.framewise, frames, standardizer);
    const Matrix probs = softmax_columns(forward(net, x, Mode::kEval).logits);
    for (Eigen::Index j = 0; j < probs.cols(); ++j) hits += probs(1, j) >= probs(0, j);
    total += static_cast<int>(frames.size());
  }
  return static_cast<double>(hits) / total;
}

Outcome weighted_loss_effect() {
  const auto t0 = Clock::now();
  std::vector<double> recall_weighted;
  std::vector<double> recall_plain;
  for (int seed = 0; seed < kWeightedSeeds; ++seed) {
    const auto train = imbalanced_streams(900 + seed, 2);
    const auto test = imbalanced_streams(1900 + seed, 1);
    const auto set = make_training_set(train, 1);
    const auto standardizer = FeatureStandardizer::fit(train);
    TrainingSettings settings;
    settings.epochs = 4;
    settings.hidden = {64, 32, 64};
    settings.seed = 100 + seed;
    WeightedLossConfig weighted;  // lambda_fg = 2
    WeightedLossConfig plain;
    plain.fg_weight = 1.0;
    const auto a = train_dnn1(train, set, standardizer, weighted, settings);
    const auto b = train_dnn1(train, set, standardizer, plain, settings);
    recall_weighted.push_back(foreground_recall(a, standardizer, test));
    recall_plain.push_back(foreground_recall(b, standardizer, test));
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  const double mw = median(recall_weighted);
  const double mp = median(recall_plain);
  return {mw >= mp, "median foreground recall " + fmt("%.4f", mw) + " with lambda_fg=2 vs " +
                        fmt("%.4f", mp) + " with lambda_fg=1 over " +
                        std::to_string(kWeightedSeeds) + " seeds, " +
                        fmt("%.1f", seconds_since(t0)) + " s"};
}

Outcome metric_formulas() {
  const EventCounts counts{8, 1, 2, 10};
  const std::vector<EventCounts> per{counts};
  const auto report = compute_metrics(per);
  const bool f1_ok = report.overall.f1 && *report.overall.f1 == 16.0 / 19.0;
  const bool er_ok = report.overall.er && *report.overall.er == 0.3;
  const auto grid = threshold_grid(RunConfig{}.calibration.grid_step);
  bool grid_ok = grid.size() == 11;
  for (std::size_t i = 0; grid_ok && i < grid.size(); ++i) grid_ok = grid[i] == i * 0.1;
  const int folds = RunConfig{}.calibration.folds;
  return {f1_ok && er_ok && grid_ok && folds == 9,
          "F1 " + fmt("%.17g", report.overall.f1.value_or(-1)) + " (16/19), ER " +
              fmt("%.17g", report.overall.er.value_or(-1)) + " (0.3), grid size " +
              std::to_string(grid.size()) + ", folds " + std::to_string(folds)};
}

}  // namespace

int main(int argc, char** argv) {
  quiet_logging() = true;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string item;
      while (std::getline(ss, item, ',')) only.insert(std::stoi(item));
    }
  }
  auto selected = [&](int n) { return only.empty() || only.count(n) > 0; };

  int failures = 0;
  auto report = [&](int n, const char* name, const Outcome& o) {
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", n, name,
                o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  };

  if (selected(1)) report(1, "gradient correctness", gradient_correctness());
  if (selected(2)) report(2, "monotonicity", monotonicity());
  if (selected(3)) report(3, "streaming/batch equivalence", streaming_batch_equivalence());
  if (selected(4)) report(4, "loss hand values", loss_hand_values());
  if (selected(5) || selected(6)) {
    const BenchmarkRun run = run_benchmark();
    if (selected(5)) report(5, "synthetic end-to-end", end_to_end(run));
    if (selected(6)) report(6, "early detection", early_detection(run));
  }
  if (selected(7)) report(7, "weighted-loss effect", weighted_loss_effect());
  if (selected(8)) report(8, "metric formulas", metric_formulas());
  return failures == 0 ? 0 : 1;
}
