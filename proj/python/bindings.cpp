#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "earlydet/config.hpp"
#include "earlydet/error.hpp"
#include "earlydet/eval.hpp"
#include "earlydet/features.hpp"
#include "earlydet/gradcheck.hpp"
#include "earlydet/inference.hpp"
#include "earlydet/model.hpp"
#include "earlydet/pipeline.hpp"
#include "earlydet/synth.hpp"
#include "earlydet/wav.hpp"

namespace py = pybind11;
using namespace earlydet;

PYBIND11_MODULE(_earlydet, m) {
  m.doc() = "Streaming early audio-event detection";

  auto config_error = py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<MissingArtifact>(m, "MissingArtifact", PyExc_FileNotFoundError);
  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_RuntimeError);
  (void)config_error;

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_static("resolve", &RunConfig::resolve, py::arg("file") = py::none(),
                  py::arg("overrides") = std::vector<std::string>{},
                  py::arg("seed") = py::none(), py::arg("out_dir") = py::none())
      .def_static("from_json", &RunConfig::from_json_text, py::arg("text"))
      .def("to_json", &RunConfig::to_json)
      .def("hash", &RunConfig::hash)
      .def_readonly("seed", &RunConfig::seed);

  m.def("run_command", &run_command, py::arg("command"), py::arg("config"),
        py::call_guard<py::gil_scoped_release>());
  m.def("command_names", &command_names);

  py::class_<EventInterval>(m, "EventInterval")
      .def(py::init([](int c, int on, int off) { return EventInterval{c, on, off}; }),
           py::arg("class_id"), py::arg("onset"), py::arg("offset"))
      .def_readwrite("class_id", &EventInterval::class_id)
      .def_readwrite("onset", &EventInterval::onset)
      .def_readwrite("offset", &EventInterval::offset)
      .def("__eq__", &EventInterval::operator==)
      .def("__repr__", [](const EventInterval& e) {
        return "EventInterval(class_id=" + std::to_string(e.class_id) +
               ", onset=" + std::to_string(e.onset) + ", offset=" + std::to_string(e.offset) +
               ")";
      });

  py::class_<DetectedEvent>(m, "DetectedEvent")
      .def(py::init([](int c, int on, int off) { return DetectedEvent{c, on, off}; }),
           py::arg("class_id"), py::arg("onset"), py::arg("offset"))
      .def_readwrite("class_id", &DetectedEvent::class_id)
      .def_readwrite("onset", &DetectedEvent::onset)
      .def_readwrite("offset", &DetectedEvent::offset)
      .def_readwrite("peak_score", &DetectedEvent::peak_score)
      .def_readwrite("trigger_frame", &DetectedEvent::trigger_frame);

  m.def(
      "synthesize_benchmark_stream",
      [](std::uint64_t seed, bool train, int index) {
        BenchmarkSpec bench;
        bench.seed = seed;
        const Split split = train ? Split::kTrain : Split::kTest;
        AnnotatedStream s = synthesize_stream(benchmark_stream_spec(bench, split, index));
        return py::make_tuple(s.audio.samples, s.audio.sample_rate, s.events);
      },
      py::arg("seed") = 2024, py::arg("train") = true, py::arg("index") = 0,
      "Returns (samples, sample_rate, events) of one benchmark stream.");

  m.def(
      "extract_features",
      [](std::vector<double> samples, double sample_rate) {
        py::gil_scoped_release release;
        return Eigen::MatrixXf(extract_framewise(AudioBuffer{std::move(samples), sample_rate}));
      },
      py::arg("samples"), py::arg("sample_rate") = 44100.0,
      "Log-gammatone coefficients, shape (64, frames).");

  m.def(
      "read_wav",
      [](const std::filesystem::path& path) {
        AudioBuffer a = read_wav(path);
        return py::make_tuple(a.samples, a.sample_rate);
      },
      py::arg("path"));
  m.def(
      "write_wav",
      [](const std::filesystem::path& path, std::vector<double> samples, double rate) {
        write_wav(path, AudioBuffer{std::move(samples), rate});
      },
      py::arg("path"), py::arg("samples"), py::arg("sample_rate") = 44100.0);

  m.def(
      "detect",
      [](const std::filesystem::path& model_path, const std::filesystem::path& thresholds_path,
         const Eigen::MatrixXf& framewise) {
        const ModelBundle model = load_model(model_path);
        const DetectionThresholds thresholds = load_thresholds(thresholds_path);
        py::gil_scoped_release release;
        const StreamPredictions pred = predict_stream(model, framewise);
        StreamingDetector detector(thresholds, model.normalization);
        for (int i = 0; i < pred.frame_count(); ++i) detector.step(i, pred.frame(i));
        return detector.finish(pred.frame_count());
      },
      py::arg("model"), py::arg("thresholds"), py::arg("features"),
      "Runs both networks and the streaming detector over a (64, frames) feature matrix.");

  m.def(
      "segment",
      [](const std::vector<std::vector<double>>& raw_scores, std::vector<double> beta,
         std::vector<double> divisors) {
        // raw_scores[c][n]: accumulated score of class c at frame n.
        ConfidenceTrack track(static_cast<int>(raw_scores.size()));
        const int frames = raw_scores.empty() ? 0 : static_cast<int>(raw_scores[0].size());
        for (int n = 0; n < frames; ++n) {
          FrameContribution f;
          f.source = n;
          f.interval = {n, n};
          f.weights = Vector(raw_scores.size());
          for (std::size_t c = 0; c < raw_scores.size(); ++c) f.weights[c] = raw_scores[c][n];
          track.accumulate(f);
        }
        DetectionThresholds t{std::move(beta), std::move(divisors)};
        t.validate();
        return segment_events(track, t);
      },
      py::arg("raw_scores"), py::arg("beta"), py::arg("divisors"));

  m.def(
      "match_metrics",
      [](const std::vector<DetectedEvent>& detected, const std::vector<EventInterval>& truth,
         int num_classes) {
        const auto match = match_events(detected, truth);
        const auto report = compute_metrics(match, detected, truth, num_classes);
        py::dict out;
        out["tp"] = report.overall.counts.tp;
        out["fp"] = report.overall.counts.fp;
        out["fn"] = report.overall.counts.fn;
        out["f1"] = report.overall.f1;
        out["er"] = report.overall.er;
        return out;
      },
      py::arg("detected"), py::arg("truth"), py::arg("num_classes"));

  m.def(
      "check_gradients",
      [](int num_seeds, std::uint64_t base_seed) {
        py::gil_scoped_release release;
        return run_gradient_suite(num_seeds, base_seed).max_rel_error;
      },
      py::arg("num_seeds") = 5, py::arg("base_seed") = 1,
      "Maximum relative error of analytic vs finite-difference gradients.");
}
