#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "macekit/deteval.hpp"
#include "macekit/error.hpp"
#include "macekit/ingest.hpp"
#include "macekit/mace.hpp"
#include "macekit/modality.hpp"
#include "macekit/project.hpp"
#include "macekit/stats.hpp"

namespace py = pybind11;
using namespace macekit;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Embedding dissimilarity (MACE) and detector evaluation";

  py::register_exception<Error>(m, "MacekitError", PyExc_ValueError);

  m.def(
      "read_embeddings",
      [](const std::string& path) {
        const auto set = load_embedding_set(path);
        std::vector<std::pair<std::string, std::int64_t>> keys;
        for (const auto& k : set.keys) keys.emplace_back(k.video_id, k.frame_idx);
        return py::make_tuple(set.matrix, keys);
      },
      py::arg("path"), "Load an embedding file and its optional key sidecar as (matrix, keys).");
  m.def(
      "write_embeddings",
      [](const std::string& path, const Matrix& x, const std::vector<std::pair<std::string, std::int64_t>>& keys) {
        EmbeddingSet set{x, {}};
        for (const auto& [v, i] : keys) set.keys.push_back({v, i});
        save_embeddings(set, path);
      },
      py::arg("path"), py::arg("matrix"), py::arg("keys") = std::vector<std::pair<std::string, std::int64_t>>{});

  py::class_<GaussianMoments>(m, "GaussianMoments")
      .def_readonly("mean", &GaussianMoments::mean)
      .def_readonly("cov", &GaussianMoments::cov)
      .def_readonly("n", &GaussianMoments::n);
  py::class_<MaceScore>(m, "MaceScore")
      .def_readonly("value", &MaceScore::value)
      .def_readonly("d", &MaceScore::d)
      .def_readonly("n_a", &MaceScore::n_a)
      .def_readonly("n_b", &MaceScore::n_b)
      .def_readonly("undersampled", &MaceScore::undersampled)
      .def("__repr__", [](const MaceScore& s) { return "MaceScore(value=" + std::to_string(s.value) + ")"; });

  m.def("fit_gaussian", py::overload_cast<const Matrix&>(&fit_gaussian), py::arg("rows"));
  m.def("matrix_sqrt_psd", &matrix_sqrt_psd, py::arg("s"));
  m.def("frechet_distance", &frechet_distance, py::arg("a"), py::arg("b"));
  m.def("mace_between", py::overload_cast<const Matrix&, const Matrix&>(&mace_between), py::arg("a"), py::arg("b"));

  m.def(
      "median_filter",
      [](const std::vector<std::uint8_t>& stream, int window, int votes) {
        return median_filter(stream, FilterConfig{window, votes, 0.5});
      },
      py::arg("stream"), py::arg("window") = 7, py::arg("votes") = 4);
  m.def(
      "iou",
      [](std::array<double, 4> a, std::array<double, 4> b) {
        return iou(Box{a[0], a[1], a[2], a[3]}, Box{b[0], b[1], b[2], b[3]});
      },
      py::arg("a"), py::arg("b"));
  m.def(
      "tpr_at_fapm",
      [](const std::vector<std::pair<double, double>>& points, double target) {
        std::vector<CurvePoint> pts;
        for (const auto& [f, t] : points) pts.push_back({f, t});
        const auto r = tpr_at_fapm(make_envelope(std::move(pts)), target);
        return py::make_tuple(r.tpr, r.clamped);
      },
      py::arg("points"), py::arg("fapm"), "Interpolated TPR on the envelope of (fapm, tpr) points.");

  py::class_<TestResult>(m, "TestResult")
      .def_readonly("statistic", &TestResult::statistic)
      .def_readonly("p_value", &TestResult::p_value)
      .def_readonly("p_floored", &TestResult::p_floored)
      .def_readonly("ci_lo", &TestResult::ci_lo)
      .def_readonly("ci_hi", &TestResult::ci_hi)
      .def_readonly("margin", &TestResult::margin)
      .def_readonly("mean", &TestResult::mean)
      .def_property_readonly("decision", [](const TestResult& r) { return std::string(to_string(r.decision)); });

  m.def("quantile", [](const std::vector<double>& x, double q) { return quantile(x, q); }, py::arg("samples"),
        py::arg("q"));
  m.def("percentile_ci", [](const std::vector<double>& x, double level) { return percentile_ci(x, level); },
        py::arg("samples"), py::arg("level") = 0.95);
  m.def(
      "z_test_two_sided",
      [](const std::vector<double>& a, const std::vector<double>& b, double alpha) {
        return z_test_two_sided(a, b, alpha);
      },
      py::arg("a"), py::arg("b"), py::arg("alpha") = 0.05);
  m.def(
      "superiority", [](const std::vector<double>& d, double alpha) { return superiority_one_sided(d, alpha); },
      py::arg("deltas"), py::arg("alpha") = 0.05);
  m.def(
      "non_inferiority",
      [](const std::vector<double>& d, double margin, double alpha) { return non_inferiority(d, margin, alpha); },
      py::arg("deltas"), py::arg("margin") = kDefaultMargin, py::arg("alpha") = 0.05);

  m.def(
      "pca_2d", [](const Matrix& x) { return pca_2d(x).coords; }, py::arg("x"));
  m.def(
      "tsne_2d",
      [](const Matrix& x, double perplexity, int iterations, double learning_rate, std::uint64_t seed, unsigned threads) {
        TsneConfig cfg;
        cfg.perplexity = perplexity;
        cfg.iterations = iterations;
        cfg.learning_rate = learning_rate;
        cfg.seed = seed;
        cfg.threads = threads;
        const auto r = tsne_2d(x, cfg);
        return py::make_tuple(r.projection.coords, r.initial_kl, r.final_kl);
      },
      py::arg("x"), py::arg("perplexity") = 30.0, py::arg("iterations") = 1000,
      py::arg("learning_rate") = 200.0, py::arg("seed") = 17,
      py::arg("threads") = 1);

  m.def(
      "rgb_to_hsv",
      [](double r, double g, double b) {
        const auto h = rgb_to_hsv(r, g, b);
        return py::make_tuple(h.h, h.s, h.v);
      },
      py::arg("r"), py::arg("g"), py::arg("b"));
}
