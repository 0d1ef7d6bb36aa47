#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cmsa/checks.hpp"
#include "cmsa/metrics.hpp"
#include "cmsa/pipeline.hpp"

namespace py = pybind11;
using namespace cmsa;

namespace {

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  Tensor t;
  for (py::ssize_t i = 0; i < a.ndim(); ++i) t.shape.push_back(static_cast<int>(a.shape(i)));
  t.data.assign(a.data(), a.data() + a.size());
  return t;
}

py::array_t<double> array_from_tensor(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape.begin(), t.shape.end());
  py::array_t<double> a(shape);
  std::copy(t.data.begin(), t.data.end(), a.mutable_data());
  return a;
}

}  // namespace

PYBIND11_MODULE(_cmsa, m) {
  m.doc() = "causal multi-scale aggregation video segmentation core";

  py::class_<MetricReport>(m, "MetricReport")
      .def_readonly("s_measure", &MetricReport::s_measure)
      .def_readonly("e_measure", &MetricReport::e_measure)
      .def_readonly("weighted_f", &MetricReport::weighted_f)
      .def_readonly("dice", &MetricReport::dice)
      .def_readonly("iou", &MetricReport::iou)
      .def_readonly("mae", &MetricReport::mae)
      .def("__repr__", [](const MetricReport& r) { return r.to_json(); });

  m.def(
      "frame_metrics",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& pred,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& gt) {
        return frame_metrics(tensor_from_array(pred), tensor_from_array(gt));
      },
      py::arg("pred"), py::arg("gt"));

  m.def(
      "determinacy",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& prob) {
        return determinacy(tensor_from_array(prob));
      },
      py::arg("prob"), "1 - mean base-2 binary entropy of a probability map");

  m.def(
      "gen_clip",
      [](int height, int width, int num_frames, std::uint64_t seed, double contrast, double motion,
         double scale_jitter, double noise, int num_refs) {
        SynthConfig cfg;
        cfg.height = height;
        cfg.width = width;
        cfg.num_frames = num_frames;
        cfg.seed = seed;
        cfg.contrast = contrast;
        cfg.motion_amplitude = motion;
        cfg.scale_jitter = scale_jitter;
        cfg.noise_sigma = noise;
        VideoClip clip = gen_clip(cfg, num_refs);
        py::list frames, masks;
        for (const auto& f : clip.frames) frames.append(array_from_tensor(f));
        for (const auto& g : clip.masks) masks.append(array_from_tensor(g));
        return py::make_tuple(frames, masks);
      },
      py::arg("height") = 64, py::arg("width") = 64, py::arg("num_frames") = 6, py::arg("seed") = 1,
      py::arg("contrast") = 0.6, py::arg("motion") = 4.0, py::arg("scale_jitter") = 0.2,
      py::arg("noise") = 0.02, py::arg("num_refs") = 2,
      "synthetic moving-ellipse clip -> (frames [3,H,W] list, masks [H,W] list)");

  py::class_<Model>(m, "Model")
      .def(py::init([](const std::string& config_json) { return init_model(RunConfig::from_json(config_json)); }),
           py::arg("config_json"))
      .def_static("load", &load_model, py::arg("path"))
      .def("save", [](const Model& m_, const std::string& path) { save_model(m_, path); },
           py::arg("path"))
      .def_property_readonly("config_json", [](const Model& m_) { return m_.cfg.to_json(); })
      .def_property_readonly("num_params", [](const Model& m_) { return m_.params().total_count(); })
      .def(
          "train",
          [](Model& m_, const py::list& frames, const py::list& masks, int epochs, int batch_size) {
            std::vector<VideoClip> clips;
            VideoClip clip;
            for (const auto& f : frames)
              clip.frames.push_back(tensor_from_array(f.cast<py::array_t<double>>()));
            for (const auto& g : masks)
              clip.masks.push_back(tensor_from_array(g.cast<py::array_t<double>>()));
            int t = clip.length();
            for (int i = 0; i < t; ++i)
              clip.roles.push_back(i < m_.cfg.num_refs ? Role::Reference
                                                       : (i + 1 == t ? Role::Current : Role::Adjacent));
            clip.timestamps.resize(t);
            clips.push_back(std::move(clip));
            TrainResult res =
                train_model(m_, clips, epochs, batch_size, m_.cfg.lr, m_.cfg.weight_decay, nullptr);
            return py::make_tuple(res.steps, res.final_loss);
          },
          py::arg("frames"), py::arg("masks"), py::arg("epochs"), py::arg("batch_size") = 1,
          "overfit one clip; returns (steps, final_loss)")
      .def(
          "segment_stream",
          [](const Model& m_, const py::list& frames) {
            StreamingSegmenter seg(m_);
            py::list probs;
            for (const auto& f : frames) {
              auto step = seg.push(tensor_from_array(f.cast<py::array_t<double>>()));
              probs.append(array_from_tensor(step.prob));
            }
            return probs;
          },
          py::arg("frames"), "streaming inference; one probability map per frame");

  m.def(
      "run_checks",
      [](std::uint64_t seed) {
        py::list out;
        for (const auto& r : checks::run_all(seed)) {
          py::dict d;
          d["name"] = r.name;
          d["pass"] = r.pass;
          d["detail"] = r.detail;
          out.append(d);
        }
        return out;
      },
      py::arg("seed") = 1, "oracle verification suites");
}
